use std::fs;
use std::path::PathBuf;

use oim::synthdata::{generate_pair, sample_features, CorrelationMatrix, Family, OutcomeSpec, PerturbationSpec};
use oim::tabular::{load_csv, save_csv, ColumnKind, SchemaSpec};
use oim::{Dataset, Error, OutcomeFamily};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn shipped(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn german() -> Dataset {
    let schema = SchemaSpec::from_path(&shipped("schemas/german_credit.yaml")).unwrap();
    load_csv(&shipped("data/german_credit.csv"), &schema).unwrap()
}

#[test]
fn german_credit_loads_all_applicants() {
    let data = german();
    assert_eq!(data.n(), 1000);
    assert_eq!(data.provenance().rows_read, 1000);
    assert!(data.provenance().dropped_missing.is_empty());
    assert_eq!(data.protected_levels(), vec![0.0, 1.0]);
    assert_eq!(data.family(), OutcomeFamily::Binary);
    // 20 source attributes, categoricals expanded.
    let mut sources = data.provenance().column_sources.clone();
    sources.dedup();
    assert_eq!(sources.len(), 20);
    assert!(data.d() > 20);
    let positives = data.outcome().iter().filter(|&&y| y == 1.0).count();
    assert_eq!(positives, 700);
}

#[test]
fn german_one_hot_blocks_sum_to_one() {
    let data = german();
    let sources = &data.provenance().column_sources;
    let schema = SchemaSpec::from_path(&shipped("schemas/german_credit.yaml")).unwrap();
    for f in schema.features.iter().filter(|f| f.kind == ColumnKind::Categorical) {
        let block: Vec<usize> = (0..data.d()).filter(|&j| sources[j] == f.name).collect();
        assert!(block.len() >= 2, "{}", f.name);
        for i in 0..data.n() {
            let s: f64 = block.iter().map(|&j| data.row(i)[j]).sum();
            assert_eq!(s, 1.0, "{} row {i}", f.name);
        }
    }
}

#[test]
fn compas_keeps_two_races_and_reports_the_rest() {
    let schema = SchemaSpec::from_path(&shipped("schemas/compas.yaml")).unwrap();
    let data = load_csv(&shipped("data/compas.csv"), &schema).unwrap();
    let p = data.provenance();
    assert_eq!(p.rows_read, 7214);
    assert_eq!(data.n() + p.excluded_by_filter.len() + p.dropped_missing.len(), p.rows_read);
    assert!(!p.excluded_by_filter.is_empty());
    assert_eq!(data.protected_levels(), vec![0.0, 1.0]);
    assert!(!data.feature_names().iter().any(|n| n == "race" || n == "two_year_recid"));
}

fn synthetic(n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sigma = CorrelationMatrix::with_pair(3, 0, 2, 0.4).unwrap();
    let sample = sample_features(n, &sigma, &mut rng).unwrap();
    let spec = OutcomeSpec::linear(Family::NormalIdentity, vec![1.5, -0.3]);
    generate_pair(&sample, &spec, &PerturbationSpec::Direct { beta: 2.0, centered: false }, &mut rng)
        .unwrap()
        .perturbed
}

#[test]
fn save_then_load_is_bit_exact() {
    let tmp = TempDir::new().unwrap();
    let data = synthetic(100);
    let path = tmp.path().join("d.csv");
    save_csv(&data, &path).unwrap();
    let back = load_csv(&path, &SchemaSpec::numeric_for(&data)).unwrap();
    assert_eq!(back.features(), data.features());
    assert_eq!(back.protected(), data.protected());
    assert_eq!(back.outcome(), data.outcome());
    assert_eq!(back.feature_names(), data.feature_names());
}

#[test]
fn columns_are_matched_by_name_not_position() {
    let tmp = TempDir::new().unwrap();
    let data = synthetic(50);
    let path = tmp.path().join("d.csv");
    save_csv(&data, &path).unwrap();
    let mut schema = SchemaSpec::numeric_for(&data);
    schema.features.reverse();
    let back = load_csv(&path, &schema).unwrap();
    for i in 0..data.n() {
        let mut row = data.row(i).to_vec();
        row.reverse();
        assert_eq!(back.row(i), row.as_slice());
    }
    assert_eq!(back.outcome(), data.outcome());
}

#[test]
fn unwritable_path_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let err = save_csv(&synthetic(5), &tmp.path().join("missing/dir/d.csv")).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
}

#[test]
fn schema_rejects_overlapping_columns() {
    let text = "features:\n  - { name: a, kind: continuous }\n  - { name: z, kind: continuous }\nprotected: { name: z }\noutcome: { name: y }\n";
    assert!(matches!(SchemaSpec::from_yaml_str(text), Err(Error::Schema(_))));
}

#[test]
fn parse_errors_carry_row_and_column() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "a,z,y\n1,0,1\n2,1,0\nx3,0,1\n").unwrap();
    let schema =
        SchemaSpec::from_yaml_str("features:\n  - { name: a, kind: continuous }\nprotected: { name: z }\noutcome: { name: y }\n")
            .unwrap();
    match load_csv(&path, &schema) {
        Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (3, "a")),
        other => panic!("{other:?}"),
    }
}
