//! The `oim` command line: dataset generation, single-model fit and
//! evaluate, checkpointed experiment runs, and reports.
//!
//! Output files of an experiment directory:
//!
//! - `results.csv`: `condition,repeat,algorithm,metric,value`, one row per
//!   repeat, learner, condition and metric. Failed fits appear as metric
//!   `failed` with value 1.
//! - `summary.csv`: `condition,algorithm,metric,repeats,failures,mean,std,ci_low,ci_high,ci_method`.
//! - `units/<unit>.csv`: per-unit checkpoints in the `results.csv` layout.
//! - `manifest.yaml`: config snapshot, seed, stage status and SHA-256 of
//!   every file above.
//!
//! Relative `--out` paths are resolved against `OIM_OUTPUT_ROOT` when it is
//! set, and against the working directory otherwise.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{fit_algorithm, traditional, Algorithm, AlgorithmSettings, TrainedModel};
use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::experiments::{
    summary_table, ExperimentConfig, ExperimentResults, Experiment, HypothesisKind, ResultRow, Scenario, SummaryRow,
    Unit,
};
use crate::loss::Loss;
use crate::metrics::{accuracy, bootstrap_ci, cross_risk, disparities, resilience_ratio, EvalReport};
use crate::mlp::MlpConfig;
use crate::model::{Hypothesis, TrainOptions};
use crate::oim::{MixingDistribution, MixingScale};
use crate::predictor::{predict_dataset, Predictor};
use crate::tabular::{format_float, load_csv, ColumnKind, FeatureColumn, OutcomeColumn, ProtectedColumn, SchemaSpec};

pub const OUTPUT_ROOT_ENV: &str = "OIM_OUTPUT_ROOT";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.yaml";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const UNITS_DIR: &str = "units";
pub const DATA_DIR: &str = "data";

#[derive(Debug, Parser)]
#[command(name = "oim", version, about = "Optimal interventional mixtures and resilience experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw the datasets of every unit of a scenario and write them as CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Fit one algorithm on a CSV dataset and write the model file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Schema for the CSV; without it the last two columns are taken as
        /// the protected attribute and the outcome.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        algorithm: String,
        /// glm-identity, glm-logit or mlp; defaults by outcome type.
        #[arg(long)]
        hypothesis: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long, value_enum, default_value_t = ScaleArg::Link)]
        mixing_scale: ScaleArg,
        /// Feature index repaired by chained-oim.
        #[arg(long)]
        perturbed_feature: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model file on a dataset; with --reference, also cross-risk and
    /// resilience against the clean reference data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Seed of the bootstrap intervals.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EvalFormat::Table)]
        format: EvalFormat,
    },
    /// Run a scenario, checkpointing every unit; rerunning resumes.
    Experiment {
        /// Scenario name; optional when the config names one.
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Stop after this many newly completed units, leaving the run
        /// resumable.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Render the results of an experiment directory.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Output,
    Link,
}

impl From<ScaleArg> for MixingScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Output => MixingScale::Output,
            ScaleArg::Link => MixingScale::Link,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalFormat {
    Table,
    Yaml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Plotdata,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

/// Runs one command and returns what it prints on success.
pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Generate {
            config,
            out,
            seed,
            repeats,
        } => {
            let config = load_config(&config, seed, repeats)?;
            let out = output_path(out, &format!("data/{}", config.scenario.name()));
            let files = cmd_generate(&config, &out)?;
            Ok(format!("wrote {} dataset files to {}\n", files.len(), out.join(DATA_DIR).display()))
        }
        Command::Fit {
            data,
            schema,
            algorithm,
            hypothesis,
            seed,
            ridge,
            mixing_scale,
            perturbed_feature,
            out,
        } => {
            let data = load_dataset(&data, schema.as_deref())?;
            let algorithm: Algorithm = algorithm.parse()?;
            let kind = match hypothesis {
                Some(h) => HypothesisKind::parse(&h)?,
                None => HypothesisKind::for_family(data.family()),
            };
            let options = FitOptions {
                hypothesis: kind.build(&MlpConfig::default()),
                seed,
                ridge,
                scale: mixing_scale.into(),
                perturbed_feature,
            };
            let out = output_path(Some(out), "model.yaml");
            let file = cmd_fit(&data, algorithm, &options, &out)?;
            let mut text = format!(
                "{} on {} rows: training risk {}\nmodel written to {}\n",
                file.algorithm,
                file.training_rows,
                format_float(file.training_risk),
                out.display()
            );
            if let Some(m) = &file.mixing {
                let _ = writeln!(text, "mixing weights {:?} over levels {:?}", m.weights, m.support);
            }
            Ok(text)
        }
        Command::Evaluate {
            model,
            data,
            schema,
            reference,
            seed,
            format,
        } => {
            let file = ModelFile::read(&model)?;
            let data = load_dataset(&data, schema.as_deref())?;
            let reference = reference.map(|r| load_dataset(&r, schema.as_deref())).transpose()?;
            let report = cmd_evaluate(&file, &data, reference.as_ref(), seed)?;
            match format {
                EvalFormat::Table => Ok(report.to_table()),
                EvalFormat::Yaml => serde_yaml::to_string(&report).map_err(|e| Error::Config(e.to_string())),
            }
        }
        Command::Experiment {
            scenario,
            config,
            out,
            seed,
            repeats,
            jobs,
            stop_after,
        } => {
            let config = experiment_config(scenario.as_deref(), config.as_deref(), seed, repeats)?;
            let out = output_path(out, &format!("runs/{}", config.scenario.name()));
            let status = cmd_experiment(&config, &out, jobs, stop_after)?;
            Ok(match status.results {
                Some(results) => format!(
                    "{}\n{} units ({} resumed); results in {}\n",
                    results.to_table(),
                    status.units_total,
                    status.resumed,
                    out.display()
                ),
                None => format!(
                    "stopped after {} of {} units; rerun the same command to resume\n",
                    status.units_done, status.units_total
                ),
            })
        }
        Command::Report { dir, format } => cmd_report(&dir, format),
    }
}

/// Resolves `out` against the output root, falling back to `default`.
pub fn output_path(out: Option<PathBuf>, default: &str) -> PathBuf {
    let out = out.unwrap_or_else(|| PathBuf::from(default));
    if out.is_absolute() {
        return out;
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(out),
        _ => out,
    }
}

fn load_config(path: &Path, seed: Option<u64>, repeats: Option<usize>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(path)?;
    apply_overrides(&mut config, seed, repeats)?;
    Ok(config)
}

fn apply_overrides(config: &mut ExperimentConfig, seed: Option<u64>, repeats: Option<usize>) -> Result<()> {
    if let Some(s) = seed {
        config.seed = s;
    }
    if repeats.is_some() {
        config.repeats = repeats;
    }
    config.validate()
}

/// The config of an experiment command: the file when given, else the
/// scenario defaults; a scenario argument must agree with the file.
pub fn experiment_config(
    scenario: Option<&str>,
    config: Option<&Path>,
    seed: Option<u64>,
    repeats: Option<usize>,
) -> Result<ExperimentConfig> {
    let scenario = scenario.map(Scenario::parse).transpose()?;
    let mut c = match (config, scenario) {
        (Some(path), s) => {
            let c = ExperimentConfig::from_path(path)?;
            if let Some(s) = s.filter(|s| *s != c.scenario) {
                return Err(Error::Config(format!(
                    "scenario `{}` does not match `{}` in {}",
                    s.name(),
                    c.scenario.name(),
                    path.display()
                )));
            }
            c
        }
        (None, Some(s)) => ExperimentConfig::new(s),
        (None, None) => return Err(Error::Usage("name a scenario or pass --config".into())),
    };
    apply_overrides(&mut c, seed, repeats)?;
    Ok(c)
}

/// Loads a CSV with `schema`, or one written by this tool when no schema is
/// given: every column but the last two is a continuous feature, then the
/// protected attribute, then the outcome.
pub fn load_dataset(path: &Path, schema: Option<&Path>) -> Result<Dataset> {
    let schema = match schema {
        Some(s) => SchemaSpec::from_path(s)?,
        None => positional_schema(path)?,
    };
    load_csv(path, &schema)
}

fn positional_schema(path: &Path) -> Result<SchemaSpec> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 3 {
        return Err(Error::Schema(format!(
            "{} has {} columns; without a schema it needs features, a protected column and an outcome",
            path.display(),
            header.len()
        )));
    }
    let (features, rest) = header.split_at(header.len() - 2);
    Ok(SchemaSpec {
        name: String::new(),
        features: features
            .iter()
            .map(|name| FeatureColumn {
                name: name.clone(),
                kind: ColumnKind::Continuous,
            })
            .collect(),
        protected: ProtectedColumn {
            name: rest[0].clone(),
            positive: None,
            allowed: None,
        },
        outcome: OutcomeColumn {
            name: rest[1].clone(),
            positive: None,
            family: None,
        },
    })
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Writes through a temporary sibling so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// A file path relative to the run directory and its SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Pending,
    Complete,
}

/// One unit of a run and, once complete, its checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub id: String,
    pub status: StageStatus,
    #[serde(default)]
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub scenario: Scenario,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub created: String,
    pub updated: String,
    pub complete: bool,
    pub stages: Vec<Stage>,
    /// Aggregated outputs, present once the run is complete.
    #[serde(default)]
    pub outputs: Vec<FileEntry>,
}

impl RunManifest {
    fn new(command: &str, config: &ExperimentConfig, units: &[Unit]) -> Self {
        let t = now();
        Self {
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            scenario: config.scenario,
            master_seed: config.seed,
            config: config.clone(),
            created: t.clone(),
            updated: t,
            complete: false,
            stages: units
                .iter()
                .map(|u| Stage {
                    id: u.id.clone(),
                    status: StageStatus::Pending,
                    files: Vec::new(),
                })
                .collect(),
            outputs: Vec::new(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_yaml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", dir.join(MANIFEST_FILE).display())))
    }

    fn write(&mut self, dir: &Path) -> Result<()> {
        self.updated = now();
        let text = serde_yaml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    /// Every file the manifest references, in stages and outputs.
    pub fn files(&self) -> impl Iterator<Item = &FileEntry> {
        self.stages.iter().flat_map(|s| &s.files).chain(&self.outputs)
    }

    /// Checks that every referenced file exists and matches its checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in self.files() {
            let path = dir.join(&f.path);
            let actual = sha256_file(&path)?;
            if actual != f.sha256 {
                return Err(Error::Numeric(format!("checksum mismatch for {}", path.display())));
            }
        }
        Ok(())
    }
}

fn record(dir: &Path, relative: String) -> Result<FileEntry> {
    Ok(FileEntry {
        sha256: sha256_file(&dir.join(&relative))?,
        path: relative,
    })
}

fn slug(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Writes the datasets of every unit to `out/data`, named
/// `<unit>[_<condition>]_<role>.csv`, and a manifest with their checksums.
/// Returns the dataset paths.
pub fn cmd_generate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let experiment = Experiment::new(config.clone())?;
    let units = experiment.units();
    fs::create_dir_all(out.join(DATA_DIR))?;
    let mut manifest = RunManifest::new("generate", config, &units);
    let mut paths = Vec::new();
    for (unit, stage) in units.iter().zip(manifest.stages.iter_mut()) {
        let generated = experiment.generate(unit)?;
        let single = generated.len() == 1;
        for g in generated {
            for (role, data) in &g.files {
                let name = if single {
                    format!("{}_{role}.csv", unit.id)
                } else {
                    format!("{}_{}_{role}.csv", unit.id, slug(&g.condition))
                };
                let relative = format!("{DATA_DIR}/{name}");
                crate::tabular::save_csv(data, &out.join(&relative))?;
                stage.files.push(record(out, relative)?);
                paths.push(out.join(DATA_DIR).join(name));
            }
        }
        stage.status = StageStatus::Complete;
    }
    manifest.complete = true;
    manifest.write(out)?;
    info!("generated {} files for {} units", paths.len(), units.len());
    Ok(paths)
}

/// Settings of a single fit from the command line.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub hypothesis: Hypothesis,
    pub seed: u64,
    pub ridge: f64,
    pub scale: MixingScale,
    pub perturbed_feature: Option<usize>,
}

impl FitOptions {
    fn settings(&self) -> AlgorithmSettings {
        let mut s = AlgorithmSettings::new(self.hypothesis.clone()).with_seed(self.seed).with_ridge(self.ridge);
        s.oim.scale = self.scale;
        s.perturbed_feature = self.perturbed_feature;
        s
    }
}

/// A fitted model with what is needed to evaluate it later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub artifact_version: String,
    pub algorithm: Algorithm,
    pub hypothesis: Hypothesis,
    pub seed: u64,
    pub ridge: f64,
    pub loss: Loss,
    pub feature_names: Vec<String>,
    pub protected: String,
    pub outcome: String,
    pub training_rows: usize,
    pub training_risk: f64,
    /// The mixing distribution of OIM models, repeated here for inspection.
    #[serde(default)]
    pub mixing: Option<MixingDistribution>,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_yaml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let text = serde_yaml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }
}

pub fn cmd_fit(data: &Dataset, algorithm: Algorithm, options: &FitOptions, out: &Path) -> Result<ModelFile> {
    let fit = fit_algorithm(algorithm, data, &options.settings())?;
    let file = ModelFile {
        artifact_version: ARTIFACT_VERSION.to_string(),
        algorithm,
        hypothesis: options.hypothesis.clone(),
        seed: options.seed,
        ridge: options.ridge,
        loss: fit.model.loss(),
        feature_names: data.feature_names().to_vec(),
        protected: data.protected_name().to_string(),
        outcome: data.outcome_name().to_string(),
        training_rows: data.n(),
        training_risk: fit.training_risk,
        mixing: fit.model.as_oim().map(|m| m.mixing.clone()),
        model: fit.model,
    };
    file.write(out)?;
    Ok(file)
}

fn check_columns(file: &ModelFile, data: &Dataset) -> Result<()> {
    if data.feature_names() != file.feature_names.as_slice() {
        return Err(Error::Schema(format!(
            "model expects features {:?}, data has {:?}",
            file.feature_names,
            data.feature_names()
        )));
    }
    Ok(())
}

const EVAL_LEVEL: f64 = 0.95;
const EVAL_RESAMPLES: usize = 1000;

/// Risk on `data`, decision metrics for binary outcomes and, with a clean
/// reference, cross-risk and resilience. Intervals are percentile bootstraps
/// of the per-row losses.
pub fn cmd_evaluate(file: &ModelFile, data: &Dataset, reference: Option<&Dataset>, seed: u64) -> Result<EvalReport> {
    check_columns(file, data)?;
    let model = &file.model;
    let loss = model.loss();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EvalReport::default();
    let row_losses = |d: &Dataset| -> Result<Vec<f64>> {
        let p = predict_dataset(model, d)?;
        Ok(d.outcome().iter().zip(&p).map(|(&y, &p)| loss.value(y, p)).collect())
    };
    let losses = row_losses(data)?;
    report.risk = Some(loss.mean(data.outcome(), &predict_dataset(model, data)?));
    report.ci.insert("risk".into(), bootstrap_ci(&losses, EVAL_LEVEL, EVAL_RESAMPLES, &mut rng)?);
    if data.family() == OutcomeFamily::Binary && model.output_kind() == crate::predictor::OutputKind::Probability {
        let decisions = model.decisions(data)?;
        report.accuracy = Some(accuracy(&decisions, data.outcome()));
        report.set_disparities(disparities(&decisions, data.outcome(), data.protected())?);
    }
    if let Some(reference) = reference {
        check_columns(file, reference)?;
        let cr = cross_risk(reference, model, loss)?;
        report.cross_risk = Some(cr);
        let cr_losses = row_losses(reference)?;
        report
            .ci
            .insert("cross_risk".into(), bootstrap_ci(&cr_losses, EVAL_LEVEL, EVAL_RESAMPLES, &mut rng)?);
        let options = TrainOptions {
            seed: Some(file.seed),
            ridge: file.ridge,
        };
        let base = traditional(reference, &file.hypothesis, false, options)?;
        let reference_risk = cross_risk(reference, &base, loss)?;
        report.set_resilience(resilience_ratio(reference_risk, cr));
    }
    Ok(report)
}

/// What a (possibly partial) experiment invocation achieved.
#[derive(Debug, Clone)]
pub struct RunStatus {
    pub units_total: usize,
    pub units_done: usize,
    /// Units taken from valid checkpoints instead of being run.
    pub resumed: usize,
    /// Present when every unit is done.
    pub results: Option<ExperimentResults>,
}

fn unit_file(id: &str) -> String {
    format!("{UNITS_DIR}/{id}.csv")
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["condition", "repeat", "algorithm", "metric", "value"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in summary {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Rows of a completed checkpoint whose file still matches its checksum.
fn checkpoint(dir: &Path, stage: &Stage) -> Option<Vec<ResultRow>> {
    if stage.status != StageStatus::Complete {
        return None;
    }
    let entry = stage.files.first()?;
    let path = dir.join(&entry.path);
    match sha256_file(&path) {
        Ok(sum) if sum == entry.sha256 => read_rows(&path).ok(),
        _ => {
            warn!("checkpoint {} is missing or altered; rerunning unit {}", path.display(), stage.id);
            None
        }
    }
}

/// Runs `config` into `out`, resuming completed units of an earlier run of
/// the same config. With `stop_after`, returns once that many new units are
/// checkpointed.
pub fn cmd_experiment(config: &ExperimentConfig, out: &Path, jobs: usize, stop_after: Option<usize>) -> Result<RunStatus> {
    let experiment = Experiment::new(config.clone())?;
    let units = experiment.units();
    fs::create_dir_all(out.join(UNITS_DIR))?;

    let mut manifest = RunManifest::new("experiment", config, &units);
    let mut done: BTreeMap<usize, Vec<ResultRow>> = BTreeMap::new();
    if out.join(MANIFEST_FILE).exists() {
        let previous = RunManifest::read(out)?;
        if previous.config != *config || previous.command != "experiment" {
            return Err(Error::Config(format!(
                "{} holds a run of a different config; choose another --out",
                out.display()
            )));
        }
        manifest.created = previous.created.clone();
        for (i, stage) in previous.stages.iter().enumerate() {
            if stage.id != units[i].id {
                continue;
            }
            if let Some(rows) = checkpoint(out, stage) {
                manifest.stages[i] = stage.clone();
                done.insert(i, rows);
            }
        }
    }
    let resumed = done.len();
    manifest.write(out)?;

    let pending: Vec<&Unit> = units.iter().filter(|u| !done.contains_key(&u.index)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<ResultRow>>)>();
    let mut first_error = None;
    let mut fresh = 0;
    std::thread::scope(|scope| -> Result<()> {
        let stop = &stop;
        let experiment = &experiment;
        let pending = &pending;
        let pool = &pool;
        scope.spawn(move || {
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, unit| {
                    if stop.load(Ordering::Relaxed) {
                        return;
                    }
                    let _ = tx.send((unit.index, experiment.run_unit(unit)));
                })
            })
        });
        for (index, result) in rx {
            if stop.load(Ordering::Relaxed) {
                continue;
            }
            let rows = match result {
                Ok(rows) => rows,
                Err(e) => {
                    stop.store(true, Ordering::Relaxed);
                    first_error = Some(e);
                    continue;
                }
            };
            let relative = unit_file(&units[index].id);
            write_rows(&out.join(&relative), &rows)?;
            manifest.stages[index].files = vec![record(out, relative)?];
            manifest.stages[index].status = StageStatus::Complete;
            manifest.write(out)?;
            done.insert(index, rows);
            fresh += 1;
            if stop_after.is_some_and(|n| fresh >= n) {
                stop.store(true, Ordering::Relaxed);
            }
        }
        Ok(())
    })?;
    if let Some(e) = first_error {
        return Err(e);
    }

    let mut status = RunStatus {
        units_total: units.len(),
        units_done: done.len(),
        resumed,
        results: None,
    };
    if done.len() < units.len() {
        return Ok(status);
    }
    let rows: Vec<ResultRow> = done.into_values().flatten().collect();
    let results = experiment.finish(rows)?;
    write_rows(&out.join(RESULTS_FILE), &results.rows)?;
    write_summary(&out.join(SUMMARY_FILE), &results.summary)?;
    manifest.outputs = vec![record(out, RESULTS_FILE.into())?, record(out, SUMMARY_FILE.into())?];
    manifest.complete = true;
    manifest.write(out)?;
    status.results = Some(results);
    Ok(status)
}

/// Summary of an experiment directory, rendered as a table or as plot-ready
/// CSV columns.
pub fn cmd_report(dir: &Path, format: ReportFormat) -> Result<String> {
    let summary_path = dir.join(SUMMARY_FILE);
    if !summary_path.exists() {
        return Err(Error::NoResults(dir.to_path_buf()));
    }
    let summary = read_summary(&summary_path)?;
    if summary.is_empty() {
        return Err(Error::NoResults(dir.to_path_buf()));
    }
    let scenario = RunManifest::read(dir).ok().map(|m| m.scenario);
    match format {
        ReportFormat::Table => Ok(summary_table(&summary)),
        ReportFormat::Plotdata => match scenario {
            Some(Scenario::CorrSweep) => corr_sweep_plotdata(&summary),
            Some(Scenario::NonlinearEnsemble) => cdf_plotdata(&read_rows(&dir.join(RESULTS_FILE))?),
            _ => generic_plotdata(&summary),
        },
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

/// Parses a `beta=..;r=..` condition label.
fn sweep_point(condition: &str) -> Option<(f64, f64)> {
    let mut beta = None;
    let mut r = None;
    for part in condition.split(';') {
        match part.split_once('=')? {
            ("beta", v) => beta = v.parse().ok(),
            ("r", v) => r = v.parse().ok(),
            _ => {}
        }
    }
    Some((beta?, r?))
}

/// Mean resilience and its interval per correlation and algorithm; the
/// perturbation strength comes last because a sweep may hold several.
fn corr_sweep_plotdata(summary: &[SummaryRow]) -> Result<String> {
    let mut rows = Vec::new();
    for s in summary.iter().filter(|s| s.metric == "resilience") {
        let (beta, r) = sweep_point(&s.condition)
            .ok_or_else(|| Error::Config(format!("unexpected corr-sweep condition `{}`", s.condition)))?;
        rows.push(vec![
            format_float(r),
            s.algorithm.clone(),
            format_float(s.mean),
            format_float(s.ci_low),
            format_float(s.ci_high),
            format_float(beta),
        ]);
    }
    csv_text(&["correlation", "algorithm", "mean", "ci_low", "ci_high", "beta"], rows)
}

/// Empirical CDF points of the per-repeat resilience ratios to OIM.
fn cdf_plotdata(results: &[ResultRow]) -> Result<String> {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.metric == "ratio_to_oim") {
        groups.entry((r.condition.clone(), r.algorithm.clone())).or_default().push(r.value);
    }
    let mut rows = Vec::new();
    for ((condition, algorithm), mut v) in groups {
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        for (i, x) in v.into_iter().enumerate() {
            rows.push(vec![
                condition.clone(),
                algorithm.clone(),
                format_float(x),
                format_float((i + 1) as f64 / n),
            ]);
        }
    }
    csv_text(&["condition", "algorithm", "ratio", "cdf"], rows)
}

fn generic_plotdata(summary: &[SummaryRow]) -> Result<String> {
    let rows = summary
        .iter()
        .map(|s| {
            vec![
                s.condition.clone(),
                s.algorithm.clone(),
                s.metric.clone(),
                format_float(s.mean),
                format_float(s.ci_low),
                format_float(s.ci_high),
            ]
        })
        .collect();
    csv_text(&["condition", "algorithm", "metric", "mean", "ci_low", "ci_high"], rows)
}
