//! CSV ingestion driven by a schema file, and CSV output.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// The protected column. With `positive`, cells equal to it map to 1 and
/// all others to 0; without it, cells are parsed as numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectedColumn {
    pub name: String,
    #[serde(default)]
    pub positive: Option<String>,
    /// Rows whose value is not listed here are excluded and reported.
    #[serde(default)]
    pub allowed: Option<Vec<String>>,
}

/// The outcome column. With `positive`, the outcome is binary by label;
/// without it, cells are parsed as numbers of the given family (binary when
/// every value is 0 or 1 and no family is given).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeColumn {
    pub name: String,
    #[serde(default)]
    pub positive: Option<String>,
    #[serde(default)]
    pub family: Option<OutcomeFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSpec {
    #[serde(default)]
    pub name: String,
    pub features: Vec<FeatureColumn>,
    pub protected: ProtectedColumn,
    pub outcome: OutcomeColumn,
}

impl SchemaSpec {
    pub fn from_yaml_str(text: &str) -> Result<Self> {
        let schema: Self = serde_yaml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_yaml_str(&std::fs::read_to_string(path)?)
    }

    /// All-numeric schema matching the columns [`save_csv`] writes for `data`.
    pub fn numeric_for(data: &Dataset) -> Self {
        Self {
            name: String::new(),
            features: data
                .feature_names()
                .iter()
                .map(|n| FeatureColumn {
                    name: n.clone(),
                    kind: ColumnKind::Continuous,
                })
                .collect(),
            protected: ProtectedColumn {
                name: data.protected_name().to_string(),
                positive: None,
                allowed: None,
            },
            outcome: OutcomeColumn {
                name: data.outcome_name().to_string(),
                positive: None,
                family: Some(data.family()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("feature `{}` listed twice", f.name)));
            }
        }
        for special in [&self.protected.name, &self.outcome.name] {
            if seen.contains(special.as_str()) {
                return Err(Error::Schema(format!("`{special}` is both a feature and the protected or outcome column")));
            }
        }
        if self.protected.name == self.outcome.name {
            return Err(Error::Schema("protected and outcome columns must differ".into()));
        }
        if self.outcome.positive.is_some() && self.outcome.family == Some(OutcomeFamily::Continuous) {
            return Err(Error::Schema("a labelled outcome is binary".into()));
        }
        Ok(())
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "?" | "null")
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|e| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{cell}`: {e}"),
    })
}

/// Loads a CSV file with a header row. Categorical features are one-hot
/// encoded into columns named `column=level`, levels sorted.
pub fn load_csv(path: &Path, schema: &SchemaSpec) -> Result<Dataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no header", path.display())));
    }
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let locate = |name: &str| index.get(name).copied().ok_or_else(|| Error::MissingColumn(name.to_string()));
    let feature_idx: Vec<usize> = schema.features.iter().map(|f| locate(&f.name)).collect::<Result<_>>()?;
    let z_idx = locate(&schema.protected.name)?;
    let y_idx = locate(&schema.outcome.name)?;

    let mut provenance = Provenance {
        source: path.display().to_string(),
        ..Provenance::default()
    };
    let mut kept: Vec<csv::StringRecord> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record?;
        provenance.rows_read += 1;
        let cells = feature_idx.iter().chain([&z_idx, &y_idx]).map(|&i| record.get(i).unwrap_or(""));
        if cells.clone().any(is_missing) {
            provenance.dropped_missing.push(row);
            continue;
        }
        let z = record.get(z_idx).unwrap_or("").trim();
        if let Some(allowed) = &schema.protected.allowed {
            if !allowed.iter().any(|a| a == z) {
                provenance.excluded_by_filter.push(row);
                continue;
            }
        }
        kept.push(record);
    }
    if provenance.rows_read == 0 {
        return Err(Error::EmptyDataset(format!("{} has no data rows", path.display())));
    }
    if !provenance.dropped_missing.is_empty() {
        warn!("{}: dropped {} rows with missing cells", path.display(), provenance.dropped_missing.len());
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset(format!("{}: no rows left after filtering", path.display())));
    }
    // Original 1-based data-row index of each kept record.
    let mut dropped: Vec<usize> = provenance.dropped_missing.iter().chain(&provenance.excluded_by_filter).copied().collect();
    dropped.sort_unstable();
    let mut source_rows = Vec::with_capacity(kept.len());
    let mut d_iter = dropped.iter().peekable();
    for row in 1..=provenance.rows_read {
        if d_iter.peek() == Some(&&row) {
            d_iter.next();
        } else {
            source_rows.push(row);
        }
    }

    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (f, &ci) in schema.features.iter().zip(&feature_idx) {
        match f.kind {
            ColumnKind::Continuous => {
                let values = kept
                    .iter()
                    .zip(&source_rows)
                    .map(|(r, &row)| parse_number(r.get(ci).unwrap_or(""), row, &f.name))
                    .collect::<Result<Vec<_>>>()?;
                names.push(f.name.clone());
                columns.push(values);
                provenance.column_sources.push(f.name.clone());
            }
            ColumnKind::Categorical => {
                let levels: BTreeSet<&str> = kept.iter().map(|r| r.get(ci).unwrap_or("").trim()).collect();
                for level in levels {
                    names.push(format!("{}={level}", f.name));
                    columns.push(kept.iter().map(|r| f64::from(u8::from(r.get(ci).unwrap_or("").trim() == level))).collect());
                    provenance.column_sources.push(f.name.clone());
                }
            }
        }
    }

    let protected = kept
        .iter()
        .zip(&source_rows)
        .map(|(r, &row)| {
            let cell = r.get(z_idx).unwrap_or("").trim();
            match &schema.protected.positive {
                Some(p) => Ok(f64::from(u8::from(cell == p))),
                None => parse_number(cell, row, &schema.protected.name),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let outcome = kept
        .iter()
        .zip(&source_rows)
        .map(|(r, &row)| {
            let cell = r.get(y_idx).unwrap_or("").trim();
            match &schema.outcome.positive {
                Some(p) => Ok(f64::from(u8::from(cell == p))),
                None => parse_number(cell, row, &schema.outcome.name),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let family = match (&schema.outcome.positive, schema.outcome.family) {
        (Some(_), _) => OutcomeFamily::Binary,
        (None, Some(f)) => f,
        (None, None) if outcome.iter().all(|&y| y == 0.0 || y == 1.0) => OutcomeFamily::Binary,
        (None, None) => OutcomeFamily::Continuous,
    };

    let n = kept.len();
    let mut features = Vec::with_capacity(n * names.len());
    for i in 0..n {
        features.extend(columns.iter().map(|c| c[i]));
    }
    Ok(Dataset::new(names, features, protected, outcome, family)?
        .with_column_names(schema.protected.name.clone(), schema.outcome.name.clone())
        .with_provenance(provenance))
}

/// Shortest text that parses back to the same value, in positional
/// notation for moderate magnitudes and scientific otherwise.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes features, the protected column and the outcome, in that order.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    data.require_nonempty("save_csv")?;
    let mut writer = csv::Writer::from_writer(File::create(path)?);
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(data.protected_name());
    header.push(data.outcome_name());
    writer.write_record(&header)?;
    for (i, row) in data.rows().enumerate() {
        let cells = row
            .iter()
            .chain([&data.protected()[i], &data.outcome()[i]])
            .map(|&v| format_float(v));
        writer.write_record(cells)?;
    }
    writer.flush()?;
    Ok(())
}
