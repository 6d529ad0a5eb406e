//! In-memory tabular datasets: a feature matrix, one protected column and one
//! outcome column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the outcome column holds 0/1 labels or real values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeFamily {
    Binary,
    Continuous,
}

/// Where a dataset came from and what happened to it on the way in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// Data rows read from the source, before any filtering.
    pub rows_read: usize,
    /// 1-based data-row indices dropped because of missing cells.
    pub dropped_missing: Vec<usize>,
    /// 1-based data-row indices excluded by the protected-value filter.
    pub excluded_by_filter: Vec<usize>,
    /// Source column for every feature column, in order.
    pub column_sources: Vec<String>,
}

/// Features are stored row-major; rows are the unit every learner iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    features: Vec<f64>,
    protected: Vec<f64>,
    outcome: Vec<f64>,
    family: OutcomeFamily,
    protected_name: String,
    outcome_name: String,
    perturbed_feature: Option<usize>,
    provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset from row-major features. Zero rows are allowed here;
    /// consumers that need data reject empty sets themselves.
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        protected: Vec<f64>,
        outcome: Vec<f64>,
        family: OutcomeFamily,
    ) -> Result<Self> {
        let n = protected.len();
        let d = feature_names.len();
        if outcome.len() != n {
            return Err(Error::Shape(format!(
                "{} protected values but {} outcomes",
                n,
                outcome.len()
            )));
        }
        if features.len() != n * d {
            return Err(Error::Shape(format!(
                "feature buffer has {} values, expected {n} rows x {d} columns",
                features.len()
            )));
        }
        if family == OutcomeFamily::Binary && outcome.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Family("binary dataset with outcome outside {0, 1}".into()));
        }
        Ok(Self {
            feature_names,
            features,
            protected,
            outcome,
            family,
            protected_name: "z".into(),
            outcome_name: "y".into(),
            perturbed_feature: None,
            provenance: Provenance::default(),
        })
    }

    pub fn from_rows(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        protected: Vec<f64>,
        outcome: Vec<f64>,
        family: OutcomeFamily,
    ) -> Result<Self> {
        let d = feature_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Shape(format!("row {bad} has {} values, expected {d}", rows[bad].len())));
        }
        Self::new(feature_names, rows.concat(), protected, outcome, family)
    }

    pub fn with_column_names(mut self, protected: impl Into<String>, outcome: impl Into<String>) -> Self {
        self.protected_name = protected.into();
        self.outcome_name = outcome.into();
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_perturbed_feature(mut self, index: Option<usize>) -> Self {
        self.perturbed_feature = index;
        self
    }

    pub fn n(&self) -> usize {
        self.protected.len()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn protected_name(&self) -> &str {
        &self.protected_name
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn family(&self) -> OutcomeFamily {
        self.family
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn perturbed_feature(&self) -> Option<usize> {
        self.perturbed_feature
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn protected(&self) -> &[f64] {
        &self.protected
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    /// Sorted distinct protected values.
    pub fn protected_levels(&self) -> Vec<f64> {
        let mut levels = self.protected.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    pub fn require_nonempty(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyDataset(format!("{what} needs at least one row")))
        } else {
            Ok(())
        }
    }

    pub fn with_outcome(&self, outcome: Vec<f64>, family: OutcomeFamily) -> Result<Self> {
        let mut out = Dataset::new(
            self.feature_names.clone(),
            self.features.clone(),
            self.protected.clone(),
            outcome,
            family,
        )?;
        out.protected_name = self.protected_name.clone();
        out.outcome_name = self.outcome_name.clone();
        out.provenance = self.provenance.clone();
        out.perturbed_feature = self.perturbed_feature;
        Ok(out)
    }

    pub fn with_feature_column(&self, j: usize, values: &[f64]) -> Result<Self> {
        if j >= self.d() {
            return Err(Error::Shape(format!("feature index {j} out of range for {} features", self.d())));
        }
        if values.len() != self.n() {
            return Err(Error::Shape(format!("{} values for {} rows", values.len(), self.n())));
        }
        let mut out = self.clone();
        let d = self.d();
        for (i, &v) in values.iter().enumerate() {
            out.features[i * d + j] = v;
        }
        Ok(out)
    }

    /// Copy of the dataset without feature column `j`.
    pub fn drop_feature(&self, j: usize) -> Result<Self> {
        let d = self.d();
        if j >= d {
            return Err(Error::Shape(format!("feature index {j} out of range for {d} features")));
        }
        let mut names = self.feature_names.clone();
        names.remove(j);
        let features = self
            .rows()
            .flat_map(|r| r.iter().enumerate().filter(move |(k, _)| *k != j).map(|(_, &v)| v))
            .collect();
        let mut out = self.clone();
        out.feature_names = names;
        out.features = features;
        out.perturbed_feature = match self.perturbed_feature {
            Some(p) if p == j => None,
            Some(p) if p > j => Some(p - 1),
            other => other,
        };
        Ok(out)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let d = self.d();
        let mut features = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let mut out = self.clone();
        out.features = features;
        out.protected = indices.iter().map(|&i| self.protected[i]).collect();
        out.outcome = indices.iter().map(|&i| self.outcome[i]).collect();
        out
    }

    pub fn with_protected(&self, protected: Vec<f64>) -> Result<Self> {
        if protected.len() != self.n() {
            return Err(Error::Shape(format!("{} protected values for {} rows", protected.len(), self.n())));
        }
        let mut out = self.clone();
        out.protected = protected;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            vec![-1.0, 1.0, 1.0],
            vec![0.0, 1.0, 0.0],
            OutcomeFamily::Binary,
        )
        .unwrap()
    }

    #[test]
    fn drop_and_subset() {
        let ds = small();
        let dropped = ds.drop_feature(0).unwrap();
        assert_eq!(dropped.column(0), vec![2.0, 4.0, 6.0]);
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.row(0), &[5.0, 6.0]);
        assert_eq!(sub.protected(), &[1.0, -1.0]);
        assert_eq!(ds.protected_levels(), vec![-1.0, 1.0]);
    }

    #[test]
    fn binary_family_rejects_other_values() {
        let err = Dataset::new(vec![], vec![], vec![0.0], vec![0.5], OutcomeFamily::Binary).unwrap_err();
        assert!(matches!(err, Error::Family(_)));
    }

    #[test]
    fn featureless_rows_iterate() {
        let ds = Dataset::new(vec![], vec![], vec![0.0, 1.0], vec![0.0, 1.0], OutcomeFamily::Binary).unwrap();
        assert_eq!(ds.rows().count(), 2);
    }
}
