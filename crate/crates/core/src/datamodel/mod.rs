//! In-memory representation of sparse longitudinal cohorts.
//!
//! A [`Cohort`] bundles one [`SparseFunctionalSample`] per longitudinal
//! variable with an optional table of [`ScalarCovariates`]. Samples are keyed
//! by [`SubjectId`] in `BTreeMap`s so iteration order, and therefore every
//! downstream computation, is deterministic.

mod design;
mod ingest;
mod normalize;
mod qc;
mod scalar;

pub use design::{design_count_matrix, BinnedDesign, DesignCountMatrix};
pub use ingest::{ingest_long_csv, CohortSchema, DuplicatePolicy, RejectedRow};
pub use normalize::{denormalize_sample, normalize_sample};
pub use qc::{qc_filter, QcPolicy, QcReport, VisitSchedule};
pub use scalar::{CategoricalField, ScalarCovariates, ScalarRecord, ScalarSchema};

use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub String);

impl SubjectId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SubjectId {
    fn from(s: &str) -> Self {
        SubjectId(s.to_string())
    }
}

impl From<String> for SubjectId {
    fn from(s: String) -> Self {
        SubjectId(s)
    }
}

/// One measurement of a longitudinal variable (time in months).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub value: f64,
}

/// Irregularly observed trajectories of one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFunctionalSample {
    pub variable: String,
    pub window: (f64, f64),
    pub subjects: BTreeMap<SubjectId, Vec<Observation>>,
}

impl SparseFunctionalSample {
    pub fn new(variable: impl Into<String>, window: (f64, f64)) -> Result<Self> {
        let (lo, hi) = window;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(FdaError::InvalidInput(format!("invalid study window [{lo}, {hi}]")));
        }
        Ok(SparseFunctionalSample {
            variable: variable.into(),
            window,
            subjects: BTreeMap::new(),
        })
    }

    /// Append one observation, validating it against the window.
    pub fn push(&mut self, subject: SubjectId, time: f64, value: f64) -> Result<()> {
        if !time.is_finite() || !value.is_finite() {
            return Err(FdaError::InvalidInput(format!(
                "non-finite observation for subject {subject}: ({time}, {value})"
            )));
        }
        if time < self.window.0 || time > self.window.1 {
            return Err(FdaError::InvalidInput(format!(
                "time {time} for subject {subject} outside window [{}, {}]",
                self.window.0, self.window.1
            )));
        }
        self.subjects
            .entry(subject)
            .or_default()
            .push(Observation { time, value });
        Ok(())
    }

    /// Build from per-subject `(times, values)` lists.
    pub fn from_lists(
        variable: impl Into<String>,
        window: (f64, f64),
        data: impl IntoIterator<Item = (SubjectId, Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut s = Self::new(variable, window)?;
        for (id, times, values) in data {
            if times.len() != values.len() {
                return Err(FdaError::InvalidInput(format!(
                    "subject {id}: {} times but {} values",
                    times.len(),
                    values.len()
                )));
            }
            for (t, v) in times.into_iter().zip(values) {
                s.push(id.clone(), t, v)?;
            }
        }
        Ok(s)
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_observations(&self) -> usize {
        self.subjects.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subject_ids(&self) -> Vec<SubjectId> {
        self.subjects.keys().cloned().collect()
    }

    /// Smallest and largest observed time.
    pub fn observed_range(&self) -> Option<(f64, f64)> {
        self.subjects
            .values()
            .flatten()
            .fold(None, |acc, o| match acc {
                None => Some((o.time, o.time)),
                Some((lo, hi)) => Some((f64::min(lo, o.time), f64::max(hi, o.time))),
            })
    }

    /// Keep only the listed subjects.
    pub fn restricted_to(&self, keep: &std::collections::BTreeSet<SubjectId>) -> Self {
        SparseFunctionalSample {
            variable: self.variable.clone(),
            window: self.window,
            subjects: self
                .subjects
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Sample built from a subject resample; repeated draws of the same
    /// subject become distinct pseudo-subjects (`id#k`).
    pub fn resampled(&self, draws: &[SubjectId]) -> Self {
        let subjects = draws
            .iter()
            .enumerate()
            .filter_map(|(k, id)| {
                self.subjects
                    .get(id)
                    .map(|obs| (SubjectId(format!("{}#{k}", id.0)), obs.clone()))
            })
            .collect();
        SparseFunctionalSample {
            variable: self.variable.clone(),
            window: self.window,
            subjects,
        }
    }

    /// Map every value through `f(time, value)`.
    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = self.clone();
        for obs in out.subjects.values_mut() {
            for o in obs.iter_mut() {
                o.value = f(o.time, o.value);
            }
        }
        out
    }
}

/// Several longitudinal variables and scalar covariates for one set of
/// subjects.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub samples: BTreeMap<String, SparseFunctionalSample>,
    pub scalars: Option<ScalarCovariates>,
    pub qc_report: QcReport,
    pub rejects: Vec<RejectedRow>,
}

impl Cohort {
    pub fn sample(&self, variable: &str) -> Result<&SparseFunctionalSample> {
        self.samples
            .get(variable)
            .ok_or_else(|| FdaError::InvalidInput(format!("cohort has no variable `{variable}`")))
    }

    pub fn n_subjects(&self) -> usize {
        let mut ids = std::collections::BTreeSet::new();
        for s in self.samples.values() {
            ids.extend(s.subjects.keys().cloned());
        }
        ids.len()
    }

    /// Long-format CSV (`subject_id,variable,time,value`), variables and
    /// subjects in sorted order, observations in stored order.
    pub fn write_long_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["subject_id", "variable", "time", "value"])?;
        for (name, sample) in &self.samples {
            for (id, obs) in &sample.subjects {
                for o in obs {
                    wtr.write_record([
                        id.as_str(),
                        name.as_str(),
                        &o.time.to_string(),
                        &o.value.to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_validates_window_and_finiteness() {
        let mut s = SparseFunctionalSample::new("HC", (0.0, 12.0)).unwrap();
        assert!(s.push("a".into(), 13.0, 1.0).is_err());
        assert!(s.push("a".into(), 1.0, f64::NAN).is_err());
        s.push("a".into(), 1.0, 35.0).unwrap();
        assert_eq!(s.n_observations(), 1);
    }

    #[test]
    fn resample_renames_repeated_subjects() {
        let s = SparseFunctionalSample::from_lists(
            "HC",
            (0.0, 12.0),
            vec![("a".into(), vec![1.0], vec![2.0]), ("b".into(), vec![1.0], vec![3.0])],
        )
        .unwrap();
        let r = s.resampled(&["a".into(), "a".into(), "b".into()]);
        assert_eq!(r.n_subjects(), 3);
        assert!(r.subjects.contains_key(&SubjectId("a#1".into())));
    }
}
