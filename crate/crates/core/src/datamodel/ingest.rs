use super::{Cohort, ScalarCovariates, ScalarRecord, ScalarSchema, SparseFunctionalSample, SubjectId};
use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

/// Sidecar schema declaring the study window, the longitudinal variables to
/// keep and the scalar covariate table layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSchema {
    pub window: (f64, f64),
    /// Variables to keep; empty keeps every variable found.
    #[serde(default)]
    pub variables: Vec<String>,
    #[serde(default)]
    pub scalars: Option<ScalarSchema>,
}

impl CohortSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// What to do with repeated `(subject, variable, time)` rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    /// Fail with a duplicate-record error listing every offender.
    #[default]
    Error,
    /// Keep the first occurrence and log the rest as rejects.
    KeepFirst,
}

/// An input row that was not loaded, with the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub source: String,
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub reason: String,
}

const LONG_COLUMNS: [&str; 4] = ["subject_id", "variable", "time", "value"];

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| FdaError::MissingColumn(name.to_string()))
}

fn parse_finite(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load a long-format longitudinal CSV and, optionally, the wide scalar CSV.
pub fn ingest_long_csv<L: Read, S: Read>(
    long: L,
    scalars: Option<S>,
    schema: &CohortSchema,
    duplicates: DuplicatePolicy,
) -> Result<Cohort> {
    let (lo, hi) = schema.window;
    let keep: BTreeSet<&str> = schema.variables.iter().map(String::as_str).collect();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(long);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = LONG_COLUMNS
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_>>()?;

    let mut samples: BTreeMap<String, SparseFunctionalSample> = BTreeMap::new();
    let mut rejects = Vec::new();
    let mut seen: BTreeSet<(String, String, u64)> = BTreeSet::new();
    let mut offenders = Vec::new();

    for (row, rec) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec?;
        let get = |i: usize| rec.get(idx[i]).unwrap_or("").trim();
        let (subject, variable) = (get(0), get(1));
        let reject = |reason: String| RejectedRow {
            source: "long".into(),
            line,
            reason,
        };
        if subject.is_empty() || variable.is_empty() {
            rejects.push(reject("empty subject or variable".into()));
            continue;
        }
        if !keep.is_empty() && !keep.contains(variable) {
            continue;
        }
        let (Some(time), Some(value)) = (parse_finite(get(2)), parse_finite(get(3))) else {
            rejects.push(reject(format!("unparseable numeric: time=`{}` value=`{}`", get(2), get(3))));
            continue;
        };
        if time < lo || time > hi {
            rejects.push(reject(format!("time {time} outside window [{lo}, {hi}]")));
            continue;
        }
        let key = (subject.to_string(), variable.to_string(), time.to_bits());
        if !seen.insert(key) {
            match duplicates {
                DuplicatePolicy::Error => offenders.push(format!("{subject}/{variable}/t={time} (line {line})")),
                DuplicatePolicy::KeepFirst => {
                    rejects.push(reject(format!("duplicate time {time} for {subject}/{variable}")))
                }
            }
            continue;
        }
        let sample = match samples.get_mut(variable) {
            Some(s) => s,
            None => samples
                .entry(variable.to_string())
                .or_insert(SparseFunctionalSample::new(variable, schema.window)?),
        };
        sample.push(SubjectId::from(subject), time, value)?;
    }
    if !offenders.is_empty() {
        return Err(FdaError::DuplicateRecords(offenders));
    }

    let scalars = match (scalars, &schema.scalars) {
        (Some(reader), Some(sch)) => Some(ingest_scalar_csv(reader, sch, &mut rejects)?),
        (Some(_), None) => {
            return Err(FdaError::Schema("scalar CSV given but the schema declares no scalar table".into()))
        }
        (None, _) => None,
    };

    Ok(Cohort {
        samples,
        scalars,
        qc_report: Default::default(),
        rejects,
    })
}

fn ingest_scalar_csv<R: Read>(
    reader: R,
    schema: &ScalarSchema,
    rejects: &mut Vec<RejectedRow>,
) -> Result<ScalarCovariates> {
    let mut table = ScalarCovariates::new(schema.clone())?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column_index(&headers, &schema.subject_column)?;
    let num_cols: Vec<(String, usize)> = schema
        .numeric
        .iter()
        .map(|n| column_index(&headers, n).map(|i| (n.clone(), i)))
        .collect::<Result<_>>()?;
    let cat_cols: Vec<(String, usize)> = schema
        .categorical
        .iter()
        .map(|c| column_index(&headers, &c.name).map(|i| (c.name.clone(), i)))
        .collect::<Result<_>>()?;
    let cluster_col = schema
        .cluster
        .as_ref()
        .map(|c| column_index(&headers, c))
        .transpose()?;

    let mut offenders = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let id = field(id_col);
        if id.is_empty() {
            rejects.push(RejectedRow {
                source: "scalars".into(),
                line,
                reason: "empty subject id".into(),
            });
            continue;
        }
        let id = SubjectId::from(id);
        if table.records.contains_key(&id) {
            offenders.push(format!("{id} (line {line})"));
            continue;
        }
        let mut record = ScalarRecord::default();
        for (name, i) in &num_cols {
            let raw = field(*i);
            if raw.is_empty() {
                continue;
            }
            match parse_finite(raw) {
                Some(v) => {
                    record.numeric.insert(name.clone(), v);
                }
                None => rejects.push(RejectedRow {
                    source: "scalars".into(),
                    line,
                    reason: format!("unparseable numeric `{raw}` in `{name}`"),
                }),
            }
        }
        for (name, i) in &cat_cols {
            let raw = field(*i);
            if raw.is_empty() {
                continue;
            }
            let levels = &schema.categorical_field(name).expect("declared").levels;
            if levels.iter().any(|l| l == raw) {
                record.categorical.insert(name.clone(), raw.to_string());
            } else {
                rejects.push(RejectedRow {
                    source: "scalars".into(),
                    line,
                    reason: format!("`{raw}` is not a declared level of `{name}`"),
                });
            }
        }
        if let Some(i) = cluster_col {
            let raw = field(i);
            if !raw.is_empty() {
                record.cluster = Some(raw.to_string());
            }
        }
        table.insert(id, record)?;
    }
    if !offenders.is_empty() {
        return Err(FdaError::DuplicateRecords(offenders));
    }
    Ok(table)
}
