use super::SubjectId;
use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Categorical covariate with its declared level order and baseline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalField {
    pub name: String,
    pub levels: Vec<String>,
    pub baseline: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarSchema {
    #[serde(default = "default_subject_column")]
    pub subject_column: String,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<CategoricalField>,
    #[serde(default)]
    pub cluster: Option<String>,
}

fn default_subject_column() -> String {
    "subject_id".to_string()
}

impl ScalarSchema {
    pub fn validate(&self) -> Result<()> {
        for c in &self.categorical {
            if c.levels.is_empty() {
                return Err(FdaError::Schema(format!("categorical `{}` has no levels", c.name)));
            }
            if !c.levels.contains(&c.baseline) {
                return Err(FdaError::Schema(format!(
                    "baseline `{}` of `{}` is not one of its levels",
                    c.baseline, c.name
                )));
            }
            let mut l = c.levels.clone();
            l.sort();
            l.dedup();
            if l.len() != c.levels.len() {
                return Err(FdaError::Schema(format!("categorical `{}` repeats a level", c.name)));
            }
        }
        Ok(())
    }

    pub fn categorical_field(&self, name: &str) -> Option<&CategoricalField> {
        self.categorical.iter().find(|c| c.name == name)
    }

    /// Column names in output order.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec![self.subject_column.clone()];
        cols.extend(self.numeric.iter().cloned());
        cols.extend(self.categorical.iter().map(|c| c.name.clone()));
        cols.extend(self.cluster.iter().cloned());
        cols
    }
}

/// Scalar fields of one subject; absent keys are missing values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarRecord {
    pub numeric: BTreeMap<String, f64>,
    pub categorical: BTreeMap<String, String>,
    pub cluster: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarCovariates {
    pub schema: ScalarSchema,
    pub records: BTreeMap<SubjectId, ScalarRecord>,
}

impl ScalarCovariates {
    pub fn new(schema: ScalarSchema) -> Result<Self> {
        schema.validate()?;
        Ok(ScalarCovariates {
            schema,
            records: BTreeMap::new(),
        })
    }

    /// Insert a record after checking categorical values against their
    /// declared levels.
    pub fn insert(&mut self, id: SubjectId, record: ScalarRecord) -> Result<()> {
        for (k, v) in &record.categorical {
            let field = self
                .schema
                .categorical_field(k)
                .ok_or_else(|| FdaError::Schema(format!("undeclared categorical field `{k}`")))?;
            if !field.levels.contains(v) {
                return Err(FdaError::Schema(format!("value `{v}` is not a level of `{k}`")));
            }
        }
        self.records.insert(id, record);
        Ok(())
    }

    pub fn is_complete(&self, id: &SubjectId) -> bool {
        let Some(r) = self.records.get(id) else {
            return false;
        };
        self.schema.numeric.iter().all(|n| r.numeric.get(n).is_some_and(|v| v.is_finite()))
            && self.schema.categorical.iter().all(|c| r.categorical.contains_key(&c.name))
            && (self.schema.cluster.is_none() || r.cluster.is_some())
    }

    /// Values of one numeric field for the given subjects.
    pub fn numeric_column(&self, field: &str, ids: &[SubjectId]) -> Result<Vec<f64>> {
        ids.iter()
            .map(|id| {
                self.records
                    .get(id)
                    .and_then(|r| r.numeric.get(field).copied())
                    .ok_or_else(|| {
                        FdaError::InvalidInput(format!("subject {id} has no value for `{field}`"))
                    })
            })
            .collect()
    }

    pub fn numeric_map(&self, field: &str) -> BTreeMap<SubjectId, f64> {
        self.records
            .iter()
            .filter_map(|(id, r)| r.numeric.get(field).map(|v| (id.clone(), *v)))
            .collect()
    }

    pub fn cluster_labels(&self, ids: &[SubjectId]) -> Result<Vec<String>> {
        ids.iter()
            .map(|id| {
                self.records
                    .get(id)
                    .and_then(|r| r.cluster.clone())
                    .ok_or_else(|| FdaError::InvalidInput(format!("subject {id} has no cluster label")))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(self.schema.columns())?;
        for (id, r) in &self.records {
            let mut row = vec![id.0.clone()];
            for n in &self.schema.numeric {
                row.push(r.numeric.get(n).map(|v| v.to_string()).unwrap_or_default());
            }
            for c in &self.schema.categorical {
                row.push(r.categorical.get(&c.name).cloned().unwrap_or_default());
            }
            if self.schema.cluster.is_some() {
                row.push(r.cluster.clone().unwrap_or_default());
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> ScalarSchema {
        ScalarSchema {
            subject_column: "subject_id".into(),
            numeric: vec!["bw".into()],
            categorical: vec![CategoricalField {
                name: "smoking".into(),
                levels: vec!["no".into(), "yes".into()],
                baseline: "no".into(),
            }],
            cluster: Some("hospital".into()),
        }
    }

    #[test]
    fn baseline_must_be_a_level() {
        let mut s = schema();
        s.categorical[0].baseline = "maybe".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn undeclared_level_rejected() {
        let mut sc = ScalarCovariates::new(schema()).unwrap();
        let mut r = ScalarRecord::default();
        r.categorical.insert("smoking".into(), "sometimes".into());
        assert!(sc.insert("a".into(), r).is_err());
    }

    #[test]
    fn completeness_requires_every_field() {
        let mut sc = ScalarCovariates::new(schema()).unwrap();
        let mut r = ScalarRecord::default();
        r.numeric.insert("bw".into(), 3.4);
        r.categorical.insert("smoking".into(), "no".into());
        sc.insert("a".into(), r.clone()).unwrap();
        assert!(!sc.is_complete(&"a".into()));
        r.cluster = Some("h1".into());
        sc.insert("a".into(), r).unwrap();
        assert!(sc.is_complete(&"a".into()));
    }
}
