use crate::datamodel::{ScalarCovariates, SubjectId};
use crate::error::{FdaError, Result};
use nalgebra::DMatrix;

pub const INTERCEPT: &str = "(intercept)";

/// Fixed-effect design: intercept column first, numeric fields as given,
/// then one dummy column per non-baseline level of each categorical field.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub rows: Vec<SubjectId>,
    pub x: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn intercept_only(rows: Vec<SubjectId>) -> Self {
        let n = rows.len();
        DesignMatrix {
            names: vec![INTERCEPT.to_string()],
            rows,
            x: DMatrix::from_element(n, 1, 1.0),
        }
    }

    /// Dummy-coded design for `rows`. Every listed field must be present
    /// for every row.
    pub fn from_covariates(
        table: &ScalarCovariates,
        rows: &[SubjectId],
        numeric: &[String],
        categorical: &[String],
    ) -> Result<Self> {
        let mut names = vec![INTERCEPT.to_string()];
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; rows.len()]];
        for f in numeric {
            cols.push(table.numeric_column(f, rows)?);
            names.push(f.clone());
        }
        for f in categorical {
            let field = table
                .schema
                .categorical_field(f)
                .ok_or_else(|| FdaError::Schema(format!("undeclared categorical field `{f}`")))?;
            let values: Vec<&str> = rows
                .iter()
                .map(|id| {
                    table
                        .records
                        .get(id)
                        .and_then(|r| r.categorical.get(f))
                        .map(String::as_str)
                        .ok_or_else(|| FdaError::InvalidInput(format!("subject {id} has no value for `{f}`")))
                })
                .collect::<Result<_>>()?;
            for level in field.levels.iter().filter(|l| **l != field.baseline) {
                cols.push(values.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect());
                names.push(format!("{f}[{level}]"));
            }
        }
        let x = DMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][i]);
        Ok(DesignMatrix {
            names,
            rows: rows.to_vec(),
            x,
        })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Copy with the given rows (repeats allowed).
    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: self.names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            x: self.x.select_rows(idx),
        }
    }
}

/// Modified Gram-Schmidt over the columns; a column whose remainder after
/// projecting out the earlier ones is negligible is collinear.
pub fn check_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    if x.nrows() < x.ncols() {
        return Err(FdaError::RankDeficient(vec![format!(
            "{} rows for {} columns",
            x.nrows(),
            x.ncols()
        )]));
    }
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let mut v = x.column(j).into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let d = q.dot(&v);
            v.axpy(-d, q, 1.0);
        }
        let norm = v.norm();
        if !(norm0 > 0.0) || norm <= 1e-10 * norm0 {
            bad.push(names[j].clone());
        } else {
            basis.push(v / norm);
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(FdaError::RankDeficient(bad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{CategoricalField, ScalarRecord, ScalarSchema};

    #[test]
    fn dummy_columns_skip_baseline() {
        let schema = ScalarSchema {
            subject_column: "subject_id".into(),
            numeric: vec!["bw".into()],
            categorical: vec![CategoricalField {
                name: "edu".into(),
                levels: vec!["low".into(), "mid".into(), "high".into()],
                baseline: "low".into(),
            }],
            cluster: None,
        };
        let mut t = ScalarCovariates::new(schema).unwrap();
        for (id, bw, e) in [("a", 3.0, "low"), ("b", 3.5, "high")] {
            let mut r = ScalarRecord::default();
            r.numeric.insert("bw".into(), bw);
            r.categorical.insert("edu".into(), e.into());
            t.insert(id.into(), r).unwrap();
        }
        let d = DesignMatrix::from_covariates(&t, &["a".into(), "b".into()], &["bw".into()], &["edu".into()]).unwrap();
        assert_eq!(d.names, vec![INTERCEPT, "bw", "edu[mid]", "edu[high]"]);
        assert_eq!(d.x.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.5, 0.0, 1.0]);
    }

    #[test]
    fn collinear_column_is_named() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 2.0, 1.0, 2.0, 4.0, 1.0, 3.0, 6.0]);
        let names: Vec<String> = ["c", "a", "b"].iter().map(|s| s.to_string()).collect();
        match check_rank(&x, &names) {
            Err(FdaError::RankDeficient(v)) => assert_eq!(v, vec!["b".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
