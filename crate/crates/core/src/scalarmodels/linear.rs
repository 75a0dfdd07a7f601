use super::design::{check_rank, INTERCEPT};
use crate::bootstrap::{bootstrap_p_value, percentile_interval, run_bootstrap, BootstrapSpec};
use crate::error::{FdaError, Result};
use crate::kernelsmooth::{kde_1d, KdeBandwidth, KdeCurve};
use crate::numeric::{pearson, variance};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Ordinary least squares via QR. Returns coefficients, standard errors and
/// R².
pub fn ols(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(FdaError::InvalidInput("response and design differ in length".into()));
    }
    check_rank(x, names)?;
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().tr_mul(&yv);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| FdaError::RankDeficient(names.to_vec()))?;
    let resid = &yv - x * &beta;
    let sse = resid.dot(&resid);
    let ybar = yv.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let se = if n > p {
        let sigma2 = sse / (n - p) as f64;
        let rinv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| FdaError::RankDeficient(names.to_vec()))?;
        (0..p).map(|j| (sigma2 * rinv.row(j).norm_squared()).sqrt()).collect()
    } else {
        vec![f64::NAN; p]
    };
    Ok((beta.iter().copied().collect(), se, r2))
}

/// Bootstrap distribution summary of a coefficient vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBootstrap {
    /// Replicate values per coefficient; not serialized.
    #[serde(skip)]
    pub replicates: Vec<Vec<f64>>,
    pub ci50: Vec<(f64, f64)>,
    pub ci95: Vec<(f64, f64)>,
    pub p_values: Vec<f64>,
    pub n_replicates: usize,
    pub failed_replicates: usize,
}

fn bracket(interval: Option<(f64, f64)>, estimate: f64) -> (f64, f64) {
    let (lo, hi) = interval.unwrap_or((f64::NAN, f64::NAN));
    (lo.min(estimate), hi.max(estimate))
}

impl CoefficientBootstrap {
    /// Percentile intervals (widened to contain the estimate) and two-sided
    /// p-values from per-replicate coefficient vectors.
    pub fn from_replicates(estimates: &[f64], per_replicate: &[Vec<f64>], failed: usize) -> Self {
        let replicates: Vec<Vec<f64>> = (0..estimates.len())
            .map(|j| per_replicate.iter().map(|r| r[j]).collect())
            .collect();
        CoefficientBootstrap {
            ci50: replicates
                .iter()
                .zip(estimates)
                .map(|(r, e)| bracket(percentile_interval(r, 0.5), *e))
                .collect(),
            ci95: replicates
                .iter()
                .zip(estimates)
                .map(|(r, e)| bracket(percentile_interval(r, 0.95), *e))
                .collect(),
            p_values: replicates.iter().map(|r| bootstrap_p_value(r)).collect(),
            n_replicates: per_replicate.len(),
            failed_replicates: failed,
            replicates,
        }
    }

    /// Density estimate of each coefficient's replicates; `None` for point
    /// masses.
    pub fn kde(&self) -> Vec<Option<KdeCurve>> {
        self.replicates
            .iter()
            .map(|r| kde_1d(r, KdeBandwidth::Silverman).ok())
            .collect()
    }
}

/// Refit `refit` on `spec.replicates` subject resamples of `n` rows.
pub fn bootstrap_coefficients<F>(n: usize, estimates: &[f64], spec: &BootstrapSpec, refit: F) -> Result<CoefficientBootstrap>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
{
    let run = run_bootstrap(n, spec, refit)?;
    Ok(CoefficientBootstrap::from_replicates(estimates, &run.replicates, run.failures.len()))
}

/// `(model, term, x, density)` rows for a set of fits.
pub fn write_kde_csv<W: Write>(fits: &[(&str, &LinearFit)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "term", "x", "density"])?;
    for (model, fit) in fits {
        let Some(b) = &fit.bootstrap else { continue };
        for (term, kde) in fit.terms.iter().zip(b.kde()) {
            let Some(k) = kde else { continue };
            for (x, d) in k.density.grid.iter().zip(&k.density.values) {
                wtr.write_record([model.to_string(), term.clone(), x.to_string(), d.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    pub bootstrap: Option<CoefficientBootstrap>,
}

impl LinearFit {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }

    /// `model,term,estimate,std_error,ci50_lo,ci50_hi,ci95_lo,ci95_hi,p_value`
    pub fn write_rows<W: Write>(&self, model: &str, wtr: &mut csv::Writer<W>) -> Result<()> {
        for (j, term) in self.terms.iter().enumerate() {
            let mut row = vec![
                model.to_string(),
                term.clone(),
                self.coefficients[j].to_string(),
                self.std_errors[j].to_string(),
            ];
            match &self.bootstrap {
                Some(b) => row.extend([
                    b.ci50[j].0.to_string(),
                    b.ci50[j].1.to_string(),
                    b.ci95[j].0.to_string(),
                    b.ci95[j].1.to_string(),
                    b.p_values[j].to_string(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            wtr.write_record(&row)?;
        }
        Ok(())
    }
}

pub const COEFFICIENT_HEADER: [&str; 9] = [
    "model", "term", "estimate", "std_error", "ci50_lo", "ci50_hi", "ci95_lo", "ci95_hi", "p_value",
];

/// A named column of (normalized) scores.
pub type ScoreColumn = (String, Vec<f64>);

/// Design with an intercept, the score columns and the elementwise
/// products for each interaction pair (named `a:b`).
pub fn score_design(columns: &[ScoreColumn], interactions: &[(String, String)]) -> Result<(Vec<String>, DMatrix<f64>)> {
    let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
    if columns.iter().any(|c| c.1.len() != n) {
        return Err(FdaError::InvalidInput("score columns differ in length".into()));
    }
    let find = |name: &str| {
        columns
            .iter()
            .find(|c| c.0 == name)
            .map(|c| &c.1)
            .ok_or_else(|| FdaError::InvalidInput(format!("interaction references unknown column `{name}`")))
    };
    let mut names = vec![INTERCEPT.to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for (name, v) in columns {
        names.push(name.clone());
        cols.push(v.clone());
    }
    for (a, b) in interactions {
        let (va, vb) = (find(a)?, find(b)?);
        names.push(format!("{a}:{b}"));
        cols.push(va.iter().zip(vb).map(|(x, y)| x * y).collect());
    }
    Ok((names, DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])))
}

/// OLS of `response` on the score columns and their listed interactions.
pub fn fit_score_lm(response: &[f64], columns: &[ScoreColumn], interactions: &[(String, String)]) -> Result<LinearFit> {
    let (terms, x) = score_design(columns, interactions)?;
    let (coefficients, std_errors, r_squared) = ols(&x, response, &terms)?;
    Ok(LinearFit {
        terms,
        coefficients,
        std_errors,
        r_squared,
        n: response.len(),
        bootstrap: None,
    })
}

/// [`fit_score_lm`] with subject-resampling bootstrap of the coefficients
/// (whole rows: scores and response together).
pub fn bootstrap_score_lm(
    response: &[f64],
    columns: &[ScoreColumn],
    interactions: &[(String, String)],
    spec: &BootstrapSpec,
) -> Result<LinearFit> {
    let mut fit = fit_score_lm(response, columns, interactions)?;
    let (terms, x) = score_design(columns, interactions)?;
    let boot = bootstrap_coefficients(response.len(), &fit.coefficients, spec, |idx| {
        let xb = x.select_rows(idx);
        let yb: Vec<f64> = idx.iter().map(|&i| response[i]).collect();
        Ok(ols(&xb, &yb, &terms)?.0)
    })?;
    fit.bootstrap = Some(boot);
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    pub ci95: (f64, f64),
    pub n: usize,
}

/// Sample Pearson correlation with a subject-bootstrap percentile CI.
pub fn pearson_scores_vs_outcome(x: &[f64], y: &[f64], spec: &BootstrapSpec) -> Result<PearsonResult> {
    if x.len() != y.len() {
        return Err(FdaError::InvalidInput("columns differ in length".into()));
    }
    if x.len() < 3 {
        return Err(FdaError::InvalidInput("correlation needs at least three pairs".into()));
    }
    if !(variance(x) > 0.0) || !(variance(y) > 0.0) {
        return Err(FdaError::Degenerate("zero-variance column in correlation".into()));
    }
    let r = pearson(x, y);
    let run = run_bootstrap(x.len(), spec, |idx| {
        let xb: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        Ok(pearson(&xb, &yb))
    })?;
    Ok(PearsonResult {
        r,
        ci95: bracket(percentile_interval(&run.replicates, 0.95), r),
        n: x.len(),
    })
}
