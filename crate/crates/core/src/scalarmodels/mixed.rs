//! Linear mixed model with one random intercept per cluster, fitted by
//! profiled restricted maximum likelihood over the variance ratio
//! `λ = σ_γ² / σ_ε²`.
//!
//! With `H = I + λ ZZᵀ` block diagonal, each cluster block `I + λ 11ᵀ` has
//! determinant `1 + n_c λ` and inverse `I − w_c 11ᵀ`, `w_c = λ / (1 + n_c λ)`,
//! so every quantity reduces to per-cluster sums.

use super::design::{check_rank, DesignMatrix};
use crate::datamodel::SubjectId;
use crate::error::{FdaError, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const LOG10_LAMBDA_RANGE: (f64, f64) = (-6.0, 3.0);
pub const DEFAULT_SCAN_POINTS: usize = 91;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualizationFit {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `σ_γ² / σ_ε²`; `None` with a single cluster.
    pub variance_ratio: Option<f64>,
    pub sigma_gamma: Option<f64>,
    pub sigma_epsilon: f64,
    /// Predicted random intercepts (BLUPs).
    pub cluster_effects: BTreeMap<String, f64>,
    /// Outcome minus fixed effects minus the predicted cluster effect.
    pub residuals: BTreeMap<SubjectId, f64>,
    pub omega2_0: f64,
    pub n_clusters: usize,
    pub reml_log_likelihood: Option<f64>,
}

impl ResidualizationFit {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }
}

/// Sufficient statistics for the profiled likelihood.
struct Stats {
    n: usize,
    p: usize,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    /// Per cluster: size, column sums of X, sum of y.
    clusters: Vec<(f64, DVector<f64>, f64)>,
}

impl Stats {
    fn new(y: &[f64], x: &DMatrix<f64>, groups: &[Vec<usize>]) -> Self {
        let yv = DVector::from_column_slice(y);
        Stats {
            n: y.len(),
            p: x.ncols(),
            xtx: x.tr_mul(x),
            xty: x.tr_mul(&yv),
            yty: yv.dot(&yv),
            clusters: groups
                .iter()
                .map(|g| {
                    let mut s = DVector::zeros(x.ncols());
                    let mut t = 0.0;
                    for &i in g {
                        s += x.row(i).transpose();
                        t += y[i];
                    }
                    (g.len() as f64, s, t)
                })
                .collect(),
        }
    }

    /// `(β̂, XᵀH⁻¹X, rᵀH⁻¹r, log|H|)` at ratio `lambda`.
    fn gls(&self, lambda: f64) -> Option<(DVector<f64>, DMatrix<f64>, f64, f64)> {
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        let mut yhy = self.yty;
        let mut logdet_h = 0.0;
        for (nc, s, t) in &self.clusters {
            let w = lambda / (1.0 + nc * lambda);
            a -= w * s * s.transpose();
            b -= w * *t * s;
            yhy -= w * t * t;
            logdet_h += (1.0 + nc * lambda).ln();
        }
        let chol = a.clone().cholesky()?;
        let beta = chol.solve(&b);
        let rhr = (yhy - beta.dot(&b)).max(0.0);
        Some((beta, a, rhr, logdet_h))
    }

    /// Restricted log-likelihood profiled over `β` and `σ_ε²`, constants
    /// dropped.
    fn reml(&self, lambda: f64) -> f64 {
        let Some((_, a, rhr, logdet_h)) = self.gls(lambda) else {
            return f64::NEG_INFINITY;
        };
        let Some(chol) = a.cholesky() else {
            return f64::NEG_INFINITY;
        };
        let logdet_a: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let dof = (self.n - self.p) as f64;
        -0.5 * (logdet_h + logdet_a + dof * (rhr / dof).ln())
    }
}

fn cluster_groups(clusters: &[String]) -> (Vec<String>, Vec<Vec<usize>>, Vec<usize>) {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for c in clusters {
        let k = index.len();
        index.entry(c.as_str()).or_insert(k);
    }
    // relabel in sorted order so output does not depend on row order
    let labels: Vec<String> = index.keys().map(|s| s.to_string()).collect();
    let pos: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut groups = vec![Vec::new(); labels.len()];
    let mut member = Vec::with_capacity(clusters.len());
    for (i, c) in clusters.iter().enumerate() {
        let g = pos[c.as_str()];
        groups[g].push(i);
        member.push(g);
    }
    (labels, groups, member)
}

/// Profiled restricted log-likelihood at `lambda` (for diagnostics).
pub fn profiled_reml(y: &[f64], design: &DesignMatrix, clusters: &[String], lambda: f64) -> f64 {
    let (_, groups, _) = cluster_groups(clusters);
    Stats::new(y, &design.x, &groups).reml(lambda)
}

/// Maximize over `log10 λ` in [`LOG10_LAMBDA_RANGE`]: a grid scan then a
/// golden-section refinement around the best grid point.
fn maximize_reml(stats: &Stats, scan_points: usize) -> (f64, f64) {
    let (lo, hi) = LOG10_LAMBDA_RANGE;
    let f = |u: f64| stats.reml(10f64.powf(u));
    let m = scan_points.max(3);
    let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&u| f(u)).collect();
    let best = (0..m).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(m - 1)]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-8 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let u = 0.5 * (a + b);
    let (u, val) = if f(u) >= vals[best] { (u, f(u)) } else { (grid[best], vals[best]) };
    (10f64.powf(u), val)
}

/// Random-intercept residualization of `y` on `design` with cluster labels
/// per row; uses the default scan density.
pub fn fit_residualization(y: &[f64], design: &DesignMatrix, clusters: &[String]) -> Result<ResidualizationFit> {
    fit_residualization_with(y, design, clusters, DEFAULT_SCAN_POINTS)
}

pub fn fit_residualization_with(
    y: &[f64],
    design: &DesignMatrix,
    clusters: &[String],
    scan_points: usize,
) -> Result<ResidualizationFit> {
    let n = y.len();
    if design.nrows() != n || clusters.len() != n {
        return Err(FdaError::InvalidInput("outcome, design and cluster labels differ in length".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FdaError::InvalidInput("non-finite outcome value".into()));
    }
    check_rank(&design.x, &design.names)?;
    let p = design.ncols();
    if n <= p {
        return Err(FdaError::RankDeficient(vec![format!("{n} rows for {p} columns")]));
    }
    let (labels, groups, member) = cluster_groups(clusters);
    let stats = Stats::new(y, &design.x, &groups);
    let sst: f64 = {
        let m = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - m) * (v - m)).sum()
    };
    let (_, _, ols_rss, _) = stats.gls(0.0).ok_or_else(|| FdaError::RankDeficient(design.names.clone()))?;
    let perfect = ols_rss <= 1e-24 * stats.yty.max(1.0);

    let (lambda, loglik) = if labels.len() < 2 {
        log::warn!("single cluster: random intercept not identifiable, fitting ordinary least squares");
        (None, None)
    } else if perfect {
        (Some(0.0), None)
    } else {
        let (l, v) = maximize_reml(&stats, scan_points);
        (Some(l), Some(v))
    };
    let lam = lambda.unwrap_or(0.0);
    let (beta, a, rhr, _) = stats.gls(lam).ok_or_else(|| FdaError::RankDeficient(design.names.clone()))?;
    let sigma2 = rhr / (n - p) as f64;

    let xb = &design.x * &beta;
    let marginal: Vec<f64> = (0..n).map(|i| y[i] - xb[i]).collect();
    let mut effects = vec![0.0; labels.len()];
    if lambda.is_some() {
        for (g, rows) in groups.iter().enumerate() {
            let w = lam / (1.0 + rows.len() as f64 * lam);
            effects[g] = w * rows.iter().map(|&i| marginal[i]).sum::<f64>();
        }
    }
    let resid: Vec<f64> = if perfect {
        vec![0.0; n]
    } else {
        (0..n).map(|i| marginal[i] - effects[member[i]]).collect()
    };
    let sse: f64 = resid.iter().map(|r| r * r).sum();
    let omega2_0 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };

    let cov = a.try_inverse().ok_or_else(|| FdaError::RankDeficient(design.names.clone()))?;
    Ok(ResidualizationFit {
        terms: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors: (0..p).map(|j| (sigma2 * cov[(j, j)]).max(0.0).sqrt()).collect(),
        variance_ratio: lambda,
        sigma_gamma: lambda.map(|l| (l * sigma2).sqrt()),
        sigma_epsilon: sigma2.sqrt(),
        cluster_effects: if lambda.is_some() {
            labels.iter().cloned().zip(effects).collect()
        } else {
            BTreeMap::new()
        },
        residuals: design.rows.iter().cloned().zip(resid).collect(),
        omega2_0,
        n_clusters: labels.len(),
        reml_log_likelihood: loglik,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalarmodels::design::INTERCEPT;

    fn design(x: &[f64]) -> DesignMatrix {
        DesignMatrix {
            names: vec![INTERCEPT.into(), "x".into()],
            rows: (0..x.len()).map(|i| SubjectId(format!("s{i}"))).collect(),
            x: DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] }),
        }
    }

    #[test]
    fn perfect_linear_outcome() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let cl: Vec<String> = (0..20).map(|i| format!("h{}", i % 4)).collect();
        let fit = fit_residualization(&y, &design(&x), &cl).unwrap();
        assert!(fit.residuals.values().all(|r| *r == 0.0));
        assert_eq!(fit.omega2_0, 1.0);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn single_cluster_is_ols_around_mean() {
        let y = [1.0, 2.0, 4.0, 7.0];
        let d = DesignMatrix::intercept_only((0..4).map(|i| SubjectId(format!("s{i}"))).collect());
        let fit = fit_residualization(&y, &d, &vec!["h".to_string(); 4]).unwrap();
        assert!(fit.sigma_gamma.is_none());
        let r: Vec<f64> = fit.residuals.values().copied().collect();
        assert_eq!(r, vec![-2.5, -1.5, 0.5, 3.5]);
    }

    #[test]
    fn blups_equal_ratio_times_cluster_residual_sums() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..40).map(|i| x[i] + [3.0, -1.0, 0.5, -2.5][i % 4] + (i as f64 * 1.7).cos()).collect();
        let cl: Vec<String> = (0..40).map(|i| format!("h{}", i % 4)).collect();
        let fit = fit_residualization(&y, &design(&x), &cl).unwrap();
        let lam = fit.variance_ratio.unwrap();
        for (label, g) in &fit.cluster_effects {
            let sum: f64 = fit
                .residuals
                .iter()
                .filter(|(id, _)| cl[id.0[1..].parse::<usize>().unwrap()] == *label)
                .map(|(_, r)| r)
                .sum();
            assert!((g - lam * sum).abs() < 1e-9);
        }
    }
}
