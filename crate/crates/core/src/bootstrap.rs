//! Subject-level nonparametric bootstrap shared by every resampling
//! procedure.
//!
//! Replicate `b` draws its resample from ChaCha8 stream `b` of the master
//! seed, so results do not depend on how replicates are scheduled across
//! threads.

use crate::datamodel::SubjectId;
use crate::error::{FdaError, Result};
use crate::numeric::quantile_sorted;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapSpec {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapSpec { replicates, seed }
    }
}

/// Indices of a with-replacement resample of `n` subjects for replicate `b`.
pub fn resample_indices(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Resampled subject ids; the `k`-th draw of subject `id` is renamed
/// `id#k` so that repeated draws stay distinct.
pub fn resampled_ids(ids: &[SubjectId], indices: &[usize]) -> Vec<(SubjectId, SubjectId)> {
    indices
        .iter()
        .enumerate()
        .map(|(k, &i)| (ids[i].clone(), SubjectId(format!("{}#{k}", ids[i].0))))
        .collect()
}

#[derive(Clone, Debug)]
pub struct BootstrapRun<T> {
    /// Successful replicates in replicate order.
    pub replicates: Vec<T>,
    pub failures: Vec<(usize, String)>,
}

/// Run `statistic` on `spec.replicates` subject resamples of `n` subjects.
/// Fails when more than 5% of the replicates fail.
pub fn run_bootstrap<T, F>(n: usize, spec: &BootstrapSpec, statistic: F) -> Result<BootstrapRun<T>>
where
    T: Send,
    F: Fn(&[usize]) -> Result<T> + Sync,
{
    if spec.replicates == 0 {
        return Err(FdaError::Config("bootstrap needs at least one replicate".into()));
    }
    if n == 0 {
        return Err(FdaError::NoData("nothing to resample".into()));
    }
    let results: Vec<Result<T>> = (0..spec.replicates)
        .into_par_iter()
        .map(|b| statistic(&resample_indices(n, spec.seed, b)))
        .collect();
    let mut run = BootstrapRun {
        replicates: Vec::with_capacity(spec.replicates),
        failures: Vec::new(),
    };
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => run.replicates.push(v),
            Err(e) => run.failures.push((b, e.to_string())),
        }
    }
    if run.failures.len() as f64 > MAX_FAILURE_FRACTION * spec.replicates as f64 {
        let mut reasons: Vec<String> = run.failures.iter().map(|(_, e)| e.clone()).collect();
        reasons.sort();
        reasons.dedup();
        return Err(FdaError::BootstrapInstability {
            failed: run.failures.len(),
            total: spec.replicates,
            diagnostics: reasons.into_iter().take(5).collect::<Vec<_>>().join("; "),
        });
    }
    if !run.failures.is_empty() {
        log::warn!("{} of {} bootstrap replicates failed", run.failures.len(), spec.replicates);
    }
    Ok(run)
}

/// Percentile interval at `level` (e.g. 0.95) from replicate values; NaNs
/// are ignored. Returns `None` when no finite value is left.
pub fn percentile_interval(values: &[f64], level: f64) -> Option<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let alpha = 0.5 * (1.0 - level);
    Some((quantile_sorted(&v, alpha), quantile_sorted(&v, 1.0 - alpha)))
}

/// Two-sided bootstrap p-value `2 · min(P(β* ≤ 0), P(β* ≥ 0))` with a +1
/// correction on numerator and denominator, capped at 1.
pub fn bootstrap_p_value(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    let le = values.iter().filter(|&&v| v <= 0.0).count() as f64;
    let ge = values.iter().filter(|&&v| v >= 0.0).count() as f64;
    (2.0 * ((le + 1.0) / (b + 1.0)).min((ge + 1.0) / (b + 1.0))).min(1.0)
}

/// Pointwise 50% and 95% percentile bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseBands {
    pub lo95: Vec<f64>,
    pub lo50: Vec<f64>,
    pub hi50: Vec<f64>,
    pub hi95: Vec<f64>,
}

impl PointwiseBands {
    /// Bands from replicate curves of equal length (`NaN` marks a missing
    /// value). The bands are widened where needed so that they contain
    /// `estimate`.
    pub fn from_replicates(replicates: &[Vec<f64>], estimate: &[f64]) -> Self {
        let n = estimate.len();
        let mut bands = PointwiseBands {
            lo95: vec![f64::NAN; n],
            lo50: vec![f64::NAN; n],
            hi50: vec![f64::NAN; n],
            hi95: vec![f64::NAN; n],
        };
        for j in 0..n {
            let col: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
            let e = estimate[j];
            if let Some((lo, hi)) = percentile_interval(&col, 0.95) {
                bands.lo95[j] = if e.is_finite() { lo.min(e) } else { lo };
                bands.hi95[j] = if e.is_finite() { hi.max(e) } else { hi };
            }
            if let Some((lo, hi)) = percentile_interval(&col, 0.5) {
                bands.lo50[j] = if e.is_finite() { lo.min(e) } else { lo };
                bands.hi50[j] = if e.is_finite() { hi.max(e) } else { hi };
            }
        }
        bands
    }

    /// Fraction of points where the 95% band contains `value(j)`.
    pub fn coverage95(&self, value: impl Fn(usize) -> f64) -> f64 {
        let n = self.lo95.len();
        let hit = (0..n)
            .filter(|&j| self.lo95[j] <= value(j) && value(j) <= self.hi95[j])
            .count();
        hit as f64 / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resamples_are_reproducible_and_distinct() {
        assert_eq!(resample_indices(50, 7, 3), resample_indices(50, 7, 3));
        assert_ne!(resample_indices(50, 7, 3), resample_indices(50, 7, 4));
    }

    #[test]
    fn p_value_bounds() {
        assert_eq!(bootstrap_p_value(&[1.0; 99]), 2.0 / 100.0);
        assert_eq!(bootstrap_p_value(&[0.0; 10]), 1.0);
        let mixed: Vec<f64> = (0..100).map(|i| i as f64 - 49.5).collect();
        assert!((bootstrap_p_value(&mixed) - 1.0).abs() < 0.02);
    }

    #[test]
    fn failure_threshold() {
        let spec = BootstrapSpec::new(100, 1);
        let ok = run_bootstrap(10, &spec, |idx| {
            if idx[0] == 0 && idx[1] == 0 {
                Err(FdaError::Degenerate("x".into()))
            } else {
                Ok(1.0)
            }
        });
        assert!(ok.is_ok());
        let bad = run_bootstrap(10, &spec, |_| -> Result<f64> { Err(FdaError::Degenerate("x".into())) });
        assert!(matches!(bad, Err(FdaError::BootstrapInstability { failed: 100, .. })));
    }

    #[test]
    fn bands_contain_estimate() {
        let reps: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let b = PointwiseBands::from_replicates(&reps, &[100.0]);
        assert!(b.lo95[0] <= 100.0 && b.hi95[0] == 100.0);
    }
}
