//! K-fold cross-validated bandwidth selection.
//!
//! Folds partition *subjects*, never individual observations, so that the
//! within-subject correlation of held-out data does not leak into training.

use super::local::{local_bilinear_2d, local_linear_at, WeightedPoint, WeightedPoint2};
use super::KernelSpec;
use crate::error::{FdaError, Result};
use crate::numeric::{interp_bilinear, linspace};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Largest candidate whose mean error is within one standard error of
    /// the minimum.
    #[default]
    OneSe,
    /// Candidate with the smallest mean error.
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub selected: f64,
    /// Candidates in ascending order.
    pub candidates: Vec<f64>,
    /// Mean held-out squared error per candidate (`None` if it failed).
    pub mean_error: Vec<Option<f64>>,
    pub std_error: Vec<Option<f64>>,
}

/// Apply the selection rule to per-candidate error summaries. Candidates
/// must be ascending.
pub fn one_se_select(
    candidates: &[f64],
    mean_error: &[Option<f64>],
    std_error: &[Option<f64>],
    rule: SelectionRule,
) -> Result<f64> {
    let best = mean_error
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|m| (i, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(FdaError::NoValidBandwidth)?;
    match rule {
        SelectionRule::Min => Ok(candidates[best.0]),
        SelectionRule::OneSe => {
            let limit = best.1 + std_error[best.0].unwrap_or(0.0);
            let idx = (0..candidates.len())
                .rev()
                .find(|&i| matches!(mean_error[i], Some(m) if m <= limit))
                .unwrap_or(best.0);
            Ok(candidates[idx])
        }
    }
}

fn sorted_candidates(candidates: &[f64]) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(FdaError::InvalidInput("empty bandwidth candidate grid".into()));
    }
    if candidates.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(FdaError::InvalidInput("bandwidth candidates must be positive".into()));
    }
    let mut c = candidates.to_vec();
    c.sort_by(|a, b| a.total_cmp(b));
    c.dedup();
    Ok(c)
}

/// Generic cross-validation driver. `fold_error(train, test, h)` returns the
/// sum of squared held-out errors and the number of held-out points.
pub fn cv_select<F>(
    n_groups: usize,
    candidates: &[f64],
    folds: usize,
    seed: u64,
    rule: SelectionRule,
    fold_error: F,
) -> Result<CvOutcome>
where
    F: Fn(&[usize], &[usize], f64) -> Result<(f64, usize)>,
{
    if folds < 2 {
        return Err(FdaError::InvalidInput("at least two folds are required".into()));
    }
    if n_groups < folds {
        return Err(FdaError::InvalidInput(format!(
            "{n_groups} subjects cannot be split into {folds} folds"
        )));
    }
    let candidates = sorted_candidates(candidates)?;

    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0usize; n_groups];
    for (pos, &g) in order.iter().enumerate() {
        assignment[g] = pos % folds;
    }
    let fold_sets: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let test: Vec<usize> = (0..n_groups).filter(|&g| assignment[g] == f).collect();
            let train: Vec<usize> = (0..n_groups).filter(|&g| assignment[g] != f).collect();
            (train, test)
        })
        .collect();

    let mut mean_error = Vec::with_capacity(candidates.len());
    let mut std_error = Vec::with_capacity(candidates.len());
    for &h in &candidates {
        let mut errs = Vec::with_capacity(folds);
        let mut failed = false;
        for (train, test) in &fold_sets {
            match fold_error(train, test, h) {
                Ok((sse, count)) if count > 0 && sse.is_finite() => errs.push(sse / count as f64),
                Ok(_) => {}
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        if failed || errs.is_empty() {
            mean_error.push(None);
            std_error.push(None);
        } else {
            let m = crate::numeric::mean(&errs);
            let se = (crate::numeric::variance(&errs) / errs.len() as f64).sqrt();
            mean_error.push(Some(m));
            std_error.push(Some(se));
        }
    }
    let selected = one_se_select(&candidates, &mean_error, &std_error, rule)?;
    Ok(CvOutcome {
        selected,
        candidates,
        mean_error,
        std_error,
    })
}

/// Cross-validated bandwidth for the 1-D local linear smoother. `groups`
/// holds each subject's points.
pub fn cv_bandwidth_1d(
    groups: &[Vec<WeightedPoint>],
    candidates: &[f64],
    folds: usize,
    seed: u64,
    rule: SelectionRule,
    kernel: &KernelSpec,
) -> Result<CvOutcome> {
    cv_select(groups.len(), candidates, folds, seed, rule, |train, test, h| {
        let pts: Vec<WeightedPoint> = train.iter().flat_map(|&g| groups[g].iter().copied()).collect();
        let mut sse = 0.0;
        let mut count = 0;
        for &g in test {
            for p in &groups[g] {
                let (fit, _) = local_linear_at(&pts, h, p.t, kernel)?;
                sse += (p.y - fit) * (p.y - fit);
                count += 1;
            }
        }
        Ok((sse, count))
    })
}

/// Cross-validated bandwidth (shared by both axes) for the surface smoother.
/// Each training fit is evaluated on a `grid_size`² grid and interpolated at
/// the held-out raw points.
pub fn cv_bandwidth_2d(
    groups: &[Vec<WeightedPoint2>],
    candidates: &[f64],
    folds: usize,
    seed: u64,
    rule: SelectionRule,
    kernel: &KernelSpec,
    grid_size: usize,
) -> Result<CvOutcome> {
    let (lo, hi) = groups
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.s).min(p.t), hi.max(p.s).max(p.t))
        });
    if !lo.is_finite() {
        return Err(FdaError::InsufficientPairs);
    }
    let grid = linspace(lo, hi, grid_size.max(2));
    cv_select(groups.len(), candidates, folds, seed, rule, |train, test, h| {
        let pts: Vec<WeightedPoint2> = train.iter().flat_map(|&g| groups[g].iter().copied()).collect();
        let fit = local_bilinear_2d(&pts, (h, h), &grid, &grid, kernel)?.estimate;
        let mut sse = 0.0;
        let mut count = 0;
        for &g in test {
            for p in &groups[g] {
                let pred = interp_bilinear(&grid, &grid, &fit.values, p.s, p.t);
                sse += (p.y - pred) * (p.y - pred);
                count += 1;
            }
        }
        Ok((sse, count))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_se_rule_picks_largest_within_band() {
        let c = [1.0, 2.0, 3.0];
        let m = [Some(1.0), Some(0.5), Some(0.55)];
        let s = [Some(0.1), Some(0.1), Some(0.1)];
        assert_eq!(one_se_select(&c, &m, &s, SelectionRule::OneSe).unwrap(), 3.0);
        assert_eq!(one_se_select(&c, &m, &s, SelectionRule::Min).unwrap(), 2.0);
    }

    #[test]
    fn all_failed_candidates_error() {
        let err = one_se_select(&[1.0], &[None], &[None], SelectionRule::OneSe).unwrap_err();
        assert!(matches!(err, FdaError::NoValidBandwidth));
    }

    #[test]
    fn too_few_subjects_for_folds() {
        let groups = vec![vec![WeightedPoint::new(0.0, 1.0)]; 3];
        assert!(cv_bandwidth_1d(&groups, &[1.0], 10, 1, SelectionRule::OneSe, &KernelSpec::default()).is_err());
    }
}
