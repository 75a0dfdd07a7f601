use crate::datamodel::{normalize_sample, SparseFunctionalSample, SubjectId};
use crate::error::{FdaError, Result};
use crate::kernelsmooth::{
    cv_bandwidth_1d, cv_bandwidth_2d, estimate_sigma2, local_bilinear_2d, local_linear_1d, Curve,
    CvOutcome, DiagonalMethod, FallbackRecord, KernelSpec, SelectionRule, Sigma2Estimate, Surface,
    WeightedPoint, WeightedPoint2,
};
use crate::numeric::linspace;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A fixed bandwidth or `"cv"` for cross-validated selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandwidthRepr", into = "BandwidthRepr")]
pub enum BandwidthChoice {
    Fixed(f64),
    Cv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Value(f64),
    Word(String),
}

impl TryFrom<BandwidthRepr> for BandwidthChoice {
    type Error = String;
    fn try_from(r: BandwidthRepr) -> std::result::Result<Self, String> {
        match r {
            BandwidthRepr::Value(h) if h > 0.0 && h.is_finite() => Ok(BandwidthChoice::Fixed(h)),
            BandwidthRepr::Value(h) => Err(format!("bandwidth must be positive, got {h}")),
            BandwidthRepr::Word(w) if w.eq_ignore_ascii_case("cv") => Ok(BandwidthChoice::Cv),
            BandwidthRepr::Word(w) => Err(format!("bandwidth must be a number or \"cv\", got `{w}`")),
        }
    }
}

impl From<BandwidthChoice> for BandwidthRepr {
    fn from(b: BandwidthChoice) -> Self {
        match b {
            BandwidthChoice::Fixed(h) => BandwidthRepr::Value(h),
            BandwidthChoice::Cv => BandwidthRepr::Word("cv".into()),
        }
    }
}

impl std::str::FromStr for BandwidthChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(BandwidthChoice::Cv);
        }
        let h: f64 = s.parse().map_err(|_| format!("bad bandwidth `{s}`"))?;
        BandwidthChoice::try_from(BandwidthRepr::Value(h))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    pub folds: usize,
    pub seed: u64,
    pub rule: SelectionRule,
    /// Candidate bandwidths as fractions of the observed range.
    pub mean_candidates: Vec<f64>,
    pub cov_candidates: Vec<f64>,
    /// Side of the coarse grid on which training surfaces are evaluated.
    pub surface_grid: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            folds: 10,
            seed: 20_200_101,
            rule: SelectionRule::OneSe,
            mean_candidates: vec![0.02, 0.04, 0.06, 0.08, 0.12, 0.16, 0.25],
            cov_candidates: vec![0.05, 0.075, 0.1, 0.125, 0.15, 0.175],
            surface_grid: 21,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentsConfig {
    pub grid_size: usize,
    /// Evaluation range; defaults to the observed time range.
    pub grid_range: Option<(f64, f64)>,
    pub bw_mean: BandwidthChoice,
    pub bw_cov: BandwidthChoice,
    pub kernel: KernelSpec,
    pub diagonal: DiagonalMethod,
    pub cv: CvSettings,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        MomentsConfig {
            grid_size: 51,
            grid_range: None,
            bw_mean: BandwidthChoice::Cv,
            bw_cov: BandwidthChoice::Cv,
            kernel: KernelSpec::default(),
            diagonal: DiagonalMethod::default(),
            cv: CvSettings::default(),
        }
    }
}

impl MomentsConfig {
    pub fn fixed(bw_mean: f64, bw_cov: f64) -> Self {
        MomentsConfig {
            bw_mean: BandwidthChoice::Fixed(bw_mean),
            bw_cov: BandwidthChoice::Fixed(bw_cov),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBandwidths {
    pub mean: f64,
    pub cov: f64,
    pub mean_cv: Option<CvOutcome>,
    pub cov_cv: Option<CvOutcome>,
}

/// Smoothed mean, covariance surface and measurement-error variance of one
/// variable on a shared grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMoments {
    pub variable: String,
    pub mean: Curve,
    pub autocov: Surface,
    pub sigma2: f64,
    pub sigma2_detail: Sigma2Estimate,
    pub bandwidths: MomentBandwidths,
    pub fallbacks: Vec<FallbackRecord>,
}

impl SmoothedMoments {
    pub fn grid(&self) -> &[f64] {
        &self.mean.grid
    }

    pub fn variance_curve(&self) -> Curve {
        Curve {
            grid: self.mean.grid.clone(),
            values: self.autocov.diagonal(),
        }
    }

    pub fn normalize(&self, sample: &SparseFunctionalSample) -> Result<SparseFunctionalSample> {
        normalize_sample(sample, &self.mean, &self.autocov)
    }

    /// `base` with the bandwidths fixed at the ones used here and the grid
    /// pinned to this grid; used to refit on bootstrap resamples.
    pub fn refit_config(&self, base: &MomentsConfig) -> MomentsConfig {
        let g = self.grid();
        MomentsConfig {
            grid_size: g.len(),
            grid_range: Some((g[0], g[g.len() - 1])),
            bw_mean: BandwidthChoice::Fixed(self.bandwidths.mean),
            bw_cov: BandwidthChoice::Fixed(self.bandwidths.cov),
            ..base.clone()
        }
    }
}

/// Centered observations `(t, y − μ(t))` per subject.
pub fn residuals(sample: &SparseFunctionalSample, mean: &Curve) -> BTreeMap<SubjectId, Vec<(f64, f64)>> {
    sample
        .subjects
        .iter()
        .map(|(id, obs)| (id.clone(), obs.iter().map(|o| (o.time, o.value - mean.eval(o.time))).collect()))
        .collect()
}

/// Off-diagonal raw covariances of each subject, both orders of every pair.
pub fn raw_covariances(resid: &BTreeMap<SubjectId, Vec<(f64, f64)>>) -> Vec<Vec<WeightedPoint2>> {
    resid
        .values()
        .map(|r| {
            let mut pts = Vec::with_capacity(r.len() * r.len().saturating_sub(1));
            for (j, &(tj, rj)) in r.iter().enumerate() {
                for (l, &(tl, rl)) in r.iter().enumerate() {
                    if j != l {
                        pts.push(WeightedPoint2::new(tj, tl, rj * rl));
                    }
                }
            }
            pts
        })
        .collect()
}

pub(crate) fn evaluation_grid(sample: &SparseFunctionalSample, config: &MomentsConfig) -> Result<Vec<f64>> {
    if config.grid_size < 3 {
        return Err(FdaError::Config("grid size must be at least 3".into()));
    }
    let (lo, hi) = match config.grid_range {
        Some(r) => r,
        None => sample
            .observed_range()
            .ok_or_else(|| FdaError::NoData(format!("sample `{}` is empty", sample.variable)))?,
    };
    if !(hi > lo) {
        return Err(FdaError::Degenerate(format!(
            "observation times of `{}` span a single point",
            sample.variable
        )));
    }
    Ok(linspace(lo, hi, config.grid_size))
}

fn scaled(fractions: &[f64], range: f64) -> Vec<f64> {
    fractions.iter().map(|f| f * range).collect()
}

/// Local linear mean on pooled observations, bandwidth fixed or by CV.
pub fn fit_mean(
    sample: &SparseFunctionalSample,
    grid: &[f64],
    choice: BandwidthChoice,
    config: &MomentsConfig,
) -> Result<(Curve, f64, Option<CvOutcome>, Vec<FallbackRecord>)> {
    let groups: Vec<Vec<WeightedPoint>> = sample
        .subjects
        .values()
        .map(|obs| obs.iter().map(|o| WeightedPoint::new(o.time, o.value)).collect())
        .collect();
    let range = grid[grid.len() - 1] - grid[0];
    let (h, cv) = match choice {
        BandwidthChoice::Fixed(h) => (h, None),
        BandwidthChoice::Cv => {
            let out = cv_bandwidth_1d(
                &groups,
                &scaled(&config.cv.mean_candidates, range),
                config.cv.folds,
                config.cv.seed,
                config.cv.rule,
                &config.kernel,
            )?;
            (out.selected, Some(out))
        }
    };
    let pooled: Vec<WeightedPoint> = groups.into_iter().flatten().collect();
    let fit = local_linear_1d(&pooled, h, grid, &config.kernel)?;
    Ok((fit.estimate, h, cv, fit.fallbacks))
}

/// Smoothed mean, covariance and noise variance of one sample.
///
/// The covariance surface smooths raw products of centered observations at
/// distinct visits of the same subject; the diagonal `j = l` is left out
/// because it carries the measurement-error variance.
pub fn fit_moments(sample: &SparseFunctionalSample, config: &MomentsConfig) -> Result<SmoothedMoments> {
    if sample.is_empty() {
        return Err(FdaError::NoData(format!("sample `{}` has no subjects", sample.variable)));
    }
    let grid = evaluation_grid(sample, config)?;
    let range = grid[grid.len() - 1] - grid[0];
    let (mean, h_mean, mean_cv, mut fallbacks) = fit_mean(sample, &grid, config.bw_mean, config)?;

    let resid = residuals(sample, &mean);
    let groups = raw_covariances(&resid);
    if groups.iter().all(Vec::is_empty) {
        return Err(FdaError::InsufficientPairs);
    }
    let (h_cov, cov_cv) = match config.bw_cov {
        BandwidthChoice::Fixed(h) => (h, None),
        BandwidthChoice::Cv => {
            let out = cv_bandwidth_2d(
                &groups,
                &scaled(&config.cv.cov_candidates, range),
                config.cv.folds,
                config.cv.seed,
                config.cv.rule,
                &config.kernel,
                config.cv.surface_grid,
            )?;
            (out.selected, Some(out))
        }
    };
    let pairs: Vec<WeightedPoint2> = groups.into_iter().flatten().collect();
    let surface = local_bilinear_2d(&pairs, (h_cov, h_cov), &grid, &grid, &config.kernel)?;
    fallbacks.extend(surface.fallbacks);
    let autocov = surface.estimate.symmetrized();

    let diagonal: Vec<WeightedPoint> = resid
        .values()
        .flatten()
        .map(|&(t, r)| WeightedPoint::new(t, r * r))
        .collect();
    let sigma2_detail = estimate_sigma2(&diagonal, &pairs, &autocov, h_cov, config.diagonal, &config.kernel)?;

    Ok(SmoothedMoments {
        variable: sample.variable.clone(),
        mean,
        autocov,
        sigma2: sigma2_detail.value,
        sigma2_detail,
        bandwidths: MomentBandwidths {
            mean: h_mean,
            cov: h_cov,
            mean_cv,
            cov_cv,
        },
        fallbacks,
    })
}
