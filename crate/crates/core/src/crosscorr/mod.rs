//! Cross-covariances between two functional variables or between a
//! functional variable and a scalar, and the correlation surfaces and
//! trajectories derived from them.

use crate::bootstrap::{resampled_ids, run_bootstrap, BootstrapSpec, PointwiseBands};
use crate::datamodel::{SparseFunctionalSample, SubjectId};
use crate::error::{FdaError, Result};
use crate::fpca::{fit_moments, residuals, BandwidthChoice, CvSettings, MomentsConfig, SmoothedMoments};
use crate::kernelsmooth::{
    cv_bandwidth_2d, local_bilinear_2d, local_linear_1d, Curve, KernelSpec, Surface, WeightedPoint,
    WeightedPoint2,
};
use crate::numeric::{mean, variance};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

/// Default smoothing bandwidth (months) for cross-covariances.
pub const DEFAULT_CROSS_BANDWIDTH: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossCovOptions {
    pub bandwidth: BandwidthChoice,
    /// Keep products of observations taken at the same time. Measurement
    /// errors of different variables are independent, so these carry no
    /// noise variance.
    pub include_diagonal: bool,
    pub kernel: KernelSpec,
    pub cv: CvSettings,
}

impl Default for CrossCovOptions {
    fn default() -> Self {
        CrossCovOptions {
            bandwidth: BandwidthChoice::Fixed(DEFAULT_CROSS_BANDWIDTH),
            include_diagonal: true,
            kernel: KernelSpec::default(),
            cv: CvSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCovSurface {
    pub variables: (String, String),
    pub surface: Surface,
    pub bandwidth: f64,
    pub include_diagonal: bool,
    pub n_subjects: usize,
}

fn shared_subjects(a: &SparseFunctionalSample, b: &SparseFunctionalSample) -> Result<BTreeSet<SubjectId>> {
    let shared: BTreeSet<SubjectId> = a
        .subjects
        .keys()
        .filter(|k| b.subjects.contains_key(*k))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(FdaError::Alignment(format!(
            "`{}` and `{}` share no subjects",
            a.variable, b.variable
        )));
    }
    let dropped = a.n_subjects() + b.n_subjects() - 2 * shared.len();
    if dropped > 0 {
        log::warn!(
            "{dropped} subjects observed in only one of `{}`, `{}` are ignored",
            a.variable,
            b.variable
        );
    }
    Ok(shared)
}

/// Smoothed cross-covariance `C_{X1,X2}(s, t)` on `grid(m1) × grid(m2)`.
pub fn crosscov_ff(
    s1: &SparseFunctionalSample,
    m1: &SmoothedMoments,
    s2: &SparseFunctionalSample,
    m2: &SmoothedMoments,
    options: &CrossCovOptions,
) -> Result<CrossCovSurface> {
    let shared = shared_subjects(s1, s2)?;
    let r1 = residuals(s1, &m1.mean);
    let r2 = residuals(s2, &m2.mean);
    let groups: Vec<Vec<WeightedPoint2>> = shared
        .iter()
        .map(|id| {
            let (a, b) = (&r1[id], &r2[id]);
            let mut pts = Vec::with_capacity(a.len() * b.len());
            for &(tj, rj) in a {
                for &(tl, rl) in b {
                    if options.include_diagonal || tj != tl {
                        pts.push(WeightedPoint2::new(tj, tl, rj * rl));
                    }
                }
            }
            pts
        })
        .collect();
    if groups.iter().all(Vec::is_empty) {
        return Err(FdaError::InsufficientPairs);
    }
    let h = match options.bandwidth {
        BandwidthChoice::Fixed(h) => h,
        BandwidthChoice::Cv => {
            let g = m1.grid();
            let range = g[g.len() - 1] - g[0];
            let candidates: Vec<f64> = options.cv.cov_candidates.iter().map(|f| f * range).collect();
            cv_bandwidth_2d(
                &groups,
                &candidates,
                options.cv.folds,
                options.cv.seed,
                options.cv.rule,
                &options.kernel,
                options.cv.surface_grid,
            )?
            .selected
        }
    };
    let pts: Vec<WeightedPoint2> = groups.into_iter().flatten().collect();
    let fit = local_bilinear_2d(&pts, (h, h), m1.grid(), m2.grid(), &options.kernel)?;
    Ok(CrossCovSurface {
        variables: (s1.variable.clone(), s2.variable.clone()),
        surface: fit.estimate,
        bandwidth: h,
        include_diagonal: options.include_diagonal,
        n_subjects: shared.len(),
    })
}

/// Values of `scalar` for the subjects of `sample`, in subject order, or an
/// alignment error when none match.
fn aligned_scalar(sample: &SparseFunctionalSample, scalar: &BTreeMap<SubjectId, f64>) -> Result<Vec<(SubjectId, f64)>> {
    let v: Vec<(SubjectId, f64)> = sample
        .subjects
        .keys()
        .filter_map(|id| scalar.get(id).map(|z| (id.clone(), *z)))
        .collect();
    if v.is_empty() {
        return Err(FdaError::Alignment(format!(
            "no subject of `{}` has a scalar value",
            sample.variable
        )));
    }
    Ok(v)
}

/// Smoothed function-to-scalar cross-covariance `C_{X,Z}(t)` on the moments
/// grid.
pub fn crosscov_fs(
    sample: &SparseFunctionalSample,
    moments: &SmoothedMoments,
    scalar: &BTreeMap<SubjectId, f64>,
    bandwidth: f64,
    kernel: &KernelSpec,
) -> Result<Curve> {
    let z = aligned_scalar(sample, scalar)?;
    let values: Vec<f64> = z.iter().map(|(_, v)| *v).collect();
    if values.len() < 2 || !(variance(&values) > 0.0) {
        return Err(FdaError::Degenerate("scalar variable has zero variance".into()));
    }
    let zbar = mean(&values);
    let resid = residuals(sample, &moments.mean);
    let pts: Vec<WeightedPoint> = z
        .iter()
        .flat_map(|(id, zi)| resid[id].iter().map(move |&(t, r)| WeightedPoint::new(t, r * (zi - zbar))))
        .collect();
    Ok(local_linear_1d(&pts, bandwidth, moments.grid(), kernel)?.estimate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSurface {
    pub surface: Surface,
    pub unclamped: Surface,
    pub clamped: Vec<Vec<bool>>,
}

impl CorrelationSurface {
    pub fn n_clamped(&self) -> usize {
        self.clamped.iter().flatten().filter(|c| **c).count()
    }

    /// `s,t,value,unclamped,clamped`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "t", "value", "unclamped", "clamped"])?;
        let s = &self.surface;
        for (i, a) in s.grid_s.iter().enumerate() {
            for (j, b) in s.grid_t.iter().enumerate() {
                wtr.write_record([
                    a.to_string(),
                    b.to_string(),
                    s.values[i][j].to_string(),
                    self.unclamped.values[i][j].to_string(),
                    self.clamped[i][j].to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn positive_variance(m: &SmoothedMoments, t: f64) -> Result<f64> {
    let v = m.autocov.eval(t, t);
    if !(v > 0.0) {
        return Err(FdaError::DegenerateVariance { at: t });
    }
    Ok(v)
}

/// `R(s,t) = C12(s,t) / √(C1(s,s) C2(t,t))`, clamped to `[-1, 1]`.
pub fn correlation_surface(crosscov: &Surface, m1: &SmoothedMoments, m2: &SmoothedMoments) -> Result<CorrelationSurface> {
    let v1: Vec<f64> = crosscov.grid_s.iter().map(|&s| positive_variance(m1, s)).collect::<Result<_>>()?;
    let v2: Vec<f64> = crosscov.grid_t.iter().map(|&t| positive_variance(m2, t)).collect::<Result<_>>()?;
    let mut unclamped = crosscov.clone();
    let mut surface = crosscov.clone();
    let mut clamped = vec![vec![false; v2.len()]; v1.len()];
    for i in 0..v1.len() {
        for j in 0..v2.len() {
            let r = crosscov.values[i][j] / (v1[i] * v2[j]).sqrt();
            unclamped.values[i][j] = r;
            surface.values[i][j] = r.clamp(-1.0, 1.0);
            clamped[i][j] = r.abs() > 1.0;
        }
    }
    Ok(CorrelationSurface {
        surface,
        unclamped,
        clamped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTrajectory {
    pub variable: String,
    pub scalar: String,
    pub estimate: Curve,
    pub unclamped: Vec<f64>,
    pub clamped: Vec<bool>,
    pub bands: Option<PointwiseBands>,
    pub failed_replicates: usize,
}

impl CorrelationTrajectory {
    /// `t,estimate,lo95,lo50,hi50,hi95,clamped`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        write_trajectory_rows(&mut wtr, self, false)?;
        wtr.flush()?;
        Ok(())
    }
}

/// Shared row writer; with `labelled` the rows start with the variable and
/// scalar names.
pub fn write_trajectory_rows<W: Write>(
    wtr: &mut csv::Writer<W>,
    tr: &CorrelationTrajectory,
    labelled: bool,
) -> Result<()> {
    let header = ["t", "estimate", "lo95", "lo50", "hi50", "hi95", "clamped"];
    if labelled {
        // caller writes the header once for many trajectories
    } else {
        wtr.write_record(header)?;
    }
    let fmt = |v: Option<&Vec<f64>>, j: usize| v.map(|x| x[j].to_string()).unwrap_or_default();
    for (j, t) in tr.estimate.grid.iter().enumerate() {
        let b = tr.bands.as_ref();
        let mut row = Vec::new();
        if labelled {
            row.push(tr.variable.clone());
            row.push(tr.scalar.clone());
        }
        row.extend([
            t.to_string(),
            tr.estimate.values[j].to_string(),
            fmt(b.map(|b| &b.lo95), j),
            fmt(b.map(|b| &b.lo50), j),
            fmt(b.map(|b| &b.hi50), j),
            fmt(b.map(|b| &b.hi95), j),
            tr.clamped[j].to_string(),
        ]);
        wtr.write_record(&row)?;
    }
    Ok(())
}

/// `ρ(t) = C_{X,Z}(t) / √(C(t,t) · Var(Z))`, clamped to `[-1, 1]`.
pub fn correlation_trajectory_fs(
    crosscov: &Curve,
    moments: &SmoothedMoments,
    scalar_variance: f64,
    scalar_name: &str,
) -> Result<CorrelationTrajectory> {
    if !(scalar_variance > 0.0) {
        return Err(FdaError::Degenerate("scalar variable has zero variance".into()));
    }
    let mut unclamped = Vec::with_capacity(crosscov.len());
    for (&t, c) in crosscov.grid.iter().zip(&crosscov.values) {
        unclamped.push(c / (positive_variance(moments, t)? * scalar_variance).sqrt());
    }
    let clamped = unclamped.iter().map(|r| r.abs() > 1.0).collect();
    Ok(CorrelationTrajectory {
        variable: moments.variable.clone(),
        scalar: scalar_name.to_string(),
        estimate: Curve {
            grid: crosscov.grid.clone(),
            values: unclamped.iter().map(|r| r.clamp(-1.0, 1.0)).collect(),
        },
        unclamped,
        clamped,
        bands: None,
        failed_replicates: 0,
    })
}

/// Correlation trajectory with pointwise bootstrap bands. Each replicate
/// refits the mean and covariance on a subject resample (bandwidths and grid
/// held at the values used for `moments`) before recomputing the ratio.
pub fn correlation_trajectory_bootstrap(
    sample: &SparseFunctionalSample,
    scalar: &BTreeMap<SubjectId, f64>,
    scalar_name: &str,
    moments: &SmoothedMoments,
    base: &MomentsConfig,
    bandwidth: f64,
    spec: &BootstrapSpec,
) -> Result<CorrelationTrajectory> {
    let kernel = base.kernel;
    let cc = crosscov_fs(sample, moments, scalar, bandwidth, &kernel)?;
    let zs: Vec<f64> = aligned_scalar(sample, scalar)?.into_iter().map(|(_, v)| v).collect();
    let mut tr = correlation_trajectory_fs(&cc, moments, variance(&zs), scalar_name)?;

    let ids: Vec<SubjectId> = aligned_scalar(sample, scalar)?.into_iter().map(|(id, _)| id).collect();
    let refit = moments.refit_config(base);
    let run = run_bootstrap(ids.len(), spec, |idx| {
        let pairs = resampled_ids(&ids, idx);
        let mut s = SparseFunctionalSample::new(sample.variable.clone(), sample.window)?;
        let mut z = BTreeMap::new();
        for (orig, new) in &pairs {
            s.subjects.insert(new.clone(), sample.subjects[orig].clone());
            z.insert(new.clone(), scalar[orig]);
        }
        let m = fit_moments(&s, &refit)?;
        let c = crosscov_fs(&s, &m, &z, bandwidth, &kernel)?;
        let zv: Vec<f64> = z.values().copied().collect();
        Ok(correlation_trajectory_fs(&c, &m, variance(&zv), scalar_name)?.estimate.values)
    })?;
    tr.bands = Some(PointwiseBands::from_replicates(&run.replicates, &tr.estimate.values));
    tr.failed_replicates = run.failures.len();
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_arithmetic() {
        let g = vec![0.0, 1.0, 2.0];
        let mk = |var: f64| {
            let mut m = crate::fpca::tests_support::flat_moments(&g, var);
            m.variable = "X".into();
            m
        };
        let (m1, m2) = (mk(4.0), mk(1.0));
        let cc = Surface::from_fn(&g, &g, |_, _| 0.6);
        let r = correlation_surface(&cc, &m1, &m2).unwrap();
        assert!((r.surface.values[1][2] - 0.3).abs() < 1e-15);
        assert_eq!(r.n_clamped(), 0);
    }

    #[test]
    fn zero_variance_names_point() {
        let g = vec![0.0, 1.0, 2.0];
        let m = crate::fpca::tests_support::flat_moments(&g, 0.0);
        let cc = Surface::from_fn(&g, &g, |_, _| 0.0);
        assert!(matches!(
            correlation_surface(&cc, &m, &m),
            Err(FdaError::DegenerateVariance { at }) if at == 0.0
        ));
    }
}
