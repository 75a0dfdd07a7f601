//! Functional concurrent regression.
//!
//! For a response `Y` and covariates `X_1..X_p` (functional) and
//! `Z_1..Z_q` (scalar) the coefficients at each time `t` solve
//!
//! ```text
//! A(t) [α(t); β(t)] = b(t)
//! ```
//!
//! where `A(t)` holds the covariances among covariates evaluated on the
//! diagonal and `b(t)` their covariances with the response. A scalar
//! response is treated as constant in `t`.
//!
//! Only the diagonal values `C(t, t)` enter the system, so the smoothers
//! are evaluated at `(t, t)` instead of on a full surface.

use crate::bootstrap::{resampled_ids, run_bootstrap, BootstrapSpec, PointwiseBands};
use crate::datamodel::{Cohort, SparseFunctionalSample, SubjectId};
use crate::error::{FdaError, Result};
use crate::fpca::{fit_mean, fit_moments, raw_covariances, residuals, BandwidthChoice, MomentsConfig};
use crate::kernelsmooth::{local_bilinear_at, local_linear_1d, WeightedPoint, WeightedPoint2};
use crate::numeric::{covariance, linspace, mean};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

/// Condition number above which the automatic ridge is added.
pub const RIDGE_CONDITION: f64 = 1e10;
/// Automatic ridge is `RIDGE_SCALE · trace(A) / (p + q)`.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum FcrResponse {
    Functional(String),
    Scalar(String),
}

impl FcrResponse {
    pub fn name(&self) -> &str {
        match self {
            FcrResponse::Functional(n) | FcrResponse::Scalar(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcrSpec {
    pub response: FcrResponse,
    #[serde(default)]
    pub functional: Vec<String>,
    #[serde(default)]
    pub scalar: Vec<String>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Defaults to the intersection of the observed time ranges.
    #[serde(default)]
    pub grid_range: Option<(f64, f64)>,
    /// User ridge added to the (standardized) system at every `t`.
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Bandwidth for the cross-covariances between variables.
    #[serde(default = "default_cross_bandwidth")]
    pub cross_bandwidth: f64,
    /// Bandwidth choices for each functional variable's own mean and
    /// covariance.
    #[serde(default)]
    pub moments: MomentsConfig,
    /// Pinned `(mean, covariance)` bandwidths per functional variable;
    /// variables not listed are resolved through `moments`.
    #[serde(default)]
    pub bandwidths: BTreeMap<String, (f64, f64)>,
}

fn default_grid_size() -> usize {
    51
}
fn default_true() -> bool {
    true
}
fn default_cross_bandwidth() -> f64 {
    crate::crosscorr::DEFAULT_CROSS_BANDWIDTH
}

impl FcrSpec {
    pub fn new(response: FcrResponse, functional: Vec<String>, scalar: Vec<String>) -> Self {
        FcrSpec {
            response,
            functional,
            scalar,
            grid_size: default_grid_size(),
            grid_range: None,
            ridge: 0.0,
            standardize: true,
            cross_bandwidth: default_cross_bandwidth(),
            moments: MomentsConfig::default(),
            bandwidths: BTreeMap::new(),
        }
    }

    pub fn n_covariates(&self) -> usize {
        self.functional.len() + self.scalar.len()
    }

    /// Functional variables involved, response first when functional.
    fn functional_variables(&self) -> Vec<&str> {
        let mut v = Vec::new();
        if let FcrResponse::Functional(n) = &self.response {
            v.push(n.as_str());
        }
        v.extend(self.functional.iter().map(String::as_str));
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_covariates() == 0 {
            return Err(FdaError::Config("regression needs at least one covariate".into()));
        }
        if self.functional_variables().is_empty() {
            return Err(FdaError::Config(
                "regression needs a functional response or covariate to define the time axis".into(),
            ));
        }
        let mut names = BTreeSet::new();
        for n in std::iter::once(self.response.name())
            .chain(self.functional.iter().map(String::as_str))
            .chain(self.scalar.iter().map(String::as_str))
        {
            if !names.insert(n) {
                return Err(FdaError::Config(format!("variable `{n}` is listed twice")));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(FdaError::Config("ridge must be nonnegative".into()));
        }
        if !(self.cross_bandwidth > 0.0) {
            return Err(FdaError::Config("cross bandwidth must be positive".into()));
        }
        if self.grid_size < 2 {
            return Err(FdaError::Config("grid size must be at least 2".into()));
        }
        Ok(())
    }
}

/// Subject-level inputs: functional samples and scalar columns by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FcrData {
    pub functional: BTreeMap<String, SparseFunctionalSample>,
    pub scalar: BTreeMap<String, BTreeMap<SubjectId, f64>>,
}

impl FcrData {
    /// Pull the variables named in `spec` from a cohort; scalars come from
    /// numeric fields of the covariate table, or from `extra` (which takes
    /// precedence, e.g. for a residualized outcome).
    pub fn from_cohort(cohort: &Cohort, spec: &FcrSpec, extra: &BTreeMap<String, BTreeMap<SubjectId, f64>>) -> Result<Self> {
        let mut data = FcrData::default();
        for v in spec.functional_variables() {
            data.functional.insert(v.to_string(), cohort.sample(v)?.clone());
        }
        let mut scalars: Vec<&str> = spec.scalar.iter().map(String::as_str).collect();
        if let FcrResponse::Scalar(n) = &spec.response {
            scalars.push(n);
        }
        for s in scalars {
            let col = match (extra.get(s), &cohort.scalars) {
                (Some(c), _) => c.clone(),
                (None, Some(table)) if table.schema.numeric.iter().any(|n| n == s) => table.numeric_map(s),
                _ => return Err(FdaError::InvalidInput(format!("no numeric scalar `{s}`"))),
            };
            data.scalar.insert(s.to_string(), col);
        }
        Ok(data)
    }

    /// Subjects present in every input.
    pub fn common_subjects(&self) -> Result<Vec<SubjectId>> {
        let mut sets = self
            .functional
            .values()
            .map(|s| s.subjects.keys().cloned().collect::<BTreeSet<_>>())
            .chain(self.scalar.values().map(|c| c.keys().cloned().collect()));
        let first = sets.next().ok_or_else(|| FdaError::NoData("no regression inputs".into()))?;
        let common: BTreeSet<SubjectId> = sets.fold(first, |acc, s| acc.intersection(&s).cloned().collect());
        if common.is_empty() {
            return Err(FdaError::Alignment("response and covariates share no subjects".into()));
        }
        Ok(common.into_iter().collect())
    }

    fn restricted(&self, keep: &BTreeSet<SubjectId>) -> Self {
        FcrData {
            functional: self.functional.iter().map(|(k, s)| (k.clone(), s.restricted_to(keep))).collect(),
            scalar: self
                .scalar
                .iter()
                .map(|(k, c)| (k.clone(), c.iter().filter(|(id, _)| keep.contains(*id)).map(|(a, b)| (a.clone(), *b)).collect()))
                .collect(),
        }
    }

    fn resampled(&self, pairs: &[(SubjectId, SubjectId)]) -> Self {
        let mut out = FcrData::default();
        for (k, s) in &self.functional {
            let mut r = s.clone();
            r.subjects = pairs.iter().map(|(o, n)| (n.clone(), s.subjects[o].clone())).collect();
            out.functional.insert(k.clone(), r);
        }
        for (k, c) in &self.scalar {
            out.scalar.insert(k.clone(), pairs.iter().map(|(o, n)| (n.clone(), c[o])).collect());
        }
        out
    }
}

/// Diagonal-evaluated covariance components on the regression grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcrComponents {
    pub grid: Vec<f64>,
    pub functional_means: BTreeMap<String, Vec<f64>>,
    pub scalar_means: BTreeMap<String, f64>,
    /// `C_X(t, t)` per functional variable.
    pub auto: BTreeMap<String, Vec<f64>>,
    /// `C_{X,W}(t, t)` keyed by the ordered name pair.
    pub cross: BTreeMap<(String, String), Vec<f64>>,
    /// `C_{X,Z}(t)` keyed by (functional, scalar).
    pub function_scalar: BTreeMap<(String, String), Vec<f64>>,
    pub scalar_cov: BTreeMap<(String, String), f64>,
    pub bandwidths: BTreeMap<String, (f64, f64)>,
    pub n_subjects: usize,
}

fn pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl FcrComponents {
    /// Covariance of two named variables at grid index `j`.
    fn cov(&self, a: &str, b: &str, j: usize) -> Result<f64> {
        let missing = || FdaError::Assembly(a.to_string(), b.to_string());
        let fa = self.functional_means.contains_key(a);
        let fb = self.functional_means.contains_key(b);
        Ok(match (fa, fb) {
            (true, true) if a == b => self.auto.get(a).ok_or_else(missing)?[j],
            (true, true) => self.cross.get(&pair(a, b)).ok_or_else(missing)?[j],
            (true, false) => self.function_scalar.get(&(a.to_string(), b.to_string())).ok_or_else(missing)?[j],
            (false, true) => self.function_scalar.get(&(b.to_string(), a.to_string())).ok_or_else(missing)?[j],
            (false, false) => *self.scalar_cov.get(&pair(a, b)).ok_or_else(missing)?,
        })
    }

    fn mean_at(&self, name: &str, j: usize) -> Result<f64> {
        if let Some(m) = self.functional_means.get(name) {
            return Ok(m[j]);
        }
        self.scalar_means
            .get(name)
            .copied()
            .ok_or_else(|| FdaError::InvalidInput(format!("no mean for `{name}`")))
    }
}

fn regression_grid(spec: &FcrSpec, data: &FcrData) -> Result<Vec<f64>> {
    let (lo, hi) = match spec.grid_range {
        Some(r) => r,
        None => {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for v in spec.functional_variables() {
                let (a, b) = data.functional[v]
                    .observed_range()
                    .ok_or_else(|| FdaError::NoData(format!("sample `{v}` is empty")))?;
                lo = lo.max(a);
                hi = hi.min(b);
            }
            (lo, hi)
        }
    };
    if !(hi > lo) {
        return Err(FdaError::Degenerate("observed time ranges do not overlap".into()));
    }
    Ok(linspace(lo, hi, spec.grid_size))
}

fn resolve_bandwidths(spec: &FcrSpec, name: &str, sample: &SparseFunctionalSample, grid: &[f64]) -> Result<(f64, f64)> {
    if let Some(b) = spec.bandwidths.get(name) {
        return Ok(*b);
    }
    if let (BandwidthChoice::Fixed(m), BandwidthChoice::Fixed(c)) = (spec.moments.bw_mean, spec.moments.bw_cov) {
        return Ok((m, c));
    }
    let config = MomentsConfig {
        grid_size: grid.len(),
        grid_range: Some((grid[0], grid[grid.len() - 1])),
        ..spec.moments.clone()
    };
    let m = fit_moments(sample, &config)?;
    Ok((m.bandwidths.mean, m.bandwidths.cov))
}

/// Estimate every covariance the system needs, on subjects common to all
/// inputs.
pub fn estimate_components(spec: &FcrSpec, data: &FcrData) -> Result<FcrComponents> {
    spec.validate()?;
    let ids = data.common_subjects()?;
    let keep: BTreeSet<SubjectId> = ids.iter().cloned().collect();
    let data = data.restricted(&keep);
    let grid = regression_grid(spec, &data)?;
    let diag: Vec<(f64, f64)> = grid.iter().map(|&t| (t, t)).collect();
    let kernel = spec.moments.kernel;

    let mut c = FcrComponents {
        grid: grid.clone(),
        functional_means: BTreeMap::new(),
        scalar_means: BTreeMap::new(),
        auto: BTreeMap::new(),
        cross: BTreeMap::new(),
        function_scalar: BTreeMap::new(),
        scalar_cov: BTreeMap::new(),
        bandwidths: BTreeMap::new(),
        n_subjects: ids.len(),
    };

    let fnames = spec.functional_variables();
    let mut resid = BTreeMap::new();
    for &v in &fnames {
        let sample = &data.functional[v];
        let (hm, hc) = resolve_bandwidths(spec, v, sample, &grid)?;
        let (mean_curve, ..) = fit_mean(sample, &grid, BandwidthChoice::Fixed(hm), &spec.moments)?;
        let r = residuals(sample, &mean_curve);
        let pts: Vec<WeightedPoint2> = raw_covariances(&r).into_iter().flatten().collect();
        if pts.is_empty() {
            return Err(FdaError::InsufficientPairs);
        }
        let auto = local_bilinear_at(&pts, (hc, hc), &diag, &kernel)?.estimate;
        c.functional_means.insert(v.to_string(), mean_curve.values);
        c.auto.insert(v.to_string(), auto);
        c.bandwidths.insert(v.to_string(), (hm, hc));
        resid.insert(v, r);
    }

    for (i, &a) in fnames.iter().enumerate() {
        for &b in &fnames[i + 1..] {
            let values = if data.functional[a].subjects == data.functional[b].subjects {
                // the same process observed twice: its cross-covariance is
                // the autocovariance, noise excluded
                c.auto[a].clone()
            } else {
                let (ra, rb) = (&resid[a], &resid[b]);
                let pts: Vec<WeightedPoint2> = ids
                    .iter()
                    .flat_map(|id| {
                        ra[id].iter().flat_map(move |&(s, x)| rb[id].iter().map(move |&(t, y)| WeightedPoint2::new(s, t, x * y)))
                    })
                    .collect();
                let h = spec.cross_bandwidth;
                local_bilinear_at(&pts, (h, h), &diag, &kernel)?.estimate
            };
            c.cross.insert(pair(a, b), values);
        }
    }

    let snames: Vec<&str> = data.scalar.keys().map(String::as_str).collect();
    let cols: BTreeMap<&str, Vec<f64>> = snames
        .iter()
        .map(|&s| (s, ids.iter().map(|id| data.scalar[s][id]).collect()))
        .collect();
    for (i, &a) in snames.iter().enumerate() {
        c.scalar_means.insert(a.to_string(), mean(&cols[a]));
        for &b in &snames[i..] {
            c.scalar_cov.insert(pair(a, b), covariance(&cols[a], &cols[b]));
        }
    }
    for &v in &fnames {
        for &s in &snames {
            let zbar = c.scalar_means[s];
            let r = &resid[v];
            let pts: Vec<WeightedPoint> = ids
                .iter()
                .zip(&cols[s])
                .flat_map(|(id, z)| r[id].iter().map(move |&(t, x)| WeightedPoint::new(t, x * (z - zbar))))
                .collect();
            let curve = local_linear_1d(&pts, spec.cross_bandwidth, &grid, &kernel)?.estimate;
            c.function_scalar.insert((v.to_string(), s.to_string()), curve.values);
        }
    }
    Ok(c)
}

/// Covariate names in system order: functional then scalar.
fn covariate_names(spec: &FcrSpec) -> Vec<&str> {
    spec.functional.iter().chain(&spec.scalar).map(String::as_str).collect()
}

/// `A(t_j)` and `b(t_j)` on the original scale.
pub fn assemble_system(spec: &FcrSpec, components: &FcrComponents, j: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let names = covariate_names(spec);
    let n = names.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for r in 0..n {
        for s in r..n {
            let v = components.cov(names[r], names[s], j)?;
            a[(r, s)] = v;
            a[(s, r)] = v;
        }
        b[r] = components.cov(spec.response.name(), names[r], j)?;
    }
    Ok((a, b))
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min > 0.0) {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Outcome of the solve at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSolve {
    /// Original-scale coefficients, `None` when singular.
    pub original: Option<Vec<f64>>,
    pub standardized: Option<Vec<f64>>,
    /// Condition number of the system before the automatic ridge.
    pub condition: f64,
    /// Automatic ridge added (0 when none).
    pub ridge: f64,
}

/// Solve the system at grid index `j`.
pub fn solve_point(spec: &FcrSpec, components: &FcrComponents, j: usize) -> Result<PointSolve> {
    let (a, b) = assemble_system(spec, components, j)?;
    let n = a.nrows();
    let scale: Vec<f64> = if spec.standardize {
        (0..n).map(|r| a[(r, r)].max(0.0).sqrt()).collect()
    } else {
        vec![1.0; n]
    };
    let singular = |condition: f64, ridge: f64| PointSolve {
        original: None,
        standardized: None,
        condition,
        ridge,
    };
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Ok(singular(f64::INFINITY, 0.0));
    }
    let mut m = DMatrix::from_fn(n, n, |r, s| a[(r, s)] / (scale[r] * scale[s]));
    let rhs = DVector::from_fn(n, |r, _| b[r] / scale[r]);
    for r in 0..n {
        m[(r, r)] += spec.ridge;
    }
    let condition = condition_number(&m);
    let mut ridge = 0.0;
    if condition > RIDGE_CONDITION {
        ridge = RIDGE_SCALE * m.trace() / n as f64;
        for r in 0..n {
            m[(r, r)] += ridge;
        }
    }
    let Some(chol) = m.clone().cholesky() else {
        return Ok(singular(condition, ridge));
    };
    let gamma = chol.solve(&rhs);
    if gamma.iter().any(|g| !g.is_finite()) {
        return Ok(singular(condition, ridge));
    }
    Ok(PointSolve {
        original: Some((0..n).map(|r| gamma[r] / scale[r]).collect()),
        standardized: spec.standardize.then(|| gamma.iter().copied().collect()),
        condition,
        ridge,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Functional,
    Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    pub name: String,
    pub kind: CovariateKind,
    pub original: Vec<Option<f64>>,
    /// Present when the covariates were standardized.
    pub standardized: Option<Vec<Option<f64>>>,
    pub bands: Option<PointwiseBands>,
    pub standardized_bands: Option<PointwiseBands>,
}

impl CoefficientPath {
    /// Original-scale values with `NaN` for missing points.
    pub fn values(&self) -> Vec<f64> {
        self.original.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcrFit {
    pub response: FcrResponse,
    pub grid: Vec<f64>,
    pub coefficients: Vec<CoefficientPath>,
    /// `β_0(t) = μ_Y(t) − Σ α_r(t) μ_{X_r}(t) − Σ β_g(t) μ_{Z_g}`.
    pub intercept: Vec<Option<f64>>,
    pub condition: Vec<f64>,
    pub ridge: Vec<f64>,
    pub bandwidths: BTreeMap<String, (f64, f64)>,
    pub n_subjects: usize,
    pub failed_replicates: usize,
}

impl FcrFit {
    pub fn coefficient(&self, name: &str) -> Option<&CoefficientPath> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Grid points at which the system was singular.
    pub fn singular_points(&self) -> Vec<f64> {
        self.intercept
            .iter()
            .zip(&self.grid)
            .filter(|(v, _)| v.is_none())
            .map(|(_, t)| *t)
            .collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Long-format CSV, one row per term and grid point:
    /// `term,t,estimate,standardized,lo95,lo50,hi50,hi95,condition,ridge`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["term", "t", "estimate", "standardized", "lo95", "lo50", "hi50", "hi95", "condition", "ridge"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let band = |b: Option<&PointwiseBands>, j: usize| -> [String; 4] {
            match b {
                Some(b) => [b.lo95[j], b.lo50[j], b.hi50[j], b.hi95[j]].map(|x| if x.is_finite() { x.to_string() } else { String::new() }),
                None => Default::default(),
            }
        };
        for (j, t) in self.grid.iter().enumerate() {
            let mut row = vec!["(intercept)".to_string(), t.to_string(), opt(self.intercept[j]), String::new()];
            row.extend(band(None, j));
            row.extend([self.condition[j].to_string(), self.ridge[j].to_string()]);
            wtr.write_record(&row)?;
        }
        for c in &self.coefficients {
            for (j, t) in self.grid.iter().enumerate() {
                let mut row = vec![
                    c.name.clone(),
                    t.to_string(),
                    opt(c.original[j]),
                    opt(c.standardized.as_ref().and_then(|s| s[j])),
                ];
                row.extend(band(c.bands.as_ref(), j));
                row.extend([self.condition[j].to_string(), self.ridge[j].to_string()]);
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Solve on already estimated components.
pub fn solve_components(spec: &FcrSpec, components: &FcrComponents) -> Result<FcrFit> {
    let points: Vec<PointSolve> = (0..components.grid.len())
        .into_par_iter()
        .map(|j| solve_point(spec, components, j))
        .collect::<Result<_>>()?;
    let names = covariate_names(spec);
    let singular = points.iter().filter(|p| p.original.is_none()).count();
    if singular > 0 {
        log::warn!("regression system singular at {singular} of {} grid points", points.len());
    }
    let mut intercept = Vec::with_capacity(points.len());
    for (j, p) in points.iter().enumerate() {
        intercept.push(match &p.original {
            None => None,
            Some(coef) => {
                let mut b0 = components.mean_at(spec.response.name(), j)?;
                for (r, name) in names.iter().enumerate() {
                    b0 -= coef[r] * components.mean_at(name, j)?;
                }
                Some(b0)
            }
        });
    }
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(r, name)| CoefficientPath {
            name: name.to_string(),
            kind: if r < spec.functional.len() {
                CovariateKind::Functional
            } else {
                CovariateKind::Scalar
            },
            original: points.iter().map(|p| p.original.as_ref().map(|c| c[r])).collect(),
            standardized: spec
                .standardize
                .then(|| points.iter().map(|p| p.standardized.as_ref().map(|c| c[r])).collect()),
            bands: None,
            standardized_bands: None,
        })
        .collect();
    Ok(FcrFit {
        response: spec.response.clone(),
        grid: components.grid.clone(),
        coefficients,
        intercept,
        condition: points.iter().map(|p| p.condition).collect(),
        ridge: points.iter().map(|p| p.ridge).collect(),
        bandwidths: components.bandwidths.clone(),
        n_subjects: components.n_subjects,
        failed_replicates: 0,
    })
}

/// Estimate the covariance components and solve pointwise.
pub fn solve_fcr(spec: &FcrSpec, data: &FcrData) -> Result<FcrFit> {
    let components = estimate_components(spec, data)?;
    solve_components(spec, &components)
}

/// Pointwise 50% and 95% percentile bands by subject resampling. Each
/// replicate re-estimates means, covariances and the solve on the resample,
/// with bandwidths and grid held at those of `fit`.
pub fn fcr_bootstrap(spec: &FcrSpec, data: &FcrData, fit: &mut FcrFit, bootstrap: &BootstrapSpec) -> Result<()> {
    let ids = data.common_subjects()?;
    let keep: BTreeSet<SubjectId> = ids.iter().cloned().collect();
    let data = data.restricted(&keep);
    let pinned = FcrSpec {
        grid_size: fit.grid.len(),
        grid_range: Some((fit.grid[0], fit.grid[fit.grid.len() - 1])),
        bandwidths: fit.bandwidths.clone(),
        ..spec.clone()
    };
    let run = run_bootstrap(ids.len(), bootstrap, |idx| {
        let sample = data.resampled(&resampled_ids(&ids, idx));
        let f = solve_fcr(&pinned, &sample)?;
        let orig: Vec<Vec<f64>> = f.coefficients.iter().map(CoefficientPath::values).collect();
        let std: Vec<Vec<f64>> = f
            .coefficients
            .iter()
            .map(|c| match &c.standardized {
                Some(s) => s.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                None => Vec::new(),
            })
            .collect();
        Ok((orig, std))
    })?;
    for (r, c) in fit.coefficients.iter_mut().enumerate() {
        let reps: Vec<Vec<f64>> = run.replicates.iter().map(|(o, _)| o[r].clone()).collect();
        c.bands = Some(PointwiseBands::from_replicates(&reps, &c.values()));
        if let Some(s) = &c.standardized {
            let est: Vec<f64> = s.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let reps: Vec<Vec<f64>> = run.replicates.iter().map(|(_, s)| s[r].clone()).collect();
            c.standardized_bands = Some(PointwiseBands::from_replicates(&reps, &est));
        }
    }
    fit.failed_replicates = run.failures.len();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn components(auto: f64, cross_y: f64) -> FcrComponents {
        let grid = vec![0.0, 1.0];
        let mut c = FcrComponents {
            grid: grid.clone(),
            functional_means: BTreeMap::new(),
            scalar_means: BTreeMap::new(),
            auto: BTreeMap::new(),
            cross: BTreeMap::new(),
            function_scalar: BTreeMap::new(),
            scalar_cov: BTreeMap::new(),
            bandwidths: BTreeMap::new(),
            n_subjects: 10,
        };
        c.functional_means.insert("X".into(), vec![1.0, 2.0]);
        c.scalar_means.insert("Y".into(), 5.0);
        c.auto.insert("X".into(), vec![auto, auto]);
        c.function_scalar.insert(("X".into(), "Y".into()), vec![cross_y, cross_y]);
        c.scalar_cov.insert(pair("Y", "Y"), 9.0);
        c
    }

    #[test]
    fn one_covariate_is_a_ratio() {
        let spec = FcrSpec::new(FcrResponse::Scalar("Y".into()), vec!["X".into()], vec![]);
        let fit = solve_components(&spec, &components(4.0, 2.0)).unwrap();
        let a = fit.coefficient("X").unwrap();
        assert!((a.original[0].unwrap() - 0.5).abs() < 1e-15);
        assert!((a.standardized.as_ref().unwrap()[0].unwrap() - 1.0).abs() < 1e-15);
        // β0 = 5 − 0.5 · μ_X(t)
        assert!((fit.intercept[1].unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn missing_pair_names_both_sides() {
        let spec = FcrSpec::new(FcrResponse::Scalar("Y".into()), vec!["X".into()], vec!["Z".into()]);
        match assemble_system(&spec, &components(1.0, 1.0), 0) {
            Err(FdaError::Assembly(a, b)) => assert_eq!((a.as_str(), b.as_str()), ("X", "Z")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uncorrelated_standardized_scalars_give_identity() {
        let mut c = components(1.0, 1.0);
        for z in ["Z1", "Z2"] {
            c.scalar_means.insert(z.into(), 0.0);
            c.scalar_cov.insert(pair(z, z), 1.0);
            c.scalar_cov.insert(pair(z, "Y"), 0.3);
        }
        c.scalar_cov.insert(pair("Z1", "Z2"), 0.0);
        let spec = FcrSpec::new(FcrResponse::Functional("X".into()), vec![], vec!["Z1".into(), "Z2".into()]);
        c.function_scalar.insert(("X".into(), "Z1".into()), vec![0.3, 0.3]);
        c.function_scalar.insert(("X".into(), "Z2".into()), vec![0.3, 0.3]);
        let (a, _) = assemble_system(&spec, &c, 0).unwrap();
        assert_eq!(a, DMatrix::identity(2, 2));
    }

    #[test]
    fn collinear_covariates_take_the_ridge_path() {
        let mut c = components(1.0, 1.0);
        c.functional_means.insert("W".into(), vec![0.0, 0.0]);
        c.auto.insert("W".into(), vec![1.0, 1.0]);
        c.cross.insert(pair("X", "W"), vec![1.0, 1.0]);
        c.function_scalar.insert(("W".into(), "Y".into()), vec![1.0, 1.0]);
        let spec = FcrSpec::new(FcrResponse::Scalar("Y".into()), vec!["X".into(), "W".into()], vec![]);
        let fit = solve_components(&spec, &c).unwrap();
        assert!(fit.ridge.iter().all(|r| *r > 0.0));
        assert!(fit.condition.iter().all(|k| *k > RIDGE_CONDITION));
    }

    #[test]
    fn spec_rejects_duplicates_and_empty() {
        let s = FcrSpec::new(FcrResponse::Scalar("Y".into()), vec![], vec![]);
        assert!(s.validate().is_err());
        let s = FcrSpec::new(FcrResponse::Scalar("Y".into()), vec!["X".into(), "X".into()], vec![]);
        assert!(s.validate().is_err());
    }
}
