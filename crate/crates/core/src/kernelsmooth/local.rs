use super::types::{Curve, Surface};
use super::KernelSpec;
use crate::error::{FdaError, Result};
use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative-determinant threshold below which a local design is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

/// A pooled 1-D observation `(t, y)` carrying a nonnegative weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedPoint {
    pub t: f64,
    pub y: f64,
    pub w: f64,
}

impl WeightedPoint {
    pub fn new(t: f64, y: f64) -> Self {
        WeightedPoint { t, y, w: 1.0 }
    }
}

/// A pooled 2-D observation `((s, t), y)` carrying a nonnegative weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedPoint2 {
    pub s: f64,
    pub t: f64,
    pub y: f64,
    pub w: f64,
}

impl WeightedPoint2 {
    pub fn new(s: f64, t: f64, y: f64) -> Self {
        WeightedPoint2 { s, t, y, w: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LocalQuadratic,
    LocalLinear,
    LocalConstant,
}

/// Evaluation point at which the requested polynomial degree could not be
/// fitted and a lower-order fit was used instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FallbackRecord {
    pub point: Vec<f64>,
    pub method: FitMethod,
}

/// Smoother output together with its fallback log.
#[derive(Clone, Debug, PartialEq)]
pub struct Smoothed<T> {
    pub estimate: T,
    pub fallbacks: Vec<FallbackRecord>,
}

/// Intercept of the weighted least-squares solution, or `None` when the
/// normal matrix is numerically singular.
fn wls_intercept<const K: usize>(m: SMatrix<f64, K, K>, r: SVector<f64, K>) -> Option<f64> {
    let mut d = SVector::<f64, K>::zeros();
    for i in 0..K {
        if !(m[(i, i)] > 0.0) {
            return None;
        }
        d[i] = 1.0 / m[(i, i)].sqrt();
    }
    let scaled = SMatrix::<f64, K, K>::from_fn(|i, j| m[(i, j)] * d[i] * d[j]);
    let chol = scaled.cholesky()?;
    // det of the unit-diagonal matrix is the squared product of the
    // Cholesky diagonal
    let det: f64 = (0..K).map(|i| chol.l_dirty()[(i, i)].powi(2)).product();
    if !(det > RANK_TOL) {
        return None;
    }
    let rhs = SVector::<f64, K>::from_fn(|i, _| r[i] * d[i]);
    let sol = chol.solve(&rhs);
    Some(sol[0] * d[0])
}

fn ladder_1d(
    at: f64,
    sums: &[f64; 9],
    want_quadratic: bool,
) -> Result<(f64, Option<FitMethod>)> {
    // sums: w, wd, wd², wd³, wd⁴, wy, wdy, wd²y, (unused)
    let [s0, s1, s2, s3, s4, t0, t1, t2, _] = *sums;
    if !(s0 > 0.0) {
        return Err(FdaError::LocalRank { at: vec![at] });
    }
    if want_quadratic {
        let m = SMatrix::<f64, 3, 3>::new(s0, s1, s2, s1, s2, s3, s2, s3, s4);
        let r = SVector::<f64, 3>::new(t0, t1, t2);
        if let Some(v) = wls_intercept(m, r) {
            return Ok((v, None));
        }
    }
    let m = SMatrix::<f64, 2, 2>::new(s0, s1, s1, s2);
    let r = SVector::<f64, 2>::new(t0, t1);
    if let Some(v) = wls_intercept(m, r) {
        let fb = if want_quadratic { Some(FitMethod::LocalLinear) } else { None };
        return Ok((v, fb));
    }
    Ok((t0 / s0, Some(FitMethod::LocalConstant)))
}

fn moments_1d(points: &[WeightedPoint], h: f64, t: f64, kernel: &KernelSpec) -> [f64; 9] {
    let mut acc = [0.0; 9];
    for p in points {
        let d = (p.t - t) / h;
        let k = kernel.weight(d) * p.w;
        if k == 0.0 {
            continue;
        }
        let d2 = d * d;
        acc[0] += k;
        acc[1] += k * d;
        acc[2] += k * d2;
        acc[3] += k * d2 * d;
        acc[4] += k * d2 * d2;
        acc[5] += k * p.y;
        acc[6] += k * d * p.y;
        acc[7] += k * d2 * p.y;
    }
    acc
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FdaError::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

/// Local linear estimate at a single point. Returns the value and the
/// fallback used, if any.
pub fn local_linear_at(
    points: &[WeightedPoint],
    bandwidth: f64,
    t: f64,
    kernel: &KernelSpec,
) -> Result<(f64, Option<FitMethod>)> {
    check_bandwidth(bandwidth)?;
    let sums = moments_1d(points, bandwidth, t, kernel);
    ladder_1d(t, &sums, false)
}

fn smooth_1d(
    points: &[WeightedPoint],
    bandwidth: f64,
    eval_grid: &[f64],
    kernel: &KernelSpec,
    quadratic: bool,
) -> Result<Smoothed<Curve>> {
    check_bandwidth(bandwidth)?;
    let fits: Vec<Result<(f64, Option<FitMethod>)>> = eval_grid
        .par_iter()
        .map(|&t| ladder_1d(t, &moments_1d(points, bandwidth, t, kernel), quadratic))
        .collect();
    let mut values = Vec::with_capacity(eval_grid.len());
    let mut fallbacks = Vec::new();
    for (fit, &t) in fits.into_iter().zip(eval_grid) {
        let (v, fb) = fit?;
        values.push(v);
        if let Some(method) = fb {
            fallbacks.push(FallbackRecord {
                point: vec![t],
                method,
            });
        }
    }
    Ok(Smoothed {
        estimate: Curve::new(eval_grid.to_vec(), values)?,
        fallbacks,
    })
}

/// Local linear smoother: at each grid point, the intercept of the kernel
/// weighted least-squares line through the pooled points.
pub fn local_linear_1d(
    points: &[WeightedPoint],
    bandwidth: f64,
    eval_grid: &[f64],
    kernel: &KernelSpec,
) -> Result<Smoothed<Curve>> {
    smooth_1d(points, bandwidth, eval_grid, kernel, false)
}

/// Local quadratic smoother (ladder quadratic → linear → constant).
pub fn local_quadratic_1d(
    points: &[WeightedPoint],
    bandwidth: f64,
    eval_grid: &[f64],
    kernel: &KernelSpec,
) -> Result<Smoothed<Curve>> {
    smooth_1d(points, bandwidth, eval_grid, kernel, true)
}

#[derive(Clone, Copy, Default)]
struct Moments2 {
    s0: f64,
    su: f64,
    sv: f64,
    suu: f64,
    suv: f64,
    svv: f64,
    ty: f64,
    tuy: f64,
    tvy: f64,
}

impl Moments2 {
    #[inline]
    fn add(&mut self, k: f64, u: f64, v: f64, y: f64) {
        self.s0 += k;
        self.su += k * u;
        self.sv += k * v;
        self.suu += k * u * u;
        self.suv += k * u * v;
        self.svv += k * v * v;
        self.ty += k * y;
        self.tuy += k * u * y;
        self.tvy += k * v * y;
    }

    fn solve(&self, at: (f64, f64)) -> Result<(f64, Option<FitMethod>)> {
        if !(self.s0 > 0.0) {
            return Err(FdaError::LocalRank {
                at: vec![at.0, at.1],
            });
        }
        let m = SMatrix::<f64, 3, 3>::new(
            self.s0, self.su, self.sv, self.su, self.suu, self.suv, self.sv, self.suv, self.svv,
        );
        let r = SVector::<f64, 3>::new(self.ty, self.tuy, self.tvy);
        match wls_intercept(m, r) {
            Some(v) => Ok((v, None)),
            None => Ok((self.ty / self.s0, Some(FitMethod::LocalConstant))),
        }
    }
}

/// Kernel weights of every point against every grid value along one axis.
fn axis_weights(coords: impl Fn(usize) -> f64 + Sync, n: usize, grid: &[f64], h: f64, kernel: &KernelSpec) -> Vec<Vec<f64>> {
    grid.par_iter()
        .map(|&g| (0..n).map(|p| kernel.weight((coords(p) - g) / h)).collect())
        .collect()
}

/// Local linear surface smoother: at each `(s, t)` the intercept of the
/// weighted plane fit on `(1, S - s, T - t)` with product Gaussian weights.
pub fn local_bilinear_2d(
    points: &[WeightedPoint2],
    bandwidths: (f64, f64),
    grid_s: &[f64],
    grid_t: &[f64],
    kernel: &KernelSpec,
) -> Result<Smoothed<Surface>> {
    let (h1, h2) = bandwidths;
    check_bandwidth(h1)?;
    check_bandwidth(h2)?;
    let n = points.len();
    let ks = axis_weights(|p| points[p].s, n, grid_s, h1, kernel);
    let kt = axis_weights(|p| points[p].t, n, grid_t, h2, kernel);

    let rows: Vec<Result<(Vec<f64>, Vec<FallbackRecord>)>> = grid_s
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let active: Vec<usize> = (0..n).filter(|&p| ks[i][p] > 0.0).collect();
            let mut row = Vec::with_capacity(grid_t.len());
            let mut fbs = Vec::new();
            for (j, &t) in grid_t.iter().enumerate() {
                let mut m = Moments2::default();
                for &p in &active {
                    let kw = ks[i][p] * kt[j][p];
                    if kw == 0.0 {
                        continue;
                    }
                    let pt = &points[p];
                    m.add(kw * pt.w, (pt.s - s) / h1, (pt.t - t) / h2, pt.y);
                }
                let (v, fb) = m.solve((s, t))?;
                row.push(v);
                if let Some(method) = fb {
                    fbs.push(FallbackRecord {
                        point: vec![s, t],
                        method,
                    });
                }
            }
            Ok((row, fbs))
        })
        .collect();

    let mut values = Vec::with_capacity(grid_s.len());
    let mut fallbacks = Vec::new();
    for r in rows {
        let (row, fbs) = r?;
        values.push(row);
        fallbacks.extend(fbs);
    }
    Ok(Smoothed {
        estimate: Surface::new(grid_s.to_vec(), grid_t.to_vec(), values)?,
        fallbacks,
    })
}

/// Local linear surface smoother evaluated at an arbitrary list of points
/// (used for diagonal-only evaluation and held-out prediction).
pub fn local_bilinear_at(
    points: &[WeightedPoint2],
    bandwidths: (f64, f64),
    at: &[(f64, f64)],
    kernel: &KernelSpec,
) -> Result<Smoothed<Vec<f64>>> {
    let (h1, h2) = bandwidths;
    check_bandwidth(h1)?;
    check_bandwidth(h2)?;
    let fits: Vec<Result<(f64, Option<FitMethod>)>> = at
        .par_iter()
        .map(|&(s, t)| {
            let mut m = Moments2::default();
            for pt in points {
                let u = (pt.s - s) / h1;
                let ku = kernel.weight(u);
                if ku == 0.0 {
                    continue;
                }
                let v = (pt.t - t) / h2;
                let kw = ku * kernel.weight(v);
                if kw == 0.0 {
                    continue;
                }
                m.add(kw * pt.w, u, v, pt.y);
            }
            m.solve((s, t))
        })
        .collect();
    let mut values = Vec::with_capacity(at.len());
    let mut fallbacks = Vec::new();
    for (fit, &(s, t)) in fits.into_iter().zip(at) {
        let (v, fb) = fit?;
        values.push(v);
        if let Some(method) = fb {
            fallbacks.push(FallbackRecord {
                point: vec![s, t],
                method,
            });
        }
    }
    Ok(Smoothed {
        estimate: values,
        fallbacks,
    })
}

/// Diagonal values `C(t, t)` of a surface estimated from off-diagonal raw
/// points with a fit that is linear along the diagonal and quadratic across
/// it, so that the ridge of the surface is not flattened by the smoother.
pub fn diagonal_local_quadratic(
    points: &[WeightedPoint2],
    bandwidth: f64,
    eval_grid: &[f64],
    kernel: &KernelSpec,
) -> Result<Smoothed<Curve>> {
    check_bandwidth(bandwidth)?;
    let h = bandwidth;
    let fits: Vec<Result<(f64, Option<FitMethod>)>> = eval_grid
        .par_iter()
        .map(|&t0| {
            // basis (1, a, d²) with a along the diagonal and d across it
            let mut s = [0.0f64; 6];
            let mut r = [0.0f64; 3];
            for pt in points {
                let ks = kernel.weight((pt.s - t0) / h);
                if ks == 0.0 {
                    continue;
                }
                let k = ks * kernel.weight((pt.t - t0) / h) * pt.w;
                if k == 0.0 {
                    continue;
                }
                let a = (0.5 * (pt.s + pt.t) - t0) / h;
                let d = 0.5 * (pt.s - pt.t) / h;
                let q = d * d;
                s[0] += k;
                s[1] += k * a;
                s[2] += k * q;
                s[3] += k * a * a;
                s[4] += k * a * q;
                s[5] += k * q * q;
                r[0] += k * pt.y;
                r[1] += k * a * pt.y;
                r[2] += k * q * pt.y;
            }
            if !(s[0] > 0.0) {
                return Err(FdaError::LocalRank { at: vec![t0, t0] });
            }
            let m3 = SMatrix::<f64, 3, 3>::new(s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5]);
            if let Some(v) = wls_intercept(m3, SVector::<f64, 3>::new(r[0], r[1], r[2])) {
                return Ok((v, None));
            }
            let m2 = SMatrix::<f64, 2, 2>::new(s[0], s[1], s[1], s[3]);
            if let Some(v) = wls_intercept(m2, SVector::<f64, 2>::new(r[0], r[1])) {
                return Ok((v, Some(FitMethod::LocalLinear)));
            }
            Ok((r[0] / s[0], Some(FitMethod::LocalConstant)))
        })
        .collect();
    let mut values = Vec::with_capacity(eval_grid.len());
    let mut fallbacks = Vec::new();
    for (fit, &t) in fits.into_iter().zip(eval_grid) {
        let (v, fb) = fit?;
        values.push(v);
        if let Some(method) = fb {
            fallbacks.push(FallbackRecord {
                point: vec![t, t],
                method,
            });
        }
    }
    Ok(Smoothed {
        estimate: Curve::new(eval_grid.to_vec(), values)?,
        fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    fn k() -> KernelSpec {
        KernelSpec::default()
    }

    #[test]
    fn linear_data_reproduced_exactly() {
        let pts: Vec<WeightedPoint> = linspace(0.0, 12.0, 40)
            .into_iter()
            .map(|t| WeightedPoint::new(t, 2.0 + 3.0 * t))
            .collect();
        let grid = linspace(0.0, 12.0, 51);
        for h in [0.3, 1.0, 5.0] {
            let fit = local_linear_1d(&pts, h, &grid, &k()).unwrap();
            for (t, v) in grid.iter().zip(&fit.estimate.values) {
                let truth = 2.0 + 3.0 * t;
                assert!((v - truth).abs() <= 1e-10 * truth.abs().max(1.0), "h={h} t={t}");
            }
            assert!(fit.fallbacks.is_empty());
        }
    }

    #[test]
    fn identical_times_fall_back_to_local_mean() {
        let pts = vec![
            WeightedPoint::new(3.0, 1.0),
            WeightedPoint::new(3.0, 2.0),
            WeightedPoint::new(3.0, 6.0),
        ];
        let fit = local_linear_1d(&pts, 1.0, &[3.0], &k()).unwrap();
        assert!((fit.estimate.values[0] - 3.0).abs() < 1e-12);
        assert_eq!(fit.fallbacks.len(), 1);
        assert_eq!(fit.fallbacks[0].method, FitMethod::LocalConstant);
    }

    #[test]
    fn no_points_in_window_is_a_rank_error() {
        let pts = vec![WeightedPoint::new(0.0, 1.0), WeightedPoint::new(0.1, 1.0)];
        let err = local_linear_1d(&pts, 0.1, &[11.0], &k()).unwrap_err();
        assert!(matches!(err, FdaError::LocalRank { .. }));
    }

    #[test]
    fn quadratic_reproduces_parabola() {
        let pts: Vec<WeightedPoint> = linspace(0.0, 10.0, 60)
            .into_iter()
            .map(|t| WeightedPoint::new(t, 1.0 - t + 0.5 * t * t))
            .collect();
        let grid = linspace(0.0, 10.0, 11);
        let fit = local_quadratic_1d(&pts, 2.0, &grid, &k()).unwrap();
        for (t, v) in grid.iter().zip(&fit.estimate.values) {
            assert!((v - (1.0 - t + 0.5 * t * t)).abs() < 1e-8);
        }
    }

    #[test]
    fn affine_surface_reproduced() {
        let g = linspace(0.0, 12.0, 13);
        let mut pts = Vec::new();
        for &s in &g {
            for &t in &g {
                pts.push(WeightedPoint2::new(s + 0.1, t - 0.05, 1.0 + 2.0 * (s + 0.1) - (t - 0.05)));
            }
        }
        let eval = linspace(0.0, 12.0, 7);
        let fit = local_bilinear_2d(&pts, (1.0, 2.0), &eval, &eval, &k()).unwrap();
        for (i, s) in eval.iter().enumerate() {
            for (j, t) in eval.iter().enumerate() {
                let truth: f64 = 1.0 + 2.0 * s - t;
                assert!((fit.estimate.values[i][j] - truth).abs() <= 1e-10 * truth.abs().max(1.0));
            }
        }
        let at = local_bilinear_at(&pts, (1.0, 2.0), &[(3.3, 4.4)], &k()).unwrap();
        assert!((at.estimate[0] - (1.0 + 6.6 - 4.4)).abs() < 1e-10);
    }

    #[test]
    fn collinear_surface_points_fall_back() {
        let pts: Vec<WeightedPoint2> = (0..10).map(|i| WeightedPoint2::new(i as f64, i as f64, 5.0)).collect();
        let fit = local_bilinear_2d(&pts, (2.0, 2.0), &[4.0], &[4.0], &k()).unwrap();
        assert!((fit.estimate.values[0][0] - 5.0).abs() < 1e-12);
        assert_eq!(fit.fallbacks[0].method, FitMethod::LocalConstant);
    }

    #[test]
    fn diagonal_fit_recovers_ridge() {
        // c(s,t) = 1 - (s-t)² + 0.2 (s+t): quadratic across, linear along the diagonal
        let g = linspace(0.0, 12.0, 49);
        let mut pts = Vec::new();
        for &s in &g {
            for &t in &g {
                if s != t {
                    pts.push(WeightedPoint2::new(s, t, 1.0 - (s - t) * (s - t) + 0.2 * (s + t)));
                }
            }
        }
        let eval = linspace(2.0, 10.0, 5);
        let fit = diagonal_local_quadratic(&pts, 1.0, &eval, &k()).unwrap();
        for (t, v) in eval.iter().zip(&fit.estimate.values) {
            assert!((v - (1.0 + 0.4 * t)).abs() < 1e-8);
        }
    }
}
