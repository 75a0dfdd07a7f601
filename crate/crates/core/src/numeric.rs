//! Small numerical helpers shared by the estimators: grids, trapezoid
//! quadrature, linear/bilinear interpolation and summary statistics.

/// `n` equispaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            let mut out: Vec<f64> = (0..n).map(|i| a + step * i as f64).collect();
            out[n - 1] = b;
            out
        }
    }
}

/// Composite trapezoid weights for a (possibly non-uniform) ascending grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let half = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    w
}

pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    trapezoid_weights(grid)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// Index `i` such that `grid[i] <= x <= grid[i + 1]`, clamped to the grid.
fn bracket(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => return if i == n - 1 { (n - 2, 1.0) } else { (i, 0.0) },
        Err(i) => i - 1,
    };
    let frac = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, frac)
}

/// Piecewise-linear interpolation; constant beyond the grid ends.
pub fn interp_linear(grid: &[f64], values: &[f64], x: f64) -> f64 {
    debug_assert_eq!(grid.len(), values.len());
    if grid.len() == 1 {
        return values[0];
    }
    let (i, f) = bracket(grid, x);
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Bilinear interpolation of a row-major surface (`rows[i][j]` at
/// `(grid_s[i], grid_t[j])`), clamped at the edges.
pub fn interp_bilinear(grid_s: &[f64], grid_t: &[f64], rows: &[Vec<f64>], s: f64, t: f64) -> f64 {
    if grid_s.len() == 1 || grid_t.len() == 1 {
        let i = if grid_s.len() == 1 { 0 } else { bracket(grid_s, s).0 };
        return interp_linear(grid_t, &rows[i], t);
    }
    let (i, fs) = bracket(grid_s, s);
    let (j, ft) = bracket(grid_t, t);
    let a = rows[i][j] * (1.0 - ft) + rows[i][j + 1] * ft;
    let b = rows[i + 1][j] * (1.0 - ft) + rows[i + 1][j + 1] * ft;
    a * (1.0 - fs) + b * fs
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mx = mean(x);
    let my = mean(y);
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1) as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    covariance(x, y) / (variance(x) * variance(y)).sqrt()
}

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, 0.5)
}
