use crate::error::{FdaError, Result};
use crate::numeric::{interp_bilinear, interp_linear};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Smoothing bandwidth in months: one value for curves, a pair for surfaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSpec {
    Curve(f64),
    Surface(f64, f64),
}

impl BandwidthSpec {
    pub fn curve(h: f64, window_width: f64) -> Result<Self> {
        check_bandwidth(h, window_width)?;
        Ok(BandwidthSpec::Curve(h))
    }

    pub fn surface(h1: f64, h2: f64, window_width: f64) -> Result<Self> {
        check_bandwidth(h1, window_width)?;
        check_bandwidth(h2, window_width)?;
        Ok(BandwidthSpec::Surface(h1, h2))
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            BandwidthSpec::Curve(h) => vec![h],
            BandwidthSpec::Surface(a, b) => vec![a, b],
        }
    }
}

fn check_bandwidth(h: f64, window_width: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FdaError::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    if window_width > 0.0 && h > window_width {
        return Err(FdaError::InvalidInput(format!(
            "bandwidth {h} exceeds the window width {window_width}"
        )));
    }
    Ok(())
}

/// A function sampled on an ascending grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(FdaError::InvalidInput(format!(
                "curve grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.is_empty() {
            return Err(FdaError::InvalidInput("curve grid is empty".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FdaError::InvalidInput("curve grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FdaError::InvalidInput("curve values must be finite".into()));
        }
        Ok(Curve { grid, values })
    }

    /// Linear interpolation (flat beyond the ends).
    pub fn eval(&self, t: f64) -> f64 {
        interp_linear(&self.grid, &self.values, t)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.grid.iter().zip(&self.values).map(|(&t, &v)| f(t, v)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "value"])?;
        for (t, v) in self.grid.iter().zip(&self.values) {
            wtr.write_record([t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A function of two time arguments on a tensor grid; `values[i][j]` is the
/// value at `(grid_s[i], grid_t[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub grid_s: Vec<f64>,
    pub grid_t: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Surface {
    pub fn new(grid_s: Vec<f64>, grid_t: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid_s.len() || values.iter().any(|r| r.len() != grid_t.len()) {
            return Err(FdaError::InvalidInput("surface dimensions do not match its grids".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FdaError::InvalidInput("surface values must be finite".into()));
        }
        Ok(Surface {
            grid_s,
            grid_t,
            values,
        })
    }

    pub fn from_fn(grid_s: &[f64], grid_t: &[f64], f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid_s
            .iter()
            .map(|&s| grid_t.iter().map(|&t| f(s, t)).collect())
            .collect();
        Surface {
            grid_s: grid_s.to_vec(),
            grid_t: grid_t.to_vec(),
            values,
        }
    }

    pub fn is_square(&self) -> bool {
        self.grid_s == self.grid_t
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        interp_bilinear(&self.grid_s, &self.grid_t, &self.values, s, t)
    }

    /// Values at `(g, g)` for a square surface.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid_s.len().min(self.grid_t.len()))
            .map(|i| self.values[i][i])
            .collect()
    }

    pub fn transpose(&self) -> Surface {
        let values = (0..self.grid_t.len())
            .map(|j| (0..self.grid_s.len()).map(|i| self.values[i][j]).collect())
            .collect();
        Surface {
            grid_s: self.grid_t.clone(),
            grid_t: self.grid_s.clone(),
            values,
        }
    }

    /// `(S + Sᵀ) / 2`; requires a square surface.
    pub fn symmetrized(&self) -> Surface {
        let n = self.grid_s.len();
        let mut values = self.values.clone();
        for i in 0..n {
            for j in 0..n {
                values[i][j] = 0.5 * (self.values[i][j] + self.values[j][i]);
            }
        }
        Surface {
            grid_s: self.grid_s.clone(),
            grid_t: self.grid_t.clone(),
            values,
        }
    }

    pub fn max_abs_diff(&self, other: &Surface) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Long-format CSV with columns `s,t,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "t", "value"])?;
        for (i, s) in self.grid_s.iter().enumerate() {
            for (j, t) in self.grid_t.iter().enumerate() {
                wtr.write_record([s.to_string(), t.to_string(), self.values[i][j].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_rejects_unsorted_grid() {
        assert!(Curve::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Curve::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Curve::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn surface_transpose_and_symmetrize() {
        let g = vec![0.0, 1.0, 2.0];
        let s = Surface::from_fn(&g, &g, |a, b| a + 2.0 * b);
        let t = s.transpose();
        assert_eq!(t.values[2][0], s.values[0][2]);
        let sym = s.symmetrized();
        assert_eq!(sym.values[0][2], sym.values[2][0]);
        assert_eq!(sym.values[0][2], 0.5 * (4.0 + 2.0));
    }

    #[test]
    fn surface_json_shape() {
        let g = vec![0.0, 1.0];
        let s = Surface::from_fn(&g, &g, |a, b| a * b);
        let j = serde_json::to_value(&s).unwrap();
        assert!(j.get("grid_s").is_some() && j.get("values").unwrap().is_array());
    }

    #[test]
    fn bandwidth_validation() {
        assert!(BandwidthSpec::curve(0.0, 12.0).is_err());
        assert!(BandwidthSpec::curve(13.0, 12.0).is_err());
        assert!(BandwidthSpec::surface(1.0, 2.0, 12.0).is_ok());
    }
}
