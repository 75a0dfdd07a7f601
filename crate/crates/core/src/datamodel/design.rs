use super::SparseFunctionalSample;
use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Counts of co-observed time pairs on the pooled grid of unique
/// observation times. Stored sparsely: with continuous visit times the
/// pooled grid has roughly one entry per observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignCountMatrix {
    pub grid: Vec<f64>,
    /// Nonzero entries keyed by `(j, k)` grid indices; both `(j,k)` and
    /// `(k,j)` are present.
    pub entries: BTreeMap<(usize, usize), u64>,
}

impl DesignCountMatrix {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, j: usize, k: usize) -> u64 {
        self.entries.get(&(j, k)).copied().unwrap_or(0)
    }

    pub fn trace(&self) -> u64 {
        (0..self.dim()).map(|j| self.get(j, j)).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries.iter().all(|(&(j, k), &v)| self.get(k, j) == v)
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let n = self.dim();
        let mut m = vec![vec![0; n]; n];
        for (&(j, k), &v) in &self.entries {
            m[j][k] = v;
        }
        m
    }

    /// Aggregate counts onto square bins of the given width anchored at
    /// `origin`.
    pub fn binned(&self, origin: f64, bin_width: f64, n_bins: usize) -> Result<BinnedDesign> {
        if !(bin_width > 0.0) || n_bins == 0 {
            return Err(FdaError::InvalidInput("bin width and count must be positive".into()));
        }
        let bin = |t: f64| (((t - origin) / bin_width).floor().max(0.0) as usize).min(n_bins - 1);
        let mut counts = vec![vec![0u64; n_bins]; n_bins];
        for (&(j, k), &v) in &self.entries {
            counts[bin(self.grid[j])][bin(self.grid[k])] += v;
        }
        Ok(BinnedDesign {
            edges: (0..=n_bins).map(|i| origin + bin_width * i as f64).collect(),
            counts,
        })
    }

    /// `t_j,t_k,count` rows for the nonzero entries.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t_j", "t_k", "count"])?;
        for (&(j, k), &v) in &self.entries {
            wtr.write_record([self.grid[j].to_string(), self.grid[k].to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Design counts aggregated on a coarse square grid (plot-ready).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedDesign {
    pub edges: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl BinnedDesign {
    /// Number of maximal runs of nonempty bins along the diagonal.
    pub fn diagonal_clusters(&self) -> usize {
        let mut runs = 0;
        let mut inside = false;
        for i in 0..self.counts.len() {
            let nonzero = self.counts[i][i] > 0;
            if nonzero && !inside {
                runs += 1;
            }
            inside = nonzero;
        }
        runs
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s_lo", "s_hi", "t_lo", "t_hi", "count"])?;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                wtr.write_record([
                    self.edges[i].to_string(),
                    self.edges[i + 1].to_string(),
                    self.edges[j].to_string(),
                    self.edges[j + 1].to_string(),
                    c.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `U = Σ_i U_i` where `U_i[j,k] = 1` iff subject `i` is observed at both
/// pooled times `t_j` and `t_k`.
pub fn design_count_matrix(sample: &SparseFunctionalSample) -> Result<DesignCountMatrix> {
    if sample.is_empty() {
        return Err(FdaError::NoData(format!("sample `{}` has no subjects", sample.variable)));
    }
    let mut grid: Vec<f64> = sample.subjects.values().flatten().map(|o| o.time).collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let index = |t: f64| grid.binary_search_by(|g| g.total_cmp(&t)).expect("time on grid");

    let mut entries = BTreeMap::new();
    for obs in sample.subjects.values() {
        let mut idx: Vec<usize> = obs.iter().map(|o| index(o.time)).collect();
        idx.sort_unstable();
        idx.dedup();
        for &j in &idx {
            for &k in &idx {
                *entries.entry((j, k)).or_insert(0u64) += 1;
            }
        }
    }
    Ok(DesignCountMatrix { grid, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(subjects: Vec<Vec<f64>>) -> SparseFunctionalSample {
        SparseFunctionalSample::from_lists(
            "X",
            (0.0, 12.0),
            subjects
                .into_iter()
                .enumerate()
                .map(|(i, t)| (format!("s{i}").into(), t.clone(), vec![0.0; t.len()])),
        )
        .unwrap()
    }

    #[test]
    fn single_subject_two_times() {
        let u = design_count_matrix(&sample(vec![vec![1.0, 2.0]])).unwrap();
        assert_eq!(u.grid, vec![1.0, 2.0]);
        assert_eq!(u.to_dense(), vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn two_overlapping_subjects() {
        let u = design_count_matrix(&sample(vec![vec![1.0, 2.0], vec![2.0, 3.0]])).unwrap();
        assert_eq!(u.grid, vec![1.0, 2.0, 3.0]);
        assert_eq!(u.to_dense(), vec![vec![1, 1, 0], vec![1, 2, 1], vec![0, 1, 1]]);
    }

    #[test]
    fn singleton() {
        let u = design_count_matrix(&sample(vec![vec![5.0]])).unwrap();
        assert_eq!(u.to_dense(), vec![vec![1]]);
    }

    #[test]
    fn empty_sample_errors() {
        assert!(design_count_matrix(&sample(vec![])).is_err());
    }
}
