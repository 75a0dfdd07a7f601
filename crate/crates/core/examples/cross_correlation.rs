//! Cross-covariance and correlation between two sparsely observed
//! variables, and the correlation of a variable with a scalar over time.

use sparsefda::crosscorr::{correlation_surface, correlation_trajectory_fs, crosscov_ff, crosscov_fs, CrossCovOptions};
use sparsefda::fpca::{fit_moments, MomentsConfig};
use sparsefda::numeric::variance;
use sparsefda::simulate::{simulate_cohort, Scenario};

fn main() -> sparsefda::Result<()> {
    let (cohort, truth) = simulate_cohort(&Scenario::concurrent(400), 8)?;
    let config = MomentsConfig::fixed(1.5, 2.0);
    let a = cohort.sample("A")?;
    let y = cohort.sample("Y")?;
    let ma = fit_moments(a, &config)?;
    let my = fit_moments(y, &config)?;

    let cc = crosscov_ff(a, &ma, y, &my, &CrossCovOptions::default())?;
    let r = correlation_surface(&cc.surface, &ma, &my)?;
    println!("corr(A(s), Y(t)) at a few (s, t), {} cells clamped to [-1, 1]:", r.n_clamped());
    for s in [1.0, 6.0, 11.0] {
        let row: Vec<String> = [1.0, 6.0, 11.0].iter().map(|&t| format!("{:6.3}", r.surface.eval(s, t))).collect();
        println!("  s = {s:4}: {}", row.join(" "));
    }

    // first true score of A as a scalar, so the correlation follows φ_1
    let z = truth.scores["A"].iter().map(|(id, xi)| (id.clone(), xi[0])).collect();
    let curve = crosscov_fs(a, &ma, &z, 2.0, &config.kernel)?;
    let zv: Vec<f64> = z.values().copied().collect();
    let traj = correlation_trajectory_fs(&curve, &ma, variance(&zv), "xi1")?;
    println!("\ncorr(A(t), xi1):");
    for t in [0.0, 3.0, 6.0, 9.0, 12.0] {
        println!("  t = {t:4}: {:6.3}", traj.estimate.eval(t));
    }
    Ok(())
}
