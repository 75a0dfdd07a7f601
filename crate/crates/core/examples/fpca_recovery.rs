//! Fit FPCA to a simulated sparse cohort and compare the estimated
//! eigenvalues, eigenfunctions and scores with the generating model.

use sparsefda::fpca::{FpcaConfig, FpcaModel};
use sparsefda::numeric::{pearson, trapezoid};
use sparsefda::simulate::{simulate_cohort, Scenario};

fn main() -> sparsefda::Result<()> {
    let scenario = Scenario::two_component(500);
    let (cohort, truth) = simulate_cohort(&scenario, 11)?;
    let sample = cohort.sample("X")?;
    println!("{} subjects, {} observations", sample.n_subjects(), sample.n_observations());

    let model = FpcaModel::fit(sample, &FpcaConfig::default())?;
    let bw = &model.moments.bandwidths;
    println!("bandwidths: mean {:.2}, covariance {:.2}", bw.mean, bw.cov);
    println!("noise variance: {:.3} (true 0.25)", model.moments.sigma2);
    println!("retained components: {}", model.k());

    let var = scenario.variable("X")?;
    let ids = sample.subject_ids();
    for k in 0..model.k().min(var.eigenvalues.len()) {
        let phi = &model.eigen.eigenfunctions[k];
        let true_phi: Vec<f64> = phi.grid.iter().map(|&t| var.phi(k, t, scenario.window)).collect();
        // eigenfunctions are defined up to sign
        let sign = trapezoid(&phi.grid, &phi.values.iter().zip(&true_phi).map(|(a, b)| a * b).collect::<Vec<_>>()).signum();
        let sq: Vec<f64> = phi.values.iter().zip(&true_phi).map(|(a, b)| (sign * a - b).powi(2)).collect();
        let est: Vec<f64> = ids.iter().map(|id| model.subject_scores(id).map(|s| s[k])).collect::<Result<_, _>>()?;
        let tru: Vec<f64> = ids.iter().map(|id| truth.scores["X"][id][k]).collect();
        println!(
            "component {}: eigenvalue {:.3} (true {}), L2 error {:.3}, score corr {:.3}",
            k + 1,
            model.eigen.eigenvalues[k],
            var.eigenvalues[k],
            trapezoid(&phi.grid, &sq).sqrt(),
            sign * pearson(&est, &tru)
        );
    }
    Ok(())
}
