//! Conditional expectation scores from estimated moments against the same
//! computation with the true mean, covariance and noise variance.

use sparsefda::fpca::{FpcaConfig, FpcaModel};
use sparsefda::numeric::mean;
use sparsefda::simulate::{oracle_conditional_scores, simulate_cohort, Scenario};

fn main() -> sparsefda::Result<()> {
    let scenario = Scenario::two_component(400);
    let (cohort, truth) = simulate_cohort(&scenario, 5)?;
    let sample = cohort.sample("X")?;
    let model = FpcaModel::fit(sample, &FpcaConfig::default())?;

    let mut est_err = Vec::new();
    let mut oracle_err = Vec::new();
    for (id, obs) in &sample.subjects {
        let times: Vec<f64> = obs.iter().map(|o| o.time).collect();
        let values: Vec<f64> = obs.iter().map(|o| o.value).collect();
        let oracle = oracle_conditional_scores(&scenario, "X", &times, &values)?;
        let est = model.subject_scores(id)?;
        let xi = truth.scores["X"][id][0];
        // align the sign of the estimated first eigenfunction with the truth
        let sign = model.eigen.eigenfunctions[0].values[0].signum();
        est_err.push((sign * est[0] - xi).powi(2));
        oracle_err.push((oracle.scores[0] - xi).powi(2));
    }
    println!("mean squared error of the first score");
    println!("  estimated moments: {:.4}", mean(&est_err));
    println!("  true moments:      {:.4}", mean(&oracle_err));
    println!("  ratio:             {:.3}", mean(&est_err) / mean(&oracle_err));
    Ok(())
}
