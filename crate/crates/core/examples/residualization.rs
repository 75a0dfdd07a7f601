//! Remove covariate and hospital effects from an outcome with a random
//! intercept model fitted by profiled REML.

use sparsefda::scalarmodels::{residualize_table, ResidualizationSpec};
use sparsefda::simulate::{simulate_cohort, Scenario};

fn main() -> sparsefda::Result<()> {
    let (cohort, truth) = simulate_cohort(&Scenario::growth_cohort(1500), 21)?;
    let table = cohort.scalars.as_ref().expect("scenario has scalars");
    let spec = ResidualizationSpec::all_fields(table, "iq");
    let fit = residualize_table(table, &spec, None)?;

    println!("{:<36} {:>9} {:>8}", "term", "estimate", "se");
    for ((t, b), se) in fit.terms.iter().zip(&fit.coefficients).zip(&fit.std_errors) {
        println!("{t:<36} {b:9.3} {se:8.3}");
    }
    let sd = |v: &[f64]| sparsefda::numeric::variance(v).sqrt();
    let effects: Vec<f64> = truth.cluster_effects.values().copied().collect();
    println!("\n{} hospitals", fit.n_clusters);
    println!("sigma_gamma  {:?} (sd of drawn effects {:.2})", fit.sigma_gamma, sd(&effects));
    println!("sigma_eps    {:.3}", fit.sigma_epsilon);
    println!("Omega2_0     {:.3}", fit.omega2_0);
    Ok(())
}
