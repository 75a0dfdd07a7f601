//! Regress a residualized outcome on normalized FPC scores and their
//! interaction, with percentile bootstrap intervals and p-values.

use sparsefda::bootstrap::BootstrapSpec;
use sparsefda::fpca::{FpcaConfig, FpcaModel};
use sparsefda::scalarmodels::{bootstrap_score_lm, pearson_scores_vs_outcome, residualize_table, ResidualizationSpec};
use sparsefda::simulate::{simulate_cohort, Scenario};

fn main() -> sparsefda::Result<()> {
    let (cohort, _) = simulate_cohort(&Scenario::growth_cohort(600), 17)?;
    let table = cohort.scalars.as_ref().expect("scenario has scalars");
    let resid = residualize_table(table, &ResidualizationSpec::all_fields(table, "iq"), None)?.residuals;

    let model = FpcaModel::fit(cohort.sample("head")?, &FpcaConfig::default())?;
    let scores = model.normalized_scores();
    let ids: Vec<_> = resid.keys().filter(|id| scores.contains_key(*id)).collect();
    let y: Vec<f64> = ids.iter().map(|id| resid[*id]).collect();
    let cols: Vec<(String, Vec<f64>)> = (0..2)
        .map(|k| (format!("head.xi{}", k + 1), ids.iter().map(|id| scores[*id][k]).collect()))
        .collect();
    let pairs = vec![(cols[0].0.clone(), cols[1].0.clone())];

    let spec = BootstrapSpec::new(500, 1);
    let fit = bootstrap_score_lm(&y, &cols, &pairs, &spec)?;
    let boot = fit.bootstrap.as_ref().expect("bootstrapped");
    println!("{:<22} {:>8} {:>20} {:>8}", "term", "estimate", "95% interval", "p");
    for (j, term) in fit.terms.iter().enumerate() {
        let (lo, hi) = boot.ci95[j];
        println!("{term:<22} {:8.3}   [{lo:7.3}, {hi:7.3}] {:8.3}", fit.coefficients[j], boot.p_values[j]);
    }
    println!("R^2 = {:.3}, n = {}", fit.r_squared, fit.n);

    for (name, x) in &cols {
        let p = pearson_scores_vs_outcome(x, &y, &spec)?;
        println!("corr({name}, iq_res) = {:.3}  95% [{:.3}, {:.3}]", p.r, p.ci95.0, p.ci95.1);
    }
    Ok(())
}
