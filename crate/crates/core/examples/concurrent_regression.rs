//! Concurrent regression `Y(t) = β0(t) + βA(t) A(t) + βB(t) B(t) + ε` with
//! bootstrap bands. The generating coefficients are 2 and -1.

use sparsefda::bootstrap::BootstrapSpec;
use sparsefda::fcr::{fcr_bootstrap, solve_fcr, FcrData, FcrResponse, FcrSpec};
use sparsefda::simulate::{simulate_cohort, Scenario};
use std::collections::BTreeMap;

fn main() -> sparsefda::Result<()> {
    let (cohort, _) = simulate_cohort(&Scenario::concurrent(500), 4)?;
    let mut spec = FcrSpec::new(FcrResponse::Functional("Y".into()), vec!["A".into(), "B".into()], vec![]);
    spec.grid_size = 25;
    for v in ["A", "B", "Y"] {
        spec.bandwidths.insert(v.to_string(), (1.5, 2.0));
    }
    let data = FcrData::from_cohort(&cohort, &spec, &BTreeMap::new())?;
    let mut fit = solve_fcr(&spec, &data)?;
    fcr_bootstrap(&spec, &data, &mut fit, &BootstrapSpec::new(100, 9))?;

    for name in ["A", "B"] {
        let path = fit.coefficient(name).expect("fitted term");
        let bands = path.bands.as_ref().expect("bootstrap bands");
        println!("beta_{name}(t):");
        for j in (0..fit.grid.len()).step_by(4) {
            println!(
                "  t = {:5.2}  {:7.3}  95% [{:7.3}, {:7.3}]",
                fit.grid[j],
                path.original[j].unwrap_or(f64::NAN),
                bands.lo95[j],
                bands.hi95[j]
            );
        }
    }
    println!("largest condition number: {:.1}", fit.condition.iter().fold(0.0f64, |a, &b| a.max(b)));
    Ok(())
}
