//! Counts of co-observed time pairs, the data behind a design plot. Prints
//! the monthly binned matrix; `--full` adds the exact counts as CSV.

use sparsefda::datamodel::design_count_matrix;
use sparsefda::simulate::{simulate_cohort, Scenario};

fn main() -> sparsefda::Result<()> {
    let (cohort, _) = simulate_cohort(&Scenario::growth_cohort(300), 2)?;
    let sample = cohort.sample("head")?;
    let counts = design_count_matrix(sample)?;
    println!("{} distinct times, {} observations on the diagonal", counts.dim(), counts.trace());

    let binned = counts.binned(0.0, 1.0, 13)?;
    println!("binned by month ({} runs of occupied diagonal bins):", binned.diagonal_clusters());
    for (j, row) in binned.counts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:4}")).collect();
        println!("{:5.0} |{}", binned.edges[j], cells.join(""));
    }
    if std::env::args().any(|a| a == "--full") {
        counts.write_csv(std::io::stdout())?;
    }
    Ok(())
}
