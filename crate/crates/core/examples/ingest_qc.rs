//! Round-trip a cohort through long-format CSV, then apply the first-year
//! quality-control policy and report exclusions per rule.

use sparsefda::datamodel::{ingest_long_csv, qc_filter, CohortSchema, DuplicatePolicy, QcPolicy};
use sparsefda::simulate::{simulate_cohort, Scenario};

fn main() -> sparsefda::Result<()> {
    let (cohort, _) = simulate_cohort(&Scenario::growth_cohort(300), 6)?;
    let mut long = Vec::new();
    cohort.write_long_csv(&mut long)?;
    let mut scalars = Vec::new();
    cohort.scalars.as_ref().expect("scalars").write_csv(&mut scalars)?;

    let schema = CohortSchema {
        window: (0.0, 12.0),
        variables: vec!["head".into(), "length".into()],
        scalars: cohort.scalars.as_ref().map(|s| s.schema.clone()),
    };
    let loaded = ingest_long_csv(long.as_slice(), Some(scalars.as_slice()), &schema, DuplicatePolicy::Error)?;
    println!("ingested {} subjects, {} rejected rows", loaded.n_subjects(), loaded.rejects.len());

    let (kept, report) = qc_filter(&loaded, &QcPolicy::first_year("head"))?;
    println!("kept {} subjects", kept.n_subjects());
    for (rule, n) in &report.excluded {
        println!("  excluded by {rule}: {n}");
    }
    Ok(())
}
