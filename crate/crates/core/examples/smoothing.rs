//! Local linear smoothing of pooled noisy observations, with the bandwidth
//! chosen by subject-level cross-validation and the one-SE rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use sparsefda::kernelsmooth::{cv_bandwidth_1d, local_linear_1d, KernelSpec, SelectionRule, WeightedPoint};
use sparsefda::numeric::linspace;

fn main() -> sparsefda::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let times = Uniform::new(0.0, 12.0).unwrap();
    let noise = Normal::new(0.0, 0.4).unwrap();
    let truth = |t: f64| 40.0 + 8.0 * (1.0 - (-t / 4.0).exp());

    // 150 subjects with six visits each
    let groups: Vec<Vec<WeightedPoint>> = (0..150)
        .map(|_| {
            (0..6)
                .map(|_| {
                    let t = times.sample(&mut rng);
                    WeightedPoint::new(t, truth(t) + noise.sample(&mut rng))
                })
                .collect()
        })
        .collect();

    let kernel = KernelSpec::default();
    let candidates = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0];
    let cv = cv_bandwidth_1d(&groups, &candidates, 10, 1, SelectionRule::OneSe, &kernel)?;
    for (h, e) in cv.candidates.iter().zip(&cv.mean_error) {
        println!("h = {h:<4}  cv error = {}", e.map_or("failed".into(), |e| format!("{e:.4}")));
    }
    println!("selected bandwidth: {}", cv.selected);

    let pooled: Vec<WeightedPoint> = groups.concat();
    let grid = linspace(0.0, 12.0, 13);
    let fit = local_linear_1d(&pooled, cv.selected, &grid, &kernel)?;
    println!("\n   t   estimate   truth");
    for (&t, &m) in grid.iter().zip(&fit.estimate.values) {
        println!("{t:4.0}   {m:8.3}   {:6.3}", truth(t));
    }
    Ok(())
}
