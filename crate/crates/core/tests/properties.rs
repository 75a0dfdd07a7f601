use proptest::prelude::*;
use sparsefda::bootstrap::{bootstrap_p_value, percentile_interval, resample_indices, PointwiseBands};
use sparsefda::datamodel::{ingest_long_csv, CohortSchema, DuplicatePolicy, SparseFunctionalSample, SubjectId};
use sparsefda::fpca::select_k;
use sparsefda::kernelsmooth::{local_bilinear_2d, local_linear_1d, KernelSpec, Surface, WeightedPoint, WeightedPoint2};
use sparsefda::numeric::{linspace, pearson, trapezoid};
use sparsefda::scalarmodels::{check_rank, fit_score_lm};
use sparsefda::FdaError;

fn scattered(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * step).fract() * 12.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn local_linear_reproduces_lines(a in -50.0..50.0f64, b in -5.0..5.0f64, h in 0.3..6.0f64) {
        let pts: Vec<WeightedPoint> = scattered(120, 0.618_034).into_iter().map(|t| WeightedPoint::new(t, a + b * t)).collect();
        let grid = linspace(0.0, 12.0, 13);
        let fit = local_linear_1d(&pts, h, &grid, &KernelSpec::default()).unwrap().estimate;
        for (&t, v) in grid.iter().zip(&fit.values) {
            let want = a + b * t;
            prop_assert!((v - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn local_bilinear_reproduces_planes(
        a in -20.0..20.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64,
        h1 in 0.5..4.0f64, h2 in 0.5..4.0f64,
    ) {
        let s = scattered(300, 0.618_034);
        let t = scattered(300, 0.414_214);
        let pts: Vec<WeightedPoint2> = s.iter().zip(&t).map(|(&s, &t)| WeightedPoint2::new(s, t, a + b * s + c * t)).collect();
        let grid = linspace(0.0, 12.0, 7);
        let fit = local_bilinear_2d(&pts, (h1, h2), &grid, &grid, &KernelSpec::default()).unwrap().estimate;
        for (i, &x) in grid.iter().enumerate() {
            for (j, &y) in grid.iter().enumerate() {
                let want = a + b * x + c * y;
                prop_assert!((fit.values[i][j] - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn symmetrized_surfaces_are_symmetric(vals in prop::collection::vec(-10.0..10.0f64, 25)) {
        let g = linspace(0.0, 1.0, 5);
        let rows: Vec<Vec<f64>> = vals.chunks(5).map(|c| c.to_vec()).collect();
        let s = Surface::new(g.clone(), g, rows).unwrap().symmetrized();
        prop_assert_eq!(s.max_abs_diff(&s.transpose()), 0.0);
    }

    #[test]
    fn resamples_are_reproducible_and_in_range(n in 1usize..200, seed in any::<u64>(), b in 0usize..50) {
        let x = resample_indices(n, seed, b);
        prop_assert_eq!(x.len(), n);
        prop_assert!(x.iter().all(|&i| i < n));
        prop_assert_eq!(x, resample_indices(n, seed, b));
    }

    #[test]
    fn bands_are_nested_and_contain_estimate(
        reps in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6), 20..60),
        est in prop::collection::vec(-8.0..8.0f64, 6),
    ) {
        let b = PointwiseBands::from_replicates(&reps, &est);
        for j in 0..6 {
            prop_assert!(b.lo95[j] <= b.lo50[j] && b.lo50[j] <= b.hi50[j] && b.hi50[j] <= b.hi95[j]);
            prop_assert!(b.lo95[j] <= est[j] && est[j] <= b.hi95[j]);
        }
    }

    #[test]
    fn percentile_intervals_are_ordered(v in prop::collection::vec(-100.0..100.0f64, 2..300)) {
        let (lo95, hi95) = percentile_interval(&v, 0.95).unwrap();
        let (lo50, hi50) = percentile_interval(&v, 0.50).unwrap();
        prop_assert!(lo95 <= lo50 && lo50 <= hi50 && hi50 <= hi95);
        let p = bootstrap_p_value(&v);
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn selected_k_grows_with_threshold(mut lams in prop::collection::vec(0.01..10.0f64, 1..12), t1 in 0.5..0.99f64, dt in 0.0..0.2f64) {
        lams.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total: f64 = lams.iter().sum();
        let fve: Vec<f64> = lams.iter().scan(0.0, |acc, l| { *acc += l; Some(*acc / total) }).collect();
        let k1 = select_k(&fve, t1).unwrap();
        let t2 = (t1 + dt).min(1.0);
        if let Some(k2) = select_k(&fve, t2) {
            prop_assert!(k2 >= k1);
        }
        prop_assert!(fve[k1 - 1] >= t1 - 1e-12);
        prop_assert!(k1 == 1 || fve[k1 - 2] < t1 - 1e-12);
    }

    #[test]
    fn pearson_is_affine_invariant(
        x in prop::collection::vec(-10.0..10.0f64, 5..40),
        a in 0.1..5.0f64, b in -10.0..10.0f64,
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + (i as f64).sin()).collect();
        let r = pearson(&x, &y);
        prop_assume!(r.is_finite());
        let ya: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson(&x, &ya) - r).abs() < 1e-9);
    }

    #[test]
    fn duplicated_columns_are_rank_deficient(x in prop::collection::vec(-10.0..10.0f64, 6..30), c in 0.5..3.0f64) {
        let n = x.len();
        let m = nalgebra::DMatrix::from_fn(n, 3, |i, j| match j { 0 => 1.0, 1 => x[i], _ => c * x[i] });
        let names = vec!["(intercept)".to_string(), "x".into(), "cx".into()];
        prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
        let is_rank_error = matches!(check_rank(&m, &names), Err(FdaError::RankDeficient(_)));
        prop_assert!(is_rank_error);
    }

    #[test]
    fn long_csv_round_trips(obs in prop::collection::vec((0usize..8, 0.0..12.0f64, -5.0..5.0f64), 1..60)) {
        let mut sample = SparseFunctionalSample::new("v", (0.0, 12.0)).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for (s, t, y) in obs {
            let t = (t * 1000.0).round() / 1000.0;
            if seen.insert((s, (t * 1000.0) as i64)) {
                sample.push(SubjectId(format!("s{s}")), t, y).unwrap();
            }
        }
        let mut cohort = sparsefda::datamodel::Cohort::default();
        cohort.samples.insert("v".into(), sample);
        let mut buf = Vec::new();
        cohort.write_long_csv(&mut buf).unwrap();
        let schema = CohortSchema { window: (0.0, 12.0), variables: vec!["v".into()], scalars: None };
        let back = ingest_long_csv(buf.as_slice(), None::<&[u8]>, &schema, DuplicatePolicy::Error).unwrap();
        prop_assert_eq!(&back.samples["v"], &cohort.samples["v"]);
    }
}

#[test]
fn ols_recovers_exact_linear_response() {
    let x1: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
    let x2: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos()).collect();
    let y: Vec<f64> = (0..30).map(|i| 1.0 + 2.0 * x1[i] - 3.0 * x2[i] + 0.5 * x1[i] * x2[i]).collect();
    let cols = vec![("a".to_string(), x1), ("b".to_string(), x2)];
    let fit = fit_score_lm(&y, &cols, &[("a".into(), "b".into())]).unwrap();
    assert_eq!(fit.terms, ["(intercept)", "a", "b", "a:b"]);
    for (got, want) in fit.coefficients.iter().zip([1.0, 2.0, -3.0, 0.5]) {
        assert!((got - want).abs() < 1e-10);
    }
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn trapezoid_integrates_quadratics_closely() {
    let g = linspace(0.0, 12.0, 501);
    let v: Vec<f64> = g.iter().map(|t| t * t).collect();
    assert!((trapezoid(&g, &v) - 576.0).abs() < 1e-2);
}
