use super::scenario::{Scenario, ScoreDistribution, VisitDesign};
use crate::datamodel::{
    CategoricalField, Cohort, ScalarCovariates, ScalarRecord, ScalarSchema, SparseFunctionalSample, SubjectId,
};
use crate::error::{FdaError, Result};
use crate::fpca::{conditional_scores, SubjectScores};
use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Stream reserved for cluster-level draws; subject `i` uses stream `i`.
const CLUSTER_STREAM: u64 = u64::MAX;

/// Everything the generator drew, for comparison against estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: Scenario,
    pub seed: u64,
    /// `variable → subject → (ξ_1..ξ_K)`
    pub scores: BTreeMap<String, BTreeMap<SubjectId, Vec<f64>>>,
    pub cluster_effects: BTreeMap<String, f64>,
    /// Outcome value before noise, per subject.
    pub outcome_signal: BTreeMap<SubjectId, f64>,
}

impl GroundTruth {
    /// The latent trajectory `μ(t) + Σ ξ_k φ_k(t)` of a KL variable.
    pub fn trajectory(&self, variable: &str, id: &SubjectId, t: f64) -> Result<f64> {
        let v = self.scenario.variable(variable)?;
        let xi = self.subject_scores(variable, id)?;
        Ok(v.mean.eval(t)
            + xi.iter()
                .enumerate()
                .map(|(k, x)| x * v.phi(k, t, self.scenario.window))
                .sum::<f64>())
    }

    pub fn subject_scores(&self, variable: &str, id: &SubjectId) -> Result<&[f64]> {
        self.scores
            .get(variable)
            .and_then(|m| m.get(id))
            .map(Vec::as_slice)
            .ok_or_else(|| FdaError::InvalidInput(format!("no true scores for {variable}/{id}")))
    }

    /// True score `k` (0-based) of every subject, in subject order.
    pub fn score_column(&self, variable: &str, k: usize) -> Vec<f64> {
        self.scores
            .get(variable)
            .map(|m| m.values().map(|s| s[k]).collect())
            .unwrap_or_default()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn subject_id(i: usize) -> SubjectId {
    SubjectId(format!("S{i:05}"))
}

fn subject_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_times(design: &VisitDesign, window: (f64, f64), rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (a, b) = window;
    let mut t = match design {
        VisitDesign::Uniform { min_count, max_count } => {
            let n = rng.random_range(*min_count..=*max_count);
            (0..n).map(|_| rng.random_range(a..=b)).collect::<Vec<f64>>()
        }
        VisitDesign::Schedule {
            visits,
            jitter,
            miss_probability,
        } => {
            let mut kept: Vec<f64> = Vec::with_capacity(visits.len());
            for &v in visits {
                let j = if *jitter > 0.0 { rng.random_range(-jitter..=*jitter) } else { 0.0 };
                let missed = rng.random::<f64>() < *miss_probability;
                if !missed {
                    kept.push((v + j).clamp(a, b));
                }
            }
            if kept.is_empty() {
                kept.push(visits[rng.random_range(0..visits.len())].clamp(a, b));
            }
            kept
        }
        VisitDesign::Fixed { times } => times.clone(),
    };
    t.sort_by(|x, y| x.total_cmp(y));
    t.dedup();
    t
}

/// Lower Cholesky factor of the joint correlation of all score components
/// (`(variable, k)` in declaration order).
fn score_factor(s: &Scenario) -> Result<(Vec<(usize, usize)>, DMatrix<f64>)> {
    let slots: Vec<(usize, usize)> = s
        .variables
        .iter()
        .enumerate()
        .flat_map(|(v, var)| (0..var.eigenvalues.len()).map(move |k| (v, k)))
        .collect();
    let m = slots.len();
    let mut r = DMatrix::<f64>::identity(m, m);
    let slot_of = |name: &str, k: usize| -> Result<usize> {
        let v = s
            .variables
            .iter()
            .position(|x| x.name == name)
            .ok_or_else(|| FdaError::Config(format!("unknown variable `{name}`")))?;
        Ok(slots.iter().position(|&x| x == (v, k)).expect("slot"))
    };
    for c in &s.score_correlations {
        let (i, j) = (slot_of(&c.a.0, c.a.1)?, slot_of(&c.b.0, c.b.1)?);
        r[(i, j)] = c.rho;
        r[(j, i)] = c.rho;
    }
    // a tiny jitter admits positive semidefinite (e.g. perfectly correlated)
    // specifications
    let jittered = &r + DMatrix::<f64>::identity(m, m) * 1e-12;
    let chol = Cholesky::new(jittered)
        .ok_or_else(|| FdaError::Config("score correlation matrix is not positive semidefinite".into()))?;
    Ok((slots, chol.l()))
}

struct SubjectDraw {
    times: Vec<f64>,
    scores: Vec<Vec<f64>>,
    observations: BTreeMap<String, Vec<f64>>,
    record: Option<ScalarRecord>,
    signal: Option<f64>,
}

/// Generate a cohort from a scenario. Each subject draws from its own
/// ChaCha8 stream, so output does not depend on the thread count.
pub fn simulate_cohort(scenario: &Scenario, seed: u64) -> Result<(Cohort, GroundTruth)> {
    scenario.validate()?;
    let (slots, factor) = score_factor(scenario)?;
    let window = scenario.window;

    let cluster_effects: Vec<f64> = match &scenario.scalars {
        Some(sc) if sc.n_clusters > 0 => {
            let mut rng = subject_rng(seed, CLUSTER_STREAM);
            (0..sc.n_clusters).map(|_| sc.cluster_sd * normal(&mut rng)).collect()
        }
        _ => Vec::new(),
    };

    let draws: Vec<SubjectDraw> = (0..scenario.n_subjects)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, i as u64);
            let times = draw_times(&scenario.design, window, &mut rng);

            let z: Vec<f64> = (0..slots.len())
                .map(|_| match scenario.score_distribution {
                    ScoreDistribution::Gaussian => normal(&mut rng),
                    ScoreDistribution::Uniform => rng.random_range(-(3f64.sqrt())..=3f64.sqrt()),
                })
                .collect();
            let zc: Vec<f64> = (0..slots.len())
                .map(|r| (0..=r).map(|c| factor[(r, c)] * z[c]).sum())
                .collect();
            let mut scores: Vec<Vec<f64>> = scenario.variables.iter().map(|v| vec![0.0; v.eigenvalues.len()]).collect();
            for (slot, &(v, k)) in slots.iter().enumerate() {
                scores[v][k] = scenario.variables[v].eigenvalues[k].sqrt() * zc[slot];
            }

            let latent = |v: usize, t: f64| -> f64 {
                let var = &scenario.variables[v];
                var.mean.eval(t)
                    + scores[v]
                        .iter()
                        .enumerate()
                        .map(|(k, x)| x * var.phi(k, t, window))
                        .sum::<f64>()
            };
            let mut observations = BTreeMap::new();
            for (v, var) in scenario.variables.iter().enumerate() {
                let y: Vec<f64> = times
                    .iter()
                    .map(|&t| latent(v, t) + var.noise_sd * normal(&mut rng))
                    .collect();
                observations.insert(var.name.clone(), y);
            }
            for d in &scenario.derived {
                let y: Vec<f64> = times
                    .iter()
                    .map(|&t| {
                        let signal: f64 = d
                            .terms
                            .iter()
                            .map(|(src, c)| {
                                let v = scenario.variables.iter().position(|x| &x.name == src).expect("validated");
                                c * latent(v, t)
                            })
                            .sum();
                        d.intercept + signal + d.noise_sd * normal(&mut rng)
                    })
                    .collect();
                observations.insert(d.name.clone(), y);
            }

            let (record, signal) = match &scenario.scalars {
                None => (None, None),
                Some(sc) => {
                    let mut rec = ScalarRecord::default();
                    let out = &sc.outcome;
                    let mut signal = out.intercept;
                    for nc in &sc.numeric {
                        let x = nc.mean + nc.sd * normal(&mut rng);
                        signal += out.numeric_effects.get(&nc.name).copied().unwrap_or(0.0) * x;
                        rec.numeric.insert(nc.name.clone(), x);
                    }
                    for cc in &sc.categorical {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut level = cc.levels.last().expect("levels").clone();
                        for (l, p) in cc.levels.iter().zip(&cc.probabilities) {
                            acc += p;
                            if u < acc {
                                level = l.clone();
                                break;
                            }
                        }
                        signal += out
                            .categorical_effects
                            .get(&cc.name)
                            .and_then(|m| m.get(&level))
                            .copied()
                            .unwrap_or(0.0);
                        rec.categorical.insert(cc.name.clone(), level);
                    }
                    let cluster = if sc.n_clusters > 0 {
                        let c = rng.random_range(0..sc.n_clusters);
                        rec.cluster = Some(format!("H{c:02}"));
                        Some(c)
                    } else {
                        None
                    };
                    for e in &out.score_effects {
                        let prod: f64 = e
                            .terms
                            .iter()
                            .map(|(name, k)| {
                                let v = scenario.variables.iter().position(|x| &x.name == name).expect("validated");
                                scores[v][*k] / scenario.variables[v].eigenvalues[*k].sqrt()
                            })
                            .product();
                        signal += e.coefficient * prod;
                    }
                    let y = signal + cluster.map_or(0.0, |c| cluster_effects[c]) + out.noise_sd * normal(&mut rng);
                    rec.numeric.insert(out.name.clone(), y);
                    (Some(rec), Some(signal))
                }
            };
            SubjectDraw {
                times,
                scores,
                observations,
                record,
                signal,
            }
        })
        .collect();

    let mut cohort = Cohort::default();
    let mut names: Vec<String> = scenario.variables.iter().map(|v| v.name.clone()).collect();
    names.extend(scenario.derived.iter().map(|d| d.name.clone()));
    for name in &names {
        cohort
            .samples
            .insert(name.clone(), SparseFunctionalSample::new(name.clone(), window)?);
    }
    let mut truth = GroundTruth {
        scenario: scenario.clone(),
        seed,
        scores: BTreeMap::new(),
        cluster_effects: cluster_effects
            .iter()
            .enumerate()
            .map(|(c, e)| (format!("H{c:02}"), *e))
            .collect(),
        outcome_signal: BTreeMap::new(),
    };
    let mut scalars = match &scenario.scalars {
        Some(sc) => {
            let mut numeric: Vec<String> = sc.numeric.iter().map(|n| n.name.clone()).collect();
            numeric.push(sc.outcome.name.clone());
            Some(ScalarCovariates::new(ScalarSchema {
                subject_column: "subject_id".into(),
                numeric,
                categorical: sc
                    .categorical
                    .iter()
                    .map(|c| CategoricalField {
                        name: c.name.clone(),
                        levels: c.levels.clone(),
                        baseline: c.baseline.clone(),
                    })
                    .collect(),
                cluster: (sc.n_clusters > 0).then(|| "hospital".to_string()),
            })?)
        }
        None => None,
    };

    for (i, d) in draws.into_iter().enumerate() {
        let id = subject_id(i);
        for (name, ys) in &d.observations {
            let sample = cohort.samples.get_mut(name).expect("declared");
            for (&t, &y) in d.times.iter().zip(ys) {
                sample.push(id.clone(), t, y)?;
            }
        }
        for (v, var) in scenario.variables.iter().enumerate() {
            truth
                .scores
                .entry(var.name.clone())
                .or_default()
                .insert(id.clone(), d.scores[v].clone());
        }
        if let (Some(table), Some(rec)) = (scalars.as_mut(), d.record) {
            table.insert(id.clone(), rec)?;
        }
        if let Some(s) = d.signal {
            truth.outcome_signal.insert(id.clone(), s);
        }
    }
    cohort.scalars = scalars.take();
    Ok((cohort, truth))
}

/// Conditional expectation of the scores under the true model:
/// `λ φ(T)ᵀ (C(T,T) + σ² I)⁻¹ (Y − μ(T))`.
pub fn oracle_conditional_scores(
    scenario: &Scenario,
    variable: &str,
    times: &[f64],
    values: &[f64],
) -> Result<SubjectScores> {
    let v = scenario.variable(variable)?;
    let w = scenario.window;
    let n = times.len();
    let mut sigma = DMatrix::from_fn(n, n, |j, l| v.covariance(times[j], times[l], w));
    for j in 0..n {
        sigma[(j, j)] += v.noise_sd * v.noise_sd;
    }
    if v.noise_sd == 0.0 {
        let eps = 1e-10 * sigma.trace() / n as f64;
        for j in 0..n {
            sigma[(j, j)] += eps;
        }
    }
    let phi: Vec<Vec<f64>> = (0..v.eigenvalues.len())
        .map(|k| times.iter().map(|&t| v.phi(k, t, w)).collect())
        .collect();
    let resid: Vec<f64> = times.iter().zip(values).map(|(&t, y)| y - v.mean.eval(t)).collect();
    conditional_scores(sigma, &phi, &v.eigenvalues, &resid).map_err(FdaError::Degenerate)
}
