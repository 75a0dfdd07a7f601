use super::config::RunConfig;
use super::output::{Manifest, Outputs};
use crate::bootstrap::BootstrapSpec;
use crate::crosscorr::{
    correlation_surface, correlation_trajectory_bootstrap, correlation_trajectory_fs, crosscov_ff, crosscov_fs,
    write_trajectory_rows, CorrelationTrajectory, CrossCovOptions,
};
use crate::datamodel::{
    design_count_matrix, ingest_long_csv, qc_filter, Cohort, CohortSchema, QcReport, SubjectId,
};
use crate::error::{FdaError, Result};
use crate::fcr::{fcr_bootstrap, solve_fcr, FcrData, FcrFit, FcrResponse, FcrSpec};
use crate::fpca::{fve_table, write_fve_csv, BandwidthChoice, FpcaModel};
use crate::numeric::variance;
use crate::scalarmodels::{
    bootstrap_score_lm, fit_score_lm, pearson_scores_vs_outcome, residualize_table, write_kde_csv, LinearFit,
    ResidualizationFit, ResidualizationSpec, ScoreColumn, COEFFICIENT_HEADER,
};
use crate::simulate::{simulate_cohort, GroundTruth, Scenario};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::File;

pub const COMMANDS: [&str; 12] = [
    "ingest",
    "qc",
    "fpca",
    "crosscov",
    "corr",
    "fcr",
    "residualize",
    "score-lm",
    "bootstrap",
    "simulate",
    "designplot",
    "pipeline",
];

/// Artifacts of a full pipeline run.
pub const PIPELINE_ARTIFACTS: [&str; 9] = [
    "residualization.json",
    "fpca_models.json",
    "fve_table.csv",
    "coefficients.csv",
    "coefficient_kde.csv",
    "correlation_table.csv",
    "correlation_trajectories.csv",
    "correlation_surface.csv",
    "fcr_coefficients.csv",
];

const DEFAULT_SCENARIO_SIZE: usize = 500;

/// Built-in scenario by name, or a scenario file.
pub fn scenario(cfg: &RunConfig) -> Result<Scenario> {
    let name = cfg
        .scenario
        .as_deref()
        .ok_or_else(|| FdaError::Config("no scenario given".into()))?;
    let n = cfg.n_subjects.unwrap_or(DEFAULT_SCENARIO_SIZE);
    let mut s = match name {
        "two_component" => Scenario::two_component(n),
        "concurrent" => Scenario::concurrent(n),
        "growth_cohort" => Scenario::growth_cohort(n),
        path => Scenario::from_path(std::path::Path::new(path))?,
    };
    if let Some(n) = cfg.n_subjects {
        s.n_subjects = n;
    }
    Ok(s)
}

pub fn simulate(cfg: &RunConfig) -> Result<(Cohort, GroundTruth)> {
    simulate_cohort(&scenario(cfg)?, cfg.require_seed()?)
}

/// Ingest the input files, or simulate when only a scenario is given.
pub fn load_cohort(cfg: &RunConfig) -> Result<Cohort> {
    match (&cfg.input, &cfg.scenario) {
        (Some(input), _) => {
            let schema_path = cfg.schema.as_ref().ok_or_else(|| FdaError::Config("--input needs --schema".into()))?;
            let schema = CohortSchema::from_json_file(schema_path)?;
            let scalars = cfg.scalars.as_ref().map(File::open).transpose()?;
            ingest_long_csv(File::open(input)?, scalars, &schema, cfg.duplicates)
        }
        (None, Some(_)) => Ok(simulate(cfg)?.0),
        (None, None) => Err(FdaError::Config("no data: give --input or --scenario".into())),
    }
}

/// Loaded and quality-controlled cohort.
pub fn prepared_cohort(cfg: &RunConfig) -> Result<(Cohort, QcReport)> {
    let cohort = load_cohort(cfg)?;
    qc_filter(&cohort, &cfg.qc)
}

pub fn analysis_variables(cfg: &RunConfig, cohort: &Cohort) -> Result<Vec<String>> {
    if cohort.samples.values().all(|s| s.is_empty()) {
        return Err(FdaError::NoData("cohort has no observations".into()));
    }
    if cfg.variables.is_empty() {
        return Ok(cohort.samples.keys().cloned().collect());
    }
    for v in &cfg.variables {
        cohort.sample(v)?;
    }
    Ok(cfg.variables.clone())
}

pub fn fit_models(cfg: &RunConfig, cohort: &Cohort) -> Result<BTreeMap<String, FpcaModel>> {
    let config = cfg.fpca_config();
    analysis_variables(cfg, cohort)?
        .into_iter()
        .map(|v| {
            let model = FpcaModel::fit(cohort.sample(&v)?, &config)?;
            Ok((v, model))
        })
        .collect()
}

fn outcome_name(cfg: &RunConfig) -> Result<&str> {
    cfg.outcome
        .as_deref()
        .ok_or_else(|| FdaError::Config("no outcome field given".into()))
}

/// Name under which the residualized outcome is reported.
pub fn residual_name(cfg: &RunConfig) -> Result<String> {
    Ok(format!("{}_res", outcome_name(cfg)?))
}

pub fn residualize(cfg: &RunConfig, cohort: &Cohort) -> Result<ResidualizationFit> {
    let outcome = outcome_name(cfg)?;
    let table = cohort
        .scalars
        .as_ref()
        .ok_or_else(|| FdaError::NoData("no scalar covariates loaded".into()))?;
    residualize_table(table, &ResidualizationSpec::all_fields(table, outcome), None)
}

/// Normalized score columns (`variable.xiK`) and the outcome on the
/// subjects that have both.
pub fn score_columns(
    cfg: &RunConfig,
    models: &BTreeMap<String, FpcaModel>,
    outcome: &BTreeMap<SubjectId, f64>,
) -> Result<(Vec<f64>, Vec<(String, Vec<ScoreColumn>)>)> {
    let normalized: BTreeMap<&String, BTreeMap<SubjectId, Vec<f64>>> =
        models.iter().map(|(v, m)| (v, m.normalized_scores())).collect();
    let ids: Vec<&SubjectId> = outcome
        .keys()
        .filter(|id| normalized.values().all(|s| s.contains_key(*id)))
        .collect();
    if ids.len() < 3 {
        return Err(FdaError::Alignment("fewer than three subjects have both scores and outcome".into()));
    }
    let y = ids.iter().map(|id| outcome[*id]).collect();
    let groups = normalized
        .iter()
        .map(|(v, s)| {
            let k = cfg.score_components.min(models[*v].k());
            let cols = (0..k)
                .map(|c| (format!("{v}.xi{}", c + 1), ids.iter().map(|id| s[*id][c]).collect()))
                .collect();
            ((*v).clone(), cols)
        })
        .collect();
    Ok((y, groups))
}

fn within_pairs(cols: &[ScoreColumn]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            out.push((cols[i].0.clone(), cols[j].0.clone()));
        }
    }
    out
}

/// One model per variable (its scores and their interactions) and, with
/// two or more variables, a joint model.
pub fn score_models(
    cfg: &RunConfig,
    models: &BTreeMap<String, FpcaModel>,
    outcome: &BTreeMap<SubjectId, f64>,
    bootstrap: Option<BootstrapSpec>,
) -> Result<Vec<(String, LinearFit)>> {
    let (y, groups) = score_columns(cfg, models, outcome)?;
    let fit = |cols: &[ScoreColumn], pairs: &[(String, String)]| match &bootstrap {
        Some(b) => bootstrap_score_lm(&y, cols, pairs, b),
        None => fit_score_lm(&y, cols, pairs),
    };
    let mut out = Vec::new();
    for (v, cols) in &groups {
        out.push((v.clone(), fit(cols, &within_pairs(cols))?));
    }
    if groups.len() > 1 {
        let cols: Vec<ScoreColumn> = groups.iter().flat_map(|(_, c)| c.clone()).collect();
        let pairs: Vec<(String, String)> = groups.iter().flat_map(|(_, c)| within_pairs(c)).collect();
        out.push(("joint".to_string(), fit(&cols, &pairs)?));
    }
    Ok(out)
}

fn write_coefficients(out: &mut Outputs, stage: &str, fits: &[(String, LinearFit)]) -> Result<()> {
    out.add("coefficients.csv", stage, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(COEFFICIENT_HEADER)?;
        for (name, f) in fits {
            f.write_rows(name, &mut wtr)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

fn write_kde(out: &mut Outputs, stage: &str, fits: &[(String, LinearFit)]) -> Result<()> {
    let refs: Vec<(&str, &LinearFit)> = fits.iter().map(|(n, f)| (n.as_str(), f)).collect();
    out.add("coefficient_kde.csv", stage, |w| write_kde_csv(&refs, w))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub variable: String,
    pub component: usize,
    pub r: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub n: usize,
}

/// Pearson correlation of each retained score with the outcome, with
/// bootstrap CIs.
pub fn correlation_table(
    cfg: &RunConfig,
    models: &BTreeMap<String, FpcaModel>,
    outcome: &BTreeMap<SubjectId, f64>,
    spec: &BootstrapSpec,
) -> Result<Vec<CorrelationRow>> {
    let (y, groups) = score_columns(cfg, models, outcome)?;
    let mut rows = Vec::new();
    for (v, cols) in &groups {
        for (c, (_, x)) in cols.iter().enumerate() {
            let p = pearson_scores_vs_outcome(x, &y, spec)?;
            rows.push(CorrelationRow {
                variable: v.clone(),
                component: c + 1,
                r: p.r,
                ci95_lo: p.ci95.0,
                ci95_hi: p.ci95.1,
                n: p.n,
            });
        }
    }
    Ok(rows)
}

fn write_rows<T: Serialize>(out: &mut Outputs, name: &str, stage: &str, rows: &[T]) -> Result<()> {
    out.add(name, stage, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        for r in rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

/// Correlation of each variable with the residualized outcome over time.
pub fn trajectories(
    cfg: &RunConfig,
    cohort: &Cohort,
    models: &BTreeMap<String, FpcaModel>,
    outcome: &BTreeMap<SubjectId, f64>,
) -> Result<Vec<CorrelationTrajectory>> {
    let name = residual_name(cfg)?;
    let base = cfg.fpca_config().moments;
    models
        .iter()
        .map(|(v, m)| {
            let sample = cohort.sample(v)?;
            if cfg.band_bootstrap > 0 {
                let spec = BootstrapSpec::new(cfg.band_bootstrap, cfg.require_seed()?);
                correlation_trajectory_bootstrap(sample, outcome, &name, &m.moments, &base, cfg.cross_bandwidth, &spec)
            } else {
                let cc = crosscov_fs(sample, &m.moments, outcome, cfg.cross_bandwidth, &base.kernel)?;
                let z: Vec<f64> = sample.subjects.keys().filter_map(|id| outcome.get(id).copied()).collect();
                correlation_trajectory_fs(&cc, &m.moments, variance(&z), &name)
            }
        })
        .collect()
}

fn write_trajectories(out: &mut Outputs, stage: &str, trs: &[CorrelationTrajectory]) -> Result<()> {
    out.add("correlation_trajectories.csv", stage, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["variable", "scalar", "t", "estimate", "lo95", "lo50", "hi50", "hi95", "clamped"])?;
        for tr in trs {
            write_trajectory_rows(&mut wtr, tr, true)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

fn first_two<'a>(models: &'a BTreeMap<String, FpcaModel>) -> Result<(&'a FpcaModel, &'a FpcaModel)> {
    let mut it = models.values();
    match (it.next(), it.next()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(FdaError::Config("a cross-covariance needs two functional variables".into())),
    }
}

fn cross_options(cfg: &RunConfig) -> CrossCovOptions {
    CrossCovOptions {
        bandwidth: BandwidthChoice::Fixed(cfg.cross_bandwidth),
        ..CrossCovOptions::default()
    }
}

fn surface_stage(cfg: &RunConfig, cohort: &Cohort, models: &BTreeMap<String, FpcaModel>, out: &mut Outputs, stage: &str) -> Result<()> {
    let (a, b) = first_two(models)?;
    let cc = crosscov_ff(cohort.sample(&a.variable)?, &a.moments, cohort.sample(&b.variable)?, &b.moments, &cross_options(cfg))?;
    let r = correlation_surface(&cc.surface, &a.moments, &b.moments)?;
    out.add("correlation_surface.csv", stage, |w| r.write_csv(w))
}

/// Concurrent regression of the residualized outcome (or `fcr_response`)
/// on the functional variables, bandwidths taken from the fitted models.
pub fn fcr_fit(
    cfg: &RunConfig,
    cohort: &Cohort,
    models: &BTreeMap<String, FpcaModel>,
    outcome: Option<&BTreeMap<SubjectId, f64>>,
) -> Result<FcrFit> {
    let mut extra = BTreeMap::new();
    let response = match &cfg.fcr_response {
        Some(r) if cohort.samples.contains_key(r) => FcrResponse::Functional(r.clone()),
        Some(r) => FcrResponse::Scalar(r.clone()),
        None => {
            let name = residual_name(cfg)?;
            let y = outcome.ok_or_else(|| FdaError::NoData("no residualized outcome".into()))?;
            extra.insert(name.clone(), y.clone());
            FcrResponse::Scalar(name)
        }
    };
    let functional: Vec<String> = models.keys().filter(|v| *v != response.name()).cloned().collect();
    let mut spec = FcrSpec::new(response, functional, vec![]);
    spec.grid_size = cfg.grid_size;
    spec.cross_bandwidth = cfg.cross_bandwidth;
    spec.moments = cfg.fpca_config().moments;
    spec.bandwidths = models
        .iter()
        .map(|(v, m)| (v.clone(), (m.moments.bandwidths.mean, m.moments.bandwidths.cov)))
        .collect();
    let data = FcrData::from_cohort(cohort, &spec, &extra)?;
    let mut fit = solve_fcr(&spec, &data)?;
    if cfg.band_bootstrap > 0 {
        fcr_bootstrap(&spec, &data, &mut fit, &BootstrapSpec::new(cfg.band_bootstrap, cfg.require_seed()?))?;
    }
    Ok(fit)
}

fn residual_map(fit: &ResidualizationFit) -> BTreeMap<SubjectId, f64> {
    fit.residuals.clone()
}

fn models_json(out: &mut Outputs, stage: &str, models: &BTreeMap<String, FpcaModel>) -> Result<()> {
    out.add_json("fpca_models.json", stage, models)?;
    let refs: Vec<&FpcaModel> = models.values().collect();
    let rows = fve_table(&refs, usize::MAX);
    out.add("fve_table.csv", stage, |w| write_fve_csv(&rows, w))
}

fn summary(cohort: &Cohort) -> serde_json::Value {
    let vars: BTreeMap<&String, serde_json::Value> = cohort
        .samples
        .iter()
        .map(|(k, s)| {
            (k, serde_json::json!({"subjects": s.n_subjects(), "observations": s.n_observations()}))
        })
        .collect();
    serde_json::json!({
        "variables": vars,
        "scalar_records": cohort.scalars.as_ref().map(|s| s.records.len()),
        "rejected_rows": cohort.rejects.len(),
    })
}

fn write_cohort(out: &mut Outputs, stage: &str, cohort: &Cohort) -> Result<()> {
    out.add("cohort_long.csv", stage, |w| cohort.write_long_csv(w))?;
    if let Some(s) = &cohort.scalars {
        out.add("scalars.csv", stage, |w| s.write_csv(w))?;
    }
    write_rows(out, "rejects.csv", stage, &cohort.rejects)
}

fn require_bootstrap_seed(cfg: &RunConfig, command: &str) -> Result<()> {
    let needs = match command {
        "bootstrap" => cfg.bootstrap > 0,
        "corr" | "fcr" => cfg.band_bootstrap > 0,
        "pipeline" => cfg.bootstrap > 0 || cfg.band_bootstrap > 0,
        "simulate" => true,
        _ => false,
    };
    if needs {
        cfg.require_seed()?;
    }
    Ok(())
}

/// Run one subcommand. Single-stage commands write nothing on failure; the
/// pipeline records stage failures in its manifest and keeps going.
pub fn execute(command: &str, cfg: &RunConfig) -> Result<Manifest> {
    if !COMMANDS.contains(&command) {
        return Err(FdaError::Config(format!("unknown command `{command}`")));
    }
    cfg.validate()?;
    require_bootstrap_seed(cfg, command)?;
    let mut out = Outputs::new(command, cfg.sha256(), cfg.seed);
    if command == "pipeline" {
        pipeline(cfg, &mut out);
        return out.commit(&cfg.output);
    }
    single(command, cfg, &mut out)?;
    out.stage(command, Ok(()));
    out.commit(&cfg.output)
}

/// [`execute`] inside a pool of `threads` workers.
pub fn execute_with_threads(command: &str, cfg: &RunConfig, threads: Option<usize>) -> Result<Manifest> {
    match threads {
        None => execute(command, cfg),
        Some(0) => Err(FdaError::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| FdaError::Config(e.to_string()))?
            .install(|| execute(command, cfg)),
    }
}

fn single(command: &str, cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let stage = command;
    if command == "simulate" {
        let (cohort, truth) = simulate(cfg)?;
        write_cohort(out, stage, &cohort)?;
        let first = cohort.samples.values().next().ok_or_else(|| FdaError::NoData("empty scenario".into()))?;
        let schema = CohortSchema {
            window: first.window,
            variables: cohort.samples.keys().cloned().collect(),
            scalars: cohort.scalars.as_ref().map(|s| s.schema.clone()),
        };
        out.add_json("schema.json", stage, &schema)?;
        return out.add("ground_truth.json", stage, |w| {
            w.extend(truth.to_json()?.as_bytes());
            w.push(b'\n');
            Ok(())
        });
    }
    if command == "ingest" {
        let cohort = load_cohort(cfg)?;
        write_cohort(out, stage, &cohort)?;
        return out.add_json("cohort_summary.json", stage, &summary(&cohort));
    }
    let (cohort, report) = prepared_cohort(cfg)?;
    out.manifest.qc_report = Some(report.clone());
    match command {
        "qc" => {
            write_cohort(out, stage, &cohort)?;
            out.add_json("qc_report.json", stage, &report)
        }
        "designplot" => {
            for v in analysis_variables(cfg, &cohort)? {
                let s = cohort.sample(&v)?;
                let u = design_count_matrix(s)?;
                let bins = ((s.window.1 - s.window.0) / cfg.design_bin).ceil().max(1.0) as usize;
                let binned = u.binned(s.window.0, cfg.design_bin, bins)?;
                out.add(&format!("design_counts_{v}.csv"), stage, |w| u.write_csv(w))?;
                out.add(&format!("design_binned_{v}.csv"), stage, |w| binned.write_csv(w))?;
            }
            Ok(())
        }
        "fpca" => {
            let models = fit_models(cfg, &cohort)?;
            models_json(out, stage, &models)?;
            for (v, m) in &models {
                out.add(&format!("scores_{v}.csv"), stage, |w| m.write_scores_csv(w))?;
                let u = design_count_matrix(cohort.sample(v)?)?;
                out.add(&format!("design_counts_{v}.csv"), stage, |w| u.write_csv(w))?;
            }
            Ok(())
        }
        "crosscov" => {
            let models = fit_models(cfg, &cohort)?;
            let (a, b) = first_two(&models)?;
            let cc = crosscov_ff(cohort.sample(&a.variable)?, &a.moments, cohort.sample(&b.variable)?, &b.moments, &cross_options(cfg))?;
            out.add("crosscov_surface.csv", stage, |w| cc.surface.write_csv(w))
        }
        "corr" => {
            let models = fit_models(cfg, &cohort)?;
            if models.len() > 1 {
                surface_stage(cfg, &cohort, &models, out, stage)?;
            }
            if cfg.outcome.is_some() {
                let resid = residual_map(&residualize(cfg, &cohort)?);
                let trs = trajectories(cfg, &cohort, &models, &resid)?;
                write_trajectories(out, stage, &trs)?;
            }
            if models.len() < 2 && cfg.outcome.is_none() {
                return Err(FdaError::Config("corr needs two variables or an outcome".into()));
            }
            Ok(())
        }
        "fcr" => {
            let models = fit_models(cfg, &cohort)?;
            let resid = match &cfg.fcr_response {
                Some(_) => None,
                None => Some(residual_map(&residualize(cfg, &cohort)?)),
            };
            let fit = fcr_fit(cfg, &cohort, &models, resid.as_ref())?;
            out.add("fcr_coefficients.csv", stage, |w| fit.write_csv(w))?;
            out.add_json("fcr.json", stage, &fit)
        }
        "residualize" => {
            let fit = residualize(cfg, &cohort)?;
            out.add_json("residualization.json", stage, &fit)?;
            let name = residual_name(cfg)?;
            out.add("residuals.csv", stage, |w| {
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record(["subject_id", name.as_str()])?;
                for (id, r) in &fit.residuals {
                    wtr.write_record([id.as_str(), &r.to_string()])?;
                }
                wtr.flush()?;
                Ok(())
            })
        }
        "score-lm" | "bootstrap" => {
            let models = fit_models(cfg, &cohort)?;
            let resid = residual_map(&residualize(cfg, &cohort)?);
            if command == "score-lm" || cfg.bootstrap == 0 {
                return write_coefficients(out, stage, &score_models(cfg, &models, &resid, None)?);
            }
            let spec = BootstrapSpec::new(cfg.bootstrap, cfg.require_seed()?);
            let fits = score_models(cfg, &models, &resid, Some(spec.clone()))?;
            write_coefficients(out, stage, &fits)?;
            write_kde(out, stage, &fits)?;
            let rows = correlation_table(cfg, &models, &resid, &spec)?;
            write_rows(out, "correlation_table.csv", stage, &rows)
        }
        other => Err(FdaError::Config(format!("unknown command `{other}`"))),
    }
}

/// Record the outcome of one pipeline stage; returns the value on success.
fn record<T>(out: &mut Outputs, name: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => {
            out.stage(name, Ok(()));
            Some(v)
        }
        Err(e) => {
            log::error!("stage {name} failed: {e}");
            out.stage(name, Err(&e));
            None
        }
    }
}

fn skip_all(out: &mut Outputs, names: &[&str], missing: &[(&str, bool)]) -> bool {
    let failed: Vec<&str> = missing.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        return false;
    }
    for n in names {
        out.skip(n, &format!("input stage failed: {}", failed.join(", ")), 3);
    }
    true
}

fn pipeline(cfg: &RunConfig, out: &mut Outputs) {
    let Some((cohort, report)) = record(out, "load", prepared_cohort(cfg)) else {
        let rest = ["residualization", "fpca", "score_models", "correlation_table", "correlation_trajectories", "correlation_surface", "fcr"];
        for n in rest {
            out.skip(n, "input stage failed: load", out.manifest.stages[0].exit_code.unwrap_or(3));
        }
        return;
    };
    out.manifest.qc_report = Some(report);

    let r = residualize(cfg, &cohort).and_then(|fit| {
        out.add_json("residualization.json", "residualization", &fit)?;
        Ok(residual_map(&fit))
    });
    let resid = record(out, "residualization", r);
    let r = fit_models(cfg, &cohort).and_then(|m| {
        models_json(out, "fpca", &m)?;
        Ok(m)
    });
    let models = record(out, "fpca", r);
    let has = [("residualization", resid.is_some()), ("fpca", models.is_some())];
    let seed = cfg.seed.unwrap_or(0);

    if !skip_all(out, &["score_models", "correlation_table", "correlation_trajectories"], &has) {
        let (resid, models) = (resid.as_ref().unwrap(), models.as_ref().unwrap());
        let boot = (cfg.bootstrap > 0).then(|| BootstrapSpec::new(cfg.bootstrap, seed));
        let r = score_models(cfg, models, resid, boot.clone()).and_then(|fits| {
            write_coefficients(out, "score_models", &fits)?;
            write_kde(out, "score_models", &fits)
        });
        record(out, "score_models", r);
        let r = correlation_table(cfg, models, resid, &boot.unwrap_or(BootstrapSpec::new(1, seed)))
            .and_then(|rows| write_rows(out, "correlation_table.csv", "correlation_table", &rows));
        record(out, "correlation_table", r);
        let r = trajectories(cfg, &cohort, models, resid)
            .and_then(|trs| write_trajectories(out, "correlation_trajectories", &trs));
        record(out, "correlation_trajectories", r);
    }
    if !skip_all(out, &["correlation_surface"], &has[1..]) {
        let r = surface_stage(cfg, &cohort, models.as_ref().unwrap(), out, "correlation_surface");
        record(out, "correlation_surface", r);
    }
    let fcr_inputs: &[(&str, bool)] = if cfg.fcr_response.is_some() { &has[1..] } else { &has };
    if !skip_all(out, &["fcr"], fcr_inputs) {
        let r = fcr_fit(cfg, &cohort, models.as_ref().unwrap(), resid.as_ref())
            .and_then(|fit| out.add("fcr_coefficients.csv", "fcr", |w| fit.write_csv(w)));
        record(out, "fcr", r);
    }
}
