use crate::datamodel::{DuplicatePolicy, QcPolicy, VisitSchedule};
use crate::error::{FdaError, Result};
use crate::fpca::{BandwidthChoice, FpcaConfig, MomentsConfig};
use crate::kernelsmooth::KernelSpec;
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Settings shared by every subcommand. A config file (TOML or JSON) may
/// set any field; command-line flags override it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Long-format longitudinal CSV.
    pub input: Option<PathBuf>,
    /// Wide scalar covariate CSV.
    pub scalars: Option<PathBuf>,
    /// Cohort schema JSON (window, variables, scalar layout).
    pub schema: Option<PathBuf>,
    /// Built-in scenario name or path to a scenario file; used when no
    /// input is given.
    pub scenario: Option<String>,
    /// Cohort size for built-in scenarios.
    pub n_subjects: Option<usize>,
    /// Functional variables to analyse; empty means all.
    pub variables: Vec<String>,
    /// Scalar outcome field.
    pub outcome: Option<String>,
    pub grid_size: usize,
    pub bw_mean: BandwidthChoice,
    pub bw_cov: BandwidthChoice,
    pub cross_bandwidth: f64,
    pub fve_threshold: f64,
    pub max_k: usize,
    /// Leading scores entering the score regressions and correlation table.
    pub score_components: usize,
    /// Replicates for score regressions and the correlation table.
    pub bootstrap: usize,
    /// Replicates for correlation-trajectory and regression-coefficient
    /// bands.
    pub band_bootstrap: usize,
    /// Required for simulation and for any bootstrap.
    pub seed: Option<u64>,
    pub qc: QcPolicy,
    pub duplicates: DuplicatePolicy,
    /// Functional response for `fcr`; defaults to the residualized outcome.
    pub fcr_response: Option<String>,
    /// Bin width (months) of the aggregated design plot.
    pub design_bin: f64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            scalars: None,
            schema: None,
            scenario: None,
            n_subjects: None,
            variables: Vec::new(),
            outcome: None,
            grid_size: 51,
            bw_mean: BandwidthChoice::Cv,
            bw_cov: BandwidthChoice::Cv,
            cross_bandwidth: crate::crosscorr::DEFAULT_CROSS_BANDWIDTH,
            fve_threshold: 0.95,
            max_k: 8,
            score_components: 2,
            bootstrap: 1000,
            band_bootstrap: 200,
            seed: None,
            qc: QcPolicy::default(),
            duplicates: DuplicatePolicy::Error,
            fcr_response: None,
            design_bin: 0.5,
            output: PathBuf::from("out"),
        }
    }
}

fn parse_duplicates(s: &str) -> std::result::Result<DuplicatePolicy, String> {
    match s {
        "error" => Ok(DuplicatePolicy::Error),
        "keep-first" | "keep_first" => Ok(DuplicatePolicy::KeepFirst),
        _ => Err(format!("expected `error` or `keep-first`, got `{s}`")),
    }
}

fn parse_limit(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected VARIABLE=LIMIT, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.to_string(), v))
}

/// Flat command-line mirror of [`RunConfig`]; every flag is optional.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// TOML or JSON file supplying any of the settings below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Long-format measurements: subject_id,variable,time,value
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Scalar covariates, one row per subject
    #[arg(long)]
    pub scalars: Option<PathBuf>,
    /// JSON cohort schema
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// two_component, concurrent, growth_cohort or a scenario file
    #[arg(long)]
    pub scenario: Option<String>,
    /// Subjects to simulate
    #[arg(long)]
    pub n_subjects: Option<usize>,
    /// Functional variables to analyse, comma separated (default: all)
    #[arg(long, value_delimiter = ',')]
    pub variables: Option<Vec<String>>,
    /// Scalar outcome to residualize and model
    #[arg(long)]
    pub outcome: Option<String>,
    /// Points on the evaluation grid
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Mean bandwidth in months, or `cv`
    #[arg(long)]
    pub bw_mean: Option<BandwidthChoice>,
    /// Covariance bandwidth in months, or `cv`
    #[arg(long)]
    pub bw_cov: Option<BandwidthChoice>,
    /// Bandwidth for cross-covariances, in months
    #[arg(long)]
    pub cross_bandwidth: Option<f64>,
    /// Fraction of variance explained that selects K
    #[arg(long)]
    pub fve_threshold: Option<f64>,
    /// Upper limit on retained components
    #[arg(long)]
    pub max_k: Option<usize>,
    /// Scores per variable used in the score models
    #[arg(long)]
    pub score_components: Option<usize>,
    /// Replicates for coefficient intervals and correlations
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Replicates for functional bands (0 disables them)
    #[arg(long)]
    pub band_bootstrap: Option<usize>,
    /// Master seed for simulation and resampling
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nominal visit months, comma separated
    #[arg(long, value_delimiter = ',')]
    pub visit_schedule: Option<Vec<f64>>,
    /// Months within which an observation attends a nominal visit
    #[arg(long)]
    pub visit_tolerance: Option<f64>,
    /// Missed visits that exclude a subject
    #[arg(long)]
    pub max_missed_visits: Option<usize>,
    /// Per-month increment limit, VARIABLE=LIMIT (repeatable)
    #[arg(long, value_parser = parse_limit)]
    pub increment_limit: Vec<(String, f64)>,
    /// Exclude subjects whose measurements decrease
    #[arg(long)]
    pub enforce_monotonicity: bool,
    /// `error` or `keep-first`
    #[arg(long, value_parser = parse_duplicates)]
    pub duplicates: Option<DuplicatePolicy>,
    /// Response of the concurrent regression (default: residualized outcome)
    #[arg(long)]
    pub fcr_response: Option<String>,
    /// Bin width of the binned design counts, in months
    #[arg(long)]
    pub design_bin: Option<f64>,
    /// Output directory
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl ConfigArgs {
    /// File settings (if any) overridden by the flags that were given.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f { c.$f = v.clone().into(); }
            )*};
        }
        set!(grid_size, bw_mean, bw_cov, cross_bandwidth, fve_threshold, max_k, score_components);
        set!(bootstrap, band_bootstrap, duplicates, design_bin, output);
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() { c.$f = self.$f.clone(); }
            )*};
        }
        set_opt!(input, scalars, schema, scenario, n_subjects, outcome, seed, fcr_response);
        if let Some(v) = &self.variables {
            c.variables = v.clone();
        }
        if let Some(nominal) = &self.visit_schedule {
            let tolerance = c.qc.schedule.as_ref().map_or(0.5, |s| s.tolerance);
            c.qc.schedule = Some(VisitSchedule {
                nominal: nominal.clone(),
                tolerance,
            });
        }
        if let Some(t) = self.visit_tolerance {
            match c.qc.schedule.as_mut() {
                Some(s) => s.tolerance = t,
                None => return Err(FdaError::Config("--visit-tolerance needs a visit schedule".into())),
            }
        }
        if let Some(m) = self.max_missed_visits {
            c.qc.max_missed_visits = m;
        }
        for (k, v) in &self.increment_limit {
            c.qc.max_increment_per_month.insert(k.clone(), *v);
        }
        if self.enforce_monotonicity {
            c.qc.enforce_monotonicity = true;
        }
        Ok(c)
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FdaError::Config(format!("cannot read config {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| FdaError::Config(e.to_string())),
            _ => toml::from_str(&text).map_err(|e| FdaError::Config(e.to_string())),
        }
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.input, &self.scalars, &self.schema].into_iter().flatten() {
            if !p.is_file() {
                return Err(FdaError::Config(format!("file not found: {}", p.display())));
            }
        }
        if self.input.is_some() && self.schema.is_none() {
            return Err(FdaError::Config("--input needs --schema".into()));
        }
        if self.scalars.is_some() && self.input.is_none() {
            return Err(FdaError::Config("--scalars needs --input".into()));
        }
        if !(self.fve_threshold > 0.0 && self.fve_threshold <= 1.0) {
            return Err(FdaError::Config("fve_threshold must lie in (0, 1]".into()));
        }
        if self.max_k == 0 || self.score_components == 0 {
            return Err(FdaError::Config("max_k and score_components must be positive".into()));
        }
        if self.grid_size < 3 {
            return Err(FdaError::Config("grid_size must be at least 3".into()));
        }
        if !(self.cross_bandwidth > 0.0) || !(self.design_bin > 0.0) {
            return Err(FdaError::Config("bandwidths and bin widths must be positive".into()));
        }
        self.qc.validate()
    }

    /// Seed, required whenever resampling or simulation is requested.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| FdaError::Config("a seed is required for simulation and bootstrap".into()))
    }

    pub fn fpca_config(&self) -> FpcaConfig {
        FpcaConfig {
            moments: MomentsConfig {
                grid_size: self.grid_size,
                bw_mean: self.bw_mean,
                bw_cov: self.bw_cov,
                kernel: KernelSpec::default(),
                ..MomentsConfig::default()
            },
            fve_threshold: self.fve_threshold,
            max_k: self.max_k,
            ..FpcaConfig::default()
        }
    }

    /// SHA-256 of the canonical JSON form, with the output directory left
    /// out so that runs differing only in where they write hash equally.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let value = serde_json::to_value(&c).expect("config serializes");
        // serde_json maps are sorted, so this is canonical
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

/// `(mean, covariance)` bandwidths keyed by variable.
pub type BandwidthTable = BTreeMap<String, (f64, f64)>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "grid_size = 31\nseed = 5\nbw_cov = 2.0\n[qc]\nmax_missed_visits = 3\n").unwrap();
        let args = ConfigArgs {
            config: Some(p),
            seed: Some(9),
            ..ConfigArgs::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!(c.grid_size, 31);
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.bw_cov, BandwidthChoice::Fixed(2.0));
        assert_eq!(c.qc.max_missed_visits, 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "gridsize = 31\n").unwrap();
        assert!(matches!(RunConfig::from_path(&p), Err(FdaError::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let b = RunConfig {
            output: "elsewhere".into(),
            ..RunConfig::default()
        };
        assert_eq!(a.sha256(), b.sha256());
        let c = RunConfig {
            seed: Some(1),
            ..RunConfig::default()
        };
        assert_ne!(a.sha256(), c.sha256());
    }
}
