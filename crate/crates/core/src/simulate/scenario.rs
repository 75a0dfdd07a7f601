use super::basis::Basis;
use crate::error::{FdaError, Result};
use crate::kernelsmooth::Curve;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFunction {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
    /// `birth + gain · (1 − exp(−t / scale))`
    Saturating { birth: f64, gain: f64, scale: f64 },
    Tabulated { curve: Curve },
}

impl MeanFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            MeanFunction::Constant { value } => *value,
            MeanFunction::Linear { intercept, slope } => intercept + slope * t,
            MeanFunction::Saturating { birth, gain, scale } => birth + gain * (1.0 - (-t / scale).exp()),
            MeanFunction::Tabulated { curve } => curve.eval(t),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDistribution {
    #[default]
    Gaussian,
    /// Uniform with the variance of the corresponding eigenvalue.
    Uniform,
}

/// A functional variable generated by a truncated Karhunen–Loève expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlVariable {
    pub name: String,
    pub mean: MeanFunction,
    pub basis: Basis,
    /// Which basis functions (0-based) carry the eigenvalues; defaults to
    /// `0, 1, …`.
    #[serde(default)]
    pub basis_indices: Option<Vec<usize>>,
    pub eigenvalues: Vec<f64>,
    pub noise_sd: f64,
}

impl KlVariable {
    pub fn index(&self, k: usize) -> usize {
        match &self.basis_indices {
            Some(ix) => ix[k],
            None => k,
        }
    }

    pub fn phi(&self, k: usize, t: f64, window: (f64, f64)) -> f64 {
        self.basis.eval(self.index(k), t, window)
    }

    pub fn covariance(&self, s: f64, t: f64, window: (f64, f64)) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| l * self.phi(k, s, window) * self.phi(k, t, window))
            .sum()
    }
}

/// `Y(t) = intercept + Σ c · X(t) + ε` built from latent KL trajectories and
/// observed at the same times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedVariable {
    pub name: String,
    #[serde(default)]
    pub intercept: f64,
    pub terms: Vec<(String, f64)>,
    pub noise_sd: f64,
}

/// Correlation between score `k_a` of variable `a` and score `k_b` of `b`
/// (0-based components).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCorrelation {
    pub a: (String, usize),
    pub b: (String, usize),
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VisitDesign {
    /// `N_i` uniform on `min..=max`, times uniform on the window.
    Uniform { min_count: usize, max_count: usize },
    /// Nominal visits with uniform jitter; each visit is independently
    /// missed with probability `miss_probability` (at least one is kept).
    Schedule { visits: Vec<f64>, jitter: f64, miss_probability: f64 },
    /// Every subject is observed at exactly these times.
    Fixed { times: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericCovariate {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalCovariate {
    pub name: String,
    pub levels: Vec<String>,
    pub baseline: String,
    pub probabilities: Vec<f64>,
}

/// Effect of a standardized score `ξ_k / √λ_k` (0-based `component`) or of
/// the product of two standardized scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEffect {
    pub terms: Vec<(String, usize)>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub name: String,
    pub intercept: f64,
    #[serde(default)]
    pub numeric_effects: BTreeMap<String, f64>,
    /// `field → level → effect` relative to the baseline.
    #[serde(default)]
    pub categorical_effects: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub score_effects: Vec<ScoreEffect>,
    pub noise_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarScenario {
    #[serde(default)]
    pub numeric: Vec<NumericCovariate>,
    #[serde(default)]
    pub categorical: Vec<CategoricalCovariate>,
    /// Number of clusters; `0` means no cluster column.
    #[serde(default)]
    pub n_clusters: usize,
    #[serde(default)]
    pub cluster_sd: f64,
    pub outcome: OutcomeModel,
}

/// Complete description of a synthetic cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub window: (f64, f64),
    pub n_subjects: usize,
    pub design: VisitDesign,
    #[serde(default)]
    pub score_distribution: ScoreDistribution,
    pub variables: Vec<KlVariable>,
    #[serde(default)]
    pub derived: Vec<DerivedVariable>,
    #[serde(default)]
    pub score_correlations: Vec<ScoreCorrelation>,
    #[serde(default)]
    pub scalars: Option<ScalarScenario>,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: Scenario = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| FdaError::Config(e.to_string()))?,
            _ => serde_json::from_str(&text).map_err(|e| FdaError::Config(e.to_string()))?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn variable(&self, name: &str) -> Result<&KlVariable> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| FdaError::Config(format!("scenario has no KL variable `{name}`")))
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.window;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(FdaError::Config("invalid window".into()));
        }
        if self.n_subjects == 0 {
            return Err(FdaError::Config("n_subjects must be positive".into()));
        }
        match &self.design {
            VisitDesign::Uniform { min_count, max_count } => {
                if *min_count == 0 || min_count > max_count {
                    return Err(FdaError::Config("need 1 <= min_count <= max_count".into()));
                }
            }
            VisitDesign::Schedule { visits, jitter, miss_probability } => {
                if visits.is_empty() || *jitter < 0.0 || !(0.0..1.0).contains(miss_probability) {
                    return Err(FdaError::Config("invalid visit schedule".into()));
                }
            }
            VisitDesign::Fixed { times } => {
                if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(FdaError::Config("fixed design times must be strictly increasing".into()));
                }
            }
        }
        let mut names: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        names.extend(self.derived.iter().map(|d| d.name.as_str()));
        let mut dedup = names.clone();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.len() != names.len() {
            return Err(FdaError::Config("variable names must be unique".into()));
        }
        for v in &self.variables {
            if v.eigenvalues.is_empty() || v.eigenvalues.iter().any(|l| !(*l > 0.0)) {
                return Err(FdaError::Config(format!("`{}`: eigenvalues must be positive", v.name)));
            }
            if v.eigenvalues.windows(2).any(|w| w[1] > w[0]) {
                return Err(FdaError::Config(format!("`{}`: eigenvalues must be descending", v.name)));
            }
            if v.noise_sd < 0.0 {
                return Err(FdaError::Config(format!("`{}`: noise_sd must be >= 0", v.name)));
            }
            let max_index = (0..v.eigenvalues.len()).map(|k| v.index(k)).max().unwrap_or(0);
            if let Some(ix) = &v.basis_indices {
                let mut s = ix.clone();
                s.sort_unstable();
                s.dedup();
                if ix.len() != v.eigenvalues.len() || s.len() != ix.len() {
                    return Err(FdaError::Config(format!(
                        "`{}`: basis_indices must be distinct, one per eigenvalue",
                        v.name
                    )));
                }
            }
            v.basis.check(max_index + 1, self.window)?;
        }
        for d in &self.derived {
            for (src, _) in &d.terms {
                self.variable(src)?;
            }
        }
        for c in &self.score_correlations {
            for (name, k) in [&c.a, &c.b] {
                if *k >= self.variable(name)?.eigenvalues.len() {
                    return Err(FdaError::Config(format!("`{name}` has no component {k}")));
                }
            }
            if !(c.rho.abs() <= 1.0) {
                return Err(FdaError::Config("score correlations must lie in [-1, 1]".into()));
            }
        }
        if let Some(sc) = &self.scalars {
            for c in &sc.categorical {
                let total: f64 = c.probabilities.iter().sum();
                if c.levels.len() != c.probabilities.len()
                    || (total - 1.0).abs() > 1e-9
                    || !c.levels.contains(&c.baseline)
                {
                    return Err(FdaError::Config(format!("categorical `{}` is inconsistent", c.name)));
                }
            }
            for e in &sc.outcome.score_effects {
                for (name, k) in &e.terms {
                    if *k >= self.variable(name)?.eigenvalues.len() {
                        return Err(FdaError::Config(format!("`{name}` has no component {k}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Two cosine components with eigenvalues 4 and 1 on `[0, 12]`, 5 to 8
    /// uniform visit times per subject and noise SD 0.5.
    pub fn two_component(n_subjects: usize) -> Self {
        Scenario {
            window: (0.0, 12.0),
            n_subjects,
            design: VisitDesign::Uniform {
                min_count: 5,
                max_count: 8,
            },
            score_distribution: ScoreDistribution::Gaussian,
            variables: vec![KlVariable {
                name: "X".into(),
                mean: MeanFunction::Linear {
                    intercept: 10.0,
                    slope: 0.5,
                },
                basis: Basis::Cosine,
                basis_indices: None,
                eigenvalues: vec![4.0, 1.0],
                noise_sd: 0.5,
            }],
            derived: vec![],
            score_correlations: vec![],
            scalars: None,
        }
    }

    /// Two independent processes `A`, `B` and a response
    /// `Y(t) = 2·A(t) − B(t) + ε` observed at the same visits.
    pub fn concurrent(n_subjects: usize) -> Self {
        let mut s = Scenario::two_component(n_subjects);
        s.variables = vec![
            KlVariable {
                name: "A".into(),
                mean: MeanFunction::Linear {
                    intercept: 10.0,
                    slope: 0.5,
                },
                basis: Basis::Cosine,
                basis_indices: None,
                eigenvalues: vec![4.0, 1.0],
                noise_sd: 0.5,
            },
            KlVariable {
                name: "B".into(),
                mean: MeanFunction::Constant { value: 5.0 },
                basis: Basis::Legendre,
                basis_indices: None,
                eigenvalues: vec![2.0, 0.5],
                noise_sd: 0.5,
            },
        ];
        s.derived = vec![DerivedVariable {
            name: "Y".into(),
            intercept: 1.0,
            terms: vec![("A".into(), 2.0), ("B".into(), -1.0)],
            noise_sd: 0.5,
        }];
        s
    }

    /// A first-year growth cohort: head circumference and length on the
    /// visit schedule birth, 1, 2, 3, 6, 9 and 12 months, baseline family
    /// covariates, hospital clusters and an outcome that loads on the
    /// growth scores.
    pub fn growth_cohort(n_subjects: usize) -> Self {
        let cat = |name: &str, levels: &[&str], probs: &[f64]| CategoricalCovariate {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
            baseline: levels[0].to_string(),
            probabilities: probs.to_vec(),
        };
        let edu = ["less_than_secondary", "secondary", "some_university", "university"];
        let mut categorical_effects = BTreeMap::new();
        categorical_effects.insert(
            "maternal_education".to_string(),
            BTreeMap::from([
                ("secondary".to_string(), 2.0),
                ("some_university".to_string(), 4.0),
                ("university".to_string(), 6.0),
            ]),
        );
        categorical_effects.insert(
            "paternal_education".to_string(),
            BTreeMap::from([
                ("secondary".to_string(), 1.0),
                ("some_university".to_string(), 2.5),
                ("university".to_string(), 3.5),
            ]),
        );
        categorical_effects.insert(
            "breastfeeding".to_string(),
            BTreeMap::from([("3_to_6_months".to_string(), 1.0), ("over_6_months".to_string(), 2.0)]),
        );
        categorical_effects.insert(
            "maternal_smoking".to_string(),
            BTreeMap::from([("yes".to_string(), -1.5)]),
        );
        categorical_effects.insert("sex".to_string(), BTreeMap::from([("male".to_string(), -1.0)]));
        Scenario {
            window: (0.0, 12.0),
            n_subjects,
            design: VisitDesign::Schedule {
                visits: vec![0.0, 1.0, 2.0, 3.0, 6.0, 9.0, 12.0],
                jitter: 0.2,
                miss_probability: 0.05,
            },
            score_distribution: ScoreDistribution::Gaussian,
            variables: vec![
                KlVariable {
                    name: "head".into(),
                    mean: MeanFunction::Saturating {
                        birth: 35.0,
                        gain: 12.5,
                        scale: 4.0,
                    },
                    basis: Basis::Cosine,
                    basis_indices: None,
                    eigenvalues: vec![1.5, 0.3],
                    noise_sd: 0.4,
                },
                KlVariable {
                    name: "length".into(),
                    mean: MeanFunction::Saturating {
                        birth: 51.0,
                        gain: 27.0,
                        scale: 5.0,
                    },
                    basis: Basis::Cosine,
                    basis_indices: None,
                    eigenvalues: vec![6.0, 1.2],
                    noise_sd: 0.8,
                },
            ],
            derived: vec![],
            score_correlations: vec![ScoreCorrelation {
                a: ("head".into(), 0),
                b: ("length".into(), 0),
                rho: 0.5,
            }],
            scalars: Some(ScalarScenario {
                numeric: vec![
                    NumericCovariate {
                        name: "birth_weight".into(),
                        mean: 3.4,
                        sd: 0.45,
                    },
                    NumericCovariate {
                        name: "maternal_age".into(),
                        mean: 25.0,
                        sd: 5.0,
                    },
                    NumericCovariate {
                        name: "paternal_age".into(),
                        mean: 28.0,
                        sd: 6.0,
                    },
                ],
                categorical: vec![
                    cat("maternal_education", &edu, &[0.2, 0.4, 0.25, 0.15]),
                    cat("paternal_education", &edu, &[0.25, 0.4, 0.2, 0.15]),
                    cat(
                        "breastfeeding",
                        &["up_to_3_months", "3_to_6_months", "over_6_months"],
                        &[0.5, 0.3, 0.2],
                    ),
                    cat("maternal_smoking", &["no", "yes"], &[0.8, 0.2]),
                    cat("sex", &["female", "male"], &[0.5, 0.5]),
                ],
                n_clusters: 30,
                cluster_sd: 5.0,
                outcome: OutcomeModel {
                    name: "iq".into(),
                    intercept: 90.0,
                    numeric_effects: BTreeMap::from([
                        ("birth_weight".to_string(), 1.5),
                        ("maternal_age".to_string(), 0.2),
                        ("paternal_age".to_string(), 0.05),
                    ]),
                    categorical_effects,
                    score_effects: vec![
                        ScoreEffect {
                            terms: vec![("head".into(), 0)],
                            coefficient: 3.0,
                        },
                        ScoreEffect {
                            terms: vec![("length".into(), 1)],
                            coefficient: 1.5,
                        },
                    ],
                    noise_sd: 12.0,
                },
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_validate() {
        Scenario::two_component(10).validate().unwrap();
        Scenario::growth_cohort(10).validate().unwrap();
    }

    #[test]
    fn json_and_toml_roundtrip() {
        let s = Scenario::growth_cohort(50);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Scenario>(&j).unwrap(), s);
        let t = toml::to_string(&Scenario::two_component(5)).unwrap();
        assert_eq!(toml::from_str::<Scenario>(&t).unwrap(), Scenario::two_component(5));
    }

    #[test]
    fn ascending_eigenvalues_rejected() {
        let mut s = Scenario::two_component(5);
        s.variables[0].eigenvalues = vec![1.0, 4.0];
        assert!(s.validate().is_err());
    }
}
