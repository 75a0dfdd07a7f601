//! Quality-control exclusions.
//!
//! Rules are evaluated per subject and per variable; a subject failing any
//! rule for any variable is removed from every sample and from the scalar
//! table. Each excluded subject is counted once, under the first rule that
//! fired (rules are checked in the order listed in [`QcReport`]).

use super::{Cohort, Observation, RejectedRow, SubjectId};
use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const RULE_ORDERING: &str = "ordering";
pub const RULE_INCREMENT: &str = "increment";
pub const RULE_MONOTONICITY: &str = "monotonicity";
pub const RULE_MISSED_VISITS: &str = "missed_visits";
pub const RULE_MISSING_VARIABLE: &str = "missing_variable";
pub const RULE_INCOMPLETE_SCALARS: &str = "incomplete_scalars";

const RULES: [&str; 6] = [
    RULE_ORDERING,
    RULE_INCREMENT,
    RULE_MONOTONICITY,
    RULE_MISSED_VISITS,
    RULE_MISSING_VARIABLE,
    RULE_INCOMPLETE_SCALARS,
];

/// Number of subjects excluded per rule; serializes as `{rule: count}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QcReport {
    pub excluded: BTreeMap<String, usize>,
}

impl QcReport {
    pub fn total(&self) -> usize {
        self.excluded.values().sum()
    }

    fn merged(&self, other: &QcReport) -> QcReport {
        let mut excluded = self.excluded.clone();
        for (k, v) in &other.excluded {
            *excluded.entry(k.clone()).or_default() += v;
        }
        QcReport { excluded }
    }
}

/// Nominal visit months; a visit counts as attended when some observation
/// lies within `tolerance` months of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitSchedule {
    pub nominal: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcPolicy {
    #[serde(default)]
    pub schedule: Option<VisitSchedule>,
    /// Subjects missing this many visits or more (in any variable) are
    /// excluded.
    #[serde(default = "default_max_missed")]
    pub max_missed_visits: usize,
    /// Per-variable limit on `|Δvalue| / max(Δt, 1 month)` between
    /// consecutive observations; reaching the limit excludes the subject.
    #[serde(default)]
    pub max_increment_per_month: BTreeMap<String, f64>,
    #[serde(default)]
    pub enforce_monotonicity: bool,
}

fn default_max_missed() -> usize {
    2
}

impl Default for QcPolicy {
    fn default() -> Self {
        QcPolicy {
            schedule: None,
            max_missed_visits: default_max_missed(),
            max_increment_per_month: BTreeMap::new(),
            enforce_monotonicity: false,
        }
    }
}

impl QcPolicy {
    /// The first-year schedule (birth, 1, 2, 3, 6, 9, 12 months) with a head
    /// circumference increment limit of 8.5 cm per month.
    pub fn first_year(head_variable: &str) -> Self {
        let mut inc = BTreeMap::new();
        inc.insert(head_variable.to_string(), 8.5);
        QcPolicy {
            schedule: Some(VisitSchedule {
                nominal: vec![0.0, 1.0, 2.0, 3.0, 6.0, 9.0, 12.0],
                tolerance: 0.5,
            }),
            max_missed_visits: 2,
            max_increment_per_month: inc,
            enforce_monotonicity: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.schedule {
            if !(s.tolerance > 0.0) {
                return Err(FdaError::Config("visit tolerance must be positive".into()));
            }
            if s.nominal.iter().any(|v| !v.is_finite()) {
                return Err(FdaError::Config("visit schedule must be finite".into()));
            }
        }
        if self.max_missed_visits == 0 {
            return Err(FdaError::Config("max_missed_visits must be positive".into()));
        }
        for (k, v) in &self.max_increment_per_month {
            if !(*v > 0.0) {
                return Err(FdaError::Config(format!("increment limit for `{k}` must be positive")));
            }
        }
        Ok(())
    }
}

/// Drop exact time ties (keeping the first record) and return the reject
/// entries for the dropped ones.
fn drop_ties(variable: &str, id: &SubjectId, obs: &mut Vec<Observation>) -> Vec<RejectedRow> {
    let mut seen = BTreeSet::new();
    let mut rejects = Vec::new();
    obs.retain(|o| {
        if seen.insert(o.time.to_bits()) {
            true
        } else {
            rejects.push(RejectedRow {
                source: "qc".into(),
                line: 0,
                reason: format!("tied time {} for {id}/{variable}", o.time),
            });
            false
        }
    });
    rejects
}

fn first_violation(variable: &str, obs: &[Observation], policy: &QcPolicy) -> Option<&'static str> {
    if obs.windows(2).any(|w| w[1].time < w[0].time) {
        return Some(RULE_ORDERING);
    }
    if let Some(&limit) = policy.max_increment_per_month.get(variable) {
        let hit = obs.windows(2).any(|w| {
            let dt = (w[1].time - w[0].time).max(1.0);
            (w[1].value - w[0].value).abs() / dt >= limit
        });
        if hit {
            return Some(RULE_INCREMENT);
        }
    }
    if policy.enforce_monotonicity && obs.windows(2).any(|w| w[1].value < w[0].value) {
        return Some(RULE_MONOTONICITY);
    }
    if let Some(s) = &policy.schedule {
        let missed = s
            .nominal
            .iter()
            .filter(|&&v| !obs.iter().any(|o| (o.time - v).abs() <= s.tolerance))
            .count();
        if missed >= policy.max_missed_visits {
            return Some(RULE_MISSED_VISITS);
        }
    }
    None
}

/// Apply the policy jointly across variables. Returns the filtered cohort
/// (its `qc_report` accumulates this pass) and this pass's report.
pub fn qc_filter(cohort: &Cohort, policy: &QcPolicy) -> Result<(Cohort, QcReport)> {
    policy.validate()?;
    let mut out = cohort.clone();
    let mut report = QcReport {
        excluded: RULES.iter().map(|r| (r.to_string(), 0)).collect(),
    };

    for (name, sample) in out.samples.iter_mut() {
        for (id, obs) in sample.subjects.iter_mut() {
            let rejects = drop_ties(name, id, obs);
            out.rejects.extend(rejects);
        }
    }

    let all_ids: BTreeSet<SubjectId> = out
        .samples
        .values()
        .flat_map(|s| s.subjects.keys().cloned())
        .collect();
    let mut excluded: BTreeMap<SubjectId, &'static str> = BTreeMap::new();
    for id in &all_ids {
        let mut reason = None;
        for (name, sample) in &out.samples {
            if let Some(obs) = sample.subjects.get(id) {
                if let Some(r) = first_violation(name, obs, policy) {
                    let rank = |x: &str| RULES.iter().position(|q| *q == x).unwrap();
                    if reason.map_or(true, |cur: &str| rank(r) < rank(cur)) {
                        reason = Some(r);
                    }
                }
            }
        }
        if reason.is_none() && out.samples.values().any(|s| !s.subjects.contains_key(id)) {
            reason = Some(RULE_MISSING_VARIABLE);
        }
        if reason.is_none() {
            if let Some(sc) = &out.scalars {
                if !sc.is_complete(id) {
                    reason = Some(RULE_INCOMPLETE_SCALARS);
                }
            }
        }
        if let Some(r) = reason {
            excluded.insert(id.clone(), r);
            *report.excluded.get_mut(r).unwrap() += 1;
        }
    }

    let keep: BTreeSet<SubjectId> = all_ids
        .into_iter()
        .filter(|id| !excluded.contains_key(id))
        .collect();
    for sample in out.samples.values_mut() {
        sample.subjects.retain(|id, _| keep.contains(id));
    }
    if let Some(sc) = out.scalars.as_mut() {
        if !out.samples.is_empty() {
            sc.records.retain(|id, _| keep.contains(id));
        }
    }
    out.qc_report = cohort.qc_report.merged(&report);
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::SparseFunctionalSample;

    fn cohort_with(times: Vec<f64>, values: Vec<f64>) -> Cohort {
        let s = SparseFunctionalSample::from_lists("HC", (0.0, 12.0), vec![("a".into(), times, values)]).unwrap();
        let mut c = Cohort::default();
        c.samples.insert("HC".into(), s);
        c
    }

    #[test]
    fn one_missed_visit_is_retained() {
        let c = cohort_with(
            vec![0.0, 1.0, 2.0, 3.0, 6.0, 9.0],
            vec![35.0, 37.0, 39.0, 40.0, 43.0, 45.0],
        );
        let (out, rep) = qc_filter(&c, &QcPolicy::first_year("HC")).unwrap();
        assert_eq!(out.n_subjects(), 1);
        assert_eq!(rep.total(), 0);
    }

    #[test]
    fn two_missed_visits_excluded() {
        let c = cohort_with(vec![0.0, 1.0, 2.0, 3.0, 6.0], vec![35.0, 37.0, 39.0, 40.0, 43.0]);
        let (out, rep) = qc_filter(&c, &QcPolicy::first_year("HC")).unwrap();
        assert_eq!(out.n_subjects(), 0);
        assert_eq!(rep.excluded[RULE_MISSED_VISITS], 1);
    }

    #[test]
    fn large_head_increment_excluded() {
        let c = cohort_with(
            vec![0.0, 1.0, 2.0, 3.0, 6.0, 9.0, 12.0],
            vec![35.0, 43.5, 44.0, 44.5, 45.0, 46.0, 47.0],
        );
        let (out, rep) = qc_filter(&c, &QcPolicy::first_year("HC")).unwrap();
        assert_eq!(out.n_subjects(), 0);
        assert_eq!(rep.excluded[RULE_INCREMENT], 1);
    }

    #[test]
    fn out_of_order_visit_excluded() {
        // 3-month visit recorded before the 2-month one
        let c = cohort_with(
            vec![0.0, 1.0, 2.1, 1.9, 6.0, 9.0, 12.0],
            vec![35.0, 37.0, 39.0, 40.0, 43.0, 45.0, 46.0],
        );
        let (out, rep) = qc_filter(&c, &QcPolicy::first_year("HC")).unwrap();
        assert_eq!(out.n_subjects(), 0);
        assert_eq!(rep.excluded[RULE_ORDERING], 1);
    }

    #[test]
    fn ties_keep_first_and_log_reject() {
        let c = cohort_with(vec![1.0, 1.0, 2.0], vec![5.0, 6.0, 7.0]);
        let (out, _) = qc_filter(&c, &QcPolicy::default()).unwrap();
        let obs = &out.samples["HC"].subjects[&SubjectId::from("a")];
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].value, 5.0);
        assert_eq!(out.rejects.len(), 1);
    }

    #[test]
    fn monotonicity_not_enforced_by_default() {
        let c = cohort_with(vec![1.0, 2.0, 3.0], vec![5.0, 4.0, 7.0]);
        let (out, _) = qc_filter(&c, &QcPolicy::default()).unwrap();
        assert_eq!(out.n_subjects(), 1);
        let strict = QcPolicy {
            enforce_monotonicity: true,
            ..QcPolicy::default()
        };
        let (out, _) = qc_filter(&c, &strict).unwrap();
        assert_eq!(out.n_subjects(), 0);
    }

    #[test]
    fn invalid_policy_rejected() {
        let p = QcPolicy {
            schedule: Some(VisitSchedule {
                nominal: vec![0.0],
                tolerance: 0.0,
            }),
            ..QcPolicy::default()
        };
        assert!(p.validate().is_err());
    }
}
