//! Re-rating across model, data and user variants and typing how sensitive
//! the aggregate rating is.
//!
//! An axis is *varying* when two runs that agree on every other axis differ
//! on that axis and receive different aggregate levels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rating::RatingReport;

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("invalid variants: {0}")]
    Validation(String),
}

pub type Result<T, E = SensitivityError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantAxis {
    Model,
    Data,
    User,
}

impl VariantAxis {
    pub const ALL: [VariantAxis; 3] = [VariantAxis::Model, VariantAxis::Data, VariantAxis::User];
}

pub type Assignment = BTreeMap<VariantAxis, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRun {
    pub assignment: Assignment,
    pub report: RatingReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityType {
    /// Rating unchanged across every variant.
    Type1,
    /// Model-sensitive.
    Type2,
    /// Data-sensitive.
    Type3,
    /// User-sensitive.
    Type4,
    /// Sensitive to a combination of factors.
    TypeN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub sensitivity_type: SensitivityType,
    pub varying_axes: BTreeSet<VariantAxis>,
    pub not_evaluated: BTreeSet<VariantAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub base: RatingReport,
    pub runs: Vec<VariantRun>,
    pub varying_axes: BTreeSet<VariantAxis>,
    pub sensitivity_type: SensitivityType,
    pub not_evaluated: BTreeSet<VariantAxis>,
}

impl SensitivityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        use std::fmt::Write as _;
        let mut md = String::new();
        let _ = writeln!(md, "# Sensitivity: {:?}\n", self.sensitivity_type);
        let _ = writeln!(md, "| Run | Model | Data | User | Aggregate |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for (i, run) in self.runs.iter().enumerate() {
            let get = |a| run.assignment.get(&a).map_or("-", String::as_str);
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} |",
                i + 1,
                get(VariantAxis::Model),
                get(VariantAxis::Data),
                get(VariantAxis::User),
                run.report.aggregate
            );
        }
        let axes = |s: &BTreeSet<VariantAxis>| {
            if s.is_empty() {
                "none".to_string()
            } else {
                s.iter()
                    .map(|a| format!("{a:?}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            }
        };
        let _ = writeln!(md, "\nVarying axes: {}", axes(&self.varying_axes));
        let _ = writeln!(md, "Axes not evaluated: {}", axes(&self.not_evaluated));
        md
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub assignments: Vec<Assignment>,
    pub not_evaluated: BTreeSet<VariantAxis>,
}

/// Cartesian product of the provided axes, in axis order then variant order.
pub fn enumerate_variants(axes: &BTreeMap<VariantAxis, Vec<String>>) -> Result<Enumeration> {
    let mut assignments = vec![Assignment::new()];
    for (&axis, variants) in axes {
        if variants.is_empty() {
            return Err(SensitivityError::Validation(format!(
                "axis {axis:?} has no variants"
            )));
        }
        assignments = assignments
            .into_iter()
            .flat_map(|a| {
                variants.iter().map(move |v| {
                    let mut next = a.clone();
                    next.insert(axis, v.clone());
                    next
                })
            })
            .collect();
    }
    let not_evaluated = VariantAxis::ALL
        .into_iter()
        .filter(|a| axes.get(a).is_none_or(|v| v.len() < 2))
        .collect();
    Ok(Enumeration {
        assignments,
        not_evaluated,
    })
}

fn differs_only_on(a: &Assignment, b: &Assignment, axis: VariantAxis) -> bool {
    a.get(&axis) != b.get(&axis)
        && VariantAxis::ALL
            .into_iter()
            .filter(|&x| x != axis)
            .all(|x| a.get(&x) == b.get(&x))
}

pub fn classify_sensitivity(runs: &[VariantRun]) -> Result<Classification> {
    let first = runs
        .first()
        .ok_or_else(|| SensitivityError::Validation("no runs to classify".into()))?;
    let issue_set = |r: &VariantRun| {
        r.report
            .issues
            .iter()
            .map(|i| i.issue)
            .collect::<BTreeSet<_>>()
    };
    let expected = issue_set(first);
    if let Some(bad) = runs.iter().find(|r| issue_set(r) != expected) {
        return Err(SensitivityError::Validation(format!(
            "run {:?} rates a different issue set",
            bad.assignment
        )));
    }

    let mut varying = BTreeSet::new();
    let mut not_evaluated = BTreeSet::new();
    for axis in VariantAxis::ALL {
        let distinct: BTreeSet<Option<&String>> =
            runs.iter().map(|r| r.assignment.get(&axis)).collect();
        if distinct.len() < 2 {
            not_evaluated.insert(axis);
            continue;
        }
        let varies = runs.iter().enumerate().any(|(i, a)| {
            runs[i + 1..].iter().any(|b| {
                differs_only_on(&a.assignment, &b.assignment, axis)
                    && a.report.aggregate != b.report.aggregate
            })
        });
        if varies {
            varying.insert(axis);
        }
    }

    let sensitivity_type = match varying.len() {
        0 => SensitivityType::Type1,
        1 => match varying.iter().next().unwrap() {
            VariantAxis::Model => SensitivityType::Type2,
            VariantAxis::Data => SensitivityType::Type3,
            VariantAxis::User => SensitivityType::Type4,
        },
        _ => SensitivityType::TypeN,
    };
    Ok(Classification {
        sensitivity_type,
        varying_axes: varying,
        not_evaluated,
    })
}

/// Classify `runs`; the first run is reported as the base rating.
pub fn analyze(runs: Vec<VariantRun>) -> Result<SensitivityReport> {
    let c = classify_sensitivity(&runs)?;
    Ok(SensitivityReport {
        base: runs[0].report.clone(),
        runs,
        varying_axes: c.varying_axes,
        sensitivity_type: c.sensitivity_type,
        not_evaluated: c.not_evaluated,
    })
}
