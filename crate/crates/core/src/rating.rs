//! Trust levels, user profiles and personalized aggregation.
//!
//! Each issue's level is counted `k - Imp(issue)` times, where `Imp` is the
//! issue's 1-based position in the profile ranking. The level with the largest
//! tally wins; ties go to the lowest-risk level (optimistic) or the
//! highest-risk one (pessimistic).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkers::{
    run_checker, CheckerConfig, CheckerError, Evidence, IssueDetail, IssueKind, IssueScore,
};
use crate::corpus::Corpus;

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("raw score {0} outside [0, 1]")]
    Domain(f64),
    #[error("invalid rating input: {0}")]
    Validation(String),
    #[error(transparent)]
    Checker(#[from] CheckerError),
}

pub type Result<T, E = RatingError> = std::result::Result<T, E>;

/// Risk scale, ordered `L < M < H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrustLevel {
    L,
    M,
    H,
}

impl TrustLevel {
    pub const ALL: [TrustLevel; 3] = [TrustLevel::L, TrustLevel::M, TrustLevel::H];
}

impl fmt::Display for TrustLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrustLevel::L => "L",
            TrustLevel::M => "M",
            TrustLevel::H => "H",
        })
    }
}

/// `L: [0, low_upper)`, `M: [low_upper, mid_upper]`, `H: (mid_upper, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub low_upper: f64,
    pub mid_upper: f64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig {
            low_upper: 0.33,
            mid_upper: 0.67,
        }
    }
}

impl BinningConfig {
    pub fn new(low_upper: f64, mid_upper: f64) -> Result<Self> {
        let cfg = BinningConfig {
            low_upper,
            mid_upper,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.low_upper && self.low_upper < self.mid_upper && self.mid_upper < 1.0 {
            Ok(())
        } else {
            Err(RatingError::Validation(format!(
                "bin boundaries must satisfy 0 < low < mid < 1, got {} and {}",
                self.low_upper, self.mid_upper
            )))
        }
    }
}

pub fn bin(raw: f64, config: &BinningConfig) -> Result<TrustLevel> {
    if !(0.0..=1.0).contains(&raw) {
        return Err(RatingError::Domain(raw));
    }
    Ok(if raw < config.low_upper {
        TrustLevel::L
    } else if raw <= config.mid_upper {
        TrustLevel::M
    } else {
        TrustLevel::H
    })
}

/// A named strict ranking of issues, most important first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub name: String,
    pub order: Vec<IssueKind>,
}

impl UserProfile {
    pub fn new(name: impl Into<String>, order: Vec<IssueKind>) -> Result<Self> {
        let name = name.into();
        if order.is_empty() {
            return Err(RatingError::Validation(format!(
                "profile `{name}` ranks no issues"
            )));
        }
        let distinct: BTreeSet<_> = order.iter().collect();
        if distinct.len() != order.len() {
            return Err(RatingError::Validation(format!(
                "profile `{name}` repeats an issue"
            )));
        }
        Ok(UserProfile { name, order })
    }

    /// Parse `{"name": ..., "order": ["CC", "AL", ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            name: String,
            order: Vec<String>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| RatingError::Validation(format!("profile: {e}")))?;
        let order = raw
            .order
            .iter()
            .map(|c| c.parse::<IssueKind>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        UserProfile::new(raw.name, order)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn k(&self) -> usize {
        self.order.len()
    }

    /// 1-based importance, 1 = most important.
    pub fn importance(&self, issue: IssueKind) -> Option<usize> {
        self.order.iter().position(|&i| i == issue).map(|p| p + 1)
    }

    pub fn weight(&self, issue: IssueKind) -> Option<u32> {
        self.importance(issue).map(|imp| (self.k() - imp) as u32)
    }
}

/// The four validated profiles: conversation-style, fairness, privacy and
/// abusive-language oriented users.
pub fn builtin_profiles() -> Vec<UserProfile> {
    use IssueKind::*;
    [
        ("P_CU", [CC, AL, B, IL]),
        ("P_FU", [B, CC, AL, IL]),
        ("P_PU", [IL, AL, B, CC]),
        ("P_AU", [AL, CC, B, IL]),
    ]
    .into_iter()
    .map(|(name, order)| UserProfile {
        name: name.to_string(),
        order: order.to_vec(),
    })
    .collect()
}

pub fn builtin_profile(name: &str) -> Option<UserProfile> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    Optimistic,
    #[default]
    Pessimistic,
}

impl FromStr for TiePolicy {
    type Err = RatingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "optimistic" => Ok(TiePolicy::Optimistic),
            "pessimistic" => Ok(TiePolicy::Pessimistic),
            other => Err(RatingError::Validation(format!(
                "unknown tie policy `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueRating {
    pub issue: IssueKind,
    pub raw: Option<f64>,
    pub dispersion: Option<f64>,
    pub level: TrustLevel,
    pub importance: usize,
    pub weight: u32,
    pub evidence: Vec<Evidence>,
    pub detail: Option<IssueDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub profile: String,
    pub tie_policy: TiePolicy,
    pub issues: Vec<IssueRating>,
    pub tallies: BTreeMap<TrustLevel, u32>,
    pub aggregate: TrustLevel,
    pub tie: bool,
    pub tied_levels: Vec<TrustLevel>,
    pub flags: Vec<String>,
    pub explanation: String,
}

impl RatingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn level_of(&self, issue: IssueKind) -> Option<TrustLevel> {
        self.issues
            .iter()
            .find(|r| r.issue == issue)
            .map(|r| r.level)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Trust rating for profile {}\n", self.profile);
        let _ = writeln!(
            md,
            "**Aggregate level: {}**{}\n",
            self.aggregate,
            if self.tie { " (tie broken)" } else { "" }
        );
        let _ = writeln!(
            md,
            "| Issue | Raw | Dispersion | Level | Importance | Weight |"
        );
        let _ = writeln!(md, "|---|---|---|---|---|---|");
        for r in &self.issues {
            let raw = r.raw.map_or("-".to_string(), |v| format!("{v:.4}"));
            let disp = r.dispersion.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                md,
                "| {} | {raw} | {disp} | {} | {} | {} |",
                r.issue, r.level, r.importance, r.weight
            );
        }
        let _ = writeln!(
            md,
            "\n## Explanation\n\n```\n{}\n```",
            self.explanation.trim_end()
        );
        if !self.flags.is_empty() {
            let _ = writeln!(md, "\n## Flags\n");
            for f in &self.flags {
                let _ = writeln!(md, "- {f}");
            }
        }
        md
    }
}

struct Tally {
    tallies: BTreeMap<TrustLevel, u32>,
    aggregate: TrustLevel,
    tied: Vec<TrustLevel>,
}

/// Only levels that some issue actually received compete for the aggregate.
fn tally(levels: &[(TrustLevel, u32)], policy: TiePolicy) -> Tally {
    let mut tallies: BTreeMap<TrustLevel, u32> = TrustLevel::ALL.iter().map(|&l| (l, 0)).collect();
    for &(level, weight) in levels {
        *tallies.get_mut(&level).expect("all levels present") += weight;
    }
    let present: BTreeSet<TrustLevel> = levels.iter().map(|(l, _)| *l).collect();
    let best = present.iter().map(|l| tallies[l]).max().unwrap_or(0);
    let tied: Vec<TrustLevel> = present
        .iter()
        .copied()
        .filter(|l| tallies[l] == best)
        .collect();
    let aggregate = match policy {
        TiePolicy::Optimistic => tied[0],
        TiePolicy::Pessimistic => tied[tied.len() - 1],
    };
    Tally {
        tallies,
        aggregate,
        tied,
    }
}

fn explain(issues: &[IssueRating], t: &Tally, policy: TiePolicy) -> String {
    let mut text = String::new();
    for r in issues {
        let raw = r.raw.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(text, "{} {raw}→{} ×{}", r.issue, r.level, r.weight);
    }
    let _ = writeln!(
        text,
        "tally L={} M={} H={}",
        t.tallies[&TrustLevel::L],
        t.tallies[&TrustLevel::M],
        t.tallies[&TrustLevel::H]
    );
    if t.tied.len() > 1 {
        let names: Vec<String> = t.tied.iter().map(ToString::to_string).collect();
        let how = match policy {
            TiePolicy::Optimistic => "optimistically",
            TiePolicy::Pessimistic => "pessimistically",
        };
        let _ = writeln!(
            text,
            "tie between {} broken {how} → {}",
            names.join(" and "),
            t.aggregate
        );
    } else {
        let _ = writeln!(text, "aggregate → {}", t.aggregate);
    }
    text
}

fn assemble(
    mut issues: Vec<IssueRating>,
    profile: &UserProfile,
    policy: TiePolicy,
    flags: Vec<String>,
) -> RatingReport {
    issues.sort_by_key(|r| r.importance);
    let pairs: Vec<(TrustLevel, u32)> = issues.iter().map(|r| (r.level, r.weight)).collect();
    let t = tally(&pairs, policy);
    let explanation = explain(&issues, &t, policy);
    RatingReport {
        profile: profile.name.clone(),
        tie_policy: policy,
        issues,
        tie: t.tied.len() > 1,
        tied_levels: t.tied.clone(),
        tallies: t.tallies,
        aggregate: t.aggregate,
        flags,
        explanation,
    }
}

fn check_issue_set<'a>(
    profile: &UserProfile,
    given: impl Iterator<Item = &'a IssueKind>,
) -> Result<()> {
    let expected: BTreeSet<IssueKind> = profile.order.iter().copied().collect();
    let given: BTreeSet<IssueKind> = given.copied().collect();
    if let Some(missing) = expected.difference(&given).next() {
        return Err(RatingError::Validation(format!(
            "no level for issue {missing}"
        )));
    }
    if let Some(extra) = given.difference(&expected).next() {
        return Err(RatingError::Validation(format!(
            "issue {extra} is not ranked by profile `{}`",
            profile.name
        )));
    }
    Ok(())
}

/// Combine per-issue levels under `profile`.
pub fn aggregate_rating(
    levels: &BTreeMap<IssueKind, TrustLevel>,
    profile: &UserProfile,
    policy: TiePolicy,
) -> Result<RatingReport> {
    check_issue_set(profile, levels.keys())?;
    let issues = profile
        .order
        .iter()
        .enumerate()
        .map(|(pos, &issue)| IssueRating {
            issue,
            raw: None,
            dispersion: None,
            level: levels[&issue],
            importance: pos + 1,
            weight: (profile.k() - pos - 1) as u32,
            evidence: Vec::new(),
            detail: None,
        })
        .collect();
    Ok(assemble(issues, profile, policy, Vec::new()))
}

/// Bin checker outputs and aggregate them.
pub fn rate_scores(
    scores: &[IssueScore],
    profile: &UserProfile,
    binning: &BinningConfig,
    policy: TiePolicy,
) -> Result<RatingReport> {
    binning.validate()?;
    check_issue_set(profile, scores.iter().map(|s| &s.issue))?;
    let mut flags = Vec::new();
    let mut issues = Vec::with_capacity(scores.len());
    for s in scores {
        let importance = profile.importance(s.issue).expect("issue set checked");
        issues.push(IssueRating {
            issue: s.issue,
            raw: Some(s.raw),
            dispersion: s.dispersion,
            level: bin(s.raw, binning)?,
            importance,
            weight: (profile.k() - importance) as u32,
            evidence: s.evidence.clone(),
            detail: Some(s.detail.clone()),
        });
        flags.extend(s.flags.iter().map(|f| format!("{}: {f}", s.issue)));
    }
    Ok(assemble(issues, profile, policy, flags))
}

#[derive(Debug, Clone, Default)]
pub struct RatingConfig {
    pub checkers: CheckerConfig,
    pub binning: BinningConfig,
    pub tie_policy: TiePolicy,
}

/// Run every checker the profile ranks, then bin and aggregate.
pub fn rate_corpus(
    corpus: &Corpus,
    profile: &UserProfile,
    config: &RatingConfig,
) -> Result<RatingReport> {
    if corpus.is_empty() {
        return Err(RatingError::Validation("corpus has no dialogs".into()));
    }
    let scores = score_issues(corpus, &profile.order, &config.checkers)?;
    rate_scores(&scores, profile, &config.binning, config.tie_policy)
}

/// Checker outputs for `issues`, in the given order. Checkers run in parallel.
pub fn score_issues(
    corpus: &Corpus,
    issues: &[IssueKind],
    config: &CheckerConfig,
) -> Result<Vec<IssueScore>> {
    use rayon::prelude::*;
    issues
        .par_iter()
        .map(|&k| run_checker(k, corpus, config).map_err(RatingError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use IssueKind::*;
    use TrustLevel::*;

    fn levels(pairs: &[(IssueKind, TrustLevel)]) -> BTreeMap<IssueKind, TrustLevel> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn binning_examples() {
        let b = BinningConfig::default();
        assert_eq!(bin(0.407, &b).unwrap(), M);
        assert_eq!(bin(0.894, &b).unwrap(), H);
        assert_eq!(bin(0.0, &b).unwrap(), L);
        assert_eq!(bin(0.33, &b).unwrap(), M);
        assert_eq!(bin(0.67, &b).unwrap(), M);
        assert_eq!(bin(1.0, &b).unwrap(), H);
        assert!(matches!(bin(1.01, &b), Err(RatingError::Domain(_))));
        assert!(matches!(bin(-0.1, &b), Err(RatingError::Domain(_))));
        assert!(bin(f64::NAN, &b).is_err());
        assert!(BinningConfig::new(0.7, 0.3).is_err());
    }

    #[test]
    fn builtin_profile_orders() {
        let p = builtin_profile("P_FU").unwrap();
        assert_eq!(p.order, vec![B, CC, AL, IL]);
        assert_eq!(builtin_profile("P_PU").unwrap().order[0], IL);
        assert_eq!(builtin_profile("P_CU").unwrap().order, vec![CC, AL, B, IL]);
        assert_eq!(builtin_profile("P_AU").unwrap().order, vec![AL, CC, B, IL]);
        for p in builtin_profiles() {
            let mut imps: Vec<usize> = IssueKind::ALL
                .iter()
                .map(|&i| p.importance(i).unwrap())
                .collect();
            imps.sort();
            assert_eq!(imps, vec![1, 2, 3, 4]);
        }
    }

    #[test]
    fn profile_json() {
        let p = UserProfile::from_json(r#"{"name":"mine","order":["IL","B"]}"#).unwrap();
        assert_eq!(p.order, vec![IL, B]);
        assert_eq!(UserProfile::from_json(&p.to_json()).unwrap(), p);
        assert!(UserProfile::from_json(r#"{"name":"x","order":["IL","IL"]}"#).is_err());
        assert!(UserProfile::from_json(r#"{"name":"x","order":["ZZ"]}"#).is_err());
    }

    #[test]
    fn worked_example_pessimistic() {
        let p = UserProfile::new("ex", vec![B, AL, CC, IL]).unwrap();
        let r = aggregate_rating(
            &levels(&[(B, L), (AL, M), (CC, M), (IL, H)]),
            &p,
            TiePolicy::Pessimistic,
        )
        .unwrap();
        assert_eq!(r.tallies[&L], 3);
        assert_eq!(r.tallies[&M], 3);
        assert_eq!(r.tallies[&H], 0);
        assert_eq!(r.aggregate, M);
        assert!(r.tie);
        assert!(r.explanation.contains("tally L=3 M=3 H=0"));
    }

    #[test]
    fn fairness_profile_tie() {
        let p = builtin_profile("P_FU").unwrap();
        let lv = levels(&[(B, H), (AL, L), (CC, L), (IL, L)]);
        let pes = aggregate_rating(&lv, &p, TiePolicy::Pessimistic).unwrap();
        assert_eq!((pes.tallies[&H], pes.tallies[&L]), (3, 3));
        assert_eq!(pes.aggregate, H);
        assert_eq!(
            aggregate_rating(&lv, &p, TiePolicy::Optimistic)
                .unwrap()
                .aggregate,
            L
        );
    }

    #[test]
    fn privacy_profile_on_ubuntu_levels() {
        let p = builtin_profile("P_PU").unwrap();
        let lv = levels(&[(B, L), (AL, L), (CC, M), (IL, M)]);
        let r = aggregate_rating(&lv, &p, TiePolicy::Pessimistic).unwrap();
        assert_eq!((r.tallies[&L], r.tallies[&M]), (3, 3));
        assert_eq!(r.aggregate, M);
    }

    #[test]
    fn uniform_levels_and_missing_issues() {
        for p in builtin_profiles() {
            let lv = levels(&[(B, L), (AL, L), (CC, L), (IL, L)]);
            for pol in [TiePolicy::Optimistic, TiePolicy::Pessimistic] {
                assert_eq!(aggregate_rating(&lv, &p, pol).unwrap().aggregate, L);
            }
        }
        let p = builtin_profile("P_CU").unwrap();
        assert!(matches!(
            aggregate_rating(&levels(&[(B, L)]), &p, TiePolicy::Pessimistic),
            Err(RatingError::Validation(_))
        ));
        let single = UserProfile::new("one", vec![CC]).unwrap();
        assert_eq!(
            aggregate_rating(&levels(&[(CC, H)]), &single, TiePolicy::Optimistic)
                .unwrap()
                .aggregate,
            H
        );
    }

    #[test]
    fn json_and_markdown() {
        let p = builtin_profile("P_AU").unwrap();
        let r = aggregate_rating(
            &levels(&[(B, L), (AL, M), (CC, H), (IL, L)]),
            &p,
            TiePolicy::Pessimistic,
        )
        .unwrap();
        assert_eq!(RatingReport::from_json(&r.to_json()).unwrap(), r);
        let md = r.to_markdown();
        assert!(md.contains("| AL |"));
        assert!(md.contains("Aggregate level"));
    }
}
