//! Per-issue checkers. Each turns a corpus into a raw score in `[0, 1]` plus
//! the utterances that contributed most to it.

pub mod abuse;
pub mod bias;
pub mod complexity;
pub mod leakage;
pub mod lexicon;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Locator, Role, Utterance};

pub use abuse::{aggregate_abuse, classify_utterance_abuse, AbuseCounts, AbuseLabel, AbuseWeights};
pub use bias::{aggregate_bias, check_bias_utterance};
pub use complexity::{complexity, utterance_complexity, ComplexityBreakdown, ComplexityConfig};
pub use leakage::{leakage_probe, map_epochs_to_score, Keypair, LeakageConfig, LeakageOutcome};
pub use lexicon::{AbuseLexicon, BiasLexicons, FrequencyTable, Lexicon, Resources};

#[derive(Debug, Error)]
pub enum CheckerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("score undefined: {0}")]
    UndefinedScore(String),
}

pub type Result<T, E = CheckerError> = std::result::Result<T, E>;

/// A rated trust issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueKind {
    B,
    AL,
    CC,
    IL,
}

impl IssueKind {
    pub const ALL: [IssueKind; 4] = [IssueKind::B, IssueKind::AL, IssueKind::CC, IssueKind::IL];

    pub fn code(self) -> &'static str {
        match self {
            IssueKind::B => "B",
            IssueKind::AL => "AL",
            IssueKind::CC => "CC",
            IssueKind::IL => "IL",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            IssueKind::B => "fairness and bias",
            IssueKind::AL => "hate and abusive language",
            IssueKind::CC => "conversation complexity",
            IssueKind::IL => "information leakage",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for IssueKind {
    type Err = CheckerError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B" => Ok(IssueKind::B),
            "AL" => Ok(IssueKind::AL),
            "CC" => Ok(IssueKind::CC),
            "IL" => Ok(IssueKind::IL),
            other => Err(CheckerError::Config(format!("unknown issue `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub locator: Locator,
    pub value: f64,
    pub label: String,
}

/// Checker-specific intermediate values carried into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IssueDetail {
    Abuse { counts: AbuseCounts },
    Bias { mean: f64, std_dev: f64 },
    Complexity(ComplexityBreakdown),
    Leakage { outcome: Option<LeakageOutcome> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueScore {
    pub issue: IssueKind,
    pub raw: f64,
    pub dispersion: Option<f64>,
    pub evidence: Vec<Evidence>,
    pub flags: Vec<String>,
    pub detail: IssueDetail,
}

/// Which utterances a checker looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    All,
    Role(Role),
}

impl Scope {
    pub fn admits(self, u: &Utterance) -> bool {
        match self {
            Scope::All => true,
            Scope::Role(r) => u.role == r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckerConfig {
    pub resources: Arc<Resources>,
    pub abuse_weights: AbuseWeights,
    pub complexity: ComplexityConfig,
    pub leakage: LeakageConfig,
    /// How many worst-offending utterances to keep as evidence.
    pub evidence_limit: usize,
    pub scope: Scope,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig {
            resources: Resources::builtin(),
            abuse_weights: AbuseWeights::default(),
            complexity: ComplexityConfig::default(),
            leakage: LeakageConfig::default(),
            evidence_limit: 5,
            scope: Scope::All,
        }
    }
}

/// Utterances admitted by `scope`, in document order.
pub(crate) fn scoped_utterances(corpus: &Corpus, scope: Scope) -> Vec<(Locator, &Utterance)> {
    corpus
        .utterances()
        .filter(|(_, u)| scope.admits(u))
        .collect()
}

/// Keep the `limit` highest positive values; ties keep document order.
pub(crate) fn top_evidence(mut items: Vec<Evidence>, limit: usize) -> Vec<Evidence> {
    items.retain(|e| e.value > 0.0);
    items.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.locator.cmp(&b.locator)));
    items.truncate(limit);
    items
}

pub(crate) fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run the checker for `issue` over `corpus`.
pub fn run_checker(
    issue: IssueKind,
    corpus: &Corpus,
    config: &CheckerConfig,
) -> Result<IssueScore> {
    if corpus.is_empty() {
        return Err(CheckerError::UndefinedScore("corpus has no dialogs".into()));
    }
    match issue {
        IssueKind::AL => abuse::score_corpus(corpus, config),
        IssueKind::B => aggregate_bias(corpus, config),
        IssueKind::CC => complexity::score_corpus(corpus, config),
        IssueKind::IL => leakage::score_corpus(corpus, &config.leakage),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::import_qa_pairs;

    #[test]
    fn issue_codes_round_trip() {
        for k in IssueKind::ALL {
            assert_eq!(k.code().parse::<IssueKind>().unwrap(), k);
        }
        assert!(matches!(
            "XX".parse::<IssueKind>(),
            Err(CheckerError::Config(_))
        ));
    }

    #[test]
    fn empty_corpus_is_undefined() {
        let c = import_qa_pairs("e", "".as_bytes()).unwrap();
        for k in IssueKind::ALL {
            assert!(matches!(
                run_checker(k, &c, &CheckerConfig::default()),
                Err(CheckerError::UndefinedScore(_))
            ));
        }
    }

    #[test]
    fn every_checker_stays_in_unit_interval_and_evidence_resolves() {
        let qa = "why is the sky blue?\tbecause of rayleigh scattering, obviously\n\
                  you are a moron\tshut up, this is fucking useless\n\
                  hi\thello there\n";
        let c = import_qa_pairs("t", qa.as_bytes()).unwrap();
        let cfg = CheckerConfig::default();
        for k in IssueKind::ALL {
            let s = run_checker(k, &c, &cfg).unwrap();
            assert!((0.0..=1.0).contains(&s.raw), "{k}: {}", s.raw);
            for e in &s.evidence {
                assert!(c.resolve(e.locator).is_some());
            }
        }
    }

    #[test]
    fn zero_feature_corpus_has_zero_bias() {
        let c = import_qa_pairs("t", "no i just configured it\tok then\n".as_bytes()).unwrap();
        let s = run_checker(IssueKind::B, &c, &CheckerConfig::default()).unwrap();
        assert_eq!(s.raw, 0.0);
        assert_eq!(s.dispersion, Some(0.0));
    }
}
