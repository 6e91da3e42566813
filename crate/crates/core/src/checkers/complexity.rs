//! Conversation complexity at utterance, turn and dialog granularity.
//!
//! Utterance complexity is the fraction of tokens that are rare against a
//! background frequency table (rank above `rarity_rank`, or unranked), damped
//! for short utterances by `1 - 1/(1 + tokens/length_scale)`. A turn takes the
//! maximum of its utterances. A dialog blends its mean turn complexity with a
//! structure factor `1 - 1/(1 + turns/structure_scale)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lexicon::{tokenize, FrequencyTable};
use super::{
    mean_and_std, top_evidence, CheckerConfig, CheckerError, Evidence, IssueDetail, IssueKind,
    IssueScore, Result,
};
use crate::corpus::{Corpus, Locator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConfig {
    pub rarity_rank: u32,
    pub length_scale: f64,
    pub structure_scale: f64,
    /// Share of the dialog score taken by the structure factor.
    pub structure_weight: f64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            rarity_rank: 2000,
            length_scale: 10.0,
            structure_scale: 10.0,
            structure_weight: 0.5,
        }
    }
}

impl ComplexityConfig {
    fn validate(&self) -> Result<()> {
        if self.length_scale > 0.0
            && self.structure_scale > 0.0
            && (0.0..=1.0).contains(&self.structure_weight)
        {
            Ok(())
        } else {
            Err(CheckerError::Config(format!(
                "invalid complexity config {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityBreakdown {
    pub utterance_level: f64,
    pub turn_level: f64,
    pub dialog_level: f64,
}

pub fn utterance_complexity(text: &str, table: &FrequencyTable, config: &ComplexityConfig) -> f64 {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let n = tokens.len() as f64;
    let rare = tokens
        .iter()
        .filter(|t| table.rank(t).is_none_or(|r| r > config.rarity_rank))
        .count() as f64;
    let damping = 1.0 - 1.0 / (1.0 + n / config.length_scale);
    (rare / n * damping).clamp(0.0, 1.0)
}

struct Scored {
    breakdown: ComplexityBreakdown,
    per_utterance: Vec<(Locator, f64)>,
    per_dialog: Vec<f64>,
}

fn score(corpus: &Corpus, config: &CheckerConfig) -> Result<Scored> {
    let cc = &config.complexity;
    cc.validate()?;
    let table = &config.resources.frequency;
    let mut utterance_values = Vec::new();
    let mut turn_values = Vec::new();
    let mut dialog_values = Vec::new();
    let mut per_utterance = Vec::new();

    for (di, dialog) in corpus.dialogs.iter().enumerate() {
        let mut dialog_turns = Vec::new();
        for (ti, turn) in dialog.turns.iter().enumerate() {
            let scored: Vec<(Locator, f64)> = turn
                .utterances
                .par_iter()
                .enumerate()
                .filter(|(_, u)| config.scope.admits(u))
                .map(|(ui, u)| {
                    let loc = Locator {
                        dialog: di,
                        turn: ti,
                        utterance: ui,
                    };
                    (loc, utterance_complexity(&u.text, table, cc))
                })
                .collect();
            if scored.is_empty() {
                continue;
            }
            let turn_max = scored.iter().map(|(_, v)| *v).fold(0.0, f64::max);
            dialog_turns.push(turn_max);
            turn_values.push(turn_max);
            utterance_values.extend(scored.iter().map(|(_, v)| *v));
            per_utterance.extend(scored);
        }
        if dialog_turns.is_empty() {
            continue;
        }
        let turn_mean = dialog_turns.iter().sum::<f64>() / dialog_turns.len() as f64;
        let structure = 1.0 - 1.0 / (1.0 + dialog.turns.len() as f64 / cc.structure_scale);
        let value = (1.0 - cc.structure_weight) * turn_mean + cc.structure_weight * structure;
        dialog_values.push(value.clamp(0.0, 1.0));
    }

    if utterance_values.is_empty() {
        return Err(CheckerError::UndefinedScore(
            "no utterances to score for complexity".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Scored {
        breakdown: ComplexityBreakdown {
            utterance_level: mean(&utterance_values),
            turn_level: mean(&turn_values),
            dialog_level: mean(&dialog_values),
        },
        per_utterance,
        per_dialog: dialog_values,
    })
}

pub fn complexity(corpus: &Corpus, config: &CheckerConfig) -> Result<ComplexityBreakdown> {
    score(corpus, config).map(|s| s.breakdown)
}

pub(crate) fn score_corpus(corpus: &Corpus, config: &CheckerConfig) -> Result<IssueScore> {
    let scored = score(corpus, config)?;
    let (_, dialog_std) = mean_and_std(&scored.per_dialog);
    let evidence = scored
        .per_utterance
        .into_iter()
        .map(|(locator, value)| Evidence {
            locator,
            value,
            label: "rare-terms".to_string(),
        })
        .collect();
    Ok(IssueScore {
        issue: IssueKind::CC,
        raw: scored.breakdown.dialog_level,
        dispersion: Some(dialog_std),
        evidence: top_evidence(evidence, config.evidence_limit),
        flags: Vec::new(),
        detail: IssueDetail::Complexity(scored.breakdown),
    })
}
