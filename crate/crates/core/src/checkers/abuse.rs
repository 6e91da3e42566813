//! Hate / offensive language checker.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lexicon::{tokenize, AbuseLexicon};
use super::{
    scoped_utterances, top_evidence, CheckerConfig, CheckerError, Evidence, IssueDetail, IssueKind,
    IssueScore, Result,
};
use crate::corpus::{Corpus, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbuseLabel {
    Hate,
    Offensive,
    Neither,
}

impl AbuseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AbuseLabel::Hate => "hate",
            AbuseLabel::Offensive => "offensive",
            AbuseLabel::Neither => "neither",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hate" => Some(AbuseLabel::Hate),
            "offensive" => Some(AbuseLabel::Offensive),
            "neither" => Some(AbuseLabel::Neither),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbuseWeights {
    pub hate: f64,
    pub offensive: f64,
    pub neither: f64,
}

impl Default for AbuseWeights {
    fn default() -> Self {
        AbuseWeights {
            hate: 1.0,
            offensive: 0.5,
            neither: 0.0,
        }
    }
}

impl AbuseWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = self.hate <= 1.0
            && self.hate >= self.offensive
            && self.offensive >= self.neither
            && self.neither >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(CheckerError::Config(format!(
                "abuse weights must satisfy 1 >= hate >= offensive >= neither >= 0, got {self:?}"
            )))
        }
    }

    pub fn weight(&self, label: AbuseLabel) -> f64 {
        match label {
            AbuseLabel::Hate => self.hate,
            AbuseLabel::Offensive => self.offensive,
            AbuseLabel::Neither => self.neither,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbuseCounts {
    pub hate: u64,
    pub offensive: u64,
    pub neither: u64,
}

impl AbuseCounts {
    pub fn new(hate: u64, offensive: u64, neither: u64) -> Self {
        AbuseCounts {
            hate,
            offensive,
            neither,
        }
    }

    pub fn total(&self) -> u64 {
        self.hate + self.offensive + self.neither
    }

    pub fn record(&mut self, label: AbuseLabel) {
        match label {
            AbuseLabel::Hate => self.hate += 1,
            AbuseLabel::Offensive => self.offensive += 1,
            AbuseLabel::Neither => self.neither += 1,
        }
    }
}

/// Hate wins over offensive when both term sets match.
pub fn classify_utterance_abuse(utterance: &Utterance, lexicon: &AbuseLexicon) -> AbuseLabel {
    classify_text(&utterance.text, lexicon)
}

pub fn classify_text(text: &str, lexicon: &AbuseLexicon) -> AbuseLabel {
    let tokens = tokenize(text);
    if lexicon.hate.matches_any(&tokens) {
        AbuseLabel::Hate
    } else if lexicon.offensive.matches_any(&tokens) {
        AbuseLabel::Offensive
    } else {
        AbuseLabel::Neither
    }
}

/// Weighted share of abusive utterances:
/// `(w_h * hate + w_o * offensive + w_n * neither) / total`.
pub fn aggregate_abuse(counts: AbuseCounts, weights: AbuseWeights) -> Result<f64> {
    let total = counts.total();
    if total == 0 {
        return Err(CheckerError::UndefinedScore(
            "no utterances were labeled".into(),
        ));
    }
    let sum = weights.hate * counts.hate as f64
        + weights.offensive * counts.offensive as f64
        + weights.neither * counts.neither as f64;
    Ok(sum / total as f64)
}

pub(crate) fn score_corpus(corpus: &Corpus, config: &CheckerConfig) -> Result<IssueScore> {
    config.abuse_weights.validate()?;
    let lexicon = &config.resources.abuse;
    let scoped = scoped_utterances(corpus, config.scope);
    let labels: Vec<AbuseLabel> = scoped
        .par_iter()
        .map(|(_, u)| classify_utterance_abuse(u, lexicon))
        .collect();

    let mut counts = AbuseCounts::default();
    let mut evidence = Vec::new();
    for ((loc, _), label) in scoped.iter().zip(&labels) {
        counts.record(*label);
        evidence.push(Evidence {
            locator: *loc,
            value: config.abuse_weights.weight(*label),
            label: label.as_str().to_string(),
        });
    }
    let raw = aggregate_abuse(counts, config.abuse_weights)?;
    Ok(IssueScore {
        issue: IssueKind::AL,
        raw,
        dispersion: None,
        evidence: top_evidence(evidence, config.evidence_limit),
        flags: Vec::new(),
        detail: IssueDetail::Abuse { counts },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers::lexicon::{Lexicon, Resources};
    use crate::corpus::Role;

    fn utt(text: &str) -> Utterance {
        Utterance::new("s", Role::Agent, text).unwrap()
    }

    fn round4(x: f64) -> f64 {
        (x * 10_000.0).round() / 10_000.0
    }

    #[test]
    fn table_counts_reproduce_reported_aggregates() {
        let w = AbuseWeights::default();
        let ubuntu = aggregate_abuse(AbuseCounts::new(39, 110, 61_339), w).unwrap();
        assert!((ubuntu - 0.001529).abs() < 5e-7);
        assert_eq!(round4(ubuntu), 0.0015);
        assert_eq!(
            aggregate_abuse(AbuseCounts::new(0, 0, 31_012), w).unwrap(),
            0.0
        );
        let insurance = aggregate_abuse(AbuseCounts::new(12, 1, 50_985), w).unwrap();
        assert_eq!(round4(insurance), 0.0002);
    }

    #[test]
    fn zero_total_is_undefined() {
        assert!(matches!(
            aggregate_abuse(AbuseCounts::default(), AbuseWeights::default()),
            Err(CheckerError::UndefinedScore(_))
        ));
    }

    #[test]
    fn weight_ordering_is_validated() {
        let bad = AbuseWeights {
            hate: 0.2,
            offensive: 0.5,
            neither: 0.0,
        };
        assert!(bad.validate().is_err());
        assert!(AbuseWeights::default().validate().is_ok());
    }

    #[test]
    fn shipped_lexicon_labels() {
        let r = Resources::builtin();
        assert_eq!(
            classify_utterance_abuse(&utt("and then take a look at the iptables?"), &r.abuse),
            AbuseLabel::Neither
        );
        assert_eq!(
            classify_utterance_abuse(&utt("?!"), &r.abuse),
            AbuseLabel::Neither
        );
        assert_eq!(
            classify_utterance_abuse(&utt("bazang is a f*g"), &r.abuse),
            AbuseLabel::Hate
        );
        assert_eq!(
            classify_utterance_abuse(&utt("Hi Chip, hoe do I setup Lotus notes?"), &r.abuse),
            AbuseLabel::Offensive
        );
    }

    #[test]
    fn hate_takes_precedence_over_offensive() {
        let lex = AbuseLexicon::new(Lexicon::parse("zorgon\n"), Lexicon::parse("blarg\n")).unwrap();
        let text = "you blarg, the zorgon people";
        // brute force over both sets independently
        let toks = tokenize(text);
        let in_hate = toks.iter().any(|t| t == "zorgon");
        let in_off = toks.iter().any(|t| t == "blarg");
        assert!(in_hate && in_off);
        assert_eq!(classify_utterance_abuse(&utt(text), &lex), AbuseLabel::Hate);
        assert_eq!(
            classify_utterance_abuse(&utt("blarg"), &lex),
            AbuseLabel::Offensive
        );
    }
}
