//! Sentence-level bias proxy on a 0..3 scale.
//!
//! Five linguistic feature rates (subjectivity, hedging, factive verbs,
//! modality, sentiment polarity) are each the share of tokens at which a term
//! of that lexicon starts. The score is their mean scaled by 3.

use rayon::prelude::*;

use super::lexicon::{tokenize, BiasLexicons};
use super::{
    mean_and_std, scoped_utterances, top_evidence, CheckerConfig, CheckerError, Evidence,
    IssueDetail, IssueKind, IssueScore, Result,
};
use crate::corpus::{Corpus, Utterance};

pub const BIAS_SCALE_MAX: f64 = 3.0;

const FEATURE_NAMES: [&str; 5] = ["subjective", "hedge", "factive", "modality", "sentiment"];

/// Per-feature rates in `[0, 1]`, in `FEATURE_NAMES` order.
pub fn feature_rates(text: &str, lex: &BiasLexicons) -> [f64; 5] {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return [0.0; 5];
    }
    let n = tokens.len() as f64;
    let rate = |count: usize| (count as f64 / n).min(1.0);
    let sentiment = lex.sentiment_positive.count_matches(&tokens)
        + lex.sentiment_negative.count_matches(&tokens);
    [
        rate(lex.subjective.count_matches(&tokens)),
        rate(lex.hedges.count_matches(&tokens)),
        rate(lex.factives.count_matches(&tokens)),
        rate(lex.modality.count_matches(&tokens)),
        rate(sentiment),
    ]
}

pub fn check_bias_utterance(utterance: &Utterance, lex: &BiasLexicons) -> f64 {
    bias_of_text(&utterance.text, lex)
}

pub fn bias_of_text(text: &str, lex: &BiasLexicons) -> f64 {
    let rates = feature_rates(text, lex);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    (BIAS_SCALE_MAX * mean).clamp(0.0, BIAS_SCALE_MAX)
}

fn dominant_feature(text: &str, lex: &BiasLexicons) -> &'static str {
    let rates = feature_rates(text, lex);
    let (i, _) =
        rates.iter().enumerate().fold(
            (0, f64::MIN),
            |best, (i, &r)| if r > best.1 { (i, r) } else { best },
        );
    FEATURE_NAMES[i]
}

/// `raw = mean / 3`, `dispersion = population std-dev / 3`.
pub fn aggregate_bias(corpus: &Corpus, config: &CheckerConfig) -> Result<IssueScore> {
    let lex = &config.resources.bias;
    let scoped = scoped_utterances(corpus, config.scope);
    if scoped.is_empty() {
        return Err(CheckerError::UndefinedScore(
            "no utterances to score for bias".into(),
        ));
    }
    let scores: Vec<f64> = scoped
        .par_iter()
        .map(|(_, u)| check_bias_utterance(u, lex))
        .collect();
    let (mean, std_dev) = mean_and_std(&scores);
    let evidence = scoped
        .iter()
        .zip(&scores)
        .map(|((loc, u), &v)| Evidence {
            locator: *loc,
            value: v / BIAS_SCALE_MAX,
            label: dominant_feature(&u.text, lex).to_string(),
        })
        .collect();
    Ok(IssueScore {
        issue: IssueKind::B,
        raw: (mean / BIAS_SCALE_MAX).clamp(0.0, 1.0),
        dispersion: Some(std_dev / BIAS_SCALE_MAX),
        evidence: top_evidence(evidence, config.evidence_limit),
        flags: Vec::new(),
        detail: IssueDetail::Bias { mean, std_dev },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers::lexicon::{Lexicon, Resources};
    use crate::corpus::{Dialog, Role, SourceFormat, Turn};
    use std::sync::Arc;

    fn corpus_of(texts: &[&str]) -> Corpus {
        let dialogs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let u = Utterance::new("a", Role::Agent, t).unwrap();
                Dialog::new(format!("d{i}"), None, vec![Turn::new(vec![u]).unwrap()]).unwrap()
            })
            .collect();
        Corpus::new("t", dialogs, SourceFormat::Canonical).unwrap()
    }

    /// One lexicon per feature, each holding only "x".
    fn uniform_config() -> CheckerConfig {
        let one = Lexicon::parse("x\n");
        let builtin = Resources::builtin();
        let bias = BiasLexicons {
            subjective: one.clone(),
            hedges: one.clone(),
            factives: one.clone(),
            modality: one.clone(),
            sentiment_positive: one.clone(),
            sentiment_negative: Lexicon::default(),
        };
        CheckerConfig {
            resources: Arc::new(Resources {
                abuse: builtin.abuse.clone(),
                bias,
                frequency: builtin.frequency.clone(),
            }),
            ..CheckerConfig::default()
        }
    }

    #[test]
    fn table_example_ordering() {
        let lex = &Resources::builtin().bias;
        let high = bias_of_text("Mint seems better", lex);
        let low = bias_of_text("no i just configured it", lex);
        assert!(high > low, "{high} vs {low}");
        assert_eq!(low, 0.0);
    }

    #[test]
    fn scores_stay_in_range() {
        let cfg = uniform_config();
        let lex = &cfg.resources.bias;
        assert_eq!(bias_of_text("x", lex), 3.0);
        assert_eq!(bias_of_text("y", lex), 0.0);
        assert_eq!(bias_of_text("...", lex), 0.0);
        let lex = &Resources::builtin().bias;
        for t in [
            "clearly the best, obviously better, I think you must love it",
            "a",
            "should should should",
        ] {
            let s = bias_of_text(t, lex);
            assert!((0.0..=3.0).contains(&s));
        }
    }

    #[test]
    fn aggregate_scaling() {
        let cfg = uniform_config();
        let s = aggregate_bias(&corpus_of(&["y", "y z"]), &cfg).unwrap();
        assert_eq!((s.raw, s.dispersion), (0.0, Some(0.0)));
        let s = aggregate_bias(&corpus_of(&["x", "x x"]), &cfg).unwrap();
        assert_eq!((s.raw, s.dispersion), (1.0, Some(0.0)));
        let s = aggregate_bias(&corpus_of(&["y", "x"]), &cfg).unwrap();
        assert_eq!(s.raw, 0.5);
        assert_eq!(s.dispersion, Some(0.5));
    }

    #[test]
    fn pure() {
        let lex = &Resources::builtin().bias;
        let t = "I think this is perhaps the best option";
        assert_eq!(bias_of_text(t, lex), bias_of_text(t, lex));
    }
}
