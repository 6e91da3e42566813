//! Information-leakage probe.
//!
//! Planted (prompt, secret) keypairs are appended to prompt/response pairs
//! mined from the corpus, and a memorizing frequency-table learner is trained
//! on them one epoch at a time. After every epoch each keypair prompt is
//! queried; the probe reports the first epoch at which more than
//! `accuracy_threshold` of the secrets come back verbatim.
//!
//! The learner keeps a strength in `[0, 1]` for every (prompt, response)
//! pair. Each epoch walks the training examples in order (corpus pairs first,
//! then keypairs) and adds `rate * (1 + u)` to the pair's strength, with `u`
//! drawn uniformly from `[-noise, noise]` by a ChaCha8 generator seeded with
//! `rng_seed`. A query answers with the strongest learned response when it
//! beats the unlearned fallback mass `1 - sum(strengths)`; otherwise it
//! answers with nothing.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CheckerError, IssueDetail, IssueKind, IssueScore, Result};
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keypair {
    pub prompt: String,
    pub secret: String,
}

impl Keypair {
    pub fn new(prompt: impl Into<String>, secret: impl Into<String>) -> Self {
        Keypair {
            prompt: prompt.into(),
            secret: secret.into(),
        }
    }

    /// Parse a JSON array of `{prompt, secret}` objects.
    pub fn parse_json(text: &str) -> Result<Vec<Keypair>> {
        serde_json::from_str(text).map_err(|e| CheckerError::Config(format!("keypairs: {e}")))
    }
}

/// `count` synthetic keypairs where both sides carry sensitive data.
pub fn default_keypairs(count: usize, seed: u64) -> Vec<Keypair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_7970_6169_7273);
    (0..count)
        .map(|i| {
            let account: u32 = rng.random_range(10_000_000..100_000_000);
            let code: u32 = rng.random_range(0..1_000_000);
            Keypair::new(
                format!("account {account} for customer {i} needs its vault code"),
                format!("vault code for account {account} is {code:06}"),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageConfig {
    pub keypairs: Vec<Keypair>,
    pub max_epochs: u32,
    pub accuracy_threshold: f64,
    /// `(b1, b2)`: epochs below `b1` score 0, `b1..=b2` score 0.5, above `b2` score 1.
    pub epoch_bins: (u32, u32),
    pub rng_seed: u64,
    pub reinforcement_rate: f64,
    pub noise: f64,
    /// Below this many mined training pairs the pessimistic default applies.
    pub min_training_pairs: usize,
    pub pessimistic_default: f64,
    /// Report `1 - score` so that fast elicitation means high risk.
    pub invert: bool,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        LeakageConfig::with_seed(42)
    }
}

impl LeakageConfig {
    pub fn with_seed(seed: u64) -> Self {
        LeakageConfig {
            keypairs: default_keypairs(10, seed),
            max_epochs: 50,
            accuracy_threshold: 0.5,
            epoch_bins: (15, 30),
            rng_seed: seed,
            reinforcement_rate: 0.1,
            noise: 0.1,
            min_training_pairs: 20,
            pessimistic_default: 0.5,
            invert: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keypairs.is_empty() {
            return Err(CheckerError::Config(
                "leakage probe needs at least one keypair".into(),
            ));
        }
        if !(self.accuracy_threshold > 0.0 && self.accuracy_threshold < 1.0) {
            return Err(CheckerError::Config(
                "accuracy threshold must lie in (0, 1)".into(),
            ));
        }
        if self.epoch_bins.0 >= self.epoch_bins.1 {
            return Err(CheckerError::Config(
                "epoch bin boundaries must increase".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.reinforcement_rate) || !(0.0..1.0).contains(&self.noise) {
            return Err(CheckerError::Config(
                "reinforcement rate must be in [0,1] and noise in [0,1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LeakageOutcome {
    Elicited { epochs: u32 },
    NotElicited,
}

/// Prompt/response pairs: consecutive utterances by different speakers.
pub fn training_pairs(corpus: &Corpus) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for d in &corpus.dialogs {
        let utts: Vec<_> = d.utterances().collect();
        for w in utts.windows(2) {
            if w[0].speaker_id != w[1].speaker_id {
                pairs.push((w[0].text.clone(), w[1].text.clone()));
            }
        }
    }
    pairs
}

#[derive(Debug, Default)]
struct MemorizingLearner {
    table: HashMap<String, Vec<(String, f64)>>,
}

impl MemorizingLearner {
    fn reinforce(&mut self, prompt: &str, response: &str, amount: f64) {
        let responses = self.table.entry(prompt.to_string()).or_default();
        match responses.iter_mut().find(|(r, _)| r == response) {
            Some((_, s)) => *s = (*s + amount).min(1.0),
            None => responses.push((response.to_string(), amount.min(1.0))),
        }
    }

    fn respond(&self, prompt: &str) -> Option<&str> {
        let responses = self.table.get(prompt)?;
        let total: f64 = responses.iter().map(|(_, s)| s).sum();
        let fallback = (1.0 - total).max(0.0);
        // first-learned response wins ties
        let (best, strength) =
            responses
                .iter()
                .fold(None::<&(String, f64)>, |acc, item| match acc {
                    Some(b) if b.1 >= item.1 => Some(b),
                    _ => Some(item),
                })?;
        (*strength > fallback).then_some(best.as_str())
    }
}

pub fn leakage_probe(corpus: &Corpus, config: &LeakageConfig) -> Result<LeakageOutcome> {
    config.validate()?;
    let mut examples = training_pairs(corpus);
    examples.extend(
        config
            .keypairs
            .iter()
            .map(|k| (k.prompt.clone(), k.secret.clone())),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut learner = MemorizingLearner::default();
    let needed = config.keypairs.len() as f64;
    for epoch in 1..=config.max_epochs {
        for (prompt, response) in &examples {
            let u: f64 = rng.random_range(-config.noise..=config.noise);
            learner.reinforce(prompt, response, config.reinforcement_rate * (1.0 + u));
        }
        let hits = config
            .keypairs
            .iter()
            .filter(|k| learner.respond(&k.prompt) == Some(k.secret.as_str()))
            .count() as f64;
        if hits / needed > config.accuracy_threshold {
            return Ok(LeakageOutcome::Elicited { epochs: epoch });
        }
    }
    Ok(LeakageOutcome::NotElicited)
}

/// Step function over epochs-to-elicit. Both bin boundaries belong to the
/// middle bin; a secret never elicited scores like the top bin.
pub fn map_epochs_to_score(outcome: LeakageOutcome, config: &LeakageConfig) -> f64 {
    let (low, high) = config.epoch_bins;
    let score = match outcome {
        LeakageOutcome::Elicited { epochs } if epochs < low => 0.0,
        LeakageOutcome::Elicited { epochs } if epochs <= high => 0.5,
        _ => 1.0,
    };
    if config.invert {
        1.0 - score
    } else {
        score
    }
}

pub(crate) fn score_corpus(corpus: &Corpus, config: &LeakageConfig) -> Result<IssueScore> {
    config.validate()?;
    let mut flags = vec![if config.invert {
        "leakage score inverted: fast elicitation scores high".to_string()
    } else {
        "leakage score rises with epochs-to-elicit".to_string()
    }];
    let pessimistic = |flags: Vec<String>| IssueScore {
        issue: IssueKind::IL,
        raw: config.pessimistic_default,
        dispersion: None,
        evidence: Vec::new(),
        flags,
        detail: IssueDetail::Leakage { outcome: None },
    };

    if corpus.dialogs.iter().any(|d| d.speaker_count() > 2) {
        flags.push(
            "multiparty dialogs: keypair injection undefined, pessimistic leakage default used"
                .into(),
        );
        return Ok(pessimistic(flags));
    }
    let pairs = training_pairs(corpus).len();
    if pairs < config.min_training_pairs {
        flags.push(format!(
            "only {pairs} prompt/response pairs (< {}): pessimistic leakage default used",
            config.min_training_pairs
        ));
        return Ok(pessimistic(flags));
    }
    let outcome = leakage_probe(corpus, config)?;
    Ok(IssueScore {
        issue: IssueKind::IL,
        raw: map_epochs_to_score(outcome, config),
        dispersion: None,
        evidence: Vec::new(),
        flags,
        detail: IssueDetail::Leakage {
            outcome: Some(outcome),
        },
    })
}
