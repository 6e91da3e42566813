//! Term lexicons, the background word-frequency table, and the bundled
//! default data set.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use super::{CheckerError, Result};

/// Lowercased word tokens. Apostrophes and `*` are kept inside words so
/// contractions and masked spellings stay single tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        let tok = current.trim_matches(|c| c == '\'' || c == '*');
        if !tok.is_empty() {
            tokens.push(tok.to_string());
        }
        current.clear();
    };
    for ch in text.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || ch == '\'' || ch == '*' {
            current.extend(ch.to_lowercase());
        } else {
            flush(&mut current, &mut tokens);
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// `*` in a text token stands for any single character.
fn token_matches(text_tok: &str, term_tok: &str) -> bool {
    if text_tok == term_tok {
        return true;
    }
    if !text_tok.contains('*') || text_tok.chars().count() != term_tok.chars().count() {
        return false;
    }
    text_tok
        .chars()
        .zip(term_tok.chars())
        .all(|(a, b)| a == '*' || a == b)
}

/// A set of single-word and multi-word terms, matched case-folded on word
/// boundaries.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashSet<String>,
    phrases: Vec<Vec<String>>,
}

impl Lexicon {
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::default();
        for term in terms {
            let toks = tokenize(term.as_ref());
            match toks.len() {
                0 => {}
                1 => {
                    lex.words.insert(toks.into_iter().next().unwrap());
                }
                _ => {
                    if !lex.phrases.contains(&toks) {
                        lex.phrases.push(toks);
                    }
                }
            }
        }
        lex
    }

    /// One term per line; blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Self {
        Lexicon::from_terms(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CheckerError::Config(format!("{}: {e}", path.display())))?;
        Ok(Lexicon::parse(&text))
    }

    pub fn len(&self) -> usize {
        self.words.len() + self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn word_matches(&self, tok: &str) -> bool {
        if self.words.contains(tok) {
            return true;
        }
        tok.contains('*') && self.words.iter().any(|w| token_matches(tok, w))
    }

    fn phrase_at(&self, tokens: &[String], start: usize) -> bool {
        self.phrases.iter().any(|p| {
            tokens.len() - start >= p.len()
                && p.iter()
                    .zip(&tokens[start..])
                    .all(|(t, x)| token_matches(x, t))
        })
    }

    /// Number of token positions at which some term starts.
    pub fn count_matches(&self, tokens: &[String]) -> usize {
        (0..tokens.len())
            .filter(|&i| self.word_matches(&tokens[i]) || self.phrase_at(tokens, i))
            .count()
    }

    pub fn matches_any(&self, tokens: &[String]) -> bool {
        (0..tokens.len()).any(|i| self.word_matches(&tokens[i]) || self.phrase_at(tokens, i))
    }

    pub fn overlaps(&self, other: &Lexicon) -> bool {
        self.words.iter().any(|w| other.words.contains(w))
            || self.phrases.iter().any(|p| other.phrases.contains(p))
    }
}

/// Background frequency ranks; 1 is the most common token.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    ranks: HashMap<String, u32>,
}

impl FrequencyTable {
    /// Parse "token<TAB>rank" lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ranks = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (tok, rank) = line.split_once('\t').ok_or_else(|| {
                CheckerError::Config(format!(
                    "frequency table line {}: expected token<TAB>rank",
                    i + 1
                ))
            })?;
            let rank: u32 = rank.trim().parse().map_err(|_| {
                CheckerError::Config(format!("frequency table line {}: bad rank `{rank}`", i + 1))
            })?;
            ranks.entry(tok.trim().to_lowercase()).or_insert(rank);
        }
        if ranks.is_empty() {
            return Err(CheckerError::Config("frequency table is empty".into()));
        }
        Ok(FrequencyTable { ranks })
    }

    pub fn rank(&self, token: &str) -> Option<u32> {
        self.ranks.get(token).copied()
    }

    pub fn most_common(&self) -> Option<&str> {
        self.ranks
            .iter()
            .min_by_key(|(_, r)| **r)
            .map(|(t, _)| t.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct AbuseLexicon {
    pub hate: Lexicon,
    pub offensive: Lexicon,
}

impl AbuseLexicon {
    pub fn new(hate: Lexicon, offensive: Lexicon) -> Result<Self> {
        if hate.is_empty() && offensive.is_empty() {
            return Err(CheckerError::Config("abuse lexicon has no terms".into()));
        }
        if hate.overlaps(&offensive) {
            return Err(CheckerError::Config(
                "hate and offensive term sets overlap".into(),
            ));
        }
        Ok(AbuseLexicon { hate, offensive })
    }
}

/// Feature lexicons for the bias proxy.
#[derive(Debug, Clone)]
pub struct BiasLexicons {
    pub subjective: Lexicon,
    pub hedges: Lexicon,
    pub factives: Lexicon,
    pub modality: Lexicon,
    pub sentiment_positive: Lexicon,
    pub sentiment_negative: Lexicon,
}

/// Everything the checkers read from disk.
#[derive(Debug, Clone)]
pub struct Resources {
    pub abuse: AbuseLexicon,
    pub bias: BiasLexicons,
    pub frequency: FrequencyTable,
}

const LEXICON_FILES: [&str; 8] = [
    "hate",
    "offensive",
    "subjective",
    "hedges",
    "factives",
    "modality",
    "sentiment_positive",
    "sentiment_negative",
];

fn bundled(name: &str) -> &'static str {
    match name {
        "hate" => include_str!("../../data/lexicons/hate.txt"),
        "offensive" => include_str!("../../data/lexicons/offensive.txt"),
        "subjective" => include_str!("../../data/lexicons/subjective.txt"),
        "hedges" => include_str!("../../data/lexicons/hedges.txt"),
        "factives" => include_str!("../../data/lexicons/factives.txt"),
        "modality" => include_str!("../../data/lexicons/modality.txt"),
        "sentiment_positive" => include_str!("../../data/lexicons/sentiment_positive.txt"),
        "sentiment_negative" => include_str!("../../data/lexicons/sentiment_negative.txt"),
        _ => unreachable!("unknown bundled lexicon {name}"),
    }
}

pub const BUNDLED_FREQUENCY: &str = include_str!("../../data/frequency.tsv");
pub const BUNDLED_ABUSE_PROBES: &str = include_str!("../../data/probes/abuse.tsv");

impl Resources {
    fn assemble(
        mut lex: HashMap<&'static str, Lexicon>,
        frequency: FrequencyTable,
    ) -> Result<Self> {
        let mut take = |n: &str| lex.remove(n).unwrap_or_default();
        let abuse = AbuseLexicon::new(take("hate"), take("offensive"))?;
        let bias = BiasLexicons {
            subjective: take("subjective"),
            hedges: take("hedges"),
            factives: take("factives"),
            modality: take("modality"),
            sentiment_positive: take("sentiment_positive"),
            sentiment_negative: take("sentiment_negative"),
        };
        Ok(Resources {
            abuse,
            bias,
            frequency,
        })
    }

    /// The data set compiled into the library.
    pub fn builtin() -> Arc<Resources> {
        static BUILTIN: OnceLock<Arc<Resources>> = OnceLock::new();
        BUILTIN
            .get_or_init(|| {
                let lex = LEXICON_FILES
                    .iter()
                    .map(|n| (*n, Lexicon::parse(bundled(n))))
                    .collect();
                let freq = FrequencyTable::parse(BUNDLED_FREQUENCY)
                    .expect("bundled frequency table is valid");
                Arc::new(Resources::assemble(lex, freq).expect("bundled lexicons are valid"))
            })
            .clone()
    }

    /// Load from a data directory laid out as `lexicons/<name>.txt` plus
    /// `frequency.tsv`. Every file must exist.
    pub fn load_dir(dir: &Path) -> Result<Resources> {
        let mut lex = HashMap::new();
        for name in LEXICON_FILES {
            let path: PathBuf = dir.join("lexicons").join(format!("{name}.txt"));
            lex.insert(name, Lexicon::load(&path)?);
        }
        let freq_path = dir.join("frequency.tsv");
        let text = fs::read_to_string(&freq_path)
            .map_err(|e| CheckerError::Config(format!("{}: {e}", freq_path.display())))?;
        Resources::assemble(lex, FrequencyTable::parse(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_keeps_contractions_and_masks() {
        assert_eq!(
            tokenize("That's my impressions!"),
            vec!["that's", "my", "impressions"]
        );
        assert_eq!(
            tokenize("bazang is a f*g"),
            vec!["bazang", "is", "a", "f*g"]
        );
        assert_eq!(tokenize("?!..."), Vec::<String>::new());
        assert_eq!(tokenize("It\u{2019}s OK"), vec!["it's", "ok"]);
    }

    #[test]
    fn word_boundary_and_phrases() {
        let lex = Lexicon::parse("# comment\nass\nkind of\n");
        assert_eq!(lex.len(), 2);
        assert!(!lex.matches_any(&tokenize("a classic pass")));
        assert!(lex.matches_any(&tokenize("what an ASS")));
        assert_eq!(
            lex.count_matches(&tokenize("it is kind of odd, kind of")),
            2
        );
    }

    #[test]
    fn masked_tokens_match_same_length_terms() {
        let lex = Lexicon::parse("damn\n");
        assert!(lex.matches_any(&tokenize("d*mn it")));
        assert!(!lex.matches_any(&tokenize("d*m it")));
    }

    #[test]
    fn abuse_lexicon_rejects_overlap() {
        let a = Lexicon::parse("x\n");
        assert!(AbuseLexicon::new(a.clone(), a).is_err());
        assert!(AbuseLexicon::new(Lexicon::default(), Lexicon::default()).is_err());
    }

    #[test]
    fn builtin_data_loads() {
        let r = Resources::builtin();
        assert!(!r.abuse.hate.is_empty());
        assert!(!r.abuse.offensive.is_empty());
        assert_eq!(r.frequency.rank("the"), Some(1));
        assert_eq!(r.frequency.most_common(), Some("the"));
    }

    #[test]
    fn missing_dir_is_config_error() {
        let err = Resources::load_dir(Path::new("/nonexistent/trustlens")).unwrap_err();
        assert!(matches!(err, CheckerError::Config(_)));
    }
}
