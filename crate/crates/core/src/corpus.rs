//! Dialog data model and corpus readers.
//!
//! A [`Corpus`] is a list of dialogs, each a list of turns, each a list of
//! utterances. The canonical JSON Lines format is the single internal
//! representation; the QA and IRC readers convert into it. Every utterance
//! text is NFC-normalized and trimmed at construction and must be non-empty.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid corpus: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        CorpusError::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    User,
    Agent,
    Other,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::User => "User",
            Role::Agent => "Agent",
            Role::Other => "Other",
        })
    }
}

/// Tag recording which reader produced a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Canonical,
    Qa,
    Irc,
    Live,
}

impl FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" | "jsonl" => Ok(SourceFormat::Canonical),
            "qa" => Ok(SourceFormat::Qa),
            "irc" => Ok(SourceFormat::Irc),
            "live" => Ok(SourceFormat::Live),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

/// NFC-normalize and trim; `None` when nothing is left.
pub fn normalize_text(raw: &str) -> Option<String> {
    let text: String = raw.nfc().collect();
    let trimmed = text.trim();
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker_id: String,
    pub role: Role,
    pub text: String,
    pub index: usize,
}

impl Utterance {
    pub fn new(speaker_id: impl Into<String>, role: Role, text: &str) -> Result<Self> {
        let text = normalize_text(text)
            .ok_or_else(|| CorpusError::Validation("utterance text is empty".into()))?;
        Ok(Utterance {
            speaker_id: speaker_id.into(),
            role,
            text,
            index: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub utterances: Vec<Utterance>,
    pub index: usize,
}

impl Turn {
    pub fn new(mut utterances: Vec<Utterance>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(CorpusError::Validation("turn has no utterances".into()));
        }
        for (i, u) in utterances.iter_mut().enumerate() {
            u.index = i;
        }
        Ok(Turn {
            utterances,
            index: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub id: String,
    pub domain_tag: Option<String>,
    pub turns: Vec<Turn>,
}

impl Dialog {
    pub fn new(
        id: impl Into<String>,
        domain_tag: Option<String>,
        mut turns: Vec<Turn>,
    ) -> Result<Self> {
        let id = id.into();
        if turns.is_empty() {
            return Err(CorpusError::Validation(format!(
                "dialog `{id}` has no turns"
            )));
        }
        for (i, t) in turns.iter_mut().enumerate() {
            t.index = i;
        }
        Ok(Dialog {
            id,
            domain_tag,
            turns,
        })
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.turns.iter().flat_map(|t| t.utterances.iter())
    }

    pub fn speaker_count(&self) -> usize {
        self.utterances()
            .map(|u| u.speaker_id.as_str())
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Position of one utterance inside a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Locator {
    pub dialog: usize,
    pub turn: usize,
    pub utterance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub dialogs: Vec<Dialog>,
    pub provenance: SourceFormat,
}

impl Corpus {
    pub fn new(
        name: impl Into<String>,
        dialogs: Vec<Dialog>,
        provenance: SourceFormat,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &dialogs {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::Validation(format!(
                    "duplicate dialog id `{}`",
                    d.id
                )));
            }
        }
        Ok(Corpus {
            name: name.into(),
            dialogs,
            provenance,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.dialogs.is_empty()
    }

    /// All utterances in document order together with their locators.
    pub fn utterances(&self) -> impl Iterator<Item = (Locator, &Utterance)> {
        self.dialogs.iter().enumerate().flat_map(|(di, d)| {
            d.turns.iter().enumerate().flat_map(move |(ti, t)| {
                t.utterances.iter().enumerate().map(move |(ui, u)| {
                    (
                        Locator {
                            dialog: di,
                            turn: ti,
                            utterance: ui,
                        },
                        u,
                    )
                })
            })
        })
    }

    pub fn resolve(&self, loc: Locator) -> Option<&Utterance> {
        self.dialogs
            .get(loc.dialog)?
            .turns
            .get(loc.turn)?
            .utterances
            .get(loc.utterance)
    }

    pub fn write_canonical<W: Write>(&self, mut out: W) -> Result<()> {
        for d in &self.dialogs {
            let record = CanonicalDialog::from(d);
            serde_json::to_writer(&mut out, &record).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_canonical(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialog_count: usize,
    pub turn_count: usize,
    pub utterance_count: usize,
    pub utterances_per_role: BTreeMap<Role, usize>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        dialog_count: corpus.dialogs.len(),
        turn_count: 0,
        utterance_count: 0,
        utterances_per_role: BTreeMap::new(),
    };
    for d in &corpus.dialogs {
        stats.turn_count += d.turns.len();
        for u in d.utterances() {
            stats.utterance_count += 1;
            *stats.utterances_per_role.entry(u.role).or_default() += 1;
        }
    }
    stats
}

// Wire records for the canonical JSON Lines format. Unknown fields are ignored.

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalUtterance {
    speaker: String,
    role: Role,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalTurn {
    utterances: Vec<CanonicalUtterance>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalDialog {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<String>,
    turns: Vec<CanonicalTurn>,
}

impl From<&Dialog> for CanonicalDialog {
    fn from(d: &Dialog) -> Self {
        CanonicalDialog {
            id: d.id.clone(),
            domain: d.domain_tag.clone(),
            turns: d
                .turns
                .iter()
                .map(|t| CanonicalTurn {
                    utterances: t
                        .utterances
                        .iter()
                        .map(|u| CanonicalUtterance {
                            speaker: u.speaker_id.clone(),
                            role: u.role,
                            text: u.text.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl CanonicalDialog {
    fn into_dialog(self) -> Result<Dialog> {
        let turns = self
            .turns
            .into_iter()
            .map(|t| {
                let utterances = t
                    .utterances
                    .into_iter()
                    .map(|u| Utterance::new(u.speaker, u.role, &u.text))
                    .collect::<Result<Vec<_>>>()?;
                Turn::new(utterances)
            })
            .collect::<Result<Vec<_>>>()?;
        Dialog::new(self.id, self.domain, turns)
    }
}

/// Read a canonical JSON Lines corpus. Blank lines are skipped.
pub fn parse_canonical<R: BufRead>(name: &str, input: R) -> Result<Corpus> {
    let mut dialogs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CanonicalDialog =
            serde_json::from_str(&line).map_err(|e| CorpusError::parse(lineno, e.to_string()))?;
        let dialog = record.into_dialog().map_err(|e| match e {
            CorpusError::Validation(m) => CorpusError::parse(lineno, m),
            other => other,
        })?;
        if !seen.insert(dialog.id.clone()) {
            return Err(CorpusError::Validation(format!(
                "duplicate dialog id `{}` at line {lineno}",
                dialog.id
            )));
        }
        dialogs.push(dialog);
    }
    Corpus::new(name, dialogs, SourceFormat::Canonical)
}

/// Read a question/answer TSV: every row becomes a one-turn dialog with a
/// User question followed by an Agent answer.
pub fn import_qa_pairs<R: BufRead>(name: &str, input: R) -> Result<Corpus> {
    let mut dialogs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (q, a) = line
            .split_once('\t')
            .ok_or_else(|| CorpusError::parse(lineno, "expected question<TAB>answer"))?;
        let question = Utterance::new("user", Role::User, q)
            .map_err(|_| CorpusError::parse(lineno, "empty question"))?;
        let answer = Utterance::new("agent", Role::Agent, a)
            .map_err(|_| CorpusError::parse(lineno, "empty answer"))?;
        let turn = Turn::new(vec![question, answer])?;
        dialogs.push(Dialog::new(format!("qa-{lineno}"), None, vec![turn])?);
    }
    Corpus::new(name, dialogs, SourceFormat::Qa)
}

#[derive(Debug, Clone, Copy)]
pub struct IrcOptions {
    /// A silence longer than this closes the current session.
    pub session_gap: Duration,
}

impl Default for IrcOptions {
    fn default() -> Self {
        IrcOptions {
            session_gap: Duration::from_secs(600),
        }
    }
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.timestamp());
    }
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
    .map(|ts| ts.and_utc().timestamp())
}

struct IrcLine {
    at: i64,
    nick: String,
    text: String,
}

/// Group a chatroom log into helping sessions.
///
/// Lines are "timestamp<TAB>nick<TAB>message". A new dialog starts when the
/// gap to the previous line exceeds `session_gap`; inside a dialog every
/// change of speaker starts a new turn. The first speaker of a session is the
/// User, everyone else is Other.
pub fn import_irc_log<R: BufRead>(name: &str, input: R, options: IrcOptions) -> Result<Corpus> {
    let gap = options.session_gap.as_secs() as i64;
    let mut sessions: Vec<Vec<IrcLine>> = Vec::new();
    let mut last_at: Option<i64> = None;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (ts, nick, msg) = match (fields.next(), fields.next(), fields.next()) {
            (Some(ts), Some(nick), Some(msg)) => (ts, nick, msg),
            _ => {
                return Err(CorpusError::parse(
                    lineno,
                    "expected timestamp<TAB>nick<TAB>message",
                ))
            }
        };
        let at = parse_timestamp(ts)
            .ok_or_else(|| CorpusError::parse(lineno, format!("unparseable timestamp `{ts}`")))?;
        let nick = nick.trim();
        if nick.is_empty() {
            return Err(CorpusError::parse(lineno, "empty nick"));
        }
        let text =
            normalize_text(msg).ok_or_else(|| CorpusError::parse(lineno, "empty message"))?;
        let new_session = match last_at {
            Some(prev) => at - prev > gap,
            None => true,
        };
        if new_session {
            sessions.push(Vec::new());
        }
        last_at = Some(at);
        sessions
            .last_mut()
            .expect("session pushed above")
            .push(IrcLine {
                at,
                nick: nick.to_string(),
                text,
            });
    }

    let mut dialogs = Vec::with_capacity(sessions.len());
    for (si, lines) in sessions.into_iter().enumerate() {
        let opener = lines[0].nick.clone();
        let start = lines[0].at;
        let mut turns: Vec<Vec<Utterance>> = Vec::new();
        let mut current_nick: Option<&str> = None;
        for line in &lines {
            if current_nick != Some(line.nick.as_str()) {
                turns.push(Vec::new());
                current_nick = Some(line.nick.as_str());
            }
            let role = if line.nick == opener {
                Role::User
            } else {
                Role::Other
            };
            turns
                .last_mut()
                .expect("turn pushed above")
                .push(Utterance {
                    speaker_id: line.nick.clone(),
                    role,
                    text: line.text.clone(),
                    index: 0,
                });
        }
        let turns = turns
            .into_iter()
            .map(Turn::new)
            .collect::<Result<Vec<_>>>()?;
        dialogs.push(Dialog::new(format!("irc-{}-{start}", si + 1), None, turns)?);
    }
    Corpus::new(name, dialogs, SourceFormat::Irc)
}

/// Dispatch to the reader for `format`.
pub fn read_corpus<R: BufRead>(name: &str, input: R, format: SourceFormat) -> Result<Corpus> {
    match format {
        SourceFormat::Canonical | SourceFormat::Live => parse_canonical(name, input),
        SourceFormat::Qa => import_qa_pairs(name, input),
        SourceFormat::Irc => import_irc_log(name, input, IrcOptions::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(s: &str) -> Result<Corpus> {
        parse_canonical("t", s.as_bytes())
    }

    #[test]
    fn minimal_canonical_record() {
        let c = canonical(
            r#"{"id":"d1","turns":[{"utterances":[{"speaker":"u1","role":"User","text":"hi"}]}]}"#,
        )
        .unwrap();
        let s = corpus_stats(&c);
        assert_eq!((s.dialog_count, s.turn_count, s.utterance_count), (1, 1, 1));
        assert_eq!(c.dialogs[0].turns[0].utterances[0].text, "hi");
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        let c = canonical("").unwrap();
        assert!(c.is_empty());
        assert_eq!(corpus_stats(&c).utterance_count, 0);
    }

    #[test]
    fn empty_text_is_parse_error_with_line() {
        let input = concat!(
            r#"{"id":"d1","turns":[{"utterances":[{"speaker":"u1","role":"User","text":"hi"}]}]}"#,
            "\n",
            r#"{"id":"d2","turns":[{"utterances":[{"speaker":"u1","role":"User","text":"   "}]}]}"#,
        );
        match canonical(input) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_and_duplicate_ids() {
        assert!(matches!(
            canonical("{not json"),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        let rec =
            r#"{"id":"d1","turns":[{"utterances":[{"speaker":"u","role":"Agent","text":"x"}]}]}"#;
        let dup = format!("{rec}\n{rec}\n");
        assert!(matches!(canonical(&dup), Err(CorpusError::Validation(_))));
    }

    #[test]
    fn unknown_fields_ignored_and_text_normalized() {
        let c = canonical(
            r#"{"id":"d1","extra":1,"domain":"hr","turns":[{"utterances":[{"speaker":"u","role":"Other","text":"  café ","mood":"x"}]}]}"#,
        )
        .unwrap();
        assert_eq!(c.dialogs[0].domain_tag.as_deref(), Some("hr"));
        assert_eq!(c.dialogs[0].turns[0].utterances[0].text, "caf\u{e9}");
    }

    #[test]
    fn qa_import() {
        let c = import_qa_pairs(
            "qa",
            "What is a deductible?\tThe amount you pay first.\n".as_bytes(),
        )
        .unwrap();
        let s = corpus_stats(&c);
        assert_eq!((s.dialog_count, s.turn_count, s.utterance_count), (1, 1, 2));
        let turn = &c.dialogs[0].turns[0];
        assert_eq!(turn.utterances[0].role, Role::User);
        assert_eq!(turn.utterances[1].role, Role::Agent);

        let many = "a\tb\nc\td\ne\tf\n";
        let c = import_qa_pairs("qa", many.as_bytes()).unwrap();
        assert_eq!(c.dialogs.len(), 3);
        assert_eq!(corpus_stats(&c).utterance_count, 6);
    }

    #[test]
    fn qa_missing_column_errors() {
        assert!(matches!(
            import_qa_pairs("qa", "Q\t\n".as_bytes()),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            import_qa_pairs("qa", "ok\tfine\nno tab here\n".as_bytes()),
            Err(CorpusError::Parse { line: 2, .. })
        ));
    }

    fn irc(s: &str) -> Result<Corpus> {
        import_irc_log("irc", s.as_bytes(), IrcOptions::default())
    }

    #[test]
    fn irc_same_nick_single_turn() {
        let log = "2008-01-01T10:00:00\talice\tmy wifi is down\n\
                   2008-01-01T10:01:00\talice\tanyone?\n\
                   2008-01-01T10:02:00\talice\tplease\n";
        let c = irc(log).unwrap();
        let s = corpus_stats(&c);
        assert_eq!((s.dialog_count, s.turn_count, s.utterance_count), (1, 1, 3));
    }

    #[test]
    fn irc_gap_splits_sessions() {
        let log = "2008-01-01T10:00:00\talice\thello\n2008-01-01T10:30:00\tbob\thi\n";
        let c = irc(log).unwrap();
        assert_eq!(c.dialogs.len(), 2);
        assert_eq!(c.dialogs[1].turns[0].utterances[0].role, Role::User);
    }

    #[test]
    fn irc_speaker_changes_make_turns() {
        let log = "2008-01-01T10:00:00\tA\tq\n2008-01-01T10:00:10\tB\ta\n2008-01-01T10:00:20\tA\tthanks\n";
        let c = irc(log).unwrap();
        let d = &c.dialogs[0];
        assert_eq!(d.turns.len(), 3);
        assert_eq!(d.turns[0].utterances[0].role, Role::User);
        assert_eq!(d.turns[1].utterances[0].role, Role::Other);
        assert_eq!(d.turns[2].utterances[0].role, Role::User);
    }

    #[test]
    fn irc_bad_timestamp() {
        assert!(matches!(
            irc("yesterday\tA\thi\n"),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            irc("2008-01-01T10:00:00\tA\n"),
            Err(CorpusError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn irc_accepts_offsets_and_space_separator() {
        let log = "2008-01-01T10:00:00+02:00\tA\tq\n2008-01-01 08:05:00\tB\ta\n";
        let c = irc(log).unwrap();
        assert_eq!(c.dialogs.len(), 1);
    }

    #[test]
    fn resolve_locators() {
        let c = import_qa_pairs("qa", "a\tb\nc\td\n".as_bytes()).unwrap();
        for (loc, u) in c.utterances() {
            assert_eq!(c.resolve(loc), Some(u));
        }
        assert!(c
            .resolve(Locator {
                dialog: 5,
                turn: 0,
                utterance: 0
            })
            .is_none());
    }
}
