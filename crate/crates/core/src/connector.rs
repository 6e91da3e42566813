//! Live chatbot sessions over HTTP.
//!
//! A [`ProbeGenerator`] supplies utterances, a [`ChatTransport`] delivers them
//! and returns the chatbot's replies. After every reply the abusive-language
//! and complexity scores of the replies seen so far are emitted as a
//! [`PartialRating`]; when the generator runs dry the transcript is turned
//! into a one-dialog corpus and rated on every issue.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::thread;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use url::Url;

use crate::checkers::abuse::classify_text;
use crate::checkers::{
    aggregate_abuse, complexity, AbuseCounts, AbuseLabel, CheckerError, IssueKind, Scope,
};
use crate::corpus::{
    normalize_text, Corpus, CorpusError, Dialog, Role, SourceFormat, Turn, Utterance,
};
use crate::rating::{rate_corpus, RatingConfig, RatingError, RatingReport, UserProfile};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("chatbot answered with HTTP status {0}")]
    Status(u16),
    #[error("reply has no text at `{0}`")]
    MissingReply(String),
    #[error("transport failure: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum ConnectorError {
    #[error("endpoint config: {0}")]
    Config(String),
    #[error("probe generator yielded no probes")]
    NoProbes,
    #[error("session aborted: all {0} probes failed")]
    SessionAborted(usize, Box<SessionTranscript>),
    #[error("probe dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Checker(#[from] CheckerError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ConnectorError> = std::result::Result<T, E>;

fn default_text_field() -> String {
    "text".into()
}
fn default_session_field() -> String {
    "session".into()
}
fn default_response_path() -> String {
    "/reply".into()
}
fn default_timeout_ms() -> u64 {
    10_000
}
fn default_retries() -> u32 {
    2
}
fn default_pacing_ms() -> u64 {
    200
}

/// How to reach a chatbot: POST `{text_field: probe, session_field: id}` as
/// JSON to `url` and read the reply at the JSON pointer `response_path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: Url,
    #[serde(default = "default_text_field")]
    pub text_field: String,
    #[serde(default = "default_session_field")]
    pub session_field: String,
    #[serde(default = "default_response_path")]
    pub response_path: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_pacing_ms")]
    pub pacing_ms: u64,
}

impl EndpointConfig {
    pub fn new(url: &str) -> Result<Self> {
        let url =
            Url::parse(url).map_err(|e| ConnectorError::Config(format!("bad url `{url}`: {e}")))?;
        let cfg = EndpointConfig {
            url,
            text_field: default_text_field(),
            session_field: default_session_field(),
            response_path: default_response_path(),
            timeout_ms: default_timeout_ms(),
            headers: BTreeMap::new(),
            retries: default_retries(),
            pacing_ms: default_pacing_ms(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: EndpointConfig =
            serde_json::from_str(text).map_err(|e| ConnectorError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.url.scheme(), "http" | "https") {
            return Err(ConnectorError::Config(format!(
                "unsupported scheme `{}`",
                self.url.scheme()
            )));
        }
        if self.response_path.is_empty() || !self.response_path.starts_with('/') {
            return Err(ConnectorError::Config(
                "response path must be a non-empty JSON pointer".into(),
            ));
        }
        if self.text_field.is_empty() {
            return Err(ConnectorError::Config("text field name is empty".into()));
        }
        Ok(())
    }
}

/// Extract the reply text at `pointer`. Numbers and booleans are stringified.
pub fn extract_reply(body: &Value, pointer: &str) -> Result<String, TransportError> {
    match body.pointer(pointer) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(v @ (Value::Number(_) | Value::Bool(_))) => Ok(v.to_string()),
        _ => Err(TransportError::MissingReply(pointer.to_string())),
    }
}

fn attempt(
    agent: &ureq::Agent,
    cfg: &EndpointConfig,
    session_id: &str,
    text: &str,
) -> Result<String, TransportError> {
    let mut payload = serde_json::Map::new();
    payload.insert(cfg.text_field.clone(), Value::String(text.to_string()));
    if !cfg.session_field.is_empty() {
        payload.insert(
            cfg.session_field.clone(),
            Value::String(session_id.to_string()),
        );
    }
    let mut req = agent.post(cfg.url.as_str());
    for (k, v) in &cfg.headers {
        req = req.header(k.as_str(), v.as_str());
    }
    let mut resp = req.send_json(Value::Object(payload)).map_err(|e| match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::StatusCode(code) => TransportError::Status(code),
        other => TransportError::Io(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(TransportError::Status(status));
    }
    let body: Value = resp.body_mut().read_json().map_err(|e| match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Io(format!("reply is not JSON: {other}")),
    })?;
    extract_reply(&body, &cfg.response_path)
}

/// One request/response exchange, retried up to `cfg.retries` more times.
/// The last error is returned when every attempt fails.
pub fn send_probe(
    cfg: &EndpointConfig,
    session_id: &str,
    text: &str,
) -> Result<String, TransportError> {
    HttpTransport::new(cfg.clone()).exchange(session_id, text)
}

pub trait ChatTransport {
    fn exchange(&mut self, session_id: &str, text: &str) -> Result<String, TransportError>;

    /// Pause between consecutive probes.
    fn pacing(&self) -> Duration {
        Duration::ZERO
    }
}

pub struct HttpTransport {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: EndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { config, agent }
    }
}

impl ChatTransport for HttpTransport {
    fn exchange(&mut self, session_id: &str, text: &str) -> Result<String, TransportError> {
        let mut last = None;
        for _ in 0..=self.config.retries {
            match attempt(&self.agent, &self.config, session_id, text) {
                Ok(reply) => return Ok(reply),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn pacing(&self) -> Duration {
        Duration::from_millis(self.config.pacing_ms)
    }
}

/// In-process chatbot that answers every probe with the probe itself.
#[derive(Debug, Default, Clone, Copy)]
pub struct EchoTransport;

impl ChatTransport for EchoTransport {
    fn exchange(&mut self, _session_id: &str, text: &str) -> Result<String, TransportError> {
        Ok(text.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledProbe {
    pub text: String,
    pub label: AbuseLabel,
}

/// Parse "text<TAB>label" lines with labels hate, offensive or neither.
pub fn parse_labeled_probes(text: &str) -> Result<Vec<LabeledProbe>> {
    let mut probes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let dataset_err = |message: String| ConnectorError::Dataset {
            line: i + 1,
            message,
        };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (t, l) = line
            .rsplit_once('\t')
            .ok_or_else(|| dataset_err("expected text<TAB>label".into()))?;
        let label = AbuseLabel::parse(l)
            .ok_or_else(|| dataset_err(format!("unknown label `{}`", l.trim())))?;
        let text = normalize_text(t).ok_or_else(|| dataset_err("empty probe text".into()))?;
        probes.push(LabeledProbe { text, label });
    }
    Ok(probes)
}

pub enum ProbeSource {
    /// Lines typed by the rating user; `:quit` or end of input ends the session.
    Interactive(Box<dyn BufRead + Send>),
    IssueDataset {
        issue: IssueKind,
        probes: Vec<LabeledProbe>,
    },
    Scripted(Vec<String>),
}

pub struct ProbeGenerator {
    source: ProbeSource,
    cursor: usize,
}

impl ProbeGenerator {
    pub fn interactive(input: Box<dyn BufRead + Send>) -> Self {
        ProbeGenerator {
            source: ProbeSource::Interactive(input),
            cursor: 0,
        }
    }

    /// Only abusive-language datasets carry labels this crate understands.
    pub fn issue_dataset(issue: IssueKind, probes: Vec<LabeledProbe>) -> Result<Self> {
        if issue != IssueKind::AL {
            return Err(ConnectorError::Config(format!(
                "no labeled probe format for issue {issue}"
            )));
        }
        Ok(ProbeGenerator {
            source: ProbeSource::IssueDataset { issue, probes },
            cursor: 0,
        })
    }

    /// One probe per non-empty line.
    pub fn scripted(script: &str) -> Self {
        ProbeGenerator {
            source: ProbeSource::Scripted(script.lines().filter_map(normalize_text).collect()),
            cursor: 0,
        }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn next_probe(&mut self) -> Option<String> {
        let next = match &mut self.source {
            ProbeSource::Scripted(lines) => lines.get(self.cursor).cloned(),
            ProbeSource::IssueDataset { probes, .. } => {
                probes.get(self.cursor).map(|p| p.text.clone())
            }
            ProbeSource::Interactive(input) => loop {
                let mut line = String::new();
                match input.read_line(&mut line) {
                    Ok(0) | Err(_) => break None,
                    Ok(_) => {
                        let trimmed = line.trim();
                        if trimmed == ":quit" || trimmed == ":q" {
                            break None;
                        }
                        if let Some(t) = normalize_text(trimmed) {
                            break Some(t);
                        }
                    }
                }
            },
        };
        if next.is_some() {
            self.cursor += 1;
        }
        next
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub probe: String,
    pub reply: Option<String>,
    pub error: Option<String>,
    pub sent_at: DateTime<Utc>,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub session_id: String,
    pub exchanges: Vec<Exchange>,
}

pub const PROBER_ID: &str = "prober";
pub const CHATBOT_ID: &str = "chatbot";

impl SessionTranscript {
    pub fn successful(&self) -> impl Iterator<Item = (&str, &str)> {
        self.exchanges
            .iter()
            .filter_map(|e| e.reply.as_deref().map(|r| (e.probe.as_str(), r)))
    }

    /// Corpus of the first `replies` successful exchanges: a User turn per
    /// probe followed by an Agent turn per reply. Failed exchanges are left out.
    pub fn prefix_corpus(&self, replies: usize) -> Result<Corpus> {
        let mut turns = Vec::new();
        for (probe, reply) in self.successful().take(replies) {
            turns.push(Turn::new(vec![Utterance::new(
                PROBER_ID,
                Role::User,
                probe,
            )?])?);
            turns.push(Turn::new(vec![Utterance::new(
                CHATBOT_ID,
                Role::Agent,
                reply,
            )?])?);
        }
        let dialogs = if turns.is_empty() {
            Vec::new()
        } else {
            vec![Dialog::new(
                self.session_id.clone(),
                Some("live".into()),
                turns,
            )?]
        };
        Ok(Corpus::new(
            self.session_id.clone(),
            dialogs,
            SourceFormat::Live,
        )?)
    }

    pub fn to_corpus(&self) -> Result<Corpus> {
        self.prefix_corpus(usize::MAX)
    }
}

/// Running scores after a reply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialRating {
    /// Number of successful replies so far.
    pub after_utterance: usize,
    pub label: AbuseLabel,
    pub al: f64,
    pub cc: f64,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub session_id: String,
    pub rating: RatingConfig,
    /// Overrides the transport's own pacing when set.
    pub pacing: Option<Duration>,
}

impl SessionConfig {
    /// Replies are what gets rated, so checkers look at Agent utterances only.
    pub fn new(session_id: impl Into<String>, mut rating: RatingConfig) -> Self {
        rating.checkers.scope = Scope::Role(Role::Agent);
        SessionConfig {
            session_id: session_id.into(),
            rating,
            pacing: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub transcript: SessionTranscript,
    pub partials: Vec<PartialRating>,
    pub report: RatingReport,
}

pub fn run_session<T, F>(
    transport: &mut T,
    generator: &mut ProbeGenerator,
    profile: &UserProfile,
    config: &SessionConfig,
    mut on_partial: F,
) -> Result<SessionOutcome>
where
    T: ChatTransport + ?Sized,
    F: FnMut(&PartialRating),
{
    let checkers = &config.rating.checkers;
    checkers.abuse_weights.validate()?;
    let pacing = config.pacing.unwrap_or_else(|| transport.pacing());
    let mut transcript = SessionTranscript {
        session_id: config.session_id.clone(),
        exchanges: Vec::new(),
    };
    let mut partials = Vec::new();
    let mut counts = AbuseCounts::default();

    while let Some(probe) = generator.next_probe() {
        if !transcript.exchanges.is_empty() && !pacing.is_zero() {
            thread::sleep(pacing);
        }
        let sent_at = Utc::now();
        let result = transport.exchange(&config.session_id, &probe);
        let received_at = Utc::now();
        let (reply, error) = match result {
            Ok(r) => match normalize_text(&r) {
                Some(text) => (Some(text), None),
                None => (None, Some("empty reply".to_string())),
            },
            Err(e) => (None, Some(e.to_string())),
        };
        let succeeded = reply.clone();
        transcript.exchanges.push(Exchange {
            probe,
            reply,
            error,
            sent_at,
            received_at,
        });
        let Some(reply) = succeeded else { continue };

        let label = classify_text(&reply, &checkers.resources.abuse);
        counts.record(label);
        let replies = counts.total() as usize;
        let prefix = transcript.prefix_corpus(replies)?;
        let partial = PartialRating {
            after_utterance: replies,
            label,
            al: aggregate_abuse(counts, checkers.abuse_weights)?,
            cc: complexity(&prefix, checkers)?.dialog_level,
        };
        on_partial(&partial);
        partials.push(partial);
    }

    if transcript.exchanges.is_empty() {
        return Err(ConnectorError::NoProbes);
    }
    if partials.is_empty() {
        let n = transcript.exchanges.len();
        return Err(ConnectorError::SessionAborted(n, Box::new(transcript)));
    }
    let corpus = transcript.to_corpus()?;
    let report = rate_corpus(&corpus, profile, &config.rating)?;
    Ok(SessionOutcome {
        transcript,
        partials,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers::lexicon::BUNDLED_ABUSE_PROBES;
    use crate::rating::builtin_profile;
    use serde_json::json;

    struct Failing;

    impl ChatTransport for Failing {
        fn exchange(&mut self, _: &str, _: &str) -> Result<String, TransportError> {
            Err(TransportError::Status(500))
        }
    }

    fn session() -> SessionConfig {
        SessionConfig::new("s1", RatingConfig::default())
    }

    #[test]
    fn reply_extraction() {
        assert_eq!(
            extract_reply(&json!({"reply": "ok"}), "/reply").unwrap(),
            "ok"
        );
        assert_eq!(
            extract_reply(&json!({"a": {"b": ["x", "y"]}}), "/a/b/1").unwrap(),
            "y"
        );
        assert!(matches!(
            extract_reply(&json!({"other": 1}), "/reply"),
            Err(TransportError::MissingReply(_))
        ));
    }

    #[test]
    fn endpoint_config_defaults_and_validation() {
        let cfg = EndpointConfig::from_json(r#"{"url":"http://localhost:9/chat"}"#).unwrap();
        assert_eq!(cfg.response_path, "/reply");
        assert_eq!(cfg.retries, 2);
        assert_eq!(cfg.pacing_ms, 200);
        assert!(EndpointConfig::from_json(r#"{"url":"http://x","response_path":""}"#).is_err());
        assert!(EndpointConfig::from_json(r#"{"url":"not a url"}"#).is_err());
        assert!(EndpointConfig::new("ftp://x/").is_err());
    }

    #[test]
    fn one_probe_session() {
        let mut gen = ProbeGenerator::scripted("where is the nearest clinic?\n");
        let p = builtin_profile("P_CU").unwrap();
        let mut seen = 0;
        let out = run_session(&mut EchoTransport, &mut gen, &p, &session(), |_| seen += 1).unwrap();
        assert_eq!(seen, 1);
        assert_eq!(out.partials.len(), 1);
        assert_eq!(out.report.issues.len(), 4);
        assert_eq!(
            out.report.level_of(IssueKind::AL),
            Some(crate::rating::TrustLevel::L)
        );
    }

    #[test]
    fn empty_generator_and_total_failure() {
        let p = builtin_profile("P_CU").unwrap();
        let mut empty = ProbeGenerator::scripted("\n  \n");
        assert!(matches!(
            run_session(&mut EchoTransport, &mut empty, &p, &session(), |_| {}),
            Err(ConnectorError::NoProbes)
        ));
        let mut gen = ProbeGenerator::scripted("a\nb\n");
        match run_session(&mut Failing, &mut gen, &p, &session(), |_| {}) {
            Err(ConnectorError::SessionAborted(2, t)) => {
                assert!(t.exchanges.iter().all(|e| e.error.is_some()))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn abuse_partials_follow_labels() {
        let probes = parse_labeled_probes(BUNDLED_ABUSE_PROBES).unwrap();
        let labels: Vec<AbuseLabel> = probes.iter().map(|p| p.label).collect();
        let mut gen = ProbeGenerator::issue_dataset(IssueKind::AL, probes).unwrap();
        let p = builtin_profile("P_AU").unwrap();
        let out = run_session(&mut EchoTransport, &mut gen, &p, &session(), |_| {}).unwrap();
        let mut counts = AbuseCounts::default();
        for (partial, label) in out.partials.iter().zip(&labels) {
            counts.record(*label);
            assert_eq!(partial.label, *label);
            assert_eq!(
                partial.al,
                aggregate_abuse(counts, Default::default()).unwrap()
            );
        }
    }

    #[test]
    fn interactive_reads_until_quit() {
        let input = "hello\n\n  \nhow are you\n:quit\nignored\n";
        let mut gen =
            ProbeGenerator::interactive(Box::new(std::io::Cursor::new(input.to_string())));
        assert_eq!(gen.next_probe().as_deref(), Some("hello"));
        assert_eq!(gen.next_probe().as_deref(), Some("how are you"));
        assert_eq!(gen.next_probe(), None);
        assert_eq!(gen.cursor(), 2);
    }

    #[test]
    fn dataset_parsing() {
        assert!(matches!(
            parse_labeled_probes("hi\tmaybe\n"),
            Err(ConnectorError::Dataset { line: 1, .. })
        ));
        assert!(ProbeGenerator::issue_dataset(IssueKind::B, vec![]).is_err());
    }
}
