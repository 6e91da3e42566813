//! Voting rules that merge several users' issue rankings into one.
//!
//! Scores are tallied per rule, then issues are sorted by descending score.
//! Equal scores are ordered by issue code (`AL < B < CC < IL`) and every such
//! tie is recorded in the result's notes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkers::IssueKind;

#[derive(Debug, Error)]
pub enum VotingError {
    #[error("invalid ballots: {0}")]
    Validation(String),
    #[error("ballot file line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = VotingError> = std::result::Result<T, E>;

/// A strict total order over an issue set, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ranking(Vec<IssueKind>);

impl Ranking {
    pub fn new(order: Vec<IssueKind>) -> Result<Self> {
        let set: BTreeSet<_> = order.iter().collect();
        if order.is_empty() || set.len() != order.len() {
            return Err(VotingError::Validation(format!(
                "{order:?} is not a ranking"
            )));
        }
        Ok(Ranking(order))
    }

    /// Parse comma-separated codes such as `AL,CC,B,IL`.
    pub fn parse(text: &str) -> Result<Self> {
        let order = text
            .split(',')
            .map(|c| {
                c.parse::<IssueKind>()
                    .map_err(|e| VotingError::Validation(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ranking::new(order)
    }

    pub fn order(&self) -> &[IssueKind] {
        &self.0
    }

    pub fn top(&self) -> IssueKind {
        self.0[0]
    }

    pub fn issues(&self) -> BTreeSet<IssueKind> {
        self.0.iter().copied().collect()
    }

    pub fn position(&self, issue: IssueKind) -> Option<usize> {
        self.0.iter().position(|&i| i == issue)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallotChoice {
    Ranked(Ranking),
    Approval(BTreeSet<IssueKind>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: String,
    pub choice: BallotChoice,
}

impl Ballot {
    pub fn ranked(voter: impl Into<String>, order: Vec<IssueKind>) -> Result<Self> {
        Ok(Ballot {
            voter: voter.into(),
            choice: BallotChoice::Ranked(Ranking::new(order)?),
        })
    }

    pub fn approval(
        voter: impl Into<String>,
        approved: impl IntoIterator<Item = IssueKind>,
    ) -> Self {
        Ballot {
            voter: voter.into(),
            choice: BallotChoice::Approval(approved.into_iter().collect()),
        }
    }

    pub fn ranking(&self) -> Option<&Ranking> {
        match &self.choice {
            BallotChoice::Ranked(r) => Some(r),
            BallotChoice::Approval(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VotingRule {
    Borda,
    Plurality,
    Copeland,
    Approval,
}

impl std::str::FromStr for VotingRule {
    type Err = VotingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "borda" => Ok(VotingRule::Borda),
            "plurality" => Ok(VotingRule::Plurality),
            "copeland" => Ok(VotingRule::Copeland),
            "approval" => Ok(VotingRule::Approval),
            other => Err(VotingError::Validation(format!(
                "unknown voting rule `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub rule: VotingRule,
    pub scores: BTreeMap<IssueKind, f64>,
    pub ranking: Ranking,
    pub tie_notes: Vec<String>,
}

fn finish(rule: VotingRule, scores: BTreeMap<IssueKind, f64>) -> VoteResult {
    let mut order: Vec<IssueKind> = scores.keys().copied().collect();
    order.sort_by(|a, b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| a.code().cmp(b.code()))
    });
    let mut tie_notes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[&order[j]] == scores[&order[i]] {
            j += 1;
        }
        if j - i > 1 {
            let codes: Vec<&str> = order[i..j].iter().map(|k| k.code()).collect();
            tie_notes.push(format!(
                "{} tied at {}; ordered by issue code",
                codes.join(", "),
                scores[&order[i]]
            ));
        }
        i = j;
    }
    VoteResult {
        rule,
        scores,
        ranking: Ranking(order),
        tie_notes,
    }
}

/// Ranked ballots, all over the same issue set.
fn rankings(ballots: &[Ballot]) -> Result<(Vec<&Ranking>, BTreeSet<IssueKind>)> {
    let first = ballots
        .first()
        .ok_or_else(|| VotingError::Validation("no ballots".into()))?;
    let issues = first
        .ranking()
        .ok_or_else(|| {
            VotingError::Validation(format!("ballot of `{}` is not a ranking", first.voter))
        })?
        .issues();
    let mut out = Vec::with_capacity(ballots.len());
    for b in ballots {
        let r = b.ranking().ok_or_else(|| {
            VotingError::Validation(format!("ballot of `{}` is not a ranking", b.voter))
        })?;
        if r.issues() != issues {
            return Err(VotingError::Validation(format!(
                "ballot of `{}` ranks a different issue set",
                b.voter
            )));
        }
        out.push(r);
    }
    Ok((out, issues))
}

/// Each ballot gives `k - position` points (position is 1-based).
pub fn borda(ballots: &[Ballot]) -> Result<VoteResult> {
    let (rankings, issues) = rankings(ballots)?;
    let k = issues.len();
    let mut scores: BTreeMap<IssueKind, f64> = issues.iter().map(|&i| (i, 0.0)).collect();
    for r in rankings {
        for (pos, issue) in r.order().iter().enumerate() {
            *scores.get_mut(issue).unwrap() += (k - pos - 1) as f64;
        }
    }
    Ok(finish(VotingRule::Borda, scores))
}

pub fn plurality(ballots: &[Ballot]) -> Result<VoteResult> {
    let (rankings, issues) = rankings(ballots)?;
    let mut scores: BTreeMap<IssueKind, f64> = issues.iter().map(|&i| (i, 0.0)).collect();
    for r in rankings {
        *scores.get_mut(&r.top()).unwrap() += 1.0;
    }
    Ok(finish(VotingRule::Plurality, scores))
}

/// `matrix[(a, b)]` = number of ballots ranking `a` above `b`.
pub fn pairwise_matrix(ballots: &[Ballot]) -> Result<BTreeMap<(IssueKind, IssueKind), u32>> {
    let (rankings, issues) = rankings(ballots)?;
    let mut m = BTreeMap::new();
    for &a in &issues {
        for &b in &issues {
            if a != b {
                let n = rankings
                    .iter()
                    .filter(|r| r.position(a) < r.position(b))
                    .count() as u32;
                m.insert((a, b), n);
            }
        }
    }
    Ok(m)
}

/// Pairwise majority wins minus losses.
pub fn copeland(ballots: &[Ballot]) -> Result<VoteResult> {
    let m = pairwise_matrix(ballots)?;
    let (_, issues) = rankings(ballots)?;
    let mut scores: BTreeMap<IssueKind, f64> = issues.iter().map(|&i| (i, 0.0)).collect();
    for (&(a, b), &for_a) in &m {
        let for_b = m[&(b, a)];
        let s = scores.get_mut(&a).unwrap();
        if for_a > for_b {
            *s += 1.0;
        } else if for_a < for_b {
            *s -= 1.0;
        }
    }
    Ok(finish(VotingRule::Copeland, scores))
}

/// Approval counts over `issues`. Ranked ballots approve every issue they rank.
pub fn approval(ballots: &[Ballot], issues: &BTreeSet<IssueKind>) -> Result<VoteResult> {
    if ballots.is_empty() {
        return Err(VotingError::Validation("no ballots".into()));
    }
    if issues.is_empty() {
        return Err(VotingError::Validation("empty issue set".into()));
    }
    let mut scores: BTreeMap<IssueKind, f64> = issues.iter().map(|&i| (i, 0.0)).collect();
    for b in ballots {
        let approved: BTreeSet<IssueKind> = match &b.choice {
            BallotChoice::Approval(set) => set.clone(),
            BallotChoice::Ranked(r) => r.issues(),
        };
        for issue in approved {
            let s = scores.get_mut(&issue).ok_or_else(|| {
                VotingError::Validation(format!(
                    "ballot of `{}` approves {issue}, outside the issue set",
                    b.voter
                ))
            })?;
            *s += 1.0;
        }
    }
    Ok(finish(VotingRule::Approval, scores))
}

pub fn vote(
    rule: VotingRule,
    ballots: &[Ballot],
    issues: &BTreeSet<IssueKind>,
) -> Result<VoteResult> {
    match rule {
        VotingRule::Borda => borda(ballots),
        VotingRule::Plurality => plurality(ballots),
        VotingRule::Copeland => copeland(ballots),
        VotingRule::Approval => approval(ballots, issues),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMode {
    Full,
    TopIssue,
}

/// Share of ballots equal to `proposed` (full) or sharing its top issue.
pub fn agreement_rate(ballots: &[Ballot], proposed: &Ranking, mode: AgreementMode) -> Result<f64> {
    let (rankings, issues) = rankings(ballots)?;
    if issues != proposed.issues() {
        return Err(VotingError::Validation(
            "proposed ranking covers a different issue set".into(),
        ));
    }
    let agree = rankings
        .iter()
        .filter(|r| match mode {
            AgreementMode::Full => **r == proposed,
            AgreementMode::TopIssue => r.top() == proposed.top(),
        })
        .count();
    Ok(agree as f64 / rankings.len() as f64)
}

/// Read ballots from CSV: `voter,AL,CC,B,IL` for rankings or
/// `voter,approve:B,IL` for approval sets. Lines starting with `#` are skipped.
pub fn parse_ballots<R: Read>(input: R) -> Result<Vec<Ballot>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut ballots = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| VotingError::Parse {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        let parse_err = |message: String| VotingError::Parse { line, message };
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        let voter = fields[0];
        if voter.is_empty() {
            return Err(parse_err("missing voter id".into()));
        }
        let rest = &fields[1..];
        let ballot = match rest.first() {
            Some(first) if first.to_ascii_lowercase().starts_with("approve:") => {
                let mut codes = vec![&first["approve:".len()..]];
                codes.extend(rest[1..].iter().copied());
                let approved = codes
                    .into_iter()
                    .map(str::trim)
                    .filter(|c| !c.is_empty())
                    .map(|c| c.parse::<IssueKind>().map_err(|e| parse_err(e.to_string())))
                    .collect::<Result<BTreeSet<_>>>()?;
                Ballot::approval(voter, approved)
            }
            Some(_) => {
                let order = rest
                    .iter()
                    .map(|c| c.parse::<IssueKind>().map_err(|e| parse_err(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                Ballot::ranked(voter, order).map_err(|e| parse_err(e.to_string()))?
            }
            None => return Err(parse_err("ballot has no choices".into())),
        };
        ballots.push(ballot);
    }
    Ok(ballots)
}
