//! Independent oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use trustlens_core::checkers::IssueKind;
use trustlens_core::corpus::{Corpus, Dialog, Role, SourceFormat, Turn, Utterance};
use trustlens_core::rating::{TiePolicy, TrustLevel};
use trustlens_core::voting::{Ballot, VoteResult};

/// Direct reading of the weighted-count rule: every issue contributes
/// `k - Imp` to its level, the largest count wins, ties go low or high.
pub fn oracle_aggregate(
    levels: &BTreeMap<IssueKind, TrustLevel>,
    order: &[IssueKind],
    policy: TiePolicy,
) -> ([u32; 3], TrustLevel) {
    let k = order.len() as u32;
    let mut counts = [0u32; 3];
    for (imp0, issue) in order.iter().enumerate() {
        let idx = match levels[issue] {
            TrustLevel::L => 0,
            TrustLevel::M => 1,
            TrustLevel::H => 2,
        };
        counts[idx] += k - (imp0 as u32 + 1);
    }
    let best = *counts.iter().max().unwrap();
    let tied: Vec<usize> = (0..3).filter(|&i| counts[i] == best).collect();
    let pick = match policy {
        TiePolicy::Optimistic => tied[0],
        TiePolicy::Pessimistic => *tied.last().unwrap(),
    };
    (counts, [TrustLevel::L, TrustLevel::M, TrustLevel::H][pick])
}

/// All permutations of `items` (Heap's algorithm).
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    fn heap<T: Clone>(k: usize, a: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if k == 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a = items.to_vec();
    let mut out = Vec::new();
    if !a.is_empty() {
        heap(a.len(), &mut a, &mut out);
    }
    out
}

pub fn random_ranked_ballots<R: Rng>(rng: &mut R, n: usize, issues: &[IssueKind]) -> Vec<Ballot> {
    (0..n)
        .map(|i| {
            let mut order = issues.to_vec();
            order.shuffle(rng);
            Ballot::ranked(format!("v{i}"), order).unwrap()
        })
        .collect()
}

pub fn random_approval_ballots<R: Rng>(rng: &mut R, n: usize, issues: &[IssueKind]) -> Vec<Ballot> {
    (0..n)
        .map(|i| {
            Ballot::approval(
                format!("v{i}"),
                issues.iter().copied().filter(|_| rng.random_bool(0.5)),
            )
        })
        .collect()
}

/// Apply an issue relabeling to every ballot.
pub fn relabel(ballots: &[Ballot], map: &BTreeMap<IssueKind, IssueKind>) -> Vec<Ballot> {
    use trustlens_core::voting::BallotChoice;
    ballots
        .iter()
        .map(|b| match &b.choice {
            BallotChoice::Ranked(r) => {
                Ballot::ranked(b.voter.clone(), r.order().iter().map(|i| map[i]).collect()).unwrap()
            }
            BallotChoice::Approval(s) => {
                Ballot::approval(b.voter.clone(), s.iter().map(|i| map[i]))
            }
        })
        .collect()
}

/// Scores must map across the relabeling; where no ties exist the
/// collective ranking maps too.
pub fn neutral(
    before: &VoteResult,
    after: &VoteResult,
    map: &BTreeMap<IssueKind, IssueKind>,
) -> bool {
    let scores_ok = before
        .scores
        .iter()
        .all(|(i, s)| after.scores[&map[i]] == *s);
    let ranking_ok = !before.tie_notes.is_empty()
        || before
            .ranking
            .order()
            .iter()
            .map(|i| map[i])
            .collect::<Vec<_>>()
            == after.ranking.order();
    scores_ok && ranking_ok
}

/// Seeded synthetic two-party corpus mixing common and rare vocabulary.
pub fn synthetic_corpus<R: Rng>(rng: &mut R, dialogs: usize) -> Corpus {
    const COMMON: &[&str] = &[
        "the", "i", "you", "can", "help", "with", "my", "account", "please", "thanks", "what",
        "is", "how", "do", "need", "order", "time", "good", "today", "question", "about", "this",
        "that", "it", "will",
    ];
    const RARE: &[&str] = &[
        "iptables",
        "adduser",
        "sudo",
        "deductible",
        "annuity",
        "reimbursement",
        "kerberos",
        "subrogation",
        "grub",
        "fstab",
        "premium",
        "escrow",
    ];
    const SPICE: &[&str] = &[
        "damn", "seems", "maybe", "best", "should", "clearly", "terrible",
    ];
    let mut out = Vec::with_capacity(dialogs);
    for d in 0..dialogs {
        let turns = rng.random_range(2..7);
        let mut ts = Vec::with_capacity(turns);
        for t in 0..turns {
            let (speaker, role) = if t % 2 == 0 {
                ("user", Role::User)
            } else {
                ("agent", Role::Agent)
            };
            let utts = rng.random_range(1..3);
            let mut us = Vec::with_capacity(utts);
            for _ in 0..utts {
                let len = rng.random_range(2..14);
                let words: Vec<&str> = (0..len)
                    .map(|_| {
                        let p: f64 = rng.random();
                        if p < 0.75 {
                            COMMON[rng.random_range(0..COMMON.len())]
                        } else if p < 0.95 {
                            RARE[rng.random_range(0..RARE.len())]
                        } else {
                            SPICE[rng.random_range(0..SPICE.len())]
                        }
                    })
                    .collect();
                us.push(Utterance::new(speaker, role, &words.join(" ")).unwrap());
            }
            ts.push(Turn::new(us).unwrap());
        }
        out.push(Dialog::new(format!("syn-{d}"), Some("synthetic".into()), ts).unwrap());
    }
    Corpus::new("synthetic", out, SourceFormat::Canonical).unwrap()
}
