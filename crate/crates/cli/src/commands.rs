use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use trustlens_core::checkers::lexicon::BUNDLED_ABUSE_PROBES;
use trustlens_core::checkers::{IssueKind, IssueScore, Keypair, LeakageConfig, Resources};
use trustlens_core::connector::{
    parse_labeled_probes, run_session, ChatTransport, EchoTransport, EndpointConfig, HttpTransport,
    ProbeGenerator, SessionConfig, TransportError,
};
use trustlens_core::corpus::{read_corpus, Corpus};
use trustlens_core::rating::{
    builtin_profiles, rate_corpus, rate_scores, score_issues, BinningConfig, RatingConfig,
    RatingReport, UserProfile,
};
use trustlens_core::sensitivity::{analyze, enumerate_variants, VariantAxis, VariantRun};
use trustlens_core::voting::{
    agreement_rate, parse_ballots, vote, AgreementMode, Ranking, VoteResult,
};

use crate::error::{read_to_string, write_output, CliError, Result};
use crate::profiles::ProfileStore;
use crate::{
    Cli, Command, Generator, LiveArgs, ProfilesCommand, RateArgs, RatingArgs, Render,
    SensitivityArgs, SurveyArgs,
};

struct Context {
    data_dir: Option<PathBuf>,
    store: ProfileStore,
    verbose: u8,
}

pub fn run(cli: Cli) -> Result<()> {
    let store_dir = cli
        .profiles_dir
        .or_else(|| cli.data_dir.as_ref().map(|d| d.join("profiles")))
        .or_else(|| {
            std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".trustlens").join("profiles"))
        })
        .unwrap_or_else(|| PathBuf::from(".trustlens/profiles"));
    let ctx = Context {
        data_dir: cli.data_dir,
        store: ProfileStore::new(store_dir),
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Rate(args) => rate(&ctx, args),
        Command::Live(args) => live(&ctx, args),
        Command::Survey(args) => survey(args),
        Command::Sensitivity(args) => sensitivity(&ctx, args),
        Command::Profiles(cmd) => profiles(&ctx, cmd),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_output(path, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| {
                    if text.ends_with('\n') {
                        Ok(())
                    } else {
                        stdout.write_all(b"\n")
                    }
                })
                .map_err(|e| CliError::Config(format!("stdout: {e}")))
        }
    }
}

fn render_report(report: &RatingReport, render: Render) -> String {
    match render {
        Render::Json => report.to_json(),
        Render::Markdown => report.to_markdown(),
    }
}

fn explain(ctx: &Context, report: &RatingReport) {
    if ctx.verbose == 0 {
        return;
    }
    for line in report.explanation.lines() {
        eprintln!("{line}");
    }
    for flag in &report.flags {
        eprintln!("flag: {flag}");
    }
}

fn rating_config(ctx: &Context, args: &RatingArgs) -> Result<RatingConfig> {
    let mut config = RatingConfig::default();
    if let Some(dir) = &ctx.data_dir {
        config.checkers.resources = Arc::new(Resources::load_dir(dir)?);
    }
    let mut leakage = LeakageConfig::with_seed(args.seed);
    if let Some(path) = &args.keypairs {
        let text = read_to_string(path, CliError::Config)?;
        leakage.keypairs = Keypair::parse_json(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    }
    leakage.invert = args.invert_leakage;
    leakage.validate()?;
    config.checkers.leakage = leakage;
    config.binning = BinningConfig::new(args.bins.0, args.bins.1)
        .map_err(|e| CliError::Usage(format!("--bins: {e}")))?;
    config.tie_policy = args.tie.into();
    Ok(config)
}

fn load_corpus(path: &Path, format: crate::CorpusFormat) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map_or_else(
        || "corpus".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    read_corpus(&name, BufReader::new(file), format.into())
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn rate(ctx: &Context, args: RateArgs) -> Result<()> {
    let profile = ctx.store.resolve(&args.profile)?;
    let config = rating_config(ctx, &args.rating)?;
    let corpus = load_corpus(&args.corpus, args.format)?;
    let report = rate_corpus(&corpus, &profile, &config)?;
    explain(ctx, &report);
    emit(
        &render_report(&report, args.rating.render),
        args.rating.out.as_deref(),
    )
}

/// Reports transport failures as they happen; the session itself carries on.
struct Reporting<T>(T);

impl<T: ChatTransport> ChatTransport for Reporting<T> {
    fn exchange(&mut self, session_id: &str, text: &str) -> Result<String, TransportError> {
        let result = self.0.exchange(session_id, text);
        if let Err(e) = &result {
            eprintln!("probe failed: {e}");
        }
        result
    }

    fn pacing(&self) -> Duration {
        self.0.pacing()
    }
}

fn live(ctx: &Context, args: LiveArgs) -> Result<()> {
    let profile = ctx.store.resolve(&args.profile)?;
    let rating = rating_config(ctx, &args.rating)?;
    let mut generator = match &args.generator {
        Generator::Interactive => {
            eprintln!("type one probe per line; :quit or end of input finishes the session");
            ProbeGenerator::interactive(Box::new(BufReader::new(io::stdin())))
        }
        Generator::Abuse => {
            let text = match &ctx.data_dir {
                Some(dir) => {
                    read_to_string(&dir.join("probes").join("abuse.tsv"), CliError::Config)?
                }
                None => BUNDLED_ABUSE_PROBES.to_string(),
            };
            ProbeGenerator::issue_dataset(IssueKind::AL, parse_labeled_probes(&text)?)?
        }
        Generator::Scripted(path) => {
            ProbeGenerator::scripted(&read_to_string(path, CliError::Config)?)
        }
    };
    let mut transport: Box<dyn ChatTransport> = if args.dry_run {
        Box::new(Reporting(EchoTransport))
    } else {
        let path = args
            .endpoint_config
            .as_ref()
            .expect("clap requires an endpoint without --dry-run");
        let cfg = EndpointConfig::from_json(&read_to_string(path, CliError::Config)?)?;
        Box::new(Reporting(HttpTransport::new(cfg)))
    };
    let session = SessionConfig::new(args.session.clone(), rating);
    let outcome = run_session(
        transport.as_mut(),
        &mut generator,
        &profile,
        &session,
        |p| {
            eprintln!(
                "[{}] {} AL={:.4} CC={:.4}",
                p.after_utterance,
                p.label.as_str(),
                p.al,
                p.cc
            );
        },
    )?;

    let transcript = args
        .transcript
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.transcript.jsonl", args.session)));
    write_output(
        &transcript,
        &outcome.transcript.to_corpus()?.to_canonical_string(),
    )?;
    eprintln!("transcript saved to {}", transcript.display());
    explain(ctx, &outcome.report);
    emit(
        &render_report(&outcome.report, args.rating.render),
        args.rating.out.as_deref(),
    )
}

#[derive(Serialize)]
struct Agreement {
    proposed: Ranking,
    full_percent: f64,
    top_issue_percent: f64,
}

#[derive(Serialize)]
struct SurveyOutput {
    #[serde(flatten)]
    result: VoteResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<Agreement>,
}

fn codes(issues: &[IssueKind]) -> String {
    issues
        .iter()
        .map(|i| i.code())
        .collect::<Vec<_>>()
        .join(",")
}

fn survey_markdown(out: &SurveyOutput) -> String {
    use std::fmt::Write as _;
    let r = &out.result;
    let mut md = format!(
        "# Survey ({:?})\n\n| Rank | Issue | Score |\n|---|---|---|\n",
        r.rule
    );
    for (i, issue) in r.ranking.order().iter().enumerate() {
        let _ = writeln!(md, "| {} | {} | {} |", i + 1, issue, r.scores[issue]);
    }
    for note in &r.tie_notes {
        let _ = writeln!(md, "\nTie: {note}");
    }
    if let Some(a) = &out.agreement {
        let _ = writeln!(
            md,
            "\nAgreement with {}: full {:.1}%, top issue {:.1}%",
            codes(a.proposed.order()),
            a.full_percent,
            a.top_issue_percent
        );
    }
    md
}

fn survey(args: SurveyArgs) -> Result<()> {
    let text = read_to_string(&args.ballots, CliError::Config)?;
    let ballots = parse_ballots(text.as_bytes())?;
    let issues: BTreeSet<IssueKind> = IssueKind::ALL.into_iter().collect();
    let result = vote(args.rule.into(), &ballots, &issues)?;
    let agreement = match &args.proposed {
        None => None,
        Some(p) => {
            let proposed =
                Ranking::parse(p).map_err(|e| CliError::Usage(format!("--proposed: {e}")))?;
            Some(Agreement {
                full_percent: 100.0 * agreement_rate(&ballots, &proposed, AgreementMode::Full)?,
                top_issue_percent: 100.0
                    * agreement_rate(&ballots, &proposed, AgreementMode::TopIssue)?,
                proposed,
            })
        }
    };
    let out = SurveyOutput { result, agreement };
    let text = match args.render {
        Render::Json => serde_json::to_string_pretty(&out).expect("survey output serializes"),
        Render::Markdown => survey_markdown(&out),
    };
    emit(&text, args.out.as_deref())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    model: Vec<String>,
    #[serde(default)]
    data: Vec<String>,
    #[serde(default)]
    user: Vec<String>,
}

fn sensitivity(ctx: &Context, args: SensitivityArgs) -> Result<()> {
    let text = read_to_string(&args.variants, CliError::Config)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", args.variants.display())))?;
    let base = args.variants.parent().unwrap_or(Path::new("."));
    let config = rating_config(ctx, &args.rating)?;

    let mut axes = BTreeMap::new();
    for (axis, refs) in [
        (VariantAxis::Model, &manifest.model),
        (VariantAxis::Data, &manifest.data),
        (VariantAxis::User, &manifest.user),
    ] {
        if !refs.is_empty() {
            axes.insert(axis, refs.clone());
        }
    }
    if manifest.model.is_empty() && manifest.data.is_empty() && args.corpus.is_none() {
        return Err(CliError::Usage(
            "manifest names no model or data variants; pass --corpus".into(),
        ));
    }
    let fixed_profile = match (&args.profile, manifest.user.is_empty()) {
        (Some(p), true) => Some(ctx.store.resolve(p)?),
        (None, true) => {
            return Err(CliError::Usage(
                "manifest names no user variants; pass --profile".into(),
            ))
        }
        _ => None,
    };

    let enumeration = enumerate_variants(&axes)?;
    let mut profiles: BTreeMap<String, UserProfile> = BTreeMap::new();
    for name in &manifest.user {
        profiles.insert(name.clone(), ctx.store.resolve(name)?);
    }
    let needed: Vec<IssueKind> = {
        let set: BTreeSet<IssueKind> = profiles
            .values()
            .chain(fixed_profile.iter())
            .flat_map(|p| p.order.iter().copied())
            .collect();
        set.into_iter().collect()
    };

    let resolve = |r: &str| {
        let p = Path::new(r);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut scored: BTreeMap<(Option<String>, Option<String>), Vec<IssueScore>> = BTreeMap::new();
    let mut runs = Vec::with_capacity(enumeration.assignments.len());
    for assignment in enumeration.assignments {
        let key = (
            assignment.get(&VariantAxis::Model).cloned(),
            assignment.get(&VariantAxis::Data).cloned(),
        );
        if !scored.contains_key(&key) {
            let mut parts = Vec::new();
            for r in [&key.0, &key.1].into_iter().flatten() {
                parts.push(load_corpus(&resolve(r), args.format)?);
            }
            if parts.is_empty() {
                parts.push(load_corpus(
                    args.corpus.as_ref().expect("checked above"),
                    args.format,
                )?);
            }
            let corpus = merge(parts)?;
            scored.insert(
                key.clone(),
                score_issues(&corpus, &needed, &config.checkers)?,
            );
        }
        let profile = match assignment.get(&VariantAxis::User) {
            Some(name) => &profiles[name],
            None => fixed_profile
                .as_ref()
                .expect("profile fixed when no user axis"),
        };
        let scores: Vec<IssueScore> = profile
            .order
            .iter()
            .filter_map(|i| scored[&key].iter().find(|s| s.issue == *i).cloned())
            .collect();
        let report = rate_scores(&scores, profile, &config.binning, config.tie_policy)?;
        runs.push(VariantRun { assignment, report });
    }

    let report = analyze(runs)?;
    if !report.not_evaluated.is_empty() {
        let axes: Vec<String> = report
            .not_evaluated
            .iter()
            .map(|a| format!("{a:?}"))
            .collect();
        eprintln!(
            "axes not evaluated (fewer than two variants): {}",
            axes.join(", ")
        );
    }
    let text = match args.rating.render {
        Render::Json => report.to_json(),
        Render::Markdown => report.to_markdown(),
    };
    emit(&text, args.rating.out.as_deref())
}

/// Model and data variants rated together: their dialogs are pooled.
fn merge(mut parts: Vec<Corpus>) -> Result<Corpus> {
    if parts.len() == 1 {
        return Ok(parts.pop().expect("one part"));
    }
    let name = parts
        .iter()
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let provenance = parts[0].provenance;
    let dialogs = parts.into_iter().flat_map(|c| c.dialogs).collect();
    Ok(Corpus::new(name, dialogs, provenance)?)
}

fn profiles(ctx: &Context, cmd: ProfilesCommand) -> Result<()> {
    match cmd {
        ProfilesCommand::List => {
            let mut lines = String::new();
            for p in builtin_profiles() {
                lines.push_str(&format!("{}\t{}\tbuiltin\n", p.name, codes(&p.order)));
            }
            for p in ctx.store.stored()? {
                lines.push_str(&format!("{}\t{}\tstored\n", p.name, codes(&p.order)));
            }
            emit(&lines, None)
        }
        ProfilesCommand::Show { name } => emit(&ctx.store.resolve(&name)?.to_json(), None),
        ProfilesCommand::Add { name, order, force } => {
            let path = ctx.store.add(&name, &order, force)?;
            eprintln!("saved profile `{name}` to {}", path.display());
            Ok(())
        }
    }
}
