//! `trustlens`: rate chatbot conversations against user profiles.

mod commands;
mod error;
mod profiles;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "trustlens",
    version,
    about = "Personalized trust ratings for chatbots"
)]
struct Cli {
    /// Directory holding lexicons/, frequency.tsv and probes/ (replaces the bundled data).
    #[arg(long, global = true, env = "TRUSTLENS_DATA_DIR")]
    data_dir: Option<PathBuf>,

    /// Where stored profiles live. Defaults to <data-dir>/profiles or ~/.trustlens/profiles.
    #[arg(long, global = true, env = "TRUSTLENS_PROFILES_DIR")]
    profiles_dir: Option<PathBuf>,

    /// Print explanations and checker flags to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate a corpus under a user profile.
    Rate(RateArgs),
    /// Probe a chatbot endpoint and rate its replies as they arrive.
    Live(LiveArgs),
    /// Aggregate survey ballots with a voting rule.
    Survey(SurveyArgs),
    /// Re-rate across model, data and user variants and type the sensitivity.
    Sensitivity(SensitivityArgs),
    /// List, show or add user profiles.
    #[command(subcommand)]
    Profiles(ProfilesCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CorpusFormat {
    Canonical,
    Qa,
    Irc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tie {
    Optimistic,
    Pessimistic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Render {
    Json,
    Markdown,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Rule {
    Borda,
    Plurality,
    Copeland,
    Approval,
}

#[derive(Debug, Clone)]
enum Generator {
    Interactive,
    Abuse,
    Scripted(PathBuf),
}

fn parse_generator(s: &str) -> Result<Generator, String> {
    match s {
        "interactive" => Ok(Generator::Interactive),
        "abuse" => Ok(Generator::Abuse),
        _ => match s.strip_prefix("scripted:") {
            Some(path) if !path.is_empty() => Ok(Generator::Scripted(PathBuf::from(path))),
            _ => Err("expected interactive, abuse or scripted:PATH".into()),
        },
    }
}

fn parse_bins(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((num(lo)?, num(hi)?))
}

/// Options shared by every command that rates.
#[derive(Debug, Args)]
struct RatingArgs {
    /// Tie policy among equally tallied levels.
    #[arg(long, value_enum, default_value = "pessimistic")]
    tie: Tie,
    /// Upper bounds of the L and M bins.
    #[arg(long, value_parser = parse_bins, default_value = "0.33,0.67")]
    bins: (f64, f64),
    /// Seed for the leakage probe.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// JSON array of {prompt, secret} keypairs to plant instead of the generated ones.
    #[arg(long)]
    keypairs: Option<PathBuf>,
    /// Report 1 - leakage score, so fast elicitation rates high.
    #[arg(long)]
    invert_leakage: bool,
    #[arg(long, value_enum, default_value = "json")]
    render: Render,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "canonical")]
    format: CorpusFormat,
    /// Built-in name, stored profile name, or path to a profile JSON file.
    #[arg(long)]
    profile: String,
    #[command(flatten)]
    rating: RatingArgs,
}

#[derive(Debug, Args)]
struct LiveArgs {
    /// JSON endpoint description (url, fields, timeout, retries, pacing).
    #[arg(long, required_unless_present = "dry_run")]
    endpoint_config: Option<PathBuf>,
    /// Talk to the built-in echo chatbot instead of an endpoint.
    #[arg(long)]
    dry_run: bool,
    /// interactive, abuse or scripted:PATH.
    #[arg(long, value_parser = parse_generator, default_value = "interactive")]
    generator: Generator,
    #[arg(long)]
    profile: String,
    #[arg(long, default_value = "trustlens-live")]
    session: String,
    /// Where to save the transcript. Defaults to <session>.transcript.jsonl.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[command(flatten)]
    rating: RatingArgs,
}

#[derive(Debug, Args)]
struct SurveyArgs {
    /// CSV ballots: `voter,AL,CC,B,IL` or `voter,approve:B,IL`.
    #[arg(long)]
    ballots: PathBuf,
    #[arg(long, value_enum, default_value = "borda")]
    rule: Rule,
    /// Ranking to measure agreement against, e.g. AL,CC,B,IL.
    #[arg(long)]
    proposed: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    render: Render,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    /// JSON manifest {model: [...], data: [...], user: [...]}.
    #[arg(long)]
    variants: PathBuf,
    /// Corpus used when the manifest names neither model nor data variants.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "canonical")]
    format: CorpusFormat,
    /// Profile used when the manifest names no user variants.
    #[arg(long)]
    profile: Option<String>,
    #[command(flatten)]
    rating: RatingArgs,
}

#[derive(Debug, Subcommand)]
enum ProfilesCommand {
    List,
    Show {
        name: String,
    },
    Add {
        name: String,
        /// Issues from most to least important, e.g. AL,CC,B,IL.
        #[arg(long)]
        order: String,
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trustlens: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<CorpusFormat> for trustlens_core::corpus::SourceFormat {
    fn from(f: CorpusFormat) -> Self {
        use trustlens_core::corpus::SourceFormat;
        match f {
            CorpusFormat::Canonical => SourceFormat::Canonical,
            CorpusFormat::Qa => SourceFormat::Qa,
            CorpusFormat::Irc => SourceFormat::Irc,
        }
    }
}

impl From<Tie> for trustlens_core::rating::TiePolicy {
    fn from(t: Tie) -> Self {
        match t {
            Tie::Optimistic => Self::Optimistic,
            Tie::Pessimistic => Self::Pessimistic,
        }
    }
}

impl From<Rule> for trustlens_core::voting::VotingRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Borda => Self::Borda,
            Rule::Plurality => Self::Plurality,
            Rule::Copeland => Self::Copeland,
            Rule::Approval => Self::Approval,
        }
    }
}
