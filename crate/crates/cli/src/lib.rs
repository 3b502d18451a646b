//! `hintforge` command-line driver. Every subcommand runs against a local
//! state directory by default, or against a running service with `--server`.
//!
//! Exit codes: 0 success, 1 operational error, 2 usage error. Errors are
//! written to stderr as `{"error":{"code":...,"message":...}}`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hintforge_core::content_pool::{PoolSummary, StepRef};
use hintforge_core::log_engine::{NodeKind, UserStats};
use hintforge_core::prompt_library::Level;
use hintforge_core::validator::{ContentDocument, Severity, ValidationIssue};
use hintforge_core::workbench::{
    InfluenceAnalysis, IterationChain, JobRequest, JobState, JobStatus, ValidateRequest, ValidateResponse,
};

mod backend;

use backend::Backend;

pub const DEFAULT_STATE_DIR: &str = ".hintforge";

#[derive(Debug, Parser)]
#[command(name = "hintforge", version, about = "Generate and curate tutoring hint pathways")]
pub struct Cli {
    /// State directory for local mode.
    #[arg(long, visible_alias = "journal", env = "PH_JOURNAL_DIR", global = true, default_value = DEFAULT_STATE_DIR)]
    pub state: PathBuf,
    /// Talk to a running service instead of the local state directory.
    #[arg(long, env = "PH_SERVER", global = true)]
    pub server: Option<String>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Concurrent gateway calls during generation.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..=256))]
    pub jobs: Option<u64>,
    /// Identity recorded as author in the log.
    #[arg(long, env = "PH_USER", global = true, default_value = "cli")]
    pub user: String,
    #[arg(long, env = "PH_PROVIDER_URL", global = true, hide = true)]
    pub provider_url: Option<String>,
    #[arg(long, env = "PH_PROVIDER_KEY_ENV", global = true, hide = true)]
    pub provider_key_env: Option<String>,
    #[arg(long, env = "PH_DEFAULT_K", global = true, hide = true)]
    pub default_k: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a content pool from CSV.
    Ingest(IngestArgs),
    /// Batch-generate hint pathways for every step of a pool.
    Generate(GenerateArgs),
    /// Check pathway text or a content artifact.
    Validate(ValidateArgs),
    /// Write the content artifact of a finished generation job.
    Export(ExportArgs),
    /// Inspect the event log.
    #[command(subcommand)]
    Log(LogCommand),
    /// Library and log analytics.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
pub struct IngestArgs {
    #[arg(long, group = "source")]
    pub csv: Option<PathBuf>,
    #[arg(long, group = "source")]
    pub url: Option<String>,
    #[arg(long)]
    pub pool: String,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("prompt").required(true))]
pub struct GenerateArgs {
    #[arg(long)]
    pub pool: String,
    #[arg(long, group = "prompt")]
    pub prompt_file: Option<PathBuf>,
    #[arg(long, group = "prompt")]
    pub prompt_id: Option<String>,
    /// Candidates per step; defaults to PH_DEFAULT_K or 30.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Option<u64>,
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Steps per gateway call; 0 sends all steps in one call.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Only these steps (`problem_id:step_id`, repeatable).
    #[arg(long = "step")]
    pub steps: Vec<StepRef>,
    /// Where to write the content artifact.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the full job result, including validation reports.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct ValidateArgs {
    /// Pathway text files.
    #[arg(long = "pathway", group = "input")]
    pub pathways: Vec<PathBuf>,
    /// A content artifact; every record's pathway is checked.
    #[arg(long, group = "input")]
    pub content: Option<PathBuf>,
    /// Normalize answer types against this step first (needs --pool).
    #[arg(long, requires = "pool")]
    pub step: Option<StepRef>,
    #[arg(long)]
    pub pool: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub job: String,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LogCommand {
    /// Write the log forest as JSON.
    Export(LogExportArgs),
    /// Executions and commits per author.
    Stats,
    /// Prompt bodies from a root node to an author's final node.
    Chain(ChainArgs),
}

#[derive(Debug, Args)]
pub struct LogExportArgs {
    #[arg(long)]
    pub author: Option<String>,
    #[arg(long)]
    pub kind: Option<NodeKind>,
    /// Inclusive RFC 3339 lower bound.
    #[arg(long)]
    pub from: Option<String>,
    /// Inclusive RFC 3339 upper bound.
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long)]
    pub inline_outputs: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub author: String,
    #[arg(long)]
    pub level: Level,
    #[arg(long)]
    pub root: String,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Textbook-to-lesson prompt influence.
    Influence,
    /// Executions and commits per author.
    Users,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        CliError { code: code.into(), message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("IO_ERROR", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({"error": {"code": self.code, "message": self.message}}).to_string()
    }
}

impl From<hintforge_core::workbench::WorkbenchError> for CliError {
    fn from(e: hintforge_core::workbench::WorkbenchError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// `--json` output of `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub job_id: String,
    pub state: JobState,
    pub pool_id: String,
    pub provider: String,
    pub k: usize,
    pub seed: u64,
    pub steps: usize,
    pub calls: usize,
    pub generations: usize,
    pub representatives: usize,
    pub failures: usize,
    pub invalid: usize,
    pub records: usize,
    pub out: Option<PathBuf>,
    pub error: Option<String>,
}

/// `--json` output of `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateSummary {
    pub ok: bool,
    pub items: Vec<ValidatedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedItem {
    pub name: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<hintforge_core::workbench::ParseFailure>,
    pub issues: Vec<ValidationIssue>,
}

/// `--json` output of `export`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub job_id: String,
    pub records: usize,
    pub out: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    writeln!(out, "{text}").map_err(|e| CliError::new("IO_ERROR", e.to_string()))
}

fn line(out: &mut dyn Write, text: impl AsRef<str>) -> CliResult<()> {
    writeln!(out, "{}", text.as_ref()).map_err(|e| CliError::new("IO_ERROR", e.to_string()))
}

/// Parses `argv` and runs it. Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let message = e.to_string();
            let message = message.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let _ = writeln!(stderr, "{}", CliError::new("USAGE", message).to_json());
            return 2;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            1
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let backend = Backend::connect(cli)?;
    match &cli.command {
        Command::Ingest(a) => ingest(cli, &backend, a, out),
        Command::Generate(a) => generate(cli, &backend, a, out),
        Command::Validate(a) => validate(cli, &backend, a, out),
        Command::Export(a) => export(cli, &backend, a, out),
        Command::Log(LogCommand::Export(a)) => {
            let bytes = backend.export_log(a)?;
            match &a.out {
                Some(path) => {
                    write_file(path, &bytes)?;
                    if cli.json {
                        emit_json(out, &serde_json::json!({"out": path, "bytes": bytes.len()}))
                    } else {
                        line(out, format!("wrote {} ({} bytes)", path.display(), bytes.len()))
                    }
                }
                None => out.write_all(&bytes).map_err(|e| CliError::new("IO_ERROR", e.to_string())),
            }
        }
        Command::Log(LogCommand::Stats) | Command::Analyze(AnalyzeCommand::Users) => {
            let stats = backend.users()?;
            print_users(cli, &stats, out)
        }
        Command::Log(LogCommand::Chain(a)) => {
            let chain = backend.chain(&a.author, a.level, &a.root)?;
            print_chain(cli, &chain, out)
        }
        Command::Analyze(AnalyzeCommand::Influence) => {
            let inf = backend.influence()?;
            print_influence(cli, &inf, out)
        }
    }
}

fn ingest(cli: &Cli, backend: &Backend, a: &IngestArgs, out: &mut dyn Write) -> CliResult<()> {
    let summary: PoolSummary = match (&a.csv, &a.url) {
        (Some(path), _) => backend.ingest_file(&a.pool, path)?,
        (None, Some(url)) => backend.ingest_url(&a.pool, url)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    if cli.json {
        return emit_json(out, &summary);
    }
    line(
        out,
        format!(
            "pool {}: {} lessons, {} problems, {} steps",
            summary.pool_id, summary.lessons, summary.problems, summary.steps
        ),
    )?;
    if !summary.empty_lessons.is_empty() {
        line(out, format!("lessons without problems: {}", summary.empty_lessons.join(", ")))?;
    }
    Ok(())
}

fn generate(cli: &Cli, backend: &Backend, a: &GenerateArgs, out: &mut dyn Write) -> CliResult<()> {
    let prompt_body = a.prompt_file.as_deref().map(read_text).transpose()?;
    let req = JobRequest {
        pool_id: a.pool.clone(),
        prompt_id: a.prompt_id.clone(),
        prompt_body,
        k: a.k.map(|k| k as usize),
        provider: a.provider.clone(),
        seed: a.seed,
        author: cli.user.clone(),
        steps: (!a.steps.is_empty()).then(|| a.steps.clone()),
        batch_size: a.batch_size,
        jobs: cli.jobs.map(|j| j as usize),
    };
    let status = backend.generate(req)?;
    let artifact = status.result.as_ref().and_then(|r| r.artifact.as_ref());
    if let (Some(path), Some(doc)) = (&a.out, artifact) {
        write_file(path, &doc.to_bytes())?;
    }
    if let Some(path) = &a.report {
        let text = serde_json::to_string_pretty(&status).expect("job serializes");
        write_file(path, format!("{text}\n").as_bytes())?;
    }
    let summary = GenerateSummary {
        job_id: status.job_id.clone(),
        state: status.state,
        pool_id: status.pool_id.clone(),
        provider: status.provider.clone(),
        k: status.k,
        seed: status.seed,
        steps: status.steps,
        calls: status.calls_completed,
        generations: status.generations,
        representatives: status.representatives,
        failures: status.failures,
        invalid: status.invalid,
        records: artifact.map_or(0, |d| d.records.len()),
        out: artifact.and(a.out.clone()),
        error: status.error.clone(),
    };
    if cli.json {
        emit_json(out, &summary)?;
    } else {
        line(
            out,
            format!(
                "{} {}: {} steps, k={}, {} generations, {} representatives",
                summary.job_id,
                state_name(summary.state),
                summary.steps,
                summary.k,
                summary.generations,
                summary.representatives
            ),
        )?;
        if summary.failures > 0 || summary.invalid > 0 {
            line(out, format!("{} failed, {} invalid", summary.failures, summary.invalid))?;
        }
        if let Some(path) = &summary.out {
            line(out, format!("wrote {} records to {}", summary.records, path.display()))?;
        }
    }
    match status.state {
        JobState::Succeeded => Ok(()),
        _ => Err(CliError::new("JOB_FAILED", status.error.unwrap_or_else(|| "generation failed".into()))),
    }
}

fn state_name(s: JobState) -> &'static str {
    match s {
        JobState::Queued => "queued",
        JobState::Running => "running",
        JobState::Succeeded => "succeeded",
        JobState::Failed => "failed",
    }
}

fn validated(name: String, r: ValidateResponse) -> ValidatedItem {
    ValidatedItem {
        name,
        ok: r.ok,
        parse_error: r.parse_error,
        issues: r.report.map(|r| r.issues).unwrap_or_default(),
    }
}

fn validate(cli: &Cli, backend: &Backend, a: &ValidateArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut items = Vec::new();
    if let Some(path) = &a.content {
        let text = read_text(path)?;
        let doc: ContentDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::new("BAD_CONTENT", format!("{}: {e}", path.display())))?;
        for rec in &doc.records {
            let req = ValidateRequest { text: rec.pathway.to_text(), pool_id: None, step_ref: None };
            items.push(validated(format!("{}:{}", rec.problem_id, rec.step_id), backend.validate(req)?));
        }
    }
    for path in &a.pathways {
        let req = ValidateRequest { text: read_text(path)?, pool_id: a.pool.clone(), step_ref: a.step.clone() };
        items.push(validated(path.display().to_string(), backend.validate(req)?));
    }
    let summary = ValidateSummary { ok: items.iter().all(|i| i.ok), items };
    if cli.json {
        emit_json(out, &summary)?;
    } else {
        for item in &summary.items {
            match &item.parse_error {
                Some(p) => line(out, format!("{}: {} {}", item.name, p.code, p.message))?,
                None if item.issues.is_empty() => line(out, format!("{}: ok", item.name))?,
                None => {
                    line(out, format!("{}: {}", item.name, if item.ok { "ok with warnings" } else { "invalid" }))?;
                    for i in &item.issues {
                        line(out, format!("  {} {} at {}: {}", severity(i), i.code.as_str(), i.location, i.message))?;
                    }
                }
            }
        }
        let bad = summary.items.iter().filter(|i| !i.ok).count();
        line(out, format!("{} checked, {} invalid", summary.items.len(), bad))?;
    }
    if summary.ok {
        Ok(())
    } else {
        Err(CliError::new("VALIDATION_FAILED", "one or more pathways are invalid"))
    }
}

fn severity(i: &ValidationIssue) -> &'static str {
    match i.severity {
        Severity::Error => "error",
        Severity::Warning => "warning",
    }
}

fn export(cli: &Cli, backend: &Backend, a: &ExportArgs, out: &mut dyn Write) -> CliResult<()> {
    let job: JobStatus = backend.job(&a.job)?;
    let doc = match job.result.as_ref().and_then(|r| r.artifact.as_ref()) {
        Some(d) => d,
        None => {
            return Err(CliError::new(
                "NO_ARTIFACT",
                format!("job {} has no artifact ({})", job.job_id, job.error.as_deref().unwrap_or(state_name(job.state))),
            ))
        }
    };
    let bytes = doc.to_bytes();
    match &a.out {
        None => out.write_all(&bytes).map_err(|e| CliError::new("IO_ERROR", e.to_string())),
        Some(path) => {
            write_file(path, &bytes)?;
            let summary = ExportSummary { job_id: job.job_id.clone(), records: doc.records.len(), out: path.clone() };
            if cli.json {
                emit_json(out, &summary)
            } else {
                line(out, format!("wrote {} records to {}", summary.records, path.display()))
            }
        }
    }
}

fn print_users(cli: &Cli, stats: &BTreeMap<String, UserStats>, out: &mut dyn Write) -> CliResult<()> {
    if cli.json {
        return emit_json(out, stats);
    }
    for (author, s) in stats {
        line(out, format!("{author}\texecutions={}\tcommits={}", s.executions, s.commits))?;
    }
    Ok(())
}

fn print_chain(cli: &Cli, chain: &IterationChain, out: &mut dyn Write) -> CliResult<()> {
    if cli.json {
        return emit_json(out, chain);
    }
    for (i, body) in chain.bodies.iter().enumerate() {
        line(out, format!("[{}] {}", i + 1, body.replace('\n', " ")))?;
        if let Some(d) = chain.diffs.get(i) {
            for s in &d.removed {
                line(out, format!("  - {}", s.text))?;
            }
            for s in &d.added {
                line(out, format!("  + {}", s.text))?;
            }
        }
    }
    Ok(())
}

fn print_influence(cli: &Cli, inf: &InfluenceAnalysis, out: &mut dyn Write) -> CliResult<()> {
    if cli.json {
        return emit_json(out, inf);
    }
    line(out, format!("{} edges, {} verbatim, {} orphans", inf.edges, inf.verbatim, inf.orphans))?;
    for e in &inf.report.edges {
        let tag = if e.verbatim { "  verbatim" } else { "" };
        line(out, format!("{} -> {}{tag}", e.source_prompt, e.target))?;
    }
    for s in &inf.sources {
        line(
            out,
            format!(
                "source {} by {}: {} lesson prompts, {} authors, {} upvotes",
                s.source_prompt,
                s.author,
                s.lesson_prompts,
                s.influenced_authors.len(),
                s.upvotes
            ),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("hintforge").chain(args.iter().copied()))
    }

    #[test]
    fn journal_is_an_alias_for_state() {
        let cli = parse(&["--journal", "/tmp/j", "log", "stats"]).unwrap();
        assert_eq!(cli.state, PathBuf::from("/tmp/j"));
    }

    #[test]
    fn ingest_needs_exactly_one_source() {
        assert!(parse(&["ingest", "--pool", "p"]).is_err());
        assert!(parse(&["ingest", "--csv", "a.csv", "--url", "http://x", "--pool", "p"]).is_err());
        assert!(parse(&["ingest", "--csv", "a.csv", "--pool", "p"]).is_ok());
    }

    #[test]
    fn zero_k_and_jobs_are_rejected() {
        assert!(parse(&["generate", "--pool", "p", "--prompt-id", "x", "--k", "0"]).is_err());
        assert!(parse(&["--jobs", "0", "log", "stats"]).is_err());
        assert!(parse(&["--jobs", "257", "log", "stats"]).is_err());
        assert!(parse(&["--jobs", "256", "log", "stats"]).is_ok());
    }

    #[test]
    fn usage_errors_exit_two_with_json() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["hintforge", "frobnicate"], &mut out, &mut err), 2);
        let v: serde_json::Value = serde_json::from_slice(&err).unwrap();
        assert_eq!(v["error"]["code"], "USAGE");
        assert_eq!(run(["hintforge", "--help"], &mut out, &mut err), 0);
    }
}
