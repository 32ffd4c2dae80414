//! Command-line interface for the evaluation toolkit.
//!
//! Three verbs: `validate` checks corpus files against the annotation
//! schema, `eval` scores predictions against ground truth, and `report`
//! re-renders a saved JSON report in another format.
//!
//! Judge settings may come from the environment: `WILDEVAL_JUDGE_URL`,
//! `WILDEVAL_JUDGE_API_KEY`, `WILDEVAL_JUDGE_MODEL`, `WILDEVAL_CACHE_DIR`.
//!
//! Exit codes: 0 success, 1 evaluation failure threshold exceeded,
//! 2 configuration error, 3 I/O or corpus error.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wildeval::entity::MatcherKind;
use wildeval::harness::{
    ingest, render_report, run_eval, EvalConfig, EvalReport, JudgeKind, ReportFormat, Task,
};
use wildeval::schema::{
    parse_record, reliability, validate_record, ParseMode, ParseStatus, Role, Severity,
};
use wildeval::EvalError;

#[derive(Parser)]
#[command(
    name = "wildeval",
    version,
    about = "Evaluate generative vision-language model outputs against ground-truth annotations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a JSONL corpus against the annotation schema
    Validate(ValidateArgs),
    /// Score predictions against ground truth and emit a report
    Eval(Box<EvalArgs>),
    /// Re-render a saved JSON report as markdown or CSV
    Report(ReportArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// JSONL corpus to check
    #[arg(long)]
    input: PathBuf,
    /// Whose invariants to enforce (count caps are errors only for ground truth)
    #[arg(long, value_enum, default_value_t = RoleArg::Prediction)]
    role: RoleArg,
    /// Parse mode; defaults to strict for ground truth, lenient for predictions
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth JSONL corpus (parsed strictly)
    #[arg(long)]
    gt: PathBuf,
    /// Prediction JSONL corpus (parsed leniently)
    #[arg(long)]
    pred: PathBuf,
    /// Comma-separated tasks: objects,humans,logos,ocr,media,nsfw,reliability
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<String>,
    /// Entity matcher backend
    #[arg(long, value_enum, default_value_t = MatcherArg::TokenJaccard)]
    matcher: MatcherArg,
    /// Alias table for the alias_table matcher (one comma-separated group per line)
    #[arg(long)]
    alias_file: Option<PathBuf>,
    /// Matcher score threshold θ
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Coverage threshold τ for OCR block weaving
    #[arg(long, default_value_t = 0.30)]
    tau: f64,
    /// Minimum matched-substring length
    #[arg(long, default_value_t = 2)]
    min_block_len: usize,
    /// Fold case before OCR text matching
    #[arg(long)]
    case_insensitive: bool,
    /// Judge backend
    #[arg(long, value_enum, default_value_t = JudgeArg::Stub)]
    judge: JudgeArg,
    /// Judge endpoint URL (or WILDEVAL_JUDGE_URL)
    #[arg(long)]
    judge_url: Option<String>,
    /// Judge model id (or WILDEVAL_JUDGE_MODEL)
    #[arg(long)]
    judge_model: Option<String>,
    /// Items per judge request
    #[arg(long, default_value_t = 16)]
    judge_batch_size: usize,
    /// Retry attempts for transient judge failures
    #[arg(long, default_value_t = 3)]
    judge_retries: u32,
    /// Judge response cache directory (or WILDEVAL_CACHE_DIR)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Sidecar JSONL with pre-extracted description units
    #[arg(long)]
    kiu_sidecar: Option<PathBuf>,
    /// Worker threads for sample evaluation
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A JSON report produced by `eval --format json`
    #[arg(long)]
    input: PathBuf,
    /// Output format
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Write here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    GroundTruth,
    Prediction,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Lenient,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MatcherArg {
    ExactNormalized,
    TokenJaccard,
    AliasTable,
    Judge,
}

#[derive(Clone, Copy, ValueEnum)]
enum JudgeArg {
    None,
    Stub,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

fn env_fallback(flag: Option<String>, var: &str) -> Option<String> {
    flag.or_else(|| std::env::var(var).ok().filter(|v| !v.is_empty()))
}

fn exit_code(err: &EvalError) -> i32 {
    match err {
        EvalError::Config(_) => 2,
        EvalError::Judge(wildeval::judge::JudgeError::Config(_)) => 2,
        EvalError::NoSamples(_) => 3,
        EvalError::Io { .. } | EvalError::Corpus(_) => 3,
        EvalError::Judge(_) => 1,
    }
}

fn write_output(bytes: &[u8], output: Option<&PathBuf>) -> Result<(), EvalError> {
    match output {
        Some(path) => std::fs::write(path, bytes).map_err(|e| EvalError::io(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| EvalError::io("stdout", e)),
    }
}

fn run_validate(args: &ValidateArgs) -> Result<i32, EvalError> {
    let role = match args.role {
        RoleArg::GroundTruth => Role::GroundTruth,
        RoleArg::Prediction => Role::Prediction,
    };
    let mode = match (args.mode, args.role) {
        (Some(ModeArg::Strict), _) => ParseMode::Strict,
        (Some(ModeArg::Lenient), _) => ParseMode::Lenient,
        (None, RoleArg::GroundTruth) => ParseMode::Strict,
        (None, RoleArg::Prediction) => ParseMode::Lenient,
    };
    let text =
        std::fs::read_to_string(&args.input).map_err(|e| EvalError::io(&args.input, e))?;
    let mut outcomes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let outcome = parse_record(line, mode);
        let violations = outcome
            .record()
            .map(|r| validate_record(r, role))
            .unwrap_or_default();
        let errors: Vec<String> = violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
            .map(|v| v.to_string())
            .collect();
        let status = if !errors.is_empty() {
            "invalid"
        } else {
            match outcome.status() {
                ParseStatus::Valid => "valid",
                ParseStatus::Repaired => "repaired",
                ParseStatus::Invalid => "invalid",
            }
        };
        println!("line {}: {status}", lineno + 1);
        for diag in outcome.diagnostics() {
            println!("  parse: {diag}");
        }
        for v in &violations {
            let tag = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            println!("  {tag}: {v}");
        }
        let folded = if errors.is_empty() {
            outcome
        } else {
            outcome.downgrade_invalid(errors)
        };
        outcomes.push(folded);
    }
    let score = reliability(&outcomes)?;
    println!(
        "{} lines: {} valid, {} repaired, {} invalid (strict rate {:.4}, lenient rate {:.4})",
        score.total, score.valid, score.repaired, score.invalid, score.strict_rate,
        score.lenient_rate
    );
    Ok(0)
}

fn run_eval_command(args: &EvalArgs) -> Result<i32, EvalError> {
    let tasks: BTreeSet<Task> = if args.tasks.is_empty() {
        Task::ALL.into_iter().collect()
    } else {
        args.tasks
            .iter()
            .map(|t| t.parse::<Task>().map_err(EvalError::Config))
            .collect::<Result<_, _>>()?
    };

    let judge_url = env_fallback(args.judge_url.clone(), "WILDEVAL_JUDGE_URL");
    let judge_model = env_fallback(args.judge_model.clone(), "WILDEVAL_JUDGE_MODEL");
    let api_key = env_fallback(None, "WILDEVAL_JUDGE_API_KEY");
    let cache_dir = args.cache_dir.clone().or_else(|| {
        std::env::var("WILDEVAL_CACHE_DIR")
            .ok()
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    });

    let judge_kind = match args.judge {
        JudgeArg::None => JudgeKind::None,
        JudgeArg::Stub => JudgeKind::Stub,
        JudgeArg::Http => {
            let url = judge_url.ok_or_else(|| {
                EvalError::Config("http judge requires --judge-url or WILDEVAL_JUDGE_URL".into())
            })?;
            JudgeKind::Http {
                url,
                api_key,
                model: judge_model.unwrap_or_else(|| "judge".into()),
            }
        }
    };

    let mut config = EvalConfig::default();
    config.tasks = tasks;
    config.matcher.kind = match args.matcher {
        MatcherArg::ExactNormalized => MatcherKind::ExactNormalized,
        MatcherArg::TokenJaccard => MatcherKind::TokenJaccard,
        MatcherArg::AliasTable => MatcherKind::AliasTable,
        MatcherArg::Judge => MatcherKind::Judge,
    };
    config.matcher.threshold = args.theta;
    config.matcher.alias_path = args.alias_file.clone();
    config.match_config.tau = args.tau;
    config.match_config.min_block_len = args.min_block_len;
    config.match_config.case_sensitive = !args.case_insensitive;
    config.judge.kind = judge_kind;
    config.judge.batch_size = args.judge_batch_size;
    config.judge.max_retries = args.judge_retries;
    config.judge.cache_dir = cache_dir;
    config.parallelism = args.parallelism;
    config.kiu_sidecar = args.kiu_sidecar.clone();
    config.validate()?;

    eprintln!("config digest: {}", config.digest());

    let ingested = ingest(&args.gt, &args.pred)?;
    for warning in &ingested.warnings {
        eprintln!("warning: {warning}");
    }
    let report = run_eval(&config, &ingested)?;
    let bytes = render_report(&report, args.format.into())?;
    write_output(&bytes, args.output.as_ref())?;
    if report.run_failed {
        eprintln!(
            "run failed: {} of {} samples hit judge errors",
            report.judge_failed_samples.len(),
            report.per_sample.len()
        );
        return Ok(1);
    }
    Ok(0)
}

fn run_report(args: &ReportArgs) -> Result<i32, EvalError> {
    let text =
        std::fs::read_to_string(&args.input).map_err(|e| EvalError::io(&args.input, e))?;
    let report: EvalReport = serde_json::from_str(&text)
        .map_err(|e| EvalError::Corpus(format!("{}: not a report: {e}", args.input.display())))?;
    let bytes = render_report(&report, args.format.into())?;
    write_output(&bytes, args.output.as_ref())?;
    Ok(0)
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(args) => run_validate(args),
        Command::Eval(args) => run_eval_command(args),
        Command::Report(args) => run_report(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}
