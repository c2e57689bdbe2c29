//! The `slashparse` command line.
//!
//! Exit codes: 0 on success (partial parses included), 2 for usage and I/O
//! errors, 3 when the chart reports an internal invariant violation.

use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::builtin;
use crate::config::{OutputFormat, Settings};
use crate::export::{to_combined, to_conllu, to_constituency};
use crate::grammar::load_grammar;
use crate::lexicon::{load_closed_class, train_tagger, TaggerModel, DEFAULT_FALLBACK_K};
use crate::pipeline::{Pipeline, PipelineError};
use crate::treebank::{evaluate_corpus, read_conllu, read_conllu_file, EvalOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "slashparse", version, about = "Rule-driven chart parser with slash categories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a tagger model from CoNLL-U files.
    TrainTagger(TrainArgs),
    /// Parse sentences from a file or standard input.
    Parse(ParseArgs),
    /// Score parses against CoNLL-U treebanks.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Number of open-class tags offered for unknown words.
    #[arg(long, default_value_t = DEFAULT_FALLBACK_K)]
    pub fallback_k: usize,
}

/// Flags shared by `parse` and `eval`. Unset flags fall back to the config
/// file, then to the built-in defaults.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Flat key=value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rule file (default: shipped English grammar).
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Tagger model (default: trained on the shipped sample).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Closed-class CSV (default: shipped table).
    #[arg(long)]
    pub closed_class: Option<PathBuf>,
    /// Use only the first N grammar rules.
    #[arg(long)]
    pub rule_limit: Option<usize>,
    #[arg(long)]
    pub max_skip: Option<String>,
    /// Phrases kept per chart cell, or "none".
    #[arg(long)]
    pub beam: Option<String>,
    #[arg(long)]
    pub max_phrases: Option<String>,
    /// Tag hypotheses below this probability are dropped.
    #[arg(long)]
    pub cutoff: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub alternatives: Option<String>,
    /// leftmost or heaviest.
    #[arg(long)]
    pub root: Option<String>,
    /// Tag with the treebank's XPOS column instead of the model.
    #[arg(long)]
    pub gold_tags: bool,
    #[arg(long)]
    pub jobs: Option<String>,
    /// Accepted for manifest compatibility; parsing uses no randomness.
    #[arg(long)]
    pub seedless: bool,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input file (default: standard input).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Read CoNLL-U instead of one whitespace-tokenized sentence per line.
    #[arg(long)]
    pub conllu: bool,
    /// json, conllu or brackets.
    #[arg(long)]
    pub format: Option<String>,
    /// Number of ranked parses per sentence.
    #[arg(long)]
    pub k: Option<String>,
    /// Log each rule application and the final chart to standard error.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    pub report_json: Option<PathBuf>,
    #[arg(long)]
    pub per_sentence: bool,
    /// Include wall-clock seconds in the JSON report.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Invariant(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NoTagger => CliError::Usage(e.to_string()),
            PipelineError::Invariant(v) => CliError::Invariant(v.to_string()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

/// Runs the command line with explicit streams; returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(rendered.as_bytes()) } else { stdout.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::TrainTagger(a) => cmd_train_tagger(&a, stdout),
        Command::Parse(a) => cmd_parse(&a, stdin, stdout, stderr),
        Command::Eval(a) => cmd_eval(&a, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

pub fn cmd_train_tagger(args: &TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut tokens = Vec::new();
    for f in &args.files {
        for s in read_conllu_file(f).map_err(|e| io_error(f, e))? {
            tokens.extend(s.tokens.into_iter().map(|t| (t.form, t.xpos)));
        }
    }
    let model = train_tagger(tokens, args.fallback_k).map_err(usage)?;
    fs::write(&args.output, model.to_text()).map_err(|e| io_error(&args.output, e))?;
    writeln!(stdout, "{} tokens -> {}", model.total_tokens(), args.output.display()).map_err(usage)?;
    Ok(())
}

/// Defaults, then `--config`, then explicit flags.
pub fn resolve_settings(common: &CommonArgs, extra: &[(&str, Option<&String>)]) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        s.apply_file(&text).map_err(usage)?;
    }
    let flags = [
        ("max_skip", common.max_skip.as_ref()),
        ("beam", common.beam.as_ref()),
        ("max_phrases", common.max_phrases.as_ref()),
        ("cutoff", common.cutoff.as_ref()),
        ("lambda", common.lambda.as_ref()),
        ("mu", common.mu.as_ref()),
        ("epsilon", common.epsilon.as_ref()),
        ("sigma", common.sigma.as_ref()),
        ("alpha", common.alpha.as_ref()),
        ("beta", common.beta.as_ref()),
        ("alternatives", common.alternatives.as_ref()),
        ("root", common.root.as_ref()),
        ("jobs", common.jobs.as_ref()),
    ];
    for (key, value) in flags.iter().chain(extra) {
        if let Some(v) = value {
            s.set(key, v).map_err(usage)?;
        }
    }
    if let Some(n) = common.rule_limit {
        s.rule_limit = Some(n);
    }
    if common.gold_tags {
        s.gold_tags = true;
    }
    for (slot, flag) in [(&mut s.grammar, &common.grammar), (&mut s.model, &common.model), (&mut s.closed_class, &common.closed_class)] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    Ok(s)
}

/// Loads the grammar, tagger and closed-class table named by the settings,
/// using the shipped data for anything left unset.
pub fn build_pipeline(s: &Settings) -> Result<Pipeline, CliError> {
    let mut grammar = match &s.grammar {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| io_error(p, e))?;
            load_grammar(BufReader::new(f)).map_err(|e| io_error(p, e))?
        }
        None => builtin::grammar(),
    };
    if let Some(n) = s.rule_limit {
        grammar = grammar.truncated(n);
    }
    let model = match &s.model {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| io_error(p, e))?;
            TaggerModel::read(BufReader::new(f)).map_err(|e| io_error(p, e))?
        }
        None => builtin::model(),
    };
    let closed = match &s.closed_class {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| io_error(p, e))?;
            load_closed_class(BufReader::new(f)).map_err(|e| io_error(p, e))?
        }
        None => builtin::closed_class(),
    };
    let mut pipeline = Pipeline::new(grammar, Some(model), closed);
    pipeline.parse = s.parse.clone();
    pipeline.connect = s.connect.clone();
    Ok(pipeline)
}

struct InputSentence {
    tokens: Vec<String>,
    gold_tags: Option<Vec<String>>,
    comments: Vec<String>,
}

fn read_input(args: &ParseArgs, stdin: &mut dyn Read) -> Result<Vec<InputSentence>, CliError> {
    let text = match &args.input {
        Some(p) => fs::read_to_string(p).map_err(|e| io_error(p, e))?,
        None => {
            let mut t = String::new();
            stdin.read_to_string(&mut t).map_err(|e| usage(format!("stdin: {e}")))?;
            t
        }
    };
    if args.conllu {
        let sentences = read_conllu(text.as_bytes()).map_err(usage)?;
        return Ok(sentences
            .into_iter()
            .map(|s| InputSentence {
                tokens: s.forms(),
                gold_tags: Some(s.xpos()),
                comments: s.sent_id.iter().map(|id| format!("sent_id = {id}")).collect(),
            })
            .collect());
    }
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .map(|tokens| InputSentence { tokens, gold_tags: None, comments: Vec::new() })
        .collect())
}

fn render_sentence(
    index: usize,
    input: &InputSentence,
    pipeline: &Pipeline,
    settings: &Settings,
    trace: bool,
) -> Result<(String, String), CliError> {
    let gold = if settings.gold_tags { input.gold_tags.as_deref() } else { None };
    let parse = pipeline.parse(&input.tokens, gold, settings.k, trace)?;
    let mut out = String::new();
    for (rank, r) in parse.results.iter().enumerate() {
        match settings.format {
            OutputFormat::Json => {
                let line = json!({
                    "sentence": index + 1,
                    "rank": rank + 1,
                    "score": r.score,
                    "budget_exceeded": parse.budget_exceeded,
                    "parse": to_combined(r, &input.tokens),
                });
                out.push_str(&line.to_string());
                out.push('\n');
            }
            OutputFormat::Conllu => {
                let mut comments = input.comments.clone();
                comments.push(format!("sentence = {}", index + 1));
                comments.push(format!("rank = {}", rank + 1));
                comments.push(format!("score = {}", r.score));
                if parse.budget_exceeded {
                    comments.push("budget_exceeded = true".into());
                }
                out.push_str(&to_conllu(&input.tokens, &r.tags, &r.heads, &comments));
            }
            OutputFormat::Brackets => {
                out.push_str(&format!("# sentence {} rank {} score {}\n", index + 1, rank + 1, r.score));
                out.push_str(&to_constituency(r, &input.tokens));
                if !out.ends_with('\n') {
                    out.push('\n');
                }
            }
        }
    }
    let mut log = String::new();
    if trace {
        log.push_str(&format!("# sentence {}: {}\n", index + 1, input.tokens.join(" ")));
        for step in &parse.trace {
            log.push_str(&format!("{step}\n"));
        }
        if let Some(dump) = &parse.chart_dump {
            log.push_str(dump);
            if !log.ends_with('\n') {
                log.push('\n');
            }
        }
    }
    Ok((out, log))
}

pub fn cmd_parse(args: &ParseArgs, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let settings = {
        let mut s = resolve_settings(&args.common, &[("k", args.k.as_ref()), ("format", args.format.as_ref())])?;
        if s.gold_tags && !args.conllu {
            return Err(usage("--gold-tags needs --conllu input"));
        }
        s.format = match &args.format {
            Some(f) => f.parse().map_err(usage)?,
            None => s.format,
        };
        s
    };
    let pipeline = build_pipeline(&settings)?;
    let sentences = read_input(args, stdin)?;
    let render = |(i, s): (usize, &InputSentence)| render_sentence(i, s, &pipeline, &settings, args.trace);
    let rendered: Vec<(String, String)> = if settings.jobs <= 1 {
        sentences.iter().enumerate().map(render).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(settings.jobs).build().map_err(usage)?;
        pool.install(|| sentences.par_iter().enumerate().map(render).collect::<Result<_, _>>())?
    };
    for (out, log) in rendered {
        stdout.write_all(out.as_bytes()).map_err(usage)?;
        stderr.write_all(log.as_bytes()).map_err(usage)?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let settings = resolve_settings(&args.common, &[])?;
    let pipeline = build_pipeline(&settings)?;
    let opts = EvalOptions {
        gold_tags: settings.gold_tags,
        jobs: settings.jobs,
        per_sentence: args.per_sentence,
        timings: args.timings,
    };
    let report = evaluate_corpus(&args.files, &pipeline, &opts)?;
    stdout.write_all(report.table().as_bytes()).map_err(usage)?;
    if let Some(p) = &args.report_json {
        fs::write(p, report.to_json() + "\n").map_err(|e| io_error(p, e))?;
    }
    if let Some(failed) = report.files.iter().find(|f| f.error.is_some()) {
        return Err(usage(format!("{}: {}", failed.file, failed.error.as_deref().unwrap_or_default())));
    }
    Ok(())
}
