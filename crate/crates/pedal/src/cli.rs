//! Command line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pedal_core::metrics::ter_text;
use pedal_core::simulator::{ComparisonReport, CurvePoint, Prepared, RunOutcome};
use pedal_core::synthetic::{self, SyntheticConfig};
use pedal_core::{Corpus, EmbeddingTable, Policy, RunConfig};
use serde::Deserialize;

use crate::config::ServiceConfig;
use crate::embeddings::read_embeddings;
use crate::error::{Error, IoContext, Result};
use crate::ingest::{ingest_path, write_corpus, IngestOptions, Schema};
use crate::journal::read_journal;
use crate::output;
use crate::plot::render_quality_plot;
use crate::service::{self, AppState, Clock};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pedal", version, about = "Active-learning post-editing engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a TSV corpus and report what was ingested.
    Ingest(IngestCmd),
    /// Score hypothesis/reference pairs (two-column TSV) with TER.
    Score(ScoreCmd),
    /// Run one simulated post-editing session.
    Simulate(SimulateCmd),
    /// Run every config in a directory and align their checkpoint tables.
    Compare(CompareCmd),
    /// Serve the live post-editing API.
    Serve(ServeCmd),
    /// Rebuild the model from a journal.
    Replay(ReplayCmd),
    /// Render quality-versus-effort plots from emitted CSVs.
    Report(ReportCmd),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus TSV file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated column roles: source, hypothesis, post_edit,
    /// reference, origin, group, source_lang, target_lang, ignore.
    #[arg(long, default_value = "source,hypothesis,post_edit,reference")]
    pub schema: String,
    /// Source language when the schema has no source_lang column.
    #[arg(long, default_value = "de")]
    pub source_lang: String,
    /// Target language when the schema has no target_lang column.
    #[arg(long, default_value = "en")]
    pub target_lang: String,
    /// The first line is a header.
    #[arg(long)]
    pub header: bool,
    /// Skip malformed rows instead of aborting.
    #[arg(long)]
    pub skip_malformed: bool,
    /// Per-segment embedding file (`id side v1 ... vd` per line).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

impl CorpusArgs {
    fn options(&self) -> Result<IngestOptions> {
        Ok(IngestOptions {
            schema: self.schema.parse::<Schema>()?,
            source_lang: self.source_lang.clone(),
            target_lang: self.target_lang.clone(),
            has_header: self.header,
            skip_malformed: self.skip_malformed,
        })
    }

    fn embeddings(&self) -> Result<Option<EmbeddingTable>> {
        self.embeddings.as_deref().map(read_embeddings).transpose()
    }
}

#[derive(Debug, Args)]
pub struct IngestCmd {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Write an ingestion summary (ingest.json) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreCmd {
    /// TSV with `hypothesis<TAB>reference` per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Write scores.tsv here instead of printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Scheduler and learner flags shared by simulate and replay. Unset flags
/// keep the value from `--config` or the built-in default.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// estimator | random | oracle [default: estimator]
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<Policy>,
    /// Seed for the random policy and warmup draws [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Effort checkpoints in percent [default: 20,30,40,50,60,70,80]
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    /// Stop after this percentage of the corpus [default: none]
    #[arg(long)]
    pub effort_budget: Option<f64>,
    /// Post-edits served at random before the estimator ranks [default: 25]
    #[arg(long)]
    pub warmup: Option<u64>,
    /// Discrepancy above which a post-edit is flagged [default: 0.35]
    #[arg(long)]
    pub sanity_threshold: Option<f64>,
    /// Close pending segments predicted below this TER [default: off]
    #[arg(long)]
    pub auto_close: Option<f64>,
    /// Rescore the queue every k training steps [default: 1]
    #[arg(long)]
    pub rescore_interval: Option<u64>,
    /// AdaGrad step size [default: 0.1]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Seeds averaged for the random baseline in comparisons [default: 10]
    #[arg(long)]
    pub random_seeds: Option<usize>,
}

fn parse_policy(s: &str) -> std::result::Result<Policy, String> {
    Policy::parse(s).ok_or_else(|| format!("unknown policy {s:?} (estimator, random, oracle)"))
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).at(path)?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.policy {
            c.policy = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.checkpoints {
            c.checkpoints = v.clone();
        }
        if self.effort_budget.is_some() {
            c.effort_budget = self.effort_budget;
        }
        if let Some(v) = self.warmup {
            c.warmup = v;
        }
        if let Some(v) = self.sanity_threshold {
            c.sanity_threshold = v;
        }
        if self.auto_close.is_some() {
            c.auto_close_threshold = self.auto_close;
        }
        if let Some(v) = self.rescore_interval {
            c.rescore_interval = v;
        }
        if let Some(v) = self.learning_rate {
            c.hyperparams.learning_rate = v;
        }
        if let Some(v) = self.random_seeds {
            c.random_seeds = v;
        }
        c.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Generate a synthetic corpus with this many segments instead of
    /// reading one.
    #[arg(long, conflicts_with = "corpus")]
    pub synthetic: Option<usize>,
    /// Seed of the synthetic corpus generator.
    #[arg(long, default_value_t = 1)]
    pub synthetic_seed: u64,
    #[command(flatten)]
    pub run: RunArgs,
    /// Also render quality.svg.
    #[arg(long)]
    pub plot: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    /// Directory of `*.toml` run configs sharing one corpus.
    #[arg(long)]
    pub config_dir: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads [default: available cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also render quality.svg.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct ServeCmd {
    /// Service config file (TOML); environment variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Listen address [default: 127.0.0.1]
    #[arg(long)]
    pub host: Option<String>,
    /// Listen port, 0 for any [default: 8080]
    #[arg(long)]
    pub port: Option<u16>,
    /// Corpus loaded at startup [default: none, wait for POST /ingest]
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory for the journal and uploads [default: pedal-data]
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayCmd {
    /// Journal to replay.
    #[arg(long)]
    pub journal: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Fail (exit 2) unless the rebuilt snapshot equals this file byte for
    /// byte.
    #[arg(long)]
    pub expect_snapshot: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportCmd {
    /// Directories written by simulate or compare.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Plot title.
    #[arg(long, default_value = "Corpus quality versus post-editing effort")]
    pub title: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e @ (Error::Config(_) | Error::Schema(_))) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(c) => ingest(c),
        Command::Score(c) => score(c),
        Command::Simulate(c) => simulate(c),
        Command::Compare(c) => compare(c),
        Command::Serve(c) => serve(c),
        Command::Replay(c) => replay(c),
        Command::Report(c) => report(c),
    }
}

fn require_corpus(args: &CorpusArgs) -> Result<&Path> {
    args.corpus
        .as_deref()
        .ok_or_else(|| Error::Config("--corpus is required".into()))
}

fn ingest(cmd: IngestCmd) -> Result<()> {
    let path = require_corpus(&cmd.corpus)?;
    let opts = cmd.corpus.options()?;
    let got = ingest_path(path, &opts)?;
    if let Some(table) = cmd.corpus.embeddings()? {
        table.check_covers(&got.corpus)?;
    }
    let langs: Vec<String> = got.corpus.target_languages().iter().map(|l| l.to_string()).collect();
    let hypotheses: usize = got.corpus.segments().iter().map(|s| s.hypotheses.len()).sum();
    let fingerprint = pedal_core::simulator::corpus_fingerprint(&got.corpus);
    println!(
        "ingested {} segments ({} hypotheses) from {} rows, {} skipped; target languages {}; fingerprint {}",
        got.corpus.len(),
        hypotheses,
        got.rows,
        got.skipped.len(),
        langs.join(","),
        fingerprint
    );
    for s in &got.skipped {
        println!("skipped line {}: {}", s.line, s.reason);
    }
    if let Some(out) = cmd.out {
        fs::create_dir_all(&out).at(&out)?;
        let summary = serde_json::json!({
            "corpus": path.display().to_string(),
            "schema": opts.schema.to_string(),
            "segments": got.corpus.len(),
            "hypotheses": hypotheses,
            "rows": got.rows,
            "skipped": got.skipped,
            "target_languages": langs,
            "with_reference": got.corpus.segments().iter().filter(|s| s.reference.is_some()).count(),
            "with_gold_post_edit": got.corpus.segments().iter()
                .filter(|s| s.hypotheses.iter().all(|h| h.gold_post_edit.is_some())).count(),
            "corpus_fingerprint": fingerprint,
        });
        let path = out.join("ingest.json");
        fs::write(&path, format!("{summary:#}\n")).at(&path)?;
    }
    Ok(())
}

fn score(cmd: ScoreCmd) -> Result<()> {
    let text = fs::read_to_string(&cmd.input).at(&cmd.input)?;
    let name = cmd.input.display().to_string();
    let mut out = String::new();
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row_err = |message: String| Error::Row {
            path: name.clone(),
            line: i as u64 + 1,
            message,
        };
        let (hyp, reference) = line
            .split_once('\t')
            .filter(|(_, r)| !r.contains('\t'))
            .ok_or_else(|| row_err("expected two tab-separated columns".into()))?;
        let t = ter_text(hyp, reference).map_err(|e| row_err(e.to_string()))?;
        out.push_str(&format!("{:.6}\n", t.score));
        total += t.score;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput(name));
    }
    out.push_str(&format!("mean\t{:.6}\n", total / n as f64));
    match cmd.out {
        Some(dir) => {
            fs::create_dir_all(&dir).at(&dir)?;
            let path = dir.join("scores.tsv");
            fs::write(&path, out).at(&path)?;
        }
        None => print!("{out}"),
    }
    Ok(())
}

/// Loads the corpus named by the flags, or generates the synthetic one.
fn load_corpus(args: &CorpusArgs, synthetic: Option<(usize, u64)>) -> Result<(Corpus, String)> {
    match synthetic {
        Some((segments, seed)) => {
            let cfg = SyntheticConfig {
                segments,
                seed,
                ..SyntheticConfig::default()
            };
            Ok((synthetic::generate(&cfg)?, cfg.describe()))
        }
        None => {
            let path = require_corpus(args)?;
            let got = ingest_path(path, &args.options()?)?;
            Ok((got.corpus, path.display().to_string()))
        }
    }
}

fn simulate(cmd: SimulateCmd) -> Result<()> {
    let mut config = cmd.run.resolve()?;
    let (corpus, label) = load_corpus(&cmd.corpus, cmd.synthetic.map(|n| (n, cmd.synthetic_seed)))?;
    config.corpus = label.clone();
    let prepared = Prepared::new(&corpus, cmd.corpus.embeddings()?)?;
    let outcome = prepared.run(&config)?;
    output::emit_run(&cmd.out, &label, &outcome)?;
    if cmd.synthetic.is_some() {
        let path = cmd.out.join("corpus.tsv");
        let file = fs::File::create(&path).at(&path)?;
        let schema = write_corpus(std::io::BufWriter::new(file), &corpus)?;
        println!("wrote {} (schema {schema})", path.display());
    }
    if cmd.plot {
        let series = vec![(run_label(&outcome.report.config), points(&outcome.report.curve))];
        render_quality_plot(&cmd.out.join("quality.svg"), &label, &series)?;
    }
    print_run_summary(&outcome);
    Ok(())
}

fn run_label(c: &RunConfig) -> String {
    match c.policy {
        Policy::Random => format!("random (seed {})", c.seed),
        p => p.name().to_string(),
    }
}

fn points(curve: &[CurvePoint]) -> Vec<(f64, f64)> {
    curve.iter().map(|p| (p.pct_post_edited, p.quality)).collect()
}

fn print_run_summary(outcome: &RunOutcome) {
    let r = &outcome.report;
    println!(
        "{} over {} segments: initial quality {:.2}, final {:.2}, {} sanity flags, {} auto-closed",
        run_label(&r.config),
        r.corpus_size,
        r.initial_quality,
        r.final_quality,
        r.sanity_flags,
        r.auto_closed
    );
    let cells: Vec<String> = r
        .checkpoints
        .iter()
        .map(|c| match c.quality {
            Some(q) => format!("{}: {q:.2}", output::pct_label(c.pct)),
            None => format!("{}: n/a", output::pct_label(c.pct)),
        })
        .collect();
    println!("{}", cells.join("  "));
}

/// One file of a `compare --config-dir` directory: a run config plus where
/// its corpus comes from.
#[derive(Debug, Clone, Deserialize)]
struct CompareEntry {
    #[serde(flatten)]
    run: RunConfig,
    /// Generate the corpus instead of reading `corpus`.
    synthetic: Option<SyntheticConfig>,
    schema: Option<String>,
    source_lang: Option<String>,
    target_lang: Option<String>,
    #[serde(default)]
    has_header: bool,
    #[serde(default)]
    skip_malformed: bool,
    embeddings: Option<PathBuf>,
}

fn compare(cmd: CompareCmd) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(&cmd.config_dir)
        .at(&cmd.config_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.len() < 2 {
        return Err(Error::Config(format!(
            "{} holds {} run configs; a comparison needs at least two",
            cmd.config_dir.display(),
            files.len()
        )));
    }
    let mut entries = Vec::new();
    for path in &files {
        let text = fs::read_to_string(path).at(path)?;
        let entry: CompareEntry = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        entry
            .run
            .validate()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        entries.push(entry);
    }

    // every entry must describe the same corpus; the first one loads it
    let first = &entries[0];
    let resolve = |p: &str| cmd.config_dir.join(p);
    let (corpus, label) = match &first.synthetic {
        Some(s) => (synthetic::generate(s)?, s.describe()),
        None => {
            if first.run.corpus.is_empty() {
                return Err(Error::Config(format!("{}: no corpus given", files[0].display())));
            }
            let defaults = IngestOptions::default();
            let opts = IngestOptions {
                schema: first.schema.as_deref().map_or(Ok(defaults.schema), str::parse)?,
                source_lang: first.source_lang.clone().unwrap_or(defaults.source_lang),
                target_lang: first.target_lang.clone().unwrap_or(defaults.target_lang),
                has_header: first.has_header,
                skip_malformed: first.skip_malformed,
            };
            let path = resolve(&first.run.corpus);
            (ingest_path(&path, &opts)?.corpus, first.run.corpus.clone())
        }
    };
    for (path, e) in files.iter().zip(&entries) {
        let same = match (&e.synthetic, &first.synthetic) {
            (Some(a), Some(b)) => a == b,
            (None, None) => e.run.corpus == first.run.corpus,
            _ => false,
        };
        if !same || e.embeddings != first.embeddings {
            return Err(Error::Config(format!("{} uses a different corpus than {}", path.display(), files[0].display())));
        }
    }
    let embeddings = first
        .embeddings
        .as_deref()
        .map(|p| read_embeddings(&resolve(&p.to_string_lossy())))
        .transpose()?;
    let prepared = Prepared::new(&corpus, embeddings)?;

    let mut jobs: Vec<(usize, RunConfig)> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let mut c = e.run.clone();
        c.corpus = label.clone();
        let seeds = if c.policy == Policy::Random { c.random_seeds } else { 1 };
        for k in 0..seeds as u64 {
            let mut run = c.clone();
            run.seed = c.seed + k;
            jobs.push((i, run));
        }
    }
    let workers = cmd
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let outcomes = run_parallel(&prepared, &jobs, workers)?;

    let mut groups: Vec<Vec<pedal_core::RunReport>> = vec![Vec::new(); entries.len()];
    let mut curves: Vec<Vec<Vec<CurvePoint>>> = vec![Vec::new(); entries.len()];
    for ((i, _), outcome) in jobs.iter().zip(outcomes) {
        curves[*i].push(outcome.report.curve.clone());
        groups[*i].push(outcome.report);
    }
    let prequential: Vec<(String, Option<pedal_core::EvalStats>)> = files
        .iter()
        .zip(&groups)
        .map(|(f, g)| (stem(f), g[0].prequential))
        .collect();
    let cmp = ComparisonReport::from_runs(groups)?;
    let mean_curves: Vec<(String, Vec<CurvePoint>)> = cmp
        .rows
        .iter()
        .zip(&curves)
        .map(|(row, runs)| {
            let refs: Vec<&[CurvePoint]> = runs.iter().map(Vec::as_slice).collect();
            (row.label.clone(), output::mean_curve(&refs))
        })
        .collect();
    output::emit_comparison(&cmd.out, &cmp, &mean_curves)?;
    let path = cmd.out.join(output::PREQUENTIAL_FILE);
    output::write_prequential(fs::File::create(&path).at(&path)?, &prequential)?;
    if cmd.plot {
        let series: Vec<(String, Vec<(f64, f64)>)> = mean_curves.iter().map(|(l, c)| (l.clone(), points(c))).collect();
        render_quality_plot(&cmd.out.join("quality.svg"), &label, &series)?;
    }
    print!("{}", output::comparison_markdown(&cmp));
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Runs independent simulations on `workers` threads; results keep the
/// order of `jobs`.
fn run_parallel(prepared: &Prepared<'_>, jobs: &[(usize, RunConfig)], workers: usize) -> Result<Vec<RunOutcome>> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<RunOutcome>>> = (0..jobs.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some((_, config)) = jobs.get(k) else { break };
                let outcome = prepared.run(config).map_err(Error::from);
                results.lock().unwrap_or_else(|p| p.into_inner())[k] = Some(outcome);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every job ran")).collect()
}

fn serve(cmd: ServeCmd) -> Result<()> {
    let mut config = match &cmd.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    if let Some(v) = cmd.host {
        config.host = v;
    }
    if let Some(v) = cmd.port {
        config.port = v;
    }
    if let Some(v) = cmd.corpus {
        config.corpus = Some(v);
    }
    if let Some(v) = cmd.data_dir {
        config.data_dir = v;
    }
    let state = AppState::new(config, Clock::system())?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("cannot start runtime: {e}")))?;
    let result = runtime.block_on(service::serve(state));
    std::io::stdout().flush().ok();
    result
}

fn replay(cmd: ReplayCmd) -> Result<()> {
    let config = cmd.run.resolve()?;
    let events = read_journal(&cmd.journal)?;
    let path = require_corpus(&cmd.corpus)?;
    let corpus = ingest_path(path, &cmd.corpus.options()?)?.corpus;
    let featurizer = pedal_core::Featurizer::for_corpus(&corpus, cmd.corpus.embeddings()?)?;
    let mut scheduler = pedal_core::Scheduler::new(&corpus, &featurizer, config.scheduler_config())?;
    scheduler.replay(&events)?;
    let snapshot = scheduler.learner().model.snapshot();

    fs::create_dir_all(&cmd.out).at(&cmd.out)?;
    let snap_path = cmd.out.join(output::SNAPSHOT_FILE);
    fs::write(&snap_path, &snapshot).at(&snap_path)?;
    let pre_path = cmd.out.join(output::PREQUENTIAL_FILE);
    output::write_prequential(
        fs::File::create(&pre_path).at(&pre_path)?,
        &[(path.display().to_string(), scheduler.prequential_stats())],
    )?;
    let counts = scheduler.counts();
    let summary = serde_json::json!({
        "journal": cmd.journal.display().to_string(),
        "events": events.len(),
        "last_seq": scheduler.last_seq(),
        "corpus_fingerprint": pedal_core::simulator::corpus_fingerprint(&corpus),
        "corpus_quality": scheduler.corpus_quality(),
        "post_edited": counts.post_edited,
        "auto_closed": counts.auto_closed,
        "pending": counts.pending,
        "sanity_flags": scheduler.flags().len(),
        "prequential": scheduler.prequential_stats(),
    });
    let sum_path = cmd.out.join("replay.json");
    fs::write(&sum_path, format!("{summary:#}\n")).at(&sum_path)?;
    println!("replayed {} events; model step {}", events.len(), scheduler.learner().model.step());

    if let Some(expected) = &cmd.expect_snapshot {
        let archived = fs::read_to_string(expected).at(expected)?;
        if archived != snapshot {
            return Err(Error::Format(format!(
                "rebuilt snapshot differs from {}",
                expected.display()
            )));
        }
        println!("snapshot matches {}", expected.display());
    }
    Ok(())
}

fn report(cmd: ReportCmd) -> Result<()> {
    let mut series = Vec::new();
    for dir in &cmd.input {
        let cmp = dir.join(output::COMPARISON_CURVES_FILE);
        let single = dir.join(output::CURVE_FILE);
        if cmp.exists() {
            series.extend(output::read_series(fs::File::open(&cmp).at(&cmp)?)?);
        } else if single.exists() {
            let curve = output::read_curve(fs::File::open(&single).at(&single)?)?;
            let label = fs::read_to_string(dir.join(output::REPORT_FILE))
                .ok()
                .and_then(|t| serde_json::from_str::<pedal_core::RunReport>(&t).ok())
                .map_or_else(|| dir.display().to_string(), |r| run_label(&r.config));
            series.push((label, points(&curve)));
        } else {
            return Err(Error::Format(format!(
                "{} has neither {} nor {}",
                dir.display(),
                output::COMPARISON_CURVES_FILE,
                output::CURVE_FILE
            )));
        }
    }
    fs::create_dir_all(&cmd.out).at(&cmd.out)?;
    let path = cmd.out.join("quality.svg");
    render_quality_plot(&path, &cmd.title, &series)?;
    println!("wrote {}", path.display());
    Ok(())
}
