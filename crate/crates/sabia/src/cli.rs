//! The `sabia` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training or
//! runtime error. Every command writes `effective_config.txt` into the
//! output directory alongside its artifacts.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sabia_core::annotate::{
    agreement_report, load_annotations, majority_vote, merge_adjudication, read_adjudication, write_unresolved,
    Resolution,
};
use sabia_core::corpus::{compute_stats, generate_synthetic, load_corpus, save_corpus, stratified_split};
use sabia_core::evaluate::{compare, evaluate, write_report_artifacts, Averaging, MetricsReport};
use sabia_core::ingest::collect;
use sabia_core::{AnnotatedPost, Corpus, CorpusFormat, Label};
use sabia_nn::sabia::TokenScore;

use crate::config::RunConfig;
use crate::error::{Failure, Outcome};
use crate::pipeline::{train_model, Prediction, TrainedModel};

/// Opioid-behavior classification of social-media posts.
#[derive(Debug, Parser)]
#[command(name = "sabia", version, about, propagate_version = true)]
struct Cli {
    /// Seed for every random choice (splits, synthesis, initialization).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key = value run configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Lexicon CSV (surface,canonical,kind); defaults to the bundled one.
    #[arg(long, global = true, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Override any configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collect keyword-filtered posts from a dump fixture or the live API.
    Ingest(IngestArgs),
    /// Export the effective lexicon and show how texts normalize.
    Lexicon(LexiconArgs),
    /// Drop non-English posts and write cleaned tokens.
    Clean(InputArg),
    /// Corpus statistics as JSON.
    Stats(InputArg),
    /// Stratified train/test split.
    Split(SplitArgs),
    /// Generate a seeded synthetic labeled corpus.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus training metrics.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Eval(EvalArgs),
    /// Label every post of a corpus.
    Predict(PredictArgs),
    /// Rank metric reports and compute relative improvement.
    Compare(CompareArgs),
    /// Pairwise Cohen's kappa for an annotation CSV.
    Kappa(AnnotationArg),
    /// Majority-vote labels, export disagreements, merge adjudication.
    Resolve(ResolveArgs),
    /// Most influential tokens of a transformer checkpoint.
    Explain(ExplainArgs),
}

#[derive(Debug, Args)]
struct InputArg {
    /// Corpus file (JSONL or CSV).
    input: PathBuf,
}

#[derive(Debug, Args)]
struct AnnotationArg {
    /// Annotation CSV: id,annotator_1,...,annotator_k
    annotations: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Local JSONL dump to replay instead of calling the API.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Comma-separated subreddit names.
    #[arg(long)]
    subreddits: Option<String>,
    /// Window start, epoch seconds (inclusive).
    #[arg(long)]
    start: Option<i64>,
    /// Window end, epoch seconds (inclusive).
    #[arg(long)]
    end: Option<i64>,
    /// Requests per minute in live mode.
    #[arg(long)]
    rate_limit: Option<u32>,
    /// Listing pages per subreddit in live mode.
    #[arg(long)]
    max_pages: Option<usize>,
}

#[derive(Debug, Args)]
struct LexiconArgs {
    /// Text to normalize and match; repeatable.
    #[arg(long = "match", value_name = "TEXT")]
    texts: Vec<String>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Labeled corpus to split.
    input: PathBuf,
    /// Share of each class kept for training.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Shuffle the whole corpus instead of splitting per class.
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Posts per class.
    #[arg(long)]
    per_class: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// logreg, gboost, forest, tree, svm, majority, cnn, bilstm, encoder or sabia
    #[arg(long)]
    model: Option<String>,
    /// Labeled training corpus.
    input: PathBuf,
    /// Labeled corpus scored after every epoch (neural models).
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Encoder for sabia/encoder: `tiny`, a directory, or a cached hub id.
    #[arg(long)]
    encoder: Option<String>,
    /// Passes over the training data.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint directory; defaults to `<out-dir>/model`.
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Labeled test corpus.
    input: PathBuf,
    /// Also write an SVG confusion heatmap.
    #[arg(long)]
    heatmap: bool,
    /// macro or weighted
    #[arg(long)]
    averaging: Option<String>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Checkpoint directory; defaults to `<out-dir>/model`.
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Corpus to label.
    input: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Metric reports as NAME=PATH (or PATH, named after its directory).
    #[arg(required = true)]
    reports: Vec<String>,
    /// Reference model for the improvement figure.
    #[arg(long)]
    baseline: Option<String>,
    /// macro or weighted
    #[arg(long)]
    averaging: Option<String>,
}

#[derive(Debug, Args)]
struct ResolveArgs {
    /// Annotation CSV: id,annotator_1,...,annotator_k
    annotations: PathBuf,
    /// id,label file settling disagreements.
    #[arg(long)]
    adjudication: Option<PathBuf>,
    /// Unlabeled corpus to attach the resolved labels to.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    /// Checkpoint directory; defaults to `<out-dir>/model`.
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Tokens to report per text.
    #[arg(short, long)]
    k: Option<usize>,
    /// Corpus whose posts to explain.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Texts to explain.
    texts: Vec<String>,
}

/// Parse `argv` (program name first), run the command, return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.quiet);
    let invocation = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    match execute(cli, &invocation) {
        Ok(()) => 0,
        Err(f) => {
            if log::log_enabled!(log::Level::Error) {
                log::error!("{f}");
            } else {
                eprintln!("error: {f}");
            }
            f.exit_code()
        }
    }
}

fn init_logging(quiet: bool) {
    let default = if quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format(|buf, record| {
            writeln!(buf, "{} {:<5} {}", buf.timestamp_millis(), record.level(), record.args())
        })
        .try_init();
}

/// Context shared by every command.
struct Run {
    cfg: RunConfig,
    out: PathBuf,
    cwd: PathBuf,
}

impl Run {
    fn set(&mut self, key: &str, value: impl ToString) -> Outcome<()> {
        self.cfg
            .set(key, &value.to_string(), &self.cwd)
            .map_err(|m| Failure::Usage(format!("command line: {m}")))
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn load(&self, path: &Path) -> Outcome<Corpus> {
        let format = self.cfg.corpus_format.unwrap_or_else(|| CorpusFormat::from_path(path));
        load_corpus(path, format).map_err(|e| Failure::from(e).at(path))
    }

    fn load_labeled(&self, path: &Path) -> Outcome<Corpus> {
        let corpus = self.load(path)?;
        corpus.labels().map_err(|e| Failure::from(e).at(path))?;
        if corpus.is_empty() {
            return Err(Failure::Data(format!("{}: corpus is empty", path.display())));
        }
        Ok(corpus)
    }

    fn save(&self, corpus: &Corpus, name: &str) -> Outcome<PathBuf> {
        let path = self.out_file(name);
        save_corpus(corpus, &path, CorpusFormat::Jsonl).map_err(|e| runtime(&path, e))?;
        log::info!("wrote {} ({} posts)", path.display(), corpus.len());
        Ok(path)
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Outcome<PathBuf> {
        let path = self.out_file(name);
        std::fs::write(&path, contents).map_err(|e| runtime(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Outcome<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        self.write(name, text + "\n")
    }

    fn write_jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Outcome<PathBuf> {
        let mut text = String::new();
        for r in rows {
            text.push_str(&serde_json::to_string(r).map_err(|e| Failure::Runtime(e.to_string()))?);
            text.push('\n');
        }
        self.write(name, text)
    }

    fn model_dir(&self, given: Option<PathBuf>) -> PathBuf {
        given.unwrap_or_else(|| self.out_file("model"))
    }
}

fn runtime(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn execute(cli: Cli, invocation: &str) -> Outcome<()> {
    let cwd = std::env::current_dir().map_err(|e| Failure::Runtime(e.to_string()))?;
    let cfg = match &cli.config {
        Some(path) if !path.is_file() => {
            return Err(Failure::Data(format!("{}: config file not found", path.display())))
        }
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut run = Run {
        cfg,
        out: cli.out_dir.clone(),
        cwd,
    };
    if let Some(seed) = cli.seed {
        run.set("seed", seed)?;
    }
    if let Some(lex) = &cli.lexicon {
        run.set("lexicon", lex.display())?;
    }
    for s in &cli.set {
        run.cfg.set_override(s)?;
    }
    apply_flags(&mut run, &cli.command)?;
    std::fs::create_dir_all(&run.out).map_err(|e| runtime(&run.out, e))?;
    run.cfg
        .write_snapshot(&run.out, &[invocation.to_string()])
        .map_err(|e| runtime(&run.out, e))?;
    match cli.command {
        Command::Ingest(_) => ingest(&run),
        Command::Lexicon(a) => lexicon(&run, &a),
        Command::Clean(a) => clean(&run, &a.input),
        Command::Stats(a) => stats(&run, &a.input),
        Command::Split(a) => split(&run, &a.input),
        Command::Synth(_) => synth(&run),
        Command::Train(a) => train(&run, &a),
        Command::Eval(a) => eval(&run, a),
        Command::Predict(a) => predict(&run, a),
        Command::Compare(a) => compare_reports(&run, &a),
        Command::Kappa(a) => kappa(&run, &a.annotations),
        Command::Resolve(a) => resolve(&run, &a),
        Command::Explain(a) => explain(&run, a),
    }
}

/// Fold subcommand flags into the configuration so the snapshot records them.
fn apply_flags(run: &mut Run, command: &Command) -> Outcome<()> {
    match command {
        Command::Ingest(a) => {
            if let Some(f) = &a.fixture {
                run.set("ingest.fixture", f.display())?;
            }
            if let Some(s) = &a.subreddits {
                run.set("ingest.subreddits", s)?;
            }
            if let Some(v) = a.start {
                run.set("ingest.window_start", v)?;
            }
            if let Some(v) = a.end {
                run.set("ingest.window_end", v)?;
            }
            if let Some(v) = a.rate_limit {
                run.set("ingest.rate_limit", v)?;
            }
            if let Some(v) = a.max_pages {
                run.set("ingest.max_pages", v)?;
            }
        }
        Command::Split(a) => {
            if let Some(f) = a.train_fraction {
                run.set("split.train_fraction", f)?;
            }
            if a.no_stratify {
                run.set("split.stratified", false)?;
            }
        }
        Command::Synth(a) => {
            if let Some(n) = a.per_class {
                run.set("synth.per_class", n)?;
            }
        }
        Command::Train(a) => {
            if let Some(m) = &a.model {
                run.set("model", m)?;
            }
            let neural = matches!(run.cfg.model.as_str(), "cnn" | "bilstm");
            let prefix = if neural { "neural" } else { "sabia" };
            if let Some(e) = &a.encoder {
                run.set("sabia.encoder", e)?;
            }
            if let Some(v) = a.epochs {
                run.set(&format!("{prefix}.epochs"), v)?;
            }
            if let Some(v) = a.learning_rate {
                run.set(&format!("{prefix}.learning_rate"), v)?;
            }
            if let Some(v) = a.batch_size {
                run.set(&format!("{prefix}.batch_size"), v)?;
            }
        }
        Command::Eval(a) => {
            if a.heatmap {
                run.set("eval.heatmap", true)?;
            }
            if let Some(v) = &a.averaging {
                run.set("eval.averaging", v)?;
            }
        }
        Command::Compare(a) => {
            if let Some(v) = &a.averaging {
                run.set("eval.averaging", v)?;
            }
        }
        Command::Explain(a) => {
            if let Some(k) = a.k {
                run.set("explain.k", k)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn ingest(run: &Run) -> Outcome<()> {
    let lexicon = run.cfg.load_lexicon()?;
    let config = &run.cfg.ingest;
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let corpus = collect(config, &lexicon)?;
    run.save(&corpus, "raw.jsonl")?;
    println!("collected {} posts", corpus.len());
    Ok(())
}

fn lexicon(run: &Run, args: &LexiconArgs) -> Outcome<()> {
    let lexicon = run.cfg.load_lexicon()?;
    for w in lexicon.warnings() {
        log::warn!("{w}");
    }
    run.write("lexicon.csv", lexicon.to_csv())?;
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for e in lexicon.entries() {
        *by_kind.entry(e.kind.as_str()).or_default() += 1;
    }
    println!("{} entries", lexicon.len());
    for (kind, n) in by_kind {
        println!("  {kind}: {n}");
    }
    for text in &args.texts {
        let hits: Vec<String> = lexicon
            .match_keywords(text)
            .iter()
            .map(|m| format!("{} ({}) at {}", m.surface, m.kind.as_str(), m.offset))
            .collect();
        println!("{text}\n  normalized: {}\n  matches: {}", lexicon.normalize_text(text), hits.join("; "));
    }
    Ok(())
}

#[derive(Serialize)]
struct TokenRow<'a> {
    id: &'a str,
    tokens: Vec<String>,
}

fn clean(run: &Run, input: &Path) -> Outcome<()> {
    let corpus = run.load(input)?;
    let pre = run.cfg.preprocessor(run.cfg.load_lexicon()?);
    let mut kept = Corpus::default();
    let mut rows = Vec::new();
    let (mut non_english, mut emptied) = (0, 0);
    for post in corpus.iter() {
        if !pre.is_english(&post.text) {
            non_english += 1;
            continue;
        }
        let tokens = pre.clean(&post.text);
        if tokens.is_empty() {
            emptied += 1;
            continue;
        }
        rows.push(TokenRow { id: &post.id, tokens });
        kept.push(post.clone())?;
    }
    log::info!("dropped {non_english} non-English and {emptied} empty-after-cleaning posts");
    run.save(&kept, "clean.jsonl")?;
    run.write_jsonl("tokens.jsonl", &rows)?;
    println!("kept {} of {} posts", kept.len(), corpus.len());
    Ok(())
}

fn stats(run: &Run, input: &Path) -> Outcome<()> {
    let corpus = run.load(input)?;
    let stats = compute_stats(&corpus);
    run.write_json("stats.json", &stats)?;
    println!(
        "posts {}  sentences {}  words {}  vocabulary {}  unlabeled {}",
        stats.n_posts, stats.n_sentences, stats.n_words, stats.vocab_size, stats.n_unlabeled
    );
    for (label, n) in &stats.class_counts {
        println!("  {label:<14} {n:>6}  {:.3}", stats.class_fractions.get(label).copied().unwrap_or(0.0));
    }
    println!("reference corpus comparison:");
    for d in stats.reference_comparison() {
        println!("  {:<26} observed {:>10}  reference {:>10}", d.field, d.observed, d.reference);
    }
    Ok(())
}

fn split(run: &Run, input: &Path) -> Outcome<()> {
    let corpus = run.load_labeled(input)?;
    let (train, test) = stratified_split(&corpus, &run.cfg.split_spec()).map_err(|e| Failure::from(e).at(input))?;
    run.save(&train, "train.jsonl")?;
    run.save(&test, "test.jsonl")?;
    println!("train {}  test {}", train.len(), test.len());
    Ok(())
}

fn synth(run: &Run) -> Outcome<()> {
    let n = run.cfg.synth_per_class;
    if n == 0 {
        return Err(Failure::Usage("synth.per_class must be positive".into()));
    }
    let counts = Label::ALL.iter().map(|l| (*l, n)).collect();
    let corpus = generate_synthetic(&counts, &run.cfg.load_lexicon()?, run.cfg.seed);
    run.save(&corpus, "synthetic.jsonl")?;
    println!("generated {} posts", corpus.len());
    Ok(())
}

fn train(run: &Run, args: &TrainArgs) -> Outcome<()> {
    let choice = run.cfg.model_choice();
    let corpus = run.load_labeled(&args.input)?;
    let dev = args.dev.as_deref().map(|p| run.load_labeled(p)).transpose()?;
    log::info!("training {choice} on {} posts", corpus.len());
    let model = train_model(choice, &run.cfg, &corpus, dev.as_ref())?;
    let dir = run.out_file("model");
    model.save(&dir, &corpus)?;
    // later commands in the same out-dir overwrite its snapshot; keep the training one
    let snapshot = dir.join(crate::config::SNAPSHOT_FILE);
    std::fs::copy(run.out_file(crate::config::SNAPSHOT_FILE), &snapshot).map_err(|e| runtime(&snapshot, e))?;
    log::info!("checkpoint written to {}", dir.display());
    let report = score(&model, &corpus)?;
    write_report_artifacts(&report, &run.out, "train_metrics", false).map_err(|e| runtime(&run.out, e))?;
    println!("train accuracy {:.4}", report.accuracy);
    if let Some(dev) = &dev {
        let report = score(&model, dev)?;
        write_report_artifacts(&report, &run.out, "dev_metrics", false).map_err(|e| runtime(&run.out, e))?;
        println!("dev accuracy {:.4}", report.accuracy);
    }
    Ok(())
}

fn score(model: &TrainedModel, corpus: &Corpus) -> Outcome<MetricsReport> {
    let predicted = model.predict_labels(corpus)?;
    Ok(evaluate(&corpus.labels()?, &predicted)?)
}

fn eval(run: &Run, args: EvalArgs) -> Outcome<()> {
    let dir = run.model_dir(args.model_dir);
    let model = TrainedModel::load(&dir)?;
    let corpus = run.load_labeled(&args.input)?;
    let report = score(&model, &corpus)?;
    let artifacts =
        write_report_artifacts(&report, &run.out, "metrics", run.cfg.heatmap).map_err(|e| runtime(&run.out, e))?;
    log::info!("wrote {}", artifacts.json.display());
    print!("{}", report.table());
    let avg = report.averaged(run.cfg.averaging);
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
        report.accuracy, avg.precision, avg.recall, avg.f1
    );
    Ok(())
}

fn predict(run: &Run, args: PredictArgs) -> Outcome<()> {
    let model = TrainedModel::load(&run.model_dir(args.model_dir))?;
    let corpus = run.load(&args.input)?;
    let (labels, scores) = model.predict(&corpus.texts())?;
    let rows: Vec<Prediction> = corpus
        .iter()
        .zip(labels.iter().zip(&scores))
        .map(|(p, (l, s))| Prediction::new(&p.id, *l, s))
        .collect();
    run.write_jsonl("predictions.jsonl", &rows)?;
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    for (l, n) in counts {
        println!("{l:<14} {n}");
    }
    Ok(())
}

fn report_name(spec: &str) -> (String, PathBuf) {
    if let Some((name, path)) = spec.split_once('=') {
        return (name.to_string(), PathBuf::from(path));
    }
    let path = PathBuf::from(spec);
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec);
    let name = if stem == "metrics" {
        path.parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
            .unwrap_or(stem)
    } else {
        stem
    };
    (name.to_string(), path)
}

fn compare_reports(run: &Run, args: &CompareArgs) -> Outcome<()> {
    let mut reports = BTreeMap::new();
    for spec in &args.reports {
        let (name, path) = report_name(spec);
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let report = MetricsReport::from_json(&text).map_err(|e| Failure::from(e).at(&path))?;
        if reports.insert(name.clone(), report).is_some() {
            return Err(Failure::Usage(format!("model name `{name}` given twice")));
        }
    }
    if let Some(b) = &args.baseline {
        if !reports.contains_key(b) {
            return Err(Failure::Usage(format!("baseline `{b}` is not among the reports")));
        }
    }
    let averaging: Averaging = run.cfg.averaging;
    let comparison = compare(&reports, args.baseline.as_deref(), averaging)?;
    run.write_json("comparison.json", &comparison)?;
    print!("{}", comparison.table());
    Ok(())
}

fn kappa(run: &Run, path: &Path) -> Outcome<()> {
    let set = load_annotations(path).map_err(|e| Failure::from(e).at(path))?;
    let report = agreement_report(&set);
    run.write_json("agreement.json", &report)?;
    print!("{}", report.table());
    Ok(())
}

#[derive(Serialize)]
struct ResolveSummary {
    items: usize,
    resolved: usize,
    unresolved: usize,
    adjudicated: usize,
}

fn resolve(run: &Run, args: &ResolveArgs) -> Outcome<()> {
    let path = &args.annotations;
    let set = load_annotations(path).map_err(|e| Failure::from(e).at(path))?;
    let mut vote = majority_vote(&set);
    let before = vote.unresolved.len();
    if let Some(adj) = &args.adjudication {
        let file = std::fs::File::open(adj).map_err(|e| Failure::Data(format!("{}: {e}", adj.display())))?;
        let labels = read_adjudication(file, adj).map_err(|e| Failure::from(e).at(adj))?;
        if let Some(id) = labels.keys().find(|id| !set.item_ids().contains(id)) {
            return Err(Failure::Data(format!("{}: unknown item id `{id}`", adj.display())));
        }
        merge_adjudication(&mut vote, &labels);
    }
    let resolved: BTreeMap<&str, Label> = vote
        .resolved
        .iter()
        .filter_map(|(id, r)| match r {
            Resolution::Label(l) => Some((id.as_str(), *l)),
            Resolution::Unresolved => None,
        })
        .collect();
    let mut csv = String::from("id,label\n");
    for (id, r) in &vote.resolved {
        if let Resolution::Label(l) = r {
            csv.push_str(&format!("{id},{}\n", l.name()));
        }
    }
    run.write("resolved.csv", csv)?;
    let unresolved_path = run.out_file("unresolved.csv");
    if vote.unresolved.is_empty() {
        // a stale file from an earlier run would be misleading
        let _ = std::fs::remove_file(&unresolved_path);
    } else {
        let mut buf = Vec::new();
        write_unresolved(&set, &vote, &mut buf)?;
        run.write("unresolved.csv", buf)?;
    }
    if let Some(cpath) = &args.corpus {
        let corpus = run.load(cpath)?;
        let mut labeled = Corpus::default();
        for post in corpus.iter() {
            if let Some(l) = resolved.get(post.id.as_str()) {
                labeled.push(AnnotatedPost {
                    label: Some(*l),
                    ..post.clone()
                })?;
            }
        }
        let skipped = corpus.len() - labeled.len();
        if skipped > 0 {
            log::warn!("{skipped} post(s) of {} have no resolved label and were left out", cpath.display());
        }
        run.save(&labeled, "labeled.jsonl")?;
    }
    let summary = ResolveSummary {
        items: set.len(),
        resolved: resolved.len(),
        unresolved: vote.unresolved.len(),
        adjudicated: before - vote.unresolved.len(),
    };
    run.write_json("resolve_summary.json", &summary)?;
    println!(
        "{} items: {} resolved, {} unresolved, {} settled by adjudication",
        summary.items, summary.resolved, summary.unresolved, summary.adjudicated
    );
    Ok(())
}

#[derive(Serialize)]
struct Explanation {
    id: String,
    text: String,
    label: Label,
    tokens: Vec<TokenScore>,
}

fn explain(run: &Run, args: ExplainArgs) -> Outcome<()> {
    let model = TrainedModel::load(&run.model_dir(args.model_dir))?;
    let mut items: Vec<(String, String)> = args
        .texts
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("arg{}", i + 1), t.clone()))
        .collect();
    if let Some(p) = &args.input {
        items.extend(run.load(p)?.into_posts().into_iter().map(|p| (p.id, p.text)));
    }
    if items.is_empty() {
        return Err(Failure::Usage("explain needs texts or --input".into()));
    }
    let k = run.cfg.explain_k;
    let texts: Vec<&str> = items.iter().map(|(_, t)| t.as_str()).collect();
    let (labels, _) = model.predict(&texts)?;
    let mut rows = Vec::with_capacity(items.len());
    for ((id, text), label) in items.into_iter().zip(labels) {
        let tokens = model.explain(&text, k)?;
        println!("{id} [{label}]: {}", tokens.iter().map(|t| format!("{} ({:.4})", t.token, t.score)).collect::<Vec<_>>().join(", "));
        rows.push(Explanation { id, text, label, tokens });
    }
    run.write_jsonl("explanations.jsonl", &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_names() {
        assert_eq!(report_name("sabia=a/b.json"), ("sabia".into(), PathBuf::from("a/b.json")));
        assert_eq!(report_name("runs/cnn/metrics.json").0, "cnn");
        assert_eq!(report_name("runs/logreg.json").0, "logreg");
    }

    #[test]
    fn parse_errors_are_usage_errors() {
        assert_eq!(run(["sabia", "frobnicate"]), 1);
        assert_eq!(run(["sabia"]), 1);
        assert_eq!(run(["sabia", "--help"]), 0);
        assert_eq!(run(["sabia", "train"]), 1);
    }
}
