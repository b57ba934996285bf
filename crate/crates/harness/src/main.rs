use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use capeval::experiments::{
    correlate, perturb, robustness_compare, stopword_experiment, PerturbKind, StopwordComparison, StopwordMode,
    SynonymTable,
};
use capeval::report::{render_rows, sha256_file};
use capeval::{evaluate, load_coco_split, load_dataset, EvaluationDataset, EvaluationReport, Format, RunConfig};
use capeval_core::embeddings::{train_skipgram, EmbeddingTable, SkipGramConfig};
use capeval_core::i2ce::{train_two_stage, Aggregation, TrainingPlan};
use capeval_core::neural::{load_checkpoint, Optimizer, TrainConfig};
use capeval_core::registry::{MetricOptions, MetricRegistry, Resources};
use capeval_core::text::{read_sentences, StopWords};
use clap::{Args, Parser, Subcommand, ValueEnum};

const CLASSIC_METRICS: [&str; 4] = ["bleu", "rouge_l", "meteor", "cider"];

/// Exit statuses: 0 success, 1 some metric failed, 2 invalid input.
#[derive(Parser)]
#[command(name = "capeval", version, about = "Caption evaluation toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Comma-separated metric names. Defaults to the n-gram metrics plus
    /// mean/wmd when embeddings are given and i2ce when a checkpoint is given.
    #[arg(long, global = true, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Word vectors, one `token v1 .. vd` line each.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Trained encoder checkpoint.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Which side loses its stop words in the starred B@1 row.
    #[arg(long, global = true, default_value = "both")]
    stopword_mode: StopwordMode,
    /// Stop-word list replacing the built-in English one.
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    /// How per-reference I2CE scores are combined.
    #[arg(long, global = true, value_enum, default_value_t = Agg::Mean)]
    aggregation: Agg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Agg {
    Mean,
    Max,
}

#[derive(Subcommand)]
enum Command {
    /// Score one or more caption datasets and print a table, one column per dataset.
    Score {
        #[command(flatten)]
        data: DataArgs,
        /// Where the JSON report goes.
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
    },
    /// Train skip-gram word vectors on plain-text corpora.
    TrainEmbeddings {
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        #[arg(long, default_value_t = 2)]
        min_count: usize,
    },
    /// Train the sentence auto-encoder in two stages on top of frozen embeddings.
    TrainEncoder(TrainEncoderArgs),
    /// Compare B@1, B@1 without stop words, and MEAN.
    StopwordExp {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Rewrite candidates and save the result as jsonl.
    Perturb {
        data: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        kind: PerturbKind,
        /// Tab-separated `word<TAB>replacement` lines.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalized score drops between two reports, model by model.
    Compare { original: PathBuf, perturbed: PathBuf },
    /// Pearson and Spearman correlation between two per-item score rows.
    Correlate {
        report: PathBuf,
        a: String,
        b: String,
        /// Model column to use; the first one by default.
        #[arg(long)]
        model: Option<String>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset files, or COCO result files when --references is given.
    #[arg(required = true)]
    data: Vec<PathBuf>,
    /// Inferred from the extension when omitted.
    #[arg(long)]
    format: Option<Format>,
    /// COCO annotation file shared by all result files.
    #[arg(long)]
    references: Option<PathBuf>,
}

#[derive(Args)]
struct TrainEncoderArgs {
    /// Generic sentences for the first stage.
    #[arg(long, required_unless_present = "skip_stage1")]
    stage1: Option<PathBuf>,
    /// Caption references for the second stage.
    #[arg(long)]
    stage2: PathBuf,
    #[arg(long)]
    skip_stage1: bool,
    /// Receives stage1.ckpt and stage2.ckpt.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    epochs1: usize,
    #[arg(long, default_value_t = 4)]
    epochs2: usize,
    #[arg(long, default_value_t = 0.005)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = Opt::Adam)]
    optimizer: Opt,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 32)]
    attention: usize,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Opt {
    Sgd,
    Adam,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Score { data, report } => score(g, data, report),
        Command::TrainEmbeddings {
            corpus,
            out,
            dim,
            window,
            negatives,
            epochs,
            lr,
            min_count,
        } => {
            let mut sentences = Vec::new();
            for path in corpus {
                sentences.extend(read_sentences(path).with_context(|| format!("reading {}", path.display()))?);
            }
            let config = SkipGramConfig {
                dim: *dim,
                window: *window,
                negatives: *negatives,
                epochs: *epochs,
                lr: *lr,
                seed: g.seed,
                min_count: *min_count,
            };
            let run = train_skipgram(&sentences, &config)?;
            for (i, loss) in run.epoch_losses.iter().enumerate() {
                println!("epoch {} loss {loss:.6}", i + 1);
            }
            run.table.save(out)?;
            println!("wrote {} vectors to {}", run.table.vocab().word_count(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::TrainEncoder(args) => train_encoder(g, args),
        Command::StopwordExp { data } => {
            let resources = resources(g)?;
            let datasets = load_all(data)?;
            let comparisons = datasets
                .iter()
                .map(|d| stopword_experiment(d, g.stopword_mode, &resources))
                .collect::<Result<Vec<_>, _>>()?;
            let columns: Vec<String> = comparisons.iter().map(|c| c.model.clone()).collect();
            print!("{}", render_rows("Metric", &columns, &StopwordComparison::rows(&comparisons)));
            let mut failed = false;
            for c in &comparisons {
                if let Err(reason) = &c.mean {
                    println!("failed: {} / mean: {reason}", c.model);
                    failed = true;
                }
            }
            Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Perturb {
            data,
            format,
            kind,
            synonyms,
            out,
        } => {
            let dataset = load_dataset(data, resolve_format(data, *format)?)?;
            let table = synonyms.as_deref().map(SynonymTable::load).transpose()?;
            let perturbed = perturb(&dataset, *kind, table.as_ref(), &stopwords(g)?, g.seed)?;
            perturbed.save_jsonl(out)?;
            println!("wrote {} items to {}", perturbed.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { original, perturbed } => {
            let a = read_report(original)?;
            let b = read_report(perturbed)?;
            if a.models.len() != b.models.len() {
                bail!("reports have {} and {} models", a.models.len(), b.models.len());
            }
            for (ma, mb) in a.models.iter().zip(&b.models) {
                let deltas = robustness_compare(ma, mb).with_context(|| format!("model {}", ma.model))?;
                println!("{}", ma.model);
                let columns = vec!["original".to_string(), "perturbed".into(), "drop".into()];
                let rows: Vec<_> = deltas
                    .iter()
                    .map(|d| (d.name.clone(), vec![d.original, d.perturbed, d.normalized_drop]))
                    .collect();
                print!("{}", render_rows("Metric", &columns, &rows));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Correlate { report, a, b, model } => {
            let r = read_report(report)?;
            let m = match model {
                Some(name) => r.model(name).with_context(|| format!("no model {name:?} in report"))?,
                None => r.models.first().context("report has no models")?,
            };
            let c = correlate(m, a, b)?;
            let show = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.6}"));
            println!("model {}  n {}", m.model, c.n);
            println!("pearson  {}", show(c.pearson));
            println!("spearman {}", show(c.spearman));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn score(g: &Global, data: &DataArgs, report_path: &Path) -> Result<ExitCode> {
    let resources = resources(g)?;
    let datasets = load_all(data)?;
    let metrics = metric_names(g);
    let registry = MetricRegistry::builtin();
    for m in &metrics {
        if !registry.contains(m) {
            bail!(
                "unknown metric {m:?} (known: {})",
                registry.names().collect::<Vec<_>>().join(", ")
            );
        }
    }
    let options = MetricOptions {
        i2ce_aggregation: aggregation(g),
        ..MetricOptions::default()
    };
    let models = datasets
        .iter()
        .map(|d| evaluate(d, &metrics, &registry, &resources, &options))
        .collect::<Result<Vec<_>, _>>()?;

    let mut inputs = BTreeMap::new();
    let mut paths: Vec<&Path> = data.data.iter().map(PathBuf::as_path).collect();
    paths.extend(
        [&data.references, &g.embeddings, &g.checkpoint, &g.stopwords]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path),
    );
    for p in paths {
        let digest = sha256_file(p).with_context(|| format!("reading {}", p.display()))?;
        inputs.insert(p.display().to_string(), digest);
    }
    let mut flags = BTreeMap::new();
    flags.insert("stopword_mode".to_string(), g.stopword_mode.as_str().to_string());
    flags.insert("aggregation".to_string(), options.i2ce_aggregation.as_str().to_string());
    flags.insert("bleu_max_n".to_string(), options.bleu_max_n.to_string());
    let config = RunConfig {
        seed: g.seed,
        metrics,
        flags,
        inputs,
    };
    let report = EvaluationReport::new(config, models);
    fs::write(report_path, report.to_json()).with_context(|| format!("writing {}", report_path.display()))?;
    print!("{}", report.render_table());
    Ok(if report.has_failures() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn train_encoder(g: &Global, args: &TrainEncoderArgs) -> Result<ExitCode> {
    let path = g
        .embeddings
        .as_ref()
        .context("train-encoder needs --embeddings")?;
    let table = EmbeddingTable::read(path).with_context(|| format!("reading {}", path.display()))?;
    fs::create_dir_all(&args.out_dir)?;
    let stage = |epochs| TrainConfig {
        epochs,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        optimizer: match args.optimizer {
            Opt::Sgd => Optimizer::Sgd,
            Opt::Adam => Optimizer::adam(),
        },
        seed: g.seed,
        ..TrainConfig::default()
    };
    let mut plan = TrainingPlan::new(PathBuf::new(), &args.stage2);
    plan.stage1_corpus = args.stage1.clone();
    plan.skip_stage1 = args.skip_stage1;
    plan.stage1 = stage(args.epochs1);
    plan.stage2 = stage(args.epochs2);
    plan.model.embed_dim = table.dim();
    plan.model.hidden = args.hidden;
    plan.model.attention = args.attention;
    plan.model.max_len = args.max_len;
    plan.min_count = args.min_count;
    plan.init_seed = g.seed;
    plan.checkpoint_dir = Some(args.out_dir.clone());

    let run = train_two_stage(&plan, &table)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    println!("embedding coverage {:.1}%", run.coverage * 100.0);
    let stages = run.stage1.iter().map(|r| (1, r)).chain([(2, &run.stage2)]);
    for (n, r) in stages {
        for (i, loss) in r.epoch_losses.iter().enumerate() {
            println!("stage {n} epoch {} loss {loss:.6}", i + 1);
        }
        if r.truncated > 0 {
            println!("stage {n}: {} sentences truncated", r.truncated);
        }
    }
    for p in &run.checkpoints {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn metric_names(g: &Global) -> Vec<String> {
    if let Some(m) = &g.metrics {
        return m.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    let mut names: Vec<String> = CLASSIC_METRICS.iter().map(|s| s.to_string()).collect();
    if g.embeddings.is_some() {
        names.extend(["mean".into(), "wmd".into()]);
    }
    if g.checkpoint.is_some() {
        names.push("i2ce".into());
    }
    names
}

fn aggregation(g: &Global) -> Aggregation {
    match g.aggregation {
        Agg::Mean => Aggregation::Mean,
        Agg::Max => Aggregation::Max,
    }
}

fn stopwords(g: &Global) -> Result<StopWords> {
    match &g.stopwords {
        Some(p) => StopWords::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(StopWords::english()),
    }
}

/// Resources named on the command line; a file that is given but unreadable
/// is an input error, a file that is not given just fails the metrics needing it.
fn resources(g: &Global) -> Result<Resources> {
    let embeddings = match &g.embeddings {
        Some(p) => Some(Arc::new(
            EmbeddingTable::read(p).with_context(|| format!("reading {}", p.display()))?,
        )),
        None => None,
    };
    let model = match &g.checkpoint {
        Some(p) => Some(Arc::new(
            load_checkpoint(p).with_context(|| format!("reading {}", p.display()))?,
        )),
        None => None,
    };
    Ok(Resources {
        embeddings,
        model,
        stopwords: stopwords(g)?,
    })
}

fn resolve_format(path: &Path, format: Option<Format>) -> Result<Format> {
    format
        .or_else(|| Format::from_path(path))
        .with_context(|| format!("cannot tell the format of {}; pass --format", path.display()))
}

fn load_all(args: &DataArgs) -> Result<Vec<EvaluationDataset>> {
    args.data
        .iter()
        .map(|path| match &args.references {
            Some(refs) => Ok(load_coco_split(refs, path)?),
            None => Ok(load_dataset(path, resolve_format(path, args.format)?)?),
        })
        .collect()
}

fn read_report(path: &Path) -> Result<EvaluationReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    EvaluationReport::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}
