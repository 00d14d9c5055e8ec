mod analyze;
mod config;
mod evaluate;
mod explain;
mod inputs;
mod score;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icscore::analytics::{LogBase, Rounding};
use icscore::features::FeatureSet;
use icscore::syntax::SubtreeMode;
use icscore::{AggregationScheme, ModelKind};

use config::RunConfig;

/// Integrative complexity scoring.
#[derive(Parser)]
#[command(name = "icscore", version, about)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags that override the run configuration.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Feature set, e.g. v_postags, all, subtrees.
    #[arg(long, global = true)]
    features: Option<FeatureSet>,
    #[arg(long, global = true, value_parser = parse_subtree_mode)]
    subtree_mode: Option<SubtreeMode>,
    #[arg(long, global = true)]
    min_freq: Option<usize>,
    /// gbt, majority, word_count, sentiment or naive_bayes.
    #[arg(long, global = true)]
    model_kind: Option<ModelKind>,
    #[arg(long, global = true)]
    rounds: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    /// Label aggregation: seven, four or three.
    #[arg(long, global = true)]
    scheme: Option<AggregationScheme>,
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    dictionary: Option<PathBuf>,
}

fn parse_subtree_mode(s: &str) -> Result<SubtreeMode, String> {
    match s {
        "binary" => Ok(SubtreeMode::Binary),
        "normalized" => Ok(SubtreeMode::Normalized),
        _ => Err(format!("expected binary or normalized, got {s:?}")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a feature space and model on a labelled corpus.
    Train {
        /// Labelled CoNLL-U or JSONL corpus.
        #[arg(long)]
        corpus: PathBuf,
        /// Run directory for the artifacts.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validation or held-out evaluation.
    Evaluate {
        #[command(subcommand)]
        mode: EvalMode,
    },
    /// Score an unlabelled corpus with a trained model.
    Score {
        /// model.json from a train run.
        #[arg(long)]
        model: PathBuf,
        /// CoNLL-U or JSONL corpus.
        #[arg(long)]
        input: PathBuf,
        /// Scored records, one JSON object per line.
        #[arg(long)]
        out: PathBuf,
        /// Documents scored per parallel batch.
        #[arg(long)]
        chunk: Option<usize>,
    },
    /// Aggregate scored records into per-community summaries.
    Analyze {
        /// Scored JSONL from `icscore score`.
        #[arg(long)]
        scored: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log_base: Option<LogBase>,
        #[arg(long)]
        rounding: Option<Rounding>,
    },
    /// Per-feature contributions behind individual predictions.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// CoNLL-U or JSONL documents to explain.
        #[arg(long)]
        input: PathBuf,
        /// Only explain this document.
        #[arg(long)]
        doc: Option<String>,
        /// Explain this class instead of the predicted one.
        #[arg(long)]
        class: Option<u8>,
        /// Rows shown at each end of the table.
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Emit JSON instead of text tables.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum EvalMode {
    /// k-fold cross-validation on one labelled corpus.
    Cv {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Train on one corpus and test on another, or score external predictions.
    Heldout {
        #[arg(long)]
        test: PathBuf,
        #[arg(long, required_unless_present = "external_scores")]
        train: Option<PathBuf>,
        /// `doc_id,score` predictions made by another system.
        #[arg(long)]
        external_scores: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error caused by the invocation or its inputs rather than by a bug.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 2 for bad invocations and bad or missing inputs, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    use icscore::evaluation::EvalError;
    use icscore::features::FeatureError;
    use icscore::model::ModelError;
    for cause in err.chain() {
        if cause.is::<UsageError>()
            || cause.is::<icscore::ConlluError>()
            || cause.is::<icscore::lexicon::LexiconError>()
            || cause.is::<icscore::lexicon::DictionaryError>()
            || cause.is::<icscore::analytics::InputError>()
            || cause.is::<icscore::analytics::AnalyticsError>()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<FeatureError>() {
            if matches!(e, FeatureError::EmptyCorpus | FeatureError::MissingDictionary) {
                return 2;
            }
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            if matches!(e, ModelError::UnsupportedFormat { .. } | ModelError::SpaceMismatch { .. } | ModelError::Json(_)) {
                return 2;
            }
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            if !matches!(e, EvalError::Model(_) | EvalError::Io(_)) {
                return 2;
            }
        }
    }
    1
}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = cli.workers {
        c.workers = v;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.features {
        c.features.set = v;
    }
    if let Some(v) = o.subtree_mode {
        c.features.subtree_mode = v;
    }
    if let Some(v) = o.min_freq {
        c.features.min_freq = v;
    }
    if let Some(v) = &o.model_kind {
        c.model.kind = v.clone();
    }
    if let Some(v) = o.rounds {
        c.model.n_rounds = v;
    }
    if let Some(v) = o.max_depth {
        c.model.max_depth = v;
    }
    if let Some(v) = o.scheme {
        c.evaluation.scheme = v;
    }
    if let Some(v) = &o.lexicon {
        c.resources.lexicon = Some(v.clone());
    }
    if let Some(v) = &o.dictionary {
        c.resources.dictionary = Some(v.clone());
    }
    Ok(c)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = resolve_config(&cli)?;
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| anyhow::anyhow!("cannot size thread pool: {e}"))?;
    }
    match cli.command {
        Command::Train { corpus, out } => train::run(&config, &corpus, &out),
        Command::Evaluate { mode } => match mode {
            EvalMode::Cv { corpus, out, folds } => {
                if let Some(k) = folds {
                    config.evaluation.folds = k;
                }
                evaluate::cv(&config, &corpus, &out)
            }
            EvalMode::Heldout {
                test,
                train,
                external_scores,
                out,
            } => evaluate::heldout(&config, train.as_deref(), &test, external_scores.as_deref(), &out),
        },
        Command::Score {
            model,
            input,
            out,
            chunk,
        } => {
            if let Some(c) = chunk {
                config.analytics.chunk_size = c;
            }
            score::run(&config, &model, &input, &out)
        }
        Command::Analyze {
            scored,
            out,
            log_base,
            rounding,
        } => {
            if let Some(b) = log_base {
                config.analytics.log_base = b;
            }
            if let Some(r) = rounding {
                config.analytics.rounding = r;
            }
            analyze::run(&config, &scored, &out)
        }
        Command::Explain {
            model,
            input,
            doc,
            class,
            top,
            json,
        } => explain::run(&model, &input, doc.as_deref(), class, top, json),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
