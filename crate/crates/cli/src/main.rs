use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use priorart::config::Config;
use priorart::eval::{self, GradeFilter, Qrels};
use priorart::index::TermIndex;
use priorart::pipeline::{self, Pipeline, Stage};

#[derive(Parser, Debug)]
#[command(
    name = "priorart",
    version,
    about = "Prior-art retrieval pipeline over patent collections"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Directory holding inputs and every stage artifact.
    #[arg(long, global = true, default_value = "workspace")]
    workspace: PathBuf,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set retrieval.lambda=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for corpus generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic collection into `<workspace>/input`.
    Gen,
    /// Load the collection, normalize names and resolve citations.
    Ingest,
    /// Build the per-analyzer indexes, or inspect one.
    Index {
        #[command(subcommand)]
        action: Option<IndexAction>,
    },
    /// Build working sets for topics and validation topics.
    Worksets,
    /// Retrieve one ranked list per model and topic.
    Retrieve,
    /// Fit the per-model confidence regressors.
    TrainMerge,
    /// Merge model lists with the trained confidences.
    Merge,
    /// Fit the citation-feature boost model.
    TrainRerank,
    /// Boost merged lists into the final run.
    Rerank,
    /// Evaluate runs; with `--run`, evaluate a single run file.
    Eval(EvalArgs),
    /// Run every stage in order.
    Pipeline {
        /// Reuse existing inputs instead of generating a collection.
        #[arg(long)]
        no_gen: bool,
    },
}

#[derive(Subcommand, Debug)]
enum IndexAction {
    /// Print size statistics and a consistency audit of an index file.
    Stats { path: PathBuf },
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// TREC run file to evaluate.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Judgments; defaults to the configured qrels.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Topic list (first field per line); defaults to the run's topics.
    #[arg(long)]
    topics: Option<PathBuf>,
    /// `all` (grade ≥ 1) or `high` (grade 2).
    #[arg(long, default_value = "all")]
    grade: String,
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn eval_single(p: &Pipeline, args: &EvalArgs, run: &Path) -> anyhow::Result<()> {
    let filter: GradeFilter = args.grade.parse()?;
    let qrels_path = args.qrels.clone().unwrap_or_else(|| p.qrels_path());
    let qrels = Qrels::load(&qrels_path)?;
    let lists = pipeline::read_run(run)?;
    let topics: Option<BTreeSet<String>> = match &args.topics {
        Some(path) => Some(
            read(path)?
                .lines()
                .filter_map(|l| l.split_whitespace().next())
                .map(str::to_string)
                .collect(),
        ),
        None => None,
    };
    let name = run
        .file_stem()
        .map_or("run".into(), |s| s.to_string_lossy().into_owned());
    let evaluation = eval::evaluate(&name, &lists, &qrels, filter, topics.as_ref())?;
    for t in &evaluation.skipped {
        eprintln!("warning: topic {t} has no {} judgments; skipped", filter.name());
    }
    print!("{}", eval::report_text(std::slice::from_ref(&evaluation)));
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut overrides = cli.global.overrides.clone();
    if let Some(seed) = cli.global.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(threads) = cli.global.threads {
        overrides.push(format!("threads={threads}"));
    }
    let config = Config::load(cli.global.config.as_deref(), &overrides)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build_global()
        .context("cannot start worker pool")?;
    let p = Pipeline::new(&cli.global.workspace, config);

    let stage = match cli.command {
        Command::Gen => Stage::Gen,
        Command::Ingest => Stage::Ingest,
        Command::Index { action: None } => Stage::Index,
        Command::Index {
            action: Some(IndexAction::Stats { path }),
        } => {
            let stats = TermIndex::read(&path)?.audit();
            print!("{}", stats.report());
            if !stats.is_consistent() {
                bail!("index {} failed its consistency audit", path.display());
            }
            return Ok(());
        }
        Command::Worksets => Stage::Worksets,
        Command::Retrieve => Stage::Retrieve,
        Command::TrainMerge => Stage::TrainMerge,
        Command::Merge => Stage::Merge,
        Command::TrainRerank => Stage::TrainRerank,
        Command::Rerank => Stage::Rerank,
        Command::Eval(args) => {
            if let Some(run) = &args.run {
                return eval_single(&p, &args, run);
            }
            p.run_stage(Stage::Eval)?;
            print!("{}", read(&p.path(pipeline::paths::REPORT_TXT))?);
            return Ok(());
        }
        Command::Pipeline { no_gen } => {
            p.run_all(!no_gen)?;
            print!("{}", read(&p.path(pipeline::paths::REPORT_TXT))?);
            return Ok(());
        }
    };
    p.run_stage(stage)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
