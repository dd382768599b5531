use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tci_core::corpus::IpcLevel;
use tci_core::index::Variant;
use tci_core::pipeline::{self, ConfigError, PipelineError, Run, RunConfig, Transform};

#[derive(Parser)]
#[command(name = "tci", version, about = "Technological convergence index pipeline")]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the input corpus and write the normalized copy.
    Ingest(Inputs),
    /// Generate a synthetic corpus with planted convergence into the run directory.
    Synth {
        #[arg(long)]
        n_patents: Option<usize>,
    },
    /// Build the heterogeneous graph.
    Graph(Inputs),
    /// Train the encoder and write structural embeddings.
    Train(TrainArgs),
    /// Fuse embeddings and compute metrics, weights and variants.
    Score {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: ScoreArgs,
    },
    /// Correlations, regressions, KDE and trend tables.
    Report {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: ReportArgs,
    },
    /// Run every stage.
    Pipeline {
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        score: ScoreArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Args, Default)]
struct Inputs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ipc_texts: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Default)]
struct TrainArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
}

#[derive(Args, Default)]
struct ScoreArgs {
    #[arg(long)]
    smoothing_k: Option<u32>,
    #[arg(long, value_parser = parse_level)]
    ipc_level: Option<IpcLevel>,
    #[arg(long)]
    disconnect_penalty: Option<f64>,
    /// Comma-separated variant list, e.g. V1,V5,V8.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
}

#[derive(Args, Default)]
struct ReportArgs {
    #[arg(long, value_parser = parse_transform)]
    transform: Option<Transform>,
    /// Fixed KDE bandwidth; Silverman's rule when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
}

fn parse_level(s: &str) -> Result<IpcLevel, String> {
    toml::Value::String(s.to_string()).try_into().map_err(|_| format!("unknown IPC level '{s}'"))
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    toml::Value::String(s.to_string()).try_into().map_err(|_| format!("unknown transform '{s}'"))
}

impl Inputs {
    fn apply(&self, cfg: &mut RunConfig) {
        for (src, dst) in [
            (&self.corpus, &mut cfg.paths.corpus),
            (&self.ipc_texts, &mut cfg.paths.ipc_texts),
            (&self.embeddings, &mut cfg.paths.embeddings),
        ] {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        self.inputs.apply(cfg);
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.knn_k {
            cfg.graph.knn_k = v;
        }
    }
}

impl ScoreArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.smoothing_k {
            cfg.metrics.smoothing_k = v;
        }
        if let Some(v) = self.ipc_level {
            cfg.metrics.ipc_level = v;
        }
        if self.disconnect_penalty.is_some() {
            cfg.metrics.disconnect_penalty = self.disconnect_penalty;
        }
        if let Some(v) = &self.variants {
            cfg.index.variants.clone_from(v);
        }
    }
}

impl ReportArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.transform {
            cfg.stats.transform = v;
        }
        if let Some(h) = self.bandwidth {
            cfg.stats.bandwidth = tci_core::stats::Bandwidth::Fixed(h);
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out.clone_from(o);
    }
    match &cli.command {
        Command::Ingest(i) | Command::Graph(i) => i.apply(&mut cfg),
        Command::Synth { n_patents } => {
            if let Some(n) = n_patents {
                cfg.synth.n_patents = *n;
            }
        }
        Command::Train(t) => t.apply(&mut cfg),
        Command::Score { inputs, args } => {
            inputs.apply(&mut cfg);
            args.apply(&mut cfg);
        }
        Command::Report { inputs, args } => {
            inputs.apply(&mut cfg);
            args.apply(&mut cfg);
        }
        Command::Pipeline { train, score, report } => {
            train.apply(&mut cfg);
            score.apply(&mut cfg);
            report.apply(&mut cfg);
        }
    }
    Ok(cfg.finalize()?)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(ConfigError::Invalid("--jobs must be at least 1".into()).into());
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth { .. } => {
            let out = cfg.paths.out.clone();
            let s = pipeline::run_synth(&cfg, &out)?;
            println!("synthetic corpus: {} patents written to {}", s.corpus.records.len(), out.display());
        }
        Command::Pipeline { .. } => {
            let o = pipeline::run_pipeline(cfg)?;
            let w = &o.scores.weights.0;
            println!(
                "pipeline done: {} patents, weights {:.6} {:.6} {:.6}, holdout auc {}",
                o.scores.patent_ids.len(),
                w[0],
                w[1],
                w[2],
                o.train.holdout_auc.map_or("NA".to_string(), |a| format!("{a:.4}"))
            );
        }
        Command::Ingest(_) => {
            let d = Run::new(cfg)?.ingest()?;
            println!("ingested {} patents", d.records.len());
        }
        Command::Graph(_) => {
            let g = Run::new(cfg)?.graph()?;
            println!("graph: {} nodes", g.node_count());
        }
        Command::Train(_) => {
            let t = Run::new(cfg)?.train()?;
            println!("loss {:.6} -> {:.6}", t.initial_loss, t.final_loss);
        }
        Command::Score { .. } => {
            let s = Run::new(cfg)?.score()?;
            println!("scored {} patents", s.patent_ids.len());
        }
        Command::Report { .. } => {
            let r = Run::new(cfg)?.report()?;
            for n in &r.notes {
                eprintln!("note: {n}");
            }
            println!("report written");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
