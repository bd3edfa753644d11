use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use explainbench::harness::{
    cmd_bench, cmd_explain, cmd_metrics, cmd_synth, cmd_train, Context, ExperimentConfig, RunOptions,
};

#[derive(Parser)]
#[command(name = "explainbench", version, about = "Benchmark local explainers for binary-feature classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-rule dataset CSV from a synthetic spec
    Synth(Common),
    /// Train the configured classifiers and similar-model family
    Train(Common),
    /// Explain test samples with every configured interpreter (resumable)
    Explain(Common),
    /// Compute stability, robustness, effectiveness and consistency reports
    Metrics(Common),
    /// Time each interpreter per sample
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (for `synth`: a synthetic dataset spec)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Experiment seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all logical CPUs)
    #[arg(long)]
    jobs: Option<usize>,
}

fn context(c: &Common) -> anyhow::Result<Context> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let opts = RunOptions {
        out: c.out.clone(),
        seed: c.seed,
    };
    Ok(Context::load(opts.apply(cfg))?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = match &cli.command {
        Command::Synth(c) | Command::Train(c) | Command::Explain(c) | Command::Metrics(c) | Command::Bench(c) => c,
    };
    if let Some(j) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("building the worker pool")?;
    }
    match &cli.command {
        Command::Synth(c) => {
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let path = cmd_synth(&c.config, &out, c.seed)?;
            println!("{}", path.display());
        }
        Command::Train(c) => {
            let s = cmd_train(&context(c)?)?;
            for (name, p) in &s.performance {
                println!("{name}\taccuracy={:.4}\tf_measure={:.4}", p.accuracy, p.f_measure);
            }
        }
        Command::Explain(c) => {
            let s = cmd_explain(&context(c)?)?;
            println!("written={}\tcached={}", s.written, s.skipped);
        }
        Command::Metrics(c) => {
            let ctx = context(c)?;
            cmd_metrics(&ctx)?;
            println!("{}", ctx.out("reports/metrics.csv").display());
        }
        Command::Bench(c) => {
            let r = cmd_bench(&context(c)?)?;
            for row in &r.rows {
                println!("{}\t{:.6}", row.approach, row.mean_seconds);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            let validation = e.downcast_ref::<explainbench::Error>().is_some_and(|e| e.is_validation());
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
