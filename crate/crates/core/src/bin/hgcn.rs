use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hgcn::pipeline::{self, PipelineConfig};
use hgcn::Result;

#[derive(Parser)]
#[command(name = "hgcn", version, about = "Harmonic gate analysis and oracle enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value pipeline configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Per-bin log-magnitude statistics over a directory of WAV files.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pitch, energy labels, frame decisions and gate for one WAV.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compensate a noisy WAV with a gate and mask derived from its clean reference.
    Oracle {
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    match &common.config {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(cli: Cli) -> Result<String> {
    let summary = match cli.command {
        Command::Stats { input, out, common } => {
            let cfg = load_config(&common)?;
            let stats =
                pipeline::with_jobs(common.jobs, || pipeline::run_stats(&input, &out, &cfg))??;
            format!("D = {}\n", stats.clip_count())
        }
        Command::Analyze {
            input,
            stats,
            outdir,
            common,
        } => {
            let cfg = load_config(&common)?;
            let a = pipeline::with_jobs(common.jobs, || {
                pipeline::run_analyze(&input, &stats, &outdir, &cfg)
            })??;
            format!(
                "{} frames, {} active, {} gate cells open\n",
                a.vad.len(),
                a.vad.count_ones(),
                a.gate.count_ones()
            )
        }
        Command::Oracle {
            noisy,
            clean,
            stats,
            out,
            report,
            common,
        } => {
            let cfg = load_config(&common)?;
            let r = pipeline::with_jobs(common.jobs, || {
                pipeline::run_oracle_gate(&noisy, &clean, &stats, &out, &report, &cfg)
            })??;
            r.to_text()
        }
    };
    Ok(summary)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
