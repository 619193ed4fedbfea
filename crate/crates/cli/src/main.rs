use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use approxnewton::problems::synthetic_spectrum_matrix;
use approxnewton::sketch::{calibrated_sketch_size, SketchKind};
use approxnewton_cli::runner::embedding_success;
use approxnewton_cli::{gen_synthetic, resolve_output_dir, run_experiment, ExperimentConfig, Overrides};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "approxnewton", version, about = "Approximate Newton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point × seed of an experiment config.
    Run {
        config: PathBuf,
        /// Replaces the config's seed list; repeatable.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Output directory (default: config `output_dir`, then $APPROXNEWTON_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiply synthetic sizes and sample sizes by 10.
        #[arg(long)]
        full_scale: bool,
        /// Override the experiment kind.
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Rebuild plot data and the SVG chart of a run directory.
    Plot { dir: PathBuf },
    /// Monte-Carlo subspace-embedding success rate on a synthetic matrix.
    VerifyEmbedding {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 1.2)]
        decay: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        seeds: u64,
        /// Sketch rows; the calibrated size for each kind when omitted.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long = "kind", value_enum)]
        kinds: Vec<KindArg>,
    },
    /// Print the condition number of the synthetic matrix and optionally save it.
    GenSynthetic {
        #[arg(long, default_value_t = 10000)]
        n: usize,
        #[arg(long, default_value_t = 54)]
        d: usize,
        #[arg(long, default_value_t = 1.2)]
        decay: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the matrix and targets in LIBSVM format.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Gaussian,
    Sparse,
    Leverage,
}

impl From<KindArg> for SketchKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gaussian => SketchKind::Gaussian,
            KindArg::Sparse => SketchKind::SparseEmbedding,
            KindArg::Leverage => SketchKind::LeverageScore,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Run {
            config,
            seeds,
            out,
            full_scale,
            experiment,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides {
                seeds,
                output_dir: out.clone(),
                full_scale,
                experiment,
            })?;
            let dir = resolve_output_dir(&cfg, out.as_deref());
            let summary = run_experiment(&cfg, &dir)?;
            let report = &summary.report;
            println!(
                "{}: {} runs, {} failed, {:.1} s -> {}",
                report.title,
                report.records.len(),
                report.failures(),
                report.total_wall_ms / 1e3,
                dir.display()
            );
            for (tag, rows, hits, trials) in approxnewton_cli::runner::embedding_rates(report) {
                println!("  {tag} (s = {rows}): {hits}/{trials} embedded");
            }
            Ok(summary.exit_code())
        }
        Command::Plot { dir } => {
            for f in approxnewton_cli::output::emit_plot_data(&dir)? {
                println!("{}", f.display());
            }
            Ok(0)
        }
        Command::VerifyEmbedding {
            n,
            d,
            decay,
            eps,
            seeds,
            rows,
            kinds,
        } => {
            let a = synthetic_spectrum_matrix(n, d, decay, 0)?.data.features;
            let kinds: Vec<SketchKind> = if kinds.is_empty() {
                vec![SketchKind::Gaussian, SketchKind::SparseEmbedding, SketchKind::LeverageScore]
            } else {
                kinds.into_iter().map(Into::into).collect()
            };
            for kind in kinds {
                let s = rows.unwrap_or_else(|| calibrated_sketch_size(kind, d, eps));
                let (hits, trials) =
                    embedding_success(&a, kind, s, eps, 0..seeds).with_context(|| format!("{} sketch", kind.label()))?;
                println!(
                    "{:<9} s = {s:>6}: {hits}/{trials} = {:.3}",
                    kind.label(),
                    hits as f64 / trials.max(1) as f64
                );
            }
            Ok(0)
        }
        Command::GenSynthetic { n, d, decay, seed, out } => {
            let info = gen_synthetic(n, d, decay, seed, out.as_deref())?;
            println!("kappa(A) prescribed = {:.6e}", info.prescribed_kappa);
            println!("kappa(A) measured   = {:.6e}", info.measured_kappa);
            if let Some(p) = out {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
    }
}
