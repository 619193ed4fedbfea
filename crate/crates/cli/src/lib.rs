//! Config-driven experiment runner for the `approxnewton` library.
//!
//! `approxnewton run <config.toml>` expands the config's grid, runs every
//! grid point for every seed and writes CSV traces, a summary, plot data
//! and an SVG chart into the output directory. See [`output`] for the file
//! schemas and [`config`] for the config format.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod problem;
pub mod runner;

use std::path::{Path, PathBuf};

use approxnewton::linalg::singular_values;
use approxnewton::problems::{synthetic_spectrum_matrix, write_libsvm};

pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use error::CliError;
pub use runner::{execute, Report};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "APPROXNEWTON_OUT";

/// Flag, then config key, then environment, then `./out`.
pub fn resolve_output_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub struct RunSummary {
    pub report: Report,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// 0 when every run completed, 2 when some runs failed.
    pub fn exit_code(&self) -> u8 {
        if self.report.failures() == 0 {
            0
        } else {
            2
        }
    }
}

/// Runs `cfg` and writes its output files.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", out_dir.display())))?;
    let report = execute(cfg)?;
    let files = output::write_report(&report, out_dir)?;
    Ok(RunSummary {
        report,
        out_dir: out_dir.to_path_buf(),
        files,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticInfo {
    /// `σ_1/σ_d` of the prescribed spectrum.
    pub prescribed_kappa: f64,
    /// `σ_1/σ_d` from an SVD of the generated matrix.
    pub measured_kappa: f64,
}

/// Generates the decaying-spectrum least-squares matrix, optionally saving it
/// as LIBSVM (labels are the regression targets).
pub fn gen_synthetic(n: usize, d: usize, decay: f64, seed: u64, out: Option<&Path>) -> Result<SyntheticInfo, CliError> {
    let syn = synthetic_spectrum_matrix(n, d, decay, seed)?;
    let sv = singular_values(&syn.data.features);
    let info = SyntheticInfo {
        prescribed_kappa: syn.condition_number(),
        measured_kappa: sv[0] / sv[sv.len() - 1],
    };
    if let Some(path) = out {
        let file = std::fs::File::create(path)?;
        write_libsvm(&syn.data, std::io::BufWriter::new(file))?;
    }
    Ok(info)
}
