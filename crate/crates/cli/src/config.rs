//! Experiment configuration, read from TOML.
//!
//! ```toml
//! experiment = "sketch_sweep"
//! seeds = [0, 1, 2]
//!
//! [problem]
//! objective = { kind = "least_squares" }
//!
//! [problem.data]
//! source = "synthetic_spectrum"
//! n = 10000
//! d = 54
//! decay = 1.2
//!
//! [grid]
//! kinds = ["gaussian", "sparse_embedding", "leverage_score"]
//! sketch_sizes = [{ per_dim = 2.0 }, { per_dim = 4.0 }, { per_dim = 8.0 }]
//!
//! [budget]
//! max_iters = 200
//! grad_tol = 1e-8
//! ```

use std::path::{Path, PathBuf};

use approxnewton::sketch::SketchKind;
use approxnewton::solvers::{Baseline, HessianMethod, SampleSize, SketchSize, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Subsampled Newton over the support set against exact Newton.
    LipschitzFree,
    /// Sketch kinds × sketch sizes.
    SketchSweep,
    /// Sample sizes × regularizers.
    RegularizedSweep,
    /// Sample sizes × target ranks, plus any regularizers listed.
    NewSampSweep,
    /// Subspace-embedding success rates, no solver runs.
    EmbeddingCheck,
    /// Only the explicit `methods` and `baselines`.
    Custom,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::LipschitzFree => "lipschitz_free",
            ExperimentKind::SketchSweep => "sketch_sweep",
            ExperimentKind::RegularizedSweep => "regularized_sweep",
            ExperimentKind::NewSampSweep => "newsamp_sweep",
            ExperimentKind::EmbeddingCheck => "embedding_check",
            ExperimentKind::Custom => "custom",
        }
    }

    pub fn parse(name: &str) -> Result<Self, CliError> {
        let all = [
            ExperimentKind::LipschitzFree,
            ExperimentKind::SketchSweep,
            ExperimentKind::RegularizedSweep,
            ExperimentKind::NewSampSweep,
            ExperimentKind::EmbeddingCheck,
            ExperimentKind::Custom,
        ];
        all.into_iter()
            .find(|k| k.label() == name)
            .ok_or_else(|| CliError::Config(format!("unknown experiment {name:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", deny_unknown_fields)]
pub enum DataSpec {
    /// Singular values `decay^(-i)`, `i = 1..d`.
    SyntheticSpectrum {
        n: usize,
        d: usize,
        decay: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `spikes` singular values `top·ratio^i` over a flat tail of value `tail`.
    Spiked {
        n: usize,
        d: usize,
        spikes: usize,
        top: f64,
        ratio: f64,
        tail: f64,
        #[serde(default)]
        seed: u64,
    },
    TwoClass {
        n: usize,
        d: usize,
        separation: f64,
        #[serde(default)]
        flip: f64,
        #[serde(default)]
        seed: u64,
    },
    Libsvm {
        path: PathBuf,
        /// Class mapped to +1 against all others; otherwise two classes map
        /// to ±1, or labels are kept as read for least squares.
        #[serde(default)]
        positive_class: Option<f64>,
        #[serde(default)]
        dim: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ObjectiveSpec {
    LeastSquares,
    Svm { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub data: DataSpec,
    pub objective: ObjectiveSpec,
    /// Every coordinate of the starting point.
    #[serde(default)]
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub methods: Vec<HessianMethod>,
    pub baselines: Vec<Baseline>,
    pub kinds: Vec<SketchKind>,
    pub sketch_sizes: Vec<SketchSize>,
    pub sample_sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub ranks: Vec<usize>,
    /// Fraction of the support set sampled per step (lipschitz_free, default 0.05).
    pub pool_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Scale `grad_tol` by `‖∇F(x0)‖`.
    pub relative: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_iters: 100,
            grad_tol: 1e-8,
            relative: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub eps: f64,
    /// Success rate an entry must reach to count as passing in the report.
    pub target_rate: f64,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            eps: 0.5,
            target_rate: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// `[start, end)`; replaces `seeds` when given.
    #[serde(default)]
    pub seed_range: Option<[u64; 2]>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub budget: Budget,
    /// Settings shared by every run; `hessian`, `seed`, `max_iters` and
    /// `grad_tol` are overwritten per run.
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub embedding: EmbeddingSettings,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Fill the `wall_ms` trace column (makes traces run-dependent).
    #[serde(default)]
    pub record_timing: bool,
    /// Multiply synthetic problem sizes and sample sizes by 10.
    #[serde(default)]
    pub full_scale: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Command-line overrides applied on top of a loaded file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub full_scale: bool,
    pub experiment: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some([start, end]) = cfg.seed_range.take() {
            cfg.seeds = (start..end).collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
        if o.full_scale {
            self.full_scale = true;
        }
        if let Some(name) = &o.experiment {
            self.experiment = ExperimentKind::parse(name)?;
        }
        self.validate()
    }

    /// Short name used in output file names.
    pub fn title(&self) -> String {
        sanitize(self.name.as_deref().unwrap_or(self.experiment.label()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.budget.max_iters == 0 || !(self.budget.grad_tol > 0.0) {
            return bad("budget needs max_iters >= 1 and grad_tol > 0".into());
        }
        if let ObjectiveSpec::Svm { c } = self.problem.objective {
            if !(c > 0.0) {
                return bad(format!("svm penalty c must be positive, got {c}"));
            }
        }
        if !(self.embedding.eps > 0.0 && self.embedding.eps < 1.0) {
            return bad(format!("embedding eps must lie in (0, 1), got {}", self.embedding.eps));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if let Some(f) = self.grid.pool_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("pool_fraction must lie in (0, 1], got {f}"));
            }
        }
        if self.points()?.is_empty() {
            return bad(format!("the {} grid is empty", self.experiment.label()));
        }
        Ok(())
    }

    fn scale_samples(&self, s: usize) -> usize {
        if self.full_scale {
            s * 10
        } else {
            s
        }
    }

    /// Grid points in a fixed order.
    pub fn points(&self) -> Result<Vec<GridPoint>, CliError> {
        let g = &self.grid;
        let mut points = Vec::new();
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{} needs {what}", self.experiment.label())))
            }
        };
        match self.experiment {
            ExperimentKind::LipschitzFree => {
                let f = g.pool_fraction.unwrap_or(0.05);
                points.push(GridPoint::solver(
                    format!("subsampled_pf{f}"),
                    HessianMethod::Subsampled {
                        size: SampleSize::PoolFraction(f),
                    },
                ));
                points.push(GridPoint::baseline("newton".into(), Baseline::FullNewton));
            }
            ExperimentKind::SketchSweep | ExperimentKind::EmbeddingCheck => {
                need(!g.kinds.is_empty(), "grid.kinds")?;
                let sizes = if g.sketch_sizes.is_empty() {
                    vec![SketchSize::Calibrated]
                } else {
                    g.sketch_sizes.clone()
                };
                for &kind in &g.kinds {
                    if kind == SketchKind::Explicit {
                        return Err(CliError::Config("explicit sketches cannot be configured from a file".into()));
                    }
                    for &size in &sizes {
                        let tag = format!("{}_{}", kind.label(), size_label(size));
                        let method = HessianMethod::Sketched { kind, size };
                        points.push(if self.experiment == ExperimentKind::EmbeddingCheck {
                            GridPoint {
                                tag: format!("embed_{tag}"),
                                run: PointRun::Embedding { kind, size },
                            }
                        } else {
                            GridPoint::solver(format!("sketch_{tag}"), method)
                        });
                    }
                }
            }
            ExperimentKind::RegularizedSweep => {
                need(!g.sample_sizes.is_empty() && !g.alphas.is_empty(), "grid.sample_sizes and grid.alphas")?;
                for &s in &g.sample_sizes {
                    let s = self.scale_samples(s);
                    for &alpha in &g.alphas {
                        points.push(GridPoint::solver(
                            format!("reg_s{s}_a{alpha}"),
                            HessianMethod::Regularized {
                                size: SampleSize::Fixed(s),
                                alpha,
                            },
                        ));
                    }
                }
            }
            ExperimentKind::NewSampSweep => {
                need(!g.sample_sizes.is_empty() && !g.ranks.is_empty(), "grid.sample_sizes and grid.ranks")?;
                for &s in &g.sample_sizes {
                    let s = self.scale_samples(s);
                    for &rank in &g.ranks {
                        points.push(GridPoint::solver(
                            format!("newsamp_s{s}_r{rank}"),
                            HessianMethod::NewSamp {
                                size: SampleSize::Fixed(s),
                                rank,
                            },
                        ));
                    }
                    for &alpha in &g.alphas {
                        points.push(GridPoint::solver(
                            format!("reg_s{s}_a{alpha}"),
                            HessianMethod::Regularized {
                                size: SampleSize::Fixed(s),
                                alpha,
                            },
                        ));
                    }
                }
            }
            ExperimentKind::Custom => {}
        }
        if self.experiment != ExperimentKind::EmbeddingCheck {
            for m in &g.methods {
                let m = match *m {
                    HessianMethod::Subsampled { size: SampleSize::Fixed(s) } => HessianMethod::Subsampled {
                        size: SampleSize::Fixed(self.scale_samples(s)),
                    },
                    other => other,
                };
                points.push(GridPoint::solver(method_tag(&m), m));
            }
            for b in &g.baselines {
                points.push(GridPoint::baseline(b.label().replace('-', "_"), *b));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for p in &mut points {
            p.tag = sanitize(&p.tag);
            let base = p.tag.clone();
            let mut k = 2;
            while !seen.insert(p.tag.clone()) {
                p.tag = format!("{base}_{k}");
                k += 1;
            }
        }
        Ok(points)
    }
}

/// What a grid point executes.
#[derive(Debug, Clone, PartialEq)]
pub enum PointRun {
    Solver(HessianMethod),
    Baseline(Baseline),
    Embedding { kind: SketchKind, size: SketchSize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub tag: String,
    pub run: PointRun,
}

impl GridPoint {
    fn solver(tag: String, hessian: HessianMethod) -> Self {
        GridPoint {
            tag,
            run: PointRun::Solver(hessian),
        }
    }

    fn baseline(tag: String, b: Baseline) -> Self {
        GridPoint {
            tag,
            run: PointRun::Baseline(b),
        }
    }
}

pub fn size_label(size: SketchSize) -> String {
    match size {
        SketchSize::Rows(s) => format!("s{s}"),
        SketchSize::PerDim(f) => format!("{f}d"),
        SketchSize::Calibrated => "calibrated".into(),
        SketchSize::Eps0Scaled(f) => format!("{f}d_over_eps2"),
    }
}

fn method_tag(m: &HessianMethod) -> String {
    match *m {
        HessianMethod::Sketched { kind, size } => format!("sketch_{}_{}", kind.label(), size_label(size)),
        HessianMethod::Subsampled { size } => format!("subsampled_{}", sample_label(size)),
        HessianMethod::Regularized { size, alpha } => format!("reg_{}_a{alpha}", sample_label(size)),
        HessianMethod::NewSamp { size, rank } => format!("newsamp_{}_r{rank}", sample_label(size)),
        ref other => other.label(),
    }
}

fn sample_label(size: SampleSize) -> String {
    match size {
        SampleSize::Fixed(s) => format!("s{s}"),
        SampleSize::PoolFraction(f) => format!("pf{f}"),
        SampleSize::Full => "full".into(),
        SampleSize::Formula { delta } => format!("formula_d{delta}"),
    }
}

/// Keeps `[A-Za-z0-9._-]`, replaces anything else with `_`.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}
