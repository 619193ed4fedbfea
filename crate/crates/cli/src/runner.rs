//! Executes every grid point × seed of an experiment.
//!
//! Runs are independent pure functions of `(problem, point, seed)` and go
//! through a worker pool. Results come back in job order, so output does
//! not depend on scheduling.

use std::time::Instant;

use approxnewton::metrics::{classify_rate, compute_mstar_reference, contraction_diagnostics, ContractionRow, MstarReference, RateReport};
use approxnewton::problems::FiniteSumObjective;
use approxnewton::sketch::{make_leverage_sketch, make_oblivious_sketch, verify_subspace_embedding, EmbeddingCheck, SketchKind};
use approxnewton::solvers::{approximate_newton_run_with, Eps0Schedule, IterationTrace, SketchSize, SnapshotPolicy, SolverConfig};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GridPoint, PointRun};
use crate::error::CliError;
use crate::problem::{build_problem, Problem};

pub enum RunOutcome {
    Solved {
        trace: IterationTrace,
        rate: Result<RateReport, String>,
        contraction: Option<Vec<ContractionRow>>,
    },
    Embedding {
        rows: usize,
        check: EmbeddingCheck,
    },
    Failed(String),
}

pub struct RunRecord {
    pub tag: String,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            RunOutcome::Solved { trace, .. } => trace.status.label(),
            RunOutcome::Embedding { check, .. } if check.holds => "embedded",
            RunOutcome::Embedding { .. } => "not_embedded",
            RunOutcome::Failed(_) => "error",
        }
    }
}

pub struct Report {
    pub title: String,
    pub experiment: &'static str,
    pub problem: String,
    pub points: Vec<GridPoint>,
    pub records: Vec<RunRecord>,
    /// Newton iterations of the `M*` reference, or why it is missing.
    pub reference: Result<usize, String>,
    pub total_wall_ms: f64,
    pub record_timing: bool,
    pub embedding_target: f64,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| matches!(r.outcome, RunOutcome::Failed(_))).count()
    }
}

/// Runs the experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = build_problem(&cfg.problem, cfg.full_scale)?;
    let points = cfg.points()?;
    let needs_reference = points.iter().any(|p| !matches!(p.run, PointRun::Embedding { .. }));
    let reference = if needs_reference {
        compute_mstar_reference(problem.objective.as_ref(), &problem.x0).map_err(|e| e.to_string())
    } else {
        Err("not needed".to_string())
    };
    let factor = points
        .iter()
        .any(|p| matches!(p.run, PointRun::Embedding { .. }))
        .then(|| problem.objective.hessian_factor(&problem.x0))
        .flatten();

    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let ctx = Context {
        cfg,
        problem: &problem,
        reference: reference.as_ref().ok(),
        factor: factor.as_ref(),
    };
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let t0 = Instant::now();
                let outcome = ctx.run(&points[i].run, seed);
                RunRecord {
                    tag: points[i].tag.clone(),
                    seed,
                    outcome,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(Report {
        title: cfg.title(),
        experiment: cfg.experiment.label(),
        problem: problem.name.clone(),
        points,
        records,
        reference: reference.map(|r| r.newton_iterations),
        total_wall_ms: start.elapsed().as_secs_f64() * 1e3,
        record_timing: cfg.record_timing,
        embedding_target: cfg.embedding.target_rate,
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a Problem,
    reference: Option<&'a MstarReference>,
    factor: Option<&'a DMatrix<f64>>,
}

impl Context<'_> {
    fn obj(&self) -> &dyn FiniteSumObjective {
        self.problem.objective.as_ref()
    }

    fn run(&self, run: &PointRun, seed: u64) -> RunOutcome {
        let result = match run {
            PointRun::Embedding { kind, size } => self.embedding(*kind, *size, seed),
            other => self.solve(other, seed),
        };
        result.unwrap_or_else(|e| RunOutcome::Failed(e.to_string()))
    }

    fn run_config(&self, run: &PointRun, seed: u64) -> Result<SolverConfig, CliError> {
        let budget = self.cfg.budget;
        let x0 = &self.problem.x0;
        let grad_tol = if budget.relative {
            budget.grad_tol * self.obj().gradient(x0).norm().max(f64::MIN_POSITIVE)
        } else {
            budget.grad_tol
        };
        let mut rc = self.cfg.solver.clone();
        match run {
            PointRun::Solver(h) => rc.hessian = *h,
            PointRun::Baseline(b) => {
                let bc = b.config(self.obj(), x0, budget.max_iters, grad_tol)?;
                rc.hessian = bc.hessian;
                rc.inner = bc.inner;
            }
            PointRun::Embedding { .. } => unreachable!("embedding points do not run the solver"),
        }
        rc.seed = seed;
        rc.max_iters = budget.max_iters;
        rc.grad_tol = grad_tol;
        rc.snapshots = if rc.certify { SnapshotPolicy::Every } else { SnapshotPolicy::Off };
        Ok(rc)
    }

    fn solve(&self, run: &PointRun, seed: u64) -> Result<RunOutcome, CliError> {
        let rc = self.run_config(run, seed)?;
        let mstar_half = self.reference.map(|r| &r.mstar_half);
        let trace = approximate_newton_run_with(self.obj(), &rc, &self.problem.x0, mstar_half)?;
        let rate = match self.reference {
            Some(_) => classify_rate(&trace).map_err(|e| e.to_string()),
            None => Err("no M* reference".to_string()),
        };
        let contraction = match (rc.certify, self.reference, rc.eps0) {
            (true, Some(reference), Eps0Schedule::Constant(eps0)) => Some(contraction_diagnostics(
                self.obj(),
                &trace,
                reference,
                eps0,
                rc.inner.eps1(),
            )?),
            _ => None,
        };
        Ok(RunOutcome::Solved {
            trace,
            rate,
            contraction,
        })
    }

    fn embedding(&self, kind: SketchKind, size: SketchSize, seed: u64) -> Result<RunOutcome, CliError> {
        let a = self
            .factor
            .ok_or_else(|| CliError::Config("embedding checks need an objective with a Hessian factor".into()))?;
        let eps = self.cfg.embedding.eps;
        let rows = size.rows(kind, a.ncols(), eps);
        let check = check_embedding(a, kind, rows, eps, seed)?;
        Ok(RunOutcome::Embedding { rows, check })
    }
}

fn check_embedding(a: &DMatrix<f64>, kind: SketchKind, rows: usize, eps: f64, seed: u64) -> Result<EmbeddingCheck, CliError> {
    let sketch = match kind {
        SketchKind::LeverageScore => make_leverage_sketch(a, rows, seed)?,
        _ => make_oblivious_sketch(kind, rows, a.nrows(), seed)?,
    };
    Ok(verify_subspace_embedding(&sketch, a, eps)?)
}

/// Success counts of embedding checks per tag, in grid order.
pub fn embedding_rates(report: &Report) -> Vec<(String, usize, usize, usize)> {
    let mut out: Vec<(String, usize, usize, usize)> = Vec::new();
    for r in &report.records {
        if let RunOutcome::Embedding { rows, check } = &r.outcome {
            match out.iter_mut().find(|e| e.0 == r.tag) {
                Some(e) => {
                    e.2 += usize::from(check.holds);
                    e.3 += 1;
                }
                None => out.push((r.tag.clone(), *rows, usize::from(check.holds), 1)),
            }
        }
    }
    out
}

/// Empirical embedding success rate of one sketch kind on `a`.
pub fn embedding_success(
    a: &DMatrix<f64>,
    kind: SketchKind,
    rows: usize,
    eps: f64,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<(usize, usize), CliError> {
    let mut hits = 0;
    let mut trials = 0;
    for seed in seeds {
        hits += usize::from(check_embedding(a, kind, rows, eps, seed)?.holds);
        trials += 1;
    }
    Ok((hits, trials))
}
