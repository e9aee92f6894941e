//! Task execution.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;

use gapspec_core::oracles::{fd_eigenvalues_in_window, shift_counterexample_norms, FdGrid};
use gapspec_core::spectral::{find_kernel_crossing, nearest_to_zero};
use gapspec_core::sweep::{convergence_table, epsilon_table, sweep_lambda, track_branches, SweepResult};
use gapspec_core::{eigenvalues_symmetric, hausdorff_distance, Error, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigErrors, ExperimentConfig, Format, Task};
use crate::output::{distance, matrix_csv, num, Artifacts};

pub const SWEEP_HEADER: &str = "lambda,epsilon,n,index,eigenvalue,boundary_flag";
const EIG_TOL: f64 = gapspec_core::eigen::DEFAULT_RESIDUAL_TOL;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("invalid experiment: {0}")]
    Invalid(Error),
    #[error("{0}")]
    Numerical(Error),
    #[error("{0}")]
    NoCrossing(Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoCrossing(_) => RunError::NoCrossing(e),
            _ if e.is_numerical() => RunError::Numerical(e),
            _ => RunError::Invalid(e),
        }
    }
}

impl RunError {
    /// 0 success, 1 i/o, 2 configuration, 3 numerical failure, 4 no crossing.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) => 1,
            RunError::Config(_) | RunError::Invalid(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::NoCrossing(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    /// Overrides `workers`.
    pub workers: Option<usize>,
    pub dump_matrices: bool,
}

/// Execute every requested task, writing artifacts and one status line per task to `log`.
///
/// On failure the files written so far are renamed with a `.partial` suffix.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions, log: &mut (dyn Write + Send)) -> Result<Vec<PathBuf>, RunError> {
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let workers = opts.workers.unwrap_or(config.workers).max(1);
    let mut artifacts = Artifacts::create(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Io(io::Error::other(e)))?;
    let result = pool.install(|| run_tasks(config, opts, &mut artifacts, log));
    match result {
        Ok(()) => Ok(artifacts.written().to_vec()),
        Err(e) => {
            artifacts.mark_partial()?;
            Err(e)
        }
    }
}

fn run_tasks(config: &ExperimentConfig, opts: &RunOptions, out: &mut Artifacts, log: &mut (dyn Write + Send)) -> Result<(), RunError> {
    let problem = Problem::new(config.model, config.perturbation.clone(), config.quadrature)?;
    out.json("config.json", config)?;
    for task in [Task::Sweep, Task::Convergence, Task::Epsilon, Task::OracleCompare, Task::Counterexample, Task::Crossing] {
        if !config.wants(task) {
            continue;
        }
        let summary = match task {
            Task::Sweep => sweep(config, &problem, out)?,
            Task::Convergence => convergence(config, &problem, out)?,
            Task::Epsilon => epsilon(config, &problem, out)?,
            Task::OracleCompare => oracle_compare(config, &problem, out)?,
            Task::Counterexample => counterexample(config, out)?,
            Task::Crossing => crossing(config, &problem, out)?,
        };
        writeln!(log, "{}: {summary}", task.name())?;
    }
    if opts.dump_matrices {
        let count = dump_matrices(config, &problem, out)?;
        writeln!(log, "matrices: {count} written")?;
    }
    Ok(())
}

fn modulus_value(r: &SweepResult) -> Value {
    r.modulus.map_or(Value::from("no_data"), Value::from)
}

fn sweep(config: &ExperimentConfig, problem: &Problem, out: &mut Artifacts) -> Result<String, RunError> {
    let grid = config.sweep.lambda.points();
    let n = config.largest_n();
    let window = config.window();
    let mut results = Vec::new();
    for &eps in config.epsilons() {
        results.push(sweep_lambda(problem, &grid, eps, n, &window)?);
    }

    if config.writes(Format::Csv) {
        let mut csv = String::from(SWEEP_HEADER);
        csv.push('\n');
        let mut branches = String::from("epsilon,n,branch,lambda,eigenvalue\n");
        for r in &results {
            for s in &r.slices {
                for (i, v) in s.eigenvalues.iter().enumerate() {
                    let flag = u8::from(s.boundary_flags.contains(&i));
                    let _ = writeln!(csv, "{},{},{},{i},{},{flag}", num(s.lambda), num(s.epsilon), s.n, num(*v));
                }
            }
            for (b, branch) in track_branches(r).iter().enumerate() {
                for (lambda, v) in r.grid.iter().zip(branch) {
                    if let Some(v) = v {
                        let _ = writeln!(branches, "{},{},{b},{},{}", num(r.epsilon), r.n, num(*lambda), num(*v));
                    }
                }
            }
        }
        out.text("sweep.csv", &csv)?;
        out.text("sweep_branches.csv", &branches)?;
    }
    if config.writes(Format::Json) {
        let sweeps: Vec<Value> = results
            .iter()
            .map(|r| {
                json!({
                    "epsilon": r.epsilon,
                    "n": r.n,
                    "grid": r.grid,
                    "slices": r.slices.iter().map(|s| json!({
                        "lambda": s.lambda,
                        "eigenvalues": s.eigenvalues,
                        "boundary_flags": s.boundary_flags,
                        "grazing_outside": s.grazing_outside,
                        "total_eigenvalues": s.all_eigenvalues_count,
                        "min_eigenvalue": s.min_eigenvalue,
                    })).collect::<Vec<_>>(),
                    "adjacent_dh": r.adjacent_dh.iter().map(|&d| distance(d)).collect::<Vec<_>>(),
                    "pair_flags": r.pair_flags,
                    "flagged_points": r.flagged_points(),
                    "modulus": modulus_value(r),
                })
            })
            .collect();
        out.json("sweep.json", &json!({ "window": config.window(), "sweeps": sweeps }))?;
    }

    let parts: Vec<String> = results
        .iter()
        .map(|r| {
            let m = r.modulus.map_or("no data".to_string(), |m| format!("{m:.3e}"));
            let flagged = r.pair_flags.iter().filter(|f| f.is_some()).count();
            format!("eps={} modulus {m} ({flagged} flagged pairs)", num(r.epsilon))
        })
        .collect();
    Ok(format!("{} grid points, n={n}; {}", grid.len(), parts.join("; ")))
}

fn convergence(config: &ExperimentConfig, problem: &Problem, out: &mut Artifacts) -> Result<String, RunError> {
    let window = config.window();
    let mut tables = Vec::new();
    for &lambda in config.probe_lambdas() {
        for &eps in config.epsilons() {
            tables.push(convergence_table(problem, lambda, eps, &config.sweep.n_list, &window)?);
        }
    }
    let json_tables: Vec<Value> = tables
        .iter()
        .map(|t| {
            json!({
                "lambda": t.lambda,
                "epsilon": t.epsilon,
                "reference_n": t.reference_n,
                "reference": t.reference,
                "rows": t.rows.iter().map(|r| json!({
                    "n": r.n,
                    "distance": distance(r.distance),
                    "count": r.count,
                    "flagged": r.flagged,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    out.json(
        "convergence.json",
        &json!({
            "reference_proxy": "the largest n in n_list stands in for the infinite-dimensional operator",
            "window": window,
            "tables": json_tables,
        }),
    )?;
    let parts: Vec<String> = tables
        .iter()
        .map(|t| {
            let rows = &t.rows[..t.rows.len() - 1];
            let d: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.distance)).collect();
            format!("lambda={} eps={}: d_H [{}]", num(t.lambda), num(t.epsilon), d.join(", "))
        })
        .collect();
    Ok(format!("reference n={}; {}", config.largest_n(), parts.join("; ")))
}

fn epsilon(config: &ExperimentConfig, problem: &Problem, out: &mut Artifacts) -> Result<String, RunError> {
    let window = config.window();
    let n = config.largest_n();
    let mut studies = Vec::new();
    let mut parts = Vec::new();
    for &lambda in config.probe_lambdas() {
        let rows = epsilon_table(problem, lambda, config.epsilons(), n, &window)?;
        let d: Vec<String> = rows
            .iter()
            .filter_map(|r| r.distance_to_previous)
            .map(|d| format!("{d:.2e}"))
            .collect();
        parts.push(format!("lambda={}: d_H [{}]", num(lambda), d.join(", ")));
        studies.push(json!({
            "lambda": lambda,
            "n": n,
            "rows": rows.iter().map(|r| json!({
                "epsilon": r.epsilon,
                "eigenvalues": r.eigenvalues,
                "distance_to_previous": r.distance_to_previous.map(distance),
                "flagged": r.flagged,
            })).collect::<Vec<_>>(),
        }));
    }
    out.json("epsilon.json", &json!({ "window": window, "studies": studies }))?;
    Ok(parts.join("; "))
}

fn oracle_compare(config: &ExperimentConfig, problem: &Problem, out: &mut Artifacts) -> Result<String, RunError> {
    let window = config.window();
    let n = config.largest_n();
    let eps = config.epsilons()[0];
    let grid = FdGrid::for_model(&config.model, config.oracle_points(), config.oracle.radius);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &lambda in config.probe_lambdas() {
        let gal = problem.slice(lambda, eps, n, &window)?;
        let fd = fd_eigenvalues_in_window(&config.model, &config.perturbation, lambda, eps, &grid, &window)?;
        let max_diff = if gal.eigenvalues.len() == fd.len() {
            gal.eigenvalues.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        worst = worst.max(max_diff);
        rows.push(json!({
            "lambda": lambda,
            "galerkin": gal.eigenvalues,
            "finite_difference": fd,
            "max_abs_difference": distance(max_diff),
            "hausdorff": distance(hausdorff_distance(&gal.eigenvalues, &fd)),
        }));
    }
    out.json(
        "oracle_compare.json",
        &json!({
            "epsilon": eps,
            "n": n,
            "grid": grid,
            "window": window,
            "comparisons": rows,
        }),
    )?;
    Ok(format!("{} lambda values, FD grid {} points, max |galerkin - fd| {}", rows.len(), grid.points, num(worst)))
}

fn counterexample(config: &ExperimentConfig, out: &mut Artifacts) -> Result<String, RunError> {
    let spec = &config.counterexample;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut csv = String::from("sample,n,image_norm,operator_norm\n");
    let mut non_unit = 0;
    let mut nonzero_tail = 0;
    for sample in 0..spec.samples {
        let len = rng.gen_range(1..=spec.max_support);
        let u: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for n in 1..=spec.max_n {
            let (image, op) = shift_counterexample_norms(n, &u);
            non_unit += usize::from(op != 1.0);
            nonzero_tail += usize::from(n > len && image != 0.0);
            let _ = writeln!(csv, "{sample},{n},{},{}", num(image), num(op));
        }
    }
    out.text("counterexample.csv", &csv)?;
    Ok(format!(
        "{} samples x {} operators; operator norm != 1: {non_unit}; nonzero images past the support: {nonzero_tail}",
        spec.samples, spec.max_n
    ))
}

fn crossing(config: &ExperimentConfig, problem: &Problem, out: &mut Artifacts) -> Result<String, RunError> {
    let spec = config.crossing.as_ref().expect("validated config has a crossing section");
    let curve = |t: f64| -> gapspec_core::Result<f64> {
        let op = problem.assemble(spec.rescale.apply(t), spec.epsilon, spec.n)?;
        let eigs = eigenvalues_symmetric(&op.matrix, EIG_TOL)?;
        nearest_to_zero(&eigs).ok_or_else(|| Error::NumericalFailure("empty spectrum".into()))
    };
    let c = find_kernel_crossing(curve, &spec.grid.points(), spec.tol)?;
    let lambda0 = spec.rescale.apply(c.lambda);
    let scan = if spec.scan_points >= 2 {
        let fine = gapspec_core::sweep::uniform_grid(spec.grid.start, spec.grid.stop, spec.scan_points);
        let values = {
            use rayon::prelude::*;
            fine.par_iter().map(|&t| curve(t)).collect::<gapspec_core::Result<Vec<f64>>>()?
        };
        let cells: Vec<[f64; 2]> = (0..fine.len() - 1)
            .filter(|&i| values[i].signum() != values[i + 1].signum())
            .map(|i| [fine[i], fine[i + 1]])
            .collect();
        let brackets = cells.iter().any(|c2| c2[0] <= c.lambda && c.lambda <= c2[1]);
        json!({ "points": spec.scan_points, "sign_change_cells": cells, "brackets_crossing": brackets })
    } else {
        Value::Null
    };
    out.json(
        "crossing.json",
        &json!({
            "lambda0": lambda0,
            "t0": c.lambda,
            "mu": c.value,
            "bracket_t": [c.bracket.0, c.bracket.1],
            "bracket_lambda": [spec.rescale.apply(c.bracket.0), spec.rescale.apply(c.bracket.1)],
            "grid_bracket_t": [c.grid_bracket.0, c.grid_bracket.1],
            "iterations": c.iterations,
            "rescaling": spec.rescale.describe(),
            "n": spec.n,
            "epsilon": spec.epsilon,
            "tol": spec.tol,
            "fine_scan": scan,
        }),
    )?;
    Ok(format!("lambda0 = {} (t0 = {}), mu = {:.2e}, {} bisections", num(lambda0), num(c.lambda), c.value, c.iterations))
}

fn dump_matrices(config: &ExperimentConfig, problem: &Problem, out: &mut Artifacts) -> Result<usize, RunError> {
    let n = config.largest_n();
    let mut count = 0;
    for (i, &lambda) in config.probe_lambdas().iter().enumerate() {
        for (j, &eps) in config.epsilons().iter().enumerate() {
            let op = problem.assemble(lambda, eps, n)?;
            out.text(&format!("matrices/lambda{i}_eps{j}_n{n}.csv"), &matrix_csv(&op.matrix))?;
            count += 1;
        }
    }
    Ok(count)
}
