//! Acceptance criteria AC1..AC10. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use gapspec_core::model::hermite_eigenvalue;
use gapspec_core::oracles::{
    fd_eigenvalues_in_window, fd_spectrum, geometric_rate, neumann_resolvent_check, shift_counterexample_norms,
    FdGrid,
};
use gapspec_core::spectral::{find_kernel_crossing, nearest_to_zero, numerical_range_lower_bound};
use gapspec_core::sweep::{convergence_table, sweep_lambda, uniform_grid};
use gapspec_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AC1_TOL: f64 = 1e-4;
const AC1_RUNTIME: Duration = Duration::from_secs(10);
const AC2_TOL: f64 = 1e-4;
const AC2_RUNTIME: Duration = Duration::from_secs(30);
const AC3_TOL: f64 = 1e-10;
const AC4_FACTOR: f64 = 2.0;
const AC5_FACTOR: f64 = 2.0;
const AC6_SLACK: f64 = 1e-9;
const AC7_MAX_N: usize = 10_000;
const AC8_REL_TOL: f64 = 0.10;
const AC9_TOL: f64 = 1e-8;
const AC9_RUNTIME: Duration = Duration::from_secs(60);
const AC10_SLACK: f64 = 1e-12;
const SUITE_RUNTIME: Duration = Duration::from_secs(300);

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn torus_cos_model() -> (ModelSpec, PerturbationSpec) {
    let model = ModelSpec::torus(Blocks::Semibounded, 0.5);
    let pert = PerturbationSpec {
        kernel: Kernel::Multiplication { profile: Profile::Cosine { amplitude: 1.0, wavenumber: 1.0, phase: 0.0 } },
        support: Support::uniform(Interval::new(0.0, 2.0 * PI)),
        strength: Strength::Linear { c0: 12.0 },
        coupling: Coupling::plus_only(-1.0),
    };
    (model, pert)
}

fn line_bump(blocks: Blocks) -> Problem {
    let model = ModelSpec::line(blocks, 0.5);
    let coupling = match blocks {
        Blocks::Gap => Coupling { pp: -1.0, pm: 0.3, mm: 1.0 },
        Blocks::Semibounded => Coupling::plus_only(-1.0),
    };
    let pert = PerturbationSpec {
        kernel: Kernel::Multiplication { profile: Profile::Bump { center: 0.0, half_width: 1.0, amplitude: 1.0 } },
        support: Support::uniform(Interval::new(-1.0, 1.0)),
        strength: Strength::Rational { c0: 3.6 },
        coupling,
    };
    Problem::new(model, pert, QuadratureSpec::default()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let (model, pert) = torus_cos_model();
    let problem = Problem::new(model, pert.clone(), QuadratureSpec::default()).unwrap();
    let window = GapWindow::below_one();
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for lambda in [0.5, 1.0] {
        let gal = problem.slice(lambda, 0.0, 64, &window).unwrap();
        let fd = fd_eigenvalues_in_window(&model, &pert, lambda, 0.0, &FdGrid::torus(4096), &window).unwrap();
        worst = worst.max(max_abs_diff(&gal.eigenvalues, &fd));
        counts.push(gal.eigenvalues.len());
    }
    let elapsed = start.elapsed();
    let pass = worst <= AC1_TOL && counts.iter().all(|&c| c >= 2) && elapsed < AC1_RUNTIME;
    outcome(pass, format!("counts {counts:?}, max |galerkin - fd| = {worst:.3e}, {elapsed:.2?}"))
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let model = ModelSpec::line(Blocks::Semibounded, 0.0);
    let none = PerturbationSpec::none(&model);
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for eps in [0.25, 1.0] {
        let fd = fd_spectrum(&model, &none, 0.0, eps, &FdGrid::line(12.0, 8192), 11).unwrap();
        let mut err: f64 = 0.0;
        let mut worst_k = 0;
        for (k, v) in fd.plus.iter().enumerate() {
            let e = (v - hermite_eigenvalue(&model, eps, k, BlockSign::Plus).unwrap()).abs();
            if e > err {
                err = e;
                worst_k = k;
            }
        }
        worst = worst.max(err);
        parts.push(format!("eps={eps}: max err {err:.3e} at k={worst_k}"));
    }
    let elapsed = start.elapsed();
    outcome(worst <= AC2_TOL && elapsed < AC2_RUNTIME, format!("{}, {elapsed:.2?}", parts.join("; ")))
}

fn ac3() -> Outcome {
    let model = ModelSpec::torus(Blocks::Gap, 0.5);
    let pert = PerturbationSpec {
        kernel: Kernel::Multiplication { profile: Profile::Cosine { amplitude: 1.0, wavenumber: 1.0, phase: 0.0 } },
        support: Support::uniform(Interval::new(0.0, 2.0 * PI)),
        strength: Strength::Linear { c0: 2.5 },
        coupling: Coupling { pp: -1.0, pm: 0.3, mm: 1.0 },
    };
    let quad = QuadratureSpec::default();
    let window = GapWindow::gap();
    let (lambda, n, n_pad, shift) = (1.0, 16, 32, 10.0);
    let tilde = assemble_truncated(&model, &pert, &quad, lambda, 0.0, n).unwrap();
    let hat = assemble_hat(&model, &pert, &quad, lambda, 0.0, n, n_pad, shift).unwrap();
    let et = eigenvalues_symmetric(&tilde.matrix, 1e-12).unwrap();
    let eh = eigenvalues_symmetric(&hat.matrix, 1e-12).unwrap();
    let st = gap_slice(&et, &window);
    let sh = gap_slice(&eh, &window);
    let diff = max_abs_diff(&st.eigenvalues, &sh.eigenvalues);
    let near = |v: &[f64]| v.iter().filter(|&&x| (x - shift).abs() <= AC3_TOL).count();
    let extra = near(&eh) - near(&et);
    let expected = 2 * (n_pad - n);
    let pass = diff <= AC3_TOL && extra == expected && !st.eigenvalues.is_empty();
    outcome(pass, format!("window {:?}, max diff {diff:.3e}, extra eigenvalues at {shift}: {extra} (want {expected})", st.eigenvalues))
}

fn ac4() -> Outcome {
    let problem = line_bump(Blocks::Gap);
    let mut pass = true;
    let mut parts = Vec::new();
    for lambda in [0.3, 0.7] {
        let t = convergence_table(&problem, lambda, 0.5, &[32, 64, 128, 256], &GapWindow::gap()).unwrap();
        let d: Vec<f64> = t.rows.iter().map(|r| r.distance).collect();
        let f1 = d[0] / d[1];
        let f2 = d[1] / d[2];
        pass &= !t.reference.is_empty() && t.rows.iter().all(|r| !r.flagged) && f1 >= AC4_FACTOR && f2 >= AC4_FACTOR;
        parts.push(format!("lambda={lambda}: d_H {:.2e} {:.2e} {:.2e}, factors {f1:.2} {f2:.2}", d[0], d[1], d[2]));
    }
    outcome(pass, parts.join("; "))
}

fn ac5() -> Outcome {
    let problem = line_bump(Blocks::Gap);
    let mods: Vec<f64> = [41, 81, 161]
        .iter()
        .map(|&count| {
            let r = sweep_lambda(&problem, &uniform_grid(0.0, 1.0, count), 0.5, 64, &GapWindow::gap()).unwrap();
            r.modulus.unwrap_or(f64::NAN)
        })
        .collect();
    let r1 = mods[0] / mods[1];
    let r2 = mods[1] / mods[2];
    let pass = r1 >= AC5_FACTOR && r2 >= AC5_FACTOR;
    outcome(pass, format!("modulus {:.4e} {:.4e} {:.4e}, ratios {r1:.4} {r2:.4}", mods[0], mods[1], mods[2]))
}

fn ac6() -> Outcome {
    let quad = QuadratureSpec::default();
    let grid = uniform_grid(0.0, 1.0, 41);
    let mut violations = 0;
    let mut margin = f64::INFINITY;
    let (model, pert) = torus_cos_model();
    let torus = Problem::new(model, pert, quad).unwrap();
    let runs: [(&Problem, f64); 2] = [(&torus, 0.0), (&line_bump(Blocks::Semibounded), 0.5)];
    for (problem, eps) in runs {
        let mut lambdas = grid.clone();
        lambdas.extend([0.3, 0.5, 0.7]);
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        let bound =
            numerical_range_lower_bound(&problem.model, &problem.perturbation, &quad, &lambdas, 64, eps).unwrap();
        let sweep = sweep_lambda(problem, &lambdas, eps, 64, &GapWindow::below_one()).unwrap();
        for s in &sweep.slices {
            let m = s.min_eigenvalue.unwrap();
            margin = margin.min(m - bound);
            if m < bound - AC6_SLACK {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations, smallest margin {margin:.3e}"))
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad_norm = 0;
    for n in 1..=AC7_MAX_N {
        if shift_counterexample_norms(n, &[]).1 != 1.0 {
            bad_norm += 1;
        }
    }
    let mut bad_tail = 0;
    let mut bad_head = 0;
    for _ in 0..100 {
        let len = rng.gen_range(1..=64);
        let u: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
        for n in 1..=AC7_MAX_N {
            let (image, op) = shift_counterexample_norms(n, &u);
            if n > len && (image != 0.0 || op != 1.0) {
                bad_tail += 1;
            }
            if n <= len && image != u[n - 1].abs() {
                bad_head += 1;
            }
        }
    }
    let pass = bad_norm == 0 && bad_tail == 0 && bad_head == 0;
    outcome(pass, format!("norm != 1: {bad_norm}, nonzero tails: {bad_tail}, wrong |u_n|: {bad_head}"))
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..50 {
        let q = random_symmetric(&mut rng, 8).symmetric_eigen().eigenvectors;
        let d = nalgebra::DVector::from_fn(8, |_, _| rng.gen_range(1.0..5.0));
        let t = &q * DMatrix::from_diagonal(&d) * q.transpose();
        let t = (&t + t.transpose()) * 0.5;
        let sigma = d.min() - rng.gen_range(0.2..1.0);
        let k = random_symmetric(&mut rng, 8);
        let target = rng.gen_range(0.2..0.45);
        let probe = neumann_resolvent_check(&t, &k, sigma, 0).unwrap();
        let k = k * (target / probe.contraction);
        let r = neumann_resolvent_check(&t, &k, sigma, 60).unwrap();
        let scale = r.residuals[0];
        let rate = geometric_rate(&r.residuals, 3, scale * 1e-11);
        let rel = rate.map_or(f64::INFINITY, |m| (m - r.contraction).abs() / r.contraction);
        worst = worst.max(rel);
        if !(r.valid && r.contraction < 0.5 && rel <= AC8_REL_TOL) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures}/50 outside tolerance, worst relative rate error {worst:.3}"))
}

fn ac9() -> Outcome {
    let start = Instant::now();
    let model = ModelSpec::torus(Blocks::Gap, 0.5);
    let pert = PerturbationSpec {
        kernel: Kernel::Transport { velocity: VelocityWeight::uniform(1.0, 2.0) },
        support: Support::uniform(Interval::new(1.0, 2.0)),
        strength: Strength::Rational { c0: 12.0 },
        coupling: Coupling { pp: -1.0, pm: 0.0, mm: 0.0 },
    };
    let problem = Problem::new(model, pert, QuadratureSpec::default()).unwrap();
    let lambda_of = |t: f64| (PI * t / 2.0).tan();
    let curve = |t: f64| -> Result<f64> {
        let op = problem.assemble(lambda_of(t), 0.0, 16)?;
        Ok(nearest_to_zero(&eigenvalues_symmetric(&op.matrix, 1e-12)?).unwrap())
    };
    let crossing = match find_kernel_crossing(curve, &uniform_grid(0.0, 0.99, 21), AC9_TOL) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("crossing search failed: {e}")),
    };
    let fine = uniform_grid(0.0, 0.99, 1000);
    let values: Vec<f64> = fine.iter().map(|&t| curve(t).unwrap()).collect();
    let cells: Vec<usize> = (0..fine.len() - 1).filter(|&i| values[i].signum() != values[i + 1].signum()).collect();
    let inside = cells.iter().any(|&i| fine[i] <= crossing.lambda && crossing.lambda <= fine[i + 1]);
    let elapsed = start.elapsed();
    let pass = crossing.value.abs() <= AC9_TOL && cells.len() == 1 && inside && elapsed < AC9_RUNTIME;
    outcome(
        pass,
        format!(
            "t0 = {:.10} (lambda0 = {:.10}), |mu| = {:.2e}, fine-scan sign changes {}, bracketed {inside}, {elapsed:.2?}",
            crossing.lambda,
            lambda_of(crossing.lambda),
            crossing.value.abs(),
            cells.len()
        ),
    )
}

fn random_set(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=12) };
    (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

fn same_set(a: &[f64], b: &[f64]) -> bool {
    let norm = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    norm(a) == norm(b)
}

fn ac10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = 0;
    for _ in 0..1000 {
        let x = random_set(&mut rng);
        let mut y = random_set(&mut rng);
        if rng.gen_bool(0.1) {
            y = x.iter().rev().copied().collect();
        }
        let z = random_set(&mut rng);
        let dxy = hausdorff_distance(&x, &y);
        let ok = dxy >= 0.0
            && hausdorff_distance(&x, &x) == 0.0
            && (dxy == 0.0) == same_set(&x, &y)
            && dxy == hausdorff_distance(&y, &x)
            && hausdorff_distance(&x, &z) <= dxy + hausdorff_distance(&y, &z) + AC10_SLACK;
        if !ok {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures}/1000 triples violate an axiom"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1", "torus Galerkin vs finite differences", ac1),
        ("AC2", "Hermite eigenvalues vs finite differences", ac2),
        ("AC3", "truncated vs padded sections", ac3),
        ("AC4", "convergence in n", ac4),
        ("AC5", "lambda continuity modulus under grid halving", ac5),
        ("AC6", "uniform lower bound on semibounded sweeps", ac6),
        ("AC7", "strong-without-norm counterexample", ac7),
        ("AC8", "Neumann series decay rate", ac8),
        ("AC9", "kernel crossing of the transport model", ac9),
        ("AC10", "Hausdorff metric axioms", ac10),
    ];
    let start = Instant::now();
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        println!("{id:<5} {} {name}: {} [{:.2?}]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed());
        if !o.pass {
            failed.push(id);
        }
    }
    let total = start.elapsed();
    println!("suite runtime {total:.2?} (limit {SUITE_RUNTIME:?})");
    if total >= SUITE_RUNTIME {
        failed.push("runtime");
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing {}", failed.join(", "));
        std::process::exit(1);
    }
}
