//! Parameter sweeps in λ, n and ε with Hausdorff diagnostics.
//!
//! Grid points run on the current rayon pool; results are collected in grid
//! order, so the output does not depend on scheduling.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::{eigenvalues_symmetric, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::galerkin::{assemble_in, TruncatedOperator};
use crate::model::{ModelSpec, Space};
use crate::perturbation::PerturbationSpec;
use crate::quadrature::QuadratureSpec;
use crate::spectral::{gap_slice, hausdorff_distance, GapWindow, SpectrumSlice};

/// Model, perturbation and quadrature: everything fixed across a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub model: ModelSpec,
    pub perturbation: PerturbationSpec,
    pub quadrature: QuadratureSpec,
}

impl Problem {
    pub fn new(model: ModelSpec, perturbation: PerturbationSpec, quadrature: QuadratureSpec) -> Result<Self> {
        model.validate()?;
        perturbation.validate(&model)?;
        quadrature.validate()?;
        Ok(Self { model, perturbation, quadrature })
    }

    pub fn assemble(&self, lambda: f64, epsilon: f64, n: usize) -> Result<TruncatedOperator> {
        assemble_in(&self.model, &self.perturbation, &self.quadrature, lambda, epsilon, n, n)
    }

    /// Assemble and slice one section.
    pub fn slice(&self, lambda: f64, epsilon: f64, n: usize, window: &GapWindow) -> Result<SpectrumSlice> {
        let op = self.assemble(lambda, epsilon, n)?;
        slice_of(&op.matrix, lambda, epsilon, n, window)
    }
}

fn slice_of(matrix: &DMatrix<f64>, lambda: f64, epsilon: f64, n: usize, window: &GapWindow) -> Result<SpectrumSlice> {
    let eigs = eigenvalues_symmetric(matrix, DEFAULT_RESIDUAL_TOL)?;
    let mut s = gap_slice(&eigs, window);
    s.lambda = lambda;
    s.epsilon = epsilon;
    s.n = n;
    Ok(s)
}

/// Why an adjacent pair is left out of the modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFlag {
    /// One slice is empty and the other is not.
    EmptyTransition,
    /// Both nonempty but with different counts.
    CountChange,
    /// An eigenvalue sits within `boundary_tol` of a window edge.
    BoundaryGrazing,
}

/// Flag for a pair of neighbouring slices, if any.
pub fn pair_flag(a: &SpectrumSlice, b: &SpectrumSlice) -> Option<PairFlag> {
    if a.eigenvalues.is_empty() != b.eigenvalues.is_empty() {
        Some(PairFlag::EmptyTransition)
    } else if a.grazes_edge() || b.grazes_edge() {
        Some(PairFlag::BoundaryGrazing)
    } else if a.eigenvalues.len() != b.eigenvalues.len() {
        Some(PairFlag::CountChange)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub epsilon: f64,
    pub n: usize,
    pub slices: Vec<SpectrumSlice>,
    /// `d_H` between slices `i` and `i + 1`; `f64::INFINITY` marks empty vs nonempty.
    pub adjacent_dh: Vec<f64>,
    /// Flag per adjacent pair (`None` when the pair enters the modulus).
    pub pair_flags: Vec<Option<PairFlag>>,
    /// Maximum over unflagged pairs; `None` when every pair is flagged.
    pub modulus: Option<f64>,
}

impl SweepResult {
    pub fn from_slices(grid: Vec<f64>, epsilon: f64, n: usize, slices: Vec<SpectrumSlice>) -> Self {
        let adjacent_dh = slices
            .windows(2)
            .map(|w| hausdorff_distance(&w[0].eigenvalues, &w[1].eigenvalues))
            .collect();
        let pair_flags = slices.windows(2).map(|w| pair_flag(&w[0], &w[1])).collect();
        let mut out = Self { grid, epsilon, n, slices, adjacent_dh, pair_flags, modulus: None };
        out.modulus = continuity_modulus(&out);
        out
    }

    /// Grid indices touched by a flagged pair.
    pub fn flagged_points(&self) -> Vec<usize> {
        let mut pts: Vec<usize> = self
            .pair_flags
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_some())
            .flat_map(|(i, _)| [i, i + 1])
            .collect();
        pts.dedup();
        pts
    }
}

/// Max `d_H` over unflagged adjacent pairs, or `None` ("no data").
pub fn continuity_modulus(result: &SweepResult) -> Option<f64> {
    result
        .adjacent_dh
        .iter()
        .zip(&result.pair_flags)
        .filter(|(_, f)| f.is_none())
        .map(|(d, _)| *d)
        .reduce(f64::max)
}

/// Solve every grid point of a λ sweep at fixed `(ε, n)`.
pub fn sweep_lambda(problem: &Problem, grid: &[f64], epsilon: f64, n: usize, window: &GapWindow) -> Result<SweepResult> {
    window.validate()?;
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least two grid points".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("sweep grid must be finite and sorted".into()));
    }
    problem.model.check_epsilon(epsilon)?;
    let slices = grid
        .par_iter()
        .map(|&lambda| {
            problem
                .slice(lambda, epsilon, n, window)
                .map_err(|e| Error::FailureAtLambda { lambda, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::from_slices(grid.to_vec(), epsilon, n, slices))
}

/// Uniform grid of `count` points on `[start, stop]`.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `d_H(Σ(n), Σ(n_ref))`.
    pub distance: f64,
    pub count: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub lambda: f64,
    pub epsilon: f64,
    /// The largest `n`, standing in for the infinite-dimensional operator.
    pub reference_n: usize,
    pub reference: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
}

/// Leading sections of `big` with `n` functions per block.
fn leading_section(big: &DMatrix<f64>, n_big: usize, n: usize, blocks: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(blocks * n, blocks * n);
    for bi in 0..blocks {
        for bj in 0..blocks {
            out.view_mut((bi * n, bj * n), (n, n)).copy_from(&big.view((bi * n_big, bj * n_big), (n, n)));
        }
    }
    out
}

/// Distances from each section to the largest one, which proxies `n = ∞`.
///
/// The largest section is assembled once and the smaller ones are taken as
/// its leading blocks, which is exact for the nested eigenprojections.
pub fn convergence_table(
    problem: &Problem,
    lambda: f64,
    epsilon: f64,
    n_list: &[usize],
    window: &GapWindow,
) -> Result<ConvergenceTable> {
    window.validate()?;
    if n_list.len() < 3 {
        return Err(Error::InvalidArgument("n_list needs at least three entries".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::InvalidArgument("n_list must be positive and strictly increasing".into()));
    }
    let n_ref = *n_list.last().unwrap();
    let big = problem.assemble(lambda, epsilon, n_ref)?;
    let blocks = problem.model.block_signs().len();
    let slices = n_list
        .par_iter()
        .map(|&n| {
            let m = leading_section(&big.matrix, n_ref, n, blocks);
            slice_of(&m, lambda, epsilon, n, window)
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = slices.last().unwrap().clone();
    let rows = n_list
        .iter()
        .zip(&slices)
        .map(|(&n, s)| ConvergenceRow {
            n,
            distance: hausdorff_distance(&s.eigenvalues, &reference.eigenvalues),
            count: s.eigenvalues.len(),
            flagged: s.grazes_edge() || s.eigenvalues.len() != reference.eigenvalues.len(),
        })
        .collect();
    Ok(ConvergenceTable { lambda, epsilon, reference_n: n_ref, reference: reference.eigenvalues, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub eigenvalues: Vec<f64>,
    /// `d_H` to the previous (larger) ε; `None` for the first entry.
    pub distance_to_previous: Option<f64>,
    pub flagged: bool,
}

/// Consecutive Hausdorff distances along a decreasing ε list (line model).
pub fn epsilon_table(
    problem: &Problem,
    lambda: f64,
    epsilons: &[f64],
    n: usize,
    window: &GapWindow,
) -> Result<Vec<EpsilonRow>> {
    window.validate()?;
    if problem.model.space != Space::Line {
        return Err(Error::InvalidModel("the epsilon study needs the line model".into()));
    }
    if epsilons.len() < 2 {
        return Err(Error::InvalidArgument("epsilon list needs at least two entries".into()));
    }
    if epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidBasis("every epsilon must be > 0 for the line model".into()));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("epsilon list must be strictly decreasing".into()));
    }
    let slices = epsilons
        .par_iter()
        .map(|&e| problem.slice(lambda, e, n, window))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(slices.len());
    for (i, s) in slices.iter().enumerate() {
        let (distance, flagged) = if i == 0 {
            (None, s.grazes_edge())
        } else {
            let p = &slices[i - 1];
            (Some(hausdorff_distance(&p.eigenvalues, &s.eigenvalues)), pair_flag(p, s).is_some())
        };
        rows.push(EpsilonRow { epsilon: epsilons[i], eigenvalues: s.eigenvalues.clone(), distance_to_previous: distance, flagged });
    }
    Ok(rows)
}

/// Eigenvalue branches across the grid, matched greedily by nearest value.
///
/// Returns one row per branch with `None` where the branch is absent.
pub fn track_branches(result: &SweepResult) -> Vec<Vec<Option<f64>>> {
    let steps = result.slices.len();
    let mut branches: Vec<Vec<Option<f64>>> = Vec::new();
    for (t, slice) in result.slices.iter().enumerate() {
        let mut used = vec![false; slice.eigenvalues.len()];
        let active: Vec<usize> = (0..branches.len()).filter(|&b| t > 0 && branches[b][t - 1].is_some()).collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &b in &active {
            let last = branches[b][t - 1].unwrap();
            for (k, &v) in slice.eigenvalues.iter().enumerate() {
                pairs.push(((v - last).abs(), b, k));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut taken = vec![false; branches.len()];
        for (_, b, k) in pairs {
            if !taken[b] && !used[k] {
                taken[b] = true;
                used[k] = true;
                branches[b][t] = Some(slice.eigenvalues[k]);
            }
        }
        for (k, &v) in slice.eigenvalues.iter().enumerate() {
            if !used[k] {
                let mut row = vec![None; steps];
                row[t] = Some(v);
                branches.push(row);
            }
        }
    }
    branches
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Blocks;

    fn slice(vals: &[f64]) -> SpectrumSlice {
        gap_slice(vals, &GapWindow::gap())
    }

    #[test]
    fn modulus_examples() {
        let r = SweepResult::from_slices(vec![0.0, 0.5, 1.0], 0.0, 4, vec![slice(&[0.1]), slice(&[0.2]), slice(&[0.4])]);
        assert!((r.modulus.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(r.adjacent_dh.len(), 2);

        let r = SweepResult::from_slices(vec![0.0, 1.0], 0.0, 4, vec![slice(&[0.3]), slice(&[0.3])]);
        assert_eq!(r.modulus, Some(0.0));

        let r = SweepResult::from_slices(vec![0.0, 1.0], 0.0, 4, vec![slice(&[]), slice(&[0.3])]);
        assert_eq!(r.modulus, None);
        assert_eq!(r.adjacent_dh, vec![f64::INFINITY]);
        assert_eq!(r.pair_flags, vec![Some(PairFlag::EmptyTransition)]);
        assert_eq!(r.flagged_points(), vec![0, 1]);
    }

    #[test]
    fn unperturbed_sweep_is_empty() {
        let model = ModelSpec::torus(Blocks::Gap, 0.5);
        let p = Problem::new(model, PerturbationSpec::none(&model), QuadratureSpec::default()).unwrap();
        let r = sweep_lambda(&p, &uniform_grid(0.0, 1.0, 5), 0.0, 6, &GapWindow::gap()).unwrap();
        assert!(r.slices.iter().all(|s| s.eigenvalues.is_empty()));
        assert_eq!(r.modulus, Some(0.0));

        let r = sweep_lambda(&p, &[0.4, 0.4], 0.0, 6, &GapWindow::gap()).unwrap();
        assert_eq!(r.adjacent_dh, vec![0.0]);
        assert!(sweep_lambda(&p, &[0.4], 0.0, 6, &GapWindow::gap()).is_err());
    }

    #[test]
    fn convergence_contract() {
        let model = ModelSpec::torus(Blocks::Semibounded, 0.5);
        let p = Problem::new(model, PerturbationSpec::none(&model), QuadratureSpec::default()).unwrap();
        assert!(convergence_table(&p, 0.5, 0.0, &[4, 4, 8], &GapWindow::below_one()).is_err());
        assert!(convergence_table(&p, 0.5, 0.0, &[4, 8], &GapWindow::below_one()).is_err());
        let t = convergence_table(&p, 0.5, 0.0, &[4, 8, 16], &GapWindow::below_one()).unwrap();
        assert!(t.rows.iter().all(|r| r.distance == 0.0));
    }

    #[test]
    fn epsilon_contract() {
        let model = ModelSpec::line(Blocks::Gap, 0.5);
        let p = Problem::new(model, PerturbationSpec::none(&model), QuadratureSpec::default()).unwrap();
        assert!(epsilon_table(&p, 1.0, &[1.0], 8, &GapWindow::gap()).is_err());
        assert!(epsilon_table(&p, 1.0, &[1.0, 0.0], 8, &GapWindow::gap()).is_err());
        assert!(epsilon_table(&p, 1.0, &[0.5, 1.0], 8, &GapWindow::gap()).is_err());
        let rows = epsilon_table(&p, 1.0, &[1.0, 0.5, 0.25], 8, &GapWindow::gap()).unwrap();
        assert!(rows.iter().skip(1).all(|r| r.distance_to_previous == Some(0.0)));
    }

    #[test]
    fn grids() {
        assert_eq!(uniform_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let g = uniform_grid(0.0, 1.0, 41);
        assert_eq!(g.len(), 41);
        assert_eq!(g[40], 1.0);
    }

    #[test]
    fn branch_tracking_follows_nearest_values() {
        let r = SweepResult::from_slices(
            vec![0.0, 1.0, 2.0],
            0.0,
            4,
            vec![slice(&[-0.5, 0.5]), slice(&[-0.4, 0.45]), slice(&[0.4])],
        );
        let b = track_branches(&r);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0], vec![Some(-0.5), Some(-0.4), None]);
        assert_eq!(b[1], vec![Some(0.5), Some(0.45), Some(0.4)]);
    }
}
