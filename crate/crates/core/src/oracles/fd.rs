//! Second-order finite-difference spectra of the model operators.
//!
//! Local operators (the Laplacian, the confinement and multiplication
//! kernels) give a banded matrix; after folding the periodic ring into a band
//! its eigenvalues are located by bisection on the inertia of `A − σ`.
//! Integral kernels fall back to a dense eigensolve.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::eigen::{eigenvalues_symmetric, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::model::{BlockSign, Blocks, ModelSpec, Space};
use crate::perturbation::{transport_kernel_value, Interval, Kernel, PerturbationSpec};
use crate::spectral::GapWindow;

/// Minimum number of grid points required across a kernel support.
pub const MIN_POINTS_ACROSS_SUPPORT: usize = 32;
/// Largest matrix handed to the dense fallback.
pub const MAX_DENSE_DOFS: usize = 4096;
const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Uniform grid: `points` nodes on the 2π-periodic circle, or `points`
/// interior nodes of `[-radius, radius]` with Dirichlet ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub boundary: Boundary,
    pub points: usize,
    pub radius: f64,
}

impl FdGrid {
    pub fn torus(points: usize) -> Self {
        Self { boundary: Boundary::Periodic, points, radius: PI }
    }

    pub fn line(radius: f64, points: usize) -> Self {
        Self { boundary: Boundary::Dirichlet, points, radius }
    }

    pub fn for_model(model: &ModelSpec, points: usize, radius: f64) -> Self {
        match model.space {
            Space::Torus => Self::torus(points),
            Space::Line => Self::line(radius, points),
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => 2.0 * PI / self.points as f64,
            Boundary::Dirichlet => 2.0 * self.radius / (self.points as f64 + 1.0),
        }
    }

    pub fn node(&self, j: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => j as f64 * self.spacing(),
            Boundary::Dirichlet => -self.radius + (j as f64 + 1.0) * self.spacing(),
        }
    }

    /// Same grid with the point count doubled (periodic) or the spacing halved (Dirichlet).
    pub fn refined(&self) -> Self {
        let points = match self.boundary {
            Boundary::Periodic => 2 * self.points,
            Boundary::Dirichlet => 2 * self.points + 1,
        };
        Self { points, ..*self }
    }

    fn validate(&self, model: &ModelSpec, pert: &PerturbationSpec) -> Result<()> {
        if self.points < MIN_POINTS {
            return Err(Error::InvalidArgument(format!("grid needs at least {MIN_POINTS} points")));
        }
        let expected = match model.space {
            Space::Torus => Boundary::Periodic,
            Space::Line => Boundary::Dirichlet,
        };
        if self.boundary != expected {
            return Err(Error::InvalidArgument(format!("{:?} model needs a {expected:?} grid", model.space)));
        }
        if pert.coupling.is_inactive() {
            return Ok(());
        }
        for &sign in model.block_signs() {
            let s = pert.support.block(sign);
            if self.boundary == Boundary::Dirichlet && (s.lo <= -self.radius || s.hi >= self.radius) {
                return Err(Error::InvalidArgument(format!(
                    "grid radius {} does not enclose the support {s:?}",
                    self.radius
                )));
            }
            let across = (0..self.points).filter(|&j| s.contains(self.node(j))).count();
            if across < MIN_POINTS_ACROSS_SUPPORT {
                return Err(Error::InvalidArgument(format!(
                    "support {s:?} is under-resolved: {across} grid points, need {MIN_POINTS_ACROSS_SUPPORT}"
                )));
            }
        }
        Ok(())
    }
}

/// Eigenvalues closest to zero, per block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdSpectrum {
    /// Lowest eigenvalues (semibounded) or the smallest nonnegative ones (gap), ascending.
    pub plus: Vec<f64>,
    /// Largest negative eigenvalues, by increasing magnitude; empty for semibounded models.
    pub minus: Vec<f64>,
}

/// Symmetric matrix given by its entries, solved either through the band or densely.
struct FdOperator {
    dofs: usize,
    /// Lower-triangle entries `(row, col, value)` with `row >= col`, already permuted.
    entries: Vec<(usize, usize, f64)>,
    dense: bool,
}

impl FdOperator {
    fn half_bandwidth(&self) -> usize {
        self.entries.iter().map(|&(i, j, _)| i - j).max().unwrap_or(0)
    }

    fn gershgorin(&self) -> (f64, f64) {
        let mut center = vec![0.0; self.dofs];
        let mut radius = vec![0.0; self.dofs];
        for &(i, j, v) in &self.entries {
            if i == j {
                center[i] += v;
            } else {
                radius[i] += v.abs();
                radius[j] += v.abs();
            }
        }
        let lo = center.iter().zip(&radius).map(|(c, r)| c - r).fold(f64::INFINITY, f64::min);
        let hi = center.iter().zip(&radius).map(|(c, r)| c + r).fold(f64::NEG_INFINITY, f64::max);
        (lo - 1.0, hi + 1.0)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dofs, self.dofs);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    /// Number of eigenvalues strictly below `sigma`, from the signs of the
    /// pivots of a banded `L D Lᵀ` factorisation of `A − σ`.
    fn count_below(&self, sigma: f64) -> usize {
        let m = self.dofs;
        let b = self.half_bandwidth();
        let w = b + 1;
        // band[i * w + d] holds A[i][i - d].
        let mut band = vec![0.0; m * w];
        for &(i, j, v) in &self.entries {
            band[i * w + (i - j)] += v;
        }
        for i in 0..m {
            band[i * w] -= sigma;
        }
        let tiny = f64::EPSILON * (sigma.abs() + 1.0);
        let mut d = vec![0.0; m];
        let mut negatives = 0;
        // l[i * w + dd] holds L[i][i - dd] for dd >= 1.
        let mut l = vec![0.0; m * w];
        for i in 0..m {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let mut s = band[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(b));
                for k in k0..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)] * d[k];
                }
                if j < i {
                    l[i * w + (i - j)] = s / d[j];
                } else {
                    let piv = if s == 0.0 { -tiny } else { s };
                    d[i] = piv;
                    if piv < 0.0 {
                        negatives += 1;
                    }
                }
            }
        }
        negatives
    }

    /// Eigenvalue number `k` (ascending, 0-based) by bisection on the inertia.
    fn kth_eigenvalue(&self, k: usize, bounds: (f64, f64)) -> f64 {
        let (mut lo, mut hi) = bounds;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues with indices in `range`, ascending.
    fn eigenvalues(&self, range: std::ops::Range<usize>) -> Result<Vec<f64>> {
        if self.dense {
            let all = eigenvalues_symmetric(&self.to_dense(), DEFAULT_RESIDUAL_TOL)?;
            return Ok(all[range.start.min(all.len())..range.end.min(all.len())].to_vec());
        }
        let bounds = self.gershgorin();
        Ok(range.filter(|&k| k < self.dofs).map(|k| self.kth_eigenvalue(k, bounds)).collect())
    }

    fn count(&self, sigma: f64) -> Result<usize> {
        if self.dense {
            let all = eigenvalues_symmetric(&self.to_dense(), DEFAULT_RESIDUAL_TOL)?;
            return Ok(all.iter().filter(|&&v| v < sigma).count());
        }
        Ok(self.count_below(sigma))
    }
}

/// Position of grid point `j` after folding the ring `0, N−1, 1, N−2, ...`,
/// which turns periodic neighbours into a band of half-width 2.
fn fold(j: usize, points: usize) -> usize {
    let half = points.div_ceil(2);
    if j < half {
        2 * j
    } else {
        2 * (points - 1 - j) + 1
    }
}

fn build(model: &ModelSpec, pert: &PerturbationSpec, lambda: f64, epsilon: f64, grid: &FdGrid, velocity_nodes: usize) -> Result<FdOperator> {
    model.validate()?;
    pert.validate(model)?;
    model.check_epsilon(epsilon)?;
    grid.validate(model, pert)?;
    let signs = model.block_signs();
    let blocks = signs.len();
    let n = grid.points;
    let h = grid.spacing();
    let pos = |j: usize| match grid.boundary {
        Boundary::Periodic => fold(j, n),
        Boundary::Dirichlet => j,
    };
    let dof = |j: usize, b: usize| pos(j) * blocks + b;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut push = |a: usize, c: usize, v: f64| {
        if v != 0.0 {
            let (r, s) = if a >= c { (a, c) } else { (c, a) };
            entries.push((r, s, v));
        }
    };

    let inv_h2 = 1.0 / (h * h);
    let confine = if model.space == Space::Line { epsilon } else { 0.0 };
    for (b, sign) in signs.iter().enumerate() {
        let f = sign.factor();
        for j in 0..n {
            let x = grid.node(j);
            push(dof(j, b), dof(j, b), f * (2.0 * inv_h2 + model.gap_edge() + confine * x * x));
            let next = match grid.boundary {
                Boundary::Periodic => Some((j + 1) % n),
                Boundary::Dirichlet => (j + 1 < n).then_some(j + 1),
            };
            if let Some(k) = next {
                push(dof(j, b), dof(k, b), -f * inv_h2);
            }
        }
    }

    let strength = pert.strength.eval(lambda);
    let mut dense = false;
    for (bi, &bra) in signs.iter().enumerate() {
        for (ki, &ket) in signs.iter().enumerate() {
            // Upper block pairs are covered by symmetry.
            if ki > bi {
                continue;
            }
            let w = pert.coupling.weight(bra, ket) * strength;
            if w == 0.0 {
                continue;
            }
            let (sb, sk) = (pert.support.block(bra), pert.support.block(ket));
            match &pert.kernel {
                Kernel::Multiplication { profile } => {
                    let Some(common) = sb.intersect(&sk) else { continue };
                    for j in 0..n {
                        let x = grid.node(j);
                        if common.contains(x) {
                            push(dof(j, bi), dof(j, ki), w * profile.eval(x));
                        }
                    }
                }
                kernel => {
                    dense = true;
                    let value = |x: f64, y: f64| -> Result<f64> {
                        Ok(match kernel {
                            Kernel::Separable { factors } => {
                                factors.iter().map(|f| f.sign * f.profile.eval(x) * f.profile.eval(y)).sum()
                            }
                            Kernel::Transport { velocity } => {
                                transport_kernel_value(lambda, x, y, velocity, velocity_nodes)?
                            }
                            Kernel::Multiplication { .. } => unreachable!(),
                        })
                    };
                    let inside = |s: &Interval| -> Vec<usize> { (0..n).filter(|&j| s.contains(grid.node(j))).collect() };
                    let rows = inside(&sb);
                    let cols = inside(&sk);
                    for &j in &rows {
                        for &k in &cols {
                            if bi == ki && k > j {
                                continue;
                            }
                            push(dof(j, bi), dof(k, ki), w * h * value(grid.node(j), grid.node(k))?);
                        }
                    }
                }
            }
        }
    }
    let dofs = blocks * n;
    if dense && dofs > MAX_DENSE_DOFS {
        return Err(Error::InvalidArgument(format!(
            "integral kernels need a dense solve; {dofs} unknowns exceed the limit of {MAX_DENSE_DOFS}"
        )));
    }
    Ok(FdOperator { dofs, entries, dense })
}

/// The `count` eigenvalues nearest the gap on each side (see [`FdSpectrum`]).
pub fn fd_spectrum(
    model: &ModelSpec,
    pert: &PerturbationSpec,
    lambda: f64,
    epsilon: f64,
    grid: &FdGrid,
    count: usize,
) -> Result<FdSpectrum> {
    let op = build(model, pert, lambda, epsilon, grid, crate::quadrature::DEFAULT_VELOCITY_NODES)?;
    match model.blocks {
        Blocks::Semibounded => Ok(FdSpectrum { plus: op.eigenvalues(0..count)?, minus: vec![] }),
        Blocks::Gap => {
            let negatives = op.count(0.0)?;
            let plus = op.eigenvalues(negatives..negatives + count)?;
            let mut minus = op.eigenvalues(negatives.saturating_sub(count)..negatives)?;
            minus.reverse();
            Ok(FdSpectrum { plus, minus })
        }
    }
}

/// All finite-difference eigenvalues inside an open window, ascending.
pub fn fd_eigenvalues_in_window(
    model: &ModelSpec,
    pert: &PerturbationSpec,
    lambda: f64,
    epsilon: f64,
    grid: &FdGrid,
    window: &GapWindow,
) -> Result<Vec<f64>> {
    window.validate()?;
    let op = build(model, pert, lambda, epsilon, grid, crate::quadrature::DEFAULT_VELOCITY_NODES)?;
    let below_lo = match window.lo {
        Some(lo) => op.count(lo)? + usize::from(op.count(lo.next_up())? > op.count(lo)?),
        None => 0,
    };
    let below_hi = op.count(window.hi)?;
    let vals = op.eigenvalues(below_lo..below_hi.max(below_lo))?;
    Ok(vals.into_iter().filter(|&v| window.contains(v)).collect())
}

/// Block sign helper for callers comparing per-block lists.
pub fn block_values(spec: &FdSpectrum, sign: BlockSign) -> &[f64] {
    match sign {
        BlockSign::Plus => &spec.plus,
        BlockSign::Minus => &spec.minus,
    }
}
