//! Gap windows, Hausdorff distance between spectra, the uniform lower bound
//! and the kernel-crossing search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{symmetric_eigen, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::model::{Blocks, ModelSpec};
use crate::perturbation::{assemble_k_blocks, Bases, PerturbationSpec};
use crate::quadrature::QuadratureSpec;

pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-9;
pub const DEFAULT_CROSSING_TOL: f64 = 1e-8;
const MAX_BISECTIONS: usize = 200;

/// Open interval `(lo, hi)`; `lo = None` stands for `-∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapWindow {
    #[serde(default)]
    pub lo: Option<f64>,
    pub hi: f64,
    #[serde(default = "default_boundary_tol")]
    pub boundary_tol: f64,
}

fn default_boundary_tol() -> f64 {
    DEFAULT_BOUNDARY_TOL
}

impl GapWindow {
    /// `(-1, 1)`, the window for models with two blocks.
    pub fn gap() -> Self {
        Self { lo: Some(-1.0), hi: 1.0, boundary_tol: DEFAULT_BOUNDARY_TOL }
    }

    /// `(-∞, 1)`, the window for semibounded models.
    pub fn below_one() -> Self {
        Self { lo: None, hi: 1.0, boundary_tol: DEFAULT_BOUNDARY_TOL }
    }

    pub fn for_model(model: &ModelSpec) -> Self {
        match model.blocks {
            Blocks::Gap => Self::gap(),
            Blocks::Semibounded => Self::below_one(),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.hi.is_finite() {
            return Err(Error::InvalidArgument("window upper edge must be finite".into()));
        }
        if let Some(lo) = self.lo {
            if !lo.is_finite() || lo >= self.hi {
                return Err(Error::InvalidArgument(format!("window needs lo < hi, got ({lo}, {})", self.hi)));
            }
        }
        if !(self.boundary_tol > 0.0) {
            return Err(Error::InvalidArgument("boundary_tol must be > 0".into()));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        x < self.hi && self.lo.is_none_or(|lo| x > lo)
    }

    pub fn near_edge(&self, x: f64) -> bool {
        (x - self.hi).abs() <= self.boundary_tol
            || self.lo.is_some_and(|lo| (x - lo).abs() <= self.boundary_tol)
    }
}

/// Eigenvalues of one section inside the window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSlice {
    pub lambda: f64,
    pub epsilon: f64,
    pub n: usize,
    pub window: GapWindow,
    /// Ascending, strictly inside the open window.
    pub eigenvalues: Vec<f64>,
    pub all_eigenvalues_count: usize,
    /// Positions in `eigenvalues` lying within `boundary_tol` of an edge.
    pub boundary_flags: Vec<usize>,
    /// Excluded eigenvalues lying within `boundary_tol` outside an edge.
    pub grazing_outside: usize,
    /// Smallest eigenvalue of the whole section.
    pub min_eigenvalue: Option<f64>,
}

impl SpectrumSlice {
    /// True if any eigenvalue (inside or just outside) touches an edge.
    pub fn grazes_edge(&self) -> bool {
        !self.boundary_flags.is_empty() || self.grazing_outside > 0
    }
}

/// Filter a sorted spectrum by the open window and flag edge-grazing values.
pub fn gap_slice(eigs: &[f64], window: &GapWindow) -> SpectrumSlice {
    let mut eigenvalues = Vec::new();
    let mut boundary_flags = Vec::new();
    let mut grazing_outside = 0;
    for &e in eigs {
        if window.contains(e) {
            if window.near_edge(e) {
                boundary_flags.push(eigenvalues.len());
            }
            eigenvalues.push(e);
        } else if window.near_edge(e) {
            grazing_outside += 1;
        }
    }
    SpectrumSlice {
        lambda: f64::NAN,
        epsilon: f64::NAN,
        n: 0,
        window: *window,
        eigenvalues,
        all_eigenvalues_count: eigs.len(),
        boundary_flags,
        grazing_outside,
        min_eigenvalue: eigs.first().copied(),
    }
}

/// Sorted copy with NaNs rejected by the caller's contract.
fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_{x ∈ from} inf_{y ∈ to} |x - y|` for sorted, nonempty inputs.
fn directed(from: &[f64], to: &[f64]) -> f64 {
    let mut j = 0;
    let mut worst: f64 = 0.0;
    for &x in from {
        while j + 1 < to.len() && to[j + 1] <= x {
            j += 1;
        }
        let mut d = (x - to[j]).abs();
        if j + 1 < to.len() {
            d = d.min((to[j + 1] - x).abs());
        }
        worst = worst.max(d);
    }
    worst
}

/// Hausdorff distance between finite subsets of the real line.
///
/// `d_H(∅, ∅) = 0`; an empty set against a nonempty one gives `f64::INFINITY`.
pub fn hausdorff_distance(x: &[f64], y: &[f64]) -> f64 {
    match (x.is_empty(), y.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => {
            let xs = sorted(x);
            let ys = sorted(y);
            directed(&xs, &ys).max(directed(&ys, &xs))
        }
    }
}

/// `1 + gap_margin − max_λ ‖K_{n_probe}(λ)‖` for a semibounded model.
pub fn numerical_range_lower_bound(
    model: &ModelSpec,
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    lambdas: &[f64],
    n_probe: usize,
    epsilon: f64,
) -> Result<f64> {
    if model.blocks != Blocks::Semibounded {
        return Err(Error::InvalidModel("the numerical-range bound needs a semibounded model".into()));
    }
    let bases = Bases::new(model, epsilon, n_probe)?;
    let norms = lambdas
        .par_iter()
        .map(|&l| {
            let k = assemble_k_blocks(pert, quad, &bases, n_probe, l)?;
            Ok(symmetric_eigen(&k.matrix, DEFAULT_RESIDUAL_TOL)?.spectral_norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let sup = norms.into_iter().fold(0.0, f64::max);
    Ok(model.gap_edge() - sup)
}

/// Signed eigenvalue of smallest magnitude.
pub fn nearest_to_zero(eigs: &[f64]) -> Option<f64> {
    eigs.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs()))
}

/// Result of a kernel-crossing search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub lambda: f64,
    pub value: f64,
    /// Grid cell in which the sign change was detected.
    pub grid_bracket: (f64, f64),
    /// Bracket left when bisection stopped.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Locate a zero of `curve` by scanning `grid` for a sign change and bisecting.
///
/// The scan evaluates grid points in parallel; bisection is sequential. The
/// first sign change in grid order is refined until `|curve(λ)| ≤ tol`.
pub fn find_kernel_crossing<F>(curve: F, grid: &[f64], tol: f64) -> Result<Crossing>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("crossing grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("crossing grid must be strictly increasing".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("crossing tolerance must be > 0".into()));
    }
    let values = grid.par_iter().map(|&l| curve(l)).collect::<Result<Vec<f64>>>()?;
    if let Some(i) = values.iter().position(|v| v.abs() <= tol) {
        let l = grid[i];
        return Ok(Crossing { lambda: l, value: values[i], grid_bracket: (l, l), bracket: (l, l), iterations: 0 });
    }
    let cell = values
        .windows(2)
        .position(|w| w[0].signum() != w[1].signum())
        .ok_or_else(|| Error::NoCrossing(format!("no sign change on {} grid points", grid.len())))?;

    let (mut a, mut b) = (grid[cell], grid[cell + 1]);
    let mut fa = values[cell];
    let grid_bracket = (a, b);
    for it in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Err(Error::NumericalFailure(format!(
                "bracket [{a}, {b}] collapsed without |mu| <= {tol}; the curve jumps across zero"
            )));
        }
        let fm = curve(mid)?;
        if fm.abs() <= tol {
            return Ok(Crossing { lambda: mid, value: fm, grid_bracket, bracket: (a, b), iterations: it });
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Err(Error::NumericalFailure(format!("bisection did not reach |mu| <= {tol}")))
}
