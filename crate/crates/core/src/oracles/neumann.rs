//! Second Neumann series for `(T + K − σ)^{-1}` with a real shift.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eigen::{symmetric_eigen, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct NeumannReport {
    /// `max |S_k − (T + K − σ)^{-1}|` for partial sums `k = 0..=terms`.
    pub residuals: Vec<f64>,
    /// Residual of the full requested series.
    pub residual: f64,
    /// `‖K (T − σ)^{-1}‖` in the energy norm of `T − σ`, which equals the
    /// spectral radius of `K (T − σ)^{-1}`.
    pub contraction: f64,
    /// The same operator measured in the Euclidean norm.
    pub euclidean_contraction: f64,
    /// `contraction < 1`.
    pub valid: bool,
}

/// Compare `(T − σ)^{-1} Σ_{k ≤ terms} (−K (T − σ)^{-1})^k` against a direct solve.
///
/// `σ` must lie strictly below the spectrum of `T`.
pub fn neumann_resolvent_check(t: &DMatrix<f64>, k: &DMatrix<f64>, sigma: f64, terms: usize) -> Result<NeumannReport> {
    let n = t.nrows();
    if t.shape() != (n, n) {
        let (rows, cols) = t.shape();
        return Err(Error::NotSquare { rows, cols });
    }
    if k.shape() != (n, n) {
        return Err(Error::InvalidArgument("T and K must have the same shape".into()));
    }
    let et = symmetric_eigen(t, DEFAULT_RESIDUAL_TOL)?;
    let lowest = et.eigenvalues.first().copied().unwrap_or(f64::INFINITY);
    if !(sigma < lowest) {
        return Err(Error::InvalidArgument(format!(
            "shift {sigma} is not below the spectrum of T (lowest eigenvalue {lowest})"
        )));
    }
    let v = &et.eigenvectors;
    let diag = |f: &dyn Fn(f64) -> f64| {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, et.eigenvalues.iter().map(|&m| f(m - sigma))))
    };
    let resolvent = v * diag(&|d| 1.0 / d) * v.transpose();
    let root = v * diag(&|d| 1.0 / d.sqrt()) * v.transpose();

    let x = k * &resolvent;
    let euclidean_contraction = x.clone().svd(false, false).singular_values.max();
    let sym = &root * k * &root;
    let sym = 0.5 * (&sym + sym.transpose());
    let contraction = symmetric_eigen(&sym, DEFAULT_RESIDUAL_TOL)?.spectral_norm();

    let shifted = t + k - DMatrix::<f64>::identity(n, n) * sigma;
    let direct = shifted
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("T + K − σ is singular".into()))?;

    let minus_x = -x;
    let mut term = resolvent.clone();
    let mut sum = resolvent;
    let mut residuals = Vec::with_capacity(terms + 1);
    residuals.push((&sum - &direct).abs().max());
    for _ in 0..terms {
        term = &term * &minus_x;
        sum += &term;
        residuals.push((&sum - &direct).abs().max());
    }
    Ok(NeumannReport {
        residual: *residuals.last().unwrap(),
        residuals,
        contraction,
        euclidean_contraction,
        valid: contraction < 1.0,
    })
}

/// Geometric decay rate of a residual sequence.
///
/// Least-squares slope of `ln r_k` over the entries after `skip` that stay
/// above `floor`; `None` if fewer than three such entries remain.
pub fn geometric_rate(residuals: &[f64], skip: usize, floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .skip(skip)
        .take_while(|(_, &r)| r > floor)
        .map(|(k, &r)| (k as f64, r.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}
