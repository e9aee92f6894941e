//! Dense real symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-type shifts (the EISPACK `tred2`/`tql2` pair).
//! No randomness is involved, so identical input gives bit-identical output.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default residual tolerance relative to the spectral norm.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-12;

const MAX_QL_SWEEPS: usize = 60;

/// Eigenvalues in ascending order and, column by column, their eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricEigen {
    /// Largest `‖T v - μ v‖` over all returned pairs.
    pub fn max_residual(&self, matrix: &DMatrix<f64>) -> f64 {
        let tv = matrix * &self.eigenvectors;
        let mut worst: f64 = 0.0;
        for (j, &mu) in self.eigenvalues.iter().enumerate() {
            let r = (tv.column(j) - self.eigenvectors.column(j) * mu).norm();
            worst = worst.max(r);
        }
        worst
    }

    /// `max |μ|`, the spectral norm of the decomposed matrix.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Only the lower triangle is read. Fails if the QL iteration does not
/// converge or if the eigenpair residuals exceed `tol · ‖T‖`.
pub fn symmetric_eigen(matrix: &DMatrix<f64>, tol: f64) -> Result<SymmetricEigen> {
    let n = check_square(matrix)?;
    if n == 0 {
        return Ok(SymmetricEigen { eigenvalues: vec![], eigenvectors: DMatrix::zeros(0, 0) });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    // Row-major working copy; v[i * n + j] is V[i][j].
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let a = matrix[(i, j)];
            v[i * n + j] = a;
            v[j * n + i] = a;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;

    let eigenvectors = DMatrix::from_fn(n, n, |i, j| v[i * n + j]);
    let out = SymmetricEigen { eigenvalues: d, eigenvectors };

    let scale = out.spectral_norm().max(f64::MIN_POSITIVE);
    let residual = out.max_residual(matrix);
    if residual > tol * scale {
        return Err(Error::NumericalFailure(format!(
            "eigenpair residual {residual:e} exceeds {tol:e} * {scale:e}"
        )));
    }
    Ok(out)
}

/// Eigenvalues only, ascending.
pub fn eigenvalues_symmetric(matrix: &DMatrix<f64>, tol: f64) -> Result<Vec<f64>> {
    symmetric_eigen(matrix, tol).map(|e| e.eigenvalues)
}

fn check_square(matrix: &DMatrix<f64>) -> Result<usize> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(Error::NumericalFailure(format!(
                        "QL iteration did not converge for eigenvalue {l} after {MAX_QL_SWEEPS} sweeps"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * h;
                        v[k * n + i] = c * v[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Selection sort keeps the permutation deterministic.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                v.swap(row * n + i, row * n + k);
            }
        }
    }
    Ok(())
}
