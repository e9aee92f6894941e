//! Finite-dimensional sections of `M^λ_ε = A_ε + K^λ`.
//!
//! The restricted operator lives on the span of the first `n` eigenfunctions
//! of each block, so its matrix has size `n` (semibounded) or `2n` (gap),
//! ordered `[+ block, - block]`. The padded variant keeps `n_pad` functions
//! per block and sends the discarded ones to a constant `M`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{a_epsilon_diagonal, BlockSign, ModelSpec};
use crate::perturbation::{assemble_k_blocks, Bases, PerturbationSpec};
use crate::quadrature::QuadratureSpec;

/// Default shift for the discarded directions of the padded operator.
pub const DEFAULT_HAT_SHIFT: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedOperator {
    pub lambda: f64,
    pub epsilon: f64,
    pub n: usize,
    /// `(n_+, n_-)`; `n_- = 0` for semibounded models.
    pub block_dims: (usize, usize),
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub symmetry_defect: f64,
    pub model: ModelSpec,
    #[serde(skip)]
    pub perturbation: PerturbationSpec,
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `((T + Tᵀ)/2, max |T - Tᵀ|)`.
pub fn symmetrize(matrix: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let mut out = matrix.clone();
    let mut defect: f64 = 0.0;
    for i in 0..rows {
        for j in (i + 1)..cols {
            let a = matrix[(i, j)];
            let b = matrix[(j, i)];
            defect = defect.max((a - b).abs());
            let m = 0.5 * (a + b);
            out[(i, j)] = m;
            out[(j, i)] = m;
        }
    }
    Ok((out, defect))
}

fn a_part(bases: &Bases, n: usize) -> Result<Vec<f64>> {
    let mut diag = a_epsilon_diagonal(&bases.plus, n)?;
    if let Some(minus) = &bases.minus {
        diag.extend(a_epsilon_diagonal(minus, n)?);
    }
    Ok(diag)
}

/// The restriction of `M^λ_ε` to the first `n` eigenfunctions of each block.
pub fn assemble_truncated(
    model: &ModelSpec,
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    lambda: f64,
    epsilon: f64,
    n: usize,
) -> Result<TruncatedOperator> {
    assemble_in(model, pert, quad, lambda, epsilon, n, n)
}

/// Same as [`assemble_truncated`] with bases sized for `n_max >= n`, so that
/// nested sections reuse the same enumeration.
pub fn assemble_in(
    model: &ModelSpec,
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    lambda: f64,
    epsilon: f64,
    n: usize,
    n_max: usize,
) -> Result<TruncatedOperator> {
    model.validate()?;
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    let bases = Bases::new(model, epsilon, n_max.max(n))?;
    let k = assemble_k_blocks(pert, quad, &bases, n, lambda)?;
    let mut matrix = k.matrix;
    for (i, a) in a_part(&bases, n)?.into_iter().enumerate() {
        matrix[(i, i)] += a;
    }
    let (matrix, defect) = symmetrize(&matrix)?;
    let minus = if bases.minus.is_some() { n } else { 0 };
    Ok(TruncatedOperator {
        lambda,
        epsilon,
        n,
        block_dims: (n, minus),
        matrix,
        symmetry_defect: defect.max(k.defect),
        model: *model,
        perturbation: pert.clone(),
    })
}

/// `G M G + M_shift (1 - G)` on `n_pad` functions per block.
#[allow(clippy::too_many_arguments)]
pub fn assemble_hat(
    model: &ModelSpec,
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    lambda: f64,
    epsilon: f64,
    n: usize,
    n_pad: usize,
    shift: f64,
) -> Result<TruncatedOperator> {
    if !(shift > 1.0) {
        return Err(Error::InvalidArgument(format!("hat shift must exceed 1, got {shift}")));
    }
    if n_pad < n {
        return Err(Error::InvalidArgument(format!("n_pad = {n_pad} is smaller than n = {n}")));
    }
    let tilde = assemble_in(model, pert, quad, lambda, epsilon, n, n_pad)?;
    let blocks = model.block_signs().len();
    let mut matrix = DMatrix::from_diagonal_element(blocks * n_pad, blocks * n_pad, shift);
    for bi in 0..blocks {
        for bj in 0..blocks {
            let src = tilde.matrix.view((bi * n, bj * n), (n, n));
            matrix.view_mut((bi * n_pad, bj * n_pad), (n, n)).copy_from(&src);
        }
    }
    let minus = if blocks == 2 { n_pad } else { 0 };
    Ok(TruncatedOperator {
        lambda,
        epsilon,
        n: n_pad,
        block_dims: (n_pad, minus),
        matrix,
        symmetry_defect: tilde.symmetry_defect,
        model: *model,
        perturbation: pert.clone(),
    })
}

/// Row/column index of basis function `k` of block `sign` in a section with
/// `n` functions per block.
pub fn block_index(sign: BlockSign, k: usize, n: usize) -> usize {
    match sign {
        BlockSign::Plus => k,
        BlockSign::Minus => n + k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigenvalues_symmetric;
    use crate::model::Blocks;
    use crate::perturbation::{Coupling, Interval, Kernel, Profile, Strength, Support};
    use std::f64::consts::PI;

    fn cos_pert(coupling: Coupling) -> PerturbationSpec {
        PerturbationSpec {
            kernel: Kernel::Multiplication {
                profile: Profile::Cosine { amplitude: -3.0, wavenumber: 1.0, phase: 0.0 },
            },
            support: Support::uniform(Interval::new(0.0, 2.0 * PI)),
            strength: Strength::Linear { c0: 1.0 },
            coupling,
        }
    }

    #[test]
    fn symmetrize_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let (s, d) = symmetrize(&m).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert_eq!(d, 1.0);
        let sym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(symmetrize(&sym).unwrap(), (sym.clone(), 0.0));
        assert!(matches!(symmetrize(&DMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn unperturbed_section_is_diagonal() {
        let model = ModelSpec::torus(Blocks::Gap, 0.0);
        let t = assemble_truncated(&model, &PerturbationSpec::none(&model), &QuadratureSpec::default(), 0.3, 0.0, 4).unwrap();
        let expected = [1.0, 2.0, 2.0, 5.0, -1.0, -2.0, -2.0, -5.0];
        assert_eq!(t.matrix, DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&expected)));
        assert_eq!(t.symmetry_defect, 0.0);
        assert_eq!(t.block_dims, (4, 4));
    }

    #[test]
    fn sections_are_nested() {
        let model = ModelSpec::torus(Blocks::Gap, 0.5);
        let pert = cos_pert(Coupling { pp: 1.0, pm: 0.5, mm: -1.0 });
        let q = QuadratureSpec::default();
        let small = assemble_in(&model, &pert, &q, 0.7, 0.0, 6, 12).unwrap();
        let big = assemble_in(&model, &pert, &q, 0.7, 0.0, 12, 12).unwrap();
        for bi in 0..2 {
            for bj in 0..2 {
                let a = small.matrix.view((bi * 6, bj * 6), (6, 6));
                let b = big.matrix.view((bi * 12, bj * 12), (6, 6));
                assert!((a - b).abs().max() < 1e-13);
            }
        }
    }

    #[test]
    fn hat_with_empty_complement_is_tilde() {
        let model = ModelSpec::torus(Blocks::Gap, 0.5);
        let pert = cos_pert(Coupling { pp: 1.0, pm: 0.5, mm: -1.0 });
        let q = QuadratureSpec::default();
        let t = assemble_truncated(&model, &pert, &q, 1.0, 0.0, 8).unwrap();
        let h = assemble_hat(&model, &pert, &q, 1.0, 0.0, 8, 8, DEFAULT_HAT_SHIFT).unwrap();
        assert_eq!(t.matrix, h.matrix);
    }

    #[test]
    fn hat_pads_with_shift() {
        let model = ModelSpec::torus(Blocks::Semibounded, 0.5);
        let h = assemble_hat(&model, &PerturbationSpec::none(&model), &QuadratureSpec::default(), 1.0, 0.0, 2, 4, 5.0).unwrap();
        let d: Vec<f64> = h.matrix.diagonal().iter().copied().collect();
        assert_eq!(d, vec![1.5, 2.5, 5.0, 5.0]);
        assert!(assemble_hat(&model, &PerturbationSpec::none(&model), &QuadratureSpec::default(), 1.0, 0.0, 2, 4, 1.0).is_err());
    }

    #[test]
    fn hat_window_matches_tilde_semibounded() {
        let model = ModelSpec::torus(Blocks::Semibounded, 0.0);
        let pert = cos_pert(Coupling::plus_only(1.0));
        let q = QuadratureSpec::default();
        let t = assemble_truncated(&model, &pert, &q, 1.0, 0.0, 16).unwrap();
        let h = assemble_hat(&model, &pert, &q, 1.0, 0.0, 16, 32, 10.0).unwrap();
        let et: Vec<f64> = eigenvalues_symmetric(&t.matrix, 1e-12).unwrap().into_iter().filter(|&v| v < 1.0).collect();
        let eh: Vec<f64> = eigenvalues_symmetric(&h.matrix, 1e-12).unwrap().into_iter().filter(|&v| v < 1.0).collect();
        assert!(!et.is_empty());
        assert_eq!(et.len(), eh.len());
        for (a, b) in et.iter().zip(&eh) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn line_requires_positive_epsilon() {
        let model = ModelSpec::line(Blocks::Gap, 0.5);
        assert!(assemble_truncated(&model, &PerturbationSpec::none(&model), &QuadratureSpec::default(), 0.5, 0.0, 4).is_err());
    }
}
