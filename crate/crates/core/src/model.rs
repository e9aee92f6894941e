//! Unperturbed block operators and the eigenbases of their confined versions.
//!
//! Each block acts as `-d²/dx² + 1 + m + ε W` on either the 2π-periodic torus
//! (where `W = 0`) or the real line (where `W = x²`). The `-` block is the
//! negation of the same operator, so both blocks share eigenfunctions.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default shift added to `-d²/dx² + 1`, which sets the gap margin.
pub const DEFAULT_GAP_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// The circle of length 2π.
    Torus,
    /// The whole real line.
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blocks {
    /// Only the positive block is present.
    Semibounded,
    /// `diag(A_+, -A_-)` with a spectral gap around zero.
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confinement {
    None,
    /// `W_± = x²`.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl BlockSign {
    pub fn factor(self) -> f64 {
        match self {
            BlockSign::Plus => 1.0,
            BlockSign::Minus => -1.0,
        }
    }
}

/// The unperturbed model operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub space: Space,
    pub blocks: Blocks,
    #[serde(default = "default_gap_margin")]
    pub gap_margin: f64,
    pub confinement: Confinement,
}

fn default_gap_margin() -> f64 {
    DEFAULT_GAP_MARGIN
}

impl ModelSpec {
    pub fn torus(blocks: Blocks, gap_margin: f64) -> Self {
        Self { space: Space::Torus, blocks, gap_margin, confinement: Confinement::None }
    }

    pub fn line(blocks: Blocks, gap_margin: f64) -> Self {
        Self { space: Space::Line, blocks, gap_margin, confinement: Confinement::Harmonic }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_margin >= 0.0) || !self.gap_margin.is_finite() {
            return Err(Error::InvalidModel(format!(
                "gap_margin must be a finite value >= 0, got {}",
                self.gap_margin
            )));
        }
        match (self.space, self.confinement) {
            (Space::Torus, Confinement::None) | (Space::Line, Confinement::Harmonic) => Ok(()),
            (Space::Torus, Confinement::Harmonic) => Err(Error::InvalidModel(
                "the torus model has compact resolvent and takes no confinement".into(),
            )),
            (Space::Line, Confinement::None) => Err(Error::InvalidModel(
                "the line model needs harmonic confinement to discretise its spectrum".into(),
            )),
        }
    }

    /// Bottom of the `+` block: `1 + gap_margin`.
    pub fn gap_edge(&self) -> f64 {
        1.0 + self.gap_margin
    }

    /// Blocks present in this model, `+` first.
    pub fn block_signs(&self) -> &'static [BlockSign] {
        match self.blocks {
            Blocks::Semibounded => &[BlockSign::Plus],
            Blocks::Gap => &[BlockSign::Plus, BlockSign::Minus],
        }
    }

    /// Whether `ε` is admissible for building a discrete basis.
    pub fn check_epsilon(&self, epsilon: f64) -> Result<()> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidBasis(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if self.space == Space::Line && epsilon <= 0.0 {
            return Err(Error::InvalidBasis(
                "the line model has no discrete basis at epsilon = 0".into(),
            ));
        }
        Ok(())
    }
}

/// Signed Fourier mode for position `index` of the torus enumeration
/// `0, 1, -1, 2, -2, ...`. Positive modes are cosines, negative ones sines.
pub fn torus_mode(index: usize) -> i64 {
    if index == 0 {
        0
    } else if index % 2 == 1 {
        (index as i64 + 1) / 2
    } else {
        -(index as i64 / 2)
    }
}

/// `k² + 1 + m`, the torus eigenvalue for Fourier mode `k`.
pub fn fourier_eigenvalue(model: &ModelSpec, k: i64) -> Result<f64> {
    if model.space != Space::Torus {
        return Err(Error::InvalidModel("fourier_eigenvalue needs the torus model".into()));
    }
    let k = k as f64;
    Ok(k * k + model.gap_edge())
}

/// `±(1 + m + √ε (2k + 1))`, the confined line eigenvalue.
pub fn hermite_eigenvalue(model: &ModelSpec, epsilon: f64, k: usize, sign: BlockSign) -> Result<f64> {
    if model.space != Space::Line || model.confinement != Confinement::Harmonic {
        return Err(Error::InvalidModel(
            "hermite_eigenvalue needs the harmonically confined line model".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidBasis(format!("epsilon must be > 0, got {epsilon}")));
    }
    let value = model.gap_edge() + epsilon.sqrt() * (2.0 * k as f64 + 1.0);
    Ok(sign.factor() * value)
}

/// Eigenbasis of `A_ε` restricted to one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub model: ModelSpec,
    pub block_sign: BlockSign,
    pub epsilon: f64,
    pub n_max: usize,
}

impl BasisSpec {
    pub fn new(model: ModelSpec, block_sign: BlockSign, epsilon: f64, n_max: usize) -> Result<Self> {
        model.validate()?;
        model.check_epsilon(epsilon)?;
        if n_max == 0 {
            return Err(Error::InvalidBasis("n_max must be positive".into()));
        }
        Ok(Self { model, block_sign, epsilon, n_max })
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.n_max {
            return Err(Error::InvalidBasis(format!("index {k} exceeds n_max = {}", self.n_max)));
        }
        Ok(())
    }

    /// Eigenvalue attached to basis index `k` (with the block sign applied).
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        match self.model.space {
            Space::Torus => {
                Ok(self.block_sign.factor() * fourier_eigenvalue(&self.model, torus_mode(k))?)
            }
            Space::Line => hermite_eigenvalue(&self.model, self.epsilon, k, self.block_sign),
        }
    }

    /// Length scale `ε^{1/4}` of the Hermite functions.
    fn hermite_scale(&self) -> f64 {
        self.epsilon.powf(0.25)
    }

    /// Upper bound on the local angular frequency of the first `n` functions.
    pub fn max_frequency(&self, n: usize) -> f64 {
        match self.model.space {
            Space::Torus => n.div_ceil(2) as f64,
            Space::Line => self.hermite_scale() * (2.0 * n as f64 + 1.0).sqrt(),
        }
    }

    /// Values of the first `out.len()` basis functions at `x`.
    pub fn evaluate_all(&self, x: f64, out: &mut [f64]) {
        match self.model.space {
            Space::Torus => {
                let c0 = 1.0 / (2.0 * PI).sqrt();
                let c = 1.0 / PI.sqrt();
                for (i, v) in out.iter_mut().enumerate() {
                    let k = torus_mode(i);
                    *v = if k == 0 {
                        c0
                    } else if k > 0 {
                        c * (k as f64 * x).cos()
                    } else {
                        c * (-k as f64 * x).sin()
                    };
                }
            }
            Space::Line => {
                let s = self.hermite_scale();
                hermite_functions(s * x, out);
                let norm = s.sqrt();
                for v in out.iter_mut() {
                    *v *= norm;
                }
            }
        }
    }
}

/// Normalised Hermite functions `h_0(y), ..., h_{K-1}(y)` written into `out`.
///
/// Runs the three-term recurrence without the Gaussian factor and rescales
/// on the fly, so large indices do not underflow or overflow.
pub fn hermite_functions(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    const BIG: f64 = 1e150;
    let ln_big = BIG.ln();
    // rescales[k]: number of divisions by BIG applied before out[k] was written.
    let mut rescales = vec![0i32; out.len()];
    let mut count = 0;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    out[0] = cur;
    for k in 1..out.len() {
        let kf = k as f64;
        let next = (2.0 / kf).sqrt() * y * cur - ((kf - 1.0) / kf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            count += 1;
        }
        out[k] = cur;
        rescales[k] = count;
    }
    let base = -0.5 * y * y;
    for (v, &r) in out.iter_mut().zip(&rescales) {
        *v *= (base + r as f64 * ln_big).exp();
    }
}

/// Value of the L²-normalised basis function `k` at `x`.
pub fn evaluate_basis_function(basis: &BasisSpec, k: usize, x: f64) -> Result<f64> {
    basis.check_index(k)?;
    let mut buf = vec![0.0; k + 1];
    basis.evaluate_all(x, &mut buf);
    Ok(buf[k])
}

/// First `n` eigenvalues of the block, ordered by absolute value.
pub fn a_epsilon_diagonal(basis: &BasisSpec, n: usize) -> Result<Vec<f64>> {
    basis.model.check_epsilon(basis.epsilon)?;
    if n > basis.n_max {
        return Err(Error::InvalidBasis(format!("n = {n} exceeds n_max = {}", basis.n_max)));
    }
    (0..n).map(|k| basis.eigenvalue(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Rule;

    fn torus() -> ModelSpec {
        ModelSpec::torus(Blocks::Semibounded, 0.0)
    }

    #[test]
    fn torus_enumeration_order() {
        let modes: Vec<i64> = (0..7).map(torus_mode).collect();
        assert_eq!(modes, vec![0, 1, -1, 2, -2, 3, -3]);
    }

    #[test]
    fn fourier_eigenvalues() {
        assert_eq!(fourier_eigenvalue(&torus(), 0).unwrap(), 1.0);
        assert_eq!(fourier_eigenvalue(&torus(), 1).unwrap(), 2.0);
        let shifted = ModelSpec::torus(Blocks::Semibounded, 0.5);
        assert_eq!(fourier_eigenvalue(&shifted, -3).unwrap(), 10.5);
        assert!(fourier_eigenvalue(&ModelSpec::line(Blocks::Gap, 0.0), 1).is_err());
    }

    #[test]
    fn hermite_eigenvalues() {
        let line = ModelSpec::line(Blocks::Gap, 0.0);
        assert_eq!(hermite_eigenvalue(&line, 1.0, 0, BlockSign::Plus).unwrap(), 2.0);
        assert_eq!(hermite_eigenvalue(&line, 0.25, 1, BlockSign::Plus).unwrap(), 2.5);
        assert_eq!(hermite_eigenvalue(&line, 1.0, 0, BlockSign::Minus).unwrap(), -2.0);
        assert!(hermite_eigenvalue(&line, 0.0, 0, BlockSign::Plus).is_err());
        assert!(hermite_eigenvalue(&line, -1.0, 0, BlockSign::Plus).is_err());
    }

    #[test]
    fn basis_values_at_known_points() {
        let b = BasisSpec::new(torus(), BlockSign::Plus, 0.0, 8).unwrap();
        let v = evaluate_basis_function(&b, 0, 1.234).unwrap();
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);

        let line = ModelSpec::line(Blocks::Gap, 0.0);
        let b = BasisSpec::new(line, BlockSign::Plus, 1.0, 8).unwrap();
        let v0 = evaluate_basis_function(&b, 0, 0.0).unwrap();
        assert!((v0 - PI.powf(-0.25)).abs() < 1e-15);
        assert!((v0 - 0.7511).abs() < 1e-4);
        assert_eq!(evaluate_basis_function(&b, 1, 0.0).unwrap(), 0.0);
        assert!(evaluate_basis_function(&b, 8, 0.0).is_err());
    }

    #[test]
    fn line_basis_rejects_zero_epsilon() {
        let line = ModelSpec::line(Blocks::Gap, 0.0);
        assert!(BasisSpec::new(line, BlockSign::Plus, 0.0, 4).is_err());
    }

    #[test]
    fn model_invariants() {
        let mut m = torus();
        m.confinement = Confinement::Harmonic;
        assert!(m.validate().is_err());
        let mut m = ModelSpec::line(Blocks::Gap, 0.0);
        m.confinement = Confinement::None;
        assert!(m.validate().is_err());
        let m = ModelSpec::torus(Blocks::Gap, -0.1);
        assert!(m.validate().is_err());
    }

    #[test]
    fn diagonal_examples() {
        let b = BasisSpec::new(torus(), BlockSign::Plus, 0.0, 8).unwrap();
        assert_eq!(a_epsilon_diagonal(&b, 3).unwrap(), vec![1.0, 2.0, 2.0]);
        let line = ModelSpec::line(Blocks::Gap, 0.0);
        let b = BasisSpec::new(line, BlockSign::Plus, 1.0, 8).unwrap();
        assert_eq!(a_epsilon_diagonal(&b, 2).unwrap(), vec![2.0, 4.0]);
        let b = BasisSpec::new(line, BlockSign::Minus, 1.0, 8).unwrap();
        assert_eq!(a_epsilon_diagonal(&b, 2).unwrap(), vec![-2.0, -4.0]);
        assert!(a_epsilon_diagonal(&b, 9).is_err());
    }

    #[test]
    fn gap_invariant_and_monotone_in_epsilon() {
        let line = ModelSpec::line(Blocks::Gap, 0.5);
        let mut prev: Option<Vec<f64>> = None;
        for eps in [0.01, 0.1, 0.25, 0.5, 1.0, 4.0] {
            let plus = a_epsilon_diagonal(&BasisSpec::new(line, BlockSign::Plus, eps, 20).unwrap(), 20).unwrap();
            let minus = a_epsilon_diagonal(&BasisSpec::new(line, BlockSign::Minus, eps, 20).unwrap(), 20).unwrap();
            assert!(plus.iter().all(|&v| v >= 1.5));
            assert!(minus.iter().all(|&v| v <= -1.5));
            assert!(plus.windows(2).all(|w| w[0] <= w[1]));
            if let Some(p) = prev {
                assert!(p.iter().zip(&plus).all(|(a, b)| a <= b));
            }
            prev = Some(plus);
        }
    }

    fn gram_defect(basis: &BasisSpec, n: usize, rule: &Rule) -> f64 {
        let mut phi = vec![vec![0.0; n]; rule.len()];
        for (row, &x) in phi.iter_mut().zip(&rule.nodes) {
            basis.evaluate_all(x, row);
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let g: f64 = phi.iter().zip(&rule.weights).map(|(r, w)| w * r[i] * r[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = BasisSpec::new(torus(), BlockSign::Plus, 0.0, 32).unwrap();
        let rule = Rule::composite(0.0, 2.0 * PI, 32, 16);
        assert!(gram_defect(&b, 32, &rule) < 1e-8);

        for eps in [0.25, 1.0] {
            let line = ModelSpec::line(Blocks::Gap, 0.5);
            let b = BasisSpec::new(line, BlockSign::Plus, eps, 32).unwrap();
            let r = 20.0 / eps.powf(0.25);
            let rule = Rule::composite(-r, r, 64, 16);
            assert!(gram_defect(&b, 32, &rule) < 1e-8, "eps={eps}");
        }
    }

    #[test]
    fn high_order_hermite_functions_stay_finite_and_normalised() {
        let mut out = vec![0.0; 513];
        for y in [-45.0, -30.0, -1.0, 0.0, 0.3, 12.0, 31.9, 50.0] {
            hermite_functions(y, &mut out);
            assert!(out.iter().all(|v| v.is_finite()), "y={y}");
        }
        // ∫ h_512² = 1 over a range covering the classically allowed region.
        let rule = Rule::composite(-40.0, 40.0, 400, 16);
        let norm = rule.integrate(|y| {
            hermite_functions(y, &mut out);
            out[512] * out[512]
        });
        assert!((norm - 1.0).abs() < 1e-10, "{norm}");
    }
}
