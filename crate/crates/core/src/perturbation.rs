//! The bounded symmetric family `K^λ`, its blocks and quadrature assembly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{BasisSpec, BlockSign, Blocks, ModelSpec, Space};
use crate::quadrature::{QuadratureSpec, Rule};

/// Closed interval `[lo, hi]`, written as a two-element array in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Self { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some(Interval { lo, hi })
    }
}

/// Support of the kernel in each block; the `-` support defaults to the `+` one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub plus: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<Interval>,
}

impl Support {
    pub fn uniform(interval: Interval) -> Self {
        Self { plus: interval, minus: None }
    }

    pub fn block(&self, sign: BlockSign) -> Interval {
        match sign {
            BlockSign::Plus => self.plus,
            BlockSign::Minus => self.minus.unwrap_or(self.plus),
        }
    }
}

/// Spatial profile of a multiplication or separable factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `amplitude · cos(wavenumber · x + phase)`.
    Cosine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Smooth compactly supported bump `amplitude · exp(1 - 1/(1 - r²))`,
    /// `r = (x - center)/half_width`.
    Bump { center: f64, half_width: f64, amplitude: f64 },
    Constant { value: f64 },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Cosine { amplitude, wavenumber, phase } => {
                amplitude * (wavenumber * x + phase).cos()
            }
            Profile::Bump { center, half_width, amplitude } => {
                let r = (x - center) / half_width;
                let s = 1.0 - r * r;
                if s <= 0.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / s).exp()
                }
            }
            Profile::Constant { value } => value,
        }
    }

    /// Rough angular frequency content, used to size quadrature panels.
    fn frequency(&self) -> f64 {
        match *self {
            Profile::Cosine { wavenumber, .. } => wavenumber.abs(),
            Profile::Bump { half_width, .. } => 8.0 / half_width,
            Profile::Constant { .. } => 0.0,
        }
    }

    /// Supremum of `|profile|` over the reals.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            Profile::Cosine { amplitude, .. } => amplitude.abs(),
            Profile::Bump { amplitude, .. } => amplitude.abs(),
            Profile::Constant { value } => value.abs(),
        }
    }
}

/// One rank-one term `sign · |f⟩⟨f|` of a separable kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub profile: Profile,
    #[serde(default = "one")]
    pub sign: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityProfile {
    Uniform,
    /// `exp(-v² / (2 T))`.
    Gaussian { temperature: f64 },
}

/// Velocity weight `g(v) ≥ 0` supported on `[v_min, v_max]`, `v_min > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityWeight {
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default = "uniform_profile")]
    pub profile: VelocityProfile,
}

fn uniform_profile() -> VelocityProfile {
    VelocityProfile::Uniform
}

impl VelocityWeight {
    pub fn uniform(v_min: f64, v_max: f64) -> Self {
        Self { v_min, v_max, profile: VelocityProfile::Uniform }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_min > 0.0) {
            return Err(Error::InvalidPerturbation(format!(
                "velocity support must stay away from v = 0 (v_min = {})",
                self.v_min
            )));
        }
        if !(self.v_max > self.v_min) || !self.v_max.is_finite() {
            return Err(Error::InvalidPerturbation("velocity support needs v_max > v_min".into()));
        }
        if let VelocityProfile::Gaussian { temperature } = self.profile {
            if !(temperature > 0.0) {
                return Err(Error::InvalidPerturbation("velocity temperature must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, v: f64) -> f64 {
        if v < self.v_min || v > self.v_max {
            return 0.0;
        }
        match self.profile {
            VelocityProfile::Uniform => 1.0,
            VelocityProfile::Gaussian { temperature } => (-v * v / (2.0 * temperature)).exp(),
        }
    }
}

/// Integral operator family or multiplication profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    Multiplication { profile: Profile },
    Separable { factors: Vec<Factor> },
    Transport { velocity: VelocityWeight },
}

/// Strength schedule `c(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Strength {
    /// `c0 · λ`.
    Linear { c0: f64 },
    /// `c0 / (1 + λ²)`.
    Rational { c0: f64 },
    /// Piecewise linear through `(λ, c)` pairs, clamped outside the table.
    Table { points: Vec<[f64; 2]> },
}

impl Strength {
    pub fn validate(&self) -> Result<()> {
        match self {
            Strength::Linear { c0 } | Strength::Rational { c0 } if !c0.is_finite() => {
                Err(Error::InvalidPerturbation("strength coefficient must be finite".into()))
            }
            Strength::Table { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidPerturbation("strength table is empty".into()));
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPerturbation("strength table has non-finite entries".into()));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::InvalidPerturbation(
                        "strength table lambdas must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Strength::Linear { c0 } => c0 * lambda,
            Strength::Rational { c0 } => c0 / (1.0 + lambda * lambda),
            Strength::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if lambda <= first[0] {
                    return first[1];
                }
                if lambda >= last[0] {
                    return last[1];
                }
                let i = points.partition_point(|p| p[0] <= lambda);
                let [x0, y0] = points[i - 1];
                let [x1, y1] = points[i];
                y0 + (y1 - y0) * (lambda - x0) / (x1 - x0)
            }
        }
    }
}

/// Weights of the four blocks; `K_{-+}` is always the transpose of `K_{+-}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    #[serde(default)]
    pub pp: f64,
    #[serde(default)]
    pub pm: f64,
    #[serde(default)]
    pub mm: f64,
}

impl Coupling {
    pub fn plus_only(weight: f64) -> Self {
        Self { pp: weight, pm: 0.0, mm: 0.0 }
    }

    pub fn weight(&self, bra: BlockSign, ket: BlockSign) -> f64 {
        match (bra, ket) {
            (BlockSign::Plus, BlockSign::Plus) => self.pp,
            (BlockSign::Minus, BlockSign::Minus) => self.mm,
            _ => self.pm,
        }
    }

    pub fn is_inactive(&self) -> bool {
        self.pp == 0.0 && self.pm == 0.0 && self.mm == 0.0
    }
}

/// The family `K^λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kernel: Kernel,
    pub support: Support,
    pub strength: Strength,
    pub coupling: Coupling,
}

impl PerturbationSpec {
    /// The zero family (all blocks inactive).
    pub fn none(model: &ModelSpec) -> Self {
        let support = match model.space {
            Space::Torus => Interval::new(0.0, 2.0 * PI),
            Space::Line => Interval::new(-1.0, 1.0),
        };
        Self {
            kernel: Kernel::Multiplication { profile: Profile::Constant { value: 0.0 } },
            support: Support::uniform(support),
            strength: Strength::Linear { c0: 0.0 },
            coupling: Coupling { pp: 0.0, pm: 0.0, mm: 0.0 },
        }
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        self.strength.validate()?;
        for sign in model.block_signs() {
            let s = self.support.block(*sign);
            if !(s.hi > s.lo) || !s.lo.is_finite() || !s.hi.is_finite() {
                return Err(Error::InvalidPerturbation(format!("support {s:?} is empty or unbounded")));
            }
            if model.space == Space::Torus && (s.lo < 0.0 || s.hi > 2.0 * PI + 1e-12) {
                return Err(Error::InvalidPerturbation(format!(
                    "torus support {s:?} must lie inside [0, 2π]"
                )));
            }
        }
        if model.blocks == Blocks::Semibounded && (self.coupling.pm != 0.0 || self.coupling.mm != 0.0) {
            return Err(Error::InvalidPerturbation(
                "a semibounded model only has the ++ block".into(),
            ));
        }
        if [self.coupling.pp, self.coupling.pm, self.coupling.mm].iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidPerturbation("coupling weights must be finite".into()));
        }
        match &self.kernel {
            Kernel::Multiplication { profile } => check_profile(profile),
            Kernel::Separable { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidPerturbation("separable kernel needs factors".into()));
                }
                factors.iter().try_for_each(|f| {
                    if !f.sign.is_finite() {
                        return Err(Error::InvalidPerturbation("factor sign must be finite".into()));
                    }
                    check_profile(&f.profile)
                })
            }
            Kernel::Transport { velocity } => velocity.validate(),
        }
    }

    /// Rows and columns interact only where both supports overlap for
    /// multiplication kernels.
    fn support_pair(&self, bra: BlockSign, ket: BlockSign) -> (Interval, Interval) {
        (self.support.block(bra), self.support.block(ket))
    }

    /// Frequency content added by the kernel itself at parameter `lambda`.
    fn kernel_frequency(&self, lambda: f64) -> f64 {
        match &self.kernel {
            Kernel::Multiplication { profile } => profile.frequency(),
            Kernel::Separable { factors } => {
                factors.iter().map(|f| f.profile.frequency()).fold(0.0, f64::max)
            }
            Kernel::Transport { velocity } => {
                // Decay rate of exp(-λ|x-y|/v̂) is largest at the slowest speed.
                let vhat = velocity.v_min / (1.0 + velocity.v_min * velocity.v_min).sqrt();
                lambda.abs() / vhat + 4.0
            }
        }
    }
}

fn check_profile(p: &Profile) -> Result<()> {
    match *p {
        Profile::Bump { half_width, center, amplitude } => {
            if !(half_width > 0.0) || !center.is_finite() || !amplitude.is_finite() {
                return Err(Error::InvalidPerturbation("bump needs finite center/amplitude and half_width > 0".into()));
            }
        }
        Profile::Cosine { amplitude, wavenumber, phase } => {
            if ![amplitude, wavenumber, phase].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidPerturbation("cosine parameters must be finite".into()));
            }
        }
        Profile::Constant { value } => {
            if !value.is_finite() {
                return Err(Error::InvalidPerturbation("constant profile must be finite".into()));
            }
        }
    }
    Ok(())
}

/// `k_λ(x, y) = ∫ exp(-λ|x-y|/|v̂|) / |v̂| g(v) dv`, `v̂ = v/√(1+v²)`.
pub fn transport_kernel_value(
    lambda: f64,
    x: f64,
    y: f64,
    velocity: &VelocityWeight,
    velocity_nodes: usize,
) -> Result<f64> {
    velocity.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("transport kernel needs lambda >= 0, got {lambda}")));
    }
    let rule = Rule::composite(velocity.v_min, velocity.v_max, 1, velocity_nodes.max(2));
    Ok(transport_kernel_with(&rule, velocity, lambda, (x - y).abs()))
}

fn transport_kernel_with(rule: &Rule, velocity: &VelocityWeight, lambda: f64, dist: f64) -> f64 {
    rule.integrate(|v| {
        let inv_vhat = (1.0 + v * v).sqrt() / v;
        (-lambda * dist * inv_vhat).exp() * inv_vhat * velocity.eval(v)
    })
}

/// Bases of the blocks present in a model, sharing `ε` and `n_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bases {
    pub plus: BasisSpec,
    pub minus: Option<BasisSpec>,
}

impl Bases {
    pub fn new(model: &ModelSpec, epsilon: f64, n_max: usize) -> Result<Self> {
        let plus = BasisSpec::new(*model, BlockSign::Plus, epsilon, n_max)?;
        let minus = match model.blocks {
            Blocks::Gap => Some(BasisSpec::new(*model, BlockSign::Minus, epsilon, n_max)?),
            Blocks::Semibounded => None,
        };
        Ok(Self { plus, minus })
    }

    pub fn block(&self, sign: BlockSign) -> Result<&BasisSpec> {
        match sign {
            BlockSign::Plus => Ok(&self.plus),
            BlockSign::Minus => self
                .minus
                .as_ref()
                .ok_or_else(|| Error::InvalidBasis("the semibounded model has no - block".into())),
        }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.plus.model
    }

    pub fn block_count(&self) -> usize {
        if self.minus.is_some() {
            2
        } else {
            1
        }
    }
}

/// One entry `⟨e_bra, K^λ e_ket⟩` by quadrature.
///
/// Evaluated by direct summation, independently of the batched assembly.
pub fn matrix_element(
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    bra: (BlockSign, usize),
    ket: (BlockSign, usize),
    bases: &Bases,
    lambda: f64,
) -> Result<f64> {
    quad.validate()?;
    let bra_basis = bases.block(bra.0)?;
    let ket_basis = bases.block(ket.0)?;
    if bra.1 >= bra_basis.n_max || ket.1 >= ket_basis.n_max {
        return Err(Error::InvalidBasis("matrix element index exceeds n_max".into()));
    }
    let weight = pert.coupling.weight(bra.0, ket.0) * pert.strength.eval(lambda);
    if weight == 0.0 {
        return Ok(0.0);
    }
    let n = bra.1.max(ket.1) + 1;
    let freq = bra_basis.max_frequency(n) + ket_basis.max_frequency(n) + pert.kernel_frequency(lambda);
    let (sb, sk) = pert.support_pair(bra.0, ket.0);
    let fb = |x: f64| -> f64 {
        let mut buf = vec![0.0; bra.1 + 1];
        bra_basis.evaluate_all(x, &mut buf);
        buf[bra.1]
    };
    let fk = |x: f64| -> f64 {
        let mut buf = vec![0.0; ket.1 + 1];
        ket_basis.evaluate_all(x, &mut buf);
        buf[ket.1]
    };
    let value = match &pert.kernel {
        Kernel::Multiplication { profile } => match sb.intersect(&sk) {
            None => 0.0,
            Some(common) => {
                let rule = support_rule(quad, &common, freq);
                rule.integrate(|x| fb(x) * profile.eval(x) * fk(x))
            }
        },
        Kernel::Separable { factors } => {
            let rb = support_rule(quad, &sb, freq);
            let rk = support_rule(quad, &sk, freq);
            factors
                .iter()
                .map(|f| {
                    let a = rb.integrate(|x| fb(x) * f.profile.eval(x));
                    let b = rk.integrate(|x| f.profile.eval(x) * fk(x));
                    f.sign * a * b
                })
                .sum()
        }
        Kernel::Transport { velocity } => {
            velocity.validate()?;
            let rb = support_rule(quad, &sb, freq);
            let rk = support_rule(quad, &sk, freq);
            let vrule = Rule::composite(velocity.v_min, velocity.v_max, 1, quad.velocity_nodes);
            rb.integrate(|x| {
                fb(x) * rk.integrate(|y| transport_kernel_with(&vrule, velocity, lambda, (x - y).abs()) * fk(y))
            })
        }
    };
    Ok(weight * value)
}

fn support_rule(quad: &QuadratureSpec, support: &Interval, freq: f64) -> Rule {
    let panels = quad.panels_for(support.length(), freq);
    Rule::composite(support.lo, support.hi, panels, quad.nodes_per_panel)
}

/// Basis values `Φ[q, k] = e_k(x_q)` at the rule nodes.
fn basis_matrix(basis: &BasisSpec, rule: &Rule, n: usize) -> DMatrix<f64> {
    let mut phi = DMatrix::zeros(rule.len(), n);
    let mut buf = vec![0.0; n];
    for (q, &x) in rule.nodes.iter().enumerate() {
        basis.evaluate_all(x, &mut buf);
        for (k, v) in buf.iter().enumerate() {
            phi[(q, k)] = *v;
        }
    }
    phi
}

/// Node sets used for one block pair: the bra rule and the ket rule.
/// `ket_mask` multiplies the ket weights (the indicator in `K P`).
struct PairRules {
    bra: Rule,
    ket: Rule,
    ket_mask: Vec<f64>,
}

/// Unweighted block `⟨e_i, K e_j⟩` (without `c(λ)` and coupling weight).
fn block_matrix(
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    rules: &PairRules,
    bra_basis: &BasisSpec,
    ket_basis: &BasisSpec,
    n: usize,
    lambda: f64,
) -> DMatrix<f64> {
    let phi_b = basis_matrix(bra_basis, &rules.bra, n);
    let phi_k = basis_matrix(ket_basis, &rules.ket, n);
    match &pert.kernel {
        Kernel::Multiplication { profile } => {
            // Multiplication is local: both rules coincide.
            let mut weighted = phi_k.clone();
            for (q, &x) in rules.ket.nodes.iter().enumerate() {
                let w = rules.ket.weights[q] * rules.ket_mask[q] * profile.eval(x);
                weighted.row_mut(q).scale_mut(w);
            }
            phi_b.transpose() * weighted
        }
        Kernel::Separable { factors } => {
            let mut out = DMatrix::zeros(n, n);
            for f in factors {
                let fb = nalgebra::DVector::from_iterator(
                    rules.bra.len(),
                    rules.bra.nodes.iter().zip(&rules.bra.weights).map(|(&x, &w)| w * f.profile.eval(x)),
                );
                let fk = nalgebra::DVector::from_iterator(
                    rules.ket.len(),
                    rules
                        .ket
                        .nodes
                        .iter()
                        .zip(&rules.ket.weights)
                        .zip(&rules.ket_mask)
                        .map(|((&x, &w), &m)| w * m * f.profile.eval(x)),
                );
                let a = phi_b.transpose() * fb;
                let b = phi_k.transpose() * fk;
                out += (a * b.transpose()) * f.sign;
            }
            out
        }
        Kernel::Transport { velocity } => {
            let vrule = Rule::composite(velocity.v_min, velocity.v_max, 1, quad.velocity_nodes);
            let kmat = DMatrix::from_fn(rules.bra.len(), rules.ket.len(), |a, b| {
                let dist = (rules.bra.nodes[a] - rules.ket.nodes[b]).abs();
                rules.bra.weights[a]
                    * transport_kernel_with(&vrule, velocity, lambda, dist)
                    * rules.ket.weights[b]
                    * rules.ket_mask[b]
            });
            phi_b.transpose() * kmat * phi_k
        }
    }
}

fn pair_rules(
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    bra: BlockSign,
    ket: BlockSign,
    freq: f64,
) -> Option<PairRules> {
    let (sb, sk) = pert.support_pair(bra, ket);
    match pert.kernel {
        Kernel::Multiplication { .. } => {
            let common = sb.intersect(&sk)?;
            let rule = support_rule(quad, &common, freq);
            let mask = vec![1.0; rule.len()];
            Some(PairRules { bra: rule.clone(), ket: rule, ket_mask: mask })
        }
        _ => {
            let rb = support_rule(quad, &sb, freq);
            let rk = support_rule(quad, &sk, freq);
            let mask = vec![1.0; rk.len()];
            Some(PairRules { bra: rb, ket: rk, ket_mask: mask })
        }
    }
}

/// Assembled `K_n(λ)` with its symmetrisation defect.
#[derive(Debug, Clone)]
pub struct AssembledK {
    pub matrix: DMatrix<f64>,
    /// `max |T - Tᵀ|` before symmetrisation.
    pub defect: f64,
}

fn check_dimension(bases: &Bases, n: usize) -> Result<()> {
    if n == 0 || n > bases.plus.n_max {
        return Err(Error::InvalidBasis(format!(
            "per-block dimension {n} must lie in 1..={}",
            bases.plus.n_max
        )));
    }
    Ok(())
}

fn assemble_with<F>(
    pert: &PerturbationSpec,
    bases: &Bases,
    n: usize,
    lambda: f64,
    mut block: F,
) -> Result<DMatrix<f64>>
where
    F: FnMut(BlockSign, BlockSign, &BasisSpec, &BasisSpec) -> Option<DMatrix<f64>>,
{
    check_dimension(bases, n)?;
    let blocks = bases.block_count();
    let mut out = DMatrix::zeros(blocks * n, blocks * n);
    let strength = pert.strength.eval(lambda);
    let signs: &[BlockSign] = if blocks == 2 { &[BlockSign::Plus, BlockSign::Minus] } else { &[BlockSign::Plus] };
    for (bi, &bra) in signs.iter().enumerate() {
        for (ki, &ket) in signs.iter().enumerate() {
            let w = pert.coupling.weight(bra, ket) * strength;
            if w == 0.0 {
                continue;
            }
            let bb = bases.block(bra)?;
            let kb = bases.block(ket)?;
            if let Some(m) = block(bra, ket, bb, kb) {
                out.view_mut((bi * n, ki * n), (n, n)).copy_from(&(m * w));
            }
        }
    }
    Ok(out)
}

/// `[[K_{++}, K_{+-}], [K_{-+}, K_{--}]]` in the first `n` functions per block,
/// symmetrised exactly.
pub fn assemble_k_blocks(
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    bases: &Bases,
    n: usize,
    lambda: f64,
) -> Result<AssembledK> {
    quad.validate()?;
    pert.validate(bases.model())?;
    let freq_of = |bb: &BasisSpec, kb: &BasisSpec| {
        bb.max_frequency(n) + kb.max_frequency(n) + pert.kernel_frequency(lambda)
    };
    let raw = assemble_with(pert, bases, n, lambda, |bra, ket, bb, kb| {
        let rules = pair_rules(pert, quad, bra, ket, freq_of(bb, kb))?;
        Some(block_matrix(pert, quad, &rules, bb, kb, n, lambda))
    })?;
    let (matrix, defect) = crate::galerkin::symmetrize(&raw)?;
    Ok(AssembledK { matrix, defect })
}

/// Largest entry of `K_n − (K P)_n`.
///
/// `(K P)_n` is computed by quadrature over the whole model domain with the
/// support indicator applied to the ket; the support interval is kept as a
/// panel breakpoint so the two integrals share nodes there. The defect is a
/// quadrature check: it grows when the rules under-resolve the support edges.
pub fn projection_defect(
    pert: &PerturbationSpec,
    quad: &QuadratureSpec,
    bases: &Bases,
    n: usize,
    lambda: f64,
) -> Result<f64> {
    let k = assemble_k_blocks(pert, quad, bases, n, lambda)?;
    let model = *bases.model();
    let freq_of = |bb: &BasisSpec, kb: &BasisSpec| {
        bb.max_frequency(n) + kb.max_frequency(n) + pert.kernel_frequency(lambda)
    };
    let kp = assemble_with(pert, bases, n, lambda, |bra, ket, bb, kb| {
        let freq = freq_of(bb, kb);
        let base = pair_rules(pert, quad, bra, ket, freq)?;
        let ket_support = match pert.kernel {
            Kernel::Multiplication { .. } => {
                let (sb, sk) = pert.support_pair(bra, ket);
                sb.intersect(&sk)?
            }
            _ => pert.support.block(ket),
        };
        let domain = model_domain(&model, &ket_support);
        let ket = extended_rule(quad, &domain, &ket_support, &base.ket, freq);
        let mask = ket.nodes.iter().map(|&x| if ket_support.contains(x) { 1.0 } else { 0.0 }).collect();
        let bra = match pert.kernel {
            Kernel::Multiplication { .. } => ket.clone(),
            _ => base.bra,
        };
        let rules = PairRules { bra, ket, ket_mask: mask };
        Some(block_matrix(pert, quad, &rules, bb, kb, n, lambda))
    })?;
    let (kp, _) = crate::galerkin::symmetrize(&kp)?;
    Ok((k.matrix - kp).abs().max())
}

/// Indicator Gram matrix `P_n[i, j] = ⟨e_i, χ_support e_j⟩` of one block.
pub fn support_projection_matrix(
    basis: &BasisSpec,
    support: &Interval,
    quad: &QuadratureSpec,
    n: usize,
) -> DMatrix<f64> {
    let rule = support_rule(quad, support, 2.0 * basis.max_frequency(n));
    let phi = basis_matrix(basis, &rule, n);
    let mut weighted = phi.clone();
    for (q, w) in rule.weights.iter().enumerate() {
        weighted.row_mut(q).scale_mut(*w);
    }
    phi.transpose() * weighted
}

fn model_domain(model: &ModelSpec, support: &Interval) -> Interval {
    match model.space {
        Space::Torus => Interval::new(0.0, 2.0 * PI),
        Space::Line => Interval::new(support.lo - 2.0, support.hi + 2.0),
    }
}

/// Rule on `domain` that reuses `inner` on `support` and adds panels outside.
fn extended_rule(quad: &QuadratureSpec, domain: &Interval, support: &Interval, inner: &Rule, freq: f64) -> Rule {
    let mut rule = Rule { nodes: vec![], weights: vec![] };
    if support.lo > domain.lo {
        let left = Interval::new(domain.lo, support.lo);
        rule = rule.join(support_rule(quad, &left, freq));
    }
    rule = rule.join(inner.clone());
    if support.hi < domain.hi {
        let right = Interval::new(support.hi, domain.hi);
        rule = rule.join(support_rule(quad, &right, freq));
    }
    rule
}
