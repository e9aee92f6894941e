//! Composite Gauss–Legendre quadrature on intervals.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default number of panels per support interval.
pub const DEFAULT_PANELS: usize = 8;
/// Default Gauss–Legendre nodes per panel.
pub const DEFAULT_NODES_PER_PANEL: usize = 16;
/// Default node count for the velocity integral of transport kernels.
pub const DEFAULT_VELOCITY_NODES: usize = 32;

/// Composite Gauss–Legendre rule parameters.
///
/// `panels` is a floor: assembly raises it when the basis oscillates faster
/// than a panel can resolve (see [`QuadratureSpec::panels_for`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_nodes_per_panel")]
    pub nodes_per_panel: usize,
    #[serde(default = "default_velocity_nodes")]
    pub velocity_nodes: usize,
}

fn default_panels() -> usize {
    DEFAULT_PANELS
}
fn default_nodes_per_panel() -> usize {
    DEFAULT_NODES_PER_PANEL
}
fn default_velocity_nodes() -> usize {
    DEFAULT_VELOCITY_NODES
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels: DEFAULT_PANELS,
            nodes_per_panel: DEFAULT_NODES_PER_PANEL,
            velocity_nodes: DEFAULT_VELOCITY_NODES,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 || self.nodes_per_panel == 0 {
            return Err(Error::InvalidQuadrature(
                "panels and nodes_per_panel must be positive".into(),
            ));
        }
        if self.panels * self.nodes_per_panel < 2 {
            return Err(Error::InvalidQuadrature(format!(
                "total node count {} is below the minimum of 2",
                self.panels * self.nodes_per_panel
            )));
        }
        if self.velocity_nodes < 2 {
            return Err(Error::InvalidQuadrature(
                "velocity_nodes must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Panel count needed on an interval of `length` for integrands whose
    /// angular frequency is at most `max_frequency`.
    ///
    /// Keeps the phase swept by one panel below half the node count,
    /// which leaves the Gauss–Legendre error near machine precision.
    pub fn panels_for(&self, length: f64, max_frequency: f64) -> usize {
        let needed = (max_frequency * length * 2.0 / self.nodes_per_panel as f64).ceil();
        self.panels.max(needed as usize).max(1)
    }

    /// Same rule with the panel count doubled; used as a refinement oracle.
    pub fn refined(&self) -> Self {
        Self {
            panels: self.panels * 2,
            nodes_per_panel: self.nodes_per_panel,
            velocity_nodes: self.velocity_nodes * 2,
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and weights of a composite rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
    pub fn composite(a: f64, b: f64, panels: usize, nodes_per_panel: usize) -> Self {
        let (x, w) = gauss_legendre(nodes_per_panel);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * nodes_per_panel);
        let mut weights = Vec::with_capacity(panels * nodes_per_panel);
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Concatenation of two rules (disjoint intervals).
    pub fn join(mut self, other: Rule) -> Self {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
        self
    }
}
