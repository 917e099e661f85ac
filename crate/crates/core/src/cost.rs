//! Link performance functions with interactions.
//!
//! Every model has the form `t_a(x) = φ_a(f_a)` with effective flow
//! `f = S x`. BPR instances use a row-stochastic [`WeightMatrix`] for `S`;
//! linear instances use `φ_a(f) = c_a + f` with an arbitrary coefficient
//! matrix, which is how the small textbook scenarios are written.

use crate::error::{Error, Result};
use crate::network::Network;
use crate::sparse::SparseMatrix;
use crate::weights::WeightMatrix;

const SIMPSON_MAX_DEPTH: u32 = 40;
const SIMPSON_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkFunction {
    /// `fft · (1 + b · (f / capacity)^power)`
    Bpr {
        free_flow_time: f64,
        b: f64,
        power: f64,
        capacity: f64,
    },
    /// `constant + f`
    Affine { constant: f64 },
}

fn pow(base: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() <= 64.0 {
        base.powi(p as i32)
    } else {
        base.powf(p)
    }
}

impl LinkFunction {
    pub fn time(&self, f: f64) -> f64 {
        match *self {
            LinkFunction::Bpr {
                free_flow_time,
                b,
                power,
                capacity,
            } => free_flow_time * (1.0 + b * pow(f.max(0.0) / capacity, power)),
            LinkFunction::Affine { constant } => constant + f,
        }
    }

    /// `dφ/df`.
    pub fn derivative(&self, f: f64) -> f64 {
        match *self {
            LinkFunction::Bpr {
                free_flow_time,
                b,
                power,
                capacity,
            } => {
                if power == 0.0 || b == 0.0 {
                    0.0
                } else {
                    free_flow_time * b * power * pow(f.max(0.0) / capacity, power - 1.0) / capacity
                }
            }
            LinkFunction::Affine { .. } => 1.0,
        }
    }

    /// `∫_0^len φ(start + slope·s) ds`.
    fn integral(&self, start: f64, slope: f64, len: f64) -> f64 {
        if len == 0.0 {
            return 0.0;
        }
        match *self {
            LinkFunction::Affine { constant } => (constant + start) * len + 0.5 * slope * len * len,
            LinkFunction::Bpr { .. } if slope == 0.0 => self.time(start) * len,
            LinkFunction::Bpr { .. } => {
                let g = |s: f64| self.time(start + slope * s);
                adaptive_simpson(&g, 0.0, len, SIMPSON_MAX_DEPTH)
            }
        }
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = SIMPSON_REL_TOL * (1.0 + whole.abs());
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Separable,
    Interacting,
}

/// Value of the line-integral objective. When the interaction matrix is not
/// symmetric the integral depends on the path and the value is only a
/// heuristic along the axis-ordered path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    pub path_dependent: bool,
}

/// Scratch space for incremental time updates.
#[derive(Debug, Clone, Default)]
pub struct TouchedLinks {
    stamp: Vec<u32>,
    epoch: u32,
    touched: Vec<usize>,
}

impl TouchedLinks {
    pub fn new(n: usize) -> Self {
        TouchedLinks {
            stamp: vec![0; n],
            epoch: 0,
            touched: Vec::new(),
        }
    }

    fn begin(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.touched.clear();
    }

    fn mark(&mut self, a: usize) {
        if self.stamp[a] != self.epoch {
            self.stamp[a] = self.epoch;
            self.touched.push(a);
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostModel {
    functions: Vec<LinkFunction>,
    interaction: SparseMatrix,
    dependents: SparseMatrix,
    kind: ModelKind,
    symmetric: bool,
}

impl CostModel {
    pub fn new(functions: Vec<LinkFunction>, interaction: SparseMatrix) -> Result<Self> {
        if functions.len() != interaction.dim() {
            return Err(Error::InvalidWeights(format!(
                "{} link functions but a {} x {0} interaction matrix",
                functions.len(),
                interaction.dim()
            )));
        }
        let kind = if interaction.is_identity() {
            ModelKind::Separable
        } else {
            ModelKind::Interacting
        };
        Ok(CostModel {
            functions,
            dependents: interaction.transpose(),
            symmetric: interaction.is_symmetric(),
            interaction,
            kind,
        })
    }

    /// BPR link functions from the network, composed with `f = W x`.
    pub fn bpr(network: &Network, weights: WeightMatrix) -> Result<Self> {
        if weights.dim() != network.link_count() {
            return Err(Error::InvalidWeights(format!(
                "weight matrix covers {} links but the network has {}",
                weights.dim(),
                network.link_count()
            )));
        }
        let functions = network
            .links()
            .iter()
            .map(|l| LinkFunction::Bpr {
                free_flow_time: l.free_flow_time,
                b: l.bpr_b,
                power: l.bpr_power,
                capacity: l.capacity,
            })
            .collect();
        Self::new(functions, weights.into_matrix())
    }

    pub fn separable_bpr(network: &Network) -> Self {
        Self::bpr(network, WeightMatrix::identity(network.link_count()))
            .expect("identity weights always match")
    }

    /// `t = constants + coefficients · x`.
    pub fn linear(constants: Vec<f64>, coefficients: SparseMatrix) -> Result<Self> {
        let functions = constants
            .into_iter()
            .map(|constant| LinkFunction::Affine { constant })
            .collect();
        Self::new(functions, coefficients)
    }

    pub fn link_count(&self) -> usize {
        self.functions.len()
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn functions(&self) -> &[LinkFunction] {
        &self.functions
    }

    pub fn interaction(&self) -> &SparseMatrix {
        &self.interaction
    }

    /// Links whose time depends on the flow of link `b`, with the coefficient.
    pub fn dependents(&self, b: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.dependents.row(b)
    }

    pub fn effective_flow(&self, x: &[f64], a: usize) -> f64 {
        self.interaction.row_dot(a, x)
    }

    pub fn link_time(&self, x: &[f64], a: usize) -> f64 {
        self.functions[a].time(self.effective_flow(x, a))
    }

    pub fn link_times(&self, x: &[f64]) -> Vec<f64> {
        (0..self.link_count()).map(|a| self.link_time(x, a)).collect()
    }

    pub fn link_times_into(&self, x: &[f64], t: &mut [f64]) {
        for (a, slot) in t.iter_mut().enumerate() {
            *slot = self.link_time(x, a);
        }
    }

    /// Refreshes `t` for every link whose effective flow involves one of
    /// `changed`. The result is bit-identical to a full [`Self::link_times`].
    pub fn update_times(
        &self,
        x: &[f64],
        t: &mut [f64],
        changed: impl IntoIterator<Item = usize>,
        scratch: &mut TouchedLinks,
    ) {
        scratch.begin();
        for b in changed {
            for (a, _) in self.dependents.row(b) {
                scratch.mark(a);
            }
        }
        for &a in &scratch.touched {
            t[a] = self.link_time(x, a);
        }
    }

    /// `dφ_a/df_a` at the current effective flow.
    pub fn link_derivative(&self, x: &[f64], a: usize) -> f64 {
        self.functions[a].derivative(self.effective_flow(x, a))
    }

    /// `∂t_a/∂x_b`.
    pub fn jacobian_entry(&self, x: &[f64], a: usize, b: usize) -> f64 {
        let s = self.interaction.get(a, b);
        if s == 0.0 {
            0.0
        } else {
            self.link_derivative(x, a) * s
        }
    }

    /// Beckmann's objective `Σ_a ∫_0^{x_a} t_a(s) ds`; separable models only.
    pub fn beckmann_objective(&self, x: &[f64]) -> Result<f64> {
        if self.kind != ModelKind::Separable {
            return Err(Error::Unsupported(
                "the Beckmann objective needs a separable model; use the line integral".into(),
            ));
        }
        Ok(self
            .functions
            .iter()
            .zip(x)
            .map(|(func, &xa)| match *func {
                LinkFunction::Bpr {
                    free_flow_time,
                    b,
                    power,
                    capacity,
                } => free_flow_time * (xa + b * xa * pow(xa / capacity, power) / (power + 1.0)),
                LinkFunction::Affine { constant } => constant * xa + 0.5 * xa * xa,
            })
            .sum())
    }

    /// Line integral of `t` from the origin to `x` along the path that raises
    /// link flows one at a time in the given order.
    pub fn line_integral_along(&self, x: &[f64], order: &[usize]) -> f64 {
        let mut position = vec![usize::MAX; self.link_count()];
        for (p, &a) in order.iter().enumerate() {
            position[a] = p;
        }
        let mut total = 0.0;
        for (p, &a) in order.iter().enumerate() {
            let mut start = 0.0;
            let mut slope = 0.0;
            for (b, s) in self.interaction.row(a) {
                if b == a {
                    slope = s;
                } else if position[b] < p {
                    start += s * x[b];
                }
            }
            total += self.functions[a].integral(start, slope, x[a]);
        }
        total
    }

    /// Line-integral objective along the axis-ordered path (link 1 first).
    pub fn line_integral_objective(&self, x: &[f64]) -> LineIntegral {
        let order: Vec<usize> = (0..self.link_count()).collect();
        LineIntegral {
            value: self.line_integral_along(x, &order),
            path_dependent: !self.symmetric,
        }
    }

    /// Difference between the axis-ordered and reverse-ordered line integrals.
    pub fn path_discrepancy(&self, x: &[f64]) -> f64 {
        let forward: Vec<usize> = (0..self.link_count()).collect();
        let reverse: Vec<usize> = forward.iter().rev().copied().collect();
        (self.line_integral_along(x, &forward) - self.line_integral_along(x, &reverse)).abs()
    }

    /// The objective minimized at equilibrium, when one exists.
    pub fn objective(&self, x: &[f64]) -> Option<f64> {
        match self.kind {
            ModelKind::Separable => self.beckmann_objective(x).ok(),
            ModelKind::Interacting if self.symmetric => Some(self.line_integral_objective(x).value),
            ModelKind::Interacting => None,
        }
    }
}
