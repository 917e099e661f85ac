//! Newton flow shifts between two routes with a common origin and end.

use crate::cost::{CostModel, TouchedLinks};

const NONE: u8 = 0;
const LOWER: u8 = 1;
const UPPER: u8 = 2;

/// Scratch for computing link-set differences between two routes.
#[derive(Debug, Clone)]
pub struct ShiftWorkspace {
    marks: Vec<u8>,
    pub(crate) lower: Vec<usize>,
    pub(crate) upper: Vec<usize>,
    pub(crate) touched: TouchedLinks,
}

impl ShiftWorkspace {
    pub fn new(link_count: usize) -> Self {
        ShiftWorkspace {
            marks: vec![NONE; link_count],
            lower: Vec::new(),
            upper: Vec::new(),
            touched: TouchedLinks::new(link_count),
        }
    }

    /// Splits two routes into links used only by the cheaper one (`A_L`)
    /// and only by the costlier one (`A_U`).
    pub(crate) fn split(&mut self, lower_route: &[usize], upper_route: &[usize]) {
        self.lower.clear();
        self.upper.clear();
        for &a in upper_route {
            self.marks[a] = UPPER;
        }
        for &a in lower_route {
            if self.marks[a] == UPPER {
                self.marks[a] = NONE;
            } else {
                self.lower.push(a);
            }
        }
        for &a in upper_route {
            if self.marks[a] == UPPER {
                self.upper.push(a);
                self.marks[a] = NONE;
            }
        }
    }

    fn mark(&mut self) {
        for &a in &self.lower {
            self.marks[a] = LOWER;
        }
        for &a in &self.upper {
            self.marks[a] = UPPER;
        }
    }

    fn unmark(&mut self) {
        for &a in self.lower.iter().chain(&self.upper) {
            self.marks[a] = NONE;
        }
    }

    /// Sums of `∂t_a/∂x_b` over the four blocks (LL, UU, LU, UL).
    fn blocks(&mut self, model: &CostModel, x: &[f64]) -> [f64; 4] {
        self.mark();
        let mut sums = [0.0; 4];
        for (from, set) in [(LOWER, &self.lower), (UPPER, &self.upper)] {
            for &a in set {
                let d = model.link_derivative(x, a);
                if d == 0.0 {
                    continue;
                }
                for (b, s) in model.interaction().row(a) {
                    let slot = match (from, self.marks[b]) {
                        (LOWER, LOWER) => 0,
                        (UPPER, UPPER) => 1,
                        (LOWER, UPPER) => 2,
                        (UPPER, LOWER) => 3,
                        _ => continue,
                    };
                    sums[slot] += d * s;
                }
            }
        }
        self.unmark();
        sums
    }
}

/// Second derivative of the cost difference along the shift direction:
/// `Σ_{LL} J + Σ_{UU} J - Σ_{LU} J - Σ_{UL} J`.
pub fn second_derivative(model: &CostModel, x: &[f64], lower: &[usize], upper: &[usize], ws: &mut ShiftWorkspace) -> f64 {
    ws.split(lower, upper);
    let [ll, uu, lu, ul] = ws.blocks(model, x);
    ll + uu - lu - ul
}

/// The symmetric-Jacobian form `Σ_{LL} J + Σ_{UU} J - 2 Σ_{LU} J`.
pub fn second_derivative_symmetric(
    model: &CostModel,
    x: &[f64],
    lower: &[usize],
    upper: &[usize],
    ws: &mut ShiftWorkspace,
) -> f64 {
    ws.split(lower, upper);
    let [ll, uu, lu, _] = ws.blocks(model, x);
    ll + uu - 2.0 * lu
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowShift {
    /// Flow to move from the costlier route to the cheaper one.
    pub delta: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// The Newton step exceeded the available flow and was cut back.
    pub truncated: bool,
}

/// Damped Newton step moving flow from `upper` to `lower`, capped by
/// `limit` and by the smallest flow on a link only `upper` uses.
///
/// When the coupled second derivative is not positive the separable one
/// (`Σ φ'` over the differing links) is used instead. When that is zero
/// as well but the cost difference is positive, the whole cap moves.
pub fn newton_shift(
    model: &CostModel,
    x: &[f64],
    t: &[f64],
    lower: &[usize],
    upper: &[usize],
    damping: f64,
    limit: f64,
    ws: &mut ShiftWorkspace,
) -> FlowShift {
    ws.split(lower, upper);
    let numerator: f64 = ws.upper.iter().map(|&a| t[a]).sum::<f64>() - ws.lower.iter().map(|&a| t[a]).sum::<f64>();
    let cap = ws.upper.iter().fold(limit, |m, &a| m.min(x[a])).max(0.0);
    let mut out = FlowShift {
        delta: 0.0,
        numerator,
        denominator: 0.0,
        truncated: false,
    };
    if !(numerator > 0.0) || cap == 0.0 {
        return out;
    }
    let [ll, uu, lu, ul] = ws.blocks(model, x);
    let mut denominator = if model.is_symmetric() {
        ll + uu - 2.0 * lu
    } else {
        ll + uu - lu - ul
    };
    if !(denominator > 0.0) {
        denominator = ws
            .lower
            .iter()
            .chain(&ws.upper)
            .map(|&a| model.link_derivative(x, a))
            .sum();
    }
    out.denominator = denominator;
    let step = if denominator > 0.0 {
        damping * numerator / denominator
    } else {
        f64::INFINITY
    };
    if step >= cap {
        out.delta = cap;
        out.truncated = true;
    } else {
        out.delta = step;
    }
    out
}
