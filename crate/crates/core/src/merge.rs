//! Point-queue delays at a Jin-Zhang merge.
//!
//! Two upstream links feed one downstream link with saturation flow `u3`.
//! The merge allocates supply in proportion to demand, so when inflows
//! exceed `u3` both approaches see the same extra delay
//! `[(x1 + x2) / u3 - 1]`, scaled by `delay_coefficient` (time units).

use nalgebra::Matrix2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeNode {
    pub free_flow_times: [f64; 2],
    pub saturation_flow: f64,
    pub delay_coefficient: f64,
}

impl MergeNode {
    pub fn new(t0_1: f64, t0_2: f64, saturation_flow: f64) -> Self {
        assert!(saturation_flow > 0.0, "saturation flow must be positive");
        MergeNode {
            free_flow_times: [t0_1, t0_2],
            saturation_flow,
            delay_coefficient: 1.0,
        }
    }

    pub fn times(&self, x1: f64, x2: f64) -> (f64, f64) {
        let [t1, t2] = self.free_flow_times;
        let total = x1 + x2;
        if total <= self.saturation_flow {
            (t1, t2)
        } else {
            let delay = self.delay_coefficient * (total / self.saturation_flow - 1.0);
            (t1 + delay, t2 + delay)
        }
    }

    /// Jacobian of the two approach times. At the kink `x1 + x2 = u3` the
    /// congested branch is returned.
    pub fn jacobian(&self, x1: f64, x2: f64) -> Matrix2<f64> {
        if x1 + x2 < self.saturation_flow {
            Matrix2::zeros()
        } else {
            Matrix2::repeat(self.delay_coefficient / self.saturation_flow)
        }
    }
}

/// Smallest eigenvalue of `(J + Jᵀ) / 2`.
pub fn min_symmetric_eigenvalue(j: &Matrix2<f64>) -> f64 {
    let a = j[(0, 0)];
    let d = j[(1, 1)];
    let b = 0.5 * (j[(0, 1)] + j[(1, 0)]);
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    mean - radius
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeGridPoint {
    pub x1: f64,
    pub x2: f64,
    pub t1: f64,
    pub t2: f64,
    pub jacobian: [[f64; 2]; 2],
    pub min_eigenvalue: f64,
}

/// Tabulates times and Jacobians on an `n x n` grid over `[0, max_inflow]²`.
pub fn merge_grid(node: &MergeNode, n: usize, max_inflow: f64) -> Vec<MergeGridPoint> {
    let step = if n > 1 { max_inflow / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            let (x1, x2) = (i as f64 * step, k as f64 * step);
            let (t1, t2) = node.times(x1, x2);
            let j = node.jacobian(x1, x2);
            out.push(MergeGridPoint {
                x1,
                x2,
                t1,
                t2,
                jacobian: [[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]],
                min_eigenvalue: min_symmetric_eigenvalue(&j),
            });
        }
    }
    out
}
