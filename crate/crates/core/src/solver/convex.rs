//! Link-based convex combination methods: MSA and Frank-Wolfe.

use super::{relative_gap_from, Engine, FlowState, Problem, SolverConfig};
use crate::cost::CostModel;
use crate::error::Result;

/// MSA step size for main iteration `k` (1-based): `1 / (k + 1)`.
pub fn msa_step_size(k: usize) -> f64 {
    1.0 / (k as f64 + 1.0)
}

const LINE_SEARCH_WIDTH: f64 = 1e-10;

/// Step size solving `t(x + λ d) · d = 0` on `[0, 1]` by bisection.
/// If the sign does not change the matching endpoint is returned.
pub fn line_search(model: &CostModel, x: &[f64], direction: &[f64]) -> f64 {
    let mut trial = vec![0.0; x.len()];
    let mut slope = |lambda: f64| -> f64 {
        for ((y, &xa), &da) in trial.iter_mut().zip(x).zip(direction) {
            *y = xa + lambda * da;
        }
        (0..x.len())
            .filter(|&a| direction[a] != 0.0)
            .map(|a| model.link_time(&trial, a) * direction[a])
            .sum()
    };
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    if slope(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > LINE_SEARCH_WIDTH {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub(super) struct ConvexCombination<'p> {
    problem: &'p Problem<'p>,
    state: FlowState,
    target: Vec<f64>,
    direction: Vec<f64>,
    line_search: bool,
}

impl<'p> ConvexCombination<'p> {
    pub(super) fn new(problem: &'p Problem<'p>, config: &SolverConfig, line_search: bool) -> Result<Self> {
        let t0 = problem.initial_times(&config.initial)?;
        let aon = problem.all_or_nothing(&t0)?;
        let state = FlowState::from_flows(problem.model, aon.flows);
        let n = problem.link_count();
        Ok(ConvexCombination {
            problem,
            state,
            target: vec![0.0; n],
            direction: vec![0.0; n],
            line_search,
        })
    }
}

impl Engine for ConvexCombination<'_> {
    fn measure(&mut self) -> Result<f64> {
        let aon = self.problem.all_or_nothing(&self.state.t)?;
        self.target = aon.flows;
        Ok(relative_gap_from(
            self.state.total_travel_time(),
            aon.shortest_path_travel_time,
        ))
    }

    fn step(&mut self, iteration: usize) -> Result<()> {
        for ((d, &y), &x) in self.direction.iter_mut().zip(&self.target).zip(&self.state.x) {
            *d = y - x;
        }
        let lambda = if self.line_search {
            line_search(self.problem.model, &self.state.x, &self.direction)
        } else {
            msa_step_size(iteration)
        };
        for (x, &d) in self.state.x.iter_mut().zip(&self.direction) {
            *x = (*x + lambda * d).max(0.0);
        }
        self.problem.model.link_times_into(&self.state.x, &mut self.state.t);
        Ok(())
    }

    fn state(&self) -> &FlowState {
        &self.state
    }

    fn into_state(self) -> FlowState {
        self.state
    }
}
