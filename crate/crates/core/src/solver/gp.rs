//! Path-based gradient projection with Newton flow shifts.
//!
//! OD pairs are processed one origin at a time (Gauss-Seidel): the shortest
//! path tree is built from the times left by the previous origin, and link
//! times are refreshed after every single shift.

use super::shift::{newton_shift, ShiftWorkspace};
use super::{relative_gap_from, Engine, FlowState, OdPaths, PathFlow, Problem, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::shortest_paths;

pub(super) struct GradientProjection<'p> {
    problem: &'p Problem<'p>,
    state: FlowState,
    /// Index into `state.paths` of the first OD pair of each origin.
    origins: Vec<(usize, std::ops::Range<usize>)>,
    ws: ShiftWorkspace,
    damping: f64,
    drop_tol: f64,
}

impl<'p> GradientProjection<'p> {
    pub(super) fn new(problem: &'p Problem<'p>, config: &SolverConfig) -> Result<Self> {
        let network = problem.network;
        let t0 = problem.initial_times(&config.initial)?;
        let mut x = vec![0.0; problem.link_count()];
        let mut paths = Vec::new();
        let mut origins = Vec::new();
        for (origin, dests) in problem.demand.by_origin() {
            let tree = shortest_paths(network, origin, &t0);
            let start = paths.len();
            for (d, v) in dests {
                let links = tree.path_links(network, d).ok_or(Error::Unreachable {
                    origin: origin + 1,
                    destination: d + 1,
                })?;
                for &a in &links {
                    x[a] += v;
                }
                paths.push(OdPaths {
                    origin,
                    destination: d,
                    demand: v,
                    paths: vec![PathFlow { links, flow: v }],
                });
            }
            origins.push((origin, start..paths.len()));
        }
        let mut state = FlowState::from_flows(problem.model, x);
        state.paths = paths;
        Ok(GradientProjection {
            problem,
            state,
            origins,
            ws: ShiftWorkspace::new(problem.link_count()),
            damping: config.newton_damping,
            drop_tol: config.path_flow_drop_tol,
        })
    }

    /// Moves `amount` from path `from` to path `to` of one OD pair and
    /// refreshes the affected link times.
    fn transfer(&mut self, od: usize, from: usize, to: usize, amount: f64) {
        let model = self.problem.model;
        let FlowState { x, t, paths, .. } = &mut self.state;
        let od = &mut paths[od];
        od.paths[from].flow -= amount;
        od.paths[to].flow += amount;
        self.ws.split(&od.paths[to].links, &od.paths[from].links);
        for &a in &self.ws.upper {
            x[a] = (x[a] - amount).max(0.0);
        }
        for &a in &self.ws.lower {
            x[a] += amount;
        }
        let changed: Vec<usize> = self.ws.lower.iter().chain(&self.ws.upper).copied().collect();
        model.update_times(x, t, changed, &mut self.ws.touched);
    }

    fn equilibrate_od(&mut self, od: usize, shortest: Vec<usize>) {
        let paths = &mut self.state.paths[od].paths;
        if !paths.iter().any(|p| p.links == shortest) {
            paths.push(PathFlow {
                links: shortest,
                flow: 0.0,
            });
        }
        let basic = self.basic_path(od);
        let count = self.state.paths[od].paths.len();
        for p in 0..count {
            if p == basic {
                continue;
            }
            let (shift, truncated) = {
                let od_paths = &self.state.paths[od].paths;
                let s = newton_shift(
                    self.problem.model,
                    &self.state.x,
                    &self.state.t,
                    &od_paths[basic].links,
                    &od_paths[p].links,
                    self.damping,
                    od_paths[p].flow,
                    &mut self.ws,
                );
                (s.delta, s.truncated && s.delta == od_paths[p].flow)
            };
            if shift > 0.0 {
                self.transfer(od, p, basic, shift);
                if truncated {
                    self.state.paths[od].paths[p].flow = 0.0;
                }
            }
        }
        // Residual flow on dropped paths moves to the basic path.
        for p in 0..count {
            let flow = self.state.paths[od].paths[p].flow;
            if p != basic && flow > 0.0 && flow < self.drop_tol {
                self.transfer(od, p, basic, flow);
                self.state.paths[od].paths[p].flow = 0.0;
            }
        }
        let paths = &mut self.state.paths[od].paths;
        let mut index = 0;
        paths.retain(|p| {
            let keep = index == basic || p.flow > 0.0;
            index += 1;
            keep
        });
    }

    /// The cheapest path at current times; ties go to the earliest path.
    fn basic_path(&self, od: usize) -> usize {
        let t = &self.state.t;
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.state.paths[od].paths.iter().enumerate() {
            let c = p.cost(t);
            if c < best.1 {
                best = (i, c);
            }
        }
        best.0
    }
}

impl Engine for GradientProjection<'_> {
    fn measure(&mut self) -> Result<f64> {
        let sptt = self.problem.shortest_path_travel_time(&self.state.t)?;
        Ok(relative_gap_from(self.state.total_travel_time(), sptt))
    }

    fn step(&mut self, _iteration: usize) -> Result<()> {
        let network = self.problem.network;
        for k in 0..self.origins.len() {
            let (origin, range) = self.origins[k].clone();
            let tree = shortest_paths(network, origin, &self.state.t);
            for od in range {
                let dest = self.state.paths[od].destination;
                let shortest = tree.path_links(network, dest).ok_or(Error::Unreachable {
                    origin: origin + 1,
                    destination: dest + 1,
                })?;
                self.equilibrate_od(od, shortest);
            }
        }
        Ok(())
    }

    fn state(&self) -> &FlowState {
        &self.state
    }

    fn into_state(self) -> FlowState {
        self.state
    }
}
