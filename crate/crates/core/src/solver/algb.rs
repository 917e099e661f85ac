//! Bush-based Algorithm B.
//!
//! Each origin keeps an acyclic bush of links. Flow is shifted from the
//! longest used segment to the shortest segment ending at the same node,
//! working backwards through the bush's topological order.

use std::collections::VecDeque;

use super::shift::{newton_shift, ShiftWorkspace};
use super::{relative_gap_from, Engine, FlowState, Problem, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::shortest_paths;
use crate::network::Network;

/// An origin's bush and the origin-specific flow on its links.
#[derive(Debug, Clone, PartialEq)]
pub struct Bush {
    pub origin: usize,
    pub member: Vec<bool>,
    pub flow: Vec<f64>,
    /// Bush nodes in topological order, origin first.
    pub order: Vec<usize>,
}

impl Bush {
    pub fn links(&self) -> impl Iterator<Item = usize> + '_ {
        self.member.iter().enumerate().filter(|(_, &m)| m).map(|(a, _)| a)
    }

    /// Returns false if the member links contain a cycle.
    pub fn is_acyclic(&self, network: &Network) -> bool {
        topological_order(network, self.origin, &self.member).is_some()
    }
}

/// Kahn's algorithm over member links reachable from `origin`.
fn topological_order(network: &Network, origin: usize, member: &[bool]) -> Option<Vec<usize>> {
    let n = network.node_count();
    let mut reach = vec![false; n];
    let mut stack = vec![origin];
    reach[origin] = true;
    while let Some(i) = stack.pop() {
        for &a in network.out_links(i) {
            let j = network.link(a).head;
            if member[a] && !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    let mut indegree = vec![0usize; n];
    for (a, link) in network.links().iter().enumerate() {
        if member[a] && reach[link.tail] {
            indegree[link.head] += 1;
        }
    }
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    if indegree[origin] != 0 {
        return None;
    }
    queue.push_back(origin);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &a in network.out_links(i) {
            if !member[a] {
                continue;
            }
            let j = network.link(a).head;
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    let reachable = reach.iter().filter(|&&r| r).count();
    (order.len() == reachable).then_some(order)
}

/// Minimum and maximum path labels inside one bush.
struct Labels {
    min: Vec<f64>,
    max: Vec<f64>,
    min_pred: Vec<Option<usize>>,
    max_pred: Vec<Option<usize>>,
}

impl Labels {
    fn new(n: usize) -> Self {
        Labels {
            min: vec![f64::INFINITY; n],
            max: vec![f64::NEG_INFINITY; n],
            min_pred: vec![None; n],
            max_pred: vec![None; n],
        }
    }

    /// Shortest paths over all bush links and longest paths over links
    /// with flow. A node without used in-links takes its minimum label.
    fn compute(&mut self, network: &Network, bush: &Bush, t: &[f64]) {
        for &j in &bush.order {
            self.min[j] = f64::INFINITY;
            self.max[j] = f64::NEG_INFINITY;
            self.min_pred[j] = None;
            self.max_pred[j] = None;
        }
        self.min[bush.origin] = 0.0;
        self.max[bush.origin] = 0.0;
        for &j in &bush.order {
            if j == bush.origin {
                continue;
            }
            for &a in network.in_links(j) {
                if !bush.member[a] {
                    continue;
                }
                let i = network.link(a).tail;
                let lo = self.min[i] + t[a];
                if lo < self.min[j] {
                    self.min[j] = lo;
                    self.min_pred[j] = Some(a);
                }
                if bush.flow[a] > 0.0 && self.max[i].is_finite() {
                    let hi = self.max[i] + t[a];
                    if hi > self.max[j] {
                        self.max[j] = hi;
                        self.max_pred[j] = Some(a);
                    }
                }
            }
            if self.max_pred[j].is_none() {
                self.max[j] = self.min[j];
            }
        }
    }
}

pub(super) struct AlgorithmB<'p> {
    problem: &'p Problem<'p>,
    state: FlowState,
    labels: Labels,
    longest: Vec<f64>,
    marks: Vec<u32>,
    epoch: u32,
    lower: Vec<usize>,
    upper: Vec<usize>,
    ws: ShiftWorkspace,
    damping: f64,
    inner: usize,
}

impl<'p> AlgorithmB<'p> {
    pub(super) fn new(problem: &'p Problem<'p>, config: &SolverConfig) -> Result<Self> {
        let network = problem.network;
        let m = problem.link_count();
        let n = network.node_count();
        let t0 = problem.initial_times(&config.initial)?;
        let mut x = vec![0.0; m];
        let mut bushes = Vec::new();
        let mut node_flow = vec![0.0; n];
        for (origin, dests) in problem.demand.by_origin() {
            let tree = shortest_paths(network, origin, &t0);
            let mut flow = vec![0.0; m];
            crate::graph::load_tree(network, &tree, &dests, &mut node_flow, &mut flow)?;
            let mut member = vec![false; m];
            for &j in tree.settled_order() {
                if let Some(a) = tree.pred[j] {
                    member[a] = true;
                }
            }
            for (xa, fa) in x.iter_mut().zip(&flow) {
                *xa += fa;
            }
            bushes.push(Bush {
                origin,
                member,
                flow,
                order: tree.settled_order().to_vec(),
            });
        }
        let mut state = FlowState::from_flows(problem.model, x);
        state.bushes = bushes;
        Ok(AlgorithmB {
            problem,
            state,
            labels: Labels::new(n),
            longest: vec![f64::NEG_INFINITY; n],
            marks: vec![0; n],
            epoch: 0,
            lower: Vec::new(),
            upper: Vec::new(),
            ws: ShiftWorkspace::new(m),
            damping: config.newton_damping,
            inner: config.inner_iterations_per_main,
        })
    }

    /// Drops unused links, then adds links that shorten the bush's
    /// shortest paths without closing a cycle.
    fn update_bush(&mut self, b: usize) -> Result<()> {
        let network = self.problem.network;
        let t = &self.state.t;
        let bush = &mut self.state.bushes[b];
        self.labels.compute(network, bush, t);
        let labels = &self.labels;
        for a in 0..bush.member.len() {
            if bush.member[a] && bush.flow[a] == 0.0 && labels.min_pred[network.link(a).head] != Some(a) {
                bush.member[a] = false;
            }
        }
        // Longest paths over every remaining bush link bound the additions:
        // a link may only point "downhill" in both labels.
        for &j in &bush.order {
            self.longest[j] = f64::NEG_INFINITY;
        }
        self.longest[bush.origin] = 0.0;
        for &j in &bush.order {
            for &a in network.in_links(j) {
                if bush.member[a] {
                    let i = network.link(a).tail;
                    self.longest[j] = self.longest[j].max(self.longest[i] + t[a]);
                }
            }
        }
        let mut in_order = vec![false; network.node_count()];
        for &j in &bush.order {
            in_order[j] = true;
        }
        for (a, link) in network.links().iter().enumerate() {
            let (i, j) = (link.tail, link.head);
            if bush.member[a] || !in_order[i] || !in_order[j] || j == bush.origin {
                continue;
            }
            if i != bush.origin && network.blocks_through(i) {
                continue;
            }
            if labels.min[i] + t[a] < labels.min[j] && self.longest[i] + t[a] < self.longest[j] {
                bush.member[a] = true;
            }
        }
        bush.order = topological_order(network, bush.origin, &bush.member).ok_or_else(|| {
            Error::InvalidNetwork(format!("bush of origin {} became cyclic", bush.origin + 1))
        })?;
        Ok(())
    }

    /// One backward sweep of flow shifts over the bush. Returns the total
    /// flow moved.
    fn equilibrate(&mut self, b: usize) -> f64 {
        let network = self.problem.network;
        self.labels.compute(network, &self.state.bushes[b], &self.state.t);
        let order = std::mem::take(&mut self.state.bushes[b].order);
        let mut moved = 0.0;
        for &j in order.iter().rev() {
            moved += self.shift_at(b, j);
        }
        self.state.bushes[b].order = order;
        moved
    }

    fn shift_at(&mut self, b: usize, j: usize) -> f64 {
        let network = self.problem.network;
        let origin = self.state.bushes[b].origin;
        let labels = &self.labels;
        if j == origin || labels.max_pred[j].is_none() {
            return 0.0;
        }
        let (lo, hi) = (labels.min[j], labels.max[j]);
        if !(hi - lo > 1e-14 * hi.abs().max(1.0)) {
            return 0.0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let mut node = j;
        loop {
            self.marks[node] = self.epoch;
            if node == origin {
                break;
            }
            match labels.min_pred[node] {
                Some(a) => node = network.link(a).tail,
                None => return 0.0,
            }
        }
        self.upper.clear();
        node = j;
        let meet = loop {
            let Some(a) = labels.max_pred[node] else {
                return 0.0;
            };
            self.upper.push(a);
            node = network.link(a).tail;
            if self.marks[node] == self.epoch {
                break node;
            }
        };
        self.lower.clear();
        node = j;
        while node != meet {
            let a = labels.min_pred[node].expect("min path reaches the meeting node");
            self.lower.push(a);
            node = network.link(a).tail;
        }
        let bush = &self.state.bushes[b];
        let (mut limit, mut argmin) = (f64::INFINITY, usize::MAX);
        for &a in &self.upper {
            if bush.flow[a] < limit {
                limit = bush.flow[a];
                argmin = a;
            }
        }
        let model = self.problem.model;
        let shift = newton_shift(
            model,
            &self.state.x,
            &self.state.t,
            &self.lower,
            &self.upper,
            self.damping,
            limit,
            &mut self.ws,
        );
        if shift.delta <= 0.0 {
            return 0.0;
        }
        let delta = shift.delta;
        let FlowState { x, t, bushes, .. } = &mut self.state;
        let bush = &mut bushes[b];
        for &a in &self.upper {
            bush.flow[a] = (bush.flow[a] - delta).max(0.0);
            x[a] = (x[a] - delta).max(0.0);
        }
        if delta == limit {
            bush.flow[argmin] = 0.0;
        }
        for &a in &self.lower {
            bush.flow[a] += delta;
            x[a] += delta;
        }
        model.update_times(x, t, self.upper.iter().chain(&self.lower).copied(), &mut self.ws.touched);
        delta
    }
}

impl Engine for AlgorithmB<'_> {
    fn measure(&mut self) -> Result<f64> {
        let sptt = self.problem.shortest_path_travel_time(&self.state.t)?;
        Ok(relative_gap_from(self.state.total_travel_time(), sptt))
    }

    fn step(&mut self, _iteration: usize) -> Result<()> {
        for b in 0..self.state.bushes.len() {
            self.update_bush(b)?;
            self.equilibrate(b);
        }
        for _ in 1..self.inner {
            let mut moved = 0.0;
            for b in 0..self.state.bushes.len() {
                moved += self.equilibrate(b);
            }
            if moved == 0.0 {
                break;
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
