//! Equilibrium solvers.
//!
//! All four algorithms share one driver: at the start of every main
//! iteration the relative gap of the current state is measured and logged,
//! the run stops once it reaches the target, and otherwise the algorithm
//! takes one step. Every run starts from an all-or-nothing assignment.

mod algb;
mod convex;
mod gp;
mod shift;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::{all_or_nothing, shortest_paths, AonAssignment};
use crate::metrics::{ConvergenceLog, Reference};
use crate::network::{DemandMatrix, Network};

pub use algb::Bush;
pub use convex::{line_search, msa_step_size};
pub use shift::{newton_shift, second_derivative, second_derivative_symmetric, FlowShift, ShiftWorkspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Msa,
    FrankWolfe,
    GradientProjection,
    AlgorithmB,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Msa,
        Algorithm::FrankWolfe,
        Algorithm::GradientProjection,
        Algorithm::AlgorithmB,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::Msa => "msa",
            Algorithm::FrankWolfe => "fw",
            Algorithm::GradientProjection => "gp",
            Algorithm::AlgorithmB => "algb",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "msa" => Ok(Algorithm::Msa),
            "fw" | "frank-wolfe" => Ok(Algorithm::FrankWolfe),
            "gp" | "gradient-projection" => Ok(Algorithm::GradientProjection),
            "algb" | "algorithm-b" => Ok(Algorithm::AlgorithmB),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Times used for the initial all-or-nothing assignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Initialization {
    /// Times at zero flow.
    #[default]
    FreeFlow,
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub rg_target: f64,
    pub max_iterations: usize,
    pub newton_damping: f64,
    pub path_flow_drop_tol: f64,
    pub inner_iterations_per_main: usize,
    pub record_objective: bool,
    pub initial: Initialization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::GradientProjection,
            rg_target: 1e-6,
            max_iterations: 1000,
            newton_damping: 1.0,
            path_flow_drop_tol: 1e-12,
            inner_iterations_per_main: 20,
            record_objective: true,
            initial: Initialization::FreeFlow,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SolverConfig {
            algorithm,
            ..Default::default()
        }
    }

    pub fn with_target(mut self, rg_target: f64, max_iterations: usize) -> Self {
        self.rg_target = rg_target;
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rg_target > 0.0) {
            return Err(Error::Config(format!("rg_target must be positive, got {}", self.rg_target)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.newton_damping > 0.0 && self.newton_damping <= 1.0) {
            return Err(Error::Config(format!(
                "newton_damping must lie in (0, 1], got {}",
                self.newton_damping
            )));
        }
        if !(self.path_flow_drop_tol >= 0.0) {
            return Err(Error::Config("path_flow_drop_tol must be nonnegative".into()));
        }
        if self.inner_iterations_per_main == 0 {
            return Err(Error::Config("inner_iterations_per_main must be at least 1".into()));
        }
        Ok(())
    }
}

/// A network, its demand, and the cost model to equilibrate.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub network: &'a Network,
    pub demand: &'a DemandMatrix,
    pub model: &'a CostModel,
}

impl<'a> Problem<'a> {
    pub fn new(network: &'a Network, demand: &'a DemandMatrix, model: &'a CostModel) -> Result<Self> {
        if model.link_count() != network.link_count() {
            return Err(Error::InvalidNetwork(format!(
                "cost model has {} links, network has {}",
                model.link_count(),
                network.link_count()
            )));
        }
        if demand.zone_count() > network.zone_count() {
            return Err(Error::InvalidDemand(format!(
                "demand covers {} zones, network has {}",
                demand.zone_count(),
                network.zone_count()
            )));
        }
        Ok(Problem {
            network,
            demand,
            model,
        })
    }

    pub fn link_count(&self) -> usize {
        self.network.link_count()
    }

    pub fn free_flow_times(&self) -> Vec<f64> {
        self.model.link_times(&vec![0.0; self.link_count()])
    }

    pub(crate) fn initial_times(&self, init: &Initialization) -> Result<Vec<f64>> {
        match init {
            Initialization::FreeFlow => Ok(self.free_flow_times()),
            Initialization::Times(t) if t.len() == self.link_count() => Ok(t.clone()),
            Initialization::Times(t) => Err(Error::Config(format!(
                "initial times cover {} links, network has {}",
                t.len(),
                self.link_count()
            ))),
        }
    }

    /// Total demand-weighted shortest path time `Σ d κ` at `times`.
    pub fn shortest_path_travel_time(&self, times: &[f64]) -> Result<f64> {
        let mut sptt = 0.0;
        for (origin, dests) in self.demand.by_origin() {
            let tree = shortest_paths(self.network, origin, times);
            for (d, v) in dests {
                if !tree.is_reachable(d) {
                    return Err(Error::Unreachable {
                        origin: origin + 1,
                        destination: d + 1,
                    });
                }
                sptt += v * tree.label(d);
            }
        }
        Ok(sptt)
    }

    pub fn all_or_nothing(&self, times: &[f64]) -> Result<AonAssignment> {
        all_or_nothing(self.network, self.demand, times)
    }
}

/// Flow paths for one OD pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OdPaths {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    pub paths: Vec<PathFlow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFlow {
    pub links: Vec<usize>,
    pub flow: f64,
}

impl PathFlow {
    pub fn cost(&self, times: &[f64]) -> f64 {
        self.links.iter().map(|&a| times[a]).sum()
    }
}

/// Current solution. `t` always equals the model's link times at `x`.
/// Path sets are filled by gradient projection, bushes by Algorithm B.
#[derive(Debug, Clone, Default)]
pub struct FlowState {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub paths: Vec<OdPaths>,
    pub bushes: Vec<Bush>,
}

impl FlowState {
    pub(crate) fn from_flows(model: &CostModel, x: Vec<f64>) -> Self {
        let t = model.link_times(&x);
        FlowState {
            x,
            t,
            ..Default::default()
        }
    }

    pub fn total_travel_time(&self) -> f64 {
        self.x.iter().zip(&self.t).map(|(x, t)| x * t).sum()
    }

    /// Largest violation of node flow conservation, including demand
    /// generated at origins and absorbed at destinations.
    pub fn node_imbalance(&self, network: &Network, demand: &DemandMatrix) -> f64 {
        node_imbalance(network, demand, &self.x)
    }

    /// Largest gap between link flows and the sum of their path flows, and
    /// between OD demand and the sum of its path flows.
    pub fn path_consistency(&self, link_count: usize) -> f64 {
        let mut from_paths = vec![0.0; link_count];
        let mut worst: f64 = 0.0;
        for od in &self.paths {
            let mut total = 0.0;
            for p in &od.paths {
                total += p.flow;
                worst = worst.max(-p.flow);
                for &a in &p.links {
                    from_paths[a] += p.flow;
                }
            }
            worst = worst.max((total - od.demand).abs());
        }
        if !self.paths.is_empty() {
            for (a, &f) in from_paths.iter().enumerate() {
                worst = worst.max((f - self.x[a]).abs());
            }
        }
        worst
    }
}

/// `max_n |inflow - outflow + generated - absorbed|` over nodes.
pub fn node_imbalance(network: &Network, demand: &DemandMatrix, x: &[f64]) -> f64 {
    let mut balance = vec![0.0; network.node_count()];
    for (a, link) in network.links().iter().enumerate() {
        balance[link.tail] -= x[a];
        balance[link.head] += x[a];
    }
    for ((o, d), v) in demand.iter() {
        if o != d {
            balance[o] += v;
            balance[d] -= v;
        }
    }
    balance.iter().fold(0.0, |m, b| m.max(b.abs()))
}

pub(crate) fn relative_gap_from(tstt: f64, sptt: f64) -> f64 {
    if sptt <= 0.0 {
        return 0.0;
    }
    let rg = (tstt - sptt) / sptt;
    if rg < 0.0 && rg > -1e-12 {
        0.0
    } else {
        rg
    }
}

trait Engine {
    /// Relative gap of the current state.
    fn measure(&mut self) -> Result<f64>;
    fn step(&mut self, iteration: usize) -> Result<()>;
    fn state(&self) -> &FlowState;
    fn into_state(self) -> FlowState;
}

/// Solves to `config.rg_target`, logging the gap of every iteration.
pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<(FlowState, ConvergenceLog)> {
    solve_tracked(problem, config, None)
}

/// As [`solve`], also recording metric snapshots against `reference` at
/// each gap level the run crosses.
pub fn solve_tracked(
    problem: &Problem,
    config: &SolverConfig,
    reference: Option<&Reference>,
) -> Result<(FlowState, ConvergenceLog)> {
    config.validate()?;
    match config.algorithm {
        Algorithm::Msa => drive(problem, config, convex::ConvexCombination::new(problem, config, false)?, reference),
        Algorithm::FrankWolfe => drive(problem, config, convex::ConvexCombination::new(problem, config, true)?, reference),
        Algorithm::GradientProjection => drive(problem, config, gp::GradientProjection::new(problem, config)?, reference),
        Algorithm::AlgorithmB => drive(problem, config, algb::AlgorithmB::new(problem, config)?, reference),
    }
}

pub fn msa_solve(problem: &Problem, config: &SolverConfig) -> Result<(FlowState, ConvergenceLog)> {
    solve(problem, &SolverConfig { algorithm: Algorithm::Msa, ..config.clone() })
}

pub fn fw_solve(problem: &Problem, config: &SolverConfig) -> Result<(FlowState, ConvergenceLog)> {
    solve(problem, &SolverConfig { algorithm: Algorithm::FrankWolfe, ..config.clone() })
}

pub fn gp_solve(problem: &Problem, config: &SolverConfig) -> Result<(FlowState, ConvergenceLog)> {
    solve(problem, &SolverConfig { algorithm: Algorithm::GradientProjection, ..config.clone() })
}

pub fn algb_solve(problem: &Problem, config: &SolverConfig) -> Result<(FlowState, ConvergenceLog)> {
    solve(problem, &SolverConfig { algorithm: Algorithm::AlgorithmB, ..config.clone() })
}

fn drive<E: Engine>(
    problem: &Problem,
    config: &SolverConfig,
    mut engine: E,
    reference: Option<&Reference>,
) -> Result<(FlowState, ConvergenceLog)> {
    let clock = Instant::now();
    let mut log = ConvergenceLog::new(config.algorithm);
    for iteration in 1..=config.max_iterations {
        let gap = engine.measure()?;
        let state = engine.state();
        let objective = if config.record_objective {
            problem.model.objective(&state.x)
        } else {
            None
        };
        log.record(
            iteration,
            gap,
            objective,
            clock.elapsed().as_secs_f64(),
            &state.x,
            &state.t,
            reference,
        );
        if gap <= config.rg_target {
            log.converged = true;
            break;
        }
        if iteration == config.max_iterations {
            break;
        }
        engine.step(iteration)?;
    }
    Ok((engine.into_state(), log))
}
