//! Bundled test instances.
//!
//! * The four-link toy network: one OD pair with 60 trips over four
//!   parallel links, with five linear cost scenarios.
//! * A two-link instance with three equilibria.
//! * Sioux Falls in TNTP format.

use std::fmt;
use std::str::FromStr;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::network::{DemandMatrix, Link, Network};
use crate::solver::Problem;
use crate::sparse::SparseMatrix;
use crate::tntp::{parse_network, parse_trips};
use crate::weights::WeightMatrix;

pub const SIOUX_FALLS_NET: &str = include_str!("../data/SiouxFalls_net.tntp");
pub const SIOUX_FALLS_TRIPS: &str = include_str!("../data/SiouxFalls_trips.tntp");

pub const TOY_DEMAND: f64 = 60.0;
pub const TOY_CONSTANTS: [f64; 4] = [15.0, 10.0, 10.0, 15.0];

/// A network, its demand and a cost model.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub network: Network,
    pub demand: DemandMatrix,
    pub model: CostModel,
}

impl Fixture {
    pub fn problem(&self) -> Problem<'_> {
        Problem::new(&self.network, &self.demand, &self.model).expect("fixtures are consistent")
    }

    /// Same network and demand with another cost model.
    pub fn with_model(&self, model: CostModel) -> Fixture {
        Fixture {
            network: self.network.clone(),
            demand: self.demand.clone(),
            model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToyScenario {
    Separable,
    SymmetricFull,
    SymmetricPartial,
    AsymmetricFull,
    AsymmetricPartial,
}

impl ToyScenario {
    pub const ALL: [ToyScenario; 5] = [
        ToyScenario::Separable,
        ToyScenario::SymmetricFull,
        ToyScenario::SymmetricPartial,
        ToyScenario::AsymmetricFull,
        ToyScenario::AsymmetricPartial,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ToyScenario::Separable => "separable",
            ToyScenario::SymmetricFull => "symmetric-full",
            ToyScenario::SymmetricPartial => "symmetric-partial",
            ToyScenario::AsymmetricFull => "asymmetric-full",
            ToyScenario::AsymmetricPartial => "asymmetric-partial",
        }
    }
}

impl fmt::Display for ToyScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyScenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown toy scenario {s:?}")))
    }
}

/// Coefficients as printed (0.167, 0.183, 0.15) or as the fractions they
/// round (1/6, 11/60, 9/60).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficients {
    Printed,
    Exact,
}

/// Coefficient matrix of a toy scenario: `t = c + S x`.
pub fn toy_coefficients(scenario: ToyScenario, coefficients: Coefficients) -> Vec<Vec<f64>> {
    let (a, b, c) = match coefficients {
        Coefficients::Printed => (0.15, 0.167, 0.183),
        Coefficients::Exact => (9.0 / 60.0, 10.0 / 60.0, 11.0 / 60.0),
    };
    match scenario {
        ToyScenario::Separable => (0..4)
            .map(|r| (0..4).map(|k| if r == k { 1.0 } else { 0.0 }).collect())
            .collect(),
        ToyScenario::SymmetricFull => (0..4)
            .map(|r| (0..4).map(|k| if r == k { 0.5 } else { b }).collect())
            .collect(),
        ToyScenario::SymmetricPartial => vec![
            vec![0.75, 0.25, 0.0, 0.0],
            vec![0.25, 0.75, 0.0, 0.0],
            vec![0.0, 0.0, 0.75, 0.25],
            vec![0.0, 0.0, 0.25, 0.75],
        ],
        ToyScenario::AsymmetricFull => vec![
            vec![0.5, a, b, c],
            vec![b, 0.5, c, a],
            vec![c, b, 0.5, a],
            vec![a, c, b, 0.5],
        ],
        ToyScenario::AsymmetricPartial => vec![
            vec![0.75, 0.25, 0.0, 0.0],
            vec![0.3, 0.75, 0.0, 0.0],
            vec![0.0, 0.0, 0.75, 0.3],
            vec![0.0, 0.0, 0.25, 0.75],
        ],
    }
}

/// Two nodes joined by four parallel links. Each link is BPR with `b = 1`,
/// `p = 1` and capacity equal to its free-flow time, so `t = c + f`.
pub fn toy_network() -> Network {
    let links = TOY_CONSTANTS
        .iter()
        .map(|&c| {
            let mut link = Link::new(0, 1, c, c);
            link.bpr_b = 1.0;
            link.bpr_power = 1.0;
            link
        })
        .collect();
    Network::new(2, 2, 1, links).expect("toy network is valid")
}

pub fn toy_demand() -> DemandMatrix {
    DemandMatrix::from_entries(2, [((0, 1), TOY_DEMAND)]).expect("toy demand is valid")
}

/// The toy instance with printed coefficients.
pub fn toy(scenario: ToyScenario) -> Fixture {
    toy_with(scenario, Coefficients::Printed)
}

pub fn toy_with(scenario: ToyScenario, coefficients: Coefficients) -> Fixture {
    let matrix = SparseMatrix::from_dense(&toy_coefficients(scenario, coefficients)).expect("toy matrices are valid");
    Fixture {
        network: toy_network(),
        demand: toy_demand(),
        model: CostModel::linear(TOY_CONSTANTS.to_vec(), matrix).expect("toy model is valid"),
    }
}

/// Toy coefficients as a weight file matrix, when every row sums to one.
pub fn toy_weights(scenario: ToyScenario, coefficients: Coefficients) -> Result<WeightMatrix> {
    WeightMatrix::from_dense(&toy_coefficients(scenario, coefficients))
}

/// Two parallel links carrying 10 trips with
/// `t1 = 10 + x1 + 2 x2` and `t2 = 10 + x2 + 2 x1`.
/// The interaction is symmetric but not monotone, and the equilibria are
/// `(0, 10)`, `(5, 5)` and `(10, 0)`.
pub fn nonmonotone_demo() -> Fixture {
    let network = Network::new(2, 2, 1, vec![Link::new(0, 1, 1.0, 10.0), Link::new(0, 1, 1.0, 10.0)])
        .expect("demo network is valid");
    let demand = DemandMatrix::from_entries(2, [((0, 1), 10.0)]).expect("demo demand is valid");
    let s = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).expect("demo matrix is valid");
    Fixture {
        network,
        demand,
        model: CostModel::linear(vec![10.0, 10.0], s).expect("demo model is valid"),
    }
}

/// Sioux Falls with separable BPR costs.
pub fn sioux_falls() -> Fixture {
    let network = parse_network(SIOUX_FALLS_NET).expect("bundled network parses");
    let demand = parse_trips(SIOUX_FALLS_TRIPS).expect("bundled trips parse");
    let model = CostModel::separable_bpr(&network);
    Fixture {
        network,
        demand,
        model,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_link_one() {
        let f = toy(ToyScenario::Separable);
        assert_eq!(f.model.link_time(&[5.0, 0.0, 0.0, 0.0], 0), 20.0);
    }

    #[test]
    fn symmetric_partial_link_two() {
        let f = toy(ToyScenario::SymmetricPartial);
        assert_eq!(f.model.link_time(&[4.0, 0.0, 0.0, 0.0], 1), 11.0);
    }

    #[test]
    fn toy_demand_total() {
        assert_eq!(toy(ToyScenario::Separable).demand.total(), 60.0);
    }

    #[test]
    fn toy_network_bpr_is_affine() {
        let net = toy_network();
        let m = CostModel::separable_bpr(&net);
        let x = [3.0, 5.0, 7.0, 11.0];
        let affine = toy(ToyScenario::Separable).model;
        for a in 0..4 {
            assert!((m.link_time(&x, a) - affine.link_time(&x, a)).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_file_variants() {
        assert!(toy_weights(ToyScenario::SymmetricFull, Coefficients::Exact).is_ok());
        assert!(toy_weights(ToyScenario::SymmetricFull, Coefficients::Printed).is_err());
        assert!(toy_weights(ToyScenario::AsymmetricFull, Coefficients::Printed).is_ok());
        assert!(toy_weights(ToyScenario::AsymmetricPartial, Coefficients::Printed).is_err());
    }

    #[test]
    fn sioux_falls_loads() {
        let f = sioux_falls();
        assert_eq!(f.network.node_count(), 24);
        assert_eq!(f.network.link_count(), 76);
        assert!((f.demand.total() - 360600.0).abs() < 1e-6);
    }
}
