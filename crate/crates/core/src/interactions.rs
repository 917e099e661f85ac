//! Random interaction weights with a given number of degrees of dependency.
//!
//! Link `a` interacts with every link reachable within `N` steps in the
//! link adjacency graph, where two links are adjacent when they share an
//! endpoint. Off-diagonal weights are drawn symmetrically, rescaled so every
//! row leaves at least `diagonal_min` for the diagonal, and the diagonal
//! fills each row up to one.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::sparse::SparseMatrix;
use crate::weights::WeightMatrix;

/// Off-diagonal weight used between the two directions of a road.
pub const TWO_WAY_WEIGHT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub degrees: usize,
    pub symmetric: bool,
    pub diagonal_min: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(degrees: usize, symmetric: bool, seed: u64) -> Self {
        GenSpec {
            degrees,
            symmetric,
            diagonal_min: 0.55,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diagonal_min > 0.5 && self.diagonal_min <= 1.0) {
            return Err(Error::Config(format!(
                "diagonal_min must lie in (0.5, 1], got {}",
                self.diagonal_min
            )));
        }
        Ok(())
    }
}

/// Links within `depth` adjacency steps of `link`, excluding `link`, sorted.
pub fn link_neighbors(network: &Network, link: usize, depth: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; network.link_count()];
    dist[link] = 0;
    let mut queue = VecDeque::from([link]);
    let mut found = Vec::new();
    while let Some(a) = queue.pop_front() {
        if dist[a] == depth {
            continue;
        }
        let l = network.link(a);
        for node in [l.tail, l.head] {
            for &b in network.out_links(node).iter().chain(network.in_links(node)) {
                if dist[b] == usize::MAX {
                    dist[b] = dist[a] + 1;
                    found.push(b);
                    queue.push_back(b);
                }
            }
        }
    }
    found.sort_unstable();
    found
}

fn assemble(n: usize, pairs: &BTreeMap<(usize, usize), (f64, f64)>) -> Result<WeightMatrix> {
    let mut off = vec![0.0; n];
    let mut triplets = Vec::with_capacity(n + 2 * pairs.len());
    for (&(a, b), &(w_ab, w_ba)) in pairs {
        off[a] += w_ab;
        off[b] += w_ba;
        triplets.push((a, b, w_ab));
        triplets.push((b, a, w_ba));
    }
    for (a, s) in off.iter().enumerate() {
        triplets.push((a, a, 1.0 - s));
    }
    WeightMatrix::new(SparseMatrix::from_triplets(n, triplets)?)
}

/// Seeded weight matrix per `spec`. Symmetric mode is exactly symmetric;
/// asymmetric mode perturbs each symmetric pair by an antisymmetric amount
/// small enough to keep weights nonnegative and diagonals above the minimum.
pub fn generate_weights(network: &Network, spec: &GenSpec) -> Result<WeightMatrix> {
    spec.validate()?;
    let n = network.link_count();
    if spec.degrees == 0 {
        return Ok(WeightMatrix::identity(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for a in 0..n {
        for b in link_neighbors(network, a, spec.degrees) {
            if a < b {
                let u = 1.0 - rng.gen::<f64>();
                pairs.insert((a, b), (u, u));
            }
        }
    }
    let mut off = vec![0.0; n];
    for (&(a, b), &(u, _)) in &pairs {
        off[a] += u;
        off[b] += u;
    }
    let widest = off.iter().fold(0.0f64, |m, &s| m.max(s));
    if widest == 0.0 {
        log::warn!("no link has a neighbour within {} degrees; weights are separable", spec.degrees);
        return Ok(WeightMatrix::identity(n));
    }
    let scale = (1.0 - spec.diagonal_min) / widest;
    for w in pairs.values_mut() {
        let v = w.0 * scale;
        *w = (v, v);
    }
    if !spec.symmetric {
        let mut slack: Vec<f64> = vec![0.0; n];
        for (&(a, b), &(w, _)) in &pairs {
            slack[a] += w;
            slack[b] += w;
        }
        for s in slack.iter_mut() {
            *s = (1.0 - *s - spec.diagonal_min).max(0.0);
        }
        for (&(a, b), w) in pairs.iter_mut() {
            let lo = -w.0.min(slack[b]);
            let hi = w.1.min(slack[a]);
            if hi - lo <= 0.0 {
                continue;
            }
            let delta = rng.gen_range(lo..=hi);
            w.0 += delta;
            w.1 -= delta;
            slack[a] -= delta;
            slack[b] += delta;
            w.0 = w.0.max(0.0);
            w.1 = w.1.max(0.0);
            slack[a] = slack[a].max(0.0);
        }
    }
    assemble(n, &pairs)
}

/// Weights coupling each link with the link running the opposite way
/// between the same nodes, if any. Links without a reverse stay separable.
pub fn two_way_weights(network: &Network, weight: f64) -> Result<WeightMatrix> {
    if !(0.0..0.5).contains(&weight) {
        return Err(Error::Config(format!("two-way weight must lie in [0, 0.5), got {weight}")));
    }
    let mut pairs = BTreeMap::new();
    for (a, link) in network.links().iter().enumerate() {
        let reverse = network
            .out_links(link.head)
            .iter()
            .copied()
            .find(|&b| network.link(b).head == link.tail);
        if let Some(b) = reverse {
            if a < b {
                pairs.insert((a, b), (weight, weight));
            }
        }
    }
    assemble(network.link_count(), &pairs)
}

/// `λ W + (1 - λ) (W + Wᵀ) / 2` on the off-diagonal entries, with each
/// diagonal refilled so rows still sum to one.
pub fn interpolate_symmetry(w: &WeightMatrix, lambda: f64) -> Result<WeightMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if lambda == 1.0 {
        return Ok(w.clone());
    }
    let n = w.dim();
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (r, c, v) in w.triplets() {
        if r == c {
            continue;
        }
        let key = (r.min(c), r.max(c));
        let entry = pairs.entry(key).or_insert((0.0, 0.0));
        if r < c {
            entry.0 = v;
        } else {
            entry.1 = v;
        }
    }
    for pair in pairs.values_mut() {
        let mean = 0.5 * (pair.0 + pair.1);
        *pair = (
            lambda * pair.0 + (1.0 - lambda) * mean,
            lambda * pair.1 + (1.0 - lambda) * mean,
        );
        if lambda == 0.0 {
            pair.1 = pair.0;
        }
    }
    assemble(n, &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Link;

    fn chain() -> Network {
        Network::new(3, 1, 1, vec![Link::new(0, 1, 1.0, 1.0), Link::new(1, 2, 1.0, 1.0)]).unwrap()
    }

    #[test]
    fn neighbors_on_a_chain() {
        let net = chain();
        assert_eq!(link_neighbors(&net, 0, 0), Vec::<usize>::new());
        assert_eq!(link_neighbors(&net, 0, 1), vec![1]);
    }

    #[test]
    fn two_by_two_interpolation() {
        let w = WeightMatrix::from_dense(&[vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap();
        let half = interpolate_symmetry(&w, 0.5).unwrap();
        assert!((half.get(0, 1) - 0.25).abs() < 1e-15);
        assert!((half.get(1, 0) - 0.15).abs() < 1e-15);
        assert!((half.row_sum(0) - 1.0).abs() < 1e-15);
        let sym = interpolate_symmetry(&w, 0.0).unwrap();
        assert!(sym.is_symmetric());
        assert_eq!(interpolate_symmetry(&w, 1.0).unwrap(), w);
    }

    #[test]
    fn zero_degrees_is_identity() {
        let w = generate_weights(&chain(), &GenSpec::new(0, true, 1)).unwrap();
        assert!(w.is_identity());
    }

    #[test]
    fn two_way_pairs_reverse_links() {
        let links = vec![Link::new(0, 1, 1.0, 1.0), Link::new(1, 2, 1.0, 1.0), Link::new(1, 0, 1.0, 1.0)];
        let net = Network::new(3, 1, 1, links).unwrap();
        let w = two_way_weights(&net, 0.25).unwrap();
        assert_eq!(w.get(0, 2), 0.25);
        assert_eq!(w.get(2, 0), 0.25);
        assert_eq!(w.get(1, 1), 1.0);
        assert_eq!(w.get(0, 0), 0.75);
    }
}
