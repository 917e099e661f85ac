//! Shortest paths and all-or-nothing loading.
//!
//! Ties are always broken toward the lowest predecessor link index so that
//! every assignment is reproducible.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::network::{DemandMatrix, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    label: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.label
            .total_cmp(&other.label)
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    pub origin: usize,
    /// Minimum cost from the origin; infinite when unreachable.
    pub labels: Vec<f64>,
    /// Last link of the chosen shortest path.
    pub pred: Vec<Option<usize>>,
    settled: Vec<usize>,
}

impl ShortestPathTree {
    pub fn label(&self, node: usize) -> f64 {
        self.labels[node]
    }

    pub fn is_reachable(&self, node: usize) -> bool {
        self.labels[node].is_finite()
    }

    /// Nodes in the order they were settled; every tree link's tail precedes
    /// its head.
    pub fn settled_order(&self) -> &[usize] {
        &self.settled
    }

    /// Links of the tree path from the origin to `dest`, in travel order.
    pub fn path_links(&self, network: &Network, dest: usize) -> Option<Vec<usize>> {
        if !self.is_reachable(dest) {
            return None;
        }
        let mut links = Vec::new();
        let mut node = dest;
        while node != self.origin {
            let a = self.pred[node]?;
            links.push(a);
            node = network.link(a).tail;
        }
        links.reverse();
        Some(links)
    }
}

/// Label-setting shortest paths from `origin` under nonnegative `times`.
/// Zones that block through traffic are never expanded except the origin.
pub fn shortest_paths(network: &Network, origin: usize, times: &[f64]) -> ShortestPathTree {
    let n = network.node_count();
    let mut labels = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut settled = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    labels[origin] = 0.0;
    heap.push(Reverse(HeapEntry {
        label: 0.0,
        node: origin,
    }));
    while let Some(Reverse(HeapEntry { label, node })) = heap.pop() {
        if done[node] || label > labels[node] {
            continue;
        }
        done[node] = true;
        settled.push(node);
        if node != origin && network.blocks_through(node) {
            continue;
        }
        for &a in network.out_links(node) {
            let head = network.link(a).head;
            if done[head] {
                continue;
            }
            let candidate = label + times[a];
            if candidate < labels[head] {
                labels[head] = candidate;
                pred[head] = Some(a);
                heap.push(Reverse(HeapEntry {
                    label: candidate,
                    node: head,
                }));
            } else if candidate == labels[head] && pred[head].is_some_and(|p| a < p) {
                pred[head] = Some(a);
            }
        }
    }
    ShortestPathTree {
        origin,
        labels,
        pred,
        settled,
    }
}

/// An ordered, acyclic sequence of links from an origin zone to a
/// destination zone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub origin: usize,
    pub destination: usize,
    pub links: Vec<usize>,
}

impl Path {
    pub fn new(network: &Network, origin: usize, destination: usize, links: Vec<usize>) -> Result<Self> {
        let mut node = origin;
        let mut visited = vec![false; network.node_count()];
        visited[origin] = true;
        for &a in &links {
            let link = network.link(a);
            if link.tail != node {
                return Err(Error::InvalidNetwork(format!(
                    "link {} does not continue the path at node {}",
                    a + 1,
                    node + 1
                )));
            }
            node = link.head;
            if std::mem::replace(&mut visited[node], true) {
                return Err(Error::InvalidNetwork(format!(
                    "path revisits node {}",
                    node + 1
                )));
            }
        }
        if node != destination {
            return Err(Error::InvalidNetwork(format!(
                "path ends at node {} instead of {}",
                node + 1,
                destination + 1
            )));
        }
        Ok(Path {
            origin,
            destination,
            links,
        })
    }

    pub fn cost(&self, times: &[f64]) -> f64 {
        self.links.iter().map(|&a| times[a]).sum()
    }
}

/// Loads each destination's demand onto the tree. Returns `Σ d · κ`.
pub fn load_tree(
    network: &Network,
    tree: &ShortestPathTree,
    destinations: &[(usize, f64)],
    node_flow: &mut [f64],
    flows: &mut [f64],
) -> Result<f64> {
    let mut sptt = 0.0;
    for &(d, v) in destinations {
        if !tree.is_reachable(d) {
            return Err(Error::Unreachable {
                origin: tree.origin + 1,
                destination: d + 1,
            });
        }
        node_flow[d] += v;
        sptt += v * tree.labels[d];
    }
    for &node in tree.settled_order().iter().rev() {
        let f = std::mem::take(&mut node_flow[node]);
        if f == 0.0 || node == tree.origin {
            continue;
        }
        let a = tree.pred[node].expect("settled non-origin nodes have a predecessor");
        flows[a] += f;
        node_flow[network.link(a).tail] += f;
    }
    Ok(sptt)
}

#[derive(Debug, Clone)]
pub struct AonAssignment {
    pub flows: Vec<f64>,
    /// `Σ_rs d_rs κ_rs`
    pub shortest_path_travel_time: f64,
}

/// All demand placed on current shortest paths.
pub fn all_or_nothing(network: &Network, demand: &DemandMatrix, times: &[f64]) -> Result<AonAssignment> {
    let mut flows = vec![0.0; network.link_count()];
    let mut node_flow = vec![0.0; network.node_count()];
    let mut sptt = 0.0;
    for (origin, dests) in demand.by_origin() {
        let tree = shortest_paths(network, origin, times);
        sptt += load_tree(network, &tree, &dests, &mut node_flow, &mut flows)?;
    }
    Ok(AonAssignment {
        flows,
        shortest_path_travel_time: sptt,
    })
}
