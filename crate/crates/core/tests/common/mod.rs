#![allow(dead_code)]

use proptest::prelude::*;
use stap::{DemandMatrix, Link, Network};

/// Random strongly connected network: a bidirectional ring plus extra
/// random links, every node a zone.
pub fn arb_network(max_nodes: usize) -> impl Strategy<Value = Network> {
    (3..=max_nodes).prop_flat_map(|n| {
        let extra = prop::collection::vec((0..n, 0..n, link_params()), 0..2 * n);
        let ring = prop::collection::vec((link_params(), link_params()), n);
        (Just(n), ring, extra).prop_map(|(n, ring, extra)| {
            let mut links = Vec::new();
            for (i, (fwd, back)) in ring.into_iter().enumerate() {
                links.push(make_link(i, (i + 1) % n, fwd));
                links.push(make_link((i + 1) % n, i, back));
            }
            for (a, b, p) in extra {
                if a != b {
                    links.push(make_link(a, b, p));
                }
            }
            Network::new(n, n, 1, links).expect("generated network is valid")
        })
    })
}

type LinkParams = (f64, f64, f64, f64, u8);

fn link_params() -> impl Strategy<Value = LinkParams> {
    (1.0..500.0f64, 0.5..30.0f64, 0.0..2.0f64, 0.1..10.0f64, 1u8..=4)
}

fn make_link(tail: usize, head: usize, (capacity, fft, b, length, power): LinkParams) -> Link {
    let mut link = Link::new(tail, head, capacity, fft);
    link.bpr_b = b;
    link.bpr_power = power as f64;
    link.length = length;
    link
}

/// A network with demand between some of its zones.
pub fn arb_instance(max_nodes: usize) -> impl Strategy<Value = (Network, DemandMatrix)> {
    arb_network(max_nodes).prop_flat_map(|net| {
        let z = net.zone_count();
        let entries = prop::collection::vec((0..z, 0..z, 0.5..200.0f64), 1..2 * z);
        (Just(net), entries).prop_map(move |(net, entries)| {
            let mut demand = DemandMatrix::new(z);
            for (o, d, v) in entries {
                if o != d {
                    demand.add(o, d, v).unwrap();
                }
            }
            (net, demand)
        })
    })
}

/// Independent shortest path oracle.
pub fn bellman_ford(network: &Network, origin: usize, times: &[f64]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; network.node_count()];
    dist[origin] = 0.0;
    for _ in 0..network.node_count() {
        let mut changed = false;
        for (a, link) in network.links().iter().enumerate() {
            if link.tail != origin && network.blocks_through(link.tail) {
                continue;
            }
            let candidate = dist[link.tail] + times[a];
            if candidate < dist[link.head] {
                dist[link.head] = candidate;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
