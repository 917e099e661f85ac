//! Network and demand types.
//!
//! Node and zone indices are 0-based here; the TNTP parser converts from the
//! 1-based file convention.

use std::collections::{BTreeMap, HashSet};

use log::warn;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub tail: usize,
    pub head: usize,
    pub capacity: f64,
    pub length: f64,
    pub free_flow_time: f64,
    pub bpr_b: f64,
    pub bpr_power: f64,
    pub speed_limit: f64,
    pub toll: f64,
    pub link_type: f64,
}

impl Link {
    pub fn new(tail: usize, head: usize, capacity: f64, free_flow_time: f64) -> Self {
        Link {
            tail,
            head,
            capacity,
            length: free_flow_time,
            free_flow_time,
            bpr_b: 0.15,
            bpr_power: 4.0,
            speed_limit: 0.0,
            toll: 0.0,
            link_type: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: usize,
    zones: usize,
    first_thru_node: usize,
    links: Vec<Link>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
    connector: Vec<bool>,
}

impl Network {
    /// Builds and validates a network. `first_thru_node` is the 1-based TNTP
    /// value: zones numbered below it may start or end paths but never carry
    /// through traffic.
    pub fn new(nodes: usize, zones: usize, first_thru_node: usize, links: Vec<Link>) -> Result<Self> {
        if zones > nodes {
            return Err(Error::InvalidNetwork(format!(
                "{zones} zones exceed {nodes} nodes"
            )));
        }
        let mut seen = HashSet::with_capacity(links.len());
        for (idx, link) in links.iter().enumerate() {
            if link.tail >= nodes || link.head >= nodes {
                return Err(Error::InvalidNetwork(format!(
                    "link {} ({} -> {}) references a node outside 1..={nodes}",
                    idx + 1,
                    link.tail + 1,
                    link.head + 1
                )));
            }
            if !(link.capacity > 0.0) || !link.capacity.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "link {} has non-positive capacity {}",
                    idx + 1,
                    link.capacity
                )));
            }
            for (name, value) in [
                ("length", link.length),
                ("free-flow time", link.free_flow_time),
                ("b", link.bpr_b),
                ("power", link.bpr_power),
            ] {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(Error::InvalidNetwork(format!(
                        "link {} has invalid {name} {value}",
                        idx + 1
                    )));
                }
            }
            if !seen.insert((link.tail, link.head)) {
                warn!(
                    "link {} duplicates the node pair ({}, {})",
                    idx + 1,
                    link.tail + 1,
                    link.head + 1
                );
            }
        }

        let mut out_links = vec![Vec::new(); nodes];
        let mut in_links = vec![Vec::new(); nodes];
        for (idx, link) in links.iter().enumerate() {
            out_links[link.tail].push(idx);
            in_links[link.head].push(idx);
        }
        let mut network = Network {
            nodes,
            zones,
            first_thru_node,
            links,
            out_links,
            in_links,
            connector: Vec::new(),
        };
        network.connector = (0..network.links.len())
            .map(|a| network.blocks_through(network.links[a].tail))
            .collect();
        Ok(network)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn zone_count(&self) -> usize {
        self.zones
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// 1-based, as in the TNTP metadata.
    pub fn first_thru_node(&self) -> usize {
        self.first_thru_node
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, a: usize) -> &Link {
        &self.links[a]
    }

    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: usize) -> &[usize] {
        &self.in_links[node]
    }

    /// True for zone nodes that paths may not pass through.
    pub fn blocks_through(&self, node: usize) -> bool {
        node < self.zones && node + 1 < self.first_thru_node
    }

    pub fn is_centroid_connector(&self, a: usize) -> bool {
        self.connector[a]
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.length).collect()
    }

    /// Node pairs served by more than one link.
    pub fn duplicate_pairs(&self) -> Vec<(usize, usize)> {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for link in &self.links {
            *counts.entry((link.tail, link.head)).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|&(_, c)| c > 1)
            .map(|(pair, _)| pair)
            .collect()
    }
}

/// Fixed origin-destination demand between zones.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    zones: usize,
    trips: BTreeMap<(usize, usize), f64>,
    declared_total: Option<f64>,
}

impl DemandMatrix {
    pub fn new(zones: usize) -> Self {
        DemandMatrix {
            zones,
            trips: BTreeMap::new(),
            declared_total: None,
        }
    }

    pub fn from_entries(
        zones: usize,
        entries: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Result<Self> {
        let mut demand = DemandMatrix::new(zones);
        for ((o, d), v) in entries {
            demand.add(o, d, v)?;
        }
        Ok(demand)
    }

    /// Adds trips to an OD pair. Zero entries are dropped.
    pub fn add(&mut self, origin: usize, destination: usize, trips: f64) -> Result<()> {
        if origin >= self.zones || destination >= self.zones {
            return Err(Error::InvalidDemand(format!(
                "OD pair ({}, {}) outside zones 1..={}",
                origin + 1,
                destination + 1,
                self.zones
            )));
        }
        if !(trips >= 0.0) || !trips.is_finite() {
            return Err(Error::InvalidDemand(format!(
                "OD pair ({}, {}) has invalid demand {trips}",
                origin + 1,
                destination + 1
            )));
        }
        if trips > 0.0 {
            *self.trips.entry((origin, destination)).or_default() += trips;
        }
        Ok(())
    }

    pub fn set_declared_total(&mut self, total: f64) {
        self.declared_total = Some(total);
    }

    pub fn declared_total(&self) -> Option<f64> {
        self.declared_total
    }

    pub fn zone_count(&self) -> usize {
        self.zones
    }

    pub fn get(&self, origin: usize, destination: usize) -> f64 {
        self.trips.get(&(origin, destination)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.trips.values().sum()
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    /// Positive entries in (origin, destination) lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.trips.iter().map(|(&k, &v)| (k, v))
    }

    /// Network-loading demand grouped by origin, skipping intrazonal trips.
    pub fn by_origin(&self) -> Vec<(usize, Vec<(usize, f64)>)> {
        let mut grouped: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
        for (&(o, d), &v) in &self.trips {
            if o == d {
                continue;
            }
            match grouped.last_mut() {
                Some((origin, dests)) if *origin == o => dests.push((d, v)),
                _ => grouped.push((o, vec![(d, v)])),
            }
        }
        grouped
    }
}
