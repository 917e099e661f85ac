//! Convergence and solution-quality metrics.
//!
//! Quality is measured against a reference equilibrium solved to a much
//! tighter gap: relative errors in total travel time and distance, and the
//! proportion of links whose flow is off by more than a relative tolerance.

use serde::Serialize;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::solver::{Algorithm, Problem};

/// Gap levels at which metric snapshots are taken.
pub const GAP_LEVELS: [f64; 6] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

pub const DEFAULT_PUL_EPSILON: f64 = 0.01;

/// `(TSTT - SPTT) / SPTT` at flows `x`. Zero demand gives zero.
pub fn relative_gap(problem: &Problem, x: &[f64]) -> Result<f64> {
    let t = problem.model.link_times(x);
    let sptt = problem.shortest_path_travel_time(&t)?;
    Ok(crate::solver::relative_gap_from(tstt(x, &t), sptt))
}

/// Total system travel time `Σ x t`.
pub fn tstt(x: &[f64], t: &[f64]) -> f64 {
    x.iter().zip(t).map(|(x, t)| x * t).sum()
}

/// Vehicle miles traveled `Σ x ℓ`.
pub fn vmt(x: &[f64], lengths: &[f64]) -> f64 {
    x.iter().zip(lengths).map(|(x, l)| x * l).sum()
}

/// Signed relative errors `(ΔTSTT, ΔVMT)` of `x` against `x_ref`.
pub fn delta_metrics(x: &[f64], x_ref: &[f64], model: &CostModel, lengths: &[f64]) -> Result<(f64, f64)> {
    let reference_tstt = tstt(x_ref, &model.link_times(x_ref));
    let reference_vmt = vmt(x_ref, lengths);
    if reference_tstt == 0.0 || reference_vmt == 0.0 {
        return Err(Error::Config("reference solution has zero TSTT or VMT".into()));
    }
    let tstt_now = tstt(x, &model.link_times(x));
    Ok((
        (tstt_now - reference_tstt) / reference_tstt,
        (vmt(x, lengths) - reference_vmt) / reference_vmt,
    ))
}

/// Share of links outside `|x - x_ref| < ε x_ref`. Links with
/// `x_ref <= zero_tol` count as converged when `|x| <= zero_tol`.
pub fn pul(x: &[f64], x_ref: &[f64], epsilon: f64, zero_tol: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let unlike = x
        .iter()
        .zip(x_ref)
        .filter(|&(&x, &r)| {
            if r <= zero_tol {
                x.abs() > zero_tol
            } else {
                !((x - r).abs() < epsilon * r)
            }
        })
        .count();
    unlike as f64 / x.len() as f64
}

/// A converged solution that other runs are compared with.
#[derive(Debug, Clone)]
pub struct Reference {
    pub x: Vec<f64>,
    pub tstt: f64,
    pub vmt: f64,
    pub lengths: Vec<f64>,
    pub epsilon: f64,
    pub zero_tol: f64,
    /// Gap the reference run reached.
    pub gap: f64,
}

impl Reference {
    pub fn new(problem: &Problem, x: Vec<f64>, gap: f64) -> Result<Self> {
        let t = problem.model.link_times(&x);
        let lengths = problem.network.lengths();
        let tstt_ref = tstt(&x, &t);
        let vmt_ref = vmt(&x, &lengths);
        if tstt_ref == 0.0 || vmt_ref == 0.0 {
            return Err(Error::Config("reference solution has zero TSTT or VMT".into()));
        }
        let links = x.len().max(1) as f64;
        Ok(Reference {
            zero_tol: 1e-9 * problem.demand.total() / links,
            epsilon: DEFAULT_PUL_EPSILON,
            x,
            tstt: tstt_ref,
            vmt: vmt_ref,
            lengths,
            gap,
        })
    }

    /// Metrics of flows `x` with times `t`.
    pub fn compare(&self, x: &[f64], t: &[f64]) -> (f64, f64, f64) {
        let d_tstt = (tstt(x, t) - self.tstt) / self.tstt;
        let d_vmt = (vmt(x, &self.lengths) - self.vmt) / self.vmt;
        (d_tstt, d_vmt, pul(x, &self.x, self.epsilon, self.zero_tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub gap_level: f64,
    pub iteration: usize,
    pub delta_tstt: f64,
    pub delta_vmt: f64,
    pub pul: f64,
    pub epsilon: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub relative_gap: f64,
    pub objective: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLog {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<MetricReport>,
    pub converged: bool,
}

impl ConvergenceLog {
    pub fn new(algorithm: Algorithm) -> Self {
        ConvergenceLog {
            algorithm,
            records: Vec::new(),
            snapshots: Vec::new(),
            converged: false,
        }
    }

    /// Appends one iteration. With a reference, a snapshot is taken for
    /// every gap level crossed for the first time.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        iteration: usize,
        relative_gap: f64,
        objective: Option<f64>,
        wall_seconds: f64,
        x: &[f64],
        t: &[f64],
        reference: Option<&Reference>,
    ) {
        self.records.push(IterationRecord {
            iteration,
            relative_gap,
            objective,
            wall_seconds,
        });
        let Some(reference) = reference else {
            return;
        };
        let pending: Vec<f64> = GAP_LEVELS
            .iter()
            .copied()
            .filter(|&level| relative_gap <= level && !self.snapshots.iter().any(|s| s.gap_level == level))
            .collect();
        if pending.is_empty() {
            return;
        }
        let (delta_tstt, delta_vmt, pul) = reference.compare(x, t);
        for gap_level in pending {
            self.snapshots.push(MetricReport {
                gap_level,
                iteration,
                delta_tstt,
                delta_vmt,
                pul,
                epsilon: reference.epsilon,
                wall_seconds,
            });
        }
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.relative_gap)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.relative_gap).collect()
    }

    /// First iteration whose gap is at or below `level`.
    pub fn iteration_reaching(&self, level: f64) -> Option<usize> {
        self.records.iter().find(|r| r.relative_gap <= level).map(|r| r.iteration)
    }

    pub fn snapshot(&self, level: f64) -> Option<&MetricReport> {
        self.snapshots.iter().find(|s| s.gap_level == level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals() {
        assert_eq!(tstt(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(vmt(&[1.0, 2.0], &[0.5, 0.25]), 1.0);
    }

    #[test]
    fn pul_two_links() {
        assert_eq!(pul(&[10.05, 25.0], &[10.0, 20.0], 0.01, 1e-9), 0.5);
    }

    #[test]
    fn pul_counts_unlike_links() {
        let x_ref = [100.0, 100.0, 0.0, 0.0];
        let x = [100.5, 102.0, 1e-12, 1.0];
        // link 2 is off by 2%, link 4 carries flow the reference does not
        assert_eq!(pul(&x, &x_ref, 0.01, 1e-9), 0.5);
        assert_eq!(pul(&x_ref, &x_ref, 0.01, 1e-9), 0.0);
    }

    #[test]
    fn snapshots_for_every_level_crossed() {
        let mut log = ConvergenceLog::new(Algorithm::Msa);
        let reference = Reference {
            x: vec![1.0],
            tstt: 1.0,
            vmt: 1.0,
            lengths: vec![1.0],
            epsilon: 0.01,
            zero_tol: 0.0,
            gap: 0.0,
        };
        log.record(1, 0.5, None, 0.0, &[1.0], &[1.0], Some(&reference));
        assert!(log.snapshots.is_empty());
        log.record(2, 5e-5, None, 0.0, &[1.0], &[1.0], Some(&reference));
        assert_eq!(log.snapshots.len(), 2);
        log.record(3, 2e-5, None, 0.0, &[1.0], &[1.0], Some(&reference));
        assert_eq!(log.snapshots.len(), 2);
        assert_eq!(log.snapshot(1e-4).unwrap().iteration, 2);
        assert_eq!(log.iteration_reaching(1e-4), Some(2));
    }
}
