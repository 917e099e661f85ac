//! Batch experiments over generated interaction matrices.
//!
//! Four designs are supported:
//!
//! * `algorithms`: each algorithm on separable, symmetric and asymmetric
//!   instances.
//! * `degrees`: one weight matrix per degree of dependency `N`.
//! * `symmetry-sweep`: an asymmetric matrix blended toward its symmetric
//!   part for each `λ`.
//! * `metric-stabilization`: GP and Algorithm B on two-way interactions,
//!   with metric snapshots against a tightly converged reference.
//!
//! Results are written as CSV: a summary row per instance, a snapshot row
//! per gap level reached, and one convergence file per instance.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::fixtures::Fixture;
use crate::interactions::{generate_weights, interpolate_symmetry, two_way_weights, GenSpec, TWO_WAY_WEIGHT};
use crate::metrics::{ConvergenceLog, Reference};
use crate::solver::{solve, solve_tracked, Algorithm, SolverConfig};
use crate::spectral::condition_number;
use crate::weights::WeightMatrix;

pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Gap and iteration budget for reference solutions.
pub const REFERENCE_GAP: f64 = 1e-10;
pub const REFERENCE_MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    Algorithms,
    Degrees,
    SymmetrySweep,
    MetricStabilization,
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::Algorithms => "algorithms",
            Design::Degrees => "degrees",
            Design::SymmetrySweep => "symmetry-sweep",
            Design::MetricStabilization => "metric-stabilization",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Design::Algorithms,
            Design::Degrees,
            Design::SymmetrySweep,
            Design::MetricStabilization,
        ]
        .into_iter()
        .find(|d| d.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown experiment design {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Separable,
    Symmetric,
    Asymmetric,
}

impl InteractionKind {
    pub fn name(&self) -> &'static str {
        match self {
            InteractionKind::Separable => "separable",
            InteractionKind::Symmetric => "symmetric",
            InteractionKind::Asymmetric => "asymmetric",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub design: Design,
    /// Short name used in instance identifiers.
    pub network_name: String,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub degrees: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// Interaction kind for the `degrees` design.
    pub symmetric: bool,
    pub diagonal_min: f64,
    pub rg_target: f64,
    pub max_iterations: usize,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl ExperimentSpec {
    pub fn new(design: Design, network_name: impl Into<String>) -> Self {
        ExperimentSpec {
            design,
            network_name: network_name.into(),
            algorithms: vec![Algorithm::Msa, Algorithm::FrankWolfe, Algorithm::GradientProjection],
            seeds: vec![1],
            degrees: vec![2],
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            symmetric: true,
            diagonal_min: 0.55,
            rg_target: 1e-6,
            max_iterations: 1000,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("lambda {l} outside [0, 1]")));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is needed".into()));
        }
        if self.design != Design::MetricStabilization && self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is needed".into()));
        }
        if matches!(self.design, Design::Degrees | Design::SymmetrySweep) && self.degrees.is_empty() {
            return Err(Error::Config("at least one degree N is needed".into()));
        }
        if matches!(self.design, Design::SymmetrySweep) && self.lambdas.is_empty() {
            return Err(Error::Config("at least one lambda is needed".into()));
        }
        SolverConfig::default()
            .with_target(self.rg_target, self.max_iterations)
            .validate()
    }
}

/// One solve in an experiment.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub algorithm: Algorithm,
    pub kind: InteractionKind,
    pub degrees: usize,
    pub lambda: f64,
    pub seed: u64,
    pub weights: WeightMatrix,
}

fn instance_id(network: &str, algorithm: Algorithm, kind: InteractionKind, degrees: usize, lambda: f64, seed: u64) -> String {
    format!("{network}-{algorithm}-{}-N{degrees}-l{lambda:.2}-s{seed}", kind.name())
}

fn weights_for(base: &Fixture, spec: &ExperimentSpec, degrees: usize, symmetric: bool, seed: u64) -> Result<WeightMatrix> {
    let gen = GenSpec {
        degrees,
        symmetric,
        diagonal_min: spec.diagonal_min,
        seed,
    };
    generate_weights(&base.network, &gen)
}

/// Expands the design into instances, in a fixed order.
pub fn plan(spec: &ExperimentSpec, base: &Fixture) -> Result<Vec<Instance>> {
    spec.validate()?;
    let net = spec.network_name.as_str();
    let mut out = Vec::new();
    let mut push = |algorithm, kind, degrees, lambda, seed, weights| {
        out.push(Instance {
            id: instance_id(net, algorithm, kind, degrees, lambda, seed),
            algorithm,
            kind,
            degrees,
            lambda,
            seed,
            weights,
        });
    };
    let n_links = base.network.link_count();
    for &seed in &spec.seeds {
        match spec.design {
            Design::Algorithms => {
                let n = spec.degrees.first().copied().unwrap_or(2);
                let sym = weights_for(base, spec, n, true, seed)?;
                let asym = weights_for(base, spec, n, false, seed)?;
                for &alg in &spec.algorithms {
                    push(alg, InteractionKind::Separable, 0, 1.0, seed, WeightMatrix::identity(n_links));
                    push(alg, InteractionKind::Symmetric, n, 1.0, seed, sym.clone());
                    push(alg, InteractionKind::Asymmetric, n, 1.0, seed, asym.clone());
                }
            }
            Design::Degrees => {
                for &alg in &spec.algorithms {
                    for &n in &spec.degrees {
                        let kind = match (n, spec.symmetric) {
                            (0, _) => InteractionKind::Separable,
                            (_, true) => InteractionKind::Symmetric,
                            (_, false) => InteractionKind::Asymmetric,
                        };
                        push(alg, kind, n, 1.0, seed, weights_for(base, spec, n, spec.symmetric, seed)?);
                    }
                }
            }
            Design::SymmetrySweep => {
                let n = spec.degrees[0];
                let asym = weights_for(base, spec, n, false, seed)?;
                for &alg in &spec.algorithms {
                    for &lambda in &spec.lambdas {
                        let w = interpolate_symmetry(&asym, lambda)?;
                        let kind = if w.is_symmetric() {
                            InteractionKind::Symmetric
                        } else {
                            InteractionKind::Asymmetric
                        };
                        push(alg, kind, n, lambda, seed, w);
                    }
                }
            }
            Design::MetricStabilization => {
                let w = two_way_weights(&base.network, TWO_WAY_WEIGHT)?;
                let kind = if w.is_identity() {
                    InteractionKind::Separable
                } else {
                    InteractionKind::Symmetric
                };
                for alg in [Algorithm::GradientProjection, Algorithm::AlgorithmB] {
                    push(alg, kind, 1, 1.0, seed, w.clone());
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct InstanceResult {
    pub instance: Instance,
    pub condition_number: f64,
    pub log: Option<ConvergenceLog>,
    pub objective: Option<f64>,
    pub reference_gap: Option<f64>,
    pub error: Option<String>,
}

/// Solves `base` with the instance's weights, optionally recording metric
/// snapshots against a freshly computed reference.
pub fn run_instance(spec: &ExperimentSpec, base: &Fixture, instance: &Instance, with_reference: bool) -> InstanceResult {
    let cond = condition_number(instance.weights.matrix()).value;
    let mut result = InstanceResult {
        instance: instance.clone(),
        condition_number: cond,
        log: None,
        objective: None,
        reference_gap: None,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let model = CostModel::bpr(&base.network, instance.weights.clone())?;
        let fixture = base.with_model(model);
        let problem = fixture.problem();
        let reference = if with_reference {
            let config = SolverConfig {
                record_objective: false,
                ..SolverConfig::new(Algorithm::GradientProjection).with_target(REFERENCE_GAP, REFERENCE_MAX_ITERATIONS)
            };
            let (state, log) = solve(&problem, &config)?;
            result.reference_gap = Some(log.final_gap());
            Some(Reference::new(&problem, state.x, log.final_gap())?)
        } else {
            None
        };
        let config = SolverConfig::new(instance.algorithm).with_target(spec.rg_target, spec.max_iterations);
        let (state, log) = solve_tracked(&problem, &config, reference.as_ref())?;
        result.objective = fixture.model.objective(&state.x);
        result.log = Some(log);
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("instance {} failed: {e}", instance.id);
        result.error = Some(e.to_string());
    }
    result
}

/// Plans and runs every instance, in parallel over `spec.threads` workers.
/// Failed instances are reported in their result and do not stop the run.
pub fn run(spec: &ExperimentSpec, base: &Fixture) -> Result<Vec<InstanceResult>> {
    let instances = plan(spec, base)?;
    let with_reference = spec.design == Design::MetricStabilization;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(|| {
        instances
            .par_iter()
            .map(|inst| run_instance(spec, base, inst, with_reference))
            .collect()
    }))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub instance_id: String,
    pub algorithm: String,
    pub model_kind: String,
    #[serde(rename = "N")]
    pub degrees: usize,
    pub lambda: f64,
    pub seed: u64,
    pub condition_number: Option<f64>,
    pub iterations: Option<usize>,
    pub final_gap: Option<f64>,
    pub converged: bool,
    pub objective: Option<f64>,
    pub reference_gap: Option<f64>,
    pub wall_seconds: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SnapshotRow {
    pub instance_id: String,
    pub algorithm: String,
    pub model_kind: String,
    #[serde(rename = "N")]
    pub degrees: usize,
    pub lambda: f64,
    pub gap_level: f64,
    pub iteration: usize,
    pub delta_tstt: f64,
    pub delta_vmt: f64,
    pub pul: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub relative_gap: f64,
    pub objective: Option<f64>,
    pub wall_seconds: f64,
}

pub fn summary_rows(results: &[InstanceResult]) -> Vec<SummaryRow> {
    results
        .iter()
        .map(|r| {
            let inst = &r.instance;
            SummaryRow {
                instance_id: inst.id.clone(),
                algorithm: inst.algorithm.to_string(),
                model_kind: inst.kind.name().into(),
                degrees: inst.degrees,
                lambda: inst.lambda,
                seed: inst.seed,
                condition_number: finite(r.condition_number),
                iterations: r.log.as_ref().map(|l| l.iterations()),
                final_gap: r.log.as_ref().and_then(|l| finite(l.final_gap())),
                converged: r.log.as_ref().is_some_and(|l| l.converged),
                objective: r.objective.and_then(finite),
                reference_gap: r.reference_gap.and_then(finite),
                wall_seconds: r.log.as_ref().and_then(|l| l.records.last()).map(|rec| rec.wall_seconds),
                error: r.error.clone(),
            }
        })
        .collect()
}

/// Snapshot rows with absolute deltas, as in the appendix tables; signed
/// values are in the convergence logs' references.
pub fn snapshot_rows(results: &[InstanceResult], signed: bool) -> Vec<SnapshotRow> {
    let mut rows = Vec::new();
    for r in results {
        let Some(log) = &r.log else { continue };
        for s in &log.snapshots {
            let (dt, dv) = if signed {
                (s.delta_tstt, s.delta_vmt)
            } else {
                (s.delta_tstt.abs(), s.delta_vmt.abs())
            };
            if !(dt.is_finite() && dv.is_finite() && s.pul.is_finite()) {
                continue;
            }
            rows.push(SnapshotRow {
                instance_id: r.instance.id.clone(),
                algorithm: r.instance.algorithm.to_string(),
                model_kind: r.instance.kind.name().into(),
                degrees: r.instance.degrees,
                lambda: r.instance.lambda,
                gap_level: s.gap_level,
                iteration: s.iteration,
                delta_tstt: dt,
                delta_vmt: dv,
                pul: s.pul,
                wall_seconds: s.wall_seconds,
            });
        }
    }
    rows
}

pub fn convergence_rows(log: &ConvergenceLog) -> Vec<ConvergenceRow> {
    log.records
        .iter()
        .filter(|r| r.relative_gap.is_finite())
        .map(|r| ConvergenceRow {
            iteration: r.iteration,
            relative_gap: r.relative_gap,
            objective: r.objective.and_then(finite),
            wall_seconds: r.wall_seconds,
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Writes `contents` through a temporary file so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `summary.csv`, `snapshots.csv`, `snapshots_signed.csv` and
/// `convergence/<instance>.csv` under `dir`.
pub fn write_results(dir: &Path, results: &[InstanceResult]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("convergence"))?;
    let mut written = Vec::new();
    let mut emit = |name: PathBuf, contents: String| -> Result<()> {
        write_atomic(&name, &contents)?;
        written.push(name);
        Ok(())
    };
    emit(dir.join("summary.csv"), to_csv(&summary_rows(results))?)?;
    emit(dir.join("snapshots.csv"), to_csv(&snapshot_rows(results, false))?)?;
    emit(dir.join("snapshots_signed.csv"), to_csv(&snapshot_rows(results, true))?)?;
    for r in results {
        if let Some(log) = &r.log {
            let path = dir.join("convergence").join(format!("{}.csv", r.instance.id));
            emit(path, to_csv(&convergence_rows(log))?)?;
        }
    }
    Ok(written)
}

/// Spearman rank correlation, with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_demand, toy_network};

    fn toy_base() -> Fixture {
        let network = toy_network();
        let model = CostModel::separable_bpr(&network);
        Fixture {
            network,
            demand: toy_demand(),
            model,
        }
    }

    #[test]
    fn symmetry_sweep_has_six_lambdas() {
        let mut spec = ExperimentSpec::new(Design::SymmetrySweep, "toy");
        spec.algorithms = vec![Algorithm::GradientProjection];
        spec.degrees = vec![1];
        let plan = plan(&spec, &toy_base()).unwrap();
        let lambdas: Vec<f64> = plan.iter().map(|i| i.lambda).collect();
        assert_eq!(lambdas, DEFAULT_LAMBDAS.to_vec());
    }

    #[test]
    fn degrees_plan() {
        let mut spec = ExperimentSpec::new(Design::Degrees, "toy");
        spec.algorithms = vec![Algorithm::GradientProjection];
        spec.degrees = vec![0, 1, 2];
        let plan = plan(&spec, &toy_base()).unwrap();
        assert_eq!(plan.len(), 3);
        assert!(plan[0].weights.is_identity());
        assert_eq!(plan[0].kind, InteractionKind::Separable);
    }

    #[test]
    fn rejects_bad_lambda() {
        let mut spec = ExperimentSpec::new(Design::SymmetrySweep, "toy");
        spec.lambdas = vec![1.5];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
