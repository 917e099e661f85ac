use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stap::experiment::{self, convergence_rows, to_csv, write_atomic, Design, ExperimentSpec};
use stap::fixtures::{self, Coefficients, Fixture, ToyScenario};
use stap::interactions::{generate_weights, two_way_weights, GenSpec};
use stap::merge::{merge_grid, MergeNode};
use stap::spectral::{condition_number, eigenvalue_modulus_ratio, SpectralConvention};
use stap::tntp::{parse_network, parse_trips};
use stap::weights::{read_weights, write_weights, WeightMatrix};
use stap::{Algorithm, CostModel, SolverConfig};

const EXIT_UNCONVERGED: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "stap", version, about = "Static traffic assignment with link interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write flows, convergence and summary files.
    Solve(SolveArgs),
    /// Generate a seeded interaction weight file.
    Genweights(GenweightsArgs),
    /// Run an experiment design and write CSV reports.
    Experiment(ExperimentArgs),
    /// Tabulate merge delays and check the Jacobian is positive semidefinite.
    MergeDemo(MergeArgs),
    /// Print the condition number of a weight matrix.
    Condnum(CondnumArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    Toy,
    SiouxFalls,
}

#[derive(Args)]
struct Instance {
    /// Network file (TNTP).
    #[arg(long, requires = "trips", conflicts_with = "fixture")]
    net: Option<PathBuf>,
    /// Trip table (TNTP).
    #[arg(long, requires = "net")]
    trips: Option<PathBuf>,
    /// Bundled instance instead of --net/--trips.
    #[arg(long, value_enum)]
    fixture: Option<FixtureName>,
}

impl Instance {
    /// The instance with separable costs, and a short name for it.
    fn load(&self) -> Result<(Fixture, String)> {
        match (&self.net, &self.trips, self.fixture) {
            (Some(net), Some(trips), None) => {
                let network = parse_network(&read(net)?).with_context(|| format!("parsing {}", net.display()))?;
                let demand = parse_trips(&read(trips)?).with_context(|| format!("parsing {}", trips.display()))?;
                let model = CostModel::separable_bpr(&network);
                let name = net
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .map(|s| s.trim_end_matches("_net").to_string())
                    .unwrap_or_else(|| "net".into());
                Ok((Fixture { network, demand, model }, name))
            }
            (None, None, Some(FixtureName::Toy)) => {
                let f = fixtures::toy(ToyScenario::Separable);
                let model = CostModel::separable_bpr(&f.network);
                Ok((f.with_model(model), "toy".into()))
            }
            (None, None, Some(FixtureName::SiouxFalls)) => Ok((fixtures::sioux_falls(), "SiouxFalls".into())),
            _ => bail!("give either --net and --trips, or --fixture"),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, default_value = "gp")]
    algorithm: Algorithm,
    /// Interaction weights; separable costs when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Relative gap target.
    #[arg(long, default_value_t = 1e-6)]
    rg: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Multiplier on Newton flow shifts (GP and Algorithm B).
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    /// Inner passes per main iteration (Algorithm B).
    #[arg(long, default_value_t = 20)]
    inner: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenweightsArgs {
    #[arg(long)]
    net: PathBuf,
    /// Degrees of dependency.
    #[arg(long = "N", default_value_t = 2)]
    degrees: usize,
    #[arg(long, conflicts_with = "asymmetric")]
    symmetric: bool,
    #[arg(long)]
    asymmetric: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.55)]
    diagonal_min: f64,
    /// Couple each link only with its reverse, with this weight.
    #[arg(long, conflicts_with_all = ["symmetric", "asymmetric"])]
    two_way: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    design: Design,
    #[command(flatten)]
    instance: Instance,
    #[arg(long, value_delimiter = ',', default_value = "msa,fw,gp")]
    algorithms: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    degrees: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    lambdas: Vec<f64>,
    /// Asymmetric weights in the degrees design.
    #[arg(long)]
    asymmetric: bool,
    #[arg(long, default_value_t = 0.55)]
    diagonal_min: f64,
    #[arg(long, default_value_t = 1e-6)]
    rg: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "STAP_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MergeArgs {
    /// Free-flow times of the two approaches.
    #[arg(long, value_delimiter = ',', required = true)]
    t0: Vec<f64>,
    /// Downstream saturation flow.
    #[arg(long)]
    u3: f64,
    #[arg(long, default_value_t = 11)]
    grid: usize,
    /// Upper end of both inflow axes; twice `u3` by default.
    #[arg(long)]
    max_inflow: Option<f64>,
    /// CSV of the grid.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CondnumArgs {
    #[arg(long, conflicts_with = "toy", required_unless_present = "toy")]
    weights: Option<PathBuf>,
    #[arg(long)]
    toy: Option<ToyScenario>,
    /// Toy coefficients as exact fractions rather than as printed.
    #[arg(long, requires = "toy")]
    exact: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_weight_file(path: &Path) -> Result<WeightMatrix> {
    read_weights(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn solve(args: &SolveArgs) -> Result<bool> {
    let (base, _) = args.instance.load()?;
    let fixture = match &args.weights {
        Some(path) => base.with_model(CostModel::bpr(&base.network, read_weight_file(path)?)?),
        None => base,
    };
    let config = SolverConfig {
        newton_damping: args.damping,
        inner_iterations_per_main: args.inner,
        ..SolverConfig::new(args.algorithm).with_target(args.rg, args.max_iters)
    };
    let problem = stap::solver::Problem::new(&fixture.network, &fixture.demand, &fixture.model)?;
    let (state, log) = stap::solve(&problem, &config)?;

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut flows = String::new();
    for (a, (x, t)) in state.x.iter().zip(&state.t).enumerate() {
        writeln!(flows, "{} {} {}", a + 1, x, t)?;
    }
    write_atomic(&args.out.join("flows.txt"), &flows)?;
    write_atomic(&args.out.join("convergence.csv"), &to_csv(&convergence_rows(&log))?)?;

    let first = log.records.first().map_or(f64::NAN, |r| r.relative_gap);
    let mut summary = String::new();
    writeln!(summary, "algorithm {}", args.algorithm)?;
    writeln!(summary, "first_gap {first:.4}")?;
    writeln!(summary, "final_gap {:e}", log.final_gap())?;
    writeln!(summary, "iterations {}", log.iterations())?;
    writeln!(summary, "converged {}", log.converged)?;
    match fixture.model.objective(&state.x) {
        Some(z) => writeln!(summary, "objective {z}")?,
        None => writeln!(summary, "objective undefined")?,
    }
    write_atomic(&args.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(log.converged)
}

fn genweights(args: &GenweightsArgs) -> Result<()> {
    let network = parse_network(&read(&args.net)?).with_context(|| format!("parsing {}", args.net.display()))?;
    let weights = match args.two_way {
        Some(w) => two_way_weights(&network, w)?,
        None => {
            let spec = GenSpec {
                degrees: args.degrees,
                symmetric: !args.asymmetric,
                diagonal_min: args.diagonal_min,
                seed: args.seed,
            };
            generate_weights(&network, &spec)?
        }
    };
    write_atomic(&args.out, &write_weights(&weights))?;
    let c = condition_number(weights.matrix());
    println!(
        "{} links, {} nonzeros, symmetric {}, condition number {}",
        weights.dim(),
        weights.nnz(),
        weights.is_symmetric(),
        c.value
    );
    Ok(())
}

fn run_experiment(args: &ExperimentArgs) -> Result<bool> {
    let (base, name) = args.instance.load()?;
    let spec = ExperimentSpec {
        algorithms: args.algorithms.clone(),
        seeds: args.seeds.clone(),
        degrees: args.degrees.clone(),
        lambdas: args.lambdas.clone(),
        symmetric: !args.asymmetric,
        diagonal_min: args.diagonal_min,
        rg_target: args.rg,
        max_iterations: args.max_iters,
        threads: args.threads,
        ..ExperimentSpec::new(args.design, name)
    };
    spec.validate()?;
    let results = experiment::run(&spec, &base)?;
    experiment::write_results(&args.out, &results)?;
    let mut all_converged = true;
    for r in &results {
        match (&r.log, &r.error) {
            (_, Some(e)) => {
                all_converged = false;
                println!("{}: failed: {e}", r.instance.id);
            }
            (Some(log), None) => {
                all_converged &= log.converged;
                println!(
                    "{}: {} iterations, gap {:e}, cond {:.4}",
                    r.instance.id,
                    log.iterations(),
                    log.final_gap(),
                    r.condition_number
                );
            }
            (None, None) => unreachable!("a result has a log or an error"),
        }
    }
    println!("{} instances written to {}", results.len(), args.out.display());
    Ok(all_converged)
}

fn merge_demo(args: &MergeArgs) -> Result<bool> {
    if !(args.u3 > 0.0) {
        bail!("--u3 must be positive");
    }
    if args.t0.len() != 2 {
        bail!("--t0 takes two free-flow times, as a,b");
    }
    if args.grid == 0 {
        bail!("--grid must be at least 1");
    }
    let node = MergeNode::new(args.t0[0], args.t0[1], args.u3);
    let points = merge_grid(&node, args.grid, args.max_inflow.unwrap_or(2.0 * args.u3));
    let worst = points.iter().map(|p| p.min_eigenvalue).fold(f64::INFINITY, f64::min);
    if let Some(out) = &args.out {
        let mut csv = String::from("x1,x2,t1,t2,j11,j12,j21,j22,min_eigenvalue\n");
        for p in &points {
            let [[a, b], [c, d]] = p.jacobian;
            writeln!(csv, "{},{},{},{},{a},{b},{c},{d},{}", p.x1, p.x2, p.t1, p.t2, p.min_eigenvalue)?;
        }
        write_atomic(out, &csv)?;
    }
    let psd = worst >= -1e-12;
    println!("{} grid points, min eigenvalue {worst}, PSD {}", points.len(), if psd { "yes" } else { "no" });
    Ok(psd)
}

fn condnum(args: &CondnumArgs) -> Result<()> {
    let matrix = match (&args.weights, args.toy) {
        (Some(path), _) => read_weight_file(path)?.into_matrix(),
        (None, Some(scenario)) => {
            let coefficients = if args.exact {
                Coefficients::Exact
            } else {
                Coefficients::Printed
            };
            stap::SparseMatrix::from_dense(&fixtures::toy_coefficients(scenario, coefficients))?
        }
        (None, None) => bail!("give --weights or --toy"),
    };
    let c = condition_number(&matrix);
    let convention = match c.convention {
        SpectralConvention::Eigenvalue => "eigenvalue",
        SpectralConvention::SingularValue => "singular-value",
    };
    println!("condition_number {} ({convention} ratio {} / {})", c.value, c.largest, c.smallest);
    if let Some(r) = eigenvalue_modulus_ratio(&matrix) {
        println!("eigenvalue_modulus_ratio {r}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Genweights(a) => genweights(a).map(|_| true),
        Command::Experiment(a) => run_experiment(a),
        Command::MergeDemo(a) => merge_demo(a),
        Command::Condnum(a) => condnum(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_UNCONVERGED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
