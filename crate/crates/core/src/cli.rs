//! Command-line front end. Each command returns a process exit code:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | I/O error                                 |
//! | 2    | instance failed validation                |
//! | 3    | iteration cap hit before a local optimum  |
//! | 4    | bench ratio above the bound               |
//! | 5    | claimed cost does not match recomputation |
//! | 6    | infeasible assignment                     |
//! | 7    | solution is not locally optimal           |
//! | 8    | malformed instance or solution file       |
//! | 9    | solver or generator error                 |
//! | 64   | bad command-line usage                    |

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_bench, run_bench_with, BenchConfig, RatioReport};
use crate::flow::{assign, build_penalty_network, Assignment};
use crate::instance::{generate_euclidean, CapacityMode, CapacityProfile, GeneratorParams, Instance};
use crate::oracle::{exact_optimum_with, solution_for, verify_local_optimality, DEFAULT_ENUMERATION_CAP};
use crate::par::Execution;
use crate::search::{scaled_search, SearchError, SearchParams, Solution, SolutionFile, Variant};
use crate::MICROS;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_ITERATION_CAP: u8 = 3;
pub const EXIT_BOUND_EXCEEDED: u8 = 4;
pub const EXIT_COST_MISMATCH: u8 = 5;
pub const EXIT_INFEASIBLE: u8 = 6;
pub const EXIT_NOT_LOCAL_OPT: u8 = 7;
pub const EXIT_PARSE: u8 = 8;
pub const EXIT_SOLVER: u8 = 9;
pub const EXIT_USAGE: u8 = 64;

/// Local search for capacitated facility location with per-unit penalties.
#[derive(Debug, Parser)]
#[command(name = "capflp", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance file by local search
    Solve(SolveArgs),
    /// Generate a random Euclidean instance
    Gen(GenArgs),
    /// Exact optimum by enumerating every open set
    Oracle(OracleArgs),
    /// Compare the solver against the exact optimum on generated instances
    Bench(BenchArgs),
    /// Check a solution file against an instance
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SearchFlags {
    /// Neighbourhood: uniform (add/delete/swap) or nonuniform
    /// (add/delete/open/close). Defaults to the instance's capacity mode.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Comma-separated facility-cost scaling factors; defaults to the
    /// variant's grid.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Accept the first improving move instead of the best
    #[arg(long)]
    pub first_improvement: bool,
    /// Evaluate candidate moves on one thread
    #[arg(long)]
    pub sequential: bool,
}

impl SearchFlags {
    fn params(&self) -> SearchParams {
        SearchParams {
            epsilon: self.epsilon,
            max_iterations: self.max_iters,
            first_improvement: self.first_improvement,
            execution: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
            ..SearchParams::default()
        }
    }

    fn grid(&self, variant: Variant) -> Vec<f64> {
        self.lambda_grid
            .clone()
            .unwrap_or_else(|| variant.default_lambda_grid())
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub search: SearchFlags,
    /// Write the solution JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also dump the assignment flow network of the final open set in
    /// DIMACS min-cost-flow format
    #[arg(long)]
    pub dimacs: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct GenFlags {
    /// Grid side length
    #[arg(long, default_value_t = 100)]
    pub grid: i64,
    #[arg(long, default_value_t = 8)]
    pub demand_max: i64,
    /// Maximum per-unit penalty, in whole money units
    #[arg(long, default_value_t = 100)]
    pub penalty_max: i64,
    /// Maximum opening and service cost, in whole money units
    #[arg(long, default_value_t = 100)]
    pub cost_max: i64,
    /// Common capacity (uniform instances)
    #[arg(long, conflicts_with = "capacity_range")]
    pub capacity: Option<i64>,
    /// Capacity range LO,HI (non-uniform instances)
    #[arg(long, value_parser = parse_range)]
    pub capacity_range: Option<(i64, i64)>,
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let num = |t: &str| t.trim().parse::<i64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

impl GenFlags {
    fn params(&self, n_facilities: usize, n_clients: usize, default_uniform: bool) -> GeneratorParams {
        let capacity = match (&self.capacity, &self.capacity_range) {
            (Some(u), _) => CapacityProfile::Uniform { capacity: *u },
            (None, Some((lo, hi))) => CapacityProfile::Random { lo: *lo, hi: *hi },
            (None, None) if default_uniform => CapacityProfile::Uniform { capacity: 10 },
            (None, None) => CapacityProfile::Random { lo: 2, hi: 20 },
        };
        GeneratorParams {
            n_facilities,
            n_clients,
            grid: self.grid,
            demand_max: self.demand_max,
            penalty_max: self.penalty_max.saturating_mul(MICROS),
            cost_max: self.cost_max.saturating_mul(MICROS),
            capacity,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 5)]
    pub facilities: usize,
    #[arg(long, default_value_t = 6)]
    pub clients: usize,
    #[command(flatten)]
    pub gen: GenFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub instance: PathBuf,
    /// Largest facility count to enumerate
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 3)]
    pub min_facilities: usize,
    #[arg(long, default_value_t = 6)]
    pub max_facilities: usize,
    #[arg(long, default_value_t = 4)]
    pub min_clients: usize,
    #[arg(long, default_value_t = 8)]
    pub max_clients: usize,
    #[command(flatten)]
    pub gen: GenFlags,
    #[command(flatten)]
    pub search: SearchFlags,
    /// First seed; instances use consecutive seeds from here
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ratio gate; defaults to 6+ε / 9+ε for a λ grid of {1}, and
    /// 5.83+ε / 8.532+ε otherwise
    #[arg(long)]
    pub bound: Option<f64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the report as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub solution: PathBuf,
    /// Defaults to the variant recorded in the solution
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Defaults to the epsilon recorded in the solution
    #[arg(long)]
    pub epsilon: Option<f64>,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| fail(EXIT_IO, format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Reads, parses and validates an instance file.
pub fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let inst = Instance::from_json(&read(path)?).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    let report = inst.validate();
    if !report.ok {
        let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(fail(
            EXIT_INVALID,
            format!("{}: invalid instance\n  {}", path.display(), lines.join("\n  ")),
        ));
    }
    Ok(inst)
}

fn default_variant(inst: &Instance) -> Variant {
    match inst.capacity_mode {
        CapacityMode::Uniform => Variant::Uniform,
        CapacityMode::Nonuniform => Variant::Nonuniform,
    }
}

fn search_failure(e: SearchError) -> Failure {
    let code = match e {
        SearchError::BadEpsilon(_) | SearchError::BadLambda(_) | SearchError::EmptyGrid => EXIT_USAGE,
        _ => EXIT_SOLVER,
    };
    fail(code, e.to_string())
}

pub fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let inst = load_instance(&args.instance)?;
    let variant = args.search.variant.unwrap_or_else(|| default_variant(&inst));
    let sol =
        scaled_search(&inst, &args.search.params(), &args.search.grid(variant), variant).map_err(search_failure)?;
    write_or_print(args.out.as_deref(), &sol.to_json())?;
    if let Some(path) = &args.dimacs {
        let pn = build_penalty_network(&inst, &sol.open_set).map_err(|e| fail(EXIT_SOLVER, e.to_string()))?;
        write_or_print(Some(path), pn.network.to_dimacs().trim_end())?;
    }
    if sol.local_opt {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "iteration cap reached after {} moves; solution is not locally optimal",
            sol.iterations
        );
        Ok(EXIT_ITERATION_CAP)
    }
}

pub fn cmd_gen(args: &GenArgs) -> CmdResult {
    let params = args.gen.params(args.facilities, args.clients, true);
    let inst = generate_euclidean(&params, args.seed).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    write_or_print(args.out.as_deref(), &inst.to_json())?;
    Ok(EXIT_OK)
}

pub fn cmd_oracle(args: &OracleArgs) -> CmdResult {
    let inst = load_instance(&args.instance)?;
    let r = exact_optimum_with(&inst, args.cap, Execution::Parallel).map_err(|e| fail(EXIT_SOLVER, e.to_string()))?;
    let text = serde_json::to_string_pretty(&r).expect("oracle result serializes");
    write_or_print(args.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

pub fn bench_config(args: &BenchArgs) -> BenchConfig {
    let variant = args.search.variant.unwrap_or(Variant::Uniform);
    let grid = args.search.lambda_grid.clone().unwrap_or_else(|| vec![1.0]);
    let epsilon = args.search.epsilon;
    let unscaled = grid.iter().all(|&l| l == 1.0);
    let bound = args.bound.unwrap_or(if unscaled {
        variant.unscaled_bound() + epsilon
    } else {
        variant.scaled_bound() + epsilon
    });
    BenchConfig {
        count: args.count,
        generator: args
            .gen
            .params(args.min_facilities, args.min_clients, variant == Variant::Uniform),
        facilities: (args.min_facilities, args.max_facilities),
        clients: (args.min_clients, args.max_clients),
        variant,
        params: args.search.params(),
        lambda_grid: grid,
        first_seed: args.seed,
        bound,
    }
}

/// Writes the report and maps it to an exit code.
pub fn finish_bench(args: &BenchArgs, report: &RatioReport) -> CmdResult {
    write_or_print(args.out.as_deref(), &report.to_json())?;
    if let Some(csv) = &args.csv {
        fs::write(csv, report.to_csv()).map_err(|e| fail(EXIT_IO, format!("{}: {e}", csv.display())))?;
    }
    eprintln!(
        "{} instances, max ratio {:.6}, mean ratio {:.6}, bound {:.6}",
        report.aggregate.count, report.aggregate.max_ratio, report.aggregate.mean_ratio, report.bound
    );
    match report.worst_seed {
        None => Ok(EXIT_OK),
        Some(seed) => {
            eprintln!("seed {seed} exceeds the ratio bound");
            Ok(EXIT_BOUND_EXCEEDED)
        }
    }
}

pub fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let cfg = bench_config(args);
    let report = run_bench(&cfg).map_err(|e| fail(EXIT_SOLVER, e.to_string()))?;
    finish_bench(args, &report)
}

/// Bench with a caller-supplied solver in place of the local search.
pub fn cmd_bench_with<F>(args: &BenchArgs, solver: F) -> CmdResult
where
    F: Fn(&Instance) -> Result<Solution, SearchError> + Sync + Send,
{
    let cfg = bench_config(args);
    let report = run_bench_with(&cfg, solver).map_err(|e| fail(EXIT_SOLVER, e.to_string()))?;
    finish_bench(args, &report)
}

pub fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let inst = load_instance(&args.instance)?;
    let file: SolutionFile = serde_json::from_str(&read(&args.solution)?)
        .map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", args.solution.display())))?;
    let variant = args.variant.unwrap_or(file.variant);
    let epsilon = args.epsilon.unwrap_or(file.epsilon);

    let claimed = Assignment::from_parts(
        &inst,
        file.open_set.clone(),
        file.assignment.clone(),
        file.penalized.clone(),
    );
    claimed
        .check(&inst)
        .map_err(|e| fail(EXIT_INFEASIBLE, format!("infeasible assignment: {e}")))?;

    let c = &file.cost;
    let recomputed = (claimed.cost_facility, claimed.cost_service, claimed.cost_penalty);
    if (c.facility, c.service, c.penalty) != recomputed || c.total != claimed.total() {
        return Err(fail(
            EXIT_COST_MISMATCH,
            format!(
                "claimed cost (f={}, s={}, p={}, total={}) != recomputed (f={}, s={}, p={}, total={})",
                c.facility,
                c.service,
                c.penalty,
                c.total,
                recomputed.0,
                recomputed.1,
                recomputed.2,
                claimed.total()
            ),
        ));
    }
    let optimal = assign(&inst, &file.open_set).map_err(|e| fail(EXIT_INFEASIBLE, e.to_string()))?;
    if optimal.total() != claimed.total() {
        return Err(fail(
            EXIT_COST_MISMATCH,
            format!(
                "assignment costs {} but the optimal assignment for this open set costs {}",
                claimed.total(),
                optimal.total()
            ),
        ));
    }

    let sol = solution_for(&inst, file.open_set, variant, epsilon, file.lambda.max(1.0))
        .map_err(|e| fail(EXIT_SOLVER, e.to_string()))?;
    let params = SearchParams {
        epsilon,
        ..SearchParams::default()
    };
    let report = verify_local_optimality(&inst, &sol, variant, &params).map_err(search_failure)?;
    if let Some(mv) = report.violating_move {
        return Err(fail(
            EXIT_NOT_LOCAL_OPT,
            format!(
                "not locally optimal: {:?} improves the scaled cost by at least {}",
                mv.kind, report.threshold
            ),
        ));
    }
    eprintln!("ok: feasible, cost {} confirmed, locally optimal", claimed.total());
    Ok(EXIT_OK)
}

/// Dispatches a parsed command line, printing failures to stderr.
pub fn run(cli: &Cli) -> u8 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
