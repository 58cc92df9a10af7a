//! Solver-versus-oracle ratio harness.
//!
//! Generates instances from consecutive seeds, solves each with the given
//! solver, compares against [`exact_optimum`] and records the ratio. Rows
//! are always ordered by seed, whatever order the workers finish in.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{generate_euclidean, GenerateError, GeneratorParams, Instance};
use crate::oracle::{exact_optimum_with, OracleError, DEFAULT_ENUMERATION_CAP};
use crate::par::{self, Execution};
use crate::search::{iteration_bound, scaled_search, SearchError, SearchParams, Solution, Variant};
use crate::Money;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub count: usize,
    /// Template for every instance; the counts are replaced per seed.
    pub generator: GeneratorParams,
    pub facilities: (usize, usize),
    pub clients: (usize, usize),
    pub variant: Variant,
    pub params: SearchParams,
    pub lambda_grid: Vec<f64>,
    pub first_seed: u64,
    /// A run passes when every ratio is at most this.
    pub bound: f64,
}

impl BenchConfig {
    /// Harness defaults: 3-6 facilities, 4-8 clients, demands up to 8,
    /// λ = 1 and the unscaled `(bound + ε)` gate.
    pub fn new(variant: Variant, count: usize) -> Self {
        let params = SearchParams::default();
        let generator = GeneratorParams {
            capacity: match variant {
                Variant::Uniform => crate::instance::CapacityProfile::Uniform { capacity: 10 },
                Variant::Nonuniform => crate::instance::CapacityProfile::Random { lo: 2, hi: 20 },
            },
            ..GeneratorParams::default()
        };
        BenchConfig {
            count,
            generator,
            facilities: (3, 6),
            clients: (4, 8),
            variant,
            bound: variant.unscaled_bound() + params.epsilon,
            params,
            lambda_grid: vec![1.0],
            first_seed: 0,
        }
    }

    /// Instance for one seed: sizes drawn from the configured ranges.
    pub fn instance(&self, seed: u64) -> Result<Instance, GenerateError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe_f00d);
        let (flo, fhi) = self.facilities;
        let (clo, chi) = self.clients;
        if flo > fhi || clo > chi {
            return Err(GenerateError::InvalidParameter(
                "size range must satisfy lo <= hi".into(),
            ));
        }
        let params = GeneratorParams {
            n_facilities: rng.random_range(flo..=fhi),
            n_clients: rng.random_range(clo..=chi),
            ..self.generator.clone()
        };
        generate_euclidean(&params, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub seed: u64,
    pub variant: Variant,
    pub lambda: f64,
    pub facilities: usize,
    pub clients: usize,
    pub solver_cost: Money,
    pub oracle_cost: Money,
    pub ratio: f64,
    pub iterations: usize,
    /// `4|F|/ε · ln(c_start / c_end) + 1` for the reported run.
    pub iteration_bound: f64,
    pub local_opt: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub bound: f64,
    pub rows: Vec<RatioRow>,
    pub aggregate: Aggregate,
    /// First seed whose ratio exceeds the bound.
    pub worst_seed: Option<u64>,
}

impl RatioReport {
    pub fn passed(&self) -> bool {
        self.worst_seed.is_none()
    }

    /// Copy with wall-clock columns zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.wall_ms = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "seed,variant,lambda,facilities,clients,solver_cost,oracle_cost,ratio,iterations,iteration_bound,local_opt,wall_ms\n",
        );
        for r in &self.rows {
            let variant = match r.variant {
                Variant::Uniform => "uniform",
                Variant::Nonuniform => "nonuniform",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.12},{},{:.3},{},{:.3}\n",
                r.seed,
                variant,
                r.lambda,
                r.facilities,
                r.clients,
                r.solver_cost,
                r.oracle_cost,
                r.ratio,
                r.iterations,
                r.iteration_bound,
                r.local_opt,
                r.wall_ms
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("seed {seed}: {source}")]
    Generate { seed: u64, source: GenerateError },
    #[error("seed {seed}: {source}")]
    Search { seed: u64, source: SearchError },
    #[error("seed {seed}: {source}")]
    Oracle { seed: u64, source: OracleError },
}

/// Solver cost over oracle cost; 1 when both are zero.
pub fn ratio(solver: Money, oracle: Money) -> f64 {
    if oracle == 0 {
        if solver == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        solver as f64 / oracle as f64
    }
}

/// Runs the harness with the configured local search.
pub fn run_bench(cfg: &BenchConfig) -> Result<RatioReport, BenchError> {
    run_bench_with(cfg, |inst| {
        scaled_search(inst, &cfg.params, &cfg.lambda_grid, cfg.variant)
    })
}

/// Runs the harness with an arbitrary solver.
pub fn run_bench_with<F>(cfg: &BenchConfig, solver: F) -> Result<RatioReport, BenchError>
where
    F: Fn(&Instance) -> Result<Solution, SearchError> + Sync + Send,
{
    let rows: Vec<Result<RatioRow, BenchError>> = par::map_indexed(cfg.params.execution, cfg.count, |k| {
        let seed = cfg.first_seed + k as u64;
        let inst = cfg
            .instance(seed)
            .map_err(|source| BenchError::Generate { seed, source })?;
        let start = Instant::now();
        let sol = solver(&inst).map_err(|source| BenchError::Search { seed, source })?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        // Outer loop is already parallel.
        let oracle = exact_optimum_with(&inst, DEFAULT_ENUMERATION_CAP, Execution::Sequential)
            .map_err(|source| BenchError::Oracle { seed, source })?;
        let (first, last) = (
            sol.trace.first().copied().unwrap_or(0),
            sol.trace.last().copied().unwrap_or(0),
        );
        Ok(RatioRow {
            seed,
            variant: sol.variant,
            lambda: sol.lambda,
            facilities: inst.num_facilities(),
            clients: inst.num_clients(),
            solver_cost: sol.total_cost,
            oracle_cost: oracle.optimum_cost,
            ratio: ratio(sol.total_cost, oracle.optimum_cost),
            iterations: sol.iterations,
            iteration_bound: iteration_bound(inst.num_facilities(), sol.epsilon, first, last),
            local_opt: sol.local_opt,
            wall_ms,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let count = rows.len();
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mean_ratio = if count == 0 {
        0.0
    } else {
        rows.iter().map(|r| r.ratio).sum::<f64>() / count as f64
    };
    let worst_seed = rows
        .iter()
        .find(|r| r.ratio.is_nan() || r.ratio > cfg.bound)
        .map(|r| r.seed);
    Ok(RatioReport {
        bound: cfg.bound,
        rows,
        aggregate: Aggregate {
            count,
            max_ratio,
            mean_ratio,
        },
        worst_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::assign;
    use crate::instance::OpenSet;

    #[test]
    fn empty_run() {
        let r = run_bench(&BenchConfig::new(Variant::Uniform, 0)).unwrap();
        assert!(r.passed());
        assert_eq!(r.aggregate.count, 0);
        assert_eq!(r.to_csv().lines().count(), 1);
    }

    #[test]
    fn small_run_passes_and_is_ordered() {
        let cfg = BenchConfig::new(Variant::Nonuniform, 6);
        let r = run_bench(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.aggregate);
        let seeds: Vec<u64> = r.rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, (0..6).collect::<Vec<_>>());
        assert!(r.rows.iter().all(|row| row.ratio >= 1.0));
    }

    #[test]
    fn always_empty_solver_is_caught() {
        let mut cfg = BenchConfig::new(Variant::Uniform, 3);
        // Penalties dwarf every other cost, so serving is essential.
        cfg.generator.penalty_max = 1_000_000 * crate::MICROS;
        let r = run_bench_with(&cfg, |inst| {
            let assignment = assign(inst, &OpenSet::empty()).unwrap();
            Ok(Solution {
                variant: Variant::Uniform,
                epsilon: 0.01,
                lambda: 1.0,
                open_set: OpenSet::empty(),
                total_cost: assignment.total(),
                assignment,
                iterations: 0,
                local_opt: true,
                trace: vec![],
            })
        })
        .unwrap();
        assert!(!r.passed());
        assert_eq!(r.worst_seed, Some(0));
    }

    #[test]
    fn ratio_edges() {
        assert_eq!(ratio(0, 0), 1.0);
        assert!(ratio(1, 0).is_infinite());
        assert_eq!(ratio(3, 2), 1.5);
    }
}
