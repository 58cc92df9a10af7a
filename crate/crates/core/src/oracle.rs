//! Ground truth: exact optimum by enumerating every open set, and a
//! post-hoc local-optimality check for search results.

use serde::Serialize;
use thiserror::Error;

use crate::flow::{assign, FlowError};
use crate::instance::{Instance, OpenSet};
use crate::par::{self, Execution};
use crate::search::{
    best_improving_move, improvement_threshold, Move, ScaledCost, SearchContext, SearchError, SearchParams, Solution,
    Variant,
};
use crate::Money;

/// Largest facility count [`exact_optimum`] will enumerate.
pub const DEFAULT_ENUMERATION_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub optimum_cost: Money,
    pub optimum_open_set: OpenSet,
    pub subsets_evaluated: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{facilities} facilities exceed the enumeration cap of {cap}")]
    CapExceeded { facilities: usize, cap: usize },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

pub fn exact_optimum(inst: &Instance) -> Result<OracleResult, OracleError> {
    exact_optimum_with(inst, DEFAULT_ENUMERATION_CAP, Execution::default())
}

/// Minimum of `assign(inst, S).total()` over all `2^|F|` open sets. Ties go
/// to the smaller set, then the lexicographically smaller one.
pub fn exact_optimum_with(inst: &Instance, cap: usize, exec: Execution) -> Result<OracleResult, OracleError> {
    let nf = inst.num_facilities();
    if nf > cap || nf >= 63 {
        return Err(OracleError::CapExceeded { facilities: nf, cap });
    }
    let count = 1u64 << nf;
    let costs: Vec<Result<Money, FlowError>> = par::map_indexed(exec, count as usize, |mask| {
        assign(inst, &OpenSet::from_mask(mask as u64, nf)).map(|a| a.total())
    });
    let mut best: Option<(Money, OpenSet)> = None;
    for (mask, cost) in costs.into_iter().enumerate() {
        let cost = cost?;
        let set = OpenSet::from_mask(mask as u64, nf);
        let better = match &best {
            None => true,
            Some((bc, bs)) => (cost, set.len(), set.as_slice()) < (*bc, bs.len(), bs.as_slice()),
        };
        if better {
            best = Some((cost, set));
        }
    }
    let (optimum_cost, optimum_open_set) = best.expect("at least the empty set is evaluated");
    Ok(OracleResult {
        optimum_cost,
        optimum_open_set,
        subsets_evaluated: count,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalOptReport {
    pub is_local_opt: bool,
    pub violating_move: Option<Move>,
    pub threshold: ScaledCost,
}

/// Re-scans the variant's neighbourhood around `sol` at the threshold the
/// search would use there (λ taken from the solution, ε from `params`) and
/// reports the first move that clears it, if any.
pub fn verify_local_optimality(
    inst: &Instance,
    sol: &Solution,
    variant: Variant,
    params: &SearchParams,
) -> Result<LocalOptReport, SearchError> {
    let params = SearchParams {
        lambda: sol.lambda,
        first_improvement: true,
        ..params.clone()
    };
    let ctx = SearchContext::new(inst, &params)?;
    let state = ctx.state(sol.open_set.clone())?;
    let threshold = improvement_threshold(state.scaled_cost, params.epsilon, inst.num_facilities());
    let violating_move = best_improving_move(&ctx, variant, &state, threshold);
    Ok(LocalOptReport {
        is_local_opt: violating_move.is_none(),
        violating_move,
        threshold,
    })
}

/// Wraps an arbitrary open set as an unscored [`Solution`] so it can be
/// checked with [`verify_local_optimality`].
pub fn solution_for(
    inst: &Instance,
    open_set: OpenSet,
    variant: Variant,
    epsilon: f64,
    lambda: f64,
) -> Result<Solution, FlowError> {
    let assignment = assign(inst, &open_set)?;
    let total_cost = assignment.total();
    Ok(Solution {
        variant,
        epsilon,
        lambda,
        open_set,
        assignment,
        total_cost,
        iterations: 0,
        local_opt: false,
        trace: Vec::new(),
    })
}
