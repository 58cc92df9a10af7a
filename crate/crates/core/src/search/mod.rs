//! Local search over open sets.
//!
//! Both variants share one driver: start from an initial open set, ask the
//! variant for its best move whose improvement of the λ-scaled cost clears
//! `ceil(ε · c_λ(S) / (4 |F|))`, apply it, and repeat until no move clears the
//! threshold. Scaling multiplies facility costs by λ during the search only;
//! reported costs are always the true ones.

pub mod nonuniform;
pub mod uniform;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{assign, Assignment, FlowError};
use crate::instance::{CapacityMode, Instance, OpenSet};
use crate::par::Execution;
use crate::{Money, Units, MICROS};

/// Costs in the search's scaled units: `λ_micro · c_f + 10^6 · (c_s + c_p)`.
pub type ScaledCost = i128;

const LAMBDA_DENOM: i128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Uniform,
    Nonuniform,
}

impl Variant {
    /// Default λ grid for [`scaled_search`].
    pub fn default_lambda_grid(self) -> Vec<f64> {
        match self {
            Variant::Uniform => vec![1.0, std::f64::consts::SQRT_2, 2.0],
            Variant::Nonuniform => (10..=20).map(|k| k as f64 / 10.0).collect(),
        }
    }

    /// Local-optimum bound `(6 + ε)` or `(9 + ε)` for λ = 1.
    pub fn unscaled_bound(self) -> f64 {
        match self {
            Variant::Uniform => 6.0,
            Variant::Nonuniform => 9.0,
        }
    }

    /// Bound after scaling: `3 + 2√2` and `8.532`.
    pub fn scaled_bound(self) -> f64 {
        match self {
            Variant::Uniform => 5.83,
            Variant::Nonuniform => 8.532,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Variant::Uniform),
            "nonuniform" => Ok(Variant::Nonuniform),
            other => Err(format!("unknown variant `{other}` (expected uniform|nonuniform)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum InitialSolution {
    /// Everything penalised; always feasible.
    Empty,
    /// Each facility opened with probability 1/2.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub epsilon: f64,
    pub lambda: f64,
    pub max_iterations: usize,
    pub initial: InitialSolution,
    pub execution: Execution,
    /// Take the first move that clears the threshold instead of the best.
    pub first_improvement: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            epsilon: 0.01,
            lambda: 1.0,
            max_iterations: 10_000,
            initial: InitialSolution::Empty,
            execution: Execution::default(),
            first_improvement: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("lambda must be finite and >= 1, got {0}")]
    BadLambda(f64),
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("uniform search needs a uniform-capacity instance")]
    NotUniform,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// λ as a rational with denominator 10^6.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scaling {
    lambda_micro: i128,
}

impl Scaling {
    pub fn new(lambda: f64) -> Result<Self, SearchError> {
        if !lambda.is_finite() || lambda < 1.0 {
            return Err(SearchError::BadLambda(lambda));
        }
        Ok(Scaling {
            lambda_micro: (lambda * LAMBDA_DENOM as f64).round() as i128,
        })
    }

    pub fn unit() -> Self {
        Scaling {
            lambda_micro: LAMBDA_DENOM,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_micro as f64 / LAMBDA_DENOM as f64
    }

    #[inline]
    pub fn facility(&self, open_cost: Money) -> ScaledCost {
        open_cost as i128 * self.lambda_micro
    }

    #[inline]
    pub fn variable(&self, money: Money) -> ScaledCost {
        money as i128 * LAMBDA_DENOM
    }

    pub fn cost(&self, a: &Assignment) -> ScaledCost {
        self.facility(a.cost_facility) + self.variable(a.variable_cost())
    }
}

/// Minimum accepted improvement: `max(1, ceil(ε · c / (4 |F|)))`.
pub fn improvement_threshold(scaled_cost: ScaledCost, epsilon: f64, num_facilities: usize) -> ScaledCost {
    let p = 4.0 * num_facilities.max(1) as f64;
    let t = (epsilon * scaled_cost.max(0) as f64 / p).ceil();
    (t as ScaledCost).max(1)
}

/// Upper bound on the number of accepted moves:
/// `4|F|/ε · ln(c_start / c_end) + 1`.
pub fn iteration_bound(num_facilities: usize, epsilon: f64, start: ScaledCost, end: ScaledCost) -> f64 {
    if start <= 0 {
        return 1.0;
    }
    if end <= 0 {
        return f64::INFINITY;
    }
    let p = 4.0 * num_facilities.max(1) as f64;
    p / epsilon * (start as f64 / end as f64).ln() + 1.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "op")]
pub enum MoveKind {
    Add {
        t: usize,
    },
    Delete {
        s: usize,
    },
    Swap {
        s: usize,
        t: usize,
    },
    /// Open `t` and close `closed`, moving their load onto `t`.
    Open {
        t: usize,
        closed: Vec<usize>,
    },
    /// Close `s`, open `opened`; `penalized` of its units are paid for by
    /// penalties (on its own clients or on clients of other open facilities).
    Close {
        s: usize,
        opened: Vec<usize>,
        penalized: Units,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    pub resulting_open_set: OpenSet,
    /// Scaled cost of the resulting open set under exact reassignment.
    pub evaluated_cost: ScaledCost,
    /// Scaled upper-bound estimate (open/close moves only).
    pub estimated_cost: Option<ScaledCost>,
}

/// The current point of a search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub open_set: OpenSet,
    pub assignment: Assignment,
    pub scaled_cost: ScaledCost,
}

/// Shared read-only context for move evaluation.
pub struct SearchContext<'a> {
    pub inst: &'a Instance,
    pub scaling: Scaling,
    pub execution: Execution,
    pub first_improvement: bool,
}

impl<'a> SearchContext<'a> {
    pub fn new(inst: &'a Instance, params: &SearchParams) -> Result<Self, SearchError> {
        Ok(SearchContext {
            inst,
            scaling: Scaling::new(params.lambda)?,
            execution: params.execution,
            first_improvement: params.first_improvement,
        })
    }

    pub fn state(&self, open_set: OpenSet) -> Result<State, FlowError> {
        let assignment = assign(self.inst, &open_set)?;
        let scaled_cost = self.scaling.cost(&assignment);
        Ok(State {
            open_set,
            assignment,
            scaled_cost,
        })
    }

    /// Exact scaled cost of an open set.
    pub fn evaluate(&self, open_set: &OpenSet) -> ScaledCost {
        // Open sets built by the search only reference valid facilities and
        // penalty networks are always feasible.
        let a = assign(self.inst, open_set).expect("penalty network is always feasible");
        self.scaling.cost(&a)
    }
}

/// Result of a local search, reported at true (unscaled) cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub variant: Variant,
    pub epsilon: f64,
    pub lambda: f64,
    pub open_set: OpenSet,
    pub assignment: Assignment,
    pub total_cost: Money,
    pub iterations: usize,
    /// False when the iteration cap stopped the search.
    pub local_opt: bool,
    /// Scaled cost before the first move and after every accepted move.
    pub trace: Vec<ScaledCost>,
}

impl Solution {
    pub fn scaled_cost(&self) -> ScaledCost {
        Scaling::new(self.lambda)
            .unwrap_or_else(|_| Scaling::unit())
            .cost(&self.assignment)
    }

    pub fn to_file(&self) -> SolutionFile {
        SolutionFile {
            variant: self.variant,
            epsilon: self.epsilon,
            lambda: self.lambda,
            open_set: self.open_set.clone(),
            assignment: self.assignment.served.clone(),
            penalized: self.assignment.penalized.clone(),
            cost: CostBreakdown {
                facility: self.assignment.cost_facility,
                service: self.assignment.cost_service,
                penalty: self.assignment.cost_penalty,
                total: self.total_cost,
            },
            iterations: self.iterations,
            local_opt: self.local_opt,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("solution serialization cannot fail")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub facility: Money,
    pub service: Money,
    pub penalty: Money,
    pub total: Money,
}

/// On-disk solution format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub variant: Variant,
    pub epsilon: f64,
    pub lambda: f64,
    pub open_set: OpenSet,
    /// `assignment[i][j]`: units of client `j` served by facility `i`.
    pub assignment: Vec<Vec<Units>>,
    pub penalized: Vec<Units>,
    pub cost: CostBreakdown,
    pub iterations: usize,
    pub local_opt: bool,
}

/// Best move from `state` whose scaled improvement is at least `threshold`.
pub fn best_improving_move(
    ctx: &SearchContext<'_>,
    variant: Variant,
    state: &State,
    threshold: ScaledCost,
) -> Option<Move> {
    match variant {
        Variant::Uniform => uniform::best_improving_move(ctx, state, threshold),
        Variant::Nonuniform => nonuniform::best_improving_move(ctx, state, threshold),
    }
}

fn initial_open_set(inst: &Instance, initial: InitialSolution) -> OpenSet {
    match initial {
        InitialSolution::Empty => OpenSet::empty(),
        InitialSolution::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            OpenSet::from_indices((0..inst.num_facilities()).filter(|_| rng.random_bool(0.5)))
        }
    }
}

/// Runs one local search with the given variant and a single λ.
pub fn local_search(inst: &Instance, params: &SearchParams, variant: Variant) -> Result<Solution, SearchError> {
    if !(params.epsilon.is_finite() && params.epsilon > 0.0) {
        return Err(SearchError::BadEpsilon(params.epsilon));
    }
    if variant == Variant::Uniform && inst.capacity_mode != CapacityMode::Uniform {
        return Err(SearchError::NotUniform);
    }
    let ctx = SearchContext::new(inst, params)?;
    let mut state = ctx.state(initial_open_set(inst, params.initial))?;
    let mut trace = vec![state.scaled_cost];
    let mut iterations = 0;
    let mut local_opt = false;

    while iterations < params.max_iterations {
        let threshold = improvement_threshold(state.scaled_cost, params.epsilon, inst.num_facilities());
        let Some(mv) = best_improving_move(&ctx, variant, &state, threshold) else {
            local_opt = true;
            break;
        };
        assert!(
            mv.evaluated_cost <= state.scaled_cost - threshold,
            "accepted move must clear the improvement threshold"
        );
        state = ctx.state(mv.resulting_open_set)?;
        debug_assert_eq!(state.scaled_cost, mv.evaluated_cost);
        trace.push(state.scaled_cost);
        iterations += 1;
    }
    if !local_opt {
        // The cap may coincide with reaching a local optimum.
        let threshold = improvement_threshold(state.scaled_cost, params.epsilon, inst.num_facilities());
        local_opt = best_improving_move(&ctx, variant, &state, threshold).is_none();
    }

    let total_cost = state.assignment.total();
    Ok(Solution {
        variant,
        epsilon: params.epsilon,
        lambda: ctx.scaling.lambda(),
        open_set: state.open_set,
        assignment: state.assignment,
        total_cost,
        iterations,
        local_opt,
        trace,
    })
}

pub fn local_search_uniform(inst: &Instance, params: &SearchParams) -> Result<Solution, SearchError> {
    local_search(inst, params, Variant::Uniform)
}

pub fn local_search_nonuniform(inst: &Instance, params: &SearchParams) -> Result<Solution, SearchError> {
    local_search(inst, params, Variant::Nonuniform)
}

/// Runs the search once per λ in `lambda_grid` and keeps the run with the
/// smallest true cost (earliest λ on ties).
pub fn scaled_search(
    inst: &Instance,
    base: &SearchParams,
    lambda_grid: &[f64],
    variant: Variant,
) -> Result<Solution, SearchError> {
    if lambda_grid.is_empty() {
        return Err(SearchError::EmptyGrid);
    }
    for &l in lambda_grid {
        Scaling::new(l)?;
    }
    let mut best: Option<Solution> = None;
    for &lambda in lambda_grid {
        let params = SearchParams { lambda, ..base.clone() };
        let sol = local_search(inst, &params, variant)?;
        if best.as_ref().is_none_or(|b| sol.total_cost < b.total_cost) {
            best = Some(sol);
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Converts whole money units to micro-units.
pub fn money(units: i64) -> Money {
    units * MICROS
}
