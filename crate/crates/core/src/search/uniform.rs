//! Uniform-capacity neighbourhood: add, delete and swap, each evaluated by an
//! exact reassignment.

use super::{Move, MoveKind, ScaledCost, SearchContext, State};
use crate::instance::OpenSet;
use crate::par;

/// Candidate moves in tie-break order: adds, then deletes, then swaps,
/// each by ascending facility indices.
pub fn candidate_moves(state: &State, num_facilities: usize) -> Vec<(MoveKind, OpenSet)> {
    let open = &state.open_set;
    let closed = open.complement(num_facilities);
    let mut out = Vec::with_capacity(closed.len() + open.len() * (1 + closed.len()));
    for &t in &closed {
        out.push((MoveKind::Add { t }, open.with(t)));
    }
    for s in open.iter() {
        out.push((MoveKind::Delete { s }, open.without(s)));
    }
    for s in open.iter() {
        let base = open.without(s);
        for &t in &closed {
            out.push((MoveKind::Swap { s, t }, base.with(t)));
        }
    }
    out
}

pub fn best_improving_move(ctx: &SearchContext<'_>, state: &State, threshold: ScaledCost) -> Option<Move> {
    let candidates = candidate_moves(state, ctx.inst.num_facilities());
    let limit = state.scaled_cost - threshold;
    let make = |k: usize, cost: ScaledCost| Move {
        kind: candidates[k].0.clone(),
        resulting_open_set: candidates[k].1.clone(),
        evaluated_cost: cost,
        estimated_cost: None,
    };

    if ctx.first_improvement {
        return candidates
            .iter()
            .enumerate()
            .map(|(k, (_, set))| (k, ctx.evaluate(set)))
            .find(|&(_, cost)| cost <= limit)
            .map(|(k, cost)| make(k, cost));
    }

    let (k, cost, ()) = par::min_by_key_indexed(ctx.execution, candidates.len(), |k| {
        Some((ctx.evaluate(&candidates[k].1), ()))
    })?;
    (cost <= limit).then(|| make(k, cost))
}
