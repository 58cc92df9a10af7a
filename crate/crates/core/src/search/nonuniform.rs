//! Non-uniform-capacity neighbourhood.
//!
//! Besides exact add and delete moves this scans two composite moves:
//!
//! * `open(t, T)`: open `t` (or reuse its free capacity) and close a subset
//!   `T` of open facilities whose whole load moves onto `t`. Choosing `T` is a
//!   0/1 knapsack over the free capacity of `t`, solved exactly by DP.
//! * `close(s, T)`: close `s`. For a guess `r`, the `r` cheapest units of the
//!   penalty menu (`c_ss' + p_j` for every client `j` of every open `s'`)
//!   absorb `r` units of `s`'s load; the remaining load is routed by a
//!   single-client facility-location DP over the other facilities.
//!
//! Both composite moves are priced by upper-bound estimates that use the
//! facility distance `c_st` for every rerouted unit. A move whose estimate
//! clears the threshold is re-scored by an exact reassignment, and the exact
//! cost never exceeds the estimate.

use super::{Move, MoveKind, ScaledCost, SearchContext, State};
use crate::instance::OpenSet;
use crate::{par, Units};

// ---------------------------------------------------------------------------
// open(t, T)

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenCandidate {
    pub facility: usize,
    pub load: Units,
    /// Saving from closing it: `f_s - c_st · load`.
    pub gain: ScaledCost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenMoveProblem {
    pub target: usize,
    /// Opening cost paid for the target; zero when it is already open.
    pub target_open_cost: ScaledCost,
    pub candidates: Vec<OpenCandidate>,
    /// Free capacity of the target.
    pub budget: Units,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenPlan {
    pub target: usize,
    pub closed: Vec<usize>,
    pub estimated_delta: ScaledCost,
}

/// 0/1 knapsack: subset of `items` (weight, value) with total weight at most
/// `budget` and maximum total value. Returns chosen item indices (ascending)
/// and the value. Items of non-positive value are never chosen.
pub fn knapsack(items: &[(Units, ScaledCost)], budget: Units) -> (Vec<usize>, ScaledCost) {
    let total: Units = items.iter().map(|&(w, _)| w.max(0)).sum();
    let cap = budget.min(total).max(0) as usize;
    let n = items.len();
    // best[k][w]: max value over the first k items with weight <= w.
    let mut best = vec![vec![0 as ScaledCost; cap + 1]; n + 1];
    for k in 0..n {
        let (w, v) = items[k];
        for c in 0..=cap {
            let skip = best[k][c];
            let take = if v > 0 && w >= 0 && (w as usize) <= c {
                best[k][c - w as usize] + v
            } else {
                ScaledCost::MIN
            };
            best[k + 1][c] = skip.max(take);
        }
    }
    let mut chosen = Vec::new();
    let mut c = cap;
    for k in (0..n).rev() {
        if best[k + 1][c] != best[k][c] {
            chosen.push(k);
            c -= items[k].0 as usize;
        }
    }
    chosen.reverse();
    (chosen, best[n][cap])
}

/// Best `open(t, T)` for one target, if its estimated delta is at most
/// `-threshold`.
pub fn solve_open_move(p: &OpenMoveProblem, threshold: ScaledCost) -> Option<OpenPlan> {
    if p.budget <= 0 && p.candidates.iter().all(|c| c.load > 0) {
        return None;
    }
    let items: Vec<(Units, ScaledCost)> = p.candidates.iter().map(|c| (c.load, c.gain)).collect();
    let (chosen, value) = knapsack(&items, p.budget);
    if chosen.is_empty() {
        return None;
    }
    let estimated_delta = p.target_open_cost - value;
    (estimated_delta <= -threshold).then(|| OpenPlan {
        target: p.target,
        closed: chosen.iter().map(|&k| p.candidates[k].facility).collect(),
        estimated_delta,
    })
}

// ---------------------------------------------------------------------------
// close(s, T)

/// `(facility, units)` pairs.
pub type Routing = Vec<(usize, Units)>;

/// One penalty-menu line: `units` of `client` currently served by
/// `facility`, each able to absorb one unit of the closed facility's load
/// for `charge = c_{s,facility} + p_client`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MenuEntry {
    pub charge: ScaledCost,
    pub units: Units,
    pub facility: usize,
    pub client: usize,
}

/// A facility that can receive rerouted load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacilityOption {
    pub facility: usize,
    /// Zero for a facility that is already open.
    pub open_cost: ScaledCost,
    pub free_capacity: Units,
    /// Per-unit reroute cost from the closed facility.
    pub route_cost: ScaledCost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloseMoveProblem {
    pub source: usize,
    /// Current load of the facility being closed.
    pub load: Units,
    /// Sorted by `(charge, facility, client)`.
    pub penalty_menu: Vec<MenuEntry>,
    pub facility_menu: Vec<FacilityOption>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosePlan {
    pub source: usize,
    /// Units of load absorbed by penalties (the guess `r`).
    pub penalized: Units,
    /// `(facility, units)` routed through the facility menu.
    pub routed: Routing,
    /// Facilities from the menu that were closed and get opened.
    pub opened: Vec<usize>,
    pub estimated_delta: ScaledCost,
}

/// Exact DP for the single-client facility location problem: route exactly
/// `u` units through the menu, paying each used facility's opening cost once
/// plus its per-unit route cost, within its free capacity. One table answers
/// every `u <= max_demand`.
pub struct SingleClientTable<'a> {
    menu: &'a [FacilityOption],
    /// cost[k][u]: best cost routing exactly u units through the first k options.
    cost: Vec<Vec<Option<ScaledCost>>>,
    /// Units given to option k-1 in that optimum.
    take: Vec<Vec<Units>>,
}

impl<'a> SingleClientTable<'a> {
    pub fn new(menu: &'a [FacilityOption], max_demand: Units) -> Self {
        let d = max_demand.max(0) as usize;
        let m = menu.len();
        let mut cost = vec![vec![None; d + 1]; m + 1];
        let mut take = vec![vec![0; d + 1]; m + 1];
        cost[0][0] = Some(0);
        for k in 0..m {
            let opt = &menu[k];
            let cap = opt.free_capacity.max(0) as usize;
            for u in 0..=d {
                let mut best = cost[k][u];
                let mut best_q = 0;
                for q in 1..=cap.min(u) {
                    if let Some(prev) = cost[k][u - q] {
                        let c = prev + opt.open_cost + opt.route_cost * q as ScaledCost;
                        if best.is_none_or(|b| c < b) {
                            best = Some(c);
                            best_q = q;
                        }
                    }
                }
                cost[k + 1][u] = best;
                take[k + 1][u] = best_q as Units;
            }
        }
        SingleClientTable { menu, cost, take }
    }

    /// Cheapest way to route exactly `demand` units, as `(facility, units)`
    /// pairs and total cost; `None` if capacity is insufficient.
    pub fn solve(&self, demand: Units) -> Option<(Routing, ScaledCost)> {
        let m = self.menu.len();
        let mut u = usize::try_from(demand).ok()?;
        let total = (*self.cost[m].get(u)?)?;
        let mut routed = Vec::new();
        for k in (1..=m).rev() {
            let q = self.take[k][u];
            if q > 0 {
                routed.push((self.menu[k - 1].facility, q));
                u -= q as usize;
            }
        }
        routed.reverse();
        Some((routed, total))
    }
}

/// Single-client facility location over `menu` for `demand` units.
pub fn solve_single_client_fl(menu: &[FacilityOption], demand: Units) -> Option<(Routing, ScaledCost)> {
    SingleClientTable::new(menu, demand).solve(demand)
}

/// `prefix[r]`: cost of the `r` cheapest units of a sorted menu, for
/// `r <= max_units`; shorter when the menu runs out.
pub fn penalty_prefix_costs(menu: &[MenuEntry], max_units: Units) -> Vec<ScaledCost> {
    let mut out = Vec::with_capacity(max_units.max(0) as usize + 1);
    out.push(0);
    let mut acc: ScaledCost = 0;
    'outer: for e in menu {
        for _ in 0..e.units {
            if out.len() as Units > max_units {
                break 'outer;
            }
            acc += e.charge;
            out.push(acc);
        }
    }
    out
}

/// Best `close(s, T)` over every penalty guess `r in 0..=load`, if its
/// estimated delta is at most `-threshold`. Ties go to the smaller `r`.
pub fn solve_close_move(
    p: &CloseMoveProblem,
    source_open_cost: ScaledCost,
    threshold: ScaledCost,
) -> Option<ClosePlan> {
    let d = p.load.max(0);
    let prefix = penalty_prefix_costs(&p.penalty_menu, d);
    let table = SingleClientTable::new(&p.facility_menu, d);
    let mut best: Option<(ScaledCost, Units, Routing)> = None;
    for r in 0..=d {
        let Some(&pen) = prefix.get(r as usize) else {
            break;
        };
        let Some((routed, fl)) = table.solve(d - r) else {
            continue;
        };
        let delta = -source_open_cost + pen + fl;
        if best.as_ref().is_none_or(|(b, _, _)| delta < *b) {
            best = Some((delta, r, routed));
        }
    }
    let (estimated_delta, penalized, routed) = best?;
    if estimated_delta > -threshold {
        return None;
    }
    let opened = routed
        .iter()
        .filter(|&&(t, _)| p.facility_menu.iter().any(|o| o.facility == t && o.open_cost > 0))
        .map(|&(t, _)| t)
        .collect();
    Some(ClosePlan {
        source: p.source,
        penalized,
        routed,
        opened,
        estimated_delta,
    })
}

// ---------------------------------------------------------------------------
// Problem construction and move scan

/// Per-state data shared by every composite move.
pub struct Neighbourhood<'c, 'a> {
    ctx: &'c SearchContext<'a>,
    state: &'c State,
    loads: Vec<Units>,
    distance: Vec<Vec<crate::Money>>,
}

impl<'c, 'a> Neighbourhood<'c, 'a> {
    pub fn new(ctx: &'c SearchContext<'a>, state: &'c State) -> Self {
        let nf = ctx.inst.num_facilities();
        Neighbourhood {
            ctx,
            state,
            loads: (0..nf).map(|i| state.assignment.load(i)).collect(),
            distance: ctx.inst.facility_distances(),
        }
    }

    pub fn open_problem(&self, t: usize) -> OpenMoveProblem {
        let inst = self.ctx.inst;
        let sc = &self.ctx.scaling;
        let is_open = self.state.open_set.contains(t);
        let candidates = self
            .state
            .open_set
            .iter()
            .filter(|&s| s != t)
            .map(|s| OpenCandidate {
                facility: s,
                load: self.loads[s],
                gain: sc.facility(inst.facilities[s].open_cost) - sc.variable(self.distance[s][t] * self.loads[s]),
            })
            .collect();
        OpenMoveProblem {
            target: t,
            target_open_cost: if is_open {
                0
            } else {
                sc.facility(inst.facilities[t].open_cost)
            },
            candidates,
            budget: inst.facilities[t].capacity - if is_open { self.loads[t] } else { 0 },
        }
    }

    pub fn close_problem(&self, s: usize) -> CloseMoveProblem {
        let inst = self.ctx.inst;
        let sc = &self.ctx.scaling;
        let served = &self.state.assignment.served;
        let mut penalty_menu = Vec::new();
        for s2 in self.state.open_set.iter() {
            for (j, c) in inst.clients.iter().enumerate() {
                if served[s2][j] > 0 {
                    penalty_menu.push(MenuEntry {
                        charge: sc.variable(self.distance[s][s2] + c.penalty),
                        units: served[s2][j],
                        facility: s2,
                        client: j,
                    });
                }
            }
        }
        penalty_menu.sort_by_key(|e| (e.charge, e.facility, e.client));

        let facility_menu = (0..inst.num_facilities())
            .filter(|&t| t != s)
            .filter_map(|t| {
                let open = self.state.open_set.contains(t);
                let free = inst.facilities[t].capacity - if open { self.loads[t] } else { 0 };
                (free > 0).then(|| FacilityOption {
                    facility: t,
                    open_cost: if open {
                        0
                    } else {
                        sc.facility(inst.facilities[t].open_cost)
                    },
                    free_capacity: free,
                    route_cost: sc.variable(self.distance[s][t]),
                })
            })
            .collect();

        CloseMoveProblem {
            source: s,
            load: self.loads[s],
            penalty_menu,
            facility_menu,
        }
    }

    fn open_move(&self, t: usize, threshold: ScaledCost) -> Option<Move> {
        let plan = solve_open_move(&self.open_problem(t), threshold)?;
        let mut set = self.state.open_set.with(t);
        for &s in &plan.closed {
            set = set.without(s);
        }
        Some(self.rescore(MoveKind::Open { t, closed: plan.closed }, set, plan.estimated_delta))
    }

    fn close_move(&self, s: usize, threshold: ScaledCost) -> Option<Move> {
        let sc = &self.ctx.scaling;
        let f_s = sc.facility(self.ctx.inst.facilities[s].open_cost);
        let plan = solve_close_move(&self.close_problem(s), f_s, threshold)?;
        let mut set = self.state.open_set.without(s);
        for &t in &plan.opened {
            set = set.with(t);
        }
        Some(self.rescore(
            MoveKind::Close {
                s,
                opened: plan.opened,
                penalized: plan.penalized,
            },
            set,
            plan.estimated_delta,
        ))
    }

    fn rescore(&self, kind: MoveKind, set: OpenSet, estimated_delta: ScaledCost) -> Move {
        let estimate = self.state.scaled_cost + estimated_delta;
        let exact = self.ctx.evaluate(&set);
        assert!(
            exact <= estimate,
            "estimate must upper-bound the exact cost ({kind:?}: exact {exact} > estimate {estimate})"
        );
        Move {
            kind,
            resulting_open_set: set,
            evaluated_cost: exact,
            estimated_cost: Some(estimate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Candidate {
    Add(usize),
    Delete(usize),
    Open(usize),
    Close(usize),
}

fn candidates(state: &State, nf: usize) -> Vec<Candidate> {
    let open = &state.open_set;
    let mut out: Vec<Candidate> = open.complement(nf).into_iter().map(Candidate::Add).collect();
    out.extend(open.iter().map(Candidate::Delete));
    out.extend((0..nf).map(Candidate::Open));
    out.extend(open.iter().map(Candidate::Close));
    out
}

pub fn best_improving_move(ctx: &SearchContext<'_>, state: &State, threshold: ScaledCost) -> Option<Move> {
    let nb = Neighbourhood::new(ctx, state);
    let cands = candidates(state, ctx.inst.num_facilities());
    let limit = state.scaled_cost - threshold;

    let eval = |k: usize| -> Option<Move> {
        let mv = match cands[k] {
            Candidate::Add(t) => {
                let set = state.open_set.with(t);
                Move {
                    kind: MoveKind::Add { t },
                    evaluated_cost: ctx.evaluate(&set),
                    resulting_open_set: set,
                    estimated_cost: None,
                }
            }
            Candidate::Delete(s) => {
                let set = state.open_set.without(s);
                Move {
                    kind: MoveKind::Delete { s },
                    evaluated_cost: ctx.evaluate(&set),
                    resulting_open_set: set,
                    estimated_cost: None,
                }
            }
            Candidate::Open(t) => nb.open_move(t, threshold)?,
            Candidate::Close(s) => nb.close_move(s, threshold)?,
        };
        (mv.evaluated_cost <= limit).then_some(mv)
    };

    if ctx.first_improvement {
        return (0..cands.len()).find_map(eval);
    }
    par::min_by_key_indexed(ctx.execution, cands.len(), |k| {
        eval(k).map(|mv| (mv.evaluated_cost, mv))
    })
    .map(|(_, _, mv)| mv)
}
