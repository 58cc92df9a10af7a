//! Exact integer min-cost flow and the penalty network that turns a fixed
//! open set into its cheapest assignment.
//!
//! The penalty network adds a dummy supply node `N` that can feed every
//! client at the client's penalty rate. `N` only has outgoing arcs towards
//! clients, so penalised units never pass through another facility.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, OpenSet};
use crate::{Money, Units};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: Units,
    pub unit_cost: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    pub node_count: usize,
    pub arcs: Vec<Arc>,
    pub source: usize,
    pub sink: usize,
    pub required_flow: Units,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub arc_flows: Vec<Units>,
    pub total_cost: Money,
    /// Dual certificate: every residual arc has non-negative reduced cost
    /// `cost(u, v) + potential[u] - potential[v]`.
    pub node_potentials: Vec<Money>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("network infeasible: routed {routed} of {required} required units")]
    Infeasible { routed: Units, required: Units },
    #[error("arc {0} has negative cost or capacity")]
    NegativeArc(usize),
    #[error("arc {0} references a node outside the network")]
    BadNode(usize),
    #[error("unknown facility index {0}")]
    UnknownFacility(usize),
}

impl FlowNetwork {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Self {
        FlowNetwork {
            node_count,
            arcs: Vec::new(),
            source,
            sink,
            required_flow: 0,
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: Units, unit_cost: Money) -> usize {
        self.arcs.push(Arc {
            from,
            to,
            capacity,
            unit_cost,
        });
        self.arcs.len() - 1
    }

    /// DIMACS min-cost-flow text (1-based nodes) for cross-checking with
    /// external solvers.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "c capflp penalty network");
        let _ = writeln!(out, "p min {} {}", self.node_count, self.arcs.len());
        if self.source == self.sink {
            return out;
        }
        let _ = writeln!(out, "n {} {}", self.source + 1, self.required_flow);
        let _ = writeln!(out, "n {} {}", self.sink + 1, -self.required_flow);
        for a in &self.arcs {
            let _ = writeln!(out, "a {} {} 0 {} {}", a.from + 1, a.to + 1, a.capacity, a.unit_cost);
        }
        out
    }

    fn check_arcs(&self) -> Result<(), FlowError> {
        for (k, a) in self.arcs.iter().enumerate() {
            if a.from >= self.node_count || a.to >= self.node_count {
                return Err(FlowError::BadNode(k));
            }
            if a.capacity < 0 || a.unit_cost < 0 {
                return Err(FlowError::NegativeArc(k));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Successive shortest paths

struct Residual {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<Units>,
    cost: Vec<Money>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let m = net.arcs.len();
        let mut r = Residual {
            head: vec![Vec::new(); net.node_count],
            to: Vec::with_capacity(2 * m),
            cap: Vec::with_capacity(2 * m),
            cost: Vec::with_capacity(2 * m),
        };
        for a in &net.arcs {
            let e = r.to.len();
            r.head[a.from].push(e);
            r.to.push(a.to);
            r.cap.push(a.capacity);
            r.cost.push(a.unit_cost);
            r.head[a.to].push(e + 1);
            r.to.push(a.from);
            r.cap.push(0);
            r.cost.push(-a.unit_cost);
        }
        r
    }
}

/// Minimum-cost flow of value `required_flow` from source to sink.
///
/// Dijkstra on reduced costs with node potentials; arc costs must be
/// non-negative so zero potentials are a valid start. Adjacency is scanned
/// in arc-index order and labels only change on strict improvement, so the
/// flow is a deterministic function of the network.
pub fn min_cost_flow(net: &FlowNetwork) -> Result<FlowResult, FlowError> {
    net.check_arcs()?;
    let n = net.node_count;
    let mut res = Residual::new(net);
    let mut potential: Vec<Money> = vec![0; n];
    let mut routed: Units = 0;
    let mut total_cost: Money = 0;

    const INF: Money = Money::MAX / 4;
    let mut dist = vec![INF; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();

    while routed < net.required_flow {
        dist.fill(INF);
        parent.fill(usize::MAX);
        dist[net.source] = 0;
        heap.push(Reverse((0, net.source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &res.head[u] {
                if res.cap[e] <= 0 {
                    continue;
                }
                let v = res.to[e];
                let nd = d + res.cost[e] + potential[u] - potential[v];
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = e;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        let reach = dist[net.sink];
        if reach >= INF {
            return Err(FlowError::Infeasible {
                routed,
                required: net.required_flow,
            });
        }
        // Capping at the sink distance keeps reduced costs non-negative on
        // every residual arc, including those of unreached nodes.
        for v in 0..n {
            potential[v] += dist[v].min(reach);
        }

        let mut push = net.required_flow - routed;
        let mut v = net.sink;
        while v != net.source {
            let e = parent[v];
            push = push.min(res.cap[e]);
            v = res.to[e ^ 1];
        }
        let mut v = net.sink;
        while v != net.source {
            let e = parent[v];
            res.cap[e] -= push;
            res.cap[e ^ 1] += push;
            total_cost += push * res.cost[e];
            v = res.to[e ^ 1];
        }
        routed += push;
    }

    let arc_flows = net
        .arcs
        .iter()
        .enumerate()
        .map(|(k, a)| a.capacity - res.cap[2 * k])
        .collect();
    Ok(FlowResult {
        arc_flows,
        total_cost,
        node_potentials: potential,
    })
}

/// Structural checks shared by both verifiers: shape, capacity bounds,
/// conservation, flow value and reported cost.
fn structurally_valid(net: &FlowNetwork, result: &FlowResult) -> bool {
    if result.arc_flows.len() != net.arcs.len() || result.node_potentials.len() != net.node_count {
        return false;
    }
    if net.check_arcs().is_err() {
        return false;
    }
    let mut balance: Vec<Units> = vec![0; net.node_count];
    let mut cost: Money = 0;
    for (a, &f) in net.arcs.iter().zip(&result.arc_flows) {
        if f < 0 || f > a.capacity {
            return false;
        }
        balance[a.from] -= f;
        balance[a.to] += f;
        cost += f * a.unit_cost;
    }
    if cost != result.total_cost {
        return false;
    }
    balance.iter().enumerate().all(|(v, &b)| {
        if v == net.source && v != net.sink {
            b == -net.required_flow
        } else if v == net.sink && v != net.source {
            b == net.required_flow
        } else {
            b == 0
        }
    })
}

/// Independent optimality check: the flow is feasible and the residual graph
/// contains no negative-cost cycle (Bellman-Ford from a virtual root).
/// Does not trust `result.node_potentials`.
pub fn verify_optimality(net: &FlowNetwork, result: &FlowResult) -> bool {
    if !structurally_valid(net, result) {
        return false;
    }
    let mut edges: Vec<(usize, usize, Money)> = Vec::new();
    for (a, &f) in net.arcs.iter().zip(&result.arc_flows) {
        if f < a.capacity {
            edges.push((a.from, a.to, a.unit_cost));
        }
        if f > 0 {
            edges.push((a.to, a.from, -a.unit_cost));
        }
    }
    let n = net.node_count;
    let mut dist: Vec<Money> = vec![0; n];
    for _ in 0..n {
        let mut changed = false;
        for &(u, v, c) in &edges {
            if dist[u] + c < dist[v] {
                dist[v] = dist[u] + c;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
    // Still relaxing after n rounds: a negative cycle exists.
    false
}

impl FlowResult {
    /// Checks the dual certificate carried in `node_potentials`.
    pub fn certificate_holds(&self, net: &FlowNetwork) -> bool {
        if !structurally_valid(net, self) {
            return false;
        }
        let pi = &self.node_potentials;
        net.arcs.iter().zip(&self.arc_flows).all(|(a, &f)| {
            let reduced = a.unit_cost + pi[a.from] - pi[a.to];
            (f >= a.capacity || reduced >= 0) && (f <= 0 || reduced <= 0)
        })
    }
}

// ---------------------------------------------------------------------------
// Penalty network and assignment

/// Where each facility and client lives in a [`PenaltyNetwork`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkLayout {
    pub dummy: usize,
    pub facility_node: Vec<Option<usize>>,
    pub client_node: Vec<Option<usize>>,
    /// `(facility, client, arc)` for every facility-to-client arc.
    pub serve_arcs: Vec<(usize, usize, usize)>,
    /// `(client, arc)` for every dummy-to-client arc.
    pub penalty_arcs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltyNetwork {
    pub network: FlowNetwork,
    pub layout: NetworkLayout,
}

/// Builds the min-cost-flow-with-penalties network for `open_set`.
///
/// Arcs, in order: source to each open facility (cap `u_s`), each open
/// facility to each client (cap `min(u_s, d_j)`, cost `c_sj`), source to the
/// dummy node (cap `sum d_j`), dummy to each client (cap `d_j`, cost `p_j`),
/// each client to the sink (cap `d_j`). Zero-demand clients are omitted.
pub fn build_penalty_network(inst: &Instance, open_set: &OpenSet) -> Result<PenaltyNetwork, FlowError> {
    if let Some(bad) = open_set.iter().find(|&s| s >= inst.num_facilities()) {
        return Err(FlowError::UnknownFacility(bad));
    }
    let source = 0;
    let sink = 1;
    let dummy = 2;
    let mut next = 3;
    let mut facility_node = vec![None; inst.num_facilities()];
    for s in open_set.iter() {
        facility_node[s] = Some(next);
        next += 1;
    }
    let mut client_node = vec![None; inst.num_clients()];
    for (j, c) in inst.clients.iter().enumerate() {
        if c.demand > 0 {
            client_node[j] = Some(next);
            next += 1;
        }
    }

    let mut net = FlowNetwork::new(next, source, sink);
    let mut serve_arcs = Vec::new();
    let mut penalty_arcs = Vec::new();
    for s in open_set.iter() {
        net.add_arc(source, facility_node[s].unwrap(), inst.facilities[s].capacity.max(0), 0);
    }
    for s in open_set.iter() {
        let fs = facility_node[s].unwrap();
        let cap = inst.facilities[s].capacity.max(0);
        for (j, c) in inst.clients.iter().enumerate() {
            if let Some(cj) = client_node[j] {
                let k = net.add_arc(fs, cj, cap.min(c.demand), inst.cost(s, j));
                serve_arcs.push((s, j, k));
            }
        }
    }
    let total = inst.clients.iter().map(|c| c.demand.max(0)).sum();
    net.add_arc(source, dummy, total, 0);
    for (j, c) in inst.clients.iter().enumerate() {
        if let Some(cj) = client_node[j] {
            let k = net.add_arc(dummy, cj, c.demand, c.penalty);
            penalty_arcs.push((j, k));
        }
    }
    for (j, c) in inst.clients.iter().enumerate() {
        if let Some(cj) = client_node[j] {
            net.add_arc(cj, sink, c.demand, 0);
        }
    }
    net.required_flow = total;

    Ok(PenaltyNetwork {
        network: net,
        layout: NetworkLayout {
            dummy,
            facility_node,
            client_node,
            serve_arcs,
            penalty_arcs,
        },
    })
}

/// Assignment of demand to an open set, with its cost breakdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub open_set: OpenSet,
    /// `served[i][j]`: units of client `j` served by facility `i` (zero rows
    /// for closed facilities).
    pub served: Vec<Vec<Units>>,
    pub penalized: Vec<Units>,
    pub cost_facility: Money,
    pub cost_service: Money,
    pub cost_penalty: Money,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("assignment matrix shape does not match the instance")]
    Shape,
    #[error("negative amount for facility {facility}, client {client}")]
    Negative { facility: usize, client: usize },
    #[error("closed facility {0} serves demand")]
    ClosedFacilityServes(usize),
    #[error("facility {facility} serves {load} units but has capacity {capacity}")]
    CapacityExceeded {
        facility: usize,
        load: Units,
        capacity: Units,
    },
    #[error("client {client}: served {served} + penalized {penalized} != demand {demand}")]
    Conservation {
        client: usize,
        served: Units,
        penalized: Units,
        demand: Units,
    },
    #[error("open set references unknown facility {0}")]
    UnknownFacility(usize),
}

impl Assignment {
    /// Builds an assignment from raw amounts and prices it. Entries outside
    /// the instance's shape are priced at zero; [`Assignment::check`]
    /// rejects them.
    pub fn from_parts(inst: &Instance, open_set: OpenSet, served: Vec<Vec<Units>>, penalized: Vec<Units>) -> Self {
        let cost_facility = open_set
            .iter()
            .filter_map(|s| inst.facilities.get(s))
            .map(|f| f.open_cost)
            .sum();
        let cost_service = served
            .iter()
            .zip(&inst.service_cost)
            .flat_map(|(row, costs)| row.iter().zip(costs).map(|(&x, &c)| x * c))
            .sum();
        let cost_penalty = penalized.iter().zip(&inst.clients).map(|(&r, c)| r * c.penalty).sum();
        Assignment {
            open_set,
            served,
            penalized,
            cost_facility,
            cost_service,
            cost_penalty,
        }
    }

    pub fn total(&self) -> Money {
        self.cost_facility + self.cost_service + self.cost_penalty
    }

    /// Service plus penalty cost.
    pub fn variable_cost(&self) -> Money {
        self.cost_service + self.cost_penalty
    }

    pub fn load(&self, facility: usize) -> Units {
        self.served[facility].iter().sum()
    }

    /// Checks conservation, capacity and closed-facility constraints.
    pub fn check(&self, inst: &Instance) -> Result<(), AssignmentError> {
        let nf = inst.num_facilities();
        let nc = inst.num_clients();
        if let Some(bad) = self.open_set.iter().find(|&s| s >= nf) {
            return Err(AssignmentError::UnknownFacility(bad));
        }
        if self.served.len() != nf || self.served.iter().any(|r| r.len() != nc) || self.penalized.len() != nc {
            return Err(AssignmentError::Shape);
        }
        for i in 0..nf {
            for j in 0..nc {
                if self.served[i][j] < 0 {
                    return Err(AssignmentError::Negative { facility: i, client: j });
                }
            }
            let load = self.load(i);
            if load > 0 && !self.open_set.contains(i) {
                return Err(AssignmentError::ClosedFacilityServes(i));
            }
            if load > inst.facilities[i].capacity {
                return Err(AssignmentError::CapacityExceeded {
                    facility: i,
                    load,
                    capacity: inst.facilities[i].capacity,
                });
            }
        }
        for (j, c) in inst.clients.iter().enumerate() {
            if self.penalized[j] < 0 {
                return Err(AssignmentError::Negative {
                    facility: nf,
                    client: j,
                });
            }
            let served: Units = (0..nf).map(|i| self.served[i][j]).sum();
            if served + self.penalized[j] != c.demand {
                return Err(AssignmentError::Conservation {
                    client: j,
                    served,
                    penalized: self.penalized[j],
                    demand: c.demand,
                });
            }
        }
        Ok(())
    }
}

/// Cheapest capacity-respecting assignment for a fixed open set.
pub fn assign(inst: &Instance, open_set: &OpenSet) -> Result<Assignment, FlowError> {
    let pn = build_penalty_network(inst, open_set)?;
    let result = min_cost_flow(&pn.network)?;
    Ok(decode(inst, open_set, &pn, &result))
}

/// Reads an [`Assignment`] off an optimal flow of the penalty network.
pub fn decode(inst: &Instance, open_set: &OpenSet, pn: &PenaltyNetwork, result: &FlowResult) -> Assignment {
    let mut served = vec![vec![0; inst.num_clients()]; inst.num_facilities()];
    for &(s, j, k) in &pn.layout.serve_arcs {
        served[s][j] = result.arc_flows[k];
    }
    let mut penalized = vec![0; inst.num_clients()];
    for &(j, k) in &pn.layout.penalty_arcs {
        penalized[j] = result.arc_flows[k];
    }
    Assignment::from_parts(inst, open_set.clone(), served, penalized)
}
