//! Problem data: facilities, clients, service costs, plus validation,
//! a seeded Euclidean generator and the JSON instance format.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Money, Units};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityMode {
    Uniform,
    Nonuniform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facility {
    pub id: usize,
    pub open_cost: Money,
    pub capacity: Units,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Client {
    pub id: usize,
    pub demand: Units,
    /// Charged per unit of unserved demand.
    pub penalty: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Instance {
    pub capacity_mode: CapacityMode,
    pub facilities: Vec<Facility>,
    pub clients: Vec<Client>,
    /// `service_cost[i][j]`: cost per unit of client `j` served by facility `i`.
    pub service_cost: Vec<Vec<Money>>,
}

impl Instance {
    pub fn num_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    #[inline]
    pub fn cost(&self, facility: usize, client: usize) -> Money {
        self.service_cost[facility][client]
    }

    pub fn total_demand(&self) -> Units {
        self.clients.iter().map(|c| c.demand).sum()
    }

    /// Cost of rejecting every unit of demand.
    pub fn all_penalty_cost(&self) -> Money {
        self.clients.iter().map(|c| c.demand * c.penalty).sum()
    }

    /// Facility-to-facility distance implied by the bipartite metric:
    /// `min_j (c_sj + c_tj)`, zero on the diagonal. Upper-bounds any
    /// reroute cost `c_tk - c_sk` by the metric inequality.
    pub fn facility_distance(&self, s: usize, t: usize) -> Money {
        if s == t {
            return 0;
        }
        (0..self.num_clients())
            .map(|j| self.cost(s, j) + self.cost(t, j))
            .min()
            .unwrap_or(0)
    }

    /// All pairwise [`Instance::facility_distance`] values.
    pub fn facility_distances(&self) -> Vec<Vec<Money>> {
        let n = self.num_facilities();
        (0..n)
            .map(|s| (0..n).map(|t| self.facility_distance(s, t)).collect())
            .collect()
    }

    /// Checks every stated instance invariant. Pure; never fails.
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn to_json(&self) -> String {
        serialize(self)
    }

    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        parse(text)
    }
}

/// Sorted set of facility indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct OpenSet(Vec<usize>);

impl OpenSet {
    pub fn empty() -> Self {
        OpenSet(Vec::new())
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        OpenSet(v)
    }

    /// Subset of `0..n` selected by the bits of `mask`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        OpenSet((0..n).filter(|&i| mask >> i & 1 == 1).collect())
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn with(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&i) {
            v.insert(pos, i);
        }
        OpenSet(v)
    }

    pub fn without(&self, i: usize) -> Self {
        OpenSet(self.0.iter().copied().filter(|&x| x != i).collect())
    }

    /// Facilities in `0..n` not in the set.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| !self.contains(i)).collect()
    }
}

impl From<Vec<usize>> for OpenSet {
    fn from(v: Vec<usize>) -> Self {
        OpenSet::from_indices(v)
    }
}

impl From<OpenSet> for Vec<usize> {
    fn from(s: OpenSet) -> Self {
        s.0
    }
}

impl fmt::Display for OpenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativeOpenCost,
    NegativeCapacity,
    NegativeDemand,
    NegativePenalty,
    NegativeServiceCost,
    NonMetric,
    NonuniformCapacity,
    ShapeMismatch,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::NegativeOpenCost => "negative_open_cost",
            ViolationKind::NegativeCapacity => "negative_capacity",
            ViolationKind::NegativeDemand => "negative_demand",
            ViolationKind::NegativePenalty => "negative_penalty",
            ViolationKind::NegativeServiceCost => "negative_service_cost",
            ViolationKind::NonMetric => "non_metric",
            ViolationKind::NonuniformCapacity => "nonuniform_capacity",
            ViolationKind::ShapeMismatch => "shape_mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub indices: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.as_str(), self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[allow(clippy::needless_range_loop)]
pub fn validate(inst: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |kind, indices: Vec<usize>, detail: String| violations.push(Violation { kind, indices, detail });

    for (i, f) in inst.facilities.iter().enumerate() {
        if f.open_cost < 0 {
            push(
                ViolationKind::NegativeOpenCost,
                vec![i],
                format!("facility {i} has open_cost {}", f.open_cost),
            );
        }
        if f.capacity < 0 {
            push(
                ViolationKind::NegativeCapacity,
                vec![i],
                format!("facility {i} has capacity {}", f.capacity),
            );
        }
    }
    for (j, c) in inst.clients.iter().enumerate() {
        if c.demand < 0 {
            push(
                ViolationKind::NegativeDemand,
                vec![j],
                format!("client {j} has demand {}", c.demand),
            );
        }
        if c.penalty < 0 {
            push(
                ViolationKind::NegativePenalty,
                vec![j],
                format!("client {j} has penalty {}", c.penalty),
            );
        }
    }
    if inst.capacity_mode == CapacityMode::Uniform {
        if let Some(first) = inst.facilities.first() {
            for (i, f) in inst.facilities.iter().enumerate().skip(1) {
                if f.capacity != first.capacity {
                    push(
                        ViolationKind::NonuniformCapacity,
                        vec![0, i],
                        format!(
                            "uniform mode but facility {i} has capacity {} != {}",
                            f.capacity, first.capacity
                        ),
                    );
                }
            }
        }
    }

    let nf = inst.num_facilities();
    let nc = inst.num_clients();
    let shape_ok = inst.service_cost.len() == nf && inst.service_cost.iter().all(|r| r.len() == nc);
    if !shape_ok {
        push(
            ViolationKind::ShapeMismatch,
            vec![],
            format!("service_cost must be {nf}x{nc}, got {} rows", inst.service_cost.len()),
        );
    } else {
        let c = &inst.service_cost;
        for i in 0..nf {
            for j in 0..nc {
                if c[i][j] < 0 {
                    push(
                        ViolationKind::NegativeServiceCost,
                        vec![i, j],
                        format!("c[{i}][{j}] = {}", c[i][j]),
                    );
                }
            }
        }
        // c[i][j] <= c[i][j'] + c[i'][j'] + c[i'][j] for every 4-tuple.
        for i in 0..nf {
            for j in 0..nc {
                for i2 in 0..nf {
                    for j2 in 0..nc {
                        let rhs = c[i][j2] + c[i2][j2] + c[i2][j];
                        if c[i][j] > rhs {
                            push(
                                ViolationKind::NonMetric,
                                vec![i, j, i2, j2],
                                format!(
                                    "c[{i}][{j}]={} > c[{i}][{j2}]+c[{i2}][{j2}]+c[{i2}][{j}]={rhs}",
                                    c[i][j]
                                ),
                            );
                        }
                    }
                }
            }
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

// ---------------------------------------------------------------------------
// Generation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum CapacityProfile {
    Uniform { capacity: Units },
    Random { lo: Units, hi: Units },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_facilities: usize,
    pub n_clients: usize,
    /// Points are drawn from the integer grid `[0, grid]^2`.
    pub grid: i64,
    /// Demands are drawn from `1..=demand_max`.
    pub demand_max: Units,
    pub penalty_max: Money,
    /// Upper bound for opening costs and for service costs (the grid
    /// diagonal maps to this value).
    pub cost_max: Money,
    pub capacity: CapacityProfile,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n_facilities: 5,
            n_clients: 6,
            grid: 100,
            demand_max: 8,
            penalty_max: 100 * crate::MICROS,
            cost_max: 100 * crate::MICROS,
            capacity: CapacityProfile::Uniform { capacity: 10 },
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

/// Random instance on an integer grid with Euclidean service costs.
///
/// Costs are `ceil(scale * distance)`, followed by a shortest-path closure
/// over the bipartite facility/client graph so the integer matrix is exactly
/// metric. Deterministic in `seed`.
pub fn generate_euclidean(params: &GeneratorParams, seed: u64) -> Result<Instance, GenerateError> {
    let bad = |m: &str| Err(GenerateError::InvalidParameter(m.to_string()));
    if params.n_facilities == 0 || params.n_clients == 0 {
        return bad("facility and client counts must be at least 1");
    }
    if params.grid < 1 {
        return bad("grid side must be at least 1");
    }
    if params.demand_max < 1 {
        return bad("demand_max must be at least 1");
    }
    if params.penalty_max < 0 || params.cost_max < 0 {
        return bad("money bounds must be non-negative");
    }
    let mode = match params.capacity {
        CapacityProfile::Uniform { capacity } if capacity >= 0 => CapacityMode::Uniform,
        CapacityProfile::Random { lo, hi } if 0 <= lo && lo <= hi => CapacityMode::Nonuniform,
        _ => return bad("capacity range must satisfy 0 <= lo <= hi"),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| (rng.random_range(0..=params.grid), rng.random_range(0..=params.grid));
    let fac_pts: Vec<(i64, i64)> = (0..params.n_facilities).map(|_| point(&mut rng)).collect();
    let cli_pts: Vec<(i64, i64)> = (0..params.n_clients).map(|_| point(&mut rng)).collect();

    let facilities = (0..params.n_facilities)
        .map(|id| {
            let open_cost = rng.random_range(0..=params.cost_max);
            let capacity = match params.capacity {
                CapacityProfile::Uniform { capacity } => capacity,
                CapacityProfile::Random { lo, hi } => rng.random_range(lo..=hi),
            };
            Facility {
                id,
                open_cost,
                capacity,
            }
        })
        .collect();
    let clients = (0..params.n_clients)
        .map(|id| Client {
            id,
            demand: rng.random_range(1..=params.demand_max),
            penalty: rng.random_range(0..=params.penalty_max),
        })
        .collect();

    let diag = (params.grid as f64) * std::f64::consts::SQRT_2;
    let scale = params.cost_max as f64 / diag;
    let mut service_cost: Vec<Vec<Money>> = fac_pts
        .iter()
        .map(|&(fx, fy)| {
            cli_pts
                .iter()
                .map(|&(cx, cy)| {
                    let (dx, dy) = ((fx - cx) as f64, (fy - cy) as f64);
                    ((dx * dx + dy * dy).sqrt() * scale).ceil() as Money
                })
                .collect()
        })
        .collect();
    metric_closure(&mut service_cost);

    Ok(Instance {
        capacity_mode: mode,
        facilities,
        clients,
        service_cost,
    })
}

/// Replaces every entry by the shortest facility-client path length in the
/// bipartite graph the matrix defines.
pub fn metric_closure(cost: &mut [Vec<Money>]) {
    let nf = cost.len();
    let nc = cost.first().map_or(0, Vec::len);
    let n = nf + nc;
    let inf = Money::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0;
    }
    for i in 0..nf {
        for j in 0..nc {
            d[i][nf + j] = cost[i][j];
            d[nf + j][i] = cost[i][j];
        }
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                let via = d[a][k] + d[k][b];
                if via < d[a][b] {
                    d[a][b] = via;
                }
            }
        }
    }
    for i in 0..nf {
        for j in 0..nc {
            cost[i][j] = d[i][nf + j];
        }
    }
}

// ---------------------------------------------------------------------------
// JSON format

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{record}: missing field `{field}`")]
    MissingField { record: String, field: &'static str },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: usize },
    #[error("{kind} id {id} out of range (ids must be dense 0..{count})")]
    IdOutOfRange {
        kind: &'static str,
        id: usize,
        count: usize,
    },
    #[error("service_cost shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Deserialize)]
struct RawInstance {
    capacity_mode: Option<CapacityMode>,
    facilities: Option<Vec<RawFacility>>,
    clients: Option<Vec<RawClient>>,
    service_cost: Option<Vec<Vec<Money>>>,
}

#[derive(Deserialize)]
struct RawFacility {
    id: Option<usize>,
    open_cost: Option<Money>,
    capacity: Option<Units>,
}

#[derive(Deserialize)]
struct RawClient {
    id: Option<usize>,
    demand: Option<Units>,
    penalty: Option<Money>,
}

fn require<T>(v: Option<T>, record: impl FnOnce() -> String, field: &'static str) -> Result<T, ParseError> {
    v.ok_or_else(|| ParseError::MissingField {
        record: record(),
        field,
    })
}

/// Places each record at the index given by its id.
fn order_by_id<T>(kind: &'static str, items: Vec<(usize, T)>) -> Result<Vec<T>, ParseError> {
    let count = items.len();
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    for (id, item) in items {
        if id >= count {
            return Err(ParseError::IdOutOfRange { kind, id, count });
        }
        if slots[id].is_some() {
            return Err(ParseError::DuplicateId { kind, id });
        }
        slots[id] = Some(item);
    }
    // Every slot is filled: `count` distinct ids in `0..count`.
    Ok(slots.into_iter().map(Option::unwrap).collect())
}

pub fn parse(text: &str) -> Result<Instance, ParseError> {
    let raw: RawInstance = serde_json::from_str(text).map_err(|e| ParseError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let top = || "instance".to_string();
    let capacity_mode = require(raw.capacity_mode, top, "capacity_mode")?;

    let mut facilities = Vec::new();
    for (k, f) in require(raw.facilities, top, "facilities")?.into_iter().enumerate() {
        let rec = || format!("facility record {k}");
        let id = require(f.id, rec, "id")?;
        facilities.push((
            id,
            Facility {
                id,
                open_cost: require(f.open_cost, rec, "open_cost")?,
                capacity: require(f.capacity, rec, "capacity")?,
            },
        ));
    }
    let mut clients = Vec::new();
    for (k, c) in require(raw.clients, top, "clients")?.into_iter().enumerate() {
        let rec = || format!("client record {k}");
        let id = require(c.id, rec, "id")?;
        clients.push((
            id,
            Client {
                id,
                demand: require(c.demand, rec, "demand")?,
                penalty: require(c.penalty, rec, "penalty")?,
            },
        ));
    }
    let facilities = order_by_id("facility", facilities)?;
    let clients = order_by_id("client", clients)?;

    let service_cost = require(raw.service_cost, top, "service_cost")?;
    if service_cost.len() != facilities.len() {
        return Err(ParseError::ShapeMismatch(format!(
            "expected {} rows (one per facility), got {}",
            facilities.len(),
            service_cost.len()
        )));
    }
    for (i, row) in service_cost.iter().enumerate() {
        if row.len() != clients.len() {
            return Err(ParseError::ShapeMismatch(format!(
                "row {i} has {} entries, expected {} (one per client)",
                row.len(),
                clients.len()
            )));
        }
    }

    Ok(Instance {
        capacity_mode,
        facilities,
        clients,
        service_cost,
    })
}

pub fn serialize(inst: &Instance) -> String {
    serde_json::to_string_pretty(inst).expect("instance serialization cannot fail")
}
