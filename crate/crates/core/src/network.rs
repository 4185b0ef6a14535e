//! Roads, routes, the road/route incidence and route-level travel times.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::flux::{road_travel_time, FluxModel, DEFAULT_VALIDATION_GRID};
use crate::numeric;

/// Shares within this distance of 0 count as unused routes.
pub const SHARE_SNAP: f64 = 1e-12;
/// Allowed deviation of a partition's sum from 1.
pub const PARTITION_SUM_TOLERANCE: f64 = 1e-9;
const QUADRATURE_TOLERANCE: f64 = 1e-10;

/// How a road turns its load into a travel time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoadBehavior {
    /// Stationary LWR flow; the load is a flow and must not exceed `q(1)`.
    StationaryFlow(FluxModel),
    /// `slope·n + intercept` for `n` vehicles on the road.
    CountLatency { slope: f64, intercept: f64 },
    /// A constant travel time imposed from outside, whatever the load.
    Pinned { time: f64 },
}

/// Which demand unit a behavior understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadKind {
    Flow,
    Count,
}

impl RoadBehavior {
    fn load_kind(&self) -> Option<LoadKind> {
        match self {
            RoadBehavior::StationaryFlow(_) => Some(LoadKind::Flow),
            RoadBehavior::CountLatency { .. } => Some(LoadKind::Count),
            RoadBehavior::Pinned { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: String,
    pub length: f64,
    pub behavior: RoadBehavior,
}

impl Road {
    pub fn new(id: impl Into<String>, length: f64, behavior: RoadBehavior) -> Result<Self> {
        let road = Road {
            id: id.into(),
            length,
            behavior,
        };
        road.check()?;
        Ok(road)
    }

    fn check(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::validation(format!(
                "road `{}` has non-positive length {}",
                self.id, self.length
            )));
        }
        match self.behavior {
            RoadBehavior::StationaryFlow(model) => {
                let report = model.validate(DEFAULT_VALIDATION_GRID);
                if !report.passed {
                    let v = &report.violations[0];
                    return Err(Error::validation(format!(
                        "road `{}`: flux fails `{}` at density {} (value {})",
                        self.id, v.condition, v.density, v.value
                    )));
                }
            }
            RoadBehavior::CountLatency { slope, intercept } => {
                if !(slope.is_finite() && slope >= 0.0 && intercept.is_finite() && intercept >= 0.0)
                {
                    return Err(Error::validation(format!(
                        "road `{}`: count latency needs finite slope >= 0 and intercept >= 0",
                        self.id
                    )));
                }
            }
            RoadBehavior::Pinned { time } => {
                if !(time.is_finite() && time >= 0.0) {
                    return Err(Error::validation(format!(
                        "road `{}`: pinned time must be finite and >= 0",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest load the road can carry in the free phase.
    pub fn capacity(&self) -> f64 {
        match self.behavior {
            RoadBehavior::StationaryFlow(m) => m.capacity(),
            _ => f64::INFINITY,
        }
    }

    fn tag(&self, e: Error) -> Error {
        match e {
            Error::CapacityExceeded { flow, capacity, .. } => Error::CapacityExceeded {
                road: Some(self.id.clone()),
                flow,
                capacity,
            },
            other => other,
        }
    }

    /// Travel time when the road carries `load` (flow or vehicle count).
    pub fn travel_time(&self, load: f64) -> Result<f64> {
        match self.behavior {
            RoadBehavior::StationaryFlow(m) => {
                road_travel_time(self.length, &m, load).map_err(|e| self.tag(e))
            }
            RoadBehavior::CountLatency { slope, intercept } => Ok(slope * load + intercept),
            RoadBehavior::Pinned { time } => Ok(time),
        }
    }

    /// Derivative of [`Road::travel_time`] with respect to the load.
    pub fn travel_time_slope(&self, load: f64) -> Result<f64> {
        match self.behavior {
            RoadBehavior::StationaryFlow(m) => m
                .inverse_speed_slope(load)
                .map(|s| self.length * s)
                .map_err(|e| self.tag(e)),
            RoadBehavior::CountLatency { slope, .. } => Ok(slope),
            RoadBehavior::Pinned { .. } => Ok(0.0),
        }
    }

    /// `∫₀^load τ(s) ds`, the road's contribution to the Beckmann potential.
    pub fn potential(&self, load: f64) -> Result<f64> {
        match self.behavior {
            RoadBehavior::StationaryFlow(_) => {
                if load > self.capacity() * (1.0 + 1e-12) || load < 0.0 {
                    return Err(self.tag(Error::CapacityExceeded {
                        road: None,
                        flow: load,
                        capacity: self.capacity(),
                    }));
                }
                numeric::integrate(|s| self.travel_time(s), 0.0, load, QUADRATURE_TOLERANCE)
            }
            RoadBehavior::CountLatency { slope, intercept } => {
                Ok(0.5 * slope * load * load + intercept * load)
            }
            RoadBehavior::Pinned { time } => Ok(time * load),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: String,
    pub roads: Vec<String>,
}

impl Route {
    pub fn new<S: Into<String>>(id: impl Into<String>, roads: impl IntoIterator<Item = S>) -> Self {
        Route {
            id: id.into(),
            roads: roads.into_iter().map(Into::into).collect(),
        }
    }
}

/// Total demand entering the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Demand {
    /// Stationary inflow `φ` (flow units).
    Inflow(f64),
    /// Number of vehicles `m`.
    Vehicles(f64),
}

impl Demand {
    pub fn amount(&self) -> f64 {
        match *self {
            Demand::Inflow(v) | Demand::Vehicles(v) => v,
        }
    }

    fn kind(&self) -> LoadKind {
        match self {
            Demand::Inflow(_) => LoadKind::Flow,
            Demand::Vehicles(_) => LoadKind::Count,
        }
    }

    pub fn with_amount(&self, amount: f64) -> Demand {
        match self {
            Demand::Inflow(_) => Demand::Inflow(amount),
            Demand::Vehicles(_) => Demand::Vehicles(amount),
        }
    }
}

/// How the demand splits across routes: one share per route, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPartition {
    shares: Vec<f64>,
}

impl FlowPartition {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::validation("partition has no shares"));
        }
        let mut shares = shares;
        for s in shares.iter_mut() {
            if !s.is_finite() || *s < -SHARE_SNAP || *s > 1.0 + SHARE_SNAP {
                return Err(Error::validation(format!("share {s} is outside [0, 1]")));
            }
            *s = s.clamp(0.0, 1.0);
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > PARTITION_SUM_TOLERANCE {
            return Err(Error::validation(format!("shares sum to {sum}, not 1")));
        }
        Ok(FlowPartition { shares })
    }

    /// Builds a partition from the first `k − 1` shares; the last route gets
    /// the remainder.
    pub fn with_remainder(leading: &[f64]) -> Result<Self> {
        let rest = 1.0 - leading.iter().sum::<f64>();
        let mut shares = leading.to_vec();
        shares.push(if rest.abs() <= SHARE_SNAP { 0.0 } else { rest });
        Self::new(shares)
    }

    /// All demand on route `index` out of `routes`.
    pub fn vertex(routes: usize, index: usize) -> Self {
        let mut shares = vec![0.0; routes];
        shares[index] = 1.0;
        FlowPartition { shares }
    }

    pub fn uniform(routes: usize) -> Self {
        FlowPartition {
            shares: vec![1.0 / routes as f64; routes],
        }
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    /// Copy with shares below [`SHARE_SNAP`] set to exactly 0.
    pub fn snapped(&self) -> Self {
        FlowPartition {
            shares: self
                .shares
                .iter()
                .map(|&s| if s <= SHARE_SNAP { 0.0 } else { s })
                .collect(),
        }
    }

    pub fn is_used(&self, route: usize) -> bool {
        self.shares[route] > SHARE_SNAP
    }
}

/// A single-origin, single-destination road network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    roads: Vec<Road>,
    routes: Vec<Route>,
    /// For each route, indices into `roads`.
    route_roads: Vec<Vec<usize>>,
    demand: Demand,
}

impl Network {
    pub fn new(roads: Vec<Road>, routes: Vec<Route>, demand: Demand) -> Result<Self> {
        if roads.is_empty() || routes.is_empty() {
            return Err(Error::validation("a network needs at least one road and one route"));
        }
        let mut ids = HashSet::new();
        for road in &roads {
            road.check()?;
            if !ids.insert(road.id.as_str()) {
                return Err(Error::validation(format!("duplicate road id `{}`", road.id)));
            }
        }

        let kinds: HashSet<LoadKind> = roads.iter().filter_map(|r| r.behavior.load_kind()).collect();
        if kinds.len() > 1 {
            return Err(Error::validation(
                "network mixes stationary-flow and count-latency roads",
            ));
        }
        if let Some(&kind) = kinds.iter().next() {
            if kind != demand.kind() {
                return Err(Error::validation(match kind {
                    LoadKind::Flow => "stationary-flow roads need an inflow demand",
                    LoadKind::Count => "count-latency roads need a vehicle-count demand",
                }));
            }
        }
        let amount = demand.amount();
        if !(amount.is_finite() && amount > 0.0) {
            return Err(Error::validation(format!("demand must be finite and > 0, got {amount}")));
        }

        let mut route_ids = HashSet::new();
        let mut route_roads = Vec::with_capacity(routes.len());
        for route in &routes {
            if !route_ids.insert(route.id.as_str()) {
                return Err(Error::validation(format!("duplicate route id `{}`", route.id)));
            }
            if route.roads.is_empty() {
                return Err(Error::validation(format!("route `{}` has no roads", route.id)));
            }
            let mut seen = HashSet::new();
            let mut indices = Vec::with_capacity(route.roads.len());
            for id in &route.roads {
                let idx = roads.iter().position(|r| &r.id == id).ok_or_else(|| {
                    Error::validation(format!("route `{}` uses unknown road `{id}`", route.id))
                })?;
                if !seen.insert(idx) {
                    return Err(Error::validation(format!(
                        "route `{}` visits road `{id}` twice",
                        route.id
                    )));
                }
                indices.push(idx);
            }
            route_roads.push(indices);
        }

        let net = Network {
            roads,
            routes,
            route_roads,
            demand,
        };
        let bound = net.max_uniform_inflow();
        if amount > bound * (1.0 + 1e-12) {
            return Err(Error::CapacityExceeded {
                road: net
                    .roads
                    .iter()
                    .find(|r| r.capacity() == bound)
                    .map(|r| r.id.clone()),
                flow: amount,
                capacity: bound,
            });
        }
        Ok(net)
    }

    pub fn roads(&self) -> &[Road] {
        &self.roads
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn demand(&self) -> Demand {
        self.demand
    }

    pub fn route_count(&self) -> usize {
        self.routes.len()
    }

    pub fn road_index(&self, id: &str) -> Option<usize> {
        self.roads.iter().position(|r| r.id == id)
    }

    pub fn route_index(&self, id: &str) -> Option<usize> {
        self.routes.iter().position(|r| r.id == id)
    }

    /// `Γ` with `Γ[i][j] = 1` iff road `i` lies on route `j`.
    pub fn incidence(&self) -> Vec<Vec<u8>> {
        let mut gamma = vec![vec![0u8; self.routes.len()]; self.roads.len()];
        for (j, roads) in self.route_roads.iter().enumerate() {
            for &i in roads {
                gamma[i][j] = 1;
            }
        }
        gamma
    }

    /// Same network with one road's behavior replaced.
    pub fn with_road_behavior(&self, road: &str, behavior: RoadBehavior) -> Result<Self> {
        let idx = self
            .road_index(road)
            .ok_or_else(|| Error::validation(format!("unknown road `{road}`")))?;
        let mut roads = self.roads.clone();
        roads[idx].behavior = behavior;
        Network::new(roads, self.routes.clone(), self.demand)
    }

    pub fn with_demand(&self, demand: Demand) -> Result<Self> {
        Network::new(self.roads.clone(), self.routes.clone(), demand)
    }

    /// Largest demand for which every partition is feasible: the smallest
    /// road capacity (infinite when no road has one).
    pub fn max_uniform_inflow(&self) -> f64 {
        self.roads
            .iter()
            .map(Road::capacity)
            .fold(f64::INFINITY, f64::min)
    }

    fn check_partition(&self, theta: &FlowPartition) -> Result<()> {
        if theta.len() != self.routes.len() {
            return Err(Error::PartitionMismatch {
                expected: self.routes.len(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Fraction `Γ_i·θ` of the demand on each road.
    pub fn road_shares(&self, theta: &FlowPartition) -> Result<Vec<f64>> {
        self.check_partition(theta)?;
        let mut shares = vec![0.0; self.roads.len()];
        for (j, roads) in self.route_roads.iter().enumerate() {
            for &i in roads {
                shares[i] += theta.shares()[j];
            }
        }
        Ok(shares)
    }

    /// Load (flow or count) carried by each road.
    pub fn road_flows(&self, theta: &FlowPartition) -> Result<Vec<f64>> {
        let d = self.demand.amount();
        Ok(self.road_shares(theta)?.into_iter().map(|s| d * s).collect())
    }

    /// Per-road travel times at the loads induced by `theta`.
    pub fn road_times(&self, theta: &FlowPartition) -> Result<Vec<f64>> {
        self.road_flows(theta)?
            .iter()
            .zip(&self.roads)
            .map(|(&load, road)| road.travel_time(load))
            .collect()
    }

    /// `τ_j(θ) = Σ_i Γ_ij τ_i(Γ_i θ)` for every route `j`.
    pub fn route_travel_times(&self, theta: &FlowPartition) -> Result<Vec<f64>> {
        let road_times = self.road_times(theta)?;
        Ok(self
            .route_roads
            .iter()
            .map(|roads| roads.iter().map(|&i| road_times[i]).sum())
            .collect())
    }

    /// `T(θ) = Σ_j θ_j τ_j(θ)`.
    pub fn mean_global_travel_time(&self, theta: &FlowPartition) -> Result<f64> {
        let times = self.route_travel_times(theta)?;
        Ok(theta.shares().iter().zip(&times).map(|(s, t)| s * t).sum())
    }

    /// Gradient of `T` with respect to the route shares: the marginal cost
    /// `Σ_i Γ_ij (τ_i + l_i τ_i')` of each route.
    pub fn mean_time_gradient(&self, theta: &FlowPartition) -> Result<Vec<f64>> {
        let flows = self.road_flows(theta)?;
        let marginal: Vec<f64> = flows
            .iter()
            .zip(&self.roads)
            .map(|(&l, r)| Ok(r.travel_time(l)? + l * r.travel_time_slope(l)?))
            .collect::<Result<_>>()?;
        Ok(self
            .route_roads
            .iter()
            .map(|roads| roads.iter().map(|&i| marginal[i]).sum())
            .collect())
    }

    /// Beckmann potential `Σ_i ∫₀^{l_i} τ_i(s) ds`. Its gradient with
    /// respect to the route shares is the demand times the route times.
    pub fn beckmann_potential(&self, theta: &FlowPartition) -> Result<f64> {
        self.road_flows(theta)?
            .iter()
            .zip(&self.roads)
            .map(|(&l, r)| r.potential(l))
            .sum()
    }

    /// Evaluates route times on an unchecked share vector, as produced by
    /// the solvers (feasible up to rounding).
    pub(crate) fn route_times_raw(&self, shares: &[f64]) -> Result<Vec<f64>> {
        self.route_travel_times(&FlowPartition {
            shares: shares.to_vec(),
        })
    }

    pub(crate) fn mean_time_gradient_raw(&self, shares: &[f64]) -> Result<Vec<f64>> {
        self.mean_time_gradient(&FlowPartition {
            shares: shares.to_vec(),
        })
    }
}
