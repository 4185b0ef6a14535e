//! The two-route network and its bridged five-road extension.
//!
//! Roads `a` and `d` are copies of one template, as are `b` and `c`. Route
//! `alpha` is `(a, b)`, `beta` is `(c, d)`, and the bridge `e` adds
//! `gamma = (a, e, d)`. Partitions of the bridged network are written
//! `(θ₁, θ₂, 1 − θ₁ − θ₂)` for `(alpha, beta, gamma)`.

use rayon::prelude::*;

use crate::equilibria::{is_local_nash, NashCheck, DEFAULT_EPSILON, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::network::{Demand, FlowPartition, Network, Road, RoadBehavior, Route};
use crate::numeric;

pub const ALPHA: usize = 0;
pub const BETA: usize = 1;
pub const GAMMA: usize = 2;

/// Strictness margin for the paradox chain.
pub const PARADOX_MARGIN: f64 = 1e-12;
pub const DEFAULT_UNIQUENESS_GRID: usize = 1001;

/// Length and behavior shared by a pair of roads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadTemplate {
    pub length: f64,
    pub behavior: RoadBehavior,
}

impl RoadTemplate {
    pub fn new(length: f64, behavior: RoadBehavior) -> Self {
        RoadTemplate { length, behavior }
    }

    fn road(&self, id: &str) -> Result<Road> {
        Road::new(id, self.length, self.behavior)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BraessScenario {
    outer: RoadTemplate,
    inner: RoadTemplate,
    bridge: RoadTemplate,
    demand: Demand,
    base: Network,
    augmented: Network,
}

impl BraessScenario {
    /// `outer` is the template of roads `a` and `d`, `inner` of `b` and `c`.
    pub fn new(outer: RoadTemplate, inner: RoadTemplate, bridge: RoadTemplate, demand: Demand) -> Result<Self> {
        let base = Network::new(
            vec![outer.road("a")?, inner.road("b")?, inner.road("c")?, outer.road("d")?],
            vec![Route::new("alpha", ["a", "b"]), Route::new("beta", ["c", "d"])],
            demand,
        )?;
        let mut roads = base.roads().to_vec();
        roads.push(bridge.road("e")?);
        let mut routes = base.routes().to_vec();
        routes.push(Route::new("gamma", ["a", "e", "d"]));
        let augmented = Network::new(roads, routes, demand)?;
        Ok(BraessScenario {
            outer,
            inner,
            bridge,
            demand,
            base,
            augmented,
        })
    }

    /// Log flux `ln(1 + ρ)` on `a, d`, speed `v` on `b, c`, speed
    /// `v_bridge` on `e`, unit lengths, inflow `phi`.
    pub fn log_linear(v: f64, v_bridge: f64, phi: f64) -> Result<Self> {
        use crate::flux::FluxModel;
        Self::new(
            RoadTemplate::new(1.0, RoadBehavior::StationaryFlow(FluxModel::log(1.0)?)),
            RoadTemplate::new(1.0, RoadBehavior::StationaryFlow(FluxModel::linear(v)?)),
            RoadTemplate::new(1.0, RoadBehavior::StationaryFlow(FluxModel::linear(v_bridge)?)),
            Demand::Inflow(phi),
        )
    }

    pub fn outer(&self) -> RoadTemplate {
        self.outer
    }

    pub fn inner(&self) -> RoadTemplate {
        self.inner
    }

    pub fn bridge(&self) -> RoadTemplate {
        self.bridge
    }

    pub fn demand(&self) -> Demand {
        self.demand
    }

    /// The four-road network without the bridge.
    pub fn base(&self) -> &Network {
        &self.base
    }

    /// The five-road network with the bridge.
    pub fn augmented(&self) -> &Network {
        &self.augmented
    }

    pub fn with_bridge(&self, behavior: RoadBehavior) -> Result<Self> {
        Self::new(
            self.outer,
            self.inner,
            RoadTemplate::new(self.bridge.length, behavior),
            self.demand,
        )
    }

    pub fn with_inner(&self, behavior: RoadBehavior) -> Result<Self> {
        Self::new(
            self.outer,
            RoadTemplate::new(self.inner.length, behavior),
            self.bridge,
            self.demand,
        )
    }

    pub fn with_demand(&self, demand: Demand) -> Result<Self> {
        Self::new(self.outer, self.inner, self.bridge, demand)
    }

    /// Time on road `a` (or `d`) when it carries `share` of the demand.
    pub fn outer_time(&self, share: f64) -> Result<f64> {
        self.augmented.roads()[0].travel_time(self.demand.amount() * share)
    }

    /// Time on road `b` (or `c`) when it carries `share` of the demand.
    pub fn inner_time(&self, share: f64) -> Result<f64> {
        self.augmented.roads()[1].travel_time(self.demand.amount() * share)
    }

    /// Time on the bridge `e` when it carries `share` of the demand.
    pub fn bridge_time(&self, share: f64) -> Result<f64> {
        self.augmented.roads()[4].travel_time(self.demand.amount() * share)
    }

    /// Route times `(τ_α, τ_β, τ_γ)` on the bridged network at `(θ₁, θ₂)`.
    pub fn route_times(&self, theta1: f64, theta2: f64) -> Result<[f64; 3]> {
        let p = FlowPartition::with_remainder(&[theta1, theta2])?;
        let t = self.augmented.route_travel_times(&p)?;
        Ok([t[ALPHA], t[BETA], t[GAMMA]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BraessReport {
    /// `(τ_α(½,½), τ_γ(0,0), τ_α(0,0))`
    pub bounds: (f64, f64, f64),
    pub paradox: bool,
    /// The chain holds only up to [`PARADOX_MARGIN`].
    pub marginal: bool,
    /// `τ_a` or `τ_b` varies with load.
    pub hypothesis_met: bool,
    /// Optimal time of the four-road network, reached at the even split.
    pub base_optimum_time: f64,
    /// Time of the all-on-gamma state of the bridged network.
    pub augmented_nash_time: f64,
    pub degradation: f64,
    /// `(0, 0, 1)` when the paradox holds.
    pub nash_partition: Option<FlowPartition>,
}

/// Evaluates the three-term chain `τ_α(½,½) < τ_γ(0,0) < τ_α(0,0)`.
pub fn braess_condition(s: &BraessScenario) -> Result<BraessReport> {
    let half = s.route_times(0.5, 0.5)?;
    let corner = s.route_times(0.0, 0.0)?;
    let bounds = (half[ALPHA], corner[GAMMA], corner[ALPHA]);
    let strict = bounds.0 + PARADOX_MARGIN < bounds.1 && bounds.1 + PARADOX_MARGIN < bounds.2;
    let weak = bounds.0 <= bounds.1 + PARADOX_MARGIN && bounds.1 <= bounds.2 + PARADOX_MARGIN;
    let hypothesis_met = s.outer_time(0.0)? != s.outer_time(1.0)? || s.inner_time(0.0)? != s.inner_time(1.0)?;
    let paradox = strict && hypothesis_met;
    Ok(BraessReport {
        bounds,
        paradox,
        marginal: weak && !strict,
        hypothesis_met,
        base_optimum_time: bounds.0,
        augmented_nash_time: bounds.1,
        degradation: bounds.1 - bounds.0,
        nash_partition: paradox.then(|| FlowPartition::vertex(3, GAMMA)),
    })
}

/// The paradox chain for [`BraessScenario::log_linear`] in closed form:
/// `((e^φ − 1)/φ, 1/V − 1/ṽ, (2/φ)(e^φ − e^{φ/2}))`.
pub fn reduced_bounds(v: f64, v_bridge: f64, phi: f64) -> Result<(f64, f64, f64)> {
    for (what, value) in [("inner speed", v), ("bridge speed", v_bridge), ("inflow", phi)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Domain {
                what,
                value,
                range: "(0, inf)".into(),
            });
        }
    }
    let cap = 2f64.ln().min(v).min(v_bridge);
    if phi > cap {
        return Err(Error::Domain {
            what: "inflow",
            value: phi,
            range: format!("(0, {cap}]"),
        });
    }
    Ok((
        phi.exp_m1() / phi,
        1.0 / v - 1.0 / v_bridge,
        2.0 / phi * (phi.exp() - (0.5 * phi).exp()),
    ))
}

pub fn reduced_braess_inequality(v: f64, v_bridge: f64, phi: f64) -> Result<bool> {
    let (lo, mid, hi) = reduced_bounds(v, v_bridge, phi)?;
    Ok(lo < mid && mid < hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCertificate {
    pub grid: usize,
    /// Diagonal shares `θ ∈ (0, ½)` where `τ_b(θ) − τ_a(1−θ) = τ_e(1−2θ)`.
    pub interior_roots: Vec<f64>,
    /// Smallest value of `τ_b(θ) − τ_a(1−θ) − τ_e(1−2θ)` on the grid.
    pub min_gap: f64,
    /// Nash tests at `(1, 0, 0)` and `(0, 1, 0)`.
    pub corners: Vec<(FlowPartition, NashCheck)>,
    pub corners_rejected: bool,
    /// No interior diagonal root and both corners rejected. Off-diagonal
    /// equilibria are not examined.
    pub unique: bool,
}

/// Checks the symmetric diagonal and the two pure corners for competing
/// equilibria of the bridged network.
pub fn nash_uniqueness_certificate(s: &BraessScenario, grid: usize) -> Result<UniquenessCertificate> {
    let grid = grid.max(3);
    let gap = |theta: f64| -> Result<f64> {
        Ok(s.inner_time(theta)? - s.outer_time(1.0 - theta)? - s.bridge_time((1.0 - 2.0 * theta).max(0.0))?)
    };
    let xs: Vec<f64> = (0..grid).map(|k| 0.5 * k as f64 / (grid - 1) as f64).collect();
    let values: Vec<f64> = xs.par_iter().map(|&x| gap(x)).collect::<Result<_>>()?;

    let mut roots = Vec::new();
    for k in 1..grid - 1 {
        if values[k] == 0.0 {
            roots.push(xs[k]);
        }
    }
    for k in 0..grid - 1 {
        let (a, b) = (values[k], values[k + 1]);
        if a != 0.0 && b != 0.0 && a.signum() != b.signum() {
            roots.push(numeric::bisect(gap, xs[k], xs[k + 1], 1e-14)?);
        }
    }
    roots.retain(|&r| r > 0.0 && r < 0.5);
    roots.sort_by(f64::total_cmp);
    let min_gap = values.iter().copied().fold(f64::INFINITY, f64::min);

    let corners = [FlowPartition::vertex(3, ALPHA), FlowPartition::vertex(3, BETA)]
        .into_iter()
        .map(|p| {
            let check = is_local_nash(s.augmented(), &p, DEFAULT_EPSILON, DEFAULT_TOLERANCE)?;
            Ok((p, check))
        })
        .collect::<Result<Vec<_>>>()?;
    let corners_rejected = corners.iter().all(|(_, c)| !c.holds);

    Ok(UniquenessCertificate {
        grid,
        unique: roots.is_empty() && corners_rejected,
        interior_roots: roots,
        min_gap,
        corners,
        corners_rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intro() -> BraessScenario {
        BraessScenario::new(
            RoadTemplate::new(1.0, RoadBehavior::CountLatency { slope: 0.01, intercept: 0.0 }),
            RoadTemplate::new(1.0, RoadBehavior::CountLatency { slope: 0.0, intercept: 45.0 }),
            RoadTemplate::new(1.0, RoadBehavior::CountLatency { slope: 0.0, intercept: 0.0 }),
            Demand::Vehicles(4000.0),
        )
        .unwrap()
    }

    fn closed_form_bounds(v: f64, vt: f64, phi: f64) -> (f64, f64, f64) {
        let ta = |x: f64| (x * phi).exp_m1() / (x * phi);
        (ta(0.5) + 1.0 / v, 2.0 * ta(1.0) + 1.0 / vt, ta(1.0) + 1.0 / v)
    }

    #[test]
    fn log_linear_paradox() {
        let s = BraessScenario::log_linear(0.33, 0.5, 0.05).unwrap();
        let r = braess_condition(&s).unwrap();
        let expected = closed_form_bounds(0.33, 0.5, 0.05);
        assert!((r.bounds.0 - expected.0).abs() < 1e-12);
        assert!((r.bounds.1 - expected.1).abs() < 1e-12);
        assert!((r.bounds.2 - expected.2).abs() < 1e-12);
        assert!((r.bounds.0 - 4.042908).abs() < 1e-6);
        assert!((r.bounds.1 - 4.050844).abs() < 1e-6);
        assert!((r.bounds.2 - 4.055725).abs() < 1e-6);
        assert!(r.paradox && !r.marginal && r.degradation > 0.0);
        assert_eq!(r.nash_partition, Some(FlowPartition::vertex(3, GAMMA)));
    }

    #[test]
    fn intro_paradox() {
        let r = braess_condition(&intro()).unwrap();
        assert_eq!(r.bounds, (65.0, 80.0, 85.0));
        assert!(r.paradox);
        assert_eq!(r.degradation, 15.0);
    }

    #[test]
    fn equal_speeds_do_not_produce_the_paradox() {
        let s = BraessScenario::log_linear(0.33, 0.33, 0.05).unwrap();
        let r = braess_condition(&s).unwrap();
        assert!(!r.paradox);
        assert!(!reduced_braess_inequality(0.33, 0.33, 0.05).unwrap());
    }

    #[test]
    fn reduced_inequality_examples() {
        assert!(reduced_braess_inequality(0.33, 0.5, 0.05).unwrap());
        assert!(!reduced_braess_inequality(0.33, 0.34, 0.05).unwrap());
        let (lo, mid, hi) = reduced_bounds(0.33, 0.5, 0.05).unwrap();
        assert!((lo - 1.025422).abs() < 1e-6);
        assert!((mid - 1.030303).abs() < 1e-6);
        assert!((hi - 1.038239).abs() < 1e-6);
        assert!(reduced_braess_inequality(0.33, 0.5, 0.7).is_err());
        assert!(reduced_braess_inequality(0.0, 0.5, 0.05).is_err());
    }

    #[test]
    fn uniqueness_under_the_paradox() {
        let c = nash_uniqueness_certificate(&BraessScenario::log_linear(0.33, 0.5, 0.05).unwrap(), 1001).unwrap();
        assert!(c.unique && c.interior_roots.is_empty() && c.min_gap > 0.0);
        let c = nash_uniqueness_certificate(&intro(), 1001).unwrap();
        assert!(c.unique);
        assert_eq!(c.min_gap, 5.0);
    }

    #[test]
    fn interior_equilibrium_is_located() {
        // 1/V − 1/ṽ = 1.02 lies between τ_a(½) and τ_a(1), so the diagonal
        // gap changes sign inside (0, ½).
        let v = 1.0 / 3.02;
        let s = BraessScenario::log_linear(v, 0.5, 0.05).unwrap();
        let c = nash_uniqueness_certificate(&s, 1001).unwrap();
        assert_eq!(c.interior_roots.len(), 1);
        assert!(!c.unique);
        let root = c.interior_roots[0];
        // τ_a(1 − θ) = 1.02 in closed form: (e^{(1−θ)φ} − 1)/((1−θ)φ) = 1.02
        let h = |x: f64| (x * 0.05).exp_m1() / (x * 0.05) - 1.02;
        let x = numeric::bisect(|x| Ok(h(x)), 0.5, 1.0, 1e-15).unwrap();
        assert!((root - (1.0 - x)).abs() < 1e-10);
    }
}
