//! Constant-time control of the bridge road.
//!
//! Pinning the bridge to a constant travel time `τ̃` turns the bridged
//! network into a family indexed by `τ̃`. Two maps on the symmetric diagonal
//! `(θ, θ, 1 − 2θ)` connect the family to its equilibria and optima:
//!
//! * [`control_for_theta`] gives the `τ̃` that makes `(θ, θ)` an equilibrium;
//! * [`theta_for_control`] gives the diagonal share minimizing the mean time
//!   under a given `τ̃`.
//!
//! A fixed point `θ*` of their composition is both an equilibrium and a
//! global optimum of the controlled network; [`optimal_control`] locates it
//! and certifies both properties.

use rayon::prelude::*;

use crate::braess::{BraessScenario, ALPHA};
use crate::equilibria::{
    is_local_nash, random_partitions, social_optimum, EquilibriumOptions, NashCheck,
    DEFAULT_EPSILON, DEFAULT_SEED, DEFAULT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::network::{FlowPartition, RoadBehavior};
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    /// Points of the `[0, ½]` scan that brackets fixed points.
    pub scan_grid: usize,
    pub theta_tolerance: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Random partitions used for the optimality spot check.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions {
            scan_grid: 1001,
            theta_tolerance: 1e-10,
            epsilon: DEFAULT_EPSILON,
            tolerance: DEFAULT_TOLERANCE,
            samples: 1000,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub theta: f64,
    pub tilde_tau: f64,
    /// Mean time at `(θ, θ)` with the bridge pinned to `tilde_tau`.
    pub mean_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityCheck {
    pub passed: bool,
    pub samples: usize,
    /// `min T(θ) − T(θ*)` over the samples; non-negative when no sample
    /// beats the controlled point.
    pub worst_margin: f64,
    /// Mean time of the controlled network's social optimum, as found by
    /// the simplex solver.
    pub optimum_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    pub tilde_tau: f64,
    pub theta_star: f64,
    /// `ℓ̃ / τ̃`, or `None` when `τ̃ = 0` (no speed limit).
    pub equivalent_speed: Option<f64>,
    pub partition: FlowPartition,
    /// Equilibrium time at `(θ*, θ*)` on the controlled network.
    pub controlled_time: f64,
    pub mean_time: f64,
    /// Every fixed point found by the scan.
    pub fixed_points: Vec<FixedPoint>,
    pub nash: NashCheck,
    pub optimality: OptimalityCheck,
    pub certified: bool,
}

fn check_diagonal(theta: f64) -> Result<()> {
    if (0.0..=0.5).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "diagonal share",
            value: theta,
            range: "[0, 1/2]".into(),
        })
    }
}

/// The bridge time making `(θ, θ)` an equilibrium:
/// `max(τ_b(θ) − τ_a(1 − θ), 0)`.
pub fn control_for_theta(s: &BraessScenario, theta: f64) -> Result<f64> {
    check_diagonal(theta)?;
    Ok((s.inner_time(theta)? - s.outer_time(1.0 - theta)?).max(0.0))
}

/// `T(θ, θ) = 2(1 − θ)τ_a(1 − θ) + 2θτ_b(θ) + (1 − 2θ)τ̃`.
pub fn diagonal_mean_time(s: &BraessScenario, theta: f64, tilde_tau: f64) -> Result<f64> {
    Ok(2.0 * (1.0 - theta) * s.outer_time(1.0 - theta)?
        + 2.0 * theta * s.inner_time(theta)?
        + (1.0 - 2.0 * theta) * tilde_tau)
}

/// Diagonal share in `[0, ½]` minimizing the mean time when the bridge is
/// pinned to `tilde_tau`.
pub fn theta_for_control(s: &BraessScenario, tilde_tau: f64, tolerance: f64) -> Result<f64> {
    if !(tilde_tau.is_finite() && tilde_tau >= 0.0) {
        return Err(Error::Domain {
            what: "bridge time",
            value: tilde_tau,
            range: "[0, inf)".into(),
        });
    }
    numeric::golden_section_min(|t| diagonal_mean_time(s, t, tilde_tau), 0.0, 0.5, tolerance)
}

/// The scenario with the bridge pinned to `tilde_tau`.
pub fn controlled(s: &BraessScenario, tilde_tau: f64) -> Result<BraessScenario> {
    s.with_bridge(RoadBehavior::Pinned { time: tilde_tau })
}

/// The three one-sided differences whose positivity makes `(θ, θ)` a local
/// Nash point once the bridge is pinned to [`control_for_theta`]:
///
/// * `τ_b(θ+ε) − τ_b(θ) + τ_a(1−θ) − τ_a(1−θ−ε)`
/// * `τ_a(1−θ+ε) − τ_a(1−θ−ε) + τ_b(θ+ε) − τ_b(θ−ε)`
/// * `τ_a(1−θ+ε) − τ_a(1−θ)`
///
/// Entries whose arguments leave `[0, 1]` are `None`.
pub fn deviation_differences(s: &BraessScenario, theta: f64, epsilon: f64) -> Result<[Option<f64>; 3]> {
    let inside = |x: f64| (0.0..=1.0).contains(&x);
    let ta = |x: f64| s.outer_time(x);
    let tb = |x: f64| s.inner_time(x);
    let first = if inside(theta + epsilon) && inside(1.0 - theta - epsilon) {
        Some(tb(theta + epsilon)? - tb(theta)? + ta(1.0 - theta)? - ta(1.0 - theta - epsilon)?)
    } else {
        None
    };
    let second = if inside(1.0 - theta + epsilon)
        && inside(1.0 - theta - epsilon)
        && inside(theta + epsilon)
        && inside(theta - epsilon)
    {
        Some(
            ta(1.0 - theta + epsilon)? - ta(1.0 - theta - epsilon)? + tb(theta + epsilon)?
                - tb(theta - epsilon)?,
        )
    } else {
        None
    };
    let third = if inside(1.0 - theta + epsilon) {
        Some(ta(1.0 - theta + epsilon)? - ta(1.0 - theta)?)
    } else {
        None
    };
    Ok([first, second, third])
}

fn upsilon(s: &BraessScenario, theta: f64, tolerance: f64) -> Result<f64> {
    theta_for_control(s, control_for_theta(s, theta)?, tolerance)
}

/// Fixed points of `θ ↦ Θ(T̃(θ))` on `[0, ½]`.
pub fn fixed_points(s: &BraessScenario, options: &ControlOptions) -> Result<Vec<FixedPoint>> {
    let n = options.scan_grid.max(3);
    let tol = options.theta_tolerance;
    let zero = 10.0 * tol;
    let xs: Vec<f64> = (0..n).map(|k| 0.5 * k as f64 / (n - 1) as f64).collect();
    let g: Vec<f64> = xs
        .par_iter()
        .map(|&x| Ok(upsilon(s, x, tol)? - x))
        .collect::<Result<_>>()?;

    let mut thetas = Vec::new();
    for k in 0..n {
        if g[k].abs() <= zero {
            thetas.push(xs[k]);
        }
    }
    for k in 0..n - 1 {
        if g[k].abs() > zero && g[k + 1].abs() > zero && g[k].signum() != g[k + 1].signum() {
            thetas.push(numeric::bisect(
                |x| Ok(upsilon(s, x, tol)? - x),
                xs[k],
                xs[k + 1],
                tol,
            )?);
        }
    }
    if thetas.is_empty() {
        // Υ maps [0, ½] into itself, so a fixed point exists; take the
        // grid point closest to one if rounding hid it.
        let k = (0..n)
            .min_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs()))
            .expect("non-empty grid");
        thetas.push(xs[k]);
    }
    thetas.sort_by(f64::total_cmp);
    thetas.dedup_by(|a, b| (*a - *b).abs() <= 1e-8);

    thetas
        .into_iter()
        .map(|theta| {
            let tilde_tau = control_for_theta(s, theta)?;
            Ok(FixedPoint {
                theta,
                tilde_tau,
                mean_time: diagonal_mean_time(s, theta, tilde_tau)?,
            })
        })
        .collect()
}

/// Finds the bridge time `τ̃*` and diagonal share `θ*` such that
/// `(θ*, θ*, 1 − 2θ*)` is a local Nash point and a global minimizer of the
/// mean time on the controlled network.
pub fn optimal_control(s: &BraessScenario, options: &ControlOptions) -> Result<ControlResult> {
    let fixed = fixed_points(s, options)?;
    let best = *fixed
        .iter()
        .min_by(|a, b| a.mean_time.total_cmp(&b.mean_time))
        .expect("at least one fixed point");

    let pinned = controlled(s, best.tilde_tau)?;
    let net = pinned.augmented();
    let partition = FlowPartition::with_remainder(&[best.theta, best.theta])?;
    let epsilon = options.epsilon.min(partition.shares().iter().copied().fold(0.0, f64::max));
    let nash = is_local_nash(net, &partition, epsilon, options.tolerance)?;
    let mean_time = net.mean_global_travel_time(&partition)?;
    let controlled_time = net.route_travel_times(&partition)?[ALPHA];

    let scale = mean_time.abs().max(1.0);
    let mut worst_margin = f64::INFINITY;
    for p in random_partitions(3, options.samples, options.seed) {
        worst_margin = worst_margin.min(net.mean_global_travel_time(&p)? - mean_time);
    }
    let optimum = social_optimum(net, &EquilibriumOptions::default())?;
    let optimality = OptimalityCheck {
        passed: worst_margin >= -1e-12 * scale && mean_time <= optimum.mean_time + 1e-9 * scale,
        samples: options.samples,
        worst_margin,
        optimum_time: optimum.mean_time,
    };

    let certified = nash.holds && optimality.passed;
    Ok(ControlResult {
        tilde_tau: best.tilde_tau,
        theta_star: best.theta,
        equivalent_speed: (best.tilde_tau > 0.0).then(|| s.bridge().length / best.tilde_tau),
        partition,
        controlled_time,
        mean_time,
        fixed_points: fixed,
        nash,
        optimality,
        certified,
    })
}
