//! Equilibrium, local Nash and local Pareto predicates, and solvers for the
//! social optimum and the Wardrop equilibrium.
//!
//! Predicates return certificates rather than bare booleans so that callers
//! can report the route times and margins that decided the outcome.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{FlowPartition, Network};
use crate::simplex::{self, SolverOptions};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_PARETO_RADIUS: f64 = 1e-2;
pub const DEFAULT_PARETO_SAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;

/// Outcome of the equal-times test over the used routes.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCheck {
    pub holds: bool,
    pub route_times: Vec<f64>,
    /// Indices of routes with a nonzero share.
    pub relevant: Vec<usize>,
    /// Mean of the relevant route times.
    pub equilibrium_time: f64,
    /// Largest pairwise difference among relevant times.
    pub spread: f64,
    pub tolerance: f64,
}

/// `ε` drivers moving from route `from` to route `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub from: usize,
    pub to: usize,
    /// Time on `to` after the move.
    pub time_after: f64,
    /// Time on `from` before the move.
    pub time_before: f64,
}

impl Deviation {
    /// Positive when the move does not pay off.
    pub fn margin(&self) -> f64 {
        self.time_after - self.time_before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashCheck {
    pub holds: bool,
    pub equilibrium: EquilibriumCheck,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Every admissible single-pair swap that was tested.
    pub deviations: Vec<Deviation>,
}

impl NashCheck {
    /// Only pairwise swaps `θ + εe_j − εe_k` are tested; simultaneous moves
    /// across several routes are not.
    pub const SCOPE: &'static str = "pairwise swaps at a single epsilon";

    pub fn worst(&self) -> Option<&Deviation> {
        self.deviations
            .iter()
            .min_by(|a, b| a.margin().total_cmp(&b.margin()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoOptions {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    /// Time changes smaller than `tolerance · max(1, τ)` count as no change.
    pub tolerance: f64,
    pub equilibrium_tolerance: f64,
}

impl Default for ParetoOptions {
    fn default() -> Self {
        ParetoOptions {
            radius: DEFAULT_PARETO_RADIUS,
            samples: DEFAULT_PARETO_SAMPLES,
            seed: DEFAULT_SEED,
            tolerance: 1e-12,
            equilibrium_tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoCheck {
    /// `true` means no counterexample was found among the samples, which is
    /// evidence rather than proof.
    pub holds: bool,
    pub is_equilibrium: bool,
    pub samples_checked: usize,
    pub radius: f64,
    pub seed: u64,
    /// A nearby partition that lowers some route time and raises none.
    pub counterexample: Option<FlowPartition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    /// Equal relevant times; Nash test not run.
    Equilibrium,
    /// Solver output that failed the a posteriori checks.
    EquilibriumCandidate,
    LocalNash,
    SocialOptimum,
}

impl EquilibriumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquilibriumKind::Equilibrium => "equilibrium",
            EquilibriumKind::EquilibriumCandidate => "equilibrium-candidate",
            EquilibriumKind::LocalNash => "local-nash",
            EquilibriumKind::SocialOptimum => "social-optimum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub route_times: Vec<f64>,
    /// Frank–Wolfe gap of the solver's objective at the returned point.
    pub gap: f64,
    pub iterations: usize,
    /// Beckmann potential at the returned point (Wardrop solves only).
    pub potential: Option<f64>,
    pub equilibrium: Option<EquilibriumCheck>,
    pub nash: Option<NashCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub partition: FlowPartition,
    /// Common time of the used routes; `None` for a social optimum, whose
    /// route times need not agree.
    pub equilibrium_time: Option<f64>,
    pub mean_time: f64,
    pub kind: EquilibriumKind,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub tolerance: f64,
    pub epsilon: f64,
    pub solver: SolverOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tolerance: DEFAULT_TOLERANCE,
            epsilon: DEFAULT_EPSILON,
            solver: SolverOptions::default(),
        }
    }
}

/// All relevant (used) route times agree within `tolerance`.
pub fn is_equilibrium(net: &Network, theta: &FlowPartition, tolerance: f64) -> Result<EquilibriumCheck> {
    let theta = theta.snapped();
    let route_times = net.route_travel_times(&theta)?;
    let relevant: Vec<usize> = (0..theta.len()).filter(|&j| theta.is_used(j)).collect();
    let (lo, hi) = relevant.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &j| {
        (lo.min(route_times[j]), hi.max(route_times[j]))
    });
    let spread = hi - lo;
    let equilibrium_time =
        relevant.iter().map(|&j| route_times[j]).sum::<f64>() / relevant.len() as f64;
    Ok(EquilibriumCheck {
        holds: spread <= tolerance,
        route_times,
        relevant,
        equilibrium_time,
        spread,
        tolerance,
    })
}

/// Local Nash test: `θ` is an equilibrium and no `ε` of drivers gains more
/// than `tolerance` by swapping from one route to another.
pub fn is_local_nash(
    net: &Network,
    theta: &FlowPartition,
    epsilon: f64,
    tolerance: f64,
) -> Result<NashCheck> {
    let theta = theta.snapped();
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Domain {
            what: "nash epsilon",
            value: epsilon,
            range: "(0, 1]".into(),
        });
    }
    let equilibrium = is_equilibrium(net, &theta, tolerance)?;
    let shares = theta.shares();
    let k = shares.len();
    let mut deviations = Vec::new();
    for from in 0..k {
        if shares[from] < epsilon {
            continue;
        }
        for to in (0..k).filter(|&to| to != from) {
            let mut moved = shares.to_vec();
            moved[from] -= epsilon;
            moved[to] += epsilon;
            let after = net.route_times_raw(&moved)?;
            deviations.push(Deviation {
                from,
                to,
                time_after: after[to],
                time_before: equilibrium.route_times[from],
            });
        }
    }
    if deviations.is_empty() && k > 1 {
        return Err(Error::DegenerateTest { epsilon });
    }
    let holds = equilibrium.holds && deviations.iter().all(|d| d.margin() > -tolerance);
    Ok(NashCheck {
        holds,
        equilibrium,
        epsilon,
        tolerance,
        deviations,
    })
}

/// Sampled local Pareto test: looks for a partition within `radius` of `θ`
/// that lowers some route time without raising any other.
pub fn is_local_pareto(net: &Network, theta: &FlowPartition, options: ParetoOptions) -> Result<ParetoCheck> {
    let theta = theta.snapped();
    let eq = is_equilibrium(net, &theta, options.equilibrium_tolerance)?;
    let mut check = ParetoCheck {
        holds: false,
        is_equilibrium: eq.holds,
        samples_checked: 0,
        radius: options.radius,
        seed: options.seed,
        counterexample: None,
    };
    if !eq.holds {
        return Ok(check);
    }
    let base = eq.route_times;
    let k = theta.len();
    if k == 1 {
        check.holds = true;
        return Ok(check);
    }

    let dominates = |times: &[f64]| {
        let mut lower = false;
        for (t, b) in times.iter().zip(&base) {
            let slack = options.tolerance * b.abs().max(1.0);
            if *t > b + slack {
                return false;
            }
            if *t < b - slack {
                lower = true;
            }
        }
        lower
    };
    let probe = |direction: &[f64], r: f64| -> Result<Option<FlowPartition>> {
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(None);
        }
        let moved: Vec<f64> = theta
            .shares()
            .iter()
            .zip(direction)
            .map(|(s, d)| s + r * d / norm)
            .collect();
        let candidate = simplex::project(&moved);
        let times = net.route_times_raw(&candidate)?;
        Ok(dominates(&times).then(|| FlowPartition::new(candidate).expect("projection is feasible")))
    };

    // Deterministic coordinate swaps first, then random directions.
    for from in 0..k {
        for to in (0..k).filter(|&to| to != from) {
            let mut d = vec![0.0; k];
            d[from] = -1.0;
            d[to] = 1.0;
            check.samples_checked += 1;
            if let Some(c) = probe(&d, options.radius)? {
                check.counterexample = Some(c);
                return Ok(check);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.samples {
        let mut d: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = d.iter().sum::<f64>() / k as f64;
        d.iter_mut().for_each(|v| *v -= mean);
        let r = options.radius * rng.gen::<f64>();
        check.samples_checked += 1;
        if let Some(c) = probe(&d, r)? {
            check.counterexample = Some(c);
            return Ok(check);
        }
    }
    check.holds = true;
    Ok(check)
}

fn to_partition(point: Vec<f64>) -> Result<FlowPartition> {
    let mut p = point;
    for v in p.iter_mut() {
        if *v <= crate::network::SHARE_SNAP {
            *v = 0.0;
        }
    }
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    FlowPartition::new(p)
}

/// Minimizes the mean global travel time over the route simplex.
pub fn social_optimum(net: &Network, options: &EquilibriumOptions) -> Result<EquilibriumResult> {
    let k = net.route_count();
    let start = vec![1.0 / k as f64; k];
    let min = simplex::minimize(|x| net.mean_time_gradient_raw(x), &start, options.solver)?;
    let partition = to_partition(min.point)?;
    let route_times = net.route_travel_times(&partition)?;
    let mean_time = net.mean_global_travel_time(&partition)?;
    Ok(EquilibriumResult {
        partition,
        equilibrium_time: None,
        mean_time,
        kind: EquilibriumKind::SocialOptimum,
        certificate: Certificate {
            route_times,
            gap: min.gap,
            iterations: min.iterations,
            potential: None,
            equilibrium: None,
            nash: None,
        },
    })
}

/// Wardrop equilibrium as the minimizer of the Beckmann potential, checked
/// afterwards against the equilibrium and local Nash predicates.
pub fn find_wardrop(net: &Network, options: &EquilibriumOptions) -> Result<EquilibriumResult> {
    let k = net.route_count();
    let start = vec![1.0 / k as f64; k];
    // ∇Φ = demand · route times; the positive factor does not move the minimizer.
    let min = simplex::minimize(|x| net.route_times_raw(x), &start, options.solver)?;
    let partition = to_partition(min.point)?;
    let potential = net.beckmann_potential(&partition)?;
    let mean_time = net.mean_global_travel_time(&partition)?;
    let equilibrium = is_equilibrium(net, &partition, options.tolerance)?;
    let epsilon = options
        .epsilon
        .min(partition.shares().iter().copied().fold(0.0, f64::max));
    let nash = is_local_nash(net, &partition, epsilon, options.tolerance)?;
    let kind = if equilibrium.holds && nash.holds {
        EquilibriumKind::LocalNash
    } else {
        EquilibriumKind::EquilibriumCandidate
    };
    Ok(EquilibriumResult {
        partition,
        equilibrium_time: Some(equilibrium.equilibrium_time),
        mean_time,
        kind,
        certificate: Certificate {
            route_times: equilibrium.route_times.clone(),
            gap: min.gap,
            iterations: min.iterations,
            potential: Some(potential),
            equilibrium: Some(equilibrium),
            nash: Some(nash),
        },
    })
}

/// `n` partitions drawn uniformly from the route simplex.
pub fn random_partitions(routes: usize, n: usize, seed: u64) -> Vec<FlowPartition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..routes).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = w.iter().sum();
            FlowPartition::new(w.into_iter().map(|v| v / s).collect()).expect("normalized weights")
        })
        .collect()
}
