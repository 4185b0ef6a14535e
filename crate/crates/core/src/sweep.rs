//! Grid sweeps over partitions and scenario parameters, written as CSV.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::braess::BraessScenario;
use crate::equilibria::{find_wardrop, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::network::{FlowPartition, Network, RoadBehavior, PARTITION_SUM_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    /// Share of the first route.
    Theta1,
    /// Share of the second route.
    Theta2,
    /// Demand amount.
    Phi,
    /// Speed of the inner roads `b, c` (linear flux).
    V,
    /// Speed of the bridge (linear flux).
    VTilde,
    /// Constant travel time pinned on the bridge.
    Tau,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::Theta1 => "theta1",
            Variable::Theta2 => "theta2",
            Variable::Phi => "phi",
            Variable::V => "V",
            Variable::VTilde => "vtilde",
            Variable::Tau => "tau",
        }
    }

    fn is_share(self) -> bool {
        matches!(self, Variable::Theta1 | Variable::Theta2)
    }

    fn needs_braess(self) -> bool {
        matches!(self, Variable::V | Variable::VTilde | Variable::Tau)
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "theta1" => Variable::Theta1,
            "theta2" => Variable::Theta2,
            "phi" => Variable::Phi,
            "V" => Variable::V,
            "vtilde" => Variable::VTilde,
            "tau" => Variable::Tau,
            other => {
                return Err(Error::validation(format!(
                    "unknown sweep variable `{other}` (expected theta1, theta2, phi, V, vtilde or tau)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub variable: Variable,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * k as f64 / (self.points - 1) as f64
        }
    }

    fn check(&self) -> Result<()> {
        let name = self.variable.name();
        if self.points < 2 {
            return Err(Error::validation(format!("axis `{name}` needs at least 2 points")));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::validation(format!("axis `{name}` needs finite lo <= hi")));
        }
        let ok = match self.variable {
            Variable::Theta1 | Variable::Theta2 => self.lo >= 0.0 && self.hi <= 1.0,
            Variable::Phi | Variable::Tau => self.lo >= 0.0,
            Variable::V | Variable::VTilde => self.lo > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "axis `{name}` range [{}, {}] leaves the admissible domain",
                self.lo, self.hi
            )))
        }
    }
}

/// One or two axes, e.g. `theta1=0:1:101,theta2=0:1:101`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axes: Vec<Axis>,
}

impl FromStr for SweepGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut axes = Vec::new();
        for part in s.split(',') {
            let bad = || Error::validation(format!("bad axis `{part}`: expected var=lo:hi:points"));
            let (var, range) = part.trim().split_once('=').ok_or_else(bad)?;
            let fields: Vec<&str> = range.split(':').collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            let number = |t: &str| crate::scenario::parse_number(t).ok_or_else(bad);
            axes.push(Axis {
                variable: var.trim().parse()?,
                lo: number(fields[0])?,
                hi: number(fields[1])?,
                points: fields[2].trim().parse().map_err(|_| bad())?,
            });
        }
        let grid = SweepGrid { axes };
        grid.check()?;
        Ok(grid)
    }
}

impl SweepGrid {
    pub fn check(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::validation("a sweep grid has one or two axes"));
        }
        if self.axes.len() == 2 && self.axes[0].variable == self.axes[1].variable {
            return Err(Error::validation("the two axes must sweep different variables"));
        }
        self.axes.iter().try_for_each(Axis::check)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order: the first axis varies slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![Vec::new()];
        for axis in &self.axes {
            rows = rows
                .into_iter()
                .flat_map(|row| {
                    (0..axis.points).map(move |k| {
                        let mut r = row.clone();
                        r.push(axis.value(k));
                        r
                    })
                })
                .collect();
        }
        rows
    }
}

/// What a sweep evaluates.
#[derive(Debug, Clone, Copy)]
pub enum SweepTarget<'a> {
    Network(&'a Network),
    /// A bridged network; `base` selects the four-road network.
    Braess { scenario: &'a BraessScenario, base: bool },
}

impl SweepTarget<'_> {
    fn network(&self) -> &Network {
        match self {
            SweepTarget::Network(n) => n,
            SweepTarget::Braess { scenario, base: true } => scenario.base(),
            SweepTarget::Braess { scenario, base: false } => scenario.augmented(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Partition used when the grid has no share axes; `None` solves for
    /// the Wardrop equilibrium at every point.
    pub partition: Option<FlowPartition>,
    pub threads: usize,
    pub equilibrium: EquilibriumOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            partition: None,
            threads: 1,
            equilibrium: EquilibriumOptions::default(),
        }
    }
}

/// Route times and mean time at one grid point, or `None` when the point
/// is infeasible.
type RowValues = Option<(Vec<f64>, f64)>;

fn infeasible_on_capacity<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::CapacityExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn point_network(target: SweepTarget, axes: &[Axis], row: &[f64]) -> Result<Option<Network>> {
    let params: Vec<(Variable, f64)> = axes
        .iter()
        .zip(row)
        .filter(|(a, _)| !a.variable.is_share())
        .map(|(a, &x)| (a.variable, x))
        .collect();
    if params.is_empty() {
        return Ok(Some(target.network().clone()));
    }
    match target {
        SweepTarget::Network(net) => {
            let (_, phi) = params[0];
            infeasible_on_capacity(net.with_demand(net.demand().with_amount(phi)))
        }
        SweepTarget::Braess { scenario, base } => {
            let build = || -> Result<BraessScenario> {
                let mut s = scenario.clone();
                for &(var, x) in &params {
                    s = match var {
                        Variable::Phi => s.with_demand(s.demand().with_amount(x))?,
                        Variable::V => s.with_inner(RoadBehavior::StationaryFlow(FluxModel::linear(x)?))?,
                        Variable::VTilde => s.with_bridge(RoadBehavior::StationaryFlow(FluxModel::linear(x)?))?,
                        Variable::Tau => s.with_bridge(RoadBehavior::Pinned { time: x })?,
                        Variable::Theta1 | Variable::Theta2 => s,
                    };
                }
                Ok(s)
            };
            Ok(infeasible_on_capacity(build())?.map(|s| if base { s.base().clone() } else { s.augmented().clone() }))
        }
    }
}

fn evaluate(target: SweepTarget, axes: &[Axis], row: &[f64], options: &SweepOptions) -> Result<RowValues> {
    let Some(net) = point_network(target, axes, row)? else {
        return Ok(None);
    };
    let shares: Vec<f64> = axes
        .iter()
        .zip(row)
        .filter(|(a, _)| a.variable.is_share())
        .map(|(_, &x)| x)
        .collect();
    let partition = if !shares.is_empty() {
        if shares.iter().sum::<f64>() > 1.0 + PARTITION_SUM_TOLERANCE {
            return Ok(None);
        }
        FlowPartition::with_remainder(&shares)?
    } else if let Some(p) = &options.partition {
        p.clone()
    } else {
        find_wardrop(&net, &options.equilibrium)?.partition
    };
    let times = infeasible_on_capacity(net.route_travel_times(&partition))?;
    let mean = infeasible_on_capacity(net.mean_global_travel_time(&partition))?;
    Ok(times.zip(mean))
}

fn check_target(target: SweepTarget, grid: &SweepGrid, options: &SweepOptions) -> Result<()> {
    let net = target.network();
    let shares = grid.axes.iter().filter(|a| a.variable.is_share()).count();
    if shares > 0 && shares + 1 != net.route_count() {
        return Err(Error::validation(format!(
            "share axes must cover all but the last of the {} routes",
            net.route_count()
        )));
    }
    if grid.axes.iter().any(|a| a.variable == Variable::Theta2) && !grid.axes.iter().any(|a| a.variable == Variable::Theta1) {
        return Err(Error::validation("theta2 needs theta1"));
    }
    if let Some(p) = &options.partition {
        if p.len() != net.route_count() {
            return Err(Error::PartitionMismatch {
                expected: net.route_count(),
                got: p.len(),
            });
        }
    }
    if let SweepTarget::Network(_) = target {
        if let Some(a) = grid.axes.iter().find(|a| a.variable.needs_braess()) {
            return Err(Error::validation(format!(
                "sweeping `{}` needs a scenario with a [braess] section",
                a.variable.name()
            )));
        }
    }
    if let SweepTarget::Braess { base: true, .. } = target {
        if let Some(a) = grid.axes.iter().find(|a| matches!(a.variable, Variable::VTilde | Variable::Tau)) {
            return Err(Error::validation(format!(
                "`{}` acts on the bridge, which the base network does not have",
                a.variable.name()
            )));
        }
    }
    Ok(())
}

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Evaluates every grid point and returns the CSV text. Rows follow
/// [`SweepGrid::points`]; the output does not depend on `threads`.
pub fn sweep(target: SweepTarget, grid: &SweepGrid, options: &SweepOptions) -> Result<String> {
    grid.check()?;
    check_target(target, grid, options)?;
    let points = grid.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.max(1))
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker threads: {e}")))?;
    let rows: Vec<RowValues> = pool.install(|| {
        points
            .par_iter()
            .map(|row| evaluate(target, &grid.axes, row, options))
            .collect::<Result<_>>()
    })?;

    let net = target.network();
    let mut out = String::new();
    let mut header: Vec<String> = grid.axes.iter().map(|a| a.variable.name().to_string()).collect();
    header.extend(net.routes().iter().map(|r| format!("tau_{}", r.id)));
    header.push("T".into());
    header.push("feasible".into());
    out.push_str(&header.join(","));
    out.push('\n');

    for (point, values) in points.iter().zip(&rows) {
        let mut fields: Vec<String> = point.iter().map(|&x| number(x)).collect();
        match values {
            Some((times, mean)) => {
                fields.extend(times.iter().map(|&t| number(t)));
                fields.push(number(*mean));
                fields.push("true".into());
            }
            None => {
                fields.extend(std::iter::repeat_n(String::new(), net.route_count() + 1));
                fields.push("false".into());
            }
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    Ok(out)
}
