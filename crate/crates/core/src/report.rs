//! Text and key-value renderings of analysis results.

use std::fmt::Write as _;

use crate::braess::{BraessReport, UniquenessCertificate};
use crate::control::ControlResult;
use crate::equilibria::{EquilibriumCheck, EquilibriumResult, NashCheck, ParetoCheck};
use crate::error::Error;
use crate::flux::FluxValidationReport;
use crate::network::{FlowPartition, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    /// One `section.key=value` line per field.
    Records,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    sections: Vec<(String, Vec<(String, String)>)>,
}

/// Shortest text that reads back to the same `f64`.
pub fn number(x: f64) -> String {
    format!("{x:?}")
}

pub fn numbers(xs: &[f64]) -> String {
    xs.iter().map(|&x| number(x)).collect::<Vec<_>>().join(",")
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn section(&mut self, name: impl Into<String>) -> &mut Self {
        self.sections.push((name.into(), Vec::new()));
        self
    }

    pub fn field(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        if self.sections.is_empty() {
            self.section("result");
        }
        let last = self.sections.last_mut().expect("a section exists");
        last.1.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .filter(|(s, _)| s == section)
            .flat_map(|(_, fields)| fields)
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Text => {
                for (k, (name, fields)) in self.sections.iter().enumerate() {
                    if k > 0 {
                        out.push('\n');
                    }
                    let _ = writeln!(out, "{name}");
                    let width = fields.iter().map(|(key, _)| key.len()).max().unwrap_or(0);
                    for (key, value) in fields {
                        let _ = writeln!(out, "  {key:<width$}  {value}");
                    }
                }
            }
            Format::Records => {
                for (name, fields) in &self.sections {
                    for (key, value) in fields {
                        let _ = writeln!(out, "{name}.{key}={value}");
                    }
                }
            }
        }
        out
    }
}

fn route_name(net: &Network, k: usize) -> &str {
    &net.routes()[k].id
}

pub fn add_network(r: &mut Report, net: &Network) {
    r.section("network")
        .field("roads", net.roads().iter().map(|x| x.id.as_str()).collect::<Vec<_>>().join(","))
        .field("routes", net.routes().iter().map(|x| x.id.as_str()).collect::<Vec<_>>().join(","))
        .field("demand", number(net.demand().amount()));
}

pub fn add_evaluation(r: &mut Report, net: &Network, partition: &FlowPartition, times: &[f64], mean: f64) {
    r.section("evaluation").field("partition", numbers(partition.shares()));
    for (k, t) in times.iter().enumerate() {
        r.field(format!("time.{}", route_name(net, k)), number(*t));
    }
    r.field("mean_time", number(mean));
}

pub fn add_equilibrium_check(r: &mut Report, net: &Network, c: &EquilibriumCheck) {
    r.section("equilibrium")
        .field("holds", c.holds)
        .field(
            "relevant",
            c.relevant.iter().map(|&k| route_name(net, k)).collect::<Vec<_>>().join(","),
        )
        .field("time", number(c.equilibrium_time))
        .field("spread", number(c.spread))
        .field("tolerance", number(c.tolerance));
}

pub fn add_nash_check(r: &mut Report, net: &Network, name: &str, c: &NashCheck) {
    r.section(name)
        .field("holds", c.holds)
        .field("epsilon", number(c.epsilon))
        .field("tolerance", number(c.tolerance))
        .field("scope", NashCheck::SCOPE)
        .field("swaps_tested", c.deviations.len());
    if let Some(w) = c.worst() {
        r.field(
            "worst_swap",
            format!("{}->{}", route_name(net, w.from), route_name(net, w.to)),
        )
        .field("worst_margin", number(w.margin()));
    }
}

pub fn add_nash_error(r: &mut Report, name: &str, e: &Error) {
    r.section(name).field("holds", false).field("error", e);
}

pub fn add_pareto_check(r: &mut Report, c: &ParetoCheck) {
    r.section("pareto")
        .field("holds", c.holds)
        .field("is_equilibrium", c.is_equilibrium)
        .field("samples", c.samples_checked)
        .field("radius", number(c.radius))
        .field("seed", c.seed);
    if let Some(p) = &c.counterexample {
        r.field("counterexample", numbers(p.shares()));
    }
}

pub fn add_equilibrium_result(r: &mut Report, net: &Network, name: &str, e: &EquilibriumResult) {
    r.section(name)
        .field("kind", e.kind.as_str())
        .field("partition", numbers(e.partition.shares()));
    for (k, t) in e.certificate.route_times.iter().enumerate() {
        r.field(format!("time.{}", route_name(net, k)), number(*t));
    }
    if let Some(t) = e.equilibrium_time {
        r.field("equilibrium_time", number(t));
    }
    r.field("mean_time", number(e.mean_time))
        .field("gap", number(e.certificate.gap))
        .field("iterations", e.certificate.iterations);
    if let Some(p) = e.certificate.potential {
        r.field("potential", number(p));
    }
    if let Some(n) = &e.certificate.nash {
        r.field("nash", n.holds).field("nash_epsilon", number(n.epsilon));
    }
}

pub fn add_braess(r: &mut Report, b: &BraessReport) {
    r.section("braess")
        .field("paradox", b.paradox)
        .field("marginal", b.marginal)
        .field("hypothesis_met", b.hypothesis_met)
        .field("tau_alpha_half", number(b.bounds.0))
        .field("tau_gamma_zero", number(b.bounds.1))
        .field("tau_alpha_zero", number(b.bounds.2))
        .field("base_optimum_time", number(b.base_optimum_time))
        .field("augmented_nash_time", number(b.augmented_nash_time))
        .field("degradation", number(b.degradation));
    if let Some(p) = &b.nash_partition {
        r.field("nash_partition", numbers(p.shares()));
    }
}

pub fn add_uniqueness(r: &mut Report, u: &UniquenessCertificate) {
    r.section("uniqueness")
        .field("unique", u.unique)
        .field("grid", u.grid)
        .field("interior_roots", numbers(&u.interior_roots))
        .field("min_gap", number(u.min_gap))
        .field("corners_rejected", u.corners_rejected);
}

pub fn add_control(r: &mut Report, c: &ControlResult) {
    r.section("control")
        .field("certified", c.certified)
        .field("tilde_tau", number(c.tilde_tau))
        .field("theta_star", number(c.theta_star))
        .field(
            "equivalent_speed",
            c.equivalent_speed.map(number).unwrap_or_else(|| "unbounded".into()),
        )
        .field("partition", numbers(c.partition.shares()))
        .field("controlled_time", number(c.controlled_time))
        .field("mean_time", number(c.mean_time))
        .field(
            "fixed_points",
            c.fixed_points.iter().map(|f| number(f.theta)).collect::<Vec<_>>().join(","),
        )
        .field("nash", c.nash.holds)
        .field("nash_epsilon", number(c.nash.epsilon))
        .field("optimal", c.optimality.passed)
        .field("optimality_samples", c.optimality.samples)
        .field("optimality_margin", number(c.optimality.worst_margin))
        .field("solver_optimum_time", number(c.optimality.optimum_time));
}

pub fn add_flux_validation(r: &mut Report, road: &str, v: &FluxValidationReport) {
    r.section(format!("road.{road}"))
        .field("passed", v.passed)
        .field("grid_points", v.grid_points)
        .field("violations", v.violations.len())
        .field("third_derivative_warnings", v.warnings.len());
    if let Some(first) = v.violations.first() {
        r.field(
            "first_violation",
            format!("{} at rho={} (value {})", first.condition, number(first.density), number(first.value)),
        );
    }
}
