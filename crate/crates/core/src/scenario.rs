//! Plain-text scenario files.
//!
//! A scenario is a sequence of sections, each opened by a bracketed header
//! and followed by `key = value` lines. `#` starts a comment.
//!
//! ```text
//! [road a]
//! kind = log          # log | sqrt | linear | count | pinned
//! a = 1
//! length = 1
//!
//! [route alpha]
//! roads = a, b
//!
//! [demand]
//! inflow = 1/20       # or: vehicles = 4000
//!
//! [braess]            # optional: which road plays each role
//! a = a
//! b = b
//! c = c
//! d = d
//! e = e
//!
//! [analysis]          # optional defaults for the commands
//! tolerance = 1e-7
//! epsilon = 1e-4
//! seed = 42
//! samples = 1000
//! grid = 1001
//! radius = 0.01
//! ```
//!
//! Numbers are decimals, fractions `p/q`, or the constant `sqrt2-1`.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::braess::{BraessScenario, RoadTemplate};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::network::{Demand, Network, Road, RoadBehavior, Route};

/// Road ids playing the five roles of the bridged network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BraessRoles {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub e: String,
}

impl BraessRoles {
    fn as_array(&self) -> [&str; 5] {
        [&self.a, &self.b, &self.c, &self.d, &self.e]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnalysisDefaults {
    pub tolerance: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub radius: Option<f64>,
}

/// The syntactic content of a scenario file, before network validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub roads: Vec<Road>,
    pub routes: Vec<Route>,
    pub demand: Demand,
    pub braess: Option<BraessRoles>,
    pub analysis: AnalysisDefaults,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: Network,
    pub braess: Option<BraessScenario>,
    pub defaults: AnalysisDefaults,
}

/// Header line of every section, for diagnostics raised after parsing.
#[derive(Debug, Clone, Default)]
struct Lines {
    roads: Vec<usize>,
    routes: Vec<usize>,
    demand: usize,
    braess: Option<usize>,
}

struct Entry {
    key: String,
    value: String,
    line: usize,
    key_column: usize,
    value_column: usize,
}

struct Section {
    kind: String,
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Parses a decimal, a fraction `p/q`, or `sqrt2-1`.
pub fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    let value = if text == "sqrt2-1" {
        std::f64::consts::SQRT_2 - 1.0
    } else if let Some((p, q)) = text.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        if q == 0.0 {
            return None;
        }
        p / q
    } else {
        text.parse().ok()?
    };
    value.is_finite().then_some(value)
}

fn column_of(line: &str, sub: &str) -> usize {
    // `sub` is always a slice of `line`.
    let offset = sub.as_ptr() as usize - line.as_ptr() as usize;
    line[..offset].chars().count() + 1
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let column = column_of(raw, trimmed);
        if let Some(rest) = trimmed.strip_prefix('[') {
            let inner = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line, column, "section header is missing `]`"))?;
            let mut words = inner.split_whitespace();
            let kind = words
                .next()
                .ok_or_else(|| parse_error(line, column, "empty section header"))?
                .to_string();
            let name = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(parse_error(line, column, "section header has too many words"));
            }
            let named = matches!(kind.as_str(), "road" | "route");
            let plain = matches!(kind.as_str(), "demand" | "braess" | "analysis");
            if !named && !plain {
                return Err(parse_error(line, column + 1, format!("unknown section `{kind}`")));
            }
            match (&name, named) {
                (None, true) => {
                    return Err(parse_error(line, column, format!("`[{kind}]` needs an id")));
                }
                (Some(n), true) if !is_identifier(n) => {
                    return Err(parse_error(line, column, format!("invalid id `{n}`")));
                }
                (Some(_), false) => {
                    return Err(parse_error(line, column, format!("`[{kind}]` takes no id")));
                }
                _ => {}
            }
            sections.push(Section {
                kind,
                name,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| parse_error(line, column, "expected `key = value` or a section header"))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| parse_error(line, column, "entry before the first section"))?;
        let key_text = key.trim();
        let value_text = value.trim();
        if key_text.is_empty() {
            return Err(parse_error(line, column, "missing key"));
        }
        let value_column = if value_text.is_empty() {
            column_of(raw, value) + value.chars().count()
        } else {
            column_of(raw, value_text)
        };
        if value_text.is_empty() {
            return Err(parse_error(line, value_column, format!("missing value for `{key_text}`")));
        }
        if section.entries.iter().any(|e| e.key == key_text) {
            return Err(parse_error(line, column, format!("duplicate key `{key_text}`")));
        }
        section.entries.push(Entry {
            key: key_text.to_string(),
            value: value_text.to_string(),
            line,
            key_column: column,
            value_column,
        });
    }
    Ok(sections)
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| {
            let header = match &self.name {
                Some(n) => format!("[{} {n}]", self.kind),
                None => format!("[{}]", self.kind),
            };
            parse_error(self.line, 1, format!("{header} is missing `{key}`"))
        })
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(parse_error(e.line, e.key_column, format!("unknown key `{}`", e.key)));
            }
        }
        Ok(())
    }

    fn number(&self, key: &str) -> Result<f64> {
        let e = self.require(key)?;
        parse_number(&e.value)
            .ok_or_else(|| parse_error(e.line, e.value_column, format!("`{}` is not a finite number", e.value)))
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse()
                    .map_err(|_| parse_error(e.line, e.value_column, format!("`{}` is not a non-negative integer", e.value)))
            })
            .transpose()
    }

    fn optional_number(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            Some(_) => self.number(key).map(Some),
            None => Ok(None),
        }
    }
}

fn parse_road(section: &Section) -> Result<Road> {
    let kind = section.require("kind")?;
    let params: &[&str] = match kind.value.as_str() {
        "log" => &["a"],
        "sqrt" => &["b", "c"],
        "linear" => &["v"],
        "count" => &["slope", "intercept"],
        "pinned" => &["time"],
        other => {
            return Err(parse_error(
                kind.line,
                kind.value_column,
                format!("unknown road kind `{other}` (expected log, sqrt, linear, count or pinned)"),
            ))
        }
    };
    let mut allowed = vec!["kind", "length"];
    allowed.extend_from_slice(params);
    section.reject_unknown(&allowed)?;
    let behavior = match kind.value.as_str() {
        "log" => RoadBehavior::StationaryFlow(FluxModel::Log { a: section.number("a")? }),
        "sqrt" => RoadBehavior::StationaryFlow(FluxModel::Sqrt {
            b: section.number("b")?,
            c: section.number("c")?,
        }),
        "linear" => RoadBehavior::StationaryFlow(FluxModel::Linear { v: section.number("v")? }),
        "count" => RoadBehavior::CountLatency {
            slope: section.number("slope")?,
            intercept: section.number("intercept")?,
        },
        _ => RoadBehavior::Pinned {
            time: section.number("time")?,
        },
    };
    Ok(Road {
        id: section.name.clone().expect("road sections are named"),
        length: section.number("length")?,
        behavior,
    })
}

fn parse_route(section: &Section) -> Result<Route> {
    section.reject_unknown(&["roads"])?;
    let e = section.require("roads")?;
    let mut roads = Vec::new();
    for id in e.value.split(',') {
        let id = id.trim();
        if !is_identifier(id) {
            return Err(parse_error(e.line, e.value_column, format!("invalid road id `{id}` in route")));
        }
        roads.push(id.to_string());
    }
    Ok(Route {
        id: section.name.clone().expect("route sections are named"),
        roads,
    })
}

fn parse_demand(section: &Section) -> Result<Demand> {
    section.reject_unknown(&["inflow", "vehicles"])?;
    match (section.get("inflow"), section.get("vehicles")) {
        (Some(_), None) => Ok(Demand::Inflow(section.number("inflow")?)),
        (None, Some(_)) => Ok(Demand::Vehicles(section.number("vehicles")?)),
        (Some(_), Some(e)) => Err(parse_error(e.line, e.key_column, "give either `inflow` or `vehicles`, not both")),
        (None, None) => Err(parse_error(section.line, 1, "[demand] needs `inflow` or `vehicles`")),
    }
}

fn parse_braess(section: &Section) -> Result<BraessRoles> {
    section.reject_unknown(&["a", "b", "c", "d", "e"])?;
    let id = |key: &str| -> Result<String> {
        let e = section.require(key)?;
        if is_identifier(&e.value) {
            Ok(e.value.clone())
        } else {
            Err(parse_error(e.line, e.value_column, format!("invalid road id `{}`", e.value)))
        }
    };
    Ok(BraessRoles {
        a: id("a")?,
        b: id("b")?,
        c: id("c")?,
        d: id("d")?,
        e: id("e")?,
    })
}

fn parse_analysis(section: &Section) -> Result<AnalysisDefaults> {
    section.reject_unknown(&["tolerance", "epsilon", "seed", "samples", "grid", "radius"])?;
    Ok(AnalysisDefaults {
        tolerance: section.optional_number("tolerance")?,
        epsilon: section.optional_number("epsilon")?,
        seed: section.integer("seed")?,
        samples: section.integer("samples")?,
        grid: section.integer("grid")?,
        radius: section.optional_number("radius")?,
    })
}

fn parse_with_lines(text: &str) -> Result<(ScenarioFile, Lines)> {
    let sections = split_sections(text)?;
    let mut roads = Vec::new();
    let mut routes = Vec::new();
    let mut demand = None;
    let mut braess = None;
    let mut analysis = None;
    let mut lines = Lines::default();
    let mut road_ids = HashSet::new();
    let mut route_ids = HashSet::new();

    for section in &sections {
        let once = |seen: bool| -> Result<()> {
            if seen {
                Err(parse_error(section.line, 1, format!("duplicate [{}] section", section.kind)))
            } else {
                Ok(())
            }
        };
        match section.kind.as_str() {
            "road" => {
                let road = parse_road(section)?;
                if !road_ids.insert(road.id.clone()) {
                    return Err(parse_error(section.line, 1, format!("duplicate road `{}`", road.id)));
                }
                roads.push(road);
                lines.roads.push(section.line);
            }
            "route" => {
                let route = parse_route(section)?;
                if !route_ids.insert(route.id.clone()) {
                    return Err(parse_error(section.line, 1, format!("duplicate route `{}`", route.id)));
                }
                routes.push(route);
                lines.routes.push(section.line);
            }
            "demand" => {
                once(demand.is_some())?;
                demand = Some(parse_demand(section)?);
                lines.demand = section.line;
            }
            "braess" => {
                once(braess.is_some())?;
                braess = Some(parse_braess(section)?);
                lines.braess = Some(section.line);
            }
            _ => {
                once(analysis.is_some())?;
                analysis = Some(parse_analysis(section)?);
            }
        }
    }

    let end = text.lines().count().max(1);
    let demand = demand.ok_or_else(|| parse_error(end, 1, "missing [demand] section"))?;
    if roads.is_empty() {
        return Err(parse_error(end, 1, "no [road] sections"));
    }
    if routes.is_empty() {
        return Err(parse_error(end, 1, "no [route] sections"));
    }
    Ok((
        ScenarioFile {
            roads,
            routes,
            demand,
            braess,
            analysis: analysis.unwrap_or_default(),
        },
        lines,
    ))
}

fn at_line(line: usize, err: Error) -> Error {
    Error::Validation(format!("line {line}: {err}"))
}

fn number_text(x: f64) -> String {
    // Display prints the shortest string that reads back to the same value.
    format!("{x}")
}

impl ScenarioFile {
    /// Parses scenario text without checking the network it describes.
    pub fn parse(text: &str) -> Result<ScenarioFile> {
        parse_with_lines(text).map(|(file, _)| file)
    }

    /// Canonical text: roads, routes, demand, then the optional sections,
    /// with every number written so that it parses back exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for road in &self.roads {
            let _ = writeln!(out, "[road {}]", road.id);
            let params: Vec<(&str, f64)> = match road.behavior {
                RoadBehavior::StationaryFlow(FluxModel::Log { a }) => {
                    let _ = writeln!(out, "kind = log");
                    vec![("a", a)]
                }
                RoadBehavior::StationaryFlow(FluxModel::Sqrt { b, c }) => {
                    let _ = writeln!(out, "kind = sqrt");
                    vec![("b", b), ("c", c)]
                }
                RoadBehavior::StationaryFlow(FluxModel::Linear { v }) => {
                    let _ = writeln!(out, "kind = linear");
                    vec![("v", v)]
                }
                RoadBehavior::CountLatency { slope, intercept } => {
                    let _ = writeln!(out, "kind = count");
                    vec![("slope", slope), ("intercept", intercept)]
                }
                RoadBehavior::Pinned { time } => {
                    let _ = writeln!(out, "kind = pinned");
                    vec![("time", time)]
                }
            };
            for (key, value) in params {
                let _ = writeln!(out, "{key} = {}", number_text(value));
            }
            let _ = writeln!(out, "length = {}\n", number_text(road.length));
        }
        for route in &self.routes {
            let _ = writeln!(out, "[route {}]\nroads = {}\n", route.id, route.roads.join(", "));
        }
        match self.demand {
            Demand::Inflow(v) => {
                let _ = writeln!(out, "[demand]\ninflow = {}", number_text(v));
            }
            Demand::Vehicles(v) => {
                let _ = writeln!(out, "[demand]\nvehicles = {}", number_text(v));
            }
        }
        if let Some(roles) = &self.braess {
            let _ = write!(out, "\n[braess]\n");
            for (key, id) in ["a", "b", "c", "d", "e"].iter().zip(roles.as_array()) {
                let _ = writeln!(out, "{key} = {id}");
            }
        }
        let a = &self.analysis;
        if *a != AnalysisDefaults::default() {
            let _ = write!(out, "\n[analysis]\n");
            if let Some(v) = a.tolerance {
                let _ = writeln!(out, "tolerance = {}", number_text(v));
            }
            if let Some(v) = a.epsilon {
                let _ = writeln!(out, "epsilon = {}", number_text(v));
            }
            if let Some(v) = a.seed {
                let _ = writeln!(out, "seed = {v}");
            }
            if let Some(v) = a.samples {
                let _ = writeln!(out, "samples = {v}");
            }
            if let Some(v) = a.grid {
                let _ = writeln!(out, "grid = {v}");
            }
            if let Some(v) = a.radius {
                let _ = writeln!(out, "radius = {}", number_text(v));
            }
        }
        out
    }

    /// Validates the network and, when a `[braess]` section is present, the
    /// bridged-network structure.
    pub fn build(&self) -> Result<Scenario> {
        self.build_with_lines(&Lines::default())
    }

    fn build_with_lines(&self, lines: &Lines) -> Result<Scenario> {
        let line_of = |v: &[usize], k: usize| v.get(k).copied().unwrap_or(0);
        let mut roads = Vec::with_capacity(self.roads.len());
        for (k, r) in self.roads.iter().enumerate() {
            roads.push(
                Road::new(r.id.clone(), r.length, r.behavior)
                    .map_err(|e| at_line(line_of(&lines.roads, k), e))?,
            );
        }
        let network = Network::new(roads, self.routes.clone(), self.demand).map_err(|e| {
            let line = match &e {
                Error::CapacityExceeded { .. } => lines.demand,
                Error::Validation(msg) => self
                    .routes
                    .iter()
                    .position(|r| msg.contains(&format!("`{}`", r.id)))
                    .map(|k| line_of(&lines.routes, k))
                    .unwrap_or(lines.demand),
                _ => lines.demand,
            };
            at_line(line, e)
        })?;
        let braess = match &self.braess {
            Some(roles) => Some(
                self.braess_scenario(&network, roles)
                    .map_err(|e| at_line(lines.braess.unwrap_or(0), e))?,
            ),
            None => None,
        };
        Ok(Scenario {
            network,
            braess,
            defaults: self.analysis,
        })
    }

    fn braess_scenario(&self, network: &Network, roles: &BraessRoles) -> Result<BraessScenario> {
        let ids = roles.as_array();
        let distinct: HashSet<&str> = ids.iter().copied().collect();
        if distinct.len() != 5 {
            return Err(Error::validation("the five braess roles need five different roads"));
        }
        let road = |id: &str| -> Result<&Road> {
            network
                .road_index(id)
                .map(|k| &network.roads()[k])
                .ok_or_else(|| Error::validation(format!("braess role refers to unknown road `{id}`")))
        };
        let [a, b, c, d, e] = [road(ids[0])?, road(ids[1])?, road(ids[2])?, road(ids[3])?, road(ids[4])?];
        if a.length != d.length || a.behavior != d.behavior {
            return Err(Error::validation(format!("roads `{}` and `{}` must be identical", a.id, d.id)));
        }
        if b.length != c.length || b.behavior != c.behavior {
            return Err(Error::validation(format!("roads `{}` and `{}` must be identical", b.id, c.id)));
        }
        let expected: HashSet<Vec<&str>> = [vec![ids[0], ids[1]], vec![ids[2], ids[3]], vec![ids[0], ids[4], ids[3]]]
            .into_iter()
            .collect();
        let actual: HashSet<Vec<&str>> = network
            .routes()
            .iter()
            .map(|r| r.roads.iter().map(String::as_str).collect())
            .collect();
        if network.route_count() != 3 || actual != expected {
            return Err(Error::validation(format!(
                "braess routes must be {0}-{1}, {2}-{3} and {0}-{4}-{3}",
                ids[0], ids[1], ids[2], ids[3], ids[4]
            )));
        }
        BraessScenario::new(
            RoadTemplate::new(a.length, a.behavior),
            RoadTemplate::new(b.length, b.behavior),
            RoadTemplate::new(e.length, e.behavior),
            self.demand,
        )
    }
}

/// Parses and validates scenario text. Syntax problems come back as
/// [`Error::Parse`]; everything else as [`Error::Validation`] naming the
/// offending section's line.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let (file, lines) = parse_with_lines(text)?;
    file.build_with_lines(&lines)
}
