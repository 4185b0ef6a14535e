use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use braess_kit::braess::{braess_condition, nash_uniqueness_certificate, BraessScenario, DEFAULT_UNIQUENESS_GRID};
use braess_kit::control::{optimal_control, ControlOptions};
use braess_kit::equilibria::{
    find_wardrop, is_equilibrium, is_local_nash, is_local_pareto, social_optimum, EquilibriumOptions,
    ParetoOptions, DEFAULT_EPSILON, DEFAULT_PARETO_RADIUS, DEFAULT_PARETO_SAMPLES, DEFAULT_SEED, DEFAULT_TOLERANCE,
};
use braess_kit::flux::DEFAULT_VALIDATION_GRID;
use braess_kit::network::{FlowPartition, Network, RoadBehavior};
use braess_kit::report::{self, Format, Report};
use braess_kit::scenario::{parse_number, parse_scenario, Scenario, ScenarioFile};
use braess_kit::sweep::{sweep, SweepGrid, SweepOptions, SweepTarget};
use braess_kit::Error;

#[derive(Parser)]
#[command(name = "braess-kit", version, about = "Equilibria, optima and the Braess paradox on flux-model road networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Route shares, comma separated (fractions allowed).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    partition: Option<Vec<String>>,

    /// Time tolerance for equilibrium and Nash tests.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Share moved in Nash tests.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Seed for sampled checks.
    #[arg(long, global = true, env = "BRAESS_KIT_SEED")]
    seed: Option<u64>,

    /// sweep: axes as `var=lo:hi:points[,var=lo:hi:points]`;
    /// braess and control: number of scan points on [0, 1/2].
    #[arg(long, global = true)]
    grid: Option<String>,

    /// Write the report or CSV here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,

    /// Worker threads for grid evaluations.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Which network of a bridged scenario to use.
    #[arg(long, global = true, value_enum)]
    network: Option<NetworkChoice>,
}

#[derive(Subcommand)]
enum Command {
    /// Route times and equilibrium checks at a partition, or the Wardrop
    /// equilibrium and social optimum when no partition is given.
    Analyze { scenario: PathBuf },
    /// Paradox condition and Nash-uniqueness certificate.
    Braess { scenario: PathBuf },
    /// Constant bridge time that makes the Nash point optimal.
    Control { scenario: PathBuf },
    /// Evaluate route times and mean time over a grid, as CSV.
    Sweep { scenario: PathBuf },
    /// Parse the scenario and check every flux model.
    Validate { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Records,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NetworkChoice {
    Base,
    Augmented,
}

enum Failure {
    Io(PathBuf, std::io::Error),
    Parse(PathBuf, Error),
    Usage(String),
    Model(Error),
    Uncertified,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(..) => 1,
            Failure::Usage(_) => 2,
            Failure::Parse(..) | Failure::Model(Error::Parse { .. }) => 3,
            Failure::Model(Error::NonConvergence { .. }) => 5,
            Failure::Model(_) => 4,
            Failure::Uncertified => 6,
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = read(path)?;
    parse_scenario(&text).map_err(|e| located(path, e))
}

fn located(path: &Path, e: Error) -> Failure {
    match e {
        e @ Error::Parse { .. } => Failure::Parse(path.to_path_buf(), e),
        other => Failure::Model(other),
    }
}

fn emit(cli: &Cli, text: &str) -> Outcome {
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(path.clone(), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn format(cli: &Cli) -> Format {
    match cli.format {
        OutputFormat::Text => Format::Text,
        OutputFormat::Records => Format::Records,
    }
}

fn partition(cli: &Cli) -> Result<Option<FlowPartition>, Failure> {
    let Some(raw) = &cli.partition else {
        return Ok(None);
    };
    let shares = raw
        .iter()
        .map(|s| parse_number(s).ok_or_else(|| Failure::Usage(format!("`{s}` is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(FlowPartition::new(shares)?))
}

fn braess_of<'a>(s: &'a Scenario, command: &str) -> Result<&'a BraessScenario, Failure> {
    s.braess
        .as_ref()
        .ok_or_else(|| Failure::Usage(format!("`{command}` needs a scenario with a [braess] section")))
}

fn scan_grid(cli: &Cli, s: &Scenario) -> Result<usize, Failure> {
    match &cli.grid {
        Some(g) => g
            .parse()
            .map_err(|_| Failure::Usage(format!("--grid must be a point count here, got `{g}`"))),
        None => Ok(s.defaults.grid.unwrap_or(DEFAULT_UNIQUENESS_GRID)),
    }
}

fn tolerance(cli: &Cli, s: &Scenario) -> f64 {
    cli.tol.or(s.defaults.tolerance).unwrap_or(DEFAULT_TOLERANCE)
}

fn epsilon(cli: &Cli, s: &Scenario) -> f64 {
    cli.epsilon.or(s.defaults.epsilon).unwrap_or(DEFAULT_EPSILON)
}

fn seed(cli: &Cli, s: &Scenario) -> u64 {
    cli.seed.or(s.defaults.seed).unwrap_or(DEFAULT_SEED)
}

/// The network a command works on. With a bridged scenario and a
/// two-share partition the base network is implied.
fn choose_network<'a>(cli: &Cli, s: &'a Scenario, p: Option<&FlowPartition>) -> Result<&'a Network, Failure> {
    match (&s.braess, cli.network) {
        (None, Some(NetworkChoice::Base)) => Err(Failure::Usage(
            "--network base needs a scenario with a [braess] section".into(),
        )),
        (None, _) => Ok(&s.network),
        (Some(b), Some(NetworkChoice::Base)) => Ok(b.base()),
        (Some(_), Some(NetworkChoice::Augmented)) => Ok(&s.network),
        (Some(b), None) => Ok(match p {
            Some(p) if p.len() == b.base().route_count() && p.len() != s.network.route_count() => b.base(),
            _ => &s.network,
        }),
    }
}

fn analyze(cli: &Cli, path: &Path) -> Outcome {
    let s = load(path)?;
    let p = partition(cli)?;
    let net = choose_network(cli, &s, p.as_ref())?;
    let tol = tolerance(cli, &s);
    let eps = epsilon(cli, &s);
    let mut r = Report::new();
    report::add_network(&mut r, net);

    match p {
        Some(p) => {
            let times = net.route_travel_times(&p)?;
            let mean = net.mean_global_travel_time(&p)?;
            report::add_evaluation(&mut r, net, &p, &times, mean);
            report::add_equilibrium_check(&mut r, net, &is_equilibrium(net, &p, tol)?);
            match is_local_nash(net, &p, eps, tol) {
                Ok(n) => report::add_nash_check(&mut r, net, "nash", &n),
                Err(e @ (Error::DegenerateTest { .. } | Error::Domain { .. })) => report::add_nash_error(&mut r, "nash", &e),
                Err(e) => return Err(e.into()),
            }
            let pareto = is_local_pareto(
                net,
                &p,
                ParetoOptions {
                    radius: s.defaults.radius.unwrap_or(DEFAULT_PARETO_RADIUS),
                    samples: s.defaults.samples.unwrap_or(DEFAULT_PARETO_SAMPLES),
                    seed: seed(cli, &s),
                    equilibrium_tolerance: tol,
                    ..Default::default()
                },
            )?;
            report::add_pareto_check(&mut r, &pareto);
        }
        None => {
            let opts = EquilibriumOptions {
                tolerance: tol,
                epsilon: eps,
                ..Default::default()
            };
            report::add_equilibrium_result(&mut r, net, "wardrop", &find_wardrop(net, &opts)?);
            report::add_equilibrium_result(&mut r, net, "social_optimum", &social_optimum(net, &opts)?);
        }
    }
    emit(cli, &r.render(format(cli)))
}

fn braess(cli: &Cli, path: &Path) -> Outcome {
    let s = load(path)?;
    let b = braess_of(&s, "braess")?;
    let mut r = Report::new();
    report::add_braess(&mut r, &braess_condition(b)?);
    report::add_uniqueness(&mut r, &nash_uniqueness_certificate(b, scan_grid(cli, &s)?)?);
    emit(cli, &r.render(format(cli)))
}

fn control(cli: &Cli, path: &Path) -> Outcome {
    let s = load(path)?;
    let b = braess_of(&s, "control")?;
    let options = ControlOptions {
        scan_grid: scan_grid(cli, &s)?,
        epsilon: epsilon(cli, &s),
        tolerance: tolerance(cli, &s),
        samples: s.defaults.samples.unwrap_or(ControlOptions::default().samples),
        seed: seed(cli, &s),
        ..Default::default()
    };
    let result = optimal_control(b, &options)?;
    let mut r = Report::new();
    report::add_control(&mut r, &result);
    if !result.nash.holds {
        report::add_nash_check(&mut r, b.augmented(), "control_nash", &result.nash);
    }
    emit(cli, &r.render(format(cli)))?;
    if result.certified {
        Ok(())
    } else {
        Err(Failure::Uncertified)
    }
}

fn run_sweep(cli: &Cli, path: &Path) -> Outcome {
    let s = load(path)?;
    let spec = cli
        .grid
        .as_ref()
        .ok_or_else(|| Failure::Usage("sweep needs --grid var=lo:hi:points[,var=lo:hi:points]".into()))?;
    let grid: SweepGrid = spec.parse()?;
    let target = match (&s.braess, cli.network) {
        (Some(b), choice) => SweepTarget::Braess {
            scenario: b,
            base: choice == Some(NetworkChoice::Base),
        },
        (None, Some(NetworkChoice::Base)) => {
            return Err(Failure::Usage("--network base needs a scenario with a [braess] section".into()))
        }
        (None, _) => SweepTarget::Network(&s.network),
    };
    let options = SweepOptions {
        partition: partition(cli)?,
        threads: cli.threads,
        equilibrium: EquilibriumOptions {
            tolerance: tolerance(cli, &s),
            epsilon: epsilon(cli, &s),
            ..Default::default()
        },
    };
    emit(cli, &sweep(target, &grid, &options)?)
}

fn validate(cli: &Cli, path: &Path) -> Outcome {
    let text = read(path)?;
    let file = ScenarioFile::parse(&text).map_err(|e| located(path, e))?;
    let mut r = Report::new();
    let mut passed = true;
    for road in &file.roads {
        if let RoadBehavior::StationaryFlow(model) = road.behavior {
            let v = model.validate(DEFAULT_VALIDATION_GRID);
            passed &= v.passed;
            report::add_flux_validation(&mut r, &road.id, &v);
        }
    }
    let built = parse_scenario(&text);
    r.section("scenario").field("valid", passed && built.is_ok());
    match &built {
        Ok(s) => {
            r.field("routes", s.network.route_count()).field("braess", s.braess.is_some());
        }
        Err(e) => {
            r.field("error", e);
        }
    }
    emit(cli, &r.render(format(cli)))?;
    built.map(drop).map_err(Failure::from)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze { scenario } => analyze(&cli, scenario),
        Command::Braess { scenario } => braess(&cli, scenario),
        Command::Control { scenario } => control(&cli, scenario),
        Command::Sweep { scenario } => run_sweep(&cli, scenario),
        Command::Validate { scenario } => validate(&cli, scenario),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Io(path, e) => eprintln!("error: {}: {e}", path.display()),
                Failure::Parse(path, e) => eprintln!("parse error: {}:{e}", path.display()),
                Failure::Usage(msg) => eprintln!("usage error: {msg}"),
                Failure::Model(e) => eprintln!("error: {e}"),
                Failure::Uncertified => eprintln!("error: control result could not be certified"),
            }
            ExitCode::from(f.code())
        }
    }
}
