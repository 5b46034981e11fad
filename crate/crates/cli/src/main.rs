mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, RunConfig};

/// Loss-based objective priors: Fisher information, worth sweeps, prior grids,
/// worked scenarios and the validation suite.
#[derive(Debug, Parser)]
#[command(name = "lossprior", version, allow_negative_numbers = true)]
struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for outputs when --output is not given (default: $LOSSPRIOR_OUT_DIR, then .).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fisher information at a point, with its spectrum.
    Fisher(PointArgs),
    /// Prior density over a rectangular grid.
    PriorGrid(GridArgs),
    /// Exact, asymptotic and oracle worth over a decreasing list of deltas.
    Worth(WorthArgs),
    /// Run one of the worked scenarios D1..D5.
    Scenario(ScenarioArgs),
    /// Run the full invariant suite.
    Validate(ValidateArgs),
    /// Loss prior over a finite set of parameter values.
    DiscretePrior(DiscreteArgs),
}

#[derive(Debug, Args, Default)]
struct ModelArgs {
    #[arg(long)]
    model: Option<String>,
    /// CSV design matrix (header row, one column per covariate).
    #[arg(long)]
    design: Option<PathBuf>,
    /// Seed for a synthetic 25x2 standard-normal design.
    #[arg(long)]
    design_seed: Option<u64>,
    /// Fixed variances for normal_diag2.
    #[arg(long, value_delimiter = ',')]
    variances: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
struct GeometryArgs {
    /// euclidean, fisher_isotropic, block, fisher_units, design_based or data_dependent.
    #[arg(long)]
    geometry: Option<String>,
    /// Diagonal weights for the block geometry.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Row-major matrix for the fisher_units geometry.
    #[arg(long, value_delimiter = ',')]
    matrix: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beta_hat: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
struct OutputArgs {
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// finite_delta, min_eig, jeffreys or discrete.
    #[arg(long)]
    kind: Option<String>,
    /// One per parameter: lo:hi:n or lo:hi:n:log.
    #[arg(long = "axis")]
    axes: Vec<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Normalize by trapezoidal cell volumes.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct WorthArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Strictly decreasing list, e.g. 0.1,0.01,0.001.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    oracle_points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// D1..D5 or the full scenario name.
    name: Option<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Scale the Bernoulli analytic Fisher information (fault-injection fixture).
    #[arg(long, hide = true)]
    inject_fisher_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct DiscreteArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// A parameter value; repeat for each element (comma-separated coordinates).
    #[arg(long = "point")]
    points: Vec<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(lossprior::Error),
    ChecksFailed(String),
}

impl From<lossprior::Error> for CliError {
    fn from(e: lossprior::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(lossprior::Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e.root() {
                lossprior::Error::Numerics { .. } => 3,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::ChecksFailed(m) => write!(f, "check failure: {m}"),
        }
    }
}

fn model_flags(m: ModelArgs, c: &mut RunConfig) {
    c.model = m.model;
    c.design = m.design;
    c.design_seed = m.design_seed;
    c.variances = m.variances;
}

fn geometry_flags(g: GeometryArgs, c: &mut RunConfig) {
    c.geometry = g.geometry;
    c.weights = g.weights;
    c.matrix = g.matrix;
    c.beta_hat = g.beta_hat;
}

fn output_flags(o: OutputArgs, c: &mut RunConfig) {
    c.output = o.output;
    c.format = o.format;
}

fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("point '{s}' is not a comma-separated list of numbers")))
        })
        .collect()
}

fn flags_to_config(cli: Cli) -> Result<(String, RunConfig, Option<f64>), CliError> {
    let mut flags = RunConfig { out_dir: cli.out_dir, ..Default::default() };
    let mut fault = None;
    let name = match cli.command {
        Command::Fisher(a) => {
            model_flags(a.model, &mut flags);
            flags.theta = a.theta;
            output_flags(a.out, &mut flags);
            "fisher"
        }
        Command::PriorGrid(a) => {
            model_flags(a.model, &mut flags);
            geometry_flags(a.geometry, &mut flags);
            flags.kind = a.kind;
            flags.axes = (!a.axes.is_empty()).then_some(a.axes);
            flags.delta = a.delta;
            flags.normalize = a.normalize.then_some(true);
            output_flags(a.out, &mut flags);
            "prior-grid"
        }
        Command::Worth(a) => {
            model_flags(a.model, &mut flags);
            geometry_flags(a.geometry, &mut flags);
            flags.theta = a.theta;
            flags.deltas = a.deltas;
            flags.oracle_points = a.oracle_points;
            flags.seed = a.seed;
            output_flags(a.out, &mut flags);
            "worth"
        }
        Command::Scenario(a) => {
            flags.scenario = a.name;
            output_flags(a.out, &mut flags);
            "scenario"
        }
        Command::Validate(a) => {
            flags.seed = a.seed;
            flags.output = a.output;
            fault = a.inject_fisher_scale;
            "validate"
        }
        Command::DiscretePrior(a) => {
            model_flags(a.model, &mut flags);
            if !a.points.is_empty() {
                flags.points = Some(a.points.iter().map(|p| parse_point(p)).collect::<Result<_, _>>()?);
            }
            output_flags(a.out, &mut flags);
            "discrete-prior"
        }
    };
    flags.command = Some(name.to_string());
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok((name.to_string(), base.overlay(&flags), fault))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, mut config, fault) = flags_to_config(cli)?;
    config.resolve_defaults()?;
    match name.as_str() {
        "fisher" => commands::fisher(&config),
        "prior-grid" => commands::prior_grid(&config),
        "worth" => commands::worth(&config),
        "scenario" => commands::scenario(&config),
        "validate" => commands::validate(&config, fault),
        _ => commands::discrete_prior(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lossprior: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
