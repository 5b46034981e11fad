//! Run configuration: a TOML file overlaid by command-line flags, resolved into library
//! types and echoed verbatim into every output.

use std::path::{Path, PathBuf};

use lossprior::geometry::ExclusionGeometry;
use lossprior::model_zoo::{read_design_csv, ModelOptions};
use lossprior::nalgebra::DMatrix;
use lossprior::priors::{linspace, logspace};
use lossprior::scenarios::{synthetic_design, ScenarioConfig, SCENARIO_NAMES};
use lossprior::worth::DEFAULT_SEED;
use lossprior::{ModelSpec, SpdMatrix};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "LOSSPRIOR_OUT_DIR";
pub const DEFAULT_DESIGN_SHAPE: (usize, usize) = (25, 2);
pub const DEFAULT_DESIGN_SEED: u64 = 7_311;
pub const DEFAULT_ORACLE_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every knob any command reads. Unset fields fall back to defaults at resolution time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// CSV design matrix for logistic_regression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    /// Seed for a synthetic standard-normal design when no CSV is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design_shape: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Row-major matrix for the fisher_units geometry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// One `lo:hi:n` or `lo:hi:n:log` entry per parameter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_config: Option<ScenarioConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $flags:expr, $($field:ident),+) => {
        $( if $flags.$field.is_some() { $base.$field = $flags.$field.clone(); } )+
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(mut self, flags: &RunConfig) -> Self {
        overlay!(
            self, flags, command, model, theta, design, design_seed, design_shape, variances,
            geometry, weights, matrix, beta_hat, kind, axes, delta, deltas, normalize, seed,
            oracle_points, points, scenario, scenario_config, format, output, out_dir
        );
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn require_model(&self) -> Result<&str, CliError> {
        self.model
            .as_deref()
            .ok_or_else(|| CliError::Usage("a model is required (--model NAME)".into()))
    }

    pub fn require_theta(&self) -> Result<&[f64], CliError> {
        self.theta
            .as_deref()
            .ok_or_else(|| CliError::Usage("a parameter point is required (--theta x,y,...)".into()))
    }

    /// Fills in the defaults a command will actually use, so the echoed config is complete.
    pub fn resolve_defaults(&mut self) -> Result<(), CliError> {
        if self.model.as_deref() == Some("logistic_regression") && self.design.is_none() {
            self.design_seed.get_or_insert(DEFAULT_DESIGN_SEED);
            self.design_shape
                .get_or_insert([DEFAULT_DESIGN_SHAPE.0, DEFAULT_DESIGN_SHAPE.1]);
        }
        if self.model.as_deref() == Some("normal_diag2") {
            self.variances.get_or_insert(vec![1.0, 0.25]);
        }
        match self.command.as_deref() {
            Some("prior-grid") => {
                self.geometry.get_or_insert_with(|| "euclidean".into());
                self.kind.get_or_insert_with(|| "min_eig".into());
                self.normalize.get_or_insert(false);
                self.format.get_or_insert(Format::Csv);
            }
            Some("worth") => {
                self.geometry.get_or_insert_with(|| "euclidean".into());
                self.oracle_points.get_or_insert(DEFAULT_ORACLE_POINTS);
                self.format.get_or_insert(Format::Csv);
            }
            Some("discrete-prior") => {
                self.format.get_or_insert(Format::Json);
            }
            _ => {}
        }
        if let Some(name) = &self.scenario {
            let full = lossprior::scenarios::resolve_name(name)?;
            self.scenario = Some(full.to_string());
        }
        self.seed.get_or_insert(DEFAULT_SEED);
        Ok(())
    }

    pub fn design(&self) -> Result<Option<DMatrix<f64>>, CliError> {
        if let Some(path) = &self.design {
            return Ok(Some(read_design_csv(path)?));
        }
        match (self.design_seed, self.design_shape) {
            (Some(seed), Some([r, c])) => Ok(Some(synthetic_design(r, c, seed)?)),
            (Some(seed), None) => Ok(Some(synthetic_design(
                DEFAULT_DESIGN_SHAPE.0,
                DEFAULT_DESIGN_SHAPE.1,
                seed,
            )?)),
            _ => Ok(None),
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let opts = ModelOptions {
            design: self.design()?,
            variances: self.variances.clone(),
        };
        Ok(ModelSpec::from_name(self.require_model()?, &opts)?)
    }

    pub fn geometry(&self, model: &ModelSpec) -> Result<ExclusionGeometry, CliError> {
        let kind = self.geometry.as_deref().unwrap_or("euclidean");
        let d = model.dim();
        let need = |field: &Option<Vec<f64>>, flag: &str| {
            field
                .clone()
                .ok_or_else(|| CliError::Usage(format!("geometry '{kind}' requires --{flag}")))
        };
        Ok(match kind {
            "euclidean" => ExclusionGeometry::Euclidean,
            "fisher_isotropic" => ExclusionGeometry::FisherIsotropic,
            "block" => ExclusionGeometry::Block(need(&self.weights, "weights")?),
            "fisher_units" => {
                let m = need(&self.matrix, "matrix")?;
                if m.len() != d * d {
                    return Err(CliError::Usage(format!(
                        "--matrix needs {} entries for a {d}-parameter model",
                        d * d
                    )));
                }
                ExclusionGeometry::FisherUnits(SpdMatrix::from_row_slice(d, &m)?)
            }
            "design_based" | "data_dependent" => {
                let design = self.design()?.ok_or_else(|| {
                    CliError::Usage(format!("geometry '{kind}' requires a design (--design or --design-seed)"))
                })?;
                if kind == "design_based" {
                    ExclusionGeometry::DesignBased(design)
                } else {
                    ExclusionGeometry::DataDependent {
                        design,
                        beta_hat: need(&self.beta_hat, "beta-hat")?,
                    }
                }
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown geometry '{other}'; expected euclidean, fisher_isotropic, block, fisher_units, design_based or data_dependent"
                )))
            }
        })
    }

    pub fn axes(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let specs = self
            .axes
            .as_ref()
            .ok_or_else(|| CliError::Usage("at least one --axis lo:hi:n is required".into()))?;
        specs.iter().map(|s| parse_axis(s)).collect()
    }

    /// Where to write: explicit output, else the output directory joined with `default_name`.
    /// The directory comes from the flag or config, then the environment, then the cwd.
    pub fn output_path(&self, default_name: &str) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        let dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        dir.join(default_name)
    }
}

/// `lo:hi:n` (linear) or `lo:hi:n:log`.
pub fn parse_axis(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("axis '{spec}' is not lo:hi:n or lo:hi:n:log"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 && parts.len() != 4 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || hi.is_nan() || lo.is_nan() || hi < lo || (n > 1 && hi == lo) {
        return Err(bad());
    }
    match parts.get(3).map(|s| s.trim()) {
        None | Some("lin") => Ok(linspace(lo, hi, n)),
        Some("log") if lo > 0.0 => Ok(logspace(lo, hi, n)),
        _ => Err(bad()),
    }
}

pub fn known_scenarios() -> String {
    SCENARIO_NAMES.join(", ")
}
