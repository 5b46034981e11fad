//! Statistical families: log-densities, sampling, and Kullback–Leibler divergences.
//!
//! Every built-in carries a closed-form KL. The numeric routes (adaptive quadrature over
//! the observation space, seeded Monte Carlo) exist to cross-check those closed forms and
//! to serve user-supplied models that have none.

mod builtin;
mod numeric;

use std::fmt;
use std::ops::Deref;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use builtin::{
    logistic_weighted_gram, Bernoulli, BivariateNormalCorr, LogisticRegression, NormalDiag2, NormalMean, NormalMuPrec,
    NormalMuSigma, NormalMuVar, Poisson,
};

use crate::error::{Error, Result};
use crate::matrix::SpdMatrix;

/// Minimum distance from an open boundary at which a parameter may be evaluated.
pub const DOMAIN_MARGIN: f64 = 1e-8;

/// A point in an open parameter space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Contract("parameter point needs at least one coordinate".into()));
        }
        if let Some(x) = coords.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate {x}")));
        }
        Ok(ParamPoint(coords))
    }

    pub fn scalar(x: f64) -> Result<Self> {
        ParamPoint::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// `self + h`, coordinatewise.
    pub fn offset(&self, h: &[f64]) -> Result<Self> {
        if h.len() != self.dim() {
            return Err(Error::Shape(format!(
                "offset has length {}, point has dimension {}",
                h.len(),
                self.dim()
            )));
        }
        ParamPoint::new(self.0.iter().zip(h).map(|(a, b)| a + b).collect())
    }
}

impl Deref for ParamPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
    pub const SYMMETRIC_UNIT: Interval = Interval { lo: -1.0, hi: 1.0 };

    pub fn contains_with_margin(&self, x: f64, margin: f64) -> bool {
        x - margin >= self.lo && x + margin <= self.hi
    }
}

/// Per-coordinate open bounds of a parameter space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Domain(pub Vec<Interval>);

impl Domain {
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.0.len()
            && theta
                .iter()
                .zip(&self.0)
                .all(|(x, iv)| x.is_finite() && iv.contains_with_margin(*x, DOMAIN_MARGIN))
    }

    /// Errors with `Error::Domain` when `theta` is outside the domain or too close to its boundary.
    pub fn check(&self, model: &str, theta: &[f64]) -> Result<()> {
        if theta.len() != self.0.len() {
            return Err(Error::Shape(format!(
                "{model} expects {} coordinates, got {}",
                self.0.len(),
                theta.len()
            )));
        }
        if !self.contains(theta) {
            return Err(Error::Domain(format!(
                "{theta:?} is not inside the domain of {model} (margin {DOMAIN_MARGIN:e})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSpace {
    RealLine,
    PositiveReals,
    UnitIntervalBinary,
    IntegerCounts,
    RealPlane,
}

/// How [`kl_divergence`] evaluates a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum KlMode {
    ClosedForm,
    Quadrature,
    MonteCarlo { draws: usize, seed: u64 },
}

/// A parametric family f(. | theta).
pub trait StatisticalModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("theta_{i}")).collect()
    }

    fn domain(&self) -> Domain;

    fn observation_space(&self) -> ObservationSpace;

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64;

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;

    fn kl_closed_form(&self, _theta0: &[f64], _theta1: &[f64]) -> Option<f64> {
        None
    }

    /// An exact finite-sum KL for models whose likelihood factorizes over a fixed design.
    /// Numeric modes use it in place of integrating over the observation space.
    fn kl_factorized(&self, _theta0: &[f64], _theta1: &[f64]) -> Option<f64> {
        None
    }

    fn analytic_fisher(&self, _theta: &[f64]) -> Option<SpdMatrix> {
        None
    }

    /// Location and scale of each observation coordinate, used to center quadrature maps.
    fn quadrature_hint(&self, _theta: &[f64]) -> Vec<(f64, f64)> {
        match self.observation_space() {
            ObservationSpace::RealPlane => vec![(0.0, 1.0); 2],
            _ => vec![(0.0, 1.0)],
        }
    }
}

/// A model together with the route used to evaluate its KL divergence.
#[derive(Clone)]
pub struct ModelSpec {
    model: Arc<dyn StatisticalModel>,
    kl_mode: KlMode,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.model.name())
            .field("dim", &self.model.dim())
            .field("kl_mode", &self.kl_mode)
            .finish()
    }
}

/// Construction options for [`ModelSpec::from_name`].
#[derive(Debug, Clone, Default)]
pub struct ModelOptions {
    /// Design matrix for `logistic_regression` (rows are observations).
    pub design: Option<DMatrix<f64>>,
    /// Fixed per-component variances for `normal_diag2`.
    pub variances: Option<Vec<f64>>,
}

pub const BUILTIN_NAMES: &[&str] = &[
    "normal_mean",
    "normal_mu_var",
    "normal_mu_prec",
    "normal_mu_sigma",
    "bernoulli",
    "poisson",
    "logistic_regression",
    "bivariate_normal_corr",
    "normal_diag2",
];

impl ModelSpec {
    /// Wraps a model; the KL mode is closed form when the model provides one, quadrature otherwise.
    pub fn new(model: Arc<dyn StatisticalModel>, has_closed_form: bool) -> Self {
        let kl_mode = if has_closed_form {
            KlMode::ClosedForm
        } else {
            KlMode::Quadrature
        };
        ModelSpec { model, kl_mode }
    }

    pub fn with_kl_mode(mut self, mode: KlMode) -> Self {
        self.kl_mode = mode;
        self
    }

    pub fn normal_mean() -> Self {
        ModelSpec::new(Arc::new(NormalMean), true)
    }

    pub fn normal_mu_var() -> Self {
        ModelSpec::new(Arc::new(NormalMuVar), true)
    }

    pub fn normal_mu_prec() -> Self {
        ModelSpec::new(Arc::new(NormalMuPrec), true)
    }

    pub fn normal_mu_sigma() -> Self {
        ModelSpec::new(Arc::new(NormalMuSigma), true)
    }

    pub fn bernoulli() -> Self {
        ModelSpec::new(Arc::new(Bernoulli), true)
    }

    pub fn poisson() -> Self {
        ModelSpec::new(Arc::new(Poisson), true)
    }

    pub fn bivariate_normal_corr() -> Self {
        ModelSpec::new(Arc::new(BivariateNormalCorr), true)
    }

    pub fn logistic_regression(design: DMatrix<f64>) -> Result<Self> {
        Ok(ModelSpec::new(Arc::new(LogisticRegression::new(design)?), true))
    }

    pub fn normal_diag2(var1: f64, var2: f64) -> Result<Self> {
        Ok(ModelSpec::new(Arc::new(NormalDiag2::new(var1, var2)?), true))
    }

    /// Looks up a built-in by name.
    pub fn from_name(name: &str, opts: &ModelOptions) -> Result<Self> {
        match name {
            "normal_mean" => Ok(Self::normal_mean()),
            "normal_mu_var" => Ok(Self::normal_mu_var()),
            "normal_mu_prec" => Ok(Self::normal_mu_prec()),
            "normal_mu_sigma" => Ok(Self::normal_mu_sigma()),
            "bernoulli" => Ok(Self::bernoulli()),
            "poisson" => Ok(Self::poisson()),
            "bivariate_normal_corr" => Ok(Self::bivariate_normal_corr()),
            "logistic_regression" => {
                let x = opts.design.clone().ok_or_else(|| {
                    Error::Contract("logistic_regression requires a design matrix".into())
                })?;
                Self::logistic_regression(x)
            }
            "normal_diag2" => match opts.variances.as_deref() {
                Some([a, b]) => Self::normal_diag2(*a, *b),
                Some(v) => Err(Error::Contract(format!(
                    "normal_diag2 takes exactly two variances, got {}",
                    v.len()
                ))),
                None => Self::normal_diag2(1.0, 0.25),
            },
            other => Err(Error::Contract(format!(
                "unknown model '{other}'; expected one of {}",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    pub fn model(&self) -> &dyn StatisticalModel {
        self.model.as_ref()
    }

    pub fn shared_model(&self) -> Arc<dyn StatisticalModel> {
        Arc::clone(&self.model)
    }

    pub fn name(&self) -> &str {
        self.model.name()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn domain(&self) -> Domain {
        self.model.domain()
    }

    pub fn kl_mode(&self) -> KlMode {
        self.kl_mode
    }

    pub fn param_names(&self) -> Vec<String> {
        self.model.param_names()
    }

    pub fn observation_space(&self) -> ObservationSpace {
        self.model.observation_space()
    }

    pub fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        self.model.log_density(theta, obs)
    }

    pub fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        self.model.analytic_fisher(theta)
    }

    pub fn check_domain(&self, theta: &[f64]) -> Result<()> {
        self.domain().check(self.name(), theta)
    }

    pub fn kl(&self, theta0: &[f64], theta1: &[f64]) -> Result<f64> {
        kl_divergence(self, theta0, theta1)
    }
}

/// D_KL(f(. | theta0) || f(. | theta1)).
pub fn kl_divergence(model: &ModelSpec, theta0: &[f64], theta1: &[f64]) -> Result<f64> {
    model.check_domain(theta0)?;
    model.check_domain(theta1)?;
    if theta0 == theta1 {
        return Ok(0.0);
    }
    let m = model.model();
    let value = match model.kl_mode {
        KlMode::ClosedForm => match m.kl_closed_form(theta0, theta1) {
            Some(v) => v,
            None => numeric::kl_quadrature(m, theta0, theta1)?,
        },
        KlMode::Quadrature => match m.kl_factorized(theta0, theta1) {
            Some(v) => v,
            None => numeric::kl_quadrature(m, theta0, theta1)?,
        },
        KlMode::MonteCarlo { draws, seed } => match m.kl_factorized(theta0, theta1) {
            Some(v) => v,
            None => numeric::kl_monte_carlo(m, theta0, theta1, draws, seed)?,
        },
    };
    if !value.is_finite() {
        return Err(Error::numerics(
            format!("{} produced a non-finite KL divergence", model.name()),
            value,
        ));
    }
    // rounding can push an exact zero slightly negative
    Ok(value.max(0.0))
}

/// Total probability mass of f(. | theta) over its observation space, by quadrature.
pub fn total_mass(model: &ModelSpec, theta: &[f64]) -> Result<f64> {
    model.check_domain(theta)?;
    numeric::total_mass(model.model(), theta)
}

/// `n` independent draws from f(. | theta); identical seeds give identical output.
pub fn sample(model: &ModelSpec, theta: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    model.check_domain(theta)?;
    if n == 0 {
        return Err(Error::Contract("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| model.model().sample_one(theta, &mut rng)).collect())
}

/// Reads a design matrix from CSV: a header row, then one column per covariate.
pub fn read_design_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_design_csv(file)
}

pub fn parse_design_csv<R: std::io::Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let ncols = rdr.headers()?.len();
    let mut data = Vec::new();
    let mut nrows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != ncols {
            return Err(Error::Shape(format!(
                "design row {} has {} fields, header has {ncols}",
                line + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Contract(format!("design row {}: cannot parse '{field}'", line + 1))
            })?;
            data.push(v);
        }
        nrows += 1;
    }
    if nrows == 0 || ncols == 0 {
        return Err(Error::Shape("design matrix is empty".into()));
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &data))
}
