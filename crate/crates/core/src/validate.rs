//! The invariant suite behind the `validate` command: every module's properties evaluated
//! at fixed points and seeds, assembled into a report with no timings so that repeated
//! runs are byte-identical.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;

use crate::error::Result;
use crate::fisher::{expansion_residual, fisher_information, fisher_numeric, DEFAULT_FD_STEP};
use crate::geometry::{transform_geometry, whitened_spectrum, ExclusionGeometry, Jacobian};
use crate::matrix::SpdMatrix;
use crate::model_zoo::{
    kl_divergence, Domain, KlMode, ModelSpec, ObservationSpace, StatisticalModel,
};
use crate::priors::{
    discrete_loss_prior, jeffreys_prior, linspace, loglog_slope, logspace, loss_prior_density,
    min_eig_prior, DiscreteElement,
};
use crate::scenarios::{run_scenario, synthetic_design, Check, CheckStatus, ScenarioConfig, SCENARIO_NAMES};
use crate::worth::{
    convergence_sweep, delta_worth_exact, delta_worth_oracle, DEFAULT_SEED,
};

/// Residual ratios below this are indistinguishable from rounding noise.
pub const RESIDUAL_NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Multiplies the analytic Fisher information of the Bernoulli model; a fault fixture.
    pub inject_fisher_scale: Option<f64>,
    pub scenarios: ScenarioConfig,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            seed: DEFAULT_SEED,
            inject_fisher_scale: None,
            scenarios: ScenarioConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suite {
    pub name: String,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub pass: usize,
    pub fail: usize,
    pub paper_discrepancy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub options: ValidateOptions,
    pub suites: Vec<Suite>,
    pub totals: Totals,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.totals.fail == 0
    }

    pub fn failing_checks(&self) -> Vec<String> {
        self.suites
            .iter()
            .flat_map(|s| {
                s.checks
                    .iter()
                    .filter(|c| c.status == CheckStatus::Fail)
                    .map(move |c| format!("{}: {}", s.name, c.description))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Delegates to `inner` but reports a scaled analytic Fisher information.
#[derive(Debug)]
pub struct ScaledFisher {
    pub inner: Arc<dyn StatisticalModel>,
    pub factor: f64,
}

impl StatisticalModel for ScaledFisher {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn param_names(&self) -> Vec<String> {
        self.inner.param_names()
    }
    fn domain(&self) -> Domain {
        self.inner.domain()
    }
    fn observation_space(&self) -> ObservationSpace {
        self.inner.observation_space()
    }
    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        self.inner.log_density(theta, obs)
    }
    fn sample_one(&self, theta: &[f64], rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.inner.sample_one(theta, rng)
    }
    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        self.inner.kl_closed_form(theta0, theta1)
    }
    fn kl_factorized(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        self.inner.kl_factorized(theta0, theta1)
    }
    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        self.inner.analytic_fisher(theta).and_then(|m| m.scaled(self.factor).ok())
    }
    fn quadrature_hint(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        self.inner.quadrature_hint(theta)
    }
}

/// Every built-in model with five interior points.
pub fn validation_cases(seed: u64) -> Result<Vec<(ModelSpec, Vec<Vec<f64>>)>> {
    let design = synthetic_design(25, 2, seed)?;
    Ok(vec![
        (ModelSpec::normal_mean(), vec![vec![-2.0], vec![-0.5], vec![0.0], vec![1.0], vec![3.0]]),
        (
            ModelSpec::normal_mu_var(),
            vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.3, 0.25], vec![2.0, 4.0]],
        ),
        (
            ModelSpec::normal_mu_prec(),
            vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.3, 0.25], vec![2.0, 4.0]],
        ),
        (
            ModelSpec::normal_mu_sigma(),
            vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.3, 0.3], vec![2.0, 3.0]],
        ),
        (ModelSpec::bernoulli(), vec![vec![0.1], vec![0.3], vec![0.5], vec![0.7], vec![0.9]]),
        (ModelSpec::poisson(), vec![vec![0.5], vec![1.0], vec![3.0], vec![7.0], vec![20.0]]),
        (
            ModelSpec::bivariate_normal_corr(),
            vec![vec![-0.9], vec![-0.5], vec![0.0], vec![0.5], vec![0.9]],
        ),
        (
            ModelSpec::logistic_regression(design)?,
            vec![vec![0.0, 0.0], vec![0.5, -0.5], vec![-1.0, 1.0], vec![1.0, 0.3], vec![-0.4, -0.8]],
        ),
        (
            ModelSpec::normal_diag2(1.0, 0.25)?,
            vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-2.0, 0.5], vec![0.3, 3.0], vec![5.0, -4.0]],
        ),
    ])
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let n = v.norm();
    v.iter().map(|x| x / n).collect()
}

/// |KL - h'Ih/2| / |h|^2 along `dir` at radius r.
pub fn residual_ratio_at(model: &ModelSpec, theta: &[f64], dir: &[f64], r: f64) -> Result<f64> {
    let h: Vec<f64> = dir.iter().map(|x| x * r).collect();
    Ok(expansion_residual(model, theta, &h)?.abs() / (r * r))
}

/// The expansion remainder shrinks at least fivefold from r = 1e-2 to 1e-3, or both
/// ratios sit in rounding noise (exactly quadratic KL).
pub fn expansion_ok(coarse: f64, fine: f64) -> bool {
    fine <= coarse / 5.0 || (coarse <= RESIDUAL_NOISE_FLOOR && fine <= RESIDUAL_NOISE_FLOOR)
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn run_validation(opts: &ValidateOptions) -> Result<ValidationReport> {
    let mut cases = validation_cases(opts.seed)?;
    if let Some(factor) = opts.inject_fisher_scale {
        for (m, _) in cases.iter_mut() {
            if m.name() == "bernoulli" {
                let wrapped = Arc::new(ScaledFisher { inner: m.shared_model(), factor });
                *m = ModelSpec::new(wrapped, true);
            }
        }
    }
    let suites = vec![
        kl_suite(&cases, opts.seed)?,
        fisher_suite(&cases)?,
        expansion_suite(&cases, opts.seed)?,
        geometry_suite(opts.seed)?,
        worth_suite(opts.seed)?,
        priors_suite()?,
        scenario_suite(&opts.scenarios)?,
        discrepancy_suite()?,
    ];
    let mut totals = Totals { pass: 0, fail: 0, paper_discrepancy: 0 };
    for c in suites.iter().flat_map(|s| &s.checks) {
        match c.status {
            CheckStatus::Pass => totals.pass += 1,
            CheckStatus::Fail => totals.fail += 1,
            CheckStatus::PaperDiscrepancy => totals.paper_discrepancy += 1,
        }
    }
    Ok(ValidationReport { options: opts.clone(), suites, totals })
}

fn kl_suite(cases: &[(ModelSpec, Vec<Vec<f64>>)], seed: u64) -> Result<Suite> {
    let mut checks = Vec::new();
    for (model, points) in cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let numeric = model.clone().with_kl_mode(KlMode::Quadrature);
        let mut max_err: f64 = 0.0;
        let mut min_kl = f64::INFINITY;
        let mut self_kl: f64 = 0.0;
        for p in points {
            self_kl = self_kl.max(kl_divergence(model, p, p)?);
            let dir = random_unit(&mut rng, p.len());
            let q: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + 0.05 * b * a.abs().max(0.5)).collect();
            if !model.domain().contains(&q) {
                continue;
            }
            let exact = kl_divergence(model, p, &q)?;
            let quad = kl_divergence(&numeric, p, &q)?;
            max_err = max_err.max((exact - quad).abs());
            min_kl = min_kl.min(exact);
        }
        checks.push(Check::new(
            format!("default and quadrature KL agree ({})", model.name()),
            json!({ "max_abs_difference": max_err, "tolerance": 1e-6 }),
            max_err <= 1e-6,
        ));
        checks.push(Check::new(
            format!("KL is positive between distinct points ({})", model.name()),
            json!({ "min_kl": min_kl, "max_self_kl": self_kl }),
            min_kl > 0.0 && self_kl == 0.0,
        ));
    }
    Ok(Suite { name: "model_zoo".into(), checks })
}

fn fisher_suite(cases: &[(ModelSpec, Vec<Vec<f64>>)]) -> Result<Suite> {
    let mut checks = Vec::new();
    for (model, points) in cases {
        let mut worst: f64 = 0.0;
        for p in points {
            let analytic = fisher_information(model, p)?;
            let numeric = fisher_numeric(model, p, DEFAULT_FD_STEP)?;
            worst = worst.max(rel_frobenius(&numeric, analytic.as_matrix()));
        }
        checks.push(Check::new(
            format!("analytic/numeric Fisher agreement ({})", model.name()),
            json!({ "max_relative_error": worst, "tolerance": 1e-5 }),
            worst <= 1e-5,
        ));
    }
    Ok(Suite { name: "fisher".into(), checks })
}

fn expansion_suite(cases: &[(ModelSpec, Vec<Vec<f64>>)], seed: u64) -> Result<Suite> {
    let mut checks = Vec::new();
    for (model, points) in cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut rows = Vec::new();
        let mut ok = true;
        for p in points {
            let dir = random_unit(&mut rng, p.len());
            let coarse = residual_ratio_at(model, p, &dir, 1e-2)?;
            let fine = residual_ratio_at(model, p, &dir, 1e-3)?;
            ok &= expansion_ok(coarse, fine);
            rows.push(json!({ "theta": p, "ratio_1e-2": coarse, "ratio_1e-3": fine }));
        }
        checks.push(Check::new(
            format!("quadratic KL expansion remainder shrinks ({})", model.name()),
            json!({ "points": rows, "noise_floor": RESIDUAL_NOISE_FLOOR }),
            ok,
        ));
    }
    Ok(Suite { name: "expansion".into(), checks })
}

/// Largest relative spectrum change over 20 seeded affine maps, plus the variance to
/// precision map for the normal model.
pub fn tensor_invariance_errors(seed: u64) -> Result<(f64, f64)> {
    let model = ModelSpec::normal_mu_var();
    let theta = [0.3, 1.5];
    let info = fisher_information(&model, &theta)?;
    let a = ExclusionGeometry::Block(vec![1.0, 4.0]).evaluate(&model, &theta)?;
    let base = whitened_spectrum(&info, &a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut affine: f64 = 0.0;
    let mut made = 0;
    while made < 20 {
        let entries: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let Ok(j) = Jacobian::from_row_slice(2, &entries) else { continue };
        if j.determinant().abs() < 0.1 {
            continue;
        }
        made += 1;
        let spectrum = whitened_spectrum(&transform_geometry(&info, &j)?, &transform_geometry(&a, &j)?)?;
        for (x, y) in base.iter().zip(&spectrum) {
            affine = affine.max((x - y).abs() / x.abs());
        }
    }
    let v = theta[1];
    let j = Jacobian::from_row_slice(2, &[1.0, 0.0, 0.0, -1.0 / (v * v)])?;
    let info_tau = fisher_information(&ModelSpec::normal_mu_prec(), &[theta[0], 1.0 / v])?;
    let spectrum = whitened_spectrum(&info_tau, &transform_geometry(&a, &j)?)?;
    let mut reparam: f64 = 0.0;
    for (x, y) in base.iter().zip(&spectrum) {
        reparam = reparam.max((x - y).abs() / x.abs());
    }
    Ok((affine, reparam))
}

fn geometry_suite(seed: u64) -> Result<Suite> {
    let (affine, reparam) = tensor_invariance_errors(seed)?;
    let mut checks = vec![
        Check::new(
            "whitened spectrum invariant under 20 affine maps",
            json!({ "max_relative_error": affine, "tolerance": 1e-8 }),
            affine <= 1e-8,
        ),
        Check::new(
            "whitened spectrum invariant under v -> 1/v",
            json!({ "max_relative_error": reparam, "tolerance": 1e-8 }),
            reparam <= 1e-8,
        ),
    ];
    let mut worst: f64 = 0.0;
    for (m, theta) in [
        (ModelSpec::normal_mu_var(), vec![0.0, 2.0]),
        (ModelSpec::bernoulli(), vec![0.3]),
        (ModelSpec::bivariate_normal_corr(), vec![0.7]),
    ] {
        let v = min_eig_prior(&m, &ExclusionGeometry::FisherIsotropic, &theta)?;
        worst = worst.max((v - 1.0).abs());
    }
    checks.push(Check::new(
        "Fisher-isotropic geometry whitens to the identity",
        json!({ "max_abs_error": worst, "tolerance": 1e-12 }),
        worst <= 1e-12,
    ));
    Ok(Suite { name: "geometry".into(), checks })
}

fn worth_suite(seed: u64) -> Result<Suite> {
    let mut checks = Vec::new();
    for (model, theta) in [
        (ModelSpec::normal_mean(), vec![0.0]),
        (ModelSpec::bernoulli(), vec![0.5]),
        (ModelSpec::poisson(), vec![3.0]),
    ] {
        let info = fisher_information(&model, &theta)?.get(0, 0);
        let mut errs = Vec::new();
        for delta in [1e-2, 1e-3] {
            let u = delta_worth_exact(&model, &theta, &ExclusionGeometry::Euclidean, delta)?.value;
            errs.push((u / (0.5 * info * delta * delta) - 1.0).abs());
        }
        checks.push(Check::new(
            format!("one-dimensional worth approaches I delta^2 / 2 ({})", model.name()),
            json!({ "relative_error_1e-2": errs[0], "relative_error_1e-3": errs[1], "tolerances": [0.02, 0.001] }),
            errs[0] <= 0.02 && errs[1] <= 0.001,
        ));
    }
    let cases = [
        (ModelSpec::normal_mu_var(), vec![0.0, 1.0], ExclusionGeometry::Block(vec![1.0, 1.0])),
        (ModelSpec::normal_mu_var(), vec![0.0, 1.0], ExclusionGeometry::Block(vec![1.0, 4.0])),
        (ModelSpec::normal_mu_var(), vec![0.0, 1.0], ExclusionGeometry::Block(vec![1.0, 10.0])),
        (ModelSpec::normal_diag2(1.0, 0.25)?, vec![0.0, 0.0], ExclusionGeometry::Euclidean),
    ];
    for (model, theta, geom) in &cases {
        let sweep = convergence_sweep(model, theta, geom, &[1e-1, 1e-2, 1e-3])?;
        let last = sweep.last().expect("three rows").ratio;
        let exact = delta_worth_exact(model, theta, geom, 0.1)?.value;
        let oracle = delta_worth_oracle(model, theta, geom, 0.1, 10_000, seed)?.value;
        checks.push(Check::new(
            format!("exact worth converges to the eigenvalue form ({}, {})", model.name(), geom.descriptor()),
            json!({ "ratios": sweep.iter().map(|r| r.ratio).collect::<Vec<_>>(), "tolerance": 0.01 }),
            (last - 1.0).abs() <= 0.01,
        ));
        checks.push(Check::new(
            format!("exact optimizer matches the boundary oracle ({}, {})", model.name(), geom.descriptor()),
            json!({ "exact": exact, "oracle": oracle, "difference": oracle - exact, "tolerance": 1e-6 }),
            (oracle - exact).abs() <= 1e-6 && exact <= oracle + 1e-12,
        ));
    }
    Ok(Suite { name: "worth".into(), checks })
}

/// Poisson means {1, 2, 3}: worths and unnormalized masses.
pub fn poisson_discrete_check() -> Result<(Vec<f64>, Vec<f64>)> {
    let elements: Vec<DiscreteElement> = [1.0, 2.0, 3.0]
        .iter()
        .map(|l| DiscreteElement { label: format!("lambda={l}"), model: ModelSpec::poisson(), theta: vec![*l] })
        .collect();
    let p = discrete_loss_prior(&elements)?;
    Ok((p.worths, p.unnormalized))
}

fn priors_suite() -> Result<Suite> {
    let lin4 = loss_prior_density(1e-4)? / 1e-4;
    let lin8 = loss_prior_density(1e-8)? / 1e-8;
    let mut jeff: f64 = 0.0;
    for v in logspace(0.25, 4.0, 41) {
        let lhs = jeffreys_prior(&ModelSpec::normal_mu_var(), &[0.0, v])?;
        let rhs = jeffreys_prior(&ModelSpec::normal_mu_prec(), &[0.0, 1.0 / v])? / (v * v);
        jeff = jeff.max((lhs - rhs).abs() / lhs);
    }
    let (worths, masses) = poisson_discrete_check()?;
    let u1 = 1.0 - 2f64.ln();
    let err = (worths[0] - u1).abs().max((masses[0] - u1.exp_m1()).abs());
    let total: f64 = masses.iter().sum();
    Ok(Suite {
        name: "priors".into(),
        checks: vec![
            Check::new(
                "exp(u) - 1 linearizes for small u",
                json!({ "ratio_1e-4": lin4, "ratio_1e-8": lin8 }),
                (lin4 - 1.0).abs() <= 1e-3 && (lin8 - 1.0).abs() <= 1e-7,
            ),
            Check::new(
                "volume prior consistent under v -> 1/v",
                json!({ "max_relative_error": jeff, "tolerance": 1e-8 }),
                jeff <= 1e-8,
            ),
            Check::new(
                "discrete Poisson {1,2,3} worth of 1 is 1 - ln 2",
                json!({ "worths": worths, "unnormalized": masses, "abs_error": err, "tolerance": 1e-12 }),
                err <= 1e-12 && masses.iter().all(|m| *m > 0.0) && total > 0.0,
            ),
        ],
    })
}

fn scenario_suite(config: &ScenarioConfig) -> Result<Suite> {
    let mut checks = Vec::new();
    for name in SCENARIO_NAMES {
        let report = run_scenario(name, config)?;
        for mut c in report.checks {
            c.description = format!("{name}: {}", c.description);
            checks.push(c);
        }
    }
    Ok(Suite { name: "scenarios".into(), checks })
}

/// Exponent of the one-dimensional loss prior against I(theta), computed three ways.
pub fn one_dimensional_exponents() -> Result<serde_json::Value> {
    let delta = 1e-3;
    let mut out = serde_json::Map::new();
    for (model, axis) in [
        (ModelSpec::bernoulli(), linspace(0.1, 0.9, 17)),
        (ModelSpec::poisson(), logspace(0.5, 8.0, 17)),
    ] {
        let geom = ExclusionGeometry::Euclidean;
        let mut info = Vec::new();
        let mut finite = Vec::new();
        let mut min_eig = Vec::new();
        let mut volume = Vec::new();
        for x in &axis {
            info.push(fisher_information(&model, &[*x])?.get(0, 0));
            finite.push(loss_prior_density(delta_worth_exact(&model, &[*x], &geom, delta)?.value)?);
            min_eig.push(min_eig_prior(&model, &geom, &[*x])?);
            volume.push(jeffreys_prior(&model, &[*x])?);
        }
        out.insert(
            model.name().to_string(),
            json!({
                "exponent_finite_delta": loglog_slope(&info, &finite)?,
                "exponent_min_eig": loglog_slope(&info, &min_eig)?,
                "exponent_volume": loglog_slope(&info, &volume)?,
                "exponent_claimed": 0.5,
                "delta": delta,
            }),
        );
    }
    Ok(serde_json::Value::Object(out))
}

fn discrepancy_suite() -> Result<Suite> {
    let values = one_dimensional_exponents()?;
    let reproduces = values
        .as_object()
        .expect("object")
        .values()
        .all(|v| (v["exponent_finite_delta"].as_f64().unwrap_or(f64::NAN) - 0.5).abs() <= 0.05);
    let check = if reproduces {
        Check::new("one-dimensional loss prior scales as I^(1/2)", values, true)
    } else {
        Check::discrepancy(
            "one-dimensional loss prior scales as I, not the claimed I^(1/2)",
            values,
        )
    };
    Ok(Suite { name: "discrepancies".into(), checks: vec![check] })
}
