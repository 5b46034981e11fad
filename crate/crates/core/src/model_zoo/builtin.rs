use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{Domain, Interval, ObservationSpace, StatisticalModel};
use crate::error::{Error, Result};
use crate::matrix::SpdMatrix;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    -HALF_LN_2PI - 0.5 * var.ln() - 0.5 * (x - mean).powi(2) / var
}

/// KL between N(m0, v0) and N(m1, v1), written so that nearby arguments do not cancel.
fn normal_kl(m0: f64, v0: f64, m1: f64, v1: f64) -> f64 {
    let r_minus_1 = (v0 - v1) / v1;
    0.5 * (r_minus_1 - r_minus_1.ln_1p() + (m0 - m1).powi(2) / v1)
}

fn bernoulli_kl(p0: f64, p1: f64) -> f64 {
    let mut kl = 0.0;
    if p0 > 0.0 {
        kl += p0 * (p0 / p1).ln();
    }
    if p0 < 1.0 {
        kl += (1.0 - p0) * ((1.0 - p0) / (1.0 - p1)).ln();
    }
    kl
}

fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

/// N(theta, 1).
#[derive(Debug, Clone, Copy)]
pub struct NormalMean;

impl StatisticalModel for NormalMean {
    fn name(&self) -> &str {
        "normal_mean"
    }

    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::REAL])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::RealLine
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        normal_log_density(obs[0], theta[0], 1.0)
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        vec![theta[0] + standard_normal(rng)]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        Some(0.5 * (theta0[0] - theta1[0]).powi(2))
    }

    fn analytic_fisher(&self, _theta: &[f64]) -> Option<SpdMatrix> {
        Some(SpdMatrix::identity(1))
    }

    fn quadrature_hint(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        vec![(theta[0], 1.0)]
    }
}

/// N(mu, v) parametrized by (mu, v).
#[derive(Debug, Clone, Copy)]
pub struct NormalMuVar;

impl StatisticalModel for NormalMuVar {
    fn name(&self) -> &str {
        "normal_mu_var"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into(), "v".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::REAL, Interval::POSITIVE])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::RealLine
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        normal_log_density(obs[0], theta[0], theta[1])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        vec![theta[0] + theta[1].sqrt() * standard_normal(rng)]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        Some(normal_kl(theta0[0], theta0[1], theta1[0], theta1[1]))
    }

    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        let v = theta[1];
        SpdMatrix::from_diagonal(&[1.0 / v, 1.0 / (2.0 * v * v)]).ok()
    }

    fn quadrature_hint(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        vec![(theta[0], theta[1].sqrt())]
    }
}

/// N(mu, 1/tau) parametrized by (mu, tau).
#[derive(Debug, Clone, Copy)]
pub struct NormalMuPrec;

impl StatisticalModel for NormalMuPrec {
    fn name(&self) -> &str {
        "normal_mu_prec"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into(), "tau".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::REAL, Interval::POSITIVE])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::RealLine
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        normal_log_density(obs[0], theta[0], 1.0 / theta[1])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        vec![theta[0] + standard_normal(rng) / theta[1].sqrt()]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        Some(normal_kl(theta0[0], 1.0 / theta0[1], theta1[0], 1.0 / theta1[1]))
    }

    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        let tau = theta[1];
        SpdMatrix::from_diagonal(&[tau, 1.0 / (2.0 * tau * tau)]).ok()
    }

    fn quadrature_hint(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        vec![(theta[0], 1.0 / theta[1].sqrt())]
    }
}

/// N(mu, sigma^2) parametrized by (mu, sigma).
#[derive(Debug, Clone, Copy)]
pub struct NormalMuSigma;

impl StatisticalModel for NormalMuSigma {
    fn name(&self) -> &str {
        "normal_mu_sigma"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into(), "sigma".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::REAL, Interval::POSITIVE])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::RealLine
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        normal_log_density(obs[0], theta[0], theta[1] * theta[1])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        vec![theta[0] + theta[1] * standard_normal(rng)]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        Some(normal_kl(
            theta0[0],
            theta0[1] * theta0[1],
            theta1[0],
            theta1[1] * theta1[1],
        ))
    }

    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        let s2 = theta[1] * theta[1];
        SpdMatrix::from_diagonal(&[1.0 / s2, 2.0 / s2]).ok()
    }

    fn quadrature_hint(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        vec![(theta[0], theta[1])]
    }
}

/// Bernoulli(p).
#[derive(Debug, Clone, Copy)]
pub struct Bernoulli;

impl StatisticalModel for Bernoulli {
    fn name(&self) -> &str {
        "bernoulli"
    }

    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["p".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::UNIT])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::UnitIntervalBinary
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        if obs[0] == 1.0 {
            theta[0].ln()
        } else if obs[0] == 0.0 {
            (1.0 - theta[0]).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let u: f64 = rng.random();
        vec![if u < theta[0] { 1.0 } else { 0.0 }]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        Some(bernoulli_kl(theta0[0], theta1[0]))
    }

    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        let p = theta[0];
        SpdMatrix::from_diagonal(&[1.0 / (p * (1.0 - p))]).ok()
    }
}

/// Poisson(lambda).
#[derive(Debug, Clone, Copy)]
pub struct Poisson;

impl StatisticalModel for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }

    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["lambda".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::POSITIVE])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::IntegerCounts
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        let k = obs[0];
        if k < 0.0 || k.fract() != 0.0 {
            return f64::NEG_INFINITY;
        }
        k * theta[0].ln() - theta[0] - ln_factorial(k as u64)
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let dist = rand_distr::Poisson::new(theta[0]).expect("in-domain poisson rate");
        vec![dist.sample(rng)]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        let (l0, l1) = (theta0[0], theta1[0]);
        let d = l1 - l0;
        Some(d - l0 * (d / l0).ln_1p())
    }

    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        SpdMatrix::from_diagonal(&[1.0 / theta[0]]).ok()
    }
}

pub(crate) fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Zero-mean bivariate normal with unit variances and correlation rho.
#[derive(Debug, Clone, Copy)]
pub struct BivariateNormalCorr;

impl StatisticalModel for BivariateNormalCorr {
    fn name(&self) -> &str {
        "bivariate_normal_corr"
    }

    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["rho".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::SYMMETRIC_UNIT])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::RealPlane
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        let r = theta[0];
        let one_m = 1.0 - r * r;
        let (x, y) = (obs[0], obs[1]);
        -(2.0 * PI).ln() - 0.5 * one_m.ln() - (x * x - 2.0 * r * x * y + y * y) / (2.0 * one_m)
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let r = theta[0];
        let z1 = standard_normal(rng);
        let z2 = standard_normal(rng);
        vec![z1, r * z1 + (1.0 - r * r).sqrt() * z2]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        // 0.5 * (tr(S1^-1 S0) - 2 + ln det S1 - ln det S0)
        let (r0, r1) = (theta0[0], theta1[0]);
        let det0 = 1.0 - r0 * r0;
        let det1 = 1.0 - r1 * r1;
        let trace_minus_2 = 2.0 * (1.0 - r0 * r1) / det1 - 2.0;
        let log_ratio = ((det1 - det0) / det0).ln_1p();
        Some(0.5 * (trace_minus_2 + log_ratio))
    }

    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        let r = theta[0];
        let one_m = 1.0 - r * r;
        SpdMatrix::from_diagonal(&[(1.0 + r * r) / (one_m * one_m)]).ok()
    }
}

/// Two independent normals N(theta_1, var1) x N(theta_2, var2) with known variances.
#[derive(Debug, Clone, Copy)]
pub struct NormalDiag2 {
    var: [f64; 2],
}

impl NormalDiag2 {
    pub fn new(var1: f64, var2: f64) -> Result<Self> {
        if !(var1 > 0.0 && var2 > 0.0 && var1.is_finite() && var2.is_finite()) {
            return Err(Error::Contract(format!(
                "normal_diag2 variances must be positive, got ({var1}, {var2})"
            )));
        }
        Ok(NormalDiag2 { var: [var1, var2] })
    }

    pub fn variances(&self) -> [f64; 2] {
        self.var
    }
}

impl StatisticalModel for NormalDiag2 {
    fn name(&self) -> &str {
        "normal_diag2"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu1".into(), "mu2".into()]
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::REAL, Interval::REAL])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::RealPlane
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        normal_log_density(obs[0], theta[0], self.var[0])
            + normal_log_density(obs[1], theta[1], self.var[1])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        vec![
            theta[0] + self.var[0].sqrt() * standard_normal(rng),
            theta[1] + self.var[1].sqrt() * standard_normal(rng),
        ]
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        Some(
            (theta0[0] - theta1[0]).powi(2) / (2.0 * self.var[0])
                + (theta0[1] - theta1[1]).powi(2) / (2.0 * self.var[1]),
        )
    }

    fn analytic_fisher(&self, _theta: &[f64]) -> Option<SpdMatrix> {
        SpdMatrix::from_diagonal(&[1.0 / self.var[0], 1.0 / self.var[1]]).ok()
    }

    fn quadrature_hint(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        vec![
            (theta[0], self.var[0].sqrt()),
            (theta[1], self.var[1].sqrt()),
        ]
    }
}

/// Logistic regression with a fixed design: y_i ~ Bernoulli(sigmoid(x_i' beta)).
///
/// An observation is the full response vector, one entry per design row.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    design: DMatrix<f64>,
}

impl LogisticRegression {
    pub fn new(design: DMatrix<f64>) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(Error::Shape("design matrix is empty".into()));
        }
        if design.iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("design matrix has non-finite entries".into()));
        }
        Ok(LogisticRegression { design })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    fn linear_predictor(&self, beta: &[f64]) -> DVector<f64> {
        &self.design * DVector::from_column_slice(beta)
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// ln sigmoid(eta) without overflow.
fn log_sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        -(-eta).exp().ln_1p()
    } else {
        eta - eta.exp().ln_1p()
    }
}

/// X' diag(p_i (1 - p_i)) X with p_i = sigmoid(x_i' beta).
pub fn logistic_weighted_gram(design: &DMatrix<f64>, beta: &[f64]) -> DMatrix<f64> {
    let eta = design * DVector::from_column_slice(beta);
    let mut weighted = design.clone();
    for (i, e) in eta.iter().enumerate() {
        let p = sigmoid(*e);
        let w = p * (1.0 - p);
        weighted.row_mut(i).scale_mut(w);
    }
    let gram = design.transpose() * weighted;
    (&gram + gram.transpose()) * 0.5
}

impl StatisticalModel for LogisticRegression {
    fn name(&self) -> &str {
        "logistic_regression"
    }

    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("beta_{i}")).collect()
    }

    fn domain(&self) -> Domain {
        Domain(vec![Interval::REAL; self.dim()])
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::UnitIntervalBinary
    }

    fn log_density(&self, theta: &[f64], obs: &[f64]) -> f64 {
        if obs.len() != self.design.nrows() {
            return f64::NEG_INFINITY;
        }
        let eta = self.linear_predictor(theta);
        eta.iter()
            .zip(obs)
            .map(|(e, y)| match *y {
                1.0 => log_sigmoid(*e),
                0.0 => log_sigmoid(-*e),
                _ => f64::NEG_INFINITY,
            })
            .sum()
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        self.linear_predictor(theta)
            .iter()
            .map(|e| {
                let u: f64 = rng.random();
                if u < sigmoid(*e) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn kl_closed_form(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        self.kl_factorized(theta0, theta1)
    }

    fn kl_factorized(&self, theta0: &[f64], theta1: &[f64]) -> Option<f64> {
        let e0 = self.linear_predictor(theta0);
        let e1 = self.linear_predictor(theta1);
        Some(
            e0.iter()
                .zip(e1.iter())
                .map(|(a, b)| {
                    let p0 = sigmoid(*a);
                    p0 * (log_sigmoid(*a) - log_sigmoid(*b))
                        + (1.0 - p0) * (log_sigmoid(-*a) - log_sigmoid(-*b))
                })
                .sum(),
        )
    }

    fn analytic_fisher(&self, theta: &[f64]) -> Option<SpdMatrix> {
        SpdMatrix::new(logistic_weighted_gram(&self.design, theta)).ok()
    }
}
