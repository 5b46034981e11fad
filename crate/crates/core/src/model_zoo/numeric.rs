use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ObservationSpace, StatisticalModel};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_positive_reals, integrate_real_line, AdaptiveOptions};

const KL_ABS_TOL: f64 = 1e-10;
const INNER_ABS_TOL: f64 = 1e-12;
const MAX_COUNT: u64 = 10_000_000;

/// p0(x) * (ln p0(x) - ln p1(x)), with zero-density points contributing nothing.
fn kl_integrand(model: &dyn StatisticalModel, theta0: &[f64], theta1: &[f64], obs: &[f64]) -> f64 {
    let lp0 = model.log_density(theta0, obs);
    if lp0 == f64::NEG_INFINITY {
        return 0.0;
    }
    let p0 = lp0.exp();
    if p0 == 0.0 {
        return 0.0;
    }
    p0 * (lp0 - model.log_density(theta1, obs))
}

fn density(model: &dyn StatisticalModel, theta: &[f64], obs: &[f64]) -> f64 {
    let lp = model.log_density(theta, obs);
    if lp == f64::NEG_INFINITY {
        0.0
    } else {
        lp.exp()
    }
}

/// Integrates `f` against the counting or Lebesgue measure of the observation space.
fn integrate_space<F>(
    model: &dyn StatisticalModel,
    theta0: &[f64],
    f: F,
    outer_tol: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let hint = model.quadrature_hint(theta0);
    let outer = AdaptiveOptions {
        abs_tol: outer_tol,
        ..AdaptiveOptions::default()
    };
    match model.observation_space() {
        ObservationSpace::RealLine => {
            let (c, s) = hint[0];
            integrate_real_line(|x| f(&[x]), c, s, outer)
        }
        ObservationSpace::PositiveReals => {
            let (c, s) = hint[0];
            let scale = if c > 0.0 { c } else { s };
            integrate_positive_reals(|x| f(&[x]), scale, outer)
        }
        ObservationSpace::UnitIntervalBinary => Ok(f(&[0.0]) + f(&[1.0])),
        ObservationSpace::IntegerCounts => sum_counts(model, theta0, &f),
        ObservationSpace::RealPlane => {
            let (c0, s0) = hint[0];
            let (c1, s1) = hint.get(1).copied().unwrap_or((0.0, 1.0));
            let inner = AdaptiveOptions {
                abs_tol: INNER_ABS_TOL,
                ..AdaptiveOptions::default()
            };
            let mut failure: Option<Error> = None;
            let value = integrate_real_line(
                |x| match integrate_real_line(|y| f(&[x, y]), c1, s1, inner) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                c0,
                s0,
                outer,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(value),
            }
        }
    }
}

fn sum_counts<F: Fn(&[f64]) -> f64>(
    model: &dyn StatisticalModel,
    theta0: &[f64],
    f: &F,
) -> Result<f64> {
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut past_peak = false;
    let mut prev_p = 0.0;
    for k in 0..MAX_COUNT {
        let obs = [k as f64];
        let p = density(model, theta0, &obs);
        total += f(&obs);
        mass += p;
        if p < prev_p {
            past_peak = true;
        }
        prev_p = p;
        if past_peak && (p < 1e-300 || (1.0 - mass < 1e-15 && p < 1e-18)) {
            return Ok(total);
        }
    }
    Err(Error::numerics(
        "count sum did not terminate",
        (1.0 - mass).abs(),
    ))
}

pub(super) fn kl_quadrature(
    model: &dyn StatisticalModel,
    theta0: &[f64],
    theta1: &[f64],
) -> Result<f64> {
    integrate_space(
        model,
        theta0,
        |obs| kl_integrand(model, theta0, theta1, obs),
        KL_ABS_TOL,
    )
}

pub(super) fn total_mass(model: &dyn StatisticalModel, theta: &[f64]) -> Result<f64> {
    integrate_space(model, theta, |obs| density(model, theta, obs), KL_ABS_TOL)
}

/// Sample mean of ln p0 - ln p1 under theta0, drawn in fixed-size strata of a single
/// seeded stream so the result depends only on (draws, seed).
pub(super) fn kl_monte_carlo(
    model: &dyn StatisticalModel,
    theta0: &[f64],
    theta1: &[f64],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::Contract("Monte Carlo KL needs at least one draw".into()));
    }
    const STRATA: usize = 16;
    let mut strata_means = Vec::with_capacity(STRATA);
    let per = draws.div_ceil(STRATA);
    let mut remaining = draws;
    for s in 0..STRATA {
        if remaining == 0 {
            break;
        }
        let n = per.min(remaining);
        remaining -= n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let mut acc = 0.0;
        for _ in 0..n {
            let x = model.sample_one(theta0, &mut rng);
            acc += model.log_density(theta0, &x) - model.log_density(theta1, &x);
        }
        strata_means.push((acc / n as f64, n));
    }
    let total: f64 = strata_means.iter().map(|(m, n)| m * *n as f64).sum();
    Ok(total / draws as f64)
}
