//! Fisher information, analytic where the model provides it and otherwise the
//! finite-difference Hessian of h -> KL(theta, theta + h) at h = 0.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::SpdMatrix;
use crate::model_zoo::{kl_divergence, ModelSpec};

/// Base finite-difference step, scaled per coordinate by max(1, |theta_i|).
pub const DEFAULT_FD_STEP: f64 = 1e-4;

fn scaled_steps(theta: &[f64], step: f64) -> Vec<f64> {
    theta.iter().map(|t| step * t.abs().max(1.0)).collect()
}

/// Raw central-difference Hessian of g(h) = KL(theta, theta + h) at h = 0. No symmetrization
/// beyond what the stencil gives, no projection.
pub fn fisher_numeric(model: &ModelSpec, theta: &[f64], step: f64) -> Result<DMatrix<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Contract(format!("finite-difference step {step} must be positive")));
    }
    model.check_domain(theta)?;
    let d = theta.len();
    let s = scaled_steps(theta, step);
    let domain = model.domain();
    for i in 0..d {
        for sign in [-1.0, 1.0] {
            let mut p = theta.to_vec();
            p[i] += sign * s[i];
            if !domain.contains(&p) {
                return Err(Error::Domain(format!(
                    "finite-difference stencil at {theta:?} with step {} leaves the domain of {}",
                    s[i],
                    model.name()
                )));
            }
        }
    }

    let g = |offsets: &[(usize, f64)]| -> Result<f64> {
        let mut p = theta.to_vec();
        for (i, delta) in offsets {
            p[*i] += delta;
        }
        kl_divergence(model, theta, &p)
    };

    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        // g(0) = 0
        let plus = g(&[(i, s[i])])?;
        let minus = g(&[(i, -s[i])])?;
        h[(i, i)] = (plus + minus) / (s[i] * s[i]);
        for j in 0..i {
            let pp = g(&[(i, s[i]), (j, s[j])])?;
            let pm = g(&[(i, s[i]), (j, -s[j])])?;
            let mp = g(&[(i, -s[i]), (j, s[j])])?;
            let mm = g(&[(i, -s[i]), (j, -s[j])])?;
            let v = (pp - pm - mp + mm) / (4.0 * s[i] * s[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// I(theta): the model's analytic Fisher when available, otherwise the projected
/// finite-difference Hessian at [`DEFAULT_FD_STEP`].
pub fn fisher_information(model: &ModelSpec, theta: &[f64]) -> Result<SpdMatrix> {
    model.check_domain(theta)?;
    if let Some(i) = model.analytic_fisher(theta) {
        if i.dim() != theta.len() {
            return Err(Error::Shape(format!(
                "{} returned a {}x{} Fisher matrix for a {}-dimensional parameter",
                model.name(),
                i.dim(),
                i.dim(),
                theta.len()
            )));
        }
        return Ok(i);
    }
    let h = fisher_numeric(model, theta, DEFAULT_FD_STEP)?;
    SpdMatrix::project(&h)
}

/// KL(theta, theta + h) - h' I(theta) h / 2.
pub fn expansion_residual(model: &ModelSpec, theta: &[f64], h: &[f64]) -> Result<f64> {
    if h.len() != theta.len() {
        return Err(Error::Shape(format!(
            "offset has length {}, parameter has dimension {}",
            h.len(),
            theta.len()
        )));
    }
    if h.iter().all(|x| *x == 0.0) {
        model.check_domain(theta)?;
        return Ok(0.0);
    }
    let shifted: Vec<f64> = theta.iter().zip(h).map(|(a, b)| a + b).collect();
    let kl = kl_divergence(model, theta, &shifted)?;
    let info = fisher_information(model, theta)?;
    let hv = nalgebra::DVector::from_column_slice(h);
    let quad = (hv.transpose() * info.as_matrix() * &hv)[(0, 0)];
    Ok(kl - 0.5 * quad)
}

/// |residual| / ||h||^2 along unit direction `dir` at radius `r`.
pub fn residual_ratio(model: &ModelSpec, theta: &[f64], dir: &[f64], r: f64) -> Result<f64> {
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h: Vec<f64> = dir.iter().map(|x| x / norm * r).collect();
    Ok(expansion_residual(model, theta, &h)?.abs() / (r * r))
}
