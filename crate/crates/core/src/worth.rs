//! The delta-worth u_delta(theta): the smallest KL divergence from f(. | theta) to any model
//! outside the exclusion ellipsoid {theta + h : h' A h <= delta^2}.
//!
//! Three routes are provided and are expected to agree as delta -> 0:
//!
//! * [`delta_worth_exact`] minimizes g(h) = KL(theta, theta + h) over the ellipsoid boundary.
//!   With h = delta * A^{-1/2} v the boundary becomes the unit sphere ||v|| = 1, which is
//!   searched by projected gradient descent from the smallest eigenvector of the whitened
//!   matrix (both signs) plus `2d` seeded random starts. A coarse audit of the exterior
//!   catches finite-delta cases where the infimum is not on the boundary.
//! * [`delta_worth_asymptotic`] is the leading term `delta^2 / 2 * lambda_min(A^{-1/2} I A^{-1/2})`.
//! * [`delta_worth_oracle`] is the minimum over seeded uniform boundary samples, an upper
//!   bound on the boundary infimum.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fisher::fisher_information;
use crate::geometry::{inv_sqrt_spd, min_eigenvalue, whiten, ExclusionGeometry};
use crate::matrix::SpdMatrix;
use crate::model_zoo::{kl_divergence, ModelSpec};

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorthMethod {
    Exact,
    Asymptotic,
    Oracle,
}

/// A delta-worth value in nats, with the route that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorthEstimate {
    pub value: f64,
    pub method: WorthMethod,
    pub delta: f64,
    /// Unit vector along the minimizing offset h.
    pub argmin_direction: Option<Vec<f64>>,
    /// The minimizing offset h itself (exact and oracle only).
    pub minimizer: Option<Vec<f64>>,
    pub convergence_ratio: Option<f64>,
    /// False when the exterior audit found a lower value off the boundary.
    pub boundary_only: bool,
    pub violates_likelihood_principle: bool,
}

/// Tuning for [`delta_worth_exact_with`].
#[derive(Debug, Clone)]
pub struct ExactOptions {
    pub seed: u64,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Central-difference step on the unit sphere (so h moves by about `fd_step * delta`).
    pub fd_step: f64,
    /// Radii, in units of delta, at which the exterior is spot-checked.
    pub exterior_radii: Vec<f64>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            seed: DEFAULT_SEED,
            max_iter: 500,
            grad_tol: 1e-10,
            fd_step: 1e-6,
            exterior_radii: vec![1.25, 1.5, 2.0, 3.0],
        }
    }
}

/// theta, delta and A^{-1/2}, validated so every boundary point is in-domain.
struct Boundary<'a> {
    model: &'a ModelSpec,
    theta: &'a [f64],
    delta: f64,
    a: SpdMatrix,
    a_inv_sqrt: DMatrix<f64>,
}

impl<'a> Boundary<'a> {
    fn new(
        model: &'a ModelSpec,
        theta: &'a [f64],
        geometry: &ExclusionGeometry,
        delta: f64,
    ) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Contract(format!("delta must be positive, got {delta}")));
        }
        model.check_domain(theta)?;
        let a = geometry.evaluate(model, theta)?;
        let a_inv_sqrt = inv_sqrt_spd(&a)?.into_matrix();
        let a_inv = &a_inv_sqrt * &a_inv_sqrt;
        // the stencil steps slightly off the sphere, so leave room for it
        let reach = delta * (1.0 + 1e-5);
        let domain = model.domain();
        for (i, (t, iv)) in theta.iter().zip(&domain.0).enumerate() {
            let extent = reach * a_inv[(i, i)].sqrt();
            if !iv.contains_with_margin(t - extent, crate::model_zoo::DOMAIN_MARGIN)
                || !iv.contains_with_margin(t + extent, crate::model_zoo::DOMAIN_MARGIN)
            {
                return Err(Error::Domain(format!(
                    "exclusion boundary at {theta:?} with delta {delta} reaches {} +/- {extent} \
                     outside the domain of {} in coordinate {i}",
                    t,
                    model.name()
                )));
            }
        }
        Ok(Boundary {
            model,
            theta,
            delta,
            a,
            a_inv_sqrt,
        })
    }

    fn dim(&self) -> usize {
        self.theta.len()
    }

    /// h = radius * delta * A^{-1/2} v.
    fn offset(&self, v: &DVector<f64>, radius: f64) -> DVector<f64> {
        &self.a_inv_sqrt * v * (radius * self.delta)
    }

    fn eval_at(&self, h: &DVector<f64>) -> Result<f64> {
        let p: Vec<f64> = self.theta.iter().zip(h.iter()).map(|(t, x)| t + x).collect();
        kl_divergence(self.model, self.theta, &p)
    }

    fn objective(&self, v: &DVector<f64>) -> Result<f64> {
        self.eval_at(&self.offset(v, 1.0))
    }

    fn estimate(&self, value: f64, v: &DVector<f64>, radius: f64, method: WorthMethod) -> WorthEstimate {
        let h = self.offset(v, radius);
        let n = h.norm();
        WorthEstimate {
            value,
            method,
            delta: self.delta,
            argmin_direction: Some(h.iter().map(|x| x / n).collect()),
            minimizer: Some(h.iter().copied().collect()),
            convergence_ratio: None,
            boundary_only: true,
            violates_likelihood_principle: false,
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

struct Descent {
    value: f64,
    v: DVector<f64>,
    grad_norm: f64,
}

fn tangent_gradient(b: &Boundary, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    let d = v.len();
    let mut g = DVector::zeros(d);
    for i in 0..d {
        let mut vp = v.clone();
        vp[i] += step;
        let mut vm = v.clone();
        vm[i] -= step;
        g[i] = (b.objective(&vp)? - b.objective(&vm)?) / (2.0 * step);
    }
    let radial = g.dot(v);
    Ok(g - v * radial)
}

fn descend(b: &Boundary, start: DVector<f64>, t0: f64, opts: &ExactOptions) -> Result<Descent> {
    let mut v = start;
    let mut f = b.objective(&v)?;
    let mut t = t0;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let g = tangent_gradient(b, &v, opts.fd_step)?;
        grad_norm = g.norm();
        if grad_norm < opts.grad_tol {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &v - &g * t;
            let cand = &cand / cand.norm();
            let fc = b.objective(&cand)?;
            if fc <= f - 1e-4 * t * grad_norm * grad_norm {
                v = cand;
                f = fc;
                t *= 2.0;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(Descent {
        value: f,
        v,
        grad_norm,
    })
}

/// [`delta_worth_exact_with`] at default options.
pub fn delta_worth_exact(
    model: &ModelSpec,
    theta: &[f64],
    geometry: &ExclusionGeometry,
    delta: f64,
) -> Result<WorthEstimate> {
    delta_worth_exact_with(model, theta, geometry, delta, &ExactOptions::default())
}

pub fn delta_worth_exact_with(
    model: &ModelSpec,
    theta: &[f64],
    geometry: &ExclusionGeometry,
    delta: f64,
    opts: &ExactOptions,
) -> Result<WorthEstimate> {
    let b = Boundary::new(model, theta, geometry, delta)?;
    let d = b.dim();
    let info = fisher_information(model, theta)?;
    let whitened = whiten(&info, &b.a)?;
    let lmax = whitened.eigenvalues()[d - 1];
    let warm = DVector::from_vec(min_eigenvalue(whitened.as_matrix())?.vector);

    let mut starts = vec![warm.clone(), -warm];
    if d > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        starts.extend((0..2 * d).map(|_| random_unit(&mut rng, d)));
    }

    let runs: Vec<Result<Descent>> = if d == 1 {
        // the boundary is the two points +/- 1
        starts
            .par_iter()
            .map(|v| {
                Ok(Descent {
                    value: b.objective(v)?,
                    v: v.clone(),
                    grad_norm: 0.0,
                })
            })
            .collect()
    } else {
        let t0 = 1.0 / (delta * delta * lmax);
        starts
            .par_iter()
            .map(|v| descend(&b, v.clone(), t0, opts))
            .collect()
    };
    let runs: Vec<Descent> = runs.into_iter().collect::<Result<_>>()?;
    let best = runs
        .iter()
        .filter(|r| r.value.is_finite())
        .min_by(|x, y| x.value.total_cmp(&y.value))
        .ok_or_else(|| Error::numerics("no start produced a finite objective", f64::NAN))?;

    let scale = best.value.abs().max(0.5 * delta * delta * lmax);
    if best.grad_norm.is_finite() && best.grad_norm > 1e-4 * scale {
        return Err(Error::numerics(
            format!(
                "boundary search stalled with tangent gradient {:e}",
                best.grad_norm
            ),
            best.value,
        ));
    }

    let mut estimate = b.estimate(best.value, &best.v, 1.0, WorthMethod::Exact);

    // exterior audit along every start direction and the minimizer
    let domain = model.domain();
    let mut directions: Vec<&DVector<f64>> = starts.iter().collect();
    directions.push(&best.v);
    let probes: Vec<(f64, &DVector<f64>)> = directions
        .iter()
        .flat_map(|v| opts.exterior_radii.iter().map(move |r| (*r, *v)))
        .collect();
    let exterior: Vec<Option<(f64, usize)>> = probes
        .par_iter()
        .enumerate()
        .map(|(k, (r, v))| {
            let h = b.offset(v, *r);
            let p: Vec<f64> = theta.iter().zip(h.iter()).map(|(t, x)| t + x).collect();
            if !domain.contains(&p) {
                return Ok(None);
            }
            Ok(Some((kl_divergence(model, theta, &p)?, k)))
        })
        .collect::<Result<_>>()?;
    if let Some((value, k)) = exterior
        .into_iter()
        .flatten()
        .min_by(|x, y| x.0.total_cmp(&y.0))
    {
        if value < best.value {
            let (r, v) = probes[k];
            estimate = b.estimate(value, v, r, WorthMethod::Exact);
            estimate.boundary_only = false;
        }
    }
    estimate.violates_likelihood_principle = geometry.violates_likelihood_principle();
    Ok(estimate)
}

/// delta^2 / 2 * lambda_min(A^{-1/2} I A^{-1/2}).
pub fn delta_worth_asymptotic(info: &SpdMatrix, a: &SpdMatrix, delta: f64) -> Result<WorthEstimate> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Contract(format!("delta must be positive, got {delta}")));
    }
    let m = whiten(info, a)?;
    let eig = min_eigenvalue(m.as_matrix())?;
    let h = inv_sqrt_spd(a)?.into_matrix() * DVector::from_vec(eig.vector);
    let n = h.norm();
    Ok(WorthEstimate {
        value: 0.5 * delta * delta * eig.value,
        method: WorthMethod::Asymptotic,
        delta,
        argmin_direction: Some(h.iter().map(|x| x / n).collect()),
        minimizer: None,
        convergence_ratio: None,
        boundary_only: true,
        violates_likelihood_principle: false,
    })
}

/// Asymptotic worth with I and A evaluated from the model and geometry at theta.
pub fn delta_worth_asymptotic_at(
    model: &ModelSpec,
    theta: &[f64],
    geometry: &ExclusionGeometry,
    delta: f64,
) -> Result<WorthEstimate> {
    let info = fisher_information(model, theta)?;
    let a = geometry.evaluate(model, theta)?;
    let mut est = delta_worth_asymptotic(&info, &a, delta)?;
    est.violates_likelihood_principle = geometry.violates_likelihood_principle();
    Ok(est)
}

/// Minimum of g over `n_points` seeded uniform boundary points. In one dimension the
/// boundary is the pair h = +/- delta / sqrt(A), and both are evaluated.
pub fn delta_worth_oracle(
    model: &ModelSpec,
    theta: &[f64],
    geometry: &ExclusionGeometry,
    delta: f64,
    n_points: usize,
    seed: u64,
) -> Result<WorthEstimate> {
    if n_points < 100 {
        return Err(Error::Contract(format!(
            "oracle needs at least 100 boundary points, got {n_points}"
        )));
    }
    let b = Boundary::new(model, theta, geometry, delta)?;
    let d = b.dim();
    let points: Vec<DVector<f64>> = if d == 1 {
        vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_points).map(|_| random_unit(&mut rng, d)).collect()
    };
    let values: Vec<f64> = points
        .par_iter()
        .map(|v| b.objective(v))
        .collect::<Result<_>>()?;
    let (k, value) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("at least two boundary points");
    let mut est = b.estimate(value, &points[k], 1.0, WorthMethod::Oracle);
    est.violates_likelihood_principle = geometry.violates_likelihood_principle();
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub exact: f64,
    pub asymptotic: f64,
    pub ratio: f64,
}

/// Exact versus asymptotic worth along a decreasing sequence of deltas.
pub fn convergence_sweep(
    model: &ModelSpec,
    theta: &[f64],
    geometry: &ExclusionGeometry,
    deltas: &[f64],
) -> Result<Vec<SweepRow>> {
    check_deltas(deltas)?;
    if deltas.is_empty() {
        return Ok(Vec::new());
    }
    let info = fisher_information(model, theta)?;
    let a = geometry.evaluate(model, theta)?;
    deltas
        .iter()
        .map(|&delta| {
            let exact = delta_worth_exact(model, theta, geometry, delta)?.value;
            let asymptotic = delta_worth_asymptotic(&info, &a, delta)?.value;
            Ok(SweepRow {
                delta,
                exact,
                asymptotic,
                ratio: exact / asymptotic,
            })
        })
        .collect()
}

/// Deltas must be positive, finite, and strictly decreasing.
pub fn check_deltas(deltas: &[f64]) -> Result<()> {
    if let Some(bad) = deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::Contract(format!("delta {bad} is not positive")));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Contract(format!(
            "deltas must be strictly decreasing, got {deltas:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag2() -> ModelSpec {
        ModelSpec::normal_diag2(1.0, 0.25).unwrap()
    }

    fn quad_form(a: &SpdMatrix, h: &[f64]) -> f64 {
        let v = DVector::from_column_slice(h);
        (v.transpose() * a.as_matrix() * &v)[(0, 0)]
    }

    #[test]
    fn normal_mean_exact() {
        let e = delta_worth_exact(&ModelSpec::normal_mean(), &[0.0], &ExclusionGeometry::Euclidean, 0.1)
            .unwrap();
        assert!((e.value - 0.005).abs() < 1e-17, "{}", e.value);
        assert_eq!(e.method, WorthMethod::Exact);
        assert!(e.boundary_only);
    }

    #[test]
    fn two_dimensional_exact_picks_weak_axis() {
        let e = delta_worth_exact(&diag2(), &[0.0, 0.0], &ExclusionGeometry::Euclidean, 0.1).unwrap();
        assert!((e.value - 0.005).abs() < 1e-12, "{}", e.value);
        let dir = e.argmin_direction.unwrap();
        assert!(dir[0].abs() > 1.0 - 1e-9, "{dir:?}");
        let h = e.minimizer.unwrap();
        let a = SpdMatrix::identity(2);
        assert!((quad_form(&a, &h) - 0.01).abs() < 1e-10 * 0.01);
    }

    #[test]
    fn boundary_constraint_holds_for_anisotropic_geometry() {
        let m = ModelSpec::normal_mu_var();
        let theta = [0.2, 1.3];
        let g = ExclusionGeometry::Block(vec![1.0, 4.0]);
        let e = delta_worth_exact(&m, &theta, &g, 0.05).unwrap();
        let a = g.evaluate(&m, &theta).unwrap();
        let q = quad_form(&a, e.minimizer.as_ref().unwrap());
        assert!((q - 0.0025).abs() <= 1e-10 * 0.0025, "{q}");
    }

    #[test]
    fn worth_vanishes_as_delta_shrinks() {
        let m = ModelSpec::poisson();
        let mut last = f64::INFINITY;
        for delta in [1e-1, 1e-2, 1e-3, 1e-4] {
            let v = delta_worth_exact(&m, &[2.0], &ExclusionGeometry::Euclidean, delta)
                .unwrap()
                .value;
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn asymptotic_cases() {
        let one = SpdMatrix::identity(1);
        let e = delta_worth_asymptotic(&one, &one, 0.1).unwrap();
        assert!((e.value - 0.005).abs() < 1e-18);

        let info = SpdMatrix::from_diagonal(&[1.0, 0.5]).unwrap();
        let a = SpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let e = delta_worth_asymptotic(&info, &a, 0.1).unwrap();
        assert!((e.value - 6.25e-4).abs() < 1e-18, "{}", e.value);

        let r = SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let e = delta_worth_asymptotic(&r, &r, 0.2).unwrap();
        assert!((e.value - 0.02).abs() < 1e-15);

        assert!(matches!(
            delta_worth_asymptotic(&info, &one, 0.1),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            delta_worth_asymptotic(&info, &a, 0.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn asymptotic_scales_quadratically() {
        let info = SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let a = SpdMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
        let base = delta_worth_asymptotic(&info, &a, 0.01).unwrap().value;
        for c in [0.5, 2.0, 8.0] {
            let scaled = delta_worth_asymptotic(&info, &a, 0.01 * c).unwrap().value;
            assert_eq!(scaled, c * c * base);
        }
        let scaled = delta_worth_asymptotic(&info, &a, 0.03).unwrap().value;
        assert!((scaled - 9.0 * base).abs() <= 4.0 * f64::EPSILON * scaled);
    }

    #[test]
    fn oracle_cases() {
        let o = delta_worth_oracle(&ModelSpec::normal_mean(), &[0.0], &ExclusionGeometry::Euclidean, 0.1, 100, 0)
            .unwrap();
        assert!((o.value - 0.005).abs() < 1e-12);
        let o = delta_worth_oracle(&diag2(), &[0.0, 0.0], &ExclusionGeometry::Euclidean, 0.1, 10_000, 3)
            .unwrap();
        assert!((o.value - 0.005).abs() < 1e-6, "{}", o.value);
        assert!(matches!(
            delta_worth_oracle(&diag2(), &[0.0, 0.0], &ExclusionGeometry::Euclidean, 0.1, 99, 3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn oracle_is_monotone_in_points_for_nested_seeds() {
        let m = ModelSpec::normal_mu_var();
        let g = ExclusionGeometry::Block(vec![1.0, 2.0]);
        let mut last = f64::INFINITY;
        for n in [100, 200, 400, 800, 1600] {
            let v = delta_worth_oracle(&m, &[0.0, 1.0], &g, 0.1, n, 17).unwrap().value;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn sandwich_exact_below_oracle() {
        let cases: Vec<(ModelSpec, Vec<f64>, ExclusionGeometry)> = vec![
            (ModelSpec::normal_mu_var(), vec![0.0, 1.0], ExclusionGeometry::Block(vec![1.0, 4.0])),
            (ModelSpec::normal_mu_sigma(), vec![0.5, 0.7], ExclusionGeometry::Euclidean),
            (ModelSpec::normal_mu_prec(), vec![0.0, 2.0], ExclusionGeometry::FisherIsotropic),
            (diag2(), vec![0.0, 0.0], ExclusionGeometry::Block(vec![3.0, 1.0])),
        ];
        for (m, theta, g) in cases {
            for delta in [0.3, 0.05] {
                let e = delta_worth_exact(&m, &theta, &g, delta).unwrap();
                let o = delta_worth_oracle(&m, &theta, &g, delta, 2000, 5).unwrap();
                assert!(e.value <= o.value + 1e-9, "{}: {} > {}", m.name(), e.value, o.value);
            }
        }
    }

    #[test]
    fn exact_worth_is_monotone_in_delta() {
        let m = ModelSpec::normal_mu_var();
        let g = ExclusionGeometry::Block(vec![1.0, 4.0]);
        let mut last = 0.0;
        for delta in [0.01, 0.02, 0.05, 0.1, 0.2] {
            let v = delta_worth_exact(&m, &[0.0, 1.0], &g, delta).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn boundary_outside_domain_is_an_error() {
        let m = ModelSpec::bernoulli();
        assert!(matches!(
            delta_worth_exact(&m, &[0.05], &ExclusionGeometry::Euclidean, 0.1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            delta_worth_oracle(&m, &[0.95], &ExclusionGeometry::Euclidean, 0.1, 100, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            delta_worth_exact(&m, &[0.5], &ExclusionGeometry::Euclidean, -1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn sweeps() {
        let rows = convergence_sweep(
            &ModelSpec::normal_mean(),
            &[0.0],
            &ExclusionGeometry::Euclidean,
            &[0.1, 0.01],
        )
        .unwrap();
        for r in &rows {
            assert!((r.ratio - 1.0).abs() < 1e-12, "{r:?}");
        }
        let rows = convergence_sweep(
            &ModelSpec::bernoulli(),
            &[0.5],
            &ExclusionGeometry::Euclidean,
            &[0.1, 0.01, 0.001],
        )
        .unwrap();
        assert!((rows[2].ratio - 1.0).abs() < 0.01);
        assert!(convergence_sweep(&ModelSpec::normal_mean(), &[0.0], &ExclusionGeometry::Euclidean, &[])
            .unwrap()
            .is_empty());
        assert!(convergence_sweep(
            &ModelSpec::normal_mean(),
            &[0.0],
            &ExclusionGeometry::Euclidean,
            &[0.01, 0.1]
        )
        .is_err());
    }

    #[test]
    fn exterior_audit_catches_non_monotone_divergence() {
        // a divergence that dips again beyond the boundary
        #[derive(Debug)]
        struct Dip;
        impl crate::model_zoo::StatisticalModel for Dip {
            fn name(&self) -> &str {
                "dip"
            }
            fn dim(&self) -> usize {
                1
            }
            fn domain(&self) -> crate::model_zoo::Domain {
                crate::model_zoo::Domain(vec![crate::model_zoo::Interval::REAL])
            }
            fn observation_space(&self) -> crate::model_zoo::ObservationSpace {
                crate::model_zoo::ObservationSpace::RealLine
            }
            fn log_density(&self, _: &[f64], _: &[f64]) -> f64 {
                0.0
            }
            fn sample_one(&self, _: &[f64], _: &mut dyn rand::RngCore) -> Vec<f64> {
                vec![0.0]
            }
            fn kl_closed_form(&self, a: &[f64], b: &[f64]) -> Option<f64> {
                let h = (a[0] - b[0]).abs();
                Some(if h < 1.2 { 0.5 * h * h } else { 0.01 })
            }
            fn analytic_fisher(&self, _: &[f64]) -> Option<SpdMatrix> {
                Some(SpdMatrix::identity(1))
            }
        }
        let m = ModelSpec::new(std::sync::Arc::new(Dip), true);
        let e = delta_worth_exact(&m, &[0.0], &ExclusionGeometry::Euclidean, 1.0).unwrap();
        assert!(!e.boundary_only);
        assert_eq!(e.value, 0.01);
        let small = delta_worth_exact(&m, &[0.0], &ExclusionGeometry::Euclidean, 0.1).unwrap();
        assert!(small.boundary_only);
    }

    #[test]
    fn data_dependent_geometry_flags_estimates() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, -1.0, 1.0, 0.0, 1.0, 0.5, 1.0, 2.0]);
        let m = ModelSpec::logistic_regression(x.clone()).unwrap();
        let g = ExclusionGeometry::DataDependent {
            design: x.clone(),
            beta_hat: vec![0.1, 0.2],
        };
        assert!(delta_worth_exact(&m, &[0.0, 0.0], &g, 0.05).unwrap().violates_likelihood_principle);
        assert!(delta_worth_asymptotic_at(&m, &[0.0, 0.0], &g, 0.05).unwrap().violates_likelihood_principle);
        let db = ExclusionGeometry::DesignBased(x);
        assert!(!delta_worth_exact(&m, &[0.0, 0.0], &db, 0.05).unwrap().violates_likelihood_principle);
    }

    #[test]
    fn deterministic_across_calls() {
        let m = ModelSpec::normal_mu_sigma();
        let g = ExclusionGeometry::Block(vec![2.0, 1.0]);
        let a = delta_worth_exact(&m, &[0.0, 1.0], &g, 0.2).unwrap();
        let b = delta_worth_exact(&m, &[0.0, 1.0], &g, 0.2).unwrap();
        assert_eq!(a, b);
    }
}
