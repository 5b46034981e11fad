//! Adaptive Gauss–Legendre quadrature on bounded intervals, plus the maps that
//! carry infinite observation spaces onto bounded ones.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Fixed n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on P_n starting from the Chebyshev guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(15))
}

/// Options for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub max_depth: u32,
    pub initial_pieces: usize,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            abs_tol: 1e-10,
            max_depth: 40,
            initial_pieces: 8,
            max_intervals: 200_000,
        }
    }
}

/// Globally adaptive bisection: a piece is accepted once the 15-point estimate on it agrees
/// with the sum over its two halves to within its share of the tolerance.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<f64> {
    if !(a < b) {
        return Err(Error::Contract(format!("invalid interval [{a}, {b}]")));
    }
    let rule = default_rule();
    let width = b - a;
    let pieces = opts.initial_pieces.max(1);
    let mut stack: Vec<(f64, f64, f64, u32)> = (0..pieces)
        .map(|i| {
            let lo = a + width * i as f64 / pieces as f64;
            let hi = if i + 1 == pieces {
                b
            } else {
                a + width * (i + 1) as f64 / pieces as f64
            };
            let whole = rule.integrate(&mut f, lo, hi);
            (lo, hi, whole, 0)
        })
        .collect();

    let mut total = 0.0;
    let mut unresolved = 0.0;
    let mut processed = 0usize;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        processed += 1;
        if processed > opts.max_intervals {
            return Err(Error::numerics(
                "quadrature exceeded its interval budget",
                unresolved + whole.abs(),
            ));
        }
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(&mut f, lo, mid);
        let right = rule.integrate(&mut f, mid, hi);
        let refined = left + right;
        if !refined.is_finite() {
            return Err(Error::numerics(
                format!("non-finite integrand on [{lo}, {hi}]"),
                f64::NAN,
            ));
        }
        let err = (refined - whole).abs();
        let budget = opts.abs_tol * (hi - lo) / width;
        if err <= budget {
            total += refined;
        } else if depth >= opts.max_depth || mid <= lo || mid >= hi {
            total += refined;
            unresolved += err;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if unresolved > opts.abs_tol {
        return Err(Error::numerics(
            "quadrature did not converge to tolerance",
            unresolved,
        ));
    }
    Ok(total)
}

/// Integral over the real line through x = center + scale * t / (1 - t^2), t in (-1, 1).
pub fn integrate_real_line<F: FnMut(f64) -> f64>(
    mut f: F,
    center: f64,
    scale: f64,
    opts: AdaptiveOptions,
) -> Result<f64> {
    adaptive(
        |t| {
            let one_m = 1.0 - t * t;
            if one_m <= 0.0 {
                return 0.0;
            }
            let x = center + scale * t / one_m;
            let jac = scale * (1.0 + t * t) / (one_m * one_m);
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        -1.0,
        1.0,
        opts,
    )
}

/// Integral over (0, inf) through x = scale * t / (1 - t), t in (0, 1).
pub fn integrate_positive_reals<F: FnMut(f64) -> f64>(
    mut f: F,
    scale: f64,
    opts: AdaptiveOptions,
) -> Result<f64> {
    adaptive(
        |t| {
            let one_m = 1.0 - t;
            if one_m <= 0.0 || t <= 0.0 {
                return 0.0;
            }
            let x = scale * t / one_m;
            let jac = scale / (one_m * one_m);
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        0.0,
        1.0,
        opts,
    )
}
