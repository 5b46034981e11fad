//! Acceptance gate: ten criteria, each printed as one PASS/FAIL line. Run with
//! `cargo test -p lossprior --test acceptance -- --nocapture` to see the lines.

use std::time::{Duration, Instant};

use lossprior::fisher::fisher_numeric;
use lossprior::geometry::whitened_spectrum;
use lossprior::nalgebra::{DMatrix, DVector};
use lossprior::priors::{discrete_loss_prior, jeffreys_prior, linspace, logspace, min_eig_prior, DiscreteElement};
use lossprior::scenarios::{run_scenario, CheckStatus, ScenarioConfig};
use lossprior::validate::{run_validation, validation_cases, ValidateOptions, RESIDUAL_NOISE_FLOOR};
use lossprior::worth::{convergence_sweep, delta_worth_exact, delta_worth_oracle, DEFAULT_SEED};
use lossprior::{
    fisher_information, kl_divergence, transform_geometry, ExclusionGeometry, Jacobian, ModelSpec,
    SpdMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

/// Least-squares slope of ln y on ln x, written out here rather than borrowed from the crate.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn quadratic_expansion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = (0.0f64, String::new());
    let mut ok = true;
    for (model, points) in validation_cases(DEFAULT_SEED).unwrap() {
        for p in points {
            let g: Vec<f64> = (0..p.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dir: Vec<f64> = g.iter().map(|x| x / norm).collect();
            let info = fisher_information(&model, &p).unwrap();
            let ratio = |r: f64| {
                let h = DVector::from_iterator(dir.len(), dir.iter().map(|x| x * r));
                let q: Vec<f64> = p.iter().zip(h.iter()).map(|(a, b)| a + b).collect();
                let quad = 0.5 * (h.transpose() * info.as_matrix() * &h)[(0, 0)];
                (kl_divergence(&model, &p, &q).unwrap() - quad).abs() / (r * r)
            };
            let (coarse, fine) = (ratio(1e-2), ratio(1e-3));
            let shrinks = fine <= coarse / 5.0;
            let exact_quadratic = coarse <= RESIDUAL_NOISE_FLOOR && fine <= RESIDUAL_NOISE_FLOOR;
            ok &= shrinks || exact_quadratic;
            let shrink = if coarse > RESIDUAL_NOISE_FLOOR { fine / coarse } else { 0.0 };
            if shrink >= worst.0 {
                worst = (shrink, format!("{} at {p:?}", model.name()));
            }
        }
    }
    outcome(ok, format!("worst fine/coarse ratio {:.3} ({}); bound 0.2", worst.0, worst.1))
}

fn one_dimensional_worth() -> Outcome {
    // Fisher informations written in closed form: N(mu,1): 1, Bernoulli(1/2): 4, Poisson(3): 1/3
    let cases = [
        (ModelSpec::normal_mean(), 0.0, 1.0),
        (ModelSpec::bernoulli(), 0.5, 4.0),
        (ModelSpec::poisson(), 3.0, 1.0 / 3.0),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (model, theta, info) in cases {
        for (delta, tol) in [(1e-2, 0.02), (1e-3, 0.001)] {
            let u = delta_worth_exact(&model, &[theta], &ExclusionGeometry::Euclidean, delta).unwrap().value;
            let rel = (u / (0.5 * info * delta * delta) - 1.0).abs();
            ok &= rel <= tol;
            detail.push(format!("{}@{delta:e}: {rel:.2e}", model.name()));
        }
    }
    outcome(ok, detail.join(", "))
}

fn eigenvalue_convergence() -> Outcome {
    let cases = [
        (ModelSpec::normal_mu_var(), vec![0.0, 1.0], ExclusionGeometry::Block(vec![1.0, 1.0])),
        (ModelSpec::normal_mu_var(), vec![0.0, 1.0], ExclusionGeometry::Block(vec![1.0, 4.0])),
        (ModelSpec::normal_mu_var(), vec![0.0, 1.0], ExclusionGeometry::Block(vec![1.0, 10.0])),
        (ModelSpec::normal_diag2(1.0, 0.25).unwrap(), vec![0.0, 0.0], ExclusionGeometry::Euclidean),
    ];
    let deltas = [1e-1, 1e-2, 1e-3];
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for (model, theta, geom) in &cases {
        let sweep = convergence_sweep(model, theta, geom, &deltas).unwrap();
        let r = (sweep[2].ratio - 1.0).abs();
        worst_ratio = worst_ratio.max(r);
        ok &= r <= 0.01;
        for row in &sweep {
            let oracle = delta_worth_oracle(model, theta, geom, row.delta, 10_000, DEFAULT_SEED).unwrap().value;
            let gap = (oracle - row.exact).abs();
            worst_gap = worst_gap.max(gap);
            ok &= gap <= 1e-6;
        }
    }
    // independent check of the 2D example: u = delta^2 / 2 * min(1, 4) under the identity
    let u = delta_worth_exact(&cases[3].0, &cases[3].1, &cases[3].2, 0.1).unwrap().value;
    ok &= (u - 0.005).abs() <= 1e-9;
    outcome(ok, format!("max |ratio-1| at 1e-3 = {worst_ratio:.2e}; max |exact-oracle| = {worst_gap:.2e}"))
}

fn reparametrization_exponents() -> Outcome {
    let vs = logspace(0.25, 4.0, 41);
    let pv: Vec<f64> = vs.iter().map(|v| jeffreys_prior(&ModelSpec::normal_mu_var(), &[0.0, *v]).unwrap()).collect();
    let taus: Vec<f64> = vs.iter().map(|v| 1.0 / v).collect();
    let pt: Vec<f64> = taus.iter().map(|t| jeffreys_prior(&ModelSpec::normal_mu_prec(), &[0.0, *t]).unwrap()).collect();
    let sv = slope(&vs, &pv);
    let st = slope(&taus, &pt);
    let cov = vs
        .iter()
        .zip(pv.iter().zip(&pt))
        .map(|(v, (a, b))| (a - b / (v * v)).abs() / a)
        .fold(0.0, f64::max);
    let report = run_scenario("D1", &ScenarioConfig::default()).unwrap();
    let scenario_ok = report.checks.iter().all(|c| c.status == CheckStatus::Pass);
    outcome(
        (sv + 1.5).abs() <= 1e-3 && (st + 0.5).abs() <= 1e-3 && cov <= 1e-8 && scenario_ok,
        format!("slope v {sv:.6}, slope tau {st:.6}, change-of-variables {cov:.1e}"),
    )
}

fn nuisance_closed_form() -> Outcome {
    let model = ModelSpec::normal_mu_var();
    let mut worst: f64 = 0.0;
    for c in [1.0, 10.0, 100.0] {
        let geom = ExclusionGeometry::Block(vec![1.0, c]);
        for v in logspace(0.25, 4.0, 41) {
            let got = min_eig_prior(&model, &geom, &[0.0, v]).unwrap();
            let want = (1.0 / v).min(1.0 / (c * 2.0 * v * v));
            worst = worst.max((got - want).abs() / want);
        }
    }
    outcome(worst <= 1e-14, format!("max relative error {worst:.2e}"))
}

fn correlation_blow_up() -> Outcome {
    let model = ModelSpec::bivariate_normal_corr();
    let rhos: Vec<f64> = linspace(-0.99, 0.99, 99).into_iter().filter(|r| *r >= 0.9).collect();
    let info: Vec<f64> = rhos.iter().map(|r| fisher_numeric(&model, &[*r], 1e-4).unwrap()[(0, 0)]).collect();
    let xs: Vec<f64> = rhos.iter().map(|r| 1.0 - r * r).collect();
    let s = slope(&xs, &info);
    outcome((s + 2.0).abs() <= 0.1 && rhos.len() >= 2, format!("slope {s:.4} over {} nodes", rhos.len()))
}

fn spectra_close(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs()).fold(0.0, f64::max)
}

fn tensor_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let model = ModelSpec::normal_mu_sigma();
    let theta = [0.4, 1.3];
    let info = fisher_information(&model, &theta).unwrap();
    let a = SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 0.7]).unwrap();
    let base = whitened_spectrum(&info, &a).unwrap();
    let mut worst: f64 = 0.0;
    let mut maps = 0;
    while maps < 20 {
        let m: DMatrix<f64> = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-3.0..3.0));
        if m.determinant().abs() < 0.05 {
            continue;
        }
        maps += 1;
        let j = Jacobian::new(m).unwrap();
        let after = whitened_spectrum(
            &transform_geometry(&info, &j).unwrap(),
            &transform_geometry(&a, &j).unwrap(),
        )
        .unwrap();
        worst = worst.max(spectra_close(&base, &after));
    }
    // (mu, v) -> (mu, tau = 1/v): Jacobian diag(1, -1/v^2)
    let v = 1.7;
    let info_v = fisher_information(&ModelSpec::normal_mu_var(), &[0.2, v]).unwrap();
    let a_v = SpdMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
    let j = Jacobian::from_row_slice(2, &[1.0, 0.0, 0.0, -1.0 / (v * v)]).unwrap();
    let info_t = fisher_information(&ModelSpec::normal_mu_prec(), &[0.2, 1.0 / v]).unwrap();
    let reparam = spectra_close(
        &whitened_spectrum(&info_v, &a_v).unwrap(),
        &whitened_spectrum(&info_t, &transform_geometry(&a_v, &j).unwrap()).unwrap(),
    );
    outcome(
        worst <= 1e-8 && reparam <= 1e-8,
        format!("{maps} affine maps: {worst:.1e}; variance/precision: {reparam:.1e}"),
    )
}

fn discrete_baseline() -> Outcome {
    let elements: Vec<DiscreteElement> = [1.0, 2.0, 3.0]
        .iter()
        .map(|l| DiscreteElement { label: format!("{l}"), model: ModelSpec::poisson(), theta: vec![*l] })
        .collect();
    let p = discrete_loss_prior(&elements).unwrap();
    // KL(P1 || P2) = 1*ln(1/2) + 2 - 1; KL(P1 || P3) = ln(1/3) + 2 is larger
    let u1 = 1.0 - 2f64.ln();
    let e_u = (p.worths[0] - u1).abs();
    let e_m = (p.unnormalized[0] - (u1.exp() - 1.0)).abs();
    outcome(
        e_u <= 1e-12 && e_m <= 1e-12,
        format!("u(1) error {e_u:.1e}, mass error {e_m:.1e}, mass {:.11}", p.unnormalized[0]),
    )
}

fn determinism() -> Outcome {
    let opts = ValidateOptions::default();
    let a = run_validation(&opts).unwrap().to_json();
    let b = run_validation(&opts).unwrap().to_json();
    outcome(a == b, format!("{} bytes, identical = {}", a.len(), a == b))
}

fn discrepancy_records() -> Outcome {
    let d3 = run_scenario("D3", &ScenarioConfig::default()).unwrap();
    let d3_ok = d3.checks.iter().any(|c| {
        c.status == CheckStatus::PaperDiscrepancy
            && ["exponent_volume", "exponent_min_eig_fisher_isotropic", "exponent_claimed"]
                .iter()
                .all(|k| c.values.get(k).and_then(|v| v.as_f64()).is_some())
    });
    let report = run_validation(&ValidateOptions::default()).unwrap();
    let exp_ok = report.suites.iter().flat_map(|s| &s.checks).any(|c| {
        c.status == CheckStatus::PaperDiscrepancy
            && c.values.as_object().is_some_and(|m| {
                !m.is_empty()
                    && m.values().all(|v| {
                        ["exponent_finite_delta", "exponent_min_eig", "exponent_volume", "exponent_claimed"]
                            .iter()
                            .all(|k| v.get(k).and_then(|x| x.as_f64()).is_some())
                    })
            })
    });
    outcome(d3_ok && exp_ok, format!("group-invariance record {d3_ok}, one-dimensional exponent record {exp_ok}"))
}

/// Name, check, runtime budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("1 quadratic KL expansion", quadratic_expansion, 10),
        ("2 one-dimensional worth", one_dimensional_worth, 10),
        ("3 eigenvalue asymptotics and oracle", eigenvalue_convergence, 60),
        ("4 reparametrization exponents", reparametrization_exponents, 5),
        ("5 interest/nuisance closed form", nuisance_closed_form, 5),
        ("6 correlation blow-up rate", correlation_blow_up, 10),
        ("7 tensor invariance", tensor_invariance, 5),
        ("8 discrete baseline", discrete_baseline, 1),
        ("9 validate determinism", determinism, 120),
        ("10 documented discrepancies", discrepancy_records, 120),
    ];
    let mut failures = Vec::new();
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let passed = out.passed && in_time;
        println!(
            "[{}] criterion {name}: {} ({:.2}s of {budget}s)",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        if !passed {
            failures.push(name);
        }
    }
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}
