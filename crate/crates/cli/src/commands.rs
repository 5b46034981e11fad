use std::path::Path;

use lossprior::fisher::fisher_information;
use lossprior::priors::{
    discrete_loss_prior, evaluate_prior_grid, fmt_f64, DiscreteElement, GridOptions, PriorKind,
};
use lossprior::scenarios::{run_scenario, CheckStatus};
use lossprior::validate::{run_validation, ValidateOptions};
use lossprior::worth::{
    check_deltas, delta_worth_asymptotic_at, delta_worth_exact, delta_worth_oracle,
};
use serde_json::json;

use crate::config::{known_scenarios, Format, RunConfig, DEFAULT_ORACLE_POINTS};
use crate::CliError;

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

fn csv_header(config: &RunConfig) -> Vec<String> {
    vec![
        format!("lossprior {}", config.command.as_deref().unwrap_or("")),
        format!("config: {}", serde_json::to_string(config).expect("config serializes")),
    ]
}

fn csv_table(config: &RunConfig, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for line in csv_header(config) {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn format_or(config: &RunConfig, default: Format) -> Format {
    config.format.unwrap_or(default)
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

pub fn fisher(config: &RunConfig) -> Result<(), CliError> {
    if config.format == Some(Format::Csv) {
        return Err(CliError::Usage("fisher writes JSON only".into()));
    }
    let model = config.model_spec()?;
    let theta = config.require_theta()?;
    model.check_domain(theta)?;
    let info = fisher_information(&model, theta)?;
    let eig = info.eigenvalues();
    let (lmin, lmax) = (eig[0], eig[eig.len() - 1]);
    let source = if model.analytic_fisher(theta).is_some() { "analytic" } else { "numeric" };
    println!("lambda_min = {}", fmt_f64(lmin));
    println!("lambda_max = {}", fmt_f64(lmax));
    println!("condition_number = {}", fmt_f64(info.condition_number()));
    let doc = json!({
        "config": config,
        "model": model.name(),
        "theta": theta,
        "fisher": info,
        "source": source,
        "eigenvalues": eig,
        "lambda_min": lmin,
        "lambda_max": lmax,
        "condition_number": info.condition_number(),
    });
    write_output(&config.output_path("fisher.json"), &pretty(&doc))
}

pub fn prior_grid(config: &RunConfig) -> Result<(), CliError> {
    let model = config.model_spec()?;
    let geometry = config.geometry(&model)?;
    let kind = PriorKind::parse(config.kind.as_deref().unwrap_or("min_eig"))?;
    let axes = config.axes()?;
    let opts = GridOptions {
        delta: config.delta,
        normalize: config.normalize.unwrap_or(false),
    };
    let grid = evaluate_prior_grid(&model, &geometry, kind, &axes, opts)?;
    let format = format_or(config, Format::Csv);
    let path = config.output_path(&format!("prior_grid.{}", extension(format)));
    let text = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            grid.write_csv(&mut buf, &csv_header(config))?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => pretty(&json!({ "config": config, "grid": grid.to_json() })),
    };
    println!("{} nodes, normalized = {}", grid.len(), grid.normalized);
    write_output(&path, &text)
}

pub fn worth(config: &RunConfig) -> Result<(), CliError> {
    let deltas = config.deltas.clone().unwrap_or_default();
    if deltas.is_empty() {
        return Err(CliError::Usage(
            "worth needs a non-empty, strictly decreasing delta list (--deltas 0.1,0.01)".into(),
        ));
    }
    check_deltas(&deltas).map_err(|e| CliError::Usage(e.to_string()))?;
    let model = config.model_spec()?;
    let geometry = config.geometry(&model)?;
    let theta = config.require_theta()?;
    let n_oracle = config.oracle_points.unwrap_or(DEFAULT_ORACLE_POINTS);
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let exact = delta_worth_exact(&model, theta, &geometry, delta)?;
        let asym = delta_worth_asymptotic_at(&model, theta, &geometry, delta)?;
        let oracle = delta_worth_oracle(&model, theta, &geometry, delta, n_oracle, config.seed())?;
        rows.push([delta, exact.value, asym.value, oracle.value, exact.value / asym.value]);
    }
    println!("delta exact asymptotic oracle ratio");
    for r in &rows {
        println!("{}", r.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" "));
    }
    let columns = ["delta", "exact", "asymptotic", "oracle", "ratio"];
    let format = format_or(config, Format::Csv);
    let text = match format {
        Format::Csv => {
            let cells: Vec<Vec<String>> =
                rows.iter().map(|r| r.iter().map(|x| fmt_f64(*x)).collect()).collect();
            csv_table(config, &columns, &cells)
        }
        Format::Json => {
            let objs: Vec<_> = rows
                .iter()
                .map(|r| json!({ "delta": r[0], "exact": r[1], "asymptotic": r[2], "oracle": r[3], "ratio": r[4] }))
                .collect();
            pretty(&json!({
                "config": config,
                "violates_likelihood_principle": geometry.violates_likelihood_principle(),
                "rows": objs,
            }))
        }
    };
    write_output(&config.output_path(&format!("worth.{}", extension(format))), &text)
}

pub fn scenario(config: &RunConfig) -> Result<(), CliError> {
    let name = config.scenario.as_deref().ok_or_else(|| {
        CliError::Usage(format!("scenario name required; one of {}", known_scenarios()))
    })?;
    if config.format == Some(Format::Csv) {
        return Err(CliError::Usage("scenario reports are JSON only".into()));
    }
    let report = run_scenario(name, &config.scenario_config.clone().unwrap_or_default())?;
    for c in &report.checks {
        let tag = match c.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::PaperDiscrepancy => "discrepancy",
        };
        println!("[{tag}] {}", c.description);
    }
    let doc = json!({ "config": config, "report": report });
    write_output(&config.output_path(&format!("scenario_{}.json", report.name)), &pretty(&doc))?;
    if report.failed() {
        return Err(CliError::ChecksFailed(format!("scenario {} has failing checks", report.name)));
    }
    Ok(())
}

pub fn validate(config: &RunConfig, fault: Option<f64>) -> Result<(), CliError> {
    let opts = ValidateOptions {
        seed: config.seed(),
        inject_fisher_scale: fault,
        scenarios: config.scenario_config.clone().unwrap_or_default(),
    };
    let report = run_validation(&opts)?;
    for s in &report.suites {
        let count = |st: CheckStatus| s.checks.iter().filter(|c| c.status == st).count();
        println!(
            "{:<14} pass {:>3}  fail {:>3}  discrepancy {:>3}",
            s.name,
            count(CheckStatus::Pass),
            count(CheckStatus::Fail),
            count(CheckStatus::PaperDiscrepancy)
        );
    }
    let doc = json!({ "config": config, "report": report });
    write_output(&config.output_path("validate.json"), &pretty(&doc))?;
    let failing = report.failing_checks();
    if failing.is_empty() {
        Ok(())
    } else {
        for f in &failing {
            eprintln!("failed: {f}");
        }
        Err(CliError::ChecksFailed(failing.join("; ")))
    }
}

pub fn discrete_prior(config: &RunConfig) -> Result<(), CliError> {
    let model = config.model_spec()?;
    let points = config
        .points
        .clone()
        .ok_or_else(|| CliError::Usage("discrete-prior needs --point for each element".into()))?;
    let elements: Vec<DiscreteElement> = points
        .iter()
        .map(|p| DiscreteElement {
            label: p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
            model: model.clone(),
            theta: p.clone(),
        })
        .collect();
    let prior = discrete_loss_prior(&elements)?;
    for (l, p) in prior.labels.iter().zip(&prior.probabilities) {
        println!("{l}: {}", fmt_f64(*p));
    }
    let format = format_or(config, Format::Json);
    let text = match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..prior.labels.len())
                .map(|i| {
                    vec![
                        prior.labels[i].clone(),
                        fmt_f64(prior.worths[i]),
                        fmt_f64(prior.unnormalized[i]),
                        fmt_f64(prior.probabilities[i]),
                    ]
                })
                .collect();
            csv_table(config, &["label", "worth", "unnormalized", "probability"], &rows)
        }
        Format::Json => pretty(&json!({ "config": config, "prior": prior })),
    };
    write_output(&config.output_path(&format!("discrete_prior.{}", extension(format))), &text)
}
