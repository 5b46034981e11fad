//! Prior densities built from worth: the finite-delta loss prior exp(u) - 1, the
//! asymptotic smallest-eigenvalue prior, the volume (Jeffreys) prior, and the discrete
//! loss prior over a finite family. Continuous priors are generally improper and are only
//! normalized over user-supplied bounded grids.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::fisher::fisher_information;
use crate::geometry::{min_eigenvalue, whiten, ExclusionGeometry};
use crate::model_zoo::{kl_divergence, ModelSpec};
use crate::worth::delta_worth_exact;

/// exp(u) - 1, accurate for small u.
pub fn loss_prior_density(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Contract(format!("worth must be nonnegative, got {u}")));
    }
    Ok(u.exp_m1())
}

/// lambda_min(A^{-1/2} I A^{-1/2}) at theta.
pub fn min_eig_prior(model: &ModelSpec, geometry: &ExclusionGeometry, theta: &[f64]) -> Result<f64> {
    let info = fisher_information(model, theta)?;
    let a = geometry.evaluate(model, theta)?;
    Ok(min_eigenvalue(whiten(&info, &a)?.as_matrix())?.value)
}

/// sqrt(det I(theta)).
pub fn jeffreys_prior(model: &ModelSpec, theta: &[f64]) -> Result<f64> {
    let info = fisher_information(model, theta)?;
    // product of eigenvalues; avoids the sign noise of a cofactor determinant
    Ok(info.eigenvalues().iter().product::<f64>().sqrt())
}

/// One member of a finite family: a model at a fixed parameter value.
#[derive(Debug, Clone)]
pub struct DiscreteElement {
    pub label: String,
    pub model: ModelSpec,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretePrior {
    pub labels: Vec<String>,
    /// u_j = min over k != j of KL(f_j || f_k).
    pub worths: Vec<f64>,
    /// exp(u_j) - 1.
    pub unnormalized: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// The loss prior over a finite set of distributions from one family.
pub fn discrete_loss_prior(elements: &[DiscreteElement]) -> Result<DiscretePrior> {
    if elements.len() < 2 {
        return Err(Error::Contract(format!(
            "discrete prior needs at least two elements, got {}",
            elements.len()
        )));
    }
    let family = elements[0].model.name();
    if let Some(other) = elements.iter().find(|e| e.model.name() != family) {
        return Err(Error::Contract(format!(
            "all elements must share one family; found {family} and {}",
            other.model.name()
        )));
    }
    let n = elements.len();
    let worths: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let ej = &elements[j];
            let mut best = f64::INFINITY;
            for (k, ek) in elements.iter().enumerate() {
                if k != j {
                    best = best.min(kl_divergence(&ej.model, &ej.theta, &ek.theta)?);
                }
            }
            Ok(best)
        })
        .collect::<Vec<Result<f64>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    if let Some(j) = worths.iter().position(|u| !(*u > 0.0) || !u.is_finite()) {
        return Err(Error::Contract(format!(
            "element '{}' has worth {}; duplicate or non-separated elements",
            elements[j].label, worths[j]
        )));
    }
    let unnormalized: Vec<f64> = worths.iter().map(|u| u.exp_m1()).collect();
    let total: f64 = unnormalized.iter().sum();
    Ok(DiscretePrior {
        labels: elements.iter().map(|e| e.label.clone()).collect(),
        worths,
        probabilities: unnormalized.iter().map(|m| m / total).collect(),
        unnormalized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    FiniteDelta,
    MinEig,
    Jeffreys,
    Discrete,
}

impl PriorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "finite_delta" => Ok(PriorKind::FiniteDelta),
            "min_eig" => Ok(PriorKind::MinEig),
            "jeffreys" => Ok(PriorKind::Jeffreys),
            "discrete" => Ok(PriorKind::Discrete),
            other => Err(Error::Contract(format!(
                "unknown prior kind '{other}'; expected finite_delta, min_eig, jeffreys or discrete"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMetadata {
    pub model: String,
    pub geometry: String,
    pub delta: Option<f64>,
    pub violates_likelihood_principle: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GridOptions {
    pub delta: Option<f64>,
    pub normalize: bool,
}

/// Prior values over a rectangular tensor-product grid, last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorGrid {
    pub axes: Vec<Vec<f64>>,
    pub axis_names: Vec<String>,
    pub values: Vec<f64>,
    pub normalized: bool,
    pub kind: PriorKind,
    pub metadata: GridMetadata,
}

fn grid_len(axes: &[Vec<f64>]) -> usize {
    axes.iter().map(Vec::len).product()
}

fn node_coords(axes: &[Vec<f64>], mut index: usize) -> Vec<f64> {
    let mut coords = vec![0.0; axes.len()];
    for (k, axis) in axes.iter().enumerate().rev() {
        coords[k] = axis[index % axis.len()];
        index /= axis.len();
    }
    coords
}

/// Trapezoid weights for one axis.
fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let half = 0.5 * (axis[i + 1] - axis[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    w
}

impl PriorGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, index: usize) -> Vec<f64> {
        node_coords(&self.axes, index)
    }

    /// Product-trapezoid cell volume of every node.
    pub fn cell_volumes(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self.axes.iter().map(|a| trapezoid_weights(a)).collect();
        (0..self.len())
            .map(|i| {
                let mut idx = i;
                let mut w = 1.0;
                for (k, axis) in self.axes.iter().enumerate().rev() {
                    w *= per_axis[k][idx % axis.len()];
                    idx /= axis.len();
                }
                w
            })
            .collect()
    }

    /// Sum of value times cell volume.
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.cell_volumes())
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        if self.axes.iter().any(|a| a.len() < 2) {
            return Err(Error::Contract(
                "normalization needs at least two nodes per axis".into(),
            ));
        }
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Contract(format!("cannot normalize a grid with mass {mass}")));
        }
        for v in &mut self.values {
            *v /= mass;
        }
        self.normalized = true;
        Ok(())
    }

    /// One row per node: coordinates, then `density`. Numbers carry 17 significant digits;
    /// `header` lines are written first as `# ` comments.
    pub fn write_csv<W: Write>(&self, out: W, header: &[String]) -> Result<()> {
        let mut out = out;
        for line in header {
            writeln!(out, "# {line}")?;
        }
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut head: Vec<String> = self.axis_names.clone();
        head.push("density".into());
        wtr.write_record(&head)?;
        for (i, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.node(i).iter().map(|x| fmt_f64(*x)).collect();
            row.push(fmt_f64(*v));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Axes, flattened values and metadata.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "kind": self.kind,
            "normalized": self.normalized,
            "axis_names": self.axis_names,
            "axes": self.axes,
            "values": self.values,
            "metadata": self.metadata,
        })
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Fills a rectangular grid with the chosen prior kind.
pub fn evaluate_prior_grid(
    model: &ModelSpec,
    geometry: &ExclusionGeometry,
    kind: PriorKind,
    axes: &[Vec<f64>],
    opts: GridOptions,
) -> Result<PriorGrid> {
    if axes.len() != model.dim() {
        return Err(Error::Shape(format!(
            "{} axes for a {}-dimensional model",
            axes.len(),
            model.dim()
        )));
    }
    for (k, axis) in axes.iter().enumerate() {
        if axis.is_empty() {
            return Err(Error::Contract(format!("axis {k} is empty")));
        }
        if axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract(format!("axis {k} is not strictly increasing")));
        }
    }
    let delta = match (kind, opts.delta) {
        (PriorKind::FiniteDelta, None) => {
            return Err(Error::Contract("finite_delta grids need a delta".into()))
        }
        (_, d) => d,
    };
    let n = grid_len(axes);
    let at_node = |index: usize, e: Error| Error::AtGridNode {
        index,
        coords: node_coords(axes, index),
        source: Box::new(e),
    };

    let values: Vec<f64> = if kind == PriorKind::Discrete {
        let elements: Vec<DiscreteElement> = (0..n)
            .map(|i| DiscreteElement {
                label: format!("{i}"),
                model: model.clone(),
                theta: node_coords(axes, i),
            })
            .collect();
        for (i, e) in elements.iter().enumerate() {
            model.check_domain(&e.theta).map_err(|err| at_node(i, err))?;
        }
        discrete_loss_prior(&elements)?.unnormalized
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let theta = node_coords(axes, i);
                let v = match kind {
                    PriorKind::FiniteDelta => {
                        delta_worth_exact(model, &theta, geometry, delta.unwrap_or_default())
                            .and_then(|u| loss_prior_density(u.value))
                    }
                    PriorKind::MinEig => min_eig_prior(model, geometry, &theta),
                    PriorKind::Jeffreys => jeffreys_prior(model, &theta),
                    PriorKind::Discrete => unreachable!(),
                };
                v.map_err(|e| at_node(i, e))
            })
            .collect::<Vec<Result<f64>>>()
            .into_iter()
            .collect::<Result<_>>()?
    };

    let mut grid = PriorGrid {
        axes: axes.to_vec(),
        axis_names: model.param_names(),
        values,
        normalized: false,
        kind,
        metadata: GridMetadata {
            model: model.name().to_string(),
            geometry: geometry.descriptor(),
            delta: if kind == PriorKind::FiniteDelta { delta } else { None },
            violates_likelihood_principle: geometry.violates_likelihood_principle(),
        },
    };
    if opts.normalize {
        grid.normalize()?;
    }
    Ok(grid)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect();
    if let (Some(first), Some(last)) = (v.first_mut(), Some(lo)) {
        *first = last;
    }
    if let Some(last) = v.last_mut() {
        *last = hi;
    }
    v
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Contract("log-log fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Contract("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Contract("log-log fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}
