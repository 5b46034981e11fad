//! Loss-based objective priors for continuous parameter spaces.
//!
//! A parameter value's worth is the smallest Kullback–Leibler loss incurred when it is
//! removed from the model together with an ellipsoidal neighbourhood
//! `{theta + h : h' A(theta) h <= delta^2}`. The crate computes that worth exactly (by
//! constrained minimization on the ellipsoid boundary), asymptotically (half `delta^2`
//! times the smallest eigenvalue of `A^{-1/2} I A^{-1/2}`), and by brute force, and turns
//! it into prior densities on bounded grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod fisher;
pub mod geometry;
pub mod matrix;
pub mod model_zoo;
pub mod priors;
pub mod quadrature;
pub mod scenarios;
pub mod validate;
pub mod worth;

pub use error::{Error, Result};
pub use nalgebra;
pub use fisher::{expansion_residual, fisher_information, fisher_numeric};
pub use geometry::{
    min_eigenvalue, sqrt_spd, transform_geometry, whiten, ExclusionGeometry, Jacobian, MinEigen,
};
pub use matrix::SpdMatrix;
pub use model_zoo::{kl_divergence, sample, KlMode, ModelSpec, ParamPoint};
pub use priors::{
    discrete_loss_prior, evaluate_prior_grid, jeffreys_prior, loss_prior_density, min_eig_prior,
    DiscreteElement, DiscretePrior, GridOptions, PriorGrid, PriorKind,
};
