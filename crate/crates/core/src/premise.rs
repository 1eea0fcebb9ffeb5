//! Structural assumptions shared by the block-inverse identities and the transfers.

use serde::Serialize;

use crate::design::{Design, ParamPoint};
use crate::error::{Error, Premise, Result};
use crate::model::{Family, ModelSpec};

/// Largest `|cᵀf(x) − 1|` accepted for membership in the origin-plus-hyperplane class.
pub const XI0_RESIDUAL_TOL: f64 = 1e-8;

/// How the `u = ũ` assumption is met.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// The intensities coincide at the given parameter.
    Direct,
    /// Poisson with `β₀ ≠ 0`: `u = e^{β₀} ũ`, so optimal designs do not depend on `β₀`
    /// and all computations run at `β₀ = 0`.
    PoissonFactorization,
}

pub(crate) fn intensity_route(model: &ModelSpec, beta: &ParamPoint) -> Result<Route> {
    let b0 = beta.beta0();
    match model.family {
        Family::LinearGaussian | Family::Emax | Family::ExpRegression => Ok(Route::Direct),
        Family::Logistic if b0 == 0.0 => Ok(Route::Direct),
        Family::Logistic => Err(Error::PremiseViolated(Premise::IntensityMatch)),
        Family::Poisson if b0 == 0.0 => Ok(Route::Direct),
        Family::Poisson => Ok(Route::PoissonFactorization),
    }
}

/// `f_β̃(0) = 0`.
pub(crate) fn check_vanishes_at_origin(model: &ModelSpec, beta: &ParamPoint) -> Result<()> {
    let g0 = model
        .no_intercept_model()
        .weighted_regressor(&beta.tilde(), &vec![0.0; model.dim])?;
    if g0.iter().any(|v| *v != 0.0) {
        return Err(Error::PremiseViolated(Premise::VanishesAtOrigin));
    }
    Ok(())
}

/// `max |cᵀf(x) − 1|` over the points of `design` other than the origin.
pub(crate) fn hyperplane_residual(design: &Design, model: &ModelSpec, beta: &ParamPoint, c: &[f64]) -> Result<f64> {
    if c.len() != model.slope_dim() {
        return Err(Error::DimensionMismatch(format!(
            "c has length {}, expected {}",
            c.len(),
            model.slope_dim()
        )));
    }
    let origin = design.origin_index();
    let mut worst: f64 = 0.0;
    for (i, p) in design.points().iter().enumerate() {
        if Some(i) == origin {
            continue;
        }
        let h = model.hyperplane_regressor(&beta.tilde(), &p.x)?;
        let dot: f64 = h.iter().zip(c).map(|(a, b)| a * b).sum();
        worst = worst.max((dot - 1.0).abs());
    }
    Ok(worst)
}
