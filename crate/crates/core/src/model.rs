//! Model families: regression vectors, GLM intensities and nonlinear gradients.
//!
//! GLM families use the first-order predictor `f(x) = x` (no intercept) or
//! `(1, xᵀ)ᵀ` (intercept) with unit dispersion and canonical link, so the
//! intensity is available in closed form. The nonlinear families are the
//! one-dimensional E-max and exponential dose-response models, whose
//! information comes from the gradient of the mean response.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::design::ParamPoint;
use crate::error::{Error, Result};

/// Linear predictors are clamped to this magnitude before exponentiation.
pub const ETA_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poisson,
    Logistic,
    LinearGaussian,
    /// `h(x, β) = β₀ + β₁x / (x + β₂)`
    Emax,
    /// `h(x, β) = β₀ + β₁ exp(x / β₂)`
    ExpRegression,
}

impl Family {
    pub fn is_nonlinear(self) -> bool {
        matches!(self, Family::Emax | Family::ExpRegression)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Logistic => "logistic",
            Family::LinearGaussian => "linear_gaussian",
            Family::Emax => "emax",
            Family::ExpRegression => "exp_regression",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "poisson" => Ok(Family::Poisson),
            "logistic" => Ok(Family::Logistic),
            "linear_gaussian" | "linear" | "gaussian" => Ok(Family::LinearGaussian),
            "emax" | "e_max" => Ok(Family::Emax),
            "exp_regression" | "exponential" | "exp" => Ok(Family::ExpRegression),
            other => Err(Error::Parse(format!("unknown model family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelSpec {
    pub family: Family,
    pub with_intercept: bool,
    /// Dimension of the experimental region.
    pub dim: usize,
}

impl ModelSpec {
    pub fn new(family: Family, with_intercept: bool, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch("region dimension must be positive".into()));
        }
        if family.is_nonlinear() && dim != 1 {
            return Err(Error::WrongDimension { expected: 1, got: dim });
        }
        Ok(Self {
            family,
            with_intercept,
            dim,
        })
    }

    /// Number of parameters without the intercept.
    pub fn slope_dim(&self) -> usize {
        if self.family.is_nonlinear() {
            2
        } else {
            self.dim
        }
    }

    /// Length of the (weighted) regressor, i.e. the size of the information matrix.
    pub fn param_dim(&self) -> usize {
        self.slope_dim() + usize::from(self.with_intercept)
    }

    pub fn intercept_model(&self) -> ModelSpec {
        ModelSpec {
            with_intercept: true,
            ..*self
        }
    }

    pub fn no_intercept_model(&self) -> ModelSpec {
        ModelSpec {
            with_intercept: false,
            ..*self
        }
    }

    /// Checks that `beta` fits this model. A no-intercept model ignores `beta.intercept`;
    /// nonlinear models treat a missing intercept as zero.
    pub fn check_params(&self, beta: &ParamPoint) -> Result<()> {
        if beta.slope.len() != self.slope_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} model expects {} slope parameters, got {}",
                self.family,
                self.slope_dim(),
                beta.slope.len()
            )));
        }
        if self.with_intercept && !self.family.is_nonlinear() && beta.intercept.is_none() {
            return Err(Error::DimensionMismatch(
                "intercept model needs an intercept parameter".into(),
            ));
        }
        if beta.full().iter().any(|b| !b.is_finite()) {
            return Err(Error::DimensionMismatch("parameters must be finite".into()));
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::WrongDimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `f(x)` for the GLM families: `x`, or `(1, xᵀ)ᵀ` with intercept.
    pub fn regression_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.family.is_nonlinear() {
            return Err(Error::NonlinearFamily);
        }
        self.check_x(x)?;
        let mut v = Vec::with_capacity(self.param_dim());
        if self.with_intercept {
            v.push(1.0);
        }
        v.extend_from_slice(x);
        Ok(v)
    }

    /// Linear predictor, including `β₀` only for the intercept model.
    pub fn eta(&self, beta: &ParamPoint, x: &[f64]) -> Result<f64> {
        if self.family.is_nonlinear() {
            return Err(Error::NonlinearFamily);
        }
        self.check_params(beta)?;
        self.check_x(x)?;
        let dot: f64 = x.iter().zip(&beta.slope).map(|(a, b)| a * b).sum();
        Ok(if self.with_intercept { beta.beta0() + dot } else { dot })
    }

    /// GLM intensity `u(x, β)`: the factor multiplying `f fᵀ` in the information.
    pub fn intensity(&self, beta: &ParamPoint, x: &[f64]) -> Result<f64> {
        let eta = self.eta(beta, x)?;
        Ok(glm_intensity(self.family, eta))
    }

    /// The per-point information factor `v` with `M(x, β) = v vᵀ`.
    ///
    /// GLMs: `u^{1/2}(x, β) f(x)`. Nonlinear families: the gradient of the mean
    /// response in `β`, with the leading `1` present only for the intercept model.
    pub fn weighted_regressor(&self, beta: &ParamPoint, x: &[f64]) -> Result<Vec<f64>> {
        if self.family.is_nonlinear() {
            self.check_params(beta)?;
            self.check_x(x)?;
            let (g1, g2) = nonlinear_gradient(self.family, beta.slope[0], beta.slope[1], x[0])?;
            let mut v = Vec::with_capacity(3);
            if self.with_intercept {
                v.push(1.0);
            }
            v.push(g1);
            v.push(g2);
            return Ok(v);
        }
        let root_u = self.intensity(beta, x)?.sqrt();
        let mut v = self.regression_vector(x)?;
        for e in &mut v {
            *e *= root_u;
        }
        Ok(v)
    }

    /// Mean response `h(x, β)` of the nonlinear families.
    pub fn response(&self, beta: &ParamPoint, x: f64) -> Result<f64> {
        self.check_params(beta)?;
        let (b0, b1, b2) = (beta.beta0(), beta.slope[0], beta.slope[1]);
        match self.family {
            Family::Emax => {
                if x + b2 == 0.0 {
                    return Err(Error::SingularNonlinearParam(x));
                }
                Ok(b0 + b1 * x / (x + b2))
            }
            Family::ExpRegression => {
                if b2 == 0.0 {
                    return Err(Error::SingularNonlinearParam(x));
                }
                Ok(b0 + b1 * (x / b2).exp())
            }
            _ => Err(Error::DimensionMismatch(
                "response() is only defined for nonlinear families".into(),
            )),
        }
    }

    /// Square root of the no-intercept intensity, `ũ^{1/2}(x, β̃)`; identically one for
    /// the nonlinear families.
    pub(crate) fn root_intensity_tilde(&self, beta: &ParamPoint, x: &[f64]) -> Result<f64> {
        if self.family.is_nonlinear() {
            return Ok(1.0);
        }
        Ok(self.no_intercept_model().intensity(beta, x)?.sqrt())
    }

    /// The vector that must lie on the hyperplane `cᵀ(·) = 1` for designs in the
    /// origin-plus-hyperplane class: `f(x) = x` for GLMs, the no-intercept gradient otherwise.
    pub(crate) fn hyperplane_regressor(&self, beta: &ParamPoint, x: &[f64]) -> Result<Vec<f64>> {
        if self.family.is_nonlinear() {
            self.no_intercept_model().weighted_regressor(beta, x)
        } else {
            self.check_x(x)?;
            Ok(x.to_vec())
        }
    }
}

pub(crate) fn glm_intensity(family: Family, eta: f64) -> f64 {
    let eta = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
    match family {
        Family::Poisson => eta.exp(),
        Family::Logistic => {
            let e = (-eta.abs()).exp();
            e / ((1.0 + e) * (1.0 + e))
        }
        Family::LinearGaussian => 1.0,
        Family::Emax | Family::ExpRegression => 1.0,
    }
}

fn nonlinear_gradient(family: Family, b1: f64, b2: f64, x: f64) -> Result<(f64, f64)> {
    match family {
        Family::Emax => {
            let d = x + b2;
            if d == 0.0 {
                return Err(Error::SingularNonlinearParam(x));
            }
            Ok((x / d, -b1 * x / (d * d)))
        }
        Family::ExpRegression => {
            if b2 == 0.0 {
                return Err(Error::SingularNonlinearParam(x));
            }
            let e = (x / b2).exp();
            Ok((e, -b1 * x * e / (b2 * b2)))
        }
        _ => unreachable!("gradient requested for a GLM family"),
    }
}

fn ustar_equation(u: f64) -> f64 {
    let e = u.exp();
    2.0 + u + 2.0 * e - u * e
}

/// Residual `2 + u + 2eᵘ − u eᵘ` of the logistic support equation.
pub fn logistic_ustar_residual(u: f64) -> f64 {
    ustar_equation(u)
}

/// Positive root of `2 + u + 2eᵘ − u eᵘ = 0`: bisection on `[2 + 1e-9, 10]`, then Newton.
pub fn solve_logistic_ustar() -> f64 {
    let (mut lo, mut hi) = (2.0 + 1e-9, 10.0);
    // g(lo) > 0 > g(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ustar_equation(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..5 {
        let e = u.exp();
        let deriv = 1.0 + e * (1.0 - u);
        let next = u - ustar_equation(u) / deriv;
        if !next.is_finite() || ustar_equation(next).abs() >= ustar_equation(u).abs() {
            break;
        }
        u = next;
    }
    u
}
