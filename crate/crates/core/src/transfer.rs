//! Moving locally optimal designs between a model with intercept and the same
//! model without intercept.
//!
//! The designs involved put weight `ω` on the origin and have the rest of their
//! support on a hyperplane `cᵀf(x) = 1`. Under `u = ũ` and `f_β̃(0) = 0`, the
//! intercept design is optimal exactly when the stripped design is optimal for
//! the no-intercept model and a pointwise condition holds over the region.
//! Removing the origin and renormalizing goes one way; adding the origin back
//! with the right weight goes the other.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::design::{Design, Grid, ParamPoint};
use crate::equivalence::{argmin, scan_grid, verify_local_optimality};
use crate::error::{Error, Premise, Result};
use crate::infomat::{info_matrix, Criterion};
use crate::model::ModelSpec;
use crate::premise::{self, Route, XI0_RESIDUAL_TOL};

/// Origin weights must match the theoretical value to this accuracy.
pub const ORIGIN_WEIGHT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperplaneCertificate {
    pub c: Vec<f64>,
    /// `max |cᵀf(x) − 1|` over the non-origin support.
    pub residual: f64,
    pub rank_deficient: bool,
}

impl HyperplaneCertificate {
    pub fn in_xi0(&self) -> bool {
        self.residual < XI0_RESIDUAL_TOL
    }
}

/// Least-squares (minimum-norm) `c` with `cᵀf(x) = 1` on the non-origin support.
///
/// `f` is the plain regressor `x` for GLMs and the no-intercept gradient for the
/// nonlinear families.
pub fn find_hyperplane_c(design: &Design, model: &ModelSpec, beta: &ParamPoint) -> Result<HyperplaneCertificate> {
    let origin = design.origin_index();
    let tilde = beta.tilde();
    let rows = design
        .points()
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != origin)
        .map(|(_, p)| model.hyperplane_regressor(&tilde, &p.x))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::NoNonOriginPoints);
    }
    let q = model.slope_dim();
    let h = DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j]);
    let ones = DVector::from_element(rows.len(), 1.0);
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * (rows.len().max(q) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let c = svd
        .solve(&ones, eps)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let residual = (&h * &c - ones).amax();
    Ok(HyperplaneCertificate {
        c: c.iter().copied().collect(),
        residual,
        rank_deficient: rank < q,
    })
}

/// Origin weight of the optimal intercept design.
///
/// D: `1/(ν + 1)`. A: `√(cᵀc+1) / (√(cᵀc+1) + √(ũ₀ τ̃))`; pass `ũ₀ = 1` for the
/// nonlinear families.
pub fn origin_weight(which: Criterion, nu: usize, c: &[f64], u0: f64, tau: f64) -> Result<f64> {
    match which {
        Criterion::D => {
            if nu == 0 {
                return Err(Error::NonpositiveInput("nu"));
            }
            Ok(1.0 / (nu as f64 + 1.0))
        }
        Criterion::A => {
            if !(u0 > 0.0) {
                return Err(Error::NonpositiveInput("u0"));
            }
            if !(tau > 0.0) {
                return Err(Error::NonpositiveInput("tau"));
            }
            let k = (c.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
            Ok(k / (k + (u0 * tau).sqrt()))
        }
    }
}

/// Quantities of the no-intercept design `ξ₋₀` that the transfer conditions use.
#[derive(Debug, Clone)]
pub struct TransferContext {
    model: ModelSpec,
    beta: ParamPoint,
    c: DVector<f64>,
    u0: f64,
    m_inv: DMatrix<f64>,
    m_inv2: DMatrix<f64>,
    tau: f64,
    k: f64,
}

impl TransferContext {
    /// `stripped` is `ξ₋₀`; `model` may be either variant, only the family matters.
    pub fn new(stripped: &Design, model: &ModelSpec, beta: &ParamPoint, c: &[f64]) -> Result<Self> {
        let no_int = model.no_intercept_model();
        let tilde = beta.tilde();
        no_int.check_params(&tilde)?;
        if c.len() != no_int.slope_dim() {
            return Err(Error::DimensionMismatch(format!(
                "c has length {}, expected {}",
                c.len(),
                no_int.slope_dim()
            )));
        }
        let f = info_matrix(stripped, &no_int, &tilde)?.factor()?;
        let u0 = model.root_intensity_tilde(&tilde, &vec![0.0; model.dim])?.powi(2);
        let c = DVector::from_column_slice(c);
        let k = (c.dot(&c) + 1.0).sqrt();
        Ok(Self {
            model: no_int,
            beta: tilde,
            c,
            u0,
            m_inv: f.inverse(),
            m_inv2: f.inverse_squared(),
            tau: f.trace_inverse(),
            k,
        })
    }

    /// `τ̃ = tr M̃⁻¹(ξ₋₀, β̃)`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `ũ₀ = ũ(0, β̃)`.
    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn nu(&self) -> usize {
        self.model.slope_dim()
    }

    pub fn c(&self) -> &[f64] {
        self.c.as_slice()
    }

    fn parts(&self, x: &[f64]) -> Result<(DVector<f64>, f64)> {
        let g = DVector::from_vec(self.model.weighted_regressor(&self.beta, x)?);
        let r = self.model.root_intensity_tilde(&self.beta, x)?;
        Ok((g, r))
    }

    /// `f_β̃ᵀ M̃⁻¹ f_β̃`.
    pub fn lhs_d(&self, x: &[f64]) -> Result<f64> {
        let (g, _) = self.parts(x)?;
        Ok(g.dot(&(&self.m_inv * &g)))
    }

    /// `f_β̃ᵀ M̃⁻² f_β̃`.
    pub fn lhs_a(&self, x: &[f64]) -> Result<f64> {
        let (g, _) = self.parts(x)?;
        Ok(g.dot(&(&self.m_inv2 * &g)))
    }

    /// `cᵀf_β̃(x) − ũ^{1/2}(x, β̃)`, zero on the hyperplane.
    pub fn offset(&self, x: &[f64]) -> Result<f64> {
        let (g, r) = self.parts(x)?;
        Ok(self.c.dot(&g) - r)
    }

    /// `ν (1 − e²/ũ₀) − f_β̃ᵀ M̃⁻¹ f_β̃`: the D transfer condition at `x`.
    pub fn margin_d(&self, x: &[f64]) -> Result<f64> {
        let (g, r) = self.parts(x)?;
        let e = self.c.dot(&g) - r;
        let lhs = g.dot(&(&self.m_inv * &g));
        Ok(self.nu() as f64 * (1.0 - e * e / self.u0) - lhs)
    }

    /// `τ̃ (1 − e²/ũ₀) − T₂ − f_β̃ᵀ M̃⁻² f_β̃`: the A transfer condition at `x`.
    pub fn margin_a(&self, x: &[f64]) -> Result<f64> {
        let (g, r) = self.parts(x)?;
        let e = self.c.dot(&g) - r;
        let lhs = g.dot(&(&self.m_inv2 * &g));
        let t2 = self.t2_parts(&g, r, self.tau);
        Ok(self.tau * (1.0 - e * e / self.u0) - t2 - lhs)
    }

    fn t2_parts(&self, g: &DVector<f64>, r: f64, tau: f64) -> f64 {
        let ag = &self.m_inv * g;
        let cag = self.c.dot(&ag);
        let cg = self.c.dot(g);
        let scale = 2.0 * (tau / (self.u0 * self.k * self.k)).sqrt();
        scale * (cag * cg - r * cag)
    }

    /// `T₂ = 2√(τ̃ / (ũ₀(cᵀc+1))) (f_β̃ᵀM̃⁻¹ccᵀf_β̃ − cᵀM̃⁻¹ũ^{1/2}f_β̃)`.
    pub fn t2(&self, x: &[f64]) -> Result<f64> {
        self.t2_with_tau(x, self.tau)
    }

    pub fn t2_with_tau(&self, x: &[f64], tau: f64) -> Result<f64> {
        let (g, r) = self.parts(x)?;
        Ok(self.t2_parts(&g, r, tau))
    }

    /// `T₁ = τ̃ (cᵀf_β̃ − ũ^{1/2})² / ũ₀ + T₂`, so that at the A-optimal origin weight
    /// the intercept condition `ψ_A ≤ tr M⁻¹` is equivalent to `f_β̃ᵀM̃⁻²f_β̃ + T₁ ≤ τ̃`.
    pub fn t1(&self, x: &[f64]) -> Result<f64> {
        self.t1_with_tau(x, self.tau)
    }

    pub fn t1_with_tau(&self, x: &[f64], tau: f64) -> Result<f64> {
        let (g, r) = self.parts(x)?;
        let e = self.c.dot(&g) - r;
        Ok(tau * e * e / self.u0 + self.t2_parts(&g, r, tau))
    }
}

fn check_structure(model: &ModelSpec, beta: &ParamPoint) -> Result<Route> {
    model.no_intercept_model().check_params(&beta.tilde())?;
    let route = premise::intensity_route(model, beta)?;
    premise::check_vanishes_at_origin(model, beta)?;
    Ok(route)
}

pub fn compute_t1(
    x: &[f64],
    stripped: &Design,
    model: &ModelSpec,
    beta: &ParamPoint,
    c: &[f64],
    tau: f64,
) -> Result<f64> {
    TransferContext::new(stripped, model, beta, c)?.t1_with_tau(x, tau)
}

pub fn compute_t2(
    x: &[f64],
    stripped: &Design,
    model: &ModelSpec,
    beta: &ParamPoint,
    c: &[f64],
    tau: f64,
) -> Result<f64> {
    TransferContext::new(stripped, model, beta, c)?.t2_with_tau(x, tau)
}

/// Minimum over a grid of a transfer condition margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionScan {
    pub margin: f64,
    pub argmin: Vec<f64>,
    /// Only for the A condition: minimum of `T₁` over the grid.
    pub t1_min: Option<f64>,
    pub t1_argmin: Option<Vec<f64>>,
}

fn min_over(grid: &Grid, values: &[f64]) -> (f64, Vec<f64>) {
    let i = argmin(values).expect("grid is nonempty");
    (values[i], grid.point(i).to_vec())
}

fn nonempty(grid: &Grid) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("grid has no points".into()));
    }
    Ok(())
}

/// `min_x [ν(1 − (cᵀf_β̃ − ũ^{1/2})²/ũ₀) − f_β̃ᵀM̃⁻¹f_β̃]` over the grid.
pub fn check_condition_d(
    stripped: &Design,
    model: &ModelSpec,
    beta: &ParamPoint,
    c: &[f64],
    grid: &Grid,
) -> Result<ConditionScan> {
    check_structure(model, beta)?;
    nonempty(grid)?;
    let ctx = TransferContext::new(stripped, model, beta, c)?;
    let values = scan_grid(grid, |x| ctx.margin_d(x))?;
    let (margin, argmin) = min_over(grid, &values);
    Ok(ConditionScan {
        margin,
        argmin,
        t1_min: None,
        t1_argmin: None,
    })
}

/// `min_x [τ̃(1 − (cᵀf_β̃ − ũ^{1/2})²/ũ₀) − T₂ − f_β̃ᵀM̃⁻²f_β̃]` over the grid, plus `min T₁`.
pub fn check_condition_a(
    stripped: &Design,
    model: &ModelSpec,
    beta: &ParamPoint,
    c: &[f64],
    grid: &Grid,
) -> Result<ConditionScan> {
    check_structure(model, beta)?;
    nonempty(grid)?;
    let ctx = TransferContext::new(stripped, model, beta, c)?;
    scan_a(&ctx, grid)
}

fn scan_a(ctx: &TransferContext, grid: &Grid) -> Result<ConditionScan> {
    let margins = scan_grid(grid, |x| ctx.margin_a(x))?;
    let t1 = scan_grid(grid, |x| ctx.t1(x))?;
    let (margin, argmin) = min_over(grid, &margins);
    let (t1_min, t1_arg) = min_over(grid, &t1);
    Ok(ConditionScan {
        margin,
        argmin,
        t1_min: Some(t1_min),
        t1_argmin: Some(t1_arg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToNoIntercept,
    ToIntercept,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub direction: Direction,
    pub criterion: Criterion,
    pub route: Route,
    pub origin_weight: f64,
    pub certificate: HyperplaneCertificate,
    pub tau_tilde: f64,
    pub u0: f64,
    pub condition_margin: f64,
    pub condition_argmin: Vec<f64>,
    pub t1_min: Option<f64>,
    /// `max |T₂|` over the support of the no-intercept design.
    pub t2_support_max: f64,
    pub grid_resolution: Option<usize>,
    pub grid_points: usize,
    pub truncated: bool,
    pub slack: f64,
    /// Max sensitivity excess of `result` over the grid for its own model.
    pub result_max_excess: f64,
    pub verified: bool,
    pub result: Design,
}

fn t2_support_max(ctx: &TransferContext, stripped: &Design) -> Result<f64> {
    stripped
        .points()
        .iter()
        .map(|p| ctx.t2(&p.x).map(f64::abs))
        .try_fold(0.0_f64, |acc, v| v.map(|v| acc.max(v)))
}

fn effective_beta(beta: &ParamPoint, route: Route) -> ParamPoint {
    match route {
        Route::Direct => ParamPoint::with_intercept(beta.beta0(), beta.slope.clone()),
        Route::PoissonFactorization => ParamPoint::with_intercept(0.0, beta.slope.clone()),
    }
}

/// Strips the origin from an optimal intercept design.
///
/// The input must be in the origin-plus-hyperplane class and carry the
/// theoretical origin weight; for A, `T₁ ≥ −slack` must hold on the grid.
/// `verified` re-checks the result against the no-intercept equivalence condition.
pub fn transfer_to_no_intercept(
    design: &Design,
    model: &ModelSpec,
    beta: &ParamPoint,
    which: Criterion,
    grid: &Grid,
    slack: f64,
) -> Result<TransferReport> {
    nonempty(grid)?;
    let route = check_structure(model, beta)?;
    let beta_eff = effective_beta(beta, route);
    let omega = design
        .origin_weight()
        .ok_or(Error::PremiseViolated(Premise::OriginInSupport))?;
    let certificate = find_hyperplane_c(design, model, &beta_eff)?;
    if !certificate.in_xi0() {
        return Err(Error::NotInXi0 {
            residual: certificate.residual,
        });
    }
    let stripped = design.strip_origin()?;
    let ctx = TransferContext::new(&stripped, model, &beta_eff, &certificate.c)?;
    let expected = origin_weight(which, ctx.nu(), &certificate.c, ctx.u0(), ctx.tau())?;
    if (omega - expected).abs() > ORIGIN_WEIGHT_TOL {
        return Err(Error::WrongOriginWeight {
            expected,
            actual: omega,
        });
    }
    let scan = match which {
        Criterion::D => {
            let values = scan_grid(grid, |x| ctx.margin_d(x))?;
            let (margin, argmin) = min_over(grid, &values);
            ConditionScan {
                margin,
                argmin,
                t1_min: None,
                t1_argmin: None,
            }
        }
        Criterion::A => {
            let scan = scan_a(&ctx, grid)?;
            let t1_min = scan.t1_min.expect("A scan computes T1");
            if t1_min < -slack {
                return Err(Error::T1Negative {
                    min: t1_min,
                    argmin: scan.t1_argmin.clone().unwrap_or_default(),
                });
            }
            scan
        }
    };
    let t2_max = t2_support_max(&ctx, &stripped)?;
    let no_int = model.no_intercept_model();
    let check = verify_local_optimality(&stripped, &no_int, &beta.tilde(), which, grid, slack)?;
    Ok(TransferReport {
        direction: Direction::ToNoIntercept,
        criterion: which,
        route,
        origin_weight: omega,
        certificate,
        tau_tilde: ctx.tau(),
        u0: ctx.u0(),
        condition_margin: scan.margin,
        condition_argmin: scan.argmin,
        t1_min: scan.t1_min,
        t2_support_max: t2_max,
        grid_resolution: grid.resolution(),
        grid_points: grid.len(),
        truncated: grid.region().is_truncated() || design.region().is_truncated(),
        slack,
        result_max_excess: check.max_excess(),
        verified: check.passed,
        result: stripped,
    })
}

/// Adds the origin to an optimal no-intercept design with the theoretical weight.
///
/// The input is re-verified on the grid, must lie on a hyperplane `cᵀf(x) = 1`, and
/// the D or A transfer condition must hold on the grid within `slack`.
pub fn transfer_to_intercept(
    design: &Design,
    model: &ModelSpec,
    beta: &ParamPoint,
    which: Criterion,
    grid: &Grid,
    slack: f64,
) -> Result<TransferReport> {
    nonempty(grid)?;
    let route = check_structure(model, beta)?;
    let beta_eff = effective_beta(beta, route);
    if design.origin_index().is_some() {
        return Err(Error::OriginAlreadyPresent);
    }
    if !design.region().contains_origin() {
        return Err(Error::PremiseViolated(Premise::OriginInRegion));
    }
    let no_int = model.no_intercept_model();
    let input_check = verify_local_optimality(design, &no_int, &beta.tilde(), which, grid, slack)?;
    if !input_check.passed {
        return Err(Error::NotOptimalInput {
            max_excess: input_check.max_excess(),
        });
    }
    let certificate = find_hyperplane_c(design, model, &beta_eff)?;
    if !certificate.in_xi0() {
        return Err(Error::NotInXi0 {
            residual: certificate.residual,
        });
    }
    let ctx = TransferContext::new(design, model, &beta_eff, &certificate.c)?;
    let omega = origin_weight(which, ctx.nu(), &certificate.c, ctx.u0(), ctx.tau())?;
    let scan = match which {
        Criterion::D => {
            let values = scan_grid(grid, |x| ctx.margin_d(x))?;
            let (margin, argmin) = min_over(grid, &values);
            ConditionScan {
                margin,
                argmin,
                t1_min: None,
                t1_argmin: None,
            }
        }
        Criterion::A => scan_a(&ctx, grid)?,
    };
    if scan.margin < -slack {
        return Err(Error::ConditionViolated {
            margin: scan.margin,
            argmin: scan.argmin,
        });
    }
    let result = design.augment_origin(omega)?;
    let int_model = model.intercept_model();
    let beta_check = ParamPoint::with_intercept(beta.beta0(), beta.slope.clone());
    let check = verify_local_optimality(&result, &int_model, &beta_check, which, grid, slack)?;
    let t2_max = t2_support_max(&ctx, design)?;
    Ok(TransferReport {
        direction: Direction::ToIntercept,
        criterion: which,
        route,
        origin_weight: omega,
        certificate,
        tau_tilde: ctx.tau(),
        u0: ctx.u0(),
        condition_margin: scan.margin,
        condition_argmin: scan.argmin,
        t1_min: scan.t1_min,
        t2_support_max: t2_max,
        grid_resolution: grid.resolution(),
        grid_points: grid.len(),
        truncated: grid.region().is_truncated() || design.region().is_truncated(),
        slack,
        result_max_excess: check.max_excess(),
        verified: check.passed,
        result,
    })
}
