//! Fisher information, D/A criterion values and the partitioned-inverse identities
//! for designs that put mass on the origin and whose remaining support lies on a
//! hyperplane `cᵀf(x) = 1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::design::{Design, ParamPoint};
use crate::error::{Error, Premise, Result};
use crate::model::ModelSpec;
use crate::premise::{self, Route, XI0_RESIDUAL_TOL};

/// Matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    D,
    A,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::D => "D",
            Criterion::A => "A",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" | "D" => Ok(Criterion::D),
            "a" | "A" => Ok(Criterion::A),
            other => Err(Error::Parse(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Symmetric positive semidefinite information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    entries: DMatrix<f64>,
}

impl InfoMatrix {
    /// Symmetrizes `entries`; callers pass something already symmetric up to rounding.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch("information matrix must be square".into()));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        Ok(Self { entries: sym })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn param_dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigendecomposition; fails when the condition number exceeds [`MAX_CONDITION`].
    pub fn factor(&self) -> Result<SymFactor> {
        let eig = SymmetricEigen::new(self.entries.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularInformation { condition });
        }
        Ok(SymFactor {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
            condition,
        })
    }

    /// Condition number without the singularity check.
    pub fn condition(&self) -> f64 {
        let eig = SymmetricEigen::new(self.entries.clone());
        let min = eig.eigenvalues.min();
        if min > 0.0 {
            eig.eigenvalues.max() / min
        } else {
            f64::INFINITY
        }
    }
}

/// `M = V Λ Vᵀ`. Determinant, inverse and trace all come from this one factorization.
#[derive(Debug, Clone)]
pub struct SymFactor {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    condition: f64,
}

impl SymFactor {
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn det(&self) -> f64 {
        self.values.iter().product()
    }

    pub fn log_det(&self) -> f64 {
        self.values.iter().map(|v| v.ln()).sum()
    }

    pub fn trace_inverse(&self) -> f64 {
        self.values.iter().map(|v| 1.0 / v).sum()
    }

    fn spectral(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = f(v);
            scaled.column_mut(j).scale_mut(s);
        }
        let m = scaled * self.vectors.transpose();
        (&m + m.transpose()) * 0.5
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.spectral(|v| 1.0 / v)
    }

    pub fn inverse_squared(&self) -> DMatrix<f64> {
        self.spectral(|v| 1.0 / (v * v))
    }
}

/// `M(ξ, β) = Σ ωᵢ vᵢ vᵢᵀ` with `vᵢ` the weighted regressor of the model at `xᵢ`.
pub fn info_matrix(design: &Design, model: &ModelSpec, beta: &ParamPoint) -> Result<InfoMatrix> {
    if design.dim() != model.dim {
        return Err(Error::DimensionMismatch(format!(
            "design has dimension {}, model {}",
            design.dim(),
            model.dim
        )));
    }
    model.check_params(beta)?;
    let p = model.param_dim();
    let mut m = DMatrix::zeros(p, p);
    for pt in design.points() {
        let v = model.weighted_regressor(beta, &pt.x)?;
        for i in 0..p {
            let wi = pt.w * v[i];
            for j in i..p {
                m[(i, j)] += wi * v[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    Ok(InfoMatrix { entries: m })
}

/// D: `det(M⁻¹)`; A: `tr(M⁻¹)`.
pub fn criterion_value(m: &InfoMatrix, which: Criterion) -> Result<f64> {
    let f = m.factor()?;
    Ok(match which {
        Criterion::D => 1.0 / f.det(),
        Criterion::A => f.trace_inverse(),
    })
}

/// Pieces of the partition of `M(ξ, β)` for `ξ = ω δ₀ + (1 − ω) ξ₋₀`.
pub(crate) struct OriginBlocks {
    pub omega: f64,
    pub u0: f64,
    pub m_tilde_inv: DMatrix<f64>,
}

fn origin_blocks(design: &Design, model: &ModelSpec, beta: &ParamPoint, c: &[f64]) -> Result<OriginBlocks> {
    if !model.with_intercept {
        return Err(Error::PremiseViolated(Premise::InterceptModel));
    }
    model.check_params(beta)?;
    if premise::intensity_route(model, beta)? != Route::Direct {
        return Err(Error::PremiseViolated(Premise::IntensityMatch));
    }
    premise::check_vanishes_at_origin(model, beta)?;
    let omega = design
        .origin_weight()
        .ok_or(Error::PremiseViolated(Premise::OriginInSupport))?;
    if premise::hyperplane_residual(design, model, beta, c)? >= XI0_RESIDUAL_TOL {
        return Err(Error::PremiseViolated(Premise::Hyperplane));
    }
    let stripped = design.strip_origin()?;
    let tilde = beta.tilde();
    let no_int = model.no_intercept_model();
    let m_tilde = info_matrix(&stripped, &no_int, &tilde)?;
    let m_tilde_inv = m_tilde.factor()?.inverse();
    let u0 = model.root_intensity_tilde(&tilde, &vec![0.0; model.dim])?.powi(2);
    Ok(OriginBlocks { omega, u0, m_tilde_inv })
}

/// Closed-form `M⁻¹(ξ, β)` from the partition:
/// `[[1/(ωũ₀), −cᵀ/(ωũ₀)], [−c/(ωũ₀), M̃⁻¹/(1−ω) + ccᵀ/(ωũ₀)]]`.
pub fn block_inverse(design: &Design, model: &ModelSpec, beta: &ParamPoint, c: &[f64]) -> Result<DMatrix<f64>> {
    let OriginBlocks { omega, u0, m_tilde_inv } = origin_blocks(design, model, beta, c)?;
    let q = c.len();
    let alpha = 1.0 / (omega * u0);
    let cv = DVector::from_column_slice(c);
    let mut out = DMatrix::zeros(q + 1, q + 1);
    out[(0, 0)] = alpha;
    for i in 0..q {
        out[(0, i + 1)] = -alpha * c[i];
        out[(i + 1, 0)] = -alpha * c[i];
    }
    let lower = &m_tilde_inv / (1.0 - omega) + (&cv * cv.transpose()) * alpha;
    out.view_mut((1, 1), (q, q)).copy_from(&lower);
    Ok(out)
}

/// Closed-form `M⁻²(ξ, β)`, the square of [`block_inverse`].
pub fn squared_inverse(design: &Design, model: &ModelSpec, beta: &ParamPoint, c: &[f64]) -> Result<DMatrix<f64>> {
    let OriginBlocks { omega, u0, m_tilde_inv } = origin_blocks(design, model, beta, c)?;
    let q = c.len();
    let cv = DVector::from_column_slice(c);
    let k2 = cv.dot(&cv) + 1.0;
    let a2 = 1.0 / (omega * omega * u0 * u0);
    let mixed = 1.0 / ((1.0 - omega) * omega * u0);
    let ac = &m_tilde_inv * &cv;

    let mut out = DMatrix::zeros(q + 1, q + 1);
    out[(0, 0)] = k2 * a2;
    for i in 0..q {
        let v = -k2 * a2 * c[i] - mixed * ac[i];
        out[(0, i + 1)] = v;
        out[(i + 1, 0)] = v;
    }
    let cct = &cv * cv.transpose();
    let cross = &ac * cv.transpose() + &cv * ac.transpose();
    let lower = &cct * (k2 * a2) + cross * mixed + (&m_tilde_inv * &m_tilde_inv) / ((1.0 - omega) * (1.0 - omega));
    out.view_mut((1, 1), (q, q)).copy_from(&lower);
    Ok(out)
}

/// `tr M⁻¹` of the design that puts the A-optimal weight on the origin:
/// `(1/ũ₀)(√(cᵀc + 1) + √(ũ₀ τ̃))²`.
pub fn a_trace_at_optimal_origin_weight(c: &[f64], u0: f64, tau: f64) -> Result<f64> {
    if !(u0 > 0.0) {
        return Err(Error::NonpositiveInput("u0"));
    }
    if !(tau > 0.0) {
        return Err(Error::NonpositiveInput("tau"));
    }
    let k = (c.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
    let s = (u0 * tau).sqrt();
    Ok((k + s).powi(2) / u0)
}
