//! Sensitivity functions and grid-based checks of the equivalence conditions.
//!
//! A design is locally D-optimal iff `ψ_D(x) = vᵀM⁻¹v ≤ p` on the whole region,
//! and locally A-optimal iff `ψ_A(x) = vᵀM⁻²v ≤ tr M⁻¹`, where `v` is the
//! weighted regressor at `x`. We check these on a finite grid plus the support.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{Design, Grid, ParamPoint};
use crate::error::{Error, Result};
use crate::infomat::{info_matrix, Criterion};
use crate::model::ModelSpec;

pub const DEFAULT_SLACK: f64 = 1e-6;
pub const DEFAULT_GRID_RES: usize = 101;

/// `ψ` for a fixed design, with the inverse (or squared inverse) precomputed.
#[derive(Debug, Clone)]
pub struct SensitivityFn {
    model: ModelSpec,
    beta: ParamPoint,
    kernel: DMatrix<f64>,
    threshold: f64,
    criterion: Criterion,
}

impl SensitivityFn {
    pub fn new(design: &Design, model: &ModelSpec, beta: &ParamPoint, which: Criterion) -> Result<Self> {
        let f = info_matrix(design, model, beta)?.factor()?;
        let (kernel, threshold) = match which {
            Criterion::D => (f.inverse(), model.param_dim() as f64),
            Criterion::A => (f.inverse_squared(), f.trace_inverse()),
        };
        Ok(Self {
            model: *model,
            beta: beta.clone(),
            kernel,
            threshold,
            criterion: which,
        })
    }

    /// `p` for D, `tr M⁻¹` for A.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = DVector::from_vec(self.model.weighted_regressor(&self.beta, x)?);
        Ok(v.dot(&(&self.kernel * &v)))
    }
}

pub fn sensitivity(design: &Design, model: &ModelSpec, beta: &ParamPoint, x: &[f64], which: Criterion) -> Result<f64> {
    SensitivityFn::new(design, model, beta, which)?.eval(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointValue {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub resolution: Option<usize>,
    pub points: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityReport {
    pub criterion: Criterion,
    pub threshold: f64,
    pub slack: f64,
    pub max_value: f64,
    pub argmax: Vec<f64>,
    pub support_values: Vec<PointValue>,
    /// Grid points with `ψ > threshold + slack`, as `ψ − threshold`.
    pub violations: Vec<PointValue>,
    pub grid_meta: GridMeta,
    pub passed: bool,
    #[serde(skip)]
    pub grid_values: Vec<f64>,
}

impl SensitivityReport {
    pub fn max_excess(&self) -> f64 {
        self.max_value - self.threshold
    }

    /// CSV with header `x1,...,xnu,psi,threshold`, one row per grid point.
    pub fn write_csv<W: Write>(&self, grid: &Grid, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},psi,threshold", header.join(","))?;
        for (x, psi) in grid.iter().zip(&self.grid_values) {
            for v in x {
                write!(out, "{v},")?;
            }
            writeln!(out, "{psi},{}", self.threshold)?;
        }
        Ok(())
    }
}

/// Evaluates `f` over the grid in parallel; the output order matches the grid.
pub(crate) fn scan_grid<F>(grid: &Grid, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    (0..grid.len()).into_par_iter().map(|i| f(grid.point(i))).collect()
}

/// First index of the maximum (ties resolved towards the lower index).
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

pub(crate) fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Checks the equivalence condition on `grid ∪ supp(ξ)`.
///
/// Passes iff the maximum of `ψ` is at most `threshold + slack` and every
/// support point has `ψ ≥ threshold − slack`.
pub fn verify_local_optimality(
    design: &Design,
    model: &ModelSpec,
    beta: &ParamPoint,
    which: Criterion,
    grid: &Grid,
    slack: f64,
) -> Result<SensitivityReport> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("grid has no points".into()));
    }
    if grid.dim() != design.dim() {
        return Err(Error::DimensionMismatch("grid and design dimensions differ".into()));
    }
    let psi = SensitivityFn::new(design, model, beta, which)?;
    let threshold = psi.threshold();
    let grid_values = scan_grid(grid, |x| psi.eval(x))?;

    let support_values = design
        .points()
        .iter()
        .map(|p| {
            Ok(PointValue {
                x: p.x.clone(),
                value: psi.eval(&p.x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let gi = argmax(&grid_values).expect("grid is nonempty");
    let (mut max_value, mut best_x) = (grid_values[gi], grid.point(gi).to_vec());
    for s in &support_values {
        if s.value > max_value {
            max_value = s.value;
            best_x = s.x.clone();
        }
    }

    let violations: Vec<PointValue> = grid
        .iter()
        .zip(&grid_values)
        .filter(|(_, &v)| v > threshold + slack)
        .map(|(x, &v)| PointValue {
            x: x.to_vec(),
            value: v - threshold,
        })
        .collect();

    let support_ok = support_values.iter().all(|s| s.value >= threshold - slack);
    let passed = max_value <= threshold + slack && support_ok;

    Ok(SensitivityReport {
        criterion: which,
        threshold,
        slack,
        max_value,
        argmax: best_x,
        support_values,
        violations,
        grid_meta: GridMeta {
            resolution: grid.resolution(),
            points: grid.len(),
            truncated: grid.region().is_truncated() || design.region().is_truncated(),
        },
        passed,
        grid_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{make_grid, ExperimentalRegion};
    use crate::model::Family;

    #[test]
    fn linear_two_point_support_values() {
        let d = Design::new(
            vec![(vec![0.0], 0.5), (vec![1.0], 0.5)],
            ExperimentalRegion::unit_box(1).unwrap(),
        )
        .unwrap();
        let m = ModelSpec::new(Family::LinearGaussian, true, 1).unwrap();
        let b = ParamPoint::with_intercept(0.0, vec![1.0]);
        for x in [0.0, 1.0] {
            let v = sensitivity(&d, &m, &b, &[x], Criterion::D).unwrap();
            assert!((v - 2.0).abs() < 1e-12);
        }
        let grid = make_grid(d.region(), 11).unwrap();
        let rep = verify_local_optimality(&d, &m, &b, Criterion::D, &grid, 1e-9).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.threshold, 2.0);
        assert!(rep.violations.is_empty());
        assert_eq!(rep.grid_values.len(), 11);
    }

    #[test]
    fn unit_information_sensitivity() {
        // M = I for the two-point design (±1) without intercept... use (1,0),(0,1) with weight 1/2 scaled
        let d = Design::new(
            vec![(vec![2f64.sqrt(), 0.0], 0.5), (vec![0.0, 2f64.sqrt()], 0.5)],
            ExperimentalRegion::new_box(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(),
        )
        .unwrap();
        let m = ModelSpec::new(Family::LinearGaussian, false, 2).unwrap();
        let b = ParamPoint::without_intercept(vec![0.0, 0.0]);
        let v = sensitivity(&d, &m, &b, &[1.0, 0.0], Criterion::D).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_optimal_design_fails_with_violations() {
        let d = Design::new(
            vec![(vec![0.2], 0.5), (vec![0.8], 0.5)],
            ExperimentalRegion::unit_box(1).unwrap(),
        )
        .unwrap();
        let m = ModelSpec::new(Family::LinearGaussian, true, 1).unwrap();
        let b = ParamPoint::with_intercept(0.0, vec![1.0]);
        let grid = make_grid(d.region(), 11).unwrap();
        let rep = verify_local_optimality(&d, &m, &b, Criterion::A, &grid, 1e-6).unwrap();
        assert!(!rep.passed);
        assert!(!rep.violations.is_empty());
        assert!(rep.max_value >= rep.support_values.iter().map(|s| s.value).fold(f64::MIN, f64::max));
    }

    #[test]
    fn csv_has_one_row_per_grid_point() {
        let d = Design::new(
            vec![(vec![0.0], 0.5), (vec![1.0], 0.5)],
            ExperimentalRegion::unit_box(1).unwrap(),
        )
        .unwrap();
        let m = ModelSpec::new(Family::LinearGaussian, true, 1).unwrap();
        let b = ParamPoint::with_intercept(0.0, vec![1.0]);
        let grid = make_grid(d.region(), 5).unwrap();
        let rep = verify_local_optimality(&d, &m, &b, Criterion::D, &grid, 1e-6).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,psi,threshold");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmin(&[2.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }
}
