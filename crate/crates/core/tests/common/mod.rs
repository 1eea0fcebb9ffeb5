//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's linear algebra: information matrices are
//! assembled from hand-written regressors and inverted with a plain LU.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use optdesign::{Design, ExperimentalRegion, Family, ModelSpec, ParamPoint};
use rand::Rng;

/// Weighted regressor written out per family, intercept first when present.
pub fn ref_regressor(family: Family, with_intercept: bool, beta: &ParamPoint, x: &[f64]) -> Vec<f64> {
    let b0 = beta.intercept.unwrap_or(0.0);
    match family {
        Family::Emax => {
            let (b1, b2) = (beta.slope[0], beta.slope[1]);
            let t = x[0];
            let mut g = vec![t / (t + b2), -b1 * t / ((t + b2) * (t + b2))];
            if with_intercept {
                g.insert(0, 1.0);
            }
            g
        }
        Family::ExpRegression => {
            let (b1, b2) = (beta.slope[0], beta.slope[1]);
            let t = x[0];
            let e = (t / b2).exp();
            let mut g = vec![e, -b1 * t * e / (b2 * b2)];
            if with_intercept {
                g.insert(0, 1.0);
            }
            g
        }
        _ => {
            let eta = b0 + beta.slope.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
            let u = match family {
                Family::Poisson => eta.exp(),
                Family::Logistic => eta.exp() / (1.0 + eta.exp()).powi(2),
                _ => 1.0,
            };
            let s = u.sqrt();
            let mut f: Vec<f64> = x.iter().map(|v| s * v).collect();
            if with_intercept {
                f.insert(0, s);
            }
            f
        }
    }
}

pub fn ref_info(points: &[(Vec<f64>, f64)], family: Family, with_intercept: bool, beta: &ParamPoint) -> DMatrix<f64> {
    let p = ref_regressor(family, with_intercept, beta, &points[0].0).len();
    let mut m = DMatrix::zeros(p, p);
    for (x, w) in points {
        let v = DVector::from_vec(ref_regressor(family, with_intercept, beta, x));
        m += &v * v.transpose() * *w;
    }
    m
}

pub fn ref_info_of(design: &Design, model: &ModelSpec, beta: &ParamPoint) -> DMatrix<f64> {
    let pts: Vec<(Vec<f64>, f64)> = design.points().iter().map(|p| (p.x.clone(), p.w)).collect();
    ref_info(&pts, model.family, model.with_intercept, beta)
}

pub fn lu_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().lu().try_inverse().expect("reference matrix is invertible")
}

pub fn lu_log_det(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant().ln()
}

pub fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// An intercept design `ω δ₀ + (1 − ω) ξ₋₀` whose non-origin support lies on `cᵀx = 1`.
#[derive(Debug, Clone)]
pub struct Xi0Instance {
    pub family: Family,
    pub nu: usize,
    pub c: Vec<f64>,
    pub slope: Vec<f64>,
    /// Normalized weights of the non-origin part.
    pub stripped: Vec<(Vec<f64>, f64)>,
    pub omega: f64,
    pub region: ExperimentalRegion,
}

impl Xi0Instance {
    pub fn random<R: Rng>(rng: &mut R, family: Family, nu: usize) -> Self {
        let c: Vec<f64> = (0..nu).map(|_| rng.gen_range(0.5..2.0)).collect();
        let slope: Vec<f64> = match family {
            Family::Logistic => (0..nu).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            _ => vec![0.0; nu],
        };
        let n = if nu == 1 { 1 } else { nu + rng.gen_range(0..3) };
        let mut stripped: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
        // Vertices of the hyperplane section first so the design spans it.
        for i in 0..n {
            let d: Vec<f64> = if i < nu {
                (0..nu)
                    .map(|j| if j == i { 1.0 } else { rng.gen_range(0.0..0.2) })
                    .collect()
            } else {
                (0..nu).map(|_| rng.gen_range(0.1..1.0)).collect()
            };
            let s: f64 = c.iter().zip(&d).map(|(a, b)| a * b).sum();
            stripped.push((d.iter().map(|v| v / s).collect(), rng.gen_range(0.2..1.0)));
        }
        let total: f64 = stripped.iter().map(|p| p.1).sum();
        for p in &mut stripped {
            p.1 /= total;
        }
        let upper: Vec<f64> = (0..nu)
            .map(|j| stripped.iter().map(|p| p.0[j]).fold(0.0, f64::max) * 1.25 + 0.1)
            .collect();
        let region = ExperimentalRegion::new_box(vec![0.0; nu], upper).unwrap();
        Self {
            family,
            nu,
            c,
            slope,
            stripped,
            omega: rng.gen_range(0.05..0.6),
            region,
        }
    }

    pub fn model(&self) -> ModelSpec {
        ModelSpec::new(self.family, true, self.nu).unwrap()
    }

    pub fn no_intercept_model(&self) -> ModelSpec {
        ModelSpec::new(self.family, false, self.nu).unwrap()
    }

    pub fn beta(&self) -> ParamPoint {
        ParamPoint::with_intercept(0.0, self.slope.clone())
    }

    pub fn beta_tilde(&self) -> ParamPoint {
        ParamPoint::without_intercept(self.slope.clone())
    }

    /// `u` at the origin with `β₀ = 0`.
    pub fn u0(&self) -> f64 {
        match self.family {
            Family::Logistic => 0.25,
            _ => 1.0,
        }
    }

    pub fn points_with_origin(&self, omega: f64) -> Vec<(Vec<f64>, f64)> {
        let mut pts = vec![(vec![0.0; self.nu], omega)];
        pts.extend(self.stripped.iter().map(|(x, w)| (x.clone(), (1.0 - omega) * w)));
        pts
    }

    pub fn design(&self) -> Design {
        Design::new(self.points_with_origin(self.omega), self.region.clone()).unwrap()
    }

    pub fn stripped_design(&self) -> Design {
        Design::new(self.stripped.clone(), self.region.clone()).unwrap()
    }

    pub fn info_at(&self, omega: f64) -> DMatrix<f64> {
        ref_info(&self.points_with_origin(omega), self.family, true, &self.beta())
    }

    /// `tr M̃⁻¹` of the non-origin part in the no-intercept model.
    pub fn tau(&self) -> f64 {
        lu_inverse(&ref_info(&self.stripped, self.family, false, &self.beta_tilde())).trace()
    }

    /// Parts of `M(ω) = ω M₀ + (1 − ω) M₋₀`.
    pub fn info_parts(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let origin = ref_info(&[(vec![0.0; self.nu], 1.0)], self.family, true, &self.beta());
        let rest = ref_info(&self.stripped, self.family, true, &self.beta());
        (origin, rest)
    }
}

pub fn d_efficiency(m: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let p = m.nrows() as f64;
    ((lu_log_det(m) - lu_log_det(reference)) / p).exp()
}

/// A design with random support and weights; the family cycles with `i`.
pub fn random_design<R: Rng>(rng: &mut R, i: usize) -> (ModelSpec, ParamPoint, Design) {
    let family = [
        Family::Poisson,
        Family::Logistic,
        Family::LinearGaussian,
        Family::Emax,
        Family::ExpRegression,
    ][i % 5];
    let with_intercept = (i / 5).is_multiple_of(2);
    if family.is_nonlinear() {
        let model = ModelSpec::new(family, with_intercept, 1).unwrap();
        let (hi, b2) = match family {
            Family::Emax => (10.0, rng.gen_range(0.5..5.0)),
            _ => (2.0, rng.gen_range(0.5..2.0)),
        };
        let slope = vec![rng.gen_range(0.5..2.0), b2];
        let beta = ParamPoint::new(with_intercept.then(|| rng.gen_range(-1.0..1.0)), slope);
        let region = ExperimentalRegion::new_box(vec![0.0], vec![hi]).unwrap();
        let n = model.param_dim() + rng.gen_range(0..3);
        let pts = (0..n)
            .map(|k| {
                (
                    vec![hi * (k as f64 + rng.gen_range(0.1..0.9)) / n as f64],
                    rng.gen_range(0.1..1.0),
                )
            })
            .collect();
        return (model, beta, Design::new(pts, region).unwrap());
    }
    let nu = 1 + (i / 10) % 3;
    let model = ModelSpec::new(family, with_intercept, nu).unwrap();
    let slope = (0..nu).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let beta = ParamPoint::new(with_intercept.then(|| rng.gen_range(-1.0..1.0)), slope);
    let region = ExperimentalRegion::unit_box(nu).unwrap();
    let n = model.param_dim() + rng.gen_range(0..3);
    let pts = (0..n)
        .map(|_| {
            (
                (0..nu).map(|_| rng.gen_range(0.0..1.0)).collect(),
                rng.gen_range(0.1..1.0),
            )
        })
        .collect();
    (model, beta, Design::new(pts, region).unwrap())
}
