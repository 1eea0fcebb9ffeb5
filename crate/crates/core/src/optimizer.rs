//! Multiplicative weight algorithm for D- and A-optimal designs on a finite
//! candidate set.
//!
//! D update: `wᵢ ← wᵢ ψ_D(xᵢ)/p`. A update: `wᵢ ← wᵢ √(ψ_A(xᵢ)/tr M⁻¹)`.
//! Convergence is measured by the relative excess `max ψ / threshold − 1` over
//! the candidate grid, where the threshold is `p` for D and `tr M⁻¹` for A.
//! Iterations run on the active set (candidates with weight above the prune
//! threshold); the full candidate set is rescanned periodically and whenever the
//! active set looks converged. Once the excess is within tolerance, a Newton
//! step on the weights of a small active set settles them on the threshold.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{max_norm_dist, Design, Grid, ParamPoint, SupportPoint};
use crate::error::{Error, Result};
use crate::infomat::{Criterion, InfoMatrix};
use crate::model::ModelSpec;

pub const DEFAULT_MAX_ITERS: usize = 50_000;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_PRUNE: f64 = 1e-8;

/// Full-grid rescan period, in iterations.
const SCAN_EVERY: usize = 200;
/// Weight below which a dominated support point may be dropped at convergence.
const DROP_WEIGHT: f64 = 1e-3;
/// Weight given to a readmitted candidate, relative to `1/active`.
const READMIT_FRACTION: f64 = 1e-3;
/// Largest active set handed to the Newton polish.
const POLISH_MAX: usize = 200;
/// Relative excess below which the Newton polish kicks in.
const POLISH_START: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub candidate_grid: Grid,
    pub criterion: Criterion,
    pub max_iters: usize,
    pub tol: f64,
    pub prune_threshold: f64,
}

impl OptimizerConfig {
    pub fn new(candidate_grid: Grid, criterion: Criterion) -> Self {
        Self {
            candidate_grid,
            criterion,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            prune_threshold: DEFAULT_PRUNE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.candidate_grid.len();
        if n == 0 {
            return Err(Error::InvalidConfig("candidate grid is empty".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold < 1.0 / n as f64) {
            return Err(Error::InvalidConfig(format!("prune_threshold must lie in [0, 1/{n})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeResult {
    pub design: Design,
    pub iterations: usize,
    /// `max ψ / threshold − 1` over the candidate grid at the returned design.
    pub max_excess: f64,
    /// For D: every multiplicative step left `log det M` non-decreasing.
    pub d_monotone: bool,
    pub readmissions: usize,
}

struct Candidates {
    p: usize,
    v: Vec<f64>,
}

impl Candidates {
    fn row(&self, i: usize) -> &[f64] {
        &self.v[i * self.p..(i + 1) * self.p]
    }

    fn info(&self, active: &[usize], w: &[f64]) -> DMatrix<f64> {
        let p = self.p;
        let mut m = DMatrix::zeros(p, p);
        for &i in active {
            let v = self.row(i);
            for a in 0..p {
                let wa = w[i] * v[a];
                for b in a..p {
                    m[(a, b)] += wa * v[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                m[(a, b)] = m[(b, a)];
            }
        }
        m
    }

    fn quad(&self, i: usize, k: &DMatrix<f64>) -> f64 {
        let v = self.row(i);
        let mut s = 0.0;
        for a in 0..self.p {
            let mut t = 0.0;
            for b in 0..self.p {
                t += k[(a, b)] * v[b];
            }
            s += v[a] * t;
        }
        s
    }
}

struct State {
    kernel: DMatrix<f64>,
    threshold: f64,
    log_det: f64,
}

fn state(c: &Candidates, active: &[usize], w: &[f64], which: Criterion) -> Result<State> {
    let f = InfoMatrix::from_matrix(c.info(active, w))?.factor()?;
    let (kernel, threshold) = match which {
        Criterion::D => (f.inverse(), c.p as f64),
        Criterion::A => (f.inverse_squared(), f.trace_inverse()),
    };
    Ok(State {
        kernel,
        threshold,
        log_det: f.log_det(),
    })
}

/// Multiplicative algorithm from uniform weights on the candidate grid.
pub fn optimize(model: &ModelSpec, beta: &ParamPoint, cfg: &OptimizerConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    model.check_params(beta)?;
    let grid = &cfg.candidate_grid;
    if grid.dim() != model.dim {
        return Err(Error::DimensionMismatch(format!(
            "grid has dimension {}, model {}",
            grid.dim(),
            model.dim
        )));
    }
    let n = grid.len();
    let p = model.param_dim();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| model.weighted_regressor(beta, grid.point(i)))
        .collect::<Result<_>>()?;
    let cand = Candidates {
        p,
        v: rows.into_iter().flatten().collect(),
    };

    let mut w = vec![1.0 / n as f64; n];
    let mut active: Vec<usize> = (0..n).collect();
    // Uniform weights span the largest possible column space.
    let mut st = state(&cand, &active, &w, cfg.criterion).map_err(|e| match e {
        Error::SingularInformation { .. } => Error::SingularCandidates,
        other => other,
    })?;

    let mut d_monotone = true;
    let mut readmissions = 0;
    // One polish per converged stretch; reset whenever the weights move otherwise.
    let mut polished = false;
    for iter in 0..cfg.max_iters {
        let psi: Vec<f64> = active.iter().map(|&i| cand.quad(i, &st.kernel)).collect();
        let rel = |v: f64| v / st.threshold - 1.0;
        let local_excess = rel(psi.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)));

        if local_excess <= cfg.tol || iter.is_multiple_of(SCAN_EVERY) {
            let full: Vec<f64> = (0..n).into_par_iter().map(|i| rel(cand.quad(i, &st.kernel))).collect();
            let full_excess = full.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            if !polished && active.len() <= POLISH_MAX && full_excess <= POLISH_START {
                polished = true;
                if let Some((keep, w_next)) = polish(&cand, &active, &w, cfg.criterion)? {
                    w.iter_mut().for_each(|v| *v = 0.0);
                    for (&i, &v) in keep.iter().zip(&w_next) {
                        w[i] = v;
                    }
                    active = keep;
                    st = state(&cand, &active, &w, cfg.criterion)?;
                    continue;
                }
            }
            if full_excess <= cfg.tol {
                let below: Vec<usize> = active.iter().copied().filter(|&i| full[i] < -cfg.tol).collect();
                if below.is_empty() {
                    return Ok(finish(grid, &active, &w, iter, full_excess, d_monotone, readmissions));
                }
                // Points under the threshold are dropped; readmission brings back any that
                // were still needed. If that leaves M singular, drop only the light ones, and
                // failing that keep iterating.
                let light: Vec<usize> = below.iter().copied().filter(|&i| w[i] < DROP_WEIGHT).collect();
                let dropped = match try_drop(&cand, &active, &w, &below, cfg.criterion)? {
                    Some(t) => Some(t),
                    None => try_drop(&cand, &active, &w, &light, cfg.criterion)?,
                };
                if let Some((keep, w_next, next)) = dropped {
                    active = keep;
                    w = w_next;
                    st = next;
                    continue;
                }
            }
            let fresh: Vec<usize> = (0..n).filter(|&i| w[i] == 0.0 && full[i] > cfg.tol).collect();
            if !fresh.is_empty() {
                let add = READMIT_FRACTION / active.len() as f64;
                for &i in &fresh {
                    w[i] = add;
                }
                readmissions += fresh.len();
                polished = false;
                active.extend(fresh);
                active.sort_unstable();
                normalize(&active, &mut w);
                st = state(&cand, &active, &w, cfg.criterion)?;
                continue;
            }
        }

        for (k, &i) in active.iter().enumerate() {
            let ratio = psi[k] / st.threshold;
            w[i] *= match cfg.criterion {
                Criterion::D => ratio,
                Criterion::A => ratio.sqrt(),
            };
        }
        normalize(&active, &mut w);
        polished = false;
        let next = state(&cand, &active, &w, cfg.criterion)?;
        if cfg.criterion == Criterion::D && next.log_det < st.log_det - 1e-12 * st.log_det.abs().max(1.0) {
            d_monotone = false;
        }
        st = next;

        let before = active.len();
        active.retain(|&i| {
            if w[i] < cfg.prune_threshold {
                w[i] = 0.0;
                false
            } else {
                true
            }
        });
        if active.len() != before {
            normalize(&active, &mut w);
            st = state(&cand, &active, &w, cfg.criterion)?;
        }
    }
    let full_excess = (0..n)
        .into_par_iter()
        .map(|i| cand.quad(i, &st.kernel) / st.threshold - 1.0)
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Err(Error::NoConvergence {
        max_excess: full_excess,
        iterations: cfg.max_iters,
    })
}

/// `−log det M` for D, `tr M⁻¹` for A; `None` when `M` is singular.
fn objective(cand: &Candidates, active: &[usize], w: &[f64], which: Criterion) -> Result<Option<f64>> {
    match InfoMatrix::from_matrix(cand.info(active, w))?.factor() {
        Ok(f) => Ok(Some(match which {
            Criterion::D => -f.log_det(),
            Criterion::A => f.trace_inverse(),
        })),
        Err(Error::SingularInformation { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Newton iterations on the weights of `active` under `Σw = 1, w ≥ 0`.
///
/// Returns the surviving points and their weights, or `None` if the step system
/// breaks down; the caller then carries on with multiplicative steps.
fn polish(
    cand: &Candidates,
    active: &[usize],
    w_full: &[f64],
    which: Criterion,
) -> Result<Option<(Vec<usize>, Vec<f64>)>> {
    let mut act = active.to_vec();
    let mut w: Vec<f64> = act.iter().map(|&i| w_full[i]).collect();
    let scatter = |act: &[usize], w: &[f64]| {
        let mut full = vec![0.0; w_full.len()];
        for (&i, &v) in act.iter().zip(w) {
            full[i] = v;
        }
        full
    };
    for _ in 0..100 {
        let full = scatter(&act, &w);
        let f = match InfoMatrix::from_matrix(cand.info(&act, &full))?.factor() {
            Ok(f) => f,
            Err(Error::SingularInformation { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let k = act.len();
        let v = DMatrix::from_fn(cand.p, k, |a, j| cand.row(act[j])[a]);
        let b = v.transpose() * f.inverse() * &v;
        let (grad, hess, threshold) = match which {
            Criterion::D => {
                let g = DVector::from_fn(k, |i, _| -b[(i, i)]);
                (g, b.component_mul(&b), cand.p as f64)
            }
            Criterion::A => {
                let c = v.transpose() * f.inverse_squared() * &v;
                let g = DVector::from_fn(k, |i, _| -c[(i, i)]);
                (g, b.component_mul(&c) * 2.0, f.trace_inverse())
            }
        };
        let settled = grad.iter().all(|g| (-g / threshold - 1.0).abs() < 1e-12);
        if settled {
            return Ok(Some((act, w)));
        }
        // KKT system for the equality-constrained Newton step.
        let ridge = 1e-14 * hess.trace().max(f64::MIN_POSITIVE);
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        kkt.view_mut((0, 0), (k, k)).copy_from(&hess);
        for i in 0..k {
            kkt[(i, i)] += ridge;
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from(&(-&grad));
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return Ok(None);
        };
        let d = sol.rows(0, k).into_owned();
        let slope = grad.dot(&d);
        if !(slope < 0.0) {
            return Ok(Some((act, w)));
        }
        let mut alpha = d
            .iter()
            .zip(&w)
            .filter(|(di, _)| **di < 0.0)
            .map(|(di, wi)| -wi / di)
            .fold(1.0_f64, f64::min);
        let Some(phi) = objective(cand, &act, &full, which)? else {
            return Ok(None);
        };
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = w
                .iter()
                .zip(d.iter())
                .map(|(wi, di)| (wi + alpha * di).max(0.0))
                .collect();
            let keep: Vec<usize> = (0..k).filter(|&i| trial[i] > 1e-14).collect();
            let act_t: Vec<usize> = keep.iter().map(|&i| act[i]).collect();
            let mut w_t: Vec<f64> = keep.iter().map(|&i| trial[i]).collect();
            let total: f64 = w_t.iter().sum();
            w_t.iter_mut().for_each(|x| *x /= total);
            if let Some(phi_t) = objective(cand, &act_t, &scatter(&act_t, &w_t), which)? {
                if phi_t <= phi + 1e-4 * alpha * slope {
                    accepted = Some((act_t, w_t));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((a, ww)) => {
                act = a;
                w = ww;
            }
            None => return Ok(Some((act, w))),
        }
    }
    Ok(Some((act, w)))
}

type Dropped = (Vec<usize>, Vec<f64>, State);

/// Active set, weights and state after zeroing `drop`; `None` if that is empty or singular.
fn try_drop(
    cand: &Candidates,
    active: &[usize],
    w: &[f64],
    drop: &[usize],
    which: Criterion,
) -> Result<Option<Dropped>> {
    if drop.is_empty() {
        return Ok(None);
    }
    let keep: Vec<usize> = active.iter().copied().filter(|i| !drop.contains(i)).collect();
    let mut w_next = w.to_vec();
    for &i in drop {
        w_next[i] = 0.0;
    }
    normalize(&keep, &mut w_next);
    match state(cand, &keep, &w_next, which) {
        Ok(next) => Ok(Some((keep, w_next, next))),
        Err(Error::SingularInformation { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn normalize(active: &[usize], w: &mut [f64]) {
    let total: f64 = active.iter().map(|&i| w[i]).sum();
    for &i in active {
        w[i] /= total;
    }
}

fn finish(
    grid: &Grid,
    active: &[usize],
    w: &[f64],
    iterations: usize,
    max_excess: f64,
    d_monotone: bool,
    readmissions: usize,
) -> OptimizeResult {
    let points = active
        .iter()
        .map(|&i| SupportPoint {
            x: grid.point(i).to_vec(),
            w: w[i],
        })
        .collect();
    OptimizeResult {
        design: Design::from_parts(points, grid.region().clone()),
        iterations,
        max_excess,
        d_monotone,
        readmissions,
    }
}

/// Single-linkage clustering in the max-norm; each cluster becomes its weighted centroid.
pub fn cluster(design: &Design, radius: f64) -> Result<Design> {
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cluster radius must be positive, got {radius}"
        )));
    }
    let pts = design.points();
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if max_norm_dist(&pts[i].x, &pts[j].x) <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut merged: Vec<(usize, SupportPoint)> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let root = find(&mut parent, i);
        match merged.iter_mut().find(|(r, _)| *r == root) {
            Some((_, acc)) => {
                for (a, x) in acc.x.iter_mut().zip(&p.x) {
                    *a += p.w * x;
                }
                acc.w += p.w;
            }
            None => merged.push((
                root,
                SupportPoint {
                    x: p.x.iter().map(|x| p.w * x).collect(),
                    w: p.w,
                },
            )),
        }
    }
    let points = merged
        .into_iter()
        .map(|(_, mut sp)| {
            for x in &mut sp.x {
                *x /= sp.w;
            }
            sp
        })
        .collect();
    Ok(Design::from_parts(points, design.region().clone()))
}
