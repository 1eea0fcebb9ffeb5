//! Designs, experimental regions, parameter points and evaluation grids.
//!
//! A [`Design`] is a finite probability measure on an [`ExperimentalRegion`].
//! All values are immutable once built; transforms return new values.

use serde::Serialize;

use crate::error::{Error, Result};

/// Two support points closer than this (max-norm) are the same point.
pub const MERGE_TOL: f64 = 1e-9;

const REGION_TOL: f64 = 1e-12;
const SIMPLEX_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionKind {
    Box,
    Simplex,
    /// A finite stand-in for a region that is unbounded along `unbounded_axes`.
    TruncatedBox {
        unbounded_axes: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentalRegion {
    dim: usize,
    kind: RegionKind,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ExperimentalRegion {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_bounds(&lower, &upper)?;
        Ok(Self {
            dim: lower.len(),
            kind: RegionKind::Box,
            lower,
            upper,
        })
    }

    /// `[0, 1]^dim`.
    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::new_box(vec![0.0; dim], vec![1.0; dim])
    }

    /// The `(dim - 1)`-dimensional unit simplex in `R^dim`.
    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRegion("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            kind: RegionKind::Simplex,
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        })
    }

    pub fn truncated(lower: Vec<f64>, upper: Vec<f64>, unbounded_axes: Vec<usize>) -> Result<Self> {
        check_bounds(&lower, &upper)?;
        let dim = lower.len();
        let mut axes = unbounded_axes;
        axes.sort_unstable();
        axes.dedup();
        if axes.iter().any(|&a| a >= dim) {
            return Err(Error::InvalidRegion("unbounded axis index out of range".into()));
        }
        Ok(Self {
            dim,
            kind: RegionKind::TruncatedBox { unbounded_axes: axes },
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.kind, RegionKind::TruncatedBox { .. })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.kind {
            RegionKind::Simplex => {
                let sum: f64 = x.iter().sum();
                x.iter().all(|&v| v >= -REGION_TOL) && (sum - 1.0).abs() <= SIMPLEX_SUM_TOL
            }
            _ => x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| {
                    v >= lo - REGION_TOL * (1.0 + lo.abs()) && v <= hi + REGION_TOL * (1.0 + hi.abs())
                }),
        }
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&vec![0.0; self.dim])
    }
}

fn check_bounds(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.is_empty() {
        return Err(Error::InvalidRegion("dimension must be positive".into()));
    }
    if lower.len() != upper.len() {
        return Err(Error::InvalidRegion("lower and upper bounds differ in length".into()));
    }
    for (i, (lo, hi)) in lower.iter().zip(upper).enumerate() {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidRegion(format!("axis {i}: need finite lower <= upper")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportPoint {
    pub x: Vec<f64>,
    pub w: f64,
}

/// Finite probability measure on a region: distinct points with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Design {
    points: Vec<SupportPoint>,
    region: ExperimentalRegion,
}

pub(crate) fn max_norm_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn is_origin(x: &[f64]) -> bool {
    x.iter().all(|v| v.abs() <= MERGE_TOL)
}

impl Design {
    /// Builds a design, merging points within [`MERGE_TOL`] and renormalizing the weights.
    pub fn new(points: Vec<(Vec<f64>, f64)>, region: ExperimentalRegion) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDesign);
        }
        let mut merged: Vec<SupportPoint> = Vec::with_capacity(points.len());
        for (i, (x, w)) in points.into_iter().enumerate() {
            if x.len() != region.dim() {
                return Err(Error::WrongDimension {
                    expected: region.dim(),
                    got: x.len(),
                });
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonpositiveWeight(i));
            }
            if !region.contains(&x) {
                return Err(Error::PointOutsideRegion(i));
            }
            match merged.iter_mut().find(|p| max_norm_dist(&p.x, &x) <= MERGE_TOL) {
                Some(p) => p.w += w,
                None => merged.push(SupportPoint { x, w }),
            }
        }
        let total: f64 = merged.iter().map(|p| p.w).sum();
        for p in &mut merged {
            p.w /= total;
        }
        Ok(Self { points: merged, region })
    }

    /// Weights are taken as given; callers guarantee the invariants.
    pub(crate) fn from_parts(points: Vec<SupportPoint>, region: ExperimentalRegion) -> Self {
        Self { points, region }
    }

    pub fn points(&self) -> &[SupportPoint] {
        &self.points
    }

    pub fn region(&self) -> &ExperimentalRegion {
        &self.region
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.w).collect()
    }

    pub fn origin_index(&self) -> Option<usize> {
        self.points.iter().position(|p| is_origin(&p.x))
    }

    pub fn origin_weight(&self) -> Option<f64> {
        self.origin_index().map(|i| self.points[i].w)
    }

    /// Same support and weights (in any order) within `tol`.
    pub fn approx_eq(&self, other: &Design, tol: f64) -> bool {
        self.len() == other.len()
            && self.points.iter().all(|p| {
                other
                    .points
                    .iter()
                    .any(|q| max_norm_dist(&p.x, &q.x) <= tol && (p.w - q.w).abs() <= tol)
            })
    }

    /// Conditional measure given `x ≠ 0`.
    pub fn strip_origin(&self) -> Result<Design> {
        let idx = self.origin_index().ok_or(Error::OriginNotInSupport)?;
        if self.points.len() == 1 {
            return Err(Error::OnlyOriginSupported);
        }
        let rest = 1.0 - self.points[idx].w;
        let points = self
            .points
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != idx)
            .map(|(_, p)| SupportPoint {
                x: p.x.clone(),
                w: p.w / rest,
            })
            .collect();
        Ok(Design::from_parts(points, self.region.clone()))
    }

    /// `ω·δ₀ + (1 − ω)·self`, with the origin listed first.
    pub fn augment_origin(&self, omega: f64) -> Result<Design> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::WeightOutOfRange(omega));
        }
        if self.origin_index().is_some() {
            return Err(Error::OriginAlreadyPresent);
        }
        if !self.region.contains_origin() {
            return Err(Error::PremiseViolated(crate::error::Premise::OriginInRegion));
        }
        let mut points = Vec::with_capacity(self.points.len() + 1);
        points.push(SupportPoint {
            x: vec![0.0; self.dim()],
            w: omega,
        });
        points.extend(self.points.iter().map(|p| SupportPoint {
            x: p.x.clone(),
            w: (1.0 - omega) * p.w,
        }));
        Ok(Design::from_parts(points, self.region.clone()))
    }

    /// Same design on another region (e.g. the box that contains a simplex).
    pub fn with_region(&self, region: ExperimentalRegion) -> Result<Design> {
        if region.dim() != self.dim() {
            return Err(Error::WrongDimension {
                expected: self.dim(),
                got: region.dim(),
            });
        }
        if let Some(i) = self.points.iter().position(|p| !region.contains(&p.x)) {
            return Err(Error::PointOutsideRegion(i));
        }
        Ok(Design::from_parts(self.points.clone(), region))
    }
}

/// Parameter point `β = (β₀, β̃)`.
///
/// For the GLM families `slope` has one entry per region axis. For the
/// nonlinear families it holds `(β₁, β₂)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamPoint {
    pub intercept: Option<f64>,
    pub slope: Vec<f64>,
}

impl ParamPoint {
    pub fn new(intercept: Option<f64>, slope: Vec<f64>) -> Self {
        Self { intercept, slope }
    }

    pub fn with_intercept(beta0: f64, slope: Vec<f64>) -> Self {
        Self::new(Some(beta0), slope)
    }

    pub fn without_intercept(slope: Vec<f64>) -> Self {
        Self::new(None, slope)
    }

    pub fn p(&self) -> usize {
        self.slope.len() + usize::from(self.intercept.is_some())
    }

    pub fn beta0(&self) -> f64 {
        self.intercept.unwrap_or(0.0)
    }

    /// The slope part only, `β̃`.
    pub fn tilde(&self) -> ParamPoint {
        Self::without_intercept(self.slope.clone())
    }

    /// Full vector with the intercept first when present.
    pub fn full(&self) -> Vec<f64> {
        self.intercept
            .iter()
            .copied()
            .chain(self.slope.iter().copied())
            .collect()
    }
}

/// Deterministic point set used to discretize "for all x in the region".
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    coords: Vec<f64>,
    dim: usize,
    resolution: Option<usize>,
    region: ExperimentalRegion,
}

impl Grid {
    /// A custom candidate set; every point must lie in `region`.
    pub fn from_points(points: Vec<Vec<f64>>, region: ExperimentalRegion) -> Result<Self> {
        let dim = region.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, x) in points.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::WrongDimension {
                    expected: dim,
                    got: x.len(),
                });
            }
            if !region.contains(x) {
                return Err(Error::PointOutsideRegion(i));
            }
            coords.extend_from_slice(x);
        }
        Ok(Self {
            coords,
            dim,
            resolution: None,
            region,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> Option<usize> {
        self.resolution
    }

    pub fn region(&self) -> &ExperimentalRegion {
        &self.region
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// Largest spacing between neighbouring lattice values over all axes.
    pub fn spacing(&self) -> Option<f64> {
        let res = self.resolution?;
        let steps = (res - 1) as f64;
        Some(match self.region.kind() {
            RegionKind::Simplex => 1.0 / steps,
            _ => self
                .region
                .lower()
                .iter()
                .zip(self.region.upper())
                .map(|(lo, hi)| (hi - lo) / steps)
                .fold(0.0, f64::max),
        })
    }
}

/// Lattice with `resolution` points per axis (endpoints included), in lexicographic order.
/// For the simplex: all compositions `k / (resolution − 1)` that sum to one.
pub fn make_grid(region: &ExperimentalRegion, resolution: usize) -> Result<Grid> {
    if resolution < 2 {
        return Err(Error::ResolutionTooSmall(resolution));
    }
    let dim = region.dim();
    let steps = resolution - 1;
    let mut coords = Vec::new();
    match region.kind() {
        RegionKind::Simplex => {
            let mut ks = vec![0usize; dim];
            simplex_rec(&mut ks, 0, steps, steps, &mut coords);
        }
        _ => {
            let axes: Vec<Vec<f64>> = region
                .lower()
                .iter()
                .zip(region.upper())
                .map(|(&lo, &hi)| {
                    (0..resolution)
                        .map(|k| {
                            if k == steps {
                                hi
                            } else {
                                lo + (hi - lo) * (k as f64) / (steps as f64)
                            }
                        })
                        .collect()
                })
                .collect();
            let total = resolution.pow(dim as u32);
            coords.reserve(total * dim);
            let mut idx = vec![0usize; dim];
            for _ in 0..total {
                coords.extend(idx.iter().enumerate().map(|(a, &k)| axes[a][k]));
                for a in (0..dim).rev() {
                    idx[a] += 1;
                    if idx[a] < resolution {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
    }
    Ok(Grid {
        coords,
        dim,
        resolution: Some(resolution),
        region: region.clone(),
    })
}

fn simplex_rec(ks: &mut [usize], axis: usize, remaining: usize, steps: usize, out: &mut Vec<f64>) {
    let dim = ks.len();
    if axis == dim - 1 {
        ks[axis] = remaining;
        out.extend(ks.iter().map(|&k| k as f64 / steps as f64));
        return;
    }
    for k in 0..=remaining {
        ks[axis] = k;
        simplex_rec(ks, axis + 1, remaining - k, steps, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit2() -> ExperimentalRegion {
        ExperimentalRegion::unit_box(2).unwrap()
    }

    #[test]
    fn duplicate_points_merge_and_renormalize() {
        let d = Design::new(vec![(vec![0.0, 0.0], 1.0), (vec![0.0, 0.0], 1.0)], unit2()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.points()[0].w, 1.0);
    }

    #[test]
    fn equal_weight_saturated_design_unchanged() {
        let pts = vec![
            (vec![0.0, 0.0], 1.0 / 3.0),
            (vec![1.0, 0.0], 1.0 / 3.0),
            (vec![0.0, 1.0], 1.0 / 3.0),
        ];
        let d = Design::new(pts.clone(), unit2()).unwrap();
        assert_eq!(d.len(), 3);
        for (p, (x, w)) in d.points().iter().zip(&pts) {
            assert_eq!(&p.x, x);
            assert!((p.w - w).abs() < 1e-15);
        }
    }

    #[test]
    fn constructor_errors() {
        assert_eq!(
            Design::new(vec![(vec![2.0, 2.0], 1.0)], unit2()),
            Err(Error::PointOutsideRegion(0))
        );
        assert_eq!(Design::new(vec![], unit2()), Err(Error::EmptyDesign));
        assert_eq!(
            Design::new(vec![(vec![0.5, 0.5], 1.0), (vec![0.1, 0.1], 0.0)], unit2()),
            Err(Error::NonpositiveWeight(1))
        );
    }

    #[test]
    fn strip_and_augment_examples() {
        let third = 1.0 / 3.0;
        let d = Design::new(
            vec![
                (vec![0.0, 0.0], third),
                (vec![1.0, 0.0], third),
                (vec![0.0, 1.0], third),
            ],
            unit2(),
        )
        .unwrap();
        let s = d.strip_origin().unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.points().iter().all(|p| (p.w - 0.5).abs() < 1e-15));
        let back = s.augment_origin(third).unwrap();
        assert!(back.approx_eq(&d, 1e-15));

        let r1 = ExperimentalRegion::unit_box(1).unwrap();
        let d1 = Design::new(vec![(vec![0.0], 0.5), (vec![1.0], 0.5)], r1.clone()).unwrap();
        let s1 = d1.strip_origin().unwrap();
        assert_eq!(s1.points(), &[SupportPoint { x: vec![1.0], w: 1.0 }]);

        let no_origin = Design::new(vec![(vec![1.0, 0.0], 0.5), (vec![0.0, 1.0], 0.5)], unit2()).unwrap();
        assert_eq!(no_origin.strip_origin(), Err(Error::OriginNotInSupport));
        assert_eq!(s1.augment_origin(0.0), Err(Error::WeightOutOfRange(0.0)));
        assert_eq!(d1.augment_origin(0.5), Err(Error::OriginAlreadyPresent));
        let only = Design::new(vec![(vec![0.0], 1.0)], r1).unwrap();
        assert_eq!(only.strip_origin(), Err(Error::OnlyOriginSupported));
    }

    #[test]
    fn augment_requires_origin_in_region() {
        let r = ExperimentalRegion::new_box(vec![1.0], vec![2.0]).unwrap();
        let d = Design::new(vec![(vec![1.5], 1.0)], r).unwrap();
        assert!(matches!(d.augment_origin(0.5), Err(Error::PremiseViolated(_))));
    }

    #[test]
    fn grid_examples() {
        let g = make_grid(&ExperimentalRegion::unit_box(1).unwrap(), 3).unwrap();
        assert_eq!(g.iter().map(|p| p[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);

        let g = make_grid(&unit2(), 2).unwrap();
        let pts: Vec<Vec<f64>> = g.iter().map(|p| p.to_vec()).collect();
        assert_eq!(
            pts,
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
        );

        let g = make_grid(&ExperimentalRegion::simplex(2).unwrap(), 3).unwrap();
        let pts: Vec<Vec<f64>> = g.iter().map(|p| p.to_vec()).collect();
        assert_eq!(pts, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);

        assert_eq!(make_grid(&unit2(), 1).unwrap_err(), Error::ResolutionTooSmall(1));
    }

    #[test]
    fn grid_points_lie_in_region() {
        let s3 = ExperimentalRegion::simplex(3).unwrap();
        let g = make_grid(&s3, 11).unwrap();
        assert_eq!(g.len(), 66);
        assert!(g.iter().all(|p| s3.contains(p)));
        let b = ExperimentalRegion::new_box(vec![-1.0, 2.0], vec![3.0, 2.5]).unwrap();
        let g = make_grid(&b, 7).unwrap();
        assert_eq!(g.len(), 49);
        assert!(g.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn truncated_region_flags() {
        let r = ExperimentalRegion::truncated(vec![0.0, 0.0], vec![10.0, 10.0], vec![1, 0, 1]).unwrap();
        assert!(r.is_truncated());
        assert_eq!(
            r.kind(),
            &RegionKind::TruncatedBox {
                unbounded_axes: vec![0, 1]
            }
        );
        assert!(ExperimentalRegion::truncated(vec![0.0], vec![1.0], vec![3]).is_err());
        assert!(ExperimentalRegion::new_box(vec![1.0], vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn strip_augment_round_trip(
            raw in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0, 0.01f64..1.0), 1..6),
            omega in 0.01f64..0.99,
        ) {
            let mut pts: Vec<(Vec<f64>, f64)> = raw.iter().map(|&(a, b, w)| (vec![a, b], w)).collect();
            pts.push((vec![0.0, 0.0], omega));
            let d = Design::new(pts, unit2()).unwrap();
            let total: f64 = d.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let w0 = d.origin_weight().unwrap();
            let back = d.strip_origin().unwrap().augment_origin(w0).unwrap();
            prop_assert_eq!(back.len(), d.len());
            for p in d.points() {
                let q = back.points().iter().find(|q| q.x == p.x).unwrap();
                prop_assert!((p.w - q.w).abs() < 1e-14);
            }
            let stripped = d.strip_origin().unwrap();
            let s: f64 = stripped.weights().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn make_grid_is_pure(res in 2usize..12) {
            let a = make_grid(&unit2(), res).unwrap();
            let b = make_grid(&unit2(), res).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
