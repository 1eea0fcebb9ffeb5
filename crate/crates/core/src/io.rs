//! JSON design files.
//!
//! ```json
//! {
//!   "region": {"dim": 2, "kind": "box", "lower": [0, 0], "upper": [1, 1]},
//!   "model": {"family": "poisson", "with_intercept": true, "beta": [0, -2, -2]},
//!   "points": [{"x": [0, 0], "w": 0.3333333333333333}, ...]
//! }
//! ```
//!
//! `upper` entries may be `null` for unbounded axes; the region is then truncated
//! at the bound passed on load. For E-max and exponential models `beta` holds only
//! the intercept (empty without one) and `nonlinear_params` holds `(β₁, β₂)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{Design, ExperimentalRegion, ParamPoint, RegionKind};
use crate::error::{Error, Result};
use crate::model::{Family, ModelSpec};

/// Loaded weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub dim: usize,
    pub kind: String,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unbounded_axes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: String,
    pub with_intercept: bool,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear_params: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFile {
    pub x: Vec<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub region: RegionFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFile>,
    pub points: Vec<PointFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDesign {
    pub design: Design,
    pub model: Option<(ModelSpec, ParamPoint)>,
}

impl LoadedDesign {
    /// The model block, or a parse error naming the file's omission.
    pub fn model(&self) -> Result<(&ModelSpec, &ParamPoint)> {
        self.model
            .as_ref()
            .map(|(m, b)| (m, b))
            .ok_or_else(|| Error::Parse("design file has no model block".into()))
    }
}

pub fn parse_model(file: &ModelFile, dim: usize) -> Result<(ModelSpec, ParamPoint)> {
    let family: Family = file.family.parse()?;
    let model = ModelSpec::new(family, file.with_intercept, dim)?;
    let beta = if family.is_nonlinear() {
        let slope = file
            .nonlinear_params
            .clone()
            .ok_or_else(|| Error::Parse(format!("{family} model needs nonlinear_params")))?;
        match (file.with_intercept, file.beta.as_slice()) {
            (true, [b0]) => ParamPoint::with_intercept(*b0, slope),
            (true, []) => ParamPoint::with_intercept(0.0, slope),
            (false, []) => ParamPoint::without_intercept(slope),
            _ => {
                return Err(Error::Parse(
                    "beta must hold only the intercept for nonlinear models".into(),
                ))
            }
        }
    } else {
        if file.nonlinear_params.is_some() {
            return Err(Error::Parse(format!("{family} model takes no nonlinear_params")));
        }
        if file.with_intercept {
            let (b0, rest) = file
                .beta
                .split_first()
                .ok_or_else(|| Error::Parse("beta is empty".into()))?;
            ParamPoint::with_intercept(*b0, rest.to_vec())
        } else {
            ParamPoint::without_intercept(file.beta.clone())
        }
    };
    model.check_params(&beta)?;
    Ok((model, beta))
}

pub fn model_to_file(model: &ModelSpec, beta: &ParamPoint) -> ModelFile {
    if model.family.is_nonlinear() {
        ModelFile {
            family: model.family.name().into(),
            with_intercept: model.with_intercept,
            beta: if model.with_intercept {
                vec![beta.beta0()]
            } else {
                vec![]
            },
            nonlinear_params: Some(beta.slope.clone()),
        }
    } else {
        let beta = if model.with_intercept {
            std::iter::once(beta.beta0())
                .chain(beta.slope.iter().copied())
                .collect()
        } else {
            beta.slope.clone()
        };
        ModelFile {
            family: model.family.name().into(),
            with_intercept: model.with_intercept,
            beta,
            nonlinear_params: None,
        }
    }
}

/// Default truncation bound for unbounded axes: `10 · max(1/|β̃ᵢ|, 1)` over those axes.
pub fn default_truncation(beta: &ParamPoint, axes: &[usize]) -> f64 {
    axes.iter()
        .map(|&a| match beta.slope.get(a) {
            Some(b) if *b != 0.0 => (1.0 / b.abs()).max(1.0),
            _ => 1.0,
        })
        .fold(1.0, f64::max)
        * 10.0
}

pub fn parse_region(file: &RegionFile, truncate: Option<f64>, beta: Option<&ParamPoint>) -> Result<ExperimentalRegion> {
    if file.lower.len() != file.dim || file.upper.len() != file.dim {
        return Err(Error::InvalidRegion(format!(
            "dim is {} but bounds have lengths {} and {}",
            file.dim,
            file.lower.len(),
            file.upper.len()
        )));
    }
    let open: Vec<usize> = (0..file.dim).filter(|&i| file.upper[i].is_none()).collect();
    match file.kind.as_str() {
        "simplex" => ExperimentalRegion::simplex(file.dim),
        "box" if open.is_empty() => {
            ExperimentalRegion::new_box(file.lower.clone(), file.upper.iter().map(|u| u.unwrap()).collect())
        }
        "box" | "truncated_box" => {
            let bound = match (truncate, beta) {
                (Some(b), _) => b,
                (None, _) if open.is_empty() => 0.0,
                (None, Some(beta)) => default_truncation(beta, &open),
                (None, None) => return Err(Error::InvalidConfig("unbounded region needs a truncation bound".into())),
            };
            let upper = file.upper.iter().map(|u| u.unwrap_or(bound)).collect();
            let mut axes = file.unbounded_axes.clone();
            axes.extend(&open);
            ExperimentalRegion::truncated(file.lower.clone(), upper, axes)
        }
        other => Err(Error::InvalidRegion(format!("unknown region kind '{other}'"))),
    }
}

pub fn region_to_file(region: &ExperimentalRegion) -> RegionFile {
    let (kind, unbounded_axes) = match region.kind() {
        RegionKind::Box => ("box", vec![]),
        RegionKind::Simplex => ("simplex", vec![]),
        RegionKind::TruncatedBox { unbounded_axes } => ("truncated_box", unbounded_axes.clone()),
    };
    RegionFile {
        dim: region.dim(),
        kind: kind.into(),
        lower: region.lower().to_vec(),
        upper: region.upper().iter().map(|&u| Some(u)).collect(),
        unbounded_axes,
    }
}

pub fn parse_design_file(file: &DesignFile, truncate: Option<f64>) -> Result<LoadedDesign> {
    let model = file
        .model
        .as_ref()
        .map(|m| parse_model(m, file.region.dim))
        .transpose()?;
    let region = parse_region(&file.region, truncate, model.as_ref().map(|(_, b)| b))?;
    let total: f64 = file.points.iter().map(|p| p.w).sum();
    if !((total - 1.0).abs() <= WEIGHT_SUM_TOL) {
        return Err(Error::Parse(format!("weights sum to {total}, expected 1")));
    }
    let design = Design::new(file.points.iter().map(|p| (p.x.clone(), p.w)).collect(), region)?;
    Ok(LoadedDesign { design, model })
}

pub fn parse_design_str(text: &str, truncate: Option<f64>) -> Result<LoadedDesign> {
    let file: DesignFile = serde_json::from_str(text)?;
    parse_design_file(&file, truncate)
}

pub fn load_design(path: &Path, truncate: Option<f64>) -> Result<LoadedDesign> {
    parse_design_str(&fs::read_to_string(path)?, truncate)
}

pub fn design_to_file(design: &Design, model: Option<(&ModelSpec, &ParamPoint)>) -> DesignFile {
    DesignFile {
        region: region_to_file(design.region()),
        model: model.map(|(m, b)| model_to_file(m, b)),
        points: design
            .points()
            .iter()
            .map(|p| PointFile { x: p.x.clone(), w: p.w })
            .collect(),
    }
}

pub fn design_to_string(design: &Design, model: Option<(&ModelSpec, &ParamPoint)>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&design_to_file(design, model))?;
    s.push('\n');
    Ok(s)
}

pub fn save_design(path: &Path, design: &Design, model: Option<(&ModelSpec, &ParamPoint)>) -> Result<()> {
    fs::write(path, design_to_string(design, model)?)?;
    Ok(())
}

/// Pretty JSON for any serializable report.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
