//! Command-line front end.
//!
//! Exit codes: 0 success or certified, 1 check failed or transfer uncertified,
//! 2 input error, 3 singular information, 4 no convergence.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::design::{make_grid, ExperimentalRegion, ParamPoint};
use crate::equivalence::{verify_local_optimality, DEFAULT_GRID_RES, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::infomat::{criterion_value, info_matrix, Criterion};
use crate::io::{load_design, save_design, save_json, LoadedDesign};
use crate::model::{logistic_ustar_residual, solve_logistic_ustar, Family, ModelSpec};
use crate::optimizer::{cluster, optimize, OptimizerConfig, DEFAULT_MAX_ITERS, DEFAULT_PRUNE, DEFAULT_TOL};
use crate::transfer::{transfer_to_intercept, transfer_to_no_intercept};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

/// Exit code for an error that aborted a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SingularInformation { .. } | Error::SingularCandidates => EXIT_SINGULAR,
        Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        Error::PremiseViolated(_)
        | Error::NotInXi0 { .. }
        | Error::WrongOriginWeight { .. }
        | Error::T1Negative { .. }
        | Error::NotOptimalInput { .. }
        | Error::ConditionViolated { .. }
        | Error::OriginNotInSupport
        | Error::OriginAlreadyPresent
        | Error::OnlyOriginSupported
        | Error::NoNonOriginPoints => EXIT_FAILED,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "optdesign",
    version,
    about = "Locally D-/A-optimal designs with and without intercept"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CritArg {
    D,
    A,
}

impl From<CritArg> for Criterion {
    fn from(c: CritArg) -> Self {
        match c {
            CritArg::D => Criterion::D,
            CritArg::A => Criterion::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    ToIntercept,
    ToNoIntercept,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value = "d")]
    pub criterion: CritArg,
    /// Grid points per axis.
    #[arg(long, default_value_t = DEFAULT_GRID_RES)]
    pub grid_res: usize,
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    pub slack: f64,
    /// Upper bound used for unbounded axes of the region.
    #[arg(long)]
    pub truncate: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print det(M^-1) (D) or tr(M^-1) (A) for a design file.
    Eval {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "d")]
        criterion: CritArg,
        #[arg(long)]
        truncate: Option<f64>,
    },
    /// Check the equivalence condition on a grid over the region.
    Verify {
        file: PathBuf,
        #[command(flatten)]
        check: CheckArgs,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the sensitivity surface as CSV here.
        #[arg(long)]
        emit_sensitivity: Option<PathBuf>,
    },
    /// Move an optimal design between the intercept and no-intercept models.
    Transfer {
        file: PathBuf,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[command(flatten)]
        check: CheckArgs,
        /// Where to write the transferred design.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compute an optimal design on a grid with the multiplicative algorithm.
    Optimize(OptimizeArgs),
    /// Solve 2 + u + 2e^u - u e^u = 0.
    Ustar,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub family: String,
    /// Fit the model with an intercept.
    #[arg(long)]
    pub intercept: bool,
    /// Parameter vector, intercept first when present (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    /// (β₁, β₂) for the E-max and exponential models.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub nonlinear_params: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lower: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub upper: Vec<f64>,
    /// Use the unit simplex of this dimension instead of a box.
    #[arg(long)]
    pub simplex: Option<usize>,
    #[arg(long, value_enum, default_value = "d")]
    pub criterion: CritArg,
    #[arg(long, default_value_t = DEFAULT_GRID_RES)]
    pub grid_res: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_PRUNE)]
    pub prune: f64,
    /// Merge support points closer than this (max-norm) before writing.
    #[arg(long)]
    pub cluster_radius: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Runs a command, writing the human-readable summary to `out`. Returns the exit code.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<i32> {
    match cli.command {
        Command::Eval {
            file,
            criterion,
            truncate,
        } => cmd_eval(&file, criterion.into(), truncate, out),
        Command::Verify {
            file,
            check,
            report,
            emit_sensitivity,
        } => cmd_verify(&file, &check, report.as_deref(), emit_sensitivity.as_deref(), out),
        Command::Transfer {
            file,
            direction,
            check,
            out: dest,
            report,
        } => cmd_transfer(&file, direction, &check, dest.as_deref(), report.as_deref(), out),
        Command::Optimize(args) => cmd_optimize(&args, out),
        Command::Ustar => cmd_ustar(out),
    }
}

fn load(file: &Path, truncate: Option<f64>) -> Result<LoadedDesign> {
    if let Some(b) = truncate {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "truncation bound must be positive, got {b}"
            )));
        }
    }
    load_design(file, truncate)
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

pub fn cmd_eval<W: Write>(file: &Path, which: Criterion, truncate: Option<f64>, out: &mut W) -> Result<i32> {
    let loaded = load(file, truncate)?;
    let (m, b) = loaded.model()?;
    let value = criterion_value(&info_matrix(&loaded.design, m, b)?, which)?;
    let label = match which {
        Criterion::D => "det(M^-1)",
        Criterion::A => "tr(M^-1)",
    };
    writeln!(out, "{label} = {value:.11e}")?;
    Ok(EXIT_OK)
}

pub fn cmd_verify<W: Write>(
    file: &Path,
    check: &CheckArgs,
    report: Option<&Path>,
    sensitivity_csv: Option<&Path>,
    out: &mut W,
) -> Result<i32> {
    let loaded = load(file, check.truncate)?;
    let (m, b) = loaded.model()?;
    let grid = make_grid(loaded.design.region(), check.grid_res)?;
    let which: Criterion = check.criterion.into();
    let rep = verify_local_optimality(&loaded.design, m, b, which, &grid, check.slack)?;
    if let Some(path) = sensitivity_csv {
        let mut w = BufWriter::new(File::create(path)?);
        rep.write_csv(&grid, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = report {
        save_json(path, &rep)?;
    }
    writeln!(
        out,
        "{} {which}-optimality on {} grid points",
        if rep.passed { "PASS" } else { "FAIL" },
        grid.len()
    )?;
    writeln!(out, "threshold {:.12e}", rep.threshold)?;
    writeln!(out, "max psi   {:.12e} at {}", rep.max_value, fmt_point(&rep.argmax))?;
    if grid.region().is_truncated() {
        writeln!(
            out,
            "region truncated at upper bounds {}",
            fmt_point(grid.region().upper())
        )?;
    }
    for s in &rep.support_values {
        writeln!(out, "support {} psi {:.12e}", fmt_point(&s.x), s.value)?;
    }
    if !rep.violations.is_empty() {
        writeln!(out, "{} violations (psi - threshold):", rep.violations.len())?;
        for v in rep.violations.iter().take(20) {
            writeln!(out, "  {} {:+.6e}", fmt_point(&v.x), v.value)?;
        }
        if rep.violations.len() > 20 {
            writeln!(out, "  ...")?;
        }
    }
    Ok(if rep.passed { EXIT_OK } else { EXIT_FAILED })
}

#[derive(Serialize)]
struct FailedTransfer {
    certified: bool,
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    premise: Option<crate::error::Premise>,
}

pub fn cmd_transfer<W: Write>(
    file: &Path,
    direction: DirectionArg,
    check: &CheckArgs,
    dest: Option<&Path>,
    report: Option<&Path>,
    out: &mut W,
) -> Result<i32> {
    let loaded = load(file, check.truncate)?;
    let (m, b) = loaded.model()?;
    let grid = make_grid(loaded.design.region(), check.grid_res)?;
    let which: Criterion = check.criterion.into();
    // A no-intercept model block stands for β₀ = 0 on the intercept side.
    let beta = ParamPoint::with_intercept(b.beta0(), b.slope.clone());
    let model = m.intercept_model();
    let result = match direction {
        DirectionArg::ToNoIntercept => {
            transfer_to_no_intercept(&loaded.design, &model, &beta, which, &grid, check.slack)
        }
        DirectionArg::ToIntercept => transfer_to_intercept(&loaded.design, &model, &beta, which, &grid, check.slack),
    };
    let rep = match result {
        Ok(rep) => rep,
        Err(e) if exit_code(&e) == EXIT_FAILED => {
            let premise = match &e {
                Error::PremiseViolated(p) => Some(*p),
                _ => None,
            };
            writeln!(out, "UNCERTIFIED: {e}")?;
            if let Some(path) = report {
                save_json(
                    path,
                    &FailedTransfer {
                        certified: false,
                        error: e.to_string(),
                        premise,
                    },
                )?;
            }
            return Ok(EXIT_FAILED);
        }
        Err(e) => return Err(e),
    };
    let (target_model, target_beta) = match direction {
        DirectionArg::ToNoIntercept => (model.no_intercept_model(), b.tilde()),
        DirectionArg::ToIntercept => (model, beta.clone()),
    };
    if let Some(path) = dest {
        save_design(path, &rep.result, Some((&target_model, &target_beta)))?;
    }
    if let Some(path) = report {
        save_json(path, &rep)?;
    }
    writeln!(
        out,
        "{} {which} transfer ({:?}), origin weight {:.12}",
        if rep.verified { "CERTIFIED" } else { "UNCERTIFIED" },
        rep.direction,
        rep.origin_weight
    )?;
    writeln!(
        out,
        "c = {}  residual {:.3e}",
        fmt_point(&rep.certificate.c),
        rep.certificate.residual
    )?;
    writeln!(
        out,
        "condition margin {:.6e} at {}",
        rep.condition_margin,
        fmt_point(&rep.condition_argmin)
    )?;
    if let Some(t1) = rep.t1_min {
        writeln!(out, "min T1 {t1:.6e}")?;
    }
    for p in rep.result.points() {
        writeln!(out, "  {} w {:.12}", fmt_point(&p.x), p.w)?;
    }
    Ok(if rep.verified { EXIT_OK } else { EXIT_FAILED })
}

fn optimize_region(args: &OptimizeArgs, dim: usize) -> Result<ExperimentalRegion> {
    if let Some(d) = args.simplex {
        if d != dim {
            return Err(Error::WrongDimension { expected: dim, got: d });
        }
        return ExperimentalRegion::simplex(d);
    }
    let lower = if args.lower.is_empty() {
        vec![0.0; dim]
    } else {
        args.lower.clone()
    };
    let upper = if args.upper.is_empty() {
        vec![1.0; dim]
    } else {
        args.upper.clone()
    };
    ExperimentalRegion::new_box(lower, upper)
}

fn optimize_model(args: &OptimizeArgs) -> Result<(ModelSpec, ParamPoint, usize)> {
    let family: Family = args.family.parse()?;
    if family.is_nonlinear() {
        let slope = args
            .nonlinear_params
            .clone()
            .ok_or_else(|| Error::InvalidConfig(format!("{family} needs --nonlinear-params")))?;
        let b0 = match args.beta.as_slice() {
            [] => 0.0,
            [b0] => *b0,
            _ => {
                return Err(Error::InvalidConfig(
                    "--beta takes only the intercept for nonlinear models".into(),
                ))
            }
        };
        let beta = if args.intercept {
            ParamPoint::with_intercept(b0, slope)
        } else {
            ParamPoint::without_intercept(slope)
        };
        return Ok((ModelSpec::new(family, args.intercept, 1)?, beta, 1));
    }
    let (beta, dim) = if args.intercept {
        let (b0, rest) = args
            .beta
            .split_first()
            .ok_or_else(|| Error::InvalidConfig("--beta is required".into()))?;
        (ParamPoint::with_intercept(*b0, rest.to_vec()), rest.len())
    } else {
        (ParamPoint::without_intercept(args.beta.clone()), args.beta.len())
    };
    if dim == 0 {
        return Err(Error::InvalidConfig("--beta has no slope entries".into()));
    }
    Ok((ModelSpec::new(family, args.intercept, dim)?, beta, dim))
}

pub fn cmd_optimize<W: Write>(args: &OptimizeArgs, out: &mut W) -> Result<i32> {
    let (model, beta, dim) = optimize_model(args)?;
    model.check_params(&beta)?;
    let region = optimize_region(args, dim)?;
    let grid = make_grid(&region, args.grid_res)?;
    let mut cfg = OptimizerConfig::new(grid, args.criterion.into());
    cfg.max_iters = args.max_iters;
    cfg.tol = args.tol;
    cfg.prune_threshold = args.prune;
    let res = match optimize(&model, &beta, &cfg) {
        Ok(r) => r,
        Err(e @ Error::NoConvergence { .. }) => {
            writeln!(out, "{e}")?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let design = match args.cluster_radius {
        Some(r) => cluster(&res.design, r)?,
        None => res.design.clone(),
    };
    if let Some(path) = &args.out {
        save_design(path, &design, Some((&model, &beta)))?;
    }
    if let Some(path) = &args.report {
        save_json(path, &res)?;
    }
    writeln!(
        out,
        "converged after {} iterations, relative excess {:.3e}{}",
        res.iterations,
        res.max_excess,
        if cfg.criterion == Criterion::D && !res.d_monotone {
            " (non-monotone)"
        } else {
            ""
        }
    )?;
    for p in design.points() {
        writeln!(out, "  {} w {:.12}", fmt_point(&p.x), p.w)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_ustar<W: Write>(out: &mut W) -> Result<i32> {
    let u = solve_logistic_ustar();
    writeln!(out, "u* = {u:.11}")?;
    writeln!(out, "residual = {:e}", logistic_ustar_residual(u).abs())?;
    Ok(EXIT_OK)
}
