//! Locally optimal designs for generalized linear and nonlinear regression
//! models, with and without intercept.

// `!(x > 0.0)` is written on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod equivalence;
pub mod error;
pub mod infomat;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod premise;
pub mod transfer;

pub use design::{make_grid, Design, ExperimentalRegion, Grid, ParamPoint, RegionKind, SupportPoint};
pub use equivalence::{sensitivity, verify_local_optimality, SensitivityFn, SensitivityReport};
pub use error::{Error, Premise, Result};
pub use infomat::{criterion_value, info_matrix, Criterion, InfoMatrix};
pub use model::{solve_logistic_ustar, Family, ModelSpec};
pub use premise::Route;
pub use transfer::{transfer_to_intercept, transfer_to_no_intercept, TransferReport};
