// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod carleman;
pub mod cli;
pub mod config;
pub mod discrimination;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod models;
pub mod linear_system;
pub mod ode;
pub mod pipeline;
pub mod report;
pub mod sparse;
pub mod suites;

pub use error::{Error, Result};
