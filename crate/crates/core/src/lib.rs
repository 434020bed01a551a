//! Entropy power and Stam inequalities for classical variables conditioned on
//! a finite-dimensional quantum system, checked numerically on grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cq;
pub mod entropy;
pub mod error;
pub mod family;
pub mod fisher;
pub mod grid;
pub mod heat;
pub mod inequality;
pub mod quantum;
pub mod runner;
pub mod suite;

pub use error::{Error, Result};
