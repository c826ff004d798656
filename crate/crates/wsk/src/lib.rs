//! Computer algebra over Henselian valued fields with analytic structure.

pub mod anfun;
pub mod annuli;
pub mod cli;
pub mod error;
pub mod expr;
pub mod henselrv;
pub mod poly;
pub mod sample;
pub mod selftest;
pub mod sepseries;
pub mod termnorm;
pub mod vfield;

pub use error::{Error, Result};
