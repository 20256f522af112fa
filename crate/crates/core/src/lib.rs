//! Verification toolchain for SystemC-style component models.
//!
//! Pipeline: [`scl`] parses and elaborates models, [`kernel`] gives them an
//! explicit scheduler semantics, [`explorer`] checks invariants and LTL
//! properties, [`integration`] learns interface stubs and verifies
//! compositions, [`promela`] emits models for SPIN and [`testgen`] mines
//! test cases.

pub mod cli;
pub mod explorer;
pub mod integration;
pub mod kernel;
pub mod promela;
pub mod props;
pub mod scl;
pub mod testgen;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
