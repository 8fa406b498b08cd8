//! Pricing a defaultable corporate bond with credit rating migration as a
//! double free boundary problem.

pub mod boundaries;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod mc;
pub mod model;
pub mod output;
pub mod solver;
pub mod traveling_wave;
pub mod tridiag;
