//! Batch front end: simulation, detection, training, evaluation,
//! cross-validation and heart-rate estimation over record manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod output;

use fpcg_core::{Error, ErrorClass};

/// Process exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}
