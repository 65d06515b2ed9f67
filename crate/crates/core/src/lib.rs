//! Fetal phonocardiography toolkit: synthetic records, heart-sound
//! detectors, heart-rate estimators and the evaluation protocol used to
//! compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod detect;
pub mod error;
pub mod eval;
pub mod fhr;
pub mod preprocess;
pub mod signal;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use signal::{Annotation, AnnotationSet, FhrPoint, FhrSeries, Record, SoundKind, Source};
