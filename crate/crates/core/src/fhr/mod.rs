//! Fetal heart rate from labels or directly from the signal.

mod labels;
mod tang;
mod zahorian;

pub use labels::{fhr_from_labels, FhrWindow};
pub use tang::{cyclic_spectrum, dominant_rate_bpm, fhr_tang_cyclic, TangConfig};
pub use zahorian::{
    fhr_zahorian, matched_filter, merit_update, normalized_acf, pick_acf_peak, zahorian_frames, ZahorianConfig, ZahorianFrame,
};
