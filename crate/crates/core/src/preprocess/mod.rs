//! Filtering, spike removal and envelope features.

pub mod envelogram;
pub mod envelope;
pub mod fft;
pub mod filter;
pub mod spikes;
pub mod wavelet;

pub use envelogram::{compute_envelogram, Envelogram, EnvelogramConfig, CHANNEL_NAMES};
pub use envelope::{
    analytic_signal, band_energies, hilbert_envelope, homomorphic_envelope, moving_mean, moving_rms,
    psd_energy_envelope, rms_envelope, teager_energy,
};
pub use filter::{apply_filter, bandpass_record, clamp_band, design_butterworth, Band, Biquad, FilterDesign, FilterKind, FilterSpec};
pub use spikes::remove_spikes;
pub use wavelet::{default_dwt_level, dwt_detail_envelope};
