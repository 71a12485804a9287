//! Entropy of CSI amplitude distributions via all-pole density models.

mod ar;
mod fingerprint;
mod spectrum;

pub use ar::{
    char_autocorr, eef_scores, fit_ar, fit_best, fit_best_smoothed, kernel_bandwidth, levinson,
    rescale, select_order, smoothed_char_autocorr, step_down, ArModel, Levinson, OrderCriterion,
    RescaleBounds,
};
pub use fingerprint::{
    fingerprint, fingerprint_len, fingerprint_with_diagnostics, write_diagnostics_csv,
    EntropyConfig, EntropyFingerprint, RescaleMode, StreamDiagnostic, StreamId,
};
pub use spectrum::{
    ar_psd, beta_grid, entropy, entropy_value, model_autocorr, normalizing_gain, EntropyEstimate,
    Psd,
};

/// Density grid size.
pub const DEFAULT_GRID: usize = 1024;
/// Largest AR order considered by order selection.
pub const DEFAULT_P_MAX: usize = 20;
/// Multiplier on Silverman's bandwidth for the characteristic-function taper.
pub const DEFAULT_KERNEL_SCALE: f64 = 0.5;
