//! Joint angle/delay estimation with smoothed MUSIC over the
//! subcarrier x antenna virtual array.

mod covariance;
mod fingerprint;
mod music;

pub use covariance::{
    forward_backward, full_covariance, smooth_fb, smooth_multipacket, unsmoothed_covariance,
    SmoothingConfig,
};
pub use fingerprint::{
    analyze, aoa_fingerprint, first_arrival, AoaAnalysis, AoaConfig, AoaTofFingerprint,
};
pub use music::{
    estimate_num_sources, find_peaks, music_spectrum, steering, Peak, SpectrumAxes, SpectrumGrid,
};
