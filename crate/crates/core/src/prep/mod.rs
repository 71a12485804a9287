//! Turning raw CSI into fingerprint-ready CSI: phase-error removal and
//! power-based CIR truncation.

mod calibrate;
mod phase;
mod tap_filter;

pub use calibrate::{calibrate, CalibrationConfig, CalibrationReport, StagesApplied};
pub use phase::{
    estimate_sfo, estimate_sto, mode, packet_sto, remove_sfo, remove_sto, smooth_cfo,
    smooth_cfo_lenient, SfoSlope,
};
pub use tap_filter::{retained_taps, tap_filter, TapThreshold};
