//! CSI data model, transforms, linear algebra and file formats.

pub mod fft;
pub mod intel5300;
pub mod linalg;
pub mod trace_io;
mod types;

pub use fft::{cfr_to_cir, cir_to_cfr, CirVector};
pub use intel5300::{parse_intel5300, records_to_trace, Intel5300Meta, Intel5300Record};
pub use linalg::{hermitian_eig, HermitianEig};
pub use trace_io::{decode_trace, encode_trace, load_trace, save_trace};
pub use types::{CsiPacket, CsiTrace, RadioConfig, SPEED_OF_LIGHT};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Cumulative +-2pi correction wherever successive samples jump by more than pi.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phases {
        if let Some(q) = prev {
            let d = p - q;
            if d > std::f64::consts::PI {
                offset -= std::f64::consts::TAU
                    * ((d + std::f64::consts::PI) / std::f64::consts::TAU).floor();
            } else if d < -std::f64::consts::PI {
                offset += std::f64::consts::TAU
                    * ((-d + std::f64::consts::PI) / std::f64::consts::TAU).floor();
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}
