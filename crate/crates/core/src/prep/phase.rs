//! SFO, STO and CFO estimation and removal.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csi::{cfr_to_cir, unwrap_phase, CsiPacket, CsiTrace, RadioConfig};
use crate::error::{Error, Result};

/// Sampling-frequency-offset slope, seconds. Subcarrier `k` carries the extra
/// phase `2 pi f_delta k xi`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SfoSlope(pub f64);

impl SfoSlope {
    /// Phase increment per subcarrier index, radians.
    pub fn radians_per_subcarrier(self, f_delta: f64) -> f64 {
        TAU * f_delta * self.0
    }
}

/// Least-squares phase slope shared by every (rx, tx) stream, each stream
/// having its own intercept. Phases are unwrapped along the subcarrier axis.
pub fn estimate_sfo(packet: &CsiPacket, cfg: &RadioConfig) -> Result<SfoSlope> {
    let (n_rx, n_tx, k_len) = packet.dims();
    if k_len < 3 {
        return Err(Error::invalid(format!(
            "SFO regression needs at least 3 subcarriers, got {k_len}"
        )));
    }
    let k_mean = (k_len - 1) as f64 / 2.0;
    let k_var: f64 = (0..k_len).map(|k| (k as f64 - k_mean).powi(2)).sum();
    let mut cov = 0.0;
    for rx in 0..n_rx {
        for tx in 0..n_tx {
            let ph = unwrap_phase(
                &packet
                    .stream(rx, tx)
                    .iter()
                    .map(|z| z.arg())
                    .collect::<Vec<_>>(),
            );
            let ph_mean = ph.iter().sum::<f64>() / k_len as f64;
            cov += ph
                .iter()
                .enumerate()
                .map(|(k, p)| (k as f64 - k_mean) * (p - ph_mean))
                .sum::<f64>();
        }
    }
    let streams = (n_rx * n_tx) as f64;
    let slope = cov / (k_var * streams);
    Ok(SfoSlope(slope / (TAU * cfg.f_delta)))
}

/// Removes the phase ramp `2 pi f_delta k xi` from every stream.
pub fn remove_sfo(packet: &CsiPacket, slope: SfoSlope, cfg: &RadioConfig) -> CsiPacket {
    let step = -slope.radians_per_subcarrier(cfg.f_delta);
    apply_ramp(packet, step)
}

fn apply_ramp(packet: &CsiPacket, step: f64) -> CsiPacket {
    let (_, _, k_len) = packet.dims();
    let ramp: Vec<Complex64> = (0..k_len)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect();
    let mut out = packet.clone();
    for (i, z) in out.data_mut().iter_mut().enumerate() {
        *z *= ramp[i % k_len];
    }
    out
}

/// Tap holding the most power, summed over all streams of the packet.
pub fn packet_sto(packet: &CsiPacket) -> Result<usize> {
    let (_, _, k_len) = packet.dims();
    let mut pdp = vec![0.0; k_len];
    for (rx, tx) in packet.links() {
        for (acc, p) in pdp.iter_mut().zip(cfr_to_cir(packet.stream(rx, tx))?.pdp()) {
            *acc += p;
        }
    }
    Ok(pdp
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
        .unwrap_or(0))
}

/// Most frequent of a list of tap detections; ties go to the smaller tap.
pub fn mode(detections: &[usize]) -> Option<usize> {
    let mut counts = BTreeMap::new();
    for &d in detections {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
}

/// Circular CIR offset of the trace: the mode of per-packet PDP peaks.
pub fn estimate_sto(trace: &CsiTrace) -> Result<usize> {
    if trace.packets.is_empty() {
        return Err(Error::invalid("STO estimation needs at least one packet"));
    }
    let per_packet = trace
        .packets
        .iter()
        .map(packet_sto)
        .collect::<Result<Vec<_>>>()?;
    Ok(mode(&per_packet).unwrap_or(0))
}

/// Shifts every CIR back by `n_sto` taps.
pub fn remove_sto(trace: &CsiTrace, n_sto: usize) -> Result<CsiTrace> {
    let k_len = trace.config.n_sub;
    if n_sto >= k_len {
        return Err(Error::invalid(format!("STO {n_sto} must be < K = {k_len}")));
    }
    let step = TAU * n_sto as f64 / k_len as f64;
    let mut out = trace.clone();
    for p in &mut out.packets {
        *p = apply_ramp(p, step);
    }
    Ok(out)
}

/// Combines a window of packets into one: per entry, the geometric mean of
/// the magnitudes and the arithmetic mean of the phases unwrapped along the
/// packet axis. Any zero-magnitude entry is an error.
pub fn smooth_cfo(window: &[CsiPacket]) -> Result<CsiPacket> {
    let (out, degenerate) = smooth_cfo_lenient(window)?;
    match degenerate.first() {
        Some(&index) => Err(Error::DegenerateEntry { index }),
        None => Ok(out),
    }
}

/// As [`smooth_cfo`], but zero-magnitude samples are left out of their
/// entry's means. Returns the flat indices of entries that had any.
/// An entry that is zero in every packet stays zero.
pub fn smooth_cfo_lenient(window: &[CsiPacket]) -> Result<(CsiPacket, Vec<usize>)> {
    let first = window
        .first()
        .ok_or_else(|| Error::invalid("CFO window is empty"))?;
    let dims = first.dims();
    if window.iter().any(|p| p.dims() != dims) {
        return Err(Error::invalid("packets in a CFO window differ in shape"));
    }
    let n_entries = first.data().len();
    let mut out = first.clone();
    out.timestamp = window.iter().map(|p| p.timestamp).sum::<f64>() / window.len() as f64;
    let mut degenerate = Vec::new();
    let mut phases = Vec::with_capacity(window.len());
    for i in 0..n_entries {
        phases.clear();
        let mut log_mag = 0.0;
        for p in window {
            let z = p.data()[i];
            let m = z.norm();
            if m > 0.0 {
                log_mag += m.ln();
                phases.push(z.arg());
            }
        }
        if phases.len() < window.len() {
            degenerate.push(i);
        }
        out.data_mut()[i] = if phases.is_empty() {
            Complex64::new(0.0, 0.0)
        } else {
            let n = phases.len() as f64;
            let phase = unwrap_phase(&phases).iter().sum::<f64>() / n;
            Complex64::from_polar((log_mag / n).exp(), phase)
        };
    }
    Ok((out, degenerate))
}
