use serde::{Deserialize, Serialize};

use super::phase::{
    estimate_sfo, estimate_sto, remove_sfo, remove_sto, smooth_cfo_lenient, SfoSlope,
};
use super::tap_filter::{tap_filter_packet, TapThreshold};
use crate::csi::{CsiPacket, CsiTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub tap_threshold: TapThreshold,
    /// CFO smoothing window `N_p`, packets.
    pub cfo_window: usize,
    pub remove_sto: bool,
    pub remove_sfo: bool,
    pub smooth_cfo: bool,
    pub filter_taps: bool,
    /// Lower bound on the taps kept by the filter.
    pub min_taps: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            tap_threshold: TapThreshold::default(),
            cfo_window: 5,
            remove_sto: true,
            remove_sfo: true,
            smooth_cfo: true,
            filter_taps: true,
            min_taps: 10,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        TapThreshold::new(self.tap_threshold.value())?;
        if self.cfo_window == 0 {
            return Err(Error::InvalidConfig("cfo_window must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagesApplied {
    pub sto: bool,
    pub sfo: bool,
    pub cfo: bool,
    pub tap_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Mean per-packet SFO slope, seconds.
    pub sfo_estimate: SfoSlope,
    /// The same slope as phase per subcarrier index, radians.
    pub sfo_slope_rad: f64,
    pub sto_taps: usize,
    pub cfo_window: usize,
    pub input_packets: usize,
    pub output_packets: usize,
    /// Flat entry indices, per output packet, that contained zero-magnitude samples.
    pub degenerate_entries: Vec<(usize, Vec<usize>)>,
    pub applied: StagesApplied,
}

/// Runs STO removal, per-packet SFO removal, CFO smoothing over
/// non-overlapping windows, and CIR tap filtering, in that order.
///
/// A trailing window shorter than `cfo_window` is dropped unless it is the
/// only window.
pub fn calibrate(
    trace: &CsiTrace,
    config: &CalibrationConfig,
) -> Result<(CsiTrace, CalibrationReport)> {
    config.validate()?;
    trace.validate()?;
    let cfg = trace.config;

    let (mut t, sto_taps) = if config.remove_sto {
        let n = estimate_sto(trace)?;
        (remove_sto(trace, n)?, n)
    } else {
        (trace.clone(), 0)
    };

    let mut sfo_sum = 0.0;
    if config.remove_sfo {
        for p in &mut t.packets {
            let s = estimate_sfo(p, &cfg)?;
            sfo_sum += s.0;
            *p = remove_sfo(p, s, &cfg);
        }
    }
    let sfo_estimate = SfoSlope(if config.remove_sfo {
        sfo_sum / t.packets.len() as f64
    } else {
        0.0
    });

    let mut degenerate_entries = Vec::new();
    let window = if config.smooth_cfo {
        config.cfo_window
    } else {
        1
    };
    let packets: Vec<CsiPacket> = if window > 1 {
        let mut out = Vec::with_capacity(t.packets.len() / window + 1);
        let chunks: Vec<&[CsiPacket]> = t.packets.chunks(window).collect();
        let n_chunks = chunks.len();
        for (i, chunk) in chunks.into_iter().enumerate() {
            if chunk.len() < window && n_chunks > 1 {
                break;
            }
            let (p, bad) = smooth_cfo_lenient(chunk)?;
            if !bad.is_empty() {
                log::warn!("window {i}: {} entries had zero magnitude", bad.len());
                degenerate_entries.push((i, bad));
            }
            out.push(p);
        }
        out
    } else {
        t.packets
    };

    let mut packets = packets;
    if config.filter_taps {
        for p in &mut packets {
            tap_filter_packet(p, config.tap_threshold, config.min_taps)?;
        }
    }

    let report = CalibrationReport {
        sfo_estimate,
        sfo_slope_rad: sfo_estimate.radians_per_subcarrier(cfg.f_delta),
        sto_taps,
        cfo_window: window,
        input_packets: trace.packets.len(),
        output_packets: packets.len(),
        degenerate_entries,
        applied: StagesApplied {
            sto: config.remove_sto,
            sfo: config.remove_sfo,
            cfo: config.smooth_cfo && window > 1,
            tap_filter: config.filter_taps,
        },
    };
    let out = CsiTrace {
        config: cfg,
        packets,
        source_id: trace.source_id.clone(),
        location: trace.location,
    };
    Ok((out, report))
}
