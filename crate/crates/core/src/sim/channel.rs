use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::csi::{CsiPacket, CsiTrace, RadioConfig};
use crate::error::{Error, Result};

/// Packet interval used for synthetic timestamps (100 packets/s).
pub const PACKET_INTERVAL: f64 = 0.01;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    /// Linear amplitude.
    pub alpha: f64,
    /// Path phase, radians; enters the CFR as `exp(-j phi)`.
    pub phi: f64,
    /// Delay, seconds.
    pub tau: f64,
    /// Arrival angle from array broadside, degrees.
    pub theta: f64,
}

impl PathComponent {
    pub fn new(alpha: f64, phi: f64, tau: f64, theta: f64) -> Self {
        Self {
            alpha,
            phi,
            tau,
            theta,
        }
    }

    fn validate(&self, cfg: &RadioConfig) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(format!(
                "path amplitude {} must be finite and >= 0",
                self.alpha
            )));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("path phase must be finite"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0 && self.tau < cfg.delay_span()) {
            return Err(Error::invalid(format!(
                "path delay {} s outside resolvable span [0, {})",
                self.tau,
                cfg.delay_span()
            )));
        }
        if !(self.theta.is_finite() && (-90.0..=90.0).contains(&self.theta)) {
            return Err(Error::invalid(format!(
                "arrival angle {} outside [-90, 90] degrees",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Phase errors and noise injected on top of the clean channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentSpec {
    /// SFO slope `xi`, seconds: subcarrier `k` gains phase `2 pi f_delta k xi`.
    #[serde(default)]
    pub sfo: f64,
    /// Circular CIR shift in taps.
    #[serde(default)]
    pub sto_taps: usize,
    /// Deterministic CFO phase increment per packet, radians.
    #[serde(default)]
    pub cfo_step: f64,
    /// Standard deviation of i.i.d. per-packet CFO phase jitter, radians.
    #[serde(default)]
    pub cfo_jitter: f64,
    /// Initial carrier phase, radians.
    #[serde(default)]
    pub cpo: f64,
    /// Per-entry SNR relative to the mean clean CFR power; `None` = noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
}

impl Default for ImpairmentSpec {
    fn default() -> Self {
        Self {
            sfo: 0.0,
            sto_taps: 0,
            cfo_step: 0.0,
            cfo_jitter: 0.0,
            cpo: 0.0,
            snr_db: None,
        }
    }
}

impl ImpairmentSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_snr(snr_db: f64) -> Self {
        Self {
            snr_db: Some(snr_db),
            ..Self::default()
        }
    }
}

/// The CFR of `paths` without impairments, one entry per `[rx][tx][k]`.
pub fn clean_cfr(paths: &[PathComponent], cfg: &RadioConfig) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.entries()];
    for p in paths {
        let gain = Complex64::from_polar(p.alpha, -p.phi);
        let ant_step = -TAU * cfg.f_c * cfg.d * p.theta.to_radians().sin() / cfg.c;
        let sub_step = -TAU * cfg.f_delta * p.tau;
        for rx in 0..cfg.n_rx {
            let ant = Complex64::from_polar(1.0, ant_step * rx as f64);
            for tx in 0..cfg.n_tx {
                let base = (rx * cfg.n_tx + tx) * cfg.n_sub;
                for k in 0..cfg.n_sub {
                    out[base + k] += gain * ant * Complex64::from_polar(1.0, sub_step * k as f64);
                }
            }
        }
    }
    out
}

/// Synthesizes `n_packets` CFR snapshots of a static multipath channel with
/// the requested impairments. Deterministic in `seed`.
pub fn synth_trace(
    paths: &[PathComponent],
    cfg: &RadioConfig,
    imp: &ImpairmentSpec,
    n_packets: usize,
    seed: u64,
) -> Result<CsiTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth_trace_with_rng(paths, cfg, imp, n_packets, &mut rng)
}

pub fn synth_trace_with_rng<R: Rng + ?Sized>(
    paths: &[PathComponent],
    cfg: &RadioConfig,
    imp: &ImpairmentSpec,
    n_packets: usize,
    rng: &mut R,
) -> Result<CsiTrace> {
    cfg.validate()?;
    if paths.is_empty() {
        return Err(Error::invalid("at least one path is required"));
    }
    if n_packets == 0 {
        return Err(Error::invalid("n_packets must be >= 1"));
    }
    if imp.sto_taps >= cfg.n_sub {
        return Err(Error::invalid(format!(
            "sto_taps {} must be < K = {}",
            imp.sto_taps, cfg.n_sub
        )));
    }
    for p in paths {
        p.validate(cfg)?;
    }

    let clean = clean_cfr(paths, cfg);
    let k_len = cfg.n_sub as f64;
    // Frequency-dependent error, shared by every packet: SFO then STO.
    let ramp: Vec<Complex64> = (0..cfg.n_sub)
        .map(|k| {
            let k = k as f64;
            let sfo = TAU * cfg.f_delta * k * imp.sfo;
            let sto = -TAU * k * imp.sto_taps as f64 / k_len;
            Complex64::from_polar(1.0, sfo + sto)
        })
        .collect();

    let sigma = match imp.snr_db {
        Some(snr) => {
            let p_sig = clean.iter().map(|z| z.norm_sqr()).sum::<f64>() / clean.len() as f64;
            (p_sig * 10f64.powf(-snr / 10.0) / 2.0).sqrt()
        }
        None => 0.0,
    };
    let jitter = if imp.cfo_jitter > 0.0 {
        Some(Normal::new(0.0, imp.cfo_jitter).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };

    let mut packets = Vec::with_capacity(n_packets);
    for n in 0..n_packets {
        let mut common = imp.cpo + imp.cfo_step * n as f64;
        if let Some(j) = &jitter {
            common += j.sample(rng);
        }
        let rot = Complex64::from_polar(1.0, common);
        let mut data = Vec::with_capacity(clean.len());
        for (i, h) in clean.iter().enumerate() {
            let mut v = h * ramp[i % cfg.n_sub] * rot;
            if sigma > 0.0 {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                v += Complex64::new(re, im) * sigma;
            }
            data.push(v);
        }
        packets.push(CsiPacket::new(
            n as f64 * PACKET_INTERVAL,
            cfg.n_rx,
            cfg.n_tx,
            cfg.n_sub,
            data,
        )?);
    }
    CsiTrace::new(*cfg, packets, "sim")
}

/// `(theta, tau)` of the earliest path; equal delays prefer the stronger path.
pub fn ground_truth(paths: &[PathComponent]) -> Result<(f64, f64)> {
    let first = paths
        .iter()
        .min_by(|a, b| a.tau.total_cmp(&b.tau).then(b.alpha.total_cmp(&a.alpha)))
        .ok_or_else(|| Error::invalid("at least one path is required"))?;
    Ok((first.theta, first.tau))
}

/// Random impairment ranges for scene generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpairmentProfile {
    /// SFO slope drawn uniformly from `[-sfo_max, sfo_max]` seconds.
    pub sfo_max: f64,
    /// Draw a uniform STO shift in `0..K`.
    pub random_sto: bool,
    /// CFO step drawn uniformly from `[-cfo_step_max, cfo_step_max]`.
    pub cfo_step_max: f64,
    pub cfo_jitter: f64,
    /// Draw a uniform CPO in `[0, 2 pi)`.
    pub random_cpo: bool,
}

impl Default for ImpairmentProfile {
    fn default() -> Self {
        Self {
            sfo_max: 100e-9,
            random_sto: true,
            cfo_step_max: 0.3,
            cfo_jitter: 0.1,
            random_cpo: true,
        }
    }
}

impl ImpairmentProfile {
    pub fn none() -> Self {
        Self {
            sfo_max: 0.0,
            random_sto: false,
            cfo_step_max: 0.0,
            cfo_jitter: 0.0,
            random_cpo: false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n_sub: usize,
        snr_db: Option<f64>,
    ) -> ImpairmentSpec {
        ImpairmentSpec {
            sfo: if self.sfo_max > 0.0 {
                rng.random_range(-self.sfo_max..=self.sfo_max)
            } else {
                0.0
            },
            sto_taps: if self.random_sto {
                rng.random_range(0..n_sub)
            } else {
                0
            },
            cfo_step: if self.cfo_step_max > 0.0 {
                rng.random_range(-self.cfo_step_max..=self.cfo_step_max)
            } else {
                0.0
            },
            cfo_jitter: self.cfo_jitter,
            cpo: if self.random_cpo {
                rng.random_range(0.0..TAU)
            } else {
                0.0
            },
            snr_db,
        }
    }
}
