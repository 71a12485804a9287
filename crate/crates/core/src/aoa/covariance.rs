use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csi::{CsiPacket, RadioConfig};
use crate::error::{Error, Result};

/// Subarray layout for spatial smoothing over the subcarrier x antenna array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    /// Subcarriers per subarray, `K'`.
    pub k_sub: usize,
    /// Antennas per subarray, `N'_r`; always 2.
    pub nr_sub: usize,
    pub use_backward: bool,
    /// Packets averaged into one covariance, `N_mp`.
    pub n_packets: usize,
    /// Index of the first subcarrier after the DC null, for index maps that
    /// skip it; subarrays never straddle this boundary.
    pub dc_split: Option<usize>,
    /// Upper bound on resolvable paths; the subarray dimension must exceed it.
    pub max_sources: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            k_sub: 8,
            nr_sub: 2,
            use_backward: true,
            n_packets: 15,
            dc_split: None,
            max_sources: 10,
        }
    }
}

impl SmoothingConfig {
    pub fn dim(&self) -> usize {
        self.k_sub * self.nr_sub
    }

    pub fn validate(&self, cfg: &RadioConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.nr_sub != 2 {
            return bad(format!(
                "antennas per subarray must be 2, got {}",
                self.nr_sub
            ));
        }
        if cfg.n_rx < self.nr_sub {
            return bad(format!(
                "{} receive antennas cannot host a {}-antenna subarray",
                cfg.n_rx, self.nr_sub
            ));
        }
        if self.k_sub < 2 || self.k_sub > cfg.n_sub {
            return bad(format!(
                "subcarriers per subarray must lie in [2, {}], got {}",
                cfg.n_sub, self.k_sub
            ));
        }
        if self.n_packets == 0 {
            return bad("n_packets must be >= 1".into());
        }
        if self.dim() <= self.max_sources {
            return bad(format!(
                "subarray dimension {} must exceed the {} paths it has to resolve",
                self.dim(),
                self.max_sources
            ));
        }
        if self.subcarrier_starts(cfg.n_sub).is_empty() {
            return bad("no subarray fits between the band edge and the DC split".into());
        }
        Ok(())
    }

    /// Valid first-subcarrier offsets of the subcarrier subarrays.
    pub fn subcarrier_starts(&self, n_sub: usize) -> Vec<usize> {
        (0..=n_sub.saturating_sub(self.k_sub))
            .filter(|&k0| match self.dc_split {
                Some(s) => k0 + self.k_sub <= s || k0 >= s,
                None => true,
            })
            .collect()
    }
}

fn accumulate_outer(acc: &mut Array2<Complex64>, x: &[Complex64]) {
    let d = x.len();
    for i in 0..d {
        let xi = x[i];
        for j in 0..d {
            acc[[i, j]] += xi * x[j].conj();
        }
    }
}

/// `(R + J conj(R) J) / 2` with `J` the exchange matrix.
pub fn forward_backward(r: &Array2<Complex64>) -> Array2<Complex64> {
    let d = r.nrows();
    Array2::from_shape_fn((d, d), |(i, j)| {
        (r[[i, j]] + r[[d - 1 - i, d - 1 - j]].conj()) * 0.5
    })
}

/// Spatially smoothed covariance of one packet: the mean outer product over
/// all subarray snapshots (every TX chain contributes its own snapshots),
/// optionally forward-backward averaged.
pub fn smooth_fb(
    packet: &CsiPacket,
    sm: &SmoothingConfig,
    cfg: &RadioConfig,
) -> Result<Array2<Complex64>> {
    sm.validate(cfg)?;
    if !packet.matches(cfg) {
        return Err(Error::invalid(
            "packet shape does not match the radio config",
        ));
    }
    let d = sm.dim();
    let starts = sm.subcarrier_starts(cfg.n_sub);
    let t_n = cfg.n_rx - sm.nr_sub + 1;
    let mut acc = Array2::<Complex64>::zeros((d, d));
    let mut x = vec![Complex64::new(0.0, 0.0); d];
    let mut count = 0usize;
    for tx in 0..cfg.n_tx {
        for n0 in 0..t_n {
            for &k0 in &starts {
                for m in 0..sm.nr_sub {
                    let stream = packet.stream(n0 + m, tx);
                    x[m * sm.k_sub..(m + 1) * sm.k_sub].copy_from_slice(&stream[k0..k0 + sm.k_sub]);
                }
                accumulate_outer(&mut acc, &x);
                count += 1;
            }
        }
    }
    acc.mapv_inplace(|z| z / count as f64);
    Ok(if sm.use_backward {
        forward_backward(&acc)
    } else {
        acc
    })
}

/// Mean of [`smooth_fb`] over the first `n_packets` packets.
pub fn smooth_multipacket(
    packets: &[CsiPacket],
    sm: &SmoothingConfig,
    cfg: &RadioConfig,
) -> Result<Array2<Complex64>> {
    if packets.is_empty() {
        return Err(Error::invalid("no packets to smooth"));
    }
    let used = &packets[..sm.n_packets.min(packets.len())];
    if used.len() < sm.n_packets {
        log::warn!(
            "only {} of {} requested packets available for smoothing",
            used.len(),
            sm.n_packets
        );
    }
    let mut acc = Array2::<Complex64>::zeros((sm.dim(), sm.dim()));
    for p in used {
        acc += &smooth_fb(p, sm, cfg)?;
    }
    acc.mapv_inplace(|z| z / used.len() as f64);
    Ok(acc)
}

/// Covariance of the first subarray alone (no spatial smoothing), averaged
/// over packets. Coherent paths leave this rank-deficient.
pub fn unsmoothed_covariance(
    packets: &[CsiPacket],
    sm: &SmoothingConfig,
    cfg: &RadioConfig,
) -> Result<Array2<Complex64>> {
    sm.validate(cfg)?;
    if packets.is_empty() {
        return Err(Error::invalid("no packets"));
    }
    let used = &packets[..sm.n_packets.min(packets.len())];
    let d = sm.dim();
    let k0 = sm.subcarrier_starts(cfg.n_sub)[0];
    let mut acc = Array2::<Complex64>::zeros((d, d));
    let mut x = vec![Complex64::new(0.0, 0.0); d];
    for p in used {
        for m in 0..sm.nr_sub {
            x[m * sm.k_sub..(m + 1) * sm.k_sub].copy_from_slice(&p.stream(m, 0)[k0..k0 + sm.k_sub]);
        }
        accumulate_outer(&mut acc, &x);
    }
    acc.mapv_inplace(|z| z / used.len() as f64);
    Ok(acc)
}

/// Outer product of the whole antenna x subcarrier vector of one packet.
pub fn full_covariance(packet: &CsiPacket, tx: usize) -> Array2<Complex64> {
    let (n_rx, _, n_sub) = packet.dims();
    let x: Vec<Complex64> = (0..n_rx)
        .flat_map(|rx| packet.stream(rx, tx).to_vec())
        .collect();
    let mut acc = Array2::<Complex64>::zeros((n_rx * n_sub, n_rx * n_sub));
    accumulate_outer(&mut acc, &x);
    acc
}
