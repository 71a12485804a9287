use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csi::{cfr_to_cir, cir_to_cfr, CirVector, CsiPacket};
use crate::error::{Error, Result};

/// Cumulative-power threshold `C` for CIR truncation, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TapThreshold(f64);

impl TapThreshold {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c <= 1.0 {
            Ok(Self(c))
        } else {
            Err(Error::InvalidConfig(format!(
                "tap threshold {c} must lie in (0, 1]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for TapThreshold {
    fn default() -> Self {
        Self(0.9)
    }
}

/// Number of leading taps whose cumulative power first reaches `c` of the total.
pub fn retained_taps(pdp: &[f64], c: TapThreshold) -> Result<usize> {
    let total: f64 = pdp.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid("CIR has no power"));
    }
    let mut acc = 0.0;
    for (k, p) in pdp.iter().enumerate() {
        acc += p;
        if acc / total >= c.value() - 1e-12 {
            return Ok(k + 1);
        }
    }
    Ok(pdp.len())
}

/// Zeroes every CIR tap past the point where `c` of the power is accumulated
/// and returns the resulting CFR.
pub fn tap_filter(cfr: &[Complex64], c: TapThreshold) -> Result<Vec<Complex64>> {
    let cir = cfr_to_cir(cfr)?;
    let keep = retained_taps(&cir.pdp(), c)?;
    let mut taps = cir.taps;
    for t in &mut taps[keep..] {
        *t = Complex64::new(0.0, 0.0);
    }
    cir_to_cfr(&CirVector { taps })
}

/// Tap filtering of a whole packet with one cut-off taken from the PDP
/// summed over every stream, so all antennas see the same linear filter and
/// the inter-antenna phase relations survive. The cut-off never drops below
/// `min_taps`. Returns the number of taps kept.
pub fn tap_filter_packet(
    packet: &mut CsiPacket,
    c: TapThreshold,
    min_taps: usize,
) -> Result<usize> {
    let links: Vec<(usize, usize)> = packet.links().collect();
    let cirs: Vec<CirVector> = links
        .iter()
        .map(|&(rx, tx)| cfr_to_cir(packet.stream(rx, tx)))
        .collect::<Result<_>>()?;
    let mut pdp = vec![0.0; cirs.first().map_or(0, |c| c.taps.len())];
    for cir in &cirs {
        for (acc, p) in pdp.iter_mut().zip(cir.pdp()) {
            *acc += p;
        }
    }
    let keep = retained_taps(&pdp, c)?.max(min_taps).min(pdp.len());
    for (&(rx, tx), mut cir) in links.iter().zip(cirs) {
        for t in &mut cir.taps[keep..] {
            *t = Complex64::new(0.0, 0.0);
        }
        packet
            .stream_mut(rx, tx)
            .copy_from_slice(&cir_to_cfr(&cir)?);
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::RadioConfig;
    use crate::sim::{clean_cfr, synth_trace, ImpairmentSpec, PathComponent};

    fn energy(v: &[Complex64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum()
    }

    #[test]
    fn single_tap_passes_through() {
        let cfr = vec![Complex64::new(0.3, -0.7); 30];
        let out = tap_filter(&cfr, TapThreshold::default()).unwrap();
        let pdp = cfr_to_cir(&cfr).unwrap().pdp();
        assert_eq!(retained_taps(&pdp, TapThreshold::default()).unwrap(), 1);
        for (a, b) in out.iter().zip(&cfr) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn uniform_power_keeps_27_of_30() {
        assert_eq!(
            retained_taps(&[1.0; 30], TapThreshold::new(0.9).unwrap()).unwrap(),
            27
        );
    }

    #[test]
    fn rejects_silent_input_and_bad_threshold() {
        assert!(tap_filter(&[Complex64::new(0.0, 0.0); 30], TapThreshold::default()).is_err());
        assert!(TapThreshold::new(0.0).is_err());
        assert!(TapThreshold::new(1.01).is_err());
        assert!(TapThreshold::new(1.0).is_ok());
    }

    #[test]
    fn filtering_reduces_error_against_clean_channel() {
        let cfg = RadioConfig::default();
        let paths = [
            PathComponent::new(1.0, 0.2, 0.0, 10.0),
            PathComponent::new(0.6, 1.0, 16e-9, -20.0),
            PathComponent::new(0.4, 2.0, 40e-9, 35.0),
            PathComponent::new(0.3, -1.0, 64e-9, 50.0),
            PathComponent::new(0.2, 0.5, 90e-9, -60.0),
        ];
        let clean = clean_cfr(&paths, &cfg);
        let clean0 = &clean[..cfg.n_sub];
        let mut improved = 0;
        for seed in 0..20 {
            let t = synth_trace(&paths, &cfg, &ImpairmentSpec::with_snr(10.0), 1, seed).unwrap();
            let noisy = t.packets[0].stream(0, 0);
            let filtered = tap_filter(noisy, TapThreshold::default()).unwrap();
            let err = |v: &[Complex64]| {
                v.iter()
                    .zip(clean0)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
            };
            if err(&filtered) < err(noisy) {
                improved += 1;
            }
        }
        assert_eq!(improved, 20);
    }

    #[test]
    fn never_adds_energy() {
        let cfg = RadioConfig::default();
        let paths = [
            PathComponent::new(1.0, 0.0, 30e-9, 0.0),
            PathComponent::new(0.5, 1.0, 300e-9, 0.0),
        ];
        for seed in 0..10 {
            let t = synth_trace(&paths, &cfg, &ImpairmentSpec::with_snr(5.0), 1, seed).unwrap();
            let v = t.packets[0].stream(1, 0);
            let out = tap_filter(v, TapThreshold::default()).unwrap();
            assert!(energy(&out) <= energy(v) + 1e-9);
            assert!(energy(&out) >= 0.9 * energy(v) - 1e-9);
        }
    }

    #[test]
    fn packet_filter_shares_one_cutoff_and_keeps_array_phase() {
        let cfg = RadioConfig::default();
        let t = synth_trace(
            &[PathComponent::new(1.0, 0.7, 0.0, 25.0)],
            &cfg,
            &ImpairmentSpec::noiseless(),
            1,
            0,
        )
        .unwrap();
        let mut p = t.packets[0].clone();
        let before: Vec<Complex64> = (0..cfg.n_rx).map(|rx| p.get(rx, 0, 7)).collect();
        assert_eq!(
            tap_filter_packet(&mut p, TapThreshold::default(), 10).unwrap(),
            10
        );
        for rx in 1..cfg.n_rx {
            let want = (before[rx] / before[0]).arg();
            let got = (p.get(rx, 0, 7) / p.get(0, 0, 7)).arg();
            assert!((want - got).abs() < 1e-9, "rx {rx}: {want} vs {got}");
        }
        // Without a floor the single tap is all that survives.
        let mut q = t.packets[0].clone();
        assert_eq!(
            tap_filter_packet(&mut q, TapThreshold::default(), 0).unwrap(),
            1
        );
        // A floor larger than the CIR is capped.
        let mut r = t.packets[0].clone();
        assert_eq!(
            tap_filter_packet(&mut r, TapThreshold::default(), 99).unwrap(),
            cfg.n_sub
        );
    }
}
