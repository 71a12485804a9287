use serde::{Deserialize, Serialize};

use super::covariance::{smooth_multipacket, SmoothingConfig};
use super::music::{
    estimate_num_sources, find_peaks, music_spectrum, Peak, SpectrumAxes, SpectrumGrid,
};
use crate::csi::{hermitian_eig, CsiTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct AoaConfig {
    pub smoothing: SmoothingConfig,
    pub axes: SpectrumAxes,
    /// Use this many sources instead of the eigenvalue-gap estimate.
    pub fixed_sources: Option<usize>,
}

/// First-arrival angle and relative delay seen by one AP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaTofFingerprint {
    /// Degrees.
    pub theta: f64,
    /// Seconds, relative to the calibrated delay origin.
    pub tau: f64,
    pub peak_power: f64,
    pub n_sources: usize,
}

/// Everything computed on the way to a fingerprint.
#[derive(Debug, Clone)]
pub struct AoaAnalysis {
    pub eigenvalues: Vec<f64>,
    pub n_sources: usize,
    pub spectrum: SpectrumGrid,
    pub peaks: Vec<Peak>,
    pub fingerprint: AoaTofFingerprint,
}

/// The earliest peak; equal delays prefer the stronger one.
pub fn first_arrival(peaks: &[Peak]) -> Option<Peak> {
    peaks
        .iter()
        .copied()
        .min_by(|a, b| a.tau.total_cmp(&b.tau).then(b.power.total_cmp(&a.power)))
}

pub fn analyze(trace: &CsiTrace, cfg: &AoaConfig) -> Result<AoaAnalysis> {
    if trace.packets.is_empty() {
        return Err(Error::invalid("trace has no packets"));
    }
    let radio = &trace.config;
    let sm = &cfg.smoothing;
    let cov = smooth_multipacket(&trace.packets, sm, radio)?;
    let eig = hermitian_eig(&cov)?;
    let n_sources = match cfg.fixed_sources {
        Some(l) => l,
        None => estimate_num_sources(&eig.values, sm.max_sources)?,
    };
    let spectrum = music_spectrum(&cov, n_sources, radio, sm.k_sub, sm.nr_sub, &cfg.axes)?;
    let peaks = find_peaks(&spectrum, n_sources)?;
    let first = first_arrival(&peaks).ok_or(Error::NoPeak)?;
    Ok(AoaAnalysis {
        eigenvalues: eig.values,
        n_sources,
        fingerprint: AoaTofFingerprint {
            theta: first.theta,
            tau: first.tau,
            peak_power: first.power,
            n_sources,
        },
        spectrum,
        peaks,
    })
}

/// Smoothed MUSIC over the first packets of a calibrated trace, reduced to
/// the earliest resolved path.
pub fn aoa_fingerprint(trace: &CsiTrace, cfg: &AoaConfig) -> Result<AoaTofFingerprint> {
    Ok(analyze(trace, cfg)?.fingerprint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::RadioConfig;
    use crate::sim::{synth_trace, ImpairmentSpec, PathComponent};

    #[test]
    fn single_path_within_one_step() {
        let cfg = RadioConfig::default();
        for (theta, tau) in [(12.3, 31e-9), (-40.6, 77e-9)] {
            let t = synth_trace(
                &[PathComponent::new(1.0, 0.5, tau, theta)],
                &cfg,
                &ImpairmentSpec::with_snr(30.0),
                15,
                2,
            )
            .unwrap();
            let fp = aoa_fingerprint(&t, &AoaConfig::default()).unwrap();
            assert!((fp.theta - theta).abs() <= 1.0, "{fp:?}");
            assert!((fp.tau - tau).abs() <= 2e-9, "{fp:?}");
            assert_eq!(fp.n_sources, 1);
        }
    }

    #[test]
    fn earliest_path_wins_over_stronger_reflection() {
        let cfg = RadioConfig::default();
        let paths = [
            PathComponent::new(0.6, 0.0, 10e-9, -30.0),
            PathComponent::new(1.0, 2.0, 150e-9, 35.0),
        ];
        let t = synth_trace(&paths, &cfg, &ImpairmentSpec::with_snr(30.0), 15, 5).unwrap();
        let fp = aoa_fingerprint(&t, &AoaConfig::default()).unwrap();
        assert!((fp.theta + 30.0).abs() <= 3.0, "{fp:?}");
    }

    #[test]
    fn first_arrival_ties_prefer_power() {
        let p = |tau, power| Peak {
            theta: power,
            tau,
            power,
        };
        assert_eq!(
            first_arrival(&[p(5.0, 1.0), p(3.0, 2.0), p(3.0, 4.0)])
                .unwrap()
                .power,
            4.0
        );
        assert!(first_arrival(&[]).is_none());
    }
}
