//! Monte Carlo studies on synthetic channels: entropy spread versus packet
//! count, AoA error versus packet count, and the smoothing-length sweep.

use std::io::Write;
use std::ops::Range;

use angloc_core::aoa::{analyze, AoaConfig, SmoothingConfig};
use angloc_core::csi::RadioConfig;
use angloc_core::entropy::{fingerprint, EntropyConfig};
use angloc_core::sim::{synth_trace, ImpairmentSpec, PathComponent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};

/// Static two-path channel used for the entropy packet-count study.
pub fn static_channel() -> Vec<PathComponent> {
    vec![
        PathComponent::new(1.0, 0.3, 15e-9, 12.0),
        PathComponent::new(0.5, 2.1, 70e-9, -38.0),
    ]
}

/// Near line-of-sight scene: a dominant direct path and three weaker
/// reflections.
pub fn los_scene() -> Vec<PathComponent> {
    vec![
        PathComponent::new(1.0, 0.4, 10e-9, 20.0),
        PathComponent::new(0.35, 1.9, 45e-9, -35.0),
        PathComponent::new(0.25, -2.2, 80e-9, 50.0),
        PathComponent::new(0.2, 0.9, 120e-9, -10.0),
    ]
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyPacketsRow {
    pub n_packets: usize,
    /// Mean entropy over streams and seeds, nats.
    pub mean_entropy: f64,
    /// Median over streams of the across-seed standard deviation, nats.
    pub std_entropy: f64,
}

pub const ENTROPY_PACKET_COUNTS: [usize; 9] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000];

/// Spread of entropy estimates across independent noise draws on a static
/// channel. Each seed's trace is generated once; shorter windows are its
/// prefixes.
pub fn entropy_packets(
    counts: &[usize],
    seeds: Range<u64>,
    snr_db: f64,
    base: &EntropyConfig,
) -> CliResult<Vec<EntropyPacketsRow>> {
    let n_seeds = seeds.clone().count();
    if n_seeds < 2 || counts.is_empty() {
        return Err(CliError::usage("need >= 2 seeds and at least one count"));
    }
    let radio = RadioConfig::default();
    let longest = *counts.iter().max().expect("non-empty");
    let per_seed: Vec<Vec<Vec<f64>>> = seeds
        .into_par_iter()
        .map(|seed| {
            let trace = synth_trace(
                &static_channel(),
                &radio,
                &ImpairmentSpec::with_snr(snr_db),
                longest,
                seed,
            )
            .context("static channel")?;
            counts
                .iter()
                .map(|&n| {
                    let cfg = EntropyConfig {
                        n_packets: n,
                        p_max: base.p_max.min(n - 1).max(1),
                        ..*base
                    };
                    Ok(fingerprint(&trace, &cfg)
                        .context(format!("entropy at {n} packets"))?
                        .values)
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;

    Ok(counts
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let streams = per_seed[0][c].len();
            let mut stds: Vec<f64> = (0..streams)
                .map(|s| sample_std(&per_seed.iter().map(|v| v[c][s]).collect::<Vec<_>>()))
                .collect();
            let mean_entropy =
                per_seed.iter().flat_map(|v| &v[c]).sum::<f64>() / (n_seeds * streams) as f64;
            EntropyPacketsRow {
                n_packets: n,
                mean_entropy,
                std_entropy: median(&mut stds),
            }
        })
        .collect())
}

/// Absolute AoA errors, degrees, for random single-path scenes with
/// `theta` uniform in [-60, 60] degrees.
pub fn aoa_errors(
    n_packets: usize,
    snr_db: f64,
    seeds: Range<u64>,
    smoothing: SmoothingConfig,
) -> CliResult<Vec<f64>> {
    let radio = RadioConfig::default();
    let cfg = AoaConfig {
        smoothing: SmoothingConfig {
            n_packets,
            ..smoothing
        },
        ..AoaConfig::default()
    };
    seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let theta = rng.random_range(-60.0..=60.0);
            let tau = rng.random_range(0.0..100e-9);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let t = synth_trace(
                &[PathComponent::new(1.0, phi, tau, theta)],
                &radio,
                &ImpairmentSpec::with_snr(snr_db),
                n_packets,
                rng.random(),
            )
            .context("single-path scene")?;
            let fp = analyze(&t, &cfg).context("AoA")?.fingerprint;
            Ok((fp.theta - theta).abs())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaPacketsRow {
    pub n_packets: usize,
    pub mean_error_deg: f64,
    pub median_error_deg: f64,
}

pub const AOA_PACKET_COUNTS: [usize; 4] = [5, 10, 15, 40];

pub fn aoa_packets(
    counts: &[usize],
    seeds: Range<u64>,
    snr_db: f64,
) -> CliResult<Vec<AoaPacketsRow>> {
    counts
        .iter()
        .map(|&n| {
            let mut e = aoa_errors(n, snr_db, seeds.clone(), SmoothingConfig::default())?;
            Ok(AoaPacketsRow {
                n_packets: n,
                mean_error_deg: e.iter().sum::<f64>() / e.len() as f64,
                median_error_deg: median(&mut e),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Subarray dimension `K' * N'_r`.
    pub length: usize,
    pub k_sub: usize,
    /// Whether the dimension exceeds the assumed indoor path count.
    pub exceeds_path_count: bool,
    /// Mean over seeds of peak minus median of the pseudo-spectrum, dB.
    pub sharpness_db: f64,
    /// Seeds whose peak list misses the direct path.
    pub lost_peak: usize,
    pub seeds: usize,
}

/// Smoothing lengths swept by default (all even, since `N'_r = 2`).
pub const SWEEP_LENGTHS: [usize; 7] = [8, 12, 16, 20, 24, 28, 30];
/// Paths a subarray must be able to separate in a typical room.
pub const INDOOR_PATH_COUNT: usize = 10;

/// Direct-path tolerance when checking whether a peak list contains it.
const PEAK_TOL_DEG: f64 = 3.0;
const PEAK_TOL_S: f64 = 10e-9;

/// Pseudo-spectrum sharpness on [`los_scene`] for each smoothing length.
/// The source count is fixed to the scene's path count so that only the
/// subarray size varies. Lengths at or below [`INDOOR_PATH_COUNT`] are
/// flagged and evaluated with the source cap lowered to fit.
pub fn smoothing_sweep(
    lengths: &[usize],
    seeds: Range<u64>,
    snr_db: f64,
    n_packets: usize,
) -> CliResult<Vec<SweepRow>> {
    let n_seeds = seeds.clone().count();
    let radio = RadioConfig::default();
    let paths = los_scene();
    let direct = paths[0];
    lengths
        .iter()
        .map(|&length| {
            if length % 2 != 0 || length < 4 {
                return Err(CliError::usage(format!(
                    "smoothing length {length} must be even and >= 4"
                )));
            }
            let k_sub = length / 2;
            let cfg = AoaConfig {
                smoothing: SmoothingConfig {
                    k_sub,
                    n_packets,
                    max_sources: INDOOR_PATH_COUNT.min(length - 1),
                    ..SmoothingConfig::default()
                },
                fixed_sources: Some(paths.len()),
                ..AoaConfig::default()
            };
            let per_seed = seeds
                .clone()
                .into_par_iter()
                .map(|seed| {
                    let t = synth_trace(
                        &paths,
                        &radio,
                        &ImpairmentSpec::with_snr(snr_db),
                        n_packets,
                        seed,
                    )
                    .context("LoS scene")?;
                    let a = analyze(&t, &cfg).context(format!("length {length}"))?;
                    let mut vals: Vec<f64> = a.spectrum.values.iter().copied().collect();
                    let peak = vals.iter().copied().fold(f64::MIN, f64::max);
                    let sharp = 10.0 * (peak / median(&mut vals)).log10();
                    let found = a.peaks.iter().any(|p| {
                        (p.theta - direct.theta).abs() <= PEAK_TOL_DEG
                            && (p.tau - direct.tau).abs() <= PEAK_TOL_S
                    });
                    Ok((sharp, found))
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(SweepRow {
                length,
                k_sub,
                exceeds_path_count: length > INDOOR_PATH_COUNT,
                sharpness_db: per_seed.iter().map(|s| s.0).sum::<f64>() / n_seeds as f64,
                lost_peak: per_seed.iter().filter(|s| !s.1).count(),
                seeds: n_seeds,
            })
        })
        .collect()
}

pub fn write_entropy_csv<W: Write>(rows: &[EntropyPacketsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_packets,mean_entropy,std_entropy")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.n_packets, r.mean_entropy, r.std_entropy)?;
    }
    Ok(())
}

pub fn write_aoa_csv<W: Write>(rows: &[AoaPacketsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_packets,mean_error_deg,median_error_deg")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.n_packets, r.mean_error_deg, r.median_error_deg
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "length,k_sub,exceeds_path_count,sharpness_db,lost_peak,seeds"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.length, r.k_sub, r.exceeds_path_count, r.sharpness_db, r.lost_peak, r.seeds
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_are_fixed() {
        let mut buf = Vec::new();
        write_sweep_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "length,k_sub,exceeds_path_count,sharpness_db,lost_peak,seeds\n"
        );
    }

    #[test]
    fn odd_lengths_are_rejected() {
        assert!(smoothing_sweep(&[15], 0..1, 20.0, 5).is_err());
    }

    #[test]
    fn aoa_study_is_deterministic() {
        let a = aoa_errors(5, 20.0, 0..4, SmoothingConfig::default()).unwrap();
        let b = aoa_errors(5, 20.0, 0..4, SmoothingConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
