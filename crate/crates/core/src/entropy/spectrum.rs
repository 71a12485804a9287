use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::ar::{char_autocorr, ArModel};
use crate::error::{Error, Result};

/// Uniform grid `beta_j = -0.5 + j / n_g`, `j = 0..n_g`.
pub fn beta_grid(n_g: usize) -> Vec<f64> {
    (0..n_g).map(|j| -0.5 + j as f64 / n_g as f64).collect()
}

/// `1 / |1 + sum a_i exp(-j 2 pi i beta)|^2` on the grid.
fn inverse_denominator(model: &ArModel, n_g: usize) -> Vec<f64> {
    beta_grid(n_g)
        .into_iter()
        .map(|b| {
            let step = Complex64::from_polar(1.0, -TAU * b);
            let mut z = Complex64::new(1.0, 0.0);
            let mut a = Complex64::new(1.0, 0.0);
            for c in &model.coeffs {
                z *= step;
                a += c * z;
            }
            1.0 / a.norm_sqr()
        })
        .collect()
}

/// Gain that makes the model density's grid mean equal one.
pub fn normalizing_gain(model: &ArModel, n_g: usize) -> f64 {
    let inv = inverse_denominator(model, n_g);
    n_g as f64 / inv.iter().sum::<f64>()
}

/// Model density sampled on [`beta_grid`], with unit grid mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub values: Vec<f64>,
    pub norm_sigma2: f64,
}

impl Psd {
    /// Riemann sum over `[-0.5, 0.5)`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub fn ar_psd(model: &ArModel, n_g: usize) -> Result<Psd> {
    if n_g < 2 {
        return Err(Error::invalid("PSD grid needs at least 2 points"));
    }
    if !model.is_stable() {
        let worst = model
            .reflection
            .iter()
            .map(|k| k.norm())
            .fold(0.0, f64::max);
        return Err(Error::Unstable(worst));
    }
    let inv = inverse_denominator(model, n_g);
    let gain = n_g as f64 / inv.iter().sum::<f64>();
    let values: Vec<f64> = inv.iter().map(|v| v * gain).collect();
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numeric(
            "PSD has non-positive or non-finite values".into(),
        ));
    }
    Ok(Psd {
        values,
        norm_sigma2: gain,
    })
}

/// Entropy of a model density, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Grid integral of `-S log S`.
    pub value: f64,
    /// Cepstral form, pairing the model's own autocorrelation with the
    /// cepstrum of `log S`.
    pub cepstral: f64,
    /// Cepstral form with the samples' characteristic function in place of
    /// the model autocorrelation; absent when no samples were given.
    pub cepstral_sample: Option<f64>,
}

fn grid_entropy(psd: &Psd) -> f64 {
    -psd.values.iter().map(|&s| s * s.ln()).sum::<f64>() / psd.values.len() as f64
}

/// Cepstrum `z_k = (1/n_g) sum_j log S_j exp(j 2 pi k beta_j)` for lags
/// `k = -n_g/2 .. n_g/2 - 1`, returned in that order.
fn cepstrum(psd: &Psd) -> Vec<Complex64> {
    let n = psd.values.len();
    // With beta_j = -1/2 + j/n, exp(j 2 pi k beta_j) = (-1)^k exp(j 2 pi k j / n).
    let mut buf: Vec<Complex64> = psd
        .values
        .iter()
        .map(|s| Complex64::new(s.ln(), 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let half = n / 2;
    (0..n)
        .map(|i| {
            let k = i as isize - half as isize;
            let v = buf[k.rem_euclid(n as isize) as usize] / n as f64;
            if k.rem_euclid(2) == 1 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Model autocorrelation `R(k) = int S(beta) exp(j 2 pi k beta) d beta` for
/// `|k| < n_g / 2`, from a 16x oversampled grid; same lag order as [`cepstrum`].
pub fn model_autocorr(model: &ArModel, n_g: usize) -> Result<Vec<Complex64>> {
    let fine = ar_psd(model, 16 * n_g)?;
    let m = fine.values.len();
    let mut buf: Vec<Complex64> = fine
        .values
        .iter()
        .map(|&s| Complex64::new(s, 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    let half = n_g / 2;
    Ok((0..n_g)
        .map(|i| {
            let k = i as isize - half as isize;
            let v = buf[k.rem_euclid(m as isize) as usize] / m as f64;
            if k.rem_euclid(2) == 1 {
                -v
            } else {
                v
            }
        })
        .collect())
}

/// Grid entropy alone, with the PSD it was computed from.
pub fn entropy_value(model: &ArModel, n_g: usize) -> Result<(f64, Psd)> {
    let psd = ar_psd(model, n_g)?;
    Ok((grid_entropy(&psd), psd))
}

fn pair(r: &[Complex64], z: &[Complex64]) -> f64 {
    -r.iter()
        .zip(z)
        .map(|(a, b)| a * b.conj())
        .sum::<Complex64>()
        .re
}

/// Entropy of the model density on an `n_g` grid, with the cepstral cross-checks.
pub fn entropy(model: &ArModel, samples: Option<&[f64]>, n_g: usize) -> Result<EntropyEstimate> {
    if n_g < 4 || !n_g.is_multiple_of(2) {
        return Err(Error::invalid("entropy grid size must be even and >= 4"));
    }
    let psd = ar_psd(model, n_g)?;
    let z = cepstrum(&psd);
    let cepstral = pair(&model_autocorr(model, n_g)?, &z);
    let cepstral_sample = match samples {
        Some(x) => {
            if x.is_empty() {
                return Err(Error::Degenerate("no samples".into()));
            }
            let half = n_g / 2;
            let pos = char_autocorr(x, half);
            let r: Vec<Complex64> = (0..n_g)
                .map(|i| {
                    let k = i as isize - half as isize;
                    if k >= 0 {
                        pos[k as usize]
                    } else {
                        pos[(-k) as usize].conj()
                    }
                })
                .collect();
            Some(pair(&r, &z))
        }
        None => None,
    };
    Ok(EntropyEstimate {
        value: grid_entropy(&psd),
        cepstral,
        cepstral_sample,
    })
}
