//! Autoregressive density modelling of samples on `[-0.5, 0.5]`.
//!
//! Samples are read as draws from a density on the unit interval. Their
//! empirical characteristic function at integer lags,
//! `R(k) = (1/N) sum_n exp(j 2 pi k x_n)`, plays the role of an
//! autocorrelation sequence whose "spectrum" is that density. A Yule-Walker
//! fit of this sequence gives an all-pole density estimate
//! `sigma2 / |1 + sum_i a_i exp(-j 2 pi i beta)|^2`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitude range mapped onto `[-0.5, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleBounds {
    lo: f64,
    hi: f64,
}

impl RescaleBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && hi > lo {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidBounds { lo, hi })
        }
    }

    /// Min/max of the samples.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo, hi)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Affine map `x -> (x - lo) / (hi - lo) - 0.5`; values outside the bounds
/// are clamped.
pub fn rescale(samples: &[f64], bounds: RescaleBounds) -> Vec<f64> {
    let span = bounds.hi - bounds.lo;
    let mut clamped = 0usize;
    let out = samples
        .iter()
        .map(|&x| {
            let y = (x - bounds.lo) / span - 0.5;
            if !(-0.5..=0.5).contains(&y) {
                clamped += 1;
            }
            y.clamp(-0.5, 0.5)
        })
        .collect();
    if clamped > 0 {
        log::warn!(
            "{clamped} samples fell outside [{}, {}] and were clamped",
            bounds.lo,
            bounds.hi
        );
    }
    out
}

/// Empirical characteristic function `R(0..=max_lag)` of samples on the unit interval.
pub fn char_autocorr(samples: &[f64], max_lag: usize) -> Vec<Complex64> {
    let n = samples.len() as f64;
    let mut r = vec![Complex64::new(0.0, 0.0); max_lag + 1];
    for &x in samples {
        let step = Complex64::from_polar(1.0, TAU * x);
        let mut z = Complex64::new(1.0, 0.0);
        for v in r.iter_mut() {
            *v += z;
            z *= step;
        }
    }
    r.iter_mut().for_each(|v| *v /= n);
    r
}

/// Gaussian kernel width `scale * 1.06 * sd * N^(-1/5)`, Silverman's rule
/// scaled by `scale`.
pub fn kernel_bandwidth(samples: &[f64], scale: f64) -> f64 {
    let n = samples.len() as f64;
    if n < 2.0 || scale <= 0.0 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    scale * 1.06 * sd * n.powf(-0.2)
}

/// Characteristic function of the Gaussian kernel density estimate with
/// width `h`: the empirical one tapered by `exp(-2 pi^2 k^2 h^2)`.
///
/// Without the taper an order-`p` fit of `N` samples drifts toward resolving
/// the individual sample positions once `p` is a sizeable fraction of `N`.
pub fn smoothed_char_autocorr(samples: &[f64], max_lag: usize, h: f64) -> Vec<Complex64> {
    let mut r = char_autocorr(samples, max_lag);
    let c = -2.0 * (TAU / 2.0).powi(2) * h * h;
    for (k, v) in r.iter_mut().enumerate() {
        *v *= (c * (k * k) as f64).exp();
    }
    r
}

/// Result of a Levinson-Durbin run up to some order.
#[derive(Debug, Clone)]
pub struct Levinson {
    /// `coeffs[m]` holds `a_1..a_m` of the order-`m` model (`coeffs[0]` is empty).
    pub coeffs: Vec<Vec<Complex64>>,
    /// Prediction-error power for orders `0..=max_order`.
    pub errors: Vec<f64>,
    pub reflection: Vec<Complex64>,
}

impl Levinson {
    pub fn max_order(&self) -> usize {
        self.errors.len() - 1
    }
}

/// Levinson-Durbin recursion on a Hermitian-Toeplitz sequence `r[0..=p]`.
/// Stops early if a reflection coefficient reaches the unit circle.
pub fn levinson(r: &[Complex64], p: usize) -> Result<Levinson> {
    if r.len() < p + 1 {
        return Err(Error::invalid(format!(
            "need {} autocorrelation lags, got {}",
            p + 1,
            r.len()
        )));
    }
    let r0 = r[0].re;
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::Degenerate(
            "zero-lag autocorrelation is not positive".into(),
        ));
    }
    let mut coeffs = vec![Vec::new()];
    let mut errors = vec![r0];
    let mut reflection = Vec::new();
    let mut a: Vec<Complex64> = Vec::new();
    let mut e = r0;
    for m in 1..=p {
        let mut acc = r[m];
        for i in 1..m {
            acc += a[i - 1] * r[m - i];
        }
        let k = -acc / e;
        if k.norm() >= 1.0 - 1e-12 {
            log::debug!("Levinson stopped at order {m}: |k| = {}", k.norm());
            break;
        }
        let prev = a.clone();
        a.push(k);
        for i in 1..m {
            a[i - 1] = prev[i - 1] + k * prev[m - i - 1].conj();
        }
        e *= 1.0 - k.norm_sqr();
        coeffs.push(a.clone());
        errors.push(e);
        reflection.push(k);
    }
    Ok(Levinson {
        coeffs,
        errors,
        reflection,
    })
}

/// All-pole density model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub coeffs: Vec<Complex64>,
    /// Prediction-error power from the recursion.
    pub sigma2: f64,
    /// Gain that makes the density integrate to one on the default grid.
    pub norm_sigma2: f64,
    pub reflection: Vec<Complex64>,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Builds a model from coefficients, normalizing on the default grid.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        let reflection = step_down(&coeffs)?;
        let mut m = Self {
            coeffs,
            sigma2: 1.0,
            norm_sigma2: 1.0,
            reflection,
        };
        m.norm_sigma2 = super::spectrum::normalizing_gain(&m, super::DEFAULT_GRID);
        m.sigma2 = m.norm_sigma2;
        Ok(m)
    }

    pub fn is_stable(&self) -> bool {
        self.reflection.iter().all(|k| k.norm() < 1.0)
    }
}

/// Reflection coefficients of `1 + sum a_i z^-i` by the backward
/// Levinson recursion; fails if any reaches the unit circle.
pub fn step_down(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut a = coeffs.to_vec();
    let mut ks = vec![Complex64::new(0.0, 0.0); a.len()];
    for m in (1..=a.len()).rev() {
        let k = a[m - 1];
        if !(k.norm() < 1.0) {
            return Err(Error::Unstable(k.norm()));
        }
        ks[m - 1] = k;
        let denom = 1.0 - k.norm_sqr();
        let prev: Vec<Complex64> = (1..m)
            .map(|i| (a[i - 1] - k * a[m - i - 1].conj()) / denom)
            .collect();
        a = prev;
    }
    Ok(ks)
}

/// Fits an order-`p` model to rescaled samples.
pub fn fit_ar(samples: &[f64], p: usize) -> Result<ArModel> {
    if p == 0 {
        return Err(Error::invalid("AR order must be >= 1"));
    }
    if samples.len() <= p {
        return Err(Error::invalid(format!(
            "{} samples cannot support order {p}",
            samples.len()
        )));
    }
    check_spread(samples)?;
    let lev = levinson(&char_autocorr(samples, p), p)?;
    model_from(&lev, p.min(lev.max_order()))
}

fn check_spread(samples: &[f64]) -> Result<()> {
    let first = samples.first().copied().unwrap_or(0.0);
    if samples.iter().all(|&x| x == first) {
        return Err(Error::Degenerate("samples are constant".into()));
    }
    Ok(())
}

fn model_from(lev: &Levinson, order: usize) -> Result<ArModel> {
    let coeffs = lev.coeffs[order].clone();
    let mut m = ArModel {
        reflection: lev.reflection[..order].to_vec(),
        coeffs,
        sigma2: lev.errors[order],
        norm_sigma2: lev.errors[order],
    };
    m.norm_sigma2 = super::spectrum::normalizing_gain(&m, super::DEFAULT_GRID);
    Ok(m)
}

/// Order-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderCriterion {
    /// Exponentially embedded family.
    #[default]
    Eef,
    /// Akaike information criterion, for sensitivity checks.
    Aic,
}

/// EEF score of each order `1..=p` given the prediction-error sequence.
pub fn eef_scores(errors: &[f64], n: usize) -> Vec<f64> {
    let n = n as f64;
    (1..errors.len())
        .map(|k| {
            let xi = n * (errors[0] / errors[k]).ln();
            let k = k as f64;
            if xi > k {
                xi - k * ((xi / k).ln() + 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

fn pick_order(errors: &[f64], n: usize, criterion: OrderCriterion) -> usize {
    if errors.len() < 2 {
        return 1;
    }
    match criterion {
        OrderCriterion::Eef => {
            let scores = eef_scores(errors, n);
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if *s > scores[best] {
                    best = i;
                }
            }
            best + 1
        }
        OrderCriterion::Aic => {
            let aic = |k: usize| n as f64 * errors[k].ln() + 2.0 * k as f64;
            (1..errors.len())
                .min_by(|&a, &b| aic(a).total_cmp(&aic(b)))
                .unwrap_or(1)
        }
    }
}

/// Chooses the model order in `1..=p_max`. Ties go to the smaller order.
pub fn select_order(samples: &[f64], p_max: usize, criterion: OrderCriterion) -> Result<usize> {
    Ok(fit_best(samples, p_max, criterion)?.order())
}

/// Order selection and fit in one Levinson pass.
pub fn fit_best(samples: &[f64], p_max: usize, criterion: OrderCriterion) -> Result<ArModel> {
    fit_best_smoothed(samples, p_max, criterion, 0.0)
}

/// [`fit_best`] on the kernel-smoothed characteristic function, with the
/// bandwidth from [`kernel_bandwidth`]. A zero `kernel_scale` disables it.
pub fn fit_best_smoothed(
    samples: &[f64],
    p_max: usize,
    criterion: OrderCriterion,
    kernel_scale: f64,
) -> Result<ArModel> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be >= 1"));
    }
    if samples.len() <= p_max {
        return Err(Error::invalid(format!(
            "{} samples cannot support order {p_max}",
            samples.len()
        )));
    }
    check_spread(samples)?;
    let h = kernel_bandwidth(samples, kernel_scale);
    let lev = levinson(&smoothed_char_autocorr(samples, p_max, h), p_max)?;
    if lev.max_order() == 0 {
        return Err(Error::Degenerate(
            "first reflection coefficient is on the unit circle".into(),
        ));
    }
    let order = pick_order(&lev.errors, samples.len(), criterion);
    model_from(&lev, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn rescale_endpoints_and_midpoint() {
        let b = RescaleBounds::new(2.0, 6.0).unwrap();
        assert_eq!(rescale(&[2.0, 6.0, 4.0], b), vec![-0.5, 0.5, 0.0]);
        assert_eq!(rescale(&[10.0], b), vec![0.5]);
    }

    #[test]
    fn degenerate_bounds() {
        assert!(matches!(
            RescaleBounds::from_samples(&[1.0, 1.0, 1.0]),
            Err(Error::InvalidBounds { .. })
        ));
        assert!(RescaleBounds::new(1.0, 0.0).is_err());
    }

    #[test]
    fn ar1_from_exact_autocorrelation() {
        let r = real(&[1.0, 0.5, 0.25, 0.125]);
        let lev = levinson(&r, 1).unwrap();
        assert!((lev.coeffs[1][0] - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        assert!((lev.errors[1] - 0.75).abs() < 1e-15);
        // Higher orders add nothing for an exact AR(1) sequence.
        let lev = levinson(&r, 3).unwrap();
        assert!(lev.coeffs[3][1].norm() < 1e-15 && lev.coeffs[3][2].norm() < 1e-15);
    }

    #[test]
    fn step_down_inverts_levinson() {
        let r = real(&[1.0, 0.6, 0.1, -0.2]);
        let lev = levinson(&r, 3).unwrap();
        let ks = step_down(&lev.coeffs[3]).unwrap();
        for (a, b) in ks.iter().zip(&lev.reflection) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(step_down(&[Complex64::new(0.0, 0.0), Complex64::new(1.2, 0.0)]).is_err());
    }

    #[test]
    fn uniform_samples_give_small_coefficients() {
        let mut ok = 0;
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..5000).map(|_| rng.random_range(-0.5..0.5)).collect();
            let m = fit_ar(&x, 4).unwrap();
            if m.coeffs.iter().all(|a| a.norm() < 0.05) {
                ok += 1;
            }
        }
        assert!(ok >= 38, "{ok}/40");
    }

    #[test]
    fn prediction_error_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..100)
                .map(|_| rng.random_range(-0.5f64..0.5).powi(3) * 4.0)
                .collect();
            let lev = levinson(&char_autocorr(&x, 20), 20).unwrap();
            assert!(lev.errors.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn eef_and_order_edges() {
        assert_eq!(eef_scores(&[1.0, 1.0], 100), vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-0.5..0.5)).collect();
        assert_eq!(select_order(&x, 1, OrderCriterion::Eef).unwrap(), 1);
        assert!(fit_ar(&[0.1; 10], 2).is_err());
        assert!(fit_ar(&[0.1, 0.2], 2).is_err());
    }

    #[test]
    fn zero_width_taper_is_the_raw_characteristic_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(0.2..0.6)).collect();
        assert_eq!(smoothed_char_autocorr(&x, 10, 0.0), char_autocorr(&x, 10));
        let h = kernel_bandwidth(&x, 0.5);
        assert!(h > 0.0);
        let raw = char_autocorr(&x, 10);
        let tapered = smoothed_char_autocorr(&x, 10, h);
        assert!((tapered[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for (a, b) in tapered.iter().zip(&raw).skip(1) {
            assert!(a.norm() < b.norm());
        }
        let plain = fit_best(&x, 8, OrderCriterion::Eef).unwrap();
        let same = fit_best_smoothed(&x, 8, OrderCriterion::Eef, 0.0).unwrap();
        assert_eq!(plain.coeffs, same.coeffs);
    }

    #[test]
    fn bandwidth_follows_silverman() {
        assert_eq!(kernel_bandwidth(&[0.5], 1.0), 0.0);
        assert_eq!(kernel_bandwidth(&[0.1, 0.3], 0.0), 0.0);
        // sd of {0, 1} with n - 1 normalization is 1/sqrt(2)
        let want = 1.06 * 0.5f64.sqrt() * 2f64.powf(-0.2);
        assert!((kernel_bandwidth(&[0.0, 1.0], 1.0) - want).abs() < 1e-12);
    }
}
