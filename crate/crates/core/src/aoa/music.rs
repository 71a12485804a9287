use std::f64::consts::TAU;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csi::{hermitian_eig, RadioConfig};
use crate::error::{Error, Result};

/// Floor on the MUSIC denominator relative to `|a|^2`, so exact
/// steering/noise-subspace orthogonality yields a large finite value.
const DENOM_FLOOR: f64 = 1e-12;

/// Joint steering vector over a subarray of `nr_sub` antennas and `k_sub`
/// subcarriers; entry `m * k_sub + k` carries antenna `m`, subcarrier `k`.
pub fn steering(
    theta_deg: f64,
    tau: f64,
    cfg: &RadioConfig,
    k_sub: usize,
    nr_sub: usize,
) -> Vec<Complex64> {
    let ant = -TAU * cfg.f_c * cfg.d * theta_deg.to_radians().sin() / cfg.c;
    let sub = -TAU * cfg.f_delta * tau;
    let mut out = Vec::with_capacity(k_sub * nr_sub);
    for m in 0..nr_sub {
        for k in 0..k_sub {
            out.push(Complex64::from_polar(1.0, ant * m as f64 + sub * k as f64));
        }
    }
    out
}

/// Search axes of the pseudo-spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAxes {
    /// Degrees.
    pub theta: Vec<f64>,
    /// Seconds.
    pub tau: Vec<f64>,
}

impl SpectrumAxes {
    /// Inclusive uniform axes.
    pub fn uniform(theta: (f64, f64, f64), tau: (f64, f64, f64)) -> Result<Self> {
        let axis = |(lo, hi, step): (f64, f64, f64)| -> Result<Vec<f64>> {
            if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "bad axis [{lo}, {hi}] step {step}"
                )));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| lo + i as f64 * step).collect())
        };
        Ok(Self {
            theta: axis(theta)?,
            tau: axis(tau)?,
        })
    }
}

impl Default for SpectrumAxes {
    /// Angles -90..=90 degrees in 1 degree steps; delays -50..=450 ns in 2 ns steps.
    fn default() -> Self {
        Self::uniform((-90.0, 90.0, 1.0), (-50e-9, 450e-9, 2e-9)).expect("static axes")
    }
}

/// Pseudo-spectrum values indexed `[theta, tau]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub theta_axis: Vec<f64>,
    pub tau_axis: Vec<f64>,
    pub values: Array2<f64>,
}

impl SpectrumGrid {
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for ((i, j), v) in self.values.indexed_iter() {
            if *v > self.values[best] {
                best = (i, j);
            }
        }
        best
    }

    /// CSV of `theta_deg,tau_ns,power_db` rows, theta-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theta_deg,tau_ns,power_db")?;
        for (i, th) in self.theta_axis.iter().enumerate() {
            for (j, tau) in self.tau_axis.iter().enumerate() {
                writeln!(
                    out,
                    "{th},{:.3},{:.6}",
                    tau * 1e9,
                    10.0 * self.values[[i, j]].log10()
                )?;
            }
        }
        Ok(())
    }
}

/// Number of dominant sources from the largest ratio of consecutive
/// eigenvalues among the first `min(D - 1, cap)` positions.
pub fn estimate_num_sources(eigenvalues: &[f64], cap: usize) -> Result<usize> {
    if eigenvalues.len() < 2 {
        return Err(Error::invalid("need at least 2 eigenvalues"));
    }
    let top = eigenvalues[0].max(f64::MIN_POSITIVE);
    let floor = 1e-9 * top;
    let limit = (eigenvalues.len() - 1).min(cap.max(1));
    let mut best = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for i in 1..=limit {
        let ratio = eigenvalues[i - 1].max(floor) / eigenvalues[i].max(floor);
        if ratio > best_ratio {
            best_ratio = ratio;
            best = i;
        }
    }
    Ok(best)
}

/// MUSIC pseudo-spectrum `|a|^2 / |E_N^H a|^2` over the axes, with the noise
/// subspace spanned by all but the `n_sources` largest eigenvectors.
pub fn music_spectrum(
    cov: &Array2<Complex64>,
    n_sources: usize,
    cfg: &RadioConfig,
    k_sub: usize,
    nr_sub: usize,
    axes: &SpectrumAxes,
) -> Result<SpectrumGrid> {
    let d = cov.nrows();
    if d != k_sub * nr_sub {
        return Err(Error::invalid(format!(
            "covariance is {d}x{d}, subarray is {k_sub}x{nr_sub}"
        )));
    }
    if n_sources == 0 || n_sources >= d {
        return Err(Error::invalid(format!(
            "source count {n_sources} must lie in [1, {d})"
        )));
    }
    if axes.theta.is_empty() || axes.tau.is_empty() {
        return Err(Error::invalid("empty search axes"));
    }
    let eig = hermitian_eig(cov)?;
    let noise: Vec<usize> = (n_sources..d).collect();

    // Partial products over subcarriers: b[tau][m][j] = sum_k conj(E[m K' + k, j]) Omega_k(tau).
    let n_noise = noise.len();
    let mut partial = vec![Complex64::new(0.0, 0.0); axes.tau.len() * nr_sub * n_noise];
    for (t, &tau) in axes.tau.iter().enumerate() {
        let step = Complex64::from_polar(1.0, -TAU * cfg.f_delta * tau);
        for m in 0..nr_sub {
            for (jj, &j) in noise.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut w = Complex64::new(1.0, 0.0);
                for k in 0..k_sub {
                    acc += eig.vectors[[m * k_sub + k, j]].conj() * w;
                    w *= step;
                }
                partial[(t * nr_sub + m) * n_noise + jj] = acc;
            }
        }
    }
    let norm_a = d as f64;
    let ant_unit = -TAU * cfg.f_c * cfg.d / cfg.c;
    let mut values = Array2::<f64>::zeros((axes.theta.len(), axes.tau.len()));
    let mut psi = vec![Complex64::new(0.0, 0.0); nr_sub];
    for (i, &theta) in axes.theta.iter().enumerate() {
        let s = theta.to_radians().sin();
        for (m, p) in psi.iter_mut().enumerate() {
            *p = Complex64::from_polar(1.0, ant_unit * s * m as f64);
        }
        for t in 0..axes.tau.len() {
            let mut denom = 0.0;
            for jj in 0..n_noise {
                let mut c = Complex64::new(0.0, 0.0);
                for (m, p) in psi.iter().enumerate() {
                    c += p * partial[(t * nr_sub + m) * n_noise + jj];
                }
                denom += c.norm_sqr();
            }
            values[[i, t]] = norm_a / denom.max(DENOM_FLOOR * norm_a);
        }
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numeric(
            "pseudo-spectrum has non-finite values".into(),
        ));
    }
    Ok(SpectrumGrid {
        theta_axis: axes.theta.clone(),
        tau_axis: axes.tau.clone(),
        values,
    })
}

/// A pseudo-spectrum peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub theta: f64,
    pub tau: f64,
    pub power: f64,
}

/// Local maxima over the 8-neighbourhood, strongest first, at most `limit`.
///
/// On plateaus only the first cell in row-major order qualifies: a cell
/// must beat earlier neighbours strictly, match or beat later ones, and
/// strictly beat at least one neighbour.
pub fn find_peaks(grid: &SpectrumGrid, limit: usize) -> Result<Vec<Peak>> {
    let (n_t, n_d) = grid.values.dim();
    let v = &grid.values;
    let mut peaks = Vec::new();
    for i in 0..n_t {
        for j in 0..n_d {
            let here = v[[i, j]];
            let mut is_peak = true;
            let mut beats_one = false;
            'nb: for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni >= n_t as isize || nj >= n_d as isize {
                        continue;
                    }
                    let other = v[[ni as usize, nj as usize]];
                    let earlier = (di, dj) < (0, 0);
                    if other > here || (earlier && other == here) {
                        is_peak = false;
                        break 'nb;
                    }
                    if here > other {
                        beats_one = true;
                    }
                }
            }
            if is_peak && beats_one {
                peaks.push(Peak {
                    theta: grid.theta_axis[i],
                    tau: grid.tau_axis[j],
                    power: here,
                });
            }
        }
    }
    if peaks.is_empty() {
        return Err(Error::NoPeak);
    }
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power));
    peaks.truncate(limit.max(1));
    Ok(peaks)
}
