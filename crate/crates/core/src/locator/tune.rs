use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::RadioMap;
use super::matching::{aoa_distance, entropy_distance, log_kernel, MatchParams};
use crate::error::{Error, Result};

/// Candidate values searched by [`loocv_tune`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningGrid {
    pub w_a: Vec<f64>,
    pub rho_e: Vec<f64>,
    pub rho_a: Vec<f64>,
    /// Largest candidate count tried; capped by the number of other RPs.
    pub max_candidates: usize,
    pub tau_scale: f64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        let rho: Vec<f64> = (0..=8).map(|i| 0.01 * f64::powi(2.0, i)).collect();
        Self {
            w_a: (0..=10).map(|i| i as f64 / 10.0).collect(),
            rho_e: rho.clone(),
            rho_a: rho,
            max_candidates: 20,
            tau_scale: 1e9,
        }
    }
}

impl TuningGrid {
    /// The same search with the angle term switched off.
    pub fn entropy_only() -> Self {
        Self {
            w_a: vec![0.0],
            rho_a: vec![0.01],
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.w_a.is_empty()
            || self.rho_e.is_empty()
            || self.rho_a.is_empty()
            || self.max_candidates == 0
        {
            return Err(Error::InvalidConfig("tuning grid has an empty axis".into()));
        }
        if self.w_a.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidConfig(
                "angle weights must lie in [0, 1]".into(),
            ));
        }
        if self
            .rho_e
            .iter()
            .chain(&self.rho_a)
            .any(|r| !(*r > 0.0 && r.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "kernel coefficients must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub params: MatchParams,
    /// Mean leave-one-out error at `params`, meters.
    pub mean_error: f64,
    pub evaluated: usize,
}

/// Per held-out RP: other RPs in candidate order with both distances.
struct Neighbours {
    truth: [f64; 2],
    ranked: Vec<(usize, f64, f64)>,
}

fn neighbours(map: &RadioMap, tau_scale: f64, keep: usize) -> Result<Vec<Neighbours>> {
    map.rps
        .par_iter()
        .enumerate()
        .map(|(m, rp)| {
            let online = rp.held_out.as_ref().ok_or_else(|| {
                Error::Precondition(format!(
                    "RP {} has no held-out window; survey traces are too short",
                    rp.id
                ))
            })?;
            let mut ranked = Vec::with_capacity(map.rps.len() - 1);
            for (j, other) in map.rps.iter().enumerate() {
                if j == m {
                    continue;
                }
                let d_e = entropy_distance(&other.fingerprints, online)?;
                let d_a = aoa_distance(&other.fingerprints, online, tau_scale)?;
                ranked.push((j, d_e, d_a));
            }
            ranked.sort_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then_with(|| map.rps[a.0].id.cmp(&map.rps[b.0].id))
            });
            ranked.truncate(keep);
            Ok(Neighbours {
                truth: rp.location,
                ranked,
            })
        })
        .collect()
}

/// Errors for every candidate count `1..=keep` at one kernel setting.
fn errors_by_count(map: &RadioMap, nb: &Neighbours, p: &MatchParams) -> Vec<f64> {
    // Streaming log-domain centroid: rescale the running sums whenever a new
    // maximum log-weight appears.
    let mut max = f64::NEG_INFINITY;
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    let mut out = Vec::with_capacity(nb.ranked.len());
    for &(j, d_e, d_a) in &nb.ranked {
        let l = log_kernel(d_e, d_a, p);
        if l > max {
            let s = (max - l).exp();
            sx *= s;
            sy *= s;
            sw *= s;
            max = l;
        }
        let w = (l - max).exp();
        let [x, y] = map.rps[j].location;
        sx += w * x;
        sy += w * y;
        sw += w;
        out.push(((sx / sw - nb.truth[0]).powi(2) + (sy / sw - nb.truth[1]).powi(2)).sqrt());
    }
    out
}

/// Leave-one-out grid search. Each RP's held-out fingerprints are located
/// against the map without that RP; the objective is the mean error.
/// Ties keep the smaller candidate count, then the larger entropy weight.
pub fn loocv_tune(map: &RadioMap, grid: &TuningGrid) -> Result<TuningResult> {
    grid.validate()?;
    if map.rps.len() < 2 {
        return Err(Error::Precondition(
            "leave-one-out tuning needs at least two RPs".into(),
        ));
    }
    let keep = grid.max_candidates.min(map.rps.len() - 1);
    let nbs = neighbours(map, grid.tau_scale, keep)?;

    let mut kernels = Vec::new();
    for &w_a in &grid.w_a {
        for &rho_e in &grid.rho_e {
            for &rho_a in &grid.rho_a {
                kernels.push(MatchParams {
                    m_c: 1,
                    w_e: 1.0 - w_a,
                    w_a,
                    rho_e,
                    rho_a,
                    tau_scale: grid.tau_scale,
                });
            }
        }
    }
    // mean error per (kernel setting, candidate count)
    let table: Vec<Vec<f64>> = kernels
        .par_iter()
        .map(|p| {
            let mut sum = vec![0.0; keep];
            for nb in &nbs {
                for (s, e) in sum.iter_mut().zip(errors_by_count(map, nb, p)) {
                    *s += e;
                }
            }
            sum.iter().map(|s| s / nbs.len() as f64).collect()
        })
        .collect();

    let mut best: Option<(usize, usize, f64)> = None;
    for c in 0..keep {
        for (k, row) in table.iter().enumerate() {
            if best.is_none_or(|(_, _, e)| row[c] < e) {
                best = Some((k, c, row[c]));
            }
        }
    }
    let (k, c, mean_error) = best.expect("grid is non-empty");
    Ok(TuningResult {
        params: MatchParams {
            m_c: c + 1,
            ..kernels[k]
        },
        mean_error,
        evaluated: kernels.len() * keep,
    })
}
