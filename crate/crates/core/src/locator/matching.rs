use serde::{Deserialize, Serialize};

use super::map::{fingerprint_set, Fingerprints, RadioMap};
use crate::csi::CsiTrace;
use crate::error::{Error, Result};

/// Matching parameters for candidate selection and kernel regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchParams {
    /// Number of candidates kept by entropy distance, `M_c`.
    pub m_c: usize,
    pub w_e: f64,
    pub w_a: f64,
    pub rho_e: f64,
    pub rho_a: f64,
    /// Delay scale in matching units per second.
    pub tau_scale: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            m_c: 12,
            w_e: 0.5,
            w_a: 0.5,
            rho_e: 0.16,
            rho_a: 0.16,
            tau_scale: 1e9,
        }
    }
}

impl MatchParams {
    pub fn validate(&self, n_rps: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.w_e >= 0.0 && self.w_a >= 0.0 && (self.w_e + self.w_a - 1.0).abs() < 1e-9) {
            return bad(format!(
                "weights must be non-negative and sum to 1, got {} + {}",
                self.w_e, self.w_a
            ));
        }
        if !(self.rho_e > 0.0
            && self.rho_a > 0.0
            && self.rho_e.is_finite()
            && self.rho_a.is_finite())
        {
            return bad("kernel coefficients must be positive".into());
        }
        if self.m_c == 0 || self.m_c > n_rps {
            return bad(format!(
                "candidate count {} must lie in [1, {n_rps}]",
                self.m_c
            ));
        }
        if !(self.tau_scale >= 0.0 && self.tau_scale.is_finite()) {
            return bad("tau_scale must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Sets `w_a` and its complement.
    pub fn with_angle_weight(mut self, w_a: f64) -> Self {
        self.w_a = w_a;
        self.w_e = 1.0 - w_a;
        self
    }
}

fn check_shapes(a: &Fingerprints, b: &Fingerprints) -> Result<()> {
    if a.entropy.len() != b.entropy.len() || a.aoa.len() != b.aoa.len() {
        return Err(Error::invalid("fingerprints cover different AP sets"));
    }
    for (x, y) in a.entropy.iter().zip(&b.entropy) {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "entropy vectors differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
    }
    Ok(())
}

/// Manhattan distance summed over APs and entropy dimensions.
pub fn entropy_distance(a: &Fingerprints, b: &Fingerprints) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(a.entropy
        .iter()
        .zip(&b.entropy)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .sum())
}

/// Euclidean distance over per-AP (angle in degrees, scaled delay) pairs.
pub fn aoa_distance(a: &Fingerprints, b: &Fingerprints, tau_scale: f64) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(a.aoa
        .iter()
        .zip(&b.aoa)
        .map(|(x, y)| (x.theta - y.theta).powi(2) + (tau_scale * (x.tau - y.tau)).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Indices of the `m_c` entries with the smallest distance; ties resolved by id.
pub fn select_candidates(
    map: &RadioMap,
    online: &Fingerprints,
    m_c: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut scored: Vec<(usize, f64)> = map
        .rps
        .iter()
        .enumerate()
        .map(|(i, rp)| entropy_distance(&rp.fingerprints, online).map(|d| (i, d)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| map.rps[a.0].id.cmp(&map.rps[b.0].id))
    });
    scored.truncate(m_c);
    Ok(scored)
}

/// Both distances of one candidate to the online fingerprints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateDistances {
    pub entropy: f64,
    pub aoa: f64,
}

/// A candidate as fed to kernel regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub location: [f64; 2],
    pub distances: CandidateDistances,
}

/// Parallel arrays describe the candidates in selection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub estimate: [f64; 2],
    pub candidates: Vec<String>,
    pub locations: Vec<[f64; 2]>,
    pub distances: Vec<CandidateDistances>,
    pub kernels: Vec<f64>,
}

/// `ln K` with `K = (w_e exp(-rho_e d_e) + w_a exp(-rho_a d_a)) / (w_e + w_a)`,
/// evaluated stably for large distances. Dividing by the weight sum is a no-op
/// for validated parameters but keeps rounding in `1 - w_a` from pushing `K`
/// past one.
pub fn log_kernel(d_e: f64, d_a: f64, p: &MatchParams) -> f64 {
    let terms = [(p.w_e, p.rho_e * d_e), (p.w_a, p.rho_a * d_a)];
    let logs: Vec<f64> = terms
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, x)| w.ln() - x)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln() - (p.w_e + p.w_a).ln()
}

/// Direct evaluation of the bivariate kernel; exactly 1 at zero distances.
pub fn kernel(d_e: f64, d_a: f64, p: &MatchParams) -> f64 {
    let num = p.w_e * (-p.rho_e * d_e).exp() + p.w_a * (-p.rho_a * d_a).exp();
    num / (p.w_e + p.w_a)
}

/// Kernel-weighted centroid of candidate locations. Weights are normalized
/// in the log domain so the estimate stays defined when every kernel
/// underflows.
pub fn weighted_centroid(items: &[([f64; 2], f64)]) -> Result<[f64; 2]> {
    if items.is_empty() {
        return Err(Error::invalid("no candidates"));
    }
    let max = items
        .iter()
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sw = 0.0;
    for ([x, y], l) in items {
        let w = (l - max).exp();
        sx += w * x;
        sy += w * y;
        sw += w;
    }
    Ok([sx / sw, sy / sw])
}

pub fn kernel_regress(candidates: &[Candidate], params: &MatchParams) -> Result<LocationEstimate> {
    if candidates.is_empty() {
        return Err(Error::invalid(
            "kernel regression needs at least one candidate",
        ));
    }
    let logs: Vec<f64> = candidates
        .iter()
        .map(|c| log_kernel(c.distances.entropy, c.distances.aoa, params))
        .collect();
    let items: Vec<([f64; 2], f64)> = candidates
        .iter()
        .zip(&logs)
        .map(|(c, l)| (c.location, *l))
        .collect();
    Ok(LocationEstimate {
        estimate: weighted_centroid(&items)?,
        candidates: candidates.iter().map(|c| c.id.clone()).collect(),
        locations: candidates.iter().map(|c| c.location).collect(),
        distances: candidates.iter().map(|c| c.distances).collect(),
        kernels: candidates
            .iter()
            .map(|c| kernel(c.distances.entropy, c.distances.aoa, params))
            .collect(),
    })
}

/// Estimate from precomputed online fingerprints.
pub fn locate_fingerprints(
    online: &Fingerprints,
    map: &RadioMap,
    params: &MatchParams,
) -> Result<LocationEstimate> {
    params.validate(map.rps.len())?;
    let chosen = select_candidates(map, online, params.m_c)?;
    let cands = chosen
        .into_iter()
        .map(|(i, entropy)| {
            let rp = &map.rps[i];
            aoa_distance(&rp.fingerprints, online, params.tau_scale).map(|aoa| Candidate {
                id: rp.id.clone(),
                location: rp.location,
                distances: CandidateDistances { entropy, aoa },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    kernel_regress(&cands, params)
}

/// Full online chain for one trace per AP, given in map AP order.
pub fn locate(
    traces: &[CsiTrace],
    map: &RadioMap,
    params: Option<&MatchParams>,
) -> Result<LocationEstimate> {
    if traces.len() != map.aps.len() {
        return Err(Error::invalid(format!(
            "expected {} AP traces, got {}",
            map.aps.len(),
            traces.len()
        )));
    }
    let refs: Vec<&CsiTrace> = traces.iter().collect();
    let (online, _) = fingerprint_set(&refs, &map.pipeline)?;
    locate_fingerprints(&online, map, params.unwrap_or(&map.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoa::AoaTofFingerprint;

    fn fp(entropy: Vec<Vec<f64>>, angles: &[(f64, f64)]) -> Fingerprints {
        Fingerprints {
            entropy,
            aoa: angles
                .iter()
                .map(|&(theta, tau)| AoaTofFingerprint {
                    theta,
                    tau,
                    peak_power: 1.0,
                    n_sources: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn entropy_distance_examples() {
        let a = fp(vec![vec![0.0; 84]], &[(0.0, 0.0)]);
        let b = fp(vec![vec![0.1; 84]], &[(0.0, 0.0)]);
        assert_eq!(entropy_distance(&a, &a).unwrap(), 0.0);
        assert!((entropy_distance(&a, &b).unwrap() - 8.4).abs() < 1e-12);
        let a2 = fp(
            vec![vec![0.0; 84], vec![-1.0; 84]],
            &[(0.0, 0.0), (0.0, 0.0)],
        );
        let b2 = fp(
            vec![vec![0.1; 84], vec![-0.5; 84]],
            &[(0.0, 0.0), (0.0, 0.0)],
        );
        assert!((entropy_distance(&a2, &b2).unwrap() - (8.4 + 42.0)).abs() < 1e-9);
        assert!(entropy_distance(&a, &a2).is_err());
    }

    #[test]
    fn aoa_distance_examples() {
        let a = fp(vec![vec![]], &[(10.0, 0.0)]);
        let b = fp(vec![vec![]], &[(13.0, 4e-9)]);
        assert_eq!(aoa_distance(&a, &a, 1e9).unwrap(), 0.0);
        assert!((aoa_distance(&a, &b, 1e9).unwrap() - 5.0).abs() < 1e-9);
        assert!((aoa_distance(&a, &b, 0.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_values() {
        let p = MatchParams::default();
        assert_eq!(kernel(0.0, 0.0, &p), 1.0);
        let k = kernel(1.0, 2.0, &p);
        assert!(k > 0.0 && k < 1.0);
        assert!((k - (0.5 * (-0.16f64).exp() + 0.5 * (-0.32f64).exp())).abs() < 1e-15);
        let entropy_only = p.with_angle_weight(0.0);
        assert!((kernel(1.0, 1e6, &entropy_only) - (-0.16f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn regression_examples() {
        let p = MatchParams::default();
        let c = |id: &str, location, d: f64| Candidate {
            id: id.into(),
            location,
            distances: CandidateDistances { entropy: d, aoa: d },
        };
        let one = kernel_regress(&[c("a", [3.0, 4.0], 5.0)], &p).unwrap();
        assert_eq!(one.estimate, [3.0, 4.0]);
        let two = kernel_regress(&[c("a", [0.0, 0.0], 1.0), c("b", [2.0, 0.0], 1.0)], &p).unwrap();
        assert!((two.estimate[0] - 1.0).abs() < 1e-12 && two.estimate[1].abs() < 1e-12);
        assert_eq!(two.kernels[0], two.kernels[1]);
        // Far-away candidates still give a finite estimate.
        let far = kernel_regress(&[c("a", [0.0, 0.0], 1e5), c("b", [2.0, 0.0], 2e5)], &p).unwrap();
        assert_eq!(far.estimate, [0.0, 0.0]);
        assert!(kernel_regress(&[], &p).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(MatchParams::default().validate(64).is_ok());
        assert!(MatchParams::default().validate(5).is_err());
        assert!(MatchParams {
            w_e: 0.7,
            ..Default::default()
        }
        .validate(64)
        .is_err());
        assert!(MatchParams {
            rho_a: 0.0,
            ..Default::default()
        }
        .validate(64)
        .is_err());
    }
}
