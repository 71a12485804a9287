use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::MatchParams;
use crate::aoa::{aoa_fingerprint, AoaConfig, AoaTofFingerprint};
use crate::csi::{CsiTrace, RadioConfig};
use crate::entropy::{fingerprint, EntropyConfig, RescaleBounds, RescaleMode, StreamId};
use crate::error::{Error, Result};
use crate::prep::{calibrate, CalibrationConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Processing applied identically to survey and online traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub calibration: CalibrationConfig,
    pub entropy: EntropyConfig,
    pub aoa: AoaConfig,
}

impl Default for PipelineConfig {
    /// Localization keeps amplitude scale: entropy bounds come from the survey.
    fn default() -> Self {
        Self {
            calibration: CalibrationConfig::default(),
            entropy: EntropyConfig {
                rescale: RescaleMode::Survey,
                ..EntropyConfig::default()
            },
            aoa: AoaConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Raw packets needed for one fingerprint window.
    pub fn raw_packets_needed(&self) -> usize {
        let window = if self.calibration.smooth_cfo {
            self.calibration.cfo_window
        } else {
            1
        };
        self.entropy.n_packets.max(self.aoa.smoothing.n_packets) * window
    }
}

/// Both fingerprints for every AP, in map AP order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprints {
    /// One entropy vector per AP, nats.
    pub entropy: Vec<Vec<f64>>,
    pub aoa: Vec<AoaTofFingerprint>,
}

impl Fingerprints {
    pub fn n_aps(&self) -> usize {
        self.entropy.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpEntry {
    pub id: String,
    pub location: [f64; 2],
    pub fingerprints: Fingerprints,
    /// Fingerprints of the survey's second half, used as pseudo-online data
    /// during cross-validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out: Option<Fingerprints>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioMap {
    pub format_version: u32,
    pub radio: RadioConfig,
    pub aps: Vec<String>,
    /// Tensor position of each entropy-vector entry.
    pub stream_index: Vec<StreamId>,
    pub pipeline: PipelineConfig,
    pub params: MatchParams,
    pub rps: Vec<RpEntry>,
}

impl RadioMap {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::format(
                0,
                format!("unsupported radio map version {}", self.format_version),
            ));
        }
        if self.rps.is_empty() {
            return Err(Error::invalid("radio map has no reference points"));
        }
        let dims = self.stream_index.len();
        let check = |fp: &Fingerprints, id: &str| -> Result<()> {
            if fp.entropy.len() != self.aps.len() || fp.aoa.len() != self.aps.len() {
                return Err(Error::invalid(format!(
                    "RP {id}: fingerprints do not cover all {} APs",
                    self.aps.len()
                )));
            }
            if fp.entropy.iter().any(|v| v.len() != dims) {
                return Err(Error::invalid(format!(
                    "RP {id}: entropy vector length differs from {dims}"
                )));
            }
            Ok(())
        };
        for rp in &self.rps {
            if !(rp.location[0].is_finite() && rp.location[1].is_finite()) {
                return Err(Error::invalid(format!("RP {}: non-finite location", rp.id)));
            }
            check(&rp.fingerprints, &rp.id)?;
            if let Some(h) = &rp.held_out {
                check(h, &rp.id)?;
            }
        }
        self.params.validate(self.rps.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: RadioMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }
}

/// Survey data of one reference point: one trace per AP.
#[derive(Debug, Clone)]
pub struct Survey {
    pub id: String,
    pub location: [f64; 2],
    /// `(ap id, trace)` pairs in any order.
    pub traces: Vec<(String, CsiTrace)>,
}

type TraceFingerprint = (Vec<f64>, AoaTofFingerprint, Vec<StreamId>);

/// Both fingerprints of an already calibrated trace.
pub fn fingerprint_calibrated(
    calibrated: &CsiTrace,
    pipeline: &PipelineConfig,
) -> Result<TraceFingerprint> {
    let ent = fingerprint(calibrated, &pipeline.entropy)?;
    let aoa = aoa_fingerprint(calibrated, &pipeline.aoa)?;
    Ok((ent.values, aoa, ent.stream_index))
}

/// Calibrated fingerprints of a raw trace.
pub fn fingerprint_trace(trace: &CsiTrace, pipeline: &PipelineConfig) -> Result<TraceFingerprint> {
    let (calibrated, _) = calibrate(trace, &pipeline.calibration)?;
    fingerprint_calibrated(&calibrated, pipeline)
}

fn collect_set(per_ap: Vec<TraceFingerprint>) -> (Fingerprints, Vec<StreamId>) {
    let mut entropy = Vec::with_capacity(per_ap.len());
    let mut aoa = Vec::with_capacity(per_ap.len());
    let mut index = Vec::new();
    for (e, a, idx) in per_ap {
        entropy.push(e);
        aoa.push(a);
        index = idx;
    }
    (Fingerprints { entropy, aoa }, index)
}

/// Fingerprints of one raw trace per AP, in `aps` order.
pub fn fingerprint_set(
    traces: &[&CsiTrace],
    pipeline: &PipelineConfig,
) -> Result<(Fingerprints, Vec<StreamId>)> {
    let per_ap = traces
        .iter()
        .map(|t| fingerprint_trace(t, pipeline))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_set(per_ap))
}

/// Headroom above the largest surveyed amplitude for survey-wide bounds.
const SURVEY_BOUND_MARGIN: f64 = 1.5;

/// Replaces [`RescaleMode::Survey`] with fixed bounds `[0, margin * max]`
/// over the entropy windows of every calibrated survey trace.
fn resolve_rescale<'a>(
    pipeline: &PipelineConfig,
    calibrated: impl Iterator<Item = &'a CsiTrace>,
) -> Result<PipelineConfig> {
    let mut resolved = pipeline.clone();
    if pipeline.entropy.rescale == RescaleMode::Survey {
        let n = pipeline.entropy.n_packets;
        let max = calibrated
            .flat_map(|t| t.packets.iter().take(n))
            .flat_map(|p| p.data().iter().map(|z| z.norm()))
            .fold(0.0, f64::max);
        let bounds = RescaleBounds::new(0.0, SURVEY_BOUND_MARGIN * max)?;
        resolved.entropy.rescale = RescaleMode::Fixed {
            lo: bounds.lo(),
            hi: bounds.hi(),
        };
    }
    Ok(resolved)
}

fn ordered_traces<'a>(survey: &'a Survey, aps: &[String]) -> Result<Vec<&'a CsiTrace>> {
    aps.iter()
        .map(|ap| {
            survey
                .traces
                .iter()
                .find(|(id, _)| id == ap)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::IncompleteSurvey {
                    rp: survey.id.clone(),
                    ap: ap.clone(),
                })
        })
        .collect()
}

/// Builds the radio map. When every survey trace holds at least two
/// fingerprint windows, the first half feeds the map and the second half is
/// kept as held-out data for tuning; otherwise the whole trace feeds the map.
pub fn build_radio_map(
    surveys: &[Survey],
    aps: &[String],
    pipeline: &PipelineConfig,
    params: MatchParams,
) -> Result<RadioMap> {
    if surveys.is_empty() {
        return Err(Error::invalid("no reference points surveyed"));
    }
    if aps.is_empty() {
        return Err(Error::invalid("no access points given"));
    }
    let ordered: Vec<Vec<&CsiTrace>> = surveys
        .iter()
        .map(|s| ordered_traces(s, aps))
        .collect::<Result<_>>()?;
    let radio = ordered[0][0].config;
    for (s, traces) in surveys.iter().zip(&ordered) {
        if traces.iter().any(|t| t.config != radio) {
            return Err(Error::invalid(format!(
                "RP {}: traces use differing radio configs",
                s.id
            )));
        }
    }
    let need = pipeline.raw_packets_needed();
    let split = ordered.iter().flatten().all(|t| t.len() >= 2 * need);
    if !split {
        log::warn!(
            "survey traces shorter than {} packets; no held-out data kept",
            2 * need
        );
    }

    // Calibrate everything first: survey-wide rescale bounds need all of it.
    let calibrated: Vec<(Vec<CsiTrace>, Option<Vec<CsiTrace>>)> = surveys
        .par_iter()
        .zip(ordered.par_iter())
        .map(|(s, traces)| {
            let cal = |t: &CsiTrace| {
                calibrate(t, &pipeline.calibration)
                    .map(|c| c.0)
                    .map_err(|e| annotate(e, &s.id))
            };
            let mut map_part = Vec::with_capacity(traces.len());
            let mut held = Vec::with_capacity(traces.len());
            for t in traces {
                if split {
                    let half = t.len() / 2;
                    map_part.push(cal(&t.slice(0..half)?)?);
                    held.push(cal(&t.slice(half..t.len())?)?);
                } else {
                    map_part.push(cal(t)?);
                }
            }
            Ok((map_part, split.then_some(held)))
        })
        .collect::<Result<_>>()?;
    let pipeline = resolve_rescale(
        pipeline,
        calibrated
            .iter()
            .flat_map(|(m, h)| m.iter().chain(h.iter().flatten())),
    )?;

    let built: Vec<(RpEntry, Vec<StreamId>)> = surveys
        .par_iter()
        .zip(calibrated.par_iter())
        .map(
            |(s, (map_part, held))| -> Result<(RpEntry, Vec<StreamId>)> {
                let set = |traces: &[CsiTrace]| -> Result<(Fingerprints, Vec<StreamId>)> {
                    let per_ap = traces
                        .iter()
                        .map(|t| fingerprint_calibrated(t, &pipeline))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| annotate(e, &s.id))?;
                    Ok(collect_set(per_ap))
                };
                let (fps, index) = set(map_part)?;
                let held_out = match held {
                    Some(h) => Some(set(h)?.0),
                    None => None,
                };
                Ok((
                    RpEntry {
                        id: s.id.clone(),
                        location: s.location,
                        fingerprints: fps,
                        held_out,
                    },
                    index,
                ))
            },
        )
        .collect::<Result<_>>()?;

    let stream_index = built[0].1.clone();
    let map = RadioMap {
        format_version: FORMAT_VERSION,
        radio,
        aps: aps.to_vec(),
        stream_index,
        pipeline,
        params,
        rps: built.into_iter().map(|(e, _)| e).collect(),
    };
    map.validate()?;
    Ok(map)
}

fn annotate(e: Error, rp: &str) -> Error {
    match e {
        Error::Precondition(m) => Error::Precondition(format!("RP {rp}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("RP {rp}: {m}")),
        other => other,
    }
}
