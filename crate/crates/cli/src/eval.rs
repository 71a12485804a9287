use std::io::Write;

use angloc_core::csi::CsiTrace;
use angloc_core::locator::{locate, MatchParams, RadioMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};
use crate::output::Provenance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub id: String,
    pub truth: [f64; 2],
    pub estimate: [f64; 2],
    /// Meters.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub min: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

/// One step of the empirical error CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub provenance: Option<Provenance>,
    pub params: Option<MatchParams>,
    pub points: Vec<PointResult>,
    pub mean_error: f64,
    pub percentiles: Percentiles,
    pub cdf: Vec<CdfPoint>,
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl EvalReport {
    pub fn from_points(points: Vec<PointResult>, params: Option<MatchParams>) -> CliResult<Self> {
        if points.is_empty() {
            return Err(CliError::usage("no test points to evaluate"));
        }
        if points
            .iter()
            .any(|p| !(p.error.is_finite() && p.error >= 0.0))
        {
            return Err(CliError::Core {
                context: "evaluation".into(),
                source: angloc_core::Error::Numeric("non-finite localization error".into()),
            });
        }
        let mut sorted: Vec<f64> = points.iter().map(|p| p.error).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean_error = sorted.iter().sum::<f64>() / n;
        let percentiles = Percentiles {
            min: sorted[0],
            p50: percentile(&sorted, 0.5),
            p90: percentile(&sorted, 0.9),
            max: sorted[sorted.len() - 1],
        };
        let cdf = sorted
            .iter()
            .enumerate()
            .map(|(i, &error)| CdfPoint {
                error,
                fraction: (i + 1) as f64 / n,
            })
            .collect();
        Ok(Self {
            provenance: None,
            params,
            points,
            mean_error,
            percentiles,
            cdf,
        })
    }

    /// Convenience for reports built from bare error values.
    pub fn from_errors(errors: &[f64]) -> CliResult<Self> {
        let points = errors
            .iter()
            .enumerate()
            .map(|(i, &e)| PointResult {
                id: format!("p{i}"),
                truth: [0.0, 0.0],
                estimate: [e, 0.0],
                error: e,
            })
            .collect();
        Self::from_points(points, None)
    }

    pub fn summary(&self) -> String {
        format!(
            "ME {:.2} m, median {:.2} m, 90th {:.2} m, max {:.2} m over {} points",
            self.mean_error,
            self.percentiles.p50,
            self.percentiles.p90,
            self.percentiles.max,
            self.points.len()
        )
    }

    pub fn write_cdf_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "error_m,cdf")?;
        for c in &self.cdf {
            writeln!(out, "{},{}", c.error, c.fraction)?;
        }
        Ok(())
    }
}

/// Locates every test point against `map` and reports the errors.
pub fn evaluate(
    map: &RadioMap,
    tests: &[(String, [f64; 2], Vec<CsiTrace>)],
    params: &MatchParams,
) -> CliResult<EvalReport> {
    params
        .validate(map.rps.len())
        .context("matching parameters")?;
    let points = tests
        .par_iter()
        .map(|(id, truth, traces)| {
            let est = locate(traces, map, Some(params)).context(format!("test point {id}"))?;
            let error = (est.estimate[0] - truth[0]).hypot(est.estimate[1] - truth[1]);
            Ok(PointResult {
                id: id.clone(),
                truth: *truth,
                estimate: est.estimate,
                error,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    EvalReport::from_points(points, Some(*params))
}
