use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ar::{fit_best_smoothed, rescale, OrderCriterion, RescaleBounds};
use super::spectrum::entropy_value;
use crate::csi::CsiTrace;
use crate::error::{Error, Result};

/// How amplitudes are mapped onto the unit support before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum RescaleMode {
    /// Min/max of each stream over the window. Only the shape of the
    /// amplitude distribution survives.
    #[default]
    PerStream,
    /// The same bounds for every stream and trace, so amplitude scale is kept.
    Fixed { lo: f64, hi: f64 },
    /// Fixed bounds derived from the whole survey when a radio map is built.
    Survey,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    /// Packets per estimation window.
    pub n_packets: usize,
    pub p_max: usize,
    pub grid_size: usize,
    pub criterion: OrderCriterion,
    pub rescale: RescaleMode,
    /// Scale on Silverman's kernel bandwidth; 0 fits the raw samples.
    pub kernel_scale: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            n_packets: 50,
            p_max: super::DEFAULT_P_MAX,
            grid_size: super::DEFAULT_GRID,
            criterion: OrderCriterion::Eef,
            rescale: RescaleMode::PerStream,
            kernel_scale: super::DEFAULT_KERNEL_SCALE,
        }
    }
}

/// Position of one fingerprint entry in the CSI tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamId {
    pub tx: usize,
    pub rx: usize,
    pub subcarrier: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyFingerprint {
    /// Entropy per stream, nats.
    pub values: Vec<f64>,
    pub stream_index: Vec<StreamId>,
    /// Positions whose amplitude was constant over the window.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<usize>,
}

impl EntropyFingerprint {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-stream fit details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamDiagnostic {
    pub index: usize,
    pub stream: StreamId,
    pub order: usize,
    pub sigma2: f64,
    pub psd_integral: f64,
    pub entropy: f64,
}

/// Fingerprint length for a link layout: every subcarrier except the two band edges.
pub fn fingerprint_len(n_tx: usize, n_rx: usize, n_sub: usize) -> usize {
    n_tx * n_rx * n_sub.saturating_sub(2)
}

pub fn fingerprint(trace: &CsiTrace, cfg: &EntropyConfig) -> Result<EntropyFingerprint> {
    Ok(fingerprint_with_diagnostics(trace, cfg)?.0)
}

/// Entropy of the amplitude distribution of every (rx, tx, subcarrier)
/// stream over the first `n_packets` packets, band-edge subcarriers excluded.
pub fn fingerprint_with_diagnostics(
    trace: &CsiTrace,
    cfg: &EntropyConfig,
) -> Result<(EntropyFingerprint, Vec<StreamDiagnostic>)> {
    if trace.packets.len() < cfg.n_packets {
        return Err(Error::Precondition(format!(
            "entropy fingerprint needs {} packets, trace has {}",
            cfg.n_packets,
            trace.packets.len()
        )));
    }
    if cfg.n_packets <= cfg.p_max {
        return Err(Error::InvalidConfig(format!(
            "n_packets ({}) must exceed p_max ({})",
            cfg.n_packets, cfg.p_max
        )));
    }
    let c = &trace.config;
    if c.n_sub < 3 {
        return Err(Error::invalid("need at least 3 subcarriers"));
    }
    let fixed = match cfg.rescale {
        RescaleMode::PerStream => None,
        RescaleMode::Fixed { lo, hi } => Some(RescaleBounds::new(lo, hi)?),
        RescaleMode::Survey => {
            return Err(Error::InvalidConfig(
                "survey rescale bounds are resolved when the radio map is built".into(),
            ))
        }
    };
    let window = &trace.packets[..cfg.n_packets];
    let mut values = Vec::with_capacity(fingerprint_len(c.n_tx, c.n_rx, c.n_sub));
    let mut stream_index = Vec::with_capacity(values.capacity());
    let mut flagged = Vec::new();
    let mut diags = Vec::with_capacity(values.capacity());
    let mut amps = vec![0.0; cfg.n_packets];
    for rx in 0..c.n_rx {
        for tx in 0..c.n_tx {
            for k in 1..c.n_sub - 1 {
                for (a, p) in amps.iter_mut().zip(window) {
                    *a = p.get(rx, tx, k).norm();
                }
                let index = values.len();
                let stream = StreamId {
                    tx,
                    rx,
                    subcarrier: k,
                };
                stream_index.push(stream);
                let fitted = fixed
                    .map_or_else(|| RescaleBounds::from_samples(&amps), Ok)
                    .and_then(|b| {
                        fit_best_smoothed(
                            &rescale(&amps, b),
                            cfg.p_max,
                            cfg.criterion,
                            cfg.kernel_scale,
                        )
                    });
                match fitted {
                    Ok(model) => {
                        let (value, psd) = entropy_value(&model, cfg.grid_size)?;
                        diags.push(StreamDiagnostic {
                            index,
                            stream,
                            order: model.order(),
                            sigma2: model.sigma2,
                            psd_integral: psd.integral(),
                            entropy: value,
                        });
                        values.push(value);
                    }
                    Err(Error::InvalidBounds { .. }) | Err(Error::Degenerate(_)) => {
                        log::warn!(
                            "stream rx{rx}/tx{tx}/k{k} has constant amplitude; entropy set to 0"
                        );
                        flagged.push(index);
                        diags.push(StreamDiagnostic {
                            index,
                            stream,
                            order: 0,
                            sigma2: 0.0,
                            psd_integral: 1.0,
                            entropy: 0.0,
                        });
                        values.push(0.0);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok((
        EntropyFingerprint {
            values,
            stream_index,
            flagged,
        },
        diags,
    ))
}

/// Writes diagnostics as CSV with a fixed header.
pub fn write_diagnostics_csv<W: Write>(diags: &[StreamDiagnostic], mut out: W) -> Result<()> {
    writeln!(
        out,
        "index,tx,rx,subcarrier,order,sigma2,psd_integral,entropy"
    )?;
    for d in diags {
        writeln!(
            out,
            "{},{},{},{},{},{:e},{:.9},{:.9}",
            d.index,
            d.stream.tx,
            d.stream.rx,
            d.stream.subcarrier,
            d.order,
            d.sigma2,
            d.psd_integral,
            d.entropy
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::RadioConfig;
    use crate::sim::{synth_trace, ImpairmentSpec, PathComponent};

    fn trace(n: usize, seed: u64) -> CsiTrace {
        let paths = [
            PathComponent::new(1.0, 0.0, 10e-9, 5.0),
            PathComponent::new(0.7, 2.0, 60e-9, -40.0),
        ];
        synth_trace(
            &paths,
            &RadioConfig::default(),
            &ImpairmentSpec::with_snr(10.0),
            n,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn default_layout_has_84_entries() {
        assert_eq!(fingerprint_len(1, 3, 30), 84);
        let (fp, diags) =
            fingerprint_with_diagnostics(&trace(50, 1), &EntropyConfig::default()).unwrap();
        assert_eq!(fp.len(), 84);
        assert_eq!(
            fp.stream_index[0],
            StreamId {
                tx: 0,
                rx: 0,
                subcarrier: 1
            }
        );
        assert_eq!(
            fp.stream_index[83],
            StreamId {
                tx: 0,
                rx: 2,
                subcarrier: 28
            }
        );
        assert!(fp.values.iter().all(|&v| v <= 1e-6));
        assert!(diags.iter().all(|d| (d.psd_integral - 1.0).abs() < 1e-6));
    }

    #[test]
    fn too_few_packets_is_a_precondition_error() {
        assert!(matches!(
            fingerprint(&trace(49, 1), &EntropyConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constant_streams_are_flagged() {
        let paths = [PathComponent::new(1.0, 0.0, 0.0, 0.0)];
        let t = synth_trace(
            &paths,
            &RadioConfig::default(),
            &ImpairmentSpec::noiseless(),
            50,
            0,
        )
        .unwrap();
        let fp = fingerprint(&t, &EntropyConfig::default()).unwrap();
        assert_eq!(fp.flagged.len(), 84);
        assert!(fp.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let (_, diags) =
            fingerprint_with_diagnostics(&trace(50, 2), &EntropyConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_diagnostics_csv(&diags, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,tx,rx,subcarrier,order,sigma2,psd_integral,entropy\n"));
        assert_eq!(text.lines().count(), 85);
    }

    fn scaled(t: &CsiTrace, g: f64) -> CsiTrace {
        let mut out = t.clone();
        for p in &mut out.packets {
            for z in p.data_mut() {
                *z *= g;
            }
        }
        out
    }

    #[test]
    fn per_stream_rescale_ignores_gain_and_fixed_bounds_do_not() {
        let t = trace(50, 3);
        let loud = scaled(&t, 2.0);
        let per = EntropyConfig::default();
        let a = fingerprint(&t, &per).unwrap().values;
        let b = fingerprint(&loud, &per).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }

        let max = t
            .packets
            .iter()
            .flat_map(|p| p.data().iter().map(|z| z.norm()))
            .fold(0.0, f64::max);
        let fixed = EntropyConfig {
            rescale: RescaleMode::Fixed {
                lo: 0.0,
                hi: 4.0 * max,
            },
            ..Default::default()
        };
        let a = fingerprint(&t, &fixed).unwrap().values;
        let b = fingerprint(&loud, &fixed).unwrap().values;
        // Doubling every amplitude doubles the spread, so entropy must grow.
        // Order selection reacts to the support fraction the samples occupy,
        // so the step is not exactly ln 2.
        let mean_gain = b.iter().zip(&a).map(|(y, x)| y - x).sum::<f64>() / a.len() as f64;
        assert!(mean_gain > 0.5 && mean_gain < 1.5, "{mean_gain}");
    }

    #[test]
    fn survey_mode_must_be_resolved_first() {
        let cfg = EntropyConfig {
            rescale: RescaleMode::Survey,
            ..Default::default()
        };
        assert!(matches!(
            fingerprint(&trace(50, 1), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn rescale_mode_json_shape() {
        let m: RescaleMode = serde_json::from_str(r#"{"mode":"fixed","lo":0.0,"hi":2.5}"#).unwrap();
        assert_eq!(m, RescaleMode::Fixed { lo: 0.0, hi: 2.5 });
        assert_eq!(
            serde_json::to_string(&RescaleMode::PerStream).unwrap(),
            r#"{"mode":"per_stream"}"#
        );
    }
}
