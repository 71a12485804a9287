use std::path::Path;

use angloc_core::locator::{MatchParams, PipelineConfig, TuningGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::read_json;

/// Contents of the `--config` file. Every section is optional; command-line
/// flags override what is set here.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub pipeline: PipelineConfig,
    pub tuning: TuningGrid,
    /// Matching parameters that replace the ones stored in a radio map.
    pub params: Option<MatchParams>,
    pub simulate: SimulateDefaults,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateDefaults {
    pub snr_db: Option<f64>,
    /// Packets per RP trace; defaults to two fingerprint windows.
    pub rp_packets: Option<usize>,
    /// Packets per test-point trace; defaults to one fingerprint window.
    pub test_packets: Option<usize>,
    /// Random test points drawn when the scene lists none.
    pub n_test_points: Option<usize>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let cfg: CliConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |e: angloc_core::Error| CliError::usage(format!("config: {e}"));
        self.pipeline.calibration.validate().map_err(bad)?;
        if self.pipeline.entropy.n_packets <= self.pipeline.entropy.p_max {
            return Err(CliError::usage(
                "config: entropy.n_packets must exceed entropy.p_max",
            ));
        }
        Ok(())
    }
}

/// Optional command-line overrides of [`MatchParams`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub m_c: Option<usize>,
    pub w_a: Option<f64>,
    pub rho_e: Option<f64>,
    pub rho_a: Option<f64>,
    pub tau_scale: Option<f64>,
}

impl ParamOverrides {
    /// Applies the overrides; setting `w_a` also sets `w_e = 1 - w_a`.
    pub fn apply(&self, mut p: MatchParams) -> MatchParams {
        if let Some(m) = self.m_c {
            p.m_c = m;
        }
        if let Some(w) = self.w_a {
            p = p.with_angle_weight(w);
        }
        if let Some(r) = self.rho_e {
            p.rho_e = r;
        }
        if let Some(r) = self.rho_a {
            p.rho_a = r;
        }
        if let Some(t) = self.tau_scale {
            p.tau_scale = t;
        }
        p
    }
}
