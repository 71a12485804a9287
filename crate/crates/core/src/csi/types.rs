use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

/// Radio front-end geometry shared by every packet of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub n_rx: usize,
    pub n_tx: usize,
    pub n_sub: usize,
    /// Carrier frequency, Hz.
    pub f_c: f64,
    /// Subcarrier spacing, Hz.
    pub f_delta: f64,
    /// Antenna spacing, meters.
    pub d: f64,
    /// Propagation speed, m/s.
    #[serde(default = "default_c")]
    pub c: f64,
}

impl Default for RadioConfig {
    /// Three receive antennas at half-wavelength spacing, one transmit antenna,
    /// 30 reported subcarriers at 625 kHz effective spacing on a 5.32 GHz carrier.
    fn default() -> Self {
        let f_c = 5.32e9;
        Self {
            n_rx: 3,
            n_tx: 1,
            n_sub: 30,
            f_c,
            f_delta: 625e3,
            d: SPEED_OF_LIGHT / f_c / 2.0,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rx == 0 || self.n_tx == 0 {
            return Err(Error::InvalidConfig(
                "antenna counts must be positive".into(),
            ));
        }
        if self.n_sub < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 subcarriers, got {}",
                self.n_sub
            )));
        }
        for (name, v) in [
            ("f_c", self.f_c),
            ("f_delta", self.f_delta),
            ("d", self.d),
            ("c", self.c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.d > self.wavelength() * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "antenna spacing {} m exceeds one wavelength ({} m)",
                self.d,
                self.wavelength()
            )));
        }
        if self.d > self.wavelength() / 2.0 * (1.0 + 1e-9) {
            log::warn!(
                "antenna spacing {} m exceeds half a wavelength; AoA estimates may alias",
                self.d
            );
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.c / self.f_c
    }

    /// Number of complex entries per packet, `R = N_t * N_r * K`.
    pub fn entries(&self) -> usize {
        self.n_rx * self.n_tx * self.n_sub
    }

    /// Unambiguous delay span of the subcarrier grid, seconds.
    pub fn delay_span(&self) -> f64 {
        1.0 / self.f_delta
    }
}

/// One CFR snapshot stored flat in `[rx][tx][subcarrier]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiPacket {
    pub timestamp: f64,
    n_rx: usize,
    n_tx: usize,
    n_sub: usize,
    data: Vec<Complex64>,
}

impl CsiPacket {
    pub fn new(
        timestamp: f64,
        n_rx: usize,
        n_tx: usize,
        n_sub: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != n_rx * n_tx * n_sub {
            return Err(Error::invalid(format!(
                "packet has {} entries, expected {}x{}x{}",
                data.len(),
                n_rx,
                n_tx,
                n_sub
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::invalid(format!("non-finite CSI entry at index {i}")));
        }
        Ok(Self {
            timestamp,
            n_rx,
            n_tx,
            n_sub,
            data,
        })
    }

    pub fn zeros(timestamp: f64, cfg: &RadioConfig) -> Self {
        Self {
            timestamp,
            n_rx: cfg.n_rx,
            n_tx: cfg.n_tx,
            n_sub: cfg.n_sub,
            data: vec![Complex64::new(0.0, 0.0); cfg.entries()],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_rx, self.n_tx, self.n_sub)
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    #[inline]
    fn offset(&self, rx: usize, tx: usize) -> usize {
        (rx * self.n_tx + tx) * self.n_sub
    }

    #[inline]
    pub fn get(&self, rx: usize, tx: usize, k: usize) -> Complex64 {
        self.data[self.offset(rx, tx) + k]
    }

    #[inline]
    pub fn set(&mut self, rx: usize, tx: usize, k: usize, v: Complex64) {
        let o = self.offset(rx, tx);
        self.data[o + k] = v;
    }

    /// The `K` subcarriers of one rx/tx link.
    pub fn stream(&self, rx: usize, tx: usize) -> &[Complex64] {
        let o = self.offset(rx, tx);
        &self.data[o..o + self.n_sub]
    }

    pub fn stream_mut(&mut self, rx: usize, tx: usize) -> &mut [Complex64] {
        let o = self.offset(rx, tx);
        &mut self.data[o..o + self.n_sub]
    }

    /// Iterates `(rx, tx)` link indices in storage order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> {
        let n_tx = self.n_tx;
        (0..self.n_rx).flat_map(move |rx| (0..n_tx).map(move |tx| (rx, tx)))
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn matches(&self, cfg: &RadioConfig) -> bool {
        self.n_rx == cfg.n_rx && self.n_tx == cfg.n_tx && self.n_sub == cfg.n_sub
    }
}

/// An ordered run of packets from one access point.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTrace {
    pub config: RadioConfig,
    pub packets: Vec<CsiPacket>,
    pub source_id: String,
    pub location: Option<(f64, f64)>,
}

impl CsiTrace {
    pub fn new(
        config: RadioConfig,
        packets: Vec<CsiPacket>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let t = Self {
            config,
            packets,
            source_id: source_id.into(),
            location: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_location(mut self, x: f64, y: f64) -> Self {
        self.location = Some((x, y));
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.packets.is_empty() {
            return Err(Error::invalid("trace must contain at least one packet"));
        }
        if let Some(i) = self.packets.iter().position(|p| !p.matches(&self.config)) {
            return Err(Error::invalid(format!(
                "packet {i} dimensions {:?} do not match radio config",
                self.packets[i].dims()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// A trace holding packets `range` of this one, same metadata.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.packets.len() {
            return Err(Error::invalid(format!(
                "packet range {range:?} out of bounds for trace of {}",
                self.packets.len()
            )));
        }
        Ok(Self {
            config: self.config,
            packets: self.packets[range].to_vec(),
            source_id: self.source_id.clone(),
            location: self.location,
        })
    }
}
