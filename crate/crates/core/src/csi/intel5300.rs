//! Reader for beamforming-feedback logs written by the Linux 802.11n CSI tool
//! (Intel Wi-Fi Link 5300).
//!
//! A log is a sequence of records:
//!
//! ```text
//! field_len  u16 big-endian   (counts the code byte plus the body)
//! code       u8               (0xBB = beamforming feedback; anything else is skipped)
//! body       field_len - 1 bytes
//! ```
//!
//! A 0xBB body is little-endian:
//!
//! ```text
//! timestamp_low u32, bfee_count u16, reserved u16,
//! n_rx u8, n_tx u8, rssi_a u8, rssi_b u8, rssi_c u8, noise i8, agc u8, antenna_sel u8,
//! len u16, rate u16, payload[len]
//! ```
//!
//! The payload packs 30 subcarrier groups back to back at bit granularity.
//! Each group starts with 3 unused bits followed by `n_rx * n_tx` complex
//! values (signed 8-bit real, then signed 8-bit imaginary), LSB first, with the
//! transmit index varying fastest.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::types::{CsiPacket, CsiTrace, RadioConfig};
use crate::error::{Error, Result};

pub const CODE_BFEE: u8 = 0xBB;
pub const SUBCARRIERS: usize = 30;
const BODY_HEADER_LEN: usize = 20;

/// Per-record radio metadata, kept unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intel5300Meta {
    /// Byte offset of the record's length field in the source stream.
    pub offset: u64,
    pub timestamp_low: u32,
    pub bfee_count: u16,
    pub n_rx: u8,
    pub n_tx: u8,
    pub rssi_a: u8,
    pub rssi_b: u8,
    pub rssi_c: u8,
    pub noise: i8,
    pub agc: u8,
    pub antenna_sel: u8,
    pub rate: u16,
    /// Receive-chain permutation decoded from `antenna_sel`; `perm[i]` is the
    /// antenna slot that chain `i` lands in.
    pub perm: [u8; 3],
    /// Whether `perm` was a valid permutation and therefore applied.
    pub perm_applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intel5300Record {
    pub packet: CsiPacket,
    pub meta: Intel5300Meta,
}

/// Payload length implied by the antenna counts.
pub fn expected_payload_len(n_rx: usize, n_tx: usize) -> usize {
    (SUBCARRIERS * (n_rx * n_tx * 16 + 3)).div_ceil(8)
}

/// Subcarrier indices reported for a 20 MHz channel with grouping 2.
pub const SUBCARRIER_INDICES_20MHZ: [i32; SUBCARRIERS] = [
    -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1, 1, 3, 5, 7, 9, 11, 13,
    15, 17, 19, 21, 23, 25, 27, 28,
];

/// Position of the first reported subcarrier above DC in [`SUBCARRIER_INDICES_20MHZ`].
pub const DC_SPLIT_20MHZ: usize = 15;

fn read_i8_at(payload: &[u8], bit: usize) -> i8 {
    let byte = bit / 8;
    let rem = bit % 8;
    let lo = payload[byte] >> rem;
    let hi = if rem == 0 {
        0
    } else {
        payload[byte + 1] << (8 - rem)
    };
    (lo | hi) as i8
}

fn parse_bfee(body: &[u8], offset: u64) -> Result<Intel5300Record> {
    let body_at = offset + 3;
    if body.len() < BODY_HEADER_LEN {
        return Err(Error::format(
            body_at + body.len() as u64,
            format!(
                "CSI record body has {} bytes, header needs {BODY_HEADER_LEN}",
                body.len()
            ),
        ));
    }
    let le16 = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
    let timestamp_low = u32::from_le_bytes(body[0..4].try_into().unwrap());
    let bfee_count = le16(4);
    let n_rx = body[8];
    let n_tx = body[9];
    let (rssi_a, rssi_b, rssi_c) = (body[10], body[11], body[12]);
    let noise = body[13] as i8;
    let agc = body[14];
    let antenna_sel = body[15];
    let len = le16(16) as usize;
    let rate = le16(18);

    if !(1..=3).contains(&n_rx) || !(1..=3).contains(&n_tx) {
        return Err(Error::CorruptRecord {
            offset,
            message: format!("antenna counts n_rx = {n_rx}, n_tx = {n_tx} out of range 1..=3"),
        });
    }
    let (nr, nt) = (n_rx as usize, n_tx as usize);
    let want = expected_payload_len(nr, nt);
    if len != want {
        return Err(Error::CorruptRecord {
            offset,
            message: format!(
                "payload length {len} inconsistent with {nr}x{nt} antennas (expected {want})"
            ),
        });
    }
    if body.len() < BODY_HEADER_LEN + len {
        return Err(Error::format(
            body_at + body.len() as u64,
            format!(
                "CSI payload truncated: {} of {len} bytes",
                body.len() - BODY_HEADER_LEN
            ),
        ));
    }
    let payload = &body[BODY_HEADER_LEN..BODY_HEADER_LEN + len];

    // Raw values in [rx][tx][sub] order.
    let mut raw = vec![Complex64::new(0.0, 0.0); nr * nt * SUBCARRIERS];
    let mut bit = 0usize;
    for k in 0..SUBCARRIERS {
        bit += 3;
        for j in 0..nr * nt {
            let re = read_i8_at(payload, bit);
            let im = read_i8_at(payload, bit + 8);
            bit += 16;
            let (rx, tx) = (j / nt, j % nt);
            raw[(rx * nt + tx) * SUBCARRIERS + k] = Complex64::new(re as f64, im as f64);
        }
    }

    let perm = [0, 1, 2].map(|i| (antenna_sel >> (2 * i)) & 0x3);
    let mut seen = [false; 3];
    let valid = perm[..nr].iter().all(|&p| {
        let p = p as usize;
        p < nr && !std::mem::replace(&mut seen[p], true)
    });
    let data = if valid {
        let mut out = raw.clone();
        for rx in 0..nr {
            let dst = perm[rx] as usize;
            for tx in 0..nt {
                let s = (rx * nt + tx) * SUBCARRIERS;
                let d = (dst * nt + tx) * SUBCARRIERS;
                out[d..d + SUBCARRIERS].copy_from_slice(&raw[s..s + SUBCARRIERS]);
            }
        }
        out
    } else {
        log::warn!("record at byte {offset}: antenna_sel {antenna_sel:#04x} is not a permutation; left unpermuted");
        raw
    };

    let packet = CsiPacket::new(timestamp_low as f64 * 1e-6, nr, nt, SUBCARRIERS, data)?;
    Ok(Intel5300Record {
        packet,
        meta: Intel5300Meta {
            offset,
            timestamp_low,
            bfee_count,
            n_rx,
            n_tx,
            rssi_a,
            rssi_b,
            rssi_c,
            noise,
            agc,
            antenna_sel,
            rate,
            perm,
            perm_applied: valid,
        },
    })
}

/// Decodes every beamforming record in `bytes`, skipping other record codes.
pub fn parse_intel5300(bytes: &[u8]) -> Result<Vec<Intel5300Record>> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let offset = pos as u64;
        if bytes.len() - pos < 2 {
            return Err(Error::format(
                offset,
                "file ends inside a record length field",
            ));
        }
        let field_len = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        if field_len == 0 {
            return Err(Error::CorruptRecord {
                offset,
                message: "zero-length record".into(),
            });
        }
        if bytes.len() - pos - 2 < field_len {
            return Err(Error::format(
                offset + 2,
                format!(
                    "record declares {field_len} bytes but only {} remain",
                    bytes.len() - pos - 2
                ),
            ));
        }
        let code = bytes[pos + 2];
        let body = &bytes[pos + 3..pos + 2 + field_len];
        if code == CODE_BFEE {
            out.push(parse_bfee(body, offset)?);
        } else {
            log::debug!("skipping record with code {code:#04x} at byte {offset}");
        }
        pos += 2 + field_len;
    }
    Ok(out)
}

/// Assembles decoded records into a trace. Every record must share the
/// antenna counts of `config`; `config.n_sub` must be 30.
pub fn records_to_trace(
    records: &[Intel5300Record],
    config: RadioConfig,
    source_id: &str,
) -> Result<CsiTrace> {
    if let Some(r) = records.iter().find(|r| !r.packet.matches(&config)) {
        return Err(Error::invalid(format!(
            "record at byte {} has shape {:?}, radio config expects ({}, {}, {})",
            r.meta.offset,
            r.packet.dims(),
            config.n_rx,
            config.n_tx,
            config.n_sub
        )));
    }
    CsiTrace::new(
        config,
        records.iter().map(|r| r.packet.clone()).collect(),
        source_id,
    )
}
