//! Portable little-endian trace container.
//!
//! ```text
//! "CSIT"            4 bytes magic
//! version           u16 (= 1)
//! n_rx u8, n_tx u8, n_sub u16, n_packets u32
//! f_c f64, f_delta f64, d f64
//! n_packets x { timestamp f64, n_rx*n_tx*n_sub x (re f32, im f32) }   [rx][tx][sub] order
//! optional trailer:
//!   "META" 4 bytes, c f64, source_id (u16 length + UTF-8),
//!   has_location u8, x f64, y f64 (present only when has_location = 1)
//! ```
//!
//! CFR values are stored as `f32`; a trace whose entries are already
//! `f32`-representable round-trips bit for bit. Readers that stop after the
//! last packet see a valid file; a missing trailer means `c` = speed of light,
//! empty source id, no location.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::types::{CsiPacket, CsiTrace, RadioConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSIT";
pub const TRAILER_MAGIC: &[u8; 4] = b"META";
pub const VERSION: u16 = 1;
/// Bytes before the first packet.
pub const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 2 + 4 + 8 * 3;

pub fn encode_trace(t: &CsiTrace) -> Result<Vec<u8>> {
    t.validate()?;
    let cfg = &t.config;
    let n_rx = u8::try_from(cfg.n_rx).map_err(|_| Error::invalid("n_rx does not fit in u8"))?;
    let n_tx = u8::try_from(cfg.n_tx).map_err(|_| Error::invalid("n_tx does not fit in u8"))?;
    let n_sub =
        u16::try_from(cfg.n_sub).map_err(|_| Error::invalid("n_sub does not fit in u16"))?;
    let n_packets =
        u32::try_from(t.packets.len()).map_err(|_| Error::invalid("too many packets"))?;
    let sid = t.source_id.as_bytes();
    let sid_len = u16::try_from(sid.len())
        .map_err(|_| Error::invalid("source id longer than 65535 bytes"))?;

    let mut out = Vec::with_capacity(HEADER_LEN + t.packets.len() * (8 + cfg.entries() * 8) + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(n_rx);
    out.push(n_tx);
    out.extend_from_slice(&n_sub.to_le_bytes());
    out.extend_from_slice(&n_packets.to_le_bytes());
    out.extend_from_slice(&cfg.f_c.to_le_bytes());
    out.extend_from_slice(&cfg.f_delta.to_le_bytes());
    out.extend_from_slice(&cfg.d.to_le_bytes());
    for p in &t.packets {
        out.extend_from_slice(&p.timestamp.to_le_bytes());
        for z in p.data() {
            out.extend_from_slice(&(z.re as f32).to_le_bytes());
            out.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(TRAILER_MAGIC);
    out.extend_from_slice(&cfg.c.to_le_bytes());
    out.extend_from_slice(&sid_len.to_le_bytes());
    out.extend_from_slice(sid);
    match t.location {
        Some((x, y)) => {
            out.push(1);
            out.extend_from_slice(&x.to_le_bytes());
            out.extend_from_slice(&y.to_le_bytes());
        }
        None => out.push(0),
    }
    Ok(out)
}

pub fn save_trace<W: Write>(t: &CsiTrace, mut sink: W) -> Result<()> {
    sink.write_all(&encode_trace(t)?)?;
    Ok(())
}

pub fn load_trace<R: Read>(mut source: R) -> Result<CsiTrace> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    decode_trace(&buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!(
                    "truncated while reading {what} ({} of {n} bytes present)",
                    self.buf.len() - self.pos
                ),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_trace(buf: &[u8]) -> Result<CsiTrace> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {magic:02x?}, expected \"CSIT\""),
        ));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(
            4,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let n_rx = r.u8("n_rx")? as usize;
    let n_tx = r.u8("n_tx")? as usize;
    let n_sub = r.u16("n_sub")? as usize;
    let n_packets = r.u32("n_packets")? as usize;
    let f_c = r.f64("f_c")?;
    let f_delta = r.f64("f_delta")?;
    let d = r.f64("d")?;
    if n_packets == 0 {
        return Err(Error::format(10, "trace declares zero packets"));
    }
    let mut config = RadioConfig {
        n_rx,
        n_tx,
        n_sub,
        f_c,
        f_delta,
        d,
        c: SPEED_OF_LIGHT,
    };
    let entries = config.entries();
    let mut packets = Vec::with_capacity(n_packets);
    for i in 0..n_packets {
        let start = r.pos as u64;
        let ts = r.f64("packet timestamp")?;
        let mut data = Vec::with_capacity(entries);
        for _ in 0..entries {
            let raw = r.take(8, "CSI entry")?;
            let re = f32::from_le_bytes(raw[..4].try_into().unwrap());
            let im = f32::from_le_bytes(raw[4..].try_into().unwrap());
            data.push(Complex64::new(re as f64, im as f64));
        }
        let p = CsiPacket::new(ts, n_rx, n_tx, n_sub, data)
            .map_err(|e| Error::format(start, format!("packet {i}: {e}")))?;
        packets.push(p);
    }

    let mut source_id = String::new();
    let mut location = None;
    if r.remaining() > 0 {
        let at = r.pos as u64;
        if r.take(4, "trailer magic")? != TRAILER_MAGIC {
            return Err(Error::format(at, "unexpected bytes after last packet"));
        }
        config.c = r.f64("propagation speed")?;
        let len = r.u16("source id length")? as usize;
        let at = r.pos as u64;
        source_id = String::from_utf8(r.take(len, "source id")?.to_vec())
            .map_err(|_| Error::format(at, "source id is not UTF-8"))?;
        match r.u8("location flag")? {
            0 => {}
            1 => location = Some((r.f64("location x")?, r.f64("location y")?)),
            f => {
                return Err(Error::format(
                    r.pos as u64 - 1,
                    format!("bad location flag {f}"),
                ))
            }
        }
        if r.remaining() > 0 {
            return Err(Error::format(r.pos as u64, "trailing bytes after trailer"));
        }
    }

    let t = CsiTrace {
        config,
        packets,
        source_id,
        location,
    };
    t.validate().map_err(|e| Error::format(6, e.to_string()))?;
    Ok(t)
}

/// Rounds every CFR entry through `f32`, the precision the container stores.
pub fn quantize(t: &CsiTrace) -> CsiTrace {
    let mut q = t.clone();
    for p in &mut q.packets {
        for z in p.data_mut() {
            *z = Complex64::new(z.re as f32 as f64, z.im as f32 as f64);
        }
    }
    q
}
