//! Unitary DFT pair between CFR (subcarrier domain) and CIR (tap domain).
//!
//! Both directions scale by `1/sqrt(K)`, so energy is preserved:
//!
//! ```text
//! cir[n] = 1/sqrt(K) * sum_k cfr[k] * exp(+j 2 pi k n / K)
//! cfr[k] = 1/sqrt(K) * sum_n cir[n] * exp(-j 2 pi k n / K)
//! ```
//!
//! With this sign pairing a CFR phase ramp `exp(-j 2 pi k s / K)` moves the
//! CIR energy forward by `s` taps.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Time-domain channel taps.
#[derive(Debug, Clone, PartialEq)]
pub struct CirVector {
    pub taps: Vec<Complex64>,
}

impl CirVector {
    /// Power delay profile `|h_n|^2`.
    pub fn pdp(&self) -> Vec<f64> {
        self.taps.iter().map(|z| z.norm_sqr()).collect()
    }
}

fn check(v: &[Complex64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::invalid(format!(
            "transform length must be >= 2, got {}",
            v.len()
        )));
    }
    if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::invalid("non-finite value in transform input"));
    }
    Ok(())
}

/// In-place unitary transform. `inverse` selects the `+j` kernel.
pub(crate) fn unitary_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let fft = if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        };
        fft.process(buf);
    });
    let s = 1.0 / (n as f64).sqrt();
    for z in buf.iter_mut() {
        *z *= s;
    }
}

pub fn cfr_to_cir(cfr: &[Complex64]) -> Result<CirVector> {
    check(cfr)?;
    let mut taps = cfr.to_vec();
    unitary_in_place(&mut taps, true);
    Ok(CirVector { taps })
}

pub fn cir_to_cfr(cir: &CirVector) -> Result<Vec<Complex64>> {
    check(&cir.taps)?;
    let mut cfr = cir.taps.clone();
    unitary_in_place(&mut cfr, false);
    Ok(cfr)
}
