//! Thin wrappers over rustfft with a per-thread plan cache.
//!
//! All transforms here are unnormalized (rustfft convention); callers apply
//! whichever normalization their contract specifies.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::Complex;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place forward DFT, unnormalized: `X[k] = Σ_n x[n]·e^{-j2πkn/N}`.
pub fn fft_in_place(buf: &mut [Complex]) {
    plan(buf.len(), false).process(buf);
}

/// In-place inverse DFT, unnormalized: `x[n] = Σ_k X[k]·e^{+j2πkn/N}`.
pub fn ifft_in_place(buf: &mut [Complex]) {
    plan(buf.len(), true).process(buf);
}

/// Unitary forward DFT (1/√N scaling), out of place.
pub fn dft_unitary(x: &[Complex]) -> Vec<Complex> {
    let mut buf = x.to_vec();
    fft_in_place(&mut buf);
    let scale = 1.0 / (x.len() as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Unitary inverse DFT (1/√N scaling), out of place.
pub fn idft_unitary(x: &[Complex]) -> Vec<Complex> {
    let mut buf = x.to_vec();
    ifft_in_place(&mut buf);
    let scale = 1.0 / (x.len() as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}
