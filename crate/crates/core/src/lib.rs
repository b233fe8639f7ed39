//! Link-level simulator for uplink-reference-signal (URS) round-trip-time
//! ranging between a 5G-style base station (gNB) and a user terminal (UE).
//!
//! The scheme under study encodes the UE's current timing advance (TA) plus
//! the downlink-measured first-peak delay `p_d` as a cyclic shift of a
//! Zadoff-Chu uplink pilot. At the gNB the matched-filter channel impulse
//! response then peaks directly at the round trip time, RTT = 2τ, without any
//! UE measurement report.
//!
//! Module layout follows the processing chain:
//!
//! * [`sequences`] — Zadoff-Chu and gold/QPSK sequence primitives.
//! * [`ofdm`] — subcarrier mapping, comb interleaving, unitary transforms.
//! * [`channel`] — delay/multipath/AWGN models and the UE/gNB timing state.
//! * [`dl_ranging`] — downlink pilot, channel estimation, first-peak search.
//! * [`urs_rtt`] — URS transmit/receive chains, shift arithmetic, the
//!   protocol round, multi-root and comb-multiplexed extensions.
//! * [`estimators`] — peak-detector and matched-filter range estimators over
//!   batches of measurements, plus error statistics.
//! * [`harness`] — scenario configuration, Monte Carlo sweeps, CSV/JSONL
//!   export and percentile reports.
//! * [`oracle`] — slow reference implementations used by the validation
//!   suites; kept independent of the fast paths they check.
//! * [`selftest`] — the acceptance checks behind the CLI `selftest` command.

pub mod channel;
pub mod dl_ranging;
pub mod error;
pub mod estimators;
mod fft;
pub mod harness;
pub mod ofdm;
pub mod oracle;
pub mod rng;
pub mod selftest;
pub mod sequences;
pub mod urs_rtt;

pub use error::{Result, SimError};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Complex sample type used throughout.
pub type Complex = num_complex::Complex64;

/// An ordered list of complex samples (time- or sequence-domain).
pub type ComplexSeq = Vec<Complex>;
