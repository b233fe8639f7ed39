//! Zadoff-Chu and gold/QPSK sequence primitives.
//!
//! A Zadoff-Chu (ZC) sequence of odd prime length `N` and root `q` coprime to
//! `N` has unit amplitude everywhere, an ideal (Kronecker delta) normalized
//! cyclic autocorrelation, a flat cross-correlation of magnitude `1/√N`
//! against any other root, and a flat spectrum. Those four properties carry
//! the entire ranging scheme built on top of this module.

use crate::error::{Result, SimError};
use crate::{fft, Complex, ComplexSeq};

/// Parameters of a base ZC sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZcParams {
    /// Sequence length; odd prime so every root and root difference is
    /// coprime with it.
    pub n_zc: usize,
    /// Root index in `[1, n_zc - 1]`.
    pub root: usize,
}

impl ZcParams {
    pub fn new(n_zc: usize, root: usize) -> Result<Self> {
        if n_zc < 3 || n_zc.is_multiple_of(2) || !is_prime(n_zc) {
            return Err(SimError::InvalidParams(format!(
                "n_zc must be an odd prime, got {n_zc}"
            )));
        }
        if root == 0 || root >= n_zc {
            return Err(SimError::InvalidParams(format!(
                "root must lie in [1, {}], got {root}",
                n_zc - 1
            )));
        }
        Ok(Self { n_zc, root })
    }
}

/// A set of base-sequence roots for the extended (large timing advance)
/// scheme. Distinct roots of a prime-length ZC automatically satisfy the
/// requirement that every root and every pairwise root difference be coprime
/// with the length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiRootConfig {
    pub n_zc: usize,
    pub roots: Vec<usize>,
}

impl MultiRootConfig {
    pub fn new(n_zc: usize, roots: Vec<usize>) -> Result<Self> {
        if roots.is_empty() {
            return Err(SimError::InvalidParams("no roots given".into()));
        }
        for (i, &r) in roots.iter().enumerate() {
            ZcParams::new(n_zc, r)?;
            for &s in &roots[..i] {
                if s == r {
                    return Err(SimError::InvalidParams(format!(
                        "duplicate root {r}"
                    )));
                }
            }
        }
        Ok(Self { n_zc, roots })
    }

    pub fn base(&self, index: usize) -> ZcParams {
        ZcParams {
            n_zc: self.n_zc,
            root: self.roots[index],
        }
    }
}

/// Deterministic trial-division primality test; lengths here are small.
pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Generate the base ZC sequence `x_q[n] = exp(-jπ·q·n·(n+1)/N)`.
///
/// The phase is reduced modulo `2N` in exact integer arithmetic before the
/// float conversion, so unit amplitude holds to machine precision for any
/// valid length.
pub fn zc_generate(p: &ZcParams) -> ComplexSeq {
    let n_zc = p.n_zc as u64;
    let q = p.root as u64;
    (0..p.n_zc)
        .map(|n| {
            let n = n as u64;
            // q·n·(n+1) mod 2N; phase = -π·(that)/N
            let num = (q * ((n * (n + 1)) % (2 * n_zc))) % (2 * n_zc);
            let phase = -std::f64::consts::PI * num as f64 / n_zc as f64;
            Complex::from_polar(1.0, phase)
        })
        .collect()
}

/// Cyclic shift: `out[n] = s[(n - nu) mod len]`.
pub fn cyclic_shift(s: &[Complex], nu: usize) -> ComplexSeq {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let nu = nu % n;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(s[(i + n - nu) % n]);
    }
    out
}

/// Normalized cyclic cross-correlation
/// `out[ν] = (1/N)·Σ_n a[n]·conj(b[(n+ν) mod N])`,
/// computed in the frequency domain in O(N log N).
///
/// Note the index convention: correlating a forward-shifted copy of `b`
/// against `b` itself peaks at lag `(N - shift) mod N`, not at `shift`;
/// [`recover_shift`] undoes that for detection use.
pub fn cyclic_xcorr(a: &[Complex], b: &[Complex]) -> Result<ComplexSeq> {
    if a.len() != b.len() {
        return Err(SimError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(SimError::EmptyInput("cyclic_xcorr"));
    }
    let n = a.len();
    let mut fa = a.to_vec();
    let mut fb = b.to_vec();
    fft::fft_in_place(&mut fa);
    fft::fft_in_place(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y.conj();
    }
    // Σ_n a[n]·conj(b[n+ν]) = (1/N)·DFT{A·conj(B)}[ν]; one more 1/N normalizes.
    fft::fft_in_place(&mut fa);
    let scale = 1.0 / (n as f64 * n as f64);
    for x in &mut fa {
        *x *= scale;
    }
    Ok(fa)
}

/// Recover the forward cyclic shift that maps `base` onto `shifted`.
pub fn recover_shift(shifted: &[Complex], base: &[Complex]) -> Result<usize> {
    let corr = cyclic_xcorr(shifted, base)?;
    let lag = argmax_magnitude(&corr);
    Ok((corr.len() - lag) % corr.len())
}

/// Index of the largest-magnitude element (first one on ties).
pub fn argmax_magnitude(s: &[Complex]) -> usize {
    let mut best = 0;
    let mut best_mag = f64::NEG_INFINITY;
    for (i, v) in s.iter().enumerate() {
        let m = v.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    best
}

const GOLD_WARMUP: usize = 1600;
const GOLD_ORDER: usize = 31;

/// Pseudo-random bit sequence from two length-31 LFSRs combined by modulo-2
/// addition after a fixed 1600-step warm-up.
///
/// Register taps: `x1[n+31] = x1[n+3] ⊕ x1[n]`,
/// `x2[n+31] = x2[n+3] ⊕ x2[n+2] ⊕ x2[n+1] ⊕ x2[n]`; the first register is
/// seeded with a single set bit, the second with `c_init`. The exact output
/// is pinned by golden vectors in the tests.
pub fn gold_sequence(c_init: u32, length: usize) -> Vec<u8> {
    // Bit i of the state words holds x(n+i).
    let mut x1: u32 = 1;
    let mut x2: u32 = c_init & 0x7fff_ffff;
    let step = |x1: &mut u32, x2: &mut u32| -> u8 {
        let out = ((*x1 ^ *x2) & 1) as u8;
        let n1 = ((*x1 >> 3) ^ *x1) & 1;
        let n2 = ((*x2 >> 3) ^ (*x2 >> 2) ^ (*x2 >> 1) ^ *x2) & 1;
        *x1 = (*x1 >> 1) | (n1 << (GOLD_ORDER - 1));
        *x2 = (*x2 >> 1) | (n2 << (GOLD_ORDER - 1));
        out
    };
    for _ in 0..GOLD_WARMUP {
        step(&mut x1, &mut x2);
    }
    (0..length).map(|_| step(&mut x1, &mut x2)).collect()
}

/// Map a bit list to QPSK symbols:
/// `(1 - 2·b[2m]) + j(1 - 2·b[2m+1])`, scaled to unit modulus.
pub fn qpsk_map(bits: &[u8]) -> Result<ComplexSeq> {
    if !bits.len().is_multiple_of(2) {
        return Err(SimError::InvalidParams(format!(
            "qpsk_map needs an even number of bits, got {}",
            bits.len()
        )));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Ok(bits
        .chunks_exact(2)
        .map(|b| {
            Complex::new(
                (1.0 - 2.0 * b[0] as f64) * scale,
                (1.0 - 2.0 * b[1] as f64) * scale,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;

    const TESTBED_NZC: usize = 1259;

    fn assert_close(a: Complex, b: Complex, tol: f64) {
        assert!(
            (a - b).norm() <= tol,
            "expected {b}, got {a} (|diff| = {})",
            (a - b).norm()
        );
    }

    #[test]
    fn zc_params_validation() {
        assert!(ZcParams::new(1259, 1).is_ok());
        assert!(ZcParams::new(1258, 1).is_err()); // even
        assert!(ZcParams::new(1261, 1).is_err()); // 13·97
        assert!(ZcParams::new(7, 0).is_err());
        assert!(ZcParams::new(7, 7).is_err());
    }

    #[test]
    fn zc_first_sample_is_one() {
        let s = zc_generate(&ZcParams::new(7, 1).unwrap());
        assert_close(s[0], Complex::new(1.0, 0.0), 1e-15);
    }

    #[test]
    fn zc_sample_matches_direct_phase_evaluation() {
        // n = 3, q = 1, N = 7: phase is -12π/7.
        let s = zc_generate(&ZcParams::new(7, 1).unwrap());
        let expected = Complex::from_polar(1.0, -12.0 * std::f64::consts::PI / 7.0);
        assert_close(s[3], expected, 1e-12);
    }

    #[test]
    fn zc_unit_amplitude_at_testbed_length() {
        let s = zc_generate(&ZcParams::new(TESTBED_NZC, 1).unwrap());
        assert_eq!(s.len(), TESTBED_NZC);
        for v in &s {
            assert!((v.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn zc_spectrum_is_flat() {
        let p = ZcParams::new(TESTBED_NZC, 5).unwrap();
        let mut spec = zc_generate(&p);
        crate::fft::fft_in_place(&mut spec);
        let expected = (TESTBED_NZC as f64).sqrt();
        for v in &spec {
            assert!(
                (v.norm() - expected).abs() <= 1e-6,
                "|X[k]| = {} vs √N = {expected}",
                v.norm()
            );
        }
    }

    #[test]
    fn cyclic_shift_identity_and_full_wrap() {
        let s = zc_generate(&ZcParams::new(11, 3).unwrap());
        assert_eq!(cyclic_shift(&s, 0), s);
        assert_eq!(cyclic_shift(&s, s.len()), s);
    }

    #[test]
    fn cyclic_shift_moves_origin() {
        // Shift by 2: index 2 of the output holds index 0 of the input.
        let s = zc_generate(&ZcParams::new(7, 1).unwrap());
        let shifted = cyclic_shift(&s, 2);
        assert_close(shifted[2], Complex::new(1.0, 0.0), 1e-15);
    }

    #[test]
    fn autocorrelation_is_kronecker_delta() {
        let x = zc_generate(&ZcParams::new(TESTBED_NZC, 7).unwrap());
        let r = cyclic_xcorr(&x, &x).unwrap();
        assert!((r[0] - Complex::new(1.0, 0.0)).norm() <= 1e-9);
        for v in &r[1..] {
            assert!(v.norm() <= 1e-9, "sidelobe {}", v.norm());
        }
    }

    #[test]
    fn cross_correlation_is_flat() {
        let a = zc_generate(&ZcParams::new(TESTBED_NZC, 3).unwrap());
        let b = zc_generate(&ZcParams::new(TESTBED_NZC, 8).unwrap());
        let r = cyclic_xcorr(&a, &b).unwrap();
        let expected = 1.0 / (TESTBED_NZC as f64).sqrt();
        for v in &r {
            assert!(
                (v.norm() - expected).abs() <= 1e-9,
                "|r| = {} vs {expected}",
                v.norm()
            );
        }
    }

    #[test]
    fn xcorr_rejects_length_mismatch() {
        let a = zc_generate(&ZcParams::new(7, 1).unwrap());
        let b = zc_generate(&ZcParams::new(11, 1).unwrap());
        assert!(matches!(
            cyclic_xcorr(&a, &b),
            Err(SimError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fast_xcorr_matches_direct_reference() {
        let a = zc_generate(&ZcParams::new(139, 5).unwrap());
        let b = cyclic_shift(&zc_generate(&ZcParams::new(139, 5).unwrap()), 17);
        let fast = cyclic_xcorr(&b, &a).unwrap();
        let direct = oracle::cyclic_xcorr_direct(&b, &a).unwrap();
        let rms: f64 = fast
            .iter()
            .zip(&direct)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / (fast.len() as f64).sqrt();
        assert!(rms <= 1e-9, "rms {rms}");
    }

    #[test]
    fn shift_recovery_over_full_period() {
        let p = ZcParams::new(139, 11).unwrap();
        let base = zc_generate(&p);
        for nu in 0..p.n_zc {
            let shifted = cyclic_shift(&base, nu);
            assert_eq!(recover_shift(&shifted, &base).unwrap(), nu);
        }
    }

    #[test]
    fn gold_is_deterministic() {
        assert_eq!(gold_sequence(12345, 256), gold_sequence(12345, 256));
    }

    #[test]
    fn gold_golden_vector_c_init_1() {
        // Frozen output of the pinned generator; any change to taps, seeding
        // or warm-up must show up here.
        let got = gold_sequence(1, 64);
        let expected: [u8; 64] = [
            0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0,
            1, 1, 0, 1, 1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 1, 1, 1, 0, 0, 1,
            1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 0, 1, 0,
        ];
        assert_eq!(got, expected, "golden vector drifted");
    }

    #[test]
    fn gold_output_is_balanced() {
        let bits = gold_sequence(1, 64);
        let ones: usize = bits.iter().map(|&b| b as usize).sum();
        assert!(ones > 0 && ones < 64, "degenerate output, {ones} ones");
        assert!((16..=48).contains(&ones), "poor balance: {ones}/64 ones");
    }

    #[test]
    fn gold_seeds_decorrelate() {
        let a = gold_sequence(1, 1024);
        let b = gold_sequence(2, 1024);
        let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert!(differing >= 256, "only {differing}/1024 positions differ");
    }

    #[test]
    fn qpsk_constellation_corners() {
        let s = qpsk_map(&[0, 0, 1, 1]).unwrap();
        let v = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(s[0], Complex::new(v, v), 1e-15);
        assert_close(s[1], Complex::new(-v, -v), 1e-15);
    }

    #[test]
    fn qpsk_rejects_odd_input() {
        assert!(qpsk_map(&[0, 1, 0]).is_err());
    }

    proptest! {
        #[test]
        fn prop_zc_unit_amplitude(root in 1usize..50, pidx in 0usize..6) {
            let primes = [7usize, 23, 139, 241, 509, 1259];
            let n = primes[pidx];
            let root = 1 + (root - 1) % (n - 1);
            let s = zc_generate(&ZcParams::new(n, root).unwrap());
            for v in &s {
                prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn prop_shift_recovery(nu in 0usize..139, root in 1usize..138) {
            let p = ZcParams::new(139, root).unwrap();
            let base = zc_generate(&p);
            let shifted = cyclic_shift(&base, nu);
            prop_assert_eq!(recover_shift(&shifted, &base).unwrap(), nu);
        }

        #[test]
        fn prop_qpsk_unit_modulus(bits in proptest::collection::vec(0u8..2, 2..128)) {
            let bits = if bits.len() % 2 == 0 { bits } else { bits[..bits.len()-1].to_vec() };
            for v in qpsk_map(&bits).unwrap() {
                prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
