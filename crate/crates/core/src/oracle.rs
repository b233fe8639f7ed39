//! Slow, independent reference implementations used to validate the fast
//! paths. Nothing here shares code with the implementations it checks:
//! correlation and transforms are direct O(N²) sums, the delay oracle is a
//! plain vector rotation, and positive-semidefiniteness is decided by a
//! pivoted Cholesky factorization.

use crate::error::{Result, SimError};
use crate::{Complex, ComplexSeq};

/// Direct O(N²) DFT, unnormalized.
pub fn dft_direct(x: &[Complex]) -> ComplexSeq {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let phase = -std::f64::consts::TAU * (k * i % n) as f64 / n as f64;
                acc += v * Complex::from_polar(1.0, phase);
            }
            acc
        })
        .collect()
}

/// Direct O(N²) normalized cyclic cross-correlation
/// `out[ν] = (1/N)·Σ_n a[n]·conj(b[(n+ν) mod N])`.
pub fn cyclic_xcorr_direct(a: &[Complex], b: &[Complex]) -> Result<ComplexSeq> {
    if a.len() != b.len() {
        return Err(SimError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(SimError::EmptyInput("cyclic_xcorr_direct"));
    }
    let n = a.len();
    Ok((0..n)
        .map(|nu| {
            let mut acc = Complex::new(0.0, 0.0);
            for (i, v) in a.iter().enumerate() {
                acc += v * b[(i + nu) % n].conj();
            }
            acc / n as f64
        })
        .collect())
}

/// Integer cyclic delay in the time domain: `out[n] = x[(n - d) mod N]`.
pub fn cyclic_delay(x: &[Complex], d: usize) -> ComplexSeq {
    let n = x.len();
    let d = d % n.max(1);
    let mut out = x.to_vec();
    out.rotate_right(d);
    out
}

/// Root-mean-square difference between two equal-length vectors.
pub fn rms_diff(a: &[Complex], b: &[Complex]) -> f64 {
    assert_eq!(a.len(), b.len());
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    (sum / a.len() as f64).sqrt()
}

/// Report on a Hermitian/PSD check of a dense matrix.
#[derive(Debug, Clone, Copy)]
pub struct PsdReport {
    pub hermitian: bool,
    pub max_asymmetry: f64,
    pub positive_semidefinite: bool,
    pub min_pivot: f64,
    pub trace: f64,
}

/// Check that `m` is Hermitian and positive semidefinite within
/// `tol·trace(m)` using diagonally pivoted Cholesky (the standard PSD test:
/// factorization succeeds with every pivot ≥ -tol·trace).
#[allow(clippy::needless_range_loop)] // transposed-index access wants plain loops
pub fn psd_check(m: &[Vec<Complex>], tol: f64) -> PsdReport {
    let n = m.len();
    let mut max_asym = 0.0f64;
    let mut trace = 0.0f64;
    for i in 0..n {
        trace += m[i][i].re;
        for j in 0..n {
            let asym = (m[i][j] - m[j][i].conj()).norm();
            max_asym = max_asym.max(asym);
        }
    }
    let scale = trace.abs().max(1.0);
    let hermitian = max_asym <= tol * scale;

    // Pivoted Cholesky on a working copy; only the diagonal path matters.
    let mut a: Vec<Vec<Complex>> = m.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut min_pivot = f64::INFINITY;
    let mut psd = true;
    for k in 0..n {
        // Pick the largest remaining diagonal entry.
        let (piv, piv_val) = (k..n)
            .map(|i| (i, a[perm[i]][perm[i]].re))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        perm.swap(k, piv);
        min_pivot = min_pivot.min(piv_val);
        if piv_val < -tol * scale {
            psd = false;
            break;
        }
        if piv_val <= tol * scale {
            // Remaining block is numerically zero; PSD holds if no diagonal
            // entry below -tol was seen, which the loop already tracks.
            for i in k..n {
                min_pivot = min_pivot.min(a[perm[i]][perm[i]].re);
            }
            psd = min_pivot >= -tol * scale;
            break;
        }
        let pk = perm[k];
        for i in (k + 1)..n {
            let pi = perm[i];
            let lik = a[pi][pk] / piv_val;
            for j in (k + 1)..n {
                let pj = perm[j];
                let sub = lik * a[pk][pj];
                a[pi][pj] -= sub;
            }
        }
    }
    if n == 0 {
        min_pivot = 0.0;
    }
    PsdReport {
        hermitian,
        max_asymmetry: max_asym,
        positive_semidefinite: psd,
        min_pivot,
        trace,
    }
}
