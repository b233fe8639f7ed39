//! Range estimation over batches of URS measurements: the peak detector
//! (PD) averages per-CIR argmax indices; the matched filter (MF) scans a
//! delay-steering quadratic form against the sample covariance of the
//! measured frequency responses. Error statistics round the module off.
//!
//! The covariance is held in factored form (its measurement columns): the
//! quadratic form `v^H R v` equals `(1/M)·Σ_m |v^H Y_m|²`, which evaluates in
//! O(M·N) instead of O(N²) and — on a uniformly spaced delay grid starting at
//! zero — collapses to one zero-padded inverse FFT per measurement. `R` is
//! never inverted; the dense matrix materializes only for diagnostics.

use serde::{Deserialize, Serialize};

use crate::dl_ranging::Cir;
use crate::error::{Result, SimError};
use crate::ofdm::{FreqGrid, OfdmConfig};
use crate::{fft, Complex, SPEED_OF_LIGHT};

/// A range readout in meters with the underlying round-trip delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeEstimate {
    pub distance_m: f64,
    /// Round-trip delay in seconds.
    pub delay_s: f64,
}

/// `M` URS measurements taken under one timing state.
#[derive(Debug, Clone)]
pub struct MeasurementBatch {
    pub cirs: Vec<Cir>,
    pub freq_responses: Vec<FreqGrid>,
    pub true_distance_m: f64,
}

impl MeasurementBatch {
    pub fn new(
        cirs: Vec<Cir>,
        freq_responses: Vec<FreqGrid>,
        true_distance_m: f64,
    ) -> Result<Self> {
        if cirs.is_empty() || cirs.len() != freq_responses.len() {
            return Err(SimError::InvalidParams(format!(
                "batch needs matching non-empty members, got {} CIRs / {} responses",
                cirs.len(),
                freq_responses.len()
            )));
        }
        let k = freq_responses[0].bins.len();
        if freq_responses.iter().any(|g| g.bins.len() != k)
            || cirs.iter().any(|c| c.samples.len() != k)
        {
            return Err(SimError::LengthMismatch { expected: k, got: 0 });
        }
        Ok(Self {
            cirs,
            freq_responses,
            true_distance_m,
        })
    }

    pub fn m(&self) -> usize {
        self.cirs.len()
    }
}

/// Which subcarriers enter the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSelection {
    /// Only bins populated in the measurements (default; empty bins carry no
    /// signal).
    Occupied,
    /// All `K` bins, mirroring the full-vector covariance definition.
    FullGrid,
}

/// Sample covariance `R_y = (1/M)·Σ_m Y_m·Y_m^H` over a selected bin set,
/// stored as its measurement columns.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    /// Absolute subcarrier indices of the rows/columns.
    pub bins: Vec<usize>,
    columns: Vec<Vec<Complex>>,
}

impl CovarianceMatrix {
    pub fn from_columns(bins: Vec<usize>, columns: Vec<Vec<Complex>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(SimError::EmptyInput("CovarianceMatrix::from_columns"));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != bins.len()) {
            return Err(SimError::LengthMismatch {
                expected: bins.len(),
                got: bad.len(),
            });
        }
        Ok(Self { bins, columns })
    }

    /// Matrix dimension (number of selected bins).
    pub fn size(&self) -> usize {
        self.bins.len()
    }

    /// Number of averaged measurements.
    pub fn measurements(&self) -> usize {
        self.columns.len()
    }

    /// Single entry `R[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> Complex {
        let m = self.columns.len() as f64;
        self.columns
            .iter()
            .map(|c| c[i] * c[j].conj())
            .sum::<Complex>()
            / m
    }

    /// Dense materialization, for diagnostics and invariant checks.
    pub fn dense(&self) -> Vec<Vec<Complex>> {
        let n = self.size();
        let m = self.columns.len() as f64;
        let mut out = vec![vec![Complex::new(0.0, 0.0); n]; n];
        for col in &self.columns {
            for i in 0..n {
                let ci = col[i];
                for (j, out_ij) in out[i].iter_mut().enumerate() {
                    *out_ij += ci * col[j].conj();
                }
            }
        }
        for row in &mut out {
            for v in row {
                *v /= m;
            }
        }
        out
    }

    /// `v(τ)^H R v(τ)` with the delay-steering vector
    /// `v_k = exp(-j2π·k·Δf·τ)` restricted to the selected bins.
    pub fn quadratic_form(&self, tau_s: f64, scs_hz: f64) -> f64 {
        let m = self.columns.len() as f64;
        let mut acc = 0.0;
        for col in &self.columns {
            let mut s = Complex::new(0.0, 0.0);
            for (i, &k) in self.bins.iter().enumerate() {
                let phase = std::f64::consts::TAU * k as f64 * scs_hz * tau_s;
                s += col[i] * Complex::from_polar(1.0, phase);
            }
            acc += s.norm_sqr();
        }
        acc / m
    }
}

/// Build the sample covariance from a batch.
pub fn build_covariance(batch: &MeasurementBatch, selection: BinSelection) -> CovarianceMatrix {
    let k = batch.freq_responses[0].bins.len();
    let bins: Vec<usize> = match selection {
        BinSelection::FullGrid => (0..k).collect(),
        BinSelection::Occupied => (0..k)
            .filter(|&i| {
                batch
                    .freq_responses
                    .iter()
                    .any(|g| g.bins[i].norm_sqr() > 0.0)
            })
            .collect(),
    };
    let columns: Vec<Vec<Complex>> = batch
        .freq_responses
        .iter()
        .map(|g| bins.iter().map(|&i| g.bins[i]).collect())
        .collect();
    CovarianceMatrix { bins, columns }
}

/// Delay search grid for the matched filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub t_min_s: f64,
    pub t_max_s: f64,
    pub step_s: f64,
    /// Golden-section refinement of the best coarse cell to `step/100`.
    pub refine: bool,
}

impl SearchGrid {
    /// Default grid: round-trip delays `[0, K/(2·f_s)]` at an eighth of the
    /// occupied band's natural resolution.
    pub fn default_for(cfg: &OfdmConfig, n_occupied: usize) -> Self {
        Self {
            t_min_s: 0.0,
            t_max_s: cfg.fft_size as f64 / (2.0 * cfg.sample_rate_hz),
            step_s: 1.0 / (8.0 * n_occupied as f64 * cfg.scs_hz),
            refine: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.step_s <= 0.0 || self.step_s.is_nan() || self.t_max_s < self.t_min_s {
            return Err(SimError::DegenerateGrid(format!(
                "t ∈ [{}, {}] step {}",
                self.t_min_s, self.t_max_s, self.step_s
            )));
        }
        Ok(())
    }
}

/// Peak-detector range estimate: `c/(2·f_s)` times the mean per-CIR argmax.
pub fn pd_estimate(batch: &MeasurementBatch, cfg: &OfdmConfig) -> Result<RangeEstimate> {
    if batch.cirs.is_empty() {
        return Err(SimError::EmptyInput("pd_estimate"));
    }
    let mean_index =
        batch.cirs.iter().map(|c| c.peak_index as f64).sum::<f64>() / batch.m() as f64;
    let delay_s = mean_index / cfg.sample_rate_hz;
    Ok(RangeEstimate {
        distance_m: SPEED_OF_LIGHT * delay_s / 2.0,
        delay_s,
    })
}

/// Matched-filter range estimate: maximize `v(τ̂)^H R v(τ̂)` on the coarse
/// grid, then refine the winning cell by golden-section search; ties break
/// toward the smallest delay and the result is `c·τ̂/2`.
pub fn mf_estimate(
    r: &CovarianceMatrix,
    cfg: &OfdmConfig,
    grid: &SearchGrid,
) -> Result<RangeEstimate> {
    grid.validate()?;
    if r.size() == 0 {
        return Err(SimError::EmptyInput("mf_estimate"));
    }
    let n_points = ((grid.t_max_s - grid.t_min_s) / grid.step_s + 1e-9).floor() as usize + 1;
    let objective = coarse_objective(r, cfg.scs_hz, grid, n_points);

    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for (j, &v) in objective.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = j;
        }
    }
    let coarse_tau = grid.t_min_s + best as f64 * grid.step_s;

    let mut tau_hat = coarse_tau;
    if grid.refine {
        let lo = (coarse_tau - grid.step_s).max(grid.t_min_s);
        let hi = (coarse_tau + grid.step_s).min(grid.t_max_s);
        let refined = golden_section_max(
            |t| r.quadratic_form(t, cfg.scs_hz),
            lo,
            hi,
            grid.step_s / 100.0,
        );
        // Keep the coarse winner unless refinement strictly improves it, so
        // flat objectives stay at the documented smallest-delay tie-break.
        if r.quadratic_form(refined, cfg.scs_hz) > best_val {
            tau_hat = refined;
        }
    }
    Ok(RangeEstimate {
        distance_m: SPEED_OF_LIGHT * tau_hat / 2.0,
        delay_s: tau_hat,
    })
}

/// Coarse-grid objective. When the grid is uniform from zero with a step of
/// exactly `1/(L·Δf)` for an integer padding length `L`, each measurement's
/// contribution is one zero-padded inverse FFT; otherwise fall back to the
/// direct per-point evaluation. Both routes compute the same sum.
fn coarse_objective(
    r: &CovarianceMatrix,
    scs_hz: f64,
    grid: &SearchGrid,
    n_points: usize,
) -> Vec<f64> {
    let max_bin = r.bins.iter().copied().max().unwrap_or(0);
    let l_exact = 1.0 / (grid.step_s * scs_hz);
    let l = l_exact.round() as usize;
    let aligned = grid.t_min_s == 0.0
        && l > 0
        && (l_exact - l as f64).abs() <= 1e-6
        && l > max_bin
        && n_points <= l
        && l <= (1 << 22);
    if aligned {
        let m = r.columns.len() as f64;
        let mut objective = vec![0.0f64; n_points];
        let mut buf = vec![Complex::new(0.0, 0.0); l];
        for col in &r.columns {
            buf.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
            for (i, &k) in r.bins.iter().enumerate() {
                buf[k] = col[i];
            }
            fft::ifft_in_place(&mut buf);
            for (o, v) in objective.iter_mut().zip(&buf) {
                *o += v.norm_sqr();
            }
        }
        objective.iter_mut().for_each(|v| *v /= m);
        objective
    } else {
        (0..n_points)
            .map(|j| r.quadratic_form(grid.t_min_s + j as f64 * grid.step_s, scs_hz))
            .collect()
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Empirical CDF of absolute errors: sorted magnitudes with step
/// probabilities `i/N`.
pub fn ecdf(errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(SimError::EmptyInput("ecdf"));
    }
    let mut sorted: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect())
}

/// Percentile of absolute errors by linear interpolation between order
/// statistics (`h = (N-1)·p`).
pub fn percentile(errors: &[f64], p: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(SimError::EmptyInput("percentile"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::InvalidParams(format!(
            "percentile must lie in [0, 1], got {p}"
        )));
    }
    let mut sorted: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}
