//! UE-side downlink ranging: a simplified gold/QPSK positioning pilot,
//! least-squares channel estimation across comb-interleaved symbols, and the
//! first-peak delay measurement `p_d`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fft;
use crate::ofdm::{map_to_grid, FreqGrid, OfdmConfig};
use crate::sequences::{gold_sequence, qpsk_map};
use crate::Complex;

/// Downlink pilot configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrsConfig {
    /// Number of pilot symbols per measurement occasion.
    pub num_symbols: usize,
    /// Comb interleave factor.
    pub comb: usize,
    /// Total pilot bandwidth in subcarriers (across all comb offsets).
    pub bandwidth_bins: usize,
    /// Scrambling seed base; symbol `s` uses `c_init_base + s`.
    pub c_init_base: u32,
}

impl Default for PrsConfig {
    fn default() -> Self {
        // 37.44 MHz at 30 kHz spacing, 12 symbols on comb 2.
        Self {
            num_symbols: 12,
            comb: 2,
            bandwidth_bins: 1248,
            c_init_base: 1,
        }
    }
}

impl PrsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_symbols == 0 {
            return Err(SimError::Validation("prs num_symbols must be ≥ 1".into()));
        }
        if self.comb == 0 || self.comb > 2 {
            return Err(SimError::Validation(format!(
                "prs comb must be 1 or 2, got {}",
                self.comb
            )));
        }
        if self.bandwidth_bins == 0 || !self.bandwidth_bins.is_multiple_of(self.comb) {
            return Err(SimError::Validation(format!(
                "prs bandwidth_bins {} must be a positive multiple of comb {}",
                self.bandwidth_bins, self.comb
            )));
        }
        Ok(())
    }

    /// Mapped samples per symbol.
    pub fn bins_per_symbol(&self) -> usize {
        self.bandwidth_bins / self.comb
    }
}

/// Time-domain channel impulse response estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub samples: Vec<Complex>,
    pub sample_rate_hz: f64,
    /// Global argmax of `|samples|`.
    pub peak_index: usize,
    pub peak_mag: f64,
}

impl Cir {
    pub fn from_samples(samples: Vec<Complex>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(SimError::EmptyInput("Cir::from_samples"));
        }
        let (peak_index, peak_mag) = samples
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, f64::NEG_INFINITY), |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            });
        Ok(Self {
            samples,
            sample_rate_hz,
            peak_index,
            peak_mag,
        })
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.samples.iter().map(|v| v.norm()).collect()
    }
}

/// Generate the pilot symbols: symbol `s` carries QPSK-mapped bits of
/// `gold_sequence(c_init_base + s, ·)` on comb offset `s mod comb`, so
/// consecutive symbols interleave to cover the full band.
pub fn prs_generate(cfg: &PrsConfig, ofdm: &OfdmConfig) -> Result<Vec<FreqGrid>> {
    cfg.validate()?;
    let per_symbol = cfg.bins_per_symbol();
    (0..cfg.num_symbols)
        .map(|s| {
            let bits = gold_sequence(cfg.c_init_base + s as u32, 2 * per_symbol);
            let symbols = qpsk_map(&bits)?;
            let sym_cfg = ofdm.with_comb(cfg.comb, s % cfg.comb);
            map_to_grid(&symbols, &sym_cfg)
        })
        .collect()
}

/// Least-squares channel estimate from received pilot symbols.
///
/// Per occupied bin, `Ĥ[k] = rx[k]·conj(ref[k]) / |ref[k]|²`; estimates from
/// all symbols are averaged onto a single K-bin grid (comb offsets interleave
/// to fill the band), unfilled bins stay zero, and the inverse transform of
/// size K — scaled by the number of filled bins so a flat channel peaks at
/// magnitude one — gives the CIR.
pub fn prs_channel_estimate(rx: &[FreqGrid], reference: &[FreqGrid]) -> Result<Cir> {
    if rx.len() != reference.len() {
        return Err(SimError::LengthMismatch {
            expected: reference.len(),
            got: rx.len(),
        });
    }
    if rx.is_empty() {
        return Err(SimError::EmptyInput("prs_channel_estimate"));
    }
    let k_total = reference[0].bins.len();
    let fs = reference[0].config.sample_rate_hz;
    let mut sum = vec![Complex::new(0.0, 0.0); k_total];
    let mut count = vec![0usize; k_total];
    for (r, y) in reference.iter().zip(rx) {
        if y.bins.len() != k_total || r.bins.len() != k_total {
            return Err(SimError::LengthMismatch {
                expected: k_total,
                got: y.bins.len().min(r.bins.len()),
            });
        }
        for (k, pilot) in r.bins.iter().enumerate() {
            let p = pilot.norm_sqr();
            if p > 0.0 {
                sum[k] += y.bins[k] * pilot.conj() / p;
                count[k] += 1;
            }
        }
    }
    let filled = count.iter().filter(|&&c| c > 0).count();
    if filled == 0 {
        return Err(SimError::ZeroEnergy);
    }
    let mut grid = vec![Complex::new(0.0, 0.0); k_total];
    for k in 0..k_total {
        if count[k] > 0 {
            grid[k] = sum[k] / count[k] as f64;
        }
    }
    fft::ifft_in_place(&mut grid);
    let scale = 1.0 / filled as f64;
    for v in &mut grid {
        *v *= scale;
    }
    Cir::from_samples(grid, fs)
}

/// First-peak search: the smallest index inside `[0, search_window)` that is
/// a local maximum of `|cir|` with magnitude at least
/// `rel_threshold · global_max`. Falls back to the global argmax when no
/// index qualifies.
pub fn first_peak(cir: &Cir, rel_threshold: f64, search_window: usize) -> Result<usize> {
    if cir.samples.is_empty() {
        return Err(SimError::EmptyInput("first_peak"));
    }
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(SimError::InvalidParams(format!(
            "rel_threshold must lie in (0, 1], got {rel_threshold}"
        )));
    }
    let mags = cir.magnitudes();
    let floor = rel_threshold * cir.peak_mag;
    let window = search_window.min(mags.len());
    for i in 0..window {
        let left_ok = i == 0 || mags[i] >= mags[i - 1];
        let right_ok = i + 1 >= mags.len() || mags[i] >= mags[i + 1];
        if left_ok && right_ok && mags[i] >= floor {
            return Ok(i);
        }
    }
    Ok(cir.peak_index)
}

/// Which statistic of the CIR to report as the delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakMode {
    /// Earliest qualifying local maximum (robust when the first path is not
    /// the strongest).
    FirstPeak,
    /// Plain argmax over the search window.
    Argmax,
}

/// Configured peak search, shared by the downlink `p_d` measurement and the
/// gNB-side RTT readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDetector {
    pub mode: PeakMode,
    pub rel_threshold: f64,
    pub search_window: usize,
}

impl PeakDetector {
    pub fn first_peak(rel_threshold: f64, search_window: usize) -> Self {
        Self {
            mode: PeakMode::FirstPeak,
            rel_threshold,
            search_window,
        }
    }

    pub fn argmax(search_window: usize) -> Self {
        Self {
            mode: PeakMode::Argmax,
            rel_threshold: 1.0,
            search_window,
        }
    }

    /// Default downlink detector: 50% threshold over the first quarter of
    /// the grid.
    pub fn default_dl(fft_size: usize) -> Self {
        Self::first_peak(0.5, fft_size / 4)
    }

    /// Default uplink detector: 50% threshold over the whole grid.
    pub fn default_ul(fft_size: usize) -> Self {
        Self::first_peak(0.5, fft_size)
    }

    pub fn detect(&self, cir: &Cir) -> Result<usize> {
        match self.mode {
            PeakMode::FirstPeak => first_peak(cir, self.rel_threshold, self.search_window),
            PeakMode::Argmax => {
                if cir.samples.is_empty() {
                    return Err(SimError::EmptyInput("PeakDetector::detect"));
                }
                let window = self.search_window.min(cir.samples.len());
                let mags = cir.magnitudes();
                let mut best = 0;
                let mut best_mag = f64::NEG_INFINITY;
                for (i, &m) in mags.iter().take(window).enumerate() {
                    if m > best_mag {
                        best_mag = m;
                        best = i;
                    }
                }
                Ok(best)
            }
        }
    }
}
