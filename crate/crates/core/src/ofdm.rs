//! Frequency-grid mapping and unitary OFDM transforms.
//!
//! A single-symbol circular model: sequences map onto `K` subcarriers
//! (optionally comb-interleaved), transforms use 1/√K scaling in both
//! directions so energy checks are symmetric, and channels act as circular
//! convolutions on the grid. A cyclic prefix would realize the same circular
//! structure physically; simulating it directly is equivalent.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::{fft, Complex, ComplexSeq};

/// OFDM numerology and mapping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// FFT size `K`.
    pub fft_size: usize,
    /// Subcarrier spacing in Hz.
    pub scs_hz: f64,
    /// Sampling rate in Hz; must equal `fft_size · scs_hz`.
    pub sample_rate_hz: f64,
    /// Carrier frequency in Hz (metadata only).
    pub carrier_hz: f64,
    /// Index of the first occupied subcarrier.
    pub first_bin: usize,
    /// Comb interleave factor (1 = contiguous, 2 = every other bin).
    pub comb: usize,
    /// Offset within the comb, in `[0, comb)`.
    pub comb_offset: usize,
}

impl OfdmConfig {
    pub fn new(fft_size: usize, scs_hz: f64, carrier_hz: f64) -> Self {
        Self {
            fft_size,
            scs_hz,
            sample_rate_hz: fft_size as f64 * scs_hz,
            carrier_hz,
            first_bin: 0,
            comb: 1,
            comb_offset: 0,
        }
    }

    /// Copy of this config with a different comb layout.
    pub fn with_comb(mut self, comb: usize, comb_offset: usize) -> Self {
        self.comb = comb;
        self.comb_offset = comb_offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 {
            return Err(SimError::Validation("fft_size must be positive".into()));
        }
        if self.scs_hz <= 0.0 {
            return Err(SimError::Validation("scs_hz must be positive".into()));
        }
        let expected = self.fft_size as f64 * self.scs_hz;
        if (self.sample_rate_hz - expected).abs() > 1e-6 * expected {
            return Err(SimError::Validation(format!(
                "sample_rate_hz {} inconsistent with fft_size·scs_hz = {expected}",
                self.sample_rate_hz
            )));
        }
        if self.comb == 0 || self.comb_offset >= self.comb {
            return Err(SimError::Validation(format!(
                "comb {} / comb_offset {} invalid",
                self.comb, self.comb_offset
            )));
        }
        if self.first_bin >= self.fft_size {
            return Err(SimError::Validation(format!(
                "first_bin {} outside grid of {}",
                self.first_bin, self.fft_size
            )));
        }
        Ok(())
    }

    /// Absolute bin index of the `i`-th mapped sample.
    pub fn bin_of(&self, i: usize) -> usize {
        self.first_bin + self.comb * i + self.comb_offset
    }

    /// Absolute indices of `count` occupied bins in mapping order.
    pub fn occupied_bins(&self, count: usize) -> impl Iterator<Item = usize> + '_ {
        (0..count).map(move |i| self.bin_of(i))
    }
}

/// A length-`K` frequency grid; unoccupied resource elements stay exactly
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    pub bins: Vec<Complex>,
    pub config: OfdmConfig,
}

impl FreqGrid {
    pub fn zeroed(config: OfdmConfig) -> Self {
        Self {
            bins: vec![Complex::new(0.0, 0.0); config.fft_size],
            config,
        }
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Element-wise sum with another grid of the same size.
    pub fn add(&self, other: &FreqGrid) -> Result<FreqGrid> {
        if other.bins.len() != self.bins.len() {
            return Err(SimError::LengthMismatch {
                expected: self.bins.len(),
                got: other.bins.len(),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        Ok(out)
    }
}

/// Place `s` on the grid: sample `i` lands at bin
/// `first_bin + comb·i + comb_offset`; every other bin is zero.
pub fn map_to_grid(s: &[Complex], cfg: &OfdmConfig) -> Result<FreqGrid> {
    cfg.validate()?;
    if !s.is_empty() {
        let last = cfg.bin_of(s.len() - 1);
        if last >= cfg.fft_size {
            return Err(SimError::Overflow(format!(
                "{} samples at comb {} from bin {} need bin {last} ≥ K = {}",
                s.len(),
                cfg.comb,
                cfg.first_bin,
                cfg.fft_size
            )));
        }
    }
    let mut grid = FreqGrid::zeroed(*cfg);
    for (i, v) in s.iter().enumerate() {
        grid.bins[cfg.bin_of(i)] = *v;
    }
    Ok(grid)
}

/// Inverse transform to the time domain, unitary (1/√K).
pub fn to_time(g: &FreqGrid) -> ComplexSeq {
    fft::idft_unitary(&g.bins)
}

/// Forward transform back to the frequency grid, unitary (1/√K).
pub fn to_freq(t: &[Complex], cfg: &OfdmConfig) -> Result<FreqGrid> {
    if t.len() != cfg.fft_size {
        return Err(SimError::LengthMismatch {
            expected: cfg.fft_size,
            got: t.len(),
        });
    }
    Ok(FreqGrid {
        bins: fft::dft_unitary(t),
        config: *cfg,
    })
}

/// Read back `count` mapped samples in mapping order.
pub fn extract_occupied(g: &FreqGrid, count: usize) -> Result<ComplexSeq> {
    let cfg = &g.config;
    if count > 0 && cfg.bin_of(count - 1) >= g.bins.len() {
        return Err(SimError::Overflow(format!(
            "extraction of {count} samples exceeds grid of {}",
            g.bins.len()
        )));
    }
    Ok(cfg.occupied_bins(count).map(|b| g.bins[b]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::rms_diff;
    use crate::sequences::{zc_generate, ZcParams};
    use proptest::prelude::*;

    fn testbed_cfg() -> OfdmConfig {
        OfdmConfig::new(1536, 30e3, 3.69e9)
    }

    #[test]
    fn testbed_rates_are_consistent() {
        let cfg = testbed_cfg();
        assert_eq!(cfg.sample_rate_hz, 46.08e6);
        cfg.validate().unwrap();
    }

    #[test]
    fn map_full_urs_band() {
        let seq = zc_generate(&ZcParams::new(1259, 1).unwrap());
        let g = map_to_grid(&seq, &testbed_cfg()).unwrap();
        for k in 0..1259 {
            assert!(g.bins[k].norm() > 0.0);
        }
        for k in 1259..1536 {
            assert_eq!(g.bins[k], Complex::new(0.0, 0.0));
        }
    }

    #[test]
    fn map_empty_sequence_gives_zero_grid() {
        let g = map_to_grid(&[], &testbed_cfg()).unwrap();
        assert!(g.bins.iter().all(|v| *v == Complex::new(0.0, 0.0)));
    }

    #[test]
    fn map_comb2_offset1_lands_on_odd_bins() {
        let cfg = testbed_cfg().with_comb(2, 1);
        let s = vec![Complex::new(1.0, 0.0); 4];
        let g = map_to_grid(&s, &cfg).unwrap();
        let populated: Vec<usize> = g
            .bins
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(populated, vec![1, 3, 5, 7]);
    }

    #[test]
    fn map_overflow_is_an_error() {
        let seq = vec![Complex::new(1.0, 0.0); 1537];
        assert!(matches!(
            map_to_grid(&seq, &testbed_cfg()),
            Err(SimError::Overflow(_))
        ));
    }

    #[test]
    fn zero_grid_transforms_to_zero_signal() {
        let t = to_time(&FreqGrid::zeroed(testbed_cfg()));
        assert!(t.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn dc_bin_gives_constant_signal() {
        let mut g = FreqGrid::zeroed(testbed_cfg());
        g.bins[0] = Complex::new(1.0, 0.0);
        let t = to_time(&g);
        let expected = 1.0 / (1536f64).sqrt();
        for v in &t {
            assert!((v - Complex::new(expected, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn transforms_invert_each_other() {
        let cfg = testbed_cfg();
        let seq = zc_generate(&ZcParams::new(1259, 3).unwrap());
        let g = map_to_grid(&seq, &cfg).unwrap();
        let back = to_freq(&to_time(&g), &cfg).unwrap();
        assert!(rms_diff(&g.bins, &back.bins) <= 1e-9);
    }

    #[test]
    fn parseval_energy_preserved() {
        let cfg = testbed_cfg();
        let seq = zc_generate(&ZcParams::new(1259, 3).unwrap());
        let g = map_to_grid(&seq, &cfg).unwrap();
        let t = to_time(&g);
        let e_f = g.energy();
        let e_t: f64 = t.iter().map(|v| v.norm_sqr()).sum();
        assert!((e_f - e_t).abs() <= 1e-9 * e_f);
    }

    #[test]
    fn extract_inverts_map() {
        let cfg = testbed_cfg().with_comb(2, 0);
        let seq = zc_generate(&ZcParams::new(509, 2).unwrap());
        let g = map_to_grid(&seq, &cfg).unwrap();
        assert_eq!(extract_occupied(&g, seq.len()).unwrap(), seq);
        assert!(extract_occupied(&g, 0).unwrap().is_empty());
        assert!(matches!(
            extract_occupied(&g, 1024),
            Err(SimError::Overflow(_))
        ));
    }

    #[test]
    fn comb_users_stay_disjoint() {
        let cfg_a = testbed_cfg().with_comb(2, 0);
        let cfg_b = testbed_cfg().with_comb(2, 1);
        let sa = vec![Complex::new(1.0, 0.0); 509];
        let sb = vec![Complex::new(0.0, 1.0); 509];
        let ga = map_to_grid(&sa, &cfg_a).unwrap();
        let gb = map_to_grid(&sb, &cfg_b).unwrap();
        // No bin is populated in both grids.
        for (a, b) in ga.bins.iter().zip(&gb.bins) {
            assert!(a.norm() == 0.0 || b.norm() == 0.0);
        }
        let sum = ga.add(&gb).unwrap();
        assert_eq!(extract_occupied(&sum, 509).unwrap(), sa);
        let mut grid_b_view = sum.clone();
        grid_b_view.config = cfg_b;
        assert_eq!(extract_occupied(&grid_b_view, 509).unwrap(), sb);
    }

    proptest! {
        #[test]
        fn prop_map_extract_roundtrip(len in 0usize..300, comb in 1usize..3, off in 0usize..2) {
            let off = off % comb;
            let cfg = OfdmConfig::new(1024, 15e3, 1e9).with_comb(comb, off);
            let s: Vec<Complex> = (0..len)
                .map(|i| Complex::new(i as f64 * 0.25 - 3.0, (i % 7) as f64))
                .collect();
            prop_assume!(len == 0 || cfg.bin_of(len - 1) < 1024);
            let g = map_to_grid(&s, &cfg).unwrap();
            prop_assert_eq!(extract_occupied(&g, len).unwrap(), s);
        }

        #[test]
        fn prop_roundtrip_rms(seed in 0u64..512) {
            let cfg = OfdmConfig::new(256, 15e3, 1e9);
            let mut rng = crate::rng::chacha(seed);
            let mut g = FreqGrid::zeroed(cfg);
            for v in &mut g.bins {
                let (a, b) = crate::rng::standard_normal_pair(&mut rng);
                *v = Complex::new(a, b);
            }
            let back = to_freq(&to_time(&g), &cfg).unwrap();
            prop_assert!(rms_diff(&g.bins, &back.bins) <= 1e-9);
        }
    }
}
