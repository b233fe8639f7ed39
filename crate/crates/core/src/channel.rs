//! Propagation, multipath and noise models, plus the UE/gNB timing
//! relationship the ranging scheme exploits.
//!
//! All timing is kept in fractional `f_s` samples internally; seconds and
//! meters appear only at API boundaries. Channels act in the frequency
//! domain, which realizes circular convolution on the single-symbol grid
//! exactly.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::ofdm::{FreqGrid, OfdmConfig};
use crate::{rng, Complex, SPEED_OF_LIGHT};

/// One multipath tap: delay relative to the symbol reference, complex gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelTap {
    pub delay_s: f64,
    pub gain_re: f64,
    pub gain_im: f64,
}

impl ChannelTap {
    pub fn new(delay_s: f64, gain: Complex) -> Self {
        Self {
            delay_s,
            gain_re: gain.re,
            gain_im: gain.im,
        }
    }

    pub fn gain(&self) -> Complex {
        Complex::new(self.gain_re, self.gain_im)
    }
}

/// Static multipath channel with an optional constant hardware delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub taps: Vec<ChannelTap>,
    /// Target SNR in dB when the scenario does not sweep it; `None` means
    /// noiseless.
    pub snr_db: Option<f64>,
    /// Constant hardware delay in seconds, applied on every pass through the
    /// channel (calibration models subtract its known contribution later).
    pub hw_offset_s: f64,
}

impl ChannelSpec {
    /// Single line-of-sight tap with unit gain, no hardware delay.
    pub fn los() -> Self {
        Self {
            taps: vec![ChannelTap::new(0.0, Complex::new(1.0, 0.0))],
            snr_db: None,
            hw_offset_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(SimError::Validation("channel needs at least one tap".into()));
        }
        let first = self.taps[0].delay_s;
        for t in &self.taps {
            if t.delay_s < 0.0 {
                return Err(SimError::Validation(format!(
                    "tap delay {} is negative",
                    t.delay_s
                )));
            }
            if t.delay_s < first {
                return Err(SimError::Validation(
                    "first tap must be the minimum-delay tap".into(),
                ));
            }
        }
        Ok(())
    }
}

/// UE/gNB timing relationship for one measurement round.
///
/// The UE's downlink reference time leads the true first arrival by
/// `p_d_true` samples, i.e. `ue_sync_offset = tau - p_d_true`, which makes
/// the uplink arrival offset at the gNB equal `2·tau - ta - p_d_true`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingState {
    /// One-way propagation delay in fractional samples.
    pub tau: f64,
    /// Timing advance currently applied by the UE, integer samples.
    pub ta: u32,
    /// UE downlink symbol-reference time relative to gNB transmit time.
    pub ue_sync_offset: f64,
    /// Residual sync error: delay of the first arrival in the UE's own
    /// receive window.
    pub p_d_true: f64,
}

impl TimingState {
    pub fn new(tau: f64, ta: u32, p_d_true: f64) -> Result<Self> {
        if tau < 0.0 {
            return Err(SimError::InvalidParams(format!("tau {tau} < 0")));
        }
        if p_d_true < 0.0 {
            return Err(SimError::InvalidParams(format!("p_d_true {p_d_true} < 0")));
        }
        Ok(Self {
            tau,
            ta,
            ue_sync_offset: tau - p_d_true,
            p_d_true,
        })
    }

    /// Arrival offset of the UE's uplink transmission in the gNB receive
    /// window: `ue_sync_offset - ta + tau`.
    pub fn uplink_arrival_offset(&self) -> f64 {
        self.ue_sync_offset - self.ta as f64 + self.tau
    }
}

/// One-way propagation delay of `distance_m` in fractional samples.
pub fn propagation_delay(distance_m: f64, cfg: &OfdmConfig) -> f64 {
    distance_m * cfg.sample_rate_hz / SPEED_OF_LIGHT
}

/// Apply the channel in the frequency domain:
/// `out[k] = g[k]·H[k]·exp(-j2πk·τ_total/K)` with
/// `H[k] = Σ_l gain_l·exp(-j2πk·delay_l·f_s/K)` and
/// `τ_total = extra_delay + hw_offset·f_s` (samples).
pub fn apply_channel(g: &FreqGrid, spec: &ChannelSpec, extra_delay_samples: f64) -> FreqGrid {
    let k_total = g.bins.len() as f64;
    let fs = g.config.sample_rate_hz;
    let tau_total = extra_delay_samples + spec.hw_offset_s * fs;
    let mut out = g.clone();
    for (k, v) in out.bins.iter_mut().enumerate() {
        if v.norm_sqr() == 0.0 {
            continue;
        }
        let mut h = Complex::new(0.0, 0.0);
        for tap in &spec.taps {
            let d = tap.delay_s * fs;
            h += tap.gain()
                * Complex::from_polar(1.0, -std::f64::consts::TAU * k as f64 * d / k_total);
        }
        let ramp =
            Complex::from_polar(1.0, -std::f64::consts::TAU * k as f64 * tau_total / k_total);
        *v *= h * ramp;
    }
    out
}

/// Add circular complex white Gaussian noise to every bin, calibrated so
/// that mean occupied-bin signal power over per-bin noise power equals
/// `10^(snr_db/10)`. Non-finite `snr_db` returns the grid unchanged.
pub fn add_awgn_rng(g: &FreqGrid, snr_db: f64, rng: &mut ChaCha8Rng) -> Result<FreqGrid> {
    if !snr_db.is_finite() {
        return Ok(g.clone());
    }
    let occupied: Vec<f64> = g
        .bins
        .iter()
        .filter(|v| v.norm_sqr() > 0.0)
        .map(|v| v.norm_sqr())
        .collect();
    if occupied.is_empty() {
        return Err(SimError::ZeroEnergy);
    }
    let mean_signal = occupied.iter().sum::<f64>() / occupied.len() as f64;
    let noise_power = mean_signal / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut out = g.clone();
    for v in &mut out.bins {
        let (a, b) = rng::standard_normal_pair(rng);
        *v += Complex::new(sigma * a, sigma * b);
    }
    Ok(out)
}

/// Seeded convenience wrapper around [`add_awgn_rng`].
pub fn add_awgn(g: &FreqGrid, snr_db: f64, seed: u64) -> Result<FreqGrid> {
    add_awgn_rng(g, snr_db, &mut rng::chacha(seed))
}

/// Coarse RACH-style timing advance: `2·tau` plus a uniform jitter, rounded
/// to the nearest multiple of `granularity` samples and clamped at zero.
pub fn model_ta(tau: f64, granularity: u32, jitter: f64, rng: &mut ChaCha8Rng) -> u32 {
    assert!(granularity >= 1, "granularity must be >= 1");
    let j = if jitter > 0.0 {
        (rng::uniform_f64(rng) * 2.0 - 1.0) * jitter
    } else {
        0.0
    };
    let raw = 2.0 * tau + j;
    let g = granularity as f64;
    let quantized = (raw / g).round() * g;
    quantized.max(0.0) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{map_to_grid, to_time, FreqGrid, OfdmConfig};
    use crate::oracle;
    use crate::sequences::{zc_generate, ZcParams};

    fn testbed_cfg() -> OfdmConfig {
        OfdmConfig::new(1536, 30e3, 3.69e9)
    }

    fn urs_grid() -> FreqGrid {
        let seq = zc_generate(&ZcParams::new(1259, 1).unwrap());
        map_to_grid(&seq, &testbed_cfg()).unwrap()
    }

    #[test]
    fn zero_distance_zero_delay() {
        assert_eq!(propagation_delay(0.0, &testbed_cfg()), 0.0);
    }

    #[test]
    fn one_sample_distance() {
        let cfg = testbed_cfg();
        let d = SPEED_OF_LIGHT / cfg.sample_rate_hz;
        assert!((propagation_delay(d, &cfg) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ten_meters_at_testbed_rate() {
        let cfg = testbed_cfg();
        let delay = propagation_delay(10.0, &cfg);
        let expected = 10.0 * 46.08e6 / SPEED_OF_LIGHT;
        assert!((delay - expected).abs() < 1e-12);
        assert!((delay - 1.5371).abs() < 2e-4, "delay {delay}");
    }

    #[test]
    fn identity_channel_is_identity() {
        let g = urs_grid();
        let out = apply_channel(&g, &ChannelSpec::los(), 0.0);
        assert!(oracle::rms_diff(&g.bins, &out.bins) <= 1e-12);
    }

    #[test]
    fn integer_delay_matches_time_domain_shift() {
        let g = urs_grid();
        for d in [1usize, 17, 200] {
            let delayed = apply_channel(&g, &ChannelSpec::los(), d as f64);
            let t_freq_path = to_time(&delayed);
            let t_shifted = oracle::cyclic_delay(&to_time(&g), d);
            assert!(
                oracle::rms_diff(&t_freq_path, &t_shifted) <= 1e-9,
                "delay {d}"
            );
        }
    }

    #[test]
    fn half_sample_delay_splits_energy_symmetrically() {
        // Flat spectrum on all K bins so the time-domain response is a
        // Dirichlet kernel centered between two samples.
        let cfg = testbed_cfg();
        let mut g = FreqGrid::zeroed(cfg);
        for v in &mut g.bins {
            *v = Complex::new(1.0, 0.0);
        }
        let out = to_time(&apply_channel(&g, &ChannelSpec::los(), 10.5));
        let m10 = out[10].norm();
        let m11 = out[11].norm();
        assert!((m10 - m11).abs() <= 1e-9 * m10, "{m10} vs {m11}");
        let peak = out.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((m10 - peak).abs() <= 1e-9 * peak, "peak not between 10 and 11");
    }

    #[test]
    fn channel_is_linear() {
        let spec = ChannelSpec {
            taps: vec![
                ChannelTap::new(0.0, Complex::new(1.0, 0.0)),
                ChannelTap::new(4.0 / 46.08e6, Complex::new(0.3, -0.4)),
            ],
            snr_db: None,
            hw_offset_s: 0.0,
        };
        let g1 = urs_grid();
        let mut g2 = g1.clone();
        for (k, v) in g2.bins.iter_mut().enumerate() {
            *v *= Complex::new(0.2, 0.1 * (k % 3) as f64);
        }
        let a = Complex::new(0.7, -0.1);
        let b = Complex::new(-1.3, 0.4);
        let mut combo = g1.clone();
        for (k, v) in combo.bins.iter_mut().enumerate() {
            *v = a * g1.bins[k] + b * g2.bins[k];
        }
        let lhs = apply_channel(&combo, &spec, 2.5);
        let y1 = apply_channel(&g1, &spec, 2.5);
        let y2 = apply_channel(&g2, &spec, 2.5);
        let mut rhs = y1.clone();
        for (k, v) in rhs.bins.iter_mut().enumerate() {
            *v = a * y1.bins[k] + b * y2.bins[k];
        }
        assert!(oracle::rms_diff(&lhs.bins, &rhs.bins) <= 1e-9);
    }

    #[test]
    fn extreme_snr_leaves_signal_untouched() {
        let g = urs_grid();
        let out = add_awgn(&g, 300.0, 7).unwrap();
        assert!(oracle::rms_diff(&g.bins, &out.bins) <= 1e-6);
    }

    #[test]
    fn noise_power_calibration_within_tenth_db() {
        // All bins occupied so measured SNR is straightforward.
        let k = 1 << 17; // 131072 bins ≥ 1e5
        let cfg = OfdmConfig::new(k, 1.0, 0.0);
        let mut g = FreqGrid::zeroed(cfg);
        for v in &mut g.bins {
            *v = Complex::new(1.0, 0.0);
        }
        let noisy = add_awgn(&g, 0.0, 99).unwrap();
        let noise_power: f64 = noisy
            .bins
            .iter()
            .zip(&g.bins)
            .map(|(y, x)| (y - x).norm_sqr())
            .sum::<f64>()
            / k as f64;
        let measured_db = 10.0 * (1.0 / noise_power).log10();
        assert!(measured_db.abs() <= 0.1, "measured {measured_db} dB");
    }

    #[test]
    fn same_seed_same_noise() {
        let g = urs_grid();
        let a = add_awgn(&g, 0.0, 5).unwrap();
        let b = add_awgn(&g, 0.0, 5).unwrap();
        assert_eq!(a.bins, b.bins);
    }

    #[test]
    fn awgn_rejects_silent_grid() {
        let g = FreqGrid::zeroed(testbed_cfg());
        assert!(matches!(add_awgn(&g, 0.0, 1), Err(SimError::ZeroEnergy)));
    }

    #[test]
    fn ta_exact_quantization() {
        let mut rng = crate::rng::chacha(0);
        assert_eq!(model_ta(100.0, 1, 0.0, &mut rng), 200);
    }

    #[test]
    fn ta_rounds_to_granularity() {
        let mut rng = crate::rng::chacha(0);
        // 2·100.3 = 200.6; nearest multiple of 8 is 200.
        assert_eq!(model_ta(100.3, 8, 0.0, &mut rng), 200);
    }

    #[test]
    fn ta_jitter_stays_bounded() {
        let mut rng = crate::rng::chacha(11);
        for _ in 0..500 {
            let ta = model_ta(100.0, 1, 4.0, &mut rng);
            assert!((ta as f64 - 200.0).abs() <= 4.0, "ta {ta}");
        }
    }

    #[test]
    fn timing_state_arrival_identity() {
        let t = TimingState::new(150.0, 280, 20.0).unwrap();
        assert_eq!(t.ue_sync_offset, 130.0);
        let arrival = t.uplink_arrival_offset();
        assert!((arrival - (2.0 * 150.0 - 280.0 - 20.0)).abs() < 1e-12);
    }
}
