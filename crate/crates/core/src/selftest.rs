//! The acceptance checks behind `ursim selftest` and the `acceptance`
//! integration suite: sequence identities, the end-to-end RTT = 2τ property,
//! the two-root extension, the estimator-quality bounds, oracle
//! equivalences, and sweep determinism. Every tolerance is pinned here.

use std::time::{Duration, Instant};

use crate::channel::{apply_channel, ChannelSpec, TimingState};
use crate::error::Result;
use crate::estimators::percentile;
use crate::harness::{
    export_to_writer, run_sweep, EstimatorKind, ExportFormat, ScenarioConfig, TrialRecord,
};
use crate::ofdm::{map_to_grid, to_time, OfdmConfig};
use crate::oracle;
use crate::sequences::{cyclic_xcorr, zc_generate, MultiRootConfig, ZcParams};
use crate::urs_rtt::{run_protocol_round, RoundConfig, ShiftMode};
use crate::{rng, Complex, SPEED_OF_LIGHT};

/// Testbed numerology used throughout the checks.
fn testbed_cfg() -> OfdmConfig {
    OfdmConfig::new(1536, 30e3, 3.69e9)
}

const N_ZC: usize = 1259;
const LOW_SNR_DB: f64 = -20.0;
const HIGH_SNR_DB: f64 = 30.0;
/// Desk-scale analog of the reported low-SNR 90th percentile: twice the
/// hardware figure of 0.8 m, since the exact front-end gain chain is not
/// reproduced here.
const P90_LOW_SNR_MF_LIMIT_M: f64 = 1.6;

/// One-way distance spanned by a single sample at the testbed rate.
pub fn sample_distance_m() -> f64 {
    SPEED_OF_LIGHT / (2.0 * testbed_cfg().sample_rate_hz)
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub runtime: Duration,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:<20} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.runtime.as_secs_f64(),
            self.detail
        )
    }
}

/// Problem sizes for the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Reduced trial counts for a fast smoke run.
    Quick,
    /// The full acceptance scale.
    Full,
}

impl Scale {
    fn rtt_trials(self) -> usize {
        match self {
            Scale::Quick => 100,
            Scale::Full => 500,
        }
    }

    fn multi_root_trials(self) -> usize {
        match self {
            Scale::Quick => 200,
            Scale::Full => 1000,
        }
    }

    /// Trials per (distance, SNR, M) point; 8 distances make 2000 trials
    /// per estimator configuration at full scale.
    fn trials_per_point(self) -> usize {
        match self {
            Scale::Quick => 25,
            Scale::Full => 250,
        }
    }

    fn determinism_trials(self) -> usize {
        match self {
            Scale::Quick => 6,
            Scale::Full => 50,
        }
    }
}

#[derive(Debug)]
pub struct SelftestReport {
    pub scale: Scale,
    pub checks: Vec<Check>,
    pub total_runtime: Duration,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.line());
            out.push('\n');
        }
        out.push_str(&format!(
            "{} of {} checks passed in {:.1}s ({:?} scale)\n",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len(),
            self.total_runtime.as_secs_f64(),
            self.scale
        ));
        out
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Run every acceptance check in order.
pub fn run_all(scale: Scale) -> SelftestReport {
    let t0 = Instant::now();
    let mut checks = vec![
        check_zc_identities(),
        check_rtt_identity(scale.rtt_trials()),
        check_multi_root(scale.multi_root_trials()),
    ];
    match estimator_sweep(scale.trials_per_point()) {
        Ok(records) => {
            checks.push(check_low_snr_headline(&records));
            checks.push(check_estimator_ordering(&records));
        }
        Err(e) => {
            let detail = format!("estimator sweep failed: {e}");
            checks.push(Check {
                name: "low-snr-headline",
                passed: false,
                detail: detail.clone(),
                runtime: Duration::ZERO,
            });
            checks.push(Check {
                name: "estimator-ordering",
                passed: false,
                detail,
                runtime: Duration::ZERO,
            });
        }
    }
    checks.push(check_oracle_equivalences());
    checks.push(check_determinism(scale.determinism_trials()));
    SelftestReport {
        scale,
        checks,
        total_runtime: t0.elapsed(),
    }
}

/// Criterion: delta autocorrelation and flat `1/√N` cross-correlation for 20
/// sampled roots at the testbed sequence length, all lags within 1e-9,
/// in under 10 s.
pub fn check_zc_identities() -> Check {
    let t0 = Instant::now();
    let roots: Vec<usize> = (0..20).map(|i| 1 + 66 * i).collect();
    let mut worst_auto = 0.0f64;
    let mut worst_cross = 0.0f64;
    let flat = 1.0 / (N_ZC as f64).sqrt();
    for (i, &q) in roots.iter().enumerate() {
        let x = zc_generate(&ZcParams::new(N_ZC, q).unwrap());
        let auto = cyclic_xcorr(&x, &x).unwrap();
        worst_auto = worst_auto.max((auto[0] - Complex::new(1.0, 0.0)).norm());
        for v in &auto[1..] {
            worst_auto = worst_auto.max(v.norm());
        }
        let q2 = roots[(i + 1) % roots.len()];
        let y = zc_generate(&ZcParams::new(N_ZC, q2).unwrap());
        let cross = cyclic_xcorr(&x, &y).unwrap();
        for v in &cross {
            worst_cross = worst_cross.max((v.norm() - flat).abs());
        }
    }
    let runtime = t0.elapsed();
    let passed = worst_auto <= 1e-9 && worst_cross <= 1e-9 && runtime.as_secs_f64() < 10.0;
    Check {
        name: "zc-identities",
        passed,
        detail: format!(
            "20 roots at N={N_ZC}: autocorr deviation {worst_auto:.2e}, \
             cross-corr flatness deviation {worst_cross:.2e} (limit 1e-9)"
        ),
        runtime,
    }
}

/// Criterion: noiseless line of sight at testbed parameters in consistent
/// shift mode recovers RTT = 2τ within one sample in 100% of random rounds,
/// in under 30 s. Offsets under the literal published conversion are
/// measured and reported, not asserted.
pub fn check_rtt_identity(trials: usize) -> Check {
    let t0 = Instant::now();
    let ofdm = testbed_cfg();
    let base = ZcParams::new(N_ZC, 1).unwrap();
    let mut r = rng::chacha(0x5eed_0002);
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let tau = rng::uniform_u32_inclusive(&mut r, 760) as f64;
        let p_max = (2.0 * tau).min(24.0) as u32;
        let p_d = rng::uniform_u32_inclusive(&mut r, p_max);
        let ta_max = (2.0 * tau) as u32 - p_d;
        let ta = rng::uniform_u32_inclusive(&mut r, ta_max);
        let cfg = RoundConfig::new(
            ofdm,
            base,
            TimingState::new(tau, ta, p_d as f64).unwrap(),
        );
        match run_protocol_round(&cfg, rng::derive_seed(0x5eed_0003, trial as u64)) {
            Ok((rtt, _)) => {
                let err = (rtt.rtt_samples - 2.0 * tau).abs();
                worst = worst.max(err);
                if err > 1.0 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }

    // Literal-formula fidelity measurement: realized CIR offset over the
    // intended TA + p_d, expected near (K/N_ZC)² ≈ 1.49.
    let mut paper_ratios = Vec::new();
    for trial in 0..20u64 {
        let total = 50 + 10 * trial as u32;
        let mut cfg = RoundConfig::new(
            ofdm,
            base,
            TimingState::new(total as f64 / 2.0 + 4.0, total, 0.0).unwrap(),
        );
        cfg.shift_mode = ShiftMode::PaperEq5;
        if let Ok((rtt, _)) = run_protocol_round(&cfg, trial) {
            // Arrival offset is 8 - missing sync error; subtract it out.
            let realized_shift = rtt.rtt_samples - 8.0;
            paper_ratios.push(realized_shift / total as f64);
        }
    }
    let mean_ratio = paper_ratios.iter().sum::<f64>() / paper_ratios.len().max(1) as f64;

    let runtime = t0.elapsed();
    let passed = failures == 0 && runtime.as_secs_f64() < 30.0;
    Check {
        name: "rtt-identity",
        passed,
        detail: format!(
            "{trials} noiseless rounds: {failures} outside ±1 sample, worst \
             |rtt-2τ| = {worst:.3} samples; literal-mode offset ratio ≈ \
             {mean_ratio:.3}× (consistent mode is 1.0×, not asserted)"
        ),
        runtime,
    }
}

/// Criterion: with the total shift drawn uniformly over both root windows,
/// the correct base sequence is detected in 100% of noiseless trials and the
/// reconstructed RTT stays within one sample.
pub fn check_multi_root(trials: usize) -> Check {
    let t0 = Instant::now();
    let ofdm = testbed_cfg();
    let roots = MultiRootConfig::new(N_ZC, vec![1, 2]).unwrap();
    let mut r = rng::chacha(0x5eed_0004);
    let mut wrong_root = 0usize;
    let mut rtt_failures = 0usize;
    let mut errors = 0usize;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        // Draw the target shift-unit count uniformly over [0, 2·N_ZC), then
        // find a sample total that lands exactly on it.
        let units = rng::uniform_u32_inclusive(&mut r, 2 * N_ZC as u32 - 1) as u64;
        let total = if units == 0 {
            0
        } else {
            (units * ofdm.fft_size as u64 / N_ZC as u64).max(1)
        } as u32;
        let p_d = rng::uniform_u32_inclusive(&mut r, total.min(20));
        let ta = total - p_d;
        // Integer τ with the arrival residual 0 or 1 sample.
        let tau = (total as f64 / 2.0).ceil();
        let expected_root = (units as usize >= N_ZC) as usize;

        let mut cfg = RoundConfig::new(
            ofdm,
            roots.base(0),
            TimingState::new(tau, ta, p_d as f64).unwrap(),
        );
        cfg.multi_root = Some(roots.clone());
        match run_protocol_round(&cfg, rng::derive_seed(0x5eed_0005, trial as u64)) {
            Ok((rtt, _)) => {
                if rtt.root_used != expected_root {
                    wrong_root += 1;
                }
                let err = (rtt.rtt_samples - 2.0 * tau).abs();
                worst = worst.max(err);
                if err > 1.0 {
                    rtt_failures += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    let passed = wrong_root == 0 && rtt_failures == 0 && errors == 0;
    Check {
        name: "multi-root",
        passed,
        detail: format!(
            "{trials} trials over both windows: {wrong_root} wrong roots, \
             {rtt_failures} RTTs outside ±1 sample, {errors} round errors, \
             worst |rtt-2τ| = {worst:.3} samples"
        ),
        runtime: t0.elapsed(),
    }
}

/// The shared Monte Carlo sweep behind the estimator criteria: distances
/// 3–10 m, high and low SNR presets, M ∈ {20, 60}, both estimators.
pub fn estimator_sweep(trials_per_point: usize) -> Result<Vec<TrialRecord>> {
    let cfg = ScenarioConfig {
        snr_points: vec![HIGH_SNR_DB, LOW_SNR_DB],
        m_values: vec![20, 60],
        trials_per_point,
        master_seed: 0x5eed_0006,
        ..ScenarioConfig::default()
    };
    run_sweep(&cfg)
}

fn p90_of(records: &[TrialRecord], est: EstimatorKind, snr: f64, m: usize) -> (f64, usize) {
    let errors: Vec<f64> = records
        .iter()
        .filter(|r| r.estimator == est && r.snr_db == snr && r.m == m && r.is_ok())
        .map(|r| r.error_m)
        .collect();
    let p90 = percentile(&errors, 0.9).unwrap_or(f64::NAN);
    (p90, errors.len())
}

/// Criterion: at -20 dB with M = 20, the matched filter's 90th-percentile
/// range error stays at or below 1.6 m (twice the reported hardware figure);
/// the measured value is reported.
pub fn check_low_snr_headline(records: &[TrialRecord]) -> Check {
    let t0 = Instant::now();
    let (p90, n) = p90_of(records, EstimatorKind::Mf, LOW_SNR_DB, 20);
    let passed = p90.is_finite() && p90 <= P90_LOW_SNR_MF_LIMIT_M;
    Check {
        name: "low-snr-headline",
        passed,
        detail: format!(
            "MF at {LOW_SNR_DB} dB, M=20: p90 = {p90:.3} m over {n} trials \
             (limit {P90_LOW_SNR_MF_LIMIT_M} m)"
        ),
        runtime: t0.elapsed(),
    }
}

/// Criterion: MF beats PD at low SNR; the two agree within one
/// sample-distance at high SNR; and raising M from 20 to 60 does not worsen
/// the 90th percentile for either estimator.
pub fn check_estimator_ordering(records: &[TrialRecord]) -> Check {
    let t0 = Instant::now();
    let sample_m = sample_distance_m();
    let (mf_low_20, n1) = p90_of(records, EstimatorKind::Mf, LOW_SNR_DB, 20);
    let (pd_low_20, _) = p90_of(records, EstimatorKind::Pd, LOW_SNR_DB, 20);
    let (mf_high_20, _) = p90_of(records, EstimatorKind::Mf, HIGH_SNR_DB, 20);
    let (pd_high_20, _) = p90_of(records, EstimatorKind::Pd, HIGH_SNR_DB, 20);
    let (mf_low_60, _) = p90_of(records, EstimatorKind::Mf, LOW_SNR_DB, 60);
    let (pd_low_60, _) = p90_of(records, EstimatorKind::Pd, LOW_SNR_DB, 60);
    let (mf_high_60, _) = p90_of(records, EstimatorKind::Mf, HIGH_SNR_DB, 60);
    let (pd_high_60, _) = p90_of(records, EstimatorKind::Pd, HIGH_SNR_DB, 60);

    let low_snr_ordering = mf_low_20 < pd_low_20;
    let high_snr_agreement = (mf_high_20 - pd_high_20).abs() <= sample_m;
    let more_measurements_help = mf_low_60 <= mf_low_20
        && pd_low_60 <= pd_low_20
        && mf_high_60 <= mf_high_20
        && pd_high_60 <= pd_high_20;
    let passed = low_snr_ordering && high_snr_agreement && more_measurements_help;
    Check {
        name: "estimator-ordering",
        passed,
        detail: format!(
            "p90 [m] over {n1} trials/config — low SNR M20: MF {mf_low_20:.3} < PD \
             {pd_low_20:.3} ({low_snr_ordering}); high SNR M20: |{mf_high_20:.3} - \
             {pd_high_20:.3}| ≤ {sample_m:.3} ({high_snr_agreement}); M60 ≤ M20: MF \
             {mf_low_60:.3}/{mf_high_60:.3}, PD {pd_low_60:.3}/{pd_high_60:.3} \
             ({more_measurements_help})"
        ),
        runtime: t0.elapsed(),
    }
}

/// Criterion: the fast implementation paths match their independent oracles
/// — frequency-domain integer delays against time-domain rotation, FFT
/// correlation against the direct sum, and covariance Hermitian/PSD
/// structure on random batches.
pub fn check_oracle_equivalences() -> Check {
    let t0 = Instant::now();
    let mut failures = Vec::new();

    // Frequency-domain delay vs time-domain cyclic shift, 1e-9 RMS.
    let cfg = testbed_cfg();
    let grid = map_to_grid(&zc_generate(&ZcParams::new(N_ZC, 5).unwrap()), &cfg).unwrap();
    let reference_time = to_time(&grid);
    for d in [1usize, 17, 200, 1000] {
        let shifted = to_time(&apply_channel(&grid, &ChannelSpec::los(), d as f64));
        let rotated = oracle::cyclic_delay(&reference_time, d);
        let rms = oracle::rms_diff(&shifted, &rotated);
        if rms > 1e-9 {
            failures.push(format!("delay {d}: rms {rms:.2e}"));
        }
    }

    // FFT correlation vs the direct O(N²) sum on N ≤ 503.
    let mut r = rng::chacha(0x5eed_0007);
    for n in [251usize, 503] {
        let a: Vec<Complex> = (0..n)
            .map(|_| {
                let (x, y) = rng::standard_normal_pair(&mut r);
                Complex::new(x, y)
            })
            .collect();
        let b: Vec<Complex> = (0..n)
            .map(|_| {
                let (x, y) = rng::standard_normal_pair(&mut r);
                Complex::new(x, y)
            })
            .collect();
        let fast = cyclic_xcorr(&a, &b).unwrap();
        let direct = oracle::cyclic_xcorr_direct(&a, &b).unwrap();
        let rms = oracle::rms_diff(&fast, &direct);
        if rms > 1e-9 {
            failures.push(format!("xcorr N={n}: rms {rms:.2e}"));
        }
    }

    // Covariance structure on 100 random batches.
    for batch_idx in 0..100u64 {
        let mut br = rng::chacha(rng::derive_seed(0x5eed_0008, batch_idx));
        let n = 8 + (batch_idx % 9) as usize;
        let m = 1 + (batch_idx % 7) as usize;
        let columns: Vec<Vec<Complex>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let (x, y) = rng::standard_normal_pair(&mut br);
                        Complex::new(x, y)
                    })
                    .collect()
            })
            .collect();
        let cov =
            crate::estimators::CovarianceMatrix::from_columns((0..n).collect(), columns).unwrap();
        let rep = oracle::psd_check(&cov.dense(), 1e-9);
        if !rep.hermitian || !rep.positive_semidefinite {
            failures.push(format!("batch {batch_idx}: {rep:?}"));
        }
    }

    Check {
        name: "oracle-equivalence",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            "delay/rotation, fast/direct correlation and covariance structure \
             all within 1e-9"
                .to_string()
        } else {
            failures.join("; ")
        },
        runtime: t0.elapsed(),
    }
}

/// Criterion: the default sweep exports byte-identically for the same master
/// seed regardless of thread count.
pub fn check_determinism(trials_per_point: usize) -> Check {
    let t0 = Instant::now();
    let cfg = ScenarioConfig {
        trials_per_point,
        ..ScenarioConfig::default()
    };

    let export_bytes = |c: &ScenarioConfig| -> Result<Vec<u8>> {
        let records = run_sweep(c)?;
        let mut buf = Vec::new();
        export_to_writer(&records, ExportFormat::Csv, &mut buf)?;
        Ok(buf)
    };

    #[cfg(feature = "parallel")]
    let runs: Vec<Result<Vec<u8>>> = [1usize, 2, 4]
        .into_iter()
        .map(|threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("thread pool");
            pool.install(|| export_bytes(&cfg))
        })
        .collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<Vec<u8>>> = (0..2).map(|_| export_bytes(&cfg)).collect();

    let mut passed = true;
    let mut detail = String::new();
    let mut first: Option<&Vec<u8>> = None;
    for (i, run) in runs.iter().enumerate() {
        match run {
            Ok(bytes) => match first {
                None => {
                    first = Some(bytes);
                    detail = format!("{} bytes per export", bytes.len());
                }
                Some(reference) => {
                    if bytes != reference {
                        passed = false;
                        detail = format!("run {i} differs from run 0");
                    }
                }
            },
            Err(e) => {
                passed = false;
                detail = format!("run {i} failed: {e}");
            }
        }
    }
    #[cfg(feature = "parallel")]
    let variants = "thread counts 1/2/4";
    #[cfg(not(feature = "parallel"))]
    let variants = "two sequential runs";
    Check {
        name: "determinism",
        passed,
        detail: format!("{variants}: {detail}, byte-identical = {passed}"),
        runtime: t0.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // The full-scale criteria run in the dedicated acceptance target; here
    // only the cheap checks and the report plumbing.

    #[test]
    fn zc_identities_check_passes() {
        let c = check_zc_identities();
        assert!(c.passed, "{}", c.line());
    }

    #[test]
    fn oracle_equivalences_check_passes() {
        let c = check_oracle_equivalences();
        assert!(c.passed, "{}", c.line());
    }

    #[test]
    fn report_renders_one_line_per_check() {
        let report = SelftestReport {
            scale: Scale::Quick,
            checks: vec![Check {
                name: "zc-identities",
                passed: true,
                detail: "ok".into(),
                runtime: Duration::from_millis(10),
            }],
            total_runtime: Duration::from_millis(10),
        };
        assert!(report.all_passed());
        assert!(report.render().contains("[PASS] zc-identities"));
    }
}
