//! The cyclic-shift RTT scheme: URS transmit and receive chains, shift
//! arithmetic, the signaling round, and the multi-root / comb-multiplexed
//! extensions.
//!
//! The UE applies a cyclic shift covering `TA + p_d` to its uplink pilot.
//! Because a sequence-domain shift of one position advances the gNB-side
//! channel impulse response by `K/(comb·N_ZC)` time samples (the sequence is
//! zero-padded from `N_ZC` occupied bins to the `K`-point grid), the shift
//! exactly cancels the UE's transmit-time advance and the gNB CIR peaks at
//! the round trip time, RTT = 2τ.

use serde::Serialize;

use crate::channel::{add_awgn_rng, apply_channel, ChannelSpec, TimingState};
use crate::dl_ranging::{prs_channel_estimate, prs_generate, Cir, PeakDetector, PrsConfig};
use crate::error::{Result, SimError};
use crate::ofdm::{map_to_grid, to_freq, to_time, FreqGrid, OfdmConfig};
use crate::sequences::{cyclic_shift, zc_generate, MultiRootConfig, ZcParams};
use crate::{fft, rng, Complex, ComplexSeq, SPEED_OF_LIGHT};

/// How `TA + p_d` (in `f_s` samples) converts to a sequence-domain shift
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// `ν = ⌈(TA+p_d)·comb·N_ZC/K⌉` — the phase-ramp-consistent conversion:
    /// one shift unit delays the K-grid CIR by `K/(comb·N_ZC)` samples, so
    /// this choice realizes the intended delay to within one unit and the
    /// end-to-end RTT = 2τ identity holds.
    Consistent,
    /// `ν = ⌈(TA+p_d)·K/N_ZC⌉ mod N_ZC` — the published formula taken
    /// literally; kept selectable for fidelity experiments. The realized
    /// CIR offset then differs from `TA + p_d` by roughly `(K/N_ZC)²`.
    PaperEq5,
}

/// A resolved cyclic-shift decision for one URS transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftPlan {
    /// Shift in sequence-index units, `0 ≤ nu < n_zc`.
    pub nu: usize,
    /// Timing advance that went into the shift (samples).
    pub ta: u32,
    /// Downlink-measured delay that went into the shift (samples).
    pub p_d: u32,
    pub mode: ShiftMode,
    /// Which base sequence carries the shift (0 unless multi-root).
    pub root_index: usize,
}

/// Raw shift-unit count for `ta + p_d` under the given conversion, before
/// any range check or windowing.
pub fn shift_units(ta: u32, p_d: u32, cfg: &OfdmConfig, n_zc: usize, mode: ShiftMode) -> usize {
    let s = ta as u64 + p_d as u64;
    let k = cfg.fft_size as u64;
    match mode {
        ShiftMode::Consistent => (s * n_zc as u64 * cfg.comb as u64).div_ceil(k) as usize,
        ShiftMode::PaperEq5 => (s * k).div_ceil(n_zc as u64) as usize,
    }
}

/// Single-root shift computation. The unambiguous window `0 ≤ ν < N_ZC` is
/// enforced in shift units; in the literal published mode the shift is
/// instead reduced modulo `N_ZC` as that formula prescribes.
pub fn compute_cyclic_shift(
    ta: u32,
    p_d: u32,
    cfg: &OfdmConfig,
    n_zc: usize,
    mode: ShiftMode,
) -> Result<ShiftPlan> {
    let units = shift_units(ta, p_d, cfg, n_zc, mode);
    let nu = match mode {
        ShiftMode::Consistent => {
            if units >= n_zc {
                return Err(SimError::ShiftOutOfRange(format!(
                    "ta + p_d = {} needs {units} shift units ≥ N_ZC = {n_zc}; \
                     configure multi-root operation",
                    ta as u64 + p_d as u64
                )));
            }
            units
        }
        ShiftMode::PaperEq5 => units % n_zc,
    };
    Ok(ShiftPlan {
        nu,
        ta,
        p_d,
        mode,
        root_index: 0,
    })
}

/// Time delay (in `f_s` samples) realized by one sequence shift unit.
pub fn samples_per_shift_unit(cfg: &OfdmConfig, n_zc: usize) -> f64 {
    cfg.fft_size as f64 / (cfg.comb as f64 * n_zc as f64)
}

/// Frequency-domain URS transmission: the base sequence is cyclically
/// shifted in its native domain, transformed (unitary), and mapped onto the
/// occupied bins of the grid.
pub fn urs_transmit_grid(base: &ZcParams, plan: &ShiftPlan, cfg: &OfdmConfig) -> Result<FreqGrid> {
    let shifted = cyclic_shift(&zc_generate(base), plan.nu);
    let spectrum = fft::dft_unitary(&shifted);
    map_to_grid(&spectrum, cfg)
}

/// Time-domain URS transmission (length `K`), energy equal to the sequence
/// energy.
pub fn urs_transmit(base: &ZcParams, plan: &ShiftPlan, cfg: &OfdmConfig) -> Result<ComplexSeq> {
    Ok(to_time(&urs_transmit_grid(base, plan, cfg)?))
}

/// gNB correlation receiver: FFT, conjugate multiplication with the base
/// sequence spectrum on the occupied bins (unit modulus, so correlation is
/// matched filtering), zero padding to `K` bins and inverse transform.
///
/// Returns the CIR — normalized so a noiseless loopback peaks at magnitude
/// one — together with the matched-filtered K-bin frequency response used by
/// the covariance-based estimator.
pub fn urs_receive(
    rx_time: &[Complex],
    base: &ZcParams,
    cfg: &OfdmConfig,
) -> Result<(Cir, FreqGrid)> {
    let y = to_freq(rx_time, cfg)?;
    if cfg.bin_of(base.n_zc - 1) >= cfg.fft_size {
        return Err(SimError::Overflow(format!(
            "base sequence of {} bins does not fit the grid",
            base.n_zc
        )));
    }
    let base_spectrum = fft::dft_unitary(&zc_generate(base));
    let mut matched = FreqGrid::zeroed(*cfg);
    for (i, k) in cfg.occupied_bins(base.n_zc).enumerate() {
        matched.bins[k] = y.bins[k] * base_spectrum[i].conj();
    }
    let mut cir_samples = matched.bins.clone();
    fft::ifft_in_place(&mut cir_samples);
    let scale = 1.0 / base.n_zc as f64;
    for v in &mut cir_samples {
        *v *= scale;
    }
    let cir = Cir::from_samples(cir_samples, cfg.sample_rate_hz)?;
    Ok((cir, matched))
}

/// Outcome of one RTT readout.
#[derive(Debug, Clone)]
pub struct RttResult {
    /// Detected CIR peak index in `f_s` samples (fractional when
    /// interpolated).
    pub p_u: f64,
    /// Reconstructed round trip time in `f_s` samples (includes the
    /// root-window offset in multi-root operation).
    pub rtt_samples: f64,
    /// Index of the base sequence the detection used.
    pub root_used: usize,
    pub cir: Cir,
}

impl RttResult {
    pub fn rtt_seconds(&self) -> f64 {
        self.rtt_samples / self.cir.sample_rate_hz
    }

    /// One-way distance, `c·RTT/2`.
    pub fn distance_m(&self) -> f64 {
        SPEED_OF_LIGHT * self.rtt_seconds() / 2.0
    }
}

/// Read the RTT off a URS-derived CIR: the first-peak index is the round
/// trip time in samples.
pub fn estimate_rtt(cir: &Cir, detector: &PeakDetector) -> Result<RttResult> {
    estimate_rtt_with(cir, detector, false)
}

/// [`estimate_rtt`] with optional 3-point parabolic interpolation around the
/// detected peak for a sub-sample readout (off by default so the plain
/// detector matches the integer-argmax formulation).
pub fn estimate_rtt_with(
    cir: &Cir,
    detector: &PeakDetector,
    interpolate: bool,
) -> Result<RttResult> {
    let idx = detector.detect(cir)?;
    let p_u = if interpolate {
        idx as f64 + parabolic_offset(cir, idx)
    } else {
        idx as f64
    };
    Ok(RttResult {
        p_u,
        rtt_samples: p_u,
        root_used: 0,
        cir: cir.clone(),
    })
}

fn parabolic_offset(cir: &Cir, idx: usize) -> f64 {
    let n = cir.samples.len();
    if n < 3 {
        return 0.0;
    }
    let m = |i: usize| cir.samples[i % n].norm();
    let (a, b, c) = (m((idx + n - 1) % n), m(idx), m((idx + 1) % n));
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Select the base sequence and shift for a total `TA + p_d` that may exceed
/// the single-root window: shift units in `[0, N_ZC)` use the first root,
/// `[N_ZC, 2N_ZC)` the second with the window offset removed.
pub fn multi_root_plan(
    roots: &MultiRootConfig,
    ta: u32,
    p_d: u32,
    cfg: &OfdmConfig,
    mode: ShiftMode,
) -> Result<(ZcParams, ShiftPlan)> {
    if roots.roots.len() != 2 {
        return Err(SimError::InvalidParams(format!(
            "multi-root operation needs exactly 2 roots, got {}",
            roots.roots.len()
        )));
    }
    let n_zc = roots.n_zc;
    let units = shift_units(ta, p_d, cfg, n_zc, mode);
    let (root_index, nu) = if units < n_zc {
        (0, units)
    } else if units < 2 * n_zc {
        (1, units - n_zc)
    } else {
        return Err(SimError::ShiftOutOfRange(format!(
            "total shift of {units} units exceeds the two-root window of {}",
            2 * n_zc
        )));
    };
    let plan = ShiftPlan {
        nu,
        ta,
        p_d,
        mode,
        root_index,
    };
    Ok((roots.base(root_index), plan))
}

/// Multi-root URS transmission (time domain).
pub fn multi_root_transmit(
    roots: &MultiRootConfig,
    ta: u32,
    p_d: u32,
    cfg: &OfdmConfig,
    mode: ShiftMode,
) -> Result<ComplexSeq> {
    let (base, plan) = multi_root_plan(roots, ta, p_d, cfg, mode)?;
    urs_transmit(&base, &plan, cfg)
}

/// Correlate against both configured bases and reconstruct the RTT from the
/// winning root: `RTT = p_u` for the first root, `p_u` plus one full CIR
/// window for the second (a sequence-period shift of `N_ZC` units maps to
/// exactly `K/comb` time samples).
///
/// Detection compares the peak-to-median ratios of the two CIRs; a margin
/// under 1 dB is reported as ambiguous rather than silently picking a root.
pub fn multi_root_detect(
    rx_time: &[Complex],
    roots: &MultiRootConfig,
    cfg: &OfdmConfig,
    detector: &PeakDetector,
) -> Result<RttResult> {
    if roots.roots.len() != 2 {
        return Err(SimError::InvalidParams(format!(
            "multi-root operation needs exactly 2 roots, got {}",
            roots.roots.len()
        )));
    }
    let mut candidates = Vec::with_capacity(2);
    for i in 0..2 {
        let (cir, _) = urs_receive(rx_time, &roots.base(i), cfg)?;
        let metric = peak_to_median(&cir);
        candidates.push((i, cir, metric));
    }
    let margin_db = 20.0 * (candidates[0].2 / candidates[1].2).log10();
    if margin_db.abs() < 1.0 {
        return Err(SimError::AmbiguousDetection(format!(
            "root metrics within {margin_db:.2} dB"
        )));
    }
    let winner = if margin_db > 0.0 { 0 } else { 1 };
    let (root_used, cir, _) = candidates.swap_remove(winner);
    let mut result = estimate_rtt(&cir, detector)?;
    let window_samples = cfg.fft_size as f64 / cfg.comb as f64;
    result.root_used = root_used;
    result.rtt_samples = result.p_u + root_used as f64 * window_samples;
    Ok(result)
}

fn peak_to_median(cir: &Cir) -> f64 {
    let mut mags = cir.magnitudes();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2].max(1e-300);
    cir.peak_mag / median
}

/// One event in the signaling round.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProtocolEvent {
    GnbConfigure {
        n_zc: usize,
        roots: Vec<usize>,
        prs_symbols: usize,
        prs_comb: usize,
        shift_mode: ShiftMode,
    },
    UePrsMeasure {
        p_d: u32,
    },
    UeUrsTransmit {
        ta: u32,
        p_d: u32,
        nu: usize,
        root_index: usize,
        repetitions: usize,
    },
    GnbRttEstimate {
        p_u: f64,
        rtt_samples: f64,
        root_used: usize,
    },
}

impl ProtocolEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolEvent::GnbConfigure { .. } => "gnb_configure",
            ProtocolEvent::UePrsMeasure { .. } => "ue_prs_measure",
            ProtocolEvent::UeUrsTransmit { .. } => "ue_urs_transmit",
            ProtocolEvent::GnbRttEstimate { .. } => "gnb_rtt_estimate",
        }
    }
}

/// Ordered record of one measurement round.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProtocolTrace {
    pub events: Vec<ProtocolEvent>,
}

impl ProtocolTrace {
    pub fn kinds(&self) -> Vec<&'static str> {
        self.events.iter().map(ProtocolEvent::kind).collect()
    }

    /// Line-delimited structured-text form, one JSON object per event.
    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("trace serialization"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e).map_err(|e| SimError::Parse(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Everything one measurement round needs.
#[derive(Debug, Clone)]
pub struct RoundConfig {
    /// URS grid configuration (comb 1 unless multiplexing).
    pub ofdm: OfdmConfig,
    pub base: ZcParams,
    /// When set, the round uses window-selected roots instead of `base`.
    pub multi_root: Option<MultiRootConfig>,
    pub prs: PrsConfig,
    pub channel: ChannelSpec,
    pub timing: TimingState,
    /// Uplink SNR in dB; non-finite means noiseless.
    pub ul_snr_db: f64,
    /// Downlink SNR in dB; non-finite means noiseless.
    pub dl_snr_db: f64,
    pub shift_mode: ShiftMode,
    pub dl_detector: PeakDetector,
    pub ul_detector: PeakDetector,
}

impl RoundConfig {
    /// Noiseless single-root round with default detectors for the supplied
    /// numerology.
    pub fn new(ofdm: OfdmConfig, base: ZcParams, timing: TimingState) -> Self {
        Self {
            ofdm,
            base,
            multi_root: None,
            prs: PrsConfig::default(),
            channel: ChannelSpec::los(),
            timing,
            ul_snr_db: f64::INFINITY,
            dl_snr_db: f64::INFINITY,
            shift_mode: ShiftMode::Consistent,
            dl_detector: PeakDetector::default_dl(ofdm.fft_size),
            ul_detector: PeakDetector::default_ul(ofdm.fft_size),
        }
    }
}

/// Raw per-measurement outputs of a round, ready for batch estimation.
#[derive(Debug, Clone)]
pub struct RoundMeasurements {
    pub cirs: Vec<Cir>,
    pub freq_responses: Vec<FreqGrid>,
    /// Downlink delay the UE measured and folded into the shift.
    pub p_d_measured: u32,
    pub plan: ShiftPlan,
    /// RTT readout from the first measurement.
    pub rtt: RttResult,
}

/// Execute the signaling round: configure, measure `p_d` from the downlink
/// pilot, transmit the shifted URS `m` times, and estimate the RTT at the
/// gNB. Event order is fixed; every payload is recorded in the trace.
pub fn run_measurement_round(
    cfg: &RoundConfig,
    m: usize,
    seed: u64,
) -> Result<(RoundMeasurements, ProtocolTrace)> {
    if m == 0 {
        return Err(SimError::InvalidParams("round needs m >= 1".into()));
    }
    cfg.ofdm.validate()?;
    cfg.prs.validate()?;
    cfg.channel.validate()?;

    let mut trace = ProtocolTrace::default();
    let roots = match &cfg.multi_root {
        Some(mr) => mr.roots.clone(),
        None => vec![cfg.base.root],
    };
    let n_zc = cfg.multi_root.as_ref().map_or(cfg.base.n_zc, |mr| mr.n_zc);
    trace.events.push(ProtocolEvent::GnbConfigure {
        n_zc,
        roots,
        prs_symbols: cfg.prs.num_symbols,
        prs_comb: cfg.prs.comb,
        shift_mode: cfg.shift_mode,
    });

    // Downlink leg: the UE sees the first arrival `p_d_true` samples into
    // its own receive window.
    let references = prs_generate(&cfg.prs, &cfg.ofdm)?;
    let mut dl_rng = rng::chacha(rng::derive_seed(seed, 0));
    let received: Vec<FreqGrid> = references
        .iter()
        .map(|g| {
            let faded = apply_channel(g, &cfg.channel, cfg.timing.p_d_true);
            add_awgn_rng(&faded, cfg.dl_snr_db, &mut dl_rng)
        })
        .collect::<Result<_>>()?;
    let dl_cir = prs_channel_estimate(&received, &references)?;
    let p_d = cfg.dl_detector.detect(&dl_cir)? as u32;
    trace.events.push(ProtocolEvent::UePrsMeasure { p_d });

    // Shift selection and uplink transmission.
    let (tx_base, plan) = match &cfg.multi_root {
        Some(mr) => multi_root_plan(mr, cfg.timing.ta, p_d, &cfg.ofdm, cfg.shift_mode)?,
        None => (
            cfg.base,
            compute_cyclic_shift(cfg.timing.ta, p_d, &cfg.ofdm, cfg.base.n_zc, cfg.shift_mode)?,
        ),
    };
    let tx_grid = urs_transmit_grid(&tx_base, &plan, &cfg.ofdm)?;
    trace.events.push(ProtocolEvent::UeUrsTransmit {
        ta: plan.ta,
        p_d: plan.p_d,
        nu: plan.nu,
        root_index: plan.root_index,
        repetitions: m,
    });

    // The UE transmits at `ue_sync_offset - ta`; the gNB sees the arrival at
    // `2τ - ta - p_d_true`.
    let arrival = cfg.timing.uplink_arrival_offset();
    let identity = 2.0 * cfg.timing.tau - cfg.timing.ta as f64 - cfg.timing.p_d_true;
    debug_assert!((arrival - identity).abs() < 1e-9);
    if arrival < 0.0 {
        return Err(SimError::InvalidParams(format!(
            "uplink arrival offset {arrival:.3} is negative; \
             TA {} overshoots the round trip",
            cfg.timing.ta
        )));
    }

    let mut cirs = Vec::with_capacity(m);
    let mut freq_responses = Vec::with_capacity(m);
    let mut first_rtt: Option<RttResult> = None;
    let faded = apply_channel(&tx_grid, &cfg.channel, arrival);
    for j in 0..m {
        let mut ul_rng = rng::chacha(rng::derive_seed2(seed, 1, j as u64));
        let noisy = add_awgn_rng(&faded, cfg.ul_snr_db, &mut ul_rng)?;
        let rx_time = to_time(&noisy);
        let (cir, matched) = match &cfg.multi_root {
            Some(mr) => {
                let result = multi_root_detect(&rx_time, mr, &cfg.ofdm, &cfg.ul_detector)?;
                let (_, fr) = urs_receive(&rx_time, &mr.base(result.root_used), &cfg.ofdm)?;
                let cir = result.cir.clone();
                if first_rtt.is_none() {
                    first_rtt = Some(result);
                }
                (cir, fr)
            }
            None => {
                let (cir, fr) = urs_receive(&rx_time, &tx_base, &cfg.ofdm)?;
                if first_rtt.is_none() {
                    let mut r = estimate_rtt(&cir, &cfg.ul_detector)?;
                    r.root_used = plan.root_index;
                    first_rtt = Some(r);
                }
                (cir, fr)
            }
        };
        cirs.push(cir);
        freq_responses.push(matched);
    }
    let rtt = first_rtt.expect("m >= 1");
    trace.events.push(ProtocolEvent::GnbRttEstimate {
        p_u: rtt.p_u,
        rtt_samples: rtt.rtt_samples,
        root_used: rtt.root_used,
    });

    Ok((
        RoundMeasurements {
            cirs,
            freq_responses,
            p_d_measured: p_d,
            plan,
            rtt,
        },
        trace,
    ))
}

/// Single-measurement signaling round.
pub fn run_protocol_round(cfg: &RoundConfig, seed: u64) -> Result<(RttResult, ProtocolTrace)> {
    let (meas, trace) = run_measurement_round(cfg, 1, seed)?;
    Ok((meas.rtt, trace))
}

/// One user of a comb-multiplexed URS symbol.
#[derive(Debug, Clone)]
pub struct CombUe {
    pub timing: TimingState,
    /// Downlink delay this UE measured (fed straight into the shift).
    pub p_d: u32,
    pub channel: ChannelSpec,
    pub comb_offset: usize,
}

/// Two UEs share one URS symbol on complementary comb offsets; the gNB
/// extracts each comb and estimates both RTTs independently. The
/// unambiguous delay range halves (comb-2 alias at `K/2` samples).
pub fn comb_multiplex_round(
    base: &ZcParams,
    ues: &[CombUe; 2],
    ofdm: &OfdmConfig,
    mode: ShiftMode,
    detector: &PeakDetector,
    ul_snr_db: f64,
    seed: u64,
) -> Result<(RttResult, RttResult)> {
    if ofdm.comb != 2 {
        return Err(SimError::InvalidParams(format!(
            "comb multiplexing needs comb = 2, got {}",
            ofdm.comb
        )));
    }
    if ues[0].comb_offset == ues[1].comb_offset {
        return Err(SimError::CombCollision(ues[0].comb_offset));
    }

    let mut sum: Option<FreqGrid> = None;
    let mut cfgs = Vec::with_capacity(2);
    for ue in ues {
        let cfg_ue = ofdm.with_comb(2, ue.comb_offset);
        let plan = compute_cyclic_shift(ue.timing.ta, ue.p_d, &cfg_ue, base.n_zc, mode)?;
        let tx = urs_transmit_grid(base, &plan, &cfg_ue)?;
        let arrival = ue.timing.uplink_arrival_offset();
        if arrival < 0.0 {
            return Err(SimError::InvalidParams(format!(
                "uplink arrival offset {arrival:.3} is negative"
            )));
        }
        let faded = apply_channel(&tx, &ue.channel, arrival);
        sum = Some(match sum {
            Some(acc) => acc.add(&faded)?,
            None => faded,
        });
        cfgs.push(cfg_ue);
    }
    let mut combined = sum.expect("two users");
    combined = add_awgn_rng(&combined, ul_snr_db, &mut rng::chacha(seed))?;
    let rx_time = to_time(&combined);

    let mut results = Vec::with_capacity(2);
    for cfg_ue in &cfgs {
        let (cir, _) = urs_receive(&rx_time, base, cfg_ue)?;
        results.push(estimate_rtt(&cir, detector)?);
    }
    let b = results.pop().expect("two results");
    let a = results.pop().expect("two results");
    Ok((a, b))
}
