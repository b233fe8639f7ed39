//! Scenario files: a flat TOML dialect with the testbed defaults baked in.
//! An empty file is the default scenario; unknown keys warn instead of
//! failing so configs stay forward compatible.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::dl_ranging::{PeakDetector, PeakMode, PrsConfig};
use crate::error::{Result, SimError};
use crate::ofdm::OfdmConfig;
use crate::sequences::{MultiRootConfig, ZcParams};
use crate::urs_rtt::ShiftMode;

use super::EstimatorKind;

/// `[ofdm]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmSection {
    pub fft_size: usize,
    pub scs_hz: f64,
    /// Optional; when present it must equal `fft_size · scs_hz`.
    pub sample_rate_hz: Option<f64>,
    pub carrier_hz: f64,
    pub first_bin: usize,
}

impl Default for OfdmSection {
    fn default() -> Self {
        Self {
            fft_size: 1536,
            scs_hz: 30e3,
            sample_rate_hz: None,
            carrier_hz: 3.69e9,
            first_bin: 0,
        }
    }
}

impl OfdmSection {
    pub fn to_config(&self) -> Result<OfdmConfig> {
        let mut cfg = OfdmConfig::new(self.fft_size, self.scs_hz, self.carrier_hz);
        cfg.first_bin = self.first_bin;
        if let Some(fs) = self.sample_rate_hz {
            cfg.sample_rate_hz = fs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `[urs]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UrsSection {
    pub n_zc: usize,
    pub root: usize,
    /// Two roots switch the sweep to multi-root operation.
    pub roots: Option<Vec<usize>>,
}

impl Default for UrsSection {
    fn default() -> Self {
        Self {
            n_zc: 1259,
            root: 1,
            roots: None,
        }
    }
}

impl UrsSection {
    pub fn base(&self) -> Result<ZcParams> {
        ZcParams::new(self.n_zc, self.root)
    }

    pub fn multi_root(&self) -> Result<Option<MultiRootConfig>> {
        match &self.roots {
            Some(roots) => Ok(Some(MultiRootConfig::new(self.n_zc, roots.clone())?)),
            None => Ok(None),
        }
    }
}

/// `[prs]` section: the pilot itself plus the downlink link quality (the
/// gNB transmit gain stays fixed while the uplink SNR sweeps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrsSection {
    pub num_symbols: usize,
    pub comb: usize,
    pub bandwidth_bins: usize,
    pub c_init_base: u32,
    pub dl_snr_db: f64,
}

impl Default for PrsSection {
    fn default() -> Self {
        let prs = PrsConfig::default();
        Self {
            num_symbols: prs.num_symbols,
            comb: prs.comb,
            bandwidth_bins: prs.bandwidth_bins,
            c_init_base: prs.c_init_base,
            dl_snr_db: 30.0,
        }
    }
}

impl PrsSection {
    pub fn to_config(&self) -> PrsConfig {
        PrsConfig {
            num_symbols: self.num_symbols,
            comb: self.comb,
            bandwidth_bins: self.bandwidth_bins,
            c_init_base: self.c_init_base,
        }
    }
}

/// `[timing]` section: how TA and the UE sync residual are drawn per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingSection {
    /// TA quantization step in samples. The default mirrors a coarse
    /// RACH-derived command, which at desk-scale distances quantizes to
    /// TA = 0 exactly as on the testbed.
    pub ta_granularity: u32,
    /// Uniform jitter (samples) added to 2τ before quantization.
    pub ta_jitter: f64,
    /// The per-trial sync residual `p_d_true` is uniform on
    /// `[0, sync_err_max]` samples.
    pub sync_err_max: u32,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            ta_granularity: 16,
            ta_jitter: 0.0,
            sync_err_max: 1,
        }
    }
}

/// `[detector]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSection {
    pub mode: PeakMode,
    pub rel_threshold: f64,
    /// Defaults to the full grid on the uplink and a quarter grid downlink.
    pub search_window: Option<usize>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            mode: PeakMode::FirstPeak,
            rel_threshold: 0.5,
            search_window: None,
        }
    }
}

impl DetectorSection {
    pub fn ul_detector(&self, fft_size: usize) -> PeakDetector {
        PeakDetector {
            mode: self.mode,
            rel_threshold: self.rel_threshold,
            search_window: self.search_window.unwrap_or(fft_size),
        }
    }

    pub fn dl_detector(&self, fft_size: usize) -> PeakDetector {
        PeakDetector {
            mode: self.mode,
            rel_threshold: self.rel_threshold,
            search_window: self.search_window.unwrap_or(fft_size / 4),
        }
    }
}

/// A full sweep description. `Default` is the desk-scale testbed scenario:
/// 1536-point grid at 30 kHz (46.08 MHz), 1259-length base sequence,
/// 12-symbol comb-2 downlink pilot, line-of-sight channel, distances
/// 3–10 m, high/low uplink SNR presets, M = 20.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub ofdm: OfdmSection,
    pub urs: UrsSection,
    pub prs: PrsSection,
    pub channel: ChannelSpec,
    pub timing: TimingSection,
    pub detector: DetectorSection,
    pub distances: Vec<f64>,
    pub snr_points: Vec<f64>,
    #[serde(alias = "M_values")]
    pub m_values: Vec<usize>,
    pub trials_per_point: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub shift_mode: ShiftMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            ofdm: OfdmSection::default(),
            urs: UrsSection::default(),
            prs: PrsSection::default(),
            channel: ChannelSpec::los(),
            timing: TimingSection::default(),
            detector: DetectorSection::default(),
            distances: (3..=10).map(f64::from).collect(),
            snr_points: vec![30.0, -20.0],
            m_values: vec![20],
            trials_per_point: 50,
            master_seed: 1,
            estimators: vec![EstimatorKind::Pd, EstimatorKind::Mf],
            shift_mode: ShiftMode::Consistent,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let ofdm = self.ofdm.to_config()?;
        let base = self.urs.base()?;
        self.urs.multi_root()?;
        let prs = self.prs.to_config();
        prs.validate()?;
        self.channel.validate()?;
        if self.distances.is_empty() {
            return Err(SimError::Validation("distances must not be empty".into()));
        }
        if self.distances.iter().any(|d| *d < 0.0) {
            return Err(SimError::Validation("distances must be ≥ 0".into()));
        }
        if self.snr_points.is_empty() {
            return Err(SimError::Validation("snr_points must not be empty".into()));
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return Err(SimError::Validation("m_values must be positive".into()));
        }
        if self.trials_per_point == 0 {
            return Err(SimError::Validation("trials_per_point must be ≥ 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(SimError::Validation("estimators must not be empty".into()));
        }
        if ofdm.first_bin + base.n_zc > ofdm.fft_size {
            return Err(SimError::Validation(format!(
                "URS of {} bins does not fit the {}-point grid",
                base.n_zc, ofdm.fft_size
            )));
        }
        if ofdm.first_bin + prs.bandwidth_bins > ofdm.fft_size {
            return Err(SimError::Validation(format!(
                "PRS band of {} bins does not fit the {}-point grid",
                prs.bandwidth_bins, ofdm.fft_size
            )));
        }
        if self.timing.ta_granularity == 0 {
            return Err(SimError::Validation("ta_granularity must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Keys the parser recognizes, per section ("" = top level).
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "",
        &[
            "ofdm",
            "urs",
            "prs",
            "channel",
            "timing",
            "detector",
            "distances",
            "snr_points",
            "m_values",
            "M_values",
            "trials_per_point",
            "master_seed",
            "estimators",
            "shift_mode",
        ],
    ),
    (
        "ofdm",
        &["fft_size", "scs_hz", "sample_rate_hz", "carrier_hz", "first_bin"],
    ),
    ("urs", &["n_zc", "root", "roots"]),
    (
        "prs",
        &["num_symbols", "comb", "bandwidth_bins", "c_init_base", "dl_snr_db"],
    ),
    ("channel", &["taps", "snr_db", "hw_offset_s"]),
    ("timing", &["ta_granularity", "ta_jitter", "sync_err_max"]),
    ("detector", &["mode", "rel_threshold", "search_window"]),
];

fn unknown_keys(value: &toml::Value) -> Vec<String> {
    let mut warnings = Vec::new();
    let Some(table) = value.as_table() else {
        return warnings;
    };
    let known_for = |section: &str| -> Option<&[&str]> {
        KNOWN_KEYS
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, keys)| *keys)
    };
    let top = known_for("").unwrap();
    for (key, sub) in table {
        if !top.contains(&key.as_str()) {
            warnings.push(format!("unknown key `{key}` ignored"));
            continue;
        }
        if let (Some(known), Some(sub_table)) = (known_for(key), sub.as_table()) {
            for sub_key in sub_table.keys() {
                if !known.contains(&sub_key.as_str()) {
                    warnings.push(format!("unknown key `{key}.{sub_key}` ignored"));
                }
            }
        }
    }
    warnings
}

/// Parse a scenario from TOML text. Returns the validated config plus
/// warnings for any unrecognized keys; an empty document yields the full
/// default scenario.
pub fn parse_scenario(text: &str) -> Result<(ScenarioConfig, Vec<String>)> {
    let value: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| SimError::Parse(e.to_string()))?;
    let warnings = unknown_keys(&value);
    let cfg: ScenarioConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| SimError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok((cfg, warnings))
}

/// Load a scenario file; see [`parse_scenario`].
pub fn load_scenario(path: impl AsRef<Path>) -> Result<(ScenarioConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}
