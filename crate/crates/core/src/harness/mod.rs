//! Scenario configuration, Monte Carlo sweeps and result export — the CLI
//! face of the simulator.

mod export;
mod report;
mod scenario;
mod sweep;

pub use export::{export, export_to_writer, import, ExportFormat};
pub use report::{render_table, report_cdf, CdfRow, GroupField, DEFAULT_PERCENTILES};
pub use scenario::{
    load_scenario, parse_scenario, DetectorSection, OfdmSection, PrsSection, ScenarioConfig,
    TimingSection, UrsSection,
};
pub use sweep::{expected_record_count, run_sweep};

use serde::{Deserialize, Serialize};

/// Range estimator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Pd,
    Mf,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorKind::Pd => write!(f, "pd"),
            EstimatorKind::Mf => write!(f, "mf"),
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = crate::SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pd" => Ok(EstimatorKind::Pd),
            "mf" => Ok(EstimatorKind::Mf),
            other => Err(crate::SimError::Parse(format!(
                "unknown estimator `{other}` (expected pd or mf)"
            ))),
        }
    }
}

/// One estimator readout of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub distance_true_m: f64,
    pub snr_db: f64,
    pub m: usize,
    pub estimator: EstimatorKind,
    pub d_hat_m: f64,
    pub error_m: f64,
    pub rtt_samples: f64,
    pub ta: u32,
    pub p_d: u32,
    pub nu: usize,
    pub root_used: usize,
    pub seed: u64,
    /// `"ok"`, or the error that aborted the round (no silent failures).
    pub status: String,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Fixed CSV column order; matches the `TrialRecord` field order.
pub const CSV_HEADER: [&str; 13] = [
    "distance_true_m",
    "snr_db",
    "m",
    "estimator",
    "d_hat_m",
    "error_m",
    "rtt_samples",
    "ta",
    "p_d",
    "nu",
    "root_used",
    "seed",
    "status",
];

/// Format a float with nine significant digits (plain notation).
pub(crate) fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_keeps_nine_digits() {
        assert_eq!(fmt_sig9(3.252956790123), "3.25295679");
        assert_eq!(fmt_sig9(46_080_000.0), "46080000.0");
        assert_eq!(fmt_sig9(-0.001234567891), "-0.00123456789");
        assert_eq!(fmt_sig9(0.0), "0.0");
        assert_eq!(fmt_sig9(f64::NAN), "NaN");
    }
}
