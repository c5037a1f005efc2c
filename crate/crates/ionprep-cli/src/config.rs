//! Run configuration: strict TOML schema, resolution of overrides, and the
//! embed-in-summary round trip.

use std::path::{Path, PathBuf};

use ionprep::units::{PhysicalParams, UnitsError};
use ionprep::PreparationOrder;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    FreqChange,
    Separation,
    SweepFreqChange,
    OracleCrosscheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Before,
    After,
}

impl From<Order> for PreparationOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Before => PreparationOrder::Before,
            Order::After => PreparationOrder::After,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    /// Ion mass, kg.
    pub mass_kg: f64,
    /// Ion charge, C.
    pub charge_c: f64,
    /// Reference angular frequency, rad/s.
    pub omega0_rad_s: f64,
}

impl PhysicalConfig {
    pub fn params(&self) -> Result<PhysicalParams, UnitsError> {
        PhysicalParams::new(self.mass_kg, self.charge_c, self.omega0_rad_s)
    }
}

fn default_sample_points() -> usize {
    201
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory the run writes into (created if missing).
    pub directory: PathBuf,
    /// Rows in the emitted time series.
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqChangeConfig {
    /// Final detuning: the well ends at ω₀(1 + gamma_final).
    pub gamma_final: f64,
    /// Ramp duration, s (0 = sudden jump).
    pub duration_s: f64,
    #[serde(default)]
    pub with_preparation: bool,
    /// Preparation order; defaults to "before" when preparation is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationConfig {
    /// Parametric-squeeze stage duration t_p, s.
    pub hold_s: f64,
    /// Release ramp duration t_s1, s.
    pub release_s: f64,
    /// Free-flight duration t_s2, s; omit to solve for the target separation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flight_s: Option<f64>,
    /// Catch ramp duration t_s3, s.
    pub catch_ramp_s: f64,
    /// Catch tracking constant η, s.
    pub eta_s: f64,
    /// Final ion-ion separation the plan aims for, m.
    pub target_separation_m: f64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFreqChangeConfig {
    pub gamma_final: f64,
    pub t_f_min_s: f64,
    pub t_f_max_s: f64,
    pub points: usize,
    #[serde(default = "default_true")]
    pub log_spacing: bool,
    #[serde(default)]
    pub with_preparation: bool,
    /// Preparation order; defaults to "before" when preparation is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
    /// Record whether the final occupation decreases monotonically in t_f.
    #[serde(default)]
    pub check_monotone: bool,
}

fn default_cases() -> usize {
    25
}
fn default_max_gamma() -> f64 {
    1.0
}
fn default_max_cycles() -> f64 {
    10.0
}
fn default_dim() -> usize {
    320
}
fn default_oracle_tol() -> f64 {
    1.0e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCrosscheckConfig {
    /// Number of random schedules to compare.
    #[serde(default = "default_cases")]
    pub cases: usize,
    /// |γ| bound for the random schedules.
    #[serde(default = "default_max_gamma")]
    pub max_abs_gamma: f64,
    /// Schedule durations are at most this many 1/ω₀.
    #[serde(default = "default_max_cycles")]
    pub max_duration_cycles: f64,
    /// Truncated-basis size.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Per-case |Δ⟨n⟩| bound reported against.
    #[serde(default = "default_oracle_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub physical: PhysicalConfig,
    pub output: OutputConfig,
    /// Seed for randomized sweeps (oracle_crosscheck).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Run the truncated number-basis cross-check alongside the protocol.
    #[serde(default)]
    pub with_oracle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_change: Option<FreqChangeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_freq_change: Option<SweepFreqChangeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_crosscheck: Option<OracleCrosscheckConfig>,
}

impl RunConfig {
    /// The protocol's parameter block must be present and no other block may
    /// be, so an embedded config reads back without ambiguity.
    pub fn validate_blocks(&self) -> Result<(), String> {
        let blocks: [(&str, bool, bool); 4] = [
            ("freq_change", self.freq_change.is_some(), self.protocol == Protocol::FreqChange),
            ("separation", self.separation.is_some(), self.protocol == Protocol::Separation),
            (
                "sweep_freq_change",
                self.sweep_freq_change.is_some(),
                self.protocol == Protocol::SweepFreqChange,
            ),
            (
                "oracle_crosscheck",
                self.oracle_crosscheck.is_some(),
                self.protocol == Protocol::OracleCrosscheck,
            ),
        ];
        for (name, present, active) in blocks {
            if active && !present {
                return Err(format!("protocol {name:?} requires a [{name}] section"));
            }
            if !active && present {
                return Err(format!("[{name}] section does not match the selected protocol"));
            }
        }
        Ok(())
    }
}

/// Parse a config file. A previous run's summary document (which embeds the
/// resolved config under `[config]`) is accepted directly, so a run can be
/// reproduced from its summary.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig, String> {
    match toml::from_str::<RunConfig>(text) {
        Ok(c) => Ok(c),
        Err(primary) => {
            if let Ok(value) = text.parse::<toml::Table>() {
                if !value.contains_key("protocol") {
                    if let Some(embedded) = value.get("config") {
                        return embedded
                            .clone()
                            .try_into::<RunConfig>()
                            .map_err(|e| format!("{}: embedded [config]: {e}", path.display()));
                    }
                }
            }
            Err(format!("{}: {primary}", path.display()))
        }
    }
}
