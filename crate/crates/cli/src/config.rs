//! Run configuration: one JSON document with nested sections. Omitted fields
//! take the reference-scenario defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toa_obfuscation::fracopt::OptimizerOptions;
use toa_obfuscation::harness::{CapacityMode, ScenarioSpec, SearchSettings};
use toa_obfuscation::maf::{default_sidelobe_region, MetricKind, SidelobeRegion};
use toa_obfuscation::mml::DEFAULT_MML_OVERSAMPLE;
use toa_obfuscation::model::{meters_to_seconds, NoiseModel, PathSpec, PilotConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub optimizer: OptimizerOptions,
    pub region: RegionConfig,
    pub output: OutputConfig,
    /// Metric used by `optimize` and by the single-design sweeps.
    pub metric: MetricKind,
    /// Number of points in a range profile.
    pub profile_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            optimizer: OptimizerOptions::default(),
            region: RegionConfig::default(),
            output: OutputConfig::default(),
            metric: MetricKind::Slpr,
            profile_points: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub n_cp: usize,
    /// `None` means `P_t = N`.
    pub power_budget: Option<f64>,
    /// `None` means all-ones pilots.
    pub pilot_phases_rad: Option<Vec<f64>>,
    pub true_delay_m: f64,
    pub extra_paths: Vec<PathSpec>,
    pub sigma: f64,
    pub seed: u64,
    pub snr_grid_db: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    pub metric_list: Vec<MetricKind>,
    pub trials: usize,
    pub profile_window_m: (f64, f64),
    pub search: SearchConfig,
    pub bootstrap_resamples: usize,
    pub capacity_mode: CapacityMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let spec = ScenarioSpec::reference();
        let cfg = &spec.config;
        Self {
            n_subcarriers: cfg.n_subcarriers(),
            subcarrier_spacing_hz: cfg.subcarrier_spacing_hz(),
            n_cp: cfg.n_cp(),
            power_budget: None,
            pilot_phases_rad: None,
            true_delay_m: spec.true_delay_m,
            extra_paths: spec.extra_paths,
            sigma: spec.noise.sigma,
            seed: spec.noise.seed,
            snr_grid_db: spec.snr_grid_db,
            epsilon_list: spec.epsilon_list,
            metric_list: spec.metric_list,
            trials: spec.trials,
            profile_window_m: spec.profile_window_m,
            search: SearchConfig::default(),
            bootstrap_resamples: spec.bootstrap_resamples,
            capacity_mode: CapacityMode::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub oversample: usize,
    /// `None` searches the whole unambiguous period.
    pub half_width_m: Option<f64>,
    pub refine: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            oversample: DEFAULT_MML_OVERSAMPLE,
            half_width_m: None,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    /// Outer edge of the sidelobe region; `None` means half a symbol.
    pub tau_max_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// `None` writes to standard output.
    pub path: Option<PathBuf>,
    /// Sweep output format; the optimization report is always JSON.
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn pilot_config(&self) -> Result<PilotConfig, CliError> {
        let s = &self.scenario;
        let power = s.power_budget.unwrap_or(s.n_subcarriers as f64);
        let cfg = match &s.pilot_phases_rad {
            Some(phases) => {
                if phases.len() != s.n_subcarriers {
                    return Err(CliError::Config(format!(
                        "pilot_phases_rad has {} entries, n_subcarriers is {}",
                        phases.len(),
                        s.n_subcarriers
                    )));
                }
                PilotConfig::with_pilot_phases(s.subcarrier_spacing_hz, s.n_cp, power, phases)
            }
            None => PilotConfig::with_unit_pilots(s.n_subcarriers, s.subcarrier_spacing_hz, s.n_cp, power),
        };
        cfg.map_err(CliError::from)
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec, CliError> {
        let s = &self.scenario;
        let spec = ScenarioSpec {
            config: self.pilot_config()?,
            true_delay_m: s.true_delay_m,
            extra_paths: s.extra_paths.clone(),
            noise: NoiseModel::new(s.sigma, s.seed)?,
            snr_grid_db: s.snr_grid_db.clone(),
            epsilon_list: s.epsilon_list.clone(),
            metric_list: s.metric_list.clone(),
            trials: s.trials,
            profile_window_m: s.profile_window_m,
            search: SearchSettings {
                oversample: s.search.oversample,
                half_width_m: s.search.half_width_m,
                refine: s.search.refine,
            },
            bootstrap_resamples: s.bootstrap_resamples,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sidelobe_region(&self, config: &PilotConfig) -> Result<SidelobeRegion, CliError> {
        Ok(default_sidelobe_region(
            config,
            self.region.tau_max_m.map(meters_to_seconds),
        )?)
    }
}

/// Parses `lo:step:hi` into an inclusive grid.
pub fn parse_snr_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("--snr expects lo:step:hi, got {text:?}"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [lo, step, hi] = parts[..] else {
        return Err(bad());
    };
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
        return Err(CliError::Config(format!(
            "--snr needs finite lo ≤ hi and a positive step, got {text:?}"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(CliError::Config(format!(
            "--snr grid {text:?} has too many points"
        )));
    }
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    impl RunConfig {
        fn to_json(&self) -> String {
            serde_json::to_string_pretty(self).unwrap()
        }
    }

    #[test]
    fn defaults_match_reference_scenario() {
        let spec = RunConfig::default().scenario_spec().unwrap();
        assert_eq!(spec, ScenarioSpec::reference());
        let empty = RunConfig::from_json("{}").unwrap();
        assert_eq!(empty, RunConfig::default());
        assert_eq!(empty.optimizer, OptimizerOptions::default());
    }

    #[test]
    fn round_trip_is_value_identical() {
        let mut cfg = RunConfig::default();
        cfg.scenario.seed = 42;
        cfg.scenario.pilot_phases_rad = Some((0..64).map(|k| 0.1 * k as f64).collect());
        cfg.scenario.extra_paths = vec![PathSpec {
            delay_m: 620.5,
            gain: toa_obfuscation::model::GainSpec::Polar {
                magnitude: 0.3,
                phase_rad: -1.2,
            },
        }];
        cfg.scenario.search.half_width_m = Some(300.0);
        cfg.scenario.capacity_mode = CapacityMode::NoisyEstimate;
        cfg.optimizer.real_z = true;
        cfg.optimizer.epsilon = 0.25;
        cfg.region.tau_max_m = Some(1000.0);
        cfg.output.path = Some("out/r.csv".into());
        cfg.output.format = OutputFormat::Json;
        cfg.metric = MetricKind::Isl;
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(
            RunConfig::from_json(&RunConfig::default().to_json()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg =
            RunConfig::from_json(r#"{"scenario": {"trials": 10}, "optimizer": {"epsilon": 0.25}}"#).unwrap();
        assert_eq!(cfg.scenario.trials, 10);
        assert_eq!(cfg.scenario.n_subcarriers, 64);
        assert_eq!(cfg.optimizer.epsilon, 0.25);
        assert_eq!(cfg.optimizer.outer_tol, 1e-8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"scenaro": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"optimizer": {"eps": 0.1}}"#).is_err());
    }

    #[test]
    fn snr_ranges() {
        let g = parse_snr_range("-5:1:15").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[5], 0.0);
        assert_eq!(g[20], 15.0);
        assert_eq!(parse_snr_range("0:0.1:1").unwrap().len(), 11);
        assert_eq!(parse_snr_range("3:1:3").unwrap(), vec![3.0]);
        for bad in ["1:2", "5:1:0", "0:0:1", "a:1:2", "0:-1:3"] {
            assert!(parse_snr_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bad_pilot_phase_count_is_a_config_error() {
        let mut cfg = RunConfig::default();
        cfg.scenario.pilot_phases_rad = Some(vec![0.0; 3]);
        assert!(matches!(cfg.pilot_config(), Err(CliError::Config(_))));
    }
}
