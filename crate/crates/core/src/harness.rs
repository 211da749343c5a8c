//! Experiment drivers: range profiles, RMSE and capacity sweeps over SNR,
//! and the ε trade-off sweep.
//!
//! Every Monte Carlo trial draws its noise from stream `trial` of the
//! scenario seed, so results are independent of thread scheduling. Trials
//! run in parallel and are reduced in trial order.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commcap::{capacity_lower_bound, f_com, lmmse_diag_exact};
use crate::error::{Error, Result};
use crate::fracopt::{optimize_metric, OptimizationReport, OptimizerOptions};
use crate::maf::{maf_power, to_db, MetricKind, SidelobeRegion};
use crate::mml::{DelaySearchGrid, MmlEstimator, DEFAULT_MML_OVERSAMPLE};
use crate::model::{
    channel_frequency_response, draw_noise, los_gain, meters_to_seconds, stream_rng, DistortionVector,
    MultipathChannel, NoiseModel, PathSpec, PilotConfig, SPEED_OF_LIGHT,
};

const BOOTSTRAP_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// MML search settings used by the RMSE sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    pub oversample: usize,
    /// `None` searches the whole unambiguous period.
    pub half_width_m: Option<f64>,
    pub refine: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            oversample: DEFAULT_MML_OVERSAMPLE,
            half_width_m: None,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub config: PilotConfig,
    /// LoS delay in meters.
    pub true_delay_m: f64,
    /// Additional paths, gains relative to the LoS gain.
    pub extra_paths: Vec<PathSpec>,
    pub noise: NoiseModel,
    pub snr_grid_db: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    pub metric_list: Vec<MetricKind>,
    pub trials: usize,
    pub profile_window_m: (f64, f64),
    pub search: SearchSettings,
    pub bootstrap_resamples: usize,
}

impl ScenarioSpec {
    /// N = 64, Δf = 120 kHz, P_t = N, LoS at 500 m, σ = 8.8e-7.
    pub fn reference() -> Self {
        Self {
            config: PilotConfig::reference(),
            true_delay_m: 500.0,
            extra_paths: Vec::new(),
            noise: NoiseModel::default(),
            snr_grid_db: (0..=25).map(|k| -10.0 + k as f64).collect(),
            epsilon_list: vec![0.0, 0.1, 0.25],
            metric_list: vec![MetricKind::Slpr, MetricKind::Isl],
            trials: 2000,
            profile_window_m: (250.0, 750.0),
            search: SearchSettings::default(),
            bootstrap_resamples: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("SNR grid must be finite".into()));
        }
        if self.epsilon_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidArgument(
                "ε values must be finite and non-negative".into(),
            ));
        }
        if !(self.true_delay_m.is_finite() && self.true_delay_m >= 0.0) {
            return Err(Error::InvalidArgument(
                "true delay must be finite and non-negative".into(),
            ));
        }
        let (lo, hi) = self.profile_window_m;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "bad profile window [{lo}, {hi}] m"
            )));
        }
        self.search_grid()?;
        Ok(())
    }

    pub fn true_delay_s(&self) -> f64 {
        meters_to_seconds(self.true_delay_m)
    }

    pub fn channel(&self, snr_db: f64) -> Result<MultipathChannel> {
        let alpha = los_gain(snr_db, self.noise.sigma);
        let mut paths = MultipathChannel::single_path(alpha, self.true_delay_s())?
            .paths()
            .to_vec();
        if !self.extra_paths.is_empty() {
            paths.extend_from_slice(MultipathChannel::from_specs(&self.extra_paths, alpha)?.paths());
        }
        MultipathChannel::new(paths)
    }

    pub fn search_grid(&self) -> Result<DelaySearchGrid> {
        let half = self
            .search
            .half_width_m
            .map_or(0.5 * self.config.t_symbol_s(), meters_to_seconds);
        DelaySearchGrid::new(
            self.true_delay_s(),
            half,
            self.search.oversample,
            self.search.refine,
            &self.config,
        )
    }
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    CapacityNatsPerSc,
    MafPowerDb,
    RmseM,
}

impl ValueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValueKind::CapacityNatsPerSc => "capacity_nats_per_sc",
            ValueKind::MafPowerDb => "maf_power_db",
            ValueKind::RmseM => "rmse_m",
        }
    }
}

/// Which design a sweep row belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepLabel {
    pub metric: MetricKind,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub metric: MetricKind,
    pub epsilon: f64,
    pub snr_db: f64,
    pub value: f64,
    pub value_kind: ValueKind,
    pub trials_used: usize,
    /// 95% percentile-bootstrap interval (RMSE rows only).
    pub ci: Option<(f64, f64)>,
}

impl SweepRecord {
    fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.metric
            .cmp(&other.metric)
            .then(self.epsilon.total_cmp(&other.epsilon))
            .then(self.snr_db.total_cmp(&other.snr_db))
            .then(self.value_kind.cmp(&other.value_kind))
    }
}

pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| a.key_cmp(b));
}

/// `|χ((r − r̄)/c)|²/N²` in dB over `n_points` ranges uniformly spaced on the
/// half-open window `[lo, hi)`; an even count puts a sample on `r̄` when the
/// window is centred on it.
pub fn range_profile(z: &DistortionVector, spec: &ScenarioSpec, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(
            "range profile needs at least 2 points".into(),
        ));
    }
    let n2 = (spec.config.n_subcarriers() as f64).powi(2);
    let (lo, hi) = spec.profile_window_m;
    let step = (hi - lo) / n_points as f64;
    Ok((0..n_points)
        .map(|k| {
            let r = lo + k as f64 * step;
            let tau = (r - spec.true_delay_m) / SPEED_OF_LIGHT;
            (r, to_db(maf_power(z, tau, &spec.config) / n2))
        })
        .collect())
}

/// RMSE (m) with its bootstrap interval at one SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsePoint {
    pub rmse_m: f64,
    pub ci: (f64, f64),
}

fn check_z(spec: &ScenarioSpec, z: &DistortionVector) -> Result<()> {
    if z.len() != spec.config.n_subcarriers() {
        return Err(Error::Dimension {
            expected: spec.config.n_subcarriers(),
            got: z.len(),
        });
    }
    Ok(())
}

fn squared_errors(
    spec: &ScenarioSpec,
    estimator: &MmlEstimator,
    z: &DistortionVector,
    snr_db: f64,
    with_noise: bool,
) -> Result<Vec<f64>> {
    let cfg = &spec.config;
    let h = channel_frequency_response(&spec.channel(snr_db)?, cfg);
    let clean: Vec<Complex64> = cfg
        .pilots()
        .iter()
        .zip(z.as_slice())
        .zip(&h)
        .map(|((x, z), h)| x * z * h)
        .collect();
    let tau_bar = spec.true_delay_s();
    let n = cfg.n_subcarriers();
    Ok((0..spec.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let y: Vec<Complex64> = if with_noise {
                let w = draw_noise(&spec.noise, n, trial);
                clean.iter().zip(&w).map(|(c, w)| c + w).collect()
            } else {
                clean.clone()
            };
            let err_m = (estimator.estimate(&y, cfg.pilots()) - tau_bar) * SPEED_OF_LIGHT;
            err_m * err_m
        })
        .collect())
}

/// Percentile bootstrap of `sqrt(mean(sq))`, 95% two-sided.
fn bootstrap_rmse_ci(sq: &[f64], resamples: usize, seed: u64, stream: u64) -> (f64, f64) {
    let point = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
    if resamples == 0 || sq.len() < 2 {
        return (point, point);
    }
    let mut rng = stream_rng(seed ^ BOOTSTRAP_SALT, stream);
    let n = sq.len();
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..n).map(|_| sq[rng.random_range(0..n)]).sum();
            (s / n as f64).sqrt()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let pick = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (pick(0.025), pick(0.975))
}

/// MML RMSE at one SNR. With `with_noise = false` every trial sees the
/// noiseless observation.
pub fn rmse_point(
    spec: &ScenarioSpec,
    z: &DistortionVector,
    snr_db: f64,
    with_noise: bool,
) -> Result<RmsePoint> {
    check_z(spec, z)?;
    let estimator = MmlEstimator::new(&spec.config, spec.search_grid()?);
    let sq = squared_errors(spec, &estimator, z, snr_db, with_noise)?;
    let rmse_m = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
    let ci = bootstrap_rmse_ci(&sq, spec.bootstrap_resamples, spec.noise.seed, 0);
    Ok(RmsePoint { rmse_m, ci })
}

pub fn rmse_sweep(spec: &ScenarioSpec, z: &DistortionVector, label: SweepLabel) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    check_z(spec, z)?;
    let estimator = MmlEstimator::new(&spec.config, spec.search_grid()?);
    spec.snr_grid_db
        .iter()
        .enumerate()
        .map(|(si, &snr_db)| {
            let sq = squared_errors(spec, &estimator, z, snr_db, true)?;
            let rmse = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
            let ci = bootstrap_rmse_ci(&sq, spec.bootstrap_resamples, spec.noise.seed, si as u64);
            Ok(SweepRecord {
                metric: label.metric,
                epsilon: label.epsilon,
                snr_db,
                value: rmse,
                value_kind: ValueKind::RmseM,
                trials_used: sq.len(),
                ci: Some(ci),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// Deterministic bound on the noiseless estimate `ĥ = h ⊙ z`.
    #[default]
    Surrogate,
    /// Trial average of the bound computed from the noisy ZF estimate.
    NoisyEstimate,
}

pub fn capacity_sweep(
    spec: &ScenarioSpec,
    z: &DistortionVector,
    label: SweepLabel,
    mode: CapacityMode,
) -> Result<Vec<SweepRecord>> {
    check_z(spec, z)?;
    let cfg = &spec.config;
    let sigma2 = spec.noise.variance();
    spec.snr_grid_db
        .iter()
        .map(|&snr_db| {
            let h = channel_frequency_response(&spec.channel(snr_db)?, cfg);
            let (value, trials_used) = match mode {
                CapacityMode::Surrogate => (f_com(z, &h, sigma2)?.normalized, 0),
                CapacityMode::NoisyEstimate => {
                    let n = cfg.n_subcarriers();
                    let per_trial: Vec<f64> = (0..spec.trials as u64)
                        .into_par_iter()
                        .map(|trial| {
                            let w = draw_noise(&spec.noise, n, trial);
                            let y: Vec<Complex64> = (0..n)
                                .map(|i| cfg.pilots()[i] * z.as_slice()[i] * h[i] + w[i])
                                .collect();
                            lmmse_diag_exact(&y, cfg.pilots(), &h, sigma2)
                                .map(|r| capacity_lower_bound(&r).normalized)
                        })
                        .collect::<Result<_>>()?;
                    (
                        per_trial.iter().sum::<f64>() / per_trial.len() as f64,
                        per_trial.len(),
                    )
                }
            };
            Ok(SweepRecord {
                metric: label.metric,
                epsilon: label.epsilon,
                snr_db,
                value,
                value_kind: ValueKind::CapacityNatsPerSc,
                trials_used,
                ci: None,
            })
        })
        .collect()
}

/// A distortion design and, for ε > 0, the optimizer report behind it.
#[derive(Debug, Clone)]
pub struct Design {
    pub z: DistortionVector,
    pub report: Option<OptimizationReport>,
}

/// `ε = 0` is the undistorted pilot; otherwise the metric is optimized.
pub fn design(
    spec: &ScenarioSpec,
    metric: MetricKind,
    epsilon: f64,
    region: &SidelobeRegion,
    opts: &OptimizerOptions,
) -> Result<Design> {
    if epsilon == 0.0 {
        return Ok(Design {
            z: DistortionVector::ones(spec.config.n_subcarriers()),
            report: None,
        });
    }
    let opts = OptimizerOptions { epsilon, ..*opts };
    let (_, report) = optimize_metric(metric, &spec.config, region, &opts)?;
    Ok(Design {
        z: report.z_opt.clone(),
        report: Some(report),
    })
}

/// For every (metric, ε): optimize once, then emit capacity and RMSE rows
/// over the SNR grid. Rows come back in ascending key order.
pub fn tradeoff_sweep(
    spec: &ScenarioSpec,
    region: &SidelobeRegion,
    opts: &OptimizerOptions,
) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let mut records = Vec::new();
    for &metric in &spec.metric_list {
        for &epsilon in &spec.epsilon_list {
            let d = design(spec, metric, epsilon, region, opts)?;
            let label = SweepLabel { metric, epsilon };
            records.extend(capacity_sweep(spec, &d.z, label, CapacityMode::Surrogate)?);
            records.extend(rmse_sweep(spec, &d.z, label)?);
        }
    }
    sort_records(&mut records);
    Ok(records)
}
