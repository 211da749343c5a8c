//! Frequency-domain OFDM pilot model.
//!
//! The received pilot block is `y = (x ⊙ z) ⊙ h + w`, where `x` are the
//! unit-modulus nominal pilots, `z` the transmitter-side distortion, `h` the
//! per-subcarrier channel response and `w` circular complex Gaussian noise.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used for every meter/second conversion.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Noise amplitude of the reference scenario.
pub const DEFAULT_SIGMA: f64 = 8.8e-7;

const UNIT_MODULUS_TOL: f64 = 1e-9;
const DEGENERATE_PILOT: f64 = 1e-12;

pub fn meters_to_seconds(m: f64) -> f64 {
    m / SPEED_OF_LIGHT
}

pub fn seconds_to_meters(s: f64) -> f64 {
    s * SPEED_OF_LIGHT
}

/// OFDM numerology, pilot symbols and transmit power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotConfig {
    n_subcarriers: usize,
    subcarrier_spacing_hz: f64,
    n_cp: usize,
    power_budget: f64,
    pilots: Vec<Complex64>,
}

impl PilotConfig {
    pub fn new(
        subcarrier_spacing_hz: f64,
        n_cp: usize,
        power_budget: f64,
        pilots: Vec<Complex64>,
    ) -> Result<Self> {
        let n = pilots.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "at least one subcarrier is required".into(),
            ));
        }
        if !(subcarrier_spacing_hz.is_finite() && subcarrier_spacing_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing_hz}"
            )));
        }
        if !(power_budget.is_finite() && power_budget > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "power budget must be positive, got {power_budget}"
            )));
        }
        if let Some((i, x)) = pilots
            .iter()
            .enumerate()
            .find(|(_, x)| (x.norm() - 1.0).abs() > UNIT_MODULUS_TOL)
        {
            return Err(Error::InvalidArgument(format!(
                "pilot {i} is not unit modulus (|x| = {})",
                x.norm()
            )));
        }
        Ok(Self {
            n_subcarriers: n,
            subcarrier_spacing_hz,
            n_cp,
            power_budget,
            pilots,
        })
    }

    /// All-ones pilots. The metrics are invariant to the pilot choice when
    /// `|x_i| = 1`, so this is the canonical configuration.
    pub fn with_unit_pilots(
        n_subcarriers: usize,
        subcarrier_spacing_hz: f64,
        n_cp: usize,
        power_budget: f64,
    ) -> Result<Self> {
        Self::new(
            subcarrier_spacing_hz,
            n_cp,
            power_budget,
            vec![Complex64::new(1.0, 0.0); n_subcarriers],
        )
    }

    /// Pilots `exp(j·phase_i)`.
    pub fn with_pilot_phases(
        subcarrier_spacing_hz: f64,
        n_cp: usize,
        power_budget: f64,
        phases_rad: &[f64],
    ) -> Result<Self> {
        let pilots = phases_rad
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect();
        Self::new(subcarrier_spacing_hz, n_cp, power_budget, pilots)
    }

    /// N = 64, Δf = 120 kHz, P_t = N, N_cp = N/4, unit pilots.
    pub fn reference() -> Self {
        Self::with_unit_pilots(64, 120e3, 16, 64.0).expect("reference numerology is valid")
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }

    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    pub fn pilots(&self) -> &[Complex64] {
        &self.pilots
    }

    /// Elementary period `T = 1/Δf`; also the MAF period in delay.
    pub fn t_symbol_s(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    pub fn sample_period_s(&self) -> f64 {
        self.t_symbol_s() / self.n_subcarriers as f64
    }

    pub fn t_cp_s(&self) -> f64 {
        self.n_cp as f64 * self.sample_period_s()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_subcarriers {
            return Err(Error::Dimension {
                expected: self.n_subcarriers,
                got: len,
            });
        }
        Ok(())
    }
}

/// Per-subcarrier complex distortion `z` applied on top of the pilots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistortionVector(Vec<Complex64>);

impl DistortionVector {
    pub fn new(z: Vec<Complex64>) -> Self {
        Self(z)
    }

    /// The undistorted pilot, `z = 1`.
    pub fn ones(n: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Dimension {
                expected: re.len(),
                got: im.len(),
            });
        }
        Ok(Self(
            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// `‖z‖²`, the transmitted pilot power.
    pub fn power(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `‖z − 1‖²`, the squared distance to the undistorted pilot.
    pub fn distance_sqr_to_ones(&self) -> f64 {
        self.0.iter().map(|v| (v - 1.0).norm_sqr()).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }

    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.im).collect()
    }
}

/// Complex path gain as written in configuration files: either Cartesian
/// or polar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Cartesian { re: f64, im: f64 },
    Polar { magnitude: f64, phase_rad: f64 },
}

impl GainSpec {
    pub fn to_complex(self) -> Complex64 {
        match self {
            GainSpec::Cartesian { re, im } => Complex64::new(re, im),
            GainSpec::Polar { magnitude, phase_rad } => Complex64::from_polar(magnitude, phase_rad),
        }
    }
}

/// One propagation path as written in configuration files (delay in meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub delay_m: f64,
    pub gain: GainSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub delay_s: f64,
}

/// `L ≥ 1` discrete paths with complex gains and non-negative delays.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathChannel {
    paths: Vec<Path>,
}

impl MultipathChannel {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one path".into()));
        }
        for (l, p) in paths.iter().enumerate() {
            if !(p.delay_s.is_finite() && p.delay_s >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "path {l} delay must be finite and non-negative, got {}",
                    p.delay_s
                )));
            }
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("path {l} gain is not finite")));
            }
        }
        Ok(Self { paths })
    }

    pub fn single_path(gain: Complex64, delay_s: f64) -> Result<Self> {
        Self::new(vec![Path { gain, delay_s }])
    }

    /// Builds a channel from meter-denominated specs, scaling every gain by
    /// `reference_gain`.
    pub fn from_specs(specs: &[PathSpec], reference_gain: Complex64) -> Result<Self> {
        Self::new(
            specs
                .iter()
                .map(|s| Path {
                    gain: s.gain.to_complex() * reference_gain,
                    delay_s: meters_to_seconds(s.delay_m),
                })
                .collect(),
        )
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }
}

/// Complex Gaussian noise of amplitude `sigma`, keyed by a 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            seed: 0,
        }
    }
}

/// Deterministic generator for stream `stream_index` of `seed`.
///
/// ChaCha streams are independent keystreams, so any (seed, stream) pair can
/// be drawn in any order or on any thread.
pub fn stream_rng(seed: u64, stream_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_index);
    rng
}

/// `h_i = Σ_l α_l exp(−j2π i τ_l Δf)`.
pub fn channel_frequency_response(channel: &MultipathChannel, config: &PilotConfig) -> Vec<Complex64> {
    let df = config.subcarrier_spacing_hz();
    (0..config.n_subcarriers())
        .map(|i| {
            channel
                .paths()
                .iter()
                .map(|p| p.gain * Complex64::from_polar(1.0, -2.0 * PI * i as f64 * p.delay_s * df))
                .sum()
        })
        .collect()
}

/// Circularly symmetric complex Gaussian samples with variance `σ²`.
pub fn draw_noise(noise: &NoiseModel, n: usize, stream_index: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(noise.seed, stream_index);
    let scale = noise.sigma * std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect()
}

/// `y = (x ⊙ z) ⊙ h + w`.
pub fn synthesize_received(
    config: &PilotConfig,
    z: &DistortionVector,
    h: &[Complex64],
    w: &[Complex64],
) -> Result<Vec<Complex64>> {
    config.check_len(z.len())?;
    config.check_len(h.len())?;
    config.check_len(w.len())?;
    Ok(config
        .pilots()
        .iter()
        .zip(z.as_slice())
        .zip(h)
        .zip(w)
        .map(|(((x, z), h), w)| x * z * h + w)
        .collect())
}

/// Zero-forcing estimate `ĥ = y ⊘ x`.
pub fn zf_channel_estimate(y: &[Complex64], x: &[Complex64]) -> Result<Vec<Complex64>> {
    if y.len() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if let Some((index, xi)) = x.iter().enumerate().find(|(_, xi)| xi.norm() < DEGENERATE_PILOT) {
        return Err(Error::DegeneratePilot {
            index,
            magnitude: xi.norm(),
        });
    }
    Ok(y.iter().zip(x).map(|(y, x)| y / x).collect())
}

/// Discrete-time pilot block with cyclic prefix; length `N_cp + N`.
///
/// `s[k] = (1/N) Σ_i x_i z_i exp(j2πki/N)`.
pub fn synthesize_time_pilot(config: &PilotConfig, z: &DistortionVector) -> Result<Vec<Complex64>> {
    config.check_len(z.len())?;
    let n = config.n_subcarriers();
    let mut freq: Vec<Complex64> = config
        .pilots()
        .iter()
        .zip(z.as_slice())
        .map(|(x, z)| x * z)
        .collect();
    let fft = rustfft::FftPlanner::<f64>::new().plan_fft_inverse(n);
    fft.process(&mut freq);
    let inv_n = 1.0 / n as f64;
    freq.iter_mut().for_each(|v| *v *= inv_n);

    let n_cp = config.n_cp();
    let mut out = Vec::with_capacity(n_cp + n);
    // CP longer than the block wraps around the block again.
    for k in 0..n_cp {
        let idx = (n - (n_cp - k) % n) % n;
        out.push(freq[idx]);
    }
    out.extend_from_slice(&freq);
    Ok(out)
}

/// LoS gain `sqrt(SNR) · σ · exp(jπ/4)` so that `|ᾱ|²/σ² = SNR`.
pub fn los_gain(snr_db: f64, sigma: f64) -> Complex64 {
    let amplitude = 10f64.powf(snr_db / 10.0).sqrt() * sigma;
    Complex64::from_polar(amplitude, FRAC_PI_4)
}
