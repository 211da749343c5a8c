//! Mismatched maximum-likelihood (MML) delay estimation.
//!
//! The receiver assumes the nominal pilots `x` over a single path and
//! concentrates out the complex gain, giving
//! `τ̂ = argmax_τ |(d(τ) ⊙ x)^H y|²`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::maf::parabolic_offset;
use crate::model::PilotConfig;

pub const DEFAULT_MML_OVERSAMPLE: usize = 32;

/// Search window `center ± half_width` sampled every `T/(N·oversample)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySearchGrid {
    center_s: f64,
    half_width_s: f64,
    oversample: usize,
    refine: bool,
}

impl DelaySearchGrid {
    pub fn new(
        center_s: f64,
        half_width_s: f64,
        oversample: usize,
        refine: bool,
        config: &PilotConfig,
    ) -> Result<Self> {
        if !center_s.is_finite() {
            return Err(Error::InvalidArgument("search centre must be finite".into()));
        }
        if oversample < 8 {
            return Err(Error::InvalidArgument(format!(
                "search oversampling must be at least 8, got {oversample}"
            )));
        }
        let half_period = 0.5 * config.t_symbol_s();
        if !(half_width_s > 0.0 && half_width_s <= half_period * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "half-width must lie in (0, T/2 = {half_period:e}], got {half_width_s:e}"
            )));
        }
        Ok(Self {
            center_s,
            half_width_s: half_width_s.min(half_period),
            oversample,
            refine,
        })
    }

    /// Whole unambiguous period around `center_s`, default oversampling,
    /// parabolic refinement on.
    pub fn full_period(center_s: f64, config: &PilotConfig) -> Self {
        Self::new(
            center_s,
            0.5 * config.t_symbol_s(),
            DEFAULT_MML_OVERSAMPLE,
            true,
            config,
        )
        .expect("full-period grid is valid")
    }

    pub fn center_s(&self) -> f64 {
        self.center_s
    }

    pub fn half_width_s(&self) -> f64 {
        self.half_width_s
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn refine(&self) -> bool {
        self.refine
    }

    pub fn step_s(&self, config: &PilotConfig) -> f64 {
        config.sample_period_s() / self.oversample as f64
    }
}

/// `|(d(τ) ⊙ x)^H y|²`.
pub fn mml_objective(y: &[Complex64], x: &[Complex64], tau_s: f64, config: &PilotConfig) -> f64 {
    let df_tau = config.subcarrier_spacing_hz() * tau_s;
    y.iter()
        .zip(x)
        .enumerate()
        .map(|(i, (yi, xi))| {
            let phase = 2.0 * PI * (i as f64 * df_tau).rem_euclid(1.0);
            xi.conj() * yi * Complex64::from_polar(1.0, phase)
        })
        .sum::<Complex64>()
        .norm_sqr()
}

/// Reusable estimator: the grid objective is one zero-padded inverse FFT of
/// length `N·oversample`.
pub struct MmlEstimator {
    config: PilotConfig,
    grid: DelaySearchGrid,
    fft: Arc<dyn Fft<f64>>,
    /// `exp(j2πiΔf·center)`, moves the grid origin to the window centre.
    centre_rotation: Vec<Complex64>,
    /// Grid offsets are `−half_cells..=half_cells`.
    half_cells: i64,
}

impl MmlEstimator {
    pub fn new(config: &PilotConfig, grid: DelaySearchGrid) -> Self {
        let n = config.n_subcarriers();
        let len = n * grid.oversample();
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(len);
        let df_c = config.subcarrier_spacing_hz() * grid.center_s();
        let centre_rotation = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (i as f64 * df_c).rem_euclid(1.0)))
            .collect();
        let step = grid.step_s(config);
        let half_cells = ((grid.half_width_s() / step) * (1.0 + 1e-12)).floor() as i64;
        Self {
            config: config.clone(),
            grid,
            fft,
            centre_rotation,
            half_cells,
        }
    }

    pub fn grid(&self) -> &DelaySearchGrid {
        &self.grid
    }

    /// Objective on the full periodic lattice, index `m` ↦ offset `m·step`
    /// (mod `N·oversample`).
    fn lattice(&self, y: &[Complex64], x: &[Complex64]) -> Vec<f64> {
        let len = self.fft.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (i, ((yi, xi), r)) in y.iter().zip(x).zip(&self.centre_rotation).enumerate() {
            buf[i] = xi.conj() * yi * r;
        }
        self.fft.process(&mut buf);
        buf.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn estimate(&self, y: &[Complex64], x: &[Complex64]) -> f64 {
        let len = self.fft.len() as i64;
        let power = self.lattice(y, x);
        let at = |m: i64| power[m.rem_euclid(len) as usize];

        // Ascending scan, strict improvement only: ties go to the smaller τ.
        let mut best_m = -self.half_cells;
        let mut best = at(best_m);
        for m in (-self.half_cells + 1)..=self.half_cells {
            let p = at(m);
            if p > best {
                best = p;
                best_m = m;
            }
        }

        let step = self.grid.step_s(&self.config);
        let mut offset = best_m as f64;
        if self.grid.refine() {
            if let Some(p) = parabolic_offset(at(best_m - 1), best, at(best_m + 1)) {
                offset += p;
            }
        }
        let hw = self.grid.half_width_s();
        self.grid.center_s() + (offset * step).clamp(-hw, hw)
    }
}

/// One-shot MML estimate; use [`MmlEstimator`] to amortize the FFT plan.
pub fn mml_estimate(y: &[Complex64], x: &[Complex64], grid: &DelaySearchGrid, config: &PilotConfig) -> f64 {
    MmlEstimator::new(config, *grid).estimate(y, x)
}
