//! Mismatched ambiguity function (MAF) and the sidelobe metrics built on it.
//!
//! With unit-modulus pilots the MAF between the distorted transmission and
//! the receiver's nominal pilot reduces to
//! `χ(τ) = Σ_k z_k exp(j2πkΔfτ) = d(τ)^H z`, so `|χ(τ)|² = z^H Q(τ) z` with
//! the rank-one `Q(τ) = d(τ) d(τ)^H`. Both SLPR and ISL then become
//! generalized Rayleigh quotients `z^H A z / z^H B z` with `B = Q(0)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DistortionVector, PilotConfig};

/// Default grid oversampling for sidelobe search.
pub const DEFAULT_SIDELOBE_OVERSAMPLE: usize = 32;

const TIE_RELATIVE: f64 = 1e-12;

/// `d_k(τ) = exp(−j2πkΔfτ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(Vec<Complex64>);

impl SteeringVector {
    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.0)
    }
}

/// Phase `2π·frac(kΔfτ)`; reducing before scaling keeps the period exact.
fn cycle_phase(k: usize, df_tau: f64) -> f64 {
    2.0 * PI * (k as f64 * df_tau).rem_euclid(1.0)
}

pub fn steering(tau_s: f64, config: &PilotConfig) -> SteeringVector {
    let df_tau = config.subcarrier_spacing_hz() * tau_s;
    SteeringVector(
        (0..config.n_subcarriers())
            .map(|k| Complex64::from_polar(1.0, -cycle_phase(k, df_tau)))
            .collect(),
    )
}

/// `χ(τ) = d(τ)^H z`.
pub fn maf_value(z: &DistortionVector, tau_s: f64, config: &PilotConfig) -> Complex64 {
    let df_tau = config.subcarrier_spacing_hz() * tau_s;
    z.as_slice()
        .iter()
        .enumerate()
        .map(|(k, zk)| zk * Complex64::from_polar(1.0, cycle_phase(k, df_tau)))
        .sum()
}

pub fn maf_power(z: &DistortionVector, tau_s: f64, config: &PilotConfig) -> f64 {
    maf_value(z, tau_s, config).norm_sqr()
}

/// `Q(τ) = d(τ) d(τ)^H`.
pub fn rank_one_q(tau_s: f64, config: &PilotConfig) -> DMatrix<Complex64> {
    let d = steering(tau_s, config).to_dvector();
    &d * d.adjoint()
}

/// Symmetric sidelobe band `{τ : tau_null ≤ |τ| ≤ tau_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidelobeRegion {
    tau_null_s: f64,
    tau_max_s: f64,
}

impl SidelobeRegion {
    pub fn new(tau_null_s: f64, tau_max_s: f64, config: &PilotConfig) -> Result<Self> {
        let half_period = 0.5 * config.t_symbol_s();
        if !(tau_null_s.is_finite() && tau_null_s > 0.0) {
            return Err(Error::InvalidRegion(format!(
                "inner edge must be positive, got {tau_null_s:e} s"
            )));
        }
        if !(tau_max_s > tau_null_s) {
            return Err(Error::InvalidRegion(format!(
                "outer edge {tau_max_s:e} s must exceed inner edge {tau_null_s:e} s"
            )));
        }
        if tau_max_s > half_period * (1.0 + 1e-12) {
            return Err(Error::InvalidRegion(format!(
                "outer edge {tau_max_s:e} s exceeds half the MAF period {half_period:e} s"
            )));
        }
        Ok(Self {
            tau_null_s,
            tau_max_s: tau_max_s.min(half_period),
        })
    }

    pub fn tau_null_s(&self) -> f64 {
        self.tau_null_s
    }

    pub fn tau_max_s(&self) -> f64 {
        self.tau_max_s
    }

    pub fn contains(&self, tau_s: f64) -> bool {
        let a = tau_s.abs();
        a >= self.tau_null_s && a <= self.tau_max_s
    }
}

/// Band from the first null of the undistorted mainlobe, `1/(NΔf)`, to
/// `tau_max_s` (default `T/2`).
pub fn default_sidelobe_region(config: &PilotConfig, tau_max_s: Option<f64>) -> Result<SidelobeRegion> {
    let tau_null = 1.0 / (config.n_subcarriers() as f64 * config.subcarrier_spacing_hz());
    let half_period = 0.5 * config.t_symbol_s();
    let tau_max = tau_max_s.unwrap_or(half_period);
    if !(tau_max > 0.0 && tau_max <= half_period * (1.0 + 1e-12)) {
        return Err(Error::InvalidRegion(format!(
            "outer edge must lie in (0, T/2], got {tau_max:e} s"
        )));
    }
    SidelobeRegion::new(tau_null, tau_max, config)
}

/// Location of the strongest MAF sidelobe inside `region`.
///
/// Uniform grid of spacing `T/(N·oversample)` on both sides (plus the exact
/// region edges), then a 3-point parabolic fit on log-power around the best
/// sample. When the two sides tie within `1e-12` relative, the positive
/// offset wins.
pub fn dominant_sidelobe(
    z: &DistortionVector,
    region: &SidelobeRegion,
    config: &PilotConfig,
    oversample: usize,
) -> Result<f64> {
    if oversample < 8 {
        return Err(Error::InvalidArgument(format!(
            "sidelobe oversampling must be at least 8, got {oversample}"
        )));
    }
    let (lo, hi) = (region.tau_null_s(), region.tau_max_s());
    if !(hi > lo) {
        return Err(Error::InvalidRegion("empty sidelobe region".into()));
    }
    let step = config.sample_period_s() / oversample as f64;
    let power = |tau: f64| maf_power(z, tau, config);

    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    let mut candidates = Vec::with_capacity((last - first + 3).max(2) as usize);
    candidates.push(lo);
    candidates.extend(
        (first..=last)
            .map(|m| m as f64 * step)
            .filter(|&t| t > lo && t < hi),
    );
    candidates.push(hi);

    let mut best_tau = f64::NAN;
    let mut best_pow = f64::NEG_INFINITY;
    for sign in [1.0, -1.0] {
        for &t in &candidates {
            let tau = sign * t;
            let p = power(tau);
            if p > best_pow * (1.0 + TIE_RELATIVE) || best_tau.is_nan() {
                best_pow = p;
                best_tau = tau;
            }
        }
    }

    let refined = parabolic_offset(
        power(best_tau - step).ln(),
        best_pow.ln(),
        power(best_tau + step).ln(),
    )
    .map_or(best_tau, |p| best_tau + p * step);

    let sign = best_tau.signum();
    Ok(sign * refined.abs().clamp(lo, hi))
}

/// Vertex offset (in grid cells, clamped to ±0.5) of the parabola through
/// three equally spaced samples; `None` when the samples are not concave.
pub(crate) fn parabolic_offset(left: f64, centre: f64, right: f64) -> Option<f64> {
    let denom = left - 2.0 * centre + right;
    if !(denom < 0.0) || !denom.is_finite() {
        return None;
    }
    let p = 0.5 * (left - right) / denom;
    p.is_finite().then(|| p.clamp(-0.5, 0.5))
}

/// `∫_{T_SL} Q(τ) dτ` in closed form; real symmetric Toeplitz.
pub fn isl_matrix(region: &SidelobeRegion, config: &PilotConfig) -> DMatrix<Complex64> {
    let n = config.n_subcarriers();
    let df = config.subcarrier_spacing_hz();
    let (a, b) = (region.tau_null_s(), region.tau_max_s());
    let diag = 2.0 * (b - a);
    let by_lag: Vec<f64> = (0..n)
        .map(|m| {
            if m == 0 {
                diag
            } else {
                let w = 2.0 * PI * m as f64 * df;
                ((w * b).sin() - (w * a).sin()) / (PI * m as f64 * df)
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |k, l| Complex64::new(by_lag[k.abs_diff(l)], 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Isl,
    Slpr,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Isl => "isl",
            MetricKind::Slpr => "slpr",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slpr" => Ok(MetricKind::Slpr),
            "isl" => Ok(MetricKind::Isl),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric '{other}', expected slpr or isl"
            ))),
        }
    }
}

/// Hermitian pair `(A, B)` of a localization metric written as
/// `z^H A z / z^H B z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricQuadratics {
    pub kind: MetricKind,
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
    /// Frozen dominant-sidelobe offset; SLPR only.
    pub tau_star_s: Option<f64>,
    pub region: SidelobeRegion,
}

impl MetricQuadratics {
    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// Same metric with `A` and `B` both multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            a: &self.a * Complex64::new(c, 0.0),
            b: &self.b * Complex64::new(c, 0.0),
            ..self.clone()
        }
    }
}

pub fn metric_pair(
    kind: MetricKind,
    z_ref: &DistortionVector,
    region: &SidelobeRegion,
    config: &PilotConfig,
) -> Result<MetricQuadratics> {
    metric_pair_with_oversample(kind, z_ref, region, config, DEFAULT_SIDELOBE_OVERSAMPLE)
}

pub fn metric_pair_with_oversample(
    kind: MetricKind,
    z_ref: &DistortionVector,
    region: &SidelobeRegion,
    config: &PilotConfig,
    oversample: usize,
) -> Result<MetricQuadratics> {
    if z_ref.len() != config.n_subcarriers() {
        return Err(Error::Dimension {
            expected: config.n_subcarriers(),
            got: z_ref.len(),
        });
    }
    let b = rank_one_q(0.0, config);
    let (a, tau_star_s) = match kind {
        MetricKind::Slpr => {
            let tau_star = dominant_sidelobe(z_ref, region, config, oversample)?;
            (rank_one_q(tau_star, config), Some(tau_star))
        }
        MetricKind::Isl => (isl_matrix(region, config), None),
    };
    Ok(MetricQuadratics {
        kind,
        a,
        b,
        tau_star_s,
        region: *region,
    })
}

/// `Re(z^H M z)`; exact for Hermitian `M`.
pub fn quadratic_form(m: &DMatrix<Complex64>, z: &[Complex64]) -> f64 {
    let zv = DVector::from_column_slice(z);
    zv.dotc(&(m * &zv)).re
}

/// `z^H A z / z^H B z`.
pub fn rayleigh_ratio(z: &DistortionVector, q: &MetricQuadratics) -> Result<f64> {
    if z.len() != q.dim() {
        return Err(Error::Dimension {
            expected: q.dim(),
            got: z.len(),
        });
    }
    let den = quadratic_form(&q.b, z.as_slice());
    let floor = 1e-14 * q.b.trace().re * z.power();
    if !(den > floor) {
        return Err(Error::DegenerateMainlobe { value: den });
    }
    Ok(quadratic_form(&q.a, z.as_slice()) / den)
}

pub fn to_db(power_ratio: f64) -> f64 {
    10.0 * power_ratio.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_z(seed: u64, n: usize) -> DistortionVector {
        let mut rng = stream_rng(seed, 0);
        DistortionVector::new(
            (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
    }

    /// Dense-grid search of the strongest sidelobe, independent of the
    /// parabolic refinement path.
    fn dense_peak(z: &DistortionVector, region: &SidelobeRegion, cfg: &PilotConfig) -> (f64, f64) {
        let step = cfg.sample_period_s() / 1024.0;
        let mut best = (0.0, f64::MIN);
        let mut t = region.tau_null_s();
        while t <= region.tau_max_s() {
            for tau in [t, -t] {
                let p = maf_power(z, tau, cfg);
                if p > best.1 {
                    best = (tau, p);
                }
            }
            t += step;
        }
        best
    }

    #[test]
    fn steering_special_values() {
        let cfg = PilotConfig::reference();
        assert!(steering(0.0, &cfg)
            .as_slice()
            .iter()
            .all(|v| *v == Complex64::new(1.0, 0.0)));
        let d = steering(cfg.t_symbol_s(), &cfg);
        assert!(d.as_slice().iter().all(|v| (v - 1.0).norm() < 1e-12));
        let two = PilotConfig::with_unit_pilots(2, 1e3, 0, 2.0).unwrap();
        let d = steering(0.5e-3, &two);
        assert!((d.as_slice()[0] - 1.0).norm() < 1e-15);
        assert!((d.as_slice()[1] + 1.0).norm() < 1e-15);
        assert!(d.as_slice().iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn maf_lattice_values() {
        let cfg = PilotConfig::reference();
        let ones = DistortionVector::ones(64);
        assert!((maf_value(&ones, 0.0, &cfg) - 64.0).norm() < 1e-12);
        for m in [1, 5, 32, 63] {
            let v = maf_value(&ones, m as f64 * cfg.sample_period_s(), &cfg);
            assert!(v.norm() < 1e-10, "m={m} |χ|={}", v.norm());
        }
    }

    #[test]
    fn maf_matches_cyclic_cross_correlation() {
        use crate::model::synthesize_time_pilot;
        let n = 16;
        let cfg = PilotConfig::with_pilot_phases(
            1e5,
            0,
            n as f64,
            &(0..n).map(|i| 0.37 * (i * i) as f64).collect::<Vec<_>>(),
        )
        .unwrap();
        let z = random_z(3, n);
        let s = synthesize_time_pilot(&cfg, &z).unwrap();
        let s_nom = synthesize_time_pilot(&cfg, &DistortionVector::ones(n)).unwrap();
        // Unit pilots: χ is pilot-independent, so compare against the all-ones nominal case.
        let unit = PilotConfig::with_unit_pilots(n, 1e5, 0, n as f64).unwrap();
        for m in 0..n {
            // Σ_k s[k] conj(s̃[k+m]) scaled by N² equals Σ_i x_i z_i conj(x_i) e^{-j2πim/N}.
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += s[k] * s_nom[(k + m) % n].conj();
            }
            acc *= (n * n) as f64 / n as f64;
            let chi = maf_value(&z, -(m as f64) * unit.sample_period_s(), &unit);
            assert!((acc - chi).norm() < 1e-10 * chi.norm().max(1.0), "lag {m}");
        }
    }

    #[test]
    fn maf_is_periodic() {
        let cfg = PilotConfig::reference();
        let z = random_z(8, 64);
        let mut rng = stream_rng(99, 0);
        for _ in 0..100 {
            let tau = rng.random_range(-1e-5..1e-5);
            let a = maf_value(&z, tau, &cfg);
            let b = maf_value(&z, tau + cfg.t_symbol_s(), &cfg);
            assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0));
        }
    }

    #[test]
    fn rank_one_q_properties() {
        let cfg = PilotConfig::reference();
        let q0 = rank_one_q(0.0, &cfg);
        assert!(q0.iter().all(|v| (v - 1.0).norm() < 1e-15));
        let two = PilotConfig::with_unit_pilots(2, 1e3, 0, 2.0).unwrap();
        let q = rank_one_q(0.5e-3, &two);
        let expect = [1.0, -1.0, -1.0, 1.0];
        for (v, e) in q.iter().zip(expect) {
            assert!((v - e).norm() < 1e-15);
        }

        let mut rng = stream_rng(4, 0);
        for trial in 0..1000u64 {
            let tau = rng.random_range(-5e-6..5e-6);
            let z = random_z(1000 + trial, 64);
            let q = rank_one_q(tau, &cfg);
            let lhs = quadratic_form(&q, z.as_slice());
            let rhs = maf_power(&z, tau, &cfg);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-12));
            if trial == 0 {
                assert_relative_eq!(q.trace().re, 64.0, max_relative = 1e-14);
                assert!((&q - q.adjoint()).iter().all(|v| v.norm() < 1e-14));
            }
        }
    }

    #[test]
    fn default_region_values() {
        let cfg = PilotConfig::reference();
        let r = default_sidelobe_region(&cfg, None).unwrap();
        assert_relative_eq!(r.tau_null_s(), 1.0 / 7.68e6, max_relative = 1e-12);
        assert_relative_eq!(
            r.tau_null_s() * crate::model::SPEED_OF_LIGHT,
            39.035476,
            max_relative = 1e-6
        );
        assert_relative_eq!(r.tau_max_s(), 4.166_666_666_7e-6, max_relative = 1e-9);
        assert!(default_sidelobe_region(&cfg, Some(r.tau_null_s() / 2.0)).is_err());
        assert!(default_sidelobe_region(&cfg, Some(cfg.t_symbol_s())).is_err());
    }

    #[test]
    fn dirichlet_first_sidelobe() {
        let cfg = PilotConfig::reference();
        let region = default_sidelobe_region(&cfg, None).unwrap();
        let ones = DistortionVector::ones(64);
        let tau = dominant_sidelobe(&ones, &region, &cfg, 32).unwrap();
        let (dense_tau, dense_pow) = dense_peak(&ones, &region, &cfg);
        assert!(tau > 0.0);
        assert!((tau - dense_tau.abs()).abs() < cfg.sample_period_s() / 1024.0);
        let ratio_db = to_db(maf_power(&ones, tau, &cfg) / 4096.0);
        assert!((ratio_db - to_db(dense_pow / 4096.0)).abs() < 0.01);
        assert!((ratio_db + 13.2).abs() < 0.1, "{ratio_db}");
        let cells = tau / cfg.sample_period_s();
        assert!((cells - 1.43).abs() < 0.01, "{cells}");

        let coarse = dominant_sidelobe(&ones, &region, &cfg, 64).unwrap();
        let fine = dominant_sidelobe(&ones, &region, &cfg, 1024).unwrap();
        assert!((coarse - fine).abs() <= cfg.t_symbol_s() / (64.0 * 64.0));
    }

    #[test]
    fn narrow_window_returns_enclosed_peak() {
        let cfg = PilotConfig::reference();
        let z = random_z(17, 64);
        let wide = default_sidelobe_region(&cfg, None).unwrap();
        let (peak, _) = dense_peak(&z, &wide, &cfg);
        let step = cfg.sample_period_s() / 8.0;
        let narrow = SidelobeRegion::new(peak.abs() - 0.45 * step, peak.abs() + 0.45 * step, &cfg).unwrap();
        let tau = dominant_sidelobe(&z, &narrow, &cfg, 8).unwrap();
        assert!((tau - peak).abs() < step / 20.0, "{tau} vs {peak}");
    }

    #[test]
    fn dominant_sidelobe_rejects_low_oversample() {
        let cfg = PilotConfig::reference();
        let r = default_sidelobe_region(&cfg, None).unwrap();
        assert!(dominant_sidelobe(&DistortionVector::ones(64), &r, &cfg, 4).is_err());
    }

    fn trapezoid_isl(region: &SidelobeRegion, cfg: &PilotConfig, nodes: usize) -> DMatrix<Complex64> {
        let n = cfg.n_subcarriers();
        let (a, b) = (region.tau_null_s(), region.tau_max_s());
        let h = (b - a) / (nodes - 1) as f64;
        let mut acc = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..nodes {
            let t = a + j as f64 * h;
            let w = if j == 0 || j == nodes - 1 { 0.5 * h } else { h };
            acc += (rank_one_q(t, cfg) + rank_one_q(-t, cfg)) * Complex64::new(w, 0.0);
        }
        acc
    }

    #[test]
    fn isl_matrix_matches_quadrature() {
        let cfg = PilotConfig::with_unit_pilots(8, 120e3, 0, 8.0).unwrap();
        let region = default_sidelobe_region(&cfg, None).unwrap();
        let analytic = isl_matrix(&region, &cfg);
        let numeric = trapezoid_isl(&region, &cfg, 100_000);
        let rel = (&analytic - &numeric).norm() / numeric.norm();
        assert!(rel < 1e-8, "relative Frobenius error {rel}");
        for k in 0..8 {
            assert_relative_eq!(
                analytic[(k, k)].re,
                2.0 * (region.tau_max_s() - region.tau_null_s()),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn isl_full_period_is_diagonal() {
        let cfg = PilotConfig::with_unit_pilots(8, 120e3, 0, 8.0).unwrap();
        let half = 0.5 * cfg.t_symbol_s();
        let region = SidelobeRegion::new(1e-18, half, &cfg).unwrap();
        let a = isl_matrix(&region, &cfg);
        for k in 0..8 {
            for l in 0..8 {
                let expect = if k == l { cfg.t_symbol_s() } else { 0.0 };
                assert!((a[(k, l)].re - expect).abs() < 1e-12 * cfg.t_symbol_s());
            }
        }
    }

    #[test]
    fn metric_pairs_are_hermitian_psd() {
        let cfg = PilotConfig::with_unit_pilots(16, 120e3, 0, 16.0).unwrap();
        let region = default_sidelobe_region(&cfg, None).unwrap();
        let ones = DistortionVector::ones(16);
        for kind in [MetricKind::Slpr, MetricKind::Isl] {
            let q = metric_pair(kind, &ones, &region, &cfg).unwrap();
            assert!(q.b.iter().all(|v| (v - 1.0).norm() < 1e-15));
            for m in [&q.a, &q.b] {
                assert!((m - m.adjoint()).iter().all(|v| v.norm() < 1e-14));
                let tr = m.trace().re;
                let min_eig = m.clone().symmetric_eigenvalues().min();
                assert!(min_eig >= -1e-10 * tr, "{kind}: {min_eig}");
            }
            match kind {
                MetricKind::Slpr => {
                    assert_relative_eq!(q.a.trace().re, 16.0, max_relative = 1e-13);
                    assert!(q.tau_star_s.unwrap() > 0.0);
                }
                MetricKind::Isl => {
                    assert!(q.a.iter().all(|v| v.im == 0.0));
                    assert!(q.tau_star_s.is_none());
                }
            }
        }
        let other = random_z(2, 16);
        let q1 = metric_pair(MetricKind::Isl, &ones, &region, &cfg).unwrap();
        let q2 = metric_pair(MetricKind::Isl, &other, &region, &cfg).unwrap();
        assert_eq!(q1.a, q2.a);
    }

    #[test]
    fn rayleigh_ratio_values() {
        let cfg = PilotConfig::reference();
        let region = default_sidelobe_region(&cfg, None).unwrap();
        let ones = DistortionVector::ones(64);
        let q = metric_pair(MetricKind::Slpr, &ones, &region, &cfg).unwrap();
        let r = rayleigh_ratio(&ones, &q).unwrap();
        assert!((to_db(r) + 13.2).abs() < 0.1, "{}", to_db(r));

        let z = random_z(5, 64);
        let base = rayleigh_ratio(&z, &q).unwrap();
        for c in [Complex64::new(3.0, -2.0), Complex64::new(1e-3, 0.0)] {
            assert_relative_eq!(
                rayleigh_ratio(&z.scaled(c), &q).unwrap(),
                base,
                max_relative = 1e-12
            );
        }

        let isl = metric_pair(MetricKind::Isl, &ones, &region, &cfg).unwrap();
        let direct = {
            let nodes = 200_001;
            let (a, b) = (region.tau_null_s(), region.tau_max_s());
            let h = (b - a) / (nodes - 1) as f64;
            let mut acc = 0.0;
            for j in 0..nodes {
                let t = a + j as f64 * h;
                let w = if j == 0 || j == nodes - 1 { 0.5 * h } else { h };
                acc += w * (maf_power(&ones, t, &cfg) + maf_power(&ones, -t, &cfg));
            }
            acc / maf_power(&ones, 0.0, &cfg)
        };
        assert_relative_eq!(rayleigh_ratio(&ones, &isl).unwrap(), direct, max_relative = 1e-8);
    }

    #[test]
    fn rayleigh_ratio_rejects_null_mainlobe() {
        let cfg = PilotConfig::with_unit_pilots(4, 1e5, 0, 4.0).unwrap();
        let region = default_sidelobe_region(&cfg, None).unwrap();
        let q = metric_pair(MetricKind::Isl, &DistortionVector::ones(4), &region, &cfg).unwrap();
        let z = DistortionVector::from_parts(&[1.0, -1.0, 1.0, -1.0], &[0.0; 4]).unwrap();
        assert!(matches!(
            rayleigh_ratio(&z, &q),
            Err(Error::DegenerateMainlobe { .. })
        ));
    }
}
