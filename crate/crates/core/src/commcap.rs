//! Capacity lower bound from the diagonal LMMSE error covariance.
//!
//! The receiver equalizes data with a channel estimate `ĥ` obtained from the
//! distorted pilots. The per-subcarrier error variance `r_i` of the LMMSE
//! data estimate gives `C ≥ −Σ ln r_i`. With the noise dropped from the
//! estimate, `ĥ = h ⊙ z` and `r_i` becomes `ψ_i(z_i, h_i)`.
//!
//! All logarithms are natural, so capacities are in nats.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{zf_channel_estimate, DistortionVector};

/// Floor applied to `ψ_i`/`r_i` before taking the logarithm.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    /// `−ln r_i` per subcarrier (after clamping).
    pub per_subcarrier_terms: Vec<f64>,
    pub total: f64,
    /// `total / N`.
    pub normalized: f64,
    /// Number of terms whose argument was at or below [`LOG_FLOOR`].
    pub clamped: usize,
}

/// `ψ_i = |h|²|z|²(|h|²+σ²)/(|h|²|z|²+σ²)² − 2|h|²Re{z}/(|h|²|z|²+σ²) + 1`.
pub fn psi(z_i: Complex64, h_i: Complex64, sigma2: f64) -> f64 {
    let h2 = h_i.norm_sqr();
    let hz2 = h2 * z_i.norm_sqr();
    let den = hz2 + sigma2;
    hz2 * (h2 + sigma2) / (den * den) - 2.0 * h2 * z_i.re / den + 1.0
}

/// `−Σ ln r_i` over the diagonal of the LMMSE error covariance.
pub fn capacity_lower_bound(r: &[f64]) -> CapacityReport {
    let mut clamped = 0;
    let per_subcarrier_terms: Vec<f64> = r
        .iter()
        .map(|&ri| {
            if !(ri > LOG_FLOOR) {
                clamped += 1;
                -LOG_FLOOR.ln()
            } else {
                -ri.ln()
            }
        })
        .collect();
    let total: f64 = per_subcarrier_terms.iter().sum();
    let normalized = if r.is_empty() { 0.0 } else { total / r.len() as f64 };
    CapacityReport {
        per_subcarrier_terms,
        total,
        normalized,
        clamped,
    }
}

/// Communication metric `f_com(z) = −Σ ln ψ_i(z_i, h_i)`.
pub fn f_com(z: &DistortionVector, h: &[Complex64], sigma2: f64) -> Result<CapacityReport> {
    if z.len() != h.len() {
        return Err(Error::Dimension {
            expected: h.len(),
            got: z.len(),
        });
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let psis: Vec<f64> = z
        .as_slice()
        .iter()
        .zip(h)
        .map(|(&zi, &hi)| psi(zi, hi, sigma2))
        .collect();
    Ok(capacity_lower_bound(&psis))
}

/// Exact `r_i` from an observation: `ĥ = y ⊘ x`, then
/// `r_i = |ĥ|²(|h|²+σ²)/(|ĥ|²+σ²)² − 2Re{ĥ* h}/(|ĥ|²+σ²) + 1`.
pub fn lmmse_diag_exact(y: &[Complex64], x: &[Complex64], h: &[Complex64], sigma2: f64) -> Result<Vec<f64>> {
    if h.len() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: h.len(),
        });
    }
    let h_hat = zf_channel_estimate(y, x)?;
    Ok(h_hat
        .iter()
        .zip(h)
        .map(|(hh, h)| {
            let e2 = hh.norm_sqr();
            let den = e2 + sigma2;
            e2 * (h.norm_sqr() + sigma2) / (den * den) - 2.0 * (hh.conj() * h).re / den + 1.0
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_noise, los_gain, stream_rng, NoiseModel};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_channel(seed: u64, n: usize) -> Vec<Complex64> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn psi_special_cases() {
        let h = Complex64::new(0.3, -1.1);
        let s2 = 0.7;
        assert_relative_eq!(
            psi(Complex64::new(1.0, 0.0), h, s2),
            s2 / (h.norm_sqr() + s2),
            max_relative = 1e-14
        );
        assert_eq!(psi(Complex64::new(0.0, 0.0), h, s2), 1.0);
        assert_eq!(psi(Complex64::new(2.0, 5.0), Complex64::new(0.0, 0.0), s2), 1.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn f_com_single_path_reference_values() {
        let sigma = crate::model::DEFAULT_SIGMA;
        let ones = DistortionVector::ones(64);
        for (snr_db, expect) in [(0.0, 0.693_147_180_559_945), (15.0, 3.485_010_713_180_57)] {
            let h = vec![los_gain(snr_db, sigma); 64];
            let rep = f_com(&ones, &h, sigma * sigma).unwrap();
            assert!(
                (rep.normalized - expect).abs() < 1e-9,
                "{snr_db}: {}",
                rep.normalized
            );
            assert_eq!(rep.clamped, 0);
            assert!((rep.total - rep.per_subcarrier_terms.iter().sum::<f64>()).abs() < 1e-12);
            assert_relative_eq!(rep.normalized * 64.0, rep.total, max_relative = 1e-15);
        }
    }

    #[test]
    fn f_com_at_ones_is_sum_of_log_snr() {
        for seed in 0..100 {
            let h = random_channel(seed, 16);
            let s2 = 0.05 + seed as f64 * 0.01;
            let rep = f_com(&DistortionVector::ones(16), &h, s2).unwrap();
            let expect: f64 = h.iter().map(|v| (1.0 + v.norm_sqr() / s2).ln()).sum();
            assert_relative_eq!(rep.total, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn noiseless_lmmse_equals_psi() {
        let n = 16;
        let h = random_channel(3, n);
        let mut rng = stream_rng(4, 0);
        let z = DistortionVector::new(
            (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
                .collect(),
        );
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 0.4 * i as f64))
            .collect();
        let y: Vec<Complex64> = (0..n).map(|i| x[i] * z.as_slice()[i] * h[i]).collect();
        let s2 = 0.3;
        let r = lmmse_diag_exact(&y, &x, &h, s2).unwrap();
        for i in 0..n {
            let p = psi(z.as_slice()[i], h[i], s2);
            assert!(
                (r[i] - p).abs() <= 1e-12 * p.abs().max(1e-3),
                "i={i}: {} vs {p}",
                r[i]
            );
        }
        // z = 1: perfect estimate
        let y1: Vec<Complex64> = (0..n).map(|i| x[i] * h[i]).collect();
        let r1 = lmmse_diag_exact(&y1, &x, &h, s2).unwrap();
        for i in 0..n {
            assert_relative_eq!(r1[i], s2 / (h[i].norm_sqr() + s2), max_relative = 1e-12);
        }
    }

    #[test]
    fn lmmse_dead_channel_is_nonnegative() {
        let noise = NoiseModel::new(0.8, 77).unwrap();
        let x = vec![Complex64::new(1.0, 0.0); 8];
        let h = vec![Complex64::new(0.0, 0.0); 8];
        for trial in 0..1000 {
            let y = draw_noise(&noise, 8, trial);
            let r = lmmse_diag_exact(&y, &x, &h, noise.variance()).unwrap();
            assert!(r.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn capacity_bound_identities() {
        assert_eq!(capacity_lower_bound(&[1.0; 5]).total, 0.0);
        let rep = capacity_lower_bound(&[0.5, 1.0, 1.0, 1.0]);
        assert_relative_eq!(rep.total, 2f64.ln(), max_relative = 1e-15);

        let h = random_channel(8, 8);
        let s2 = 0.2;
        let r: Vec<f64> = h.iter().map(|v| s2 / (v.norm_sqr() + s2)).collect();
        let expect: f64 = h.iter().map(|v| (1.0 + v.norm_sqr() / s2).ln()).sum();
        assert_relative_eq!(capacity_lower_bound(&r).total, expect, max_relative = 1e-12);
    }

    #[test]
    fn nonpositive_terms_are_clamped_and_counted() {
        let rep = capacity_lower_bound(&[0.5, -0.1, 0.0, 1.0]);
        assert_eq!(rep.clamped, 2);
        assert!(rep.total.is_finite());
    }

    #[test]
    fn capacity_peaks_at_zero_phase() {
        let h = vec![Complex64::new(0.9, 0.4); 4];
        let s2 = 0.1;
        let at = |theta: f64| {
            let z = DistortionVector::new(vec![Complex64::from_polar(1.0, theta); 4]);
            f_com(&z, &h, s2).unwrap().total
        };
        let best = at(0.0);
        for k in 1..360 {
            let theta = k as f64 * std::f64::consts::PI / 180.0;
            assert!(at(theta) < best, "θ={theta}");
        }
    }

    #[test]
    fn psi_denominators_stay_positive() {
        let mut rng = stream_rng(12, 0);
        for _ in 0..1000 {
            let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let h = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            assert!(psi(z, h, 1e-6).is_finite());
        }
    }

    #[test]
    fn f_com_rejects_bad_input() {
        let h = vec![Complex64::new(1.0, 0.0); 3];
        assert!(f_com(&DistortionVector::ones(4), &h, 1.0).is_err());
        assert!(f_com(&DistortionVector::ones(3), &h, 0.0).is_err());
    }
}
