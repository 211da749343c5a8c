//! Sidelobe-raising pilot design by fractional programming.
//!
//! The design problem is
//!
//! ```text
//! max_z  z^H A z / z^H B z    s.t.  ‖z − 1‖² ≤ ε P_t
//! ```
//!
//! with `B = 11^T`. Dinkelbach's transform replaces the ratio by the
//! parametric objective `z^H A z − β z^H B z`, with `β` set to the ratio at
//! the previous iterate. Each parametric problem is a difference of convex
//! quadratics; linearizing the convex `z^H A z` term gives a ball-constrained
//! convex QCQP whose KKT system is solved in closed form with the
//! Sherman–Morrison inverse of `β11^T + λI` and a scalar root search on `λ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maf::{
    dominant_sidelobe, metric_pair, quadratic_form, MetricKind, MetricQuadratics, SidelobeRegion,
    DEFAULT_SIDELOBE_OVERSAMPLE,
};
use crate::model::{DistortionVector, PilotConfig};

const COLLINEAR_TOL: f64 = 1e-12;
const LAMBDA_PRECONDITION_TOL: f64 = 1e-14;
const MAX_TAU_REFRESH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    /// Normalized proximity radius: `‖z − 1‖² ≤ ε P_t`.
    pub epsilon: f64,
    /// Dinkelbach stop: `|Δβ| ≤ outer_tol · max(1, β)`.
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// DoC stop: `‖Δz‖ ≤ inner_tol · √N`.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Relative bracket width at which the `λ` bisection stops.
    pub lambda_tol: f64,
    /// Restrict `z` to real values (linear term uses `Re{b}`).
    pub real_z: bool,
    /// Extra rounds of "recompute τ* at the optimum, re-optimize" (SLPR only, ≤ 3).
    pub refresh_tau_star: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            outer_tol: 1e-8,
            outer_max_iters: 100,
            inner_tol: 1e-9,
            inner_max_iters: 200,
            lambda_tol: 1e-12,
            real_z: false,
            refresh_tau_star: 0,
        }
    }
}

impl OptimizerOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("outer_tol", self.outer_tol)?;
        positive("inner_tol", self.inner_tol)?;
        positive("lambda_tol", self.lambda_tol)?;
        if self.outer_max_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidArgument("iteration caps must be at least 1".into()));
        }
        if self.refresh_tau_star > MAX_TAU_REFRESH {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_TAU_REFRESH} τ* refresh rounds are supported"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub z_opt: DistortionVector,
    /// Ratio after each outer iteration; entry 0 is the ratio at `z = 1`.
    pub beta_trajectory: Vec<f64>,
    pub final_ratio: f64,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    /// `‖z‖² − P_t`; positive means the power budget is exceeded.
    pub power_residual: f64,
    /// `‖z − 1‖² − ε P_t`.
    pub proximity_residual: f64,
    pub lambda_final: f64,
    pub converged: bool,
    pub tau_star_s: Option<f64>,
}

impl OptimizationReport {
    pub fn power_violated(&self, power_budget: f64) -> bool {
        self.power_residual > 1e-9 * power_budget
    }
}

/// Capacity-optimal distortion. Closed form only for `P_t ≥ N`, where it is
/// the undistorted pilot.
pub fn comm_optimal(config: &PilotConfig) -> Result<DistortionVector> {
    let n = config.n_subcarriers();
    if config.power_budget() < n as f64 {
        return Err(Error::Unsupported(format!(
            "communication-optimal design requires P_t ≥ N ({} < {n})",
            config.power_budget()
        )));
    }
    Ok(DistortionVector::ones(n))
}

/// `b = (s/N)·1 + b⊥` with `s = 1^T b`.
struct Split {
    n: f64,
    mean: Complex64,
    perp: Vec<Complex64>,
    perp_norm2: f64,
    norm2: f64,
}

impl Split {
    fn new(b: &[Complex64]) -> Self {
        let n = b.len() as f64;
        let mean = b.iter().sum::<Complex64>() / n;
        let perp: Vec<Complex64> = b.iter().map(|v| v - mean).collect();
        let perp_norm2 = perp.iter().map(|v| v.norm_sqr()).sum();
        let norm2 = b.iter().map(|v| v.norm_sqr()).sum();
        Self {
            n,
            mean,
            perp,
            perp_norm2,
            norm2,
        }
    }

    /// `|s/N − βN|²`.
    fn parallel_gap2(&self, beta: f64) -> f64 {
        (self.mean - beta * self.n).norm_sqr()
    }

    /// `‖z(λ) − 1‖²`.
    fn distance2(&self, beta: f64, lambda: f64) -> f64 {
        let par = lambda + beta * self.n;
        self.perp_norm2 / (lambda * lambda) + self.n * self.parallel_gap2(beta) / (par * par)
    }

    /// `z(λ) = 1 + b⊥/λ + (s/N − βN)/(λ + βN)·1`, the Sherman–Morrison
    /// form of `(β11^T + λI)^{-1}(b + λ1)`.
    fn z_at(&self, beta: f64, lambda: f64) -> DistortionVector {
        let par = (self.mean - beta * self.n) / (lambda + beta * self.n);
        DistortionVector::new(self.perp.iter().map(|p| 1.0 + par + p / lambda).collect())
    }
}

fn check_step_inputs(beta: f64, b: &[Complex64], epsilon_ball: f64) -> Result<()> {
    if b.is_empty() {
        return Err(Error::InvalidArgument("empty linear term".into()));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("β must be positive, got {beta}")));
    }
    if !(epsilon_ball.is_finite() && epsilon_ball > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "proximity radius εP_t must be positive, got {epsilon_ball}"
        )));
    }
    if b.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::InvalidArgument(
            "linear term has non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Root of `φ(λ) = ‖b⊥‖²/λ² + N|s/N − βN|²/(λ + βN)² − εP_t`.
///
/// `φ` is strictly decreasing on `λ > 0`, runs from `+∞` to `−εP_t`, so the
/// root is unique. Bracket around `‖b⊥‖/√(εP_t)`, expand geometrically, then
/// bisect to relative width `lambda_tol`.
pub fn solve_lambda(beta: f64, b: &[Complex64], epsilon_ball: f64, lambda_tol: f64) -> Result<f64> {
    check_step_inputs(beta, b, epsilon_ball)?;
    let split = Split::new(b);
    if split.perp_norm2.sqrt() < LAMBDA_PRECONDITION_TOL * split.norm2.sqrt() || split.norm2 == 0.0 {
        return Err(Error::InvalidArgument(
            "linear term is collinear with 1; the λ = 0 branch applies".into(),
        ));
    }
    let phi = |lambda: f64| split.distance2(beta, lambda) - epsilon_ball;

    let guess = split.perp_norm2.sqrt() / epsilon_ball.sqrt();
    let (mut lo, mut hi) = (guess / 16.0, guess * 16.0);
    while phi(lo) <= 0.0 {
        lo *= 0.5;
    }
    while phi(hi) >= 0.0 {
        hi *= 2.0;
    }
    while hi - lo > lambda_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktStep {
    pub z: DistortionVector,
    pub lambda: f64,
}

/// Exact minimizer of `β z^H 11^T z − 2Re{b^H z}` over `‖z − 1‖² ≤ εP_t`.
pub fn doc_kkt_step(beta: f64, b: &[Complex64], epsilon_ball: f64, lambda_tol: f64) -> Result<KktStep> {
    check_step_inputs(beta, b, epsilon_ball)?;
    let split = Split::new(b);
    let n = split.n;

    if split.perp_norm2.sqrt() <= COLLINEAR_TOL * split.norm2.sqrt() {
        // The objective only sees 1^T z. Unconstrained minimizer of least norm:
        // z = (β11^T)^† b = s/(βN²)·1.
        let scale = split.mean / (beta * n);
        if n * (scale - 1.0).norm_sqr() <= epsilon_ball {
            return Ok(KktStep {
                z: DistortionVector::new(vec![scale; b.len()]),
                lambda: 0.0,
            });
        }
        let lambda = (n * split.parallel_gap2(beta)).sqrt() / epsilon_ball.sqrt() - beta * n;
        let par = (split.mean - beta * n) / (lambda + beta * n);
        return Ok(KktStep {
            z: DistortionVector::new(vec![1.0 + par; b.len()]),
            lambda,
        });
    }

    // A component orthogonal to 1 makes the objective unbounded without the
    // ball, so the constraint is active.
    let lambda = solve_lambda(beta, b, epsilon_ball, lambda_tol)?;
    Ok(KktStep {
        z: split.z_at(beta, lambda),
        lambda,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub z: DistortionVector,
    pub lambda: f64,
    pub iters: usize,
}

fn is_all_ones(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|v| (v - 1.0).norm() <= 1e-12)
}

fn matvec(a: &DMatrix<Complex64>, z: &DistortionVector, real_z: bool) -> Vec<Complex64> {
    let bz = a * DVector::from_column_slice(z.as_slice());
    if real_z {
        bz.iter().map(|v| Complex64::new(v.re, 0.0)).collect()
    } else {
        bz.iter().copied().collect()
    }
}

/// Difference-of-convex iterations for `max z^H A z − β z^H B z` over the
/// proximity ball, started from a feasible `z_init`.
///
/// The surrogate is non-decreasing along the iterates; a drop of more than
/// `1e-9·N` (in units of `tr(A)/N + β tr(B)/N`) is reported as
/// [`Error::Consistency`].
pub fn doc_inner(
    q: &MetricQuadratics,
    beta: f64,
    z_init: &DistortionVector,
    epsilon_ball: f64,
    opts: &OptimizerOptions,
) -> Result<InnerOutcome> {
    let n = q.dim();
    if z_init.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: z_init.len(),
        });
    }
    if !is_all_ones(&q.b) {
        return Err(Error::Unsupported(
            "closed-form step requires the mainlobe matrix B = 11^T".into(),
        ));
    }
    if z_init.distance_sqr_to_ones() > epsilon_ball * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "initial point is outside the proximity ball (‖z−1‖² = {:e} > {epsilon_ball:e})",
            z_init.distance_sqr_to_ones()
        )));
    }
    let surrogate =
        |z: &DistortionVector| quadratic_form(&q.a, z.as_slice()) - beta * quadratic_form(&q.b, z.as_slice());
    let nf = n as f64;
    let slack = 1e-9 * nf * (q.a.trace().re / nf + beta * q.b.trace().re / nf);

    let mut z = z_init.clone();
    let mut value = surrogate(&z);
    let mut lambda = 0.0;
    let mut iters = 0;
    while iters < opts.inner_max_iters {
        iters += 1;
        let b = matvec(&q.a, &z, opts.real_z);
        let step = doc_kkt_step(beta, &b, epsilon_ball, opts.lambda_tol)?;
        let next_value = surrogate(&step.z);
        if next_value < value - slack {
            return Err(Error::Consistency(format!(
                "DoC surrogate decreased from {value:e} to {next_value:e} at inner iteration {iters}"
            )));
        }
        let moved: f64 = step
            .z
            .as_slice()
            .iter()
            .zip(z.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        z = step.z;
        lambda = step.lambda;
        value = next_value;
        if moved <= opts.inner_tol * nf.sqrt() {
            break;
        }
    }
    Ok(InnerOutcome { z, lambda, iters })
}

/// Dinkelbach maximization of `z^H A z / z^H B z` from `z = 1`.
///
/// `A` and `B` are rescaled to trace `N` internally; the ratio's maximizer
/// is unchanged and tolerances become unit-free. Reported ratios are in the
/// caller's units.
pub fn dinkelbach_maximize(
    q: &MetricQuadratics,
    config: &PilotConfig,
    opts: &OptimizerOptions,
) -> Result<OptimizationReport> {
    opts.validate()?;
    let n = config.n_subcarriers();
    if q.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: q.dim(),
        });
    }
    let z_com = comm_optimal(config)?;
    let nf = n as f64;
    let (tr_a, tr_b) = (q.a.trace().re, q.b.trace().re);
    if !(tr_a > 0.0 && tr_b > 0.0 && tr_a.is_finite() && tr_b.is_finite()) {
        return Err(Error::InvalidArgument(
            "metric matrices must have positive finite trace".into(),
        ));
    }
    let normalized = MetricQuadratics {
        a: &q.a * Complex64::new(nf / tr_a, 0.0),
        b: &q.b * Complex64::new(nf / tr_b, 0.0),
        ..q.clone()
    };
    let to_caller = tr_a / tr_b;
    let ratio = |z: &DistortionVector| -> Result<f64> {
        let num = quadratic_form(&normalized.a, z.as_slice());
        let den = quadratic_form(&normalized.b, z.as_slice());
        if !(den > 1e-14 * nf * z.power()) {
            return Err(Error::DegenerateMainlobe { value: den });
        }
        let r = num / den;
        if !r.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite ratio {r}")));
        }
        Ok(r)
    };

    let epsilon_ball = opts.epsilon * config.power_budget();
    let mut z = z_com;
    let mut beta = ratio(&z)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio at the reference point must be positive, got {beta}"
        )));
    }
    let mut trajectory = vec![beta * to_caller];
    let mut total_inner = 0;
    let mut lambda_final = 0.0;
    let mut outer_iters = 0;
    let mut converged = false;

    while outer_iters < opts.outer_max_iters {
        outer_iters += 1;
        let inner = doc_inner(&normalized, beta, &z, epsilon_ball, opts)?;
        total_inner += inner.iters;
        let next = ratio(&inner.z)?;
        if next < beta - 1e-9 {
            return Err(Error::Consistency(format!(
                "Dinkelbach ratio decreased from {beta:e} to {next:e} at outer iteration {outer_iters}"
            )));
        }
        trajectory.push(next * to_caller);
        z = inner.z;
        lambda_final = inner.lambda;
        let done = (next - beta).abs() <= opts.outer_tol * beta.max(1.0);
        beta = next;
        if done {
            converged = true;
            break;
        }
    }

    Ok(OptimizationReport {
        final_ratio: beta * to_caller,
        power_residual: z.power() - config.power_budget(),
        proximity_residual: z.distance_sqr_to_ones() - epsilon_ball,
        z_opt: z,
        beta_trajectory: trajectory,
        outer_iters,
        total_inner_iters: total_inner,
        lambda_final,
        converged,
        tau_star_s: q.tau_star_s,
    })
}

/// Builds the metric at `z = 1`, optimizes, and for SLPR optionally
/// re-anchors `τ*` at the optimum for `opts.refresh_tau_star` extra rounds.
pub fn optimize_metric(
    kind: MetricKind,
    config: &PilotConfig,
    region: &SidelobeRegion,
    opts: &OptimizerOptions,
) -> Result<(MetricQuadratics, OptimizationReport)> {
    opts.validate()?;
    let z_com = comm_optimal(config)?;
    let mut q = metric_pair(kind, &z_com, region, config)?;
    let mut report = dinkelbach_maximize(&q, config, opts)?;
    if kind == MetricKind::Slpr {
        for _ in 0..opts.refresh_tau_star {
            let tau = dominant_sidelobe(&report.z_opt, region, config, DEFAULT_SIDELOBE_OVERSAMPLE)?;
            if Some(tau) == q.tau_star_s {
                break;
            }
            q = metric_pair(kind, &report.z_opt, region, config)?;
            report = dinkelbach_maximize(&q, config, opts)?;
        }
    }
    Ok((q, report))
}
