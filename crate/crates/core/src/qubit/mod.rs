//! Closed-form optimal isotherms of the qubit reset model.
//!
//! Along an optimal isotherm the conserved rate `K <= 0` fixes
//! `2q + u = (mu/beta)(1 + x^2)/x` with `x = e^{beta u/2}` and
//! `|mu| = sqrt(-beta K / gamma)`, which makes the population, elapsed time
//! and released heat explicit functions of `x`.

mod engine;
mod lambert;

pub use engine::{
    adiabatic_condition, adiabatic_f, find_jump_points, solve_engine, tangency_residual, AdiabaticCondition,
    EngineSolution, JumpPoints,
};
pub use lambert::{asymptotic_limit, lambert_w0, AsymptoticLimit};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::{Bath, ControlLaw, ProtocolPiece, TwoBaths, TwoLevelReset};
use crate::numerics::{binary_entropy, brent_root};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QubitError {
    #[error("conserved rate must be non-positive, got K = {0}")]
    PositiveRate(f64),
    #[error("segment leaves the physical range: {0}")]
    SegmentRange(String),
    #[error("segment runs against the branch dynamics (elapsed time {0})")]
    DirectionViolation(f64),
    #[error("population {0} is outside the domain of the inverse map")]
    PopulationDomain(f64),
    #[error("no adiabatic jump points at K = {k} (threshold K* = {k_star})")]
    NoJumpPoints { k: f64, k_star: f64 },
    #[error("temperature ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Lambert W0 is undefined below -1/e, got {0}")]
    LambertDomain(f64),
    #[error("engine solver did not converge: |f| = {f_residual:e}, tangency = {tangency_residual:e}")]
    NoConvergence { f_residual: f64, tangency_residual: f64 },
}

/// Inverse temperatures of both baths and the total coupling `gamma_c + gamma_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub beta_c: f64,
    pub beta_h: f64,
    pub gamma: f64,
}

impl QubitParams {
    pub fn new(beta_c: f64, beta_h: f64, gamma: f64) -> Result<Self, QubitError> {
        if !(beta_c.is_finite() && beta_h > 0.0 && beta_h < beta_c) {
            return Err(QubitError::InvalidParams(format!(
                "need beta_c > beta_h > 0, got beta_c = {beta_c}, beta_h = {beta_h}"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(QubitError::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        Ok(QubitParams { beta_c, beta_h, gamma })
    }

    /// `beta_c = 1`, `gamma = 1`, `beta_h = z`.
    pub fn from_ratio(z: f64) -> Result<Self, QubitError> {
        if !(z > 0.0 && z < 1.0) {
            return Err(QubitError::InvalidRatio(z));
        }
        QubitParams::new(1.0, z, 1.0)
    }

    pub fn with_units(z: f64, beta_c: f64, gamma: f64) -> Result<Self, QubitError> {
        if !(z > 0.0 && z < 1.0) {
            return Err(QubitError::InvalidRatio(z));
        }
        QubitParams::new(beta_c, z * beta_c, gamma)
    }

    pub fn z(&self) -> f64 {
        self.beta_h / self.beta_c
    }

    pub fn beta(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Cold => self.beta_c,
            Bath::Hot => self.beta_h,
        }
    }

    pub fn baths(&self) -> TwoBaths {
        TwoBaths { beta_c: self.beta_c, beta_h: self.beta_h }
    }

    pub fn model(&self) -> TwoLevelReset {
        TwoLevelReset::new(self.baths())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapSign {
    Nonneg,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub kind: Bath,
    pub gap_sign: GapSign,
}

impl Branch {
    pub const COLD: Branch = Branch { kind: Bath::Cold, gap_sign: GapSign::Nonneg };
    pub const HOT: Branch = Branch { kind: Bath::Hot, gap_sign: GapSign::Nonneg };

    pub fn of(kind: Bath) -> Branch {
        Branch { kind, gap_sign: GapSign::Nonneg }
    }

    /// Sign of `mu` on this branch.
    pub fn mu_sign(&self) -> f64 {
        match (self.kind, self.gap_sign) {
            (Bath::Cold, GapSign::Nonneg) | (Bath::Hot, GapSign::Neg) => -1.0,
            (Bath::Hot, GapSign::Nonneg) | (Bath::Cold, GapSign::Neg) => 1.0,
        }
    }
}

/// `mu` on `branch` for conserved rate `k`.
pub fn mu(k: f64, beta: f64, gamma: f64, branch: Branch) -> Result<f64, QubitError> {
    if k > 0.0 {
        return Err(QubitError::PositiveRate(k));
    }
    if !(beta > 0.0 && gamma > 0.0) {
        return Err(QubitError::InvalidParams(format!("beta = {beta}, gamma = {gamma}")));
    }
    Ok(branch.mu_sign() * (-beta * k / gamma).sqrt())
}

/// Population along an isotherm, `(1 - mu x)/(1 + x^2)`.
pub fn isotherm_p(x: f64, mu: f64) -> Result<f64, QubitError> {
    if !(x > 0.0) {
        return Err(QubitError::SegmentRange(format!("x = {x} must be positive")));
    }
    let p = if x.is_infinite() { 0.0 } else { (1.0 - mu * x) / (1.0 + x * x) };
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(QubitError::SegmentRange(format!("p = {p} at x = {x}, mu = {mu}")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Inverse of [`isotherm_p`]: `x(p) = (sqrt(mu^2 + 4p(1-p)) - mu)/(2p)`.
pub fn isotherm_x_of_p(p: f64, mu: f64) -> Result<f64, QubitError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QubitError::PopulationDomain(p));
    }
    let delta = (mu * mu + 4.0 * p * (1.0 - p)).sqrt();
    // rationalized form avoids cancellation when mu > 0
    let x = if mu > 0.0 { 2.0 * (1.0 - p) / (delta + mu) } else { (delta - mu) / (2.0 * p) };
    if !(x.is_finite() && x > 0.0) {
        return Err(QubitError::PopulationDomain(p));
    }
    Ok(x)
}

pub fn isotherm_u_of_p(p: f64, mu: f64, beta: f64) -> Result<f64, QubitError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QubitError::PopulationDomain(p));
    }
    Ok(2.0 / beta * isotherm_x_of_p(p, mu)?.ln())
}

/// `arctan x1 - arctan x0` for positive arguments, without cancellation.
fn atan_diff(x0: f64, x1: f64) -> f64 {
    if x0.is_infinite() || x1.is_infinite() || x0 * x1 > 1e300 {
        return x1.atan() - x0.atan();
    }
    ((x1 - x0) / (1.0 + x0 * x1)).atan()
}

fn ln_x_plus_inv(x: f64) -> f64 {
    if x > 1.0 {
        x.ln() + (1.0 + 1.0 / (x * x)).ln()
    } else {
        (1.0 + x * x).ln() - x.ln()
    }
}

/// `chi(x1) - chi(x0)` with `chi(x) = -(2/mu) arctan x + ln((x^2 + 1)/x)`.
pub fn chi_difference(x0: f64, x1: f64, mu: f64) -> f64 {
    -2.0 / mu * atan_diff(x0, x1) + ln_x_plus_inv(x1) - ln_x_plus_inv(x0)
}

/// `Xi(x) = -2 mu arctan x + [2x(x + mu)/(1 + x^2)] ln x - ln(1 + x^2)`.
pub fn xi(x: f64, mu: f64) -> f64 {
    -2.0 * mu * x.atan() + xi_rest(x, mu)
}

fn xi_rest(x: f64, mu: f64) -> f64 {
    2.0 * x * (x + mu) / (1.0 + x * x) * x.ln() - (x * x).ln_1p()
}

pub fn xi_difference(x0: f64, x1: f64, mu: f64) -> f64 {
    -2.0 * mu * atan_diff(x0, x1) + xi_rest(x1, mu) - xi_rest(x0, mu)
}

fn check_x(x: f64) -> Result<(), QubitError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(QubitError::SegmentRange(format!("x = {x} must be positive and finite")))
    }
}

const DIRECTION_TOL: f64 = 1e-12;

/// Time to move from `x0` to `x1`; `+inf` in the quasi-static limit `mu = 0`.
pub fn isotherm_time(x0: f64, x1: f64, mu: f64, gamma: f64) -> Result<f64, QubitError> {
    check_x(x0)?;
    check_x(x1)?;
    if x0 == x1 {
        return Ok(0.0);
    }
    if mu == 0.0 {
        return Ok(f64::INFINITY);
    }
    let dt = chi_difference(x0, x1, mu) / gamma;
    if dt < -DIRECTION_TOL * (1.0 + dt.abs()) {
        return Err(QubitError::DirectionViolation(dt));
    }
    Ok(dt.max(0.0))
}

/// Heat released to the bath while moving from `x0` to `x1`.
pub fn isotherm_heat(x0: f64, x1: f64, mu: f64, beta: f64) -> Result<f64, QubitError> {
    check_x(x0)?;
    check_x(x1)?;
    if x0 == x1 {
        return Ok(0.0);
    }
    if mu == 0.0 {
        return Ok(quasi_static_heat(isotherm_p(x0, 0.0)?, isotherm_p(x1, 0.0)?, beta));
    }
    let dchi = chi_difference(x0, x1, mu);
    if dchi < -DIRECTION_TOL * (1.0 + dchi.abs()) {
        return Err(QubitError::DirectionViolation(dchi));
    }
    Ok(xi_difference(x0, x1, mu) / beta)
}

/// Reversible heat `[H(p0) - H(p1)]/beta`.
pub fn quasi_static_heat(p0: f64, p1: f64, beta: f64) -> f64 {
    (binary_entropy(p0) - binary_entropy(p1)) / beta
}

/// Populations reachable on a branch at rate `k` with a non-negative gap.
pub fn admissible_population_range(params: &QubitParams, kind: Bath, k: f64) -> Result<(f64, f64), QubitError> {
    let m = mu(k, params.beta(kind), params.gamma, Branch::of(kind))?;
    Ok(match kind {
        // x from 1 to infinity
        Bath::Cold => (0.0, ((1.0 - m) / 2.0).min(1.0)),
        // x from 1 to 1/mu
        Bath::Hot => (0.0, ((1.0 - m) / 2.0).max(0.0)),
    })
}

/// A point on an isotherm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsothermPoint {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    pub p: f64,
    pub q: f64,
}

/// Optimal isotherm between `x0` and `x1` on one bath at conserved rate `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsothermSegment {
    pub branch: Branch,
    pub k: f64,
    pub mu: f64,
    pub beta: f64,
    pub gamma: f64,
    pub x0: f64,
    pub x1: f64,
    pub duration: f64,
    pub heat: f64,
}

impl IsothermSegment {
    pub fn from_x(params: &QubitParams, branch: Branch, k: f64, x0: f64, x1: f64) -> Result<Self, QubitError> {
        let beta = params.beta(branch.kind);
        let m = mu(k, beta, params.gamma, branch)?;
        check_x(x0)?;
        check_x(x1)?;
        let gap_ok = |x: f64| match branch.gap_sign {
            GapSign::Nonneg => x >= 1.0 - 1e-12,
            GapSign::Neg => x <= 1.0 + 1e-12,
        };
        if !gap_ok(x0) || !gap_ok(x1) {
            return Err(QubitError::SegmentRange(format!("x = {x0}..{x1} has the wrong gap sign")));
        }
        isotherm_p(x0, m)?;
        isotherm_p(x1, m)?;
        let duration = isotherm_time(x0, x1, m, params.gamma)?;
        let heat = isotherm_heat(x0, x1, m, beta)?;
        Ok(IsothermSegment { branch, k, mu: m, beta, gamma: params.gamma, x0, x1, duration, heat })
    }

    pub fn from_gaps(params: &QubitParams, branch: Branch, k: f64, u0: f64, u1: f64) -> Result<Self, QubitError> {
        let beta = params.beta(branch.kind);
        IsothermSegment::from_x(params, branch, k, (0.5 * beta * u0).exp(), (0.5 * beta * u1).exp())
    }

    pub fn from_populations(
        params: &QubitParams,
        branch: Branch,
        k: f64,
        p0: f64,
        p1: f64,
    ) -> Result<Self, QubitError> {
        let beta = params.beta(branch.kind);
        let m = mu(k, beta, params.gamma, branch)?;
        IsothermSegment::from_x(params, branch, k, isotherm_x_of_p(p0, m)?, isotherm_x_of_p(p1, m)?)
    }

    pub fn p_at(&self, x: f64) -> f64 {
        ((1.0 - self.mu * x) / (1.0 + x * x)).clamp(0.0, 1.0)
    }

    pub fn u_at(&self, x: f64) -> f64 {
        2.0 / self.beta * x.ln()
    }

    /// Costate on the isotherm, from `2q + u = (mu/beta)(1 + x^2)/x`.
    pub fn q_at(&self, x: f64) -> f64 {
        0.5 * (self.mu / self.beta * (1.0 + x * x) / x - self.u_at(x))
    }

    pub fn p0(&self) -> f64 {
        self.p_at(self.x0)
    }

    pub fn p1(&self) -> f64 {
        self.p_at(self.x1)
    }

    pub fn u0(&self) -> f64 {
        self.u_at(self.x0)
    }

    pub fn u1(&self) -> f64 {
        self.u_at(self.x1)
    }

    /// `dx/dt = gamma x (x^2 + 1)/(x^2 - 2x/mu - 1)`.
    pub fn dx_dt(&self, x: f64) -> f64 {
        self.gamma * x * (x * x + 1.0) / (x * x - 2.0 * x / self.mu - 1.0)
    }

    pub fn du_dt(&self, x: f64) -> f64 {
        2.0 / self.beta * self.dx_dt(x) / x
    }

    pub fn dq_dt(&self, x: f64) -> f64 {
        let dq_dx = 0.5 / self.beta * (self.mu * (1.0 - 1.0 / (x * x)) - 2.0 / x);
        dq_dx * self.dx_dt(x)
    }

    /// `x` reached after local time `t` (inverts the elapsed-time relation).
    pub fn x_at_time(&self, t: f64) -> f64 {
        if t <= 0.0 || self.x0 == self.x1 {
            return self.x0;
        }
        if t >= self.duration {
            return self.x1;
        }
        let target = self.gamma * t;
        let f = |x: f64| chi_difference(self.x0, x, self.mu) - target;
        let (lo, hi) = if self.x0 < self.x1 { (self.x0, self.x1) } else { (self.x1, self.x0) };
        brent_root(f, lo, hi, 1e-15 * hi, 200).unwrap_or_else(|_| {
            // fall back to the nearer endpoint if roundoff spoils the bracket
            if t < 0.5 * self.duration {
                self.x0
            } else {
                self.x1
            }
        })
    }

    pub fn point_at_x(&self, t: f64, x: f64) -> IsothermPoint {
        IsothermPoint { t, x, u: self.u_at(x), p: self.p_at(x), q: self.q_at(x) }
    }

    pub fn point_at_time(&self, t: f64) -> IsothermPoint {
        let x = self.x_at_time(t);
        self.point_at_x(t, x)
    }

    /// `n >= 2` points uniform in time, endpoints included.
    pub fn sample_uniform_time(&self, n: usize) -> Vec<IsothermPoint> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                if i == 0 {
                    self.point_at_x(0.0, self.x0)
                } else if i + 1 == n {
                    self.point_at_x(self.duration, self.x1)
                } else {
                    self.point_at_time(self.duration * i as f64 / (n - 1) as f64)
                }
            })
            .collect()
    }

    /// Control law that drives the simulator along this isotherm.
    pub fn control_law(&self) -> Arc<dyn ControlLaw> {
        Arc::new(IsothermControl { segment: *self })
    }

    pub fn protocol_piece(&self) -> ProtocolPiece {
        let (gc, gh) = match self.branch.kind {
            Bath::Cold => (self.gamma, 0.0),
            Bath::Hot => (0.0, self.gamma),
        };
        ProtocolPiece::new(self.duration, self.control_law(), gc, gh)
    }
}

struct IsothermControl {
    segment: IsothermSegment,
}

impl ControlLaw for IsothermControl {
    fn params(&self, t: f64) -> Vec<f64> {
        vec![self.segment.u_at(self.segment.x_at_time(t))]
    }

    fn params_rate(&self, t: f64) -> Vec<f64> {
        vec![self.segment.du_dt(self.segment.x_at_time(t))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn params() -> QubitParams {
        QubitParams::from_ratio(0.3).unwrap()
    }

    #[test]
    fn mu_values() {
        assert_eq!(mu(0.0, 1.0, 1.0, Branch::COLD).unwrap(), 0.0);
        assert_abs_diff_eq!(mu(-0.05, 1.0, 1.0, Branch::COLD).unwrap(), -0.223_606_797_749_979, epsilon = 1e-15);
        assert_abs_diff_eq!(mu(-0.05, 0.3, 1.0, Branch::HOT).unwrap(), 0.122_474_487_139_158_9, epsilon = 1e-15);
        let neg = Branch { kind: Bath::Cold, gap_sign: GapSign::Neg };
        assert!(mu(-0.05, 1.0, 1.0, neg).unwrap() > 0.0);
        assert_eq!(mu(0.1, 1.0, 1.0, Branch::HOT), Err(QubitError::PositiveRate(0.1)));
    }

    #[test]
    fn population_examples() {
        assert_eq!(isotherm_p(1.0, 0.0).unwrap(), 0.5);
        let m = -0.05f64.sqrt();
        let p = isotherm_p(0.5f64.exp(), m).unwrap();
        assert_abs_diff_eq!(p, 0.368_090_786_784_374_3, epsilon = 1e-12);
        assert_abs_diff_eq!(isotherm_u_of_p(p, m, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(isotherm_p(1e9, m).unwrap() < 1e-8);
        assert_eq!(isotherm_u_of_p(0.5, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(isotherm_u_of_p(0.0, m, 1.0), Err(QubitError::PopulationDomain(_))));
        assert!(matches!(isotherm_u_of_p(1.0, 0.0, 1.0), Err(QubitError::PopulationDomain(_))));
        assert!(matches!(isotherm_p(20.0, 0.2), Err(QubitError::SegmentRange(_))));
    }

    #[test]
    fn cold_reference_segment() {
        // independent reference: adaptive integration of dx/dt and -u dp
        let m = -0.05f64.sqrt();
        let (x0, x1) = (0.5f64.exp(), 1f64.exp());
        assert_abs_diff_eq!(isotherm_time(x0, x1, m, 1.0).unwrap(), 2.037_175_662_166_783, epsilon = 1e-12);
        assert_abs_diff_eq!(isotherm_heat(x0, x1, m, 1.0).unwrap(), 0.257_284_745_245_321_3, epsilon = 1e-12);
        assert_eq!(isotherm_time(x0, x0, m, 1.0).unwrap(), 0.0);
        assert_eq!(isotherm_heat(x0, x0, m, 1.0).unwrap(), 0.0);
        assert!(matches!(isotherm_time(x1, x0, m, 1.0), Err(QubitError::DirectionViolation(_))));
        assert!(matches!(isotherm_heat(x1, x0, m, 1.0), Err(QubitError::DirectionViolation(_))));
    }

    #[test]
    fn time_diverges_in_quasi_static_limit() {
        let (x0, x1) = (1.5, 2.5);
        assert_eq!(isotherm_time(x0, x1, 0.0, 1.0).unwrap(), f64::INFINITY);
        let mut prev = 0.0;
        for k in [-1e-2, -1e-4, -1e-6, -1e-8] {
            let t = isotherm_time(x0, x1, mu(k, 1.0, 1.0, Branch::COLD).unwrap(), 1.0).unwrap();
            assert!(t > prev);
            prev = t;
        }
        assert!(prev > 1e3);
    }

    #[test]
    fn quasi_static_heat_examples() {
        assert_eq!(quasi_static_heat(0.3, 0.3, 1.0), 0.0);
        let expected = std::f64::consts::LN_2 - (0.1 * 10f64.ln() + 0.9 * (10.0f64 / 9.0).ln());
        assert_abs_diff_eq!(quasi_static_heat(0.5, 0.1, 1.0), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.368_064_207_168_497, epsilon = 1e-12);
        assert_eq!(quasi_static_heat(0.2, 0.4, 2.0), -quasi_static_heat(0.4, 0.2, 2.0));
        let seg =
            IsothermSegment::from_populations(&QubitParams::new(1.0, 0.3, 1.0).unwrap(), Branch::COLD, -1e-8, 0.5, 0.1)
                .unwrap();
        assert_relative_eq!(seg.heat, expected, max_relative = 1e-3);
    }

    #[test]
    fn hot_segment_requires_range() {
        let p = params();
        let m = mu(-0.05, 0.3, 1.0, Branch::HOT).unwrap();
        // x beyond 1/mu has negative population
        assert!(IsothermSegment::from_x(&p, Branch::HOT, -0.05, 1.0 / m + 1.0, 1.0).is_err());
        let seg = IsothermSegment::from_x(&p, Branch::HOT, -0.05, 1.0 / m, 1.0).unwrap();
        assert!(seg.heat <= 0.0 && seg.duration > 0.0);
        assert!(seg.p1() > seg.p0());
        // wrong order on the hot branch
        assert!(matches!(
            IsothermSegment::from_x(&p, Branch::HOT, -0.05, 1.5, 3.0),
            Err(QubitError::DirectionViolation(_))
        ));
    }

    #[test]
    fn inverse_time_map() {
        let seg = IsothermSegment::from_x(&params(), Branch::COLD, -0.05, 0.5f64.exp(), 1f64.exp()).unwrap();
        for frac in [0.1, 0.37, 0.8] {
            let t = frac * seg.duration;
            let x = seg.x_at_time(t);
            assert_abs_diff_eq!(chi_difference(seg.x0, x, seg.mu), t, epsilon = 1e-12);
        }
        let pts = seg.sample_uniform_time(11);
        assert_eq!(pts.len(), 11);
        assert!(pts.windows(2).all(|w| w[1].p < w[0].p));
    }

    #[test]
    fn costate_rate_along_isotherm_matches_scalar_law() {
        let seg = IsothermSegment::from_x(&params(), Branch::HOT, -0.03, 4.0, 1.2).unwrap();
        for x in [3.5, 2.0, 1.3] {
            let expected = crate::pmp::qubit::costate_rate(seg.q_at(x), seg.u_at(x), seg.gamma);
            assert_relative_eq!(seg.dq_dt(x), expected, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn population_gap_round_trip(p in 0.001f64..0.999, m in -3.0f64..3.0, beta in 0.1f64..5.0) {
            let u = isotherm_u_of_p(p, m, beta).unwrap();
            let x = (0.5 * beta * u).exp();
            prop_assert!((isotherm_p(x, m).unwrap() - p).abs() < 1e-12);
        }

        #[test]
        fn heat_sign_law(k in -0.5f64..-1e-4, pa in 0.01f64..0.45, pb in 0.01f64..0.45, hot in any::<bool>()) {
            let params = params();
            let kind = if hot { Bath::Hot } else { Bath::Cold };
            let (lo, hi) = admissible_population_range(&params, kind, k).unwrap();
            prop_assume!(pa.max(pb) < hi && pa.min(pb) > lo && (pa - pb).abs() > 1e-6);
            let (p0, p1) = match kind {
                Bath::Cold => (pa.max(pb), pa.min(pb)),
                Bath::Hot => (pa.min(pb), pa.max(pb)),
            };
            let seg = IsothermSegment::from_populations(&params, Branch::of(kind), k, p0, p1).unwrap();
            prop_assert!(seg.duration > 0.0);
            match kind {
                Bath::Cold => prop_assert!(seg.heat >= 0.0),
                Bath::Hot => prop_assert!(seg.heat <= 0.0),
            }
        }
    }
}
