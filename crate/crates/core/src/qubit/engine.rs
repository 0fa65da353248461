//! Adiabatic-jump condition and the maximum-power engine.
//!
//! Everything is evaluated in `s = sqrt(-K/gamma)`, so that
//! `mu_c = -sqrt(beta_c) s` and `mu_h = sqrt(beta_h) s`.

use serde::{Deserialize, Serialize};

use super::{asymptotic_limit, QubitError, QubitParams};
use crate::numerics::{brent_minimize, brent_root};

#[derive(Debug, Clone, Copy)]
struct Core {
    bc: f64,
    bh: f64,
}

#[derive(Debug, Clone, Copy)]
struct BranchPair {
    delta_c: f64,
    delta_h: f64,
    x_c: f64,
    x_h: f64,
}

impl Core {
    fn new(params: &QubitParams) -> Self {
        Core { bc: params.beta_c, bh: params.beta_h }
    }

    fn pair(&self, p: f64, s: f64) -> BranchPair {
        let mc = -self.bc.sqrt() * s;
        let mh = self.bh.sqrt() * s;
        let w = 4.0 * p * (1.0 - p);
        let delta_c = (mc * mc + w).sqrt();
        let delta_h = (mh * mh + w).sqrt();
        // Delta - mu, rationalized on the hot side where mu > 0
        let ac = delta_c - mc;
        let ah = if mh > 0.0 { w / (delta_h + mh) } else { delta_h - mh };
        BranchPair { delta_c, delta_h, x_c: ac / (2.0 * p), x_h: ah / (2.0 * p) }
    }

    fn f(&self, p: f64, s: f64) -> f64 {
        let b = self.pair(p, s);
        let r = b.x_c / b.x_h;
        r - 1.0 / r + 2.0 * (self.bc * self.bh).sqrt() * (b.x_c.ln() / self.bc - b.x_h.ln() / self.bh)
    }

    /// `sqrt(beta_c/beta_h)(1 + x_h^2)/x_h - (1 + x_c^2)/x_c`; zero where `df/dp = 0`.
    fn tangency(&self, p: f64, s: f64) -> f64 {
        let b = self.pair(p, s);
        (self.bc / self.bh).sqrt() * (1.0 + b.x_h * b.x_h) / b.x_h - (1.0 + b.x_c * b.x_c) / b.x_c
    }

    /// The `s` at which `f(p, s) = 0`; `None` when `f(p, 0) >= 0` (no root with `K < 0`).
    fn s_of_p(&self, p: f64) -> Option<f64> {
        if self.f(p, 0.0) >= 0.0 {
            return None;
        }
        let mut lo = 0.0;
        let mut hi = 0.1 / self.bc.sqrt();
        while self.f(p, hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        brent_root(|s| self.f(p, s), lo, hi, 1e-16 * hi, 200).ok()
    }
}

fn s_of_k(params: &QubitParams, k: f64) -> Result<f64, QubitError> {
    if k > 0.0 {
        return Err(QubitError::PositiveRate(k));
    }
    Ok((-k / params.gamma).sqrt())
}

fn check_p(p: f64) -> Result<(), QubitError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(QubitError::PopulationDomain(p))
    }
}

/// Jump condition at `(p, K)` together with `Delta_{c,h} = sqrt(mu^2 + 4p(1-p))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticCondition {
    pub p: f64,
    pub k: f64,
    pub delta_c: f64,
    pub delta_h: f64,
    pub value: f64,
}

pub fn adiabatic_condition(params: &QubitParams, p: f64, k: f64) -> Result<AdiabaticCondition, QubitError> {
    check_p(p)?;
    let s = s_of_k(params, k)?;
    let core = Core::new(params);
    let b = core.pair(p, s);
    Ok(AdiabaticCondition { p, k, delta_c: b.delta_c, delta_h: b.delta_h, value: core.f(p, s) })
}

/// `f(p; K)`: zero exactly where a jump between the cold and hot isotherm
/// through population `p` keeps the costate continuous. Decreasing in `K`.
pub fn adiabatic_f(params: &QubitParams, p: f64, k: f64) -> Result<f64, QubitError> {
    check_p(p)?;
    Ok(Core::new(params).f(p, s_of_k(params, k)?))
}

/// Normalized form of `(1 + x_c^2)/(mu_c x_c) + (1 + x_h^2)/(mu_h x_h)`.
pub fn tangency_residual(params: &QubitParams, p: f64, k: f64) -> Result<f64, QubitError> {
    check_p(p)?;
    Ok(Core::new(params).tangency(p, s_of_k(params, k)?))
}

/// The two populations where switching baths is allowed, `p_ad1 <= p_ad2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpPoints {
    pub p_ad1: f64,
    pub p_ad2: f64,
}

/// Maximum-power operating point for a pair of baths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineSolution {
    pub z: f64,
    /// In units of `gamma/beta_c`.
    #[serde(rename = "K_star")]
    pub k_star: f64,
    pub p_star: f64,
    /// In units of `1/beta_c`.
    pub u_c_star: f64,
    pub u_h_star: f64,
    pub eta_star: f64,
    pub eta_carnot: f64,
    pub eta_curzon_ahlborn: f64,
    pub g: f64,
    pub theta: f64,
    #[serde(skip)]
    pub f_residual: f64,
    #[serde(skip)]
    pub tangency_residual: f64,
}

const ENGINE_TOL: f64 = 1e-10;

/// Lowest `K` at which the zero contour of `f` still exists, and the
/// population where its two branches meet.
pub fn solve_engine(params: &QubitParams) -> Result<EngineSolution, QubitError> {
    let core = Core::new(params);
    let s_at = |p: f64| core.s_of_p(p).unwrap_or(0.0);

    let n = 128;
    let grid: Vec<f64> = (1..n).map(|i| 0.5 * i as f64 / n as f64).collect();
    let (ibest, _) =
        grid.iter()
            .enumerate()
            .map(|(i, &p)| (i, s_at(p)))
            .fold((0, -1.0), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let lo = if ibest == 0 { 1e-6 } else { grid[ibest - 1] };
    let hi = if ibest + 1 == grid.len() { 0.5 } else { grid[ibest + 1] };
    let (mut p, neg_s) = brent_minimize(|p| -s_at(p), lo, hi, 1e-12, 500);
    let mut s = -neg_s;

    // polish on (f, tangency) jointly; the maximization alone leaves p at sqrt(eps)
    let resid = |p: f64, s: f64| (core.f(p, s), core.tangency(p, s));
    let norm = |r: (f64, f64)| r.0.abs().max(r.1.abs());
    let mut r = resid(p, s);
    for _ in 0..60 {
        if norm(r) < 1e-15 {
            break;
        }
        let hp = 1e-7 * p;
        let hs = 1e-7 * s;
        let (fp1, tp1) = resid(p + hp, s);
        let (fp0, tp0) = resid(p - hp, s);
        let (fs1, ts1) = resid(p, s + hs);
        let (fs0, ts0) = resid(p, s - hs);
        let j = [
            [(fp1 - fp0) / (2.0 * hp), (fs1 - fs0) / (2.0 * hs)],
            [(tp1 - tp0) / (2.0 * hp), (ts1 - ts0) / (2.0 * hs)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dp = (r.0 * j[1][1] - r.1 * j[0][1]) / det;
        let ds = (j[0][0] * r.1 - j[1][0] * r.0) / det;
        let mut alpha = 1.0;
        let mut improved = false;
        while alpha > 1e-6 {
            let (pn, sn) = (p - alpha * dp, s - alpha * ds);
            if pn > 0.0 && pn < 1.0 && sn > 0.0 {
                let rn = resid(pn, sn);
                if norm(rn) < norm(r) {
                    p = pn;
                    s = sn;
                    r = rn;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let (f_res, t_res) = (r.0.abs(), r.1.abs());
    if !(f_res <= ENGINE_TOL && t_res <= ENGINE_TOL) {
        return Err(QubitError::NoConvergence { f_residual: f_res, tangency_residual: t_res });
    }

    let b = core.pair(p, s);
    let u_c = 2.0 / params.beta_c * b.x_c.ln();
    let u_h = 2.0 / params.beta_h * b.x_h.ln();
    let z = params.z();
    Ok(EngineSolution {
        z,
        k_star: -params.gamma * s * s,
        p_star: p,
        u_c_star: u_c,
        u_h_star: u_h,
        eta_star: 1.0 - u_c / u_h,
        eta_carnot: 1.0 - z,
        eta_curzon_ahlborn: 1.0 - z.sqrt(),
        g: params.beta_c * s * s,
        theta: asymptotic_limit().theta,
        f_residual: f_res,
        tangency_residual: t_res,
    })
}

/// Roots of `f(.; k)` on either side of `p*`.
pub fn find_jump_points(params: &QubitParams, engine: &EngineSolution, k: f64) -> Result<JumpPoints, QubitError> {
    let s = s_of_k(params, k)?;
    let k_star = engine.k_star;
    let p_star = engine.p_star;
    if (k - k_star).abs() <= 1e-12 * k_star.abs() {
        return Ok(JumpPoints { p_ad1: p_star, p_ad2: p_star });
    }
    if k < k_star {
        return Err(QubitError::NoJumpPoints { k, k_star });
    }
    let core = Core::new(params);
    let f = |p: f64| core.f(p, s);
    if f(p_star) >= 0.0 {
        // within roundoff of the threshold
        return Ok(JumpPoints { p_ad1: p_star, p_ad2: p_star });
    }
    let search = |toward_zero: bool| -> Result<f64, QubitError> {
        let room = if toward_zero { p_star } else { 1.0 - p_star };
        let at = |d: f64| if toward_zero { p_star - d } else { p_star + d };
        let mut prev = 0.0;
        let mut d = 1e-10 * room;
        // geometric outward scan until f turns positive
        while d < room {
            if f(at(d)) > 0.0 {
                let (a, b) = if toward_zero { (at(d), at(prev)) } else { (at(prev), at(d)) };
                return brent_root(f, a, b, 1e-15, 300).map_err(|_| QubitError::NoJumpPoints { k, k_star });
            }
            prev = d;
            d *= 1.5;
        }
        // f diverges at the boundary; approach it geometrically
        let mut gap = room - prev;
        for _ in 0..1000 {
            gap *= 0.5;
            let dd = room - gap;
            if dd <= prev {
                break;
            }
            if f(at(dd)) > 0.0 {
                let (a, b) = if toward_zero { (at(dd), at(prev)) } else { (at(prev), at(dd)) };
                return brent_root(f, a, b, 1e-15, 300).map_err(|_| QubitError::NoJumpPoints { k, k_star });
            }
            prev = dd;
        }
        Err(QubitError::NoJumpPoints { k, k_star })
    };
    let p_ad1 = search(true)?;
    let p_ad2 = search(false)?;
    Ok(JumpPoints { p_ad1, p_ad2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{isotherm_u_of_p, mu, Branch};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn z03() -> QubitParams {
        QubitParams::from_ratio(0.3).unwrap()
    }

    /// Independent grid oracle: sign changes of f on a uniform p-grid, bisected.
    fn grid_roots(params: &QubitParams, k: f64, n: usize) -> Vec<f64> {
        let ps: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
        let f = |p: f64| adiabatic_f(params, p, k).unwrap();
        let mut roots = Vec::new();
        for w in ps.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            if f(a).signum() == f(b).signum() {
                continue;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m).signum() == f(a).signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        roots
    }

    #[test]
    fn engine_at_z_03() {
        let sol = solve_engine(&z03()).unwrap();
        assert_abs_diff_eq!(sol.k_star, -0.071_901_645_953_215_85, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.p_star, 0.088_029_318_470_526_5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.u_c_star, 3.252_15, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.u_h_star, 6.084_06, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.eta_star, 0.465_46, epsilon = 1e-5);
        assert!((sol.eta_star - sol.eta_curzon_ahlborn).abs() < 0.03);
        assert!(sol.f_residual <= 1e-10 && sol.tangency_residual <= 1e-10);
        assert_abs_diff_eq!(sol.g, -sol.k_star, epsilon = 1e-15);
    }

    #[test]
    fn engine_scales_with_units() {
        let base = solve_engine(&z03()).unwrap();
        let scaled = solve_engine(&QubitParams::with_units(0.3, 2.0, 5.0).unwrap()).unwrap();
        assert_relative_eq!(scaled.k_star, base.k_star * 5.0 / 2.0, max_relative = 1e-10);
        assert_relative_eq!(scaled.u_c_star, base.u_c_star / 2.0, max_relative = 1e-9);
        assert_relative_eq!(scaled.g, base.g, max_relative = 1e-10);
        assert_relative_eq!(scaled.p_star, base.p_star, max_relative = 1e-8);
    }

    #[test]
    fn engine_serializes_exact_keys() {
        let sol = solve_engine(&z03()).unwrap();
        let v = serde_json::to_value(sol).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        let mut expected = vec![
            "z",
            "K_star",
            "p_star",
            "u_c_star",
            "u_h_star",
            "eta_star",
            "eta_carnot",
            "eta_curzon_ahlborn",
            "g",
            "theta",
        ];
        expected.sort();
        assert_eq!(keys, expected);
    }

    #[test]
    fn engine_rejects_bad_ratio() {
        assert_eq!(QubitParams::from_ratio(1.0), Err(QubitError::InvalidRatio(1.0)));
        assert_eq!(QubitParams::from_ratio(0.0), Err(QubitError::InvalidRatio(0.0)));
    }

    #[test]
    fn f_is_decreasing_in_k() {
        let p = z03();
        let ks: Vec<f64> = (0..50).map(|i| -0.2 + 0.19 * i as f64 / 49.0).collect();
        let vals: Vec<f64> = ks.iter().map(|&k| adiabatic_f(&p, 0.15, k).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn jump_points_match_grid_oracle() {
        let p = z03();
        let sol = solve_engine(&p).unwrap();
        let jp = find_jump_points(&p, &sol, -0.05).unwrap();
        let oracle = grid_roots(&p, -0.05, 10_000);
        assert_eq!(oracle.len(), 2);
        assert_abs_diff_eq!(jp.p_ad1, oracle[0], epsilon = 1e-12);
        assert_abs_diff_eq!(jp.p_ad2, oracle[1], epsilon = 1e-12);
        assert_abs_diff_eq!(jp.p_ad1, 0.023_915_531_487_442_56, epsilon = 1e-12);
        assert_abs_diff_eq!(jp.p_ad2, 0.206_219_004_426_958_54, epsilon = 1e-12);
        assert!(adiabatic_f(&p, jp.p_ad1, -0.05).unwrap().abs() < 1e-10);
    }

    #[test]
    fn no_jump_points_below_threshold() {
        let p = z03();
        let sol = solve_engine(&p).unwrap();
        assert!(matches!(find_jump_points(&p, &sol, -0.2), Err(QubitError::NoJumpPoints { .. })));
        assert!(grid_roots(&p, -0.2, 10_000).is_empty());
        let at = find_jump_points(&p, &sol, sol.k_star).unwrap();
        assert_eq!(at.p_ad1, sol.p_star);
        assert_eq!(at.p_ad2, sol.p_star);
    }

    #[test]
    fn jump_condition_is_costate_continuity() {
        let p = z03();
        let sol = solve_engine(&p).unwrap();
        let k = -0.05;
        let jp = find_jump_points(&p, &sol, k).unwrap();
        for pp in [jp.p_ad1, jp.p_ad2] {
            let q = |kind: crate::lindblad::Bath| {
                let b = p.beta(kind);
                let m = mu(k, b, p.gamma, Branch::of(kind)).unwrap();
                let u = isotherm_u_of_p(pp, m, b).unwrap();
                let x = (0.5 * b * u).exp();
                0.5 * (m / b * (1.0 + x * x) / x - u)
            };
            assert_abs_diff_eq!(q(crate::lindblad::Bath::Cold), q(crate::lindblad::Bath::Hot), epsilon = 1e-9);
        }
    }
}
