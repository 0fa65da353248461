use serde::{Deserialize, Serialize};

use super::QubitError;

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Principal branch of the Lambert W function, by Halley iteration.
pub fn lambert_w0(x: f64) -> Result<f64, QubitError> {
    if x.is_nan() {
        return Err(QubitError::LambertDomain(x));
    }
    let gap = x + INV_E;
    if gap < -1e-17 {
        return Err(QubitError::LambertDomain(x));
    }
    if gap <= 1e-17 {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = if x < -0.25 {
        // series around the branch point
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    } else {
        let l = x.ln();
        l - l.ln()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= dw;
        if dw.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// Small-`z` limit of the maximum-power engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLimit {
    /// `W(1/e)/4`, the limit of `z g(z)`.
    pub theta: f64,
    /// `2 theta/(1 + 4 theta)`.
    pub p_star_limit: f64,
}

pub fn asymptotic_limit() -> AsymptoticLimit {
    let theta = lambert_w0(INV_E).expect("1/e is in the domain") / 4.0;
    AsymptoticLimit { theta, p_star_limit: 2.0 * theta / (1.0 + 4.0 * theta) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn special_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(lambert_w0(std::f64::consts::E).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lambert_w0(-INV_E).unwrap(), -1.0, epsilon = 1e-15);
        // bisection reference for w e^w = 1/e
        assert_abs_diff_eq!(lambert_w0(INV_E).unwrap(), 0.278_464_542_761_073_8, epsilon = 1e-15);
        assert!(matches!(lambert_w0(-0.4), Err(QubitError::LambertDomain(_))));
    }

    #[test]
    fn limit_constants() {
        let lim = asymptotic_limit();
        assert_abs_diff_eq!(lim.theta, 0.069_616_135_690_268_45, epsilon = 1e-16);
        assert_abs_diff_eq!(lim.p_star_limit, 0.108_905_852_859_900, epsilon = 1e-14);
        let t4 = 4.0 * lim.theta;
        assert!((t4 * t4.exp() - INV_E).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn defining_identity(x in -0.3678f64..1e6) {
            let w = lambert_w0(x).unwrap();
            prop_assert!((w * w.exp() - x).abs() <= 1e-14 * x.abs().max(1e-2));
        }
    }
}
