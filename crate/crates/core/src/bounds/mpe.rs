//! Upper bounds on the minimum probability of error.

use crate::bounds::ADMISSIBLE_TOL;
use crate::error::{input, Result};

/// `1 − exp(−EE)`.
pub fn mpe_upper_fm(ee: f64) -> Result<f64> {
    if ee.is_nan() || ee < -ADMISSIBLE_TOL {
        return Err(input(format!("equivocation {ee} is negative")));
    }
    Ok(-(-ee.max(0.0)).exp_m1())
}

/// `1 − exp(−[(1 − 1/λ) EE + GEE_λ / λ])`.
pub fn mpe_upper_lambda(ee: f64, gee_lambda: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 1.0) {
        return Err(input(format!("λ = {lambda} must exceed 1")));
    }
    if ee.is_nan() || gee_lambda.is_nan() || gee_lambda > ee + ADMISSIBLE_TOL {
        return Err(input(format!("GEE_λ = {gee_lambda} exceeds EE = {ee}")));
    }
    let mix = (1.0 - 1.0 / lambda) * ee + gee_lambda / lambda;
    mpe_upper_fm(mix)
}

/// `1 − exp(−∫₁^∞ GEE_n / n² dn)`.
pub fn mpe_upper_integral(gee_integral: f64) -> Result<f64> {
    mpe_upper_fm(gee_integral)
}

/// `1 − exp(B_n)`.
pub fn mpe_upper_bn(bn: f64) -> Result<f64> {
    if bn.is_nan() || bn > ADMISSIBLE_TOL {
        return Err(input(format!("B_n = {bn} is positive")));
    }
    mpe_upper_fm(-bn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn fm_values() {
        assert_eq!(mpe_upper_fm(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(mpe_upper_fm(4f64.ln()).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(mpe_upper_fm(LN_2).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn lambda_values() {
        assert_abs_diff_eq!(mpe_upper_lambda(0.9, 0.9, 3.0).unwrap(), mpe_upper_fm(0.9).unwrap(), epsilon = 1e-15);
        let v = mpe_upper_lambda(LN_2, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(v, 1.0 - (-(0.5 * LN_2 + 0.25f64)).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.449_305, epsilon = 1e-6);
        assert!(v < 0.5);
        assert_abs_diff_eq!(mpe_upper_lambda(0.7, 0.2, 1e12).unwrap(), mpe_upper_fm(0.7).unwrap(), epsilon = 1e-11);
        assert!(mpe_upper_lambda(0.5, 0.6, 2.0).is_err());
        assert!(mpe_upper_lambda(0.5, 0.4, 1.0).is_err());
    }

    #[test]
    fn integral_and_bn_values() {
        assert_abs_diff_eq!(mpe_upper_integral(8f64.ln()).unwrap(), 7.0 / 8.0, epsilon = 1e-15);
        assert_eq!(mpe_upper_integral(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(mpe_upper_bn(-0.6).unwrap(), mpe_upper_fm(0.6).unwrap(), epsilon = 1e-15);
        // posterior always {0.8, 0.2}: B_2 = Σ p_2 ln p with p_2 ∝ p²
        let b2 = (0.64f64 * 0.8f64.ln() + 0.04 * 0.2f64.ln()) / 0.68;
        assert_abs_diff_eq!(mpe_upper_bn(b2).unwrap(), 0.2626, epsilon = 1e-4);
    }
}
