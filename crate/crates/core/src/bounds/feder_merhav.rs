//! Lower bounds on equivocation from the MAP success probability and its refinements.

use crate::bounds::{Flagged, Flags, ADMISSIBLE_TOL};
use crate::error::{input, Error, Result};
use crate::model::Prior;

fn check_pe(pe: f64) -> Result<f64> {
    if !(-ADMISSIBLE_TOL..=1.0 + ADMISSIBLE_TOL).contains(&pe) {
        return Err(input(format!("error probability {pe} outside [0, 1]")));
    }
    let pe = pe.clamp(0.0, 1.0);
    if pe >= 1.0 {
        return Err(Error::Unbounded("error probability 1 makes -ln(1 - pe) infinite".into()));
    }
    Ok(pe)
}

/// `−ln(1 − P_e)`.
pub fn fm_ee_lower(pe: f64) -> Result<f64> {
    let pe = check_pe(pe)?;
    Ok(-(-pe).ln_1p())
}

/// Slope `a_n = n(n+1) ln((n+1)/n)` of the `n`-th convex segment.
pub fn cfm_slope(n: usize) -> f64 {
    let n = n as f64;
    n * (n + 1.0) * ((n + 1.0) / n).ln()
}

/// Piecewise-linear convex lower bound `φ*(P_e)`, segments `n = 1..M−1`.
///
/// Error probabilities above `(M−1)/M` are clamped to that endpoint and flagged.
pub fn cfm_phi_star(pe: f64, m: usize) -> Result<Flagged<f64>> {
    if m < 2 {
        return Err(input(format!("need at least 2 hypotheses, got {m}")));
    }
    if pe.is_nan() || pe < -ADMISSIBLE_TOL {
        return Err(input(format!("error probability {pe} is negative")));
    }
    let top = (m - 1) as f64 / m as f64;
    let mut flags = Flags::empty();
    let mut u = pe.max(0.0);
    if u > top {
        if u > top + ADMISSIBLE_TOL {
            log::warn!("error probability {pe} exceeds (M-1)/M = {top}; clamped");
            flags |= Flags::CLAMPED;
        }
        u = top;
    }
    let n = ((1.0 / (1.0 - u)).floor() as usize).clamp(1, m - 1);
    let start = (n - 1) as f64 / n as f64;
    let value = cfm_slope(n) * (u - start) + (n as f64).ln();
    Ok(Flagged { value, flags })
}

/// `−ln(1 − P_e − Σ_{i≤n} δ_i)`, `n = deltas.len()`.
pub fn fmbn_ee_lower(pe: f64, deltas: &[f64]) -> Result<f64> {
    let pe = check_pe(pe)?;
    if let Some(d) = deltas.iter().find(|d| d.is_nan() || **d < -ADMISSIBLE_TOL) {
        return Err(input(format!("δ value {d} is negative")));
    }
    let loss = pe + deltas.iter().sum::<f64>();
    if !(loss < 1.0) {
        return Err(Error::InvalidStatistics(format!(
            "1 - pe - Σδ = {} is not positive",
            1.0 - loss
        )));
    }
    Ok(-(-loss).ln_1p())
}

/// General form `−ln E[Σ_m p²(θ_m|X)]`, equal to `fmbn_ee_lower` at full depth.
pub fn sum_sq_ee_lower(sum_sq: f64) -> Result<f64> {
    if !(sum_sq > 0.0) || sum_sq > 1.0 + ADMISSIBLE_TOL {
        return Err(Error::InvalidStatistics(format!("E[Σp²] = {sum_sq} outside (0, 1]")));
    }
    Ok(-sum_sq.min(1.0).ln())
}

/// MI upper bound for a uniform prior and the associated effective SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityBound {
    /// `ln(1 + M·E[Σδp²])` in nats.
    pub mi_upper: f64,
    /// `E[Σδp²] / Σ p_m²`.
    pub effective_snr: f64,
}

/// `I ≤ ln(1 + M·E[Σ_m δp²(θ_m|X)])` with `δp = p(θ|X) − 1/M`.
///
/// Only defined for a uniform prior; otherwise use [`sum_sq_ee_lower`] (equivalently
/// [`fmbn_ee_lower`] at full depth).
pub fn capacity_mi_upper(sum_sq: f64, prior: &Prior) -> Result<CapacityBound> {
    if !prior.is_uniform() {
        return Err(input(
            "capacity bound requires a uniform prior; use the full-depth FM sequence -ln E[Σp²] instead",
        ));
    }
    let m = prior.len() as f64;
    if sum_sq.is_nan() || sum_sq < 1.0 / m - ADMISSIBLE_TOL || sum_sq > 1.0 + ADMISSIBLE_TOL {
        return Err(Error::InvalidStatistics(format!("E[Σp²] = {sum_sq} outside [1/M, 1]")));
    }
    let excess = (sum_sq - 1.0 / m).max(0.0);
    Ok(CapacityBound { mi_upper: (m * excess).ln_1p(), effective_snr: m * excess })
}

/// Δ-bound `−ln(1 − P_e) − ln(integral)` where `integral` is the full decision-region sum.
pub fn delta_ee_lower(pe: f64, integral: f64) -> Result<f64> {
    let pe = check_pe(pe)?;
    if !(integral > 0.0) {
        return Err(Error::InvalidStatistics(format!("Δ integral {integral} is not positive")));
    }
    Ok(-(-pe).ln_1p() - integral.ln())
}

/// The same bound written with only the cross terms `m' ≠ m`: `−ln(1−P_e) − ln(1 − P_e + cross)`.
pub fn delta_ee_lower_cross(pe: f64, cross: f64) -> Result<f64> {
    let pe = check_pe(pe)?;
    let arg = 1.0 - pe + cross;
    if !(arg > 0.0) {
        return Err(Error::InvalidStatistics(format!("1 - pe + cross = {arg} is not positive")));
    }
    Ok(-(-pe).ln_1p() - arg.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{E, LN_2};

    #[test]
    fn fm_values() {
        assert_eq!(fm_ee_lower(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(fm_ee_lower(0.5).unwrap(), LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(fm_ee_lower(1.0 - 1.0 / E).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(fm_ee_lower(1.0), Err(Error::Unbounded(_))));
        assert!(matches!(fm_ee_lower(1.5), Err(Error::Input(_))));
    }

    #[test]
    fn phi_star_endpoints() {
        assert_eq!(cfm_phi_star(0.0, 8).unwrap().value, 0.0);
        assert_abs_diff_eq!(cfm_phi_star(0.5, 8).unwrap().value, LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(cfm_phi_star(2.0 / 3.0, 8).unwrap().value, 3f64.ln(), epsilon = 1e-14);
        for n in 1..7usize {
            let u = n as f64 / (n + 1) as f64;
            assert_abs_diff_eq!(cfm_phi_star(u, 8).unwrap().value, ((n + 1) as f64).ln(), epsilon = 1e-13);
        }
    }

    #[test]
    fn phi_star_clamps_above_last_segment() {
        let v = cfm_phi_star(0.9, 4).unwrap();
        assert!(v.flags.contains(Flags::CLAMPED));
        assert_abs_diff_eq!(v.value, 4f64.ln(), epsilon = 1e-14);
        assert!(cfm_phi_star(-0.1, 4).is_err());
        assert!(!cfm_phi_star(0.75, 4).unwrap().flags.contains(Flags::CLAMPED));
    }

    #[test]
    fn phi_star_dominates_fm() {
        for m in [2usize, 3, 8, 32] {
            let top = (m - 1) as f64 / m as f64;
            for i in 0..=10_000 {
                let pe = top * i as f64 / 10_000.0;
                let star = cfm_phi_star(pe, m).unwrap().value;
                assert!(star >= fm_ee_lower(pe).unwrap() - 1e-12, "m={m} pe={pe}");
            }
        }
    }

    #[test]
    fn fmbn_values() {
        assert_eq!(fmbn_ee_lower(0.3, &[]).unwrap(), fm_ee_lower(0.3).unwrap());
        let v = fmbn_ee_lower(0.5, &[0.1]).unwrap();
        assert_abs_diff_eq!(v, -(0.4f64.ln()), epsilon = 1e-15);
        assert!(v > LN_2);
        assert!(matches!(fmbn_ee_lower(0.5, &[0.3, 0.2]), Err(Error::InvalidStatistics(_))));
        assert!(fmbn_ee_lower(0.5, &[-0.1]).is_err());
    }

    #[test]
    fn capacity_values() {
        let u4 = Prior::uniform(4).unwrap();
        assert_abs_diff_eq!(capacity_mi_upper(0.25, &u4).unwrap().mi_upper, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(capacity_mi_upper(1.0, &u4).unwrap().mi_upper, 4f64.ln(), epsilon = 1e-14);
        let u2 = Prior::uniform(2).unwrap();
        let c = capacity_mi_upper(0.68, &u2).unwrap();
        assert_abs_diff_eq!(c.mi_upper, 1.36f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(c.mi_upper, 0.3075, epsilon = 1e-4);
        assert_abs_diff_eq!(c.effective_snr, 0.36, epsilon = 1e-14);
        let skew = Prior::new(vec![0.7, 0.3]).unwrap();
        assert!(matches!(capacity_mi_upper(0.68, &skew), Err(Error::Input(_))));
        // uniform-prior identity with the general form
        assert_abs_diff_eq!(
            4f64.ln() - capacity_mi_upper(0.6, &u4).unwrap().mi_upper,
            sum_sq_ee_lower(0.6).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta_ee_lower(0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(delta_ee_lower(0.5, 0.6).unwrap(), LN_2 + (5.0f64 / 3.0).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(delta_ee_lower(0.5, 0.6).unwrap(), 1.2040, epsilon = 1e-4);
        let (pe, integral) = (0.37, 0.81);
        assert_abs_diff_eq!(
            delta_ee_lower(pe, integral).unwrap(),
            delta_ee_lower_cross(pe, integral - (1.0 - pe)).unwrap(),
            epsilon = 1e-10
        );
        assert!(matches!(delta_ee_lower(0.2, 0.0), Err(Error::InvalidStatistics(_))));
    }
}
