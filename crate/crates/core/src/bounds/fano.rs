//! Fano-family upper bounds on equivocation.
//!
//! Each member fixes the expected values of the largest few ordered posteriors and spreads the
//! remaining probability evenly over the other cells, which maximizes the entropy.

use crate::bounds::ADMISSIBLE_TOL;
use crate::entropy::{binary_entropy, neg_xlogx};
use crate::error::{input, Result};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(-ADMISSIBLE_TOL..=1.0 + ADMISSIBLE_TOL).contains(&p) {
        return Err(input(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

fn check_alphabet(m: usize) -> Result<()> {
    if m < 2 {
        return Err(input(format!("need at least 2 hypotheses, got {m}")));
    }
    Ok(())
}

/// Remainder mass spread over `cells` equal cells: `−r ln r + r ln cells`.
///
/// With no cells left the remainder must vanish; rounding residue is kept as its own cell so
/// the value stays continuous in the inputs.
fn spread_term(remainder: f64, cells: usize, what: &str) -> Result<f64> {
    if remainder < -ADMISSIBLE_TOL {
        return Err(input(format!("{what}: ordered expectations exceed the error probability")));
    }
    let r = remainder.max(0.0);
    if cells == 0 {
        if r > ADMISSIBLE_TOL {
            return Err(input(format!("{what}: remainder {r} but no cells left to hold it")));
        }
        return Ok(neg_xlogx(r));
    }
    Ok(neg_xlogx(r) + r * (cells as f64).ln())
}

/// `H(P_e) + P_e ln(M − 1)`.
pub fn fano_ee_upper(pe: f64, m: usize) -> Result<f64> {
    check_alphabet(m)?;
    check_probability("pe", pe)?;
    let pe = pe.clamp(0.0, 1.0);
    Ok(binary_entropy(pe) + pe * ((m - 1) as f64).ln())
}

/// First-order correction fixing `δP_e^(1) = E[p**]`.
pub fn fano1_ee_upper(pe: f64, dp1: f64, m: usize) -> Result<f64> {
    check_alphabet(m)?;
    check_probability("pe", pe)?;
    check_probability("dp1", dp1)?;
    let pe = pe.clamp(0.0, 1.0);
    let dp1 = dp1.clamp(0.0, 1.0);
    Ok(neg_xlogx(1.0 - pe) + neg_xlogx(dp1) + spread_term(pe - dp1, m - 2, "fano1")?)
}

/// Second-order correction additionally fixing `δP_e^(2) = E[p***]`.
pub fn fano2_ee_upper(pe: f64, dp1: f64, dp2: f64, m: usize) -> Result<f64> {
    check_alphabet(m)?;
    check_probability("pe", pe)?;
    check_probability("dp1", dp1)?;
    check_probability("dp2", dp2)?;
    if dp2 > dp1 + ADMISSIBLE_TOL {
        return Err(input(format!("dp2 = {dp2} exceeds dp1 = {dp1}")));
    }
    if m == 2 && dp2 > ADMISSIBLE_TOL {
        return Err(input("a binary problem has no third posterior"));
    }
    let pe = pe.clamp(0.0, 1.0);
    let dp1 = dp1.clamp(0.0, 1.0);
    let dp2 = dp2.clamp(0.0, 1.0);
    Ok(neg_xlogx(1.0 - pe)
        + neg_xlogx(dp1)
        + neg_xlogx(dp2)
        + spread_term(pe - dp1 - dp2, m.saturating_sub(3), "fano2")?)
}
