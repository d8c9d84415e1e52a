//! Lower and upper bounds on equivocation, mutual information, and the minimum probability
//! of error, plus assembly of the full comparison report.

use bitflags::bitflags;
use std::fmt;

mod fano;
mod feder_merhav;
mod mpe;
mod report;
mod two_posterior;

pub use fano::{fano1_ee_upper, fano2_ee_upper, fano_ee_upper};
pub use feder_merhav::{
    capacity_mi_upper, cfm_phi_star, cfm_slope, delta_ee_lower, delta_ee_lower_cross, fm_ee_lower,
    fmbn_ee_lower, sum_sq_ee_lower, CapacityBound,
};
pub use mpe::{mpe_upper_bn, mpe_upper_fm, mpe_upper_integral, mpe_upper_lambda};
pub use report::{assemble_report, BoundKind, BoundName, BoundReport, Report, ReportConfig, Units};
pub use two_posterior::{
    convex_phi, diagonal_vertex_value, fm_two_bound, fm_two_terms, phi_branch, phi_branch_index,
    phi_regions, phi_two, PhiRegion, TwoPosteriorBound, PROJECTED_DRAW_FRACTION,
};

/// Absolute tolerance on admissibility checks for probabilities and region membership.
pub const ADMISSIBLE_TOL: f64 = 1e-9;

bitflags! {
    /// Conditions attached to a bound value.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Flags: u8 {
        const CLAMPED = 1;
        const PROJECTED = 1 << 1;
        const UNRELIABLE = 1 << 2;
        const FAILED = 1 << 3;
    }
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.iter_names().map(|(n, _)| n.to_ascii_lowercase()).collect();
        f.write_str(&names.join("|"))
    }
}

/// A value with the conditions under which it was computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub flags: Flags,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_display() {
        assert_eq!(Flags::empty().to_string(), "");
        assert_eq!((Flags::CLAMPED | Flags::UNRELIABLE).to_string(), "clamped|unreliable");
    }
}
