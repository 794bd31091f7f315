//! Numeric tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// Central tolerance record. Every check in the crate reads its threshold
/// from here so that a run can be reproduced from one set of numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Validation of user-supplied states and operators (trace, Hermiticity,
    /// positivity).
    pub validation: f64,
    /// Algebraic identities that hold up to rounding.
    pub algebraic: f64,
    /// Abort threshold for state invariants during propagation.
    pub invariant_abort: f64,
    /// Population of the top two Fock levels above which results are flagged.
    pub leakage_warn: f64,
    /// Smallest admissible Kossakowski eigenvalue.
    pub kossakowski_psd: f64,
    /// Second-smallest singular value below which the null space is degenerate.
    pub singular_gap: f64,
}

impl NumericPolicy {
    pub const DEFAULT: NumericPolicy = NumericPolicy {
        validation: 1e-9,
        algebraic: 1e-12,
        invariant_abort: 1e-6,
        leakage_warn: 1e-4,
        kossakowski_psd: 1e-9,
        singular_gap: 1e-8,
    };
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::DEFAULT
    }
}
