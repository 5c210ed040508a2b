//! Smooth frequency cut-offs splitting low and high modes.
//!
//! `χ_R(ξ)` vanishes for `|ξ| ≤ R`, equals one for `|ξ| ≥ 2R` and in between
//! is the normalized integral of the `C^∞` bump `exp(-1/(τ(1-τ)))`, so every
//! derivative is continuous at both ends.  The low cut-off is
//! `χ_1 = 1 - χ_R` and the high cut-off `χ_2 = χ_R`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpfpError};
use crate::quadrature::{gauss_legendre_on, Rule};

/// Which side of the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffSide {
    Low,
    High,
}

fn bump(tau: f64) -> f64 {
    if tau <= 0.0 || tau >= 1.0 {
        0.0
    } else {
        (-1.0 / (tau * (1.0 - tau))).exp()
    }
}

const BUMP_NODES: usize = 48;

fn bump_integral(upto: f64) -> f64 {
    let rule: Rule = gauss_legendre_on(BUMP_NODES, 0.0, upto);
    rule.integrate(bump)
}

fn bump_total() -> f64 {
    static TOTAL: OnceLock<f64> = OnceLock::new();
    *TOTAL.get_or_init(|| {
        // Split at the midpoint so both halves are smooth on their panels.
        bump_integral(0.5) * 2.0
    })
}

/// Smooth step on `[0, 1]`: 0 below, 1 above.
pub fn smooth_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else if tau <= 0.5 {
        bump_integral(tau) / bump_total()
    } else {
        1.0 - bump_integral(1.0 - tau) / bump_total()
    }
}

/// `χ_R(|ξ|)`.
pub fn chi_r(xi_mag: f64, r: f64) -> f64 {
    smooth_step(xi_mag / r - 1.0)
}

/// Cut-off value on the requested side (`Low` gives `χ_1 = 1 - χ_R`).
pub fn cutoff_chi(xi_mag: f64, r: f64, side: CutoffSide) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(VpfpError::InvalidParameter {
            name: "R",
            value: r,
            reason: "cut-off radius must be positive",
        });
    }
    if !(xi_mag >= 0.0) {
        return Err(VpfpError::InvalidParameter {
            name: "xi_mag",
            value: xi_mag,
            reason: "mode magnitude must be non-negative",
        });
    }
    let high = chi_r(xi_mag, r);
    Ok(match side {
        CutoffSide::Low => 1.0 - high,
        CutoffSide::High => high,
    })
}
