//! The golden ratio encoder: the two-term recursion
//! `u_{n+2} = u_{n+1} + u_n − b_n + ε_n`, its invariant rectangles and the
//! admissible parameter region for flaky linear-threshold quantizers.

mod encode;
mod rect;
mod region;
mod verify;

pub use encode::{gre_encode, gre_step, GreEncoder, GreState, NoiseModel};
pub use rect::{InvariantRect, RectLengths};
pub use region::{robustness_margin, robustness_margin_with, ParamRegion, RegionSample, RobustnessMargin};
pub use verify::{verify_invariance, InvarianceReport, StateRegion, UnitSquare, Violation};

/// The golden mean `(1 + √5)/2`.
pub const PHI: f64 = 1.618_033_988_749_895;

/// `√(φ + 2)`, the normalisation of the eigenvectors of `[[0,1],[1,1]]`.
pub fn sqrt_phi2() -> f64 {
    (PHI + 2.0).sqrt()
}

/// Upper limit (exclusive) on the noise margin μ: `1/(2φ²√(φ+2))`.
pub fn mu_limit() -> f64 {
    1.0 / (2.0 * PHI * PHI * sqrt_phi2())
}

pub(crate) fn check_mu(mu: f64) -> crate::error::Result<()> {
    if mu.is_finite() && (0.0..mu_limit()).contains(&mu) {
        Ok(())
    } else {
        Err(crate::error::Error::out_of_range(
            "mu",
            mu,
            format!("[0, {})", mu_limit()),
        ))
    }
}
