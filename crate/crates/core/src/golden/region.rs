use serde::Serialize;

use super::{check_mu, sqrt_phi2, PHI};
use crate::error::{Error, Result};

/// Admissible `(α, ν1, ν2)` for a noise margin μ: `α ∈ [α_min, α_max]` and
/// `ν_min(α) ≤ ν1 ≤ ν2 ≤ ν_max(α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamRegion {
    pub mu: f64,
    pub alpha_min: f64,
    /// `3 − 10μφ√(φ+2)/(1 + 4μ√(φ+2))`.
    pub alpha_max: f64,
    /// Gain at which `ν_min` and `ν_max` meet again, `(3 + 2c)/(1 + 4c)` with
    /// `c = μφ√(φ+2)`. Coincides with `alpha_max` only at `μ = 0`.
    pub alpha_closure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionSample {
    pub alpha: f64,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl ParamRegion {
    pub fn new(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let s = sqrt_phi2();
        let c = mu * PHI * s;
        Ok(ParamRegion {
            mu,
            alpha_min: 1.0 + 2.0 * c,
            alpha_max: 3.0 - 10.0 * c / (1.0 + 4.0 * mu * s),
            alpha_closure: (3.0 + 2.0 * c) / (1.0 + 4.0 * c),
        })
    }

    fn c(&self) -> f64 {
        self.mu * PHI * sqrt_phi2()
    }

    // ν_min = a·α + b on α > φ
    fn nu_min_line(&self) -> (f64, f64) {
        let s = sqrt_phi2();
        let m = self.mu * PHI * PHI / s;
        ((PHI + 1.0) / (PHI + 2.0) + 2.0 * m, (1.0 - PHI) / (PHI + 2.0) - m)
    }

    // ν_max = a·α + b on α > φ
    fn nu_max_line(&self) -> (f64, f64) {
        let s = sqrt_phi2();
        let m = self.mu * PHI * PHI / s;
        (1.0 / (PHI + 2.0) - 2.0 * m, (1.0 + 2.0 * PHI) / (PHI + 2.0) + m)
    }

    pub fn nu_min(&self, alpha: f64) -> f64 {
        if alpha <= PHI {
            1.0 + self.c()
        } else {
            let (a, b) = self.nu_min_line();
            a * alpha + b
        }
    }

    pub fn nu_max(&self, alpha: f64) -> f64 {
        if alpha <= PHI {
            alpha - self.c()
        } else {
            let (a, b) = self.nu_max_line();
            a * alpha + b
        }
    }

    /// Inverse of the strictly increasing `ν_max`.
    pub fn nu_max_inverse(&self, nu: f64) -> f64 {
        if nu <= self.nu_max(PHI) {
            nu + self.c()
        } else {
            let (a, b) = self.nu_max_line();
            (nu - b) / a
        }
    }

    /// `sup {α : ν_min(α) ≤ ν}`; `None` below the flat part of `ν_min`.
    /// `ν_min` is constant for `α ≤ φ`, so this is the inverse on the rising branch.
    pub fn nu_min_inverse(&self, nu: f64) -> Option<f64> {
        if nu < 1.0 + self.c() {
            return None;
        }
        let (a, b) = self.nu_min_line();
        Some(((nu - b) / a).max(PHI))
    }

    /// True when `α_max < α_min`, which happens for μ above about 0.0787.
    pub fn is_empty(&self) -> bool {
        self.alpha_max < self.alpha_min
    }

    pub fn contains_alpha(&self, alpha: f64) -> bool {
        (self.alpha_min..=self.alpha_max).contains(&alpha)
    }

    /// Whether `{α} × [ν1, ν2]` lies in the region.
    pub fn contains(&self, alpha: f64, nu1: f64, nu2: f64) -> bool {
        self.contains_alpha(alpha) && nu1 <= nu2 && self.nu_min(alpha) <= nu1 && nu2 <= self.nu_max(alpha)
    }

    /// `count` samples of `(α, ν_min, ν_max)` over `[α_min, α_max]`.
    pub fn table(&self, count: usize) -> Vec<RegionSample> {
        crate::framework::uniform_grid(self.alpha_min, self.alpha_max, count)
            .into_iter()
            .map(|alpha| self.sample(alpha))
            .collect()
    }

    pub fn sample(&self, alpha: f64) -> RegionSample {
        RegionSample {
            alpha,
            nu_min: self.nu_min(alpha),
            nu_max: self.nu_max(alpha),
        }
    }
}

/// Gain tolerance `η` and threshold band `[ν1, ν2]` such that any gain within
/// `η` of `α` keeps the quantizer inside the admissible region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessMargin {
    pub eta: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub alpha_l: f64,
    pub alpha_u: f64,
    pub alpha_u_star: f64,
}

/// [`robustness_margin_with`] taking the midpoints of both open intervals.
pub fn robustness_margin(alpha: f64, mu: f64) -> Result<RobustnessMargin> {
    robustness_margin_with(alpha, mu, 0.5, 0.5)
}

/// Constructive margin: `α_L` is placed at fraction `lower` of
/// `(ν_max⁻¹(ν_min(α)), α)`, `α_U` at fraction `upper` of `(α, α_U*)` with
/// `α_U* = ν_min⁻¹(ν_max(α_L))`; then `η = min(α − α_L, α_U − α)`,
/// `ν1 = ν_min(α_U)`, `ν2 = ν_max(α_L)`.
pub fn robustness_margin_with(alpha: f64, mu: f64, lower: f64, upper: f64) -> Result<RobustnessMargin> {
    let region = ParamRegion::new(mu)?;
    if !(alpha > region.alpha_min && alpha < region.alpha_max) {
        return Err(Error::out_of_range(
            "alpha",
            alpha,
            format!("({}, {})", region.alpha_min, region.alpha_max),
        ));
    }
    for (name, f) in [("lower", lower), ("upper", upper)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidConfig(format!("{name} fraction {f} must lie in (0, 1)")));
        }
    }
    let floor = region.nu_max_inverse(region.nu_min(alpha));
    let alpha_l = floor + lower * (alpha - floor);
    let alpha_u_star = region
        .nu_min_inverse(region.nu_max(alpha_l))
        .expect("nu_max(alpha_l) exceeds nu_min(alpha), which is at least the flat value");
    let alpha_u = alpha + upper * (alpha_u_star - alpha);
    Ok(RobustnessMargin {
        eta: (alpha - alpha_l).min(alpha_u - alpha),
        nu1: region.nu_min(alpha_u),
        nu2: region.nu_max(alpha_l),
        alpha_l,
        alpha_u,
        alpha_u_star,
    })
}
