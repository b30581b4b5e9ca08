use serde::Serialize;

use super::{check_mu, sqrt_phi2, PHI};
use crate::error::Result;

/// Membership tolerance on the eigen-coordinates `s`, `t`.
pub const EIGEN_TOL: f64 = 1e-9;

/// Side lengths and offsets of the two overlapping rectangles whose images
/// under the two affine branches coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectLengths {
    pub r1: f64,
    pub l1: f64,
    pub r2: f64,
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl RectLengths {
    pub fn new(mu: f64) -> Self {
        let s = sqrt_phi2();
        let p2 = PHI * PHI;
        let h = PHI / s - 2.0 * PHI * mu;
        RectLengths {
            r1: PHI / s + p2 * mu,
            l1: p2 / s + p2 * mu,
            r2: 2.0 * PHI / s + p2 * mu,
            l2: 1.0 / s + p2 * mu,
            h1: h,
            h2: h,
            d1: PHI * mu,
            d2: 1.0 / s + PHI * mu,
        }
    }
}

/// The positively invariant rectangle `R(μ)`, axis-aligned in the eigenbasis
/// `Φ1 = (φ, −1)/√(φ+2)` (eigenvalue `−1/φ`), `Φ2 = (1, φ)/√(φ+2)`
/// (eigenvalue `φ`). Eigen-coordinates are `s` along `Φ1` and `t` along `Φ2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantRect {
    pub mu: f64,
    pub lengths: RectLengths,
    pub s_min: f64,
    pub s_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Corners `A1#`, `B2`, `C2#`, `D1` in `(u, v)` coordinates.
    pub corners: Corners,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corners {
    pub a1_sharp: [f64; 2],
    pub b2: [f64; 2],
    pub c2_sharp: [f64; 2],
    pub d1: [f64; 2],
}

impl InvariantRect {
    pub fn new(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let lengths = RectLengths::new(mu);
        let (s_min, s_max) = (-lengths.l2, lengths.r1);
        let (t_min, t_max) = (lengths.d1, lengths.d2 + lengths.h2);
        let corners = Corners {
            a1_sharp: from_eigen(s_min, t_min),
            b2: from_eigen(s_min, t_max),
            c2_sharp: from_eigen(s_max, t_max),
            d1: from_eigen(s_max, t_min),
        };
        Ok(InvariantRect {
            mu,
            lengths,
            s_min,
            s_max,
            t_min,
            t_max,
            corners,
        })
    }

    pub fn phi1() -> [f64; 2] {
        let s = sqrt_phi2();
        [PHI / s, -1.0 / s]
    }

    pub fn phi2() -> [f64; 2] {
        let s = sqrt_phi2();
        [1.0 / s, PHI / s]
    }

    /// Overlap of the two generating rectangles (`d1 + h1 > d2`); this is
    /// what leaves room for a flaky threshold.
    pub fn has_overlap(&self) -> bool {
        self.lengths.d1 + self.lengths.h1 > self.lengths.d2
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let (s, t) = to_eigen(u, v);
        s >= self.s_min - EIGEN_TOL
            && s <= self.s_max + EIGEN_TOL
            && t >= self.t_min - EIGEN_TOL
            && t <= self.t_max + EIGEN_TOL
    }

    /// Euclidean distance from `(u, v)` to the rectangle (0 inside).
    pub fn distance(&self, u: f64, v: f64) -> f64 {
        let (s, t) = to_eigen(u, v);
        let ds = (self.s_min - s).max(s - self.s_max).max(0.0);
        let dt = (self.t_min - t).max(t - self.t_max).max(0.0);
        ds.hypot(dt)
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn depth(&self, u: f64, v: f64) -> f64 {
        let d = self.distance(u, v);
        if d > 0.0 {
            return -d;
        }
        let (s, t) = to_eigen(u, v);
        (s - self.s_min)
            .min(self.s_max - s)
            .min(t - self.t_min)
            .min(self.t_max - t)
    }

    /// `max (u + φv)` over `R(μ) + B_μ(0)`; the constant in `|e_N| ≤ C φ^{-N}`.
    pub fn error_constant(&self) -> f64 {
        let c = self.corners;
        let corner_max = [c.a1_sharp, c.b2, c.c2_sharp, c.d1]
            .iter()
            .map(|p| p[0] + PHI * p[1])
            .fold(f64::NEG_INFINITY, f64::max);
        corner_max + self.mu * sqrt_phi2()
    }

    /// `{x : (x, 0) ∈ R(μ)}` as a closed interval. Equals `[0, 1]` at `μ = 0`
    /// and `[μφ√(φ+2), 1 + μφ√(φ+2)]` in general.
    pub fn admissible_inputs(&self) -> (f64, f64) {
        let s0 = sqrt_phi2();
        // (x, 0) has s = φx/√(φ+2), t = x/√(φ+2)
        let lo = (self.s_min * s0 / PHI).max(self.t_min * s0).max(0.0);
        let hi = (self.s_max * s0 / PHI).min(self.t_max * s0);
        (lo, hi)
    }

    /// Inputs in `[0, 1]` whose initial state `(x, 0)` lies in `R(μ)`.
    pub fn admissible_unit_inputs(&self) -> (f64, f64) {
        let (lo, hi) = self.admissible_inputs();
        (lo.max(0.0), hi.min(1.0))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("rect serialization is infallible")
    }
}

/// `(u, v) ↦ (s, t)`.
pub fn to_eigen(u: f64, v: f64) -> (f64, f64) {
    let s0 = sqrt_phi2();
    ((PHI * u - v) / s0, (u + PHI * v) / s0)
}

/// `(s, t) ↦ sΦ1 + tΦ2`.
pub fn from_eigen(s: f64, t: f64) -> [f64; 2] {
    let s0 = sqrt_phi2();
    [(PHI * s + t) / s0, (-s + PHI * t) / s0]
}
