use rayon::prelude::*;
use serde::Serialize;

use super::rect::{from_eigen, InvariantRect};
use super::region::ParamRegion;
use crate::quantizers::{Bit, QuantizerSpec};

/// Slack on the distance test, absorbing rounding in the image computation.
const DISTANCE_TOL: f64 = 1e-9;
const MAX_LISTED: usize = 100;

/// A compact planar region that can be sampled on a grid.
pub trait StateRegion: Sync {
    fn name(&self) -> String;

    /// Grid point `(i, j)` of a `density × density` grid covering the region
    /// (boundary included), in `(u, v)` coordinates.
    fn grid_point(&self, i: usize, j: usize, density: usize) -> [f64; 2];

    /// Euclidean distance to the region, 0 inside.
    fn distance(&self, u: f64, v: f64) -> f64;

    /// Signed distance to the boundary, positive inside.
    fn depth(&self, u: f64, v: f64) -> f64;
}

fn lerp(lo: f64, hi: f64, i: usize, density: usize) -> f64 {
    if density <= 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (density - 1) as f64
    }
}

impl StateRegion for InvariantRect {
    fn name(&self) -> String {
        format!("R({})", self.mu)
    }

    fn grid_point(&self, i: usize, j: usize, density: usize) -> [f64; 2] {
        from_eigen(
            lerp(self.s_min, self.s_max, i, density),
            lerp(self.t_min, self.t_max, j, density),
        )
    }

    fn distance(&self, u: f64, v: f64) -> f64 {
        InvariantRect::distance(self, u, v)
    }

    fn depth(&self, u: f64, v: f64) -> f64 {
        InvariantRect::depth(self, u, v)
    }
}

/// `[0, 1]²`, the invariant set of the exact `Q_1` encoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnitSquare;

impl StateRegion for UnitSquare {
    fn name(&self) -> String {
        "[0,1]^2".into()
    }

    fn grid_point(&self, i: usize, j: usize, density: usize) -> [f64; 2] {
        [lerp(0.0, 1.0, i, density), lerp(0.0, 1.0, j, density)]
    }

    fn distance(&self, u: f64, v: f64) -> f64 {
        let du = (-u).max(u - 1.0).max(0.0);
        let dv = (-v).max(v - 1.0).max(0.0);
        du.hypot(dv)
    }

    fn depth(&self, u: f64, v: f64) -> f64 {
        let d = self.distance(u, v);
        if d > 0.0 {
            -d
        } else {
            u.min(1.0 - u).min(v).min(1.0 - v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub point: [f64; 2],
    pub bit: Bit,
    pub image: [f64; 2],
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub region: String,
    pub mu: f64,
    pub alpha: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// `None` when μ itself is outside the admissible range.
    pub in_param_region: Option<bool>,
    pub grid_density: usize,
    pub images_checked: u64,
    pub violation_count: u64,
    /// The first violations in grid order.
    pub violations: Vec<Violation>,
    /// Largest distance of an image from the region.
    pub max_distance: f64,
    /// Smallest signed depth of an image (negative when some image leaves).
    pub min_depth: f64,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

#[derive(Default)]
struct RowTally {
    images: u64,
    count: u64,
    listed: Vec<Violation>,
    max_distance: f64,
    min_depth: f64,
}

/// Checks `T_b(p) = (v, u + v − b)` against `region` enlarged by μ for every
/// grid point `p` and every bit `b` the flaky quantizer may emit at `p`.
pub fn verify_invariance<R: StateRegion>(
    region: &R,
    spec: &QuantizerSpec,
    mu: f64,
    grid_density: usize,
) -> InvarianceReport {
    let density = grid_density.max(1);
    let rows: Vec<RowTally> = (0..density)
        .into_par_iter()
        .map(|i| {
            let mut row = RowTally {
                min_depth: f64::INFINITY,
                ..RowTally::default()
            };
            for j in 0..density {
                let [u, v] = region.grid_point(i, j, density);
                for &b in spec.admissible_bits(u + spec.alpha * v) {
                    let image = [v, u + v - f64::from(b)];
                    let distance = region.distance(image[0], image[1]);
                    row.images += 1;
                    row.max_distance = row.max_distance.max(distance);
                    row.min_depth = row.min_depth.min(region.depth(image[0], image[1]));
                    if distance > mu + DISTANCE_TOL {
                        row.count += 1;
                        if row.listed.len() < MAX_LISTED {
                            row.listed.push(Violation {
                                point: [u, v],
                                bit: b,
                                image,
                                distance,
                            });
                        }
                    }
                }
            }
            row
        })
        .collect();

    let mut report = InvarianceReport {
        region: region.name(),
        mu,
        alpha: spec.alpha,
        nu1: spec.nu1,
        nu2: spec.nu2,
        in_param_region: ParamRegion::new(mu)
            .ok()
            .map(|r| r.contains(spec.alpha, spec.nu1, spec.nu2)),
        grid_density: density,
        images_checked: 0,
        violation_count: 0,
        violations: Vec::new(),
        max_distance: 0.0,
        min_depth: f64::INFINITY,
    };
    for row in rows {
        report.images_checked += row.images;
        report.violation_count += row.count;
        report.max_distance = report.max_distance.max(row.max_distance);
        report.min_depth = report.min_depth.min(row.min_depth);
        let room = MAX_LISTED - report.violations.len();
        report.violations.extend(row.listed.into_iter().take(room));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizers::Resolver;

    #[test]
    fn unit_square_exact_q1() {
        let r = verify_invariance(&UnitSquare, &QuantizerSpec::exact(1.0), 0.0, 301);
        assert!(r.passed(), "{:?}", &r.violations[..r.violations.len().min(3)]);
        assert_eq!(r.images_checked, 301 * 301);
        assert_eq!(r.in_param_region, Some(true));
    }

    #[test]
    fn r0_exact_q1() {
        let rect = InvariantRect::new(0.0).unwrap();
        let r = verify_invariance(&rect, &QuantizerSpec::exact(1.0), 0.0, 301);
        assert!(r.passed());
    }

    #[test]
    fn admissible_band_at_small_mu() {
        let mu = 0.01;
        let region = ParamRegion::new(mu).unwrap();
        let spec = QuantizerSpec::new(
            1.5,
            region.nu_min(1.5) + 0.01,
            region.nu_max(1.5) - 0.01,
            Resolver::AlwaysZero,
        )
        .unwrap();
        let rect = InvariantRect::new(mu).unwrap();
        let r = verify_invariance(&rect, &spec, mu, 200);
        assert!(r.passed(), "{:?}", r.violations.first());
        assert_eq!(r.in_param_region, Some(true));
        // band points contribute two images each
        assert!(r.images_checked > 200 * 200);
    }

    #[test]
    fn wide_band_at_alpha_one_violates() {
        let spec = QuantizerSpec::new(1.0, 0.95, 1.05, Resolver::AlwaysZero).unwrap();
        for report in [
            verify_invariance(&InvariantRect::new(0.0).unwrap(), &spec, 0.0, 200),
            verify_invariance(&UnitSquare, &spec, 0.0, 200),
        ] {
            assert!(!report.passed());
            assert_eq!(report.in_param_region, Some(false));
            let v = &report.violations[0];
            assert!(v.distance > 0.0);
            assert!(report.violations.len() <= MAX_LISTED);
        }
    }

    #[test]
    fn report_independent_of_thread_count() {
        let spec = QuantizerSpec::new(1.0, 0.9, 1.1, Resolver::AlwaysOne).unwrap();
        let rect = InvariantRect::new(0.0).unwrap();
        let a = verify_invariance(&rect, &spec, 0.0, 120);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| verify_invariance(&rect, &spec, 0.0, 120));
        assert_eq!(a, b);
    }
}
