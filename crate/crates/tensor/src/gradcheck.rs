//! Central finite-difference verification of hand-written adjoints.
//!
//! A check compares, per sampled coordinate `i`, the analytic derivative
//! `a_i` of a scalar function against `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps`.
//! The error metric is `|a - n| / max(|a|, |n|, floor)`: relative for
//! ordinary magnitudes, absolute below `floor` so that coordinates whose true
//! derivative is (near) zero are not dominated by rounding noise.

use rand::seq::index::sample;
use rand::Rng;

/// Finite-difference step and error floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub eps: f64,
    pub floor: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            eps: 1e-4,
            floor: 1e-6,
        }
    }
}

/// Result of one finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coord: Option<usize>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        let (max_rel_error, worst_coord) = if other.max_rel_error > self.max_rel_error {
            (other.max_rel_error, other.worst_coord)
        } else {
            (self.max_rel_error, self.worst_coord)
        };
        GradCheckReport {
            max_rel_error,
            worst_coord,
            checked: self.checked + other.checked,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

impl GradCheck {
    /// Compares `analytic` against central differences of `f` at the listed
    /// coordinates of `x`. Coordinates for which `skip` returns true (kinks)
    /// are not counted.
    pub fn check(
        &self,
        mut f: impl FnMut(&[f64]) -> f64,
        x: &[f64],
        analytic: &[f64],
        coords: &[usize],
        skip: impl Fn(usize) -> bool,
    ) -> GradCheckReport {
        assert_eq!(x.len(), analytic.len(), "gradient length must match input length");
        let mut probe = x.to_vec();
        let mut report = GradCheckReport::default();
        for &i in coords {
            if skip(i) {
                continue;
            }
            let orig = probe[i];
            probe[i] = orig + self.eps;
            let up = f(&probe);
            probe[i] = orig - self.eps;
            let down = f(&probe);
            probe[i] = orig;
            let numeric = (up - down) / (2.0 * self.eps);
            let err = relative_error(analytic[i], numeric, self.floor);
            if report.worst_coord.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_coord = Some(i);
            }
            report.checked += 1;
        }
        report
    }
}

/// Up to `count` distinct coordinates out of `len`, in ascending order.
pub fn sample_coords<R: Rng + ?Sized>(rng: &mut R, len: usize, count: usize) -> Vec<usize> {
    let mut v = sample(rng, len, count.min(len)).into_vec();
    v.sort_unstable();
    v
}
