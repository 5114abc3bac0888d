//! Three matched points on two curves, in arclength coordinates: `{-b, 0, b}`
//! on X and `{-a, 0, a + δ}` on Y. Re-estimating the image of the middle
//! point by maximizing the density moves it toward the midpoint of its
//! neighbors, which shortens the correspondence curve in the product space.

use serde::Serialize;

use crate::error::{Error, Result};

const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreePoint {
    /// Numerical maximizer of `h`.
    pub y_hat: f64,
    /// First-order coefficient `c` with `y_hat ≈ c·δ`.
    pub c_closed_form: f64,
    /// Length of the input correspondence curve.
    pub l0: f64,
    /// Length after moving the middle point to `y_hat`.
    pub l_hat: f64,
}

fn kernel(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

fn kernel_dd(d: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    kernel(d, sigma) * (d * d / (s2 * s2) - 1.0 / s2)
}

/// `h(ŷ) = K(ŷ) + K(b) (K(ŷ + a) + K(ŷ - a - δ))`.
pub fn three_point_density(y: f64, a: f64, b: f64, delta: f64, sigma: f64) -> f64 {
    kernel(y, sigma) + kernel(b, sigma) * (kernel(y + a, sigma) + kernel(y - a - delta, sigma))
}

/// Maximize `h` on `[-a/2, a/2]` by golden-section search and compare with
/// the first-order prediction.
pub fn three_point_1d(a: f64, b: f64, delta: f64, sigma: f64) -> Result<ThreePoint> {
    for (name, v) in [("a", a), ("b", b), ("sigma", sigma)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be finite, got {delta}")));
    }
    let h = |y: f64| three_point_density(y, a, b, delta, sigma);
    let (lo, hi) = (-a / 2.0, a / 2.0);
    let y_hat = if delta == 0.0 {
        // h is even, so its maximizer near zero is zero
        0.0
    } else {
        golden_max(h, lo, hi, GOLDEN_TOL)
    };
    if hi - y_hat.abs() <= 2.0 * GOLDEN_TOL || h(y_hat) < h(lo).max(h(hi)) {
        return Err(Error::InvalidArgument(format!(
            "maximizer not bracketed in [{lo}, {hi}] (found {y_hat}); delta is outside the small-perturbation regime"
        )));
    }
    let c = 1.0 / (2.0 + kernel_dd(0.0, sigma) / (kernel(b, sigma) * kernel_dd(a, sigma)));
    let arm = |u: f64| (b * b + u * u).sqrt();
    Ok(ThreePoint {
        y_hat,
        c_closed_form: c,
        l0: arm(a) + arm(a + delta),
        l_hat: arm(a + y_hat) + arm(a + delta - y_hat),
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_case() {
        let r = three_point_1d(0.1, 0.5, 0.0, 0.5).unwrap();
        assert_eq!(r.y_hat, 0.0);
        assert_eq!(r.l0, r.l_hat);
    }

    #[test]
    fn reference_case() {
        let r = three_point_1d(0.1, 0.5, 0.01, 0.5).unwrap();
        let ratio = r.y_hat / 0.01;
        assert!(ratio > 0.0 && ratio < 0.5, "{ratio}");
        assert!((ratio - r.c_closed_form).abs() <= 0.05 * r.c_closed_form);
        assert!(r.l_hat < r.l0);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let x = golden_max(|x| -(x - 0.3) * (x - 0.3), -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn second_derivative_by_finite_differences() {
        for &(d, s) in &[(0.0, 0.5), (0.2, 0.5), (1.3, 0.7)] {
            let h = 1e-4;
            let fd = (kernel(d + h, s) - 2.0 * kernel(d, s) + kernel(d - h, s)) / (h * h);
            assert!((fd - kernel_dd(d, s)).abs() < 1e-6, "{d} {s}");
        }
    }

    #[test]
    fn large_delta_is_reported() {
        // broad kernels pull the peak toward the mean δ/3, beyond a/2
        assert!(three_point_1d(0.1, 0.5, 0.5, 2.0).is_err());
        assert!(three_point_1d(-0.1, 0.5, 0.01, 0.5).is_err());
    }
}
