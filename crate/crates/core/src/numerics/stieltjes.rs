//! Cauchy–Stieltjes transforms of smooth densities.

use num_complex::Complex64;

use crate::error::Result;
use crate::numerics::{gauss_laguerre, gauss_legendre, Interval};

const PANEL_POINTS: usize = 20;
const TAIL_POINTS: usize = 48;
const MAX_PANEL_WIDTH: f64 = 1.0;

/// `∫ g(t) / (z - t) dt` over `interval`.
///
/// The integrand varies on the scale `|Im z|` near `Re z`, so composite
/// Gauss–Legendre panels are graded geometrically around `Re z`. Unbounded
/// ends are truncated and the tails are integrated with a Gauss–Laguerre rule,
/// which assumes `g` decays at least exponentially.
pub fn cauchy_transform(g: &dyn Fn(f64) -> f64, interval: Interval, z: Complex64) -> Result<Complex64> {
    let c = z.re;
    let span = c.abs().max(1.0);
    let (lo, hi, lower_tail, upper_tail) = match interval {
        Interval::Segment(a, b) => (a, b, false, false),
        Interval::HalfLine => (0.0, 2.0 * span + 20.0, false, true),
        Interval::RealLine => (-(2.0 * span + 20.0), 2.0 * span + 20.0, true, true),
    };
    let h = z.im.abs().max(1e-12);

    let mut cuts = vec![lo, hi];
    if c > lo && c < hi {
        cuts.push(c);
    }
    let mut step = h;
    while step < hi - lo {
        for p in [c - step, c + step] {
            if p > lo && p < hi {
                cuts.push(p);
            }
        }
        step *= 2.0;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let unit = gauss_legendre(PANEL_POINTS, -1.0, 1.0)?;
    let f = |t: f64| Complex64::new(g(t), 0.0) / (z - t);
    let mut total = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b - a) / MAX_PANEL_WIDTH).ceil().max(1.0) as usize;
        let width = (b - a) / pieces as f64;
        for p in 0..pieces {
            let pa = a + p as f64 * width;
            let mid = pa + 0.5 * width;
            let half = 0.5 * width;
            for (&x, &wt) in unit.nodes().iter().zip(unit.weights()) {
                total += f(mid + half * x) * (wt * half);
            }
        }
    }
    if upper_tail || lower_tail {
        let tail = gauss_laguerre(TAIL_POINTS, 0.0)?;
        for (&s, &wt) in tail.nodes().iter().zip(tail.plain_weights()) {
            if upper_tail {
                total += f(hi + s) * wt;
            }
            if lower_tail {
                total += f(lo - s) * wt;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_density_near_the_axis() {
        // For g = e^{-t} on [0, inf), Im of the transform at x - i eps tends to pi g(x).
        let g = |t: f64| (-t).exp();
        for &x in &[0.5, 2.0, 5.0] {
            let v = cauchy_transform(&g, Interval::HalfLine, Complex64::new(x, -1e-6)).unwrap();
            let r = v.im / std::f64::consts::PI;
            assert!((r - (-x).exp()).abs() < 1e-5, "x={x}: {r}");
        }
    }

    #[test]
    fn gaussian_far_from_support() {
        // 1/(z - t) expanded for large z: sqrt(pi)(1/z + 1/(2 z^3) + 3/(4 z^5) + ...)
        let g = |t: f64| (-t * t).exp();
        let z = Complex64::new(0.0, 40.0);
        let v = cauchy_transform(&g, Interval::RealLine, z).unwrap();
        let sp = std::f64::consts::PI.sqrt();
        let series = sp * (1.0 / z + 0.5 / z.powi(3) + 0.75 / z.powi(5));
        assert!((v - series).norm() < 1e-10);
    }

    #[test]
    fn segment_matches_closed_form() {
        // g = 1 on [0, 1]: log(z / (z - 1))
        let z = Complex64::new(0.4, 0.01);
        let v = cauchy_transform(&|_| 1.0, Interval::Segment(0.0, 1.0), z).unwrap();
        let exact = (z / (z - 1.0)).ln();
        assert!((v - exact).norm() < 1e-12, "{v} vs {exact}");
    }
}
