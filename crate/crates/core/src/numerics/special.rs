use crate::error::{Error, Result};

const HYP0F1_MAX_TERMS: usize = 500;
const HYP0F1_RTOL: f64 = 1e-16;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha <= -1.0 {
        return Err(Error::domain(format!("Laguerre parameter alpha = {alpha} must exceed -1")));
    }
    Ok(())
}

/// Generalised Laguerre polynomial `L^alpha_n(x)` by the three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `[L^alpha_0(x), ..., L^alpha_n(x)]`.
pub fn laguerre_upto(n: usize, alpha: f64, x: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(1.0 + alpha - x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    Ok(out)
}

/// Monomial coefficients (ascending) of `L^alpha_n`:
/// `(-1)^k binom(n + alpha, n - k) / k!`.
pub fn laguerre_coeffs(n: usize, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    // c_n = (-1)^n / n!, and c_{k-1} = -c_k * k (alpha + k) / (n - k + 1).
    let mut c = vec![0.0; n + 1];
    let mut top = 1.0;
    for k in 1..=n {
        top *= -1.0 / k as f64;
    }
    c[n] = top;
    for k in (1..=n).rev() {
        let kf = k as f64;
        c[k - 1] = -c[k] * kf * (alpha + kf) / ((n - k + 1) as f64);
    }
    Ok(c)
}

/// Confluent hypergeometric limit function `0F1(; c; z)` by its Taylor series.
pub fn hyp0f1(c: f64, z: f64) -> Result<f64> {
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(Error::domain(format!("0F1 parameter c = {c} is a non-positive integer")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    // Terms grow until k ~ sqrt|z|; only test for convergence past the peak.
    let peak = z.abs().sqrt();
    for k in 0..HYP0F1_MAX_TERMS {
        let kf = k as f64;
        term *= z / ((c + kf) * (kf + 1.0));
        sum += term;
        if kf + 1.0 > peak && term.abs() <= HYP0F1_RTOL * sum.abs() {
            return Ok(sum);
        }
        if term == 0.0 {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { what: "0F1 series", iterations: HYP0F1_MAX_TERMS, partial: sum })
}

/// Taylor coefficients of `v -> 0F1(; c; x v)` up to `v^order`.
pub fn hyp0f1_taylor(c: f64, x: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut t = 1.0;
    out.push(t);
    for m in 0..order {
        let mf = m as f64;
        t *= x / ((c + mf) * (mf + 1.0));
        out.push(t);
    }
    out
}

/// Modified Bessel function of the first kind, `I_alpha(z)` for `z >= 0`,
/// through `I_alpha(2 sqrt(t)) = t^{alpha/2} 0F1(alpha + 1; t) / Gamma(alpha + 1)`.
pub fn bessel_i(alpha: f64, z: f64) -> Result<f64> {
    if z.is_nan() || z < 0.0 {
        return Err(Error::domain(format!("bessel_i requires z >= 0, got {z}")));
    }
    let order = if alpha <= -1.0 {
        if alpha.fract() != 0.0 {
            return Err(Error::domain(format!(
                "bessel_i order {alpha} <= -1 is only supported for integers"
            )));
        }
        -alpha
    } else {
        alpha
    };
    let half = 0.5 * z;
    let series = hyp0f1(order + 1.0, half * half)?;
    let prefactor = if half == 0.0 {
        if order == 0.0 {
            1.0
        } else if order > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (order * half.ln() - log_gamma(order + 1.0)?).exp()
    };
    Ok(prefactor * series)
}

/// `ln Gamma(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    // Explicit finite sum of binom(n+alpha, n-k)(-x)^k/k! in exact rational
    // arithmetic, so cancellation at large x does not pollute the reference.
    fn laguerre_series(n: usize, alpha: f64, x: f64) -> f64 {
        use num::{BigInt, BigRational, ToPrimitive, Zero};
        let int = |v: usize| BigRational::from_integer(BigInt::from(v));
        let a = BigRational::from_float(alpha).unwrap();
        let x = BigRational::from_float(x).unwrap();
        let mut total = BigRational::zero();
        for k in 0..=n {
            let mut term = int(1);
            for j in 1..=(n - k) {
                term = term * (int(k + j) + &a) / int(j);
            }
            for j in 1..=k {
                term = -term * &x / int(j);
            }
            total += term;
        }
        total.to_f64().unwrap()
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre(0, 0.5, 3.7).unwrap(), 1.0);
        assert_eq!(laguerre(1, 1.0, 2.0).unwrap(), 0.0);
        assert!((laguerre(2, 0.0, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!((laguerre_series(2, 0.0, 1.0) + 0.5).abs() < 1e-15);
        assert!(laguerre(3, -1.0, 1.0).is_err());
    }

    #[test]
    fn laguerre_recurrence_matches_series() {
        for &alpha in &[0.0, 0.5, 1.0, 2.5] {
            for n in 0..=20 {
                for i in 0..=40 {
                    let x = 0.5 * i as f64;
                    let r = laguerre(n, alpha, x).unwrap();
                    let s = laguerre_series(n, alpha, x);
                    let scale = s.abs().max(1.0);
                    assert!((r - s).abs() / scale < 1e-11, "n={n} a={alpha} x={x}: {r} vs {s}");
                }
            }
        }
    }

    #[test]
    fn laguerre_coefficients_evaluate_consistently() {
        let c = laguerre_coeffs(5, 1.5).unwrap();
        let x = 2.3;
        let horner = c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci);
        assert!(rel(horner, laguerre(5, 1.5, x).unwrap()) < 1e-12);
        assert!(rel(c[5], -1.0 / 120.0) < 1e-15);
    }

    #[test]
    fn hyp0f1_examples() {
        assert_eq!(hyp0f1(2.5, 0.0).unwrap(), 1.0);
        assert!(rel(hyp0f1(2.0, 1.0).unwrap(), 1.590_636_854_637_329) < 1e-14);
        assert!(rel(hyp0f1(1.0, 1.0).unwrap(), 2.279_585_302_336_067) < 1e-14);
        assert!(hyp0f1(-2.0, 1.0).is_err());
        assert!(hyp0f1(0.0, 1.0).is_err());
    }

    #[test]
    fn hyp0f1_negative_argument_is_bessel_j() {
        // 0F1(1; -t^2/4) = J_0(t); J_0(2.404825557695773) = 0 (first zero).
        let t: f64 = 2.404_825_557_695_773;
        assert!(hyp0f1(1.0, -t * t / 4.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn bessel_examples() {
        assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1.0, 0.0).unwrap(), 0.0);
        assert!(rel(bessel_i(0.0, 2.0).unwrap(), 2.279_585_302_336_067) < 1e-14);
        assert!(bessel_i(0.5, -1.0).is_err());
        assert!(bessel_i(-1.5, 1.0).is_err());
    }

    #[test]
    fn bessel_integer_order_symmetry() {
        for &alpha in &[1.0, 2.0, 3.0] {
            for i in 0..=20 {
                let z = 0.5 * i as f64;
                let p = bessel_i(alpha, z).unwrap();
                let m = bessel_i(-alpha, z).unwrap();
                assert!((p - m).abs() <= 1e-11 * p.abs(), "alpha {alpha} z {z}");
            }
        }
    }

    #[test]
    fn log_gamma_examples() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(rel(log_gamma(5.0).unwrap(), 24f64.ln()) < 1e-13);
        assert!(rel(log_gamma(0.5).unwrap(), 0.5 * std::f64::consts::PI.ln()) < 1e-13);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-2.5).is_err());
    }

    #[test]
    fn taylor_coefficients_sum_to_function() {
        let coeffs = hyp0f1_taylor(2.5, -1.3, 60);
        let v = 0.7;
        let s: f64 = coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c);
        assert!(rel(s, hyp0f1(2.5, -1.3 * v).unwrap()) < 1e-14);
    }
}
