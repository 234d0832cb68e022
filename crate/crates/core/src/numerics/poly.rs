use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense real polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn one() -> Self {
        Polynomial { coeffs: vec![1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nominal degree (length of the coefficient vector minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().expect("non-empty")
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        Polynomial::new((0..n).map(|i| get(&self.coeffs, i) + get(&other.coeffs, i)).collect())
    }
}

/// Elementary symmetric functions `[e_0, ..., e_N]` of `a`, defined by
/// `prod_i (t + a_i) = sum_n t^n e_{N-n}`.
pub fn elem_sym(a: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; a.len() + 1];
    e[0] = 1.0;
    for (k, &ak) in a.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            e[j] += ak * e[j - 1];
        }
    }
    e
}

/// Complete homogeneous symmetric polynomials `[h_0, ..., h_max]` of `a`.
pub fn complete_homogeneous(a: &[f64], max: usize) -> Vec<f64> {
    let mut h = vec![0.0; max + 1];
    h[0] = 1.0;
    for &ak in a {
        for m in 1..=max {
            h[m] += ak * h[m - 1];
        }
    }
    h
}

/// `prod_{i<j} (x_j - x_i)`.
pub fn vandermonde(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for j in 0..x.len() {
        for i in 0..j {
            p *= x[j] - x[i];
        }
    }
    p
}

/// Both sides of the partial-fraction identity
/// `prod_i 1/(z - x_i) = sum_i 1/(z - x_i) prod_{j != i} 1/(x_i - x_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialFractions {
    pub sum: Complex64,
    pub product: Complex64,
}

impl PartialFractions {
    pub fn relative_residual(&self) -> f64 {
        (self.sum - self.product).norm() / self.product.norm()
    }
}

/// Evaluate the partial-fraction expansion of `prod 1/(z - x_i)` and the
/// direct product. Nodes closer than `1e-10` (relative) are rejected.
pub fn partial_fraction_weights(z: Complex64, x: &[f64]) -> Result<PartialFractions> {
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..x.len() {
        for j in 0..i {
            if (x[i] - x[j]).abs() < 1e-10 * scale {
                return Err(Error::domain(format!(
                    "partial fractions need distinct nodes; x[{j}] and x[{i}] coincide"
                )));
            }
        }
        if (z - x[i]).norm() == 0.0 {
            return Err(Error::domain(format!("z coincides with node x[{i}]")));
        }
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut product = Complex64::new(1.0, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        let denom: f64 = x.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| xi - xj).product();
        sum += 1.0 / ((z - xi) * denom);
        product /= z - xi;
    }
    Ok(PartialFractions { sum, product })
}
