//! Multiple orthogonal polynomials of type I and II.
//!
//! For weights `w_1 .. w_D` on a common interval and a composition
//! `n = (n_1, .., n_D)` with `|n| = N`, the type I function
//! `Q_n = sum_i w_i A_i` (with `deg A_i = n_i - 1`) satisfies
//! `∫ x^j Q_n = 0` for `j < N - 1` and `= 1` for `j = N - 1`, and the monic
//! type II polynomial `P_n` of degree `N` satisfies `∫ w_i x^j P_n = 0` for
//! `j < n_i`. Both come from one linear solve against the moment matrix of
//! the family `x^j w_i`.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{real_fn, Interval, Matrix, Polynomial, QuadratureRule, RealFn};

/// Condition estimate above which a warning is logged.
pub const COND_WARN: f64 = 1e10;
/// Condition estimate above which the solve is refused.
pub const COND_FAIL: f64 = 1e13;

/// A multi-index `(n_1, .., n_D)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Composition {
    parts: Vec<usize>,
}

impl Composition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::domain("a composition needs at least one part"));
        }
        Ok(Composition { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// `D`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|n|`.
    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// The path that fills block 1, then block 2, and so on.
    pub fn staircase(&self) -> Vec<usize> {
        self.parts.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat_n(i, n)).collect()
    }
}

/// Weights `w_1 .. w_D` sharing one interval, with the rule used for moments.
#[derive(Clone)]
pub struct WeightSystem {
    weights: Vec<RealFn>,
    interval: Interval,
    quad: QuadratureRule,
}

impl std::fmt::Debug for WeightSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightSystem")
            .field("d", &self.weights.len())
            .field("interval", &self.interval)
            .finish()
    }
}

impl WeightSystem {
    pub fn new(weights: Vec<RealFn>, interval: Interval, quad: QuadratureRule) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("a weight system needs at least one weight"));
        }
        if quad.interval() != interval {
            return Err(Error::domain(format!(
                "rule covers {:?} but the weights live on {interval:?}",
                quad.interval()
            )));
        }
        Ok(WeightSystem { weights, interval, quad })
    }

    pub fn weights(&self) -> &[RealFn] {
        &self.weights
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn quad(&self) -> &QuadratureRule {
        &self.quad
    }

    /// `D`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `∫ w_i x^k` for `k = 0..=max_power`, one row per weight.
    pub fn moments(&self, max_power: usize) -> Vec<Vec<f64>> {
        let nodes = self.quad.nodes();
        let pw = self.quad.plain_weights();
        self.weights
            .iter()
            .map(|w| {
                let mut out = vec![0.0; max_power + 1];
                for (&x, &q) in nodes.iter().zip(pw) {
                    let mut term = q * w(x);
                    for m in out.iter_mut() {
                        *m += term;
                        term *= x;
                    }
                }
                out
            })
            .collect()
    }

    fn check(&self, comp: &Composition) -> Result<()> {
        if comp.len() != self.len() {
            return Err(Error::domain(format!(
                "composition has {} parts for {} weights",
                comp.len(),
                self.len()
            )));
        }
        if comp.total() == 0 {
            return Err(Error::domain("composition has zero weight"));
        }
        Ok(())
    }
}

/// `[w_1, x w_1, .., x^{n_1-1} w_1, w_2, ..]`.
pub fn xi_family(ws: &WeightSystem, comp: &Composition) -> Vec<RealFn> {
    let mut out = Vec::with_capacity(comp.total());
    for (w, &n) in ws.weights.iter().zip(comp.parts()) {
        for j in 0..n {
            let w = w.clone();
            out.push(real_fn(move |x: f64| x.powi(j as i32) * w(x)));
        }
    }
    out
}

/// Moment matrix `g[r][c] = ∫ x^r xi_c` for `r = 0..rows`, columns in
/// `xi_family` order.
fn moment_matrix(ws: &WeightSystem, comp: &Composition, rows: usize) -> Matrix {
    let n = comp.total();
    let max_j = comp.parts().iter().copied().max().unwrap_or(0);
    let h = ws.moments(rows + max_j);
    let mut cols = Vec::with_capacity(n);
    for (i, &ni) in comp.parts().iter().enumerate() {
        for j in 0..ni {
            cols.push((i, j));
        }
    }
    Matrix::from_fn(rows, n, |r, c| {
        let (i, j) = cols[c];
        h[i][r + j]
    })
}

/// Condition estimate of `g` after row and column equilibration.
fn guard_condition(g: &Matrix, context: &str) -> Result<()> {
    let n = g.rows();
    let mut scaled = g.clone();
    for r in 0..n {
        let m = scaled.row(r).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m > 0.0 {
            for c in 0..n {
                scaled[(r, c)] /= m;
            }
        }
    }
    for c in 0..n {
        let m = (0..n).fold(0.0f64, |a, r| a.max(scaled[(r, c)].abs()));
        if m > 0.0 {
            for r in 0..n {
                scaled[(r, c)] /= m;
            }
        }
    }
    let cond = scaled.condition_estimate().map_err(|e| e.in_context(context))?;
    if cond > COND_FAIL {
        return Err(Error::IllConditioned { estimate: cond, context: context.into() });
    }
    if cond > COND_WARN {
        warn!("{context}: condition estimate {cond:.3e} exceeds {COND_WARN:.0e}");
    }
    Ok(())
}

/// `Q(x) = sum_i w_i(x) A_i(x)`.
#[derive(Clone)]
pub struct TypeIFunction {
    composition: Composition,
    blocks: Vec<Polynomial>,
    weights: Vec<RealFn>,
    quad: QuadratureRule,
}

impl std::fmt::Debug for TypeIFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TypeIFunction")
            .field("composition", &self.composition)
            .field("blocks", &self.blocks)
            .finish()
    }
}

impl TypeIFunction {
    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    /// `A_1 .. A_D`; a block with `n_i = 0` is the zero polynomial.
    pub fn blocks(&self) -> &[Polynomial] {
        &self.blocks
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.blocks)
            .filter(|(_, a)| !a.coeffs().iter().all(|&c| c == 0.0))
            .map(|(w, a)| w(x) * a.eval(x))
            .sum()
    }

    /// Replace one coefficient, for building non-orthogonal witnesses.
    pub fn with_coefficient(&self, block: usize, power: usize, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let a = out.blocks.get_mut(block).ok_or_else(|| Error::domain(format!("no block {block}")))?;
        let mut c = a.coeffs().to_vec();
        if power >= c.len() {
            c.resize(power + 1, 0.0);
        }
        c[power] = value;
        *a = Polynomial::new(c);
        Ok(out)
    }

    pub fn as_fn(&self) -> RealFn {
        let me = self.clone();
        real_fn(move |x| me.eval(x))
    }
}

/// Monic `P` of degree `|n|`.
#[derive(Debug, Clone)]
pub struct TypeIIPolynomial {
    composition: Composition,
    poly: Polynomial,
}

impl TypeIIPolynomial {
    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    /// Monomial coefficients, lowest degree first.
    pub fn coeffs(&self) -> &[f64] {
        self.poly.coeffs()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }
}

/// Type I function for `comp`, by solving `g beta = e_N` with `g_rc = ∫ x^r xi_c`.
pub fn type_one(ws: &WeightSystem, comp: &Composition) -> Result<TypeIFunction> {
    ws.check(comp)?;
    let n = comp.total();
    let g = moment_matrix(ws, comp, n);
    let context = format!("type I moment matrix for {:?}", comp.parts());
    guard_condition(&g, &context)?;
    let lu = g.lu().map_err(|e| e.in_context(context))?;
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let beta = lu.solve_vec(&rhs);
    let mut blocks = Vec::with_capacity(comp.len());
    let mut at = 0;
    for &ni in comp.parts() {
        blocks.push(if ni == 0 {
            Polynomial::new(vec![0.0])
        } else {
            Polynomial::new(beta[at..at + ni].to_vec())
        });
        at += ni;
    }
    Ok(TypeIFunction {
        composition: comp.clone(),
        blocks,
        weights: ws.weights.clone(),
        quad: ws.quad.clone(),
    })
}

/// Monic type II polynomial for `comp`, from `g^T p = -(∫ x^N xi_c)_c`.
pub fn type_two(ws: &WeightSystem, comp: &Composition) -> Result<TypeIIPolynomial> {
    ws.check(comp)?;
    let n = comp.total();
    let full = moment_matrix(ws, comp, n + 1);
    let g = Matrix::from_fn(n, n, |r, c| full[(r, c)]);
    let context = format!("type II moment matrix for {:?}", comp.parts());
    guard_condition(&g, &context)?;
    let lu = g.lu().map_err(|e| e.in_context(context))?;
    let rhs: Vec<f64> = (0..n).map(|c| -full[(n, c)]).collect();
    let mut coeffs = lu.solve_transposed_vec(&rhs);
    coeffs.push(1.0);
    Ok(TypeIIPolynomial { composition: comp.clone(), poly: Polynomial::new(coeffs) })
}

/// `∫ x^j Q` for `j = 0..|n|`; all but the last should vanish, the last is 1.
pub fn check_ortho_one(q: &TypeIFunction) -> Vec<f64> {
    let n = q.composition.total();
    let nodes = q.quad.nodes();
    let pw = q.quad.plain_weights();
    let mut out = vec![0.0; n];
    for (&x, &w) in nodes.iter().zip(pw) {
        let mut term = w * q.eval(x);
        for m in out.iter_mut() {
            *m += term;
            term *= x;
        }
    }
    out
}

/// `∫ w_i x^j P` for every block `i` and `j < n_i`, in `xi_family` order.
pub fn check_ortho_two(p: &TypeIIPolynomial, ws: &WeightSystem, comp: &Composition) -> Vec<f64> {
    xi_family(ws, comp).iter().map(|xi| ws.quad.integrate_plain(|x| xi(x) * p.eval(x))).collect()
}

/// Biorthogonal pairs `(P_i, Q_i)`, `i = 0..N`, along a nested path of
/// multi-indices. `path[s]` is the block incremented at step `s`; `None`
/// selects the staircase path. `P_i` uses the multi-index after `i` steps and
/// `Q_i` the one after `i + 1` steps, so `∫ P_i Q_j = δ_ij`.
pub fn biortho_sequence(
    ws: &WeightSystem,
    comp: &Composition,
    path: Option<&[usize]>,
) -> Result<(Vec<TypeIIPolynomial>, Vec<TypeIFunction>)> {
    ws.check(comp)?;
    let default_path = comp.staircase();
    let path = path.unwrap_or(&default_path);
    let mut counts = vec![0usize; comp.len()];
    for &b in path {
        if b >= comp.len() {
            return Err(Error::domain(format!("path step uses block {b} of {}", comp.len())));
        }
        counts[b] += 1;
    }
    if counts != comp.parts() {
        return Err(Error::domain(format!("path reaches {counts:?} instead of {:?}", comp.parts())));
    }
    let n = comp.total();
    let mut index = vec![0usize; comp.len()];
    let mut ps = Vec::with_capacity(n);
    let mut qs = Vec::with_capacity(n);
    for (step, &b) in path.iter().enumerate() {
        let before = Composition::new(index.clone())?;
        ps.push(if step == 0 {
            TypeIIPolynomial { composition: before, poly: Polynomial::one() }
        } else {
            type_two(ws, &before).map_err(|e| e.in_context(format!("path step {step}")))?
        });
        index[b] += 1;
        let after = Composition::new(index.clone())?;
        qs.push(type_one(ws, &after).map_err(|e| e.in_context(format!("path step {step}")))?);
    }
    Ok((ps, qs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{laguerre_weight, op_from_weight};
    use crate::numerics::{gauss_laguerre, laguerre, log_gamma};

    fn laguerre_system(alphas: &[f64]) -> WeightSystem {
        let amin = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
        let rule = gauss_laguerre(64, amin).unwrap();
        WeightSystem::new(alphas.iter().map(|&a| laguerre_weight(a)).collect(), Interval::HalfLine, rule)
            .unwrap()
    }

    // Two exponential weights with different rates form an AT system.
    fn two_rates() -> WeightSystem {
        let rule = gauss_laguerre(64, 0.0).unwrap();
        WeightSystem::new(
            vec![real_fn(|x: f64| (-x).exp()), real_fn(|x: f64| (-2.0 * x).exp())],
            Interval::HalfLine,
            rule,
        )
        .unwrap()
    }

    #[test]
    fn xi_family_order() {
        let ws = two_rates();
        let fam = xi_family(&ws, &Composition::new(vec![1, 2]).unwrap());
        assert_eq!(fam.len(), 3);
        let x: f64 = 0.7;
        assert!((fam[0](x) - (-x).exp()).abs() < 1e-15);
        assert!((fam[1](x) - (-2.0 * x).exp()).abs() < 1e-15);
        assert!((fam[2](x) - x * (-2.0 * x).exp()).abs() < 1e-15);
        let single = xi_family(&laguerre_system(&[0.0]), &Composition::new(vec![2]).unwrap());
        assert!((single[1](1.5) - 1.5 * (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_weight_type_one_is_laguerre_function() {
        for &(n, alpha) in &[(1usize, 0.0), (3, 1.0), (4, 2.0)] {
            let ws = laguerre_system(&[alpha]);
            let q = type_one(&ws, &Composition::new(vec![n]).unwrap()).unwrap();
            let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign / log_gamma(n as f64 + alpha).unwrap().exp();
            for &x in &[0.3f64, 1.7, 4.2] {
                let expect = c * x.powf(alpha) * (-x).exp() * laguerre(n - 1, alpha, x).unwrap();
                assert!((q.eval(x) - expect).abs() < 1e-9 * expect.abs().max(1e-3), "n={n} x={x}");
            }
            let r = check_ortho_one(&q);
            assert!((r[n - 1] - 1.0).abs() < 1e-9);
            for v in &r[..n - 1] {
                assert!(v.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_weight_type_two_is_laguerre_polynomial() {
        let alpha = 1.0;
        let ws = laguerre_system(&[alpha]);
        for n in 1..=5 {
            let p = type_two(&ws, &Composition::new(vec![n]).unwrap()).unwrap();
            assert_eq!(*p.coeffs().last().unwrap(), 1.0);
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            for &x in &[0.2f64, 2.5, 6.0] {
                let expect = sign * fact * laguerre(n, alpha, x).unwrap();
                assert!((p.eval(x) - expect).abs() < 1e-8 * expect.abs().max(1.0), "n={n}");
            }
            let sys = op_from_weight(laguerre_weight(alpha), Interval::HalfLine, n, ws.quad()).unwrap();
            let c = sys.coeffs(n).unwrap();
            for (a, b) in p.coeffs().iter().zip(&c) {
                assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn two_weight_orthogonality() {
        let ws = two_rates();
        for parts in [vec![1, 1], vec![2, 1], vec![1, 2], vec![2, 2], vec![3, 1]] {
            let comp = Composition::new(parts.clone()).unwrap();
            let p = type_two(&ws, &comp).unwrap();
            for r in check_ortho_two(&p, &ws, &comp) {
                assert!(r.abs() < 1e-9, "{parts:?}: {r}");
            }
            let q = type_one(&ws, &comp).unwrap();
            let r = check_ortho_one(&q);
            let n = comp.total();
            assert!((r[n - 1] - 1.0).abs() < 1e-9);
            assert!(r[..n - 1].iter().all(|v| v.abs() < 1e-9), "{parts:?}: {r:?}");
            for (i, a) in q.blocks().iter().enumerate() {
                assert_eq!(a.degree(), parts[i] - 1);
            }
        }
    }

    #[test]
    fn perturbed_type_one_is_detected() {
        let ws = two_rates();
        let q = type_one(&ws, &Composition::new(vec![2, 1]).unwrap()).unwrap();
        let c0 = q.blocks()[0].coeffs()[0];
        let bad = q.with_coefficient(0, 0, c0 + 0.1).unwrap();
        assert!(check_ortho_one(&bad)[..2].iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn type_one_solution_is_unique() {
        // Solve the moment conditions on A-coefficients directly with a
        // dense inverse and compare.
        let ws = two_rates();
        let comp = Composition::new(vec![2, 2]).unwrap();
        let q = type_one(&ws, &comp).unwrap();
        let fam = xi_family(&ws, &comp);
        let g = Matrix::from_fn(4, 4, |r, c| ws.quad().integrate_plain(|x| x.powi(r as i32) * fam[c](x)));
        let inv = g.inverse().unwrap();
        let beta: Vec<f64> = (0..4).map(|i| inv[(i, 3)]).collect();
        let got: Vec<f64> = q.blocks().iter().flat_map(|b| b.coeffs().to_vec()).collect();
        for (a, b) in got.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    fn pairing(p: &TypeIIPolynomial, q: &TypeIFunction, ws: &WeightSystem) -> f64 {
        ws.quad().integrate_plain(|x| p.eval(x) * q.eval(x))
    }

    #[test]
    fn sequence_is_biorthogonal() {
        let ws = two_rates();
        let comp = Composition::new(vec![2, 1]).unwrap();
        let (ps, qs) = biortho_sequence(&ws, &comp, None).unwrap();
        assert_eq!(ps[0].coeffs(), &[1.0]);
        for i in 0..3 {
            for j in 0..3 {
                let v = pairing(&ps[i], &qs[j], &ws);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-8, "({i},{j}) = {v}");
            }
        }
        let interleaved = [0usize, 1, 0];
        let (ps, qs) = biortho_sequence(&ws, &comp, Some(&interleaved)).unwrap();
        for i in 0..3 {
            assert!((pairing(&ps[i], &qs[i], &ws) - 1.0).abs() < 1e-8);
        }
        assert!(biortho_sequence(&ws, &comp, Some(&[0, 0, 0])).is_err());
    }

    #[test]
    fn single_weight_sequence_is_op_pairs() {
        let alpha = 0.5;
        let ws = laguerre_system(&[alpha]);
        let comp = Composition::new(vec![4]).unwrap();
        let (ps, qs) = biortho_sequence(&ws, &comp, None).unwrap();
        let sys = op_from_weight(laguerre_weight(alpha), Interval::HalfLine, 4, ws.quad()).unwrap();
        let x = 1.9;
        let p = sys.eval_upto(4, x).unwrap();
        let w = laguerre_weight(alpha)(x);
        for i in 0..4 {
            assert!((ps[i].eval(x) - p[i]).abs() < 1e-8 * p[i].abs().max(1.0));
            let q = w * p[i] / sys.norms()[i];
            assert!((qs[i].eval(x) - q).abs() < 1e-8 * q.abs().max(1e-6), "i={i}");
        }
    }

    #[test]
    fn dependent_weights_are_singular() {
        let rule = gauss_laguerre(40, 0.0).unwrap();
        let ws = WeightSystem::new(
            vec![real_fn(|x: f64| (-x).exp()), real_fn(|x: f64| 2.0 * (-x).exp())],
            Interval::HalfLine,
            rule,
        )
        .unwrap();
        let err = type_one(&ws, &Composition::new(vec![1, 1]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }), "{err:?}");
    }
}
