//! Convex expressions assembled from a closed atom set.
//!
//! Every atom acts on a univariate affine argument `offset + slope * x[var]`
//! (or on two such arguments for the quotient-square atom). A nonlinear atom
//! with a nonnegative coefficient is convex on its domain, so any [`Expr`]
//! that passes [`Expr::check_convex`] is convex by construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Affine function of at most one variable: `offset + slope * x[var]`.
///
/// With `var == None` the argument is the constant `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arg {
    pub var: Option<usize>,
    pub offset: f64,
    pub slope: f64,
}

impl Arg {
    pub fn var(index: usize) -> Self {
        Self { var: Some(index), offset: 0.0, slope: 1.0 }
    }

    pub fn constant(value: f64) -> Self {
        Self { var: None, offset: value, slope: 0.0 }
    }

    /// `offset + slope * x[index]`.
    pub fn affine(index: usize, offset: f64, slope: f64) -> Self {
        Self { var: Some(index), offset, slope }
    }

    /// `1 - x[index]`.
    pub fn one_minus(index: usize) -> Self {
        Self::affine(index, 1.0, -1.0)
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match self.var {
            Some(j) => self.offset + self.slope * x[j],
            None => self.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Atom {
    /// `x[var]`; the only atom whose coefficient may be negative.
    Linear(usize),
    /// `a^2`.
    Square(Arg),
    /// `a^4`.
    Quartic(Arg),
    /// `1/a` on `a > 0`.
    Reciprocal(Arg),
    /// `-sqrt(a)` on `a > 0`.
    NegSqrt(Arg),
    /// `-ln(a)` on `a > 0`.
    NegLog(Arg),
    /// `(u/u_scale + v_scale/v)^2` on `u >= 0, v > 0`.
    QuotientSquare {
        num: Arg,
        num_scale: f64,
        den: Arg,
        den_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub atom: Atom,
}

/// `constant + sum(coef_i * atom_i)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub constant: f64,
    pub terms: Vec<Term>,
}

/// First- and second-order derivatives of a univariate atom at its argument.
#[inline]
fn univariate(atom: &Atom, a: f64) -> (f64, f64, f64) {
    match atom {
        Atom::Square(_) => (a * a, 2.0 * a, 2.0),
        Atom::Quartic(_) => {
            let a2 = a * a;
            (a2 * a2, 4.0 * a2 * a, 12.0 * a2)
        }
        Atom::Reciprocal(_) => {
            let inv = 1.0 / a;
            (inv, -inv * inv, 2.0 * inv * inv * inv)
        }
        Atom::NegSqrt(_) => {
            let r = a.sqrt();
            (-r, -0.5 / r, 0.25 / (r * a))
        }
        Atom::NegLog(_) => (-a.ln(), -1.0 / a, 1.0 / (a * a)),
        Atom::Linear(_) | Atom::QuotientSquare { .. } => unreachable!(),
    }
}

impl Term {
    fn in_domain(&self, x: &[f64]) -> bool {
        match &self.atom {
            Atom::Linear(_) | Atom::Square(_) | Atom::Quartic(_) => true,
            Atom::Reciprocal(a) | Atom::NegSqrt(a) | Atom::NegLog(a) => a.value(x) > 0.0,
            Atom::QuotientSquare { num, den, .. } => num.value(x) >= 0.0 && den.value(x) > 0.0,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let v = match &self.atom {
            Atom::Linear(j) => x[*j],
            Atom::Square(a) | Atom::Quartic(a) | Atom::Reciprocal(a) | Atom::NegSqrt(a) | Atom::NegLog(a) => {
                univariate(&self.atom, a.value(x)).0
            }
            Atom::QuotientSquare { num, num_scale, den, den_scale } => {
                let w = num.value(x) / num_scale + den_scale / den.value(x);
                w * w
            }
        };
        self.coef * v
    }

    /// Adds `weight * grad` into `grad` and `weight * hess` into `hess`.
    fn accumulate(&self, x: &[f64], weight: f64, grad: &mut DVector<f64>, hess: Option<&mut DMatrix<f64>>) {
        let c = self.coef * weight;
        match &self.atom {
            Atom::Linear(j) => grad[*j] += c,
            Atom::Square(a) | Atom::Quartic(a) | Atom::Reciprocal(a) | Atom::NegSqrt(a) | Atom::NegLog(a) => {
                if let Some(j) = a.var {
                    let (_, d1, d2) = univariate(&self.atom, a.value(x));
                    grad[j] += c * a.slope * d1;
                    if let Some(h) = hess {
                        h[(j, j)] += c * a.slope * a.slope * d2;
                    }
                }
            }
            Atom::QuotientSquare { num, num_scale, den, den_scale } => {
                let u = num.value(x);
                let v = den.value(x);
                let w = u / num_scale + den_scale / v;
                // dw/du, dw/dv, d2w/dv2
                let wu = 1.0 / num_scale;
                let wv = -den_scale / (v * v);
                let wvv = 2.0 * den_scale / (v * v * v);
                let gu = num.var.map(|i| (i, num.slope * wu));
                let gv = den.var.map(|k| (k, den.slope * wv));
                for &(i, d) in gu.iter().chain(gv.iter()) {
                    grad[i] += c * 2.0 * w * d;
                }
                if let Some(h) = hess {
                    // Hessian of w^2 = 2 (grad w)(grad w)^T + 2 w hess w
                    for &(i, di) in gu.iter().chain(gv.iter()) {
                        for &(k, dk) in gu.iter().chain(gv.iter()) {
                            h[(i, k)] += c * 2.0 * di * dk;
                        }
                    }
                    if let Some(k) = den.var {
                        h[(k, k)] += c * 2.0 * w * den.slope * den.slope * wvv;
                    }
                }
            }
        }
    }

    fn vars(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match &self.atom {
            Atom::Linear(j) => (Some(*j), None),
            Atom::Square(a) | Atom::Quartic(a) | Atom::Reciprocal(a) | Atom::NegSqrt(a) | Atom::NegLog(a) => {
                (a.var, None)
            }
            Atom::QuotientSquare { num, den, .. } => (num.var, den.var),
        };
        a.into_iter().chain(b)
    }

    fn magnitude(&self, x: &[f64]) -> f64 {
        self.value(x).abs()
    }
}

impl Expr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn term(mut self, coef: f64, atom: Atom) -> Self {
        self.terms.push(Term { coef, atom });
        self
    }

    pub fn linear(self, var: usize, coef: f64) -> Self {
        self.term(coef, Atom::Linear(var))
    }

    pub fn square(self, coef: f64, a: Arg) -> Self {
        self.term(coef, Atom::Square(a))
    }

    pub fn quartic(self, coef: f64, a: Arg) -> Self {
        self.term(coef, Atom::Quartic(a))
    }

    pub fn reciprocal(self, coef: f64, a: Arg) -> Self {
        self.term(coef, Atom::Reciprocal(a))
    }

    pub fn neg_sqrt(self, coef: f64, a: Arg) -> Self {
        self.term(coef, Atom::NegSqrt(a))
    }

    pub fn neg_log(self, coef: f64, a: Arg) -> Self {
        self.term(coef, Atom::NegLog(a))
    }

    pub fn quotient_square(self, coef: f64, num: Arg, num_scale: f64, den: Arg, den_scale: f64) -> Self {
        self.term(coef, Atom::QuotientSquare { num, num_scale, den, den_scale })
    }

    /// Verifies the atom composition rules; returns the offending term index.
    pub fn check_convex(&self, n_vars: usize) -> Result<(), usize> {
        for (i, t) in self.terms.iter().enumerate() {
            if !t.coef.is_finite() {
                return Err(i);
            }
            if !matches!(t.atom, Atom::Linear(_)) && t.coef < 0.0 {
                return Err(i);
            }
            if let Atom::QuotientSquare { num_scale, den_scale, .. } = t.atom {
                if !(num_scale > 0.0 && den_scale > 0.0) {
                    return Err(i);
                }
            }
            if t.vars().any(|j| j >= n_vars) {
                return Err(i);
            }
        }
        if self.constant.is_finite() {
            Ok(())
        } else {
            Err(usize::MAX)
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.terms.iter().all(|t| t.in_domain(x))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|t| t.value(x)).sum::<f64>()
    }

    /// `weight * grad` added into `grad` (and Hessian into `hess` when given).
    pub fn accumulate(&self, x: &[f64], weight: f64, grad: &mut DVector<f64>, mut hess: Option<&mut DMatrix<f64>>) {
        for t in &self.terms {
            t.accumulate(x, weight, grad, hess.as_deref_mut());
        }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        self.accumulate(x, 1.0, &mut g, None);
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        self.accumulate(x, 1.0, &mut g, Some(&mut h));
        h
    }

    /// Sum of absolute term values; used to normalize constraint rows.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.constant.abs() + self.terms.iter().map(|t| t.magnitude(x)).sum::<f64>()
    }

    /// Distinct variables referenced, in ascending order.
    pub fn support(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.iter().flat_map(|t| t.vars()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Rewrites the expression in scaled coordinates `x = scale * y`.
    pub fn rescaled(&self, scale: &[f64]) -> Expr {
        let map = |a: &Arg| match a.var {
            Some(j) => Arg { var: Some(j), offset: a.offset, slope: a.slope * scale[j] },
            None => *a,
        };
        let terms = self
            .terms
            .iter()
            .map(|t| match &t.atom {
                Atom::Linear(j) => Term { coef: t.coef * scale[*j], atom: Atom::Linear(*j) },
                Atom::Square(a) => Term { coef: t.coef, atom: Atom::Square(map(a)) },
                Atom::Quartic(a) => Term { coef: t.coef, atom: Atom::Quartic(map(a)) },
                Atom::Reciprocal(a) => Term { coef: t.coef, atom: Atom::Reciprocal(map(a)) },
                Atom::NegSqrt(a) => Term { coef: t.coef, atom: Atom::NegSqrt(map(a)) },
                Atom::NegLog(a) => Term { coef: t.coef, atom: Atom::NegLog(map(a)) },
                Atom::QuotientSquare { num, num_scale, den, den_scale } => Term {
                    coef: t.coef,
                    atom: Atom::QuotientSquare { num: map(num), num_scale: *num_scale, den: map(den), den_scale: *den_scale },
                },
            })
            .collect();
        Expr { constant: self.constant, terms }
    }

    /// Multiplies the whole expression by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Expr {
        Expr {
            constant: self.constant * factor,
            terms: self.terms.iter().map(|t| Term { coef: t.coef * factor, atom: t.atom }).collect(),
        }
    }
}

fn fmt_arg(a: &Arg, names: &dyn Fn(usize) -> String) -> String {
    match a.var {
        None => format!("{}", a.offset),
        Some(j) if a.offset == 0.0 && a.slope == 1.0 => names(j),
        Some(j) => format!("({} + {}*{})", a.offset, a.slope, names(j)),
    }
}

impl Expr {
    /// Human-readable rendering using the given variable names.
    pub fn render(&self, names: &dyn Fn(usize) -> String) -> String {
        let mut out = format!("{}", self.constant);
        for t in &self.terms {
            let body = match &t.atom {
                Atom::Linear(j) => names(*j),
                Atom::Square(a) => format!("{}^2", fmt_arg(a, names)),
                Atom::Quartic(a) => format!("{}^4", fmt_arg(a, names)),
                Atom::Reciprocal(a) => format!("1/{}", fmt_arg(a, names)),
                Atom::NegSqrt(a) => format!("-sqrt({})", fmt_arg(a, names)),
                Atom::NegLog(a) => format!("-ln({})", fmt_arg(a, names)),
                Atom::QuotientSquare { num, num_scale, den, den_scale } => format!(
                    "({}/{} + {}/{})^2",
                    fmt_arg(num, names),
                    num_scale,
                    den_scale,
                    fmt_arg(den, names)
                ),
            };
            out.push_str(&format!(" + {}*{}", t.coef, body));
        }
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|j| format!("x{j}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_diff_grad(e: &Expr, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let h = 1e-6 * x[j].abs().max(1.0);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                (e.value(&xp) - e.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn sample_expr() -> Expr {
        Expr::new()
            .constant(0.5)
            .linear(0, -1.5)
            .square(2.0, Arg::affine(1, 0.3, 2.0))
            .quartic(0.1, Arg::var(2))
            .reciprocal(1.3, Arg::one_minus(0))
            .neg_sqrt(0.7, Arg::var(1))
            .neg_log(0.4, Arg::affine(2, 1.0, 0.5))
            .quotient_square(0.9, Arg::var(1), 2.0, Arg::var(2), 1.5)
            .quotient_square(0.2, Arg::var(0), 1.0, Arg::one_minus(0), 0.5)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let e = sample_expr();
        let x = [0.3, 1.2, 0.8];
        let g = e.gradient(&x);
        let fd = finite_diff_grad(&e, &x);
        for j in 0..3 {
            assert!((g[j] - fd[j]).abs() < 1e-6 * fd[j].abs().max(1.0), "d/dx{j}: {} vs {}", g[j], fd[j]);
        }
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let e = sample_expr();
        let x = [0.3, 1.2, 0.8];
        let h = e.hessian(&x);
        for k in 0..3 {
            let step = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += step;
            xm[k] -= step;
            let gp = e.gradient(&xp);
            let gm = e.gradient(&xm);
            for j in 0..3 {
                let fd = (gp[j] - gm[j]) / (2.0 * step);
                assert!((h[(j, k)] - fd).abs() < 1e-5 * fd.abs().max(1.0), "H[{j},{k}] {} vs {fd}", h[(j, k)]);
            }
        }
    }

    #[test]
    fn negative_coefficient_on_convex_atom_is_rejected() {
        let e = Expr::new().linear(0, -3.0).reciprocal(-1.0, Arg::var(0));
        assert_eq!(e.check_convex(1), Err(1));
        assert!(Expr::new().linear(0, -3.0).check_convex(1).is_ok());
        assert_eq!(Expr::new().linear(4, 1.0).check_convex(2), Err(0));
    }

    #[test]
    fn rescaling_preserves_values() {
        let e = sample_expr();
        let scale = [0.5, 2.0, 4.0];
        let x = [0.3, 1.2, 0.8];
        let y: Vec<f64> = x.iter().zip(&scale).map(|(a, s)| a / s).collect();
        let r = e.rescaled(&scale);
        assert!((r.value(&y) - e.value(&x)).abs() < 1e-12);
    }

    #[test]
    fn domain_checks() {
        let e = Expr::new().reciprocal(1.0, Arg::one_minus(0));
        assert!(e.in_domain(&[0.5]));
        assert!(!e.in_domain(&[1.0]));
        let q = Expr::new().quotient_square(1.0, Arg::var(0), 1.0, Arg::var(1), 1.0);
        assert!(q.in_domain(&[0.0, 1.0]));
        assert!(!q.in_domain(&[-0.1, 1.0]));
    }
}
