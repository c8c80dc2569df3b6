//! Convex inner approximations of the non-convex terms, anchored at the
//! previous iterate.
//!
//! Each surrogate is tight at its anchor. Upper kinds are convex and lie
//! above the exact term on the positive orthant; lower kinds are concave and
//! lie below it. Every kind can also emit itself as a solver [`Expr`] over
//! [`Slot`]s, where a slot is either a decision variable or a frozen value.
//! Lower kinds emit their negation so the result is always convex.

use serde::{Deserialize, Serialize};
use wpfl_solver::{Arg, Expr};

/// Anchors below this value are raised to it before coefficients are built.
pub const ANCHOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurrogateError {
    #[error("anchor `{name}` must be positive, got {value}")]
    NonPositiveAnchor { name: &'static str, value: f64 },
    #[error("`{name}` = {value} is outside the surrogate domain")]
    OutOfDomain { name: &'static str, value: f64 },
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
}

fn anchor(name: &'static str, value: f64) -> Result<f64, SurrogateError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(SurrogateError::NonPositiveAnchor { name, value });
    }
    Ok(value.max(ANCHOR_FLOOR))
}

/// Physical constants are validated but never floored.
fn constant(name: &'static str, value: f64) -> Result<f64, SurrogateError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(SurrogateError::NonPositiveAnchor { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, SurrogateError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(SurrogateError::OutOfDomain { name, value })
    }
}

/// A coordinate of a subproblem: a decision variable or a frozen value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    Var(usize),
    Fixed(f64),
}

impl Slot {
    pub fn arg(self) -> Arg {
        match self {
            Slot::Var(j) => Arg::var(j),
            Slot::Fixed(v) => Arg::constant(v),
        }
    }

    /// `1 - slot`.
    pub fn one_minus(self) -> Arg {
        match self {
            Slot::Var(j) => Arg::one_minus(j),
            Slot::Fixed(v) => Arg::constant(1.0 - v),
        }
    }

    pub fn var(self) -> Option<usize> {
        match self {
            Slot::Var(j) => Some(j),
            Slot::Fixed(_) => None,
        }
    }

    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            Slot::Var(j) => x[j],
            Slot::Fixed(v) => v,
        }
    }
}

/// Appends `coef * slot`, folding frozen slots into the constant.
pub fn add_linear(e: Expr, coef: f64, slot: Slot) -> Expr {
    match slot {
        Slot::Var(j) => e.linear(j, coef),
        Slot::Fixed(v) => e.constant(coef * v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Upper,
    Lower,
}

/// `sqrt(x y) <= (sqrt(y0/x0) x + sqrt(x0/y0) y) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqrtProductUpper {
    pub x0: f64,
    pub y0: f64,
}

impl SqrtProductUpper {
    pub fn new(x0: f64, y0: f64) -> Result<Self, SurrogateError> {
        Ok(Self { x0: anchor("x", x0)?, y0: anchor("y", y0)? })
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        0.5 * ((self.y0 / self.x0).sqrt() * x + (self.x0 / self.y0).sqrt() * y)
    }

    pub fn exact(x: f64, y: f64) -> f64 {
        (x * y).sqrt()
    }

    pub fn expr(&self, coef: f64, x: Slot, y: Slot) -> Expr {
        let e = add_linear(Expr::new(), coef * 0.5 * (self.y0 / self.x0).sqrt(), x);
        add_linear(e, coef * 0.5 * (self.x0 / self.y0).sqrt(), y)
    }
}

/// `t z <= ((z0/t0) t^2 + (t0/z0) z^2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearUpper {
    pub t0: f64,
    pub z0: f64,
}

impl BilinearUpper {
    pub fn new(t0: f64, z0: f64) -> Result<Self, SurrogateError> {
        Ok(Self { t0: anchor("t", t0)?, z0: anchor("z", z0)? })
    }

    pub fn value(&self, t: f64, z: f64) -> f64 {
        0.5 * (self.z0 / self.t0 * t * t + self.t0 / self.z0 * z * z)
    }

    pub fn exact(t: f64, z: f64) -> f64 {
        t * z
    }

    pub fn expr(&self, coef: f64, t: Slot, z: Slot) -> Expr {
        Expr::new()
            .square(coef * 0.5 * self.z0 / self.t0, t.arg())
            .square(coef * 0.5 * self.t0 / self.z0, z.arg())
    }
}

/// `t z^2 <= ((z0^2/t0) t^2 + (t0/z0^2) z^4) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearSquareUpper {
    pub t0: f64,
    pub z0: f64,
}

impl BilinearSquareUpper {
    pub fn new(t0: f64, z0: f64) -> Result<Self, SurrogateError> {
        Ok(Self { t0: anchor("t", t0)?, z0: anchor("z", z0)? })
    }

    pub fn value(&self, t: f64, z: f64) -> f64 {
        let z02 = self.z0 * self.z0;
        0.5 * (z02 / self.t0 * t * t + self.t0 / z02 * z.powi(4))
    }

    pub fn exact(t: f64, z: f64) -> f64 {
        t * z * z
    }

    pub fn expr(&self, coef: f64, t: Slot, z: Slot) -> Expr {
        let z02 = self.z0 * self.z0;
        Expr::new().square(coef * 0.5 * z02 / self.t0, t.arg()).quartic(coef * 0.5 * self.t0 / z02, z.arg())
    }
}

/// `t z >= 2 z0 sqrt(t0) sqrt(t) - t0 z0^2 / z`, concave on `t >= 0, z > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearLower {
    pub t0: f64,
    pub z0: f64,
}

impl BilinearLower {
    pub fn new(t0: f64, z0: f64) -> Result<Self, SurrogateError> {
        Ok(Self { t0: anchor("t", t0)?, z0: anchor("z", z0)? })
    }

    pub fn value(&self, t: f64, z: f64) -> Result<f64, SurrogateError> {
        let z = positive("z", z)?;
        if t < 0.0 {
            return Err(SurrogateError::OutOfDomain { name: "t", value: t });
        }
        Ok(2.0 * self.z0 * self.t0.sqrt() * t.sqrt() - self.t0 * self.z0 * self.z0 / z)
    }

    pub fn exact(t: f64, z: f64) -> f64 {
        t * z
    }

    /// `-coef * value(t, z)` as a convex expression.
    pub fn negated_expr(&self, coef: f64, t: Slot, z: Slot) -> Expr {
        Expr::new()
            .neg_sqrt(coef * 2.0 * self.z0 * self.t0.sqrt(), t.arg())
            .reciprocal(coef * self.t0 * self.z0 * self.z0, z.arg())
    }
}

/// How the denominator of a ratio depends on its variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Denominator {
    /// `v = w`.
    Direct,
    /// `v = 1 - w`.
    OneMinus,
}

impl Denominator {
    pub fn apply(self, w: f64) -> f64 {
        match self {
            Denominator::Direct => w,
            Denominator::OneMinus => 1.0 - w,
        }
    }
}

/// `u / v <= (u0 / (4 v0)) (u/u0 + v0/v)^2` in terms of `(u, w)` with `v = v(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioUpper {
    pub u0: f64,
    /// Anchor of the denominator itself, not of `w`.
    pub v0: f64,
    pub denominator: Denominator,
}

impl RatioUpper {
    /// Anchors are `(u0, w0)` in the same coordinates as the evaluation point.
    pub fn new(u0: f64, w0: f64, denominator: Denominator) -> Result<Self, SurrogateError> {
        let v = denominator.apply(w0);
        Ok(Self { u0: anchor("u", u0)?, v0: anchor("v", v)?, denominator })
    }

    pub fn value(&self, u: f64, w: f64) -> Result<f64, SurrogateError> {
        let v = positive("v", self.denominator.apply(w))?;
        let s = u / self.u0 + self.v0 / v;
        Ok(self.u0 / (4.0 * self.v0) * s * s)
    }

    pub fn exact(&self, u: f64, w: f64) -> f64 {
        u / self.denominator.apply(w)
    }

    pub fn expr(&self, coef: f64, u: Slot, w: Slot) -> Expr {
        let den = match self.denominator {
            Denominator::Direct => w.arg(),
            Denominator::OneMinus => w.one_minus(),
        };
        Expr::new().quotient_square(coef * self.u0 / (4.0 * self.v0), u.arg(), self.u0, den, self.v0)
    }
}

/// Concave lower bound of `b ln(1 + p h / (b n0))` around `(b0, p0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdmaRateLower {
    pub b0: f64,
    pub p0: f64,
    pub h: f64,
    pub n0: f64,
    pub lambda: f64,
    pub mu: f64,
    pub upsilon: f64,
}

impl FdmaRateLower {
    pub fn new(b0: f64, p0: f64, h: f64, n0: f64) -> Result<Self, SurrogateError> {
        let (b0, p0) = (anchor("b", b0)?, anchor("p", p0)?);
        let (h, n0) = (constant("h", h)?, constant("n0", n0)?);
        let snr = p0 * h / (b0 * n0);
        let log = snr.ln_1p();
        Ok(Self { b0, p0, h, n0, lambda: 2.0 * b0 * log, mu: b0 / (1.0 + 1.0 / snr), upsilon: b0 * b0 * log })
    }

    pub fn value(&self, b: f64, p: f64) -> Result<f64, SurrogateError> {
        let b = positive("b", b)?;
        let p = positive("p", p)?;
        Ok(self.lambda + self.mu * (2.0 - self.p0 / p - b / self.b0) - self.upsilon / b)
    }

    pub fn exact(&self, b: f64, p: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        b * (p * self.h / (b * self.n0)).ln_1p()
    }

    /// `-coef * value(b, p)` as a convex expression.
    pub fn negated_expr(&self, coef: f64, b: Slot, p: Slot) -> Expr {
        let e = Expr::new()
            .constant(-coef * (self.lambda + 2.0 * self.mu))
            .reciprocal(coef * self.mu * self.p0, p.arg())
            .reciprocal(coef * self.upsilon, b.arg());
        add_linear(e, coef * self.mu / self.b0, b)
    }
}

/// Concave lower bound of `tau ln(1 + h_n p_n / (n0 B + sum_{k>n} p_k h_k))`
/// around the anchor powers and upload time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomaRateLower {
    /// Decoding position of the device.
    pub n: usize,
    pub h: Vec<f64>,
    pub p0: Vec<f64>,
    pub tau0: f64,
    /// Noise power `n0 B`.
    pub noise: f64,
    /// Interference plus noise at the anchor.
    pub interference0: f64,
    pub lambda: f64,
    pub mu: f64,
    pub upsilon: f64,
}

impl NomaRateLower {
    pub fn new(n: usize, p0: &[f64], tau0: f64, h: &[f64], n0: f64, b: f64) -> Result<Self, SurrogateError> {
        if p0.len() != h.len() || n >= h.len() {
            return Err(SurrogateError::Dimension { expected: h.len(), got: p0.len() });
        }
        let p0: Vec<f64> = p0.iter().map(|&p| anchor("p", p)).collect::<Result<_, _>>()?;
        let h: Vec<f64> = h.iter().map(|&g| constant("h", g)).collect::<Result<_, _>>()?;
        let tau0 = anchor("tau_c", tau0)?;
        let noise = constant("n0", n0)? * constant("B", b)?;
        let interference0 = noise + (n + 1..h.len()).map(|k| p0[k] * h[k]).sum::<f64>();
        let sinr = h[n] * p0[n] / interference0;
        let log = sinr.ln_1p();
        Ok(Self {
            n,
            lambda: 2.0 * tau0 * log,
            mu: tau0 / (1.0 + 1.0 / sinr),
            upsilon: tau0 * tau0 * log,
            h,
            p0,
            tau0,
            noise,
            interference0,
        })
    }

    fn interference(&self, p: &[f64]) -> f64 {
        self.noise + (self.n + 1..self.h.len()).map(|k| p[k] * self.h[k]).sum::<f64>()
    }

    pub fn value(&self, p: &[f64], tau: f64) -> Result<f64, SurrogateError> {
        if p.len() != self.h.len() {
            return Err(SurrogateError::Dimension { expected: self.h.len(), got: p.len() });
        }
        let pn = positive("p", p[self.n])?;
        let tau = positive("tau_c", tau)?;
        let ratio = self.interference(p) / self.interference0;
        Ok(self.lambda + self.mu * (2.0 - self.p0[self.n] / pn - ratio) - self.upsilon / tau)
    }

    pub fn exact(&self, p: &[f64], tau: f64) -> f64 {
        tau * (self.h[self.n] * p[self.n] / self.interference(p)).ln_1p()
    }

    /// `-coef * value(p, tau)` as a convex expression.
    pub fn negated_expr(&self, coef: f64, p: &[Slot], tau: Slot) -> Expr {
        let mut e = Expr::new()
            .constant(-coef * (self.lambda + 2.0 * self.mu - self.mu * self.noise / self.interference0))
            .reciprocal(coef * self.mu * self.p0[self.n], p[self.n].arg())
            .reciprocal(coef * self.upsilon, tau.arg());
        for k in self.n + 1..self.h.len() {
            e = add_linear(e, coef * self.mu * self.h[k] / self.interference0, p[k]);
        }
        e
    }
}

/// Any surrogate kind behind one evaluation interface; points are flat
/// coordinate slices in the order documented on each variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Surrogate {
    /// `(x, y)`.
    SqrtProductUpper(SqrtProductUpper),
    /// `(t, z)`.
    BilinearUpper(BilinearUpper),
    /// `(t, z)`.
    BilinearSquareUpper(BilinearSquareUpper),
    /// `(t, z)`.
    BilinearLower(BilinearLower),
    /// `(u, w)`.
    RatioUpper(RatioUpper),
    /// `(b, p)`.
    FdmaRateLower(FdmaRateLower),
    /// `(p_1, ..., p_N, tau)`.
    NomaRateLower(NomaRateLower),
}

impl Surrogate {
    pub fn bound(&self) -> Bound {
        match self {
            Surrogate::SqrtProductUpper(_)
            | Surrogate::BilinearUpper(_)
            | Surrogate::BilinearSquareUpper(_)
            | Surrogate::RatioUpper(_) => Bound::Upper,
            _ => Bound::Lower,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Surrogate::NomaRateLower(s) => s.h.len() + 1,
            _ => 2,
        }
    }

    /// Anchor point in evaluation coordinates.
    pub fn anchor(&self) -> Vec<f64> {
        match self {
            Surrogate::SqrtProductUpper(s) => vec![s.x0, s.y0],
            Surrogate::BilinearUpper(s) => vec![s.t0, s.z0],
            Surrogate::BilinearSquareUpper(s) => vec![s.t0, s.z0],
            Surrogate::BilinearLower(s) => vec![s.t0, s.z0],
            Surrogate::RatioUpper(s) => match s.denominator {
                Denominator::Direct => vec![s.u0, s.v0],
                Denominator::OneMinus => vec![s.u0, 1.0 - s.v0],
            },
            Surrogate::FdmaRateLower(s) => vec![s.b0, s.p0],
            Surrogate::NomaRateLower(s) => s.p0.iter().copied().chain([s.tau0]).collect(),
        }
    }

    /// Named coefficients; empty for kinds defined by their anchor alone.
    pub fn coeffs(&self) -> Vec<(&'static str, f64)> {
        match self {
            Surrogate::FdmaRateLower(s) => vec![("lambda", s.lambda), ("mu", s.mu), ("upsilon", s.upsilon)],
            Surrogate::NomaRateLower(s) => vec![("lambda", s.lambda), ("mu", s.mu), ("upsilon", s.upsilon)],
            _ => Vec::new(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), SurrogateError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(SurrogateError::Dimension { expected: self.dim(), got: x.len() })
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        self.check_dim(x)?;
        match self {
            Surrogate::SqrtProductUpper(s) => Ok(s.value(x[0], x[1])),
            Surrogate::BilinearUpper(s) => Ok(s.value(x[0], x[1])),
            Surrogate::BilinearSquareUpper(s) => Ok(s.value(x[0], x[1])),
            Surrogate::BilinearLower(s) => s.value(x[0], x[1]),
            Surrogate::RatioUpper(s) => s.value(x[0], x[1]),
            Surrogate::FdmaRateLower(s) => s.value(x[0], x[1]),
            Surrogate::NomaRateLower(s) => {
                let (p, tau) = x.split_at(s.h.len());
                s.value(p, tau[0])
            }
        }
    }

    pub fn exact(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        self.check_dim(x)?;
        Ok(match self {
            Surrogate::SqrtProductUpper(_) => SqrtProductUpper::exact(x[0], x[1]),
            Surrogate::BilinearUpper(_) => BilinearUpper::exact(x[0], x[1]),
            Surrogate::BilinearSquareUpper(_) => BilinearSquareUpper::exact(x[0], x[1]),
            Surrogate::BilinearLower(_) => BilinearLower::exact(x[0], x[1]),
            Surrogate::RatioUpper(s) => s.exact(x[0], x[1]),
            Surrogate::FdmaRateLower(s) => s.exact(x[0], x[1]),
            Surrogate::NomaRateLower(s) => {
                let (p, tau) = x.split_at(s.h.len());
                s.exact(p, tau[0])
            }
        })
    }

    /// The surrogate as a solver expression over variables `0..dim()`, negated
    /// for lower kinds so the expression is convex either way.
    pub fn convex_expr(&self) -> Expr {
        let v = Slot::Var;
        match self {
            Surrogate::SqrtProductUpper(s) => s.expr(1.0, v(0), v(1)),
            Surrogate::BilinearUpper(s) => s.expr(1.0, v(0), v(1)),
            Surrogate::BilinearSquareUpper(s) => s.expr(1.0, v(0), v(1)),
            Surrogate::BilinearLower(s) => s.negated_expr(1.0, v(0), v(1)),
            Surrogate::RatioUpper(s) => s.expr(1.0, v(0), v(1)),
            Surrogate::FdmaRateLower(s) => s.negated_expr(1.0, v(0), v(1)),
            Surrogate::NomaRateLower(s) => {
                let p: Vec<Slot> = (0..s.h.len()).map(v).collect();
                s.negated_expr(1.0, &p, v(s.h.len()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn sqrt_product_examples() {
        assert!(close(SqrtProductUpper::new(1.0, 1.0).unwrap().value(1.0, 1.0), 1.0));
        assert!(close(SqrtProductUpper::new(1.0, 1.0).unwrap().value(4.0, 1.0), 2.5));
        assert!(close(SqrtProductUpper::new(4.0, 9.0).unwrap().value(4.0, 9.0), 6.0));
        assert!(SqrtProductUpper::new(0.0, 1.0).is_err());
    }

    #[test]
    fn bilinear_examples() {
        let s = BilinearUpper::new(1.0, 1.0).unwrap();
        assert!(close(s.value(1.0, 1.0), 1.0));
        assert!(close(s.value(2.0, 0.5), 2.125));
        assert!(close(BilinearSquareUpper::new(1.0, 1.0).unwrap().value(1.0, 2.0), 8.5));
        let l = BilinearLower::new(1.0, 1.0).unwrap();
        assert!(close(l.value(1.0, 1.0).unwrap(), 1.0));
        assert!(close(l.value(4.0, 2.0).unwrap(), 3.5));
        assert!(close(l.value(0.25, 1.0).unwrap(), 0.0));
        assert!(l.value(1.0, 0.0).is_err());
        assert!(BilinearLower::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn ratio_examples() {
        let s = RatioUpper::new(1.0, 1.0, Denominator::Direct).unwrap();
        assert!(close(s.value(1.0, 1.0).unwrap(), 1.0));
        assert!(close(s.value(2.0, 1.0).unwrap(), 2.25));
        assert!(s.value(1.0, 0.0).is_err());
        let a = 7.5;
        let j = RatioUpper::new(1.0, 0.5, Denominator::OneMinus).unwrap();
        assert!(close(a * j.value(1.0, 0.5).unwrap(), a * 1.0 / (1.0 - 0.5)));
        assert!(j.value(1.0, 1.0).is_err());
        assert!(RatioUpper::new(1.0, 1.0, Denominator::OneMinus).is_err());
    }

    #[test]
    fn fdma_rate_examples() {
        let s = FdmaRateLower::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!(close(s.lambda, 2.0 * ln2));
        assert!(close(s.mu, 0.5));
        assert!(close(s.upsilon, ln2));
        assert!(close(s.value(1.0, 2.0).unwrap(), ln2 + 0.25));
        assert!(s.value(1.0, 2.0).unwrap() <= 3f64.ln());
        assert!(close(s.value(1.0, 1.0).unwrap(), s.exact(1.0, 1.0)));
    }

    #[test]
    fn noma_single_user_matches_fdma_shape() {
        let (p, tau, h, n0, b) = (0.01, 0.02, 1e-3, 1e-14, 5e5);
        let s = NomaRateLower::new(0, &[p], tau, &[h], n0, b).unwrap();
        let exact = tau * (h * p / (n0 * b)).ln_1p();
        assert!(close(s.value(&[p], tau).unwrap(), exact));
        // same coefficients as the FDMA bound with (b, p) -> (tau, p) at fixed bandwidth
        let f = FdmaRateLower::new(tau, p, h / (n0 * b) * tau, 1.0).unwrap();
        assert!(close(s.lambda, f.lambda) && close(s.mu, f.mu) && close(s.upsilon, f.upsilon));
    }

    #[test]
    fn expressions_agree_with_values() {
        let kinds = [
            Surrogate::SqrtProductUpper(SqrtProductUpper::new(2.0, 3.0).unwrap()),
            Surrogate::BilinearUpper(BilinearUpper::new(2.0, 3.0).unwrap()),
            Surrogate::BilinearSquareUpper(BilinearSquareUpper::new(2.0, 3.0).unwrap()),
            Surrogate::BilinearLower(BilinearLower::new(2.0, 3.0).unwrap()),
            Surrogate::RatioUpper(RatioUpper::new(2.0, 0.3, Denominator::OneMinus).unwrap()),
            Surrogate::FdmaRateLower(FdmaRateLower::new(2.0, 3.0, 0.5, 0.1).unwrap()),
        ];
        for s in &kinds {
            let x = [1.7, 0.4];
            let sign = if s.bound() == Bound::Upper { 1.0 } else { -1.0 };
            let v = s.evaluate(&x).unwrap();
            assert!(close(sign * s.convex_expr().value(&x), v), "{s:?}");
            assert!(s.convex_expr().check_convex(2).is_ok());
        }
        let n = Surrogate::NomaRateLower(NomaRateLower::new(1, &[0.3, 0.2, 0.4], 2.0, &[3.0, 2.0, 1.0], 0.1, 1.0).unwrap());
        let x = [0.1, 0.5, 0.2, 1.5];
        assert!(close(-n.convex_expr().value(&x), n.evaluate(&x).unwrap()));
    }

    #[test]
    fn tiny_anchors_are_floored() {
        let s = BilinearUpper::new(1e-20, 1.0).unwrap();
        assert_eq!(s.t0, ANCHOR_FLOOR);
    }
}
