//! Randomized checks of the surrogate contracts: tangency at the anchor,
//! bound direction and curvature along random segments.

use crate::surrogates::{
    Bound, BilinearLower, BilinearSquareUpper, BilinearUpper, Denominator, FdmaRateLower, NomaRateLower, RatioUpper,
    SqrtProductUpper, Surrogate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Relative slack allowed for roundoff in bound and curvature checks.
pub const ROUNDOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    SqrtProductUpper,
    BilinearUpper,
    BilinearSquareUpper,
    BilinearLower,
    RatioUpper,
    RatioUpperOneMinus,
    FdmaRateLower,
    NomaRateLower,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::SqrtProductUpper,
        Kind::BilinearUpper,
        Kind::BilinearSquareUpper,
        Kind::BilinearLower,
        Kind::RatioUpper,
        Kind::RatioUpperOneMinus,
        Kind::FdmaRateLower,
        Kind::NomaRateLower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::SqrtProductUpper => "sqrt-product-upper",
            Kind::BilinearUpper => "bilinear-upper",
            Kind::BilinearSquareUpper => "bilinear-square-upper",
            Kind::BilinearLower => "bilinear-lower",
            Kind::RatioUpper => "ratio-upper",
            Kind::RatioUpperOneMinus => "ratio-upper-one-minus",
            Kind::FdmaRateLower => "fdma-rate-lower",
            Kind::NomaRateLower => "noma-rate-lower",
        }
    }
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// A surrogate of `kind` at a random anchor drawn over several decades.
pub fn random_surrogate(kind: Kind, rng: &mut impl Rng) -> Surrogate {
    let mut g = |lo, hi| log_uniform(rng, lo, hi);
    let built = match kind {
        Kind::SqrtProductUpper => SqrtProductUpper::new(g(1e-3, 1e3), g(1e-3, 1e3)).map(Surrogate::SqrtProductUpper),
        Kind::BilinearUpper => BilinearUpper::new(g(1e-3, 1e3), g(1e-3, 1e3)).map(Surrogate::BilinearUpper),
        Kind::BilinearSquareUpper => {
            BilinearSquareUpper::new(g(1e-3, 1e3), g(1e-3, 1e3)).map(Surrogate::BilinearSquareUpper)
        }
        Kind::BilinearLower => BilinearLower::new(g(1e-3, 1e3), g(1e-3, 1e3)).map(Surrogate::BilinearLower),
        Kind::RatioUpper => {
            RatioUpper::new(g(1e-3, 1e3), g(1e-3, 1e3), Denominator::Direct).map(Surrogate::RatioUpper)
        }
        Kind::RatioUpperOneMinus => {
            let w0 = rng.random_range(0.01..0.99);
            RatioUpper::new(log_uniform(rng, 1e-3, 1e3), w0, Denominator::OneMinus).map(Surrogate::RatioUpper)
        }
        Kind::FdmaRateLower => {
            FdmaRateLower::new(g(1e3, 1e6), g(1e-4, 1e-1), g(1e-6, 1e-3), g(1e-15, 1e-13)).map(Surrogate::FdmaRateLower)
        }
        Kind::NomaRateLower => {
            let users = rng.random_range(1..=5usize);
            let p0: Vec<f64> = (0..users).map(|_| log_uniform(rng, 1e-4, 1e-1)).collect();
            let mut h: Vec<f64> = (0..users).map(|_| log_uniform(rng, 1e-6, 1e-3)).collect();
            h.sort_by(|a, b| b.total_cmp(a));
            let n = rng.random_range(0..users);
            let tau0 = log_uniform(rng, 1e-3, 1.0);
            let n0 = log_uniform(rng, 1e-15, 1e-13);
            let b = log_uniform(rng, 1e5, 1e7);
            NomaRateLower::new(n, &p0, tau0, &h, n0, b).map(Surrogate::NomaRateLower)
        }
    };
    built.expect("random anchors are positive")
}

/// A random point in the surrogate's domain, spread around its anchor.
pub fn random_point(s: &Surrogate, rng: &mut impl Rng) -> Vec<f64> {
    let anchor = s.anchor();
    match s {
        Surrogate::RatioUpper(r) if r.denominator == Denominator::OneMinus => {
            vec![anchor[0] * rng.random_range(-3.0f64..3.0).exp(), rng.random_range(1e-3..0.999)]
        }
        _ => anchor.iter().map(|a| a * rng.random_range(-3.0f64..3.0).exp()).collect(),
    }
}

/// Signed amount by which `s` breaks its bound at `x`, relative to the
/// magnitudes involved; positive means violated.
pub fn bound_gap(s: &Surrogate, x: &[f64]) -> f64 {
    let v = s.evaluate(x).expect("point in domain");
    let e = s.exact(x).expect("point in domain");
    let scale = v.abs().max(e.abs()).max(f64::MIN_POSITIVE);
    match s.bound() {
        Bound::Upper => (e - v) / scale,
        Bound::Lower => (v - e) / scale,
    }
}

/// Signed midpoint-curvature violation on the segment `x`–`y`.
pub fn curvature_gap(s: &Surrogate, x: &[f64], y: &[f64]) -> f64 {
    let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let fx = s.evaluate(x).expect("point in domain");
    let fy = s.evaluate(y).expect("point in domain");
    let fm = s.evaluate(&mid).expect("point in domain");
    let chord = 0.5 * (fx + fy);
    let scale = fx.abs().max(fy.abs()).max(fm.abs()).max(f64::MIN_POSITIVE);
    match s.bound() {
        Bound::Upper => (fm - chord) / scale,
        Bound::Lower => (chord - fm) / scale,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub kind: Kind,
    pub anchors: usize,
    pub points_per_anchor: usize,
    /// Largest `|surrogate - exact| / max(1, |exact|)` at an anchor.
    pub max_tangency_error: f64,
    /// Largest relative [`bound_gap`] seen.
    pub max_bound_gap: f64,
    pub bound_violations: usize,
    pub max_curvature_gap: f64,
    pub curvature_violations: usize,
}

impl ContractReport {
    pub fn holds(&self, tangency_tol: f64) -> bool {
        self.max_tangency_error <= tangency_tol && self.bound_violations == 0 && self.curvature_violations == 0
    }
}

/// Checks `kind` on `anchors` random anchors with `points` evaluation points
/// and one curvature segment per point.
pub fn check_contracts(kind: Kind, anchors: usize, points: usize, seed: u64) -> ContractReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = ContractReport {
        kind,
        anchors,
        points_per_anchor: points,
        max_tangency_error: 0.0,
        max_bound_gap: f64::NEG_INFINITY,
        bound_violations: 0,
        max_curvature_gap: f64::NEG_INFINITY,
        curvature_violations: 0,
    };
    for _ in 0..anchors {
        let s = random_surrogate(kind, &mut rng);
        let a = s.anchor();
        let exact = s.exact(&a).expect("anchor in domain");
        let err = (s.evaluate(&a).expect("anchor in domain") - exact).abs() / exact.abs().max(1.0);
        report.max_tangency_error = report.max_tangency_error.max(err);
        for _ in 0..points {
            let x = random_point(&s, &mut rng);
            let gap = bound_gap(&s, &x);
            report.max_bound_gap = report.max_bound_gap.max(gap);
            if gap > ROUNDOFF {
                report.bound_violations += 1;
            }
            let y = random_point(&s, &mut rng);
            let gap = curvature_gap(&s, &x, &y);
            report.max_curvature_gap = report.max_curvature_gap.max(gap);
            if gap > ROUNDOFF {
                report.curvature_violations += 1;
            }
        }
    }
    report
}
