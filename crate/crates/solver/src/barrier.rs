//! Primal log-barrier method with a phase-I feasibility pass.
//!
//! All work happens in scaled coordinates `y = x / scale` with every
//! constraint row divided by its magnitude at the start point. The barrier
//! is centered by damped Newton steps with a backtracking line search that
//! never leaves the strict interior, so every returned point is strictly
//! feasible whenever the status is not `Infeasible`.

use crate::expr::Expr;
use crate::kkt::{kkt_from_rows, Row};
use crate::program::ConvexProgram;
use crate::SolverError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target for both the KKT residual and the normalized duality gap.
    pub tol: f64,
    /// Barrier weight multiplier between centering passes.
    pub barrier_growth: f64,
    /// Newton steps allowed per centering pass.
    pub max_newton: usize,
    /// Centering passes allowed (phase I and phase II each).
    pub max_outer: usize,
    /// Largest barrier weight before giving up on the KKT target.
    pub max_barrier_weight: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, barrier_growth: 20.0, max_newton: 200, max_outer: 40, max_barrier_weight: 1e16 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Row that stayed most violated at the end of phase I.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    pub row: String,
    /// Violation normalized by the row magnitude at the start point.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub point: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    /// Newton steps over both phases.
    pub iterations: usize,
    pub wall_time_s: f64,
    pub certificate: Option<InfeasibilityCertificate>,
}

/// Internal barrier problem: scale-1 variables, rows `g(y) <= 0`.
struct Barrier {
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Expr,
    rows: Vec<Expr>,
    supports: Vec<Vec<usize>>,
}

enum Centering {
    Converged,
    Stalled,
}

impl Barrier {
    fn new(lower: Vec<f64>, upper: Vec<f64>, objective: Expr, rows: Vec<Expr>) -> Self {
        let supports = rows.iter().map(|r| r.support()).collect();
        Self { lower, upper, objective, rows, supports }
    }

    fn n(&self) -> usize {
        self.lower.len()
    }

    fn barrier_count(&self) -> usize {
        self.rows.len()
            + self.lower.iter().filter(|v| v.is_finite()).count()
            + self.upper.iter().filter(|v| v.is_finite()).count()
    }

    fn strictly_feasible(&self, y: &[f64]) -> bool {
        for j in 0..self.n() {
            if !(y[j] > self.lower[j] && y[j] < self.upper[j]) {
                return false;
            }
        }
        if !self.objective.in_domain(y) {
            return false;
        }
        self.rows.iter().all(|r| r.in_domain(y) && r.value(y) < 0.0)
    }

    /// `t f(y) + phi(y)`, or `None` outside the strict interior.
    fn value(&self, t: f64, y: &[f64]) -> Option<f64> {
        if !self.strictly_feasible(y) {
            return None;
        }
        let mut v = t * self.objective.value(y);
        for r in &self.rows {
            v -= (-r.value(y)).ln();
        }
        for j in 0..self.n() {
            if self.lower[j].is_finite() {
                v -= (y[j] - self.lower[j]).ln();
            }
            if self.upper[j].is_finite() {
                v -= (self.upper[j] - y[j]).ln();
            }
        }
        v.is_finite().then_some(v)
    }

    fn grad_hess(&self, t: f64, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        self.objective.accumulate(y, t, &mut g, Some(&mut h));
        let mut row_grad = DVector::zeros(n);
        let mut scratch = DVector::zeros(n);
        for (r, support) in self.rows.iter().zip(&self.supports) {
            let slack = -r.value(y);
            for &j in support {
                row_grad[j] = 0.0;
            }
            r.accumulate(y, 1.0, &mut row_grad, None);
            for &j in support {
                g[j] += row_grad[j] / slack;
            }
            let inv2 = 1.0 / (slack * slack);
            for &i in support {
                for &k in support {
                    h[(i, k)] += row_grad[i] * row_grad[k] * inv2;
                }
            }
            // curvature of the row itself, weighted by 1/slack
            r.accumulate(y, 1.0 / slack, &mut scratch, Some(&mut h));
        }
        for j in 0..n {
            if self.lower[j].is_finite() {
                let d = y[j] - self.lower[j];
                g[j] -= 1.0 / d;
                h[(j, j)] += 1.0 / (d * d);
            }
            if self.upper[j].is_finite() {
                let d = self.upper[j] - y[j];
                g[j] += 1.0 / d;
                h[(j, j)] += 1.0 / (d * d);
            }
        }
        (g, h)
    }

    /// Damped Newton on `t f + phi`; `stop` ends early when it returns true.
    fn center(
        &self,
        t: f64,
        y: &mut Vec<f64>,
        max_newton: usize,
        steps: &mut usize,
        stop: &dyn Fn(&[f64]) -> bool,
    ) -> Centering {
        let mut fy = match self.value(t, y) {
            Some(v) => v,
            None => return Centering::Stalled,
        };
        for _ in 0..max_newton {
            if stop(y) {
                return Centering::Converged;
            }
            let (g, h) = self.grad_hess(t, y);
            let dir = match newton_direction(&h, &g) {
                Some(d) => d,
                None => return Centering::Stalled,
            };
            let slope = g.dot(&dir);
            let decrement = -slope;
            if decrement <= 1e-20 {
                return Centering::Converged;
            }
            *steps += 1;
            if decrement <= 1e-2 {
                // Near the centre function values stop resolving progress, so
                // full steps are judged by the gradient norm instead.
                let trial: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| a + d).collect();
                if let Some(ft) = self.value(t, &trial) {
                    let (gt, _) = self.grad_hess(t, &trial);
                    if gt.norm() < g.norm() {
                        *y = trial;
                        fy = ft;
                        continue;
                    }
                }
                if decrement <= 1e-10 {
                    return Centering::Converged;
                }
            }
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-16 {
                let trial: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
                if let Some(ft) = self.value(t, &trial) {
                    if ft <= fy + 0.25 * step * slope {
                        if ft >= fy {
                            // no representable progress left at this weight
                            return Centering::Converged;
                        }
                        *y = trial;
                        fy = ft;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                // Line search lost to roundoff; a small decrement still counts as centered.
                return if decrement <= 1e-6 { Centering::Converged } else { Centering::Stalled };
            }
        }
        Centering::Stalled
    }

    fn kkt_rows(&self, y: &[f64]) -> (DVector<f64>, Vec<Row>) {
        let n = self.n();
        let mut rows = Vec::with_capacity(self.rows.len() + 2 * n);
        for r in &self.rows {
            rows.push(Row { value: r.value(y), grad: r.gradient(y) });
        }
        for j in 0..n {
            if self.lower[j].is_finite() {
                let mut g = DVector::zeros(n);
                g[j] = -1.0;
                rows.push(Row { value: self.lower[j] - y[j], grad: g });
            }
            if self.upper[j].is_finite() {
                let mut g = DVector::zeros(n);
                g[j] = 1.0;
                rows.push(Row { value: y[j] - self.upper[j], grad: g });
            }
        }
        (self.objective.gradient(y), rows)
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let diag_scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut m = h.clone();
        if shift > 0.0 {
            for i in 0..n {
                m[(i, i)] += shift;
            }
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        shift = if shift == 0.0 { 1e-12 * diag_scale } else { shift * 100.0 };
    }
    None
}

fn nudge_into_box(y: &mut [f64], lower: &[f64], upper: &[f64]) {
    for j in 0..y.len() {
        let (lo, hi) = (lower[j], upper[j]);
        let width = hi - lo;
        let margin = (1e-6 * y[j].abs().max(1.0)).min(if width.is_finite() { 0.25 * width } else { f64::INFINITY });
        if y[j] <= lo + margin * 1e-3 {
            y[j] = lo + margin;
        }
        if y[j] >= hi - margin * 1e-3 {
            y[j] = hi - margin;
        }
    }
}

/// Solves `program` from `start`; see [`SolverOptions`] for the stopping rule.
///
/// `start` must lie in the atom domains after being pushed inside the box;
/// it need not satisfy the constraint rows.
pub fn solve(program: &ConvexProgram, start: &[f64], opts: &SolverOptions) -> Result<SolverResult, SolverError> {
    let clock = Instant::now();
    program.validate()?;
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidOptions(format!("tol must be positive, got {}", opts.tol)));
    }
    let n = program.n_vars();
    if start.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: start.len() });
    }
    let scale: Vec<f64> = program.variables.iter().map(|v| v.scale).collect();
    let lower: Vec<f64> = program.variables.iter().map(|v| v.lower / v.scale).collect();
    let upper: Vec<f64> = program.variables.iter().map(|v| v.upper / v.scale).collect();
    let mut y: Vec<f64> = start.iter().zip(&scale).map(|(x, s)| x / s).collect();
    nudge_into_box(&mut y, &lower, &upper);

    let objective = program.objective.rescaled(&scale);
    let mut rows = Vec::with_capacity(program.constraints.len());
    if !objective.in_domain(&y) {
        return Err(SolverError::StartOutsideDomain("objective".into()));
    }
    for c in &program.constraints {
        let e = c.expr.rescaled(&scale);
        if !e.in_domain(&y) {
            return Err(SolverError::StartOutsideDomain(c.label.clone()));
        }
        let magnitude = e.magnitude(&y).max(1e-300);
        rows.push(e.scaled(1.0 / magnitude));
    }

    let mut steps = 0usize;
    let worst = rows.iter().map(|r| r.value(&y)).fold(f64::NEG_INFINITY, f64::max);
    // starts that hug a row are pushed inward first; centering from there is slow
    if worst >= -1e-4 {
        match phase_one(&lower, &upper, &rows, &mut y, opts, &mut steps) {
            Ok(()) => {}
            Err((row, violation)) => {
                let x: Vec<f64> = y.iter().zip(&scale).map(|(a, s)| a * s).collect();
                return Ok(SolverResult {
                    objective: program.objective.value(&x),
                    point: x,
                    status: SolveStatus::Infeasible,
                    kkt_residual: f64::INFINITY,
                    iterations: steps,
                    wall_time_s: clock.elapsed().as_secs_f64(),
                    certificate: Some(InfeasibilityCertificate {
                        row: program.constraints[row].label.clone(),
                        violation,
                    }),
                });
            }
        }
    }

    let barrier = Barrier::new(lower, upper, objective, rows);
    let m = barrier.barrier_count().max(1) as f64;
    let mut t = initial_weight(&barrier, &y);
    let mut status = SolveStatus::MaxIter;
    let mut kkt = f64::INFINITY;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..opts.max_outer {
        let centering = barrier.center(t, &mut y, opts.max_newton, &mut steps, &|_| false);
        let f = barrier.objective.value(&y);
        let gap = m / t;
        if gap <= opts.tol * f.abs().max(1.0) {
            let (gf, kr) = barrier.kkt_rows(&y);
            let r = kkt_from_rows(&gf, &kr);
            if r < kkt {
                kkt = r;
                best = Some((r, y.clone()));
            }
            if r <= opts.tol {
                status = SolveStatus::Optimal;
                break;
            }
        }
        if matches!(centering, Centering::Stalled) && gap <= opts.tol.sqrt() {
            break;
        }
        t *= opts.barrier_growth;
        if t > opts.max_barrier_weight {
            break;
        }
    }
    if status != SolveStatus::Optimal {
        if let Some((r, yb)) = best {
            kkt = r;
            y = yb;
        } else {
            let (gf, kr) = barrier.kkt_rows(&y);
            kkt = kkt_from_rows(&gf, &kr);
        }
    }
    let x: Vec<f64> = y.iter().zip(&scale).map(|(a, s)| a * s).collect();
    Ok(SolverResult {
        objective: program.objective.value(&x),
        point: x,
        status,
        kkt_residual: kkt,
        iterations: steps,
        wall_time_s: clock.elapsed().as_secs_f64(),
        certificate: None,
    })
}

/// Barrier weight that best balances objective and barrier gradients at `y`.
fn initial_weight(b: &Barrier, y: &[f64]) -> f64 {
    let (g_phi, _) = b.grad_hess(0.0, y);
    let g_f = b.objective.gradient(y);
    let nf = g_f.norm_squared();
    let m = b.barrier_count().max(1) as f64;
    // a weight much above m / |f| makes damped Newton crawl when the start
    // is far from the central path
    let cap = (m / b.objective.value(y).abs()).min(1e3 * m);
    let t = if nf > 0.0 { -g_f.dot(&g_phi) / nf } else { 1.0 };
    if t.is_finite() && t > 0.0 {
        t.clamp(1e-3, cap.max(1e-3))
    } else {
        m / b.objective.value(y).abs().max(1.0)
    }
}

/// Minimizes a slack `s` with rows `g(y) <= s`, stopping once every row is
/// comfortably negative. Returns the most violated row on failure.
fn phase_one(
    lower: &[f64],
    upper: &[f64],
    rows: &[Expr],
    y: &mut [f64],
    opts: &SolverOptions,
    steps: &mut usize,
) -> Result<(), (usize, f64)> {
    let n = y.len();
    let s_index = n;
    let worst = rows.iter().map(|r| r.value(y)).fold(f64::NEG_INFINITY, f64::max);
    // Open directions get a temporary box around the start; otherwise the
    // log barrier alone can run a free variable off to infinity.
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    for j in 0..n {
        let reach = 10.0 * y[j].abs().max(1.0);
        if !lo[j].is_finite() {
            lo[j] = y[j] - reach;
        }
        if !hi[j].is_finite() {
            hi[j] = y[j] + reach;
        }
    }
    lo.push(-1.0);
    hi.push(f64::INFINITY);
    let shifted: Vec<Expr> = rows.iter().map(|r| r.clone().linear(s_index, -1.0)).collect();
    let barrier = Barrier::new(lo, hi, Expr::new().linear(s_index, 1.0), shifted);
    let mut z = y.to_vec();
    z.push(worst.max(-0.5) + 1.0);
    let original = |z: &[f64]| rows.iter().map(|r| r.value(&z[..n])).fold(f64::NEG_INFINITY, f64::max);
    let deep_enough = |z: &[f64]| original(z) <= -1e-3;
    let m = barrier.barrier_count() as f64;
    let mut t = initial_weight(&barrier, &z);
    for _ in 0..opts.max_outer {
        barrier.center(t, &mut z, opts.max_newton, steps, &deep_enough);
        if original(&z) < 0.0 && (deep_enough(&z) || m / t < 1e-10) {
            y.copy_from_slice(&z[..n]);
            return Ok(());
        }
        if m / t < 1e-12 {
            break;
        }
        t *= opts.barrier_growth;
    }
    let (row, violation) = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.value(&z[..n])))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    y.copy_from_slice(&z[..n]);
    if violation < 0.0 {
        return Ok(());
    }
    Err((row, violation))
}
