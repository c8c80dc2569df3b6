//! KKT residual with least-squares multipliers.

use crate::program::ConvexProgram;
use nalgebra::{DMatrix, DVector};

/// Normalized distance `-g/|grad g|` below which a row counts as active.
pub const ACTIVE_DISTANCE: f64 = 1e-3;

/// One inequality row evaluated at a point, in scaled coordinates.
pub(crate) struct Row {
    pub value: f64,
    pub grad: DVector<f64>,
}

/// Program rows followed by finite box bounds, all as `g(y) <= 0` in `y = x / scale`.
pub(crate) fn rows_at(program: &ConvexProgram, x: &[f64]) -> (DVector<f64>, Vec<Row>) {
    let n = program.n_vars();
    let scale: Vec<f64> = program.variables.iter().map(|v| v.scale).collect();
    let y: Vec<f64> = x.iter().zip(&scale).map(|(a, s)| a / s).collect();
    let objective_grad = program.objective.rescaled(&scale).gradient(&y);
    let mut rows = Vec::with_capacity(program.constraints.len() + 2 * n);
    for c in &program.constraints {
        let e = c.expr.rescaled(&scale);
        rows.push(Row { value: e.value(&y), grad: e.gradient(&y) });
    }
    for (j, v) in program.variables.iter().enumerate() {
        if v.lower.is_finite() {
            let mut g = DVector::zeros(n);
            g[j] = -1.0;
            rows.push(Row { value: v.lower / v.scale - y[j], grad: g });
        }
        if v.upper.is_finite() {
            let mut g = DVector::zeros(n);
            g[j] = 1.0;
            rows.push(Row { value: y[j] - v.upper / v.scale, grad: g });
        }
    }
    (objective_grad, rows)
}

/// Stationarity, complementary-slackness and primal-infeasibility residual at `x`.
///
/// Multipliers are fitted by nonnegative least squares over the rows whose
/// normalized distance to the boundary is at most [`ACTIVE_DISTANCE`]; rows
/// farther away carry a zero multiplier. The residual is measured in the
/// program's scaled coordinates and is invariant to row scaling.
pub fn kkt_residual(program: &ConvexProgram, x: &[f64]) -> f64 {
    let (grad_f, rows) = rows_at(program, x);
    kkt_from_rows(&grad_f, &rows)
}

pub(crate) fn kkt_from_rows(grad_f: &DVector<f64>, rows: &[Row]) -> f64 {
    let mut columns = Vec::new();
    let mut distances = Vec::new();
    let mut infeasibility = 0.0;
    for r in rows {
        let norm = r.grad.norm();
        if norm == 0.0 {
            infeasibility += r.value.max(0.0).powi(2);
            continue;
        }
        let d = r.value / norm;
        infeasibility += d.max(0.0).powi(2);
        if d >= -ACTIVE_DISTANCE {
            columns.push(&r.grad / norm);
            distances.push(d);
        }
    }
    if columns.is_empty() {
        return (grad_f.norm_squared() + infeasibility).sqrt();
    }
    let a = DMatrix::from_columns(&columns);
    let target = -grad_f;
    let lambda = nnls(&a, &target);
    let stationarity = (&a * &lambda - &target).norm_squared();
    let slackness: f64 = lambda.iter().zip(&distances).map(|(l, d)| (l * d).powi(2)).sum();
    (stationarity + slackness + infeasibility).sqrt()
}

/// Lawson-Hanson nonnegative least squares: `min |A x - b|, x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = a.ncols();
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let tol = 1e-14 * a.norm().max(1.0) * b.norm().max(1.0);
    for _outer in 0..3 * m + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..m).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        for _inner in 0..3 * m + 10 {
            let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let s_sub = match sub.clone().svd(true, true).solve(b, 1e-14) {
                Ok(s) => s,
                Err(_) => return x,
            };
            if s_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = s_sub[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if s_sub[k] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - s_sub[k]));
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (s_sub[k] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Arg, Expr};

    fn square_above_one(with_box: bool) -> ConvexProgram {
        let mut p = ConvexProgram::new();
        let lower = if with_box { 1.0 } else { f64::NEG_INFINITY };
        let x = p.add_variable("x", lower, f64::INFINITY, 1.0);
        p.set_objective(Expr::new().square(1.0, Arg::var(x)));
        if !with_box {
            p.add_constraint("x >= 1", Expr::new().constant(1.0).linear(x, -1.0));
        }
        p
    }

    #[test]
    fn unconstrained_minimum_has_zero_residual() {
        let mut p = ConvexProgram::new();
        let x = p.add_variable("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        p.set_objective(Expr::new().square(1.0, Arg::var(x)));
        assert_eq!(kkt_residual(&p, &[0.0]), 0.0);
    }

    #[test]
    fn inactive_constraint_leaves_full_gradient() {
        for with_box in [false, true] {
            let p = square_above_one(with_box);
            assert!((kkt_residual(&p, &[2.0]) - 4.0).abs() < 1e-12);
            assert!(kkt_residual(&p, &[1.0]) < 1e-12);
        }
    }

    #[test]
    fn infeasible_point_is_penalized() {
        let p = square_above_one(false);
        // x = 0.5: lambda = 1 cancels the gradient; infeasibility 0.5 and slackness 1 * 0.5 remain
        assert!((kkt_residual(&p, &[0.5]) - (0.25f64 + 0.25).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn nnls_clips_negative_components() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -3.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
    }
}
