//! Small programs with known solutions, shared by tests and the acceptance
//! suite.

use crate::{Arg, ConvexProgram, Expr};

/// Minimize `x^2` subject to `x >= 1`; the optimum is `x = 1`, value 1.
pub fn square_above_one() -> ConvexProgram {
    let mut p = ConvexProgram::new();
    let x = p.add_variable("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    p.set_objective(Expr::new().square(1.0, Arg::var(x)));
    p.add_constraint("x >= 1", Expr::new().constant(1.0).linear(x, -1.0));
    p
}

/// One-device accuracy surrogate over `(eta, tau_l)` with a slack energy row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyCase {
    pub a: f64,
    pub iota: f64,
    pub tau_bar: f64,
    pub eta_bar: f64,
    /// Local time is `local_coef * ln(1/eta)`.
    pub local_coef: f64,
}

impl Default for AccuracyCase {
    fn default() -> Self {
        Self { a: 24.0 * 1000f64.ln(), iota: 3.0, tau_bar: 0.05, eta_bar: 0.5, local_coef: 0.4 }
    }
}

impl AccuracyCase {
    pub fn program(&self) -> ConvexProgram {
        let mut p = ConvexProgram::new();
        let eta = p.add_variable("eta", 1e-4, 1.0 - 1e-4, 0.5);
        let tau = p.add_variable("tau_l", 0.0, f64::INFINITY, self.tau_bar);
        let v_bar = 1.0 - self.eta_bar;
        p.set_objective(Expr::new().reciprocal(self.a * self.iota, Arg::one_minus(eta)).quotient_square(
            self.a * self.tau_bar / (4.0 * v_bar),
            Arg::var(tau),
            self.tau_bar,
            Arg::one_minus(eta),
            v_bar,
        ));
        p.add_constraint("energy", Expr::new().neg_log(1e-3, Arg::var(eta)).constant(-1.0));
        p.add_constraint("local time", Expr::new().neg_log(self.local_coef, Arg::var(eta)).linear(tau, -1.0));
        p
    }

    /// A strictly feasible start.
    pub fn start(&self) -> [f64; 2] {
        [self.eta_bar, self.local_coef * (1.0 / self.eta_bar).ln() * 1.01]
    }

    /// Surrogate objective at `(eta, tau_l)`.
    pub fn objective(&self, eta: f64, tau: f64) -> f64 {
        let v = 1.0 - eta;
        let v_bar = 1.0 - self.eta_bar;
        self.a * self.iota / v + self.a * self.tau_bar / (4.0 * v_bar) * (tau / self.tau_bar + v_bar / v).powi(2)
    }

    /// Best objective over a 10^4-point grid in `eta`, with `tau_l` at its
    /// lower bound (the objective grows with `tau_l`).
    pub fn grid_optimum(&self) -> f64 {
        (0..10_000)
            .map(|i| 1e-4 + (1.0 - 2e-4) * i as f64 / 9_999.0)
            .map(|eta| self.objective(eta, self.local_coef * (1.0 / eta).ln()))
            .fold(f64::INFINITY, f64::min)
    }
}
