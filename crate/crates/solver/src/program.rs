use crate::expr::Expr;
use crate::SolverError;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    /// May be `-inf`.
    pub lower: f64,
    /// May be `+inf`.
    pub upper: f64,
    /// Typical magnitude; the solver works on `x / scale`.
    pub scale: f64,
}

/// One row `expr <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub expr: Expr,
    pub label: String,
}

/// Minimize a convex objective subject to convex `<= 0` rows and box bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvexProgram {
    pub variables: Vec<Variable>,
    pub objective: Expr,
    pub constraints: Vec<Constraint>,
}

impl ConvexProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64, scale: f64) -> usize {
        self.variables.push(Variable { name: name.into(), lower, upper, scale });
        self.variables.len() - 1
    }

    pub fn set_objective(&mut self, objective: Expr) {
        self.objective = objective;
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, expr: Expr) {
        self.constraints.push(Constraint { expr, label: label.into() });
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.n_vars();
        if n == 0 {
            return Err(SolverError::InvalidProgram("program has no variables".into()));
        }
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower >= v.upper {
                return Err(SolverError::InvalidProgram(format!(
                    "variable {} has empty box [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if !(v.scale > 0.0 && v.scale.is_finite()) {
                return Err(SolverError::InvalidProgram(format!("variable {} has scale {}", v.name, v.scale)));
            }
        }
        self.objective
            .check_convex(n)
            .map_err(|t| SolverError::NonConvex { row: "objective".into(), term: t })?;
        for c in &self.constraints {
            c.expr.check_convex(n).map_err(|t| SolverError::NonConvex { row: c.label.clone(), term: t })?;
        }
        Ok(())
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        self.variables.iter().zip(x).all(|(v, &xi)| xi >= v.lower && xi <= v.upper)
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.objective.in_domain(x) && self.constraints.iter().all(|c| c.expr.in_domain(x))
    }

    /// Largest constraint value (positive means violated); box respected separately.
    pub fn max_violation(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.expr.value(x)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Text dump for debugging.
    pub fn dump(&self) -> String {
        let names = |j: usize| self.variables.get(j).map_or_else(|| format!("x{j}"), |v| v.name.clone());
        let mut s = String::new();
        let _ = writeln!(s, "variables:");
        for v in &self.variables {
            let _ = writeln!(s, "  {} in [{}, {}] (scale {})", v.name, v.lower, v.upper, v.scale);
        }
        let _ = writeln!(s, "minimize:\n  {}", self.objective.render(&names));
        let _ = writeln!(s, "subject to:");
        for c in &self.constraints {
            let _ = writeln!(s, "  [{}] {} <= 0", c.label, c.expr.render(&names));
        }
        s
    }
}
