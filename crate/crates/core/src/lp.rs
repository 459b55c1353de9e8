//! Thin builder over the `minilp` simplex solver.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};

pub struct LinearProgram {
    problem: Problem,
    vars: Vec<Variable>,
}

impl LinearProgram {
    pub fn maximize() -> Self {
        Self {
            problem: Problem::new(OptimizationDirection::Maximize),
            vars: Vec::new(),
        }
    }

    pub fn minimize() -> Self {
        Self {
            problem: Problem::new(OptimizationDirection::Minimize),
            vars: Vec::new(),
        }
    }

    /// Adds a variable with objective coefficient `obj` and bounds `[lo, hi]`.
    pub fn var(&mut self, obj: f64, lo: f64, hi: f64) -> usize {
        self.vars.push(self.problem.add_var(obj, (lo, hi)));
        self.vars.len() - 1
    }

    fn constraint(&mut self, terms: &[(usize, f64)], op: ComparisonOp, rhs: f64) {
        let expr: Vec<(Variable, f64)> = terms
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|&(v, c)| (self.vars[v], c))
            .collect();
        self.problem.add_constraint(expr.as_slice(), op, rhs);
    }

    pub fn ge(&mut self, terms: &[(usize, f64)], rhs: f64) {
        self.constraint(terms, ComparisonOp::Ge, rhs);
    }

    pub fn le(&mut self, terms: &[(usize, f64)], rhs: f64) {
        self.constraint(terms, ComparisonOp::Le, rhs);
    }

    /// Optimal objective and variable values, or `None` when infeasible.
    pub fn solve(self) -> Result<Option<(f64, Vec<f64>)>> {
        match self.problem.solve() {
            Ok(sol) => {
                let x = self.vars.iter().map(|&v| sol[v]).collect();
                Ok(Some((sol.objective(), x)))
            }
            Err(minilp::Error::Infeasible) => Ok(None),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }
}
