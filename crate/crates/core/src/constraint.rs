//! Constraint evaluation contract, feasibility and optimization problems,
//! and violation measures.

use crate::error::{check_dim, Error, Result};
use crate::vector::{dot, Vector};
use std::fmt;
use std::sync::Arc;

/// A convex function φ with the constraint φ(x) ≤ 0.
pub trait ConvexConstraint: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn label(&self) -> &str;

    /// φ(x) and one subgradient ξ ∈ ∂φ(x). `x.len() == self.dim()` is
    /// guaranteed by the caller.
    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>);

    fn value(&self, x: &[f64]) -> f64 {
        self.value_and_subgradient(x).0
    }

    /// `Some((a, b))` when φ(x) = ⟨a, x⟩ − b.
    fn affine_parts(&self) -> Option<(&[f64], f64)> {
        None
    }
}

pub type Constraint = Arc<dyn ConvexConstraint>;

/// Evaluates φ(x) and a subgradient with dimension and finiteness checks.
pub fn eval_constraint(c: &dyn ConvexConstraint, x: &Vector) -> Result<(f64, Vector)> {
    check_dim(c.dim(), x.dim())?;
    let (value, grad) = c.value_and_subgradient(x.as_slice());
    check_dim(c.dim(), grad.len())?;
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "constraint `{}` returned a non-finite value",
            c.label()
        )));
    }
    let grad = Vector::new(grad).map_err(|_| {
        Error::Numerical(format!(
            "constraint `{}` returned a non-finite subgradient",
            c.label()
        ))
    })?;
    Ok((value, grad))
}

/// φ(x) = ⟨a, x⟩ − b.
#[derive(Clone, Debug)]
pub struct AffineConstraint {
    a: Vec<f64>,
    b: f64,
    label: String,
}

impl AffineConstraint {
    pub fn new(a: Vec<f64>, b: f64, label: impl Into<String>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Config("affine constraint with empty normal".into()));
        }
        if !b.is_finite() || a.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite affine coefficients".into()));
        }
        Ok(AffineConstraint {
            a,
            b,
            label: label.into(),
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.a
    }

    pub fn offset(&self) -> f64 {
        self.b
    }
}

impl ConvexConstraint for AffineConstraint {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (dot(&self.a, x) - self.b, self.a.clone())
    }

    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }

    fn affine_parts(&self) -> Option<(&[f64], f64)> {
        Some((&self.a, self.b))
    }
}

/// φ(x) = f(x) − t, the objective bound of one level.
#[derive(Clone, Debug)]
pub struct LevelBound {
    objective: Constraint,
    bound: f64,
    label: String,
}

impl LevelBound {
    pub fn new(objective: Constraint, bound: f64) -> Self {
        let label = format!("{} - t", objective.label());
        LevelBound {
            objective,
            bound,
            label,
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

impl ConvexConstraint for LevelBound {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (f, g) = self.objective.value_and_subgradient(x);
        (f - self.bound, g)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.objective.value(x) - self.bound
    }
}

/// φ(x) = Σ_i φ_i(x), summed in list order.
#[derive(Clone, Debug)]
pub struct SumConstraint {
    parts: Vec<Constraint>,
    label: String,
}

impl SumConstraint {
    pub fn new(parts: Vec<Constraint>, label: impl Into<String>) -> Result<Self> {
        let dim = match parts.first() {
            Some(c) => c.dim(),
            None => return Err(Error::Config("sum of zero functions".into())),
        };
        for c in &parts {
            check_dim(dim, c.dim())?;
        }
        Ok(SumConstraint {
            parts,
            label: label.into(),
        })
    }

    pub fn parts(&self) -> &[Constraint] {
        &self.parts
    }
}

impl ConvexConstraint for SumConstraint {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; self.dim()];
        for c in &self.parts {
            let (v, g) = c.value_and_subgradient(x);
            value += v;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (value, grad)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().fold(0.0, |s, c| s + c.value(x))
    }
}

type EvalFn = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync;

/// A constraint given by a closure returning value and subgradient.
#[derive(Clone)]
pub struct FnConstraint {
    dim: usize,
    label: String,
    eval: Arc<EvalFn>,
}

impl FnConstraint {
    pub fn new<F>(dim: usize, label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    {
        FnConstraint {
            dim,
            label: label.into(),
            eval: Arc::new(eval),
        }
    }
}

impl fmt::Debug for FnConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnConstraint")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

impl ConvexConstraint for FnConstraint {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.eval)(x)
    }
}

/// An ordered family of constraints, optionally with the bound x ≥ 0
/// enforced by clamping.
#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    constraints: Vec<Constraint>,
    dim: usize,
    nonnegative: bool,
}

impl FeasibilityProblem {
    pub fn new(constraints: Vec<Constraint>) -> Result<Self> {
        let dim = match constraints.first() {
            Some(c) => c.dim(),
            None => {
                return Err(Error::Config(
                    "feasibility problem has no constraints".into(),
                ))
            }
        };
        for c in &constraints {
            check_dim(dim, c.dim())?;
        }
        Ok(FeasibilityProblem {
            constraints,
            dim,
            nonnegative: false,
        })
    }

    pub fn with_nonnegativity(mut self, on: bool) -> Self {
        self.nonnegative = on;
        self
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn is_affine(&self) -> bool {
        self.constraints.iter().all(|c| c.affine_parts().is_some())
    }
}

/// Minimize f(x) subject to g_j(x) ≤ 0, optionally with x ≥ 0.
#[derive(Clone, Debug)]
pub struct OptimizationProblem {
    objective: Constraint,
    constraints: Vec<Constraint>,
    nonnegative: bool,
}

impl OptimizationProblem {
    pub fn new(
        objective: Constraint,
        constraints: Vec<Constraint>,
        nonnegative: bool,
    ) -> Result<Self> {
        for c in &constraints {
            check_dim(objective.dim(), c.dim())?;
        }
        Ok(OptimizationProblem {
            objective,
            constraints,
            nonnegative,
        })
    }

    pub fn objective(&self) -> &Constraint {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective_value(&self, x: &Vector) -> Result<f64> {
        Ok(eval_constraint(self.objective.as_ref(), x)?.0)
    }
}

/// max_i max(0, φ_i(x)); zero exactly on the feasible set.
pub fn violation_sup_norm(fp: &FeasibilityProblem, x: &Vector) -> Result<f64> {
    check_dim(fp.dim(), x.dim())?;
    let mut worst = 0.0_f64;
    for c in fp.constraints() {
        let v = c.value(x.as_slice());
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "constraint `{}` returned a non-finite value",
                c.label()
            )));
        }
        worst = worst.max(v);
    }
    Ok(worst)
}

/// max_i |φ_i(x)| for an all-affine family.
pub fn residual_sup_norm(fp: &FeasibilityProblem, x: &Vector) -> Result<f64> {
    check_dim(fp.dim(), x.dim())?;
    let mut worst = 0.0_f64;
    for c in fp.constraints() {
        let (a, b) = c.affine_parts().ok_or_else(|| {
            Error::Config(format!(
                "residual stop rule needs affine constraints; `{}` is not",
                c.label()
            ))
        })?;
        worst = worst.max((dot(a, x.as_slice()) - b).abs());
    }
    Ok(worst)
}
