//! Cyclic and simultaneous subgradient projection operators.

use crate::constraint::{eval_constraint, ConvexConstraint, FeasibilityProblem};
use crate::error::{check_dim, Error, Result};
use crate::vector::Vector;
use std::fmt;
use std::sync::Arc;

/// Order in which a cyclic method visits constraints.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlSequence {
    /// i(ν) = (ν mod n) + 1.
    Cyclic { n: usize },
    /// A periodic list of 1-based indices.
    Explicit { n: usize, order: Vec<usize> },
}

impl ControlSequence {
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(
                "control sequence over zero constraints".into(),
            ));
        }
        Ok(ControlSequence::Cyclic { n })
    }

    /// `order` holds 1-based constraint indices and repeats with its own length.
    pub fn explicit(n: usize, order: Vec<usize>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::Config("empty control list".into()));
        }
        if let Some(bad) = order.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::Config(format!(
                "control index {bad} outside 1..={n}"
            )));
        }
        Ok(ControlSequence::Explicit { n, order })
    }

    pub fn n(&self) -> usize {
        match self {
            ControlSequence::Cyclic { n } | ControlSequence::Explicit { n, .. } => *n,
        }
    }

    pub fn period(&self) -> usize {
        match self {
            ControlSequence::Cyclic { n } => *n,
            ControlSequence::Explicit { order, .. } => order.len(),
        }
    }

    /// 1-based constraint index i(ν).
    pub fn index(&self, nu: usize) -> usize {
        match self {
            ControlSequence::Cyclic { n } => nu % n + 1,
            ControlSequence::Explicit { order, .. } => order[nu % order.len()],
        }
    }
}

/// Positive weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Config("weights must be positive and finite".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {sum}, not 1")));
        }
        Ok(Weights(w))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config(
                "uniform weights over zero constraints".into(),
            ));
        }
        Ok(Weights(vec![1.0 / m as f64; m]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// How a simultaneous step weights the per-constraint terms.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightRule {
    /// Fixed weights over the whole family.
    Fixed(Weights),
    /// Equal weights over the constraints violated at the current iterate.
    Violated,
}

type LambdaFn = dyn Fn(&Vector) -> f64 + Send + Sync;

/// Relaxation parameter λ(x) ∈ (0, 2).
#[derive(Clone)]
pub enum Relaxation {
    Constant(f64),
    Function(Arc<LambdaFn>),
}

impl Relaxation {
    pub fn at(&self, x: &Vector) -> Result<f64> {
        let lambda = match self {
            Relaxation::Constant(l) => *l,
            Relaxation::Function(f) => f(x),
        };
        check_lambda(lambda)?;
        Ok(lambda)
    }
}

impl fmt::Debug for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relaxation::Constant(l) => write!(f, "Constant({l})"),
            Relaxation::Function(_) => write!(f, "Function(..)"),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 2.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("relaxation {lambda} outside (0, 2)")))
    }
}

/// −max(0, φ(x)) / ‖ξ‖² · ξ.
pub fn projection_term(c: &dyn ConvexConstraint, x: &Vector) -> Result<Vector> {
    let (value, xi) = eval_constraint(c, x)?;
    if value <= 0.0 {
        return Ok(Vector::zeros(x.dim()));
    }
    let nsq = xi.norm_sq();
    if nsq == 0.0 {
        return Err(Error::InfeasibleConstraint(c.label().to_string()));
    }
    Ok(xi.scale(-value / nsq))
}

/// Projection terms of every constraint, in family order.
pub fn projection_terms(fp: &FeasibilityProblem, x: &Vector) -> Result<Vec<Vector>> {
    fp.constraints()
        .iter()
        .map(|c| projection_term(c.as_ref(), x))
        .collect()
}

/// Step of the cyclic method at iteration `k`.
pub fn cyclic_step(
    fp: &FeasibilityProblem,
    x: &Vector,
    k: usize,
    ctrl: &ControlSequence,
) -> Result<Vector> {
    check_dim(fp.len(), ctrl.n())?;
    let i = ctrl.index(k) - 1;
    projection_term(fp.constraints()[i].as_ref(), x)
}

/// Weighted sum of all projection terms, accumulated in constraint order.
pub fn simultaneous_step(fp: &FeasibilityProblem, x: &Vector, w: &Weights) -> Result<Vector> {
    check_dim(fp.len(), w.as_slice().len())?;
    let mut p = Vector::zeros(x.dim());
    for (c, &wi) in fp.constraints().iter().zip(w.as_slice()) {
        let t = projection_term(c.as_ref(), x)?;
        p.axpy(wi, &t)?;
    }
    Ok(p)
}

/// Average of the projection terms of the violated constraints; zero when
/// none is violated.
pub fn simultaneous_step_violated(fp: &FeasibilityProblem, x: &Vector) -> Result<Vector> {
    let terms = projection_terms(fp, x)?;
    let violated: Vec<&Vector> = terms.iter().filter(|t| !t.is_zero()).collect();
    let mut p = Vector::zeros(x.dim());
    if violated.is_empty() {
        return Ok(p);
    }
    let w = 1.0 / violated.len() as f64;
    for t in violated {
        p.axpy(w, t)?;
    }
    Ok(p)
}

/// x + λp, clamped to x ≥ 0 when `nonnegative` is set.
pub fn apply_operator(x: &Vector, p: &Vector, lambda: f64, nonnegative: bool) -> Result<Vector> {
    check_lambda(lambda)?;
    let mut next = x.add_scaled(lambda, p)?;
    if nonnegative {
        next.clamp_nonnegative();
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{AffineConstraint, Constraint};

    fn affine(a: &[f64], b: f64) -> Constraint {
        Arc::new(AffineConstraint::new(a.to_vec(), b, "h").unwrap())
    }

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn close(a: &Vector, b: &[f64]) -> bool {
        a.as_slice()
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn term_examples() {
        let t = projection_term(affine(&[3.0, 4.0], 0.0).as_ref(), &v(&[1.0, 0.0])).unwrap();
        assert!(close(&t, &[-0.36, -0.48]));
        let t = projection_term(affine(&[1.0, 0.0], 1.0).as_ref(), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(t.as_slice(), &[0.0, 0.0]);
        let t = projection_term(affine(&[1.0, 0.0], 0.0).as_ref(), &v(&[2.0, 0.0])).unwrap();
        assert_eq!(t.as_slice(), &[-2.0, 0.0]);
    }

    #[test]
    fn empty_set_detected() {
        let c = affine(&[0.0, 0.0], -1.0);
        assert!(matches!(
            projection_term(c.as_ref(), &v(&[0.0, 0.0])),
            Err(Error::InfeasibleConstraint(_))
        ));
    }

    #[test]
    fn control_sequences() {
        let c = ControlSequence::cyclic(4).unwrap();
        assert_eq!(c.index(0), 1);
        assert_eq!(c.index(4), 1);
        assert_eq!(c.index(7), 4);
        let e = ControlSequence::explicit(4, vec![1, 3, 2]).unwrap();
        assert_eq!(
            (0..6).map(|k| e.index(k)).collect::<Vec<_>>(),
            vec![1, 3, 2, 1, 3, 2]
        );
        assert!(ControlSequence::explicit(4, vec![5]).is_err());
        assert!(ControlSequence::explicit(4, vec![0]).is_err());
    }

    #[test]
    fn cyclic_visits_control_index() {
        let fp = FeasibilityProblem::new(vec![affine(&[1.0, 0.0], 0.0), affine(&[0.0, 1.0], 0.0)])
            .unwrap();
        let ctrl = ControlSequence::cyclic(2).unwrap();
        let x = v(&[2.0, 4.0]);
        assert_eq!(
            cyclic_step(&fp, &x, 0, &ctrl).unwrap().as_slice(),
            &[-2.0, 0.0]
        );
        assert_eq!(
            cyclic_step(&fp, &x, 3, &ctrl).unwrap().as_slice(),
            &[0.0, -4.0]
        );
    }

    #[test]
    fn simultaneous_examples() {
        let fp = FeasibilityProblem::new(vec![affine(&[1.0, 0.0], 0.0), affine(&[0.0, 1.0], 0.0)])
            .unwrap();
        let w = Weights::uniform(2).unwrap();
        let p = simultaneous_step(&fp, &v(&[2.0, 4.0]), &w).unwrap();
        assert_eq!(p.as_slice(), &[-1.0, -2.0]);
        assert!(simultaneous_step(&fp, &v(&[-1.0, -1.0]), &w)
            .unwrap()
            .is_zero());
        // Only the first constraint is violated, so it gets the full weight.
        let p = simultaneous_step_violated(&fp, &v(&[2.0, -1.0])).unwrap();
        assert_eq!(p.as_slice(), &[-2.0, 0.0]);
        let single = FeasibilityProblem::new(vec![affine(&[3.0, 4.0], 0.0)]).unwrap();
        let p = simultaneous_step(&single, &v(&[1.0, 0.0]), &Weights::uniform(1).unwrap()).unwrap();
        assert!(close(&p, &[-0.36, -0.48]));
    }

    #[test]
    fn weights_validated() {
        assert!(Weights::new(vec![0.5, 0.5]).is_ok());
        assert!(Weights::new(vec![0.5, 0.4]).is_err());
        assert!(Weights::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn operator_examples() {
        let x = apply_operator(&v(&[1.0, 1.0]), &v(&[-1.0, 0.0]), 1.0, false).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 1.0]);
        let x = apply_operator(&v(&[1.0, 0.0]), &v(&[-2.0, 0.0]), 1.9, false).unwrap();
        assert!(close(&x, &[-2.8, 0.0]));
        let x = apply_operator(&v(&[1.0, 0.0]), &v(&[-2.0, 0.0]), 1.9, true).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0]);
        let x = apply_operator(&v(&[1.0, 2.0]), &v(&[0.0, 0.0]), 1.9, false).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
        assert!(matches!(
            apply_operator(&v(&[1.0]), &v(&[0.0]), 2.0, false),
            Err(Error::Config(_))
        ));
        assert!(apply_operator(&v(&[1.0]), &v(&[0.0]), 0.0, false).is_err());
    }
}
