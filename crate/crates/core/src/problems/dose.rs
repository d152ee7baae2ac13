//! Dose functions over structures and the IMRT optimization problem.

use super::phantom::{DoseModel, LEFT_PAROTIS, MYELON, RIGHT_PAROTIS, TUMOR, UNCLASSIFIED};
use crate::constraint::{Constraint, ConvexConstraint, OptimizationProblem, SumConstraint};
use crate::error::{Error, Result};
use crate::vector::{dot, Vector};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DoseRole {
    /// (1/|O|) Σ max(0, d_i − U)²
    UpperTail { u: f64 },
    /// (1/|O|) Σ max(0, L − d_i)²
    LowerTail { l: f64 },
    /// (1/|O|) Σ |d_i|^p
    Eud { p: f64 },
    /// (1/|O|) Σ |d_ref − d_i|^p
    Conformity { p: f64, d_ref: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoseFunctionSpec {
    pub role: DoseRole,
    pub structure: String,
}

impl DoseFunctionSpec {
    pub fn new(role: DoseRole, structure: impl Into<String>) -> Result<Self> {
        let ok = match role {
            DoseRole::UpperTail { u } => u.is_finite(),
            DoseRole::LowerTail { l } => l.is_finite(),
            DoseRole::Eud { p } => p >= 1.0 && p.is_finite(),
            DoseRole::Conformity { p, d_ref } => p >= 1.0 && p.is_finite() && d_ref.is_finite(),
        };
        if !ok {
            return Err(Error::Config(format!(
                "invalid dose function parameters {role:?}"
            )));
        }
        Ok(DoseFunctionSpec {
            role,
            structure: structure.into(),
        })
    }

    fn label(&self) -> String {
        match self.role {
            DoseRole::UpperTail { u } => format!("upper_tail({}, U={u})", self.structure),
            DoseRole::LowerTail { l } => format!("lower_tail({}, L={l})", self.structure),
            DoseRole::Eud { p } => format!("eud({}, p={p})", self.structure),
            DoseRole::Conformity { p, d_ref } => {
                format!("conformity({}, p={p}, d_ref={d_ref})", self.structure)
            }
        }
    }

    /// Value contribution and derivative with respect to one voxel dose.
    fn voxel_term(&self, d: f64) -> (f64, f64) {
        match self.role {
            DoseRole::UpperTail { u } => {
                let s = (d - u).max(0.0);
                (s * s, 2.0 * s)
            }
            DoseRole::LowerTail { l } => {
                let s = (l - d).max(0.0);
                (s * s, -2.0 * s)
            }
            DoseRole::Eud { p } => power_term(d, p),
            DoseRole::Conformity { p, d_ref } => {
                let (v, g) = power_term(d_ref - d, p);
                (v, -g)
            }
        }
    }
}

/// |r|^p and its derivative p |r|^(p−1) sign(r), with derivative 0 at r = 0.
fn power_term(r: f64, p: f64) -> (f64, f64) {
    if p == 2.0 {
        return (r * r, 2.0 * r);
    }
    let a = r.abs();
    let g = if r == 0.0 {
        0.0
    } else {
        p * a.powf(p - 1.0) * r.signum()
    };
    (a.powf(p), g)
}

/// Quadratic form (1/|O|) Σ (d_i − r)² = xᵀG x − 2r hᵀx + r² with
/// G = P_Oᵀ P_O / |O| and h = P_Oᵀ 1 / |O|.
#[derive(Clone, Debug)]
struct Quadratic {
    gram: Vec<f64>,
    h: Vec<f64>,
    r: f64,
}

impl Quadratic {
    fn new(rows: &[f64], n_voxels: usize, n: usize, r: f64) -> Self {
        let scale = 1.0 / n_voxels as f64;
        let mut gram = vec![0.0; n * n];
        let mut h = vec![0.0; n];
        for row in rows.chunks_exact(n) {
            for (i, &pi) in row.iter().enumerate() {
                h[i] += pi;
                if pi == 0.0 {
                    continue;
                }
                let gi = &mut gram[i * n..(i + 1) * n];
                for (g, &pj) in gi.iter_mut().zip(row) {
                    *g += pi * pj;
                }
            }
        }
        for g in &mut gram {
            *g *= scale;
        }
        for v in &mut h {
            *v *= scale;
        }
        Quadratic { gram, h, r }
    }

    fn eval(&self, x: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let n = x.len();
        let gx: Vec<f64> = self.gram.chunks_exact(n).map(|g| dot(g, x)).collect();
        let value = (dot(x, &gx) - 2.0 * self.r * dot(&self.h, x) + self.r * self.r).max(0.0);
        let grad = if want_grad {
            gx.iter()
                .zip(&self.h)
                .map(|(g, h)| 2.0 * (g - self.r * h))
                .collect()
        } else {
            Vec::new()
        };
        (value, grad)
    }
}

/// A dose function bound to a model. The structure's rows of P are copied
/// into a contiguous block; the p = 2 EUD and conformity roles are evaluated
/// through their Gram matrix instead.
#[derive(Clone, Debug)]
pub struct DoseFunction {
    spec: DoseFunctionSpec,
    label: String,
    rows: Vec<f64>,
    n_voxels: usize,
    n_beamlets: usize,
    quadratic: Option<Quadratic>,
}

impl DoseFunction {
    pub fn new(spec: DoseFunctionSpec, model: &DoseModel) -> Result<Self> {
        let s = model.structure(&spec.structure)?;
        if s.voxels.is_empty() {
            return Err(Error::Config(format!(
                "structure `{}` is empty",
                spec.structure
            )));
        }
        let n = model.n_beamlets();
        let mut rows = Vec::with_capacity(s.voxels.len() * n);
        for &v in &s.voxels {
            rows.extend_from_slice(model.row(v));
        }
        let quadratic = match spec.role {
            DoseRole::Eud { p: 2.0 } => Some(Quadratic::new(&rows, s.voxels.len(), n, 0.0)),
            DoseRole::Conformity { p: 2.0, d_ref } => {
                Some(Quadratic::new(&rows, s.voxels.len(), n, d_ref))
            }
            _ => None,
        };
        Ok(DoseFunction {
            label: spec.label(),
            spec,
            rows,
            n_voxels: s.voxels.len(),
            n_beamlets: n,
            quadratic,
        })
    }

    pub fn spec(&self) -> &DoseFunctionSpec {
        &self.spec
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.n_beamlets)
    }

    /// Voxel-by-voxel evaluation straight from the dose rows.
    pub fn eval_by_voxel(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let scale = 1.0 / self.n_voxels as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; self.n_beamlets];
        for row in self.rows() {
            let (v, g) = self.spec.voxel_term(dot(row, x));
            value += v;
            if g != 0.0 {
                for (gj, pj) in grad.iter_mut().zip(row) {
                    *gj += g * pj;
                }
            }
        }
        for gj in &mut grad {
            *gj *= scale;
        }
        (value * scale, grad)
    }
}

impl ConvexConstraint for DoseFunction {
    fn dim(&self) -> usize {
        self.n_beamlets
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.quadratic {
            Some(q) => q.eval(x, true),
            None => self.eval_by_voxel(x),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.quadratic {
            Some(q) => q.eval(x, false).0,
            None => {
                let total: f64 = self
                    .rows()
                    .map(|row| self.spec.voxel_term(dot(row, x)).0)
                    .sum();
                total / self.n_voxels as f64
            }
        }
    }
}

/// Evaluates one dose function and its subgradient at fluence `x`.
pub fn dose_function_eval(
    spec: &DoseFunctionSpec,
    model: &DoseModel,
    x: &Vector,
) -> Result<(f64, Vector)> {
    let f = DoseFunction::new(spec.clone(), model)?;
    crate::constraint::eval_constraint(&f, x)
}

/// Objective specs: EUD p = 2 on both parotids, the myelon and unclassified
/// tissue, and conformity p = 2 with d_ref = 60 on the tumor.
pub fn imrt_objective_specs() -> Vec<DoseFunctionSpec> {
    let eud = |s: &str| DoseFunctionSpec {
        role: DoseRole::Eud { p: 2.0 },
        structure: s.to_string(),
    };
    vec![
        eud(LEFT_PAROTIS),
        eud(RIGHT_PAROTIS),
        eud(MYELON),
        eud(UNCLASSIFIED),
        DoseFunctionSpec {
            role: DoseRole::Conformity {
                p: 2.0,
                d_ref: 60.0,
            },
            structure: TUMOR.to_string(),
        },
    ]
}

/// Constraint specs: tumor lower tail L = 55, tumor upper tail U = 66,
/// myelon upper tail U = 45.
pub fn imrt_constraint_specs() -> Vec<DoseFunctionSpec> {
    vec![
        DoseFunctionSpec {
            role: DoseRole::LowerTail { l: 55.0 },
            structure: TUMOR.to_string(),
        },
        DoseFunctionSpec {
            role: DoseRole::UpperTail { u: 66.0 },
            structure: TUMOR.to_string(),
        },
        DoseFunctionSpec {
            role: DoseRole::UpperTail { u: 45.0 },
            structure: MYELON.to_string(),
        },
    ]
}

/// min Σ f_i subject to g_1, g_2, g_3 ≤ 0 and x ≥ 0.
pub fn build_imrt_problem(model: &DoseModel) -> Result<OptimizationProblem> {
    let bind = |spec: DoseFunctionSpec| -> Result<Constraint> {
        Ok(Arc::new(DoseFunction::new(spec, model)?))
    };
    let parts = imrt_objective_specs()
        .into_iter()
        .map(bind)
        .collect::<Result<Vec<_>>>()?;
    let objective: Constraint = Arc::new(SumConstraint::new(parts, "f")?);
    let constraints = imrt_constraint_specs()
        .into_iter()
        .map(bind)
        .collect::<Result<Vec<_>>>()?;
    OptimizationProblem::new(objective, constraints, true)
}
