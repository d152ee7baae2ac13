//! Feasibility solver loop with optional perturbations and a full trace.

use crate::constraint::{residual_sup_norm, violation_sup_norm, FeasibilityProblem};
use crate::error::{check_dim, Error, Result};
use crate::perturbations::{
    beta_schedule, condition_tilde_c, in_window, inner_perturbation_vector,
    normalized_inner_product, outer_perturbation_vector, PerturbationConfig, PerturbationKind,
    Scheme, StepHistory,
};
use crate::projections::{
    apply_operator, projection_term, ControlSequence, Relaxation, WeightRule,
};
use crate::vector::Vector;

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Cyclic(ControlSequence),
    Simultaneous(WeightRule),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// max_i |φ_i(x)|, affine families only.
    ResidualSup,
    /// max_i max(0, φ_i(x)).
    ViolationSup,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub method: Method,
    pub lambda: Relaxation,
    pub perturbation: PerturbationConfig,
    pub max_iterations: usize,
    pub stop_rule: StopRule,
    pub tolerance: f64,
    /// Cyclic methods only: a visit to a satisfied constraint moves on to the
    /// next control index within the same iteration instead of counting as an
    /// iteration of its own.
    pub skip_satisfied: bool,
    /// Keep x^k and p(x^k) in the trace.
    pub record_iterates: bool,
    /// Constraints with φ_i(x) at or below this value contribute no step.
    pub active_threshold: f64,
}

impl SolverConfig {
    pub fn new(method: Method, lambda: f64) -> Self {
        SolverConfig {
            method,
            lambda: Relaxation::Constant(lambda),
            perturbation: PerturbationConfig::none(),
            max_iterations: 1000,
            stop_rule: StopRule::ViolationSup,
            tolerance: 1e-6,
            skip_satisfied: false,
            record_iterates: true,
            active_threshold: 0.0,
        }
    }

    pub fn validate(&self, fp: &FeasibilityProblem) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.active_threshold >= 0.0 && self.active_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "active_threshold must be finite and nonnegative, got {}",
                self.active_threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if let Relaxation::Constant(l) = self.lambda {
            if !(l > 0.0 && l < 2.0) {
                return Err(Error::Config(format!("relaxation {l} outside (0, 2)")));
            }
        }
        match &self.method {
            Method::Cyclic(ctrl) => check_dim(fp.len(), ctrl.n())?,
            Method::Simultaneous(WeightRule::Fixed(w)) => check_dim(fp.len(), w.as_slice().len())?,
            Method::Simultaneous(WeightRule::Violated) => {}
        }
        if self.stop_rule == StopRule::ResidualSup && !fp.is_affine() {
            return Err(Error::Config(
                "residual stop rule needs an all-affine problem".into(),
            ));
        }
        self.perturbation.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Solved,
    IterationCapReached,
    InfeasibleConstraint,
    /// The step vanished while the stop measure stayed above tolerance, so the
    /// iterate is a fixed point of the operator.
    Stalled,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::IterationCapReached => "iteration_cap_reached",
            Status::InfeasibleConstraint => "infeasible_constraint",
            Status::Stalled => "stalled",
        }
    }
}

/// State at iterate k and how the move to k + 1 was made.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Option<Vector>,
    /// Unperturbed step p(x^k); absent on the final record.
    pub p: Option<Vector>,
    pub stop_measure: f64,
    pub inner_product: Option<f64>,
    pub perturbed: bool,
    pub kind: PerturbationKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn perturbed_indices(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.perturbed)
            .map(|r| r.k)
            .collect()
    }

    /// Iterates x^0, x^1, ... when they were recorded.
    pub fn iterates(&self) -> Vec<&Vector> {
        self.records.iter().filter_map(|r| r.x.as_ref()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct FeasibilityResult {
    pub status: Status,
    pub x_final: Vector,
    pub iterations: usize,
    pub perturbations: usize,
    pub trace: IterationTrace,
}

/// Stop measure of `x` under `rule`.
pub fn stop_measure(fp: &FeasibilityProblem, x: &Vector, rule: StopRule) -> Result<f64> {
    match rule {
        StopRule::ResidualSup => residual_sup_norm(fp, x),
        StopRule::ViolationSup => violation_sup_norm(fp, x),
    }
}

/// Values φ_i(x) of every constraint, in family order.
fn constraint_values(fp: &FeasibilityProblem, x: &Vector) -> Result<Vec<f64>> {
    fp.constraints()
        .iter()
        .map(|c| {
            let v = c.value(x.as_slice());
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numerical(format!(
                    "constraint `{}` returned a non-finite value",
                    c.label()
                )))
            }
        })
        .collect()
}

fn measure_from_values(
    fp: &FeasibilityProblem,
    x: &Vector,
    values: &[f64],
    rule: StopRule,
) -> Result<f64> {
    match rule {
        StopRule::ViolationSup => Ok(values.iter().fold(0.0_f64, |m, &v| m.max(v))),
        StopRule::ResidualSup => residual_sup_norm(fp, x),
    }
}

/// Projection term of constraint `i`, skipping the subgradient when the
/// known value shows it is satisfied.
fn term_at(
    fp: &FeasibilityProblem,
    x: &Vector,
    i: usize,
    value: f64,
    threshold: f64,
) -> Result<Vector> {
    if value <= threshold {
        Ok(Vector::zeros(x.dim()))
    } else {
        projection_term(fp.constraints()[i].as_ref(), x)
    }
}

/// Unperturbed step at `x` for the control position `pos`; returns the step
/// and the next control position.
fn operator_step(
    fp: &FeasibilityProblem,
    x: &Vector,
    values: &[f64],
    cfg: &SolverConfig,
    pos: usize,
) -> Result<(Vector, usize)> {
    match &cfg.method {
        Method::Simultaneous(rule) => {
            let mut p = Vector::zeros(x.dim());
            let weights: Vec<f64> = match rule {
                WeightRule::Fixed(w) => w.as_slice().to_vec(),
                WeightRule::Violated => {
                    let n = values
                        .iter()
                        .filter(|&&v| v > cfg.active_threshold)
                        .count()
                        .max(1);
                    vec![1.0 / n as f64; values.len()]
                }
            };
            for (i, (&v, &w)) in values.iter().zip(&weights).enumerate() {
                if v > cfg.active_threshold {
                    p.axpy(w, &term_at(fp, x, i, v, cfg.active_threshold)?)?;
                }
            }
            Ok((p, pos))
        }
        Method::Cyclic(ctrl) => {
            let visits = if cfg.skip_satisfied { ctrl.period() } else { 1 };
            let mut pos = pos;
            for _ in 0..visits {
                let i = ctrl.index(pos) - 1;
                pos += 1;
                let p = term_at(fp, x, i, values[i], cfg.active_threshold)?;
                if !p.is_zero() {
                    return Ok((p, pos));
                }
            }
            Ok((Vector::zeros(x.dim()), pos))
        }
    }
}

struct Step {
    next: Vector,
    p: Vector,
    inner_product: Option<f64>,
    perturbed: bool,
    pos: usize,
}

#[allow(clippy::too_many_arguments)]
fn iterate_once(
    fp: &FeasibilityProblem,
    x: &Vector,
    cfg: &SolverConfig,
    hist: &mut StepHistory,
    k: usize,
    k_cap: usize,
    pos: usize,
    values: &[f64],
) -> Result<Step> {
    let pert = &cfg.perturbation;
    let (p, next_pos) = operator_step(fp, x, values, cfg, pos)?;
    // Under a nonnegativity bound the step actually taken is the clamped one.
    let p = if fp.nonnegative() {
        let l = cfg.lambda.at(x)?;
        let mut t = x.add_scaled(l, &p)?;
        t.clamp_nonnegative();
        t.sub(x)?.scale(1.0 / l)
    } else {
        p
    };
    let inner_product = match &hist.p_prev {
        Some(prev) if !prev.is_zero() && !p.is_zero() => Some(normalized_inner_product(prev, &p)?),
        _ => None,
    };
    let c = inner_product.is_some_and(|ip| in_window(ip, pert.eps_min, pert.eps_max));
    let active = pert.kind != PerturbationKind::None && beta_schedule(k, k_cap) > 0.0;
    let lambda = cfg.lambda.at(x)?;

    let step = match pert.scheme {
        Scheme::Outer => {
            let trigger = active && condition_tilde_c(hist.c_prev, c);
            let mut v = None;
            if trigger {
                let prev = hist.p_prev.as_ref().expect("trigger implies history");
                match outer_perturbation_vector(pert, x, prev, &p, lambda, true) {
                    Ok(vec) => v = Some(vec),
                    Err(Error::DegenerateSurrogate) => {}
                    Err(e) => return Err(e),
                }
            }
            let mut next = x.add_scaled(lambda, &p)?;
            if let Some(v) = &v {
                next.axpy(1.0, v)?;
            }
            if fp.nonnegative() {
                next.clamp_nonnegative();
            }
            hist.p_prev = Some(p.clone());
            Step {
                next,
                p,
                inner_product,
                perturbed: v.is_some(),
                pos: next_pos,
            }
        }
        Scheme::Inner => {
            let trigger = active && c;
            let mut shifted = None;
            if trigger {
                let prev = hist.p_prev.as_ref().expect("trigger implies history");
                match inner_perturbation_vector(pert, x, prev, &p, true) {
                    Ok(v) => shifted = Some(x.add(&v)?),
                    Err(Error::DegenerateSurrogate) => {}
                    Err(e) => return Err(e),
                }
            }
            match shifted {
                Some(z) => {
                    let values_z = constraint_values(fp, &z)?;
                    let (pz, pos_z) = operator_step(fp, &z, &values_z, cfg, pos)?;
                    let lz = cfg.lambda.at(&z)?;
                    let next = apply_operator(&z, &pz, lz, fp.nonnegative())?;
                    hist.p_prev = Some(pz);
                    Step {
                        next,
                        p,
                        inner_product,
                        perturbed: true,
                        pos: pos_z,
                    }
                }
                None => {
                    let next = apply_operator(x, &p, lambda, fp.nonnegative())?;
                    hist.p_prev = Some(p.clone());
                    Step {
                        next,
                        p,
                        inner_product,
                        perturbed: false,
                        pos: next_pos,
                    }
                }
            }
        }
    };
    hist.c_prev = c;
    hist.last_inner_product = inner_product;
    Ok(step)
}

/// Runs the configured projection method from `x0` until the stop measure
/// drops to the tolerance or the iteration cap is reached.
pub fn solve_cfp(
    fp: &FeasibilityProblem,
    x0: &Vector,
    cfg: &SolverConfig,
) -> Result<FeasibilityResult> {
    check_dim(fp.dim(), x0.dim())?;
    x0.check_finite()?;
    cfg.validate(fp)?;
    let k_cap = cfg.perturbation.k_cap.unwrap_or(cfg.max_iterations);
    let kind = cfg.perturbation.kind;
    let keep = cfg.record_iterates;

    let mut x = x0.clone();
    let mut hist = StepHistory::default();
    let mut trace = IterationTrace::default();
    let mut pos = 0;
    let mut k = 0;
    let mut perturbations = 0;

    let status = loop {
        let values = constraint_values(fp, &x)?;
        let measure = measure_from_values(fp, &x, &values, cfg.stop_rule)?;
        if measure <= cfg.tolerance {
            break (Status::Solved, measure);
        }
        if k == cfg.max_iterations {
            break (Status::IterationCapReached, measure);
        }
        let step = match iterate_once(fp, &x, cfg, &mut hist, k, k_cap, pos, &values) {
            Ok(s) => s,
            Err(Error::InfeasibleConstraint(_)) => break (Status::InfeasibleConstraint, measure),
            Err(e) => return Err(e),
        };
        let whole_operator = !matches!(cfg.method, Method::Cyclic(_)) || cfg.skip_satisfied;
        if whole_operator && step.p.is_zero() && !step.perturbed && step.next == x {
            break (Status::Stalled, measure);
        }
        step.next.check_finite()?;
        trace.records.push(IterationRecord {
            k,
            x: keep.then(|| x.clone()),
            p: keep.then(|| step.p.clone()),
            stop_measure: measure,
            inner_product: step.inner_product,
            perturbed: step.perturbed,
            kind,
        });
        perturbations += usize::from(step.perturbed);
        pos = step.pos;
        x = step.next;
        k += 1;
    };

    trace.records.push(IterationRecord {
        k,
        x: keep.then(|| x.clone()),
        p: None,
        stop_measure: status.1,
        inner_product: None,
        perturbed: false,
        kind,
    });
    Ok(FeasibilityResult {
        status: status.0,
        x_final: x,
        iterations: k,
        perturbations,
        trace,
    })
}
