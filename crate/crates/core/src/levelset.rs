//! Level-set scheme: a sequence of feasibility problems with a shrinking
//! bound on the objective.

use crate::constraint::{Constraint, FeasibilityProblem, LevelBound, OptimizationProblem};
use crate::error::{Error, Result};
use crate::projections::{ControlSequence, WeightRule, Weights};
use crate::solver::{solve_cfp, FeasibilityResult, Method, SolverConfig, Status};
use crate::vector::Vector;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelKind {
    /// t_{s+1} = f(x*_s) − ε_s
    Additive,
    /// t_{s+1} = f(x*_s)(1 − ε_s)
    Multiplicative,
}

/// Update rule for the objective bound; the last entry of `eps` repeats.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRule {
    pub kind: LevelKind,
    pub eps: Vec<f64>,
}

impl LevelRule {
    pub fn additive(eps: f64) -> Self {
        LevelRule {
            kind: LevelKind::Additive,
            eps: vec![eps],
        }
    }

    pub fn multiplicative(eps: f64) -> Self {
        LevelRule {
            kind: LevelKind::Multiplicative,
            eps: vec![eps],
        }
    }

    pub fn eps_at(&self, s: usize) -> f64 {
        self.eps[s.min(self.eps.len() - 1)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Config(
                "level steps must be positive and finite".into(),
            ));
        }
        if self.kind == LevelKind::Multiplicative && self.eps.iter().any(|&e| e >= 1.0) {
            return Err(Error::Config(
                "multiplicative level steps must be below 1".into(),
            ));
        }
        Ok(())
    }
}

/// Starting point of each level after the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartMode {
    /// The previous level's solution.
    Warm,
    /// The initial point x0.
    Cold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// A level reported an empty constraint set or stalled.
    InfeasibleCfp,
    LevelBudget,
    /// A level hit its iteration cap.
    Cap,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::InfeasibleCfp => "infeasible_cfp",
            Termination::LevelBudget => "level_budget",
            Termination::Cap => "cap",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LevelRecord {
    /// Objective bound; `None` for the unbounded first level.
    pub t: Option<f64>,
    pub result: FeasibilityResult,
    /// f at the level's final iterate.
    pub objective: f64,
}

impl LevelRecord {
    pub fn solved(&self) -> bool {
        self.result.status == Status::Solved
    }
}

#[derive(Clone, Debug)]
pub struct LevelSetResult {
    pub x_star: Vector,
    pub f_star: f64,
    /// Every attempted level, including the final unsolved one.
    pub levels: Vec<LevelRecord>,
    pub terminated_by: Termination,
}

impl LevelSetResult {
    pub fn solved_levels(&self) -> impl Iterator<Item = &LevelRecord> {
        self.levels.iter().filter(|l| l.solved())
    }

    /// Iterations spent on the levels that were solved, i.e. to reach x_star.
    pub fn iterations_to_solution(&self) -> usize {
        self.solved_levels().map(|l| l.result.iterations).sum()
    }

    pub fn total_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.result.iterations).sum()
    }

    pub fn perturbations(&self) -> usize {
        self.levels.iter().map(|l| l.result.perturbations).sum()
    }

    /// Iterations until the objective first drops to `target` or below,
    /// counting levels in order.
    pub fn iterations_to_reach(&self, target: f64) -> Option<usize> {
        let mut spent = 0;
        for level in self.solved_levels() {
            spent += level.result.iterations;
            if level.objective <= target {
                return Some(spent);
            }
        }
        None
    }
}

/// [f − t, g_1, ..., g_m]; the objective row is omitted when `t` is `None`.
pub fn build_level_cfp(
    problem: &OptimizationProblem,
    t: Option<f64>,
) -> Result<FeasibilityProblem> {
    let mut constraints: Vec<Constraint> = Vec::with_capacity(problem.constraints().len() + 1);
    if let Some(t) = t {
        constraints.push(Arc::new(LevelBound::new(problem.objective().clone(), t)));
    }
    constraints.extend(problem.constraints().iter().cloned());
    Ok(FeasibilityProblem::new(constraints)?.with_nonnegativity(problem.nonnegative()))
}

/// Next objective bound after level `s` reached objective value `f`.
pub fn next_level(f: f64, rule: &LevelRule, s: usize) -> Result<f64> {
    if !f.is_finite() {
        return Err(Error::Numerical("non-finite objective value".into()));
    }
    let eps = rule.eps_at(s);
    Ok(match rule.kind {
        LevelKind::Multiplicative if f > 0.0 => f * (1.0 - eps),
        _ => f - eps,
    })
}

/// Adapts a configuration written for the full family [f − t, g...] to the
/// first level, where the objective row is absent.
fn config_without_objective(cfg: &SolverConfig, m: usize) -> Result<SolverConfig> {
    let mut out = cfg.clone();
    out.method = match &cfg.method {
        Method::Cyclic(ControlSequence::Cyclic { .. }) => {
            Method::Cyclic(ControlSequence::cyclic(m)?)
        }
        Method::Cyclic(ControlSequence::Explicit { order, .. }) => {
            let order: Vec<usize> = order.iter().filter(|&&i| i > 1).map(|i| i - 1).collect();
            Method::Cyclic(ControlSequence::explicit(m, order)?)
        }
        Method::Simultaneous(WeightRule::Fixed(w)) => {
            let rest = &w.as_slice()[1..];
            let total: f64 = rest.iter().sum();
            Method::Simultaneous(WeightRule::Fixed(Weights::new(
                rest.iter().map(|x| x / total).collect(),
            )?))
        }
        Method::Simultaneous(WeightRule::Violated) => cfg.method.clone(),
    };
    Ok(out)
}

fn fit_cyclic(cfg: &SolverConfig, n: usize) -> Result<SolverConfig> {
    let mut out = cfg.clone();
    if let Method::Cyclic(ControlSequence::Cyclic { .. }) = cfg.method {
        out.method = Method::Cyclic(ControlSequence::cyclic(n)?);
    }
    Ok(out)
}

/// Level-set scheme with warm starts.
pub fn run_level_set(
    problem: &OptimizationProblem,
    x0: &Vector,
    cfg: &SolverConfig,
    rule: &LevelRule,
    max_levels: usize,
) -> Result<LevelSetResult> {
    run_level_set_with(problem, x0, cfg, rule, max_levels, StartMode::Warm)
}

pub fn run_level_set_with(
    problem: &OptimizationProblem,
    x0: &Vector,
    cfg: &SolverConfig,
    rule: &LevelRule,
    max_levels: usize,
    start: StartMode,
) -> Result<LevelSetResult> {
    rule.validate()?;
    if max_levels == 0 {
        return Err(Error::Config("max_levels must be at least 1".into()));
    }
    let m = problem.constraints().len();
    let full_cfg = fit_cyclic(cfg, m + 1)?;
    let first_cfg = config_without_objective(&full_cfg, m)?;

    let first = build_level_cfp(problem, None)?;
    let result = solve_cfp(&first, x0, &first_cfg)?;
    if result.status != Status::Solved {
        return Err(Error::NoFeasibleStart);
    }
    let objective = problem.objective_value(&result.x_final)?;
    let mut x_star = result.x_final.clone();
    let mut f_star = objective;
    let mut levels = vec![LevelRecord {
        t: None,
        result,
        objective,
    }];

    let terminated_by = loop {
        if levels.len() == max_levels {
            break Termination::LevelBudget;
        }
        let s = levels.len() - 1;
        let t = next_level(f_star, rule, s)?;
        let fp = build_level_cfp(problem, Some(t))?;
        let start_point = match start {
            StartMode::Warm => &x_star,
            StartMode::Cold => x0,
        };
        let result = solve_cfp(&fp, start_point, &full_cfg)?;
        let objective = problem.objective_value(&result.x_final)?;
        let status = result.status;
        let x_final = result.x_final.clone();
        levels.push(LevelRecord {
            t: Some(t),
            result,
            objective,
        });
        match status {
            Status::Solved => {
                x_star = x_final;
                f_star = objective;
            }
            Status::IterationCapReached => break Termination::Cap,
            Status::InfeasibleConstraint | Status::Stalled => break Termination::InfeasibleCfp,
        }
    };

    Ok(LevelSetResult {
        x_star,
        f_star,
        levels,
        terminated_by,
    })
}
