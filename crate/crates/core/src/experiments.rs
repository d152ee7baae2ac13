//! Preset experiments: the pyramid feasibility tables and the phantom IMRT
//! comparison, with reference iteration counts.

use crate::constraint::FeasibilityProblem;
use crate::error::{Error, Result};
use crate::levelset::{run_level_set, LevelRule, LevelSetResult};
use crate::perturbations::{PerturbationConfig, SurrogateStep};
use crate::problems::{
    build_imrt_problem, build_linear_problem, extend_linear_problem, DoseModel, LinearSystem,
};
use crate::projections::{ControlSequence, WeightRule};
use crate::solver::{solve_cfp, FeasibilityResult, Method, SolverConfig, StopRule};
use crate::vector::Vector;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Table {
    Table1,
    Table2,
    Table3,
    CpLambda1,
}

impl Table {
    pub const ALL: [Table; 4] = [
        Table::Table1,
        Table::Table2,
        Table::Table3,
        Table::CpLambda1,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Table::Table1 => "table1",
            Table::Table2 => "table2",
            Table::Table3 => "table3",
            Table::CpLambda1 => "cp_lambda1",
        }
    }
}

impl FromStr for Table {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Table::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown table `{s}`")))
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Published iteration counts: (table, variant, iterations).
pub const REFERENCE_ITERATIONS: &[(&str, &str, usize)] = &[
    ("table1", "SP", 449),
    ("table1", "SP+HB8", 58),
    ("table1", "SP+HB80", 17),
    ("table1", "SP+HB800", 4),
    ("table1", "SP+SC", 4),
    ("table2", "CP", 20),
    ("table2", "CP+HB8", 34),
    ("table2", "CP+HB80", 26),
    ("table2", "CP+HB800", 9),
    ("table2", "CP+SC", 4),
    ("table3", "CP", 32),
    ("table3", "CP+HB8", 29),
    ("table3", "CP+HB80", 20),
    ("table3", "CP+HB800", 7),
    ("table3", "CP+SC", 3),
    ("cp_lambda1", "CP", 1917),
];

pub fn reference_iterations(table: Table, variant: &str) -> Option<usize> {
    REFERENCE_ITERATIONS
        .iter()
        .find(|(t, v, _)| *t == table.id() && *v == variant)
        .map(|&(_, _, k)| k)
}

/// Accepts |measured − reference| ≤ max(10% of reference, 2).
pub fn within_tolerance(measured: usize, reference: usize) -> bool {
    let diff = measured.abs_diff(reference) as f64;
    diff <= (0.1 * reference as f64).max(2.0)
}

/// Perturbation variants of one table row, in column order.
pub fn variants(prefix: &str) -> Vec<(String, PerturbationConfig)> {
    let mut out = vec![(prefix.to_string(), PerturbationConfig::none())];
    for hb in [8.0, 80.0, 800.0] {
        out.push((
            format!("{prefix}+HB{hb}"),
            PerturbationConfig::heavy_ball(hb),
        ));
    }
    out.push((format!("{prefix}+SC"), PerturbationConfig::surrogate()));
    out
}

/// Pyramid used by the reproduction runs. The face angle is passed as 60°,
/// which gives δ_x1 ≈ 10.10 and δ_x2 ≈ 17.50.
pub fn reproduction_system() -> Result<LinearSystem> {
    build_linear_problem(60.0, 5.0, 100.0)
}

pub fn reproduction_start() -> Vector {
    Vector::new(vec![15.0, 0.0, 0.0]).expect("finite start")
}

/// Solver settings of the pyramid runs. The simultaneous method averages
/// the steps of the violated rows; the cyclic method passes over satisfied
/// rows without spending an iteration.
pub fn linear_config(
    method: Method,
    lambda: f64,
    perturbation: PerturbationConfig,
) -> SolverConfig {
    let mut cfg = SolverConfig::new(method, lambda);
    cfg.perturbation = perturbation;
    cfg.stop_rule = StopRule::ViolationSup;
    cfg.tolerance = 1e-10;
    cfg.max_iterations = 100_000;
    cfg.skip_satisfied = true;
    cfg
}

/// System, method and relaxation of one table.
pub fn table_setup(table: Table) -> Result<(LinearSystem, Method, f64, &'static str)> {
    let sys = reproduction_system()?;
    Ok(match table {
        Table::Table1 => (sys, Method::Simultaneous(WeightRule::Violated), 1.9, "SP"),
        Table::Table2 => (
            sys,
            Method::Cyclic(ControlSequence::explicit(4, vec![1, 2, 3, 4])?),
            1.9,
            "CP",
        ),
        Table::Table3 => {
            let ext = extend_linear_problem(&sys)?;
            (
                ext,
                Method::Cyclic(ControlSequence::explicit(8, (1..=8).collect())?),
                1.9,
                "CP",
            )
        }
        Table::CpLambda1 => (
            sys,
            Method::Cyclic(ControlSequence::explicit(4, vec![1, 2, 3, 4])?),
            1.0,
            "CP",
        ),
    })
}

#[derive(Clone, Debug)]
pub struct ReproductionRow {
    pub variant: String,
    pub measured: usize,
    pub reference: usize,
    pub matches: bool,
    pub result: FeasibilityResult,
}

/// Feasibility problem and named solver settings of every variant of `table`,
/// in report order.
pub fn table_runs(table: Table) -> Result<(FeasibilityProblem, Vec<(String, SolverConfig)>)> {
    let (sys, method, lambda, prefix) = table_setup(table)?;
    let fp = sys.to_feasibility_problem()?;
    let runs = match table {
        Table::CpLambda1 => vec![(prefix.to_string(), PerturbationConfig::none())],
        _ => variants(prefix),
    };
    let runs = runs
        .into_iter()
        .map(|(name, pert)| (name, linear_config(method.clone(), lambda, pert)))
        .collect();
    Ok((fp, runs))
}

/// Solves one variant from the reproduction start and grades it.
pub fn run_variant(
    table: Table,
    fp: &FeasibilityProblem,
    variant: &str,
    cfg: &SolverConfig,
) -> Result<ReproductionRow> {
    let result = solve_cfp(fp, &reproduction_start(), cfg)?;
    let reference = reference_iterations(table, variant)
        .ok_or_else(|| Error::Config(format!("no reference value for {table} {variant}")))?;
    Ok(ReproductionRow {
        matches: within_tolerance(result.iterations, reference),
        measured: result.iterations,
        reference,
        variant: variant.to_string(),
        result,
    })
}

pub fn reproduce(table: Table) -> Result<Vec<ReproductionRow>> {
    let (fp, runs) = table_runs(table)?;
    runs.iter()
        .map(|(name, cfg)| run_variant(table, &fp, name, cfg))
        .collect()
}

/// Perturbation settings of the phantom runs: window [−1 + 1e−8, −1 + 0.034],
/// heavy-ball step 1, surrogate step 1.
pub fn imrt_perturbation(kind: crate::perturbations::PerturbationKind) -> PerturbationConfig {
    use crate::perturbations::PerturbationKind;
    let base = match kind {
        PerturbationKind::None => PerturbationConfig::none(),
        PerturbationKind::HeavyBall => PerturbationConfig::heavy_ball(1.0),
        PerturbationKind::Surrogate => {
            PerturbationConfig::surrogate().with_surrogate_step(SurrogateStep::Fixed(1.0))
        }
    };
    base.with_window(1e-8, 0.034)
}

/// Per-level solver settings of the phantom runs: λ ≡ 1.9, at most 1000
/// iterations per level, violation tolerance 1e−6.
pub fn imrt_config(cyclic: bool, perturbation: PerturbationConfig) -> SolverConfig {
    let method = if cyclic {
        Method::Cyclic(ControlSequence::Cyclic { n: 4 })
    } else {
        Method::Simultaneous(WeightRule::Violated)
    };
    let mut cfg = SolverConfig::new(method, 1.9);
    cfg.perturbation = perturbation;
    cfg.max_iterations = 1000;
    cfg.tolerance = 1e-6;
    cfg.stop_rule = StopRule::ViolationSup;
    cfg.skip_satisfied = cyclic;
    cfg.record_iterates = false;
    cfg
}

/// Level-set run on the phantom from x = 0 with the multiplicative rule ε = 0.01.
pub fn run_imrt(model: &DoseModel, cfg: &SolverConfig) -> Result<LevelSetResult> {
    let problem = build_imrt_problem(model)?;
    let x0 = Vector::zeros(model.n_beamlets());
    run_level_set(&problem, &x0, cfg, &LevelRule::multiplicative(0.01), 200)
}
