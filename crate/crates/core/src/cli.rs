//! Experiment runner behind the `pproj` binary: table reproduction, spec-file
//! runs, DVH export and perturbed-index extraction. Every command writes CSV
//! with a header row plus a plot recipe describing the intended figure.

use crate::constraint::{
    AffineConstraint, Constraint, FeasibilityProblem, FnConstraint, OptimizationProblem,
};
use crate::error::{Error, Result};
use crate::experiments::{
    imrt_config, linear_config, reproduction_start, reproduction_system, run_variant, table_runs,
    ReproductionRow, Table,
};
use crate::kv::KeyValues;
use crate::levelset::{run_level_set_with, LevelRule, LevelSetResult, StartMode};
use crate::perturbations::{PerturbationConfig, Scheme, SurrogateStep};
use crate::problems::{
    build_imrt_problem, build_phantom, extend_linear_problem, DoseModel, LinearSystem,
    PhantomConfig,
};
use crate::projections::{ControlSequence, WeightRule, Weights};
use crate::solver::{solve_cfp, FeasibilityResult, Method, SolverConfig, StopRule};
use crate::vector::Vector;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Full-precision text form of a float: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

/// What `run` solves.
#[derive(Clone, Debug)]
pub enum ProblemSpec {
    /// The 4-row pyramid system.
    Linear4,
    /// The pyramid with duplicated rows.
    Linear8,
    /// Phantom built from its config, or loaded from an exported model.
    ImrtPhantom {
        phantom: PhantomConfig,
        model_dir: Option<PathBuf>,
    },
    /// Rows `a_1, ..., a_n, b` of A x ≤ b read from a file, with an optional
    /// objective.
    Custom {
        system: LinearSystem,
        objective: Option<CustomObjective>,
        nonnegative: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum CustomObjective {
    /// ⟨c, x⟩.
    Linear(Vec<f64>),
    /// ∥x − c∥².
    DistanceSq(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct LevelSetSpec {
    pub rule: LevelRule,
    pub max_levels: usize,
    pub start: StartMode,
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub variant: String,
    pub solver: SolverConfig,
    /// `None` runs a single feasibility solve.
    pub level_set: Option<LevelSetSpec>,
    pub x0: Vec<f64>,
    pub output: Option<PathBuf>,
    /// Table whose reference iteration count for `variant` grades the run.
    pub reference: Option<Table>,
}

fn parse_bool(kv: &KeyValues, key: &str, default: bool) -> Result<bool> {
    match kv.get_str(key) {
        None => Ok(default),
        Some("true") | Some("yes") | Some("1") => Ok(true),
        Some("false") | Some("no") | Some("0") => Ok(false),
        Some(v) => Err(Error::Config(format!(
            "`{key}` must be true or false, got `{v}`"
        ))),
    }
}

fn read_linear_system(path: &Path) -> Result<LinearSystem> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "{} line {}: bad number `{s}`",
                        path.display(),
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() < 2 {
            return Err(Error::Config(format!(
                "{} line {}: need at least one coefficient and a right-hand side",
                path.display(),
                i + 1
            )));
        }
        let (a, rhs) = vals.split_at(vals.len() - 1);
        rows.push(a.to_vec());
        b.push(rhs[0]);
    }
    LinearSystem::new(rows, b)
}

fn parse_perturbation(kv: &KeyValues) -> Result<PerturbationConfig> {
    let defaults = PerturbationConfig::none();
    let mut cfg = match kv.get_str("perturbation").unwrap_or("none") {
        "none" => PerturbationConfig::none(),
        "heavy_ball" => PerturbationConfig::heavy_ball(kv.get_or("lambda_hb", 1.0)?),
        "surrogate" => {
            let step = match kv.get_str("surrogate_step").unwrap_or("tip") {
                "tip" => SurrogateStep::TriangleTip,
                v => SurrogateStep::Fixed(v.parse().map_err(|_| {
                    Error::Config(format!(
                        "`surrogate_step` must be `tip` or a number, got `{v}`"
                    ))
                })?),
            };
            PerturbationConfig::surrogate().with_surrogate_step(step)
        }
        v => return Err(Error::Config(format!("unknown perturbation `{v}`"))),
    };
    // Consume the keys that only one kind reads so they are never "unknown".
    kv.get_str("lambda_hb");
    kv.get_str("surrogate_step");
    cfg = cfg.with_window(
        kv.get_or("eps_min", defaults.eps_min)?,
        kv.get_or("eps_max", defaults.eps_max)?,
    );
    cfg.scheme = match kv.get_str("scheme").unwrap_or("outer") {
        "outer" => Scheme::Outer,
        "inner" => Scheme::Inner,
        v => return Err(Error::Config(format!("unknown scheme `{v}`"))),
    };
    if let Some(k) = kv.get::<usize>("k_cap")? {
        cfg = cfg.with_k_cap(k);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_method(kv: &KeyValues, n: usize) -> Result<Method> {
    match kv.get_str("method").unwrap_or("simultaneous") {
        "cyclic" => {
            kv.get_str("weights");
            Ok(Method::Cyclic(match kv.get_list::<usize>("control")? {
                Some(order) => ControlSequence::explicit(n, order)?,
                None => ControlSequence::cyclic(n)?,
            }))
        }
        "simultaneous" => {
            kv.get_str("control");
            Ok(Method::Simultaneous(match kv.get_str("weights") {
                None | Some("violated") => WeightRule::Violated,
                Some("uniform") => WeightRule::Fixed(Weights::uniform(n)?),
                Some(_) => WeightRule::Fixed(Weights::new(
                    kv.get_list::<f64>("weights")?.unwrap_or_default(),
                )?),
            }))
        }
        v => Err(Error::Config(format!("unknown method `{v}`"))),
    }
}

impl ExperimentSpec {
    /// Parses a `key = value` spec. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        if kv.is_empty() {
            return Err(Error::Config("empty experiment spec".into()));
        }
        let problem_name: String = kv.require("problem")?;
        let resolve = |p: &str| base.join(p);
        let problem = match problem_name.as_str() {
            "linear4" => ProblemSpec::Linear4,
            "linear8" => ProblemSpec::Linear8,
            "imrt_phantom" => {
                let model_dir = kv.get_str("model_dir").map(resolve);
                let phantom = match kv.get_str("phantom") {
                    Some(p) => PhantomConfig::parse(&fs::read_to_string(resolve(p))?)?,
                    None => PhantomConfig::from_key_values(&kv)?,
                };
                ProblemSpec::ImrtPhantom { phantom, model_dir }
            }
            "custom" => {
                let path: String = kv.require("custom_file")?;
                let system = read_linear_system(&resolve(&path))?;
                let objective = match kv.get_str("objective") {
                    None => None,
                    Some(kind) => {
                        let c: Vec<f64> = kv
                            .get_list("objective_coeffs")?
                            .ok_or_else(|| Error::Config("missing `objective_coeffs`".into()))?;
                        if c.len() != system.dim() {
                            return Err(Error::Dimension {
                                expected: system.dim(),
                                found: c.len(),
                            });
                        }
                        Some(match kind {
                            "linear" => CustomObjective::Linear(c),
                            "distance_sq" => CustomObjective::DistanceSq(c),
                            v => return Err(Error::Config(format!("unknown objective `{v}`"))),
                        })
                    }
                };
                ProblemSpec::Custom {
                    system,
                    objective,
                    nonnegative: parse_bool(&kv, "nonnegative", false)?,
                }
            }
            v => return Err(Error::Config(format!("unknown problem `{v}`"))),
        };

        let (n_constraints, dim) = match &problem {
            ProblemSpec::Linear4 => (4, 3),
            ProblemSpec::Linear8 => (8, 3),
            ProblemSpec::ImrtPhantom { phantom, .. } => {
                (4, phantom.beams * phantom.beamlets_per_beam)
            }
            ProblemSpec::Custom {
                system, objective, ..
            } => (
                system.rows().len() + objective.is_some() as usize,
                system.dim(),
            ),
        };
        let is_imrt = matches!(problem, ProblemSpec::ImrtPhantom { .. });
        let has_objective = match &problem {
            ProblemSpec::ImrtPhantom { .. } => true,
            ProblemSpec::Custom { objective, .. } => objective.is_some(),
            _ => false,
        };

        let method = parse_method(&kv, n_constraints)?;
        let perturbation = parse_perturbation(&kv)?;
        let lambda: f64 = kv.get_or("lambda", 1.9)?;
        let cyclic = matches!(method, Method::Cyclic(_));
        let mut solver = if is_imrt {
            imrt_config(cyclic, perturbation)
        } else {
            linear_config(method.clone(), lambda, perturbation)
        };
        solver.method = method;
        solver.lambda = crate::projections::Relaxation::Constant(lambda);
        solver.max_iterations = kv.get_or("max_iterations", solver.max_iterations)?;
        solver.tolerance = kv.get_or("tolerance", solver.tolerance)?;
        solver.stop_rule = match kv.get_str("stop_rule") {
            None => solver.stop_rule,
            Some("violation_sup") => StopRule::ViolationSup,
            Some("residual_sup") => StopRule::ResidualSup,
            Some(v) => return Err(Error::Config(format!("unknown stop_rule `{v}`"))),
        };
        solver.skip_satisfied = parse_bool(&kv, "skip_satisfied", solver.skip_satisfied)?;
        solver.active_threshold = kv.get_or("active_threshold", solver.active_threshold)?;
        solver.record_iterates = true;

        let level_set = if parse_bool(&kv, "level_set", has_objective)? {
            if !has_objective {
                return Err(Error::Config(
                    "level_set needs a problem with an objective".into(),
                ));
            }
            let eps: f64 = kv.get_or("level_eps", 0.01)?;
            let rule = match kv.get_str("level_rule").unwrap_or("multiplicative") {
                "multiplicative" => LevelRule::multiplicative(eps),
                "additive" => LevelRule::additive(eps),
                v => return Err(Error::Config(format!("unknown level_rule `{v}`"))),
            };
            rule.validate()?;
            let start = match kv.get_str("start").unwrap_or("warm") {
                "warm" => StartMode::Warm,
                "cold" => StartMode::Cold,
                v => return Err(Error::Config(format!("unknown start `{v}`"))),
            };
            Some(LevelSetSpec {
                rule,
                max_levels: kv.get_or("max_levels", 200)?,
                start,
            })
        } else {
            for key in ["level_eps", "level_rule", "start", "max_levels"] {
                kv.get_str(key);
            }
            None
        };

        let x0 = match kv.get_list::<f64>("x0")? {
            Some(x) => x,
            None if is_imrt => vec![0.0; dim],
            None if matches!(problem, ProblemSpec::Custom { .. }) => vec![0.0; dim],
            None => reproduction_start().into_vec(),
        };
        if x0.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: x0.len(),
            });
        }
        let variant = kv
            .get_str("variant")
            .map(str::to_string)
            .unwrap_or_else(|| problem_name.clone());
        let reference = kv.get_str("reference").map(str::parse).transpose()?;
        let output = kv.get_str("output").map(resolve);
        kv.reject_unknown()?;
        Ok(ExperimentSpec {
            problem,
            variant,
            solver,
            level_set,
            x0,
            output,
            reference,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }
}

/// Outcome of a command: `false` when a graded result missed its reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub all_match: bool,
}

/// Runs every variant of `table` on up to `threads` worker threads and writes
/// `<table>.csv`, `<table>_trace.csv` and `<table>_plot.txt`. Output order is
/// variant order regardless of scheduling.
pub fn cmd_reproduce(table: Table, out: &Path, threads: usize) -> Result<Report> {
    let rows = reproduce_rows(table, threads)?;
    let mut report = String::from("variant,K_measured,K_paper,match\n");
    let mut trace = String::from("variant,k,stop_measure,inner_product,perturbed\n");
    for row in &rows {
        writeln!(
            report,
            "{},{},{},{}",
            row.variant, row.measured, row.reference, row.matches
        )
        .unwrap();
        for r in &row.result.trace.records {
            writeln!(
                trace,
                "{},{},{},{},{}",
                row.variant,
                r.k,
                fmt_f64(r.stop_measure),
                fmt_opt(r.inner_product),
                r.perturbed as u8
            )
            .unwrap();
        }
    }
    let id = table.id();
    let recipe = format!(
        "figure: stop measure per iteration, one line per variant\n\
         data: {id}_trace.csv grouped by variant\n\
         x: k (iteration index)\n\
         y: stop_measure (sup-norm constraint violation), log scale\n\
         markers: rows with perturbed = 1\n"
    );
    let files = vec![
        write_file(out, &format!("{id}.csv"), &report)?,
        write_file(out, &format!("{id}_trace.csv"), &trace)?,
        write_file(out, &format!("{id}_plot.txt"), &recipe)?,
    ];
    Ok(Report {
        files,
        all_match: rows.iter().all(|r| r.matches),
    })
}

fn reproduce_rows(table: Table, threads: usize) -> Result<Vec<ReproductionRow>> {
    if threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    let (fp, runs) = table_runs(table)?;
    let mut slots: Vec<Option<Result<ReproductionRow>>> = (0..runs.len()).map(|_| None).collect();
    let chunk = runs.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        for (run_chunk, slot_chunk) in runs.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            let fp = &fp;
            scope.spawn(move || {
                for ((name, cfg), slot) in run_chunk.iter().zip(slot_chunk) {
                    *slot = Some(run_variant(table, fp, name, cfg));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every variant ran"))
        .collect()
}

/// Problem instance built from a spec.
enum Built {
    Cfp(FeasibilityProblem),
    Opt(OptimizationProblem, Option<DoseModel>),
}

fn build(spec: &ExperimentSpec, seed: Option<u64>) -> Result<Built> {
    Ok(match &spec.problem {
        ProblemSpec::Linear4 => Built::Cfp(reproduction_system()?.to_feasibility_problem()?),
        ProblemSpec::Linear8 => {
            Built::Cfp(extend_linear_problem(&reproduction_system()?)?.to_feasibility_problem()?)
        }
        ProblemSpec::ImrtPhantom { phantom, model_dir } => {
            let model = match model_dir {
                Some(dir) => DoseModel::import(dir)?,
                None => {
                    let mut cfg = phantom.clone();
                    if let Some(s) = seed {
                        cfg.seed = s;
                    }
                    build_phantom(&cfg)?
                }
            };
            let problem = build_imrt_problem(&model)?;
            if spec.level_set.is_none() {
                let fp = FeasibilityProblem::new(problem.constraints().to_vec())?
                    .with_nonnegativity(true);
                Built::Cfp(fp)
            } else {
                Built::Opt(problem, Some(model))
            }
        }
        ProblemSpec::Custom {
            system,
            objective,
            nonnegative,
        } => {
            let fp = system.to_feasibility_problem()?;
            match (objective, &spec.level_set) {
                (Some(obj), Some(_)) => Built::Opt(
                    OptimizationProblem::new(
                        custom_objective(obj),
                        fp.constraints().to_vec(),
                        *nonnegative,
                    )?,
                    None,
                ),
                _ => Built::Cfp(fp.with_nonnegativity(*nonnegative)),
            }
        }
    })
}

fn custom_objective(obj: &CustomObjective) -> Constraint {
    match obj {
        CustomObjective::Linear(c) => {
            Arc::new(AffineConstraint::new(c.clone(), 0.0, "f").expect("finite coefficients"))
        }
        CustomObjective::DistanceSq(c) => {
            let c = c.clone();
            Arc::new(FnConstraint::new(c.len(), "f", move |x| {
                let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
                let v = d.iter().map(|t| t * t).sum();
                (v, d.iter().map(|t| 2.0 * t).collect())
            }))
        }
    }
}

/// Executes a spec and writes `trace.csv`, `summary.csv`, `solution.csv` and
/// their plot recipe; phantom runs also export the dose model to `model/`.
pub fn cmd_run(spec: &ExperimentSpec, out: &Path, seed: Option<u64>) -> Result<Report> {
    let x0 = Vector::new(spec.x0.clone())?;
    let mut files = Vec::new();
    let mut trace =
        String::from("k,stop_measure,objective_if_levelset,inner_product,perturbed,level_index\n");
    let mut summary = String::from("level_index,t,objective,status,iterations,perturbations\n");
    let (x_final, iterations) = match build(spec, seed)? {
        Built::Cfp(fp) => {
            let result = solve_cfp(&fp, &x0, &spec.solver)?;
            append_trace(&mut trace, &result, 0, 0, None);
            writeln!(
                summary,
                "0,,,{},{},{}",
                result.status.as_str(),
                result.iterations,
                result.perturbations
            )
            .unwrap();
            (result.x_final, result.iterations)
        }
        Built::Opt(problem, model) => {
            let ls = spec.level_set.as_ref().expect("level-set run");
            let result = run_level_set_with(
                &problem,
                &x0,
                &spec.solver,
                &ls.rule,
                ls.max_levels,
                ls.start,
            )?;
            write_level_set(&mut trace, &mut summary, &problem, &result)?;
            if let Some(model) = model {
                model.export(&out.join("model"))?;
                files.push(out.join("model"));
            }
            let k = result.iterations_to_solution();
            (result.x_star, k)
        }
    };
    let mut solution = String::from("index,x\n");
    for (i, v) in x_final.as_slice().iter().enumerate() {
        writeln!(solution, "{i},{}", fmt_f64(*v)).unwrap();
    }
    let recipe = "figure: convergence of one run\n\
                  data: trace.csv\n\
                  x: k (cumulative iteration index over levels)\n\
                  y: stop_measure, log scale; secondary y: objective_if_levelset\n\
                  markers: rows with perturbed = 1; level boundaries where level_index changes\n";
    files.push(write_file(out, "trace.csv", &trace)?);
    files.push(write_file(out, "summary.csv", &summary)?);
    files.push(write_file(out, "solution.csv", &solution)?);
    files.push(write_file(out, "trace_plot.txt", recipe)?);
    let all_match = match spec.reference {
        Some(table) => {
            let reference = crate::experiments::reference_iterations(table, &spec.variant)
                .ok_or_else(|| {
                    Error::Config(format!("no reference value for {table} {}", spec.variant))
                })?;
            crate::experiments::within_tolerance(iterations, reference)
        }
        None => true,
    };
    Ok(Report { files, all_match })
}

type ObjectiveAt<'a> = dyn Fn(&Vector) -> Option<f64> + 'a;

fn append_trace(
    out: &mut String,
    result: &FeasibilityResult,
    offset: usize,
    level: usize,
    objective: Option<&ObjectiveAt<'_>>,
) {
    for r in &result.trace.records {
        let f = match (objective, &r.x) {
            (Some(f), Some(x)) => f(x),
            _ => None,
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            offset + r.k,
            fmt_f64(r.stop_measure),
            fmt_opt(f),
            fmt_opt(r.inner_product),
            r.perturbed as u8,
            level
        )
        .unwrap();
    }
}

fn write_level_set(
    trace: &mut String,
    summary: &mut String,
    problem: &OptimizationProblem,
    result: &LevelSetResult,
) -> Result<()> {
    let objective = |x: &Vector| problem.objective_value(x).ok();
    let mut offset = 0;
    for (s, level) in result.levels.iter().enumerate() {
        append_trace(trace, &level.result, offset, s, Some(&objective));
        offset += level.result.iterations;
        writeln!(
            summary,
            "{s},{},{},{},{},{}",
            fmt_opt(level.t),
            fmt_f64(level.objective),
            level.result.status.as_str(),
            level.result.iterations,
            level.result.perturbations
        )
        .unwrap();
    }
    writeln!(
        summary,
        "total,,{},{},{},{}",
        fmt_f64(result.f_star),
        result.terminated_by.as_str(),
        result.iterations_to_solution(),
        result.perturbations()
    )
    .unwrap();
    Ok(())
}

/// Reads the last column of a solution CSV with a header row.
pub fn read_solution(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let field = l.rsplit(',').next().unwrap_or("").trim();
            field.parse().map_err(|_| {
                Error::Config(format!(
                    "{} line {}: bad number `{field}`",
                    path.display(),
                    i + 1
                ))
            })
        })
        .collect()
}

/// Fraction of each structure's voxels receiving at least each dose bin,
/// bins of width 0.5 from 0 to the maximum dose.
pub fn dvh(model: &DoseModel, x: &[f64]) -> Result<Vec<(String, f64, f64)>> {
    let dose = model.dose(x)?;
    let max = dose.iter().cloned().fold(0.0, f64::max);
    let bins = (max / 0.5).floor() as usize;
    let mut out = Vec::new();
    for s in model.structures() {
        let n = s.voxels.len() as f64;
        for b in 0..=bins {
            let d = 0.5 * b as f64;
            let hit = s.voxels.iter().filter(|&&v| dose[v] >= d).count() as f64;
            out.push((s.name.clone(), d, hit / n));
        }
    }
    Ok(out)
}

pub fn cmd_dvh(solution: &Path, model_dir: &Path, out: &Path) -> Result<Report> {
    let model = DoseModel::import(model_dir)?;
    let x = read_solution(solution)?;
    let mut body = String::from("structure,dose_bin,volume_fraction\n");
    for (name, d, v) in dvh(&model, &x)? {
        writeln!(body, "{name},{},{}", fmt_f64(d), fmt_f64(v)).unwrap();
    }
    let recipe = "figure: dose volume histogram, one curve per structure\n\
                  data: dvh.csv grouped by structure\n\
                  x: dose_bin (dose units)\n\
                  y: volume_fraction (share of the structure receiving at least that dose)\n";
    Ok(Report {
        files: vec![
            write_file(out, "dvh.csv", &body)?,
            write_file(out, "dvh_plot.txt", recipe)?,
        ],
        all_match: true,
    })
}

/// Perturbed iteration indices per variant from a trace CSV. Traces without a
/// `variant` column are named after their directory.
pub fn pert_indices(trace: &Path) -> Result<Vec<(String, usize)>> {
    let text = fs::read_to_string(trace)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", trace.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let k_col = col("k").ok_or_else(|| Error::Config("trace has no `k` column".into()))?;
    let p_col =
        col("perturbed").ok_or_else(|| Error::Config("trace has no `perturbed` column".into()))?;
    let v_col = col("variant");
    let fallback = trace
        .parent()
        .and_then(Path::file_name)
        .or_else(|| trace.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Error::Config(format!("{} line {}: malformed row", trace.display(), i + 2));
        if fields.get(p_col).ok_or_else(bad)?.trim() != "1" {
            continue;
        }
        let k: usize = fields
            .get(k_col)
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        let variant = match v_col {
            Some(c) => fields.get(c).ok_or_else(bad)?.trim().to_string(),
            None => fallback.clone(),
        };
        out.push((variant, k));
    }
    Ok(out)
}

pub fn cmd_pert_indices(trace: &Path, out: &Path) -> Result<Report> {
    let mut body = String::from("variant,k\n");
    for (v, k) in pert_indices(trace)? {
        writeln!(body, "{v},{k}").unwrap();
    }
    let recipe = "figure: indices of perturbed iterations, one row of ticks per variant\n\
                  data: pert_indices.csv grouped by variant\n\
                  x: k (iteration index)\n\
                  y: variant\n";
    Ok(Report {
        files: vec![
            write_file(out, "pert_indices.csv", &body)?,
            write_file(out, "pert_indices_plot.txt", recipe)?,
        ],
        all_match: true,
    })
}
