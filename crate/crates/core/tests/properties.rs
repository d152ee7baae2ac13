mod common;

use common::{feasible_affine, small_phantom, v};
use perturbed_projections::cli::fmt_f64;
use perturbed_projections::constraint::{eval_constraint, violation_sup_norm, FnConstraint};
use perturbed_projections::levelset::{run_level_set, LevelRule};
use perturbed_projections::perturbations::{
    heavy_ball_direction, in_window, normalized_inner_product, surrogate_direction,
    PerturbationConfig,
};
use perturbed_projections::problems::{
    build_linear_problem, dose_function_eval, extend_linear_problem, DoseFunctionSpec, DoseRole,
};
use perturbed_projections::projections::{
    projection_term, projection_terms, simultaneous_step, ControlSequence, WeightRule, Weights,
};
use perturbed_projections::solver::{solve_cfp, stop_measure, Method, SolverConfig, Status};
use perturbed_projections::{
    AffineConstraint, Constraint, ConvexConstraint, FeasibilityProblem, OptimizationProblem, Vector,
};
use proptest::prelude::*;
use std::sync::Arc;

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

fn row(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n).prop_filter("non-degenerate row", |r| {
        r.iter().map(|x| x * x).sum::<f64>() > 0.01
    })
}

/// Random affine system in R^3 with a known feasible point.
fn feasible_system() -> impl Strategy<Value = (FeasibilityProblem, Vec<f64>)> {
    (2usize..6)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(row(3), m),
                coords(3),
                prop::collection::vec(0.0..1.0f64, m),
            )
        })
        .prop_map(|(rows, z, slack)| (feasible_affine(&rows, &z, &slack), z))
}

/// Pairs of nonzero vectors whose normalized inner product lies in the
/// trigger window [−1 + eps_min, −1 + eps_max].
fn triggered_pair(eps_min: f64, eps_max: f64) -> impl Strategy<Value = (Vector, Vector)> {
    (row(3), row(3), 0.0..1.0f64, 0.1..10.0f64, 0.1..10.0f64).prop_filter_map(
        "pair inside window",
        move |(a, b, t, ra, rb)| {
            // Rotate −a towards b until the angle gap matches the target.
            let a = v(&a).normalized().ok()?;
            let b = v(&b);
            let ortho = b.add_scaled(-b.dot(&a).ok()?, &a).ok()?;
            let u = ortho.normalized().ok()?;
            let target = -1.0 + eps_min + t * (eps_max - eps_min);
            let s = (1.0 - target * target).max(0.0).sqrt();
            let cur = a.scale(target).add_scaled(s, &u).ok()?;
            let ip = normalized_inner_product(&a, &cur).ok()?;
            in_window(ip, eps_min, eps_max).then(|| (a.scale(ra), cur.scale(rb)))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cutter_inequality_affine(a in row(4), z in coords(4), x in coords(4), slack in 0.0..2.0f64) {
        let fp = feasible_affine(&[a], &z, &[slack]);
        let (x, z) = (v(&x), v(&z));
        let p = projection_term(fp.constraints()[0].as_ref(), &x).unwrap();
        let lhs = p.dot(&z.sub(&x).unwrap()).unwrap();
        prop_assert!(lhs >= p.norm_sq() - 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn cutter_inequality_ball(c in coords(3), u in row(3), r in 0.5..5.0f64, x in coords(3)) {
        // φ(x) = ∥x − c∥² − r², z strictly inside the ball.
        let cc = c.clone();
        let ball = FnConstraint::new(3, "ball", move |x: &[f64]| {
            let d: Vec<f64> = x.iter().zip(&cc).map(|(a, b)| a - b).collect();
            let val = d.iter().map(|t| t * t).sum::<f64>() - r * r;
            (val, d.iter().map(|t| 2.0 * t).collect())
        });
        let z: Vec<f64> = c.iter().zip(&u).map(|(ci, ui)| ci + 0.5 * r * ui).collect();
        let (x, z) = (v(&x), v(&z));
        prop_assume!(ball.value(z.as_slice()) <= 0.0);
        let p = projection_term(&ball, &x).unwrap();
        let lhs = p.dot(&z.sub(&x).unwrap()).unwrap();
        prop_assert!(lhs >= p.norm_sq() - 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn eval_constraint_is_bitwise_pure(a in row(5), b in -3.0..3.0f64, x in coords(5)) {
        let c = AffineConstraint::new(a, b, "c").unwrap();
        let x = v(&x);
        let first = eval_constraint(&c, &x).unwrap();
        let second = eval_constraint(&c, &x).unwrap();
        prop_assert_eq!(first.0.to_bits(), second.0.to_bits());
        prop_assert_eq!(first.1, second.1);
    }

    #[test]
    fn violation_zero_iff_all_constraints_hold((fp, z) in feasible_system(), x in coords(3)) {
        let x = v(&x);
        let direct = fp.constraints().iter().all(|c| c.value(x.as_slice()) <= 0.0);
        prop_assert_eq!(violation_sup_norm(&fp, &x).unwrap() == 0.0, direct);
        prop_assert_eq!(violation_sup_norm(&fp, &v(&z)).unwrap(), 0.0);
    }

    #[test]
    fn zero_step_implies_feasible((fp, _z) in feasible_system(), x in coords(3)) {
        let x = v(&x);
        let w = Weights::uniform(fp.len()).unwrap();
        let terms = projection_terms(&fp, &x).unwrap();
        if terms.iter().all(Vector::is_zero) {
            prop_assert_eq!(violation_sup_norm(&fp, &x).unwrap(), 0.0);
        }
        let p = simultaneous_step(&fp, &x, &w).unwrap();
        if violation_sup_norm(&fp, &x).unwrap() == 0.0 {
            prop_assert!(p.is_zero());
        }
    }

    #[test]
    fn simultaneous_step_permutation_invariant(
        (fp, _z) in feasible_system(),
        x in coords(3),
        raw_w in prop::collection::vec(0.1..1.0f64, 6),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let m = fp.len();
        let total: f64 = raw_w[..m].iter().sum();
        let w: Vec<f64> = raw_w[..m].iter().map(|t| t / total).collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let permuted = FeasibilityProblem::new(
            order.iter().map(|&i| fp.constraints()[i].clone()).collect(),
        ).unwrap();
        let pw = order.iter().map(|&i| w[i]).collect();
        let x = v(&x);
        let a = simultaneous_step(&fp, &x, &Weights::new(w).unwrap()).unwrap();
        let b = simultaneous_step(&permuted, &x, &Weights::new(pw).unwrap()).unwrap();
        let scale = a.norm().max(1e-300);
        prop_assert!(a.sub(&b).unwrap().norm() <= 1e-12 * scale);
    }

    #[test]
    fn cyclic_control_has_period_n(n in 1usize..12, k in 0usize..50) {
        let ctrl = ControlSequence::cyclic(n).unwrap();
        let seen: Vec<usize> = (k * n..k * n + n).map(|nu| ctrl.index(nu)).collect();
        prop_assert_eq!(seen, (1..=n).collect::<Vec<_>>());
    }

    #[test]
    fn fejer_inequality_for_simultaneous_steps(
        (fp, z) in feasible_system(),
        x0 in coords(3),
        lambda in 0.1..1.9f64,
    ) {
        let m = fp.len();
        let w = Weights::uniform(m).unwrap();
        let mut cfg = SolverConfig::new(Method::Simultaneous(WeightRule::Fixed(w.clone())), lambda);
        cfg.max_iterations = 200;
        let z = v(&z);
        let r = solve_cfp(&fp, &v(&x0), &cfg).unwrap();
        let xs = r.trace.iterates();
        for pair in xs.windows(2) {
            let (x, next) = (pair[0], pair[1]);
            let terms = projection_terms(&fp, x).unwrap();
            let gain: f64 = terms.iter().zip(w.as_slice()).map(|(t, wi)| wi * t.norm_sq()).sum();
            let before = x.sub(&z).unwrap().norm_sq();
            let after = next.sub(&z).unwrap().norm_sq();
            let bound = before - lambda * (2.0 - lambda) * gain;
            prop_assert!(after <= bound + 1e-9 * before.max(1.0), "{after} > {bound}");
        }
    }

    #[test]
    fn heavy_ball_direction_bounded_when_triggered((a, b) in triggered_pair(1e-6, 6e-2)) {
        let d = heavy_ball_direction(&a, &b).unwrap();
        prop_assert!(d.norm() <= (2.0 * 6e-2f64).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn surrogate_geometry((a, b) in triggered_pair(1e-6, 6e-2), x in coords(3)) {
        let x = v(&x);
        let (d, tip) = surrogate_direction(&x, &a, &b).unwrap();
        let dot = d.dot(&a).unwrap();
        prop_assert!(dot.abs() <= 1e-10 * d.norm() * a.norm());
        let cos = -normalized_inner_product(&a, &b).unwrap();
        let sin = (1.0 - cos * cos).sqrt();
        let step = d.scale(tip).norm();
        prop_assert!((step * sin - b.norm()).abs() <= 1e-10 * b.norm());
        let eps = 1e-6f64;
        prop_assert!(step <= b.norm() / (2.0 * eps - eps * eps).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn extension_preserves_solution_set(x in coords(3)) {
        let sys = build_linear_problem(60.0, 5.0, 100.0).unwrap();
        let ext = extend_linear_problem(&sys).unwrap();
        let x = v(&x);
        let a = violation_sup_norm(&sys.to_feasibility_problem().unwrap(), &x).unwrap();
        let b = violation_sup_norm(&ext.to_feasibility_problem().unwrap(), &x).unwrap();
        prop_assert_eq!(a == 0.0, b == 0.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn floats_round_trip_through_text(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }
}

fn solver_cases() -> Vec<SolverConfig> {
    let mut out = Vec::new();
    for pert in [
        PerturbationConfig::none(),
        PerturbationConfig::heavy_ball(8.0),
        PerturbationConfig::surrogate(),
    ] {
        for method in [
            Method::Simultaneous(WeightRule::Violated),
            Method::Cyclic(ControlSequence::cyclic(4).unwrap()),
        ] {
            let mut cfg = SolverConfig::new(method, 1.9);
            cfg.perturbation = pert.clone();
            cfg.max_iterations = 5000;
            cfg.tolerance = 1e-10;
            out.push(cfg);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_runs_are_deterministic_and_consistent(x0 in coords(3)) {
        let fp = build_linear_problem(60.0, 5.0, 100.0).unwrap().to_feasibility_problem().unwrap();
        let x0 = v(&x0);
        for cfg in solver_cases() {
            let a = solve_cfp(&fp, &x0, &cfg).unwrap();
            let b = solve_cfp(&fp, &x0, &cfg).unwrap();
            prop_assert_eq!(&a.trace, &b.trace);
            prop_assert_eq!(a.x_final.as_slice(), b.x_final.as_slice());
            if a.status == Status::Solved {
                prop_assert!(stop_measure(&fp, &a.x_final, cfg.stop_rule).unwrap() <= cfg.tolerance);
            }
            let p = &cfg.perturbation;
            let recs = &a.trace.records;
            for (i, r) in recs.iter().enumerate() {
                if r.perturbed {
                    let ip = r.inner_product.unwrap();
                    prop_assert!(in_window(ip, p.eps_min, p.eps_max));
                    if i > 0 {
                        let prev = recs[i - 1].inner_product;
                        prop_assert!(!prev.is_some_and(|q| in_window(q, p.eps_min, p.eps_max)));
                    }
                }
            }
        }
    }

    #[test]
    fn unperturbed_simultaneous_is_fejer_monotone(x0 in coords(3)) {
        let fp = build_linear_problem(60.0, 5.0, 100.0).unwrap().to_feasibility_problem().unwrap();
        let z = v(&[0.0, 0.0, 100.0]);
        let mut cfg = SolverConfig::new(Method::Simultaneous(WeightRule::Violated), 1.9);
        cfg.max_iterations = 2000;
        let r = solve_cfp(&fp, &v(&x0), &cfg).unwrap();
        let d: Vec<f64> = r.trace.iterates().iter().map(|x| x.sub(&z).unwrap().norm()).collect();
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn level_set_levels_decrease_and_warm_start(c in coords(2), r0 in row(2), r1 in row(2)) {
        // min ∥x − c∥² over two halfplanes through the origin region.
        let cc = c.clone();
        let f: Constraint = Arc::new(FnConstraint::new(2, "f", move |x: &[f64]| {
            let d: Vec<f64> = x.iter().zip(&cc).map(|(a, b)| a - b).collect();
            (d.iter().map(|t| t * t).sum(), d.iter().map(|t| 2.0 * t).collect())
        }));
        let g = |a: Vec<f64>| -> Constraint { Arc::new(AffineConstraint::new(a, 1.0, "g").unwrap()) };
        let problem = OptimizationProblem::new(f, vec![g(r0), g(r1)], false).unwrap();
        let mut cfg = SolverConfig::new(Method::Simultaneous(WeightRule::Violated), 1.5);
        cfg.max_iterations = 2000;
        let res = run_level_set(&problem, &v(&[0.0, 0.0]), &cfg, &LevelRule::additive(0.05), 400).unwrap();
        let solved: Vec<_> = res.solved_levels().collect();
        for w in solved.windows(2) {
            let (prev, next) = (w[0], w[1]);
            let t = next.t.unwrap();
            prop_assert!(t < prev.objective);
            if let Some(pt) = prev.t {
                prop_assert!(t < pt);
            }
        }
        for w in res.levels.windows(2) {
            if w[0].solved() {
                let first = w[1].result.trace.records[0].x.as_ref().unwrap();
                prop_assert_eq!(first.as_slice(), w[0].result.x_final.as_slice());
            }
        }
    }
}

fn dose_specs() -> Vec<DoseFunctionSpec> {
    let spec = |role, s: &str| DoseFunctionSpec::new(role, s).unwrap();
    vec![
        spec(DoseRole::UpperTail { u: 3.0 }, "tumor"),
        spec(DoseRole::LowerTail { l: 5.0 }, "tumor"),
        spec(DoseRole::Eud { p: 2.0 }, "myelon"),
        spec(DoseRole::Eud { p: 3.0 }, "unclassified"),
        spec(DoseRole::Conformity { p: 2.0, d_ref: 4.0 }, "tumor"),
        spec(DoseRole::Conformity { p: 1.5, d_ref: 4.0 }, "left_parotis"),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dose_is_linear(
        x in prop::collection::vec(0.0..2.0f64, 24),
        y in prop::collection::vec(0.0..2.0f64, 24),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let model = small_phantom();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let dc = model.dose(&combo).unwrap();
        let dx = model.dose(&x).unwrap();
        let dy = model.dose(&y).unwrap();
        for i in 0..dc.len() {
            let expect = a * dx[i] + b * dy[i];
            prop_assert!((dc[i] - expect).abs() <= 1e-12 * (1.0 + dx[i].abs() + dy[i].abs()) * 4.0);
        }
    }

    #[test]
    fn dose_functions_are_convex(
        x in prop::collection::vec(0.0..2.0f64, 24),
        y in prop::collection::vec(0.0..2.0f64, 24),
        theta in 0.01..0.99f64,
    ) {
        let model = small_phantom();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(p, q)| theta * p + (1.0 - theta) * q).collect();
        for spec in dose_specs() {
            let f = |z: &[f64]| dose_function_eval(&spec, &model, &v(z)).unwrap().0;
            let (fx, fy, fm) = (f(&x), f(&y), f(&mid));
            let chord = theta * fx + (1.0 - theta) * fy;
            prop_assert!(fm <= chord + 1e-9 * chord.abs().max(1.0), "{spec:?}: {fm} > {chord}");
        }
    }
}

#[test]
fn triggered_pair_generator_hits_window() {
    let ip = normalized_inner_product(&v(&[1.0, 0.0]), &v(&[-1.0, 0.01])).unwrap();
    assert!(in_window(ip, 1e-6, 6e-2));
    assert!(!in_window(-1.0, 1e-6, 6e-2));
}
