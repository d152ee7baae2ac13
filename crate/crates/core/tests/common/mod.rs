#![allow(dead_code)]

use perturbed_projections::problems::phantom::Disk;
use perturbed_projections::problems::{build_phantom, DoseModel, PhantomConfig};
use perturbed_projections::{AffineConstraint, Constraint, FeasibilityProblem, Vector};
use std::sync::Arc;

pub fn v(c: &[f64]) -> Vector {
    Vector::new(c.to_vec()).unwrap()
}

/// Phantom small enough for per-case property tests.
pub fn small_phantom() -> DoseModel {
    let disk = |dx, dy, radius| Disk { dx, dy, radius };
    build_phantom(&PhantomConfig {
        grid_size: 24,
        beams: 3,
        beamlets_per_beam: 8,
        beamlet_spacing: 1.5,
        tumor: disk(0.0, 0.0, 3.0),
        myelon: disk(0.0, 7.0, 1.5),
        left_parotis: disk(-7.0, -2.0, 2.0),
        right_parotis: disk(7.0, -2.0, 2.0),
        ..PhantomConfig::default()
    })
    .unwrap()
}

/// Affine system a_i·x ≤ a_i·z + slack_i, so `z` is feasible.
pub fn feasible_affine(rows: &[Vec<f64>], z: &[f64], slack: &[f64]) -> FeasibilityProblem {
    let cs: Vec<Constraint> = rows
        .iter()
        .zip(slack)
        .enumerate()
        .map(|(i, (a, s))| {
            let b = a.iter().zip(z).map(|(p, q)| p * q).sum::<f64>() + s;
            Arc::new(AffineConstraint::new(a.clone(), b, format!("c{i}")).unwrap()) as Constraint
        })
        .collect();
    FeasibilityProblem::new(cs).unwrap()
}
