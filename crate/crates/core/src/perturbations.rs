//! Zigzag detection and the heavy-ball and surrogate-constraint perturbations.

use crate::error::{check_dim, Error, Result};
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationKind {
    None,
    HeavyBall,
    Surrogate,
}

/// Where the perturbation enters: before the operator (inner) or after it (outer).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Inner,
    Outer,
}

/// Step length applied to the surrogate direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurrogateStep {
    /// ‖p‖² / ‖d_sc‖², which lands on the tip of the zigzag triangle.
    TriangleTip,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
    pub scheme: Scheme,
    pub eps_min: f64,
    pub eps_max: f64,
    pub lambda_hb: f64,
    pub surrogate_step: SurrogateStep,
    /// Perturbations are allowed for k ≤ k_cap; `None` uses the solver's
    /// iteration cap.
    pub k_cap: Option<usize>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            kind: PerturbationKind::None,
            scheme: Scheme::Outer,
            eps_min: 1e-6,
            eps_max: 6e-2,
            lambda_hb: 0.0,
            surrogate_step: SurrogateStep::TriangleTip,
            k_cap: None,
        }
    }
}

impl PerturbationConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn heavy_ball(lambda_hb: f64) -> Self {
        PerturbationConfig {
            kind: PerturbationKind::HeavyBall,
            lambda_hb,
            ..Self::default()
        }
    }

    pub fn surrogate() -> Self {
        PerturbationConfig {
            kind: PerturbationKind::Surrogate,
            ..Self::default()
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_window(mut self, eps_min: f64, eps_max: f64) -> Self {
        self.eps_min = eps_min;
        self.eps_max = eps_max;
        self
    }

    pub fn with_surrogate_step(mut self, step: SurrogateStep) -> Self {
        self.surrogate_step = step;
        self
    }

    pub fn with_k_cap(mut self, k_cap: usize) -> Self {
        self.k_cap = Some(k_cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_min < self.eps_max && self.eps_max < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < eps_min < eps_max < 1, got {} and {}",
                self.eps_min, self.eps_max
            )));
        }
        if !self.lambda_hb.is_finite() || self.lambda_hb < 0.0 {
            return Err(Error::Config(format!(
                "lambda_hb must be finite and nonnegative, got {}",
                self.lambda_hb
            )));
        }
        if let SurrogateStep::Fixed(s) = self.surrogate_step {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::Config(format!(
                    "surrogate step must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Memory carried between iterations for the trigger conditions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepHistory {
    pub p_prev: Option<Vector>,
    pub c_prev: bool,
    pub last_inner_product: Option<f64>,
}

/// ⟨p̄_prev, p̄_cur⟩ of the normalized steps.
pub fn normalized_inner_product(p_prev: &Vector, p_cur: &Vector) -> Result<f64> {
    let a = p_prev.normalized()?;
    let b = p_cur.normalized()?;
    a.dot(&b)
}

/// Whether an inner product lies in [−1 + eps_min, −1 + eps_max].
pub fn in_window(inner_product: f64, eps_min: f64, eps_max: f64) -> bool {
    inner_product >= -1.0 + eps_min && inner_product <= -1.0 + eps_max
}

/// Zigzag condition: consecutive steps point in almost opposite directions.
pub fn condition_c(p_prev: &Vector, p_cur: &Vector, eps_min: f64, eps_max: f64) -> Result<bool> {
    Ok(in_window(
        normalized_inner_product(p_prev, p_cur)?,
        eps_min,
        eps_max,
    ))
}

/// Outer-scheme trigger: the zigzag condition just became true.
pub fn condition_tilde_c(c_prev: bool, c_cur: bool) -> bool {
    !c_prev && c_cur
}

/// p̄_prev + p̄_cur.
pub fn heavy_ball_direction(p_prev: &Vector, p_cur: &Vector) -> Result<Vector> {
    p_prev.normalized()?.add(&p_cur.normalized()?)
}

/// Projection of x + p_cur onto {z : ⟨z − x, p_prev⟩ ≥ 0}, minus x, together
/// with the triangle-tip step length ‖p_cur‖² / ‖d_sc‖².
pub fn surrogate_direction(x: &Vector, p_prev: &Vector, p_cur: &Vector) -> Result<(Vector, f64)> {
    check_dim(x.dim(), p_prev.dim())?;
    check_dim(x.dim(), p_cur.dim())?;
    let nsq = p_prev.norm_sq();
    let psq = p_cur.norm_sq();
    if nsq == 0.0 || psq == 0.0 {
        return Err(Error::DegenerateStep);
    }
    let s = p_cur.dot(p_prev)?;
    let d = if s < 0.0 {
        p_cur.add_scaled(-s / nsq, p_prev)?
    } else {
        p_cur.clone()
    };
    let dsq = d.norm_sq();
    if dsq <= f64::EPSILON * f64::EPSILON * psq {
        return Err(Error::DegenerateSurrogate);
    }
    Ok((d, psq / dsq))
}

/// β_k = 1 for k ≤ k_cap, else 0.
pub fn beta_schedule(k: usize, k_cap: usize) -> f64 {
    if k <= k_cap {
        1.0
    } else {
        0.0
    }
}

fn scaled_direction(
    cfg: &PerturbationConfig,
    x: &Vector,
    p_prev: &Vector,
    p_cur: &Vector,
) -> Result<Vector> {
    match cfg.kind {
        PerturbationKind::None => Ok(Vector::zeros(x.dim())),
        PerturbationKind::HeavyBall => {
            Ok(heavy_ball_direction(p_prev, p_cur)?.scale(cfg.lambda_hb))
        }
        PerturbationKind::Surrogate => {
            let (d, tip) = surrogate_direction(x, p_prev, p_cur)?;
            let step = match cfg.surrogate_step {
                SurrogateStep::TriangleTip => tip,
                SurrogateStep::Fixed(s) => s,
            };
            Ok(d.scale(step))
        }
    }
}

/// Outer perturbation v = (step length · direction) − λ p_cur when triggered,
/// so that T(y) + v replaces the operator step by the perturbed step.
pub fn outer_perturbation_vector(
    cfg: &PerturbationConfig,
    x: &Vector,
    p_prev: &Vector,
    p_cur: &Vector,
    lambda: f64,
    trigger: bool,
) -> Result<Vector> {
    if !trigger || cfg.kind == PerturbationKind::None {
        return Ok(Vector::zeros(x.dim()));
    }
    scaled_direction(cfg, x, p_prev, p_cur)?.add_scaled(-lambda, p_cur)
}

/// Inner perturbation v = step length · direction when triggered; the
/// operator is then applied at x + v.
pub fn inner_perturbation_vector(
    cfg: &PerturbationConfig,
    x: &Vector,
    p_prev: &Vector,
    p_cur: &Vector,
    trigger: bool,
) -> Result<Vector> {
    if !trigger || cfg.kind == PerturbationKind::None {
        return Ok(Vector::zeros(x.dim()));
    }
    scaled_direction(cfg, x, p_prev, p_cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn close(a: &Vector, b: &[f64], tol: f64) -> bool {
        a.as_slice()
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn zigzag_condition() {
        assert!(condition_c(&v(&[1.0, 0.0]), &v(&[-1.0, 0.01]), 1e-6, 6e-2).unwrap());
        assert!(!condition_c(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]), 1e-6, 6e-2).unwrap());
        assert!(!condition_c(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0]), 1e-6, 6e-2).unwrap());
        assert!(matches!(
            condition_c(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), 1e-6, 6e-2),
            Err(Error::DegenerateStep)
        ));
    }

    #[test]
    fn tilde_condition() {
        assert!(condition_tilde_c(false, true));
        assert!(!condition_tilde_c(true, true));
        assert!(!condition_tilde_c(false, false));
        assert!(!condition_tilde_c(true, false));
    }

    #[test]
    fn heavy_ball_examples() {
        let d = heavy_ball_direction(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 0.0]);
        let d = heavy_ball_direction(&v(&[2.0, 0.0]), &v(&[0.0, 3.0])).unwrap();
        assert_eq!(d.as_slice(), &[1.0, 1.0]);
        let d = heavy_ball_direction(&v(&[1.0, 0.0]), &v(&[-1.0, 0.01])).unwrap();
        let r = 1.0001_f64.sqrt();
        assert!(close(&d, &[1.0 - 1.0 / r, 0.01 / r], 1e-15));
        assert!((d[0] - 4.9998e-5).abs() < 5e-9 && (d[1] - 9.99950e-3).abs() < 1e-8);
    }

    #[test]
    fn surrogate_examples() {
        let x = v(&[0.0, 0.0]);
        let (d, l) = surrogate_direction(&x, &v(&[0.0, -2.0]), &v(&[1.0, 1.0])).unwrap();
        assert!(close(&d, &[1.0, 0.0], 1e-15));
        assert!((l - 2.0).abs() < 1e-15);
        let (d, l) = surrogate_direction(&x, &v(&[0.0, 1.0]), &v(&[1.0, 0.0])).unwrap();
        assert_eq!(d.as_slice(), &[1.0, 0.0]);
        assert_eq!(l, 1.0);
        assert!(matches!(
            surrogate_direction(&x, &v(&[0.0, 1.0]), &v(&[0.0, -1.0])),
            Err(Error::DegenerateSurrogate)
        ));
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_schedule(0, 1000), 1.0);
        assert_eq!(beta_schedule(1000, 1000), 1.0);
        assert_eq!(beta_schedule(1001, 1000), 0.0);
    }

    #[test]
    fn outer_vectors() {
        let x = v(&[0.0, 0.0]);
        let hb = PerturbationConfig::heavy_ball(8.0);
        let z = outer_perturbation_vector(&hb, &x, &v(&[1.0, 0.0]), &v(&[-1.0, 0.01]), 1.9, false)
            .unwrap();
        assert!(z.is_zero());
        // With d_HB = (0, 0.01) this is 8·(0, 0.01) − 1.9·(−1, 0.01).
        let d = v(&[0.0, 0.01]);
        let expect = d.scale(8.0).add_scaled(-1.9, &v(&[-1.0, 0.01])).unwrap();
        assert!(close(&expect, &[1.9, 0.061], 1e-15));
        let p_prev = v(&[1.0, 0.0]);
        let p_cur = v(&[-1.0, 0.01]);
        let got = outer_perturbation_vector(&hb, &x, &p_prev, &p_cur, 1.9, true).unwrap();
        let want = heavy_ball_direction(&p_prev, &p_cur)
            .unwrap()
            .scale(8.0)
            .add_scaled(-1.9, &p_cur)
            .unwrap();
        assert_eq!(got, want);

        let sc = PerturbationConfig::surrogate();
        let got = outer_perturbation_vector(&sc, &x, &v(&[0.0, -2.0]), &v(&[1.0, 1.0]), 1.9, true)
            .unwrap();
        assert!(close(&got, &[0.1, -1.9], 1e-14));
    }

    #[test]
    fn inner_vectors() {
        let x = v(&[0.0, 0.0]);
        let sc = PerturbationConfig::surrogate();
        let got =
            inner_perturbation_vector(&sc, &x, &v(&[0.0, -2.0]), &v(&[1.0, 1.0]), true).unwrap();
        assert!(close(&got, &[2.0, 0.0], 1e-14));
        assert!(
            inner_perturbation_vector(&sc, &x, &v(&[0.0, -2.0]), &v(&[1.0, 1.0]), false)
                .unwrap()
                .is_zero()
        );
        let hb = PerturbationConfig::heavy_ball(8.0);
        let got =
            inner_perturbation_vector(&hb, &x, &v(&[2.0, 0.0]), &v(&[0.0, 3.0]), true).unwrap();
        assert_eq!(got.as_slice(), &[8.0, 8.0]);
        let fixed = PerturbationConfig::surrogate().with_surrogate_step(SurrogateStep::Fixed(1.0));
        let got =
            inner_perturbation_vector(&fixed, &x, &v(&[0.0, -2.0]), &v(&[1.0, 1.0]), true).unwrap();
        assert!(close(&got, &[1.0, 0.0], 1e-15));
    }

    #[test]
    fn config_validation() {
        assert!(PerturbationConfig::default().validate().is_ok());
        assert!(PerturbationConfig::default()
            .with_window(0.1, 0.05)
            .validate()
            .is_err());
        assert!(PerturbationConfig::default()
            .with_window(0.0, 0.05)
            .validate()
            .is_err());
        assert!(PerturbationConfig::heavy_ball(f64::INFINITY)
            .validate()
            .is_err());
    }
}
