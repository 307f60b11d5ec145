//! Riccati system of the CIR bond price `F(tau, x) = exp(-A(tau) - B(tau)^T x)`:
//! ```text
//! A' = b^T B,  A(0) = 0
//! B' = H(B),   B(0) = 0,   H(v) = -1/2 sigma2 ∘ v ∘ v + beta^T v + rho
//! ```
//! and the extended transform `(phi, psi)` with `psi(0) = u`, which gives
//! `E_x[exp(-∫ r ds) exp(u^T X_t)] = exp(phi(t,u) + psi(t,u)^T x)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CirModel;
use crate::ode::{self, OdeError, OdeOptions, StepStats, Termination, Trajectory};

/// Default escape bound for [`extended_transform`].
pub const DEFAULT_BLOWUP_BOUND: f64 = 1e8;

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("tau = {tau} outside solved range [0, {tau_max}]")]
    OutOfGrid { tau: f64, tau_max: f64 },
    #[error("closed form undefined: beta^2 + 4 rho = {0} <= 0")]
    Domain(f64),
}

/// `H(v) = -1/2 sigma2 ∘ v ∘ v + beta^T v + rho`.
pub fn h_map(model: &CirModel, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.d];
    h_map_into(model, v, &mut out);
    out
}

fn h_map_into(model: &CirModel, v: &[f64], out: &mut [f64]) {
    let d = model.d;
    for i in 0..d {
        let mut acc = -0.5 * model.sigma2[i] * v[i] * v[i] + model.rho[i];
        for j in 0..d {
            acc += model.beta[j][i] * v[j];
        }
        out[i] = acc;
    }
}

/// `A`, `B` on a uniform grid plus the dense solution for any `tau` in range.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub tau_grid: Vec<f64>,
    pub a: Vec<f64>,
    /// `b[k]` is `B(tau_grid[k])`.
    pub b: Vec<Vec<f64>>,
    pub step_meta: StepStats,
    trajectory: Trajectory,
}

impl RiccatiSolution {
    pub fn d(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    pub fn tau_max(&self) -> f64 {
        *self.tau_grid.last().expect("non-empty grid")
    }

    /// `(A(tau), B(tau))` from the continuous extension of the solver.
    pub fn eval(&self, tau: f64) -> Result<(f64, Vec<f64>), RiccatiError> {
        let tau_max = self.tau_max();
        if !(0.0..=tau_max).contains(&tau) {
            return Err(RiccatiError::OutOfGrid { tau, tau_max });
        }
        let mut y = vec![0.0; self.d() + 1];
        self.trajectory.eval(tau, &mut y);
        let a = y[0];
        Ok((a, y.split_off(1)))
    }

    /// `(A'(tau), B'(tau))` differentiated from the continuous extension.
    pub fn eval_derivative(&self, tau: f64) -> Result<(f64, Vec<f64>), RiccatiError> {
        let tau_max = self.tau_max();
        if !(0.0..=tau_max).contains(&tau) {
            return Err(RiccatiError::OutOfGrid { tau, tau_max });
        }
        let mut y = vec![0.0; self.d() + 1];
        self.trajectory.eval_derivative(tau, &mut y);
        let a = y[0];
        Ok((a, y.split_off(1)))
    }
}

/// Solves for `(A, B)` on `n_points` uniformly spaced maturities in `[0, tau_max]`.
pub fn solve_riccati(
    model: &CirModel,
    tau_max: f64,
    n_points: usize,
) -> Result<RiccatiSolution, RiccatiError> {
    solve_riccati_with(model, tau_max, n_points, &OdeOptions::default())
}

pub fn solve_riccati_with(
    model: &CirModel,
    tau_max: f64,
    n_points: usize,
    opts: &OdeOptions,
) -> Result<RiccatiSolution, RiccatiError> {
    if !(tau_max > 0.0) || !tau_max.is_finite() {
        return Err(RiccatiError::Argument(format!(
            "tau_max must be > 0, got {tau_max}"
        )));
    }
    if n_points < 2 {
        return Err(RiccatiError::Argument(format!(
            "n_points must be >= 2, got {n_points}"
        )));
    }
    let d = model.d;
    let field = |y: &[f64], dy: &mut [f64]| {
        let bvec = &y[1..];
        dy[0] = model.b.iter().zip(bvec).map(|(x, y)| x * y).sum();
        h_map_into(model, bvec, &mut dy[1..]);
    };
    let y0 = vec![0.0; d + 1];
    let trajectory = ode::integrate(field, &y0, tau_max, opts, |_, _| false)?;

    let tau_grid: Vec<f64> = (0..n_points)
        .map(|k| {
            if k + 1 == n_points {
                tau_max
            } else {
                tau_max * k as f64 / (n_points - 1) as f64
            }
        })
        .collect();
    let mut a = Vec::with_capacity(n_points);
    let mut b = Vec::with_capacity(n_points);
    let mut y = vec![0.0; d + 1];
    for &tau in &tau_grid {
        trajectory.eval(tau, &mut y);
        a.push(y[0]);
        b.push(y[1..].to_vec());
    }
    Ok(RiccatiSolution {
        tau_grid,
        a,
        b,
        step_meta: trajectory.stats,
        trajectory,
    })
}

/// Closed-form solution of the scalar equation `B' = -B^2 + beta B + rho`,
/// `B(0) = 0` (the `sigma^2 = 2` case):
/// ```text
/// B(tau) = 2 rho (e^{theta tau} - 1) / ((theta - beta)(e^{theta tau} - 1) + 2 theta)
/// theta  = sqrt(beta^2 + 4 rho)
/// ```
/// evaluated with `e^{-theta tau}` so that large `tau` cannot overflow.
pub fn closed_form_scalar_b(beta: f64, rho: f64, tau: f64) -> Result<f64, RiccatiError> {
    let theta2 = beta * beta + 4.0 * rho;
    if !(theta2 > 0.0) {
        return Err(RiccatiError::Domain(theta2));
    }
    if tau < 0.0 {
        return Err(RiccatiError::Argument(format!(
            "tau must be >= 0, got {tau}"
        )));
    }
    let theta = theta2.sqrt();
    let decay = (-theta * tau).exp();
    let growth = -(-theta * tau).exp_m1();
    Ok(2.0 * rho * growth / ((theta - beta) * growth + 2.0 * theta * decay))
}

/// Result of the extended transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformSolution {
    pub t: f64,
    pub u: Vec<f64>,
    pub phi: f64,
    pub psi: Vec<f64>,
    pub blew_up: bool,
    /// Time at which `psi` escaped the bound, when `blew_up`.
    pub blow_up_time: Option<f64>,
    pub bound: f64,
}

/// `(phi(t,u), psi(t,u))` with the default escape bound.
pub fn extended_transform(
    model: &CirModel,
    u: &[f64],
    t: f64,
) -> Result<TransformSolution, RiccatiError> {
    extended_transform_with(model, u, t, DEFAULT_BLOWUP_BOUND)
}

/// Integrates `phi' = b^T psi`, `psi' = -H(-psi)`, `phi(0) = 0`, `psi(0) = u`.
///
/// If `|psi|_inf` exceeds `bound` before `t` (or the step size collapses on
/// the way there) the result is flagged `blew_up` with the escape time.
pub fn extended_transform_with(
    model: &CirModel,
    u: &[f64],
    t: f64,
    bound: f64,
) -> Result<TransformSolution, RiccatiError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(RiccatiError::Argument(format!("t must be >= 0, got {t}")));
    }
    if u.len() != model.d {
        return Err(RiccatiError::Argument(format!(
            "u has length {}, expected {}",
            u.len(),
            model.d
        )));
    }
    let d = model.d;
    let field = |y: &[f64], dy: &mut [f64]| {
        let psi = &y[1..];
        dy[0] = model.b.iter().zip(psi).map(|(x, y)| x * y).sum();
        for i in 0..d {
            let mut acc = 0.5 * model.sigma2[i] * psi[i] * psi[i] - model.rho[i];
            for j in 0..d {
                acc += model.beta[j][i] * psi[j];
            }
            dy[1 + i] = acc;
        }
    };
    let mut y0 = vec![0.0; d + 1];
    y0[1..].copy_from_slice(u);
    let escaped = |y: &[f64]| y[1..].iter().any(|v| !(v.abs() <= bound));

    let blown = |time: f64, y: &[f64]| TransformSolution {
        t,
        u: u.to_vec(),
        phi: y[0],
        psi: y[1..].to_vec(),
        blew_up: true,
        blow_up_time: Some(time),
        bound,
    };

    if escaped(&y0) {
        return Ok(blown(0.0, &y0));
    }
    match ode::integrate(field, &y0, t, &OdeOptions::default(), |_, y| escaped(y)) {
        Ok(traj) => match traj.termination {
            Termination::Completed => Ok(TransformSolution {
                t,
                u: u.to_vec(),
                phi: traj.y_end[0],
                psi: traj.y_end[1..].to_vec(),
                blew_up: false,
                blow_up_time: None,
                bound,
            }),
            Termination::Stopped(time) => Ok(blown(time, &traj.y_end)),
        },
        Err(OdeError::StepUnderflow { t: time, .. }) | Err(OdeError::NonFinite(time)) => {
            Ok(blown(time, &y0))
        }
        Err(e) => Err(e.into()),
    }
}
