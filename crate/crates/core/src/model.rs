//! Multi-factor CIR model parameters.
//!
//! The factor process is
//! ```text
//! dX_t = (b + beta X_t) dt + diag(sigma_1 sqrt(X_1t), ..., sigma_d sqrt(X_dt)) dW_t
//! r_t  = rho^T X_t
//! ```
//! on the nonnegative orthant. [`CirModel`] holds `(b, beta, sigma2, rho)` where
//! `sigma2` are the squared volatilities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Common-theta tolerance used by [`gamma_identities`].
pub const THETA_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    Invalid(ValidationReport),
    #[error("model shape not supported here: {0}")]
    Shape(String),
    #[error("theta_1 = {theta1} and theta_2 = {theta2} differ beyond tolerance")]
    ThetaMismatch { theta1: f64, theta2: f64 },
}

/// Parameter record of a `d`-factor CIR model.
///
/// The JSON form is `{"d": .., "b": [..], "beta": [[..], ..], "sigma2": [..], "rho": [..]}`.
/// Deserialization does not validate; call [`validate`] or [`CirModel::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirModel {
    pub d: usize,
    pub b: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.constraint))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn violation(field: impl Into<String>, constraint: impl Into<String>) -> Violation {
    Violation {
        field: field.into(),
        constraint: constraint.into(),
    }
}

impl CirModel {
    /// Builds a model and rejects it unless every admissibility constraint holds.
    pub fn new(
        b: Vec<f64>,
        beta: Vec<Vec<f64>>,
        sigma2: Vec<f64>,
        rho: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let model = Self {
            d: rho.len(),
            b,
            beta,
            sigma2,
            rho,
        };
        let report = validate(&model);
        if report.ok {
            Ok(model)
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    /// Drift matrix as a dense `d x d` matrix.
    pub fn beta_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.beta[i][j])
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| i == j || self.beta[i][j] == 0.0))
    }

    /// Largest absolute parameter scale, used for relative tolerances.
    pub fn parameter_scale(&self) -> f64 {
        let beta_inf = self
            .beta
            .iter()
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let max_abs = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        1.0f64
            .max(beta_inf)
            .max(max_abs(&self.sigma2))
            .max(max_abs(&self.rho))
    }
}

/// Checks every admissibility constraint and lists all violations.
pub fn validate(model: &CirModel) -> ValidationReport {
    let d = model.d;
    let mut out = Vec::new();
    if d == 0 {
        out.push(violation("d", "factor count must be >= 1"));
        return ValidationReport::from_violations(out);
    }
    for (name, v) in [
        ("b", &model.b),
        ("sigma2", &model.sigma2),
        ("rho", &model.rho),
    ] {
        if v.len() != d {
            out.push(violation(
                name,
                format!("length must equal d = {d}, got {}", v.len()),
            ));
        }
    }
    if model.beta.len() != d {
        out.push(violation(
            "beta",
            format!("must have d = {d} rows, got {}", model.beta.len()),
        ));
    }
    for (i, row) in model.beta.iter().enumerate() {
        if row.len() != d {
            out.push(violation(
                format!("beta[{i}]"),
                format!("row length must equal d = {d}, got {}", row.len()),
            ));
        }
    }
    if !out.is_empty() {
        return ValidationReport::from_violations(out);
    }

    for (i, &x) in model.b.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            out.push(violation(format!("b[{i}]"), "must be finite and >= 0"));
        }
    }
    for (i, &x) in model.sigma2.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            out.push(violation(format!("sigma2[{i}]"), "must be finite and > 0"));
        }
    }
    for (i, &x) in model.rho.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            out.push(violation(format!("rho[{i}]"), "must be finite and >= 0"));
        }
    }
    if model.rho.iter().all(|&x| x == 0.0) {
        out.push(violation("rho", "rho must be nonzero"));
    }
    for i in 0..d {
        for j in 0..d {
            let x = model.beta[i][j];
            if !x.is_finite() {
                out.push(violation(format!("beta[{i}][{j}]"), "must be finite"));
            } else if i != j && x < 0.0 {
                out.push(violation(
                    format!("beta[{i}][{j}]"),
                    "off-diagonal must be >= 0",
                ));
            }
        }
    }
    ValidationReport::from_violations(out)
}

/// Free parameters of the three-factor USV family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsvFamilyParams {
    pub beta11: f64,
    pub beta22: f64,
    pub beta23: f64,
    pub rho2: f64,
}

impl UsvFamilyParams {
    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        let all = [self.beta11, self.beta22, self.beta23, self.rho2];
        if all.iter().any(|x| !x.is_finite()) {
            out.push(violation("params", "all parameters must be finite"));
        }
        if !(self.beta22 < self.beta11) {
            out.push(violation("beta22", "beta22 < beta11 required"));
        }
        if !(self.beta11 < 0.0) {
            out.push(violation("beta11", "beta11 < 0 required"));
        }
        if !(self.beta23 > 0.0) {
            out.push(violation("beta23", "beta23 > 0 required"));
        }
        if !(self.rho2 > 0.0) {
            out.push(violation("rho2", "rho2 > 0 required"));
        }
        ValidationReport::from_violations(out)
    }

    /// `(beta13, beta33, rho1)` implied by the free parameters.
    pub fn derived(&self) -> (f64, f64, f64) {
        let (b11, b22, b23, r2) = (self.beta11, self.beta22, self.beta23, self.rho2);
        let beta13 = 8.0 * r2 / (b11 - b22) + b23 - 2.0 * b22;
        let beta33 = b11 + b22 - 0.5 * (beta13 + b23);
        let rho1 = 0.125 * (b11 - b22) * (beta13 - b23 - 2.0 * b11);
        (beta13, beta33, rho1)
    }
}

/// Builds the three-factor CIR model with unspanned stochastic volatility.
///
/// All `sigma_i^2 = 2`, `beta` is upper triangular with `beta12 = 0`, and
/// `rho = (rho1, rho2, rho1 + rho2)`. The term-structure factors of the
/// result are `Z = (X1 + X3, X2 + X3)` and the unspanned factor is
/// `U = X1 + X2 - X3`.
pub fn usv_family_3f(p: &UsvFamilyParams, b: [f64; 3]) -> Result<CirModel, ModelError> {
    let mut report = p.validate();
    for (i, &x) in b.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            report
                .violations
                .push(violation(format!("b[{i}]"), "must be finite and >= 0"));
        }
    }
    report.ok = report.violations.is_empty();
    if !report.ok {
        return Err(ModelError::Invalid(report));
    }

    let (beta13, beta33, rho1) = p.derived();
    debug_assert!(beta13 > 0.0 && beta33 < 0.0 && rho1 > 0.0);
    CirModel::new(
        b.to_vec(),
        vec![
            vec![p.beta11, 0.0, beta13],
            vec![0.0, p.beta22, p.beta23],
            vec![0.0, 0.0, beta33],
        ],
        vec![2.0; 3],
        vec![rho1, p.rho2, rho1 + p.rho2],
    )
}

/// `theta_i = sqrt(beta_ii^2 + 2 sigma_i^2 rho_i)`, which reduces to
/// `sqrt(beta_ii^2 + 4 rho_i)` at `sigma_i^2 = 2`.
pub fn theta(model: &CirModel, i: usize) -> f64 {
    let b = model.beta[i][i];
    (b * b + 2.0 * model.sigma2[i] * model.rho[i]).sqrt()
}

/// The pair `(gamma0, gamma1)` whose vanishing is equivalent to
/// `B3 = B1 + B2` for upper-triangular three-factor models with a common theta.
pub fn gamma_identities(model: &CirModel) -> Result<(f64, f64), ModelError> {
    if model.d != 3 {
        return Err(ModelError::Shape(format!("need d = 3, got {}", model.d)));
    }
    let bt = &model.beta;
    if bt[0][1] != 0.0 || bt[1][0] != 0.0 || bt[2][0] != 0.0 || bt[2][1] != 0.0 {
        return Err(ModelError::Shape(
            "beta must have zero entries at (1,2), (2,1), (3,1), (3,2)".into(),
        ));
    }
    if model.sigma2.iter().any(|&s| (s - 2.0).abs() > THETA_TOL) {
        return Err(ModelError::Shape("sigma2 must be (2, 2, 2)".into()));
    }
    let theta1 = theta(model, 0);
    let theta2 = theta(model, 1);
    if (theta1 - theta2).abs() > THETA_TOL * theta1.max(theta2).max(1.0) {
        return Err(ModelError::ThetaMismatch { theta1, theta2 });
    }
    let th = theta1;
    let (b11, b22, b33) = (bt[0][0], bt[1][1], bt[2][2]);
    let (r1, r2) = (model.rho[0], model.rho[1]);
    let c1 = bt[0][2] + b33 - b11;
    let c2 = bt[1][2] + b33 - b22;
    let gamma0 = 2.0 * c1 * r1 * (th + b22) + 2.0 * c2 * r2 * (th + b11) + 8.0 * r1 * r2;
    let gamma1 = 4.0 * c1 * r1 * b22 + 4.0 * c2 * r2 * b11 + 16.0 * r1 * r2;
    Ok((gamma0, gamma1))
}

/// Rescales the state so that every `sigma_i^2 = 2`.
///
/// With `D = diag(2 / sigma_i^2)` and `x~ = D x` the parameters become
/// `b~ = D b`, `beta~ = D beta D^-1`, `rho~ = D^-1 rho`. The short rate and
/// all bond prices are unchanged at matched states.
pub fn normalize_vols(model: &CirModel) -> CirModel {
    let scale: Vec<f64> = model.sigma2.iter().map(|s| 2.0 / s).collect();
    let d = model.d;
    CirModel {
        d,
        b: (0..d).map(|i| scale[i] * model.b[i]).collect(),
        beta: (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if i == j {
                            model.beta[i][j]
                        } else {
                            scale[i] * model.beta[i][j] / scale[j]
                        }
                    })
                    .collect()
            })
            .collect(),
        sigma2: vec![2.0; d],
        rho: (0..d).map(|i| model.rho[i] / scale[i]).collect(),
    }
}

/// State map `x -> D x` matching [`normalize_vols`].
pub fn normalized_state(model: &CirModel, x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(&model.sigma2)
        .map(|(xi, s)| 2.0 / s * xi)
        .collect()
}
