//! Exact USV decision.
//!
//! A CIR model exhibits USV iff `H(S^T R^m)` is not contained in `S^T R^m`,
//! i.e. iff for some kernel vector `xi` the quadratic polynomial
//! `p_xi(v) = xi^T H(S^T v)` does not vanish identically. Since `H` is
//! quadratic, `p_xi` has an explicit constant, linear and quadratic part and
//! the decision is made on those coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelDecomposition;
use crate::model::CirModel;
use crate::riccati::{extended_transform, h_map, RiccatiError};

pub const DEFAULT_USV_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum UsvError {
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error("transform blew up at t = {time} before reaching t = {t}")]
    BlowUp { time: f64, t: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Coefficients of `p_xi(v) = constant + linear^T v + v^T quadratic v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPolynomial {
    pub xi: Vec<f64>,
    pub constant: f64,
    pub linear: Vec<f64>,
    /// Symmetric m x m, row-major.
    pub quadratic: Vec<Vec<f64>>,
}

impl KernelPolynomial {
    pub fn eval(&self, v: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(v).map(|(a, b)| a * b).sum();
        let mut quad = 0.0;
        for (j, row) in self.quadratic.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                quad += c * v[j] * v[k];
            }
        }
        self.constant + lin + quad
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        let lin = self.linear.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let quad = self
            .quadratic
            .iter()
            .flatten()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        self.constant.abs().max(lin).max(quad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsvCertificate {
    pub usv: bool,
    pub m: usize,
    /// `v*` maximizing `|L H(S^T v)|_inf` over the probe set, when USV holds.
    pub witness: Option<Vec<f64>>,
    pub witness_value: Option<f64>,
    pub coefficients: Vec<KernelPolynomial>,
    pub max_abs_coefficient: f64,
    /// Absolute threshold actually applied (`tol` times the parameter scale).
    pub threshold: f64,
    pub tol: f64,
}

/// Decides USV from the exact coefficients of `xi^T H(S^T v)`.
///
/// For each kernel basis vector `xi`:
/// constant `xi^T rho`, linear `S beta xi`, quadratic
/// `M_jk = -1/2 sum_i xi_i sigma2_i S_ji S_ki`.
/// The threshold is `tol * max(1, |beta|_inf, |sigma2|_inf, |rho|_inf)`.
pub fn usv_certificate(
    model: &CirModel,
    kd: &KernelDecomposition,
    tol: f64,
) -> Result<UsvCertificate, UsvError> {
    let d = model.d;
    if kd.d != d {
        return Err(UsvError::Dimension(format!(
            "kernel for d = {}, model has d = {d}",
            kd.d
        )));
    }
    let m = kd.m;
    let beta = model.beta_matrix();
    let s = &kd.s;
    let mut coefficients = Vec::with_capacity(kd.u_basis.ncols());
    for xi in kd.u_basis.column_iter() {
        let xi = xi.into_owned();
        let constant: f64 = xi.iter().zip(&model.rho).map(|(a, b)| a * b).sum();
        let linear: Vec<f64> = (s * (&beta * &xi)).iter().copied().collect();
        let quadratic: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                (0..m)
                    .map(|k| {
                        -0.5 * (0..d)
                            .map(|i| xi[i] * model.sigma2[i] * s[(j, i)] * s[(k, i)])
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        coefficients.push(KernelPolynomial {
            xi: xi.iter().copied().collect(),
            constant,
            linear,
            quadratic,
        });
    }
    let max_abs_coefficient = coefficients
        .iter()
        .map(KernelPolynomial::max_abs_coefficient)
        .fold(0.0, f64::max);
    let threshold = tol * model.parameter_scale();
    let usv = max_abs_coefficient > threshold;

    let (witness, witness_value) = if usv {
        let (v, val) = probe_points(m)
            .into_iter()
            .map(|v| {
                let val = unspanned_h(model, kd, &v);
                (v, val)
            })
            .fold((Vec::new(), f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        (Some(v), Some(val))
    } else {
        (None, None)
    };

    Ok(UsvCertificate {
        usv,
        m,
        witness,
        witness_value,
        coefficients,
        max_abs_coefficient,
        threshold,
        tol,
    })
}

/// `{e_j} ∪ {e_j + e_k : j <= k}`.
fn probe_points(m: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for j in 0..m {
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        pts.push(v);
    }
    for j in 0..m {
        for k in j..m {
            let mut v = vec![0.0; m];
            v[j] += 1.0;
            v[k] += 1.0;
            pts.push(v);
        }
    }
    pts
}

/// `|L H(S^T v)|_inf`.
pub fn unspanned_h(model: &CirModel, kd: &KernelDecomposition, v: &[f64]) -> f64 {
    let u = kd.s.transpose() * DVector::from_column_slice(v);
    let h = h_map(model, u.as_slice());
    (&kd.l * DVector::from_vec(h)).amax()
}

/// `|L psi(t, S^T v)|_inf`: the part of the exponential claim's state
/// gradient that bonds cannot hedge.
pub fn replication_residual(
    model: &CirModel,
    kd: &KernelDecomposition,
    v: &[f64],
    t: f64,
) -> Result<f64, UsvError> {
    if v.len() != kd.m {
        return Err(UsvError::Dimension(format!(
            "v has length {}, expected m = {}",
            v.len(),
            kd.m
        )));
    }
    let u = kd.s.transpose() * DVector::from_column_slice(v);
    let tr = extended_transform(model, u.as_slice(), t)?;
    if tr.blew_up {
        return Err(UsvError::BlowUp {
            time: tr.blow_up_time.unwrap_or(0.0),
            t,
        });
    }
    if kd.l.nrows() == 0 {
        return Ok(0.0);
    }
    Ok((&kd.l * DVector::from_vec(tr.psi)).amax())
}

/// Standard probe set `{±e_j, ±(1,...,1)} x {0.5, 1, 2}`.
pub fn standard_probes(m: usize) -> Vec<(Vec<f64>, f64)> {
    let mut dirs = Vec::new();
    for j in 0..m {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; m];
            v[j] = sign;
            dirs.push(v);
        }
    }
    dirs.push(vec![1.0; m]);
    dirs.push(vec![-1.0; m]);
    let mut out = Vec::new();
    for v in dirs {
        for t in [0.5, 1.0, 2.0] {
            out.push((v.clone(), t));
        }
    }
    out
}

/// Largest replication residual over the standard probes that stay finite,
/// together with the number of probes that blew up.
pub fn max_probe_residual(
    model: &CirModel,
    kd: &KernelDecomposition,
) -> Result<(f64, usize), UsvError> {
    let mut best: f64 = 0.0;
    let mut blown = 0;
    for (v, t) in standard_probes(kd.m) {
        match replication_residual(model, kd, &v, t) {
            Ok(r) => best = best.max(r),
            Err(UsvError::BlowUp { .. }) => blown += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((best, blown))
}

/// Matrix form of `S` rows as `Vec` (for reporting).
pub fn matrix_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}
