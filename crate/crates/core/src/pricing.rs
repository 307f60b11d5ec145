//! Bond prices, exponential claims and the volatility decomposition of log bond returns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelDecomposition;
use crate::model::CirModel;
use crate::riccati::{extended_transform, RiccatiError, RiccatiSolution};

#[derive(Debug, Error)]
pub enum PricingError {
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error("transform blew up at t = {time} before reaching t = {t}")]
    BlowUp { time: f64, t: f64 },
    #[error("stacked map (S; L) is singular")]
    SingularBasis,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `F(tau, x) = exp(-A(tau) - B(tau)^T x)`.
pub fn bond_price(
    model: &CirModel,
    sol: &RiccatiSolution,
    tau: f64,
    x: &[f64],
) -> Result<f64, PricingError> {
    check_len(model, x)?;
    let (a, b) = sol.eval(tau)?;
    Ok((-a - dot(&b, x)).exp())
}

/// `r = rho^T x`.
pub fn short_rate(model: &CirModel, x: &[f64]) -> f64 {
    dot(&model.rho, x)
}

/// `E_x[exp(-∫_0^t r ds) exp(u^T X_t)] = exp(phi(t,u) + psi(t,u)^T x)`.
pub fn exp_claim_price(
    model: &CirModel,
    u: &[f64],
    t: f64,
    x: &[f64],
) -> Result<f64, PricingError> {
    check_len(model, x)?;
    let tr = extended_transform(model, u, t)?;
    if tr.blew_up {
        return Err(PricingError::BlowUp {
            time: tr.blow_up_time.unwrap_or(0.0),
            t,
        });
    }
    Ok((tr.phi + dot(&tr.psi, x)).exp())
}

/// Loadings of `1/2 d<log P(., T)>_t / dt` on `(Z, U)` at time to maturity `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolDecomposition {
    pub tau: f64,
    pub z_coeffs: Vec<f64>,
    pub u_coeffs: Vec<f64>,
}

impl VolDecomposition {
    /// `z_coeffs^T S x + u_coeffs^T L x`.
    pub fn evaluate(&self, kd: &KernelDecomposition, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let z = &kd.s * &xv;
        let u = &kd.l * &xv;
        dot(&self.z_coeffs, z.as_slice()) + dot(&self.u_coeffs, u.as_slice())
    }
}

/// `1/2 B^T sigma(x) sigma(x)^T B = sum_i 1/2 sigma2_i B_i^2 x_i` as the
/// vector of its coefficients in `x`.
pub fn qv_functional(model: &CirModel, b: &[f64]) -> Vec<f64> {
    b.iter()
        .zip(&model.sigma2)
        .map(|(bi, s)| 0.5 * s * bi * bi)
        .collect()
}

/// Rewrites the quadratic-variation functional in `(Z, U) = (S x, L x)`
/// coordinates by solving `(S; L)^T (z; u) = (1/2 sigma2_i B_i(tau)^2)_i`.
pub fn vol_decomposition(
    model: &CirModel,
    kd: &KernelDecomposition,
    sol: &RiccatiSolution,
    tau: f64,
) -> Result<VolDecomposition, PricingError> {
    let d = model.d;
    if kd.d != d {
        return Err(PricingError::Dimension(format!(
            "kernel d = {}, model d = {d}",
            kd.d
        )));
    }
    let (_, b) = sol.eval(tau)?;
    let rhs = DVector::from_vec(qv_functional(model, &b));
    let mut stacked = DMatrix::<f64>::zeros(d, d);
    stacked.rows_mut(0, kd.m).copy_from(&kd.s);
    stacked.rows_mut(kd.m, d - kd.m).copy_from(&kd.l);
    let coeffs = stacked
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or(PricingError::SingularBasis)?;
    Ok(VolDecomposition {
        tau,
        z_coeffs: coeffs.rows(0, kd.m).iter().copied().collect(),
        u_coeffs: coeffs.rows(kd.m, d - kd.m).iter().copied().collect(),
    })
}

fn check_len(model: &CirModel, x: &[f64]) -> Result<(), PricingError> {
    if x.len() != model.d {
        return Err(PricingError::Dimension(format!(
            "state has length {}, expected {}",
            x.len(),
            model.d
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
