//! Term-structure kernel `U = ∩_tau ker B(tau)^T` and the factor maps built from it.
//!
//! `S` (m x d) has `ker S = U`, `L` ((d-m) x d) has row space `U`, and
//! `Q = S^T (S S^T)^-1` recovers bond prices from `Z = S X` alone:
//! `F(tau, x) = exp(-A(tau) - B(tau)^T Q S x)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::CirModel;
use crate::riccati::{solve_riccati, RiccatiError, RiccatiSolution};

pub const DEFAULT_TAU_MAX: f64 = 30.0;
pub const DEFAULT_N_SAMPLES: usize = 200;
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Parameter-pair equality tolerance for [`diagonal_kernel`].
pub const PAIR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("diagonal kernel precondition failed: {0}")]
    NotDiagonalForm(String),
    #[error("maps are inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone)]
pub struct KernelDecomposition {
    pub d: usize,
    pub m: usize,
    /// d x (d-m), orthonormal columns spanning the kernel.
    pub u_basis: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Spectrum the rank decision was made on (descending); empty when the
    /// decomposition did not come from sampling.
    pub singular_values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl KernelDecomposition {
    /// Builds a decomposition from explicit `S` and `L`.
    ///
    /// Requires `S` to have full row rank and `L S^T = 0` with complementary
    /// dimensions. The kernel basis is an orthonormalization of `L^T`.
    pub fn from_maps(s: DMatrix<f64>, l: DMatrix<f64>) -> Result<Self, KernelError> {
        let d = s.ncols();
        let m = s.nrows();
        if l.ncols() != d || l.nrows() + m != d {
            return Err(KernelError::Inconsistent(format!(
                "S is {}x{}, L is {}x{}",
                s.nrows(),
                s.ncols(),
                l.nrows(),
                l.ncols()
            )));
        }
        let cross = &l * s.transpose();
        let scale = s.norm().max(1.0) * l.norm().max(1.0);
        if cross.amax() > 1e-12 * scale {
            return Err(KernelError::Inconsistent("L S^T != 0".into()));
        }
        let q = right_inverse(&s)?;
        let u_basis = orthonormal_columns(&l.transpose())?;
        Ok(Self {
            d,
            m,
            u_basis,
            s,
            l,
            q,
            singular_values: Vec::new(),
            warnings: Vec::new(),
        })
    }

    /// Kernel basis vectors as plain vectors.
    pub fn kernel_vectors(&self) -> Vec<Vec<f64>> {
        self.u_basis
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }
}

/// `Q = S^T (S S^T)^-1`.
pub fn right_inverse(s: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    let sst = s * s.transpose();
    let inv = sst
        .try_inverse()
        .ok_or_else(|| KernelError::Inconsistent("S S^T is singular".into()))?;
    Ok(s.transpose() * inv)
}

fn orthonormal_columns(a: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    if a.ncols() == 0 {
        return Ok(DMatrix::zeros(a.nrows(), 0));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    if (0..r.ncols()).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(KernelError::Inconsistent(
            "columns are linearly dependent".into(),
        ));
    }
    let mut q = qr.q();
    canonical_signs(&mut q);
    Ok(q)
}

/// Flips each column so that its first entry that is not negligible is positive.
fn canonical_signs(cols: &mut DMatrix<f64>) {
    for mut c in cols.column_iter_mut() {
        let cutoff = 1e-9 * c.amax();
        if let Some(first) = c.iter().copied().find(|x| x.abs() > cutoff) {
            if first < 0.0 {
                c.neg_mut();
            }
        }
    }
}

/// Largest principal angle (radians) between the column spaces of `a` and `b`,
/// both assumed orthonormal. Returns `PI/2` when the dimensions differ.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() || a.nrows() != b.nrows() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // sin of the largest angle is ||(I - A A^T) B||_2
    let resid = b - a * (a.transpose() * b);
    let s = resid.singular_values();
    s.max().min(1.0).asin()
}

/// Sampled-SVD kernel with the default grid `[0, 30] x 200` and tolerance `1e-9`.
pub fn term_structure_kernel_default(model: &CirModel) -> Result<KernelDecomposition, KernelError> {
    term_structure_kernel(model, DEFAULT_TAU_MAX, DEFAULT_N_SAMPLES, DEFAULT_RANK_TOL)
}

/// Numerical kernel from the singular values of the stacked samples `B(tau_k)^T`.
pub fn term_structure_kernel(
    model: &CirModel,
    tau_max: f64,
    n_samples: usize,
    rank_tol: f64,
) -> Result<KernelDecomposition, KernelError> {
    if n_samples < model.d {
        return Err(KernelError::Argument(format!(
            "n_samples = {n_samples} must be >= d = {}",
            model.d
        )));
    }
    if !(rank_tol > 0.0) {
        return Err(KernelError::Argument(format!(
            "rank_tol must be > 0, got {rank_tol}"
        )));
    }
    let sol = solve_riccati(model, tau_max, n_samples)?;
    Ok(kernel_from_solution(&sol, rank_tol))
}

/// Kernel from an existing Riccati solution, sampled on its grid.
pub fn kernel_from_solution(sol: &RiccatiSolution, rank_tol: f64) -> KernelDecomposition {
    let d = sol.d();
    let n = sol.b.len().max(d);
    let mut samples = DMatrix::<f64>::zeros(n, d);
    for (k, row) in sol.b.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            samples[(k, i)] = v;
        }
    }
    let svd = samples.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let cutoff = rank_tol * smax;
    let m = sv.iter().filter(|&&s| s > cutoff).count();

    let mut warnings = Vec::new();
    for (k, &s) in sv.iter().enumerate() {
        if s > cutoff * 1e-2 && s < cutoff * 1e2 {
            warnings.push(format!(
                "singular value {k} ({s:e}) lies within two decades of the rank cutoff {cutoff:e}; m may change with rank_tol"
            ));
        }
    }

    let mut vecs = DMatrix::<f64>::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        for r in 0..d {
            vecs[(r, c)] = v_t[(i, r)];
        }
    }
    canonical_signs(&mut vecs);
    let spanned = vecs.columns(0, m).into_owned();
    let u_basis = vecs.columns(m, d - m).into_owned();
    let s = spanned.transpose();
    let l = u_basis.transpose();
    let q = right_inverse(&s).unwrap_or_else(|_| DMatrix::zeros(d, m));
    KernelDecomposition {
        d,
        m,
        u_basis,
        s,
        l,
        q,
        singular_values: sv,
        warnings,
    }
}

/// Closed-form kernel for diagonal drift with `sigma_i^2 = 2` and `rho_i > 0`.
///
/// Factors with identical `(rho_i, beta_ii)` have identical `B_i` curves, and
/// distinct pairs give linearly independent curves, so the kernel consists of
/// the vectors whose entries sum to zero within each class of equal pairs.
pub fn diagonal_kernel(model: &CirModel) -> Result<KernelDecomposition, KernelError> {
    let d = model.d;
    if !model.is_diagonal() {
        return Err(KernelError::NotDiagonalForm("beta is not diagonal".into()));
    }
    if model.sigma2.iter().any(|&s| (s - 2.0).abs() > PAIR_TOL) {
        return Err(KernelError::NotDiagonalForm(
            "sigma2 must be 2 for every factor; normalize volatilities first".into(),
        ));
    }
    if let Some(i) = model.rho.iter().position(|&r| !(r > 0.0)) {
        return Err(KernelError::NotDiagonalForm(format!(
            "rho[{i}] = 0; drop that factor instead"
        )));
    }

    let classes = parameter_classes(model);
    let m = classes.len();
    let mut s = DMatrix::<f64>::zeros(m, d);
    for (k, class) in classes.iter().enumerate() {
        let w = 1.0 / (class.len() as f64).sqrt();
        for &i in class {
            s[(k, i)] = w;
        }
    }
    let mut diffs: Vec<DVector<f64>> = Vec::new();
    for class in &classes {
        for &i in &class[1..] {
            let mut v = DVector::zeros(d);
            v[class[0]] = 1.0;
            v[i] = -1.0;
            diffs.push(v);
        }
    }
    let u_basis = if diffs.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        orthonormal_columns(&DMatrix::from_columns(&diffs))?
    };
    let l = u_basis.transpose();
    let q = right_inverse(&s)?;
    Ok(KernelDecomposition {
        d,
        m,
        u_basis,
        s,
        l,
        q,
        singular_values: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Index classes of equal `(rho_i, beta_ii)` in order of first appearance.
pub fn parameter_classes(model: &CirModel) -> Vec<Vec<usize>> {
    let close = |a: f64, b: f64| (a - b).abs() <= PAIR_TOL * a.abs().max(b.abs()).max(1.0);
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..model.d {
        let key = (model.rho[i], model.beta[i][i]);
        match classes.iter_mut().find(|c| {
            let j = c[0];
            close(model.rho[j], key.0) && close(model.beta[j][j], key.1)
        }) {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }
    classes
}

/// `z = S x`.
pub fn reduce_state(kd: &KernelDecomposition, x: &[f64]) -> Vec<f64> {
    (&kd.s * DVector::from_column_slice(x))
        .iter()
        .copied()
        .collect()
}

/// Bond price as a function of the term-structure factors:
/// `exp(-A(tau) - B(tau)^T Q z)`.
pub fn reduced_bond_price(
    kd: &KernelDecomposition,
    sol: &RiccatiSolution,
    tau: f64,
    z: &[f64],
) -> Result<f64, KernelError> {
    let (a, b) = sol.eval(tau)?;
    let lifted = &kd.q * DVector::from_column_slice(z);
    let bx: f64 = b.iter().zip(lifted.iter()).map(|(x, y)| x * y).sum();
    Ok((-a - bx).exp())
}
