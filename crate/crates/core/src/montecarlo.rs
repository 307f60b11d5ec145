//! Monte Carlo simulation of the CIR factor process.
//!
//! Euler–Maruyama with full truncation: drift and diffusion are evaluated at
//! the positive part of the state, so the recursion stays well defined even
//! when an iterate crosses zero. Every path draws from its own ChaCha stream
//! keyed by `(seed, path index)`, so results do not depend on how paths are
//! scheduled across threads.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelDecomposition;
use crate::model::{validate, CirModel};
use crate::pricing::{bond_price, dot, exp_claim_price, PricingError};
use crate::riccati::{solve_riccati, RiccatiError, RiccatiSolution};

const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("time {t} is not a recorded time of the path set (horizon {horizon})")]
    NotRecorded { t: f64, horizon: f64 },
    #[error("state leaves the nonnegative orthant: {0:?}")]
    OutsideState(Vec<f64>),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerFullTruncation,
}

/// Which time steps are kept in the [`PathSet`]. Time 0 and the horizon are always kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    EveryStep,
    Stride(usize),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub record: Recording,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt,
            horizon,
            seed,
            scheme: Scheme::EulerFullTruncation,
            record: Recording::EveryStep,
        }
    }

    pub fn with_record(mut self, record: Recording) -> Self {
        self.record = record;
        self
    }

    /// Number of Euler steps; errors unless `horizon / dt` is an integer.
    pub fn n_steps(&self) -> Result<usize, McError> {
        if self.n_paths == 0 {
            return Err(McError::Config("n_paths must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(McError::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(McError::Config(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > GRID_TOL * n.max(1.0) {
            return Err(McError::Config(format!(
                "horizon / dt = {ratio} is not an integer"
            )));
        }
        Ok(n as usize)
    }

    fn step_index(&self, t: f64, n_steps: usize) -> Option<usize> {
        let ratio = t / self.dt;
        let k = ratio.round();
        if k < 0.0 || k as usize > n_steps || (ratio - k).abs() > GRID_TOL * k.max(1.0) {
            None
        } else {
            Some(k as usize)
        }
    }

    fn recorded_steps(&self, n_steps: usize) -> Result<Vec<usize>, McError> {
        let mut steps = match &self.record {
            Recording::EveryStep => (0..=n_steps).collect(),
            Recording::Stride(k) => {
                if *k == 0 {
                    return Err(McError::Config("record stride must be >= 1".into()));
                }
                (0..=n_steps).step_by(*k).collect::<Vec<_>>()
            }
            Recording::Times(ts) => ts
                .iter()
                .map(|&t| {
                    self.step_index(t, n_steps).ok_or_else(|| {
                        McError::Config(format!("record time {t} is not on the step grid"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        steps.push(0);
        steps.push(n_steps);
        steps.sort_unstable();
        steps.dedup();
        Ok(steps)
    }
}

/// Simulated paths at the recorded times.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub config: SimConfig,
    pub d: usize,
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    /// Positive part of the Euler iterate, `[path][snapshot][factor]` flattened.
    states: Vec<f64>,
    /// Trapezoidal `∫_0^t rho^T X ds`, `[path][snapshot]` flattened.
    integrated_rate: Vec<f64>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.config.n_paths
    }

    pub fn n_snapshots(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, path: usize, snapshot: usize) -> &[f64] {
        let off = (path * self.n_snapshots() + snapshot) * self.d;
        &self.states[off..off + self.d]
    }

    pub fn integrated_rate(&self, path: usize, snapshot: usize) -> f64 {
        self.integrated_rate[path * self.n_snapshots() + snapshot]
    }

    /// Snapshot index of a recorded time.
    pub fn snapshot_of(&self, t: f64) -> Result<usize, McError> {
        let not_recorded = || McError::NotRecorded {
            t,
            horizon: self.config.horizon,
        };
        let k = self
            .config
            .step_index(t, *self.steps.last().unwrap_or(&0))
            .ok_or_else(not_recorded)?;
        self.steps.binary_search(&k).map_err(|_| not_recorded())
    }
}

/// Mean and standard error of a Monte Carlo functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                value: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        if samples.iter().all(|&x| x == samples[0]) {
            return Self {
                value: samples[0],
                std_error: 0.0,
                n,
            };
        }
        let mean = pairwise_sum(samples) / n as f64;
        if n == 1 {
            return Self {
                value: mean,
                std_error: 0.0,
                n,
            };
        }
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Self {
            value: mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `(value - reference) / std_error`, zero when both difference and error vanish.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.value - reference;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    /// Standard error above the estimate itself, a hint of heavy tails.
    pub fn suspicious_variance(&self) -> bool {
        self.std_error > self.value.abs()
    }
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Simulates `cfg.n_paths` paths from `x0` on the current rayon pool.
pub fn simulate_paths(model: &CirModel, x0: &[f64], cfg: &SimConfig) -> Result<PathSet, McError> {
    let report = validate(model);
    if !report.ok {
        return Err(McError::Model(report.to_string()));
    }
    if x0.len() != model.d || x0.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(McError::OutsideState(x0.to_vec()));
    }
    let n_steps = cfg.n_steps()?;
    let steps = cfg.recorded_steps(n_steps)?;
    let times: Vec<f64> = steps.iter().map(|&k| k as f64 * cfg.dt).collect();
    let d = model.d;
    let n_snap = steps.len();

    let mut states = vec![0.0; cfg.n_paths * n_snap * d];
    let mut integrated_rate = vec![0.0; cfg.n_paths * n_snap];

    states
        .par_chunks_mut(n_snap * d)
        .zip(integrated_rate.par_chunks_mut(n_snap))
        .enumerate()
        .for_each(|(path, (st, ir))| {
            simulate_one(model, x0, cfg, n_steps, &steps, path as u64, st, ir);
        });

    Ok(PathSet {
        config: cfg.clone(),
        d,
        x0: x0.to_vec(),
        times,
        steps,
        states,
        integrated_rate,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_one(
    model: &CirModel,
    x0: &[f64],
    cfg: &SimConfig,
    n_steps: usize,
    steps: &[usize],
    path: u64,
    states: &mut [f64],
    integrated: &mut [f64],
) {
    let d = model.d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path);
    let sqrt_dt = cfg.dt.sqrt();
    let vol: Vec<f64> = model.sigma2.iter().map(|s| s.sqrt()).collect();

    let mut x = x0.to_vec();
    let mut xp = x0.to_vec();
    let mut drift = vec![0.0; d];
    let mut int_r = 0.0;
    let mut r_prev = dot(&model.rho, &xp);
    let mut next = 0;

    let mut record = |k: usize, xp: &[f64], int_r: f64, next: &mut usize| {
        if *next < steps.len() && steps[*next] == k {
            states[*next * d..(*next + 1) * d].copy_from_slice(xp);
            integrated[*next] = int_r;
            *next += 1;
        }
    };
    record(0, &xp, int_r, &mut next);

    for k in 1..=n_steps {
        for i in 0..d {
            let mut acc = model.b[i];
            for j in 0..d {
                acc += model.beta[i][j] * xp[j];
            }
            drift[i] = acc;
        }
        for i in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[i] += drift[i] * cfg.dt + vol[i] * xp[i].sqrt() * sqrt_dt * z;
        }
        for i in 0..d {
            xp[i] = x[i].max(0.0);
        }
        let r = dot(&model.rho, &xp);
        int_r += 0.5 * (r_prev + r) * cfg.dt;
        r_prev = r;
        record(k, &xp, int_r, &mut next);
    }
}

/// `E[exp(-∫_0^T r ds)]` across paths.
pub fn mc_bond_price(paths: &PathSet, t: f64) -> Result<McEstimate, McError> {
    let k = paths.snapshot_of(t)?;
    let samples: Vec<f64> = (0..paths.n_paths())
        .map(|p| (-paths.integrated_rate(p, k)).exp())
        .collect();
    Ok(McEstimate::from_samples(&samples))
}

/// `E[exp(-∫_0^t r ds + u^T X_t)]` across paths.
pub fn mc_exp_claim(paths: &PathSet, u: &[f64], t: f64) -> Result<McEstimate, McError> {
    if u.len() != paths.d {
        return Err(McError::Config(format!(
            "u has length {}, expected {}",
            u.len(),
            paths.d
        )));
    }
    let k = paths.snapshot_of(t)?;
    let samples: Vec<f64> = (0..paths.n_paths())
        .map(|p| (-paths.integrated_rate(p, k) + dot(u, paths.state(p, k))).exp())
        .collect();
    Ok(McEstimate::from_samples(&samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceShift {
    /// `|F(T, x0 + delta xi) - F(T, x0)|`.
    pub price_shift: f64,
    /// Same for the claim `exp(v^T Z_t)` with `v = -(1, ..., 1)` and `t = cfg.horizon`.
    pub claim_shift: f64,
    /// Common-random-number Monte Carlo estimate of the signed claim shift.
    pub mc_claim_shift: McEstimate,
}

/// Moves the state along the first kernel direction and reprices a bond
/// and an exponential claim on the term-structure factors.
pub fn mc_unspanned_invariance(
    model: &CirModel,
    kd: &KernelDecomposition,
    cfg: &SimConfig,
    x0: &[f64],
    delta: f64,
    maturity: f64,
) -> Result<InvarianceShift, McError> {
    if kd.u_basis.ncols() == 0 {
        return Err(McError::Config(
            "kernel is trivial; no unspanned direction".into(),
        ));
    }
    let xi: Vec<f64> = kd.u_basis.column(0).iter().copied().collect();
    let x1: Vec<f64> = x0.iter().zip(&xi).map(|(a, b)| a + delta * b).collect();
    for x in [x0, &x1[..]] {
        if x.len() != model.d || x.iter().any(|&v| !(v >= 0.0)) {
            return Err(McError::OutsideState(x.to_vec()));
        }
    }
    let sol = solve_riccati(model, maturity.max(f64::MIN_POSITIVE), 2)?;
    let price_shift =
        (bond_price(model, &sol, maturity, &x1)? - bond_price(model, &sol, maturity, x0)?).abs();

    let v = DVector::from_element(kd.m, -1.0);
    let u: Vec<f64> = (kd.s.transpose() * v).iter().copied().collect();
    let t = cfg.horizon;
    let claim_shift =
        (exp_claim_price(model, &u, t, &x1)? - exp_claim_price(model, &u, t, x0)?).abs();

    let p0 = simulate_paths(model, x0, cfg)?;
    let p1 = simulate_paths(model, &x1, cfg)?;
    let k0 = p0.snapshot_of(t)?;
    let diffs: Vec<f64> = (0..p0.n_paths())
        .map(|p| {
            let c1 = (-p1.integrated_rate(p, k0) + dot(&u, p1.state(p, k0))).exp();
            let c0 = (-p0.integrated_rate(p, k0) + dot(&u, p0.state(p, k0))).exp();
            c1 - c0
        })
        .collect();
    Ok(InvarianceShift {
        price_shift,
        claim_shift,
        mc_claim_shift: McEstimate::from_samples(&diffs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QvPoint {
    /// Start of the increment.
    pub t: f64,
    pub dt: f64,
    /// Mean of `(Δ log P)^2 / dt` across paths.
    pub qv: f64,
}

fn log_bond(sol: &RiccatiSolution, tau: f64, x: &[f64]) -> Result<f64, McError> {
    let (a, b) = sol.eval(tau)?;
    Ok(-a - dot(&b, x))
}

/// Per-path `(Δ log P(., T))^2 / Δt` between snapshots `k` and `k + 1`.
pub fn qv_increments(
    paths: &PathSet,
    sol: &RiccatiSolution,
    maturity: f64,
    k: usize,
) -> Result<Vec<f64>, McError> {
    if k + 1 >= paths.n_snapshots() {
        return Err(McError::Config(format!("snapshot {k} has no successor")));
    }
    let (t0, t1) = (paths.times[k], paths.times[k + 1]);
    if t1 > maturity + GRID_TOL {
        return Err(McError::NotRecorded {
            t: maturity,
            horizon: paths.config.horizon,
        });
    }
    let (a0, b0) = sol.eval((maturity - t0).max(0.0))?;
    let (a1, b1) = sol.eval((maturity - t1).max(0.0))?;
    let h = t1 - t0;
    Ok((0..paths.n_paths())
        .map(|p| {
            let l0 = -a0 - dot(&b0, paths.state(p, k));
            let l1 = -a1 - dot(&b1, paths.state(p, k + 1));
            (l1 - l0) * (l1 - l0) / h
        })
        .collect())
}

/// Realized quadratic-variation rate of `log P(t, T)` between consecutive
/// recorded times up to `T`, averaged across paths.
pub fn realized_qv_log_bond(
    paths: &PathSet,
    sol: &RiccatiSolution,
    maturity: f64,
) -> Result<Vec<QvPoint>, McError> {
    if maturity > paths.config.horizon + GRID_TOL {
        return Err(McError::NotRecorded {
            t: maturity,
            horizon: paths.config.horizon,
        });
    }
    let mut out = Vec::new();
    for k in 0..paths.n_snapshots().saturating_sub(1) {
        if paths.times[k + 1] > maturity + GRID_TOL {
            break;
        }
        let inc = qv_increments(paths, sol, maturity, k)?;
        out.push(QvPoint {
            t: paths.times[k],
            dt: paths.times[k + 1] - paths.times[k],
            qv: pairwise_sum(&inc) / inc.len() as f64,
        });
    }
    Ok(out)
}

/// `log P(t, T)` along one path at snapshot `k`.
pub fn path_log_bond(
    paths: &PathSet,
    sol: &RiccatiSolution,
    maturity: f64,
    path: usize,
    k: usize,
) -> Result<f64, McError> {
    log_bond(
        sol,
        (maturity - paths.times[k]).max(0.0),
        paths.state(path, k),
    )
}
