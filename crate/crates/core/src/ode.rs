//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Autonomous systems only: every vector field in this crate is time-invariant.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 1_000_000,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest scaled error norm among accepted steps (<= 1 by construction).
    pub max_error_estimate: f64,
}

/// One accepted step together with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec<f64>; 5],
}

impl DenseSegment {
    /// Continuous extension at `t0 + s*h`, `s` in [0, 1].
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let s = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
        }
    }

    /// Time derivative of the continuous extension.
    pub fn eval_derivative(&self, t: f64, out: &mut [f64]) {
        let s = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let [_, r2, r3, r4, r5] = &self.coeffs;
        // d/ds of r2 s + r3 s(1-s) + r4 s^2(1-s) + r5 s^2(1-s)^2
        let g3 = 1.0 - 2.0 * s;
        let g4 = 2.0 * s - 3.0 * s * s;
        let g5 = 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        for i in 0..out.len() {
            out[i] = (r2[i] + r3[i] * g3 + r4[i] * g4 + r5[i] * g5) / self.h;
        }
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// How an integration ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// The stop predicate fired after the step ending at this time.
    Stopped(f64),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub segments: Vec<DenseSegment>,
    pub y_end: Vec<f64>,
    pub t_end: f64,
    pub stats: StepStats,
    pub termination: Termination,
}

impl Trajectory {
    /// Evaluates the dense output at `t` within `[t_start, t_end]`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let idx = self.segment_index(t);
        self.segments[idx].eval(t, out);
    }

    pub fn eval_derivative(&self, t: f64, out: &mut [f64]) {
        let idx = self.segment_index(t);
        self.segments[idx].eval_derivative(t, out);
    }

    fn segment_index(&self, t: f64) -> usize {
        let n = self.segments.len();
        match self
            .segments
            .binary_search_by(|s| s.t1().partial_cmp(&t).expect("finite time"))
        {
            Ok(i) => i,
            Err(i) => i.min(n - 1),
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(y)` from `y0` over `[0, t_end]`.
///
/// After each accepted step `stop(t, y)` is consulted; returning `true` ends
/// the integration early with [`Termination::Stopped`].
pub fn integrate<F, S>(
    f: F,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut stop: S,
) -> Result<Trajectory, OdeError>
where
    F: Fn(&[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut segments = Vec::new();

    if t_end <= 0.0 {
        return Ok(Trajectory {
            segments: vec![DenseSegment {
                t0: 0.0,
                h: 1.0,
                coeffs: [
                    y.clone(),
                    vec![0.0; n],
                    vec![0.0; n],
                    vec![0.0; n],
                    vec![0.0; n],
                ],
            }],
            y_end: y,
            t_end: 0.0,
            stats,
            termination: Termination::Completed,
        });
    }

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    f(&y, &mut k1);
    stats.rhs_evals += 1;
    let mut h = initial_step(&f, &y, &k1, opts, t_end);
    stats.rhs_evals += 1;

    let mut err_prev: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        if h < opts.min_step * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f(&ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(&ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(&ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(&ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(&ytmp, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(&ynew, &mut k7);
        stats.rhs_evals += 6;

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
            finite &= ynew[i].is_finite();
        }
        let err = if finite {
            (err / n as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            // PI step-size control (Hairer & Wanner, beta = 0.04)
            let fac = if err == 0.0 {
                10.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.04)).clamp(0.2, 10.0)
            };
            err_prev = err.max(1e-4);

            let mut r1 = y.clone();
            let mut r2 = vec![0.0; n];
            let mut r3 = vec![0.0; n];
            let mut r4 = vec![0.0; n];
            let mut r5 = vec![0.0; n];
            for i in 0..n {
                r1[i] = y[i];
                r2[i] = ynew[i] - y[i];
                r3[i] = h * k1[i] - r2[i];
                r4[i] = r2[i] - h * k7[i] - r3[i];
                r5[i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            segments.push(DenseSegment {
                t0: t,
                h,
                coeffs: [r1, r2, r3, r4, r5],
            });

            stats.accepted += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err);
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);

            if stop(t, &y) {
                return Ok(Trajectory {
                    segments,
                    y_end: y,
                    t_end: t,
                    stats,
                    termination: Termination::Stopped(t),
                });
            }
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            h *= fac;
            last_rejected = false;
        } else {
            if !finite && h <= opts.min_step * t.abs().max(1.0) * 2.0 {
                return Err(OdeError::NonFinite(t));
            }
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= fac;
            last_rejected = true;
        }
    }

    Ok(Trajectory {
        segments,
        y_end: y,
        t_end,
        stats,
        termination: Termination::Completed,
    })
}

fn initial_step<F>(f: &F, y: &[f64], f0: &[f64], opts: &OdeOptions, t_end: f64) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&sc)
            .map(|(a, s)| (a / s) * (a / s))
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(&y1, &mut f1);
    let df: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&df) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end)
}
