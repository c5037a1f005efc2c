//! Adaptive Dormand–Prince 5(4) integrator.
//!
//! Explicit embedded Runge–Kutta pair with FSAL, local extrapolation of the
//! 5th-order solution, and the standard step controller. States are flat
//! `&mut [f64]` slices; complex systems interleave or split re/im parts.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("observer halted the integration at t = {t}")]
    Halted { t: f64 },
    #[error("integration span is reversed: t0 = {t0} > t1 = {t1}")]
    ReversedSpan { t0: f64, t1: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the right-hand side when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1.0e-10, atol: 1.0e-12, h_init: None, max_steps: 50_000_000 }
    }
}

impl OdeOptions {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of accepted local error norms in solution units; an optimistic
    /// global-error proxy that ignores error amplification by the flow.
    pub error_estimate: f64,
}

// Dormand-Prince 5(4) tableau (Hairer, Nørsett & Wanner, table II.5.2).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights equal the last A row (FSAL); E = b5 − b4 gives the
// embedded error directly.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

/// Integrate `y` from `t0` to `t1` in place.
pub fn solve(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
) -> Result<OdeStats, OdeError> {
    solve_observed(rhs, t0, t1, y, opts, &mut |_, _| true)
}

/// As [`solve`], calling `observe(t, y)` after every accepted step; a `false`
/// return halts with [`OdeError::Halted`].
pub fn solve_observed(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
    observe: &mut impl FnMut(f64, &[f64]) -> bool,
) -> Result<OdeStats, OdeError> {
    if t1 < t0 {
        return Err(OdeError::ReversedSpan { t0, t1 });
    }
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(stats);
    }
    let n = y.len();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;

    rhs(t, y, &mut k[0]);
    let f0 = k[0].clone();
    let mut h = opts.h_init.unwrap_or_else(|| initial_step(rhs, t, y, &f0, t1, opts));
    h = h.clamp(0.0, span);

    let mut rejected_last = false;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::MaxSteps { t, max_steps: opts.max_steps });
        }
        let min_h = 16.0 * f64::EPSILON * t.abs().max(span);
        if h < min_h {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let last = t + h >= t1 - 0.25 * min_h;
        if last {
            h = t1 - t;
        }

        // Six derivative stages; k[6] is the FSAL evaluation at t + h.
        for stage in 1..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().take(stage).enumerate() {
                    acc += A[stage - 1][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let tc = t + C[stage] * h;
            rhs(tc, &ytmp, &mut k[stage]);
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().take(6).enumerate() {
                acc += A[5][j] * kj[i];
            }
            ynew[i] = y[i] + h * acc;
        }
        rhs(t + h, &ynew, &mut k[6]);

        // Embedded 4th-order error, scaled per component.
        let mut err_sq = 0.0;
        let mut scale_rms = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let sk = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err_sq += (e / sk) * (e / sk);
            scale_rms += sk * sk;
        }
        let err = (err_sq / n as f64).sqrt();
        let scale_rms = (scale_rms / n as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            // Land exactly on t1 despite rounding in t + (t1 - t).
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6); // FSAL: derivative at the new point becomes stage 1
            stats.accepted += 1;
            stats.error_estimate += err * scale_rms;
            if !observe(t, y) {
                return Err(OdeError::Halted { t });
            }
            if last {
                return Ok(stats);
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, if rejected_last { 1.0 } else { 5.0 })
            };
            rejected_last = false;
            h = (h * fac).min(t1 - t);
        } else {
            stats.rejected += 1;
            rejected_last = true;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
        }
    }
}

/// Hairer's starting-step heuristic (order 5).
fn initial_step(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    y: &[f64],
    f0: &[f64],
    t1: f64,
    opts: &OdeOptions,
) -> f64 {
    let n = y.len();
    let sk = |yi: f64| opts.atol + opts.rtol * yi.abs();
    let d0 = rms(y.iter().map(|&yi| yi / sk(yi)), n);
    let d1 = rms(f0.iter().zip(y).map(|(&fi, &yi)| fi / sk(yi)), n);
    let h0 = if d0 < 1.0e-5 || d1 < 1.0e-5 { 1.0e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t1 - t0);

    let mut y1 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    for i in 0..n {
        y1[i] = y[i] + h0 * f0[i];
    }
    rhs(t0 + h0, &y1, &mut f1);
    let d2 = rms(
        f1.iter().zip(f0).zip(y).map(|((&a, &b), &yi)| (a - b) / sk(yi)),
        n,
    ) / h0;

    let dm = d1.max(d2);
    let h1 = if dm <= 1.0e-15 {
        (h0 * 1.0e-3).max(1.0e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t1 - t0)
}
