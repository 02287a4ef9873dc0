//! Dormand–Prince 5(4) explicit Runge–Kutta stepping with local error control.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, h_min: 1e-14, max_steps: 2_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339_200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One trial step. Returns the fifth-order solution and the scaled RMS error norm
/// (accept when `<= 1`).
pub fn try_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64, opts: &OdeOptions) -> ([f64; N], f64)
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + C2 * h, &comb(y, h, &[(A21, &k1)]));
    let k3 = f(t + C3 * h, &comb(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &comb(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &comb(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &comb(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = comb(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y5);
    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
        acc += (e / sc).powi(2);
    }
    (y5, (acc / N as f64).sqrt())
}

/// Step-size factor after a trial with error norm `err`.
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// Advances `y` from `t0` to `t1` (either direction).
pub fn integrate<const N: usize, F>(f: &F, t0: f64, y0: [f64; N], t1: f64, opts: &OdeOptions) -> Result<[f64; N], OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut h = initial_step(t1 - t0);
    integrate_from(f, t0, y0, t1, &mut h, opts)
}

fn initial_step(span: f64) -> f64 {
    (span.abs() * 1e-3).clamp(1e-6, 1e-2).min(span.abs().max(f64::MIN_POSITIVE))
}

fn integrate_from<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    h_hint: &mut f64,
    opts: &OdeOptions,
) -> Result<[f64; N], OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut h = h_hint.abs();
    let mut steps = 0usize;
    while dir * (t1 - t) > 0.0 {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps { t, max_steps: opts.max_steps });
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let (y_new, err) = try_step(f, t, &y, dir * hs, opts);
        if !y_new.iter().all(|v| v.is_finite()) {
            return Err(OdeError::NonFinite { t });
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + dir * hs };
            y = y_new;
            if !last {
                h = hs * step_factor(err);
            }
        } else {
            h = hs * step_factor(err).min(1.0);
            if h < opts.h_min * (1.0 + t.abs()) {
                return Err(OdeError::StepUnderflow { t, h });
            }
        }
    }
    *h_hint = h;
    Ok(y)
}

/// Integrates through an increasing (or decreasing) grid and returns the state at
/// every node; `grid[0]` is the initial time.
pub fn integrate_grid<const N: usize, F>(f: &F, y0: [f64; N], grid: &[f64], opts: &OdeOptions) -> Result<Vec<[f64; N]>, OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(grid.len());
    let Some(&first) = grid.first() else { return Ok(out) };
    out.push(y0);
    let mut y = y0;
    let mut t = first;
    let mut h = initial_step(grid.last().copied().unwrap_or(first) - first);
    for &tn in &grid[1..] {
        y = integrate_from(f, t, y, tn, &mut h, opts)?;
        t = tn;
        out.push(y);
    }
    Ok(out)
}
