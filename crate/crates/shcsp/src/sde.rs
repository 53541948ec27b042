//! Numerical engine for SDE blocks: Brownian increments, Euler–Maruyama
//! stepping, and boundary-exit detection.
//!
//! The integrator is explicit Euler–Maruyama with a fixed step `dt`
//! (strong order 0.5 — plenty for desk-scale statistical checks). The
//! domain guard is evaluated at every sample point; on the first `false`
//! the exit time is refined by bisection on the linear interpolant of the
//! offending step, to a tolerance of `10⁻⁹ · max(1, t_max)`. Piecewise
//! drift (the aircraft's `sgn(y)` turn) is evaluated pointwise at the
//! current state; drift discontinuities get no event localization.
//!
//! Sample times are computed as `entry + k·dt` from the step index, not by
//! accumulating `t += dt`, so long integrations don't drift.

use rand_core::RngCore;
use thiserror::Error;

use crate::exec::state::{ProcState, RunConfig};
use crate::rng::box_muller;
use crate::syntax::ast::{EvalError, Expr, SdeBlock};

/// One integrated trajectory of an SDE block.
#[derive(Clone, Debug, PartialEq)]
pub struct SdePath {
    /// Sample times, starting at the block's entry time; gaps ≤ dt.
    pub times: Vec<f64>,
    /// State vector at each sample time (one entry per block variable).
    pub states: Vec<Vec<f64>>,
    pub exit: SdeExit,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SdeExit {
    /// The domain guard failed; time refined by bisection.
    Boundary { time: f64, state: Vec<f64> },
    /// The poll callback reported a ready communication partner.
    Interrupted { time: f64, state: Vec<f64> },
    /// Model time reached `t_max` with the guard still holding.
    Timeout,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SdeError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("integration produced a non-finite value for {var} at time {time}")]
    NonFinite { var: String, time: f64 },
}

/// Vector of `dim` independent Brownian increments over a step of length
/// `dt`: normal samples with mean 0 and variance `dt`.
pub fn brownian_increment(dim: usize, dt: f64, rng: &mut impl RngCore) -> Vec<f64> {
    let scale = dt.sqrt();
    (0..dim).map(|_| scale * box_muller(rng)).collect()
}

/// One Euler–Maruyama step: `s' = s + b(env)·dt + σ(env)·dW`. The caller
/// keeps `env` in sync with `s` (the block variables must map to the
/// current state values).
pub fn em_step(
    s: &[f64],
    drift: &[Expr],
    diffusion: &[Vec<Expr>],
    env: &std::collections::BTreeMap<String, f64>,
    dt: f64,
    dw: &[f64],
) -> Result<Vec<f64>, EvalError> {
    debug_assert_eq!(s.len(), drift.len());
    debug_assert_eq!(s.len(), diffusion.len());
    let mut next = Vec::with_capacity(s.len());
    for i in 0..s.len() {
        let mut v = s[i] + drift[i].eval(env)? * dt;
        for (j, entry) in diffusion[i].iter().enumerate() {
            v += entry.eval(env)? * dw[j];
        }
        next.push(v);
    }
    Ok(next)
}

/// Bisection on the linear interpolant of a step `[t0, t1]` whose guard is
/// true at `t0` and false at `t1`. Returns the first-false end of a bracket
/// of width ≤ tol/2, together with the interpolated state there.
pub(crate) fn bisect_exit(
    mut guard: impl FnMut(&[f64]) -> Result<bool, EvalError>,
    t0: f64,
    s0: &[f64],
    t1: f64,
    s1: &[f64],
    tol: f64,
) -> Result<(f64, Vec<f64>), EvalError> {
    let lerp = |t: f64| -> Vec<f64> {
        if t1 == t0 {
            return s1.to_vec();
        }
        let a = (t - t0) / (t1 - t0);
        s0.iter()
            .zip(s1.iter())
            .map(|(x0, x1)| x0 + a * (x1 - x0))
            .collect()
    };
    let (mut lo, mut hi) = (t0, t1);
    let mut s_hi = s1.to_vec();
    while hi - lo > tol * 0.5 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // ran out of floating-point resolution
        }
        let s_mid = lerp(mid);
        if guard(&s_mid)? {
            lo = mid;
        } else {
            hi = mid;
            s_hi = s_mid;
        }
    }
    Ok((hi, s_hi))
}

/// Boundary-refinement tolerance for a horizon of `t_max`.
pub(crate) fn boundary_tol(t_max: f64) -> f64 {
    1e-9 * t_max.max(1.0)
}

/// Integrate `block` from `entry` until the guard fails (boundary exit,
/// bisection-refined), `poll` reports a ready partner at a step boundary
/// (interrupted), or model time reaches `cfg.t_max` (timeout).
///
/// `poll(t, s)` is also consulted at the entry point itself, so an already
/// ready partner interrupts before any integration happens.
pub fn evolve(
    block: &SdeBlock,
    entry: &ProcState,
    cfg: &RunConfig,
    rng: &mut impl RngCore,
    mut poll: impl FnMut(f64, &[f64]) -> bool,
) -> Result<SdePath, SdeError> {
    let mut env = entry.vals.clone();
    let mut s: Vec<f64> = block
        .vars
        .iter()
        .map(|v| env.get(v).copied().unwrap_or(0.0))
        .collect();
    for (v, x) in block.vars.iter().zip(&s) {
        env.insert(v.clone(), *x);
    }
    let t_entry = entry.now;
    let mut times = vec![t_entry];
    let mut states = vec![s.clone()];
    let tol = boundary_tol(cfg.t_max);

    let check = |env: &std::collections::BTreeMap<String, f64>| block.domain.eval(env);

    if !check(&env)? {
        // Cont-2, first disjunct: the guard is already false on entry.
        return Ok(SdePath {
            times,
            states: states.clone(),
            exit: SdeExit::Boundary { time: t_entry, state: s },
        });
    }
    if poll(t_entry, &s) {
        return Ok(SdePath {
            times,
            states: states.clone(),
            exit: SdeExit::Interrupted { time: t_entry, state: s },
        });
    }

    let bm = block.brownian_dim();
    let mut t = t_entry;
    let mut k: u64 = 0;
    loop {
        if t >= cfg.t_max {
            return Ok(SdePath { times, states, exit: SdeExit::Timeout });
        }
        k += 1;
        let t_next = (t_entry + k as f64 * cfg.dt).min(cfg.t_max);
        let h = t_next - t;
        if h <= 0.0 {
            return Ok(SdePath { times, states, exit: SdeExit::Timeout });
        }
        let dw = brownian_increment(bm, h, rng);
        let s_next = em_step(&s, &block.drift, &block.diffusion, &env, h, &dw)?;
        for (i, x) in s_next.iter().enumerate() {
            if !x.is_finite() {
                return Err(SdeError::NonFinite {
                    var: block.vars[i].clone(),
                    time: t_next,
                });
            }
        }
        for (v, x) in block.vars.iter().zip(&s_next) {
            env.insert(v.clone(), *x);
        }
        if !check(&env)? {
            let mut guard_env = env.clone();
            let (t_star, s_star) = bisect_exit(
                |probe| {
                    for (v, x) in block.vars.iter().zip(probe) {
                        guard_env.insert(v.clone(), *x);
                    }
                    block.domain.eval(&guard_env)
                },
                t,
                &s,
                t_next,
                &s_next,
                tol,
            )?;
            times.push(t_star);
            states.push(s_star.clone());
            return Ok(SdePath {
                times,
                states,
                exit: SdeExit::Boundary { time: t_star, state: s_star },
            });
        }
        times.push(t_next);
        states.push(s_next.clone());
        if poll(t_next, &s_next) {
            return Ok(SdePath {
                times,
                states,
                exit: SdeExit::Interrupted { time: t_next, state: s_next },
            });
        }
        t = t_next;
        s = s_next;
    }
}
