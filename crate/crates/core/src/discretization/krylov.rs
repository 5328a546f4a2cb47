//! Matrix-free Krylov solvers for symmetric systems on grid vectors.
//!
//! Inner products carry the grid weight h², so "symmetric" means symmetric
//! in the discrete L² sense.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    /// Relative residual target ‖Ax - b‖/‖b‖.
    pub tol: f64,
    pub max_iter: usize,
    /// Restarts used to drive the true residual below `tol` when the
    /// recurrence residual drifts.
    pub max_restarts: usize,
    /// Residual still accepted when `tol` is out of reach (rounding floor).
    pub accept: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 20_000,
            max_restarts: 4,
            accept: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += s * xi);
}

/// Conjugate gradients for symmetric positive definite `apply`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveStats)> {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; b.len()], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut x = x0.map_or_else(|| vec![0.0; b.len()], |x| x.to_vec());
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut it = 0;
    let (mut best_rr, mut best_it) = (rr, 0);
    while it < cfg.max_iter {
        if rr.sqrt() <= cfg.tol * bnorm {
            break;
        }
        if rr < 0.25 * best_rr {
            best_rr = rr;
            best_it = it;
        } else if it > best_it + 400 {
            // stagnated at the rounding floor
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NoConvergence {
                method: "cg (operator not positive definite)",
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        let a = rr / pap;
        axpy(&mut x, a, &p);
        axpy(&mut r, -a, &ap);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        it += 1;
    }
    let ax = apply(&x);
    let res = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>()) / bnorm;
    if res > (cfg.tol * 10.0).max(cfg.accept) {
        return Err(Error::NoConvergence {
            method: "cg",
            iterations: it,
            residual: res,
        });
    }
    Ok((x, SolveStats { iterations: it, relative_residual: res }))
}

/// One MINRES sweep from x = 0 (Paige–Saunders recurrences).
fn minres_sweep(apply: &impl Fn(&[f64]) -> Vec<f64>, b: &[f64], tol_abs: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let len = b.len();
    let mut x = vec![0.0; len];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return (x, 0);
    }
    let mut v_prev = vec![0.0; len];
    let mut v: Vec<f64> = b.iter().map(|bi| bi / beta1).collect();
    let mut w_prev = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut eta = beta1;
    let (mut c_prev, mut c) = (1.0, 1.0);
    let (mut s_prev, mut s) = (0.0, 0.0);
    let mut gamma_prev_for_v = 0.0;
    let mut it = 0;
    while it < max_iter {
        let av = apply(&v);
        let delta = dot(&av, &v);
        let mut v_next: Vec<f64> = av
            .iter()
            .zip(&v)
            .zip(&v_prev)
            .map(|((a, vi), vp)| a - delta * vi - gamma_prev_for_v * vp)
            .collect();
        let gamma_next = norm(&v_next);

        let a0 = c * delta - c_prev * s * gamma_prev_for_v;
        let a1 = a0.hypot(gamma_next);
        let a2 = s * delta + c_prev * c * gamma_prev_for_v;
        let a3 = s_prev * gamma_prev_for_v;
        let c_next = a0 / a1;
        let s_next = gamma_next / a1;

        let w_next: Vec<f64> = v
            .iter()
            .zip(&w_prev)
            .zip(&w)
            .map(|((vi, wp), wi)| (vi - a3 * wp - a2 * wi) / a1)
            .collect();
        axpy(&mut x, c_next * eta, &w_next);
        eta *= -s_next;
        it += 1;

        if eta.abs() <= tol_abs || gamma_next == 0.0 {
            break;
        }
        v_next.iter_mut().for_each(|x| *x /= gamma_next);
        v_prev = std::mem::replace(&mut v, v_next);
        w_prev = std::mem::replace(&mut w, w_next);
        gamma_prev_for_v = gamma_next;
        c_prev = c;
        c = c_next;
        s_prev = s;
        s = s_next;
    }
    (x, it)
}

/// MINRES for symmetric, possibly indefinite `apply`, with restarts on the
/// true residual.
pub fn minres(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, SolveStats)> {
    let bnorm = norm(b);
    let mut x = vec![0.0; b.len()];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut total = 0;
    let mut res = 1.0;
    for _ in 0..=cfg.max_restarts {
        let rnorm = norm(&r);
        // aim a little below the target so the true residual lands under it
        let (dx, it) = minres_sweep(&apply, &r, 0.2 * cfg.tol * bnorm, cfg.max_iter);
        total += it;
        axpy(&mut x, 1.0, &dx);
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let new_res = norm(&r) / bnorm;
        res = new_res;
        if res <= cfg.tol || norm(&r) >= rnorm {
            break;
        }
    }
    if res > cfg.tol.max(cfg.accept) {
        return Err(Error::NoConvergence {
            method: "minres",
            iterations: total,
            residual: res,
        });
    }
    Ok((x, SolveStats { iterations: total, relative_residual: res }))
}
