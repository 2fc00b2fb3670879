//! Box-constrained least squares: minimize 0.5 ||A^T q - b||^2 subject to
//! lo <= q <= hi (entries with lo_i == hi_i are pinned).
//!
//! The solve runs an accelerated projected-gradient phase with step 1/L
//! (L an upper bound on lambda_max(A A^T)) and adaptive restart, followed
//! by active-set polish rounds that solve the free block exactly with
//! CGLS. The polish matters: event detection downstream needs the exact
//! face, not just a small objective.

use crate::error::Result;
use crate::linalg::{self, Mat};

#[derive(Debug, Clone)]
pub struct BoxLsqOptions {
    /// Stop when ||q - clamp(q - grad)|| <= pg_tol_rel * (1 + ||b||).
    pub pg_tol_rel: f64,
    /// Iteration cap for one accelerated phase.
    pub max_accel_iters: usize,
    /// Cap on active-set polish rounds.
    pub max_polish_rounds: usize,
    /// Outer alternations between acceleration and polish.
    pub max_outer_rounds: usize,
}

impl Default for BoxLsqOptions {
    fn default() -> Self {
        BoxLsqOptions {
            pg_tol_rel: crate::tol::PG_TOL_REL,
            max_accel_iters: 20_000,
            max_polish_rounds: 150,
            max_outer_rounds: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoxLsqSolution {
    pub q: Vec<f64>,
    /// p = A^T q at the solution.
    pub p: Vec<f64>,
    /// Final projected-gradient norm.
    pub pg_norm: f64,
    /// The target the solve was asked to reach.
    pub pg_tol: f64,
    pub iterations: usize,
    /// False when the solve returned best-effort at its rounding floor.
    pub converged: bool,
}

fn clamp_into(q: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((qi, &l), &h) in q.iter_mut().zip(lo).zip(hi) {
        *qi = qi.max(l).min(h);
    }
}

fn grad(a: &Mat, q: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.tr_matvec(q);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    a.matvec(&r)
}

fn pg_norm(q: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..q.len() {
        let stepped = (q[i] - g[i]).max(lo[i]).min(hi[i]);
        let d = q[i] - stepped;
        s += d * d;
    }
    s.sqrt()
}

pub fn solve_box_lsq(
    a: &Mat,
    b: &[f64],
    lo: &[f64],
    hi: &[f64],
    warm: Option<&[f64]>,
    lipschitz: f64,
    opts: &BoxLsqOptions,
) -> Result<BoxLsqSolution> {
    let m = a.rows();
    debug_assert_eq!(b.len(), a.cols());
    debug_assert_eq!(lo.len(), m);
    debug_assert_eq!(hi.len(), m);

    let tol = opts.pg_tol_rel * (1.0 + linalg::norm2(b));
    let mut q: Vec<f64> = match warm {
        Some(w) => w.to_vec(),
        None => vec![0.0; m],
    };
    clamp_into(&mut q, lo, hi);

    if lipschitz <= 0.0 {
        // A is the zero operator: the objective is constant.
        let p = a.tr_matvec(&q);
        return Ok(BoxLsqSolution { q, p, pg_norm: 0.0, pg_tol: tol, iterations: 0, converged: true });
    }
    let step = 1.0 / lipschitz;

    // The accelerated phase gets close; the polish pass then solves the
    // free block exactly so faces (and the event times built on them)
    // are identified to machine precision. Polish always runs; with a
    // warm start the active set is usually almost right already, so
    // polish alone often settles the solve.
    let mut iterations = 0usize;
    if warm.is_some() {
        let pg = polish(a, b, lo, hi, &mut q, opts.max_polish_rounds, tol);
        if pg <= tol {
            return Ok(finish(a, q, pg, tol, iterations));
        }
    }
    for _outer in 0..opts.max_outer_rounds {
        let (_, used) = accelerate(a, b, lo, hi, &mut q, step, tol, opts.max_accel_iters);
        iterations += used;
        let pg = polish(a, b, lo, hi, &mut q, opts.max_polish_rounds, tol);
        if pg <= tol {
            return Ok(finish(a, q, pg, tol, iterations));
        }
    }
    let g = grad(a, &q, b);
    let achieved = pg_norm(&q, &g, lo, hi);
    Ok(finish(a, q, achieved, tol, iterations))
}

fn finish(a: &Mat, q: Vec<f64>, pg: f64, tol: f64, iterations: usize) -> BoxLsqSolution {
    let p = a.tr_matvec(&q);
    BoxLsqSolution { q, p, pg_norm: pg, pg_tol: tol, iterations, converged: pg <= tol }
}

/// FISTA with projection and gradient-based adaptive restart.
fn accelerate(
    a: &Mat,
    b: &[f64],
    lo: &[f64],
    hi: &[f64],
    q: &mut Vec<f64>,
    step: f64,
    tol: f64,
    max_iters: usize,
) -> (f64, usize) {
    let m = q.len();
    let mut y = q.clone();
    let mut t = 1.0f64;
    let mut last_pg = f64::INFINITY;
    for it in 0..max_iters {
        let g = grad(a, &y, b);
        let mut q_next = vec![0.0; m];
        for i in 0..m {
            q_next[i] = (y[i] - step * g[i]).max(lo[i]).min(hi[i]);
        }
        // Restart when the momentum direction opposes the step.
        let mut restart = 0.0;
        for i in 0..m {
            restart += (y[i] - q_next[i]) * (q_next[i] - q[i]);
        }
        if restart > 0.0 {
            t = 1.0;
            y = q.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..m {
            y[i] = q_next[i] + beta * (q_next[i] - q[i]);
        }
        *q = q_next;
        t = t_next;
        if it % 8 == 0 || it + 1 == max_iters {
            let gq = grad(a, q, b);
            last_pg = pg_norm(q, &gq, lo, hi);
            if last_pg <= tol {
                return (last_pg, it + 1);
            }
        }
    }
    (last_pg, max_iters)
}

/// Bounded-variable least-squares polish. Starting from the active set
/// the accelerated phase identified, each round solves the free block
/// exactly (CGLS), walks toward that solution pinning the bounds it
/// hits, and once the free solution is feasible releases the KKT
/// violators among the bound coordinates. Each walk is monotone toward a
/// block optimum; the round cap bounds degenerate ties.
fn polish(a: &Mat, b: &[f64], lo: &[f64], hi: &[f64], q: &mut [f64], max_rounds: usize, tol: f64) -> f64 {
    let m = q.len();
    let n = a.cols();
    let snap = 1e-12;
    // 0 free, 1 at lo, 2 at hi.
    let mut state = vec![0u8; m];
    for i in 0..m {
        if hi[i] - lo[i] <= 0.0 || q[i] - lo[i] <= snap * (1.0 + lo[i].abs()) {
            q[i] = lo[i];
            state[i] = 1;
        } else if hi[i] - q[i] <= snap * (1.0 + hi[i].abs()) {
            q[i] = hi[i];
            state[i] = 2;
        }
    }
    let release_tol = 0.25 * tol / (m as f64).sqrt().max(1.0);
    for _round in 0..max_rounds {
        // Walk to the optimum of the current free block, pinning bounds.
        for _inner in 0..=m {
            let free: Vec<usize> = (0..m).filter(|&i| state[i] == 0).collect();
            if free.is_empty() {
                break;
            }
            // Correction d solves min || A_free^T d - (b - A^T q) ||.
            let rhs = linalg::sub(b, &a.tr_matvec(q));
            let apply = |d: &[f64]| {
                let mut out = vec![0.0; n];
                for (slot, &i) in free.iter().enumerate() {
                    let di = d[slot];
                    if di != 0.0 {
                        let row = a.row(i);
                        for j in 0..n {
                            out[j] += di * row[j];
                        }
                    }
                }
                out
            };
            let apply_t =
                |y: &[f64]| free.iter().map(|&i| linalg::dot(a.row(i), y)).collect::<Vec<f64>>();
            let d = linalg::cgls(apply, apply_t, &rhs, free.len(), 1e-15, 6 * free.len() + 400);
            if linalg::norm2(&d) <= 1e-16 * (1.0 + linalg::norm2(q)) {
                break;
            }
            // Largest feasible fraction of the correction.
            let mut alpha = 1.0f64;
            for (slot, &i) in free.iter().enumerate() {
                if d[slot] > 0.0 {
                    alpha = alpha.min(((hi[i] - q[i]) / d[slot]).max(0.0));
                } else if d[slot] < 0.0 {
                    alpha = alpha.min(((lo[i] - q[i]) / d[slot]).max(0.0));
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (slot, &i) in free.iter().enumerate() {
                q[i] += alpha * d[slot];
            }
            if alpha >= 1.0 {
                break;
            }
            // Pin everything that reached a bound at this step.
            let mut pinned = false;
            for &i in &free {
                if q[i] - lo[i] <= snap * (1.0 + lo[i].abs()) {
                    q[i] = lo[i];
                    state[i] = 1;
                    pinned = true;
                } else if hi[i] - q[i] <= snap * (1.0 + hi[i].abs()) {
                    q[i] = hi[i];
                    state[i] = 2;
                    pinned = true;
                }
            }
            if !pinned {
                break;
            }
        }
        // Release every KKT violator among the bound coordinates. The
        // walk is monotone toward each free-block optimum, so batch
        // release cannot cycle through a state twice with equal
        // objective; the round cap bounds pathological ties.
        let g = grad(a, q, b);
        let mut released = false;
        for i in 0..m {
            if hi[i] - lo[i] <= 0.0 {
                continue;
            }
            let violating = match state[i] {
                1 => g[i] < -release_tol,
                2 => g[i] > release_tol,
                _ => false,
            };
            if violating {
                state[i] = 0;
                released = true;
            }
        }
        if !released {
            return pg_norm(q, &g, lo, hi);
        }
    }
    let g = grad(a, q, b);
    pg_norm(q, &g, lo, hi)
}
