//! Independent test oracles: exact rational event-driven flow for tiny
//! instances, the closed-form l1 flow, and brute-force checks for the
//! minimal-norm subgradient machinery. Nothing here reuses the floating
//! solvers it is meant to check.

use crate::error::{Error, Result};

/// Exact rational arithmetic on i128 with eager reduction. Panics on
/// overflow; oracle inputs are tiny by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: i128,
    den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl Ratio {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Ratio { num: sign * num / g, den: sign * den / g }
    }

    pub fn int(v: i128) -> Self {
        Ratio { num: v, den: 1 }
    }

    pub fn zero() -> Self {
        Ratio::int(0)
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    pub fn abs(&self) -> Self {
        Ratio { num: self.num.abs(), den: self.den }
    }

    pub fn signum(&self) -> i128 {
        self.num.signum()
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn add(&self, o: &Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn sub(&self, o: &Ratio) -> Ratio {
        Ratio::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    pub fn mul(&self, o: &Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }

    pub fn div(&self, o: &Ratio) -> Ratio {
        assert!(o.num != 0, "division by zero");
        Ratio::new(self.num * o.den, self.den * o.num)
    }

    pub fn lt(&self, o: &Ratio) -> bool {
        self.num * o.den < o.num * self.den
    }
}

fn rat_dot(a: &[Ratio], b: &[Ratio]) -> Ratio {
    let mut acc = Ratio::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc.add(&x.mul(y));
    }
    acc
}

/// Solves M x = rhs exactly by Gauss-Jordan elimination. Returns None
/// when the system is inconsistent; free variables are set to zero.
pub fn solve_rational(m: &[Vec<Ratio>], rhs: &[Ratio]) -> Option<Vec<Ratio>> {
    let rows = m.len();
    if rows == 0 {
        return Some(Vec::new());
    }
    let cols = m[0].len();
    let mut aug: Vec<Vec<Ratio>> = m
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(*b);
            row
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut row = 0usize;
    for col in 0..cols {
        let Some(pr) = (row..rows).find(|&r| !aug[r][col].is_zero()) else {
            continue;
        };
        aug.swap(row, pr);
        let inv = Ratio::int(1).div(&aug[row][col]);
        for c in col..=cols {
            aug[row][c] = aug[row][c].mul(&inv);
        }
        for r in 0..rows {
            if r != row && !aug[r][col].is_zero() {
                let factor = aug[r][col];
                for c in col..=cols {
                    let t = aug[row][c].mul(&factor);
                    aug[r][c] = aug[r][c].sub(&t);
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == rows {
            break;
        }
    }
    // Inconsistent if a zero row has nonzero rhs.
    for r in row..rows {
        if !aug[r][cols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Ratio::zero(); cols];
    for (r, &col) in pivot_cols.iter().enumerate() {
        x[col] = aug[r][cols];
    }
    Some(x)
}

/// The exact minimal-norm subgradient on a face: enumerate activities of
/// the free coordinates (interior / at +1 / at -1), solve the interior
/// stationarity system exactly, and keep the first activity whose KKT
/// signs verify. Convexity makes that the global optimum.
pub fn exact_min_norm_q(a: &[Vec<Ratio>], signs: &[i128]) -> Option<Vec<Ratio>> {
    let m = a.len();
    let free: Vec<usize> = (0..m).filter(|&i| signs[i] == 0).collect();
    let nf = free.len();
    assert!(nf <= 12, "oracle face too large");
    // Gram matrix of the operator rows.
    let gram: Vec<Vec<Ratio>> = (0..m).map(|i| (0..m).map(|j| rat_dot(&a[i], &a[j])).collect()).collect();
    let mut best: Option<(Ratio, Vec<Ratio>)> = None;
    for code in 0..3usize.pow(nf as u32) {
        let mut act = vec![0i8; nf];
        let mut c = code;
        for slot in 0..nf {
            act[slot] = (c % 3) as i8; // 0 interior, 1 at +1, 2 at -1
            c /= 3;
        }
        let interior: Vec<usize> = (0..nf).filter(|&s| act[s] == 0).collect();
        let mut q = vec![Ratio::zero(); m];
        for i in 0..m {
            if signs[i] != 0 {
                q[i] = Ratio::int(signs[i]);
            }
        }
        for (slot, &i) in free.iter().enumerate() {
            match act[slot] {
                1 => q[i] = Ratio::int(1),
                2 => q[i] = Ratio::int(-1),
                _ => {}
            }
        }
        if !interior.is_empty() {
            // Stationarity: (G q)_i = 0 for interior free coordinates.
            let sys: Vec<Vec<Ratio>> = interior
                .iter()
                .map(|&s| interior.iter().map(|&s2| gram[free[s]][free[s2]]).collect())
                .collect();
            let rhs: Vec<Ratio> = interior
                .iter()
                .map(|&s| {
                    let mut acc = Ratio::zero();
                    for j in 0..m {
                        if !(signs[j] == 0 && act[free.iter().position(|&x| x == j).unwrap()] == 0) {
                            acc = acc.add(&gram[free[s]][j].mul(&q[j]));
                        }
                    }
                    Ratio::zero().sub(&acc)
                })
                .collect();
            let sol = solve_rational(&sys, &rhs)?;
            for (k, &s) in interior.iter().enumerate() {
                q[free[s]] = sol[k];
            }
        }
        // Feasibility of interior values and KKT signs at the bounds.
        let one = Ratio::int(1);
        let neg_one = Ratio::int(-1);
        let mut ok = true;
        for (slot, &i) in free.iter().enumerate() {
            if act[slot] == 0 && (one.lt(&q[i].abs())) {
                ok = false;
                break;
            }
            let grad = rat_dot(&gram[i], &q);
            match act[slot] {
                1 if grad.is_positive() => ok = false,
                2 if grad.lt(&Ratio::zero()) => ok = false,
                _ => {}
            }
            let _ = (&one, &neg_one);
            if !ok {
                break;
            }
        }
        if !ok {
            continue;
        }
        // Objective ||A^T q||^2 = q' G q.
        let gq: Vec<Ratio> = (0..m).map(|i| rat_dot(&gram[i], &q)).collect();
        let obj = rat_dot(&q, &gq);
        match &best {
            Some((b, _)) if !obj.lt(b) => {}
            _ => best = Some((obj, q.clone())),
        }
    }
    best.map(|(_, q)| q)
}

/// An exact trajectory of the polyhedral flow at rational data.
#[derive(Debug, Clone)]
pub struct ExactTrajectory {
    pub breakpoints: Vec<Ratio>,
    pub slopes: Vec<Vec<Ratio>>,
    pub extinct: bool,
}

/// Event-driven integration in exact arithmetic: at each breakpoint the
/// minimal-norm subgradient comes from the activity enumeration, and the
/// next event time is the smallest positive z_i / (A p)_i with matching
/// signs. Only for tiny instances.
pub fn exact_event_flow(a: &[Vec<Ratio>], datum: &[Ratio], max_events: usize) -> Result<ExactTrajectory> {
    let m = a.len();
    let n = datum.len();
    let mut u = datum.to_vec();
    let mut t = Ratio::zero();
    let mut breakpoints = vec![t];
    let mut slopes = Vec::new();
    for _ in 0..max_events {
        let z: Vec<Ratio> = (0..m).map(|i| rat_dot(&a[i], &u)).collect();
        let signs: Vec<i128> = z.iter().map(|v| v.signum()).collect();
        let q = exact_min_norm_q(a, &signs)
            .ok_or_else(|| Error::InvalidInput("oracle activity enumeration failed".into()))?;
        // p = A^T q.
        let mut p = vec![Ratio::zero(); n];
        for i in 0..m {
            for j in 0..n {
                p[j] = p[j].add(&a[i][j].mul(&q[i]));
            }
        }
        if p.iter().all(|v| v.is_zero()) {
            return Ok(ExactTrajectory { breakpoints, slopes, extinct: true });
        }
        let w: Vec<Ratio> = (0..m).map(|i| rat_dot(&a[i], &p)).collect();
        let mut dt: Option<Ratio> = None;
        for i in 0..m {
            if !z[i].is_zero() && !w[i].is_zero() && z[i].signum() == w[i].signum() {
                let cand = z[i].div(&w[i]);
                if dt.as_ref().map_or(true, |d| cand.lt(d)) {
                    dt = Some(cand);
                }
            }
        }
        let dt = dt.ok_or_else(|| Error::InvalidInput("oracle found no forward event".into()))?;
        for j in 0..n {
            u[j] = u[j].sub(&dt.mul(&p[j]));
        }
        t = t.add(&dt);
        breakpoints.push(t);
        slopes.push(p);
    }
    Ok(ExactTrajectory { breakpoints, slopes, extinct: false })
}

/// Closed-form l1 flow: each coordinate shrinks toward zero at unit rate.
pub fn l1_flow_closed_form(f: &[f64], t: f64) -> Vec<f64> {
    f.iter().map(|&v| v.signum() * (v.abs() - t).max(0.0)).collect()
}

/// Worst violation of <p, p - q> over the vertices of the face of K cut
/// out by the sign pattern of z = Au (free coordinates at +-1).
pub fn face_vertex_worst_violation(a_rows: &[Vec<f64>], z: &[f64], eps: f64, p: &[f64]) -> f64 {
    let m = a_rows.len();
    let free: Vec<usize> = (0..m).filter(|&i| z[i].abs() <= eps).collect();
    assert!(free.len() <= 20, "face too large for vertex enumeration");
    let nsq: f64 = p.iter().map(|v| v * v).sum();
    let w: Vec<f64> = a_rows.iter().map(|row| row.iter().zip(p).map(|(r, pi)| r * pi).sum()).collect();
    let mut fixed = 0.0;
    for i in 0..m {
        if z[i] > eps {
            fixed += w[i];
        } else if z[i] < -eps {
            fixed -= w[i];
        }
    }
    let mut worst = 0.0f64;
    for code in 0..(1usize << free.len()) {
        let mut val = fixed;
        for (slot, &i) in free.iter().enumerate() {
            if code & (1 << slot) != 0 {
                val += w[i];
            } else {
                val -= w[i];
            }
        }
        worst = worst.max((nsq - val).abs());
    }
    worst
}

/// Brute-force minimum of ||A^T q|| over the face, scanning a regular
/// grid of the free box. Coarse but implementation-independent.
pub fn grid_search_min_norm(a_rows: &[Vec<f64>], z: &[f64], eps: f64, grid: usize) -> f64 {
    let m = a_rows.len();
    let n = a_rows[0].len();
    let free: Vec<usize> = (0..m).filter(|&i| z[i].abs() <= eps).collect();
    assert!(free.len() <= 6, "grid search face too large");
    let mut q = vec![0.0; m];
    for i in 0..m {
        if z[i] > eps {
            q[i] = 1.0;
        } else if z[i] < -eps {
            q[i] = -1.0;
        }
    }
    let points = grid + 1;
    let mut best = f64::INFINITY;
    let total = points.pow(free.len() as u32);
    for code in 0..total {
        let mut c = code;
        for &i in &free {
            let step = c % points;
            c /= points;
            q[i] = -1.0 + 2.0 * step as f64 / grid as f64;
        }
        let mut nsq = 0.0;
        for j in 0..n {
            let mut pj = 0.0;
            for i in 0..m {
                pj += a_rows[i][j] * q[i];
            }
            nsq += pj * pj;
        }
        if nsq < best {
            best = nsq;
        }
    }
    best.sqrt()
}
