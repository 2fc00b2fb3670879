//! Extinction time, its sharp bounds, extinction profiles, the dual norm
//! and ground states.
//!
//! The dual norm ||f||_* = sup { <f,u>/J(u) : u orthogonal to N(J) }
//! equals the least s such that f - f_bar = A^T q is solvable with
//! ||q||_inf <= s, computed here by bisection over box-constrained least
//! squares. Ground states minimize J on the unit sphere of N(J)^perp;
//! at moderate sizes they are found exactly by enumerating the vertices
//! of the polytope { J <= 1 } inside N(J)^perp.

use crate::boxqp::{solve_box_lsq, BoxLsqOptions};
use crate::error::{Error, Result};
use crate::flow::{run_event_driven, FlowOptions, Trajectory};
use crate::functional::{PolyhedralFunctional, Subgradient};
use crate::linalg::{self, Mat};
use crate::minsub;
use crate::signal::Signal;
use crate::tol;
use rand::{Rng, SeedableRng};

/// Extinction time of an extinct trajectory.
pub fn extinction_time(traj: &Trajectory) -> Result<f64> {
    traj.extinction_time()
}

#[derive(Debug, Clone)]
pub struct DualNorm {
    pub value: f64,
    /// Certificate q with A^T q = f - f_bar and ||q||_inf = value (for
    /// the max-norm functional: (f - f_bar)/value inside the l1 ball).
    pub certificate: Vec<f64>,
    /// Representation residual of the certificate.
    pub residual: f64,
    /// Final bisection width.
    pub width: f64,
}

/// Computes ||f||_* for f - f_bar. `tol` is the feasibility residual per
/// bisection step; defaults to the certificate tolerance of f - f_bar.
pub fn dual_norm(f: &PolyhedralFunctional, datum: &[f64], tol: Option<f64>) -> Result<DualNorm> {
    f.check_dim(datum, "dual_norm")?;
    let f_bar = f.nullspace_project(datum)?;
    let g = linalg::sub(datum, &f_bar);
    let g_norm = linalg::norm2(&g);
    let feas_tol = tol.unwrap_or_else(|| tol::cert_tol(g_norm));
    if g_norm <= feas_tol {
        return Ok(DualNorm { value: 0.0, certificate: vec![0.0; f.dual_dim()], residual: g_norm, width: 0.0 });
    }
    if f.is_linf() {
        // The dual of the max norm is the l1 norm; N(J) = {0}.
        let value = linalg::norm1(&g);
        let certificate = linalg::scale(&g, 1.0 / value);
        return Ok(DualNorm { value, certificate, residual: 0.0, width: 0.0 });
    }
    let a = f.operator().expect("operator functional");
    let m = a.rows();
    // A representation A^T q0 = g gives a feasible box radius. The 1D
    // difference operator has the closed form q_j = -sum_{i<=j} g_i;
    // anything else goes through the minimum-norm CGLS solve.
    let q0 = if f.tag() == crate::functional::StructureTag::Tv1d {
        let mut acc = 0.0;
        (0..m)
            .map(|j| {
                acc -= g[j];
                acc
            })
            .collect()
    } else {
        linalg::cgls(|x| a.tr_matvec(x), |x| a.matvec(x), &g, m, 1e-14, 40 * (m + a.cols()) + 400)
    };
    let rep_res = linalg::norm2(&linalg::sub(&a.tr_matvec(&q0), &g));
    if rep_res > feas_tol {
        return Err(Error::NotInRange { residual: rep_res, tol: feas_tol });
    }
    let mut hi = linalg::norm_inf(&q0);
    let mut lo = 0.0f64;
    let mut best_q = q0;
    let mut best_res = rep_res;
    let width_target = 1e-10 * (1.0 + linalg::norm2(datum));
    let qp = BoxLsqOptions { pg_tol_rel: crate::tol::PG_TOL_REL_FEAS, ..BoxLsqOptions::default() };
    while hi - lo > width_target {
        let mid = 0.5 * (lo + hi);
        let lo_b = vec![-mid; m];
        let hi_b = vec![mid; m];
        let warm: Vec<f64> = best_q.iter().map(|&x| x.clamp(-mid, mid)).collect();
        let sol = solve_box_lsq(a, &g, &lo_b, &hi_b, Some(&warm), f.lipschitz(), &qp)?;
        let res = linalg::norm2(&linalg::sub(&sol.p, &g));
        if res <= feas_tol {
            hi = mid;
            best_q = sol.q;
            best_res = res;
        } else {
            lo = mid;
        }
    }
    Ok(DualNorm { value: hi, certificate: best_q, residual: best_res, width: hi - lo })
}

#[derive(Debug, Clone)]
pub struct GroundStateOptions {
    /// Budget on enumerated row subsets for the exact search.
    pub enumeration_budget: usize,
    pub multistart: usize,
    pub descent_iters: usize,
    pub seed: u64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions { enumeration_budget: 300_000_000, multistart: 32, descent_iters: 400, seed: 7 }
    }
}

/// Levels (low, high) of the zero-mean unit-norm step with k low entries.
fn balanced_step_levels(n: usize, k: usize) -> (f64, f64) {
    let (nf, kf) = (n as f64, k as f64);
    let c = 1.0 / (kf * (nf - kf) * nf).sqrt();
    (-(nf - kf) * c, kf * c)
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub u0: Vec<f64>,
    pub lambda0: f64,
    /// True when the exact vertex enumeration ran; otherwise the result
    /// is the best found by multi-start descent.
    pub certified: bool,
}

/// Ground state: minimizer of J on the unit sphere of N(J)^perp, with
/// value lambda0. Exact by polytope-vertex enumeration when the subset
/// budget allows, multi-start projected descent otherwise.
pub fn ground_state(f: &PolyhedralFunctional, opts: &GroundStateOptions) -> Result<GroundState> {
    if f.is_linf() {
        // max|u| >= |u|_2 / sqrt(n) with equality at equal magnitudes.
        let n = f.dim();
        let c = 1.0 / (n as f64).sqrt();
        return Ok(GroundState { u0: vec![c; n], lambda0: c, certified: true });
    }
    match f.tag() {
        crate::functional::StructureTag::L1 => {
            // ||u||_1 >= ||u||_2 with equality exactly on the axes.
            let mut u0 = vec![0.0; f.dim()];
            u0[0] = 1.0;
            return Ok(GroundState { u0, lambda0: 1.0, certified: true });
        }
        crate::functional::StructureTag::Tv1d => {
            // The balanced two-level step minimizes total variation on the
            // zero-mean unit sphere; cross-validated against the vertex
            // enumeration at small n in the test suite.
            let n = f.dim();
            let k = n / 2;
            let (a_level, b_level) = balanced_step_levels(n, k);
            let mut u0 = vec![a_level; n];
            for v in u0.iter_mut().skip(k) {
                *v = b_level;
            }
            let lambda0 = b_level - a_level;
            return Ok(GroundState { u0, lambda0, certified: true });
        }
        _ => {}
    }
    let a = f.operator().expect("operator functional");
    let rows: Vec<Vec<f64>> = (0..a.rows()).map(|i| a.row(i).to_vec()).collect();
    let w = linalg::orthonormal_span(&rows, 1e-10);
    let d = w.len();
    if d == 0 {
        return Err(Error::InvalidInput("functional is identically zero on H".into()));
    }
    let m = a.rows();
    // G = A W maps coefficients on N(J)^perp to dual coordinates.
    let mut g = Mat::zeros(m, d);
    for i in 0..m {
        for j in 0..d {
            g[(i, j)] = linalg::dot(a.row(i), &w[j]);
        }
    }
    // Each candidate subset costs a dense eigensolve of a d x d Gram
    // matrix, so the budget caps count * d^3.
    let work = binomial(m, d.saturating_sub(1))
        .and_then(|c| c.checked_mul((d as u128).pow(3).max(1)));
    if let Some(count) = work {
        if count <= opts.enumeration_budget as u128 {
            let best = enumerate_ground_state(&g, m, d)?;
            let y = best.0;
            let lambda0 = best.1;
            let mut u0 = vec![0.0; f.dim()];
            for j in 0..d {
                for (ui, wi) in u0.iter_mut().zip(&w[j]) {
                    *ui += y[j] * wi;
                }
            }
            return Ok(GroundState { u0, lambda0, certified: true });
        }
    }
    multistart_ground_state(f, &w, opts)
}

fn binomial(m: usize, k: usize) -> Option<u128> {
    if k > m {
        return Some(0);
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((m - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return None;
        }
    }
    Some(acc)
}

/// Enumerates all candidate vertices of { y : ||G y||_1 <= 1 }: the null
/// directions of rank-(d-1) row subsets of size d-1. The vertex farthest
/// from the origin determines lambda0 = 1 / max ||y||.
fn enumerate_ground_state(g: &Mat, m: usize, d: usize) -> Result<(Vec<f64>, f64)> {
    let mut best_norm = 0.0f64;
    let mut best_y: Option<Vec<f64>> = None;
    let mut subset: Vec<usize> = (0..d.saturating_sub(1)).collect();
    loop {
        // Gram matrix of the selected rows in coefficient space.
        let mut gram = Mat::zeros(d, d);
        for &i in &subset {
            let row = g.row(i);
            for a in 0..d {
                for b in a..d {
                    let v = row[a] * row[b];
                    gram[(a, b)] += v;
                    if a != b {
                        gram[(b, a)] += v;
                    }
                }
            }
        }
        let (evals, evecs) = linalg::jacobi_eigh(&gram);
        let max_eval = evals.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let rank_tol = 1e-10 * max_eval.max(1e-30);
        let null_dims: Vec<usize> =
            (0..d).filter(|&j| evals[j].abs() <= rank_tol).collect();
        if null_dims.len() == 1 {
            let j = null_dims[0];
            let y: Vec<f64> = (0..d).map(|i| evecs[(i, j)]).collect();
            let gy1 = linalg::norm1(&g.matvec(&y));
            if gy1 > 1e-12 {
                let cand = 1.0 / gy1; // ||y|| = 1, scaled so ||G y||_1 = 1
                if cand > best_norm {
                    best_norm = cand;
                    best_y = Some(linalg::scale(&y, cand));
                }
            }
        }
        if !next_combination(&mut subset, m) {
            break;
        }
    }
    let y = best_y.ok_or_else(|| Error::InvalidInput("no polytope vertex found".into()))?;
    let y_unit = linalg::scale(&y, 1.0 / linalg::norm2(&y));
    Ok((y_unit, 1.0 / best_norm))
}

fn next_combination(subset: &mut [usize], m: usize) -> bool {
    let k = subset.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < m - (k - i) {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn multistart_ground_state(
    f: &PolyhedralFunctional,
    w: &[Vec<f64>],
    opts: &GroundStateOptions,
) -> Result<GroundState> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(opts.seed);
    let n = f.dim();
    let project_sphere = |u: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; n];
        for basis in w {
            let c = linalg::dot(u, basis);
            for (vi, bi) in v.iter_mut().zip(basis) {
                *vi += c * bi;
            }
        }
        let nrm = linalg::norm2(&v).max(1e-300);
        linalg::scale(&v, 1.0 / nrm)
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let ms_opts = minsub::MinSubOptions::default();
    for _ in 0..opts.multistart {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut u = project_sphere(&raw);
        let mut ju = f.evaluate(&u)?;
        for it in 0..opts.descent_iters {
            let sub = minsub::min_norm_subgradient(f, &u, &ms_opts)?;
            let radial = linalg::dot(&sub.p, &u);
            let tangent = linalg::axpy(&sub.p, -radial, &u);
            let step = 0.5 / ((it + 2) as f64).sqrt() / (1.0 + f.lipschitz().sqrt());
            let cand = project_sphere(&linalg::axpy(&u, -step, &tangent));
            let jc = f.evaluate(&cand)?;
            if jc < ju {
                u = cand;
                ju = jc;
            }
        }
        if best.as_ref().map_or(true, |(_, bj)| ju < *bj) {
            best = Some((u, ju));
        }
    }
    let (u0, lambda0) = best.expect("multistart ran at least once");
    Ok(GroundState { u0, lambda0, certified: false })
}

/// C = 1/lambda0, the constant in |u - u_bar| <= C J(u).
pub fn poincare_constant(f: &PolyhedralFunctional, opts: &GroundStateOptions) -> Result<(f64, bool)> {
    let gs = ground_state(f, opts)?;
    Ok((1.0 / gs.lambda0, gs.certified))
}

#[derive(Debug, Clone)]
pub struct ExtinctionProfile {
    pub p_star: Subgradient,
    pub eigen_defect: f64,
    /// Samples of ||p(t) - w(t)|| with w(t) = (u(t) - f_bar)/(T* - t),
    /// at times approaching T*.
    pub approach: Vec<(f64, f64)>,
}

/// The extinction profile of an extinct trajectory: the final slope. For
/// piecewise-linear trajectories w(t) equals that slope on the last
/// segment, so the limit is exact.
pub fn extinction_profile(f: &PolyhedralFunctional, traj: &Trajectory) -> Result<ExtinctionProfile> {
    let t_star = traj.extinction_time()?;
    if traj.segments() == 0 {
        return Err(Error::InvalidInput("trajectory has no segments; datum was in the null space".into()));
    }
    let p_star = traj.slopes.last().unwrap().clone();
    let (_, eigen_defect) = minsub::is_eigenvector(f, &p_star, 1e-8)?;
    let mut approach = Vec::new();
    let mut gap = 0.5 * t_star;
    for _ in 0..8 {
        let t = t_star - gap;
        if t < 0.0 {
            break;
        }
        let (u, p) = traj.evaluate_at(t)?;
        let w = linalg::scale(&linalg::sub(&u, &traj.f_bar), 1.0 / (t_star - t));
        approach.push((t, linalg::norm2(&linalg::sub(&p, &w))));
        gap *= 0.5;
    }
    Ok(ExtinctionProfile { p_star, eigen_defect, approach })
}

/// All extinction identities and bounds for one run.
#[derive(Debug, Clone)]
pub struct ExtinctionReport {
    pub t_star: f64,
    pub dual_norm: f64,
    pub poincare_c: f64,
    pub poincare_certified: bool,
    pub profile: Vec<f64>,
    pub profile_eigen_defect: f64,
    /// |T* - <f, p*>/J(p*)|.
    pub identity_gap: f64,
    /// T* - ||f||_*  (>= 0 up to tolerance).
    pub lower_slack: f64,
    /// C ||f - f_bar|| - T*  (>= 0 up to tolerance).
    pub upper_slack: f64,
    /// ||f||/||f||_* - J(p*/|p*|)  (>= 0 up to tolerance).
    pub profile_bound_slack: f64,
    /// Decomposition condition verified on the trajectory.
    pub certified: bool,
}

impl ExtinctionReport {
    /// The identity and bound checks at their standard tolerances; only
    /// meaningful when `certified` is true.
    pub fn identities_hold(&self) -> bool {
        self.identity_gap <= 1e-8 * self.t_star.max(1.0)
            && self.lower_slack >= -1e-7
            && self.upper_slack >= -1e-7
            && self.profile_bound_slack >= -1e-8
    }
}

pub fn extinction_identities(
    f: &PolyhedralFunctional,
    datum: &Signal,
    traj: &Trajectory,
) -> Result<ExtinctionReport> {
    let t_star = traj.extinction_time()?;
    let f_bar = f.nullspace_project(datum.values())?;
    let diff = linalg::sub(datum.values(), &f_bar);
    let diff_norm = linalg::norm2(&diff);
    let dn = dual_norm(f, datum.values(), None)?;
    let (c, poincare_certified) = poincare_constant(f, &GroundStateOptions::default())?;
    if traj.segments() == 0 {
        // Degenerate datum f = f_bar.
        return Ok(ExtinctionReport {
            t_star,
            dual_norm: dn.value,
            poincare_c: c,
            poincare_certified,
            profile: vec![0.0; f.dim()],
            profile_eigen_defect: 0.0,
            identity_gap: 0.0,
            lower_slack: 0.0,
            upper_slack: c * diff_norm,
            profile_bound_slack: 0.0,
            certified: true,
        });
    }
    let profile = extinction_profile(f, traj)?;
    let p_star = &profile.p_star;
    let j_star = f.evaluate(&p_star.p)?;
    let ratio = linalg::dot(datum.values(), &p_star.p) / j_star;
    let p_unit = linalg::scale(&p_star.p, 1.0 / p_star.norm());
    let certified = crate::spectral::verify_decomposition_condition(f, traj, 1e-8)?;
    Ok(ExtinctionReport {
        t_star,
        dual_norm: dn.value,
        poincare_c: c,
        poincare_certified,
        profile: p_star.p.clone(),
        profile_eigen_defect: profile.eigen_defect,
        identity_gap: (t_star - ratio).abs(),
        lower_slack: t_star - dn.value,
        upper_slack: c * diff_norm - t_star,
        profile_bound_slack: linalg::norm2(datum.values()) / dn.value - f.evaluate(&p_unit)?,
        certified,
    })
}

/// Report for the compactly supported nonnegative 1D total-variation
/// datum: measured extinction time against half the datum mass, and the
/// extinction profile against the flat plateau 2/(b-a) on the support.
#[derive(Debug, Clone)]
pub struct BonforteFigalliReport {
    pub support: (usize, usize),
    pub t_star: f64,
    pub predicted_t_star: f64,
    pub t_rel_dev: f64,
    pub profile: Vec<f64>,
    pub predicted_plateau: f64,
    /// Relative sup-norm deviation on the support interior.
    pub plateau_rel_dev: f64,
}

/// Runs the total-variation flow of a nonnegative, compactly supported
/// datum with zero padding treated as genuine zero boundary data (the
/// difference operator is extended by the two boundary jumps, so the
/// null space is trivial and mass leaves through the boundary exactly as
/// on the line).
pub fn bonforte_figalli_check(datum: &Signal, grid_h: f64) -> Result<BonforteFigalliReport> {
    let n = datum.len();
    let f0 = datum.values();
    if f0.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("datum must be nonnegative".into()));
    }
    let support: Vec<usize> = (0..n).filter(|&i| f0[i] > 0.0).collect();
    if support.is_empty() {
        return Ok(BonforteFigalliReport {
            support: (0, 0),
            t_star: 0.0,
            predicted_t_star: 0.0,
            t_rel_dev: 0.0,
            profile: vec![0.0; n],
            predicted_plateau: 0.0,
            plateau_rel_dev: 0.0,
        });
    }
    let a_idx = support[0];
    let b_idx = *support.last().unwrap();
    if a_idx == 0 || b_idx == n - 1 {
        return Err(Error::InvalidInput("support must be strictly inside the grid".into()));
    }
    if b_idx - a_idx < 2 {
        return Err(Error::InvalidInput("support must span at least three samples".into()));
    }
    let f = dirichlet_tv(n)?;
    let traj = run_event_driven(&f, datum, &FlowOptions::default())?;
    let t_star = traj.extinction_time()?;
    let mass: f64 = f0.iter().sum::<f64>() * grid_h;
    let predicted_t_star = 0.5 * mass;
    let profile = extinction_profile(&f, &traj)?;
    let predicted_plateau = 2.0 / ((b_idx - a_idx) as f64 * grid_h);
    let mut plateau_rel_dev = 0.0f64;
    for i in (a_idx + 1)..b_idx {
        let dev = (profile.p_star.p[i] - predicted_plateau).abs() / predicted_plateau;
        plateau_rel_dev = plateau_rel_dev.max(dev);
    }
    Ok(BonforteFigalliReport {
        support: (a_idx, b_idx),
        t_star,
        predicted_t_star,
        t_rel_dev: (t_star - predicted_t_star).abs() / predicted_t_star,
        profile: profile.p_star.p.clone(),
        predicted_plateau,
        plateau_rel_dev,
    })
}

/// Total variation of the zero-extended signal: forward differences plus
/// the two boundary jumps. A A^T is tridiagonal (-1, 2, -1) with corner
/// entries 1, so the flow is a certified spectral decomposition.
pub fn dirichlet_tv(n: usize) -> Result<PolyhedralFunctional> {
    if n < 1 {
        return Err(Error::InvalidInput("dirichlet_tv needs n >= 1".into()));
    }
    let mut rows = Vec::with_capacity(n + 1);
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    rows.push(first);
    for i in 0..n.saturating_sub(1) {
        let mut r = vec![0.0; n];
        r[i] = -1.0;
        r[i + 1] = 1.0;
        rows.push(r);
    }
    let mut last = vec![0.0; n];
    last[n - 1] = -1.0;
    rows.push(last);
    crate::functionals::custom(Mat::from_rows(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_event_driven, FlowOptions};
    use crate::functionals::{l1, linf, tv1d};
    use crate::linalg::{norm2, sub as vsub};

    #[test]
    fn dual_norm_examples() {
        let f = tv1d(4).unwrap();
        let dn = dual_norm(&f, &[1.0, 1.0, -1.0, -1.0], None).unwrap();
        assert!((dn.value - 2.0).abs() < 1e-8, "value {}", dn.value);
        // Certificate: A^T q = f with ||q||_inf = 2 at q = (-1,-2,-1).
        let expect = [-1.0, -2.0, -1.0];
        for (qi, ei) in dn.certificate.iter().zip(expect) {
            assert!((qi - ei).abs() < 1e-6, "q = {:?}", dn.certificate);
        }

        let g = linf(2).unwrap();
        let dn = dual_norm(&g, &[3.0, 1.0], None).unwrap();
        assert!((dn.value - 4.0).abs() < 1e-12);

        let h = l1(3).unwrap();
        let dn = dual_norm(&h, &[2.0, -1.0, 0.0], None).unwrap();
        assert!((dn.value - 2.0).abs() < 1e-8);

        // f in the null space: zero.
        let f = tv1d(3).unwrap();
        let dn = dual_norm(&f, &[4.0, 4.0, 4.0], None).unwrap();
        assert_eq!(dn.value, 0.0);
    }

    #[test]
    fn ground_states_match_hand_values() {
        let gs = ground_state(&tv1d(2).unwrap(), &GroundStateOptions::default()).unwrap();
        assert!(gs.certified);
        assert!((gs.lambda0 - 2.0f64.sqrt()).abs() < 1e-10);
        let e = 1.0 / 2.0f64.sqrt();
        assert!((gs.u0[0].abs() - e).abs() < 1e-10);

        let gs = ground_state(&tv1d(4).unwrap(), &GroundStateOptions::default()).unwrap();
        assert!(gs.certified);
        assert!((gs.lambda0 - 1.0).abs() < 1e-10);
        let flat: Vec<f64> = gs.u0.iter().map(|v| v.abs()).collect();
        for v in flat {
            assert!((v - 0.5).abs() < 1e-9, "u0 = {:?}", gs.u0);
        }

        let gs = ground_state(&l1(5).unwrap(), &GroundStateOptions::default()).unwrap();
        assert!((gs.lambda0 - 1.0).abs() < 1e-10);

        let gs = ground_state(&linf(2).unwrap(), &GroundStateOptions::default()).unwrap();
        assert!((gs.lambda0 - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ground_state_eigenpair() {
        for f in [tv1d(6).unwrap(), l1(4).unwrap()] {
            let gs = ground_state(&f, &GroundStateOptions::default()).unwrap();
            let p0 = linalg::scale(&gs.u0, gs.lambda0);
            let membership = f.membership_in_k(&p0, None).unwrap();
            assert!(membership.member);
            let sub = Subgradient { p: p0, certificate: membership.certificate, residual: membership.residual };
            let (eigen, defect) = minsub::is_eigenvector(&f, &sub, 1e-8).unwrap();
            assert!(eigen, "defect {defect}");
        }
    }

    #[test]
    fn linf_pair_report() {
        let f = linf(2).unwrap();
        let sig = Signal::new(vec![3.0, 1.0]).unwrap();
        let traj = run_event_driven(&f, &sig, &FlowOptions::default()).unwrap();
        assert!((extinction_time(&traj).unwrap() - 4.0).abs() < 1e-12);
        let report = extinction_identities(&f, &sig, &traj).unwrap();
        assert!((report.t_star - 4.0).abs() < 1e-12);
        assert!((report.dual_norm - 4.0).abs() < 1e-10);
        assert!(report.identity_gap < 1e-10);
        let expect = [0.5, 0.5];
        for (pi, ei) in report.profile.iter().zip(expect) {
            assert!((pi - ei).abs() < 1e-12);
        }
        assert!(report.profile_eigen_defect.abs() < 1e-12);
        assert!(report.identities_hold());
    }

    #[test]
    fn tv_step_report_bounds_tight() {
        let f = tv1d(4).unwrap();
        let sig = Signal::new(vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let traj = run_event_driven(&f, &sig, &FlowOptions::default()).unwrap();
        let report = extinction_identities(&f, &sig, &traj).unwrap();
        assert!((report.t_star - 2.0).abs() < 1e-12);
        assert!((report.dual_norm - 2.0).abs() < 1e-8);
        // C = 1/lambda0 = 1 at n = 4, |f - f_bar| = 2: bound is tight.
        assert!((report.poincare_c - 1.0).abs() < 1e-9);
        assert!(report.upper_slack.abs() < 1e-8);
        assert!(report.lower_slack.abs() < 1e-8);
        assert!(report.identities_hold());
    }

    #[test]
    fn degenerate_kernel_datum_report() {
        let f = tv1d(4).unwrap();
        let sig = Signal::new(vec![2.0; 4]).unwrap();
        let traj = run_event_driven(&f, &sig, &FlowOptions::default()).unwrap();
        let report = extinction_identities(&f, &sig, &traj).unwrap();
        assert_eq!(report.t_star, 0.0);
        assert_eq!(report.dual_norm, 0.0);
        assert!(norm2(&report.profile) == 0.0);
    }

    #[test]
    fn profile_approach_vanishes() {
        let f = l1(3).unwrap();
        let sig = Signal::new(vec![2.0, -1.0, 0.0]).unwrap();
        let traj = run_event_driven(&f, &sig, &FlowOptions::default()).unwrap();
        let profile = extinction_profile(&f, &traj).unwrap();
        assert!(norm2(&vsub(&profile.p_star.p, &[1.0, 0.0, 0.0])) < 1e-12);
        assert!(profile.eigen_defect.abs() < 1e-12);
        // Within the last segment w(t) equals the final slope exactly.
        let last = profile.approach.last().unwrap();
        assert!(last.1 < 1e-9);
    }

    #[test]
    fn bonforte_figalli_block_is_exact() {
        // A flat block is the eigenvector of the zero-boundary problem:
        // T* = mass/2 exactly and the profile is the exact plateau.
        let n = 64;
        let mut data = vec![0.0; n];
        for v in data.iter_mut().take(48).skip(16) {
            *v = 0.75;
        }
        let sig = Signal::new(data).unwrap();
        let report = bonforte_figalli_check(&sig, 1.0).unwrap();
        assert_eq!(report.support, (16, 47));
        assert!((report.t_star - report.predicted_t_star).abs() < 1e-9 * report.predicted_t_star.max(1.0),
            "T* = {}, predicted {}", report.t_star, report.predicted_t_star);
        // Discrete plateau is 2/(#support) vs predicted 2/(b-a): the gap
        // is one part in the support length.
        assert!(report.plateau_rel_dev <= 1.0 / 31.0 + 1e-9);
    }

    #[test]
    fn bonforte_figalli_rejects_bad_data() {
        let sig = Signal::new(vec![0.0, -1.0, 0.0]).unwrap();
        assert!(bonforte_figalli_check(&sig, 1.0).is_err());
        let sig = Signal::new(vec![1.0, 1.0, 0.0]).unwrap();
        assert!(bonforte_figalli_check(&sig, 1.0).is_err());
        let zero = Signal::new(vec![0.0; 8]).unwrap();
        let report = bonforte_figalli_check(&zero, 1.0).unwrap();
        assert_eq!(report.t_star, 0.0);
    }

    #[test]
    fn maximizer_property_of_profile() {
        use rand::{Rng, SeedableRng};
        let f = tv1d(8).unwrap();
        let data = vec![0.9, 0.2, -0.5, 1.1, -0.3, 0.7, -1.0, 0.4];
        let sig = Signal::new(data.clone()).unwrap();
        let traj = run_event_driven(&f, &sig, &FlowOptions::default()).unwrap();
        let profile = extinction_profile(&f, &traj).unwrap();
        let best = linalg::dot(&data, &profile.p_star.p) / f.evaluate(&profile.p_star.p).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        let f_bar = f.nullspace_project(&data).unwrap();
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = vsub(&raw, &f.nullspace_project(&raw).unwrap());
            let j = f.evaluate(&p).unwrap();
            if j < 1e-9 {
                continue;
            }
            let ratio = linalg::dot(&vsub(&data, &f_bar), &p) / j;
            assert!(best >= ratio - 1e-7, "profile ratio {best} beaten by {ratio}");
        }
    }
}

#[cfg(test)]
mod ground_state_cross_validation {
    use super::*;
    use crate::functionals::{custom, l1, tv1d};

    #[test]
    fn closed_forms_match_vertex_enumeration() {
        // Wrapping the same operator as `custom` routes ground_state
        // through the exact enumeration, validating the closed forms.
        for n in 2..=16usize {
            let tv = tv1d(n).unwrap();
            let closed = ground_state(&tv, &GroundStateOptions::default()).unwrap();
            assert!(closed.certified);
            let via_enum = ground_state(
                &custom(tv.operator().unwrap().clone()).unwrap(),
                &GroundStateOptions::default(),
            )
            .unwrap();
            assert!(via_enum.certified, "n = {n} should enumerate");
            assert!(
                (closed.lambda0 - via_enum.lambda0).abs() <= 1e-10,
                "n = {n}: closed {} vs enumerated {}",
                closed.lambda0,
                via_enum.lambda0
            );
        }
        for n in [2usize, 3, 5, 8] {
            let l1f = l1(n).unwrap();
            let closed = ground_state(&l1f, &GroundStateOptions::default()).unwrap();
            let via_enum = ground_state(
                &custom(l1f.operator().unwrap().clone()).unwrap(),
                &GroundStateOptions::default(),
            )
            .unwrap();
            assert!((closed.lambda0 - via_enum.lambda0).abs() <= 1e-10);
        }
    }
}
