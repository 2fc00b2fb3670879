//! The spectral measure of a trajectory: push the vector measure p(t)dt
//! forward through lambda(t) = ||p(t)||. With piecewise-constant slopes
//! the measure is atomic, one atom per distinct slope norm, and the
//! atoms reconstruct f - f_bar. Filtering keeps atoms inside a band.

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::functional::PolyhedralFunctional;
use crate::linalg;
use crate::minsub;
use crate::signal::Signal;
use crate::tol;

#[derive(Debug, Clone)]
pub struct SpectralAtom {
    /// Frequency lambda = ||p|| of the merged segments.
    pub lambda: f64,
    /// Mass vector: sum of (t_{k+1} - t_k) p_k over the merged segments.
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    /// Atoms with strictly decreasing lambda.
    pub atoms: Vec<SpectralAtom>,
    pub f_bar: Vec<f64>,
    pub source: Option<String>,
}

impl SpectralMeasure {
    pub fn total_mass_norm(&self) -> f64 {
        self.atoms.iter().map(|a| linalg::norm2(&a.mass)).sum()
    }
}

/// Builds the atomic spectral measure of an extinct trajectory. Segments
/// whose slope norms agree within a relative 1e-12 merge into one atom.
pub fn spectral_measure(traj: &Trajectory) -> Result<SpectralMeasure> {
    if !traj.extinct {
        return Err(Error::NotExtinct);
    }
    let mut atoms: Vec<SpectralAtom> = Vec::new();
    for (k, sub) in traj.slopes.iter().enumerate() {
        let lambda = sub.norm();
        if lambda == 0.0 {
            continue;
        }
        let dt = traj.breakpoints[k + 1] - traj.breakpoints[k];
        let mass = linalg::scale(&sub.p, dt);
        match atoms.last_mut() {
            Some(last) if (last.lambda - lambda).abs() <= tol::ATOM_MERGE_REL * last.lambda.max(lambda) => {
                for (mi, ai) in last.mass.iter_mut().zip(&mass) {
                    *mi += ai;
                }
            }
            _ => atoms.push(SpectralAtom { lambda, mass }),
        }
    }
    Ok(SpectralMeasure { atoms, f_bar: traj.f_bar.clone(), source: traj.label.clone() })
}

/// f_bar plus the sum of all atom masses; equals the original datum.
pub fn reconstruct(measure: &SpectralMeasure) -> Signal {
    let mut out = measure.f_bar.clone();
    for atom in &measure.atoms {
        for (oi, mi) in out.iter_mut().zip(&atom.mass) {
            *oi += mi;
        }
    }
    Signal::new(out).expect("reconstruction of finite atoms is finite")
}

/// Sum of the atoms with lambda in [lo, hi] (closed on both ends so
/// boundary atoms are kept). The null-space component is included
/// exactly when the band reaches down to frequency zero (lo <= 0).
pub fn band_filter(measure: &SpectralMeasure, lo: f64, hi: f64) -> Signal {
    let n = measure.f_bar.len();
    let mut out = if lo <= 0.0 { measure.f_bar.clone() } else { vec![0.0; n] };
    for atom in &measure.atoms {
        if atom.lambda >= lo && atom.lambda <= hi {
            for (oi, mi) in out.iter_mut().zip(&atom.mass) {
                *oi += mi;
            }
        }
    }
    Signal::new(out).expect("finite")
}

/// The full table of <p_t, p_s - p_r> over segment triples r <= s <= t,
/// plus the maximum absolute violation. Zero exactly when the flow emits
/// eigenvectors.
#[derive(Debug, Clone)]
pub struct OrthogonalityReport {
    pub max_violation: f64,
    /// (r, s, t, value) rows.
    pub table: Vec<(usize, usize, usize, f64)>,
}

pub fn orthogonality_report(traj: &Trajectory) -> OrthogonalityReport {
    let k = traj.slopes.len();
    let mut table = Vec::new();
    let mut max_violation = 0.0f64;
    for t in 0..k {
        for s in 0..=t {
            for r in 0..=s {
                let diff = linalg::sub(&traj.slopes[s].p, &traj.slopes[r].p);
                let v = linalg::dot(&traj.slopes[t].p, &diff);
                max_violation = max_violation.max(v.abs());
                table.push((r, s, t, v));
            }
        }
    }
    OrthogonalityReport { max_violation, table }
}

/// Checks the subgradient hierarchy p_k in dJ(p_l) for all k <= l:
/// <p_k, p_l> = J(p_l) and p_k in K.
pub fn hierarchy_check(f: &PolyhedralFunctional, traj: &Trajectory, tol: f64) -> Result<(bool, f64)> {
    let mut worst = 0.0f64;
    for l in 0..traj.slopes.len() {
        let j_l = f.evaluate(&traj.slopes[l].p)?;
        for k in 0..=l {
            let gap = (linalg::dot(&traj.slopes[k].p, &traj.slopes[l].p) - j_l).abs();
            let rel = gap / (1.0 + j_l);
            worst = worst.max(rel);
        }
    }
    // Membership of every slope comes with its stored certificate.
    for sub in &traj.slopes {
        sub.validate(f)?;
    }
    Ok((worst <= tol, worst))
}

/// Certifies that the trajectory is a spectral decomposition: the
/// pairwise hierarchy holds and the atoms reconstruct the datum.
pub fn verify_decomposition_condition(f: &PolyhedralFunctional, traj: &Trajectory, tol: f64) -> Result<bool> {
    let (hier, _) = hierarchy_check(f, traj, tol)?;
    if !hier {
        return Ok(false);
    }
    let measure = spectral_measure(traj)?;
    let rec = reconstruct(&measure);
    let f0 = traj.initial();
    let dev = linalg::norm2(&linalg::sub(rec.values(), f0));
    Ok(dev <= 1e-9 * (1.0 + linalg::norm2(f0)))
}

/// A datum synthesized from eigenpairs, with its predicted breakpoints.
#[derive(Debug, Clone)]
pub struct Sub0Datum {
    pub datum: Signal,
    /// Sorted predicted breakpoint times gamma_i / lambda_i.
    pub schedule: Vec<f64>,
}

/// Builds f = sum gamma_i u_i from eigenpairs (u_i, lambda_i, gamma_i)
/// after verifying the synthesis preconditions: each p_i = lambda_i u_i
/// is a certified eigenvector, the p_i are pairwise orthogonal, and
/// every suffix sum (ordered by the predicted breakpoints) stays in K.
/// The flow of the result then follows the predicted schedule exactly.
pub fn synthesize_sub0_datum(
    f: &PolyhedralFunctional,
    components: &[(Signal, f64, f64)],
) -> Result<Sub0Datum> {
    if components.is_empty() {
        return Err(Error::InvalidInput("need at least one eigenpair".into()));
    }
    let n = f.dim();
    let mut ps: Vec<Vec<f64>> = Vec::with_capacity(components.len());
    for (i, (u, lambda, gamma)) in components.iter().enumerate() {
        f.check_dim(u.values(), "synthesize_sub0_datum")?;
        if *lambda <= 0.0 || *gamma <= 0.0 || lambda.is_nan() || gamma.is_nan() {
            return Err(Error::InvalidInput(format!("component {i}: lambda and gamma must be positive")));
        }
        let p = linalg::scale(u.values(), *lambda);
        let membership = f.membership_in_k(&p, None)?;
        if !membership.member {
            return Err(Error::NotAnEigenvector { index: i, defect: membership.residual });
        }
        let sub = crate::functional::Subgradient {
            p: p.clone(),
            certificate: membership.certificate,
            residual: membership.residual,
        };
        let (eigen, defect) = minsub::is_eigenvector(f, &sub, 1e-8)?;
        if !eigen {
            return Err(Error::NotAnEigenvector { index: i, defect });
        }
        ps.push(p);
    }
    for i in 0..ps.len() {
        for j in (i + 1)..ps.len() {
            let inner = linalg::dot(&ps[i], &ps[j]);
            let scale = linalg::norm2(&ps[i]) * linalg::norm2(&ps[j]);
            if inner.abs() > 1e-9 * (1.0 + scale) {
                return Err(Error::NotOrthogonal { i, j, inner });
            }
        }
    }
    // Order components by predicted death time gamma/lambda.
    let mut order: Vec<usize> = (0..components.len()).collect();
    let time = |i: usize| components[i].2 / components[i].1;
    order.sort_by(|&a, &b| time(a).partial_cmp(&time(b)).unwrap());
    for j in 0..order.len() {
        let mut suffix = vec![0.0; n];
        for &i in &order[j..] {
            for (si, pi) in suffix.iter_mut().zip(&ps[i]) {
                *si += pi;
            }
        }
        let membership = f.membership_in_k(&suffix, None)?;
        if !membership.member {
            return Err(Error::SuffixNotInDualBall { j, residual: membership.residual });
        }
    }
    let mut datum = vec![0.0; n];
    for (u, _, gamma) in components {
        for (di, ui) in datum.iter_mut().zip(u.values()) {
            *di += gamma * ui;
        }
    }
    let schedule: Vec<f64> = order.iter().map(|&i| time(i)).collect();
    Ok(Sub0Datum { datum: Signal::new(datum)?, schedule })
}
