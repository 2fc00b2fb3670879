//! Minimal-norm subgradients and the eigenvector tests built on them.
//!
//! For J(u) = ||Au||_1 the subdifferential at u is the face of K with
//! dual coordinates pinned to sign((Au)_i) wherever (Au)_i is nonzero:
//!
//!   dJ(u) = { A^T q : ||q||_inf <= 1, q_i = sign((Au)_i) on the support }.
//!
//! The minimal-norm element solves a box-constrained least-squares
//! problem over the free coordinates. A vector p in K is an eigenvector
//! (eigenvalue 1) exactly when <p, p> = J(p).

use crate::boxqp::{solve_box_lsq, BoxLsqOptions};
use crate::error::{Error, Result};
use crate::functional::{Membership, PolyhedralFunctional, Subgradient};
use crate::linalg::{self};
use crate::tol;

/// Partition of the dual coordinates by the sign of z = Au.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignPattern {
    pub fixed_plus: Vec<usize>,
    pub fixed_minus: Vec<usize>,
    pub free: Vec<usize>,
}

impl SignPattern {
    /// Classify z with the zero threshold `eps`: |z_i| <= eps is free.
    pub fn classify(z: &[f64], eps: f64) -> Self {
        let mut fixed_plus = Vec::new();
        let mut fixed_minus = Vec::new();
        let mut free = Vec::new();
        for (i, &zi) in z.iter().enumerate() {
            if zi > eps {
                fixed_plus.push(i);
            } else if zi < -eps {
                fixed_minus.push(i);
            } else {
                free.push(i);
            }
        }
        SignPattern { fixed_plus, fixed_minus, free }
    }

    pub fn len(&self) -> usize {
        self.fixed_plus.len() + self.fixed_minus.len() + self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_free(&self) -> bool {
        self.fixed_plus.is_empty() && self.fixed_minus.is_empty()
    }

    /// Signs as a dense vector: +1, -1, or 0 for free coordinates.
    pub fn signs(&self) -> Vec<i8> {
        let mut s = vec![0i8; self.len()];
        for &i in &self.fixed_plus {
            s[i] = 1;
        }
        for &i in &self.fixed_minus {
            s[i] = -1;
        }
        s
    }

    /// Box bounds pinning the fixed coordinates at their signs.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.len();
        let mut lo = vec![-1.0; m];
        let mut hi = vec![1.0; m];
        for &i in &self.fixed_plus {
            lo[i] = 1.0;
        }
        for &i in &self.fixed_minus {
            hi[i] = -1.0;
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct MinSubOptions {
    /// Relative zero threshold for classifying dual coordinates.
    pub eps_z_rel: f64,
    pub qp: BoxLsqOptions,
}

impl Default for MinSubOptions {
    fn default() -> Self {
        MinSubOptions { eps_z_rel: tol::EPS_Z_REL, qp: BoxLsqOptions::default() }
    }
}

/// The minimal-norm subgradient of a given sign pattern's face:
/// min ||A^T q||^2 with the pattern's coordinates pinned.
pub(crate) fn solve_for_pattern(
    f: &PolyhedralFunctional,
    pattern: &SignPattern,
    warm: Option<&[f64]>,
    opts: &MinSubOptions,
) -> Result<Subgradient> {
    let a = f.operator().expect("pattern solve needs an operator");
    if pattern.all_free() {
        return Ok(Subgradient::zero(f.dim(), f.dual_dim()));
    }
    let (lo, hi) = pattern.bounds();
    let zeros = vec![0.0; f.dim()];
    let sol = solve_box_lsq(a, &zeros, &lo, &hi, warm, f.lipschitz(), &opts.qp)?;
    if !sol.converged {
        return Err(Error::SolverStall {
            what: "minimal-norm subgradient",
            achieved: sol.pg_norm,
            required: sol.pg_tol,
        });
    }
    Ok(Subgradient { p: sol.p, certificate: sol.q, residual: 0.0 })
}

/// The unique minimal-norm element of dJ(u).
pub fn min_norm_subgradient(f: &PolyhedralFunctional, u: &[f64], opts: &MinSubOptions) -> Result<Subgradient> {
    f.check_dim(u, "min_norm_subgradient")?;
    if f.is_linf() {
        return Ok(linf_min_norm(u, opts.eps_z_rel));
    }
    let z = f.apply_operator(u)?;
    let eps = opts.eps_z_rel * (1.0 + linalg::norm_inf(&z));
    let pattern = SignPattern::classify(&z, eps);
    solve_for_pattern(f, &pattern, None, opts)
}

/// Closed form for the max-norm functional: sign(u)/|argmax| on the set
/// of entries within a tie tolerance of max |u_i|, zero elsewhere.
pub(crate) fn linf_min_norm(u: &[f64], eps_rel: f64) -> Subgradient {
    let maxabs = linalg::norm_inf(u);
    let tie = eps_rel * (1.0 + maxabs);
    if maxabs <= tie {
        return Subgradient::zero(u.len(), u.len());
    }
    let members: Vec<usize> = (0..u.len()).filter(|&i| u[i].abs() >= maxabs - tie).collect();
    let share = 1.0 / members.len() as f64;
    let mut p = vec![0.0; u.len()];
    for &i in &members {
        p[i] = u[i].signum() * share;
    }
    Subgradient { certificate: p.clone(), p, residual: 0.0 }
}

/// Eigenvector test for a certified p in K: the defect J(p) - ||p||^2 is
/// nonnegative up to rounding, and vanishes exactly on eigenvectors.
pub fn is_eigenvector(f: &PolyhedralFunctional, sub: &Subgradient, tol: f64) -> Result<(bool, f64)> {
    sub.validate(f)?;
    let j = f.evaluate(&sub.p)?;
    let nsq = linalg::dot(&sub.p, &sub.p);
    let defect = j - nsq;
    Ok((defect.abs() <= tol * nsq.max(1.0), defect))
}

/// Tests the flatness condition <p, p - q> = 0 for all q in dJ(u), where
/// p is the minimal-norm subgradient at u. Over the face, <p, q> ranges
/// over [fixed - sum_free |(Ap)_i|, fixed + sum_free |(Ap)_i|] with
/// fixed = sum of s_i (Ap)_i; the worst violation is the larger distance
/// of the two endpoints from ||p||^2.
pub fn check_minsub(f: &PolyhedralFunctional, u: &[f64], sub: &Subgradient, tol: f64) -> Result<(bool, f64)> {
    f.check_dim(u, "check_minsub")?;
    if f.is_linf() {
        // Every face element q has sign(u) support inside the argmax set
        // and ||q||_1 = 1, so <p, q> = 1/|argmax| = ||p||^2 identically.
        return Ok((true, 0.0));
    }
    let z = f.apply_operator(u)?;
    let eps = tol::EPS_Z_REL * (1.0 + linalg::norm_inf(&z));
    let pattern = SignPattern::classify(&z, eps);
    let w = f.apply_operator(&sub.p)?;
    let mut fixed = 0.0;
    for &i in &pattern.fixed_plus {
        fixed += w[i];
    }
    for &i in &pattern.fixed_minus {
        fixed -= w[i];
    }
    let mut spread = 0.0;
    for &i in &pattern.free {
        spread += w[i].abs();
    }
    let nsq = linalg::dot(&sub.p, &sub.p);
    let worst = ((fixed - spread) - nsq).abs().max(((fixed + spread) - nsq).abs());
    Ok((worst <= tol, worst))
}

/// A candidate eigenpair (u, lambda) with its certification status.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// True iff lambda*u passed the dual-ball membership test, which
    /// together with <lambda u, u> = J(u) certifies lambda u in dJ(u).
    pub certified: bool,
    pub membership: Membership,
}

/// lambda = J(u) / ||u||^2; the pair is certified when lambda*u lies in K.
pub fn eigenvalue_of(f: &PolyhedralFunctional, u: &[f64]) -> Result<EigenPair> {
    f.check_dim(u, "eigenvalue_of")?;
    let nsq = linalg::dot(u, u);
    if nsq == 0.0 {
        return Err(Error::ZeroVector("eigenvalue_of"));
    }
    let lambda = f.evaluate(u)? / nsq;
    let candidate = linalg::scale(u, lambda);
    let membership = f.membership_in_k(&candidate, None)?;
    Ok(EigenPair { lambda, certified: membership.member, membership })
}
