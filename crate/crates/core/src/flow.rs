//! The gradient flow du/dt = -p(t), p(t) the minimal-norm subgradient of
//! J at u(t), integrated exactly. For polyhedral J the slope is piecewise
//! constant in time, so the trajectory is piecewise linear: each segment
//! solves one box-constrained least-squares problem and the next
//! breakpoint is the first time a dual coordinate of z = Au crosses zero.
//! An implicit-Euler (minimizing movements) integrator serves as an
//! independent oracle.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::functional::{PolyhedralFunctional, Subgradient};
use crate::linalg;
use crate::minsub::{self, MinSubOptions, SignPattern};
use crate::signal::Signal;
use crate::tol;

#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Cap on the number of segments; defaults to 10 * dual_dim + 16.
    pub max_events: Option<usize>,
    /// Relative threshold declaring a slope extinct.
    pub extinction_tol_rel: f64,
    /// Events within this relative window are processed together.
    pub simultaneity_rel: f64,
    /// Cap on sign-pattern fixed-point iterations per breakpoint.
    pub pattern_cap: usize,
    /// Check every segment slope with the eigenvector test.
    pub verify_each_segment: bool,
    pub verify_tol: f64,
    pub minsub: MinSubOptions,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            max_events: None,
            extinction_tol_rel: tol::EXTINCTION_TOL_REL,
            simultaneity_rel: tol::SIMULTANEITY_REL,
            pattern_cap: 64,
            verify_each_segment: false,
            verify_tol: 1e-8,
            minsub: MinSubOptions::default(),
        }
    }
}

/// Why the integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Extinct,
    EventCapReached,
}

/// One integration event, for diagnostics.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub segment: usize,
    pub t_start: f64,
    pub dt: f64,
    /// Dual coordinates that hit zero at the end of the segment.
    pub crossed: Vec<usize>,
    pub pattern_iterations: usize,
    pub fallback: bool,
}

/// The exact piecewise-linear trajectory. On [t_k, t_{k+1}) the state is
/// u(t) = u_k - (t - t_k) p_k; if extinct, u stays at the null-space
/// component f_bar with zero slope after the last breakpoint.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub breakpoints: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub slopes: Vec<Subgradient>,
    /// J(u_k) at every breakpoint, recorded during the run.
    pub j_values: Vec<f64>,
    pub extinct: bool,
    pub f_bar: Vec<f64>,
    pub termination: Termination,
    pub events: Vec<EventRecord>,
    /// Eigenvector defects per segment, when verification is on.
    pub segment_defects: Option<Vec<f64>>,
    /// Label of the datum, when it carried one.
    pub label: Option<String>,
}

impl Trajectory {
    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn segments(&self) -> usize {
        self.slopes.len()
    }

    /// Extinction time; error when the run did not extinguish.
    pub fn extinction_time(&self) -> Result<f64> {
        if !self.extinct {
            return Err(Error::NotExtinct);
        }
        Ok(*self.breakpoints.last().unwrap())
    }

    /// (u(t), p(t)) with p right-continuous at breakpoints. Past the
    /// extinction time this returns (f_bar, 0).
    pub fn evaluate_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if t < 0.0 {
            return Err(Error::InvalidInput(format!("negative time {t}")));
        }
        let n = self.f_bar.len();
        let t_end = *self.breakpoints.last().unwrap();
        if t >= t_end {
            if self.extinct {
                return Ok((self.f_bar.clone(), vec![0.0; n]));
            }
            if t == t_end {
                return Ok((self.states.last().unwrap().clone(), vec![0.0; n]));
            }
            return Err(Error::BeyondHorizon { t, horizon: t_end });
        }
        let k = match self.breakpoints.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(exact) => exact,
            Err(ins) => ins - 1,
        };
        let p = &self.slopes[k].p;
        let u = linalg::axpy(&self.states[k], -(t - self.breakpoints[k]), p);
        Ok((u, p.clone()))
    }
}

/// Runs the event-driven flow from `datum` until extinction or the event
/// cap. Every segment slope carries a dual certificate.
pub fn run_event_driven(f: &PolyhedralFunctional, datum: &Signal, opts: &FlowOptions) -> Result<Trajectory> {
    f.check_dim(datum.values(), "run_event_driven")?;
    if f.is_linf() {
        run_linf(f, datum, opts)
    } else {
        run_polyhedral(f, datum, opts)
    }
}

struct Builder {
    breakpoints: Vec<f64>,
    states: Vec<Vec<f64>>,
    slopes: Vec<Subgradient>,
    j_values: Vec<f64>,
    events: Vec<EventRecord>,
    defects: Vec<f64>,
}

impl Builder {
    fn new(u0: Vec<f64>, j0: f64) -> Self {
        Builder {
            breakpoints: vec![0.0],
            states: vec![u0],
            slopes: Vec::new(),
            j_values: vec![j0],
            events: Vec::new(),
            defects: Vec::new(),
        }
    }

    fn push_segment(
        &mut self,
        f: &PolyhedralFunctional,
        sub: Subgradient,
        dt: f64,
        crossed: Vec<usize>,
        pattern_iterations: usize,
        fallback: bool,
        opts: &FlowOptions,
    ) -> Result<Vec<f64>> {
        let t0 = *self.breakpoints.last().unwrap();
        let u0 = self.states.last().unwrap();
        let u1 = linalg::axpy(u0, -dt, &sub.p);
        if opts.verify_each_segment {
            let (_, defect) = minsub::is_eigenvector(f, &sub, opts.verify_tol)?;
            self.defects.push(defect);
        }
        self.events.push(EventRecord {
            segment: self.slopes.len(),
            t_start: t0,
            dt,
            crossed,
            pattern_iterations,
            fallback,
        });
        self.slopes.push(sub);
        self.breakpoints.push(t0 + dt);
        self.j_values.push(f.evaluate(&u1)?);
        self.states.push(u1.clone());
        Ok(u1)
    }

    fn finish(self, extinct: bool, f_bar: Vec<f64>, verify: bool, label: Option<String>) -> Trajectory {
        Trajectory {
            breakpoints: self.breakpoints,
            states: self.states,
            slopes: self.slopes,
            j_values: self.j_values,
            extinct,
            f_bar,
            termination: if extinct { Termination::Extinct } else { Termination::EventCapReached },
            events: self.events,
            segment_defects: if verify { Some(self.defects) } else { None },
            label,
        }
    }
}

fn run_polyhedral(f: &PolyhedralFunctional, datum: &Signal, opts: &FlowOptions) -> Result<Trajectory> {
    let a = f.operator().expect("polyhedral flow needs an operator");
    let m = a.rows();
    let max_events = opts.max_events.unwrap_or(10 * m + 16);
    let f_scale = 1.0 + linalg::norm2(datum.values());
    let f_bar = f.nullspace_project(datum.values())?;

    let mut u = datum.values().to_vec();
    let mut builder = Builder::new(u.clone(), f.evaluate(&u)?);
    let mut warm: Option<Vec<f64>> = None;
    let mut extinct = false;

    while builder.slopes.len() < max_events {
        let z = a.matvec(&u);
        let eps_z = opts.minsub.eps_z_rel * (1.0 + linalg::norm_inf(&z));
        let selection = select_slope(f, &z, eps_z, warm.as_deref(), opts)?;
        match selection {
            Selection::Slope { sub, iterations } => {
                if sub.norm() <= opts.extinction_tol_rel * f_scale {
                    extinct = true;
                    break;
                }
                let w = a.matvec(&sub.p);
                let w_tol = 1e-13 * (1.0 + linalg::norm_inf(&w));
                let mut dt_min = f64::INFINITY;
                for i in 0..m {
                    if z[i].abs() > eps_z && w[i].abs() > w_tol && z[i] * w[i] > 0.0 {
                        let dt = z[i] / w[i];
                        if dt < dt_min {
                            dt_min = dt;
                        }
                    }
                }
                if !dt_min.is_finite() {
                    return Err(Error::InvalidInput(
                        "no forward event for a nonzero slope; operator may be inconsistent".into(),
                    ));
                }
                let window = dt_min * (1.0 + opts.simultaneity_rel);
                let crossed: Vec<usize> = (0..m)
                    .filter(|&i| {
                        z[i].abs() > eps_z && w[i].abs() > w_tol && z[i] * w[i] > 0.0 && z[i] / w[i] <= window
                    })
                    .collect();
                warm = Some(sub.certificate.clone());
                u = builder.push_segment(f, sub, dt_min, crossed, iterations, false, opts)?;
            }
            Selection::Fallback { iterations } => {
                // Pattern fixed point failed to settle: cross the
                // non-smooth instant with tiny implicit-Euler steps. The
                // prox certificate makes each micro-slope a genuine
                // subgradient at the segment's right endpoint.
                let delta = (eps_z / f_scale).max(1e-12);
                for _ in 0..4 {
                    let vp = crate::equivalence::prox_step(f, &u, delta, &mut None)?;
                    let slope = linalg::scale(&linalg::sub(&u, &vp.v), 1.0 / delta);
                    let sub = Subgradient { p: slope, certificate: vp.certificate.clone(), residual: vp.residual };
                    u = builder.push_segment(f, sub, delta, Vec::new(), iterations, true, opts)?;
                    if builder.slopes.len() >= max_events {
                        break;
                    }
                }
                warm = None;
            }
        }
    }
    Ok(builder.finish(extinct, f_bar, opts.verify_each_segment, datum.label().map(str::to_owned)))
}

enum Selection {
    Slope { sub: Subgradient, iterations: usize },
    Fallback { iterations: usize },
}

/// Sign-pattern consistency fixed point. Starting from the pattern of z,
/// solve the face QP, probe the pattern just after the breakpoint, and
/// re-solve until the slope is stable. The probe step eps/(1 + |Ap|_inf)
/// realizes the right-derivative selection at non-smooth instants.
fn select_slope(
    f: &PolyhedralFunctional,
    z: &[f64],
    eps_z: f64,
    warm: Option<&[f64]>,
    opts: &FlowOptions,
) -> Result<Selection> {
    let a = f.operator().unwrap();
    let mut pattern = SignPattern::classify(z, eps_z);
    let mut visited: HashSet<SignPattern> = HashSet::new();
    visited.insert(pattern.clone());
    let mut sub = minsub::solve_for_pattern(f, &pattern, warm, &opts.minsub)?;
    let mut iterations = 1usize;
    loop {
        if iterations >= opts.pattern_cap {
            return Ok(Selection::Fallback { iterations });
        }
        let w = a.matvec(&sub.p);
        let probe = eps_z / (1.0 + linalg::norm_inf(&w));
        let z_probe = linalg::axpy(z, -probe, &w);
        let next = SignPattern::classify(&z_probe, eps_z);
        if next == pattern {
            return Ok(Selection::Slope { sub, iterations });
        }
        let candidate = minsub::solve_for_pattern(f, &next, Some(&sub.certificate), &opts.minsub)?;
        iterations += 1;
        let drift = linalg::norm2(&linalg::sub(&candidate.p, &sub.p));
        if drift <= 1e-11 * (1.0 + sub.norm()) {
            // Same slope on the refined face: fixed point reached.
            return Ok(Selection::Slope { sub: candidate, iterations });
        }
        if visited.contains(&next) {
            return Ok(Selection::Fallback { iterations });
        }
        visited.insert(next.clone());
        pattern = next;
        sub = candidate;
    }
}

fn run_linf(f: &PolyhedralFunctional, datum: &Signal, opts: &FlowOptions) -> Result<Trajectory> {
    let n = f.dim();
    let max_events = opts.max_events.unwrap_or(10 * n + 16);
    let f_bar = vec![0.0; n];
    let f_scale = 1.0 + linalg::norm2(datum.values());

    let mut u = datum.values().to_vec();
    let mut builder = Builder::new(u.clone(), f.evaluate(&u)?);
    let mut extinct = false;

    while builder.slopes.len() < max_events {
        let sub = minsub::linf_min_norm(&u, opts.minsub.eps_z_rel);
        let level = linalg::norm_inf(&u);
        if sub.norm() == 0.0 || level <= opts.extinction_tol_rel * f_scale {
            extinct = true;
            break;
        }
        let tie = opts.minsub.eps_z_rel * (1.0 + level);
        let members: Vec<usize> = (0..n).filter(|&i| u[i].abs() >= level - tie).collect();
        let below: f64 = u
            .iter()
            .enumerate()
            .filter(|(i, _)| !members.contains(i))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        // The active level decays at rate 1/|members| until it meets the
        // next level (or zero).
        let dt = (level - below) * members.len() as f64;
        u = builder.push_segment(f, sub, dt, members, 1, false, opts)?;
    }
    Ok(builder.finish(extinct, f_bar, opts.verify_each_segment, datum.label().map(str::to_owned)))
}

/// A time-sampled trajectory from the minimizing-movements scheme
/// u_{k+1} = argmin 0.5||v - u_k||^2 + dt J(v).
#[derive(Debug, Clone)]
pub struct SampledFlow {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl SampledFlow {
    /// State at the sample closest to t (clamped to the horizon).
    pub fn state_at(&self, t: f64) -> &[f64] {
        let idx = ((t / self.dt).round() as usize).min(self.states.len() - 1);
        &self.states[idx]
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.states.len() - 1) as f64
    }
}

/// Implicit-Euler oracle: samples the flow at multiples of dt up to t_max
/// using the proximal solvers.
pub fn run_implicit_euler(f: &PolyhedralFunctional, datum: &Signal, dt: f64, t_max: f64) -> Result<SampledFlow> {
    f.check_dim(datum.values(), "run_implicit_euler")?;
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let steps = (t_max / dt).ceil() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(datum.values().to_vec());
    let mut warm: Option<Vec<f64>> = None;
    let mut u = datum.values().to_vec();
    for _ in 0..steps {
        let vp = crate::equivalence::prox_step(f, &u, dt, &mut warm)?;
        u = vp.v;
        states.push(u.clone());
    }
    Ok(SampledFlow { dt, states })
}

/// Per-segment energy balance J(u_{k+1}) - J(u_k) = -dt ||p_k||^2.
#[derive(Debug, Clone)]
pub struct DissipationRecord {
    pub segment: usize,
    pub dt: f64,
    pub j_start: f64,
    pub j_end: f64,
    /// Measured drop minus predicted drop, relative to 1 + J(u_k).
    pub residual_rel: f64,
}

#[derive(Debug, Clone)]
pub struct DissipationLedger {
    pub records: Vec<DissipationRecord>,
    pub max_residual_rel: f64,
}

impl DissipationLedger {
    pub fn balanced(&self, tol: f64) -> bool {
        self.max_residual_rel <= tol
    }
}

/// Checks the dissipation identity on every segment and returns the ledger.
pub fn dissipation_report(traj: &Trajectory) -> DissipationLedger {
    let mut records = Vec::with_capacity(traj.slopes.len());
    let mut max_residual = 0.0f64;
    for (k, sub) in traj.slopes.iter().enumerate() {
        let dt = traj.breakpoints[k + 1] - traj.breakpoints[k];
        let j_start = traj.j_values[k];
        let j_end = traj.j_values[k + 1];
        let predicted = -dt * linalg::dot(&sub.p, &sub.p);
        let residual_rel = ((j_end - j_start) - predicted).abs() / (1.0 + j_start);
        max_residual = max_residual.max(residual_rel);
        records.push(DissipationRecord { segment: k, dt, j_start, j_end, residual_rel });
    }
    DissipationLedger { records, max_residual_rel: max_residual }
}

/// Samples J(f - u(t)) on a geometric sequence of small t. When the flow
/// is a certified spectral decomposition this tends to zero as t -> 0.
pub fn short_time_report(
    f: &PolyhedralFunctional,
    traj: &Trajectory,
    levels: usize,
) -> Result<Vec<(f64, f64)>> {
    let t_end = *traj.breakpoints.last().unwrap();
    let f0 = traj.initial().to_vec();
    let mut out = Vec::with_capacity(levels);
    let mut t = t_end * 0.5;
    for _ in 0..levels {
        let (u, _) = traj.evaluate_at(t)?;
        let diff = linalg::sub(&f0, &u);
        out.push((t, f.evaluate(&diff)?));
        t *= 0.5;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{l1, linf, tv1d};
    use crate::linalg::{norm2, sub};

    fn run(fun: &PolyhedralFunctional, data: &[f64]) -> Trajectory {
        let sig = Signal::new(data.to_vec()).unwrap();
        run_event_driven(fun, &sig, &FlowOptions::default()).unwrap()
    }

    #[test]
    fn tv_eigenvector_datum_single_segment() {
        let f = tv1d(4).unwrap();
        let traj = run(&f, &[1.0, 1.0, -1.0, -1.0]);
        assert!(traj.extinct);
        assert_eq!(traj.segments(), 1);
        assert!((traj.extinction_time().unwrap() - 2.0).abs() < 1e-12);
        let expect = [0.5, 0.5, -0.5, -0.5];
        for (pi, ei) in traj.slopes[0].p.iter().zip(expect) {
            assert!((pi - ei).abs() < 1e-9);
        }
        // u(t) = (1 - t/2) f on the segment.
        let (u, _) = traj.evaluate_at(1.0).unwrap();
        for (ui, ei) in u.iter().zip([0.5, 0.5, -0.5, -0.5]) {
            assert!((ui - ei).abs() < 1e-9);
        }
    }

    #[test]
    fn l1_spike_breakpoints_and_slopes() {
        let f = l1(3).unwrap();
        let traj = run(&f, &[2.0, -1.0, 0.0]);
        assert!(traj.extinct);
        assert_eq!(traj.segments(), 2);
        let bp = &traj.breakpoints;
        assert!((bp[0] - 0.0).abs() < 1e-12 && (bp[1] - 1.0).abs() < 1e-10 && (bp[2] - 2.0).abs() < 1e-10);
        for (pi, ei) in traj.slopes[0].p.iter().zip([1.0, -1.0, 0.0]) {
            assert!((pi - ei).abs() < 1e-10);
        }
        for (pi, ei) in traj.slopes[1].p.iter().zip([1.0, 0.0, 0.0]) {
            assert!((pi - ei).abs() < 1e-10);
        }
    }

    #[test]
    fn linf_pair_two_segments() {
        let f = linf(2).unwrap();
        let traj = run(&f, &[3.0, 1.0]);
        assert!(traj.extinct);
        assert_eq!(traj.segments(), 2);
        assert!((traj.breakpoints[1] - 2.0).abs() < 1e-12);
        assert!((traj.breakpoints[2] - 4.0).abs() < 1e-12);
        assert_eq!(traj.slopes[0].p, vec![1.0, 0.0]);
        assert_eq!(traj.slopes[1].p, vec![0.5, 0.5]);
    }

    #[test]
    fn kernel_datum_is_immediately_extinct() {
        let f = tv1d(4).unwrap();
        let traj = run(&f, &[2.0, 2.0, 2.0, 2.0]);
        assert!(traj.extinct);
        assert_eq!(traj.segments(), 0);
        assert_eq!(traj.extinction_time().unwrap(), 0.0);
        let (u, p) = traj.evaluate_at(5.0).unwrap();
        assert!(norm2(&sub(&u, &[2.0; 4])) < 1e-12);
        assert_eq!(p, vec![0.0; 4]);
    }

    #[test]
    fn piecewise_linearity_is_exact() {
        let f = tv1d(6).unwrap();
        let traj = run(&f, &[0.3, -1.2, 2.0, 0.5, -0.7, 1.1]);
        assert!(traj.extinct);
        for k in 0..traj.segments() {
            let dt = traj.breakpoints[k + 1] - traj.breakpoints[k];
            let pred = linalg::axpy(&traj.states[k], -dt, &traj.slopes[k].p);
            // Exact elementwise identity up to one rounding step.
            for (a, b) in pred.iter().zip(&traj.states[k + 1]) {
                assert!((a - b).abs() < 1e-15 * (1.0 + a.abs()));
            }
        }
        // Slope norms non-increasing, J non-increasing.
        for k in 1..traj.segments() {
            assert!(traj.slopes[k].norm() <= traj.slopes[k - 1].norm() + 1e-10);
        }
        for k in 1..traj.j_values.len() {
            assert!(traj.j_values[k] <= traj.j_values[k - 1] + 1e-10);
        }
    }

    #[test]
    fn dissipation_ledger_balances() {
        let f = l1(3).unwrap();
        let traj = run(&f, &[2.0, -1.0, 0.0]);
        let ledger = dissipation_report(&traj);
        assert!(ledger.balanced(1e-8), "max residual {}", ledger.max_residual_rel);
        // First segment: J drops 3 -> 1, predicted -1 * ||(1,-1,0)||^2 = -2.
        assert!((ledger.records[0].j_start - 3.0).abs() < 1e-12);
        assert!((ledger.records[0].j_end - 1.0).abs() < 1e-10);
    }

    #[test]
    fn euler_oracle_tracks_l1_closed_form() {
        let f = l1(3).unwrap();
        let sig = Signal::new(vec![2.0, -1.0, 0.0]).unwrap();
        let flow = run_implicit_euler(&f, &sig, 1e-3, 1.5).unwrap();
        let u = flow.state_at(1.5);
        let expect = [0.5, 0.0, 0.0];
        let err: f64 = u.iter().zip(expect).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(err <= 5e-3, "err = {err}");
    }

    #[test]
    fn euler_oracle_constant_on_kernel() {
        let f = tv1d(4).unwrap();
        let sig = Signal::new(vec![1.5; 4]).unwrap();
        let flow = run_implicit_euler(&f, &sig, 1e-2, 0.2).unwrap();
        for s in &flow.states {
            assert!(norm2(&sub(s, &[1.5; 4])) < 1e-10);
        }
    }

    #[test]
    fn euler_matches_eigen_decay() {
        let f = tv1d(4).unwrap();
        let sig = Signal::new(vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let flow = run_implicit_euler(&f, &sig, 1e-3, 1.9).unwrap();
        for &t in &[0.4, 1.0, 1.5, 1.9] {
            let u = flow.state_at(t);
            let scale = 1.0 - t / 2.0;
            let expect: Vec<f64> = [1.0, 1.0, -1.0, -1.0].iter().map(|x| x * scale).collect();
            let err = norm2(&sub(u, &expect));
            assert!(err <= 5e-3, "t = {t}, err = {err}");
        }
    }

    #[test]
    fn short_time_j_difference_shrinks() {
        let f = tv1d(8).unwrap();
        let traj = run(&f, &[0.9, 0.1, -0.4, 1.3, 0.2, -0.8, 0.5, -0.3]);
        let report = short_time_report(&f, &traj, 6).unwrap();
        // Monotone decline for a certified decomposition.
        for w in report.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }

    #[test]
    fn mass_conservation_at_breakpoints() {
        let f = tv1d(6).unwrap();
        let data = vec![0.7, -0.2, 1.4, -1.1, 0.9, 0.4];
        let traj = run(&f, &data);
        let f_bar = f.nullspace_project(&data).unwrap();
        for state in &traj.states {
            let proj = f.nullspace_project(state).unwrap();
            assert!(norm2(&sub(&proj, &f_bar)) < 1e-9);
        }
        assert!(norm2(&sub(traj.states.last().unwrap(), &f_bar)) < 1e-9);
    }
}
