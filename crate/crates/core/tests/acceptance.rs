//! Acceptance suite. Each criterion prints one PASS/FAIL line; criteria
//! that share the 100-instance-per-functional corpus build it once.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use specflow_core::equivalence::{iss_from_gf, taut_string_prox, vp_solve};
use specflow_core::extinction::{
    bonforte_figalli_check, dual_norm, extinction_profile, ground_state, GroundStateOptions,
};
use specflow_core::flow::{dissipation_report, run_event_driven, run_implicit_euler, FlowOptions, Trajectory};
use specflow_core::functionals::{custom, grid_divergence, l1, linf, tv1d, GridSpec};
use specflow_core::linalg::{dot, norm2, norm_inf, sub, Mat};
use specflow_core::minsub::{check_minsub, min_norm_subgradient, MinSubOptions};
use specflow_core::oracle;
use specflow_core::spectral::{orthogonality_report, reconstruct, spectral_measure, verify_decomposition_condition};
use specflow_core::{PolyhedralFunctional, Signal};

struct Group {
    name: &'static str,
    functional: PolyhedralFunctional,
    lambda0: f64,
    runs: Vec<(Signal, Trajectory)>,
}

struct Corpus {
    groups: Vec<Group>,
    build_seconds: f64,
}

fn verified_flow_options() -> FlowOptions {
    FlowOptions { verify_each_segment: true, verify_tol: 1e-8, ..FlowOptions::default() }
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let start = Instant::now();
        let functionals: Vec<(&'static str, PolyhedralFunctional)> = vec![
            ("tv1d(32)", tv1d(32).unwrap()),
            ("l1(32)", l1(32).unwrap()),
            ("linf(32)", linf(32).unwrap()),
            ("grid_div(4x4)", grid_divergence(GridSpec::new(4, 4).unwrap()).unwrap()),
        ];
        let opts = verified_flow_options();
        let mut groups = Vec::new();
        for (gi, (name, functional)) in functionals.into_iter().enumerate() {
            let mut rng = rand::rngs::StdRng::seed_from_u64(1000 + gi as u64);
            let mut runs = Vec::new();
            for _ in 0..100 {
                let data: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
                let sig = Signal::new(data).unwrap();
                let traj = run_event_driven(&functional, &sig, &opts).unwrap();
                runs.push((sig, traj));
            }
            let lambda0 = ground_state(&functional, &GroundStateOptions::default()).unwrap();
            assert!(lambda0.certified, "{name}: ground state must be exact for the bound chain");
            groups.push(Group { name, functional, lambda0: lambda0.lambda0, runs });
        }
        Corpus { groups, build_seconds: start.elapsed().as_secs_f64() }
    })
}

fn report(criterion: &str, pass: bool, details: &str) {
    println!("criterion {criterion}: {} ({details})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {details}");
}

#[test]
fn criterion_01_eigenvector_generation() {
    let corpus = corpus();
    let mut worst = 0.0f64;
    let mut extinct_all = true;
    for group in &corpus.groups {
        for (_, traj) in &group.runs {
            extinct_all &= traj.extinct;
            let defects = traj.segment_defects.as_ref().expect("verification enabled");
            for (k, defect) in defects.iter().enumerate() {
                let scale = traj.slopes[k].norm().powi(2).max(1.0);
                worst = worst.max(defect.abs() / scale);
            }
        }
    }
    let pass = extinct_all && worst <= 1e-8 && corpus.build_seconds <= 10.0;
    report(
        "1 eigenvector-generation",
        pass,
        &format!(
            "400 flows, worst scaled defect {worst:.3e}, all extinct = {extinct_all}, corpus runtime {:.2}s",
            corpus.build_seconds
        ),
    );
}

#[test]
fn criterion_02_l1_closed_form() {
    let functional = l1(16).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let data: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sig = Signal::new(data.clone()).unwrap();
        let traj = run_event_driven(&functional, &sig, &FlowOptions::default()).unwrap();
        let t_star = traj.extinction_time().unwrap();
        for k in 0..50 {
            let t = t_star * 1.2 * (k as f64 + 0.5) / 50.0;
            let (u, _) = traj.evaluate_at(t).unwrap();
            let expect = oracle::l1_flow_closed_form(&data, t);
            worst = worst.max(norm2(&sub(&u, &expect)));
        }
    }
    report("2 closed-form l1 flow", worst <= 1e-10, &format!("20 data x 50 times, worst deviation {worst:.3e}"));
}

#[test]
fn criterion_03_gf_vp_equivalence() {
    let functional = tv1d(64).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let data: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sig = Signal::new(data.clone()).unwrap();
        let traj = run_event_driven(&functional, &sig, &FlowOptions::default()).unwrap();
        let t_star = traj.extinction_time().unwrap();
        for k in 0..10 {
            let t = t_star * (k as f64 + 0.5) / 10.0;
            let (u, _) = traj.evaluate_at(t).unwrap();
            let v = taut_string_prox(&data, t);
            worst = worst.max(norm2(&sub(&u, &v)));
        }
    }
    report("3 GF=VP equivalence", worst <= 1e-6, &format!("tv1d(64), 20 data x 10 times, max deviation {worst:.3e}"));
}

#[test]
fn criterion_04_orthogonality_of_increments() {
    let corpus = corpus();
    let mut worst = 0.0f64;
    for group in &corpus.groups {
        for (_, traj) in &group.runs {
            let scale = traj.slopes.iter().map(|s| s.norm() * s.norm()).fold(0.0f64, f64::max).max(1.0);
            let r = orthogonality_report(traj);
            worst = worst.max(r.max_violation / scale);
        }
    }
    report("4 orthogonality", worst <= 1e-8, &format!("max scaled violation {worst:.3e} over all breakpoint triples"));
}

#[test]
fn criterion_05_reconstruction() {
    let corpus = corpus();
    let mut worst = 0.0f64;
    for group in &corpus.groups {
        for (sig, traj) in &group.runs {
            let measure = spectral_measure(traj).unwrap();
            let rec = reconstruct(&measure);
            let dev = norm2(&sub(rec.values(), sig.values())) / (1.0 + norm2(sig.values()));
            worst = worst.max(dev);
        }
    }
    report("5 reconstruction", worst <= 1e-9, &format!("worst relative deviation {worst:.3e}"));
}

#[test]
fn criterion_06_dissipation_identity() {
    let corpus = corpus();
    let mut worst = 0.0f64;
    for group in &corpus.groups {
        for (_, traj) in &group.runs {
            worst = worst.max(dissipation_report(traj).max_residual_rel);
        }
    }
    report("6 dissipation identity", worst <= 1e-8, &format!("worst per-segment relative residual {worst:.3e}"));
}

#[test]
fn criterion_07_extinction_bound_chain() {
    let corpus = corpus();
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    let mut worst_equality = 0.0f64;
    let mut uncertified = 0usize;
    for group in &corpus.groups {
        let c = 1.0 / group.lambda0;
        for (sig, traj) in &group.runs {
            if !verify_decomposition_condition(&group.functional, traj, 1e-8).unwrap() {
                uncertified += 1;
                continue;
            }
            let t_star = traj.extinction_time().unwrap();
            let dn = dual_norm(&group.functional, sig.values(), None).unwrap();
            let f_bar = group.functional.nullspace_project(sig.values()).unwrap();
            let diff_norm = norm2(&sub(sig.values(), &f_bar));
            worst_lower = worst_lower.min(t_star - dn.value);
            worst_upper = worst_upper.min(c * diff_norm - t_star);
            if group.name != "grid_div(4x4)" {
                worst_equality = worst_equality.max((t_star - dn.value).abs());
            }
        }
    }
    let pass = uncertified == 0 && worst_lower >= -1e-7 && worst_upper >= -1e-7 && worst_equality <= 1e-7;
    report(
        "7 extinction bound chain",
        pass,
        &format!(
            "uncertified {uncertified}, min lower slack {worst_lower:.3e}, min upper slack {worst_upper:.3e}, worst tv/l1/linf equality gap {worst_equality:.3e}"
        ),
    );
}

#[test]
fn criterion_08_extinction_profile_identities() {
    // linf(2), f = (3, 1).
    let f_linf = linf(2).unwrap();
    let sig = Signal::new(vec![3.0, 1.0]).unwrap();
    let traj = run_event_driven(&f_linf, &sig, &FlowOptions::default()).unwrap();
    let t_star = traj.extinction_time().unwrap();
    let profile = extinction_profile(&f_linf, &traj).unwrap();
    let ratio = dot(sig.values(), &profile.p_star.p) / f_linf.evaluate(&profile.p_star.p).unwrap();
    let linf_ok = (t_star - 4.0).abs() < 1e-12
        && norm2(&sub(&profile.p_star.p, &[0.5, 0.5])) < 1e-12
        && profile.eigen_defect.abs() <= 1e-12
        && (ratio - 4.0).abs() < 1e-12;

    // tv1d(4), f = (1, 1, -1, -1).
    let f_tv = tv1d(4).unwrap();
    let sig_tv = Signal::new(vec![1.0, 1.0, -1.0, -1.0]).unwrap();
    let traj_tv = run_event_driven(&f_tv, &sig_tv, &FlowOptions::default()).unwrap();
    let t_tv = traj_tv.extinction_time().unwrap();
    let dn = dual_norm(&f_tv, sig_tv.values(), None).unwrap();
    let measure = spectral_measure(&traj_tv).unwrap();
    let tv_ok = (t_tv - 2.0).abs() < 1e-9
        && (dn.value - 2.0).abs() < 1e-7
        && measure.atoms.len() == 1
        && norm2(&sub(&measure.atoms[0].mass, sig_tv.values())) < 1e-9;
    report(
        "8 extinction-profile identities",
        linf_ok && tv_ok,
        &format!(
            "linf(2): T*={t_star}, p*={:?}, defect {:.1e}, ratio {ratio}; tv1d(4): T*={t_tv}, |f|_*={:.10}, atoms {}",
            profile.p_star.p,
            profile.eigen_defect,
            dn.value,
            measure.atoms.len()
        ),
    );
}

#[test]
fn criterion_09_iss_reparametrization() {
    let corpus = corpus();
    let delta_tau = 1e-4;
    let mut worst_fd = 0.0f64;
    let mut residual_failures = 0usize;
    let mut samples_checked = 0usize;
    for group in &corpus.groups {
        for (sig, traj) in &group.runs {
            if traj.segments() == 0 {
                continue;
            }
            let f_norm = norm2(sig.values());
            let mut taus = Vec::new();
            // Mid-segment times; the FD stencil must stay inside one segment.
            for k in (0..traj.segments()).rev() {
                let t0 = traj.breakpoints[k];
                let t1 = traj.breakpoints[k + 1];
                let t = 0.5 * (t0 + t1);
                let stencil = 3.0 * delta_tau * t * t + 1e-9;
                if t - stencil > t0 && t + stencil < t1 && t > 1e-3 {
                    taus.push(1.0 / t);
                }
                if taus.len() >= 20 {
                    break;
                }
            }
            for &tau in &taus {
                let point = iss_from_gf(traj, tau).unwrap();
                let check =
                    specflow_core::equivalence::iss_residual_check(&group.functional, &point.w, &point.r, 1e-8)
                        .unwrap();
                if !check.ok {
                    residual_failures += 1;
                }
                let plus = iss_from_gf(traj, tau + delta_tau).unwrap();
                let minus = iss_from_gf(traj, tau - delta_tau).unwrap();
                let fd: Vec<f64> =
                    plus.r.iter().zip(&minus.r).map(|(a, b)| (a - b) / (2.0 * delta_tau)).collect();
                let rhs = sub(sig.values(), &point.w);
                let err = norm2(&sub(&fd, &rhs));
                worst_fd = worst_fd.max(err / (5.0 * delta_tau * f_norm.max(1e-12)));
                samples_checked += 1;
            }
        }
    }
    let pass = residual_failures == 0 && worst_fd <= 1.0 && samples_checked > 1000;
    report(
        "9 ISS reparametrization",
        pass,
        &format!(
            "{samples_checked} samples, residual failures {residual_failures}, worst FD error / (5 dtau |f|) = {worst_fd:.3}"
        ),
    );
}

#[test]
fn criterion_10_oracle_equivalence() {
    let dt = 1e-3;
    let mut worst = 0.0f64;
    let kinds: Vec<(&str, PolyhedralFunctional, usize)> = vec![
        ("tv1d", tv1d(16).unwrap(), 16),
        ("l1", l1(16).unwrap(), 16),
        ("linf", linf(16).unwrap(), 16),
        ("grid_div", grid_divergence(GridSpec::new(3, 3).unwrap()).unwrap(), 18),
    ];
    for (ki, (_, functional, n)) in kinds.iter().enumerate() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(100 + ki as u64);
        for _ in 0..50 {
            let data: Vec<f64> = (0..*n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sig = Signal::new(data.clone()).unwrap();
            let traj = run_event_driven(functional, &sig, &FlowOptions::default()).unwrap();
            let t_star = traj.extinction_time().unwrap();
            if t_star < 10.0 * dt {
                continue;
            }
            let euler = run_implicit_euler(functional, &sig, dt, t_star).unwrap();
            let scale = 1.0 + norm2(&data);
            for k in 0..8 {
                let t = (t_star * (k as f64 + 0.5) / 8.0 / dt).floor() * dt;
                let (u, _) = traj.evaluate_at(t).unwrap();
                let dev = norm2(&sub(&u, euler.state_at(t))) / scale;
                worst = worst.max(dev);
            }
        }
    }

    // Exact rational oracle at n <= 6: event times match to 1e-9.
    let mut worst_event = 0.0f64;
    {
        use specflow_core::oracle::{exact_event_flow, Ratio};
        // tv1d(5) with quarter-integer data.
        let tv_rows: Vec<Vec<Ratio>> = (0..4)
            .map(|i| {
                (0..5)
                    .map(|j| {
                        if j == i {
                            Ratio::int(-1)
                        } else if j == i + 1 {
                            Ratio::int(1)
                        } else {
                            Ratio::int(0)
                        }
                    })
                    .collect()
            })
            .collect();
        let data_num = [5i128, 2, -7, 4, -3];
        let exact_data: Vec<Ratio> = data_num.iter().map(|&v| Ratio::new(v, 4)).collect();
        let float_data: Vec<f64> = data_num.iter().map(|&v| v as f64 / 4.0).collect();
        let exact = exact_event_flow(&tv_rows, &exact_data, 200).unwrap();
        let functional = tv1d(5).unwrap();
        let sig = Signal::new(float_data).unwrap();
        let traj = run_event_driven(&functional, &sig, &FlowOptions::default()).unwrap();
        assert!(exact.extinct && traj.extinct);
        assert_eq!(exact.breakpoints.len(), traj.breakpoints.len(), "segment structure must agree");
        for (e, f) in exact.breakpoints.iter().zip(&traj.breakpoints) {
            worst_event = worst_event.max((e.to_f64() - f).abs());
        }
        // Diagonally dominant custom 3x3 with rational entries.
        let cust: Vec<Vec<i128>> = vec![vec![4, 1, 0], vec![-1, 4, 1], vec![0, -1, 4]];
        let cust_rows: Vec<Vec<Ratio>> =
            cust.iter().map(|r| r.iter().map(|&v| Ratio::int(v)).collect()).collect();
        let data_num = [3i128, -5, 2];
        let exact_data: Vec<Ratio> = data_num.iter().map(|&v| Ratio::new(v, 2)).collect();
        let float_data: Vec<f64> = data_num.iter().map(|&v| v as f64 / 2.0).collect();
        let exact = exact_event_flow(&cust_rows, &exact_data, 200).unwrap();
        let a = Mat::from_rows(cust.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect()).unwrap();
        let functional = custom(a).unwrap();
        let sig = Signal::new(float_data).unwrap();
        let traj = run_event_driven(&functional, &sig, &FlowOptions::default()).unwrap();
        assert!(exact.extinct && traj.extinct);
        assert_eq!(exact.breakpoints.len(), traj.breakpoints.len());
        for (e, f) in exact.breakpoints.iter().zip(&traj.breakpoints) {
            worst_event = worst_event.max((e.to_f64() - f).abs());
        }
    }
    let pass = worst <= 1e-2 && worst_event <= 1e-9;
    report(
        "10 oracle equivalence",
        pass,
        &format!("implicit-Euler worst scaled deviation {worst:.3e}; rational-oracle worst event gap {worst_event:.3e}"),
    );
}

#[test]
fn criterion_11_minsub_brute_force() {
    let opts = MinSubOptions::default();
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let mut checked = 0usize;
    let mut disagreements = 0usize;
    while checked < 200 {
        let n = rng.random_range(2..=6usize);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut r: Vec<f64> = (0..n).map(|_| 0.3 * rng.random_range(-1.0..1.0)).collect();
            r[i] += rng.random_range(1.0..2.0);
            rows.push(r);
        }
        let a = Mat::from_rows(rows.clone()).unwrap();
        let functional = custom(a).unwrap();
        let (dominant, _) = specflow_core::functionals::diag_dominance_report(&functional).unwrap();
        if !dominant {
            continue;
        }
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = min_norm_subgradient(&functional, &u, &opts).unwrap();
        if p.norm() < 1e-12 {
            continue;
        }
        let tol = 1e-8 * (1.0 + p.norm() * p.norm());
        let (ours, _) = check_minsub(&functional, &u, &p, tol).unwrap();
        let z = functional.apply_operator(&u).unwrap();
        let eps = 1e-9 * (1.0 + norm_inf(&z));
        let brute = oracle::face_vertex_worst_violation(&rows, &z, eps, &p.p) <= tol;
        if ours != brute {
            disagreements += 1;
        }
        checked += 1;
    }
    report(
        "11 MINSUB brute force",
        disagreements == 0,
        &format!("200 diagonally dominant instances, disagreements {disagreements}"),
    );
}

#[test]
fn criterion_11_negative_control() {
    // The stated fixture A = ((1,1),(0,1)) has A A^T = ((2,1),(1,1)),
    // which satisfies weak diagonal dominance with zero slack; the
    // flatness condition then holds on every face and every minimal-norm
    // subgradient is an eigenvector, so no state can fail the test. See
    // the decisions ledger for the analysis; the strictly distorted
    // variant below shows the detector itself works.
    let a = Mat::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let functional = custom(a).unwrap();
    let opts = MinSubOptions::default();
    let mut rng = rand::rngs::StdRng::seed_from_u64(12);
    let mut found_non_eigen = false;
    let mut states: Vec<Vec<f64>> = (0..500)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    // Include every sign-pattern representative alongside random states.
    states.extend(vec![
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![-1.0, 1.0],
        vec![1.0, -0.5],
        vec![2.0, -1.0],
        vec![-1.0, -1.0],
    ]);
    let mut strict_detected = false;
    for u in &states {
        let p = min_norm_subgradient(&functional, u, &opts).unwrap();
        if p.norm() < 1e-12 {
            continue;
        }
        let (eigen, _) = specflow_core::minsub::is_eigenvector(&functional, &p, 1e-8).unwrap();
        if !eigen {
            found_non_eigen = true;
        }
    }
    {
        // Supplementary (not part of the criterion): a strictly
        // non-dominant operator does produce a non-eigenvector.
        let a = Mat::from_rows(vec![vec![2.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let strict = custom(a).unwrap();
        let p = min_norm_subgradient(&strict, &[1.0, 0.0], &opts).unwrap();
        let (eigen, _) = specflow_core::minsub::is_eigenvector(&strict, &p, 1e-8).unwrap();
        strict_detected = !eigen || strict_detected;
    }
    report(
        "11 negative control",
        found_non_eigen,
        &format!(
            "fixture ((1,1),(0,1)): non-eigenvector state found = {found_non_eigen} over {} states \
             (strict variant ((2,2),(0,1)) detected = {strict_detected}); the fixture sits on the \
             weak-dominance boundary where every minimal-norm subgradient is provably an eigenvector",
            states.len()
        ),
    );
}

#[test]
fn criterion_12_bonforte_figalli() {
    // Hat on [96, 160] with total mass 3.
    let n = 256;
    let (a, b) = (96usize, 160usize);
    let mut data = vec![0.0; n];
    let mid = (a + b) as f64 / 2.0;
    let half = (b - a) as f64 / 2.0;
    for (i, v) in data.iter_mut().enumerate().take(b + 1).skip(a) {
        *v = 1.0 - ((i as f64 - mid).abs() / half);
    }
    let mass: f64 = data.iter().sum();
    for v in data.iter_mut() {
        *v *= 3.0 / mass;
    }
    let sig = Signal::new(data).unwrap();
    let report_bf = bonforte_figalli_check(&sig, 1.0).unwrap();
    let pass = report_bf.t_rel_dev <= 0.02 && report_bf.plateau_rel_dev <= 0.05;
    report(
        "12 Bonforte-Figalli analogue",
        pass,
        &format!(
            "T* = {:.6} vs predicted {:.6} (rel dev {:.3e}); plateau rel dev {:.3e} on support interior",
            report_bf.t_star, report_bf.predicted_t_star, report_bf.t_rel_dev, report_bf.plateau_rel_dev
        ),
    );
}

#[test]
fn criterion_03b_vp_fejer_certificates() {
    // Supplementary to criterion 3: the variational certificates at the
    // sampled parameters stay inside the dual ball.
    let functional = tv1d(32).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(33);
    let data: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut ok = true;
    for &t in &[0.05, 0.2, 0.8, 2.0] {
        let vp = vp_solve(&functional, &data, t).unwrap();
        let fejer: Vec<f64> = data.iter().zip(&vp.v).map(|(f, v)| (f - v) / t).collect();
        let membership = functional.membership_in_k(&fejer, None).unwrap();
        ok &= membership.member;
    }
    report("3b Fejer-mean certificates", ok, "4 parameters on tv1d(32)");
}
