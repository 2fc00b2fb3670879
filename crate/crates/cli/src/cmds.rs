//! The five subcommands. All JSON output goes through the deterministic
//! writer in the core crate, so identical configs produce byte-identical
//! files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use specflow_core::equivalence::{iss_from_gf, iss_residual_check, vp_solve};
use specflow_core::extinction::extinction_identities;
use specflow_core::flow::{dissipation_report, run_event_driven, FlowOptions};
use specflow_core::functionals::{diag_dominance_report, from_descriptor};
use specflow_core::io::{format_f64, spectrum_to_csv, spectrum_to_json, trajectory_to_json};
use specflow_core::linalg::{norm2, sub};
use specflow_core::minsub::{check_minsub, SignPattern};
use specflow_core::spectral::{band_filter, hierarchy_check, orthogonality_report, reconstruct, spectral_measure};
use specflow_core::{PolyhedralFunctional, Signal, StructureTag};

use crate::logging;
use crate::{Options, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};

fn load_functional(opts: &Options) -> Result<PolyhedralFunctional, (i32, String)> {
    let path = opts
        .functional
        .as_ref()
        .ok_or((EXIT_USAGE, "--functional is required".to_string()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| (EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    from_descriptor(&text).map_err(|e| (EXIT_USAGE, format!("bad functional descriptor: {e}")))
}

fn load_signal(path: &Path) -> Result<Signal, (i32, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| (EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        Signal::from_json_str(&text)
    } else {
        Signal::from_csv_str(&text)
    };
    let sig = parsed.map_err(|e| (EXIT_USAGE, format!("bad signal {}: {e}", path.display())))?;
    Ok(Signal::with_label(sig.values().to_vec(), stem_of(path)).expect("validated above"))
}

/// Inputs in deterministic order: a single file, or every .csv/.json
/// inside a directory sorted by name.
fn collect_inputs(opts: &Options) -> Result<Vec<PathBuf>, (i32, String)> {
    let input = opts.input.as_ref().ok_or((EXIT_USAGE, "--input is required".to_string()))?;
    if input.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(input)
            .map_err(|e| (EXIT_USAGE, format!("cannot list {}: {e}", input.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err((EXIT_USAGE, format!("no .csv or .json signals in {}", input.display())));
        }
        Ok(files)
    } else {
        Ok(vec![input.clone()])
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "signal".into())
}

fn write(path: &Path, contents: &str) -> Result<(), (i32, String)> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| (EXIT_USAGE, format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| (EXIT_USAGE, format!("cannot write {}: {e}", path.display())))
}

/// Fans the per-input closure across the worker pool; results come back
/// in input orderregardless of scheduling.
fn run_batch<T: Send>(
    inputs: &[PathBuf],
    workers: usize,
    job: impl Fn(&Path) -> T + Sync,
) -> Vec<T> {
    if workers <= 1 || inputs.len() <= 1 {
        return inputs.iter().map(|p| job(p)).collect();
    }
    let mut results: Vec<Option<T>> = Vec::with_capacity(inputs.len());
    results.resize_with(inputs.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(inputs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= inputs.len() {
                    break;
                }
                let value = job(&inputs[k]);
                slots.lock().unwrap()[k] = Some(value);
            });
        }
    });
    results.into_iter().map(|r| r.expect("worker filled slot")).collect()
}

pub fn decompose(opts: &Options) -> i32 {
    let functional = match load_functional(opts) {
        Ok(f) => f,
        Err((code, msg)) => return fail(code, &msg),
    };
    let inputs = match collect_inputs(opts) {
        Ok(i) => i,
        Err((code, msg)) => return fail(code, &msg),
    };
    let multi = inputs.len() > 1;
    let outcomes = run_batch(&inputs, opts.workers, |path| -> Result<bool, (i32, String)> {
        let sig = load_signal(path)?;
        logging::info(format!("decompose {}", path.display()));
        let traj = run_event_driven(&functional, &sig, &FlowOptions::default())
            .map_err(|e| (EXIT_NUMERICAL, format!("{}: {e}", path.display())))?;
        logging::debug(format!(
            "{}: {} segments, extinct = {}",
            path.display(),
            traj.segments(),
            traj.extinct
        ));
        let prefix = if multi { format!("{}.", stem_of(path)) } else { String::new() };
        write(&opts.out.join(format!("{prefix}trajectory.json")), &trajectory_to_json(&traj))?;
        if traj.extinct {
            let measure = spectral_measure(&traj)
                .map_err(|e| (EXIT_NUMERICAL, format!("{}: {e}", path.display())))?;
            write(&opts.out.join(format!("{prefix}spectrum.json")), &spectrum_to_json(&measure))?;
            write(&opts.out.join(format!("{prefix}spectrum.csv")), &spectrum_to_csv(&measure))?;
        }
        Ok(traj.extinct)
    });
    let mut code = EXIT_OK;
    let mut lines = String::from("{\"runs\":[");
    for (k, (path, outcome)) in inputs.iter().zip(&outcomes).enumerate() {
        if k > 0 {
            lines.push(',');
        }
        match outcome {
            Ok(extinct) => {
                lines.push_str(&format!("{{\"input\":{:?},\"extinct\":{extinct}}}", stem_of(path)));
                if !extinct {
                    eprintln!("warning: {} hit the event cap before extinction", path.display());
                    code = EXIT_NUMERICAL;
                }
            }
            Err((c, msg)) => {
                eprintln!("error: {msg}");
                lines.push_str(&format!("{{\"input\":{:?},\"error\":true}}", stem_of(path)));
                code = *c;
            }
        }
    }
    lines.push_str("]}\n");
    if multi {
        if let Err((c, msg)) = write(&opts.out.join("batch.json"), &lines) {
            return fail(c, &msg);
        }
    }
    code
}

struct Check {
    name: &'static str,
    measured: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

/// Runs every theorem check on one flow and writes verify.json. Checks
/// are asserted (exit 3 on failure) only when the functional is one the
/// decomposition theory covers: the built-ins, or a custom operator with
/// diagonally dominant A A^T.
pub fn verify(opts: &Options) -> i32 {
    let functional = match load_functional(opts) {
        Ok(f) => f,
        Err((code, msg)) => return fail(code, &msg),
    };
    let inputs = match collect_inputs(opts) {
        Ok(i) => i,
        Err((code, msg)) => return fail(code, &msg),
    };
    if inputs.len() != 1 {
        return fail(EXIT_USAGE, "verify expects a single input signal");
    }
    let sig = match load_signal(&inputs[0]) {
        Ok(s) => s,
        Err((code, msg)) => return fail(code, &msg),
    };
    let asserted = match functional.tag() {
        StructureTag::Custom => diag_dominance_report(&functional).map(|(ok, _)| ok).unwrap_or(false),
        _ => true,
    };
    let flow_opts = FlowOptions { verify_each_segment: true, verify_tol: opts.tol, ..FlowOptions::default() };
    let traj = match run_event_driven(&functional, &sig, &flow_opts) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_NUMERICAL, &format!("flow failed: {e}")),
    };
    if !traj.extinct {
        return fail(EXIT_NUMERICAL, "flow hit the event cap before extinction");
    }
    let tol = opts.tol;
    let mut checks: Vec<Check> = Vec::new();

    let p_scale = traj.slopes.iter().map(|s| s.norm() * s.norm()).fold(0.0f64, f64::max).max(1.0);
    let defect = traj
        .segment_defects
        .as_ref()
        .map(|d| {
            d.iter()
                .enumerate()
                .map(|(k, v)| v.abs() / traj.slopes[k].norm().powi(2).max(1.0))
                .fold(0.0f64, f64::max)
        })
        .unwrap_or(0.0);
    checks.push(Check { name: "eigenvector_defect", measured: defect, tolerance: tol });

    let mut minsub_worst = 0.0f64;
    for k in 0..traj.segments() {
        let t_mid = 0.5 * (traj.breakpoints[k] + traj.breakpoints[k + 1]);
        let (u, _) = traj.evaluate_at(t_mid).expect("inside horizon");
        let (_, worst) =
            check_minsub(&functional, &u, &traj.slopes[k], tol * p_scale).expect("dimensions agree");
        minsub_worst = minsub_worst.max(worst / p_scale);
    }
    checks.push(Check { name: "minsub_flatness", measured: minsub_worst, tolerance: tol });

    let orth = orthogonality_report(&traj);
    checks.push(Check { name: "orthogonality", measured: orth.max_violation / p_scale, tolerance: tol });

    let (_, hierarchy_worst) = hierarchy_check(&functional, &traj, tol).expect("certificates present");
    checks.push(Check { name: "hierarchy", measured: hierarchy_worst, tolerance: tol });

    let measure = spectral_measure(&traj).expect("extinct");
    let rec = reconstruct(&measure);
    let rec_dev = norm2(&sub(rec.values(), sig.values())) / (1.0 + norm2(sig.values()));
    checks.push(Check { name: "reconstruction", measured: rec_dev, tolerance: 1e-9 });

    let ledger = dissipation_report(&traj);
    checks.push(Check { name: "dissipation", measured: ledger.max_residual_rel, tolerance: tol });

    let t_star = traj.extinction_time().expect("extinct");
    let mut gf_vp = 0.0f64;
    for k in 0..10 {
        let t = t_star * (k as f64 + 0.5) / 10.0;
        let (u, _) = traj.evaluate_at(t).expect("inside horizon");
        match vp_solve(&functional, sig.values(), t) {
            Ok(vp) => gf_vp = gf_vp.max(norm2(&sub(&u, &vp.v))),
            Err(e) => return fail(EXIT_NUMERICAL, &format!("variational solve failed: {e}")),
        }
    }
    checks.push(Check { name: "gf_vp_deviation", measured: gf_vp, tolerance: 1e-6 });

    let mut iss_gap = 0.0f64;
    let mut iss_member_failures = 0usize;
    for k in 0..traj.segments() {
        let t_mid = 0.5 * (traj.breakpoints[k] + traj.breakpoints[k + 1]);
        if t_mid <= 0.0 {
            continue;
        }
        let point = iss_from_gf(&traj, 1.0 / t_mid).expect("inside horizon");
        match iss_residual_check(&functional, &point.w, &point.r, tol) {
            Ok(r) => {
                iss_gap = iss_gap.max(r.duality_gap / (1.0 + functional.evaluate(&point.w).unwrap()));
                if !r.member {
                    iss_member_failures += 1;
                }
            }
            Err(e) => return fail(EXIT_NUMERICAL, &format!("ISS check failed: {e}")),
        }
    }
    checks.push(Check { name: "iss_duality_gap", measured: iss_gap, tolerance: tol });
    checks.push(Check { name: "iss_membership_failures", measured: iss_member_failures as f64, tolerance: 0.5 });

    let all_passed = checks.iter().all(|c| c.passed());
    let mut json = String::from("{\"functional\":\"");
    json.push_str(functional.tag().as_str());
    json.push_str("\",\"asserted\":");
    json.push_str(if asserted { "true" } else { "false" });
    json.push_str(",\"checks\":[");
    for (k, c) in checks.iter().enumerate() {
        if k > 0 {
            json.push(',');
        }
        json.push_str(&format!(
            "{{\"name\":\"{}\",\"measured\":{},\"tolerance\":{},\"passed\":{}}}",
            c.name,
            format_f64(c.measured),
            format_f64(c.tolerance),
            c.passed()
        ));
    }
    // Per-segment diagnostics: the dual sign pattern, the certificate
    // q* of the slope, and its eigenvector defect.
    json.push_str("],\"segments\":[");
    for k in 0..traj.segments() {
        if k > 0 {
            json.push(',');
        }
        let (plus, minus, free) = if functional.is_linf() {
            let state = &traj.states[k];
            let level = traj.j_values[k];
            let tie = 1e-9 * (1.0 + level);
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            let mut free = Vec::new();
            for (i, &v) in state.iter().enumerate() {
                if v.abs() >= level - tie {
                    if v > 0.0 {
                        plus.push(i);
                    } else {
                        minus.push(i);
                    }
                } else {
                    free.push(i);
                }
            }
            (plus, minus, free)
        } else {
            let z = functional.apply_operator(&traj.states[k]).expect("dimensions agree");
            let eps = 1e-9 * (1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let pattern = SignPattern::classify(&z, eps);
            (pattern.fixed_plus, pattern.fixed_minus, pattern.free)
        };
        let fmt_idx = |v: &[usize]| {
            let inner: Vec<String> = v.iter().map(|i| i.to_string()).collect();
            format!("[{}]", inner.join(","))
        };
        let cert: Vec<String> = traj.slopes[k].certificate.iter().map(|x| format_f64(*x)).collect();
        let defect = traj.segment_defects.as_ref().map(|d| d[k]).unwrap_or(0.0);
        json.push_str(&format!(
            "{{\"fixed_plus\":{},\"fixed_minus\":{},\"free\":{},\"certificate\":[{}],\"defect\":{}}}",
            fmt_idx(&plus),
            fmt_idx(&minus),
            fmt_idx(&free),
            cert.join(","),
            format_f64(defect)
        ));
    }
    json.push_str(&format!("],\"all_passed\":{all_passed}}}\n"));
    if let Err((code, msg)) = write(&opts.out.join("verify.json"), &json) {
        return fail(code, &msg);
    }
    for c in &checks {
        println!(
            "{:<26} {}  (measured {:.3e}, tolerance {:.3e})",
            c.name,
            if c.passed() { "pass" } else { "FAIL" },
            c.measured,
            c.tolerance
        );
    }
    if asserted && !all_passed {
        return EXIT_VERIFY;
    }
    EXIT_OK
}

pub fn extinction(opts: &Options) -> i32 {
    let functional = match load_functional(opts) {
        Ok(f) => f,
        Err((code, msg)) => return fail(code, &msg),
    };
    let inputs = match collect_inputs(opts) {
        Ok(i) => i,
        Err((code, msg)) => return fail(code, &msg),
    };
    if inputs.len() != 1 {
        return fail(EXIT_USAGE, "extinction expects a single input signal");
    }
    let sig = match load_signal(&inputs[0]) {
        Ok(s) => s,
        Err((code, msg)) => return fail(code, &msg),
    };
    let traj = match run_event_driven(&functional, &sig, &FlowOptions::default()) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_NUMERICAL, &format!("flow failed: {e}")),
    };
    if !traj.extinct {
        return fail(EXIT_NUMERICAL, "flow hit the event cap before extinction");
    }
    let report = match extinction_identities(&functional, &sig, &traj) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_NUMERICAL, &format!("extinction analysis failed: {e}")),
    };
    let json = specflow_core::io::extinction_report_to_json(&report);
    if let Err((code, msg)) = write(&opts.out.join("extinction.json"), &json) {
        return fail(code, &msg);
    }
    let f_bar = functional.nullspace_project(sig.values()).expect("dimensions agree");
    let diff = norm2(&sub(sig.values(), &f_bar));
    println!("bound chain:  |f|_* = {:.9}  <=  T* = {:.9}  <=  C |f - f_bar| = {:.9}", report.dual_norm, report.t_star, report.poincare_c * diff);
    println!(
        "  C = 1/lambda0 = {:.9} ({})",
        report.poincare_c,
        if report.poincare_certified { "exact" } else { "best found" }
    );
    println!(
        "  profile identity |T* - <f,p*>/J(p*)| = {:.3e}; profile eigen defect = {:.3e}",
        report.identity_gap, report.profile_eigen_defect
    );
    println!("  certified spectral decomposition: {}", report.certified);
    EXIT_OK
}

pub fn filter(opts: &Options) -> i32 {
    let Some((lo, hi)) = opts.band else {
        return fail(EXIT_USAGE, "filter needs --band lo,hi");
    };
    let functional = match load_functional(opts) {
        Ok(f) => f,
        Err((code, msg)) => return fail(code, &msg),
    };
    let inputs = match collect_inputs(opts) {
        Ok(i) => i,
        Err((code, msg)) => return fail(code, &msg),
    };
    if inputs.len() != 1 {
        return fail(EXIT_USAGE, "filter expects a single input signal");
    }
    let sig = match load_signal(&inputs[0]) {
        Ok(s) => s,
        Err((code, msg)) => return fail(code, &msg),
    };
    let traj = match run_event_driven(&functional, &sig, &FlowOptions::default()) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_NUMERICAL, &format!("flow failed: {e}")),
    };
    if !traj.extinct {
        return fail(EXIT_NUMERICAL, "flow hit the event cap before extinction");
    }
    let measure = spectral_measure(&traj).expect("extinct");
    let filtered = band_filter(&measure, lo, hi);
    if let Err((code, msg)) = write(&opts.out.join("filtered.csv"), &filtered.to_csv_string()) {
        return fail(code, &msg);
    }
    logging::info(format!("kept {} of {} atoms", measure.atoms.iter().filter(|a| a.lambda >= lo && a.lambda <= hi).count(), measure.atoms.len()));
    EXIT_OK
}

const GALLERY_NAMES: [&str; 6] = ["tv-step4", "l1-spike", "linf-pair", "tv-two-scale", "minsub-random", "bf-hat"];

pub fn gallery(opts: &Options) -> i32 {
    let Some(name) = opts.gallery_name.as_deref() else {
        return fail(EXIT_USAGE, &format!("gallery needs a name: {}", GALLERY_NAMES.join(", ")));
    };
    let (signal, descriptor): (Vec<f64>, String) = match name {
        "tv-step4" => (vec![1.0, 1.0, -1.0, -1.0], r#"{"type":"tv1d","n":4}"#.into()),
        "l1-spike" => (vec![2.0, -1.0, 0.0], r#"{"type":"l1","n":3}"#.into()),
        "linf-pair" => (vec![3.0, 1.0], r#"{"type":"linf","n":2}"#.into()),
        "tv-two-scale" => {
            // A coarse step plus a finer interior bump: two well-separated
            // frequencies in the spectrum.
            let coarse = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
            let fine = [0.0, 0.5, 0.5, 0.0, 0.0, -0.5, -0.5, 0.0];
            let data = coarse.iter().zip(fine).map(|(c, f)| c + f).collect();
            (data, r#"{"type":"tv1d","n":8}"#.into())
        }
        "minsub-random" => {
            let n = 5;
            let mut rng = rand::rngs::StdRng::seed_from_u64(opts.seed);
            // Diagonally dominant by construction: strong diagonal plus
            // small off-diagonal noise, retried until the report agrees.
            loop {
                let mut triplets = Vec::new();
                let mut rows = Vec::new();
                for i in 0..n {
                    let mut row = vec![0.0; n];
                    for (j, r) in row.iter_mut().enumerate() {
                        *r = if i == j {
                            rng.random_range(1.2..2.0)
                        } else {
                            0.25 * rng.random_range(-1.0..1.0)
                        };
                    }
                    for (j, &v) in row.iter().enumerate() {
                        triplets.push(format!("[{i},{j},{}]", format_f64(v)));
                    }
                    rows.push(row);
                }
                let mat = specflow_core::linalg::Mat::from_rows(rows).unwrap();
                let functional = specflow_core::functionals::custom(mat).unwrap();
                if diag_dominance_report(&functional).map(|(ok, _)| ok).unwrap_or(false) {
                    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let descriptor = format!(
                        "{{\"type\":\"custom\",\"m\":{n},\"n\":{n},\"triplets\":[{}]}}",
                        triplets.join(",")
                    );
                    break (data, descriptor);
                }
            }
        }
        "bf-hat" => {
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
            (data, r#"{"type":"tv1d","n":256}"#.into())
        }
        other => {
            return fail(
                EXIT_USAGE,
                &format!("unknown gallery fixture \"{other}\"; available: {}", GALLERY_NAMES.join(", ")),
            );
        }
    };
    let sig = Signal::new(signal).expect("gallery fixtures are finite");
    if let Err((code, msg)) = write(&opts.out.join(format!("{name}.csv")), &sig.to_csv_string()) {
        return fail(code, &msg);
    }
    let mut descriptor = descriptor;
    descriptor.push('\n');
    if let Err((code, msg)) = write(&opts.out.join(format!("{name}.functional.json")), &descriptor) {
        return fail(code, &msg);
    }
    println!("wrote {name}.csv and {name}.functional.json");
    EXIT_OK
}

fn fail(code: i32, msg: &str) -> i32 {
    eprintln!("error: {msg}");
    code
}
