//! Deterministic serialization. All floating-point values are written
//! with 17 significant digits so outputs are byte-stable and round-trip
//! exactly; reading goes through serde_json.

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::spectral::SpectralMeasure;

/// 17 significant digits in scientific notation, enough to round-trip
/// any f64, and byte-deterministic.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_vec(out: &mut String, v: &[f64]) {
    out.push('[');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_f64(*x));
    }
    out.push(']');
}

fn push_mat(out: &mut String, rows: &[Vec<f64>]) {
    out.push('[');
    for (i, r) in rows.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_vec(out, r);
    }
    out.push(']');
}

pub fn trajectory_to_json(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str("{\"breakpoints\":");
    push_vec(&mut out, &traj.breakpoints);
    out.push_str(",\"states\":");
    push_mat(&mut out, &traj.states);
    out.push_str(",\"slopes\":");
    let slopes: Vec<Vec<f64>> = traj.slopes.iter().map(|s| s.p.clone()).collect();
    push_mat(&mut out, &slopes);
    out.push_str(",\"certificates\":");
    let certs: Vec<Vec<f64>> = traj.slopes.iter().map(|s| s.certificate.clone()).collect();
    push_mat(&mut out, &certs);
    out.push_str(",\"extinct\":");
    out.push_str(if traj.extinct { "true" } else { "false" });
    out.push_str(",\"f_bar\":");
    push_vec(&mut out, &traj.f_bar);
    out.push_str("}\n");
    out
}

pub fn spectrum_to_json(measure: &SpectralMeasure) -> String {
    let mut out = String::new();
    out.push_str("{\"f_bar\":");
    push_vec(&mut out, &measure.f_bar);
    out.push_str(",\"atoms\":[");
    for (i, atom) in measure.atoms.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"lambda\":");
        out.push_str(&format_f64(atom.lambda));
        out.push_str(",\"mass\":");
        push_vec(&mut out, &atom.mass);
        out.push('}');
    }
    out.push_str("]}\n");
    out
}

/// CSV with one `lambda, mass_norm` row per atom.
pub fn spectrum_to_csv(measure: &SpectralMeasure) -> String {
    let mut out = String::from("lambda,mass_norm\n");
    for atom in &measure.atoms {
        out.push_str(&format_f64(atom.lambda));
        out.push(',');
        out.push_str(&format_f64(crate::linalg::norm2(&atom.mass)));
        out.push('\n');
    }
    out
}

pub fn extinction_report_to_json(r: &crate::extinction::ExtinctionReport) -> String {
    let mut out = String::new();
    out.push('{');
    out.push_str(&format!("\"t_star\":{}", format_f64(r.t_star)));
    out.push_str(&format!(",\"dual_norm\":{}", format_f64(r.dual_norm)));
    out.push_str(&format!(",\"poincare_c\":{}", format_f64(r.poincare_c)));
    out.push_str(&format!(",\"poincare_certified\":{}", r.poincare_certified));
    out.push_str(",\"profile\":");
    push_vec(&mut out, &r.profile);
    out.push_str(&format!(",\"profile_eigen_defect\":{}", format_f64(r.profile_eigen_defect)));
    out.push_str(&format!(",\"identity_gap\":{}", format_f64(r.identity_gap)));
    out.push_str(&format!(",\"lower_slack\":{}", format_f64(r.lower_slack)));
    out.push_str(&format!(",\"upper_slack\":{}", format_f64(r.upper_slack)));
    out.push_str(&format!(",\"profile_bound_slack\":{}", format_f64(r.profile_bound_slack)));
    out.push_str(&format!(",\"certified\":{}", r.certified));
    out.push_str("}\n");
    out
}

/// Reads a trajectory back from its JSON form (states and slopes only;
/// certificates are kept, derived diagnostics are not serialized).
pub fn trajectory_from_json(text: &str) -> Result<TrajectoryData> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad trajectory JSON: {e}")))?;
    let vec_of = |key: &str| -> Result<Vec<f64>> {
        v.get(key)
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::InvalidInput(format!("missing array \"{key}\"")))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::InvalidInput(format!("non-number in \"{key}\""))))
            .collect()
    };
    let mat_of = |key: &str| -> Result<Vec<Vec<f64>>> {
        v.get(key)
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::InvalidInput(format!("missing array \"{key}\"")))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::InvalidInput(format!("non-array row in \"{key}\"")))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| Error::InvalidInput(format!("non-number in \"{key}\""))))
                    .collect()
            })
            .collect()
    };
    Ok(TrajectoryData {
        breakpoints: vec_of("breakpoints")?,
        states: mat_of("states")?,
        slopes: mat_of("slopes")?,
        certificates: mat_of("certificates")?,
        extinct: v
            .get("extinct")
            .and_then(|x| x.as_bool())
            .ok_or_else(|| Error::InvalidInput("missing \"extinct\"".into()))?,
        f_bar: vec_of("f_bar")?,
    })
}

/// Plain data view of a serialized trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryData {
    pub breakpoints: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub slopes: Vec<Vec<f64>>,
    pub certificates: Vec<Vec<f64>>,
    pub extinct: bool,
    pub f_bar: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_event_driven, FlowOptions};
    use crate::functionals::l1;
    use crate::signal::Signal;

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.0, 1.0, -0.5, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -3.7e200] {
            let s = format_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn trajectory_json_round_trip() {
        let f = l1(3).unwrap();
        let sig = Signal::new(vec![2.0, -1.0, 0.0]).unwrap();
        let traj = run_event_driven(&f, &sig, &FlowOptions::default()).unwrap();
        let text = trajectory_to_json(&traj);
        let back = trajectory_from_json(&text).unwrap();
        assert_eq!(back.breakpoints, traj.breakpoints);
        assert!(back.extinct);
        assert_eq!(back.slopes.len(), traj.slopes.len());
        for (a, b) in back.slopes.iter().zip(&traj.slopes) {
            assert_eq!(a, &b.p);
        }
        // Byte-determinism.
        assert_eq!(text, trajectory_to_json(&traj));
    }

    #[test]
    fn spectrum_json_shape() {
        let f = l1(3).unwrap();
        let sig = Signal::new(vec![2.0, -1.0, 0.0]).unwrap();
        let traj = run_event_driven(&f, &sig, &FlowOptions::default()).unwrap();
        let m = crate::spectral::spectral_measure(&traj).unwrap();
        let text = spectrum_to_json(&m);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("f_bar").unwrap().is_array());
        assert_eq!(v.get("atoms").unwrap().as_array().unwrap().len(), 2);
        let csv = spectrum_to_csv(&m);
        assert!(csv.lines().count() == 3);
    }
}
