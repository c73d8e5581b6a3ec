//! CSV rendering of the result types. All floating-point values are printed
//! with 17 significant digits so runs are reproducible byte for byte.

use crate::model::CommReport;
use crate::pathcost::{CostBreakdown, RefinePoint};
use crate::scalar::Scalar;
use crate::simulate::{LdCheckRow, Trajectory, TubeEstimate};
use crate::spectral::LambdaEstimate;
use crate::variational::RateResult;

/// 17 significant digits, lowercase specials, negative zero normalized.
pub fn fmt<T: Scalar>(x: T) -> String {
    let v = x.as_f64();
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

pub fn comm_report_csv<T: Scalar>(report: &CommReport<T>) -> String {
    let mut out = String::from("box_radius,gamma_hat,path_ratio,connected,dead_faces\n");
    let faces = report
        .dead_faces
        .iter()
        .map(|f| f.csv_token())
        .collect::<Vec<_>>()
        .join(";");
    out.push_str(&format!(
        "{},{},{},{},{}\n",
        report.box_radius,
        fmt(report.gamma_hat),
        fmt(report.path_ratio),
        report.connected,
        faces
    ));
    out
}

/// Rows of `(alpha, estimate)` pairs from an α sweep.
pub fn lambda_sweep_csv<T: Scalar>(
    face_dim: usize,
    rows: &[(Vec<T>, LambdaEstimate<T>)],
) -> String {
    let mut out = String::new();
    for i in 1..=face_dim {
        out.push_str(&format!("alpha_{i},"));
    }
    out.push_str("m,lambda,converged\n");
    for (alpha, est) in rows {
        for &(m, value) in &est.trace {
            for &a in alpha {
                out.push_str(&fmt(a));
                out.push(',');
            }
            out.push_str(&format!("{},{},{}\n", m, fmt(value), est.converged));
        }
    }
    out
}

pub fn rate_sweep_csv<T: Scalar>(
    dim: usize,
    face_dim: usize,
    rows: &[(Vec<T>, RateResult<T>)],
) -> String {
    let mut out = String::from("face,");
    for i in 1..=dim {
        out.push_str(&format!("v_{i},"));
    }
    for i in 1..=face_dim {
        out.push_str(&format!("alpha_{i},"));
    }
    out.push_str("rate,converged\n");
    for (v, res) in rows {
        out.push_str(&res.face.csv_token());
        for &vi in v {
            out.push(',');
            out.push_str(&fmt(vi));
        }
        for k in 0..face_dim {
            out.push(',');
            match &res.tilt {
                Some(tilt) => out.push_str(&fmt(tilt[k])),
                None => out.push_str("nan"),
            }
        }
        out.push_str(&format!(",{},{}\n", fmt(res.value), res.converged));
    }
    out
}

pub fn cost_report_csv<T: Scalar>(breakdown: &CostBreakdown<T>) -> String {
    let dim = breakdown
        .per_segment
        .first()
        .map(|s| s.velocity.len())
        .unwrap_or(0);
    let mut out = String::from("seg,face,dt,theta");
    for i in 1..=dim {
        out.push_str(&format!(",vx{i}"));
    }
    out.push_str(",cost\n");
    for (k, seg) in breakdown.per_segment.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}",
            k,
            seg.face.csv_token(),
            fmt(seg.duration),
            fmt(seg.theta)
        ));
        for &v in &seg.velocity {
            out.push(',');
            out.push_str(&fmt(v));
        }
        out.push(',');
        out.push_str(&fmt(seg.cost));
        out.push('\n');
    }
    out
}

pub fn refine_trace_csv<T: Scalar>(points: &[RefinePoint<T>]) -> String {
    let mut out = String::from("grid,budget,cost\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.grid, fmt(p.budget), fmt(p.cost)));
    }
    out
}

pub fn tube_csv<T: Scalar>(n: u64, estimates: &[TubeEstimate<T>]) -> String {
    let mut out =
        String::from("n,method,reps,hits,p_hat,log_over_n,stderr_log,zero_hits,upper_log_over_n\n");
    for e in estimates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            n,
            e.method,
            e.reps,
            e.hits,
            fmt(e.p_hat),
            fmt(e.log_over_n),
            fmt(e.stderr_log),
            e.zero_hits,
            fmt(e.upper_log_over_n)
        ));
    }
    out
}

pub fn ld_check_csv<T: Scalar>(rows: &[LdCheckRow<T>]) -> String {
    let mut out = String::from("n,method,reps,hits,p_hat,log_over_n,target,stderr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            r.method,
            r.reps,
            r.hits,
            fmt(r.p_hat),
            fmt(r.log_over_n),
            fmt(r.target),
            fmt(r.stderr_log)
        ));
    }
    out
}

pub fn trajectory_csv<T: Scalar>(traj: &Trajectory<T>) -> String {
    let dim = traj.events.first().map(|(_, x)| x.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t, x) in &traj.events {
        out.push_str(&fmt(*t));
        for &c in x {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}
