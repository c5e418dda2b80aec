//! Numeric formatting and CSV writers with fixed column orders.

use std::io::Write;

use roadplan_core::geometry::ReferenceLine;
use roadplan_core::lateral_planner::CandidateTrajectory;
use roadplan_core::sim::{ReplanRow, ReplanStatus, TraceRow};

pub const REFERENCE_COLUMNS: [&str; 5] = ["s", "x", "y", "heading", "curvature"];
pub const PLAN_COLUMNS: [&str; 8] = ["index", "d_e", "l_e", "cost", "checked", "feasible", "selected", "clearance"];
pub const TRACE_COLUMNS: [&str; 19] = [
    "t",
    "x",
    "y",
    "heading",
    "v",
    "a",
    "delta",
    "u",
    "e_fa",
    "theta_e",
    "station",
    "offset",
    "d_error",
    "d_error_est",
    "v_rel",
    "clearance",
    "plan",
    "lead",
    "emergency",
];
pub const REPLAN_COLUMNS: [&str; 11] = [
    "t",
    "index",
    "start_station",
    "start_offset",
    "candidates",
    "checked",
    "status",
    "end_offset",
    "end_length",
    "cost",
    "clearance",
];

/// C `printf("%.9g")`.
pub fn fmt_g(v: f64) -> String {
    const P: i32 = 9;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // The exponent after rounding to P significant digits decides the style.
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_reference<W: Write>(out: W, line: &ReferenceLine) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REFERENCE_COLUMNS)?;
    for p in line.points() {
        w.write_record([p.s, p.position.x, p.position.y, p.heading, p.curvature].map(fmt_g))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_candidates<W: Write>(out: W, candidates: &[CandidateTrajectory], selected: Option<usize>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLAN_COLUMNS)?;
    for (i, c) in candidates.iter().enumerate() {
        let (feasible, clearance) = if c.collision_checked {
            (flag(c.feasible).to_string(), fmt_g(c.clearance))
        } else {
            (String::new(), String::new())
        };
        w.write_record([
            i.to_string(),
            fmt_g(c.end_state.d),
            fmt_g(c.end_state.l),
            fmt_g(c.cost),
            flag(c.collision_checked).to_string(),
            feasible,
            flag(selected == Some(i)).to_string(),
            clearance,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in rows {
        let nums = [
            r.t,
            r.x,
            r.y,
            r.heading,
            r.v,
            r.a,
            r.delta,
            r.u,
            r.e_fa,
            r.theta_e,
            r.station,
            r.offset,
            r.d_error,
            r.d_error_est,
            r.v_rel,
            r.clearance,
        ]
        .map(fmt_g);
        let mut rec: Vec<String> = nums.into();
        rec.extend([r.plan.to_string(), r.lead.to_string(), flag(r.emergency).to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_replans<W: Write>(out: W, rows: &[ReplanRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPLAN_COLUMNS)?;
    for r in rows {
        let status = match r.status {
            ReplanStatus::Selected => "selected",
            ReplanStatus::NoFeasible => "no_feasible",
        };
        w.write_record([
            fmt_g(r.t),
            r.index.to_string(),
            fmt_g(r.start_station),
            fmt_g(r.start_offset),
            r.candidates.to_string(),
            r.checked.to_string(),
            status.to_string(),
            fmt_g(r.end_offset),
            fmt_g(r.end_length),
            fmt_g(r.cost),
            fmt_g(r.clearance),
        ])?;
    }
    w.flush()?;
    Ok(())
}
