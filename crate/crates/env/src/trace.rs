//! Per-step trace export.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One exported sample: a bus at a step.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub step: usize,
    pub bus_id: usize,
    pub v: f64,
    pub omega: f64,
    pub p_inj: f64,
    pub q_inj: f64,
    pub reward: f64,
    pub season: &'static str,
}

pub const TRACE_HEADER: &str = "step,bus_id,v,omega,p_inj,q_inj,reward,season";

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 48 + 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.step, r.bus_id, r.v, r.omega, r.p_inj, r.q_inj, r.reward, r.season
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}
