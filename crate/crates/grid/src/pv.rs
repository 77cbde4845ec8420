//! PV inverter reactive-power dispatch.

use crate::error::{GridError, Result};

/// Maps an agent action to the inverter's reactive output:
/// `q = a * sqrt(s_max^2 - p_pv^2)`, so the apparent power never exceeds the
/// inverter rating. `a` is clamped to `[-1, 1]` (the action ratio cannot
/// request more than the remaining headroom).
pub fn pv_reactive_from_action(a: f64, p_pv: f64, s_max: f64) -> Result<f64> {
    if p_pv > s_max {
        return Err(GridError::Capacity { p_pv, s_max });
    }
    if p_pv < 0.0 {
        return Err(GridError::Capacity { p_pv, s_max });
    }
    let headroom = (s_max * s_max - p_pv * p_pv).max(0.0).sqrt();
    Ok(a.clamp(-1.0, 1.0) * headroom)
}
