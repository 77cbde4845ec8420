//! Voltage barrier functions scoring deviation from the reference voltage.

use crate::error::{EnvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    L1,
    L2,
    Bowl,
}

impl BarrierKind {
    pub fn parse(s: &str) -> Option<BarrierKind> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Some(BarrierKind::L1),
            "l2" => Some(BarrierKind::L2),
            "bowl" => Some(BarrierKind::Bowl),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BarrierKind::L1 => "l1",
            BarrierKind::L2 => "l2",
            BarrierKind::Bowl => "bowl",
        }
    }
}

/// Safety band and reference voltage, p.u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageBand {
    pub v_min: f64,
    pub v_max: f64,
    pub v_ref: f64,
}

impl Default for VoltageBand {
    fn default() -> Self {
        VoltageBand { v_min: 0.95, v_max: 1.05, v_ref: 1.0 }
    }
}

impl VoltageBand {
    pub fn contains(&self, v: f64) -> bool {
        self.v_min <= v && v <= self.v_max
    }
}

/// Nonnegative loss, zero at `v_ref`, nondecreasing in the deviation.
///
/// `L1` is the absolute deviation, `L2` the squared deviation. `Bowl` is
/// quadratic inside the band and switches to the linear continuation
/// `2 d0 |v - v_ref| - d0^2` outside, where `d0` is the distance from the
/// reference to the crossed band edge, so value and slope are continuous.
pub fn barrier(v: f64, kind: BarrierKind, band: &VoltageBand) -> Result<f64> {
    if v <= 0.0 || !v.is_finite() {
        return Err(EnvError::BadVoltage(v));
    }
    let d = v - band.v_ref;
    Ok(match kind {
        BarrierKind::L1 => d.abs(),
        BarrierKind::L2 => d * d,
        BarrierKind::Bowl => {
            let d0 = if d >= 0.0 {
                band.v_max - band.v_ref
            } else {
                band.v_ref - band.v_min
            };
            let ad = d.abs();
            if ad <= d0 {
                ad * ad
            } else {
                2.0 * d0 * ad - d0 * d0
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_reference() {
        let band = VoltageBand::default();
        for kind in [BarrierKind::L1, BarrierKind::L2, BarrierKind::Bowl] {
            assert_eq!(barrier(1.0, kind, &band).unwrap(), 0.0);
        }
    }

    #[test]
    fn band_edge_values() {
        let band = VoltageBand::default();
        assert!((barrier(1.05, BarrierKind::L2, &band).unwrap() - 0.0025).abs() < 1e-15);
        assert!((barrier(1.05, BarrierKind::L1, &band).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn bowl_is_c1_at_band_edges() {
        let band = VoltageBand::default();
        for edge in [0.95_f64, 1.05] {
            let h = 1e-6;
            let f = |v: f64| barrier(v, BarrierKind::Bowl, &band).unwrap();
            // value continuity
            assert!((f(edge + 1e-12) - f(edge - 1e-12)).abs() < 1e-9);
            // slope continuity under numerical differentiation
            let slope_in = (f(edge) - f(edge - h)) / h;
            let slope_out = (f(edge + h) - f(edge)) / h;
            assert!(
                (slope_in - slope_out).abs() < 1e-5,
                "edge {edge}: {slope_in} vs {slope_out}"
            );
        }
    }

    #[test]
    fn nonpositive_voltage_rejected() {
        let band = VoltageBand::default();
        assert!(barrier(0.0, BarrierKind::L1, &band).is_err());
        assert!(barrier(-1.0, BarrierKind::L2, &band).is_err());
    }

    #[test]
    fn nondecreasing_in_deviation() {
        let band = VoltageBand::default();
        for kind in [BarrierKind::L1, BarrierKind::L2, BarrierKind::Bowl] {
            let mut prev = 0.0;
            for k in 0..200 {
                let v = 1.0 + 0.001 * k as f64;
                let b = barrier(v, kind, &band).unwrap();
                assert!(b >= prev);
                prev = b;
            }
            let mut prev = 0.0;
            for k in 0..200 {
                let v = 1.0 - 0.001 * k as f64;
                let b = barrier(v, kind, &band).unwrap();
                assert!(b >= prev);
                prev = b;
            }
        }
    }
}
