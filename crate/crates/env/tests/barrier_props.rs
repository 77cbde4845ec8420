//! Property tests for the barrier functions.

use proptest::prelude::*;

use tpa_env::{barrier, BarrierKind, VoltageBand};

proptest! {
    #[test]
    fn barriers_are_nonnegative_and_anchored(v in 0.5f64..1.5) {
        let band = VoltageBand::default();
        for kind in [BarrierKind::L1, BarrierKind::L2, BarrierKind::Bowl] {
            let b = barrier(v, kind, &band).unwrap();
            prop_assert!(b >= 0.0);
            prop_assert_eq!(barrier(band.v_ref, kind, &band).unwrap(), 0.0);
        }
    }

    #[test]
    fn barriers_nondecreasing_in_deviation(d in 0.0f64..0.4, extra in 1e-6f64..0.1) {
        let band = VoltageBand::default();
        for kind in [BarrierKind::L1, BarrierKind::L2, BarrierKind::Bowl] {
            for sign in [-1.0, 1.0] {
                let near = barrier(1.0 + sign * d, kind, &band).unwrap();
                let far = barrier(1.0 + sign * (d + extra), kind, &band).unwrap();
                prop_assert!(far >= near, "{kind:?}: {far} < {near}");
            }
        }
    }

    #[test]
    fn bowl_sits_between_l2_and_its_tangent(v in 0.5f64..1.5) {
        let band = VoltageBand::default();
        let l2 = barrier(v, BarrierKind::L2, &band).unwrap();
        let bowl = barrier(v, BarrierKind::Bowl, &band).unwrap();
        // inside the band they coincide; outside the linear tail grows
        // slower than the parabola
        if band.contains(v) {
            prop_assert_eq!(bowl, l2);
        } else {
            prop_assert!(bowl <= l2 + 1e-15);
            prop_assert!(bowl > 0.0);
        }
    }
}
