//! Property tests for the prototype similarity.

use proptest::prelude::*;

use tpa_agent::similarity;

proptest! {
    #[test]
    fn similarity_is_bounded_and_positive(
        p in proptest::collection::vec(-10.0f64..10.0, 4),
        f in proptest::collection::vec(-10.0f64..10.0, 4),
    ) {
        let eps = 1e-4;
        let s = similarity(&p, &f, eps);
        prop_assert!(s > 0.0);
        prop_assert!(s <= (1.0f64 / eps).ln() + 1e-12);
    }

    #[test]
    fn similarity_decreases_with_distance(
        base in proptest::collection::vec(-2.0f64..2.0, 4),
        d1 in 0.0f64..4.0,
        extra in 1e-6f64..2.0,
    ) {
        let eps = 1e-4;
        let mut near = base.clone();
        near[0] += d1;
        let mut far = base.clone();
        far[0] += d1 + extra;
        let s_near = similarity(&near, &base, eps);
        let s_far = similarity(&far, &base, eps);
        prop_assert!(s_far < s_near);
    }
}
