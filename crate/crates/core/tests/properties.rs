//! Property suites for the generator, propagation and sensor layers.

#[path = "common/invariants.rs"]
mod invariants;

use proptest::prelude::*;

use invariants::*;
use nphoton::models::{jaynes_cummings, thermal_cavity, JCParams};
use nphoton::regression::DEFAULT_RTOL;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generator_preserves_trace(seed in any::<u64>()) {
        prop_assert!(trace_defect(seed) < 1e-10);
    }

    #[test]
    fn generator_preserves_hermiticity(seed in any::<u64>()) {
        prop_assert!(hermiticity_defect(seed) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn steady_state_is_fixed_point(
        gamma_a in 0.05f64..1.0,
        gamma_s in 0.005f64..0.5,
        pump in 0.001f64..0.2,
        thermal in any::<bool>(),
    ) {
        let sys = if thermal {
            thermal_cavity(0.6 * pump.min(gamma_a), gamma_a, 12).unwrap()
        } else {
            jaynes_cummings(&JCParams::new(gamma_a, gamma_s, pump, 3)).unwrap()
        };
        prop_assert!(fixed_point_defect(&sys) < 1e-8);
    }

    #[test]
    fn propagation_is_a_semigroup(seed in any::<u64>(), t1 in 0.0f64..40.0, t2 in 0.0f64..40.0) {
        let d = semigroup_defect(seed, t1, t2);
        prop_assert!(d < 10.0 * DEFAULT_RTOL, "{d}");
    }

    #[test]
    fn zero_delay_correlation_is_permutation_symmetric(
        w in proptest::array::uniform3(-2.5f64..2.5),
        perm in Just([0usize, 1, 2]).prop_shuffle(),
    ) {
        let (value, defect) = permutation_defect(w, perm);
        prop_assert!(value >= 0.0);
        prop_assert!(defect <= 1e-8, "{defect}");
    }
}

#[test]
fn raw_moment_scales_with_coupling_squared() {
    let ratio = doubling_ratio();
    assert!((ratio - 4.0).abs() < 4e-2, "ratio {ratio}");
}

#[test]
fn normalized_value_converges_quadratically() {
    let r = halving_ratios();
    assert!(r.iter().all(|x| (3.0..5.0).contains(x)), "{r:?}");
}

#[test]
fn z_kernel_continuous_across_double_poles() {
    let c = pole_continuity();
    assert!(c.poles > 10);
    assert!(c.curvature < 1e-6, "{}", c.curvature);
    assert!(c.jump < 1e-2, "{}", c.jump);
}
