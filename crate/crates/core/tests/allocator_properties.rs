mod common;

use coilstack_core::allocator::{
    allocate, authorities, capacity, forward_force, priority_order, DEFAULT_TOLERANCE, MIN_AUTHORITY,
};
use coilstack_core::magnetics::CoilStack;
use coilstack_core::{Error, Vec3};
use common::device_map;
use proptest::prelude::*;

fn position() -> impl Strategy<Value = Vec3> {
    (0.0..=0.09f64, 0.0..std::f64::consts::TAU, -0.0045..=0.2295f64)
        .prop_map(|(r, t, z)| Vec3::new(r * t.cos(), r * t.sin(), z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn feasible_requests_round_trip(p in position(), s in -0.999..0.999f64) {
        let stack = CoilStack::device();
        let map = device_map();
        let (_, cap) = capacity(p, map, &stack).unwrap();
        let f = s * cap;
        let res = allocate(f, p, map, &stack, DEFAULT_TOLERANCE).unwrap();
        let back = forward_force(&res.duties, p, map, &stack).unwrap();
        prop_assert!((back - f).abs() <= DEFAULT_TOLERANCE);
        prop_assert!(res.duties.0.iter().all(|d| d.abs() <= 1.0));

        let g = authorities(p, map, &stack).unwrap();
        let eligible: Vec<usize> = priority_order(&stack, p.z)
            .into_iter()
            .filter(|&i| g[i].abs() >= MIN_AUTHORITY)
            .collect();
        let used = res.coils_used;
        // Prefix of the priority order.
        prop_assert!(eligible[..used].iter().all(|&i| res.duties.0[i] != 0.0));
        prop_assert!(eligible[used..].iter().all(|&i| res.duties.0[i] == 0.0));
        // All but the last recruited coil saturated.
        if used > 0 {
            prop_assert!(eligible[..used - 1].iter().all(|&i| res.duties.0[i].abs() == 1.0));
            // Minimal: the coils before the last could not have done it alone.
            let before: f64 = eligible[..used - 1].iter().map(|&i| g[i].abs() * 1.6).sum();
            prop_assert!(before < f.abs() - DEFAULT_TOLERANCE + 1e-12);
        }
        // Every recruited coil pushes the way it was asked.
        for &i in &eligible[..used] {
            prop_assert!(g[i] * res.duties.0[i] * f > 0.0);
        }
        let neg = allocate(-f, p, map, &stack, DEFAULT_TOLERANCE).unwrap();
        prop_assert_eq!(neg.duties.0, res.duties.0.map(|d| -d));
    }

    #[test]
    fn beyond_capacity_is_infeasible(p in position(), s in 1.01..3.0f64) {
        let stack = CoilStack::device();
        let map = device_map();
        let (_, cap) = capacity(p, map, &stack).unwrap();
        prop_assume!(cap > 0.01);
        let is_infeasible = matches!(
            allocate(s * cap, p, map, &stack, DEFAULT_TOLERANCE),
            Err(Error::Infeasible { .. })
        );
        prop_assert!(is_infeasible);
    }
}

#[test]
fn capacity_peaks_between_the_middle_coils() {
    let stack = CoilStack::device();
    let map = device_map();
    for r in [0.0, 0.03, 0.06, 0.09] {
        let at = |z: f64| capacity(Vec3::new(r, 0.0, z), map, &stack).unwrap().1;
        let mid = at(0.1125);
        assert!(mid > at(0.02) && mid > at(0.2), "r={r}");
    }
}
