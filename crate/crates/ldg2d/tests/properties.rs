//! Property-based invariants of the tensor algebra and elastic densities.

use ldg2d::elastic::{elastic_density, elastic_density_lm, elastic_invariants, ElasticTriple, GradientQ};
use ldg2d::tensor::{biaxiality, bulk_potential, rotate_tensor, MaterialParams, QTensor};
use nalgebra::Matrix3;
use proptest::prelude::*;

fn arb_qtensor() -> impl Strategy<Value = QTensor> {
    proptest::array::uniform9(-2.0f64..2.0).prop_map(|v| {
        QTensor::project(Matrix3::from_row_slice(&v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn biaxiality_stays_in_unit_interval(q in arb_qtensor()) {
        let b = biaxiality(&q);
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn bulk_potential_is_rotation_invariant(q in arb_qtensor(), psi in -6.0f64..6.0) {
        let p = MaterialParams::new(1.1, 0.7, 1.0, 1.0, 0.0, 2, 1.0).unwrap();
        let a = bulk_potential(&q, &p);
        let b = bulk_potential(&rotate_tensor(&q, psi, p.k), &p);
        prop_assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()));
    }

    #[test]
    fn dirichlet_invariant_is_nonnegative_and_lm_reduction_holds(
        dx in arb_qtensor(),
        dy in arb_qtensor(),
        l in 0.1f64..3.0,
        m in -1.0f64..2.0,
    ) {
        let g = GradientQ { d: [dx, dy] };
        let (i1, _, i3) = elastic_invariants(&g);
        prop_assert!(i1 >= 0.0);
        prop_assert!(i3 >= 0.0);
        let lm = elastic_density_lm(&g, l, m);
        let triple = elastic_density(&g, &ElasticTriple { l1: l, l2: 2.0 * m, l3: 0.0 });
        prop_assert!((lm - triple).abs() < 1e-10 * (1.0 + lm.abs()));
    }

    #[test]
    fn eigenvalues_are_preserved_by_winding_rotation(q in arb_qtensor(), psi in -4.0f64..4.0, k in 1i32..4) {
        let r = rotate_tensor(&q, psi, k);
        let ev_a = q.eigenvalues();
        let ev_b = r.eigenvalues();
        for i in 0..3 {
            prop_assert!((ev_a[i] - ev_b[i]).abs() < 1e-10 * (1.0 + q.norm()));
        }
    }
}
