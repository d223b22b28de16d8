use std::collections::BTreeSet;

use bottrig::classifier::{bundles_isomorphic, realize_automorphism, Conclusion, IsoCertificate, Step};
use bottrig::extension::{
    enumerate_algebra_isomorphisms, fiber_form_to_map, map_to_fiber_form, HirzebruchBundleData, ExtensionResult,
};
use bottrig::fiber::FiberAutomorphism;
use bottrig::harness::enumerate_bundle_data;
use bottrig::ring::{BottTower, ClassDeg2, GradedMap};

fn over_cp1(c: i64, a: i64, y: i64) -> HirzebruchBundleData {
    HirzebruchBundleData::new(BottTower::trivial(1), ClassDeg2::new(vec![c]), a, ClassDeg2::new(vec![y])).unwrap()
}

fn non_upper_triangular(d1: &HirzebruchBundleData, d2: &HirzebruchBundleData) -> Vec<GradedMap> {
    enumerate_algebra_isomorphisms(d1, d2, d1.a * d1.a + d2.a * d2.a + 6)
        .unwrap()
        .into_iter()
        .filter(|m| !map_to_fiber_form(m).unwrap().0.is_upper_triangular())
        .collect()
}

fn kinds(c: &IsoCertificate) -> BTreeSet<&'static str> {
    c.all_steps().iter().map(|s| s.name()).collect()
}

#[test]
fn identity_certifies_by_upper_triangular_realization() {
    for d in [HirzebruchBundleData::hirzebruch(3), over_cp1(1, -2, 1)] {
        let n = d.n();
        let cert = bundles_isomorphic(&d, &d, &GradedMap::identity(n + 2)).unwrap();
        assert_eq!(cert.conclusion, Conclusion::IsomorphicOverBase);
        assert!(matches!(&cert.steps[..], [Step::UpperTriangularRealization { map, .. }] if *map == GradedMap::identity(n + 2)));
        cert.verify().unwrap();

        let ext = ExtensionResult {
            fiber_matrix: FiberAutomorphism::IDENTITY,
            u1: ClassDeg2::zero(n),
            u2: ClassDeg2::zero(n),
        };
        let cert = realize_automorphism(&d, &ext).unwrap();
        assert_eq!(cert.steps.len(), 1);
        cert.verify().unwrap();
    }
}

#[test]
fn fiber_product_generator_swap() {
    let d = over_cp1(1, 0, 1);
    let swap = fiber_form_to_map(&FiberAutomorphism::new([[0, 1], [1, 0]]), &ClassDeg2::zero(1), &ClassDeg2::zero(1));
    assert!(enumerate_algebra_isomorphisms(&d, &d, 6).unwrap().contains(&swap));
    let cert = bundles_isomorphic(&d, &d, &swap).unwrap();
    cert.verify().unwrap();
    let k = kinds(&cert);
    assert!(k.contains("FiberProductSwap") && k.contains("DecomposableSwap"));
}

#[test]
fn a_zero_automorphism_uses_two_projective_isomorphisms() {
    // c = x1, y = -x1: the exchange rows need c + y even and c^2 = y^2
    let d = over_cp1(1, 0, -1);
    let ext = bottrig::extension::predicted_automorphism_set(&d)
        .unwrap()
        .into_iter()
        .find(|r| !r.fiber_matrix.is_upper_triangular())
        .unwrap();
    let cert = realize_automorphism(&d, &ext).unwrap();
    cert.verify().unwrap();
    let swaps = cert.all_steps().iter().filter(|s| matches!(s, Step::DecomposableSwap { .. })).count();
    assert!(swaps >= 1);
    assert!(kinds(&cert).contains("FiberProductSwap"));
}

#[test]
fn odd_unit_fiber_uses_s1_map() {
    let d = HirzebruchBundleData::hirzebruch(1);
    let ext = ExtensionResult {
        fiber_matrix: FiberAutomorphism::new([[1, 0], [-2, -1]]),
        u1: ClassDeg2::zero(0),
        u2: ClassDeg2::zero(0),
    };
    let cert = realize_automorphism(&d, &ext).unwrap();
    cert.verify().unwrap();
    assert!(matches!(&cert.steps[..], [Step::S1EquivariantFiberMap { .. }]));
}

#[test]
fn odd_fibers_one_and_three_trivialize() {
    let (d1, d2) = (over_cp1(2, 1, -1), over_cp1(2, 3, -3));
    let isos = non_upper_triangular(&d1, &d2);
    assert!(!isos.is_empty());
    for m in &isos {
        let cert = bundles_isomorphic(&d1, &d2, m).unwrap();
        cert.verify().unwrap();
        assert!(kinds(&cert).contains("TrivializationViaSquareZero"));
    }
}

#[test]
fn odd_unit_fibers_with_different_stages() {
    // a = a' = 1 with c1 != c1': the second bundle is pulled back along the stage isomorphism
    let (d1, d2) = (over_cp1(2, 1, -1), over_cp1(-2, 1, 1));
    let mut depth_seen = 0;
    for m in enumerate_algebra_isomorphisms(&d1, &d2, 7).unwrap() {
        let cert = bundles_isomorphic(&d1, &d2, &m).unwrap();
        cert.verify().unwrap();
        depth_seen = depth_seen.max(cert.depth());
    }
    assert!(depth_seen >= 2);
}

/// The sweep over CP^1 with data in [-2, 2] uses every move except trivialization, which needs
/// an odd fiber with |a| >= 3.
#[test]
fn sweep_over_cp1_uses_every_move() {
    let data = enumerate_bundle_data(1, 2);
    let mut seen = BTreeSet::new();
    let mut certified = 0;
    for d1 in &data {
        for d2 in &data {
            if (d1.a - d2.a) % 2 != 0 {
                continue;
            }
            for m in non_upper_triangular(d1, d2) {
                let cert = bundles_isomorphic(d1, d2, &m).unwrap();
                cert.verify().unwrap();
                seen.extend(kinds(&cert));
                certified += 1;
            }
        }
    }
    assert!(certified > 0);
    for k in [
        "TensorTwist",
        "DecomposableSwap",
        "UpperTriangularRealization",
        "FiberProductSwap",
        "S1EquivariantFiberMap",
    ] {
        assert!(seen.contains(k), "{k} not used");
    }
    assert!(!seen.contains("TrivializationViaSquareZero"));
}

/// An isomorphism exists in one direction exactly when its inverse lies in the box.
#[test]
fn certified_isomorphisms_invert() {
    let data = enumerate_bundle_data(1, 1);
    for d1 in &data {
        for d2 in &data {
            for m in enumerate_algebra_isomorphisms(d1, d2, 7).unwrap() {
                let inv = m.inverse().unwrap();
                let back = bundles_isomorphic(d2, d1, &inv).unwrap();
                back.verify().unwrap();
            }
        }
    }
}

#[test]
fn explain_cites_each_move() {
    let d = over_cp1(1, 0, 1);
    let swap = fiber_form_to_map(&FiberAutomorphism::new([[0, 1], [1, 0]]), &ClassDeg2::zero(1), &ClassDeg2::zero(1));
    let text = bundles_isomorphic(&d, &d, &swap).unwrap().explain();
    assert!(text.starts_with("conclusion: isomorphic over the base"));
    assert!(text.contains("total Chern class"));
}
