use bottrig::classifier::{proj_iso_over, realize_automorphism};
use bottrig::extension::{predicted_automorphism_set, HirzebruchBundleData};
use bottrig::ring::{is_ring_iso, mul, normalize, BottTower, ClassDeg2, GradedMap, Monomial, Polynomial, RingElement};
use proptest::prelude::*;

fn tower(max_height: usize, bound: i64) -> impl Strategy<Value = BottTower> {
    (1..=max_height).prop_flat_map(move |n| {
        let rows: Vec<_> = (0..n).map(|j| prop::collection::vec(-bound..=bound, j)).collect();
        rows.prop_map(|r| BottTower::from_rows(r).unwrap())
    })
}

fn element(n: usize) -> impl Strategy<Value = RingElement> {
    prop::collection::vec((0u32..(1 << n), -3i64..=3), 0..5).prop_map(move |terms| {
        RingElement::from_terms(terms.into_iter().map(|(bits, c)| {
            let idx: Vec<usize> = (0..n).filter(|j| bits >> j & 1 == 1).collect();
            (Monomial::from_indices(&idx).unwrap(), c)
        }))
    })
}

fn tower_and_elements() -> impl Strategy<Value = (BottTower, RingElement, RingElement, RingElement)> {
    tower(5, 3).prop_flat_map(|t| {
        let n = t.height();
        (Just(t), element(n), element(n), element(n))
    })
}

fn class(n: usize, bound: i64) -> impl Strategy<Value = ClassDeg2> {
    prop::collection::vec(-bound..=bound, n).prop_map(ClassDeg2::new)
}

fn tower_and_classes() -> impl Strategy<Value = (BottTower, ClassDeg2, ClassDeg2)> {
    tower(3, 2).prop_flat_map(|t| {
        let n = t.height();
        (Just(t), class(n, 4), class(n, 4))
    })
}

fn bundle(max_base: usize) -> impl Strategy<Value = HirzebruchBundleData> {
    (0..=max_base)
        .prop_flat_map(|n| {
            let rows: Vec<_> = (0..n).map(|j| prop::collection::vec(-2i64..=2, j)).collect();
            (rows, class(n, 2), -4i64..=4, class(n, 2))
        })
        .prop_map(|(rows, c, a, y)| HirzebruchBundleData::new(BottTower::from_rows(rows).unwrap(), c, a, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ring_axioms((t, a, b, c) in tower_and_elements()) {
        let ab = mul(&t, &a, &b).unwrap();
        prop_assert_eq!(&ab, &mul(&t, &b, &a).unwrap());
        prop_assert_eq!(mul(&t, &ab, &c).unwrap(), mul(&t, &a, &mul(&t, &b, &c).unwrap()).unwrap());
        let lhs = mul(&t, &a, &b.checked_add(&c).unwrap()).unwrap();
        prop_assert_eq!(lhs, ab.checked_add(&mul(&t, &a, &c).unwrap()).unwrap());
        prop_assert_eq!(normalize(&t, &Polynomial::from(&ab)).unwrap(), ab);
    }

    #[test]
    fn normal_form_of_formal_product((t, a, b, _c) in tower_and_elements()) {
        let formal = Polynomial::from(&a).product(&Polynomial::from(&b));
        prop_assert_eq!(normalize(&t, &formal).unwrap(), mul(&t, &a, &b).unwrap());
    }

    #[test]
    fn proj_iso_reflexive_symmetric_sign_blind((t, alpha, beta) in tower_and_classes()) {
        let cert = proj_iso_over(&t, &alpha, &alpha).unwrap().unwrap();
        prop_assert!(cert.c.is_zero());
        let forward = proj_iso_over(&t, &alpha, &beta).unwrap();
        let backward = proj_iso_over(&t, &beta, &alpha).unwrap();
        let flipped = proj_iso_over(&t, &alpha, &-&beta).unwrap();
        prop_assert_eq!(forward.is_some(), backward.is_some());
        prop_assert_eq!(forward.is_some(), flipped.is_some());
        if let Some(c) = forward {
            prop_assert!(c.verify().is_ok());
        }
    }

    #[test]
    fn graded_map_inverse(t in tower(4, 2), seed in prop::collection::vec((0usize..4, 0usize..4, -2i64..=2), 0..6)) {
        // products of elementary matrices are unimodular
        let n = t.height();
        let mut m = GradedMap::identity(n);
        for (i, j, k) in seed {
            if i % n == j % n {
                continue;
            }
            let mut rows: Vec<Vec<i64>> = (0..n).map(|r| (0..n).map(|c| i64::from(r == c)).collect()).collect();
            rows[i % n][j % n] = k;
            m = m.compose(&GradedMap::from_matrix(&rows).unwrap()).unwrap();
        }
        let inv = m.inverse().unwrap();
        prop_assert_eq!(m.compose(&inv).unwrap(), GradedMap::identity(n));
        prop_assert_eq!(is_ring_iso(&t, &t, &GradedMap::identity(n)).unwrap(), true);
    }

    #[test]
    fn predicted_automorphisms_are_realized(d in bundle(2)) {
        for ext in predicted_automorphism_set(&d).unwrap() {
            let cert = realize_automorphism(&d, &ext).unwrap();
            prop_assert!(cert.verify().is_ok());
        }
    }

    #[test]
    fn bundle_json_roundtrip(d in bundle(3)) {
        let s = serde_json::to_string(&d).unwrap();
        let back: HirzebruchBundleData = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn element_json_roundtrip((_t, a, _b, _c) in tower_and_elements()) {
        let s = serde_json::to_string(&a).unwrap();
        let back: RingElement = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, a);
    }
}
