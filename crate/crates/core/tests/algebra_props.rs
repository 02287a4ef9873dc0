use cartan_core::algebra::{bracket, exp_flow, group_inv, group_mul, left_invariant_frame, AlgebraVector, GroupElement};
use proptest::prelude::*;

fn coords() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-1.0..1.0f64)
}

fn element() -> impl Strategy<Value = GroupElement> {
    coords().prop_map(GroupElement::from_array)
}

fn vector() -> impl Strategy<Value = AlgebraVector> {
    coords().prop_map(AlgebraVector::from_array)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn associativity(a in element(), b in element(), c in element()) {
        let l = group_mul(group_mul(a, b), c);
        let r = group_mul(a, group_mul(b, c));
        prop_assert!(l.max_abs_diff(&r) <= 1e-12);
    }

    #[test]
    fn inverse_is_negation(a in element()) {
        prop_assert!(group_mul(a, group_inv(a)).max_abs_diff(&GroupElement::IDENTITY) <= 1e-12);
        prop_assert!(group_mul(group_inv(a), a).max_abs_diff(&GroupElement::IDENTITY) <= 1e-12);
    }

    #[test]
    fn jacobi(a in vector(), b in vector(), c in vector()) {
        let s = bracket(a, bracket(b, c)).add(bracket(b, bracket(c, a))).add(bracket(c, bracket(a, b)));
        prop_assert!(s.max_abs_diff(&AlgebraVector::default()) <= 1e-14);
    }

    #[test]
    fn step_three(a in vector(), b in vector(), c in vector(), d in vector()) {
        prop_assert_eq!(bracket(bracket(bracket(a, b), c), d), AlgebraVector::default());
        prop_assert_eq!(bracket(bracket(a, b), bracket(c, d)), AlgebraVector::default());
    }

    #[test]
    fn frame_is_left_invariant(g in element(), i in 0usize..5) {
        // Central difference of t ↦ g·exp(t e_i) at t = 0.
        let h = 1e-6;
        let mut e = [0.0; 5];
        e[i] = h;
        let plus = group_mul(g, GroupElement::from_array(e)).to_array();
        let minus = group_mul(g, GroupElement::from_array(e.map(|c| -c))).to_array();
        let frame = left_invariant_frame(g);
        for j in 0..5 {
            prop_assert!(((plus[j] - minus[j]) / (2.0 * h) - frame[i][j]).abs() <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exp_flow_matches_product(g in element(), a in vector()) {
        let f = exp_flow(g, a, 1.0, 1e-12).unwrap();
        prop_assert!(f.max_abs_diff(&group_mul(g, GroupElement::exp(a))) <= 1e-8);
    }
}
