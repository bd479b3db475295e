use proptest::prelude::*;

use locsym::density::{bound_lower, exact_alpha, ConstraintSet};
use locsym::rescale::{pack, rescale_rule, shift, unpack, RescaleParams};
use locsym::{
    evolve, family_key, is_member, parse_rule, sample_rule, serialize_rule, step, FamilySpec,
    PConfig, Rule, State,
};

fn small_rule() -> impl Strategy<Value = Rule> {
    (2usize..=3, 1usize..=3, any::<u64>())
        .prop_map(|(n, k, seed)| sample_rule(&FamilySpec::ALL, n, k, seed).unwrap())
}

fn config(n: usize) -> impl Strategy<Value = PConfig> {
    prop::collection::vec(0..n as State, 1..8).prop_map(|w| PConfig::new(w).unwrap())
}

proptest! {
    #[test]
    fn rule_text_round_trips(rule in small_rule()) {
        let back = parse_rule(&serialize_rule(&rule).unwrap()).unwrap();
        prop_assert!(back.same_function(&rule, 1 << 16).unwrap());
    }

    #[test]
    fn pack_unpack_round_trips(c in config(3), m in 1usize..4) {
        let packed = pack(&c, 3, m).unwrap();
        prop_assert!(unpack(&packed, 3, m).unwrap().same_configuration(&c));
    }

    #[test]
    fn shifts_compose(c in config(2), a in -5i64..5, b in -5i64..5) {
        prop_assert!(shift(&shift(&c, a), b).same_configuration(&shift(&c, a + b)));
    }

    #[test]
    fn step_commutes_with_shift(rule in small_rule(), w in prop::collection::vec(0u32..2, 1..8), z in -3i64..3) {
        let c = PConfig::new(w).unwrap();
        let lhs = step(&rule, &shift(&c, z)).unwrap();
        let rhs = shift(&step(&rule, &c).unwrap(), z);
        prop_assert!(lhs.same_configuration(&rhs));
    }

    #[test]
    fn rescaling_by_time_matches_iteration(rule in small_rule(), w in prop::collection::vec(0u32..2, 1..6)) {
        let c = PConfig::new(w).unwrap();
        let twice = rescale_rule(&rule, RescaleParams::new(1, 2, 0).unwrap()).unwrap();
        let trace = evolve(&rule, &c, 2).unwrap();
        prop_assert!(step(&twice, &c).unwrap().same_configuration(&trace.rows[2]));
    }

    #[test]
    fn sampled_members_belong(seed in any::<u64>(), spec in prop::sample::select(vec!["ms", "set", "tot", "k", "kms", "kset", "oms:1"])) {
        let spec: FamilySpec = spec.parse().unwrap();
        let rule = sample_rule(&spec, 3, 2, seed).unwrap();
        prop_assert!(is_member(&rule, &spec).unwrap());
    }

    #[test]
    fn multiset_rules_are_outer_multiset(seed in any::<u64>(), kp in 0usize..=3) {
        let rule = sample_rule(&FamilySpec::MS, 2, 3, seed).unwrap();
        prop_assert!(is_member(&rule, &FamilySpec::outer(locsym::Symmetry::Ms, kp)).unwrap());
    }

    #[test]
    fn alpha_is_inverse_product_of_choices(tuples in prop::collection::btree_set(prop::collection::vec(0u32..3, 2), 1..5)) {
        let pairs: Vec<(Vec<State>, State)> = tuples.iter().map(|u| (u.clone(), u[0])).collect();
        let keys: std::collections::BTreeSet<_> = tuples.iter().map(|u| family_key(&FamilySpec::ALL, u).unwrap()).collect();
        let cs = ConstraintSet::custom(FamilySpec::ALL, 3, 2, &pairs).unwrap();
        let alpha = exact_alpha(&cs).unwrap();
        let expected = num_rational::BigRational::new(1.into(), num_bigint::BigInt::from(3u32).pow(keys.len() as u32));
        prop_assert_eq!(alpha, expected);
    }

    #[test]
    fn bound_is_a_probability_and_grows(alphas in prop::collection::vec(0.0f64..1.0, 0..10), extra in 0.0f64..1.0) {
        let b = bound_lower(&alphas);
        prop_assert!((0.0..=1.0).contains(&b));
        let mut more = alphas.clone();
        more.push(extra);
        prop_assert!(bound_lower(&more) >= b - 1e-15);
    }
}

#[test]
fn xor_is_not_captive() {
    assert!(!is_member(&Rule::xor(), &FamilySpec::K).unwrap());
}
