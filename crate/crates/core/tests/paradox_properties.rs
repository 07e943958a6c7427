use proptest::prelude::*;
use seatcalc::{
    apportion_at_divisor, find_multiple_solutions, scan_alabama, Error, MethodSpec, SignpostRule,
    StateSet, Witness,
};

fn log_uniform_pops(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..4.0, 1..=max_len)
        .prop_map(|xs| xs.into_iter().map(|x| 10f64.powf(x)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn webster_by_family_never_shows_alabama_or_multiple_solutions(
        pops in log_uniform_pops(20),
        extra in 0u64..40,
    ) {
        let s = StateSet::from_populations(&pops).unwrap();
        let m = MethodSpec::by_family(SignpostRule::Webster);
        let total = s.total_population();
        let reps = scan_alabama(&s, &m, total / (pops.len() as f64 + 60.0), 2.0 * total).unwrap();
        prop_assert!(reps.is_empty());
        match find_multiple_solutions(&s, &m, pops.len() as u64 + extra) {
            Ok(sols) => prop_assert_eq!(sols.len(), 1),
            Err(Error::NoExactSolution { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divisor_methods_by_state_are_alabama_immune(
        pops in prop::collection::vec(0.0f64..4.0, 20).prop_map(|xs| xs.into_iter().map(|x| 10f64.powf(x)).collect::<Vec<_>>()),
        beta in -5.0f64..5.0,
    ) {
        let s = StateSet::from_populations(&pops).unwrap();
        let total = s.total_population();
        for rule in [SignpostRule::HuntingtonHill, SignpostRule::Webster, SignpostRule::Adams, SignpostRule::PowerLaw(beta)] {
            let reps = scan_alabama(&s, &MethodSpec::by_state(rule), total / 200.0, total).unwrap();
            prop_assert!(reps.is_empty());
        }
    }

    #[test]
    fn hill_family_reports_replay(pops in log_uniform_pops(8)) {
        let s = StateSet::from_populations(&pops).unwrap();
        let m = MethodSpec::by_family(SignpostRule::HuntingtonHill);
        let total = s.total_population();
        for rep in scan_alabama(&s, &m, total / 60.0, total).unwrap() {
            let Witness::DivisorDecrease { from, to, .. } = rep.witness else {
                panic!("wrong witness");
            };
            prop_assert!(to < from);
            prop_assert_eq!(apportion_at_divisor(&s, from, &m).unwrap(), rep.before.clone());
            prop_assert_eq!(apportion_at_divisor(&s, to, &m).unwrap(), rep.after.clone());
            prop_assert!(!rep.affected_states.is_empty());
            for a in &rep.affected_states {
                prop_assert!(a.after < a.before);
            }
        }
    }
}
