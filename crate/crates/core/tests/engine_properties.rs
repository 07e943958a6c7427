use proptest::prelude::*;
use seatcalc::{
    apportion_at_divisor, apportion_for_house_size, breakpoints, Error, MethodSpec, Mode,
    SignpostRule, StateProfile, StateSet,
};

fn states_from(pops: &[f64]) -> StateSet {
    StateSet::from_populations(pops).unwrap()
}

fn log_uniform_pops(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..4.0, 1..=max_len)
        .prop_map(|xs| xs.into_iter().map(|x| 10f64.powf(x)).collect())
}

const SIGNPOSTS: [SignpostRule; 6] = [
    SignpostRule::Adams,
    SignpostRule::Dean,
    SignpostRule::HuntingtonHill,
    SignpostRule::Webster,
    SignpostRule::Jefferson,
    SignpostRule::PowerLaw(0.0),
];

/// Independent Webster-by-family evaluator: round half up, smallest members
/// take the lower seat count.
fn oracle_webster_family(pops: &[f64], d: f64) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..pops.len()).collect();
    idx.sort_by(|&a, &b| pops[a].total_cmp(&pops[b]).then(a.cmp(&b)));
    let mut seats = vec![0; pops.len()];
    let fam = |v: f64| (v / d).floor() as u64;
    let mut families: Vec<(u64, Vec<usize>)> = Vec::new();
    for i in idx {
        match families.last_mut() {
            Some((f, m)) if *f == fam(pops[i]) => m.push(i),
            _ => families.push((fam(pops[i]), vec![i])),
        }
    }
    for (f, members) in families {
        let q: f64 = members.iter().map(|&i| pops[i] / d).sum();
        let s = (q + 0.5).floor() as u64;
        let n = members.len() as u64;
        let s = s.clamp(f * n, (f + 1) * n);
        let low = ((f + 1) * n - s) as usize;
        for (k, &i) in members.iter().enumerate() {
            seats[i] = if k < low { f } else { f + 1 };
        }
    }
    seats
}

/// Every seat vector totalling `target` at some divisor, from all candidate
/// divisors where a state or a subset of states can change rounding.
fn oracle_house_size(pops: &[f64], target: u64) -> Vec<Vec<u64>> {
    let n = pops.len();
    let kmax = target + n as u64 + 2;
    let mut cands = Vec::new();
    for &v in pops {
        for k in 1..=kmax {
            cands.push(v / k as f64);
        }
    }
    for mask in 1u32..(1 << n) {
        let total: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pops[i]).sum();
        for m in 0..=kmax {
            cands.push(total / (m as f64 + 0.5));
        }
    }
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut probes: Vec<f64> = cands.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    probes.push(2.0 * cands.last().unwrap());
    let mut out: Vec<Vec<u64>> = Vec::new();
    for d in probes {
        let s = oracle_webster_family(pops, d);
        if s.iter().sum::<u64>() == target && !out.contains(&s) {
            out.push(s);
        }
    }
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn family_split_conservation_and_bounds(pops in log_uniform_pops(20), d in 1.0f64..500.0) {
        let s = states_from(&pops);
        let app = apportion_at_divisor(&s, d, &MethodSpec::by_family(SignpostRule::Webster)).unwrap();
        for fam in &app.families {
            let split = app.split(fam.index).unwrap();
            prop_assert_eq!(split.lower + split.upper, fam.members as u64);
            prop_assert_eq!(split.lower * fam.index + split.upper * (fam.index + 1), fam.seats);
            prop_assert!((fam.seats as f64 - fam.quota).abs() < 1.0);
        }
    }

    #[test]
    fn larger_states_never_get_fewer_seats(pops in log_uniform_pops(20), d in 1.0f64..500.0, r in 0usize..6, family_mode: bool) {
        let s = states_from(&pops);
        let mode = if family_mode { Mode::ByFamily } else { Mode::ByState };
        let m = MethodSpec::new(seatcalc::Rounding::Signpost(SIGNPOSTS[r]), mode);
        let app = apportion_at_divisor(&s, d, &m).unwrap();
        for a in &app.states {
            for b in &app.states {
                if a.population > b.population {
                    prop_assert!(a.seats >= b.seats);
                }
            }
        }
    }

    #[test]
    fn power_law_rules_are_homogeneous(pops in log_uniform_pops(20), d in 1.0f64..500.0, beta in -4.0f64..4.0, family_mode: bool) {
        let mode = if family_mode { Mode::ByFamily } else { Mode::ByState };
        let m = MethodSpec::new(seatcalc::Rounding::Signpost(SignpostRule::PowerLaw(beta)), mode);
        let base = apportion_at_divisor(&states_from(&pops), d, &m).unwrap().seats();
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = pops.iter().map(|v| v * lambda).collect();
            let got = apportion_at_divisor(&states_from(&scaled), d * lambda, &m).unwrap().seats();
            prop_assert_eq!(&got, &base);
        }
    }

    #[test]
    fn seats_never_fall_as_divisor_falls(pops in log_uniform_pops(12), r in 0usize..6, family_webster: bool) {
        let s = states_from(&pops);
        let m = if family_webster {
            MethodSpec::by_family(SignpostRule::Webster)
        } else {
            MethodSpec::by_state(SIGNPOSTS[r])
        };
        let total = s.total_population();
        let (lo, hi) = (total / 80.0, 2.0 * total);
        let bps = breakpoints(&s, &m, lo, hi).unwrap();
        let mut edges = vec![lo];
        edges.extend(bps.iter().copied().filter(|&d| d > lo && d < hi));
        edges.push(hi);
        let mut prev: Option<Vec<u64>> = None;
        for w in edges.windows(2).rev() {
            let seats = apportion_at_divisor(&s, 0.5 * (w[0] + w[1]), &m).unwrap().seats();
            if let Some(p) = &prev {
                prop_assert!(seats.iter().zip(p).all(|(a, b)| a >= b));
            }
            prev = Some(seats);
        }
    }

    #[test]
    fn apportionment_is_constant_between_breakpoints(
        pops in log_uniform_pops(8),
        fracs in prop::collection::vec(0.01f64..0.99, 3),
        r in 0usize..6,
        family_mode: bool,
    ) {
        let s = states_from(&pops);
        let mode = if family_mode { Mode::ByFamily } else { Mode::ByState };
        let m = MethodSpec::new(seatcalc::Rounding::Signpost(SIGNPOSTS[r]), mode);
        let total = s.total_population();
        let (lo, hi) = (total / 40.0, total);
        let bps = breakpoints(&s, &m, lo, hi).unwrap();
        let mut edges = vec![lo];
        edges.extend(bps.iter().copied().filter(|&d| d > lo && d < hi));
        edges.push(hi);
        for w in edges.windows(2) {
            let mid = apportion_at_divisor(&s, 0.5 * (w[0] + w[1]), &m).unwrap().seats();
            for &t in &fracs {
                let d = w[0] + t * (w[1] - w[0]);
                if d > w[0] && d < w[1] {
                    prop_assert_eq!(&apportion_at_divisor(&s, d, &m).unwrap().seats(), &mid);
                }
            }
        }
    }

    #[test]
    fn family_equals_state_for_singleton_families(
        fams in prop::collection::btree_set(0u64..60, 1..12),
        fracs in prop::collection::vec(0.0f64..1.0, 12),
        r in 0usize..6,
    ) {
        let pops: Vec<f64> = fams.iter().zip(&fracs).map(|(&f, &x)| f as f64 + 0.02 + 0.96 * x).collect();
        let s = states_from(&pops);
        let a = apportion_at_divisor(&s, 1.0, &MethodSpec::by_family(SIGNPOSTS[r])).unwrap();
        let b = apportion_at_divisor(&s, 1.0, &MethodSpec::by_state(SIGNPOSTS[r])).unwrap();
        prop_assert_eq!(a.seats(), b.seats());
    }

    #[test]
    fn webster_family_house_size_matches_brute_force(
        pops in prop::collection::vec(1.0f64..100.0, 1..=6),
        target in 1u64..=30,
    ) {
        let s = states_from(&pops);
        let want = oracle_house_size(&pops, target);
        match apportion_for_house_size(&s, target, &MethodSpec::by_family(SignpostRule::Webster)) {
            Ok(sols) => {
                let mut got: Vec<Vec<u64>> = sols.iter().map(|x| x.apportionment.seats()).collect();
                got.sort();
                prop_assert_eq!(got, want);
            }
            Err(Error::NoExactSolution { .. }) => prop_assert!(want.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn hamilton_minimizes_squared_deviation(
        pops in prop::collection::vec(1u32..50, 1..=5),
        target in 1u64..=12,
    ) {
        let pops: Vec<f64> = pops.into_iter().map(f64::from).collect();
        let s = states_from(&pops);
        let got = apportion_for_house_size(&s, target, &MethodSpec::hamilton(Mode::ByState)).unwrap();
        prop_assert_eq!(got.len(), 1);
        let got = got[0].apportionment.seats();

        let total: f64 = pops.iter().sum();
        let q: Vec<f64> = pops.iter().map(|v| v * target as f64 / total).collect();
        let cost = |x: &[u64]| x.iter().zip(&q).map(|(&s, q)| (s as f64 - q).powi(2)).sum::<f64>();
        // Priority order: larger population first, then name.
        let mut pri: Vec<usize> = (0..pops.len()).collect();
        pri.sort_by(|&a, &b| pops[b].total_cmp(&pops[a]).then(format!("S{}", a + 1).cmp(&format!("S{}", b + 1))));
        let key = |x: &[u64]| pri.iter().map(|&i| x[i]).collect::<Vec<u64>>();
        let mut best: Option<(f64, Vec<u64>)> = None;
        let n = pops.len();
        let mut cur = vec![0u64; n];
        fn rec(i: usize, left: u64, cur: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
            if i + 1 == cur.len() {
                cur[i] = left;
                visit(cur);
                return;
            }
            for s in 0..=left {
                cur[i] = s;
                rec(i + 1, left - s, cur, visit);
            }
        }
        rec(0, target, &mut cur, &mut |x: &[u64]| {
            let c = cost(x);
            let better = match &best {
                None => true,
                Some((bc, bx)) => c < bc - 1e-9 || ((c - bc).abs() <= 1e-9 && key(x) > key(bx)),
            };
            if better {
                best = Some((c, x.to_vec()));
            }
        });
        prop_assert_eq!(got, best.unwrap().1);
    }
}

#[test]
fn family_quota_11_883_splits_evenly() {
    let pops = [1.024, 1.166, 1.302, 1.426, 1.443, 1.791, 1.812, 1.918];
    let states = StateSet::new(
        pops.iter()
            .enumerate()
            .map(|(i, &v)| StateProfile::new(format!("s{i}"), v).unwrap())
            .collect(),
    )
    .unwrap();
    let app = apportion_at_divisor(&states, 1.0, &MethodSpec::by_family(SignpostRule::Webster)).unwrap();
    let split = app.split(1).unwrap();
    assert_eq!(app.family_seats(1), Some(12));
    assert_eq!((split.lower, split.upper), (4, 4));
    assert_eq!(app.seats(), vec![1, 1, 1, 1, 2, 2, 2, 2]);
}
