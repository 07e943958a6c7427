//! Detection of the Alabama, New States and multiple-solution paradoxes.

use serde::Serialize;

use crate::engine::{
    apportion_at_divisor, apportion_for_house_size, breakpoints, Evaluator, HouseSizeSolution,
    MethodSpec,
};
use crate::error::Result;
use crate::model::{
    compute_quotas, partition_families, Apportionment, StateProfile, StateSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParadoxKind {
    Alabama,
    NewStates,
    MultipleSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Witness {
    /// Seats were lost going from divisor `from` down to divisor `to`; the
    /// drop happens inside `(drop_lo, drop_hi)`.
    DivisorDecrease {
        from: f64,
        to: f64,
        drop_lo: f64,
        drop_hi: f64,
    },
    AddedState {
        name: String,
        population: f64,
        divisor: f64,
    },
    /// Both apportionments total `total` seats.
    SharedTotal { total: u64, divisors: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AffectedState {
    pub name: String,
    pub before: u64,
    pub after: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParadoxReport {
    pub kind: ParadoxKind,
    pub witness: Witness,
    pub before: Apportionment,
    pub after: Apportionment,
    pub affected_states: Vec<AffectedState>,
}

fn losers(before: &Apportionment, after: &Apportionment) -> Vec<AffectedState> {
    before
        .states
        .iter()
        .zip(&after.states)
        .filter(|(b, a)| a.seats < b.seats)
        .map(|(b, a)| AffectedState {
            name: b.name.clone(),
            before: b.seats,
            after: a.seats,
        })
        .collect()
}

/// Walks every breakpoint from `d_hi` down to `d_lo` and reports each seat
/// loss. An empty result certifies that no state loses a seat as the divisor
/// decreases anywhere in the range.
///
/// For a state whose count steps down, `before` is taken at the largest
/// divisor of the run preceding the drop and `after` at the smallest divisor
/// of the run following it. Reports are ordered by divisor, descending.
pub fn scan_alabama(
    states: &StateSet,
    method: &MethodSpec,
    d_lo: f64,
    d_hi: f64,
) -> Result<Vec<ParadoxReport>> {
    let bps = breakpoints(states, method, d_lo, d_hi)?;
    let mut edges = vec![d_hi];
    edges.extend(bps.iter().rev().copied().filter(|&d| d > d_lo && d < d_hi));
    edges.push(d_lo);

    let mut points = vec![d_hi];
    for w in edges.windows(2) {
        if w[0] > w[1] {
            points.push(w[1] + 0.5 * (w[0] - w[1]));
        }
    }
    points.push(d_lo);

    let eval = Evaluator::new(states, method);
    let seats: Vec<Vec<u64>> = points.iter().map(|&d| eval.seats(d)).collect();

    let mut found: Vec<(usize, usize, usize)> = Vec::new();
    for c in 0..states.len() {
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for k in 0..points.len() {
            match runs.last_mut() {
                Some(run) if seats[run.0][c] == seats[k][c] => run.1 = k,
                _ => runs.push((k, k)),
            }
        }
        for w in runs.windows(2) {
            let (prev, next) = (w[0], w[1]);
            if seats[next.0][c] < seats[prev.0][c] {
                let key = (prev.0, next.1, prev.1);
                if !found.contains(&key) {
                    found.push(key);
                }
            }
        }
    }
    found.sort_by_key(|&(_, _, drop)| drop);

    found
        .into_iter()
        .map(|(b, a, drop)| {
            let before = apportion_at_divisor(states, points[b], method)?;
            let after = apportion_at_divisor(states, points[a], method)?;
            let affected_states = losers(&before, &after);
            Ok(ParadoxReport {
                kind: ParadoxKind::Alabama,
                witness: Witness::DivisorDecrease {
                    from: points[b],
                    to: points[a],
                    drop_lo: points[drop + 1],
                    drop_hi: points[drop],
                },
                before,
                after,
                affected_states,
            })
        })
        .collect()
}

/// Adds `new_state` at a fixed divisor and reports incumbents whose seat
/// counts changed.
pub fn check_new_states(
    states: &StateSet,
    method: &MethodSpec,
    divisor: f64,
    new_state: StateProfile,
) -> Result<Option<ParadoxReport>> {
    let grown = states.with_state(new_state.clone())?;
    let before = apportion_at_divisor(states, divisor, method)?;
    let after = apportion_at_divisor(&grown, divisor, method)?;
    let affected_states: Vec<AffectedState> = before
        .states
        .iter()
        .zip(&after.states)
        .filter(|(b, a)| a.seats != b.seats)
        .map(|(b, a)| AffectedState {
            name: b.name.clone(),
            before: b.seats,
            after: a.seats,
        })
        .collect();
    if affected_states.is_empty() {
        return Ok(None);
    }
    Ok(Some(ParadoxReport {
        kind: ParadoxKind::NewStates,
        witness: Witness::AddedState {
            name: new_state.name,
            population: new_state.population,
            divisor,
        },
        before,
        after,
        affected_states,
    }))
}

/// Every distinct apportionment with `target` seats; more than one is the
/// multiple-solution paradox.
pub fn find_multiple_solutions(
    states: &StateSet,
    method: &MethodSpec,
    target: u64,
) -> Result<Vec<HouseSizeSolution>> {
    apportion_for_house_size(states, target, method)
}

/// Pairs the first solution with the second as a report, when there are two or more.
pub fn multiple_solution_report(solutions: &[HouseSizeSolution]) -> Option<ParadoxReport> {
    let [first, second, ..] = solutions else {
        return None;
    };
    let before = first.apportionment.clone();
    let after = second.apportionment.clone();
    let affected_states = before
        .states
        .iter()
        .zip(&after.states)
        .filter(|(b, a)| a.seats != b.seats)
        .map(|(b, a)| AffectedState {
            name: b.name.clone(),
            before: b.seats,
            after: a.seats,
        })
        .collect();
    Some(ParadoxReport {
        kind: ParadoxKind::MultipleSolution,
        witness: Witness::SharedTotal {
            total: before.total,
            divisors: solutions.iter().map(|s| s.apportionment.divisor).collect(),
        },
        before,
        after,
        affected_states,
    })
}

/// Webster rounding of families grouped by the integer part of their
/// quotas, then of the states inside each family.
fn family_of_families(states: &StateSet, divisor: f64) -> Result<Apportionment> {
    let quotas = compute_quotas(states, divisor)?;
    let partition = partition_families(&quotas);
    let mut groups: Vec<(u64, Vec<u64>)> = Vec::new();
    for fam in partition.iter() {
        let g = fam.quota.floor() as u64;
        match groups.iter_mut().find(|(k, _)| *k == g) {
            Some((_, v)) => v.push(fam.index),
            None => groups.push((g, vec![fam.index])),
        }
    }
    let mut seats = vec![0u64; quotas.entries.len()];
    for (g, mut fams) in groups {
        fams.sort_by(|a, b| {
            let (qa, qb) = (partition.get(*a).unwrap().quota, partition.get(*b).unwrap().quota);
            qa.total_cmp(&qb).then(a.cmp(b))
        });
        let n = fams.len() as u64;
        let total: f64 = fams.iter().map(|f| partition.get(*f).unwrap().quota).sum();
        let s = (total.floor() as u64 + u64::from(total - total.floor() >= 0.5)).clamp(g * n, (g + 1) * n);
        let lower = ((g + 1) * n - s) as usize;
        for (k, f) in fams.iter().enumerate() {
            let fam = partition.get(*f).unwrap();
            let fam_seats = if k < lower { g } else { g + 1 };
            let m = fam.count() as u64;
            let fam_seats = fam_seats.clamp(fam.index * m, (fam.index + 1) * m);
            let low = ((fam.index + 1) * m - fam_seats) as usize;
            for (j, &i) in fam.members.iter().enumerate() {
                seats[i] = if j < low { fam.index } else { fam.index + 1 };
            }
        }
    }
    Ok(Apportionment::from_seats(&quotas, &partition, seats))
}

/// Grouping families into families of families is not Alabama-immune:
/// quotas {0.99999, 1.7, 2.6} get (1, 2, 3) at `D = 1` but (1, 2, 2) at the
/// smaller divisor 0.99999.
pub fn family_of_families_fixture() -> ParadoxReport {
    let states = StateSet::from_populations(&[0.99999, 1.7, 2.6]).expect("fixture populations");
    let (d_before, d_after) = (1.0, 0.99999);
    let before = family_of_families(&states, d_before).expect("fixture divisor");
    let after = family_of_families(&states, d_after).expect("fixture divisor");
    let affected_states = losers(&before, &after);
    ParadoxReport {
        kind: ParadoxKind::Alabama,
        witness: Witness::DivisorDecrease {
            from: d_before,
            to: d_after,
            drop_lo: d_after,
            drop_hi: d_before,
        },
        before,
        after,
        affected_states,
    }
}
