//! Apportionment at a fixed divisor or for a target house size.
//!
//! In state mode every quota is rounded against its own mark. In family mode
//! the family quota `Q_f` is rounded against the mark of `floor(Q_f)`, and the
//! resulting `S_f` seats are split so the `M_f = (f + 1) N - S_f` smallest
//! members get `f` seats and the rest get `f + 1`.

use std::cmp::Ordering;

use serde::Serialize;

use crate::distributions::{DistributionMarks, DivisorMarks};
use crate::error::{Error, Result};
use crate::model::{
    check_divisor, compute_quotas, partition_families, population_order, Apportionment, StateSet,
};
use crate::numeric::bisect;
use crate::signpost::SignpostRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Rounding {
    Signpost(SignpostRule),
    Unbiased(DistributionMarks),
    Hamilton,
}

impl Rounding {
    /// Mark for family `f` at divisor `d`; `None` for Hamilton.
    pub fn mark(&self, f: u64, d: f64) -> Option<f64> {
        match self {
            Rounding::Signpost(rule) => Some(rule.mark(f)),
            Rounding::Unbiased(m) => Some(m.mark_at(f, d)),
            Rounding::Hamilton => None,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        match self {
            Rounding::Signpost(_) => true,
            Rounding::Unbiased(m) => m.is_homogeneous(),
            Rounding::Hamilton => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    ByState,
    ByFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodSpec {
    pub rounding: Rounding,
    pub mode: Mode,
    pub min_seat_floor: Option<u64>,
}

impl MethodSpec {
    pub fn new(rounding: Rounding, mode: Mode) -> Self {
        Self {
            rounding,
            mode,
            min_seat_floor: None,
        }
    }

    pub fn by_state(rule: SignpostRule) -> Self {
        Self::new(Rounding::Signpost(rule), Mode::ByState)
    }

    pub fn by_family(rule: SignpostRule) -> Self {
        Self::new(Rounding::Signpost(rule), Mode::ByFamily)
    }

    pub fn hamilton(mode: Mode) -> Self {
        Self::new(Rounding::Hamilton, mode)
    }

    pub fn with_floor(mut self, floor: u64) -> Self {
        self.min_seat_floor = Some(floor);
        self
    }

    fn floor(&self) -> u64 {
        self.min_seat_floor.unwrap_or(0)
    }

    /// True when every state is guaranteed a seat by the rounding alone.
    fn forces_one_seat(&self) -> bool {
        self.mode == Mode::ByState
            && self.rounding.is_homogeneous()
            && self.rounding.mark(0, 1.0) == Some(0.0)
    }
}

/// Seat vectors at a given divisor without building full reports.
pub(crate) struct Evaluator<'a> {
    pops: Vec<f64>,
    /// State indices by population ascending, then name.
    order: Vec<usize>,
    method: &'a MethodSpec,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(states: &StateSet, method: &'a MethodSpec) -> Self {
        let list = states.states();
        let mut order: Vec<usize> = (0..list.len()).collect();
        order.sort_by(|&a, &b| population_order(&list[a], &list[b]));
        Self {
            pops: list.iter().map(|s| s.population).collect(),
            order,
            method,
        }
    }

    fn mark(&self, f: u64, d: f64) -> f64 {
        self.method.rounding.mark(f, d).unwrap_or(f as f64 + 0.5)
    }

    pub(crate) fn seats(&self, d: f64) -> Vec<u64> {
        let mut seats = vec![0u64; self.pops.len()];
        match self.method.mode {
            Mode::ByState => {
                for (s, &v) in seats.iter_mut().zip(&self.pops) {
                    let q = v / d;
                    let f = q.floor();
                    *s = f as u64 + u64::from(rounds_up(q, f, self.mark(f as u64, d)));
                }
            }
            Mode::ByFamily => {
                // Ordered populations put each family in one contiguous run.
                let mut i = 0;
                while i < self.order.len() {
                    let f = (self.pops[self.order[i]] / d).floor() as u64;
                    let mut j = i;
                    let mut family_quota = 0.0;
                    while j < self.order.len() && (self.pops[self.order[j]] / d).floor() as u64 == f {
                        family_quota += self.pops[self.order[j]] / d;
                        j += 1;
                    }
                    let n = (j - i) as u64;
                    let g = family_quota.floor();
                    let s = g as u64 + u64::from(rounds_up(family_quota, g, self.mark(g as u64, d)));
                    let s = s.clamp(f * n, (f + 1) * n);
                    let lower = ((f + 1) * n - s) as usize;
                    for (k, &idx) in self.order[i..j].iter().enumerate() {
                        seats[idx] = if k < lower { f } else { f + 1 };
                    }
                    i = j;
                }
            }
        }
        let floor = self.method.floor();
        if floor > 0 {
            for s in seats.iter_mut() {
                *s = (*s).max(floor);
            }
        }
        seats
    }
}

/// `x` at or above the mark rounds up, except that a mark sitting on the
/// integer itself leaves an exact integer unrounded.
fn rounds_up(x: f64, floor: f64, mark: f64) -> bool {
    x > mark || (x == mark && mark > floor)
}

fn build(states: &StateSet, divisor: f64, seats: Vec<u64>) -> Result<Apportionment> {
    let quotas = compute_quotas(states, divisor)?;
    let partition = partition_families(&quotas);
    Ok(Apportionment::from_seats(&quotas, &partition, seats))
}

pub fn apportion_at_divisor(
    states: &StateSet,
    divisor: f64,
    method: &MethodSpec,
) -> Result<Apportionment> {
    if method.rounding == Rounding::Hamilton {
        return Err(Error::HamiltonNeedsHouseSize);
    }
    check_divisor(divisor)?;
    let seats = Evaluator::new(states, method).seats(divisor);
    build(states, divisor, seats)
}

fn check_range(d_lo: f64, d_hi: f64) -> Result<()> {
    if d_lo.is_finite() && d_hi.is_finite() && d_lo > 0.0 && d_lo < d_hi {
        Ok(())
    } else {
        Err(Error::InvalidRange { lo: d_lo, hi: d_hi })
    }
}

/// Largest number of integer crossings examined by one breakpoint search.
const MAX_CROSSINGS: u64 = 50_000_000;

/// Divisor in `[a, b]` at which the quota `v / D` of something in family `g`
/// meets the mark `r(g, D)`.
fn mark_crossing(rounding: &Rounding, v: f64, g: u64, a: f64, b: f64) -> Option<f64> {
    if rounding.is_homogeneous() {
        let r = rounding.mark(g, 1.0)?;
        if r <= 0.0 {
            return None;
        }
        let d = v / r;
        return (d >= a && d <= b).then_some(d);
    }
    let lo = a.max(v / (g + 1) as f64);
    let hi = if g == 0 { b } else { b.min(v / g as f64) };
    if lo > hi {
        return None;
    }
    let h = |d: f64| v - rounding.mark(g, d).unwrap_or(g as f64 + 0.5) * d;
    let (h_lo, h_hi) = (h(lo), h(hi));
    if h_lo < 0.0 || h_hi > 0.0 {
        return None;
    }
    if h_hi == 0.0 {
        return Some(hi);
    }
    Some(bisect(h, lo, hi, 1e-15 * hi, 200))
}

/// Divisors `D = v / k` in `[a, b]` at which a population crosses into a new family.
fn boundary_crossings(pops: &[f64], a: f64, b: f64, out: &mut Vec<f64>) {
    for &v in pops {
        let k_lo = (v / b).ceil().max(1.0) as u64;
        let k_hi = (v / a).floor() as u64;
        for k in k_lo..=k_hi {
            let d = v / k as f64;
            if d >= a && d <= b {
                out.push(d);
            }
        }
    }
}

fn crossing_budget(pops: &[f64], a: f64, b: f64) -> Result<()> {
    let total: f64 = pops.iter().map(|&v| v / a - v / b + 1.0).sum();
    if total > MAX_CROSSINGS as f64 {
        return Err(Error::InvalidArgument(format!(
            "divisor range [{a}, {b}] spans too many quota crossings"
        )));
    }
    Ok(())
}

/// Every divisor in `[d_lo, d_hi]` at which some seat count can change,
/// ascending. The apportionment is constant between consecutive entries.
pub fn breakpoints(states: &StateSet, method: &MethodSpec, d_lo: f64, d_hi: f64) -> Result<Vec<f64>> {
    check_range(d_lo, d_hi)?;
    if method.rounding == Rounding::Hamilton {
        return Err(Error::HamiltonNeedsHouseSize);
    }
    let pops: Vec<f64> = states.states().iter().map(|s| s.population).collect();
    crossing_budget(&pops, d_lo, d_hi)?;
    let mut out = Vec::new();
    match method.mode {
        Mode::ByState => {
            for &v in &pops {
                let g_lo = (v / d_hi).floor() as u64;
                let g_hi = (v / d_lo).floor() as u64;
                for g in g_lo..=g_hi {
                    if let Some(d) = mark_crossing(&method.rounding, v, g, d_lo, d_hi) {
                        out.push(d);
                    }
                }
            }
        }
        Mode::ByFamily => {
            boundary_crossings(&pops, d_lo, d_hi, &mut out);
            sort_dedup(&mut out);
            let mut edges = Vec::with_capacity(out.len() + 2);
            edges.push(d_lo);
            edges.extend(out.iter().copied().filter(|&d| d > d_lo && d < d_hi));
            edges.push(d_hi);
            let mut sorted = pops.clone();
            sorted.sort_by(f64::total_cmp);
            for w in edges.windows(2) {
                let (a, b) = (w[0], w[1]);
                if a >= b {
                    continue;
                }
                let mid = a + 0.5 * (b - a);
                let mut i = 0;
                while i < sorted.len() {
                    let f = (sorted[i] / mid).floor();
                    let mut j = i;
                    let mut total = 0.0;
                    while j < sorted.len() && (sorted[j] / mid).floor() == f {
                        total += sorted[j];
                        j += 1;
                    }
                    let g_lo = (total / b).floor() as u64;
                    let g_hi = (total / a).floor() as u64;
                    for g in g_lo..=g_hi {
                        if let Some(d) = mark_crossing(&method.rounding, total, g, a, b) {
                            out.push(d);
                        }
                    }
                    i = j;
                }
            }
        }
    }
    sort_dedup(&mut out);
    Ok(out)
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// One distinct apportionment reachable for a target house size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HouseSizeSolution {
    pub apportionment: Apportionment,
    /// Divisor intervals yielding this apportionment, highest first. Ends
    /// are breakpoints, so the seat vector may differ exactly at an end.
    pub divisor_ranges: Vec<(f64, f64)>,
}

/// All distinct apportionments totalling `target`, ordered by divisor
/// descending. More than one entry is the multiple-solution paradox.
pub fn apportion_for_house_size(
    states: &StateSet,
    target: u64,
    method: &MethodSpec,
) -> Result<Vec<HouseSizeSolution>> {
    let n = states.len() as u64;
    if target == 0 {
        return Err(Error::InfeasibleTarget {
            target,
            reason: "house size must be at least 1".into(),
        });
    }
    let floor = method.floor();
    if floor > 0 && target < floor * n {
        return Err(Error::InfeasibleTarget {
            target,
            reason: format!("{n} states with a floor of {floor} need at least {} seats", floor * n),
        });
    }
    if method.forces_one_seat() && target < n {
        return Err(Error::InfeasibleTarget {
            target,
            reason: format!("the rule gives each of {n} states at least one seat"),
        });
    }
    if method.rounding == Rounding::Hamilton {
        let app = hamilton(states, target, method)?;
        let d = app.divisor;
        return Ok(vec![HouseSizeSolution {
            apportionment: app,
            divisor_ranges: vec![(d, d)],
        }]);
    }

    let v_total = states.total_population();
    let eval = Evaluator::new(states, method);
    let total_at = |d: f64| -> u64 { eval.seats(d).iter().sum() };
    let d_lo = v_total / (target + n + 1) as f64;
    let d_hi = if method.rounding.is_homogeneous() {
        let r0 = method.rounding.mark(0, 1.0).unwrap_or(0.5);
        if r0 > 0.0 {
            2.0 * v_total / r0
        } else {
            2.0 * v_total
        }
    } else {
        let mut d = 2.0 * v_total;
        for _ in 0..60 {
            if total_at(d) < target {
                break;
            }
            d *= 2.0;
        }
        d
    };

    let bps = breakpoints(states, method, d_lo, d_hi)?;
    let mut edges = Vec::with_capacity(bps.len() + 2);
    edges.push(d_lo);
    edges.extend(bps.into_iter().filter(|&d| d > d_lo && d < d_hi));
    edges.push(d_hi);

    let mut groups: Vec<(Vec<u64>, Vec<(f64, f64)>)> = Vec::new();
    let mut below: Option<u64> = None;
    let mut above: Option<u64> = None;
    for w in edges.windows(2).rev() {
        let (a, b) = (w[0], w[1]);
        if a >= b {
            continue;
        }
        let seats = eval.seats(a + 0.5 * (b - a));
        let total: u64 = seats.iter().sum();
        match total.cmp(&target) {
            Ordering::Less => below = Some(below.map_or(total, |x| x.max(total))),
            Ordering::Greater => above = Some(above.map_or(total, |x| x.min(total))),
            Ordering::Equal => match groups.iter_mut().find(|(s, _)| *s == seats) {
                Some((_, ranges)) => {
                    let last = ranges.last_mut().expect("group has a range");
                    if last.0 == b {
                        last.0 = a;
                    } else {
                        ranges.push((b, a));
                    }
                }
                None => groups.push((seats, vec![(b, a)])),
            },
        }
    }
    if groups.is_empty() {
        return Err(Error::NoExactSolution {
            target,
            below,
            above,
        });
    }
    let natural = v_total / target as f64;
    groups
        .into_iter()
        .map(|(seats, ranges)| {
            let ranges: Vec<(f64, f64)> = ranges.into_iter().map(|(hi, lo)| (lo, hi)).collect();
            let d = if ranges.iter().any(|&(lo, hi)| natural > lo && natural < hi) {
                natural
            } else {
                let (lo, hi) = ranges[0];
                lo + 0.5 * (hi - lo)
            };
            Ok(HouseSizeSolution {
                apportionment: build(states, d, seats)?,
                divisor_ranges: ranges,
            })
        })
        .collect()
}

/// Largest-remainder allocation of `target` seats at `D = v_T / target`.
fn hamilton(states: &StateSet, target: u64, method: &MethodSpec) -> Result<Apportionment> {
    let d = states.total_population() / target as f64;
    let quotas = compute_quotas(states, d)?;
    let partition = partition_families(&quotas);
    let n = quotas.entries.len();
    let seats = match method.mode {
        Mode::ByState => {
            let floor = method.floor();
            let mut fixed = vec![false; n];
            loop {
                let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
                let reserved = (n - free.len()) as u64 * floor;
                let left = target - reserved;
                let pool: f64 = free.iter().map(|&i| quotas.entries[i].population).sum();
                let items: Vec<Item> = free
                    .iter()
                    .map(|&i| {
                        let e = &quotas.entries[i];
                        Item {
                            share: e.population * left as f64,
                            pool,
                            weight: e.population,
                            key: e.name.as_bytes(),
                        }
                    })
                    .collect();
                let alloc = largest_remainder(&items, left);
                let newly: Vec<usize> = free
                    .iter()
                    .zip(&alloc)
                    .filter(|(_, &s)| s < floor)
                    .map(|(&i, _)| i)
                    .collect();
                if newly.is_empty() {
                    let mut seats = vec![floor; n];
                    for (&i, s) in free.iter().zip(alloc) {
                        seats[i] = s;
                    }
                    break seats;
                }
                for i in newly {
                    fixed[i] = true;
                }
            }
        }
        Mode::ByFamily => {
            if method.floor() > 0 {
                return Err(Error::InvalidArgument(
                    "a seat floor is not supported with Hamilton in family mode".into(),
                ));
            }
            let fams: Vec<_> = partition.iter().collect();
            let index_keys: Vec<[u8; 8]> = fams.iter().map(|f| f.index.to_be_bytes()).collect();
            let v_total = states.total_population();
            let items: Vec<Item> = fams
                .iter()
                .zip(&index_keys)
                .map(|(f, key)| Item {
                    share: f.members.iter().map(|&i| quotas.entries[i].population).sum::<f64>()
                        * target as f64,
                    pool: v_total,
                    weight: f.quota,
                    key,
                })
                .collect();
            let alloc = largest_remainder(&items, target);
            let mut seats = vec![0u64; n];
            for (f, s) in fams.iter().zip(alloc) {
                let lower = ((f.index + 1) * f.count() as u64).saturating_sub(s) as usize;
                for (k, &i) in f.members.iter().enumerate() {
                    seats[i] = if k < lower { f.index } else { f.index + 1 };
                }
            }
            seats
        }
    };
    Ok(Apportionment::from_seats(&quotas, &partition, seats))
}

/// Quota `share / pool`; remainders compare as `share mod pool`, which is
/// exact for integer populations.
struct Item<'a> {
    share: f64,
    pool: f64,
    /// Larger weight wins remainder ties.
    weight: f64,
    /// Smaller key wins remaining ties.
    key: &'a [u8],
}

fn largest_remainder(items: &[Item], total: u64) -> Vec<u64> {
    let rem = |it: &Item| it.share % it.pool;
    let mut seats: Vec<u64> = items
        .iter()
        .map(|it| ((it.share - rem(it)) / it.pool).round() as u64)
        .collect();
    let given: u64 = seats.iter().sum();
    let mut left = total.saturating_sub(given);
    let mut rank: Vec<usize> = (0..items.len()).collect();
    rank.sort_by(|&a, &b| {
        let (x, y) = (&items[a], &items[b]);
        (rem(y) / y.pool)
            .total_cmp(&(rem(x) / x.pool))
            .then_with(|| y.weight.total_cmp(&x.weight))
            .then_with(|| x.key.cmp(y.key))
    });
    let mut k = 0;
    while left > 0 && !rank.is_empty() {
        seats[rank[k % rank.len()]] += 1;
        left -= 1;
        k += 1;
    }
    seats
}
