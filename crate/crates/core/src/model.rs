//! Domain types shared by every apportionment routine: states, quota tables,
//! family partitions and the resulting seat assignment.
//!
//! A state's quota at divisor `D` is `v / D`. Its family is the integer part
//! of the quota, so family `f` holds every quota in the half-open interval
//! `[f, f + 1)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

/// A named state with a positive population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateProfile {
    pub name: String,
    pub population: f64,
}

impl StateProfile {
    pub fn new(name: impl Into<String>, population: f64) -> Result<Self> {
        let name = name.into();
        if !(population.is_finite() && population > 0.0) {
            return Err(Error::InvalidPopulation { name, population });
        }
        Ok(Self { name, population })
    }
}

/// Orders states by population ascending, then by name bytes.
pub(crate) fn population_order(a: &StateProfile, b: &StateProfile) -> Ordering {
    a.population
        .total_cmp(&b.population)
        .then_with(|| a.name.as_bytes().cmp(b.name.as_bytes()))
}

/// A non-empty collection of states with unique names, kept in input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSet {
    states: Vec<StateProfile>,
}

impl StateSet {
    pub fn new(states: Vec<StateProfile>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyStateSet);
        }
        let mut seen = HashSet::with_capacity(states.len());
        for s in &states {
            if !(s.population.is_finite() && s.population > 0.0) {
                return Err(Error::InvalidPopulation {
                    name: s.name.clone(),
                    population: s.population,
                });
            }
            if !seen.insert(s.name.as_str()) {
                return Err(Error::DuplicateName(s.name.clone()));
            }
        }
        Ok(Self { states })
    }

    /// Builds a state set from bare populations, naming them `S1`, `S2`, ...
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        let states = populations
            .iter()
            .enumerate()
            .map(|(i, &p)| StateProfile::new(format!("S{}", i + 1), p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states)
    }

    pub fn states(&self) -> &[StateProfile] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_population(&self) -> f64 {
        self.states.iter().map(|s| s.population).sum()
    }

    pub fn min_population(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.population)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_population(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.population)
            .fold(0.0, f64::max)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    /// Returns a new set with `state` appended.
    pub fn with_state(&self, state: StateProfile) -> Result<Self> {
        let mut states = self.states.clone();
        states.push(state);
        Self::new(states)
    }

    /// Every population multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let states = self
            .states
            .iter()
            .map(|s| StateProfile::new(s.name.clone(), s.population * factor))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotaEntry {
    pub name: String,
    pub population: f64,
    pub quota: f64,
    pub family: u64,
}

/// Per-state quotas `v / D` at a single divisor, in state-set order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotaTable {
    pub divisor: f64,
    pub entries: Vec<QuotaEntry>,
}

pub(crate) fn check_divisor(divisor: f64) -> Result<()> {
    if divisor.is_finite() && divisor > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDivisor(divisor))
    }
}

/// Integer part of a non-negative quota, as a family index.
pub(crate) fn family_of(quota: f64) -> u64 {
    quota.floor() as u64
}

pub fn compute_quotas(states: &StateSet, divisor: f64) -> Result<QuotaTable> {
    check_divisor(divisor)?;
    let entries = states
        .states()
        .iter()
        .map(|s| {
            let quota = s.population / divisor;
            QuotaEntry {
                name: s.name.clone(),
                population: s.population,
                quota,
                family: family_of(quota),
            }
        })
        .collect();
    Ok(QuotaTable { divisor, entries })
}

/// All states whose quotas share the integer part `index`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Family {
    pub index: u64,
    /// Positions in the quota table, ordered by population ascending then name.
    pub members: Vec<usize>,
    /// Sum of member quotas, `Q_f`.
    pub quota: f64,
}

impl Family {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyPartition {
    pub families: BTreeMap<u64, Family>,
}

impl FamilyPartition {
    pub fn get(&self, index: u64) -> Option<&Family> {
        self.families.get(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Family> {
        self.families.values()
    }

    pub fn total_quota(&self) -> f64 {
        self.families.values().map(|f| f.quota).sum()
    }
}

pub fn partition_families(quotas: &QuotaTable) -> FamilyPartition {
    let mut grouped: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, e) in quotas.entries.iter().enumerate() {
        grouped.entry(e.family).or_default().push(i);
    }
    let families = grouped
        .into_iter()
        .map(|(index, mut members)| {
            members.sort_by(|&a, &b| {
                let (ea, eb) = (&quotas.entries[a], &quotas.entries[b]);
                ea.population
                    .total_cmp(&eb.population)
                    .then_with(|| ea.name.as_bytes().cmp(eb.name.as_bytes()))
            });
            let quota = members.iter().map(|&i| quotas.entries[i].quota).sum();
            (
                index,
                Family {
                    index,
                    members,
                    quota,
                },
            )
        })
        .collect();
    FamilyPartition { families }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSeats {
    pub name: String,
    pub population: f64,
    pub quota: f64,
    pub family: u64,
    pub seats: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySeats {
    pub index: u64,
    pub members: usize,
    pub quota: f64,
    pub seats: u64,
}

/// How a family's seats divide between members holding `f` and `f + 1` seats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FamilySplit {
    pub family: u64,
    pub seats: u64,
    /// Members receiving `family` seats.
    pub lower: u64,
    /// Members receiving `family + 1` seats.
    pub upper: u64,
}

impl FamilySplit {
    /// Splits `seats` among `members` states of family `family`; `None` when
    /// the seat count lies outside `[f N, (f + 1) N]`.
    pub fn new(family: u64, members: u64, seats: u64) -> Option<Self> {
        let lower = ((family + 1) * members).checked_sub(seats)?;
        let upper = seats.checked_sub(family * members)?;
        Some(Self {
            family,
            seats,
            lower,
            upper,
        })
    }
}

/// Integer seats per state at one divisor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Apportionment {
    pub divisor: f64,
    /// One row per state, in state-set order.
    pub states: Vec<StateSeats>,
    /// One row per non-empty family, ascending by index.
    pub families: Vec<FamilySeats>,
    pub total: u64,
}

impl Apportionment {
    pub(crate) fn from_seats(quotas: &QuotaTable, partition: &FamilyPartition, seats: Vec<u64>) -> Self {
        let states: Vec<StateSeats> = quotas
            .entries
            .iter()
            .zip(&seats)
            .map(|(e, &s)| StateSeats {
                name: e.name.clone(),
                population: e.population,
                quota: e.quota,
                family: e.family,
                seats: s,
            })
            .collect();
        let families = partition
            .iter()
            .map(|f| FamilySeats {
                index: f.index,
                members: f.count(),
                quota: f.quota,
                seats: f.members.iter().map(|&i| seats[i]).sum(),
            })
            .collect();
        Self {
            divisor: quotas.divisor,
            states,
            families,
            total: seats.iter().sum(),
        }
    }

    pub fn seats(&self) -> Vec<u64> {
        self.states.iter().map(|s| s.seats).collect()
    }

    pub fn seats_of(&self, name: &str) -> Option<u64> {
        self.states.iter().find(|s| s.name == name).map(|s| s.seats)
    }

    pub fn family_seats(&self, index: u64) -> Option<u64> {
        self.families
            .iter()
            .find(|f| f.index == index)
            .map(|f| f.seats)
    }

    /// The member split of family `index`, when every member holds either
    /// `f` or `f + 1` seats.
    pub fn split(&self, index: u64) -> Option<FamilySplit> {
        let fam = self.families.iter().find(|f| f.index == index)?;
        let in_range = self
            .states
            .iter()
            .filter(|s| s.family == index)
            .all(|s| s.seats == index || s.seats == index + 1);
        if !in_range {
            return None;
        }
        FamilySplit::new(index, fam.members as u64, fam.seats)
    }
}
