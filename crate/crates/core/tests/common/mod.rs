use std::path::PathBuf;

use seatcalc::{StateProfile, StateSet};

pub fn census_path(year: u32) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/census")
        .join(format!("{year}.csv"))
}

pub fn census(year: u32) -> StateSet {
    let text = std::fs::read_to_string(census_path(year)).expect("census file");
    let states = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (name, pop) = l.rsplit_once(',').expect("two columns");
            StateProfile::new(name, pop.trim().parse().expect("integer population")).unwrap()
        })
        .collect();
    StateSet::new(states).unwrap()
}
