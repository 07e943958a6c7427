//! Seat apportionment by divisor methods, family-based methods and
//! distribution-derived unbiased methods, with paradox detection.

pub mod census;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod model;
pub mod numeric;
pub mod paradox;
pub mod signpost;

pub use census::{log_histogram, log_moments, log_moments_with, powerlaw_loglik_scan, LogMoments, MomentConvention};
pub use distributions::{
    expected_family_bias, monte_carlo_bias, sample_states, unbiased_mark, unbiased_mark_generic,
    verify_alabama_immunity, DistributionMarks, DivisorMarks, FamilyBias, ImmunityReport, MarkFn,
    PopulationDistribution,
};
pub use engine::{
    apportion_at_divisor, apportion_for_house_size, breakpoints, HouseSizeSolution, MethodSpec, Mode,
    Rounding,
};
pub use error::{Error, Result};
pub use model::{
    compute_quotas, partition_families, Apportionment, Family, FamilyPartition, FamilySeats,
    FamilySplit, QuotaEntry, QuotaTable, StateProfile, StateSeats, StateSet,
};
pub use paradox::{
    check_new_states, family_of_families_fixture, find_multiple_solutions, scan_alabama,
    AffectedState, ParadoxKind, ParadoxReport, Witness,
};
pub use signpost::{signpost, signpost_table, SignpostRule};
