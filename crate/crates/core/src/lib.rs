//! Directed-influence analytics for two-sided platform event logs.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`events`] loads raw platform events (JSONL or CSV) into an immutable
//!    [`EventStore`].
//! 2. [`series`] turns the store into one daily [`TimeSeries`] per growth
//!    driver and discretizes each into a [`SymbolSeries`].
//! 3. [`te`] estimates transfer entropy between symbol sequences with a
//!    sparse plug-in estimator, checked against a dense brute-force oracle.
//! 4. [`impact`] assembles the 7×7 driver matrix, renders it in arbitrary
//!    units (raw × 10 000) and normalizes it to a 100-point impact ranking.
//! 5. [`cohorts`] selects Super users by rule and builds monthly power user
//!    curves.
//!
//! [`synth`] generates coupled synthetic logs with known ground truth for
//! end-to-end validation.

pub mod calendar;
pub mod cohorts;
pub mod events;
pub mod impact;
pub mod series;
pub mod synth;
pub mod te;

pub use calendar::{DateWindow, YearMonth};
pub use cohorts::{
    great_user_cohort, power_user_curve, select_super_users, smile_index, CohortError, CohortKind,
    PassRateRule, PowerUserCurve, SmileIndex, StageSets, SuperUserCriteria, SuperUserSelection,
    UserCohort,
};
pub use events::{
    ingest_events, validate_store, DriverKind, EventKind, EventRecord, EventStore, IngestError,
    IngestFormat, Ingested, ValidationReport,
};
pub use impact::{
    compute_matrix, normalize_impact, render_au_table, render_ranking, ImpactEntry, ImpactError,
    ImpactRanking, TeMatrix, AU_SCALE,
};
pub use series::{
    build_driver_series, discretize, DiscretizationScheme, SeriesError, SymbolSeries, TimeSeries,
};
pub use synth::{generate, CouplingSpec, GroundTruth, SynthError, SynthOutput};
pub use te::{
    brute_force_te_oracle, joint_counts, shuffle_surrogate_threshold, transfer_entropy,
    HistoryConfig, JointCounts, LogBase, TeError, TeResult,
};
