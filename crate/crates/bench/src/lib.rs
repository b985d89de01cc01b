//! Inputs shared by the benchmarks.

use std::collections::BTreeMap;

use netfx_core::{
    build_driver_series, discretize, generate, select_super_users, CouplingSpec, DateWindow,
    DiscretizationScheme, DriverKind, EventStore, SuperUserCriteria, SymbolSeries,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent uniform symbol pair of length `n`.
pub fn random_pair(n: usize, alphabet: u32, seed: u64) -> (SymbolSeries, SymbolSeries) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let s: Vec<u32> = (0..n).map(|_| rng.gen_range(0..alphabet)).collect();
        SymbolSeries::new(s, alphabet).expect("symbols in range")
    };
    (draw(), draw())
}

/// A synthetic log with the default Credit -> Project coupling.
pub fn synthetic_log(workers: u32, days: u64, seed: u64) -> (EventStore, DateWindow) {
    let from = chrono::NaiveDate::from_ymd_opt(2020, 7, 1).expect("valid date");
    let window = DateWindow::new(from, from + chrono::Days::new(days - 1)).expect("days >= 1");
    let spec = CouplingSpec::independent(workers, seed).with_coupling(
        DriverKind::Credit,
        DriverKind::Project,
        0.9,
        1,
    );
    (generate(&spec, window).expect("valid spec").store, window)
}

/// Super users plus the seven slope-discretized driver series.
pub fn driver_symbols(
    store: &EventStore,
    window: DateWindow,
) -> BTreeMap<DriverKind, SymbolSeries> {
    let cohort = select_super_users(store, &SuperUserCriteria::new(window.to))
        .expect("log has submissions")
        .cohort;
    DriverKind::ALL
        .iter()
        .map(|&d| {
            let raw = build_driver_series(store, d, window, Some(&cohort)).expect("series");
            (
                d,
                discretize(&raw, DiscretizationScheme::default()).expect("discretize"),
            )
        })
        .collect()
}
