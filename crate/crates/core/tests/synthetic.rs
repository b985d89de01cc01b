use chrono::{Days, NaiveDate};
use netfx_core::cohorts::all_users_cohort;
use netfx_core::{
    build_driver_series, generate, great_user_cohort, power_user_curve, select_super_users,
    validate_store, CouplingSpec, DateWindow, DriverKind, EventKind, SuperUserCriteria,
};

fn window(days: u64) -> DateWindow {
    let from = NaiveDate::from_ymd_opt(2020, 7, 1).unwrap();
    DateWindow::new(from, from + Days::new(days - 1)).unwrap()
}

fn coupled(seed: u64) -> CouplingSpec {
    CouplingSpec::independent(300, seed).with_coupling(
        DriverKind::Credit,
        DriverKind::Project,
        0.9,
        1,
    )
}

#[test]
fn log_is_valid_and_matches_truth_counts() {
    let w = window(184);
    let out = generate(&coupled(1), w).unwrap();
    let report = validate_store(&out.store);
    assert!(
        report.is_valid(),
        "{:?}",
        &report.violations[..report.violations.len().min(5)]
    );
    for (kind, total) in &out.truth.kind_totals {
        assert_eq!(out.store.iter_kind(*kind).count() as u64, *total, "{kind}");
    }
    assert_eq!(out.store.span(), Some(w));
}

#[test]
fn project_series_equals_daily_truth() {
    let w = window(120);
    let out = generate(&coupled(2), w).unwrap();
    let series = build_driver_series(&out.store, DriverKind::Project, w, None).unwrap();
    let truth = &out.truth.daily_counts[&EventKind::ProjectOpened];
    let from_series: Vec<u64> = series.values.iter().map(|v| *v as u64).collect();
    assert_eq!(&from_series, truth);
}

#[test]
fn great_user_cohort_is_the_grant_ledger() {
    let w = window(184);
    let out = generate(&coupled(3), w).unwrap();
    let cohort = great_user_cohort(&out.store);
    assert_eq!(cohort.members(), &out.truth.great_user_grants);
    let series = build_driver_series(&out.store, DriverKind::GreatUser, w, None).unwrap();
    assert_eq!(*series.values.last().unwrap() as usize, cohort.len());
}

#[test]
fn all_user_curves_equal_truth_histograms() {
    let w = window(92);
    let out = generate(&coupled(4), w).unwrap();
    let everyone = all_users_cohort(&out.store);
    for month in w.months() {
        let curve = power_user_curve(&out.store, &everyone, month).unwrap();
        let truth = &out.truth.monthly_active_days[&month];
        for d in 1..=curve.days() {
            assert_eq!(
                curve.bucket(d),
                truth.get(&d).copied().unwrap_or(0),
                "{month} day {d}"
            );
        }
    }
}

#[test]
fn super_users_are_mostly_power_workers() {
    let w = window(184);
    let mut spec = CouplingSpec::independent(200, 5);
    spec.activity.initial_fraction = 1.0;
    let out = generate(&spec, w).unwrap();
    let cohort = select_super_users(&out.store, &SuperUserCriteria::new(w.to))
        .unwrap()
        .cohort;
    let power = &out.truth.power_workers;
    let recalled = power.iter().filter(|u| cohort.contains(u)).count();
    assert!(recalled as f64 >= 0.9 * power.len() as f64);
    // Early days qualify some casual workers for good, but not most.
    let precise = cohort
        .members()
        .keys()
        .filter(|u| power.contains(*u))
        .count();
    assert!(precise * 2 > cohort.len());
}

#[test]
fn cumulative_series_are_monotone() {
    let w = window(184);
    let out = generate(&coupled(6), w).unwrap();
    let cohort = select_super_users(&out.store, &SuperUserCriteria::new(w.to))
        .unwrap()
        .cohort;
    for d in [
        DriverKind::User,
        DriverKind::GreatUser,
        DriverKind::SuperUser,
    ] {
        let s = build_driver_series(&out.store, d, w, Some(&cohort)).unwrap();
        assert!(s.values.windows(2).all(|p| p[0] <= p[1]), "{d}");
    }
}
