//! Synthetic platform logs with known directed couplings.
//!
//! Every generated driver is a discrete-time process with Poisson daily
//! counts. A coupling `source → destination` (strength `s`, lag `L`) makes the
//! destination's intensity on day `t`
//!
//! ```text
//! λ_dest(t) = base_dest · max(0, 1 + Σ s · (r_src(t - L) - 1))
//! ```
//!
//! where `r_src` is the source's realised daily activity divided by its
//! expected value (1 on days before the window). Activity is the daily count
//! of sign-ups, grants and project openings, the daily paid or withdrawn
//! amount, and the balance level for Remained Credit. Super users are
//! derived from worker activity by the cohort rules, so they cannot be
//! coupled directly.
//!
//! Worker task activity is independent of the driver processes: each day
//! every signed-up worker is active with a fixed probability (higher for the
//! labelled power workers) and submits tasks, some of which get reviewed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::calendar::{DateWindow, YearMonth};
use crate::events::{DriverKind, EventKind, EventRecord, EventStore};

pub const MIN_WINDOW_DAYS: usize = 30;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid synthetic spec: {0}")]
pub struct SynthError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub source: DriverKind,
    pub destination: DriverKind,
    pub strength: f64,
    pub lag: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseRates {
    pub grants_per_day: f64,
    pub credit_payments_per_day: f64,
    pub mean_credit_amount: f64,
    pub withdrawals_per_day: f64,
    pub mean_withdrawal_amount: f64,
    /// Balance snapshot = `balance_unit × Poisson(balance_intensity)`.
    pub balance_intensity: f64,
    pub balance_unit: f64,
    pub projects_per_day: f64,
}

impl Default for BaseRates {
    fn default() -> Self {
        Self {
            grants_per_day: 0.04,
            credit_payments_per_day: 40.0,
            mean_credit_amount: 50.0,
            withdrawals_per_day: 10.0,
            mean_withdrawal_amount: 120.0,
            balance_intensity: 40.0,
            balance_unit: 250.0,
            projects_per_day: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub workers: u32,
    pub customers: u32,
}

/// Worker engagement parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityProfile {
    /// Share of workers already signed up on the first day; the rest arrive
    /// through the sign-up process over the window.
    pub initial_fraction: f64,
    pub power_fraction: f64,
    pub power_active_prob: f64,
    pub casual_active_prob: f64,
    /// Mean tasks on an active day for a casual worker (at least 1).
    pub tasks_per_active_day: f64,
    pub power_task_multiplier: f64,
    pub review_prob: f64,
    pub power_pass_rate: f64,
    pub casual_pass_rate: f64,
}

impl Default for ActivityProfile {
    fn default() -> Self {
        Self {
            initial_fraction: 0.5,
            power_fraction: 0.1,
            power_active_prob: 0.6,
            casual_active_prob: 0.2,
            tasks_per_active_day: 2.0,
            power_task_multiplier: 3.0,
            review_prob: 0.3,
            power_pass_rate: 0.95,
            casual_pass_rate: 0.75,
        }
    }
}

impl ActivityProfile {
    /// A sizeable core of near-daily workers on top of a casual crowd.
    pub fn strong_network_effect() -> Self {
        Self {
            power_fraction: 0.3,
            power_active_prob: 0.9,
            ..Self::default()
        }
    }

    /// Casual workers only.
    pub fn weak_network_effect() -> Self {
        Self {
            power_fraction: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    #[serde(default)]
    pub pairs: Vec<Coupling>,
    #[serde(default)]
    pub base_rates: BaseRates,
    pub population: Population,
    #[serde(default)]
    pub activity: ActivityProfile,
    pub seed: u64,
}

impl CouplingSpec {
    /// No couplings, default rates.
    pub fn independent(workers: u32, seed: u64) -> Self {
        Self {
            pairs: Vec::new(),
            base_rates: BaseRates::default(),
            population: Population {
                workers,
                customers: 20,
            },
            activity: ActivityProfile::default(),
            seed,
        }
    }

    pub fn with_coupling(
        mut self,
        source: DriverKind,
        destination: DriverKind,
        strength: f64,
        lag: u32,
    ) -> Self {
        self.pairs.push(Coupling {
            source,
            destination,
            strength,
            lag,
        });
        self
    }

    pub fn validate(&self, window: DateWindow) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError(m));
        if window.len_days() < MIN_WINDOW_DAYS {
            return fail(format!(
                "window has {} days, need at least {MIN_WINDOW_DAYS}",
                window.len_days()
            ));
        }
        if self.population.workers == 0 {
            return fail("population needs at least one worker".into());
        }
        for c in &self.pairs {
            if !(0.0..=1.0).contains(&c.strength) {
                return fail(format!("strength {} outside [0, 1]", c.strength));
            }
            if c.lag == 0 {
                return fail("lag must be at least 1 day".into());
            }
            if c.source == c.destination {
                return fail(format!("self-coupling on {}", c.source));
            }
            if c.source == DriverKind::SuperUser || c.destination == DriverKind::SuperUser {
                return fail("Super User is derived from activity and cannot be coupled".into());
            }
        }
        let r = &self.base_rates;
        let rates = [
            r.grants_per_day,
            r.credit_payments_per_day,
            r.mean_credit_amount,
            r.withdrawals_per_day,
            r.mean_withdrawal_amount,
            r.balance_intensity,
            r.balance_unit,
            r.projects_per_day,
        ];
        if rates.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail("base rates must be finite and non-negative".into());
        }
        let a = &self.activity;
        let probs = [
            a.initial_fraction,
            a.power_fraction,
            a.power_active_prob,
            a.casual_active_prob,
            a.review_prob,
            a.power_pass_rate,
            a.casual_pass_rate,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return fail("activity probabilities must lie in [0, 1]".into());
        }
        if !(a.tasks_per_active_day >= 1.0 && a.power_task_multiplier >= 1.0) {
            return fail("tasks per active day and power multiplier must be at least 1".into());
        }
        Ok(())
    }
}

/// Facts known to the generator, written beside the log and never inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub window: DateWindow,
    pub couplings: Vec<Coupling>,
    pub power_workers: BTreeSet<String>,
    pub kind_totals: BTreeMap<EventKind, u64>,
    /// Per-kind event counts, one entry per window day.
    pub daily_counts: BTreeMap<EventKind, Vec<u64>>,
    pub great_user_grants: BTreeMap<String, NaiveDate>,
    /// For each month: number of workers by count of active days.
    pub monthly_active_days: BTreeMap<YearMonth, BTreeMap<u32, u64>>,
}

impl GroundTruth {
    pub fn write_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub store: EventStore,
    pub truth: GroundTruth,
}

/// Generated drivers, in the order their activity is drawn each day.
const GENERATED: [DriverKind; 6] = [
    DriverKind::User,
    DriverKind::GreatUser,
    DriverKind::Credit,
    DriverKind::Withdraw,
    DriverKind::RemainedCredit,
    DriverKind::Project,
];

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda)
        .expect("positive finite rate")
        .sample(rng) as u64
}

fn amount(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let raw: f64 = Exp::new(1.0 / mean).expect("positive mean").sample(rng);
    (raw * 100.0).round().max(1.0) / 100.0
}

struct Worker {
    id: String,
    power: bool,
    great: bool,
    month_active: u32,
}

/// Generates a schema-valid event log and its ground truth. Deterministic in
/// `spec.seed`.
pub fn generate(spec: &CouplingSpec, window: DateWindow) -> Result<SynthOutput, SynthError> {
    spec.validate(window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let days = window.len_days();
    let rates = &spec.base_rates;
    let act = &spec.activity;

    let workers_total = spec.population.workers as f64;
    let initial = (workers_total * act.initial_fraction).round() as u64;
    let signup_rate = (workers_total - initial as f64).max(0.0) / days as f64;

    let base = |d: DriverKind| -> f64 {
        match d {
            DriverKind::User => signup_rate,
            DriverKind::GreatUser => rates.grants_per_day,
            DriverKind::Credit => rates.credit_payments_per_day,
            DriverKind::Withdraw => rates.withdrawals_per_day,
            DriverKind::RemainedCredit => rates.balance_intensity,
            DriverKind::Project => rates.projects_per_day,
            DriverKind::SuperUser => 0.0,
        }
    };
    let expected_value = |d: DriverKind| -> f64 {
        match d {
            DriverKind::Credit => rates.credit_payments_per_day * rates.mean_credit_amount,
            DriverKind::Withdraw => rates.withdrawals_per_day * rates.mean_withdrawal_amount,
            other => base(other),
        }
    };

    let mut ratios: BTreeMap<DriverKind, Vec<f64>> = GENERATED
        .iter()
        .map(|d| (*d, Vec::with_capacity(days)))
        .collect();
    let mut records: Vec<EventRecord> = Vec::new();
    let mut workers: Vec<Worker> = Vec::new();
    let mut projects: Vec<String> = Vec::new();
    let mut daily_counts: BTreeMap<EventKind, Vec<u64>> =
        EventKind::ALL.iter().map(|k| (*k, vec![0; days])).collect();
    let mut great_user_grants = BTreeMap::new();
    let mut monthly_active_days: BTreeMap<YearMonth, BTreeMap<u32, u64>> = BTreeMap::new();

    let intensity = |d: DriverKind, t: usize, ratios: &BTreeMap<DriverKind, Vec<f64>>| -> f64 {
        let mut factor = 1.0;
        for c in spec.pairs.iter().filter(|c| c.destination == d) {
            let lagged = t
                .checked_sub(c.lag as usize)
                .map_or(1.0, |i| ratios[&c.source][i]);
            factor += c.strength * (lagged - 1.0);
        }
        base(d) * factor.max(0.0)
    };
    let record_ratio = |ratios: &mut BTreeMap<DriverKind, Vec<f64>>, d: DriverKind, value: f64| {
        let e = expected_value(d);
        ratios
            .get_mut(&d)
            .expect("generated driver")
            .push(if e > 0.0 { value / e } else { 1.0 });
    };

    for t in 0..days {
        let date = window.day(t);
        let mut emit = |records: &mut Vec<EventRecord>, r: EventRecord| {
            daily_counts.get_mut(&r.kind).expect("all kinds tracked")[t] += 1;
            records.push(r);
        };

        // Sign-ups.
        let arrivals = poisson(&mut rng, intensity(DriverKind::User, t, &ratios));
        let extra = if t == 0 { initial } else { 0 };
        for _ in 0..arrivals + extra {
            let id = format!("w{:06}", workers.len());
            let power = rng.gen_bool(act.power_fraction);
            emit(
                &mut records,
                EventRecord::new(date, EventKind::SignUp).user(&id),
            );
            workers.push(Worker {
                id,
                power,
                great: false,
                month_active: 0,
            });
        }
        record_ratio(&mut ratios, DriverKind::User, arrivals as f64);

        // Staff grants.
        let grants = poisson(&mut rng, intensity(DriverKind::GreatUser, t, &ratios));
        let mut eligible: Vec<usize> = (0..workers.len()).filter(|&i| !workers[i].great).collect();
        eligible.shuffle(&mut rng);
        for &i in eligible.iter().take(grants as usize) {
            workers[i].great = true;
            great_user_grants.insert(workers[i].id.clone(), date);
            emit(
                &mut records,
                EventRecord::new(date, EventKind::GreatUserGranted).user(&workers[i].id),
            );
        }
        record_ratio(&mut ratios, DriverKind::GreatUser, grants as f64);

        // Projects.
        let opened = poisson(&mut rng, intensity(DriverKind::Project, t, &ratios));
        for _ in 0..opened {
            let customer = rng.gen_range(0..spec.population.customers.max(1));
            let id = format!("c{customer:04}-p{:06}", projects.len());
            emit(
                &mut records,
                EventRecord::new(date, EventKind::ProjectOpened).project(&id),
            );
            projects.push(id);
        }
        record_ratio(&mut ratios, DriverKind::Project, opened as f64);

        // Worker tasks.
        for w in workers.iter_mut() {
            let p = if w.power {
                act.power_active_prob
            } else {
                act.casual_active_prob
            };
            if !rng.gen_bool(p) {
                continue;
            }
            w.month_active += 1;
            let mean = if w.power {
                act.tasks_per_active_day * act.power_task_multiplier
            } else {
                act.tasks_per_active_day
            };
            let tasks = 1 + poisson(&mut rng, mean - 1.0);
            let pass_rate = if w.power {
                act.power_pass_rate
            } else {
                act.casual_pass_rate
            };
            for _ in 0..tasks {
                let project = projects
                    .choose(&mut rng)
                    .cloned()
                    .unwrap_or_else(|| "c0000-p000000".to_string());
                emit(
                    &mut records,
                    EventRecord::new(date, EventKind::TaskSubmitted)
                        .user(&w.id)
                        .project(&project),
                );
                if rng.gen_bool(act.review_prob) {
                    let passed = rng.gen_bool(pass_rate);
                    emit(
                        &mut records,
                        EventRecord::new(date, EventKind::TaskReviewed)
                            .user(&w.id)
                            .project(&project)
                            .passed(passed),
                    );
                }
            }
        }

        // Credit flows.
        for (driver, kind, mean) in [
            (
                DriverKind::Credit,
                EventKind::CreditPaid,
                rates.mean_credit_amount,
            ),
            (
                DriverKind::Withdraw,
                EventKind::Withdrawal,
                rates.mean_withdrawal_amount,
            ),
        ] {
            let n = poisson(&mut rng, intensity(driver, t, &ratios));
            let mut total = 0.0;
            for _ in 0..n {
                let value = amount(&mut rng, mean);
                total += value;
                if workers.is_empty() {
                    continue;
                }
                let w = &workers[rng.gen_range(0..workers.len())];
                emit(
                    &mut records,
                    EventRecord::new(date, kind).user(&w.id).amount(value),
                );
            }
            record_ratio(&mut ratios, driver, total);
        }

        // Balance snapshot.
        let level = poisson(&mut rng, intensity(DriverKind::RemainedCredit, t, &ratios));
        emit(
            &mut records,
            EventRecord::new(date, EventKind::BalanceSnapshot)
                .amount(level as f64 * rates.balance_unit),
        );
        record_ratio(&mut ratios, DriverKind::RemainedCredit, level as f64);

        let month_ends = t + 1 == days || YearMonth::of(window.day(t + 1)) != YearMonth::of(date);
        if month_ends {
            let hist = monthly_active_days.entry(YearMonth::of(date)).or_default();
            for w in workers.iter_mut() {
                if w.month_active > 0 {
                    *hist.entry(w.month_active).or_insert(0) += 1;
                }
                w.month_active = 0;
            }
        }
    }

    let kind_totals = daily_counts
        .iter()
        .map(|(k, v)| (*k, v.iter().sum()))
        .collect();
    let truth = GroundTruth {
        seed: spec.seed,
        window,
        couplings: spec.pairs.clone(),
        power_workers: workers
            .iter()
            .filter(|w| w.power)
            .map(|w| w.id.clone())
            .collect(),
        kind_totals,
        daily_counts,
        great_user_grants,
        monthly_active_days,
    };
    Ok(SynthOutput {
        store: EventStore::new(records),
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::parse_day;
    use crate::events::validate_store;

    fn window(days: u64) -> DateWindow {
        let from = parse_day("2020-07-01").unwrap();
        DateWindow::new(from, from + chrono::Days::new(days - 1)).unwrap()
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let ok = CouplingSpec::independent(50, 1);
        assert!(generate(&ok, window(29)).is_err());
        assert!(generate(&CouplingSpec::independent(0, 1), window(60)).is_err());
        let cases = [
            ok.clone()
                .with_coupling(DriverKind::Credit, DriverKind::Project, 1.5, 1),
            ok.clone()
                .with_coupling(DriverKind::Credit, DriverKind::Project, 0.5, 0),
            ok.clone()
                .with_coupling(DriverKind::Credit, DriverKind::Credit, 0.5, 1),
            ok.clone()
                .with_coupling(DriverKind::SuperUser, DriverKind::Project, 0.5, 1),
        ];
        for spec in cases {
            assert!(generate(&spec, window(60)).is_err(), "{:?}", spec.pairs);
        }
    }

    #[test]
    fn same_seed_same_log() {
        let spec = CouplingSpec::independent(40, 9).with_coupling(
            DriverKind::Credit,
            DriverKind::Project,
            0.9,
            1,
        );
        let a = generate(&spec, window(45)).unwrap();
        let b = generate(&spec, window(45)).unwrap();
        let (mut ja, mut jb) = (Vec::new(), Vec::new());
        a.store.write_jsonl(&mut ja).unwrap();
        b.store.write_jsonl(&mut jb).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn generated_log_is_schema_valid_and_tallied() {
        let out = generate(&CouplingSpec::independent(80, 4), window(184)).unwrap();
        let report = validate_store(&out.store);
        assert!(report.is_valid(), "{:?}", report.violations);
        for (kind, total) in &out.truth.kind_totals {
            assert_eq!(report.counts.get(kind).copied().unwrap_or(0) as u64, *total);
        }
        assert_eq!(
            out.truth.daily_counts[&EventKind::BalanceSnapshot],
            vec![1; 184]
        );
        assert_eq!(out.truth.monthly_active_days.len(), 6);
    }
}
