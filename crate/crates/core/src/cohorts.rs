//! Rule-based Super-user selection and monthly power user curves.
//!
//! Super users are evaluated day by day. On each day `D`, using only events
//! up to `D`:
//!
//! 1. **Recency and retention.** Among users with at least one submission,
//!    keep those who submitted within the last `recency_days` days
//!    (`D - last_submission < recency_days`) and whose count of distinct
//!    active days is strictly above the mean over all submitters.
//! 2. **Workload.** Keep stage-1 users whose submission count is strictly
//!    above the stage-1 mean.
//! 3. **Quality.** Keep stage-2 users with at least one review whose pass
//!    rate is at least the mean pass rate of reviewed stage-1 users.
//!
//! A user joins the cohort on the first day they survive all three stages
//! and stays a member from then on.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::YearMonth;
use crate::events::{EventKind, EventStore};

/// Rate comparisons tolerate this much floating error.
const RATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CohortError {
    #[error("store contains no task submissions")]
    NoSubmissions,
    #[error("evaluation window is empty: reference date {reference} precedes first event {first}")]
    EmptyWindow {
        reference: NaiveDate,
        first: NaiveDate,
    },
    #[error("recency_days must be at least 1")]
    InvalidCriteria,
    #[error("month {0} does not overlap the store's date span")]
    MonthOutOfRange(YearMonth),
    #[error("curve has no active users")]
    EmptyCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortKind {
    AllUsers,
    GreatUser,
    SuperUser,
}

impl CohortKind {
    pub fn slug(&self) -> &'static str {
        match self {
            CohortKind::AllUsers => "all_users",
            CohortKind::GreatUser => "great_user",
            CohortKind::SuperUser => "super_user",
        }
    }
}

/// How stage 3 judges review quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassRateRule {
    /// Overall pass rate ≥ stage-1 mean pass rate.
    #[default]
    OverallRate,
    /// As `OverallRate`, and additionally the user's earliest review passed.
    FirstTaskPassed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperUserCriteria {
    pub recency_days: u32,
    pub reference_date: NaiveDate,
    #[serde(default)]
    pub pass_rule: PassRateRule,
}

impl SuperUserCriteria {
    pub const DEFAULT_RECENCY_DAYS: u32 = 14;

    pub fn new(reference_date: NaiveDate) -> Self {
        Self {
            recency_days: Self::DEFAULT_RECENCY_DAYS,
            reference_date,
            pass_rule: PassRateRule::OverallRate,
        }
    }
}

/// A set of users with the day each one qualified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserCohort {
    kind: CohortKind,
    members: BTreeMap<String, NaiveDate>,
}

impl UserCohort {
    pub fn new(kind: CohortKind, members: BTreeMap<String, NaiveDate>) -> Self {
        Self { kind, members }
    }

    pub fn kind(&self) -> CohortKind {
        self.kind
    }

    pub fn members(&self) -> &BTreeMap<String, NaiveDate> {
        &self.members
    }

    pub fn contains(&self, user: &str) -> bool {
        self.members.contains_key(user)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `user_id,qualification_date` CSV, sorted by user id.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_id", "qualification_date"])?;
        for (user, date) in &self.members {
            w.write_record([user.as_str(), &date.to_string()])?;
        }
        w.flush()
    }
}

/// Users surviving each stage on a single evaluation day.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageSets {
    pub submitters: BTreeSet<String>,
    pub stage1: BTreeSet<String>,
    pub stage2: BTreeSet<String>,
    pub stage3: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperUserSelection {
    pub cohort: UserCohort,
    /// Stage membership on the reference date.
    pub final_stages: StageSets,
}

#[derive(Debug, Clone, Default)]
struct WorkerStats {
    submissions: u64,
    active_days: u64,
    last_submission: Option<NaiveDate>,
    reviews: u64,
    passed: u64,
    first_review_passed: Option<bool>,
}

impl WorkerStats {
    fn pass_rate(&self) -> Option<f64> {
        (self.reviews > 0).then(|| self.passed as f64 / self.reviews as f64)
    }
}

#[derive(Default)]
struct DayStages {
    stage1: Vec<usize>,
    stage2: Vec<usize>,
    stage3: Vec<usize>,
}

fn evaluate_day(
    stats: &[WorkerStats],
    submitters: &[usize],
    day: NaiveDate,
    criteria: &SuperUserCriteria,
) -> DayStages {
    let mut out = DayStages::default();
    if submitters.is_empty() {
        return out;
    }
    let n = submitters.len() as u128;
    let active_sum: u128 = submitters
        .iter()
        .map(|&u| stats[u].active_days as u128)
        .sum();
    out.stage1 = submitters
        .iter()
        .copied()
        .filter(|&u| {
            let s = &stats[u];
            let recent = s
                .last_submission
                .is_some_and(|last| (day - last).num_days() < criteria.recency_days as i64);
            recent && s.active_days as u128 * n > active_sum
        })
        .collect();
    if out.stage1.is_empty() {
        return out;
    }

    let n1 = out.stage1.len() as u128;
    let subs_sum: u128 = out
        .stage1
        .iter()
        .map(|&u| stats[u].submissions as u128)
        .sum();
    out.stage2 = out
        .stage1
        .iter()
        .copied()
        .filter(|&u| stats[u].submissions as u128 * n1 > subs_sum)
        .collect();

    let rates: Vec<f64> = out
        .stage1
        .iter()
        .filter_map(|&u| stats[u].pass_rate())
        .collect();
    if rates.is_empty() {
        return out;
    }
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    out.stage3 = out
        .stage2
        .iter()
        .copied()
        .filter(|&u| {
            let s = &stats[u];
            let rate_ok = s.pass_rate().is_some_and(|r| r >= mean_rate - RATE_SLACK);
            match criteria.pass_rule {
                PassRateRule::OverallRate => rate_ok,
                PassRateRule::FirstTaskPassed => rate_ok && s.first_review_passed == Some(true),
            }
        })
        .collect();
    out
}

/// Replays the store day by day up to the reference date, calling `visit`
/// with each day's stages. Returns the interned user ids.
fn replay<'a>(
    store: &'a EventStore,
    criteria: &SuperUserCriteria,
    mut visit: impl FnMut(NaiveDate, &DayStages, &[&'a str], &[usize]),
) -> Result<(), CohortError> {
    if criteria.recency_days == 0 {
        return Err(CohortError::InvalidCriteria);
    }
    if store.iter_kind(EventKind::TaskSubmitted).next().is_none() {
        return Err(CohortError::NoSubmissions);
    }
    let first = store.span().expect("non-empty store has a span").from;
    if criteria.reference_date < first {
        return Err(CohortError::EmptyWindow {
            reference: criteria.reference_date,
            first,
        });
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    let mut stats: Vec<WorkerStats> = Vec::new();
    let mut submitters: Vec<usize> = Vec::new();
    let records = store.records();
    let mut cursor = 0;

    let mut day = first;
    while day <= criteria.reference_date {
        while cursor < records.len() && records[cursor].date == day {
            let r = &records[cursor];
            cursor += 1;
            let user = match (r.kind, r.user_id.as_deref()) {
                (EventKind::TaskSubmitted | EventKind::TaskReviewed, Some(u)) => u,
                _ => continue,
            };
            let id = *index.entry(user).or_insert_with(|| {
                names.push(user);
                stats.push(WorkerStats::default());
                names.len() - 1
            });
            let s = &mut stats[id];
            if r.kind == EventKind::TaskSubmitted {
                if s.submissions == 0 {
                    submitters.push(id);
                }
                s.submissions += 1;
                if s.last_submission != Some(day) {
                    s.active_days += 1;
                    s.last_submission = Some(day);
                }
            } else {
                let passed = r.passed.unwrap_or(false);
                s.reviews += 1;
                s.passed += passed as u64;
                s.first_review_passed.get_or_insert(passed);
            }
        }
        let stages = evaluate_day(&stats, &submitters, day, criteria);
        visit(day, &stages, &names, &submitters);
        day = match day.succ_opt() {
            Some(d) => d,
            None => break,
        };
    }
    Ok(())
}

fn named(ids: &[usize], names: &[&str]) -> BTreeSet<String> {
    ids.iter().map(|&i| names[i].to_string()).collect()
}

/// Selects the Super-user cohort; each member's qualification date is the
/// first day on which all three stages held.
pub fn select_super_users(
    store: &EventStore,
    criteria: &SuperUserCriteria,
) -> Result<SuperUserSelection, CohortError> {
    let mut qualified: BTreeMap<String, NaiveDate> = BTreeMap::new();
    let mut final_stages = StageSets::default();
    replay(store, criteria, |day, stages, names, submitters| {
        for &u in &stages.stage3 {
            qualified.entry(names[u].to_string()).or_insert(day);
        }
        if day == criteria.reference_date {
            final_stages = StageSets {
                submitters: named(submitters, names),
                stage1: named(&stages.stage1, names),
                stage2: named(&stages.stage2, names),
                stage3: named(&stages.stage3, names),
            };
        }
    })?;
    Ok(SuperUserSelection {
        cohort: UserCohort::new(CohortKind::SuperUser, qualified),
        final_stages,
    })
}

/// Stage membership for every evaluated day. Materialises user ids per day,
/// so intended for audits of modest logs.
pub fn stage_history(
    store: &EventStore,
    criteria: &SuperUserCriteria,
) -> Result<Vec<(NaiveDate, StageSets)>, CohortError> {
    let mut out = Vec::new();
    replay(store, criteria, |day, stages, names, submitters| {
        out.push((
            day,
            StageSets {
                submitters: named(submitters, names),
                stage1: named(&stages.stage1, names),
                stage2: named(&stages.stage2, names),
                stage3: named(&stages.stage3, names),
            },
        ));
    })?;
    Ok(out)
}

/// Users with a staff grant, dated by their earliest grant.
pub fn great_user_cohort(store: &EventStore) -> UserCohort {
    first_sighting(store, CohortKind::GreatUser, |k| {
        k == EventKind::GreatUserGranted
    })
}

/// Every user seen in the log, dated by sign-up (or first appearance when
/// no sign-up was logged).
pub fn all_users_cohort(store: &EventStore) -> UserCohort {
    let signed = first_sighting(store, CohortKind::AllUsers, |k| k == EventKind::SignUp);
    let mut seen = first_sighting(store, CohortKind::AllUsers, |_| true);
    for (user, date) in signed.members {
        seen.members.insert(user, date);
    }
    seen
}

fn first_sighting(
    store: &EventStore,
    kind: CohortKind,
    want: impl Fn(EventKind) -> bool,
) -> UserCohort {
    let mut members: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for r in store.records() {
        if !want(r.kind) {
            continue;
        }
        if let Some(user) = &r.user_id {
            members
                .entry(user.clone())
                .and_modify(|d| *d = (*d).min(r.date))
                .or_insert(r.date);
        }
    }
    UserCohort::new(kind, members)
}

/// Histogram of cohort members by number of active days in one month.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PowerUserCurve {
    pub month: YearMonth,
    pub cohort_kind: CohortKind,
    /// `counts[d - 1]` = members active on exactly `d` days.
    counts: Vec<u64>,
}

impl PowerUserCurve {
    pub fn days(&self) -> u32 {
        self.counts.len() as u32
    }

    /// Members active on exactly `active_days` days (1-based).
    pub fn bucket(&self, active_days: u32) -> u64 {
        match active_days {
            0 => 0,
            d => self.counts.get(d as usize - 1).copied().unwrap_or(0),
        }
    }

    pub fn buckets(&self) -> &[u64] {
        &self.counts
    }

    pub fn active_users(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `active_days,count` CSV with one row per day of the month.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["active_days", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([(i + 1).to_string(), c.to_string()])?;
        }
        w.flush()
    }
}

/// Counts, for each cohort member qualified by month end, the distinct days
/// in `month` on which they submitted at least one task.
pub fn power_user_curve(
    store: &EventStore,
    cohort: &UserCohort,
    month: YearMonth,
) -> Result<PowerUserCurve, CohortError> {
    let window = month.window();
    let span = store.span().ok_or(CohortError::MonthOutOfRange(month))?;
    if window.to < span.from || window.from > span.to {
        return Err(CohortError::MonthOutOfRange(month));
    }
    let mut active: HashMap<&str, BTreeSet<NaiveDate>> = HashMap::new();
    for r in store.iter_kind(EventKind::TaskSubmitted) {
        if !window.contains(r.date) {
            continue;
        }
        let Some(user) = r.user_id.as_deref() else {
            continue;
        };
        if cohort.members.get(user).is_some_and(|q| *q <= window.to) {
            active.entry(user).or_default().insert(r.date);
        }
    }
    let mut counts = vec![0u64; month.days_in_month() as usize];
    for days in active.values() {
        counts[days.len() - 1] += 1;
    }
    Ok(PowerUserCurve {
        month,
        cohort_kind: cohort.kind,
        counts,
    })
}

/// Share of active users in one contiguous block of day-buckets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuintileMass {
    pub first_day: u32,
    pub last_day: u32,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileIndex {
    pub value: f64,
    pub quintiles: [QuintileMass; 5],
}

impl SmileIndex {
    /// Partition rendered as `1-6|7-12|...`.
    pub fn partition_label(&self) -> String {
        self.quintiles
            .iter()
            .map(|q| format!("{}-{}", q.first_day, q.last_day))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Scores how smile-shaped a curve is.
///
/// Day `d` of an `n`-day month falls in quintile `floor((d - 1) · 5 / n)`.
/// With `m0..m4` the normalized quintile masses, the index is
/// `m0 + m4 - |m0 - m4| - 2·min(m1, m2, m3)`, i.e.
/// `2·(min(m0, m4) - min(m1, m2, m3))`: high only when both ends carry mass
/// and the middle sags. A uniform 30-day curve scores 0; pure decay (all
/// mass in the bottom quintile) scores 0; an even split between the two end
/// buckets scores 1.
pub fn smile_index(curve: &PowerUserCurve) -> Result<SmileIndex, CohortError> {
    let total = curve.active_users();
    if total == 0 {
        return Err(CohortError::EmptyCurve);
    }
    let n = curve.days();
    let mut quintiles = [QuintileMass {
        first_day: u32::MAX,
        last_day: 0,
        mass: 0.0,
    }; 5];
    for d in 1..=n {
        let q = &mut quintiles[((d - 1) * 5 / n) as usize];
        q.first_day = q.first_day.min(d);
        q.last_day = q.last_day.max(d);
        q.mass += curve.bucket(d) as f64;
    }
    for q in quintiles.iter_mut() {
        q.mass /= total as f64;
    }
    let m: Vec<f64> = quintiles.iter().map(|q| q.mass).collect();
    let interior_min = m[1].min(m[2]).min(m[3]);
    let value = m[0] + m[4] - (m[0] - m[4]).abs() - 2.0 * interior_min;
    Ok(SmileIndex { value, quintiles })
}
