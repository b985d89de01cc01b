//! Canonical platform event schema, ingestion and store validation.
//!
//! Wire formats:
//!
//! * JSONL: one object per line with keys `ts`, `kind`, and optionally
//!   `user_id`, `amount`, `passed`, `project_id`.
//! * CSV: header `ts,kind,user_id,amount,passed,project_id`, empty cell = absent.
//!
//! Records that violate the schema are skipped and counted; ingestion only
//! fails outright when the source cannot be read or nothing valid remains.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::{parse_day, DateWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SignUp,
    GreatUserGranted,
    CreditPaid,
    Withdrawal,
    BalanceSnapshot,
    TaskSubmitted,
    TaskReviewed,
    ProjectOpened,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::SignUp,
        EventKind::GreatUserGranted,
        EventKind::CreditPaid,
        EventKind::Withdrawal,
        EventKind::BalanceSnapshot,
        EventKind::TaskSubmitted,
        EventKind::TaskReviewed,
        EventKind::ProjectOpened,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::SignUp => "sign_up",
            EventKind::GreatUserGranted => "great_user_granted",
            EventKind::CreditPaid => "credit_paid",
            EventKind::Withdrawal => "withdrawal",
            EventKind::BalanceSnapshot => "balance_snapshot",
            EventKind::TaskSubmitted => "task_submitted",
            EventKind::TaskReviewed => "task_reviewed",
            EventKind::ProjectOpened => "project_opened",
        }
    }

    pub fn carries_amount(&self) -> bool {
        matches!(
            self,
            EventKind::CreditPaid | EventKind::Withdrawal | EventKind::BalanceSnapshot
        )
    }

    pub fn carries_user(&self) -> bool {
        !matches!(self, EventKind::ProjectOpened | EventKind::BalanceSnapshot)
    }

    pub fn carries_project(&self) -> bool {
        matches!(
            self,
            EventKind::TaskSubmitted | EventKind::TaskReviewed | EventKind::ProjectOpened
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| RecordError::SchemaViolation(format!("unknown kind {s:?}")))
    }
}

/// The seven growth drivers analysed pairwise. Declaration order is the
/// canonical row/column order of the influence matrix and the tie-break order
/// of the impact ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    User,
    GreatUser,
    SuperUser,
    Credit,
    Withdraw,
    RemainedCredit,
    Project,
}

impl DriverKind {
    pub const ALL: [DriverKind; 7] = [
        DriverKind::User,
        DriverKind::GreatUser,
        DriverKind::SuperUser,
        DriverKind::Credit,
        DriverKind::Withdraw,
        DriverKind::RemainedCredit,
        DriverKind::Project,
    ];

    /// Human-readable label used in rendered tables.
    pub fn label(&self) -> &'static str {
        match self {
            DriverKind::User => "User",
            DriverKind::GreatUser => "Great User",
            DriverKind::SuperUser => "Super User",
            DriverKind::Credit => "Credit",
            DriverKind::Withdraw => "Withdraw",
            DriverKind::RemainedCredit => "Remained Credit",
            DriverKind::Project => "Project",
        }
    }

    /// Machine-friendly name used in file names and JSON.
    pub fn slug(&self) -> &'static str {
        match self {
            DriverKind::User => "user",
            DriverKind::GreatUser => "great_user",
            DriverKind::SuperUser => "super_user",
            DriverKind::Credit => "credit",
            DriverKind::Withdraw => "withdraw",
            DriverKind::RemainedCredit => "remained_credit",
            DriverKind::Project => "project",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    /// Cumulative stocks of users, as opposed to daily flows or snapshots.
    pub fn is_cumulative(&self) -> bool {
        matches!(
            self,
            DriverKind::User | DriverKind::GreatUser | DriverKind::SuperUser
        )
    }
}

impl fmt::Display for DriverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown driver {0:?}")]
pub struct ParseDriverError(String);

impl FromStr for DriverKind {
    type Err = ParseDriverError;

    /// Accepts either the slug (`remained_credit`) or the label (`Remained Credit`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        DriverKind::ALL
            .into_iter()
            .find(|d| d.slug() == t || d.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| ParseDriverError(s.to_string()))
    }
}

/// One platform event at day resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub date: NaiveDate,
    pub kind: EventKind,
    pub user_id: Option<String>,
    pub amount: Option<f64>,
    pub passed: Option<bool>,
    pub project_id: Option<String>,
}

impl EventRecord {
    pub fn new(date: NaiveDate, kind: EventKind) -> Self {
        Self {
            date,
            kind,
            user_id: None,
            amount: None,
            passed: None,
            project_id: None,
        }
    }

    pub fn user(mut self, id: impl Into<String>) -> Self {
        self.user_id = Some(id.into());
        self
    }

    pub fn amount(mut self, amount: f64) -> Self {
        self.amount = Some(amount);
        self
    }

    pub fn passed(mut self, passed: bool) -> Self {
        self.passed = Some(passed);
        self
    }

    pub fn project(mut self, id: impl Into<String>) -> Self {
        self.project_id = Some(id.into());
        self
    }

    /// Checks the presence rules tying optional fields to the event kind.
    pub fn validate(&self) -> Result<(), RecordError> {
        let kind = self.kind;
        let violation = |msg: String| Err(RecordError::SchemaViolation(msg));
        match (kind.carries_amount(), self.amount) {
            (true, None) => return violation(format!("{kind} requires amount")),
            (false, Some(_)) => return violation(format!("{kind} must not carry amount")),
            (true, Some(a)) if !a.is_finite() || a < 0.0 => {
                return violation(format!("amount {a} is not a non-negative number"))
            }
            _ => {}
        }
        match (kind == EventKind::TaskReviewed, self.passed) {
            (true, None) => return violation(format!("{kind} requires passed")),
            (false, Some(_)) => return violation(format!("{kind} must not carry passed")),
            _ => {}
        }
        match (kind.carries_user(), self.user_id.as_deref()) {
            (true, None) | (true, Some("")) => {
                return violation(format!("{kind} requires user_id"))
            }
            (false, Some(_)) => return violation(format!("{kind} must not carry user_id")),
            _ => {}
        }
        match (kind.carries_project(), self.project_id.as_deref()) {
            (true, None) | (true, Some("")) => {
                return violation(format!("{kind} requires project_id"))
            }
            (false, Some(_)) => return violation(format!("{kind} must not carry project_id")),
            _ => {}
        }
        Ok(())
    }
}

/// Why a single input record was rejected.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("unreadable source: {0}")]
    UnreadableSource(String),
    #[error("input contained no valid records ({skipped} skipped)")]
    EmptyInput { skipped: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestFormat {
    Jsonl,
    Csv,
}

impl FromStr for IngestFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(IngestFormat::Jsonl),
            "csv" => Ok(IngestFormat::Csv),
            other => Err(format!("unknown format {other:?}, expected jsonl or csv")),
        }
    }
}

/// Chronologically sorted, immutable collection of events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStore {
    records: Vec<EventRecord>,
    span: Option<DateWindow>,
}

impl EventStore {
    /// Sorts `records` by date (stable) and derives the date span.
    pub fn new(mut records: Vec<EventRecord>) -> Self {
        records.sort_by_key(|r| r.date);
        let span = match (records.first(), records.last()) {
            (Some(a), Some(b)) => Some(DateWindow {
                from: a.date,
                to: b.date,
            }),
            _ => None,
        };
        Self { records, span }
    }

    /// Builds a store exactly as given, without sorting or span derivation.
    /// Meant for auditing externally produced data with [`validate_store`].
    pub fn from_parts_unchecked(records: Vec<EventRecord>, span: Option<DateWindow>) -> Self {
        Self { records, span }
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn span(&self) -> Option<DateWindow> {
        self.span
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter_kind(&self, kind: EventKind) -> impl Iterator<Item = &EventRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn count_by_kind(&self) -> BTreeMap<EventKind, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.kind).or_insert(0) += 1;
        }
        counts
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, &WireEvent::from(r))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.date.to_string(),
                r.kind.to_string(),
                r.user_id.clone().unwrap_or_default(),
                r.amount.map(|a| a.to_string()).unwrap_or_default(),
                r.passed.map(|p| p.to_string()).unwrap_or_default(),
                r.project_id.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()
    }
}

const CSV_HEADER: [&str; 6] = ["ts", "kind", "user_id", "amount", "passed", "project_id"];

#[derive(Debug, Serialize, Deserialize)]
struct WireEvent {
    ts: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    user_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    passed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    project_id: Option<String>,
}

impl From<&EventRecord> for WireEvent {
    fn from(r: &EventRecord) -> Self {
        WireEvent {
            ts: r.date.to_string(),
            kind: r.kind.as_str().to_string(),
            user_id: r.user_id.clone(),
            amount: r.amount,
            passed: r.passed,
            project_id: r.project_id.clone(),
        }
    }
}

impl TryFrom<WireEvent> for EventRecord {
    type Error = RecordError;

    fn try_from(w: WireEvent) -> Result<Self, Self::Error> {
        let date = parse_day(&w.ts)
            .ok_or_else(|| RecordError::SchemaViolation(format!("bad ts {:?}", w.ts)))?;
        let record = EventRecord {
            date,
            kind: w.kind.parse()?,
            user_id: w.user_id,
            amount: w.amount,
            passed: w.passed,
            project_id: w.project_id,
        };
        record.validate()?;
        Ok(record)
    }
}

/// A rejected input record and its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    pub line: usize,
    pub error: RecordError,
}

/// Result of a successful ingestion.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub store: EventStore,
    pub skipped: Vec<SkippedRecord>,
}

impl Ingested {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }
}

/// Loads and validates an event log.
///
/// Blank lines are ignored. Every other line (or CSV row) is either accepted
/// or reported in [`Ingested::skipped`], so
/// `store.len() + skipped.len()` equals the number of input records.
pub fn ingest_events<R: Read>(
    mut source: R,
    format: IngestFormat,
) -> Result<Ingested, IngestError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| IngestError::UnreadableSource(e.to_string()))?;

    let (records, skipped) = match format {
        IngestFormat::Jsonl => parse_jsonl(&text),
        IngestFormat::Csv => parse_csv(&text)?,
    };
    if records.is_empty() {
        return Err(IngestError::EmptyInput {
            skipped: skipped.len(),
        });
    }
    log::debug!(
        "ingested {} records, skipped {}",
        records.len(),
        skipped.len()
    );
    Ok(Ingested {
        store: EventStore::new(records),
        skipped,
    })
}

fn parse_jsonl(text: &str) -> (Vec<EventRecord>, Vec<SkippedRecord>) {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<WireEvent>(line)
            .map_err(|e| RecordError::Malformed(e.to_string()))
            .and_then(EventRecord::try_from);
        match parsed {
            Ok(r) => records.push(r),
            Err(error) => skipped.push(SkippedRecord { line: i + 1, error }),
        }
    }
    (records, skipped)
}

fn parse_csv(text: &str) -> Result<(Vec<EventRecord>, Vec<SkippedRecord>), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::UnreadableSource(e.to_string()))?
        .clone();
    let mut columns = [usize::MAX; 6];
    for (slot, name) in columns.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::UnreadableSource(format!("CSV header lacks {name:?}")))?;
    }

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                skipped.push(SkippedRecord {
                    line,
                    error: RecordError::Malformed(e.to_string()),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        match csv_row_to_record(&row, &columns) {
            Ok(r) => records.push(r),
            Err(error) => skipped.push(SkippedRecord { line, error }),
        }
    }
    Ok((records, skipped))
}

fn csv_row_to_record(
    row: &csv::StringRecord,
    columns: &[usize; 6],
) -> Result<EventRecord, RecordError> {
    let cell = |i: usize| -> Option<String> {
        row.get(columns[i])
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
    };
    let amount = match cell(3) {
        None => None,
        Some(a) => Some(
            a.parse::<f64>()
                .map_err(|_| RecordError::Malformed(format!("amount {a:?} is not a number")))?,
        ),
    };
    let passed = match cell(4).as_deref() {
        None => None,
        Some("true") | Some("1") => Some(true),
        Some("false") | Some("0") => Some(false),
        Some(other) => {
            return Err(RecordError::Malformed(format!(
                "passed {other:?} is not a boolean"
            )))
        }
    };
    WireEvent {
        ts: cell(0).unwrap_or_default(),
        kind: cell(1).unwrap_or_default(),
        user_id: cell(2),
        amount,
        passed,
        project_id: cell(5),
    }
    .try_into()
}

/// A store-level invariant violation found by [`validate_store`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    /// `records[index]` is dated before `records[index - 1]`.
    OutOfOrder {
        index: usize,
    },
    SpanMismatch {
        declared: Option<DateWindow>,
        actual: Option<DateWindow>,
    },
    InvalidRecord {
        index: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub counts: BTreeMap<EventKind, usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits ordering, span and per-record schema rules. Never fails.
pub fn validate_store(store: &EventStore) -> ValidationReport {
    let mut violations = Vec::new();
    let records = store.records();
    for (i, pair) in records.windows(2).enumerate() {
        if pair[1].date < pair[0].date {
            violations.push(Violation::OutOfOrder { index: i + 1 });
        }
    }
    for (index, r) in records.iter().enumerate() {
        if let Err(e) = r.validate() {
            violations.push(Violation::InvalidRecord {
                index,
                reason: e.to_string(),
            });
        }
    }
    let actual = records
        .iter()
        .map(|r| r.date)
        .min()
        .zip(records.iter().map(|r| r.date).max())
        .map(|(from, to)| DateWindow { from, to });
    if actual != store.span() {
        violations.push(Violation::SpanMismatch {
            declared: store.span(),
            actual,
        });
    }
    ValidationReport {
        violations,
        counts: store.count_by_kind(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        parse_day(s).unwrap()
    }

    fn jsonl(text: &str) -> Result<Ingested, IngestError> {
        ingest_events(text.as_bytes(), IngestFormat::Jsonl)
    }

    #[test]
    fn empty_file_is_empty_input() {
        assert!(matches!(
            jsonl(""),
            Err(IngestError::EmptyInput { skipped: 0 })
        ));
        assert!(matches!(
            ingest_events(
                "ts,kind,user_id,amount,passed,project_id\n".as_bytes(),
                IngestFormat::Csv
            ),
            Err(IngestError::EmptyInput { .. })
        ));
    }

    #[test]
    fn three_valid_lines() {
        let input = r#"{"ts":"2020-07-03","kind":"project_opened","project_id":"p1"}
{"ts":"2020-07-01","kind":"sign_up","user_id":"u1"}
{"ts":"2020-07-02","kind":"credit_paid","user_id":"u1","amount":100}
"#;
        let got = jsonl(input).unwrap();
        assert_eq!(got.store.len(), 3);
        assert_eq!(got.skipped_count(), 0);
        assert_eq!(
            got.store.span(),
            Some(DateWindow {
                from: d("2020-07-01"),
                to: d("2020-07-03")
            })
        );
        assert_eq!(got.store.records()[0].kind, EventKind::SignUp);
        assert_eq!(got.store.records()[2].kind, EventKind::ProjectOpened);
    }

    #[test]
    fn sign_up_with_amount_is_skipped() {
        let input = "{\"ts\":\"2020-07-01\",\"kind\":\"sign_up\",\"user_id\":\"u1\"}\n\
                     {\"ts\":\"2020-07-01\",\"kind\":\"sign_up\",\"user_id\":\"u2\",\"amount\":5}\n";
        let got = jsonl(input).unwrap();
        assert_eq!(got.store.len(), 1);
        assert_eq!(got.skipped_count(), 1);
        assert_eq!(got.skipped[0].line, 2);
        assert!(matches!(
            got.skipped[0].error,
            RecordError::SchemaViolation(_)
        ));
    }

    #[test]
    fn schema_rules() {
        let day = d("2020-07-01");
        let ok = [
            EventRecord::new(day, EventKind::SignUp).user("u"),
            EventRecord::new(day, EventKind::BalanceSnapshot).amount(0.0),
            EventRecord::new(day, EventKind::TaskReviewed)
                .user("u")
                .project("p")
                .passed(false),
            EventRecord::new(day, EventKind::ProjectOpened).project("p"),
        ];
        for r in ok {
            assert_eq!(r.validate(), Ok(()), "{r:?}");
        }
        let bad = [
            EventRecord::new(day, EventKind::CreditPaid).user("u"),
            EventRecord::new(day, EventKind::CreditPaid)
                .user("u")
                .amount(-1.0),
            EventRecord::new(day, EventKind::Withdrawal)
                .user("u")
                .amount(f64::NAN),
            EventRecord::new(day, EventKind::TaskReviewed)
                .user("u")
                .project("p"),
            EventRecord::new(day, EventKind::TaskSubmitted)
                .user("u")
                .project("p")
                .passed(true),
            EventRecord::new(day, EventKind::BalanceSnapshot)
                .amount(1.0)
                .user("u"),
            EventRecord::new(day, EventKind::ProjectOpened),
            EventRecord::new(day, EventKind::GreatUserGranted),
        ];
        for r in bad {
            assert!(r.validate().is_err(), "{r:?}");
        }
    }

    #[test]
    fn malformed_and_unknown_lines_are_counted() {
        let input = "not json\n\n{\"ts\":\"2020-07-01\",\"kind\":\"login\",\"user_id\":\"u\"}\n\
                     {\"ts\":\"2020-07-01T10:00:00Z\",\"kind\":\"sign_up\",\"user_id\":\"u\"}\n";
        let got = jsonl(input).unwrap();
        assert_eq!(got.store.len(), 1);
        assert_eq!(got.skipped_count(), 2);
        assert_eq!(got.store.records()[0].date, d("2020-07-01"));
    }

    #[test]
    fn invalid_utf8_is_unreadable() {
        let bytes: &[u8] = &[0xff, 0xfe, b'\n'];
        assert!(matches!(
            ingest_events(bytes, IngestFormat::Jsonl),
            Err(IngestError::UnreadableSource(_))
        ));
    }

    #[test]
    fn csv_ingestion() {
        let input = "ts,kind,user_id,amount,passed,project_id\n\
                     2020-07-02,task_reviewed,u1,,true,p1\n\
                     2020-07-01,balance_snapshot,,12.5,,\n\
                     2020-07-01,credit_paid,u1,abc,,\n";
        let got = ingest_events(input.as_bytes(), IngestFormat::Csv).unwrap();
        assert_eq!(got.store.len(), 2);
        assert_eq!(got.skipped_count(), 1);
        assert_eq!(got.skipped[0].line, 4);
        assert_eq!(got.store.records()[0].amount, Some(12.5));
        assert_eq!(got.store.records()[1].passed, Some(true));
    }

    #[test]
    fn csv_without_required_header_is_unreadable() {
        let input = "date,kind\n2020-07-01,sign_up\n";
        assert!(matches!(
            ingest_events(input.as_bytes(), IngestFormat::Csv),
            Err(IngestError::UnreadableSource(_))
        ));
    }

    #[test]
    fn sort_is_stable_within_a_day() {
        let day2 = d("2020-07-02");
        let day1 = d("2020-07-01");
        let store = EventStore::new(vec![
            EventRecord::new(day2, EventKind::SignUp).user("a"),
            EventRecord::new(day1, EventKind::SignUp).user("b"),
            EventRecord::new(day2, EventKind::SignUp).user("c"),
            EventRecord::new(day1, EventKind::SignUp).user("d"),
        ]);
        let order: Vec<_> = store
            .records()
            .iter()
            .map(|r| r.user_id.as_deref().unwrap())
            .collect();
        assert_eq!(order, ["b", "d", "a", "c"]);
    }

    #[test]
    fn unsorted_store_is_flagged() {
        let records = vec![
            EventRecord::new(d("2020-07-02"), EventKind::SignUp).user("a"),
            EventRecord::new(d("2020-07-01"), EventKind::SignUp).user("b"),
        ];
        let span = DateWindow::new(d("2020-07-01"), d("2020-07-02"));
        let report = validate_store(&EventStore::from_parts_unchecked(records, span));
        assert_eq!(report.violations, vec![Violation::OutOfOrder { index: 1 }]);
        assert_eq!(report.counts[&EventKind::SignUp], 2);
    }

    #[test]
    fn span_mismatch_is_flagged() {
        let records = vec![EventRecord::new(d("2020-07-02"), EventKind::SignUp).user("a")];
        let report = validate_store(&EventStore::from_parts_unchecked(records, None));
        assert!(matches!(
            report.violations[..],
            [Violation::SpanMismatch { .. }]
        ));
        assert!(validate_store(&EventStore::default()).is_valid());
    }

    #[test]
    fn driver_names_round_trip() {
        for d in DriverKind::ALL {
            assert_eq!(d.slug().parse::<DriverKind>().unwrap(), d);
            assert_eq!(d.label().parse::<DriverKind>().unwrap(), d);
        }
        assert_eq!(DriverKind::ALL.len(), 7);
    }
}
