//! Daily driver series and their discretization into symbol sequences.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::DateWindow;
use crate::cohorts::UserCohort;
use crate::events::{DriverKind, EventKind, EventStore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("driver SuperUser requires a cohort")]
    MissingCohort,
    #[error("analysis window is empty")]
    EmptyWindow,
    #[error("series of length {len} is too short, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("invalid discretization scheme: {0}")]
    InvalidScheme(String),
    #[error("symbol {symbol} at position {position} is outside alphabet of size {alphabet_size}")]
    SymbolOutOfRange {
        symbol: u32,
        position: usize,
        alphabet_size: u32,
    },
}

/// One value per consecutive day, starting at `start_date`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub driver: DriverKind,
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `date,<driver slug>` CSV for auditing.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", self.driver.slug()])?;
        let mut date = self.start_date;
        for v in &self.values {
            w.write_record([date.to_string(), v.to_string()])?;
            date = date.succ_opt().expect("date overflow");
        }
        w.flush()
    }
}

/// A discretized sequence; every symbol is `< alphabet_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSeries {
    symbols: Vec<u32>,
    alphabet_size: u32,
    source_driver: Option<DriverKind>,
}

impl SymbolSeries {
    pub fn new(symbols: Vec<u32>, alphabet_size: u32) -> Result<Self, SeriesError> {
        if let Some((position, &symbol)) = symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s >= alphabet_size)
        {
            return Err(SeriesError::SymbolOutOfRange {
                symbol,
                position,
                alphabet_size,
            });
        }
        Ok(Self {
            symbols,
            alphabet_size,
            source_driver: None,
        })
    }

    pub fn with_driver(mut self, driver: DriverKind) -> Self {
        self.source_driver = Some(driver);
        self
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn source_driver(&self) -> Option<DriverKind> {
        self.source_driver
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Same alphabet and driver, different symbols. Used for surrogates.
    pub(crate) fn with_symbols(&self, symbols: Vec<u32>) -> Self {
        Self {
            symbols,
            alphabet_size: self.alphabet_size,
            source_driver: self.source_driver,
        }
    }

    /// Occurrences of each symbol.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.alphabet_size as usize];
        for &s in &self.symbols {
            h[s as usize] += 1;
        }
        h
    }
}

/// How a [`TimeSeries`] is mapped to symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DiscretizationScheme {
    /// Sign of first differences: 0 = down, 1 = flat (|d| ≤ ε), 2 = up.
    SlopeSign { flat_epsilon: f64 },
    /// Raw levels mapped to empirical-quantile bins.
    QuantileBins { bin_count: u32 },
}

impl Default for DiscretizationScheme {
    fn default() -> Self {
        DiscretizationScheme::SlopeSign { flat_epsilon: 0.0 }
    }
}

impl DiscretizationScheme {
    pub fn alphabet_size(&self) -> u32 {
        match self {
            DiscretizationScheme::SlopeSign { .. } => 3,
            DiscretizationScheme::QuantileBins { bin_count } => *bin_count,
        }
    }

    pub fn validate(&self) -> Result<(), SeriesError> {
        match *self {
            DiscretizationScheme::SlopeSign { flat_epsilon }
                if !(flat_epsilon >= 0.0 && flat_epsilon.is_finite()) =>
            {
                Err(SeriesError::InvalidScheme(format!(
                    "epsilon {flat_epsilon} must be a non-negative number"
                )))
            }
            DiscretizationScheme::QuantileBins { bin_count } if bin_count < 2 => Err(
                SeriesError::InvalidScheme(format!("bin count {bin_count} must be at least 2")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DiscretizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscretizationScheme::SlopeSign { .. } => f.write_str("slope"),
            DiscretizationScheme::QuantileBins { bin_count } => write!(f, "quantile:{bin_count}"),
        }
    }
}

impl FromStr for DiscretizationScheme {
    type Err = SeriesError;

    /// Parses `slope` or `quantile:N`. The slope epsilon defaults to 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let scheme = match s.trim() {
            "slope" => DiscretizationScheme::SlopeSign { flat_epsilon: 0.0 },
            other => {
                let n = other
                    .strip_prefix("quantile:")
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| {
                        SeriesError::InvalidScheme(format!(
                            "{other:?}, expected slope or quantile:N"
                        ))
                    })?;
                DiscretizationScheme::QuantileBins { bin_count: n }
            }
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// Builds the daily series of one driver over `window`.
///
/// * User, GreatUser, SuperUser: cumulative count of users whose qualifying
///   date (first sign-up, first grant, cohort qualification) is on or before
///   the day. Users qualifying before the window are included.
/// * Credit, Withdraw: sum of amounts paid / withdrawn that day.
/// * RemainedCredit: last balance snapshot on or before the day, else 0.
/// * Project: number of projects opened that day.
pub fn build_driver_series(
    store: &EventStore,
    driver: DriverKind,
    window: DateWindow,
    cohort: Option<&UserCohort>,
) -> Result<TimeSeries, SeriesError> {
    if window.from > window.to {
        return Err(SeriesError::EmptyWindow);
    }
    let len = window.len_days();
    let values = match driver {
        DriverKind::User => cumulative(first_dates(store, EventKind::SignUp), window),
        DriverKind::GreatUser => {
            cumulative(first_dates(store, EventKind::GreatUserGranted), window)
        }
        DriverKind::SuperUser => {
            let cohort = cohort.ok_or(SeriesError::MissingCohort)?;
            cumulative(cohort.members().values().copied(), window)
        }
        DriverKind::Credit => daily_sum(store, EventKind::CreditPaid, window, |r| {
            r.amount.unwrap_or(0.0)
        }),
        DriverKind::Withdraw => daily_sum(store, EventKind::Withdrawal, window, |r| {
            r.amount.unwrap_or(0.0)
        }),
        DriverKind::Project => daily_sum(store, EventKind::ProjectOpened, window, |_| 1.0),
        DriverKind::RemainedCredit => carried_balance(store, window),
    };
    debug_assert_eq!(values.len(), len);
    Ok(TimeSeries {
        driver,
        start_date: window.from,
        values,
    })
}

fn first_dates(store: &EventStore, kind: EventKind) -> impl Iterator<Item = NaiveDate> {
    let mut first: HashMap<&str, NaiveDate> = HashMap::new();
    for r in store.iter_kind(kind) {
        if let Some(user) = r.user_id.as_deref() {
            // Records are date-sorted, so the first sighting is the earliest.
            first.entry(user).or_insert(r.date);
        }
    }
    first.into_values().collect::<Vec<_>>().into_iter()
}

fn cumulative(dates: impl Iterator<Item = NaiveDate>, window: DateWindow) -> Vec<f64> {
    let mut increments = vec![0u64; window.len_days()];
    let mut before = 0u64;
    for date in dates {
        if date < window.from {
            before += 1;
        } else if let Some(i) = window.offset(date) {
            increments[i] += 1;
        }
    }
    let mut total = before;
    increments
        .into_iter()
        .map(|inc| {
            total += inc;
            total as f64
        })
        .collect()
}

fn daily_sum(
    store: &EventStore,
    kind: EventKind,
    window: DateWindow,
    value: impl Fn(&crate::events::EventRecord) -> f64,
) -> Vec<f64> {
    let mut out = vec![0.0; window.len_days()];
    for r in store.iter_kind(kind) {
        if let Some(i) = window.offset(r.date) {
            out[i] += value(r);
        }
    }
    out
}

fn carried_balance(store: &EventStore, window: DateWindow) -> Vec<f64> {
    let mut last_on_day: Vec<Option<f64>> = vec![None; window.len_days()];
    let mut before = 0.0;
    for r in store.iter_kind(EventKind::BalanceSnapshot) {
        let amount = r.amount.unwrap_or(0.0);
        if r.date < window.from {
            before = amount;
        } else if let Some(i) = window.offset(r.date) {
            last_on_day[i] = Some(amount);
        }
    }
    let mut current = before;
    last_on_day
        .into_iter()
        .map(|v| {
            if let Some(v) = v {
                current = v;
            }
            current
        })
        .collect()
}

/// Maps a series to symbols.
///
/// `SlopeSign` yields `len - 1` symbols; `QuantileBins` yields one symbol
/// per value, where a value's bin is `floor(rank * bins / len)` and `rank`
/// counts strictly smaller values, so ties land in the lowest shared bin.
pub fn discretize(
    series: &TimeSeries,
    scheme: DiscretizationScheme,
) -> Result<SymbolSeries, SeriesError> {
    scheme.validate()?;
    let values = &series.values;
    let symbols = match scheme {
        DiscretizationScheme::SlopeSign { flat_epsilon } => {
            if values.len() < 2 {
                return Err(SeriesError::SeriesTooShort {
                    len: values.len(),
                    min: 2,
                });
            }
            values
                .windows(2)
                .map(|w| slope_symbol(w[1] - w[0], flat_epsilon))
                .collect()
        }
        DiscretizationScheme::QuantileBins { bin_count } => {
            let n = values.len();
            if n < bin_count as usize {
                return Err(SeriesError::SeriesTooShort {
                    len: n,
                    min: bin_count as usize,
                });
            }
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            values
                .iter()
                .map(|v| {
                    let rank = sorted.partition_point(|s| s.total_cmp(v).is_lt());
                    (rank * bin_count as usize / n) as u32
                })
                .collect()
        }
    };
    Ok(SymbolSeries {
        symbols,
        alphabet_size: scheme.alphabet_size(),
        source_driver: Some(series.driver),
    })
}

fn slope_symbol(diff: f64, eps: f64) -> u32 {
    if diff < -eps {
        0
    } else if diff > eps {
        2
    } else {
        1
    }
}
