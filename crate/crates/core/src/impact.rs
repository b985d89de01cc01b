//! Driver-by-driver transfer entropy matrix and the 100-point impact ranking.
//!
//! Orientation: `cell(row = source J, column = destination I)` holds
//! T(J→I). The Credit row / Project column therefore reads "credit payments
//! drive project openings".

use std::collections::BTreeMap;
use std::io::Read;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::events::DriverKind;
use crate::series::SymbolSeries;
use crate::te::{shuffle_surrogate_threshold, transfer_entropy, HistoryConfig, TeError};

/// Raw values are multiplied by this to obtain arbitrary units (A.U.).
pub const AU_SCALE: f64 = 10_000.0;

const N: usize = DriverKind::ALL.len();

/// The eleven source → destination pairs of the reference ranking, in its
/// printed order.
pub const REFERENCE_ROWS: [(DriverKind, DriverKind); 11] = {
    use DriverKind::*;
    [
        (Credit, Project),
        (SuperUser, Project),
        (User, GreatUser),
        (User, RemainedCredit),
        (SuperUser, User),
        (GreatUser, RemainedCredit),
        (GreatUser, Credit),
        (GreatUser, Withdraw),
        (Withdraw, User),
        (RemainedCredit, Project),
        (RemainedCredit, Withdraw),
    ]
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImpactError {
    #[error("no symbol series for driver {0}")]
    MissingDriver(DriverKind),
    #[error("series lengths differ: {0} has {1} symbols, {2} has {3}")]
    LengthMismatch(DriverKind, usize, DriverKind, usize),
    #[error("every matrix cell is zero; nothing to normalize")]
    AllZero,
    #[error("matrix table: {0}")]
    BadTable(String),
    #[error(transparent)]
    Te(#[from] TeError),
}

/// 7×7 transfer entropy values in raw log-base units; diagonal absent.
#[derive(Debug, Clone, PartialEq)]
pub struct TeMatrix {
    cells: [[Option<f64>; N]; N],
}

impl Default for TeMatrix {
    fn default() -> Self {
        let mut cells = [[Some(0.0); N]; N];
        for (i, row) in cells.iter_mut().enumerate() {
            row[i] = None;
        }
        Self { cells }
    }
}

impl TeMatrix {
    /// Builds a matrix from raw values; the diagonal is ignored.
    pub fn from_fn(mut f: impl FnMut(DriverKind, DriverKind) -> f64) -> Self {
        let mut m = Self::default();
        for src in DriverKind::ALL {
            for dst in DriverKind::ALL {
                if src != dst {
                    m.cells[src.index()][dst.index()] = Some(f(src, dst));
                }
            }
        }
        m
    }

    pub fn get(&self, source: DriverKind, destination: DriverKind) -> Option<f64> {
        self.cells[source.index()][destination.index()]
    }

    /// Sets an off-diagonal cell. Panics on the diagonal.
    pub fn set(&mut self, source: DriverKind, destination: DriverKind, value: f64) {
        assert_ne!(source, destination, "diagonal cells are undefined");
        self.cells[source.index()][destination.index()] = Some(value);
    }

    /// Off-diagonal cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (DriverKind, DriverKind, f64)> + '_ {
        DriverKind::ALL.into_iter().flat_map(move |src| {
            DriverKind::ALL
                .into_iter()
                .filter_map(move |dst| self.get(src, dst).map(|v| (src, dst, v)))
        })
    }

    pub fn max_cell(&self) -> f64 {
        self.cells().map(|(_, _, v)| v).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_fn(|s, d| self.get(s, d).unwrap_or(0.0) * factor)
    }

    /// Parses a table in A.U. with the layout written by [`render_au_table`]:
    /// a header row of driver labels, then one row per source driver whose
    /// first cell is its label. Diagonal cells must be `-`. Cells are
    /// returned as raw values (A.U. / 10000).
    pub fn from_au_csv<R: Read>(reader: R) -> Result<Self, ImpactError> {
        let bad = |msg: String| ImpactError::BadTable(msg);
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let columns: Vec<DriverKind> = headers
            .iter()
            .skip(1)
            .map(|h| h.parse().map_err(|_| bad(format!("unknown column {h:?}"))))
            .collect::<Result<_, _>>()?;
        check_permutation(&columns).map_err(|m| bad(format!("columns: {m}")))?;

        let mut matrix = Self::default();
        let mut rows = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let label = row.get(0).unwrap_or_default();
            let src: DriverKind = label
                .parse()
                .map_err(|_| bad(format!("unknown row {label:?}")))?;
            if row.len() != columns.len() + 1 {
                return Err(bad(format!("row {label:?} has {} cells", row.len())));
            }
            for (cell, &dst) in row.iter().skip(1).zip(&columns) {
                if src == dst {
                    if cell != "-" {
                        return Err(bad(format!("diagonal cell for {src} must be '-'")));
                    }
                    continue;
                }
                let au: f64 = cell
                    .parse()
                    .map_err(|_| bad(format!("cell {src}→{dst} {cell:?} is not a number")))?;
                if !(au >= 0.0 && au.is_finite()) {
                    return Err(bad(format!("cell {src}→{dst} must be non-negative")));
                }
                matrix.set(src, dst, au / AU_SCALE);
            }
            rows.push(src);
        }
        check_permutation(&rows).map_err(|m| bad(format!("rows: {m}")))?;
        Ok(matrix)
    }

    /// JSON mirror of the matrix: raw values plus their A.U. rendering.
    pub fn to_json(&self) -> Value {
        let raw: Vec<Vec<Option<f64>>> = self.cells.iter().map(|r| r.to_vec()).collect();
        let au: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|r| r.iter().map(|c| au_cell(*c)).collect())
            .collect();
        json!({
            "orientation": "row = source, column = destination",
            "au_scale": AU_SCALE,
            "drivers": DriverKind::ALL.iter().map(|d| d.label()).collect::<Vec<_>>(),
            "raw": raw,
            "au": au,
        })
    }
}

fn check_permutation(drivers: &[DriverKind]) -> Result<(), String> {
    let mut seen = [false; N];
    for d in drivers {
        if std::mem::replace(&mut seen[d.index()], true) {
            return Err(format!("{d} appears twice"));
        }
    }
    match DriverKind::ALL.iter().find(|d| !seen[d.index()]) {
        Some(d) => Err(format!("{d} is missing")),
        None => Ok(()),
    }
}

fn ordered_series(
    series: &BTreeMap<DriverKind, SymbolSeries>,
) -> Result<Vec<&SymbolSeries>, ImpactError> {
    let ordered: Vec<&SymbolSeries> = DriverKind::ALL
        .iter()
        .map(|d| series.get(d).ok_or(ImpactError::MissingDriver(*d)))
        .collect::<Result<_, _>>()?;
    let first = ordered[0].len();
    for (d, s) in DriverKind::ALL.iter().zip(&ordered) {
        if s.len() != first {
            return Err(ImpactError::LengthMismatch(
                DriverKind::ALL[0],
                first,
                *d,
                s.len(),
            ));
        }
    }
    Ok(ordered)
}

fn ordered_pairs() -> Vec<(DriverKind, DriverKind)> {
    DriverKind::ALL
        .into_iter()
        .flat_map(|s| {
            DriverKind::ALL
                .into_iter()
                .filter(move |d| *d != s)
                .map(move |d| (s, d))
        })
        .collect()
}

/// T(J→I) for every ordered pair of distinct drivers. Pairs are evaluated in
/// parallel and assembled row-major, so the result does not depend on the
/// thread count.
pub fn compute_matrix(
    series: &BTreeMap<DriverKind, SymbolSeries>,
    cfg: HistoryConfig,
) -> Result<TeMatrix, ImpactError> {
    let ordered = ordered_series(series)?;
    let values: Vec<Result<f64, TeError>> = ordered_pairs()
        .par_iter()
        .map(|(src, dst)| {
            transfer_entropy(ordered[dst.index()], ordered[src.index()], cfg).map(|r| r.value)
        })
        .collect();
    let mut matrix = TeMatrix::default();
    for ((src, dst), v) in ordered_pairs().into_iter().zip(values) {
        matrix.set(src, dst, v?);
    }
    Ok(matrix)
}

/// Shuffle-surrogate thresholds for every ordered pair, in the same layout
/// as [`compute_matrix`]. Each pair draws from its own stream derived from
/// `seed` and the pair's row-major index.
pub fn surrogate_matrix(
    series: &BTreeMap<DriverKind, SymbolSeries>,
    cfg: HistoryConfig,
    trials: usize,
    seed: u64,
) -> Result<TeMatrix, ImpactError> {
    let ordered = ordered_series(series)?;
    let pairs = ordered_pairs();
    let values: Vec<Result<f64, TeError>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (src, dst))| {
            shuffle_surrogate_threshold(
                ordered[dst.index()],
                ordered[src.index()],
                cfg,
                trials,
                pair_seed(seed, i as u64),
            )
        })
        .collect();
    let mut matrix = TeMatrix::default();
    for ((src, dst), v) in pairs.into_iter().zip(values) {
        matrix.set(src, dst, v?);
    }
    Ok(matrix)
}

/// SplitMix64 finalizer over `seed + index`.
fn pair_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactEntry {
    pub source: DriverKind,
    pub destination: DriverKind,
    /// Raw transfer entropy of the cell.
    pub raw: f64,
    /// `raw / max_cell × 100`.
    pub score: f64,
}

impl ImpactEntry {
    pub fn label(&self) -> String {
        format!("{} to {}", self.source.label(), self.destination.label())
    }
}

/// Off-diagonal cells scored against the matrix maximum, best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactRanking {
    pub entries: Vec<ImpactEntry>,
    pub max_cell: f64,
}

impl ImpactRanking {
    pub fn get(&self, source: DriverKind, destination: DriverKind) -> Option<&ImpactEntry> {
        self.entries
            .iter()
            .find(|e| e.source == source && e.destination == destination)
    }

    /// Keeps only the pairs listed in [`REFERENCE_ROWS`], preserving rank order.
    pub fn reference_rows(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|e| REFERENCE_ROWS.contains(&(e.source, e.destination)))
                .cloned()
                .collect(),
            max_cell: self.max_cell,
        }
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                json!({
                    "source": e.source,
                    "destination": e.destination,
                    "label": e.label(),
                    "raw": e.raw,
                    "F": e.score,
                })
            })
            .collect();
        json!({ "max_cell": self.max_cell, "entries": entries })
    }
}

/// Scores every off-diagonal cell as `cell / max × 100`, sorted by score
/// descending with ties in driver order (source first, then destination).
pub fn normalize_impact(matrix: &TeMatrix) -> Result<ImpactRanking, ImpactError> {
    let max_cell = matrix.max_cell();
    if max_cell <= 0.0 {
        return Err(ImpactError::AllZero);
    }
    let mut entries: Vec<ImpactEntry> = matrix
        .cells()
        .map(|(source, destination, raw)| ImpactEntry {
            source,
            destination,
            raw,
            score: raw / max_cell * 100.0,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.source.cmp(&b.source))
            .then(a.destination.cmp(&b.destination))
    });
    Ok(ImpactRanking { entries, max_cell })
}

/// Formats a non-negative value with `decimals` places, rounding halves up.
/// Values within 1e-9 of a half (in units of the last place) count as halves,
/// absorbing binary representation error such as 142.58499999999998.
pub fn format_half_up(value: f64, decimals: u32) -> String {
    let scale = 10f64.powi(decimals as i32);
    let negative = value < 0.0;
    let scaled = value.abs() * scale;
    let floor = scaled.floor();
    let units = if scaled - floor >= 0.5 - 1e-9 {
        floor + 1.0
    } else {
        floor
    } as u128;
    let sign = if negative && units > 0 { "-" } else { "" };
    if decimals == 0 {
        return format!("{sign}{units}");
    }
    let div = 10u128.pow(decimals);
    format!(
        "{sign}{}.{:0width$}",
        units / div,
        units % div,
        width = decimals as usize
    )
}

fn au_cell(raw: Option<f64>) -> String {
    raw.map_or_else(|| "-".to_string(), |v| format_half_up(v * AU_SCALE, 3))
}

/// Renders the matrix as CSV in A.U. (raw × 10 000, three decimals,
/// diagonal `-`), rows and columns in driver order.
pub fn render_au_table(matrix: &TeMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("-")
        .chain(DriverKind::ALL.iter().map(|d| d.label()))
        .collect();
    w.write_record(&header).expect("in-memory write");
    for src in DriverKind::ALL {
        let row: Vec<String> = std::iter::once(src.label().to_string())
            .chain(
                DriverKind::ALL
                    .iter()
                    .map(|dst| au_cell(matrix.get(src, *dst))),
            )
            .collect();
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Optional extra columns for [`render_ranking_with`].
#[derive(Debug, Clone, Default)]
pub struct RankingColumns<'a> {
    /// Adds `T_au`, the raw cell in A.U.
    pub au: bool,
    /// Adds `surrogate_au` and `above_surrogate` from a threshold matrix.
    pub surrogates: Option<&'a TeMatrix>,
}

/// Two-column `pair,F` CSV. With `top_n`, only the first `top_n` non-zero
/// rows are kept.
pub fn render_ranking(ranking: &ImpactRanking, top_n: Option<usize>) -> String {
    render_ranking_with(ranking, top_n, &RankingColumns::default())
}

pub fn render_ranking_with(
    ranking: &ImpactRanking,
    top_n: Option<usize>,
    columns: &RankingColumns<'_>,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pair", "F"];
    if columns.au {
        header.push("T_au");
    }
    if columns.surrogates.is_some() {
        header.extend(["surrogate_au", "above_surrogate"]);
    }
    w.write_record(&header).expect("in-memory write");

    let rows: Box<dyn Iterator<Item = &ImpactEntry>> = match top_n {
        Some(n) => Box::new(ranking.entries.iter().filter(|e| e.score > 0.0).take(n)),
        None => Box::new(ranking.entries.iter()),
    };
    for e in rows {
        let mut row = vec![e.label(), format_half_up(e.score, 2)];
        if columns.au {
            row.push(format_half_up(e.raw * AU_SCALE, 3));
        }
        if let Some(thresholds) = columns.surrogates {
            let t = thresholds.get(e.source, e.destination).unwrap_or(0.0);
            row.push(format_half_up(t * AU_SCALE, 3));
            row.push((e.raw > t).to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}
