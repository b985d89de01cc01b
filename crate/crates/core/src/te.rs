//! Plug-in transfer entropy between discrete symbol sequences.
//!
//! For a destination `I` and source `J` with history lengths `k` and `l`:
//!
//! ```text
//! T(J→I) = Σ p(i_{t+1}, i_t^(k), j_t^(l)) · log[ p(i_{t+1} | i_t^(k), j_t^(l)) / p(i_{t+1} | i_t^(k)) ]
//! ```
//!
//! Probabilities are empirical frequencies over the tuples
//! `t = m-1 ..= N-2` (0-based, `m = max(k, l)`), i.e. `N - m` samples.
//! [`transfer_entropy`] works from a sparse, sorted count table;
//! [`brute_force_te_oracle`] materialises the full dense probability cube
//! and must agree with it to 1e-12.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::events::DriverKind;
use crate::series::SymbolSeries;

/// Rounding slack below zero that is silently clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Largest dense table the oracle will build.
pub const ORACLE_MAX_CELLS: u64 = 1_000_000;

/// Percentile of the surrogate distribution reported as the threshold.
pub const SURROGATE_PERCENTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TeError {
    #[error("series lengths differ: destination {dest}, source {src}")]
    LengthMismatch { dest: usize, src: usize },
    #[error("series of length {len} is too short for history length {history}")]
    TooShort { len: usize, history: usize },
    #[error("history lengths must be at least 1 (k = {k}, l = {l})")]
    InvalidHistory { k: usize, l: usize },
    #[error("history of {len} symbols over alphabet {alphabet} does not fit a 64-bit code")]
    HistoryTooLong { len: usize, alphabet: u32 },
    #[error("dense table of {cells} cells exceeds the oracle bound of {ORACLE_MAX_CELLS}")]
    AlphabetTooLarge { cells: u128 },
    #[error("surrogate trials must be at least 1")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    /// Converts a value in nats to this base.
    fn scale_nats(&self, nats: f64) -> f64 {
        match self {
            LogBase::Bits => nats / std::f64::consts::LN_2,
            LogBase::Nats => nats,
        }
    }

    fn log(&self, x: f64) -> f64 {
        match self {
            LogBase::Bits => x.log2(),
            LogBase::Nats => x.ln(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bits" | "bit" | "2" => Ok(LogBase::Bits),
            "nats" | "nat" | "e" => Ok(LogBase::Nats),
            other => Err(format!("unknown log base {other:?}, expected bits or nats")),
        }
    }
}

/// Destination history `k`, source history `l` and log base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryConfig {
    pub k: usize,
    pub l: usize,
    pub log_base: LogBase,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        Self {
            k: 1,
            l: 1,
            log_base: LogBase::Bits,
        }
    }
}

impl HistoryConfig {
    pub fn new(k: usize, l: usize, log_base: LogBase) -> Result<Self, TeError> {
        let cfg = Self { k, l, log_base };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TeError> {
        if self.k == 0 || self.l == 0 {
            return Err(TeError::InvalidHistory {
                k: self.k,
                l: self.l,
            });
        }
        Ok(())
    }

    fn max_history(&self) -> usize {
        self.k.max(self.l)
    }
}

/// Packs a history (oldest symbol first) into a mixed-radix code.
pub fn encode_history(symbols: &[u32], alphabet: u32) -> u64 {
    symbols
        .iter()
        .fold(0u64, |code, &s| code * alphabet as u64 + s as u64)
}

/// Inverse of [`encode_history`].
pub fn decode_history(mut code: u64, len: usize, alphabet: u32) -> Vec<u32> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = (code % alphabet as u64) as u32;
        code /= alphabet as u64;
    }
    out
}

/// One cell of the joint table: next destination symbol, destination history
/// code and source history code (see [`encode_history`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointKey {
    pub dest_history: u64,
    pub source_history: u64,
    pub next: u32,
}

impl JointKey {
    pub fn new(next: u32, dest_history: u64, source_history: u64) -> Self {
        Self {
            dest_history,
            source_history,
            next,
        }
    }
}

/// Sparse joint counts of `(next, dest history, source history)` tuples,
/// sorted by `(dest history, source history, next)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    entries: Vec<(JointKey, u64)>,
    total: u64,
    dest_alphabet: u32,
    source_alphabet: u32,
}

impl JointCounts {
    pub fn entries(&self) -> &[(JointKey, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, key: JointKey) -> u64 {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&key))
            .map_or(0, |i| self.entries[i].1)
    }

    pub fn dest_alphabet(&self) -> u32 {
        self.dest_alphabet
    }

    pub fn source_alphabet(&self) -> u32 {
        self.source_alphabet
    }

    /// Counts of `(next, dest history)` with the source history summed out.
    pub fn dest_marginal(&self) -> Vec<((u32, u64), u64)> {
        let mut m = std::collections::BTreeMap::new();
        for (k, c) in &self.entries {
            *m.entry((k.next, k.dest_history)).or_insert(0) += c;
        }
        m.into_iter().collect()
    }
}

fn check_inputs(
    dest: &SymbolSeries,
    src: &SymbolSeries,
    cfg: &HistoryConfig,
) -> Result<usize, TeError> {
    cfg.validate()?;
    if dest.len() != src.len() {
        return Err(TeError::LengthMismatch {
            dest: dest.len(),
            src: src.len(),
        });
    }
    let m = cfg.max_history();
    if dest.len() <= m {
        return Err(TeError::TooShort {
            len: dest.len(),
            history: m,
        });
    }
    for (len, alphabet) in [(cfg.k, dest.alphabet_size()), (cfg.l, src.alphabet_size())] {
        let fits = (alphabet as u128)
            .checked_pow(len as u32)
            .is_some_and(|c| c <= u64::MAX as u128);
        if !fits {
            return Err(TeError::HistoryTooLong { len, alphabet });
        }
    }
    Ok(dest.len() - m)
}

/// Tallies `(dest[t+1], dest[t-k+1..=t], src[t-l+1..=t])` for every `t`
/// from `max(k,l) - 1` to `N - 2`.
pub fn joint_counts(
    dest: &SymbolSeries,
    src: &SymbolSeries,
    cfg: HistoryConfig,
) -> Result<JointCounts, TeError> {
    let samples = check_inputs(dest, src, &cfg)?;
    let d = dest.symbols();
    let s = src.symbols();
    let (da, sa) = (dest.alphabet_size(), src.alphabet_size());
    let start = cfg.max_history() - 1;

    let mut keys: Vec<JointKey> = (start..d.len() - 1)
        .map(|t| JointKey {
            next: d[t + 1],
            dest_history: encode_history(&d[t + 1 - cfg.k..=t], da),
            source_history: encode_history(&s[t + 1 - cfg.l..=t], sa),
        })
        .collect();
    assert_eq!(keys.len(), samples, "tuple count must equal N - max(k, l)");
    keys.sort_unstable();

    let mut entries: Vec<(JointKey, u64)> = Vec::new();
    for key in keys {
        match entries.last_mut() {
            Some((last, count)) if *last == key => *count += 1,
            _ => entries.push((key, 1)),
        }
    }
    Ok(JointCounts {
        entries,
        total: samples as u64,
        dest_alphabet: da,
        source_alphabet: sa,
    })
}

/// Transfer entropy estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TeResult {
    pub value: f64,
    pub sample_count: u64,
    pub source: Option<DriverKind>,
    pub destination: Option<DriverKind>,
}

fn clamp_non_negative(value: f64) -> f64 {
    if value < 0.0 {
        assert!(
            value >= -NEGATIVE_CLAMP,
            "transfer entropy {value} is negative beyond rounding slack"
        );
        0.0
    } else {
        value
    }
}

fn result(value: f64, samples: u64, dest: &SymbolSeries, src: &SymbolSeries) -> TeResult {
    TeResult {
        value: clamp_non_negative(value),
        sample_count: samples,
        source: src.source_driver(),
        destination: dest.source_driver(),
    }
}

/// Estimates T(src → dest) from the sparse joint counts.
pub fn transfer_entropy(
    dest: &SymbolSeries,
    src: &SymbolSeries,
    cfg: HistoryConfig,
) -> Result<TeResult, TeError> {
    let counts = joint_counts(dest, src, cfg)?;
    let nats = te_from_counts(&counts);
    Ok(result(
        cfg.log_base.scale_nats(nats),
        counts.total,
        dest,
        src,
    ))
}

/// Σ c/T · ln(c · c_d / (c_ds · c_nd)) over observed cells, in key order.
fn te_from_counts(counts: &JointCounts) -> f64 {
    let entries = counts.entries();
    let total = counts.total as f64;
    let mut next_given_dest = vec![0u64; counts.dest_alphabet as usize];
    let mut sum = 0.0;

    let mut i = 0;
    while i < entries.len() {
        // Entries sharing a destination history are contiguous.
        let dh = entries[i].0.dest_history;
        let end = i + entries[i..]
            .iter()
            .take_while(|(k, _)| k.dest_history == dh)
            .count();
        let group = &entries[i..end];

        next_given_dest.iter_mut().for_each(|c| *c = 0);
        let mut c_d = 0u64;
        for (k, c) in group {
            next_given_dest[k.next as usize] += c;
            c_d += c;
        }

        let mut j = 0;
        while j < group.len() {
            let sh = group[j].0.source_history;
            let run_end = j + group[j..]
                .iter()
                .take_while(|(k, _)| k.source_history == sh)
                .count();
            let c_ds: u64 = group[j..run_end].iter().map(|(_, c)| c).sum();
            for (k, c) in &group[j..run_end] {
                let c_nd = next_given_dest[k.next as usize];
                let ratio = (*c as f64 * c_d as f64) / (c_ds as f64 * c_nd as f64);
                sum += (*c as f64 / total) * ratio.ln();
            }
            j = run_end;
        }
        i = end;
    }
    sum
}

/// Reference computation over the full dense probability table.
///
/// Counts are tallied straight from the sequences into a flat array of
/// `|A_dest| · |A_dest|^k · |A_src|^l` cells, converted to probabilities,
/// marginalised by explicit summation and fed through the definition term
/// by term. Shares no code with [`transfer_entropy`] beyond input checks.
pub fn brute_force_te_oracle(
    dest: &SymbolSeries,
    src: &SymbolSeries,
    cfg: HistoryConfig,
) -> Result<TeResult, TeError> {
    let samples = check_inputs(dest, src, &cfg)?;
    let da = dest.alphabet_size() as usize;
    let sa = src.alphabet_size() as usize;
    let dest_states = (da as u128).pow(cfg.k as u32);
    let src_states = (sa as u128).pow(cfg.l as u32);
    let cells = da as u128 * dest_states * src_states;
    if cells > ORACLE_MAX_CELLS as u128 {
        return Err(TeError::AlphabetTooLarge { cells });
    }
    let (nd, ns) = (dest_states as usize, src_states as usize);
    let index = |next: usize, dh: usize, sh: usize| (next * nd + dh) * ns + sh;

    let d = dest.symbols();
    let s = src.symbols();
    let m = cfg.k.max(cfg.l);
    let mut joint = vec![0.0f64; cells as usize];
    for t in (m - 1)..(d.len() - 1) {
        let mut dh = 0usize;
        for &x in &d[t + 1 - cfg.k..=t] {
            dh = dh * da + x as usize;
        }
        let mut sh = 0usize;
        for &x in &s[t + 1 - cfg.l..=t] {
            sh = sh * sa + x as usize;
        }
        joint[index(d[t + 1] as usize, dh, sh)] += 1.0;
    }
    for p in joint.iter_mut() {
        *p /= samples as f64;
    }

    let mut p_ds = vec![0.0; nd * ns];
    let mut p_nd = vec![0.0; da * nd];
    let mut p_d = vec![0.0; nd];
    for next in 0..da {
        for dh in 0..nd {
            for sh in 0..ns {
                let p = joint[index(next, dh, sh)];
                p_ds[dh * ns + sh] += p;
                p_nd[next * nd + dh] += p;
                p_d[dh] += p;
            }
        }
    }

    let mut value = 0.0;
    for next in 0..da {
        for dh in 0..nd {
            for sh in 0..ns {
                let p = joint[index(next, dh, sh)];
                if p == 0.0 {
                    continue;
                }
                let with_source = p / p_ds[dh * ns + sh];
                let without_source = p_nd[next * nd + dh] / p_d[dh];
                value += p * cfg.log_base.log(with_source / without_source);
            }
        }
    }
    Ok(result(value, samples as u64, dest, src))
}

/// 95th percentile (nearest rank) of T(shuffled src → dest) over `trials`
/// seeded permutations of the source.
///
/// The permutation stream is a ChaCha8 generator seeded with `seed`; trial
/// `i` shuffles a fresh copy of the source with the generator's state after
/// trial `i - 1`.
pub fn shuffle_surrogate_threshold(
    dest: &SymbolSeries,
    src: &SymbolSeries,
    cfg: HistoryConfig,
    trials: usize,
    seed: u64,
) -> Result<f64, TeError> {
    if trials == 0 {
        return Err(TeError::NoTrials);
    }
    check_inputs(dest, src, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(trials);
    let mut buf = src.symbols().to_vec();
    for _ in 0..trials {
        buf.copy_from_slice(src.symbols());
        buf.shuffle(&mut rng);
        let shuffled = src.with_symbols(buf.clone());
        values.push(transfer_entropy(dest, &shuffled, cfg)?.value);
    }
    values.sort_by(f64::total_cmp);
    let rank = (SURROGATE_PERCENTILE * trials as f64).ceil() as usize;
    Ok(values[rank.max(1) - 1])
}
