use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use netfx_core::cohorts::PassRateRule;
use netfx_core::{
    DateWindow, DiscretizationScheme, HistoryConfig, IngestFormat, SuperUserCriteria,
};
use serde::{Deserialize, Serialize};

use crate::CommandError;

/// Everything a run depends on. Serialized verbatim into the run manifest;
/// the output directory is left out so manifests compare equal across
/// output locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub input: Option<PathBuf>,
    pub format: Option<IngestFormat>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub history: HistoryConfig,
    pub discretization: DiscretizationScheme,
    pub recency_days: u32,
    pub reference_date: Option<NaiveDate>,
    pub pass_rule: PassRateRule,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub au: bool,
    pub reference_rows: bool,
    pub top_n: Option<usize>,
    pub surrogates: usize,
    pub seed: u64,
    pub from_matrix: Option<PathBuf>,
    pub dump_series: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: None,
            from: None,
            to: None,
            history: HistoryConfig::default(),
            discretization: DiscretizationScheme::default(),
            recency_days: SuperUserCriteria::DEFAULT_RECENCY_DAYS,
            reference_date: None,
            pass_rule: PassRateRule::default(),
            out: PathBuf::from("out"),
            au: false,
            reference_rows: false,
            top_n: None,
            surrogates: 0,
            seed: 0,
            from_matrix: None,
            dump_series: false,
        }
    }
}

impl AnalysisConfig {
    /// Loads a config from JSON. Accepts either a bare config object or a
    /// run manifest, whose `config` member is used.
    pub fn load(path: &Path) -> Result<Self, CommandError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CommandError::Config(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CommandError::Config(format!("{}: {e}", path.display())))?;
        let body = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(body)
            .map_err(|e| CommandError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CommandError> {
        let bad = |m: String| Err(CommandError::Config(m));
        if let (Some(from), Some(to)) = (self.from, self.to) {
            if from > to {
                return bad(format!("--from {from} is after --to {to}"));
            }
        }
        if let Err(e) = self.history.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.discretization.validate() {
            return bad(e.to_string());
        }
        if self.recency_days == 0 {
            return bad("--recency-days must be at least 1".into());
        }
        if self.input.is_none() && self.from_matrix.is_none() {
            return bad("either --input or --from-matrix is required".into());
        }
        Ok(())
    }

    /// Input format, inferred from the file extension when not given.
    pub fn input_format(&self) -> IngestFormat {
        self.format.unwrap_or_else(|| match &self.input {
            Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
                IngestFormat::Csv
            }
            _ => IngestFormat::Jsonl,
        })
    }

    /// Explicit `--from/--to` bounds, falling back to the store's span.
    pub fn window(&self, span: DateWindow) -> Result<DateWindow, CommandError> {
        let from = self.from.unwrap_or(span.from);
        let to = self.to.unwrap_or(span.to);
        DateWindow::new(from, to)
            .ok_or_else(|| CommandError::Config(format!("empty window {from} .. {to}")))
    }

    pub fn criteria(&self, window: DateWindow) -> SuperUserCriteria {
        SuperUserCriteria {
            recency_days: self.recency_days,
            reference_date: self.reference_date.unwrap_or(window.to),
            pass_rule: self.pass_rule,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_echo_round_trips() {
        let cfg = AnalysisConfig {
            input: Some("events.csv".into()),
            surrogates: 50,
            seed: 3,
            ..Default::default()
        };
        assert_eq!(cfg.input_format(), IngestFormat::Csv);
        let manifest = serde_json::json!({ "config": cfg });
        let dir = std::env::temp_dir().join(format!("netfx-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("manifest.json");
        std::fs::write(&path, manifest.to_string()).unwrap();
        let loaded = AnalysisConfig::load(&path).unwrap();
        assert_eq!(loaded, cfg);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn validation() {
        let mut cfg = AnalysisConfig::default();
        assert!(cfg.validate().is_err());
        cfg.input = Some("x.jsonl".into());
        assert!(cfg.validate().is_ok());
        cfg.from = NaiveDate::from_ymd_opt(2020, 8, 1);
        cfg.to = NaiveDate::from_ymd_opt(2020, 7, 1);
        assert!(matches!(cfg.validate(), Err(CommandError::Config(_))));
    }
}
