use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::NaiveDate;
use log::{info, warn};
use netfx_core::cohorts::all_users_cohort;
use netfx_core::impact::{render_ranking_with, surrogate_matrix, RankingColumns};
use netfx_core::te::SURROGATE_PERCENTILE;
use netfx_core::{
    build_driver_series, compute_matrix, discretize, generate, great_user_cohort, ingest_events,
    normalize_impact, power_user_curve, render_au_table, select_super_users, smile_index,
    CohortKind, CouplingSpec, DateWindow, DiscretizationScheme, DriverKind, EventStore,
    ImpactRanking, SuperUserSelection, SymbolSeries, TeMatrix, UserCohort, YearMonth,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::AnalysisConfig;
use crate::CommandError;

type Result<T> = std::result::Result<T, CommandError>;

fn module<E: Into<anyhow::Error>>(e: E) -> CommandError {
    CommandError::Module(e.into())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CommandError::Module)?;
    Ok(path)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CommandError::Module)
}

fn pretty(value: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

struct Loaded {
    store: EventStore,
    skipped: usize,
}

fn load_store(cfg: &AnalysisConfig) -> Result<Loaded> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| CommandError::Config("--input is required".into()))?;
    let file = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(CommandError::Module)?;
    let ingested = ingest_events(BufReader::new(file), cfg.input_format()).map_err(module)?;
    for s in ingested.skipped.iter().take(20) {
        warn!("skipped line {}: {}", s.line, s.error);
    }
    info!(
        "ingested {} records, skipped {}",
        ingested.store.len(),
        ingested.skipped_count()
    );
    Ok(Loaded {
        skipped: ingested.skipped_count(),
        store: ingested.store,
    })
}

fn store_window(cfg: &AnalysisConfig, store: &EventStore) -> Result<DateWindow> {
    let span = store
        .span()
        .ok_or_else(|| module(anyhow::anyhow!("event log has no records")))?;
    cfg.window(span)
}

/// Daily series of all seven drivers over `window`, discretized with
/// `scheme`. The Super-user driver counts members of `super_users`.
pub fn driver_symbols(
    store: &EventStore,
    window: DateWindow,
    scheme: DiscretizationScheme,
    super_users: &UserCohort,
) -> std::result::Result<BTreeMap<DriverKind, SymbolSeries>, netfx_core::SeriesError> {
    DriverKind::ALL
        .par_iter()
        .map(|&d| {
            let raw = build_driver_series(store, d, window, Some(super_users))?;
            Ok((d, discretize(&raw, scheme)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub matrix: TeMatrix,
    pub ranking: ImpactRanking,
    pub surrogates: Option<TeMatrix>,
    pub outputs: Vec<PathBuf>,
}

/// Full pipeline: ingest, select Super users, build and discretize driver
/// series, estimate the matrix, rank, and write artifacts.
pub fn analyze(cfg: &AnalysisConfig) -> Result<AnalyzeReport> {
    cfg.validate()?;
    prepare_out(&cfg.out)?;

    let mut manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": "analyze",
        "config": cfg,
    });

    let (matrix, surrogates, series) = if let Some(path) = &cfg.from_matrix {
        let file = File::open(path)
            .with_context(|| format!("opening {}", path.display()))
            .map_err(CommandError::Module)?;
        let matrix = TeMatrix::from_au_csv(BufReader::new(file)).map_err(module)?;
        manifest["source"] = json!({ "kind": "matrix", "path": path });
        (matrix, None, None)
    } else {
        let loaded = load_store(cfg)?;
        let window = store_window(cfg, &loaded.store)?;
        let criteria = cfg.criteria(window);
        let selection = select_super_users(&loaded.store, &criteria).map_err(module)?;
        info!("{} super users", selection.cohort.len());
        let series = driver_symbols(&loaded.store, window, cfg.discretization, &selection.cohort)
            .map_err(module)?;
        let matrix = compute_matrix(&series, cfg.history).map_err(module)?;
        let surrogates = if cfg.surrogates > 0 {
            Some(surrogate_matrix(&series, cfg.history, cfg.surrogates, cfg.seed).map_err(module)?)
        } else {
            None
        };
        manifest["source"] = json!({
            "kind": "events",
            "records": loaded.store.len(),
            "skipped": loaded.skipped,
            "counts_by_kind": loaded.store.count_by_kind(),
            "span": loaded.store.span(),
        });
        manifest["window"] = json!(window);
        manifest["symbols_per_series"] = json!(series[&DriverKind::User].len());
        manifest["super_user_criteria"] = json!(criteria);
        manifest["super_users"] = json!(selection.cohort.len());
        (matrix, surrogates, Some(series))
    };

    let ranking = normalize_impact(&matrix).map_err(module)?;
    let shown = if cfg.reference_rows {
        ranking.reference_rows()
    } else {
        ranking.clone()
    };

    let mut outputs = Vec::new();
    outputs.push(write_file(
        &cfg.out,
        "matrix.csv",
        render_au_table(&matrix).as_bytes(),
    )?);
    let columns = RankingColumns {
        au: cfg.au,
        surrogates: surrogates.as_ref(),
    };
    let ranking_csv = render_ranking_with(&shown, cfg.top_n, &columns);
    outputs.push(write_file(&cfg.out, "ranking.csv", ranking_csv.as_bytes())?);

    let mut matrix_json = json!({ "au_scale": netfx_core::AU_SCALE, "raw": matrix.to_json() });
    if let Some(s) = &surrogates {
        matrix_json["surrogate_thresholds"] = s.to_json();
    }
    outputs.push(write_file(&cfg.out, "matrix.json", &pretty(&matrix_json))?);
    outputs.push(write_file(
        &cfg.out,
        "ranking.json",
        &pretty(&shown.to_json()),
    )?);

    if cfg.dump_series {
        if let Some(series) = &series {
            for (driver, s) in series {
                let mut body = String::from("t,symbol\n");
                for (i, sym) in s.symbols().iter().enumerate() {
                    body.push_str(&format!("{i},{sym}\n"));
                }
                let name = format!("symbols_{}.csv", driver.slug());
                outputs.push(write_file(&cfg.out, &name, body.as_bytes())?);
            }
        }
    }

    if let Some(s) = &surrogates {
        manifest["surrogates"] = json!({
            "trials": cfg.surrogates,
            "seed": cfg.seed,
            "percentile": SURROGATE_PERCENTILE,
            "pairs_above_threshold": ranking
                .entries
                .iter()
                .filter(|e| e.raw > s.get(e.source, e.destination).unwrap_or(0.0))
                .count(),
        });
    }
    manifest["max_cell"] = json!(ranking.max_cell);
    let mut names: Vec<String> = outputs
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    names.push("manifest.json".into());
    manifest["outputs"] = json!(names);
    outputs.push(write_file(&cfg.out, "manifest.json", &pretty(&manifest))?);

    Ok(AnalyzeReport {
        matrix,
        ranking,
        surrogates,
        outputs,
    })
}

#[derive(Debug, Clone)]
pub struct CohortReport {
    pub selection: SuperUserSelection,
    pub great_users: UserCohort,
    pub outputs: Vec<PathBuf>,
}

/// Writes the Super-user cohort (`cohort.csv`) and the Great-user cohort
/// (`cohort_great_user.csv`).
pub fn cohort(cfg: &AnalysisConfig) -> Result<CohortReport> {
    cfg.validate()?;
    prepare_out(&cfg.out)?;
    let loaded = load_store(cfg)?;
    let window = store_window(cfg, &loaded.store)?;
    let criteria = cfg.criteria(window);
    let selection = select_super_users(&loaded.store, &criteria).map_err(module)?;
    let great_users = great_user_cohort(&loaded.store);

    let mut outputs = Vec::new();
    outputs.push(write_cohort(&cfg.out, "cohort.csv", &selection.cohort)?);
    outputs.push(write_cohort(
        &cfg.out,
        "cohort_great_user.csv",
        &great_users,
    )?);
    let stages = &selection.final_stages;
    let summary = json!({
        "command": "cohort",
        "config": cfg,
        "super_user_criteria": criteria,
        "super_users": selection.cohort.len(),
        "great_users": great_users.len(),
        "stages_on_reference_date": {
            "submitters": stages.submitters.len(),
            "stage1": stages.stage1.len(),
            "stage2": stages.stage2.len(),
            "stage3": stages.stage3.len(),
        },
    });
    outputs.push(write_file(
        &cfg.out,
        "cohort_manifest.json",
        &pretty(&summary),
    )?);
    Ok(CohortReport {
        selection,
        great_users,
        outputs,
    })
}

fn write_cohort(dir: &Path, name: &str, cohort: &UserCohort) -> Result<PathBuf> {
    let mut buf = Vec::new();
    cohort.write_csv(&mut buf).map_err(module)?;
    write_file(dir, name, &buf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileRow {
    pub cohort: CohortKind,
    pub month: YearMonth,
    pub active_users: u64,
    pub smile: Option<f64>,
    pub partition: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CurveReport {
    pub rows: Vec<SmileRow>,
    pub outputs: Vec<PathBuf>,
}

/// Monthly power user curves for all users, Great users and Super users,
/// one CSV per cohort and month, plus a `smile.csv` summary.
pub fn curve(cfg: &AnalysisConfig) -> Result<CurveReport> {
    cfg.validate()?;
    prepare_out(&cfg.out)?;
    let loaded = load_store(cfg)?;
    let store = &loaded.store;
    let window = store_window(cfg, store)?;
    let selection = select_super_users(store, &cfg.criteria(window)).map_err(module)?;
    let cohorts = [
        all_users_cohort(store),
        great_user_cohort(store),
        selection.cohort,
    ];

    let span = store.span().expect("non-empty store has a span");
    let jobs: Vec<(usize, YearMonth)> = window
        .months()
        .into_iter()
        .filter(|m| {
            let w = m.window();
            w.to >= span.from && w.from <= span.to
        })
        .flat_map(|m| (0..cohorts.len()).map(move |c| (c, m)))
        .collect();
    let curves = jobs
        .par_iter()
        .map(|&(c, m)| power_user_curve(store, &cohorts[c], m).map(|curve| (c, m, curve)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(module)?;

    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    for (c, month, curve) in curves {
        let kind = cohorts[c].kind();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).map_err(module)?;
        let name = format!("curve_{}_{}.csv", kind.slug(), month);
        outputs.push(write_file(&cfg.out, &name, &buf)?);
        let smile = smile_index(&curve).ok();
        rows.push(SmileRow {
            cohort: kind,
            month,
            active_users: curve.active_users(),
            smile: smile.as_ref().map(|s| s.value),
            partition: smile.as_ref().map(|s| s.partition_label()),
        });
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cohort",
        "month",
        "active_users",
        "smile_index",
        "quintiles",
    ])
    .map_err(module)?;
    for r in &rows {
        w.write_record([
            r.cohort.slug().to_string(),
            r.month.to_string(),
            r.active_users.to_string(),
            r.smile.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.partition.clone().unwrap_or_default(),
        ])
        .map_err(module)?;
    }
    let body = w.into_inner().map_err(|e| module(anyhow::anyhow!("{e}")))?;
    outputs.push(write_file(&cfg.out, "smile.csv", &body)?);
    Ok(CurveReport { rows, outputs })
}

#[derive(Debug, Clone)]
pub struct SynthReport {
    pub events: PathBuf,
    pub truth: PathBuf,
    pub records: usize,
}

/// Default scenario: Credit drives Project at lag 1 with a modest worker
/// population.
pub fn default_synth_spec(seed: u64) -> CouplingSpec {
    CouplingSpec::independent(200, seed).with_coupling(
        DriverKind::Credit,
        DriverKind::Project,
        0.9,
        1,
    )
}

/// Generates a synthetic log and its ground truth.
pub fn synth(
    spec_path: Option<&Path>,
    seed: Option<u64>,
    from: NaiveDate,
    to: NaiveDate,
    out: &Path,
) -> Result<SynthReport> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CommandError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<CouplingSpec>(&text)
                .map_err(|e| CommandError::Config(format!("{}: {e}", p.display())))?
        }
        None => default_synth_spec(seed.unwrap_or(0)),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let window = DateWindow::new(from, to)
        .ok_or_else(|| CommandError::Config(format!("--from {from} is after --to {to}")))?;
    let output = generate(&spec, window).map_err(|e| CommandError::Config(e.to_string()))?;
    prepare_out(out)?;

    let events = out.join("events.jsonl");
    let mut w = BufWriter::new(
        File::create(&events)
            .with_context(|| format!("creating {}", events.display()))
            .map_err(CommandError::Module)?,
    );
    output.store.write_jsonl(&mut w).map_err(module)?;
    w.flush().map_err(module)?;

    let truth = out.join("truth.json");
    let mut w = BufWriter::new(
        File::create(&truth)
            .with_context(|| format!("creating {}", truth.display()))
            .map_err(CommandError::Module)?,
    );
    output.truth.write_json(&mut w).map_err(module)?;
    w.write_all(b"\n").map_err(module)?;
    w.flush().map_err(module)?;

    Ok(SynthReport {
        events,
        truth,
        records: output.store.len(),
    })
}
