use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn netfx(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netfx"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        o.status,
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// A temp dir holding a 92-day synthetic log at `synth/events.jsonl`.
fn with_log() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(&netfx(
        &[
            "synth",
            "--seed",
            "4",
            "--from",
            "2020-07-01",
            "--to",
            "2020-09-30",
            "--out",
            "synth",
        ],
        dir.path(),
    ));
    dir
}

#[test]
fn analyze_writes_every_artifact() {
    let dir = with_log();
    ok(&netfx(
        &["analyze", "--input", "synth/events.jsonl", "--out", "a"],
        dir.path(),
    ));
    for f in [
        "matrix.csv",
        "ranking.csv",
        "matrix.json",
        "ranking.json",
        "manifest.json",
    ] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
    let matrix = read(dir.path(), "a/matrix.csv");
    assert!(matrix
        .starts_with("-,User,Great User,Super User,Credit,Withdraw,Remained Credit,Project\n"));
    assert_eq!(matrix.lines().count(), 8);
    let ranking = read(dir.path(), "a/ranking.csv");
    assert_eq!(ranking.lines().next(), Some("pair,F"));
    assert_eq!(ranking.lines().count(), 43);
    assert!(ranking.lines().nth(1).unwrap().ends_with(",100.00"));

    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "a/manifest.json")).unwrap();
    assert_eq!(manifest["config"]["history"]["k"], 1);
    assert_eq!(manifest["source"]["skipped"], 0);
    assert_eq!(manifest["window"]["from"], "2020-07-01");
    assert_eq!(manifest["symbols_per_series"], 91);
}

#[test]
fn manifest_reruns_to_identical_outputs() {
    let dir = with_log();
    ok(&netfx(
        &[
            "analyze",
            "--input",
            "synth/events.jsonl",
            "--out",
            "a",
            "--disc",
            "quantile:3",
            "--k",
            "2",
            "--surrogates",
            "20",
            "--seed",
            "5",
            "--au",
        ],
        dir.path(),
    ));
    ok(&netfx(
        &["analyze", "--config", "a/manifest.json", "--out", "b"],
        dir.path(),
    ));
    for f in ["matrix.csv", "ranking.csv", "manifest.json"] {
        assert_eq!(
            read(dir.path(), &format!("a/{f}")),
            read(dir.path(), &format!("b/{f}")),
            "{f}"
        );
    }
    let ranking = read(dir.path(), "b/ranking.csv");
    assert_eq!(
        ranking.lines().next(),
        Some("pair,F,T_au,surrogate_au,above_surrogate")
    );
}

#[test]
fn flags_override_config_file() {
    let dir = with_log();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"input": "synth/events.jsonl", "history": {"k": 2, "l": 2, "log_base": "nats"}}"#,
    )
    .unwrap();
    ok(&netfx(
        &["analyze", "--config", "cfg.json", "--l", "1", "--out", "a"],
        dir.path(),
    ));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "a/manifest.json")).unwrap();
    assert_eq!(manifest["config"]["history"]["k"], 2);
    assert_eq!(manifest["config"]["history"]["l"], 1);
    assert_eq!(manifest["config"]["history"]["log_base"], "nats");
}

#[test]
fn ranking_from_published_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../fixtures/matrix_fixture.csv"
    );
    ok(&netfx(
        &[
            "analyze",
            "--from-matrix",
            fixture,
            "--paper-rows",
            "--au",
            "--out",
            "p",
        ],
        dir.path(),
    ));
    let ranking = read(dir.path(), "p/ranking.csv");
    let lines: Vec<&str> = ranking.lines().collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0], "pair,F,T_au");
    assert_eq!(lines[1], "Credit to Project,100.00,142.585");
    assert_eq!(lines[2], "Super User to Project,67.32,95.994");
    assert_eq!(lines[11], "Remained Credit to Withdraw,0.92,1.317");
    // The A.U. table renders back to the fixture's numbers.
    assert!(read(dir.path(), "p/matrix.csv")
        .contains("Withdraw,5.840,0.000,0.000,5.288,-,0.000,17.213"));
}

#[test]
fn top_n_keeps_leading_rows() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../fixtures/matrix_fixture.csv"
    );
    ok(&netfx(
        &[
            "analyze",
            "--from-matrix",
            fixture,
            "--top-n",
            "3",
            "--out",
            "p",
        ],
        dir.path(),
    ));
    let ranking = read(dir.path(), "p/ranking.csv");
    assert_eq!(
        ranking,
        "pair,F\nCredit to Project,100.00\nUser to Project,93.25\nSuper User to Project,67.32\n"
    );
}

#[test]
fn csv_input_gives_the_same_matrix() {
    let dir = with_log();
    let store = netfx_core::ingest_events(
        fs::File::open(dir.path().join("synth/events.jsonl")).unwrap(),
        netfx_core::IngestFormat::Jsonl,
    )
    .unwrap()
    .store;
    let mut csv = Vec::new();
    store.write_csv(&mut csv).unwrap();
    fs::write(dir.path().join("events.csv"), csv).unwrap();
    ok(&netfx(
        &["analyze", "--input", "synth/events.jsonl", "--out", "j"],
        dir.path(),
    ));
    ok(&netfx(
        &["analyze", "--input", "events.csv", "--out", "c"],
        dir.path(),
    ));
    assert_eq!(
        read(dir.path(), "j/matrix.csv"),
        read(dir.path(), "c/matrix.csv")
    );
}

#[test]
fn bad_lines_are_skipped_and_counted() {
    let dir = with_log();
    let mut log = read(dir.path(), "synth/events.jsonl");
    log.push_str("{not json\n{\"ts\":\"2020-08-01\",\"kind\":\"sign_up\"}\n");
    fs::write(dir.path().join("dirty.jsonl"), log).unwrap();
    ok(&netfx(
        &["analyze", "--input", "dirty.jsonl", "--out", "a"],
        dir.path(),
    ));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "a/manifest.json")).unwrap();
    assert_eq!(manifest["source"]["skipped"], 2);
}

#[test]
fn exit_codes() {
    let dir = with_log();
    let code = |args: &[&str]| netfx(args, dir.path()).status.code();
    assert_eq!(code(&["analyze", "--input", "missing.jsonl"]), Some(1));
    assert_eq!(code(&["analyze"]), Some(2));
    assert_eq!(
        code(&["analyze", "--input", "synth/events.jsonl", "--k", "0"]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "analyze",
            "--input",
            "synth/events.jsonl",
            "--disc",
            "quantile:1"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "analyze",
            "--input",
            "synth/events.jsonl",
            "--disc",
            "quantile:4",
            "--epsilon",
            "1"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "analyze",
            "--input",
            "synth/events.jsonl",
            "--from",
            "2020-09-01",
            "--to",
            "2020-08-01"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "analyze",
            "--input",
            "synth/events.jsonl",
            "--base",
            "decimal"
        ]),
        Some(2)
    );
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    assert_eq!(code(&["analyze", "--input", "empty.jsonl"]), Some(1));
    fs::write(
        dir.path().join("signups.jsonl"),
        "{\"ts\":\"2020-07-01\",\"kind\":\"sign_up\",\"user_id\":\"u\"}\n",
    )
    .unwrap();
    assert_eq!(code(&["analyze", "--input", "signups.jsonl"]), Some(1));
}

#[test]
fn cohort_command() {
    let dir = with_log();
    ok(&netfx(
        &["cohort", "--input", "synth/events.jsonl", "--out", "c"],
        dir.path(),
    ));
    let cohort = read(dir.path(), "c/cohort.csv");
    assert_eq!(cohort.lines().next(), Some("user_id,qualification_date"));
    assert!(cohort.lines().count() > 1);
    let great = read(dir.path(), "c/cohort_great_user.csv");
    let truth: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "synth/truth.json")).unwrap();
    let grants = truth["great_user_grants"].as_object().unwrap();
    assert_eq!(great.lines().count(), grants.len() + 1);
    for (user, date) in grants {
        assert!(great.contains(&format!("{user},{}", date.as_str().unwrap())));
    }
}

#[test]
fn stricter_pass_rule_never_grows_the_cohort() {
    let dir = with_log();
    ok(&netfx(
        &["cohort", "--input", "synth/events.jsonl", "--out", "a"],
        dir.path(),
    ));
    ok(&netfx(
        &[
            "cohort",
            "--input",
            "synth/events.jsonl",
            "--out",
            "b",
            "--first-task-rule",
        ],
        dir.path(),
    ));
    let a = read(dir.path(), "a/cohort.csv");
    let b = read(dir.path(), "b/cohort.csv");
    assert!(b.lines().count() <= a.lines().count());
}

#[test]
fn curve_command() {
    let dir = with_log();
    ok(&netfx(
        &["curve", "--input", "synth/events.jsonl", "--out", "cv"],
        dir.path(),
    ));
    for cohort in ["all_users", "great_user", "super_user"] {
        for month in ["2020-07", "2020-08", "2020-09"] {
            let body = read(dir.path(), &format!("cv/curve_{cohort}_{month}.csv"));
            assert_eq!(body.lines().next(), Some("active_days,count"));
        }
    }
    let sept = read(dir.path(), "cv/curve_all_users_2020-09.csv");
    assert_eq!(sept.lines().count(), 31);
    let smile = read(dir.path(), "cv/smile.csv");
    assert_eq!(smile.lines().count(), 10);
    assert!(smile.contains("all_users,2020-09,"));
    assert!(smile.contains("1-6|7-12|13-18|19-24|25-30"));
}

#[test]
fn synth_with_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"pairs": [{"source": "withdraw", "destination": "user", "strength": 0.5, "lag": 2}],
            "population": {"workers": 40, "customers": 5}, "seed": 8}"#,
    )
    .unwrap();
    ok(&netfx(
        &[
            "synth",
            "--spec",
            "spec.json",
            "--out",
            "s",
            "--from",
            "2021-01-01",
            "--to",
            "2021-03-31",
        ],
        dir.path(),
    ));
    let truth: serde_json::Value = serde_json::from_str(&read(dir.path(), "s/truth.json")).unwrap();
    assert_eq!(truth["seed"], 8);
    assert_eq!(truth["couplings"][0]["lag"], 2);
    let first = read(dir.path(), "s/events.jsonl");
    ok(&netfx(
        &[
            "synth",
            "--spec",
            "spec.json",
            "--out",
            "t",
            "--from",
            "2021-01-01",
            "--to",
            "2021-03-31",
        ],
        dir.path(),
    ));
    assert_eq!(first, read(dir.path(), "t/events.jsonl"));

    fs::write(
        dir.path().join("bad.json"),
        r#"{"pairs": [{"source": "super_user", "destination": "user", "strength": 0.5, "lag": 1}],
            "population": {"workers": 40, "customers": 5}, "seed": 8}"#,
    )
    .unwrap();
    let o = netfx(&["synth", "--spec", "bad.json", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dump_series_writes_symbols() {
    let dir = with_log();
    ok(&netfx(
        &[
            "analyze",
            "--input",
            "synth/events.jsonl",
            "--out",
            "a",
            "--dump-series",
        ],
        dir.path(),
    ));
    let credit = read(dir.path(), "a/symbols_credit.csv");
    assert_eq!(credit.lines().next(), Some("t,symbol"));
    assert_eq!(credit.lines().count(), 92);
}
