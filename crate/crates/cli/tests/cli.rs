//! End-to-end tests of the `pspin` binary: exit codes, file formats, and
//! determinism guarantees.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pspin")
}

static DIR_COUNTER: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let id = DIR_COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!(
        "pspin-cli-test-{}-{tag}-{id}",
        std::process::id()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json_doc(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Parses data rows of a simulate.csv into (quantity, value, stderr-column).
fn csv_rows(path: &Path) -> Vec<(String, f64, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "quantity,value,stderr,N,M,seed,wall_time",
        "header row is part of the format contract"
    );
    lines
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols.len(), 7, "row has 7 columns: {l}");
            (cols[0].to_string(), cols[1].parse().unwrap(), cols[2].to_string())
        })
        .collect()
}

#[test]
fn solve_zero_mixture_reports_zero() {
    let dir = scratch_dir("solve-zero");
    let cfg = write_config(&dir, r#"{"mixture": [], "k_max": 1}"#);
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&dir.join("solve.json"));
    assert_eq!(doc["value"].as_f64().unwrap(), 0.0);
    assert!(doc["converged"].as_bool().unwrap());
}

#[test]
fn solve_matches_pure_two_spin_closed_form() {
    let dir = scratch_dir("solve-p2");
    let cfg = write_config(&dir, r#"{"mixture": [{"p": 2, "beta": 1.0}], "k_max": 2}"#);
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&dir.join("solve.json"));
    let sb = 2f64.sqrt();
    let exact = sb - 0.75 - 0.5 * sb.ln();
    let value = doc["value"].as_f64().unwrap();
    assert!(
        (value - exact).abs() <= 1e-5,
        "value {value} vs closed form {exact}"
    );
    assert_eq!(doc["per_k"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_rejects_malformed_order_parameter() {
    let dir = scratch_dir("solve-badm");
    let cfg = write_config(
        &dir,
        r#"{"mixture": [{"p": 2, "beta": 1.0}], "k_max": 1,
            "order_parameter": {"k": 1, "m": [0.5], "q": [0.0, 0.2, 1.0]}}"#,
    );
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let msg = stderr_text(&out);
    assert!(
        msg.contains("length"),
        "message should name the violated constraint: {msg}"
    );
}

#[test]
fn solve_rejects_unknown_keys_with_position() {
    let dir = scratch_dir("solve-unknown");
    let cfg = write_config(&dir, r#"{"mixture": [], "k_max": 1, "bogus": 3}"#);
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let msg = stderr_text(&out);
    assert!(msg.contains("unknown field"), "{msg}");
    assert!(msg.contains("line"), "diagnostic carries a position: {msg}");
}

#[test]
fn solve_reports_nonconvergence_but_writes_best_so_far() {
    let dir = scratch_dir("solve-stuck");
    let cfg = write_config(
        &dir,
        r#"{"mixture": [{"p": 3, "beta": 1.5}], "k_max": 2, "restarts": 1, "max_iter": 1}"#,
    );
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let doc = json_doc(&dir.join("solve.json"));
    assert!(!doc["converged"].as_bool().unwrap());
    assert!(doc["value"].as_f64().unwrap().is_finite());
}

#[test]
fn finite_m_zero_mixture_is_exactly_zero() {
    let dir = scratch_dir("fm-zero");
    let cfg = write_config(
        &dir,
        r#"{"mixture": [],
            "order_parameter": {"k": 1, "m": [0.0, 1.0], "q": [0.0, 0.0, 1.0]},
            "m_values": [8, 16]}"#,
    );
    let out = run(&[
        "finite-m",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&dir.join("finite_m.json"));
    for row in doc["per_m"].as_array().unwrap() {
        assert_eq!(row["pm"].as_f64().unwrap(), 0.0);
    }
    assert_eq!(doc["parisi_value"].as_f64().unwrap(), 0.0);
}

#[test]
fn finite_m_gap_column_shrinks_toward_the_limit() {
    let dir = scratch_dir("fm-rs");
    let cfg = write_config(
        &dir,
        r#"{"mixture": [{"p": 2, "beta": 1.0}],
            "order_parameter": {"k": 1, "m": [0.0, 1.0], "q": [0.0, 0.0, 1.0]},
            "m_values": [8, 16, 32, 64]}"#,
    );
    let out = run(&[
        "finite-m",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&dir.join("finite_m.json"));
    let reference = doc["parisi_value"].as_f64().unwrap();
    assert!((reference - 0.5).abs() < 1e-10);
    let rows = doc["per_m"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let gaps: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            (
                (r["pm"].as_f64().unwrap() - reference).abs(),
                r["error_estimate"].as_f64().unwrap(),
            )
        })
        .collect();
    for w in gaps.windows(2) {
        assert!(
            w[1].0 <= w[0].0 + w[0].1 + w[1].1,
            "gap column must be nonincreasing within error: {gaps:?}"
        );
    }
    assert!(gaps.last().unwrap().0 < 0.05);
}

#[test]
fn finite_m_rejects_deep_recursions() {
    let dir = scratch_dir("fm-k4");
    let cfg = write_config(
        &dir,
        r#"{"mixture": [{"p": 2, "beta": 1.0}],
            "order_parameter": {"k": 4, "m": [0.0, 0.2, 0.4, 0.8, 1.0],
                                "q": [0.0, 0.1, 0.3, 0.5, 0.7, 1.0]},
            "m_values": [8]}"#,
    );
    let out = run(&["finite-m", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("cost guard"));
}

#[test]
fn simulate_free_energy_zero_mixture_is_a_single_zero_row() {
    let dir = scratch_dir("sim-fe0");
    let cfg = write_config(
        &dir,
        r#"{"task": "free-energy", "mixture": [], "n": 10, "n_config": 200, "n_disorder": 4}"#,
    );
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let rows = csv_rows(&dir.join("simulate.csv"));
    assert_eq!(rows.len(), 1, "exactly one row for a free-energy run");
    assert_eq!(rows[0].0, "free_energy");
    assert_eq!(rows[0].1, 0.0);
}

#[test]
fn simulate_cavity_check_reconstructs_to_machine_precision() {
    let dir = scratch_dir("sim-cav");
    let cfg = write_config(
        &dir,
        r#"{"task": "cavity-check", "mixture": [{"p": 3, "beta": 1.0}],
            "m": 2, "n": 3, "seed": 11}"#,
    );
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let rows = csv_rows(&dir.join("simulate.csv"));
    let max = rows.iter().find(|r| r.0 == "cavity_max_rel_error").unwrap();
    assert!(max.1 < 1e-10, "max relative error {}", max.1);
    assert_eq!(max.2, "exact", "identity rows carry the exact tag");
}

#[test]
fn simulate_gg_stats_rejects_insufficient_chains() {
    let dir = scratch_dir("sim-gg-bad");
    let cfg = write_config(
        &dir,
        r#"{"task": "gg-stats", "mixture": [{"p": 2, "beta": 1.0}], "n": 8,
            "groups": 3, "chains_per_group": 2, "steps": 200, "burn_in": 100,
            "thin": 10, "phi": [{"p": 1, "n": 3}]}"#,
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_text(&out).contains("chains"));
}

#[test]
fn simulate_gg_stats_reports_rows_and_dumps_chains() {
    let dir = scratch_dir("sim-gg");
    let cfg = write_config(
        &dir,
        r#"{"task": "gg-stats", "mixture": [{"p": 2, "beta": 1.0}], "n": 8,
            "groups": 4, "chains_per_group": 3, "steps": 300, "burn_in": 150,
            "thin": 15, "phi": [{"p": 1, "n": 2}, {"p": 1, "n": 2, "f": [[1, 2, 1]]}],
            "seed": 3, "dump_chains": true}"#,
    );
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let rows = csv_rows(&dir.join("simulate.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    for expected in [
        "phi_p1_n2_f1",
        "phi_p1_n2_fR1.2",
        "ultrametric_violation",
        "overlap_mean",
        "overlap_second_moment",
        "mean_energy",
    ] {
        assert!(names.contains(&expected), "missing row {expected}: {names:?}");
    }
    for r in &rows {
        r.2.parse::<f64>()
            .unwrap_or_else(|_| panic!("sampled rows carry numeric stderr: {r:?}"));
    }

    // 20 stored samples of dimension 8: magic + 2 shape words + 160 values.
    let chain = std::fs::read(dir.join("chains/chain_g0_c0.sphchain")).unwrap();
    assert_eq!(&chain[..8], b"SPHCHAIN");
    assert_eq!(chain.len(), 8 + 16 + 20 * 8 * 8);
    let samples = f64::from_le_bytes(chain[8..16].try_into().unwrap());
    let dim = f64::from_le_bytes(chain[16..24].try_into().unwrap());
    assert_eq!((samples, dim), (20.0, 8.0));
}

#[test]
fn simulate_ass_bracket_rows_are_internally_consistent() {
    let dir = scratch_dir("sim-ass");
    let cfg = write_config(
        &dir,
        r#"{"task": "ass-bracket", "mixture": [{"p": 2, "beta": 0.3}],
            "m": 2, "n": 8, "n_rep": 8, "n_gauss": 16, "n_dis": 3,
            "burn_in": 200, "thin": 40, "seed": 5}"#,
    );
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let rows = csv_rows(&dir.join("simulate.csv"));
    let get = |name: &str| rows.iter().find(|r| r.0 == name).unwrap();
    let lower = get("ass_lower_bound");
    let bracket = get("ass_bracket");
    let correction = get("ass_correction");
    assert!((lower.1 - (bracket.1 + correction.1)).abs() < 1e-12);
    assert_eq!(correction.2, "exact");
    assert!(bracket.2.parse::<f64>().unwrap() > 0.0);
}

#[test]
fn simulate_rejects_unknown_tasks() {
    let dir = scratch_dir("sim-unknown");
    let cfg = write_config(&dir, r#"{"task": "warp-drive", "mixture": []}"#);
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_text(&out).contains("warp-drive"));
}

#[test]
fn simulate_output_is_identical_across_thread_caps() {
    let base = scratch_dir("sim-threads");
    let cfg = write_config(
        &base,
        r#"{"task": "free-energy", "mixture": [{"p": 2, "beta": 1.2}],
            "n": 20, "n_config": 200, "n_disorder": 4, "seed": 2}"#,
    );
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let dir = base.join(format!("t{threads}"));
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(exit_code(&out), 0);
        let text = std::fs::read_to_string(dir.join("simulate.csv")).unwrap();
        // The wall_time column is the one run-dependent field.
        let stripped: Vec<String> = text
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect();
        outputs.push(stripped);
    }
    assert_eq!(
        outputs[0], outputs[1],
        "results must not depend on the thread cap"
    );
}

#[test]
fn strict_flag_escalates_sampler_health_warnings() {
    let base = scratch_dir("sim-strict");
    // Strong coupling at small sample count collapses the exp-weight
    // effective sample size, which is a deterministic health warning.
    let cfg = write_config(
        &base,
        r#"{"task": "free-energy", "mixture": [{"p": 2, "beta": 1.2}],
            "n": 20, "n_config": 200, "n_disorder": 4, "seed": 2}"#,
    );
    let relaxed = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        base.join("relaxed").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&relaxed), 0);
    assert!(stderr_text(&relaxed).contains("effective sample size"));

    let strict = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        base.join("strict").to_str().unwrap(),
        "--strict",
    ]);
    assert_eq!(exit_code(&strict), 3);
    assert!(
        base.join("strict/simulate.csv").exists(),
        "report written even when health warnings escalate"
    );
}
