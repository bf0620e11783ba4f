use std::process::Command;

use switchmd_cli::bench::{
    csv_report, emit_report, json_report, run_bench, Algorithm, BenchConfig, BenchRow,
    GeometryKind, OutputFormat, RowOutcome, SetKind, CSV_HEADER,
};

fn small_config(algorithm: Algorithm, epsilons: Vec<f64>) -> BenchConfig {
    let mut config = BenchConfig::new(algorithm, epsilons);
    config.n = 10;
    config.r = 5;
    config.m = 6;
    config.seed = 4;
    config.theta0_sq = 2.0;
    config.trials = 3;
    config.rounds = 20;
    config
}

#[test]
fn alg2_rows_follow_the_iteration_formula() {
    let epsilons: Vec<f64> = (1..=5).map(|i| 1.0 / f64::from(1 << i)).collect();
    let config = small_config(Algorithm::Alg2, epsilons.clone());
    let rows = run_bench(&config).unwrap();
    for (row, eps) in rows.iter().zip(&epsilons) {
        let expected = (2.0 * config.theta0_sq / (eps * eps)).ceil() as usize;
        match &row.outcome {
            RowOutcome::Solved { iterations, .. } => assert_eq!(*iterations, expected),
            RowOutcome::Failed { message } => panic!("row failed: {message}"),
        }
    }
    let csv = csv_report(&rows);
    let iters: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(iters, vec!["16", "64", "256", "1024", "4096"]);
}

#[test]
fn csv_formatting_fixture() {
    let rows = vec![BenchRow {
        inv_epsilon: 2.0,
        outcome: RowOutcome::Solved {
            iterations: 16,
            time_sec: 5.138,
            f_best: 22.327427,
            g_out: 2.210041,
            productive: 16,
            nonproductive: 0,
        },
    }];
    let csv = csv_report(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    assert_eq!(
        lines.next().unwrap(),
        "2,16,5.138000,22.327427,2.210041,16,0"
    );
}

#[test]
fn empty_epsilon_list_yields_a_header_only_report() {
    let config = small_config(Algorithm::Alg2, vec![]);
    let rows = run_bench(&config).unwrap();
    assert!(rows.is_empty());
    assert_eq!(csv_report(&rows), format!("{CSV_HEADER}\n"));
}

#[test]
fn json_round_trip_matches_the_rows() {
    let config = small_config(Algorithm::Alg2Mod, vec![0.5, 0.25]);
    let rows = run_bench(&config).unwrap();
    let parsed: Vec<serde_json::Value> =
        serde_json::from_str(&json_report(&rows)).expect("valid JSON");
    assert_eq!(parsed.len(), rows.len());
    for (value, row) in parsed.iter().zip(&rows) {
        assert_eq!(value["inv_eps"].as_f64().unwrap(), row.inv_epsilon);
        match &row.outcome {
            RowOutcome::Solved {
                iterations,
                f_best,
                g_out,
                productive,
                nonproductive,
                ..
            } => {
                assert_eq!(value["iter"].as_u64().unwrap() as usize, *iterations);
                assert_eq!(value["f_best"].as_f64().unwrap(), *f_best);
                assert_eq!(value["g_out"].as_f64().unwrap(), *g_out);
                assert_eq!(value["productive"].as_u64().unwrap() as usize, *productive);
                assert_eq!(
                    value["nonproductive"].as_u64().unwrap() as usize,
                    *nonproductive
                );
            }
            RowOutcome::Failed { message } => {
                assert_eq!(value["error"].as_str().unwrap(), message);
            }
        }
    }
}

#[test]
fn seed_determines_everything_but_wall_time() {
    let config = small_config(Algorithm::MultiV2, vec![0.5, 0.2]);
    let a = run_bench(&config).unwrap();
    let b = run_bench(&config).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.inv_epsilon, rb.inv_epsilon);
        match (&ra.outcome, &rb.outcome) {
            (
                RowOutcome::Solved {
                    iterations: ia,
                    f_best: fa,
                    g_out: ga,
                    productive: pa,
                    nonproductive: na,
                    ..
                },
                RowOutcome::Solved {
                    iterations: ib,
                    f_best: fb,
                    g_out: gb,
                    productive: pb,
                    nonproductive: nb,
                    ..
                },
            ) => {
                assert_eq!(ia, ib);
                assert_eq!(fa.to_bits(), fb.to_bits());
                assert_eq!(ga.to_bits(), gb.to_bits());
                assert_eq!(pa, pb);
                assert_eq!(na, nb);
            }
            other => panic!("unexpected outcomes: {other:?}"),
        }
    }
}

#[test]
fn trace_line_count_equals_total_iterations() {
    let dir = std::env::temp_dir().join(format!("switchmd-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("trace.csv");
    let mut config = small_config(Algorithm::Alg2, vec![0.5, 0.25]);
    config.trace = Some(path.clone());
    let rows = run_bench(&config).unwrap();
    let total: usize = rows
        .iter()
        .map(|row| match &row.outcome {
            RowOutcome::Solved { iterations, .. } => *iterations,
            RowOutcome::Failed { .. } => 0,
        })
        .sum();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), total);
    // Pinned per-step shape: k,kind(P|N),h,g_value.
    let first = text.lines().next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0], "0");
    assert!(fields[1] == "P" || fields[1] == "N");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn every_mode_keeps_the_count_invariant() {
    for algorithm in [
        Algorithm::Alg1,
        Algorithm::Alg2,
        Algorithm::Alg2Mod,
        Algorithm::MultiV1,
        Algorithm::MultiV2,
        Algorithm::Stochastic,
        Algorithm::Online,
    ] {
        let config = small_config(algorithm, vec![0.25]);
        let rows = run_bench(&config).unwrap();
        match &rows[0].outcome {
            RowOutcome::Solved {
                iterations,
                productive,
                nonproductive,
                ..
            } => assert_eq!(
                *iterations,
                productive + nonproductive,
                "{algorithm:?} broke iterations = productive + nonproductive"
            ),
            RowOutcome::Failed { message } => panic!("{algorithm:?} failed: {message}"),
        }
    }
}

#[test]
fn failed_rows_mark_errors_without_aborting() {
    // The entropy geometry has no reference minimizer on a ball, so each row
    // fails, but the run itself completes and reports every accuracy.
    let mut config = small_config(Algorithm::Alg2, vec![0.5, 0.25]);
    config.geometry = GeometryKind::Entropy;
    config.set = SetKind::UnitBall;
    let rows = run_bench(&config).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|row| !row.is_solved()));
    let csv = emit_report(&rows, OutputFormat::Csv);
    assert!(csv.lines().nth(1).unwrap().contains("nan"));
    let json = emit_report(&rows, OutputFormat::Json);
    assert!(json.contains("\"error\""));
}

#[test]
fn binary_reports_and_exits_cleanly() {
    let output = Command::new(env!("CARGO_BIN_EXE_switchmd"))
        .args([
            "--algorithm",
            "alg2",
            "--eps",
            "0.5",
            "--n",
            "6",
            "--r",
            "3",
            "--m",
            "3",
            "--seed",
            "1",
        ])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.starts_with(CSV_HEADER));
    assert_eq!(stdout.lines().count(), 2);
}

#[test]
fn binary_exit_code_reflects_solver_failures() {
    let output = Command::new(env!("CARGO_BIN_EXE_switchmd"))
        .args([
            "--algorithm",
            "alg2",
            "--eps",
            "0.5",
            "--n",
            "6",
            "--r",
            "3",
            "--m",
            "3",
            "--geometry",
            "entropy",
            "--set",
            "unit-ball",
        ])
        .output()
        .expect("binary runs");
    assert!(!output.status.success());
}
