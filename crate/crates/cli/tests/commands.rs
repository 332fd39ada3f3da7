use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use tmn_cli::commands::{self, bundled_scenario, CliError, GlobalOptions, BUNDLED_SCENARIOS};
use tmn_cli::{OutcomeSpec, ScenarioError, ScenarioFile};
use tmn_core::{DisassemblyOutcome, MaterialSpec};
use tmn_disassembler::TaskKind;

fn tmn(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tmn"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_bundled(dir: &Path) {
    for (name, text) in BUNDLED_SCENARIOS {
        std::fs::write(dir.join(name), text).unwrap();
    }
}

#[test]
fn reproduce_tables_passes_on_bundled_copies() {
    let (code, out, _) = tmn(&["reproduce-tables"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.matches("PASS").count(), 5);
}

#[test]
fn perturbed_reuse_time_fails_the_row() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in BUNDLED_SCENARIOS {
        let mut scenario = ScenarioFile::from_json_str(text).unwrap();
        scenario.params.reuse *= 1.1;
        std::fs::write(dir.path().join(name), scenario.to_json_string()).unwrap();
    }

    let mut out = Vec::new();
    let err = commands::cmd_reproduce_tables(&GlobalOptions::default(), Some(dir.path()), &mut out)
        .unwrap_err();
    assert!(matches!(err, CliError::Mismatch(3)), "{err}");
    let text = String::from_utf8(out).unwrap();
    for name in ["table2_td3", "table4", "table5"] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        assert!(line.ends_with("FAIL"), "{line}");
    }

    let (code, _, _) = tmn(&[
        "reproduce-tables",
        "--scenario-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn missing_table_file_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_bundled(dir.path());
    std::fs::remove_file(dir.path().join("table4.json")).unwrap();
    let (code, _, err) = tmn(&[
        "reproduce-tables",
        "--scenario-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("table4.json"), "{err}");
}

#[test]
fn invalid_scenario_reports_paths_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = BUNDLED_SCENARIOS[0]
        .1
        .replacen("\"criticality\": 0.1", "\"criticality\": 1.5", 1);
    std::fs::write(&path, text).unwrap();
    let (code, _, err) = tmn(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("/materials/0/criticality"), "{err}");

    std::fs::write(&path, "").unwrap();
    let (code, _, _) = tmn(&["lambda", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(
        tmn(&["sweep", "--var", "s", "--from", "0", "--to", "1", "--steps", "1"]).0,
        2
    );
    assert_eq!(
        tmn(&["sweep", "--var", "x", "--from", "0", "--to", "1"]).0,
        2
    );
    assert_eq!(tmn(&["lambda", "--method", "nope"]).0, 2);
    assert_eq!(tmn(&["lambda", "--delta", "-1"]).0, 2);
    assert_eq!(tmn(&["train", "--task", "nope"]).0, 2);
    assert_eq!(tmn(&["eval", "--task", "2p1t"]).0, 2);
    assert_eq!(tmn(&["frobnicate"]).0, 2);
}

#[test]
fn lambda_methods_agree_on_the_table_scenario() {
    let opts = GlobalOptions::default();
    let mut sink = Vec::new();
    let report = commands::cmd_lambda(&opts, "numeric", &mut sink).unwrap();
    assert!((report.lambda_numeric - report.lambda_closed_form).abs() < 1e-9);
    let (code, out, _) = tmn(&["lambda", "--method", "closed-form"]);
    assert_eq!(code, 0);
    assert!(out.contains("closed-form = -2.1"), "{out}");
}

#[test]
fn lambda_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("l.csv");
    let (code, _, _) = tmn(&["lambda", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("quantity,value\n"));
}

#[test]
fn sweep_output_is_csv() {
    let mut out = Vec::new();
    let rows =
        commands::cmd_sweep(&GlobalOptions::default(), "T_d", 0.4, 86_400.0, 5, &mut out).unwrap();
    assert_eq!(rows.len(), 5);
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("var,value,lambda_exact,lambda_approx,alpha")
    );
    assert_eq!(lines.count(), 5);
}

#[test]
fn delta_has_no_effect_without_continuous_flow() {
    let mut sink = Vec::new();
    let base = commands::cmd_lambda(&GlobalOptions::default(), "numeric", &mut sink).unwrap();
    let opts = GlobalOptions {
        delta: Some(60.0),
        ..Default::default()
    };
    let other = commands::cmd_lambda(&opts, "numeric", &mut sink).unwrap();
    assert_eq!(base.lambda_numeric, other.lambda_numeric);
}

#[test]
fn train_then_eval_a_saved_policy() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("p.ciroq");
    let log = dir.path().join("log.csv");
    let p = policy.to_str().unwrap();
    let (code, out, err) = tmn(&[
        "train",
        "--task",
        "2p1t",
        "--steps",
        "30000",
        "--out",
        p,
        "--csv",
        log.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("zeta="));
    assert!(std::fs::read_to_string(&log)
        .unwrap()
        .starts_with("step,episode,episode_length,return\n"));

    let (code, out, _) = tmn(&["eval", "--task", "2p1t", "--policy", p]);
    assert_eq!(code, 0);
    assert!(out.contains("s=100.0"), "{out}");

    let (code, _, err) = tmn(&["eval", "--task", "2p2t", "--policy", p]);
    assert_eq!(code, 2);
    assert!(err.contains("two-parts-one-target"), "{err}");

    let scenario = dir.path().join("from_policy.json");
    let mut s = bundled_scenario("table2_sac").unwrap();
    s.outcome = OutcomeSpec::Policy {
        path: "p.ciroq".into(),
        task: TaskKind::TwoPartsOneTarget,
    };
    s.expect_lambda = None;
    std::fs::write(&scenario, s.to_json_string()).unwrap();
    let (code, out, err) = tmn(&["lambda", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("lambda          = -2.1"), "{out}");
}

#[test]
fn controller_outcome_in_scenario() {
    let mut s = bundled_scenario("table4").unwrap();
    s.outcome = OutcomeSpec::Controller {
        name: "random".into(),
        task: TaskKind::FourPartsChassis,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, s.to_json_string()).unwrap();
    let opts = GlobalOptions {
        scenario: Some(path),
        ..Default::default()
    };
    let report = commands::cmd_lambda(&opts, "closed-form", &mut Vec::new()).unwrap();
    assert_eq!(tmn_core::format_tenth(report.lambda_closed_form), "-6.3");
}

#[test]
fn pipeline_rows_follow_seed_order() {
    let mut out = Vec::new();
    let rows = commands::cmd_pipeline(
        &GlobalOptions::default(),
        TaskKind::TwoPartsOneTarget,
        Some(2_000),
        &[7, 3, 5],
        "q",
        &mut out,
    )
    .unwrap();
    assert_eq!(
        rows.iter().map(|r| r.seed).collect::<Vec<_>>(),
        vec![7, 3, 5]
    );
}

#[test]
fn scenario_errors_expose_fields() {
    let err = ScenarioFile::from_json_str("{\"name\": 3}").unwrap_err();
    assert!(matches!(err, ScenarioError::Validation(_)));
    assert!(err.field_errors().iter().any(|f| f.path == "/name"));
}

proptest! {
    #[test]
    fn scenario_json_round_trips(
        masses in prop::collection::vec((0.01f64..1.0, 0.0f64..50.0), 1..4),
        arrival in 1.0f64..1e7,
        transport in 1.0f64..1e5,
        extra_reuse in 1.0f64..1e7,
        incineration in 1.0f64..1e6,
        delta in 0.001f64..100.0,
        s in 0.0f64..=100.0,
        t_d in 0.001f64..1e5,
        rounding in 0u32..4,
    ) {
        let mut scenario = bundled_scenario("table2_sac").unwrap();
        scenario.materials = masses
            .iter()
            .enumerate()
            .map(|(i, &(c, m))| MaterialSpec::new(format!("m{i}"), c, m))
            .collect();
        scenario.params.arrival = arrival;
        scenario.params.transport = transport;
        scenario.params.reuse = transport + extra_reuse;
        scenario.params.incineration = incineration;
        scenario.params.delta = delta;
        scenario.outcome = OutcomeSpec::Literal(DisassemblyOutcome::new(s, t_d).unwrap());
        scenario.rounding = rounding;
        let back = ScenarioFile::from_json_str(&scenario.to_json_string()).unwrap();
        prop_assert_eq!(back, scenario);
    }
}

#[test]
fn sweep_over_success_is_increasing() {
    let rows = commands::cmd_sweep(
        &GlobalOptions::default(),
        "s",
        0.0,
        100.0,
        11,
        &mut Vec::new(),
    )
    .unwrap();
    assert_eq!(rows.len(), 11);
    assert!(rows
        .windows(2)
        .all(|w| w[1].lambda_exact > w[0].lambda_exact));
}

#[test]
fn disassembly_time_barely_moves_lambda() {
    let rows = commands::cmd_sweep(
        &GlobalOptions::default(),
        "T_d",
        0.4,
        86_400.0,
        21,
        &mut Vec::new(),
    )
    .unwrap();
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.lambda_exact), hi.max(r.lambda_exact))
        });
    assert!(hi - lo < 0.1, "spread {}", hi - lo);
}

#[test]
fn zero_mass_gives_zero_lambda() {
    let mut s = bundled_scenario("table2_sac").unwrap();
    for m in &mut s.materials {
        m.mass = 0.0;
    }
    s.expect_lambda = Some(0.0);
    let rows = commands::reproduce_rows(&[s]).unwrap();
    assert_eq!(rows[0].lambda, 0.0);
    assert!(rows[0].pass);
}
