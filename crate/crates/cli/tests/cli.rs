//! End-to-end tests of the `simo-lqr` binary: exit codes, file outputs,
//! format stability and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use simo_lqr_cli::files::{GainFile, LinearModelFile, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simo-lqr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn linearize_default_robot() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "linearize"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("controllable"));
    assert!(
        !text.contains("warning"),
        "no equilibrium warning expected: {text}"
    );

    let file: LinearModelFile = read_json(&dir.path().join("linear_model.json"));
    assert!(file.epsilon_applied);
    assert_eq!(file.epsilon, vec![1e-4; 4]);
    assert_eq!(file.u_e, 0.0);
    // Design-convention values (degree tilt).
    assert!((file.a[2][3] - 3278.127334378476).abs() / 3278.1 < 1e-9);
    assert!((file.b[2] - (-628.8524197162417)).abs() / 628.85 < 1e-9);
    assert_eq!(file.controllability.rank, 4);
}

#[test]
fn linear_model_json_round_trips_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "linearize"]);
    assert!(out.status.success());
    let path = dir.path().join("linear_model.json");
    let file: LinearModelFile = read_json(&path);
    let model = file.to_model();
    // Rebuild the serialized form from the reconstructed model: every
    // float must survive the round trip bit for bit.
    let report = simo_lqr_core::linearize::controllability(&model);
    let rebuilt = LinearModelFile::new(&model, &report);
    assert_eq!(rebuilt.a, file.a);
    assert_eq!(rebuilt.b, file.b);
    assert_eq!(rebuilt.e, file.e);
    assert_eq!(rebuilt.x_e, file.x_e);
    assert_eq!(rebuilt.epsilon, file.epsilon);
    assert_eq!(
        rebuilt.controllability.determinant,
        file.controllability.determinant
    );
}

#[test]
fn explicit_zero_equilibrium_records_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "linearize",
        "--equilibrium",
        "0,0,0,0",
    ]);
    assert!(out.status.success());
    let file: LinearModelFile = read_json(&dir.path().join("linear_model.json"));
    assert!(file.epsilon_applied);
    assert_eq!(file.epsilon, vec![1e-4; 4]);
}

#[test]
fn malformed_equilibrium_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "linearize",
        "--equilibrium",
        "0,0,zero,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn uncontrollable_plant_exits_with_design_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("toy.toml");
    // Two independent double integrators with the actuator on the first
    // one only: the second channel is unreachable.
    std::fs::write(
        &config,
        r#"
            [plant]
            kind = "linear-mechanical"
            a_lower = [[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]
            b_lower = [1.0, 0.0]

            [lqr]
            q_diag = [1.0, 1.0, 1.0, 1.0]
            r = 1.0
        "#,
    )
    .unwrap();
    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "linearize",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("rank 2/4"));
    assert!(stdout(&out).contains("NOT controllable"));
}

#[test]
fn design_reproduces_published_gains() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "design"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("using default weights"));
    let file: GainFile = read_json(&dir.path().join("gains.json"));
    let expected = [-13.1881, -10.0, -9.3717, -45.1452];
    for (i, (got, want)) in file.k.iter().zip(expected.iter()).enumerate() {
        let rel = (got - want).abs() / want.abs();
        assert!(rel < 1e-3, "K[{i}] = {got} vs {want}");
    }
    assert_eq!(file.k_ref, file.k_p);
    assert_eq!(file.k[..2], file.k_p[..]);
    assert_eq!(file.k[2..], file.k_d[..]);
    assert!(file.care_residual < 1e-9);
    assert!(file.closed_loop_eigenvalues.iter().all(|(re, _)| *re < 0.0));
    // The stored row rebuilds a usable gain set.
    assert_eq!(file.gain_set().k_p().len(), 2);
}

#[test]
fn design_with_identity_weights_is_stabilizing() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("idw.toml");
    std::fs::write(
        &config,
        r#"
            [lqr]
            q_diag = [1.0, 1.0, 1.0, 1.0]
            r = 1.0
        "#,
    )
    .unwrap();
    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "design",
    ]);
    assert!(out.status.success());
    let file: GainFile = read_json(&dir.path().join("gains.json"));
    assert!(file.closed_loop_eigenvalues.iter().all(|(re, _)| *re < 0.0));
    assert!(file.care_residual < 1e-9);
}

#[test]
fn simulate_default_batch() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "simulate"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);

    for name in [
        "sfr-continuous",
        "pd-continuous",
        "pd-discrete",
        "sfr-discrete",
    ] {
        let csv = std::fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().count(), 25_002, "25 s at 1 ms plus header");
    }
    assert!(dir.path().join("summary.txt").exists());

    // Every scenario settles the tilt within 20 s.
    for line in text.lines().filter(|l| l.contains("completed")) {
        let settle: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!(settle <= 20.0, "late settling in: {line}");
    }

    // The two continuous realizations implement the same law: their
    // control columns agree to well below a nanovolt.
    let u_col = |name: &str| -> Vec<f64> {
        std::fs::read_to_string(dir.path().join(format!("{name}.csv")))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
            .collect()
    };
    let sfr = u_col("sfr-continuous");
    let pd = u_col("pd-continuous");
    let max_du = sfr
        .iter()
        .zip(pd.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    assert!(max_du < 1e-9, "max |du| = {max_du}");
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "--out",
            dir.path().to_str().unwrap(),
            "simulate",
            "--duration",
            "5",
        ]);
        assert!(out.status.success());
    }
    for name in ["sfr-continuous", "pd-discrete"] {
        let a = std::fs::read(dir_a.path().join(format!("{name}.csv"))).unwrap();
        let b = std::fs::read(dir_b.path().join(format!("{name}.csv"))).unwrap();
        assert_eq!(a, b, "{name}.csv differs between identical runs");
    }
}

#[test]
fn simulate_rejects_zero_duration_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "simulate",
        "--duration",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("sfr-continuous.csv").exists());
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["design"])
        .env("SIMO_LQR_OUT", dir.path())
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("gains.json").exists());
}

#[test]
fn reproduce_paper_reports_reference_table() {
    let out = run(&["reproduce-paper"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.contains("reproduced 25 of 31 checks"),
        "table changed:\n{text}"
    );
    // The gains and the closed-loop behavior reproduce.
    for label in ["K[1]", "K[2]", "K[3]", "K[4]"] {
        let line = text.lines().find(|l| l.contains(label)).unwrap();
        assert!(line.ends_with("PASS"), "{line}");
    }
    assert!(text.contains("discrete vs continuous max|du| [V] > 0.1"));
}

#[test]
fn radian_convention_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rad.toml");
    std::fs::write(
        &config,
        r#"
            [plant]
            tilt_unit = "radians"

            [[scenarios]]
            name = "si-sfr"
            controller = "sfr-continuous"
            x0_deg = [10.0, 0.0, 0.0, 0.0]
            duration_s = 5.0
        "#,
    )
    .unwrap();
    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "simulate",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("si-sfr.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    // The boundary is in degrees even though the plant state is radians.
    let x1: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!((x1 - 10.0).abs() < 1e-12);
    // Designing on the SI plant gives its own gain row (K₁ ≈ −23.61),
    // so the initial control is −K₁·(10π/180) ≈ 4.12 V.
    let u0: f64 = first.split(',').nth(5).unwrap().parse().unwrap();
    assert!((u0 - 4.1206).abs() < 1e-3, "u0 = {u0}");
}
