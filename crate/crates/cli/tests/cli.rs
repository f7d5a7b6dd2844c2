use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn inertia(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inertia"))
        .current_dir(dir)
        .env_remove("INERTIA_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn forward_writes_state_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = inertia(
        tmp.path(),
        &[
            "forward",
            "--overrides",
            "n=48,m=2,omega_freq=1",
            "--out",
            "fwd",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).starts_with("forward n=48 m=2"));
    let state = fs::read_to_string(tmp.path().join("fwd/state.csv")).unwrap();
    assert_eq!(state.lines().next(), Some("theta,re_psi,im_psi"));
    assert_eq!(state.lines().count(), 49);
    let echoed = fs::read_to_string(tmp.path().join("fwd/resolved_config.json")).unwrap();
    assert!(echoed.contains("\"n\": 48"));
}

#[test]
fn echoed_config_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let first = inertia(
        tmp.path(),
        &["forward", "--overrides", "n=40", "--out", "a"],
    );
    assert_eq!(first.status.code(), Some(0));
    fs::copy(
        tmp.path().join("a/resolved_config.json"),
        tmp.path().join("cfg.json"),
    )
    .unwrap();
    let second = inertia(
        tmp.path(),
        &["forward", "--config", "cfg.json", "--out", "b"],
    );
    assert_eq!(second.status.code(), Some(0));
    let a = fs::read(tmp.path().join("a/state.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/state.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_errors_exit_2_with_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["forward", "--overrides", "n=8"][..],
        &["forward", "--overrides", "bogus=1"][..],
        &["forward", "--overrides", "iteration.tau=0.5"][..],
    ] {
        let o = inertia(tmp.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("out/error.json")).unwrap())
                .unwrap();
        assert_eq!(err["kind"], "config");
        assert_eq!(err["exit_code"], 2);
    }
    fs::write(tmp.path().join("bad.json"), "{not json").unwrap();
    let o = inertia(tmp.path(), &["forward", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn adjoint_and_gradient_checks_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let o = inertia(
        tmp.path(),
        &[
            "adjoint-check",
            "--overrides",
            r#"n=48,scheme={"kind":"restricted","epsilon":0.4,"real_part_only":true}"#,
            "--trials",
            "5",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("restricted_re"));
    let o = inertia(
        tmp.path(),
        &["gradient-check", "--overrides", "n=48", "--directions", "2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    // An impossible tolerance is reported as a numerical failure.
    let o = inertia(
        tmp.path(),
        &[
            "gradient-check",
            "--overrides",
            "n=48",
            "--directions",
            "2",
            "--tol",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(tmp.path().join("out/error.json").exists());
}

#[test]
fn tcc_writes_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let o = inertia(
        tmp.path(),
        &[
            "tcc",
            "--overrides",
            "n=48,probe.radius=0.1,probe.samples=7",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("out/tcc_samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn reconstruct_and_sweep_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = inertia(
        tmp.path(),
        &[
            "reconstruct",
            "--overrides",
            "n=48,iteration.max_iter=15,noise.relative_level=0.05",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("out/reconstruct_iterations.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("iter,residual,gamma,rel_err_gamma,rel_err_omega,step_size")
    );
    assert!(tmp.path().join("out/reconstruct.json").exists());

    let o = inertia(
        tmp.path(),
        &[
            "sweep",
            "--out",
            "sw",
            "--overrides",
            "n=48,iteration.max_iter=10,sweep.axis.values=[0.01,0.2],sweep.seeds=[0,1]",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(tmp.path().join("sw/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.starts_with(
        "run_id,noise,epsilon,scheme,K,final_residual,rel_err_gamma,rel_err_omega,wall_ms"
    ));

    let o = inertia(
        tmp.path(),
        &[
            "sweep",
            "--out",
            "empty",
            "--overrides",
            "sweep.axis.values=[]",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("runs=0"));
}

#[test]
fn env_var_sets_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_inertia"))
        .current_dir(tmp.path())
        .env("INERTIA_OUT_DIR", "from_env")
        .args(["grid-convergence", "--sizes", "32,64"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("from_env/convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
