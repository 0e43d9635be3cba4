use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], file: &str, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isodesign"))
        .args(args)
        .arg(fixture(file))
        .arg("--out")
        .arg(out)
        .arg("--kv")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of `key=` in the key=value block.
fn kv(o: &Output, key: &str) -> String {
    let text = stdout(o);
    let prefix = format!("{key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn kv_f64(o: &Output, key: &str) -> f64 {
    kv(o, key).parse().unwrap()
}

#[test]
fn thomas2d_cool_example_fails_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["thomas2d"], "cool_example.prob", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Thomas fails"));
    assert_eq!(kv(&o, "verdict.thomas"), "fail");
    assert_eq!(kv(&o, "verdict.thomas.tol"), "1e-6");
    let csv = std::fs::read_to_string(dir.path().join("thomas2d.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,r1,r2,r3,r1_normalized"));
    assert_eq!(lines.count(), 33 * 33);
}

#[test]
fn minimize_energy_affine_reaches_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["minimize-energy", "--init", "affine"],
        "cool_example.prob",
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(kv_f64(&o, "final_energy") <= 1e-4);
    assert_eq!(kv(&o, "verdict.energy"), "pass");
    assert_eq!(kv(&o, "verdict.orientation"), "pass");
    let xi = std::fs::read_to_string(dir.path().join("xi.csv")).unwrap();
    assert!(xi.starts_with("x1,x2,xi1,xi2,det\n"));
    let trace = std::fs::read_to_string(dir.path().join("energy_trace.csv")).unwrap();
    let energies: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn curvature_of_flat_pair() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["curvature"], "flat.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(kv_f64(&o, "max_riemann_G") <= 1e-10);
    assert!(kv_f64(&o, "max_riemann_Gt") <= 1e-10);
    assert_eq!(kv(&o, "verdict.pair"), "pass");
    assert!(stdout(&o).contains("Gt flat"));
}

#[test]
fn conformal_check_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["conformal-check"], "conformal_harmonic.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(kv(&o, "verdict.conformal"), "pass");
    let o = run(&["conformal-check"], "conformal_curved.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(kv(&o, "verdict.conformal"), "fail");
    // Ric of exp(-x1^2) Id in 3D has entries of size 2 at x1 = 0.
    assert!((kv_f64(&o, "max_residual") - 2.0).abs() < 1e-6);
    let o = run(&["conformal-check"], "flat3.prob", dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn frame_commands_on_cool_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve-theta"], "cool_example.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(kv_f64(&o, "path_mismatch") <= 1e-10);
    assert!(kv_f64(&o, "metric_residual") <= 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("theta.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,theta,xi1,xi2,residual\n"));

    let o = run(&["integrate-frame"], "cool_example.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(kv_f64(&o, "algebraic_defect") <= 1e-6);
    assert_eq!(kv(&o, "exploratory"), "false");

    let o = run(&["thomas-nd"], "cool_example.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(kv(&o, "verdict.thomas"), "fail");
    assert!(kv_f64(&o, "max_norm") >= 1.0);
}

#[test]
fn three_dimensional_flat_pair() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["thomas-nd"], "flat3.prob", dir.path());
    assert_eq!(kv(&o, "verdict.thomas"), "pass");
    let o = run(&["pointwise"], "flat3.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(kv(&o, "zero_cost_nodes"), "125/125");
    let csv = std::fs::read_to_string(dir.path().join("pointwise.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,x3,cost,cost_a,cost_c,iterations,converged,w11,"));
}

#[test]
fn dimred_cylinder_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dimred"], "cylinder.prob", dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(kv(&o, "verdict.compat"), "pass");
    assert_eq!(kv(&o, "verdict.recovery"), "pass");
    let csv = std::fs::read_to_string(dir.path().join("dimred.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("h,Eh_over_h2,limit,ratio"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn dimred_rejects_thickness_dependent_metric() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dimred"], "thick.prob", dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("thick.prob:16"), "{err}");
    assert!(err.contains("thickness-independent"), "{err}");
}

#[test]
fn exit_codes_for_bad_input_and_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["curvature"], "bad_syntax.prob", dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad_syntax.prob:8"));
    let o = run(&["minimize-energy"], "not_spd.prob", dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["thomas2d"], "flat3.prob", dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["thomas2d"], "missing.prob", dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(
        &["thomas2d", "--set", "tol_thomas=abc"],
        "cool_example.prob",
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overrides_change_tolerance_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["thomas2d"], "cool_example.prob", dir.path());
    let b = run(
        &["thomas2d", "--set", "tol_thomas=100"],
        "cool_example.prob",
        dir.path(),
    );
    assert_eq!(kv(&b, "verdict.thomas"), "pass");
    assert_eq!(kv(&b, "verdict.thomas.tol"), "1e2");
    assert_ne!(kv(&a, "digest"), kv(&b, "digest"));
    let c = run(&["solve-theta", "--tol-path", "1e-12"], "cool_example.prob", dir.path());
    assert_eq!(kv(&c, "verdict.path.tol"), "1e-12");
}

#[test]
fn outputs_are_deterministic() {
    let cases: [(&[&str], &str, &str); 3] = [
        (&["minimize-energy"], "cool_example.prob", "xi.csv"),
        (
            &["pointwise", "--set", "perturb=0.05", "--seed", "7"],
            "flat3.prob",
            "pointwise.csv",
        ),
        (&["thomas2d"], "cool_example.prob", "thomas2d.csv"),
    ];
    for (args, file, csv) in cases {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let o1 = run(args, file, d1.path());
        let mut threaded: Vec<&str> = args.to_vec();
        threaded.extend(["--threads", "2"]);
        let o2 = run(&threaded, file, d2.path());
        assert_eq!(o1.status.code(), Some(0));
        assert_eq!(o2.status.code(), Some(0));
        let a = std::fs::read(d1.path().join(csv)).unwrap();
        let b = std::fs::read(d2.path().join(csv)).unwrap();
        assert_eq!(a, b, "{csv} differs between runs");
        assert_eq!(kv(&o1, "digest"), kv(&o2, "digest"));
    }
}

#[test]
fn seed_changes_perturbed_starts() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run(
        &["pointwise", "--set", "perturb=0.05", "--seed", "1"],
        "flat3.prob",
        d1.path(),
    );
    run(
        &["pointwise", "--set", "perturb=0.05", "--seed", "2"],
        "flat3.prob",
        d2.path(),
    );
    let a = std::fs::read(d1.path().join("pointwise.csv")).unwrap();
    let b = std::fs::read(d2.path().join("pointwise.csv")).unwrap();
    assert_ne!(a, b);
}
