use std::path::Path;
use std::process::{Command, Output};

use cwbnlw_core::coupling::{gen_c1_instance, C1Constants, CouplingInstance};

fn cwbnlw(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwbnlw"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn reference() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml"))
}

#[test]
fn solve_on_reference_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwbnlw(&["solve"], reference(), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("solution.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["config_hash"].as_str().is_some_and(|h| h.len() == 64));
    assert!(v["data"]["bundle"]["lambda"].as_f64().is_some());
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn malformed_config_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 3\n[problem]\nrho = \"wide\"\n").unwrap();
    let out = cwbnlw(&["solve"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("rho"), "{err}");
}

#[test]
fn invalid_constants_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[schedule]\nc1 = 2.0\nc2 = 2.5\n").unwrap();
    let out = cwbnlw(&["solve"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn replay_of_violating_instance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let constants = C1Constants {
        b: 1.02,
        k: 20,
        c_tail: 1.5,
        c_prime: 3.0,
        c: 0.3,
    };
    let good = gen_c1_instance(3, 60, constants, 1).unwrap();
    let path = dir.path().join("good.json");
    std::fs::write(
        &path,
        serde_json::to_string(&CouplingInstance::C1(good.clone())).unwrap(),
    )
    .unwrap();
    let out = cwbnlw(
        &["coupling", "--replay", path.to_str().unwrap()],
        reference(),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    // a tiny diagonal entry breaks the block inverse bounds
    let mut bad = good;
    bad.matrix[0] = 1e-9;
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_string(&CouplingInstance::C1(bad)).unwrap()).unwrap();
    let out = cwbnlw(
        &["coupling", "--replay", path.to_str().unwrap()],
        reference(),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn replay_requires_coupling_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwbnlw(&["solve", "--replay", "x.json"], reference(), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = cwbnlw(&["diophantine"], reference(), dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["measure.csv", "sublevel.csv", "diophantine.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}
