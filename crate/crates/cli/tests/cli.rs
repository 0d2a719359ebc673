use legendrian_core::contact::{integrate, PolarGrid, SL2Value};
use legendrian_core::holo::{HoloFunction, HoloPair};
use num_complex::Complex64;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_legendrian"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn write_config(dir: &Path, n: usize, rounds: usize) -> PathBuf {
    let path = dir.join("config.json");
    let cfg = format!(
        r#"{{"n": {n}, "rounds": {rounds}, "grid": {{"radii": 11, "angles": 32}},
            "distance_resolution": 16, "runge_samples": 2000, "p_rays": 8}}"#
    );
    std::fs::write(&path, cfg).unwrap();
    path
}

fn construct(dir: &Path, n: usize, rounds: usize) -> Output {
    let cfg = write_config(dir, n, rounds);
    run(&["construct", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()])
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn snapshot(dir: &Path, pair: &HoloPair, grid: PolarGrid) -> PathBuf {
    let c = integrate(pair, Complex64::new(0.0, 0.0), SL2Value::identity(), grid).unwrap();
    let path = dir.join("curve.curve");
    c.write_snapshot(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn construct_one_round_has_2n_steps_and_reports_uncertified_bumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = construct(dir.path(), 8, 1);
    // the bumps cannot be certified, so the run reports a certificate failure
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["rounds"]["rounds"][0]["report"]["steps"].as_array().unwrap().len(), 16);
    assert_eq!(m["all_certificates_pass"], false);
    assert_eq!(m["failures"].as_array().unwrap().len(), 16);
    // defaults are recorded
    assert_eq!(m["config"]["tolerances"]["center"], 1e-10);
    assert_eq!(m["config"]["s"], 0.2);
    assert!(dir.path().join("L0.curve").exists() && dir.path().join("round1.curve").exists());
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    construct(dir.path(), 4, 1);
    let first = std::fs::read(dir.path().join("manifest.json")).unwrap();
    let first_curve = std::fs::read(dir.path().join("round1.curve")).unwrap();
    construct(dir.path(), 4, 1);
    assert_eq!(first, std::fs::read(dir.path().join("manifest.json")).unwrap());
    assert_eq!(first_curve, std::fs::read(dir.path().join("round1.curve")).unwrap());
}

#[test]
fn three_rounds_stay_below_composed_bound() {
    let dir = tempfile::tempdir().unwrap();
    construct(dir.path(), 4, 3);
    let m = manifest(dir.path());
    let rounds = m["rounds"]["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 3);
    for r in rounds {
        assert!(r["sup_norm"].as_f64().unwrap() <= r["tau_out"].as_f64().unwrap());
    }
    assert_eq!(m["rounds"]["below_composed"], true);
    assert!(m["rounds"]["ball_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_fresh_output_passes_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    construct(dir.path(), 4, 1);
    let snap = dir.path().join("round1.curve");
    let a = run(&["verify", snap.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    let b = run(&["verify", snap.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    // the manifest checks include the bump certificates, which fail
    let m = dir.path().join("manifest.json");
    let c = run(&["verify", snap.to_str().unwrap(), "--manifest", m.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert!(String::from_utf8_lossy(&c.stdout).contains("FAIL round 1: bumps certified"));
}

#[test]
fn corrupted_snapshot_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let snap = snapshot(dir.path(), &HoloPair::default_initial(), PolarGrid { radii: 11, angles: 32 });
    let mut bytes = std::fs::read(&snap).unwrap();
    let n = bytes.len();
    bytes[n - 64 * 40 + 3] ^= 0x40;
    std::fs::write(&snap, bytes).unwrap();
    let out = run(&["verify", snap.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL samples match integration"), "{text}");
}

#[test]
fn unreadable_snapshot_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("junk.curve");
    std::fs::write(&p, b"not a snapshot").unwrap();
    assert_eq!(run(&["verify", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn export_identity_curve_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let zero = HoloPair::new(HoloFunction::zero(), HoloFunction::zero());
    let snap = snapshot(dir.path(), &zero, PolarGrid { radii: 6, angles: 16 });
    let out = run(&["export", snap.to_str().unwrap(), "--target", "h3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("single point"));
}

#[test]
fn export_all_targets_writes_meshes_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let snap = snapshot(dir.path(), &HoloPair::default_initial(), PolarGrid { radii: 11, angles: 32 });
    let out_dir = dir.path().join("meshes");
    let out = run(&["export", snap.to_str().unwrap(), "--format", "ply", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for t in ["h3", "desitter", "affine"] {
        let mesh = std::fs::read(out_dir.join(format!("front_{t}.ply"))).unwrap();
        assert!(mesh.starts_with(b"ply\nformat binary_little_endian 1.0\n"));
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join(format!("front_{t}.json"))).unwrap()).unwrap();
        assert_eq!(side["vertices"], 11 * 32);
        assert!(side["model_error"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn export_matches_golden_obj() {
    let dir = tempfile::tempdir().unwrap();
    let snap = snapshot(dir.path(), &HoloPair::default_initial(), PolarGrid { radii: 4, angles: 8 });
    let out = run(&["export", snap.to_str().unwrap(), "--target", "h3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let got = std::fs::read_to_string(dir.path().join("front_h3.obj")).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/front_h3_tiny.obj");
    if !golden.exists() {
        std::fs::write(&golden, &got).unwrap();
    }
    let want = std::fs::read_to_string(&golden).unwrap();
    let parse = |s: &str| -> Vec<Vec<f64>> {
        s.lines().map(|l| l.split_whitespace().skip(1).map(|v| v.parse().unwrap()).collect()).collect()
    };
    let (g, w) = (parse(&got), parse(&want));
    assert_eq!(g.len(), w.len());
    assert_eq!(g.len(), 4 * 8 + 8 * (2 * 3 - 1));
    for (a, b) in g.iter().zip(&w) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(run(&["construct", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["export", "x.curve", "--format", "stl"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"rounds": 0}"#).unwrap();
    let out = run(&["construct", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rounds"));
}

#[test]
fn labyrinth_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["labyrinth", "--n", "6", "--resolution", "64", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let img = std::fs::read(dir.path().join("labyrinth_n6.pgm")).unwrap();
    assert!(img.starts_with(b"P5\n64 64\n255\n"));
    assert_eq!(img.len(), "P5\n64 64\n255\n".len() + 64 * 64);
}
