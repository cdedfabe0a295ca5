//! End-to-end runs of the `coagflux` binary: exit codes, output layout,
//! determinism and sensitivity of the verifier.

use std::path::{Path, PathBuf};
use std::process::Command;

fn out_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], dir: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_coagflux"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .unwrap()
        .status;
    status.code().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(2).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn usage_errors_exit_1() {
    let dir = out_dir("usage");
    assert_eq!(run(&["frobnicate"], &dir), 1);
    assert_eq!(run(&["figdata", "--N", "4"], &dir), 1);
    assert_eq!(run(&["figdata", "--gamma", "abc"], &dir), 1);
}

#[test]
fn outside_flux_window_is_a_construction_failure() {
    let dir = out_dir("window");
    assert_eq!(run(&["construct", "--gamma", "0.6", "--p", "0.3"], &dir), 2);
    let err: serde_json::Value = serde_json::from_str(&read(&dir, "error.json")).unwrap();
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("no constant-flux regime"));
}

#[test]
fn figdata_layout_and_determinism() {
    let dir = out_dir("fig");
    assert_eq!(run(&["figdata", "--fig_points", "100"], &dir), 0);
    let first = read(&dir, "G_align.csv");
    assert!(first.starts_with("# config_hash="));
    assert!(!first.contains('\r'));
    let rows = csv_rows(&first);
    assert_eq!(rows.len(), 100);
    let flips = rows.windows(2).filter(|w| w[0][2].signum() != w[1][2].signum()).count();
    assert_eq!(flips, 1);
    assert!(rows.iter().all(|r| r[1] < 0.0));
    assert_eq!(csv_rows(&read(&dir, "G_vectors.csv")).len(), 100);
    assert_eq!(run(&["figdata", "--fig_points", "100"], &dir), 0);
    assert_eq!(read(&dir, "G_align.csv"), first);

    let same = out_dir("fig-same");
    assert_eq!(run(&["figdata", "--fig_points", "50", "--z_a", "1.5", "--z_b", "1.5"], &same), 0);
    assert!(csv_rows(&read(&same, "G_align.csv")).iter().all(|r| r[1] > 0.0 && r[2].abs() <= 1e-12 * r[1]));
}

#[test]
fn config_file_and_flags_merge() {
    let dir = out_dir("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# figure range\nfig_points = 40\nfig_k_lo = 19.0\n").unwrap();
    assert_eq!(run(&["figdata", "--config", cfg.to_str().unwrap(), "--fig_k_hi", "19.2"], &dir), 0);
    let rows = csv_rows(&read(&dir, "G_align.csv"));
    assert_eq!(rows.len(), 40);
    assert_eq!(rows[0][0], 19.0);
    assert!((rows[39][0] - 19.2).abs() < 1e-12);
}

#[test]
fn pipeline_end_to_end() {
    let dir = out_dir("pipeline");
    assert_eq!(run(&["construct"], &dir), 0);
    let manifest = read(&dir, "w0_manifest.json");
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let k = m["bifurcation"]["k_star"].as_f64().unwrap();
    assert!(k > 19.0 && k < 20.0);
    for f in ["phi.csv", "w0.csv", "psi.csv"] {
        assert!(read(&dir, f).starts_with("# config_hash="));
    }
    assert_eq!(run(&["construct"], &dir), 0);
    assert_eq!(read(&dir, "w0_manifest.json"), manifest);

    assert_eq!(run(&["solve"], &dir), 0);
    let sol: serde_json::Value = serde_json::from_str(&read(&dir, "solution.json")).unwrap();
    let (a1, a2) = (sol["alpha1"].as_f64().unwrap(), sol["alpha2"].as_f64().unwrap());
    assert!(a1.abs() + a2.abs() <= 10.0 * 0.01);
    let f = csv_rows(&read(&dir, "f_vs_powerlaw.csv"));
    let dev = f.iter().map(|r| (r[1] / r[2] - 1.0).abs()).fold(0.0, f64::max);
    assert!(dev > 0.008 && dev < 0.012, "relative oscillation {dev}");

    assert_eq!(run(&["verify"], &dir), 0);
    let v: serde_json::Value = serde_json::from_str(&read(&dir, "verify.json")).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(csv_rows(&read(&dir, "B_HH.csv")).len(), 32);
    assert_eq!(csv_rows(&read(&dir, "J.csv")).len(), 6);

    // the same solution with the mean of H shifted by 1e-2
    let bad = out_dir("corrupted");
    let mut sol = sol;
    let n = sol["h"]["n_max"].as_u64().unwrap() as usize;
    let c0 = sol["h"]["coeffs"][n][0].as_f64().unwrap();
    sol["h"]["coeffs"][n][0] = serde_json::json!(c0 + 1e-2);
    std::fs::write(bad.join("solution.json"), serde_json::to_string_pretty(&sol).unwrap()).unwrap();
    assert_eq!(run(&["verify"], &bad), 4);
    let err: serde_json::Value = serde_json::from_str(&read(&bad, "error.json")).unwrap();
    assert_eq!(err["stage"], "verify");

    // s = 0 gives the pure power law
    let flat = out_dir("power-law");
    std::fs::copy(dir.join("w0_manifest.json"), flat.join("w0_manifest.json")).unwrap();
    assert_eq!(run(&["solve", "--s", "0"], &flat), 0);
    let h = csv_rows(&read(&flat, "H.csv"));
    assert!(h.iter().all(|r| r[1] == h[0][1]));
    assert_eq!(run(&["verify", "--s", "0", "--verify_tol", "1e-8"], &flat), 0);
}
