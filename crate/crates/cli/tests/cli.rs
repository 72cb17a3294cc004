use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ioncascade::sim::NoiseModel;
use ioncascade_cli::config::{RbKind, RunConfig};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ioncascade"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn noiseless_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::paper();
    cfg.sim.noise = NoiseModel::ideal();
    write(dir, "ideal.toml", &cfg.to_toml())
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn cnot_program_shape() {
    let dir = TempDir::new().unwrap();
    let ir = write(dir.path(), "cnot.ir", "CNOT 1 0\n");
    let r = report(&run(&["compile", ir.to_str().unwrap()]));
    let counts = &r["results"]["program"]["counts"];
    assert_eq!(counts["transports"], 4);
    assert_eq!(counts["well_changes"], 2);
    assert_eq!(counts["ms_segments"], 1);
    assert!(counts["pulses"].as_u64().unwrap() <= 5);
    assert!(r["results"]["listing"].as_str().unwrap().contains("ms-segment"));
}

#[test]
fn empty_circuit_takes_no_time() {
    let dir = TempDir::new().unwrap();
    let ir = write(dir.path(), "empty.ir", "# nothing\n\n");
    let r = report(&run(&["compile", ir.to_str().unwrap()]));
    assert_eq!(r["results"]["program"]["total_time"].as_f64(), Some(0.0));
    assert_eq!(r["results"]["program"]["counts"]["pulses"], 0);
}

#[test]
fn malformed_line_is_input_error() {
    let dir = TempDir::new().unwrap();
    let ir = write(dir.path(), "bad.ir", "H 0\nCNOT 0\n");
    let out = run(&["compile", ir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn schema_errors_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[sim]\nshots = 10\nbogus = 1\n");
    let ir = write(dir.path(), "x.ir", "X 0\n");
    let out = run(&["--config", cfg.to_str().unwrap(), "run", ir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = run(&["compile", dir.path().join("absent.ir").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failed_fit_is_numerical_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = RunConfig::paper();
    cfg.characterization.rb.mode = RbKind::Depolarizing;
    cfg.characterization.rb.lengths = vec![4];
    let path = write(dir.path(), "rb.toml", &cfg.to_toml());
    let out = run(&["--config", path.to_str().unwrap(), "rb"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn x_on_first_ion_noiseless() {
    let dir = TempDir::new().unwrap();
    let cfg = noiseless_config(dir.path());
    let ir = write(dir.path(), "x.ir", "X 0\n");
    let r = report(&run(&["--config", cfg.to_str().unwrap(), "--shots", "300", "run", ir.to_str().unwrap()]));
    let run0 = &r["results"]["runs"][0];
    assert_eq!(run0["states"][2], "10");
    assert_eq!(run0["frequencies"][2].as_f64(), Some(1.0));
    let ci = run0["wilson95"][2].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() > 0.98 && ci[1].as_f64() == Some(1.0));
}

#[test]
fn all_preparations_on_four_ions() {
    let dir = TempDir::new().unwrap();
    let cfg = noiseless_config(dir.path());
    let ir = write(dir.path(), "none.ir", "");
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--ions",
        "4",
        "--shots",
        "20",
        "--out",
        out_dir.to_str().unwrap(),
        "run",
        "--all-preparations",
        ir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(out_dir.join("populations.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 81);
    // X on every ion lands in |1111⟩
    let xxxx = rows.iter().find(|r| &r[1] == "XXXX").unwrap();
    let col = header.iter().position(|h| h == "P1111").unwrap();
    assert_eq!(&xxxx[col], "1.000000");
    assert!(out_dir.join("run.json").exists());
}

#[test]
fn scan_trace_matches_ideal_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = noiseless_config(dir.path());
    let ir = write(dir.path(), "cnot.ir", "X 1\nCNOT 1 0\n");
    let shots = 4000.0;
    let r =
        report(&run(&["--config", cfg.to_str().unwrap(), "--shots", "4000", "run", "--scan", ir.to_str().unwrap()]));
    let trace = r["results"]["trace"].as_array().unwrap();
    assert_eq!(trace.len(), r["results"]["gate_steps"].as_u64().unwrap() as usize + 1);
    for point in trace {
        let f = point["frequencies"].as_array().unwrap();
        let i = point["ideal"].as_array().unwrap();
        for (a, b) in f.iter().zip(i) {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            let sigma = (b * (1.0 - b) / shots).sqrt();
            assert!((a - b).abs() <= 5.0 * sigma + 1e-9, "{point}");
        }
    }
    let last = trace.last().unwrap();
    assert!((last["ideal"][3].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn rb_without_noise_has_no_gate_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = RunConfig::paper();
    cfg.sim.noise = NoiseModel::ideal();
    cfg.characterization.rb.lengths = vec![1, 2, 4, 8];
    cfg.characterization.rb.sequences = 4;
    let path = write(dir.path(), "rb.toml", &cfg.to_toml());
    let r = report(&run(&["--config", path.to_str().unwrap(), "--shots", "20", "rb"]));
    for ion in r["results"]["ions"].as_array().unwrap() {
        assert!(ion["eps_g"].as_f64().unwrap().abs() < 1e-6, "{ion}");
    }
}

#[test]
fn bell_with_default_noise() {
    let r = report(&run(&["bell"]));
    let f = r["results"]["fidelity"].as_f64().unwrap();
    assert!((0.88..=0.98).contains(&f), "{f}");
}

#[test]
fn qpt_with_default_noise() {
    let dir = TempDir::new().unwrap();
    let mut cfg = RunConfig::paper();
    cfg.characterization.qpt.bootstrap = 20;
    let path = write(dir.path(), "qpt.toml", &cfg.to_toml());
    let out_dir = dir.path().join("qpt");
    let out = run(&["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "qpt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("qpt.json")).unwrap()).unwrap();
    let f = r["results"]["fidelity"].as_f64().unwrap();
    assert!((f - 0.78).abs() <= 0.04, "{f}");
    assert_eq!(r["results"]["ideal_nonzero"], 16);
    for name in ["qpt_chi_re.csv", "qpt_chi_im.csv", "qpt_p00.csv"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let p00 = std::fs::read_to_string(out_dir.join("qpt_p00.csv")).unwrap();
    assert_eq!(p00.lines().count(), 257);
}

#[test]
fn deterministic_under_seed_with_provenance() {
    let dir = TempDir::new().unwrap();
    let ir = write(dir.path(), "bell.ir", "MS 0 1 pi/4\nR 0 pi/2 0.3\n");
    let args = |seed: &str| run(&["--seed", seed, "--shots", "500", "run", ir.to_str().unwrap()]);
    let (a, b, c) = (args("5"), args("5"), args("6"));
    assert_eq!(a.stdout, b.stdout);
    let (ra, rc) = (report(&a), report(&c));
    assert_eq!(ra["seed"], 5);
    assert_eq!(ra["config_hash"].as_str().unwrap().len(), 64);
    assert_ne!(ra["config_hash"], rc["config_hash"]);
    assert_ne!(ra["results"]["runs"][0]["counts"], rc["results"]["runs"][0]["counts"]);
}
