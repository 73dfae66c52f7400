use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectral-spc"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn shifted_spectra_stream_alarms() {
    let d = tempfile::tempdir().unwrap();
    let sim = bin(d.path(), &["simulate", "--kind", "spectra", "--parts", "30", "--shift-time", "23", "--out", "out"]);
    assert_eq!(code(&sim), 0, "{}", text(&sim));
    let o = bin(d.path(), &["phase2", "--out", "out"]);
    assert_eq!(code(&o), 2, "{}", text(&o));
    let report = fs::read_to_string(d.path().join("out/phase2_report.txt")).unwrap();
    assert!(report.contains("alarm at t = "), "{report}");
    let csv = fs::read_to_string(d.path().join("out/phase2.csv")).unwrap();
    assert!(csv.starts_with("t,Q_t,h,alarm\n"));
    assert_eq!(csv.lines().count(), 11);
    assert!(fs::read_to_string(d.path().join("out/phase2.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn phase1_separates_in_control_from_step() {
    let d = tempfile::tempdir().unwrap();
    bin(d.path(), &["simulate", "--kind", "spectra", "--parts", "20", "--out", "calm", "--seed", "11"]);
    let o = bin(d.path(), &["phase1", "--out", "calm", "--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    bin(d.path(), &["simulate", "--kind", "spectra", "--parts", "20", "--shift-time", "11", "--out", "step", "--seed", "11"]);
    let o = bin(d.path(), &["phase1", "--out", "step", "--seed", "11"]);
    assert_eq!(code(&o), 2, "{}", text(&o));
    let summary = fs::read_to_string(d.path().join("step/phase1_summary.csv")).unwrap();
    assert!(summary.contains("changepoint,11"), "{summary}");
}

#[test]
fn missing_upstream_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    for stage in ["spectrum", "phase1", "phase2", "preprocess"] {
        let o = bin(d.path(), &[stage, "--out", "out", "--dataset", "nowhere"]);
        assert_eq!(code(&o), 1, "{stage}: {}", text(&o));
        assert!(text(&o).contains("missing input"), "{stage}: {}", text(&o));
    }
    let o = bin(d.path(), &["roi", "--out", "out"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(d.path(), &["phase1", "--no-such-flag"])), 1);
    assert_eq!(code(&bin(d.path(), &["spectrum", "--k", "lots"])), 1);
    assert_eq!(code(&bin(d.path(), &["--help"])), 0);
}

#[test]
fn corrupt_part_halts_preprocessing() {
    let d = tempfile::tempdir().unwrap();
    bin(d.path(), &["simulate", "--parts", "2", "--dataset", "ds", "--out", "out"]);
    fs::write(d.path().join("ds/part_001b.off"), "not a mesh\n").unwrap();
    let o = bin(d.path(), &["preprocess", "--dataset", "ds", "--out", "out", "--target-vertices", "1500"]);
    assert_eq!(code(&o), 1);
    assert!(text(&o).contains("part_001b.off"), "{}", text(&o));
    assert!(!d.path().join("out/manifest.csv").exists());
}

const CONFIG: &str = r#"
dataset_dir = "ds"
output_dir = "out"
seed = 7

[preprocess]
target_vertices = 500

[spectrum]
k = 8

[spc]
m0 = 10

[phase1]
n_perm = 299

[phase2]
n_cal = 300

[simulate]
parts = 12
subdivisions = 3
shift_time = 11
"#;

fn sha_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn config_file_run_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    let b = d.path().join("b");
    for dir in [&a, &b] {
        fs::create_dir_all(dir).unwrap();
        fs::write(dir.join("run.toml"), CONFIG).unwrap();
        // paths in the config resolve against the config file, not the cwd
        let o = bin(d.path(), &["simulate", "--config", dir.join("run.toml").to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", text(&o));
    }
    let oa = bin(d.path(), &["run", "--config", "a/run.toml"]);
    assert!(code(&oa) != 1, "{}", text(&oa));
    let ob = Command::new(env!("CARGO_BIN_EXE_spectral-spc"))
        .current_dir(d.path())
        .args(["run", "--config", "b/run.toml"])
        .env("SPECTRAL_SPC_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&oa), code(&ob));
    let (ta, tb) = (sha_tree(&a.join("out")), sha_tree(&b.join("out")));
    assert!(ta.len() >= 10);
    let differ: Vec<&String> = ta.iter().zip(&tb).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
    assert!(ta.len() == tb.len() && differ.is_empty(), "outputs differ: {differ:?}");
    let spectra = fs::read_to_string(a.join("out/spectra.csv")).unwrap();
    assert_eq!(spectra.lines().count(), 13);
    assert!(spectra.lines().next().unwrap().ends_with("lambda_8"));
    assert_eq!(fs::read_dir(a.join("out/processed")).unwrap().count(), 12);
}

#[test]
fn roi_and_diagnose_write_reports() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("run.toml"), CONFIG.replace("subdivisions = 3", "subdivisions = 4")).unwrap();
    bin(d.path(), &["simulate", "--config", "run.toml"]);
    let part = "ds/part_012.ply";
    let o = bin(d.path(), &["roi", "--config", "run.toml", "--part", part, "--cad", "out/cad.ply"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let rep = fs::read_to_string(d.path().join("out/roi_report.txt")).unwrap();
    assert!(rep.starts_with("iter"), "{rep}");
    assert!(d.path().join("out/roi.ply").exists());
    fs::write(d.path().join("pairs.txt"), "0 0 1  0 0 1\n1 0 0  1 0 0\n0 1 0  0 1 0\n").unwrap();
    let o = bin(d.path(), &["diagnose", "--config", "run.toml", "--part", part, "--cad", "out/cad.ply", "--correspondences", "pairs.txt"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let rms = fs::read_to_string(d.path().join("out/icp_rms.csv")).unwrap();
    assert!(rms.starts_with("iteration,rms\n"));
    let transform = fs::read_to_string(d.path().join("out/transform.txt")).unwrap();
    assert_eq!(transform.split_whitespace().count(), 12);
    assert!(fs::read(d.path().join("out/deviation.ply")).unwrap().starts_with(b"ply"));
}
