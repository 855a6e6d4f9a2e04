use std::path::Path;
use std::process::Command;

use seated_crowd::io::{self, Manifest, RunStatus, MANIFEST_FILE};

fn cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_seated-crowd")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn complete(dir: &Path) {
    let m: Manifest = io::read_json(dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.status, RunStatus::Complete);
    assert!(io::verify_manifest(dir).unwrap().is_empty());
}

#[test]
fn profile_to_estimate_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |s: &str| tmp.path().join(s).display().to_string();

    cli(&["synth-profiles", "--seed", "4", "--n-sources", "3", "--duration-s", "60", "--out", &d("profiles")]);
    complete(&tmp.path().join("profiles"));

    for i in 0..3 {
        let profile = d(&format!("profiles/profiles/synth-{i:03}.csv"));
        cli(&["carson", "--profile", &profile, "--out", &d(&format!("bw{i}"))]);
        complete(&tmp.path().join(format!("bw{i}")));
    }
    let bws: Vec<String> = (0..3).map(|i| d(&format!("bw{i}/bandwidth.csv"))).collect();

    let mut args = vec!["prior-build", "--n-max", "5", "--out"];
    let priors_dir = d("priors");
    args.push(&priors_dir);
    args.push("--bandwidth");
    args.extend(bws.iter().map(String::as_str));
    cli(&args);

    let stdout = cli(&[
        "estimate",
        "--metric",
        "js",
        "--priors",
        &d("priors/priors.json"),
        "--bandwidth",
        &bws[0],
        "--out",
        &d("est"),
    ]);
    assert!(stdout.starts_with("N = "), "{stdout}");
    complete(&tmp.path().join("est"));

    let report = cli(&["report", "--run", &d("est")]);
    assert!(report.contains("Complete"), "{report}");
}

#[test]
fn rf_sim_writes_spectrogram() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |s: &str| tmp.path().join(s).display().to_string();
    cli(&["synth-profiles", "--n-sources", "1", "--duration-s", "5", "--out", &d("p")]);
    cli(&["rf-sim", "--seed", "2", "--streams", "3", "--profile", &d("p/profiles/synth-000.csv"), "--out", &d("rf")]);
    complete(&tmp.path().join("rf"));
    let spec = io::read_spectrogram(tmp.path().join("rf/spectrogram.json")).unwrap();
    assert_eq!(spec.power[0].len(), spec.freqs.len());
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_seated-crowd"))
        .args(["carson", "--profile", "/nonexistent.csv", "--out", "/tmp/never"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
