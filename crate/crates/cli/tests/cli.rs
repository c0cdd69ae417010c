use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
base_seed = 3

[dataset]
increment_deg = 20.0
duration_s = 10.0
noise_source_rate_hz = 30.0

[schedule]
steps = 20

[denoiser]
max_epochs = 2
batch_size = 8

[denoiser.arch]
layers = 1
hidden = 4
embed_dim = 4

[baseline]
epochs = 2

[baseline.arch]
hidden = 4

[enhanced]
epochs = 2

[enhanced.arch]
hidden = 4

[pipeline]
t_back = 15
sweep_values = [10, 20]
classical_durations_s = [5.0, 10.0]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gyrodiff"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn hashes(dir: &Path) -> Vec<(String, String)> {
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["path"].as_str().unwrap().into(), o["sha256"].as_str().unwrap().into()))
        .collect()
}

#[test]
fn full_workflow_and_rerun_from_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = tmp.path().join("run");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    ok(&["generate", "--config", c, "--out", o]);
    ok(&["train-denoiser", "--config", c, "--out", o]);
    ok(&["train-heading", "--variant", "baseline", "--config", c, "--out", o]);
    ok(&["train-heading", "--variant", "enhanced", "--config", c, "--out", o]);
    ok(&["evaluate", "--config", c, "--out", o]);
    ok(&["sweep-tback", "--config", c, "--out", o, "--jobs", "2"]);
    ok(&["ablate-norm", "--config", c, "--out", o]);

    let csv = fs::read_to_string(out.join("evaluate/report.csv")).unwrap();
    assert!(csv.starts_with("method,duration_s,t_back,scope,crmse_deg,seed\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("classical,")).count(), 2);
    assert!(csv.contains("\nbaseline,10,,,"));
    assert!(csv.contains("\ndenoiser_aided,10,15,per_sequence,"));
    let curve = fs::read_to_string(out.join("heading-enhanced/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert!(curve.starts_with("epoch,train_crmse_deg,val_crmse_deg,learning_rate"));
    let svg = fs::read_to_string(out.join("evaluate/figure.svg")).unwrap();
    assert!(
        svg.contains("stroke-dasharray"),
        "learned methods drawn as horizontal lines"
    );
    let sweep = fs::read_to_string(out.join("sweep-tback/report.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);

    fs::remove_file(out.join("evaluate/figure.svg")).unwrap();
    ok(&["plot", out.join("evaluate/report.json").to_str().unwrap()]);
    assert!(out.join("evaluate/figure.svg").exists());

    // Re-run each step from its manifest into a fresh directory.
    let again = tmp.path().join("again");
    let a = again.to_str().unwrap();
    let m = |sub: &str| out.join(sub).join("manifest.json").to_string_lossy().into_owned();
    ok(&["generate", "--config", &m("dataset"), "--out", a]);
    ok(&["train-denoiser", "--config", &m("denoiser"), "--out", a]);
    ok(&[
        "train-heading",
        "--variant",
        "baseline",
        "--config",
        &m("heading-baseline"),
        "--out",
        a,
    ]);
    ok(&[
        "train-heading",
        "--variant",
        "enhanced",
        "--config",
        &m("heading-enhanced"),
        "--out",
        a,
    ]);
    ok(&["evaluate", "--config", &m("evaluate"), "--out", a]);
    for sub in [
        "dataset",
        "denoiser",
        "heading-baseline",
        "heading-enhanced",
        "evaluate",
    ] {
        let (x, y) = (hashes(&out.join(sub)), hashes(&again.join(sub)));
        assert_eq!(x, y, "{sub} differs on re-run");
    }
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = tmp.path().join("run");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    ok(&["generate", "--config", c, "--out", o]);
    // Enhanced heading training needs the denoiser first.
    let r = run(&["train-heading", "--variant", "enhanced", "--config", c, "--out", o]);
    assert_eq!(r.status.code(), Some(5), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing artifact"));

    ok(&["train-denoiser", "--config", c, "--out", o]);
    let ckpt = out.join("denoiser/denoiser.ckpt");
    let mut bytes = fs::read(&ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    fs::write(&ckpt, bytes).unwrap();
    let r = run(&["train-heading", "--variant", "enhanced", "--config", c, "--out", o]);
    assert_eq!(r.status.code(), Some(6));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[dataset]\nincrement_deg = \"half\"\n").unwrap();
    let r = run(&["generate", "--config", bad.to_str().unwrap(), "--out", o]);
    assert_eq!(r.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&r.stderr);
    assert!(msg.contains("dataset.increment_deg") && msg.contains("line 2"), "{msg}");

    let r = run(&["evaluate", "--config", c, "--out", o]);
    assert_eq!(r.status.code(), Some(5));
    assert_eq!(run(&["no-such-verb"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert!(String::from_utf8_lossy(&run(&["--help"]).stdout).contains("Exit codes"));
}
