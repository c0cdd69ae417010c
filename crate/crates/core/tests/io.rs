use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gyrodiff::diffusion::{DenoiserArch, DenoiserNetwork, ScheduleParams};
use gyrodiff::error::Error;
use gyrodiff::io::*;
use gyrodiff::synth::{generate_synthetic_dataset, NoiseModel, SplitName, SyntheticConfig};
use gyrodiff::training::TrainingCurve;

fn small_noisy() -> SyntheticConfig {
    SyntheticConfig {
        increment_deg: 10.0,
        duration_s: 20.0,
        noise_source_rate_hz: 30.0,
        noise: Some(NoiseModel {
            seed: 42,
            ..NoiseModel::default()
        }),
        ..SyntheticConfig::default()
    }
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic_dataset(&small_noisy()).unwrap();
    let meta = save_dataset(dir.path(), &data, serde_json::json!({"note": "test"})).unwrap();
    assert_eq!(
        (meta.train.count, meta.val.count, meta.test.count),
        (data.train.len(), data.val.len(), data.test.len())
    );
    assert_eq!(data.len(), 36);
    let (back, meta2) = load_dataset(dir.path()).unwrap();
    assert_eq!(meta, meta2);
    for split in SplitName::ALL {
        let (a, b) = (data.get(split), back.get(split));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.heading_label.unwrap().to_bits(), y.heading_label.unwrap().to_bits());
            assert_eq!(x.latitude.to_bits(), y.latitude.to_bits());
            for (r, s) in x.rows().zip(y.rows()) {
                for c in 0..3 {
                    assert_eq!(r[c].to_bits(), s[c].to_bits());
                }
            }
        }
    }
    let header = fs::read(dir.path().join("train.f64")).unwrap();
    assert!(header.starts_with(format!("f64le {} 60 3\n", data.train.len()).as_bytes()));
}

#[test]
fn tampered_dataset_fails_hash_check() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic_dataset(&small_noisy()).unwrap();
    save_dataset(dir.path(), &data, serde_json::Value::Null).unwrap();
    let path = dir.path().join("val.f64");
    let mut bytes = fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 3] ^= 0x10;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Checksum(_))));
}

#[test]
fn truncated_array_is_a_format_error() {
    let bytes = b"f64le 2 3 3\n\x00\x00";
    assert!(matches!(decode_array(bytes, Path::new("x")), Err(Error::Format { .. })));
    assert!(matches!(
        decode_array(b"f32 1 1 3\n", Path::new("x")),
        Err(Error::Format { .. })
    ));
}

fn denoiser_checkpoint() -> Checkpoint {
    let arch = DenoiserArch {
        layers: 1,
        hidden: 4,
        embed_dim: 4,
    };
    let net = DenoiserNetwork::new(arch, 3).unwrap();
    Checkpoint {
        header: CheckpointHeader {
            architecture: Architecture::Denoiser { arch },
            schedule: Some(ScheduleParams::default()),
            base_seed: 9,
            best_epoch: 0,
            config: serde_json::json!({"k": 1}),
            curve: TrainingCurve::new("svd_mse"),
        },
        params: net.params().to_vec(),
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.ckpt");
    let ck = denoiser_checkpoint();
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(ck, back);
    let (net, sched) = back.denoiser().unwrap();
    assert_eq!(net.params(), &ck.params[..]);
    assert_eq!(sched, ScheduleParams::default());
    assert!(back.heading().is_err());
}

#[test]
fn corrupted_checkpoint_reports_checksum_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.ckpt");
    denoiser_checkpoint().save(&path).unwrap();
    let clean = fs::read(&path).unwrap();
    for pos in [0, 10, 40, clean.len() / 2, clean.len() - 40, clean.len() - 1] {
        let mut bytes = clean.clone();
        bytes[pos] ^= 0x01;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checksum(_))), "byte {pos}");
    }
    fs::write(&path, &clean[..clean.len() - 5]).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(Error::Checksum(_))));
    assert!(matches!(
        Checkpoint::load(&dir.path().join("absent.ckpt")),
        Err(Error::MissingCheckpoint(_))
    ));
}

#[test]
fn manifest_is_written_atomically_and_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.txt");
    write_atomic(&out, b"hello").unwrap();
    let mut m = RunManifest::new("generate", serde_json::json!({"x": 1}), "abc".into(), 5);
    m.add_outputs(dir.path(), std::slice::from_ref(&out)).unwrap();
    m.timings_s.insert("total".into(), 0.5);
    m.write(dir.path()).unwrap();
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.contains(".tmp")), "{names:?}");
    let back = RunManifest::read(dir.path()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.outputs[0].path, "a.txt");
    assert_eq!(back.outputs[0].sha256, sha256_hex(b"hello"));
}

#[test]
fn config_defaults_and_partial_sections() {
    let cfg = ExperimentConfig::from_toml("").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    let cfg =
        ExperimentConfig::from_toml("base_seed = 7\n[baseline]\nepochs = 12\n[dataset.noise]\nseed = 3\n").unwrap();
    assert_eq!(cfg.base_seed, 7);
    assert_eq!(cfg.baseline.epochs, 12);
    assert_eq!(cfg.baseline.batch_size, 100);
    assert_eq!(cfg.enhanced.batch_size, 32);
    let noise = cfg.dataset.noise.unwrap();
    assert_eq!(noise.seed, 3);
    assert_eq!(noise.white_noise_std, NoiseModel::default().white_noise_std);
    let again = ExperimentConfig::from_toml(&ExperimentConfig::default().to_toml()).unwrap();
    assert_eq!(again, ExperimentConfig::default());
}

#[test]
fn malformed_config_reports_line_and_field() {
    let text = "base_seed = 1\n\n[dataset]\nduration_s = 100.0\nincrement_dge = 0.5\n";
    match ExperimentConfig::from_toml(text) {
        Err(Error::Config { field, line, message }) => {
            assert_eq!(line, Some(5), "{message}");
            assert_eq!(field, "dataset.increment_dge");
            assert!(message.contains("unknown field"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match ExperimentConfig::from_toml("[enhanced]\nbatch_size = \"many\"\n") {
        Err(Error::Config { field, line, .. }) => {
            assert_eq!(line, Some(2));
            assert_eq!(field, "enhanced.batch_size");
        }
        other => panic!("{other:?}"),
    }
    match ExperimentConfig::from_toml("[dataset]\nincrement_deg = 0.7\n") {
        Err(Error::Config { field, line, .. }) => {
            assert_eq!(field, "dataset.increment_deg");
            assert_eq!(line, Some(2));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        ExperimentConfig::from_toml("[dataset\n"),
        Err(Error::Config { line: Some(1), .. })
    ));
}

fn write_recording(path: &Path, rate: f64, seconds: f64, heading_deg: f64) {
    let n = (rate * seconds) as usize;
    let w = 7.292115e-5;
    let h = heading_deg.to_radians();
    let mut s = String::from("time,gx,gy,gz\n");
    for k in 0..n {
        let _ = writeln!(s, "{},{},{},{}", k as f64 / rate, w * h.cos(), -w * h.sin(), 0.0);
    }
    fs::write(path, s).unwrap();
}

#[test]
fn ingest_shapes_follow_split_directive() {
    let dir = tempfile::tempdir().unwrap();
    let mut labels = String::from("file,heading_deg\n");
    for i in 0..34 {
        let name = format!("rec{i:02}.csv");
        write_recording(&dir.path().join(&name), 30.0, 100.0, i as f64 * 10.0);
        let _ = writeln!(labels, "{name},{}", i as f64 * 10.0);
    }
    fs::write(dir.path().join(LABELS_FILE), labels).unwrap();
    let cfg = IngestConfig {
        split_counts: Some([24, 4, 6]),
        ..IngestConfig::default()
    };
    let data = ingest_recordings(dir.path(), &cfg).unwrap();
    assert_eq!((data.train.len(), data.val.len(), data.test.len()), (2400, 4, 6));
    assert!(data
        .train
        .iter()
        .chain(&data.val)
        .chain(&data.test)
        .all(|s| s.len() == 300 && s.sample_rate == 3.0));
    // Val/test keep their recorded labels; only training copies are rotated.
    assert!((data.val[0].heading_label.unwrap().to_degrees() - 240.0).abs() < 1e-9);
    let first = data.train[0].heading_label.unwrap().to_degrees();
    assert!((first - 340.0).abs() < 1e-9, "{first}");
}

#[test]
fn ingest_rejects_non_monotone_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "time,gx,gy,gz\n0.0,1,2,3\n0.1,1,2,3\n0.05,1,2,3\n0.3,1,2,3\n").unwrap();
    fs::write(dir.path().join(LABELS_FILE), "file,heading_deg\nbad.csv,10\n").unwrap();
    match ingest_recordings(dir.path(), &IngestConfig::default()) {
        Err(Error::Format { line, message, .. }) => {
            assert_eq!(line, 4);
            assert!(message.contains("does not increase"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    fs::write(&path, "time,gx,gy,gz\n0.0,1,2,3\n0.1,1,x,3\n").unwrap();
    assert!(matches!(
        read_recording(&path, &IngestConfig::default()),
        Err(Error::Format { line: 3, .. })
    ));
}
