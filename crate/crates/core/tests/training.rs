use gyrodiff::diffusion::{train_denoiser, DenoiserArch, DiffusionTrainConfig, NoiseSchedule};
use gyrodiff::heading::{crmse_deg, train_heading, HeadingTrainConfig, InputScaler};
use gyrodiff::pipeline::model_crmse_deg;
use gyrodiff::synth::{generate_synthetic_dataset, SplitName, SyntheticConfig, TimeSequence};

fn labels(seqs: &[TimeSequence]) -> Vec<f64> {
    seqs.iter().map(|s| s.heading_label.unwrap()).collect()
}

#[test]
fn toy_denoiser_halves_its_loss() {
    let seqs: Vec<TimeSequence> = (0..16)
        .map(|i| TimeSequence::clean(i as f64 * 22.5f64.to_radians(), 0.3, 10.0, 3.0).unwrap())
        .collect();
    let scaler = InputScaler::fit(&seqs).unwrap();
    let scaled: Vec<TimeSequence> = seqs
        .iter()
        .map(|s| TimeSequence::unflatten(&scaler.transform(s), s.len(), s).unwrap())
        .collect();
    let sched = NoiseSchedule::linear(10, 0.01, 0.2).unwrap();
    let cfg = DiffusionTrainConfig {
        batch_size: 4,
        learning_rate: 1e-2,
        max_epochs: 30,
        patience: 0,
        arch: DenoiserArch {
            layers: 1,
            hidden: 16,
            embed_dim: 8,
        },
        ..DiffusionTrainConfig::default()
    };
    let trained = train_denoiser(&scaled, &scaled, &cfg, &sched, 4).unwrap();
    let r = &trained.curve.records;
    assert_eq!(r.len(), 30);
    let (first, last) = (r[0].train, r[29].train);
    assert!(last < 0.5 * first, "{first} -> {last}");
}

#[test]
fn heading_net_learns_clean_headings() {
    let data = generate_synthetic_dataset(&SyntheticConfig {
        increment_deg: 5.0,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let cfg = HeadingTrainConfig {
        epochs: 150,
        ..HeadingTrainConfig::enhanced()
    };
    let trained = train_heading(data.get(SplitName::Train), data.get(SplitName::Val), &cfg, None, 8).unwrap();
    let test = data.get(SplitName::Test);
    let crmse = model_crmse_deg(&trained.model, test, None, 2).unwrap();
    assert!(crmse < 1.0, "test CRMSE {crmse}");
    let direct = crmse_deg(&trained.model.predict_batch(test).unwrap(), &labels(test)).unwrap();
    assert_eq!(crmse.to_bits(), direct.to_bits());
}

#[test]
fn heading_training_is_deterministic() {
    let data = generate_synthetic_dataset(&SyntheticConfig {
        increment_deg: 30.0,
        duration_s: 20.0,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let cfg = HeadingTrainConfig {
        epochs: 3,
        ..HeadingTrainConfig::enhanced()
    };
    let run = || train_heading(data.get(SplitName::Train), data.get(SplitName::Val), &cfg, None, 3).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.model.net.params(), b.model.net.params());
    assert_eq!(a.curve, b.curve);
}
