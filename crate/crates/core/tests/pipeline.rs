use gyrodiff::diffusion::{DenoiserArch, DenoiserNetwork, ScheduleParams};
use gyrodiff::geo::EarthModel;
use gyrodiff::heading::SequencePreprocessor;
use gyrodiff::pipeline::{classical_sign_test, DenoisePreprocessor, NormScope, PipelineConfig};
use gyrodiff::synth::{generate_synthetic_dataset, mean_rate, NoiseModel, SplitName, SyntheticConfig};

fn small_noisy(increment_deg: f64) -> SyntheticConfig {
    SyntheticConfig {
        increment_deg,
        noise_source_rate_hz: 30.0,
        noise: Some(NoiseModel::default()),
        ..SyntheticConfig::default()
    }
}

#[test]
fn classical_error_shrinks_with_window_over_30_seeds() {
    let seeds: Vec<u64> = (1..=30).collect();
    let t = classical_sign_test(&small_noisy(6.0), &seeds, 10.0, 100.0).unwrap();
    assert_eq!(t.trials, 30);
    assert!(t.p_value < 0.01, "{t:?}");
}

/// Whatever the denoiser does to the normalized scale, de-normalization restores
/// physical units: the mean rate stays within 10x of the earth rate.
#[test]
fn denoised_output_keeps_physical_scale() {
    let data = generate_synthetic_dataset(&small_noisy(30.0)).unwrap();
    let seqs = data.get(SplitName::Test);
    let sched = ScheduleParams::default().build().unwrap();
    let net = DenoiserNetwork::new(
        DenoiserArch {
            layers: 1,
            hidden: 8,
            embed_dim: 4,
        },
        5,
    )
    .unwrap();
    let omega = EarthModel.rate();
    for scope in NormScope::ALL {
        for t_back in [0, 500, 950] {
            let cfg = PipelineConfig {
                t_back,
                scope,
                ..PipelineConfig::default()
            };
            let out = DenoisePreprocessor::new(&net, &sched, &cfg, 9).apply(seqs, 2).unwrap();
            for s in &out {
                let m = mean_rate(s).norm();
                assert!(m > omega / 10.0 && m < omega * 10.0, "{scope:?} t_back {t_back}: {m:e}");
            }
        }
    }
}
