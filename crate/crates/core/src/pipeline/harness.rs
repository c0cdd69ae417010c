use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::norm::NormScope;
use super::preprocess::{DenoisePreprocessor, PipelineConfig, TEST_STREAM};
use super::report::{dataset_hash, EvalReport, EvalRow, LabelledCurve, ReportKind};
use crate::diffusion::{DenoiserNetwork, NoiseSchedule};
use crate::error::{Error, Result};
use crate::geo::classical_gyrocompass;
use crate::heading::{crmse_deg, train_heading, HeadingModel, HeadingTrainConfig, SequencePreprocessor};
use crate::synth::{generate_synthetic_dataset, DatasetSplit, SplitName, SyntheticConfig, TimeSequence};

/// Maps `f` over `items` on up to `jobs` threads, preserving order. The first error wins.
pub fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}

fn labels(seqs: &[TimeSequence]) -> Result<Vec<f64>> {
    seqs.iter()
        .map(|s| s.heading_label.ok_or(Error::MissingLabel))
        .collect()
}

/// CRMSE in degrees of classical gyrocompassing over the first `window_s` seconds.
pub fn classical_crmse_deg(seqs: &[TimeSequence], window_s: f64) -> Result<f64> {
    let est = seqs
        .iter()
        .map(|s| classical_gyrocompass(s, window_s))
        .collect::<Result<Vec<_>>>()?;
    crmse_deg(&est, &labels(seqs)?)
}

/// CRMSE in degrees of a heading model on sequences, optionally denoised first.
pub fn model_crmse_deg(
    model: &HeadingModel,
    seqs: &[TimeSequence],
    denoiser: Option<&DenoisePreprocessor<'_>>,
    stream: u64,
) -> Result<f64> {
    let processed;
    let input = match denoiser {
        Some(d) => {
            processed = d.apply(seqs, stream)?;
            &processed[..]
        }
        None => seqs,
    };
    let pred = model.predict_batch(input)?;
    crmse_deg(&pred, &labels(seqs)?)
}

fn full_duration(seqs: &[TimeSequence]) -> Result<f64> {
    seqs.first().map(|s| s.duration()).ok_or(Error::EmptyBatch)
}

/// The two learned methods of a comparison: the baseline network on raw sequences and
/// the enhanced network behind the denoiser.
pub struct ComparisonModels<'a> {
    pub baseline: &'a HeadingModel,
    pub enhanced: &'a HeadingModel,
    pub denoiser: &'a DenoiserNetwork,
    pub sched: &'a NoiseSchedule,
}

/// Test-split CRMSE of classical gyrocompassing at each configured duration and of both
/// learned methods on the full sequences. All methods see the same noisy sequences.
pub fn run_method_comparison(
    data: &DatasetSplit,
    models: &ComparisonModels<'_>,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<EvalReport> {
    cfg.validate(models.sched)?;
    let test = data.get(SplitName::Test);
    let full = full_duration(test)?;
    let mut report = EvalReport::new(ReportKind::MethodComparison);
    let row = |method: &str, duration_s: f64, t_back, scope, crmse_deg| EvalRow {
        method: method.into(),
        duration_s,
        t_back,
        scope,
        crmse_deg,
        seed,
        split: SplitName::Test,
    };
    for &d in &cfg.classical_durations_s {
        report
            .rows
            .push(row("classical", d, None, None, classical_crmse_deg(test, d)?));
    }
    let baseline = model_crmse_deg(models.baseline, test, None, TEST_STREAM)?;
    report.rows.push(row("baseline", full, None, None, baseline));
    let pre = DenoisePreprocessor::new(models.denoiser, models.sched, cfg, seed);
    let aided = model_crmse_deg(models.enhanced, test, Some(&pre), TEST_STREAM)?;
    report
        .rows
        .push(row("denoiser_aided", full, Some(cfg.t_back), Some(cfg.scope), aided));
    report.meta.seeds.push(seed);
    report.meta.dataset_hash = dataset_hash(data);
    report.meta.reference = [
        ("paper_real_data_classical_100s_deg", 4.5),
        ("paper_real_data_baseline_deg", 3.9),
        ("paper_real_data_denoiser_aided_deg", 3.3),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(report)
}

/// Trains both learned methods on `data` and compares them against classical
/// gyrocompassing. The denoiser must already be trained.
pub fn train_and_compare(
    data: &DatasetSplit,
    denoiser: &DenoiserNetwork,
    sched: &NoiseSchedule,
    baseline_cfg: &HeadingTrainConfig,
    enhanced_cfg: &HeadingTrainConfig,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<EvalReport> {
    let train = data.get(SplitName::Train);
    let val = data.get(SplitName::Val);
    let baseline = train_heading(train, val, baseline_cfg, None, seed)?;
    let pre = DenoisePreprocessor::new(denoiser, sched, cfg, seed);
    let enhanced = train_heading(train, val, enhanced_cfg, Some(&pre), seed)?;
    let models = ComparisonModels {
        baseline: &baseline.model,
        enhanced: &enhanced.model,
        denoiser,
        sched,
    };
    let mut report = run_method_comparison(data, &models, cfg, seed)?;
    for (label, t) in [("baseline", &baseline), ("denoiser_aided", &enhanced)] {
        report.curves.push(LabelledCurve {
            label: label.into(),
            seed,
            curve: t.curve.clone(),
        });
    }
    Ok(report)
}

/// How the heading model is obtained for each `t_back` of a sweep.
pub enum SweepHeading<'a> {
    /// Train a fresh model on training data denoised at each `t_back`.
    Retrain(&'a HeadingTrainConfig),
    /// Evaluate one fixed model.
    Reuse(&'a HeadingModel),
}

/// Validation CRMSE of the denoiser-aided pipeline for each `t_back` in `values`. Cells
/// run in parallel on up to `jobs` threads; results do not depend on `jobs`.
#[allow(clippy::too_many_arguments)]
pub fn run_tback_sweep(
    data: &DatasetSplit,
    values: &[usize],
    denoiser: &DenoiserNetwork,
    sched: &NoiseSchedule,
    heading: SweepHeading<'_>,
    cfg: &PipelineConfig,
    seed: u64,
    jobs: usize,
) -> Result<EvalReport> {
    cfg.validate(sched)?;
    if values.is_empty() {
        return Err(Error::config("pipeline.sweep_values", "at least one value is required"));
    }
    for &v in values {
        super::preprocess::check_t_back(v, sched, "pipeline.sweep_values")?;
    }
    let train = data.get(SplitName::Train);
    let val = data.get(SplitName::Val);
    let full = full_duration(val)?;
    let base = DenoisePreprocessor::new(denoiser, sched, cfg, seed);
    let cells = par_map(values, jobs, |&t_back| {
        let pre = base.with_t_back(t_back);
        match &heading {
            SweepHeading::Retrain(hcfg) => {
                let trained = train_heading(train, val, hcfg, Some(&pre), seed)?;
                let crmse = model_crmse_deg(&trained.model, val, Some(&pre), 1)?;
                Ok((t_back, crmse, Some(trained.curve)))
            }
            SweepHeading::Reuse(model) => Ok((t_back, model_crmse_deg(model, val, Some(&pre), 1)?, None)),
        }
    })?;
    let mut report = EvalReport::new(ReportKind::TbackSweep);
    for (t_back, crmse, curve) in cells {
        report.rows.push(EvalRow {
            method: "denoiser_aided".into(),
            duration_s: full,
            t_back: Some(t_back),
            scope: Some(cfg.scope),
            crmse_deg: crmse,
            seed,
            split: SplitName::Val,
        });
        if let Some(curve) = curve {
            report.curves.push(LabelledCurve {
                label: format!("t_back={t_back}"),
                seed,
                curve,
            });
        }
    }
    report.meta.seeds.push(seed);
    report.meta.dataset_hash = dataset_hash(data);
    report.meta.reference.insert("paper_best_val_crmse_low_deg".into(), 1.7);
    report
        .meta
        .reference
        .insert("paper_best_val_crmse_high_deg".into(), 1.9);
    Ok(report)
}

/// Trains the denoiser-aided heading model under each normalization scope and reports
/// training CRMSE (epoch mean at the best epoch) and validation CRMSE. The scope with
/// the lower validation CRMSE is named in the report notes.
pub fn run_normalization_ablation(
    data: &DatasetSplit,
    denoiser: &DenoiserNetwork,
    sched: &NoiseSchedule,
    heading_cfg: &HeadingTrainConfig,
    cfg: &PipelineConfig,
    seed: u64,
    jobs: usize,
) -> Result<EvalReport> {
    cfg.validate(sched)?;
    let train = data.get(SplitName::Train);
    let val = data.get(SplitName::Val);
    let full = full_duration(val)?;
    let base = DenoisePreprocessor::new(denoiser, sched, cfg, seed);
    let cells = par_map(&NormScope::ALL, jobs, |&scope| {
        let pre = base.with_scope(scope);
        let trained = train_heading(train, val, heading_cfg, Some(&pre), seed)?;
        let best = *trained.curve.best().ok_or(Error::EmptyBatch)?;
        Ok((
            scope,
            best.train,
            model_crmse_deg(&trained.model, val, Some(&pre), 1)?,
            trained.curve,
        ))
    })?;
    let mut report = EvalReport::new(ReportKind::NormalizationAblation);
    for (scope, train_crmse, val_crmse, curve) in &cells {
        for (split, name, v) in [
            (SplitName::Train, "train", train_crmse),
            (SplitName::Val, "val", val_crmse),
        ] {
            report.rows.push(EvalRow {
                method: format!("denoiser_aided_{name}"),
                duration_s: full,
                t_back: Some(cfg.t_back),
                scope: Some(*scope),
                crmse_deg: *v,
                seed,
                split,
            });
        }
        report.curves.push(LabelledCurve {
            label: scope.as_str().into(),
            seed,
            curve: curve.clone(),
        });
    }
    let best = cells
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|c| c.0)
        .expect("two scopes");
    report.meta.notes.push(format!("selected_scope={}", best.as_str()));
    report.meta.seeds.push(seed);
    report.meta.dataset_hash = dataset_hash(data);
    for (k, v) in [
        ("paper_per_sequence_train_deg", 2.93),
        ("paper_per_sequence_val_deg", 1.39),
        ("paper_per_sample_train_deg", 3.12),
        ("paper_per_sample_val_deg", 1.90),
    ] {
        report.meta.reference.insert(k.into(), v);
    }
    Ok(report)
}

/// Scope with the lower validation CRMSE in an ablation report.
pub fn selected_scope(report: &EvalReport) -> Option<NormScope> {
    NormScope::ALL.into_iter().min_by(|a, b| {
        let v = |s: NormScope| {
            report
                .rows_for("denoiser_aided_val")
                .filter(|r| r.scope == Some(s))
                .map(|r| r.crmse_deg)
                .sum::<f64>()
        };
        v(*a).total_cmp(&v(*b))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Datasets on which the long window was at least as accurate as the short one.
    pub successes: usize,
    pub trials: usize,
    /// One-sided binomial tail probability under a fair coin.
    pub p_value: f64,
}

/// One-sided sign test that classical CRMSE at `long_s` does not exceed that at
/// `short_s`, one trial per dataset noise seed (test split).
pub fn classical_sign_test(
    dataset: &SyntheticConfig,
    noise_seeds: &[u64],
    short_s: f64,
    long_s: f64,
) -> Result<SignTest> {
    let noise = dataset
        .noise
        .clone()
        .ok_or_else(|| Error::config("dataset.noise", "the sign test needs a noise model"))?;
    let mut successes = 0;
    for &s in noise_seeds {
        let cfg = SyntheticConfig {
            noise: Some(noise.with_seed(s)),
            ..dataset.clone()
        };
        let data = generate_synthetic_dataset(&cfg)?;
        let test = data.get(SplitName::Test);
        if classical_crmse_deg(test, long_s)? <= classical_crmse_deg(test, short_s)? {
            successes += 1;
        }
    }
    let n = noise_seeds.len();
    Ok(SignTest {
        successes,
        trials: n,
        p_value: binomial_upper_tail(n, successes),
    })
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    let mut log_c = 0.0f64;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            total += (log_c - n as f64 * std::f64::consts::LN_2).exp();
        }
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_tail() {
        assert!((binomial_upper_tail(1, 1) - 0.5).abs() < 1e-15);
        assert!((binomial_upper_tail(30, 30) - 0.5f64.powi(30)).abs() < 1e-20);
        assert!((binomial_upper_tail(10, 0) - 1.0).abs() < 1e-12);
        // 1 + 10 + 45 = 56 outcomes with <= 2 failures out of 1024.
        assert!((binomial_upper_tail(10, 8) - 56.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..37).collect();
        let a = par_map(&items, 1, |&x| Ok(x * x)).unwrap();
        let b = par_map(&items, 4, |&x| Ok(x * x)).unwrap();
        assert_eq!(a, b);
        let err = par_map(&items, 3, |&x| if x == 5 { Err(Error::EmptyBatch) } else { Ok(x) });
        assert!(err.is_err());
    }
}
