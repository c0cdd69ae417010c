//! Command implementations behind the CLI verbs. Each command reads its inputs, writes
//! its artifacts into a directory under the output root and finishes by writing a
//! manifest there. Re-running with the config embedded in a manifest reproduces the
//! artifacts bit for bit (timings aside).

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::diffusion::{train_denoiser, DenoiserNetwork, NoiseSchedule};
use crate::error::{Error, Result};
use crate::heading::{train_heading, HeadingModel, HeadingTrainConfig, InputScaler, Variant};
use crate::io::{
    ingest_recordings, load_dataset, require, save_dataset, write_atomic, Architecture, Checkpoint, CheckpointHeader,
    ExperimentConfig, RunManifest,
};
use crate::pipeline::{
    curves_chart, report_chart, run_method_comparison, run_normalization_ablation, run_tback_sweep, ComparisonModels,
    DenoisePreprocessor, EvalReport, PipelineConfig, SweepHeading,
};
use crate::seeds::{self, Purpose};
use crate::synth::{generate_synthetic_dataset, DatasetSplit, SplitName, SyntheticConfig, TimeSequence};

pub const DATASET_DIR: &str = "dataset";
pub const DENOISER_DIR: &str = "denoiser";
pub const DENOISER_CKPT: &str = "denoiser/denoiser.ckpt";
pub const BASELINE_CKPT: &str = "heading-baseline/heading.ckpt";
pub const ENHANCED_CKPT: &str = "heading-enhanced/heading.ckpt";
pub const EVALUATE_DIR: &str = "evaluate";
pub const SWEEP_DIR: &str = "sweep-tback";
pub const ABLATE_DIR: &str = "ablate-norm";

/// Effective settings of one invocation.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub jobs: usize,
}

impl RunContext {
    pub fn new(cfg: ExperimentConfig, jobs: usize) -> Self {
        Self { cfg, jobs: jobs.max(1) }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, self.cfg.to_json(), self.cfg.hash(), self.cfg.base_seed)
    }
}

fn finish(mut manifest: RunManifest, dir: &Path, files: Vec<PathBuf>, start: Instant) -> Result<Vec<PathBuf>> {
    manifest.add_outputs(dir, &files)?;
    manifest.timings_s.insert("total".into(), start.elapsed().as_secs_f64());
    let mut files = files;
    files.push(manifest.write(dir)?);
    Ok(files)
}

/// Dataset config with the noise seed derived from the base seed.
pub fn effective_dataset(cfg: &ExperimentConfig) -> SyntheticConfig {
    let mut d = cfg.dataset.clone();
    if let Some(noise) = &mut d.noise {
        noise.seed = seeds::derive(cfg.base_seed, Purpose::Dataset);
    }
    d
}

fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![dir.join("metadata.json")];
    for s in SplitName::ALL {
        files.push(dir.join(format!("{}.f64", s.as_str())));
        files.push(dir.join(format!("{}.labels.csv", s.as_str())));
    }
    files
}

pub fn cmd_generate(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let dir = ctx.path(DATASET_DIR);
    let mut manifest = ctx.manifest("generate");
    let dcfg = effective_dataset(&ctx.cfg);
    let data = manifest.time("generate", || generate_synthetic_dataset(&dcfg))?;
    save_dataset(&dir, &data, serde_json::to_value(&dcfg).expect("serializes"))?;
    finish(manifest, &dir, dataset_files(&dir), start)
}

pub fn cmd_ingest(ctx: &RunContext, recordings: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let dir = ctx.path(DATASET_DIR);
    let mut manifest = ctx.manifest("ingest");
    let data = manifest.time("ingest", || ingest_recordings(recordings, &ctx.cfg.ingest))?;
    manifest.add_input("recordings", recordings.to_string_lossy().into_owned());
    save_dataset(&dir, &data, serde_json::to_value(&ctx.cfg.ingest).expect("serializes"))?;
    finish(manifest, &dir, dataset_files(&dir), start)
}

fn rescale(seqs: &[TimeSequence], scaler: &InputScaler) -> Result<Vec<TimeSequence>> {
    seqs.iter()
        .map(|s| TimeSequence::unflatten(&scaler.transform(s), s.len(), s))
        .collect()
}

/// Clean synthetic sequences (same grid as the experiment dataset, without noise),
/// scaled by a dataset-level scaler fitted on the training split.
pub fn denoiser_training_data(cfg: &ExperimentConfig) -> Result<(DatasetSplit, InputScaler)> {
    let clean = generate_synthetic_dataset(&SyntheticConfig {
        noise: None,
        ..cfg.dataset.clone()
    })?;
    let scaler = InputScaler::fit(&clean.train)?;
    Ok((
        DatasetSplit {
            train: rescale(&clean.train, &scaler)?,
            val: rescale(&clean.val, &scaler)?,
            test: rescale(&clean.test, &scaler)?,
            ratio: clean.ratio,
        },
        scaler,
    ))
}

pub fn cmd_train_denoiser(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let dir = ctx.path(DENOISER_DIR);
    let mut manifest = ctx.manifest("train-denoiser");
    let cfg = &ctx.cfg;
    let sched = cfg.schedule.build()?;
    let (data, _) = denoiser_training_data(cfg)?;
    let trained = manifest.time("train", || {
        train_denoiser(&data.train, &data.val, &cfg.denoiser, &sched, cfg.base_seed)
    })?;
    let ckpt = Checkpoint {
        header: CheckpointHeader {
            architecture: Architecture::Denoiser {
                arch: cfg.denoiser.arch,
            },
            schedule: Some(cfg.schedule),
            base_seed: cfg.base_seed,
            best_epoch: trained.best_epoch,
            config: serde_json::json!({ "denoiser": cfg.denoiser, "dataset": cfg.dataset }),
            curve: trained.curve.clone(),
        },
        params: trained.net.params().to_vec(),
    };
    let ckpt_path = ctx.path(DENOISER_CKPT);
    ckpt.save(&ckpt_path)?;
    let curve_path = dir.join("curve.csv");
    write_atomic(&curve_path, trained.curve.to_csv().as_bytes())?;
    finish(manifest, &dir, vec![ckpt_path, curve_path], start)
}

fn load_denoiser(path: &Path) -> Result<(DenoiserNetwork, NoiseSchedule, String)> {
    let ckpt = Checkpoint::load(path)?;
    let (net, params) = ckpt.denoiser()?;
    Ok((net, params.build()?, crate::io::sha256_file(path)?))
}

pub fn heading_config(cfg: &ExperimentConfig, variant: Variant) -> &HeadingTrainConfig {
    match variant {
        Variant::Baseline => &cfg.baseline,
        Variant::Enhanced => &cfg.enhanced,
    }
}

/// Trains one heading variant. With `denoiser`, every sequence first passes through
/// the frozen denoiser; a missing denoiser checkpoint is a missing prerequisite.
pub fn cmd_train_heading(
    ctx: &RunContext,
    variant: Variant,
    dataset: &Path,
    denoiser: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let rel = match variant {
        Variant::Baseline => BASELINE_CKPT,
        Variant::Enhanced => ENHANCED_CKPT,
    };
    let ckpt_path = ctx.path(rel);
    let dir = ckpt_path.parent().expect("checkpoint has a directory").to_path_buf();
    let mut manifest = ctx.manifest(&format!("train-heading {}", variant.as_str()));
    let loaded_denoiser = match denoiser {
        Some(p) => {
            require(p)?;
            let d = load_denoiser(p)?;
            manifest.add_input("denoiser", d.2.clone());
            Some(d)
        }
        None => None,
    };
    require(&crate::io::metadata_path(dataset))?;
    let (data, meta) = load_dataset(dataset)?;
    manifest.add_input("dataset", meta.content_hash.clone());
    let hcfg = heading_config(&ctx.cfg, variant);
    let pre = loaded_denoiser
        .as_ref()
        .map(|(net, sched, _)| DenoisePreprocessor::new(net, sched, &ctx.cfg.pipeline, ctx.cfg.base_seed));
    let trained = manifest.time("train", || {
        train_heading(
            &data.train,
            &data.val,
            hcfg,
            pre.as_ref().map(|p| p as &dyn crate::heading::SequencePreprocessor),
            ctx.cfg.base_seed,
        )
    })?;
    let ckpt = Checkpoint {
        header: CheckpointHeader {
            architecture: Architecture::Heading {
                arch: hcfg.arch,
                variant,
                scaler: trained.model.scaler,
                denoised: pre.is_some(),
            },
            schedule: loaded_denoiser.as_ref().map(|(_, s, _)| s.params()),
            base_seed: ctx.cfg.base_seed,
            best_epoch: trained.best_epoch,
            config: serde_json::json!({ "heading": hcfg, "pipeline": ctx.cfg.pipeline }),
            curve: trained.curve.clone(),
        },
        params: trained.model.net.params().to_vec(),
    };
    ckpt.save(&ckpt_path)?;
    let curve_path = dir.join("curve.csv");
    write_atomic(&curve_path, trained.curve.to_csv().as_bytes())?;
    finish(manifest, &dir, vec![ckpt_path, curve_path], start)
}

fn load_heading(path: &Path) -> Result<(HeadingModel, Variant, bool, String)> {
    let ckpt = Checkpoint::load(path)?;
    let (model, variant, denoised) = ckpt.heading()?;
    Ok((model, variant, denoised, crate::io::sha256_file(path)?))
}

/// Writes `report.json`, `report.csv` and the SVG charts into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let json = dir.join("report.json");
    let csv = dir.join("report.csv");
    write_atomic(&json, report.to_json().as_bytes())?;
    write_atomic(&csv, report.to_csv().as_bytes())?;
    let mut files = vec![json, csv];
    files.extend(write_charts(dir, report)?);
    Ok(files)
}

fn write_charts(dir: &Path, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let fig = dir.join("figure.svg");
    write_atomic(&fig, report_chart(report).to_svg().as_bytes())?;
    let mut files = vec![fig];
    if let Some(chart) = curves_chart(report) {
        let p = dir.join("curves.svg");
        write_atomic(&p, chart.to_svg().as_bytes())?;
        files.push(p);
    }
    Ok(files)
}

fn load_inputs(
    manifest: &mut RunManifest,
    dataset: &Path,
    denoiser: &Path,
) -> Result<(DatasetSplit, DenoiserNetwork, NoiseSchedule)> {
    require(&crate::io::metadata_path(dataset))?;
    let (data, meta) = load_dataset(dataset)?;
    manifest.add_input("dataset", meta.content_hash);
    let (net, sched, hash) = load_denoiser(denoiser)?;
    manifest.add_input("denoiser", hash);
    Ok((data, net, sched))
}

pub fn cmd_evaluate(
    ctx: &RunContext,
    dataset: &Path,
    denoiser: &Path,
    baseline: &Path,
    enhanced: &Path,
) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let dir = ctx.path(EVALUATE_DIR);
    let mut manifest = ctx.manifest("evaluate");
    let (baseline, _, _, bh) = load_heading(baseline)?;
    let (enhanced, _, denoised, eh) = load_heading(enhanced)?;
    manifest.add_input("baseline", bh);
    manifest.add_input("enhanced", eh);
    let (data, net, sched) = load_inputs(&mut manifest, dataset, denoiser)?;
    let pcfg = PipelineConfig {
        // A model trained without the denoiser is evaluated without it.
        t_back: if denoised {
            ctx.cfg.pipeline.t_back
        } else {
            sched.steps()
        },
        ..ctx.cfg.pipeline.clone()
    };
    let models = ComparisonModels {
        baseline: &baseline,
        enhanced: &enhanced,
        denoiser: &net,
        sched: &sched,
    };
    let mut report = manifest.time("evaluate", || {
        run_method_comparison(&data, &models, &pcfg, ctx.cfg.base_seed)
    })?;
    report.meta.config = ctx.cfg.artifact_json();
    let files = write_report(&dir, &report)?;
    finish(manifest, &dir, files, start)
}

pub fn cmd_sweep_tback(
    ctx: &RunContext,
    dataset: &Path,
    denoiser: &Path,
    reuse: Option<&Path>,
    values: &[usize],
) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let dir = ctx.path(SWEEP_DIR);
    let mut manifest = ctx.manifest("sweep-tback");
    let (data, net, sched) = load_inputs(&mut manifest, dataset, denoiser)?;
    let reused = match reuse {
        Some(p) => {
            let (model, _, _, h) = load_heading(p)?;
            manifest.add_input("heading", h);
            Some(model)
        }
        None => None,
    };
    let heading = match &reused {
        Some(m) => SweepHeading::Reuse(m),
        None => SweepHeading::Retrain(&ctx.cfg.enhanced),
    };
    let mut report = manifest.time("sweep", || {
        run_tback_sweep(
            &data,
            values,
            &net,
            &sched,
            heading,
            &ctx.cfg.pipeline,
            ctx.cfg.base_seed,
            ctx.jobs,
        )
    })?;
    report.meta.config = ctx.cfg.artifact_json();
    let files = write_report(&dir, &report)?;
    finish(manifest, &dir, files, start)
}

pub fn cmd_ablate_norm(ctx: &RunContext, dataset: &Path, denoiser: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let dir = ctx.path(ABLATE_DIR);
    let mut manifest = ctx.manifest("ablate-norm");
    let (data, net, sched) = load_inputs(&mut manifest, dataset, denoiser)?;
    let mut report = manifest.time("ablate", || {
        run_normalization_ablation(
            &data,
            &net,
            &sched,
            &ctx.cfg.enhanced,
            &ctx.cfg.pipeline,
            ctx.cfg.base_seed,
            ctx.jobs,
        )
    })?;
    report.meta.config = ctx.cfg.artifact_json();
    let files = write_report(&dir, &report)?;
    finish(manifest, &dir, files, start)
}

/// Re-renders the charts of a saved report, next to it or into `out`.
pub fn cmd_plot(report_path: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    if !report_path.exists() {
        return Err(Error::MissingArtifact(report_path.to_path_buf()));
    }
    let text = crate::io::read_string(report_path)?;
    let report = EvalReport::from_json(&text).map_err(|e| match e {
        Error::Format { line, message, .. } => Error::Format {
            file: report_path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => report_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    write_charts(&dir, &report)
}
