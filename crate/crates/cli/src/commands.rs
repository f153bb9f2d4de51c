use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;
use serde::Serialize;

use rio::datasynth::{export_benchmark_bundle, generate_corpus, load_bundle, Bundle, ScenePair, Split};
use rio::descriptor::io::{load_model, save_model};
use rio::descriptor::{
    train as train_model, Descriptor, DescriptorModel, Freeze, RandomDescriptor, ScaleMode, Stage, TrainOptions,
};
use rio::evaluation::{
    benchmark, keypoint_matching_metrics, read_ground_truth, read_predictions, write_prc_csv, ClassMap, EvalReport,
    MatchingMetrics, PredictionStatus, DEFAULT_THRESHOLDS,
};
use rio::keypoints::{detect_keypoints, save_keypoints, Augmentation};
use rio::volume::fuse_depth;
use rio::volume::io::{load_volume, save_volume};
use rio::workflow::{
    dynamic_training_set, evaluate_matching, predict_scan_pair, render_scan_frames, static_training_set,
};

use crate::config::RunConfig;
use crate::{
    CliError, CliResult, EvaluateArgs, FuseArgs, KeypointsArgs, RelocalizeArgs, ScalesArg, ScanKind, StageArg,
    SynthArgs, TrainArgs,
};

pub struct Context {
    pub seed: u64,
    pub config: RunConfig,
}

fn other<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Other(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(other(path))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(other(path))
}

/// Run metadata goes next to the primary output so that the output itself
/// stays byte-identical across runs.
fn sidecar(out: &Path, command: &str, started: Instant) -> CliResult {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.log");
    let path = out.with_file_name(name);
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let text = format!("command={command}\nfinished_unix={unix}\nelapsed_s={:.3}\n", started.elapsed().as_secs_f64());
    std::fs::write(&path, text).map_err(other(&path))
}

pub fn synth(ctx: &Context, a: SynthArgs) -> CliResult {
    let started = Instant::now();
    let mut corpus = ctx.config.corpus.clone();
    corpus.seed = ctx.seed;
    if let Some(n) = a.scenes {
        corpus.scenes = n;
    }
    let pairs = generate_corpus(&corpus)?;
    export_benchmark_bundle(&pairs, &a.out, a.hidden)?;
    println!("wrote {} scene pairs to {}", pairs.len(), a.out.display());
    sidecar(&a.out, "synth", started)
}

fn scene_pair(bundle: &Bundle, scene_id: &str) -> CliResult<ScenePair> {
    let scene = bundle
        .scenes
        .iter()
        .find(|s| s.scene_id == scene_id)
        .ok_or_else(|| CliError::Validation(format!("scene {scene_id} is not in {}", bundle.root.display())))?;
    Ok(ScenePair::from_manifest(scene, bundle.scan)?)
}

pub fn fuse(ctx: &Context, a: FuseArgs) -> CliResult {
    let started = Instant::now();
    let bundle = load_bundle(&a.data.data)?;
    let pair = scene_pair(&bundle, &a.scene)?;
    let volume = match (a.analytic, a.scan) {
        (true, ScanKind::Reference) => pair.reference_volume()?,
        (true, ScanKind::Rescan) => pair.rescan_volume()?,
        (false, kind) => {
            let scene = if kind == ScanKind::Reference { &pair.manifest.reference } else { &pair.manifest.rescan };
            let frames = render_scan_frames(scene, &ctx.config.training.render, ctx.seed)?;
            fuse_depth(&frames, &pair.grid()?)?
        }
    };
    save_volume(&a.out, &volume)?;
    sidecar(&a.out, "fuse", started)
}

pub fn keypoints(ctx: &Context, a: KeypointsArgs) -> CliResult {
    let started = Instant::now();
    let volume = load_volume(&a.volume)?;
    let cfg = &ctx.config.relocalize;
    let kps = detect_keypoints(&volume, &cfg.harris, cfg.nms_radius)?;
    save_keypoints(&a.out, &kps)?;
    println!("{} keypoints", kps.len());
    sidecar(&a.out, "keypoints", started)
}

pub fn train(ctx: &Context, a: TrainArgs) -> CliResult {
    let started = Instant::now();
    let mut loss = ctx.config.loss;
    if let Some(lr) = a.lr {
        loss.learning_rate = lr;
    }
    loss.validate()?;
    let bundle = load_bundle(&a.data.data)?;
    let pairs = bundle.scene_pairs(Some(Split::Train))?;
    let mut model = match &a.init {
        Some(p) => load_model(p)?,
        None => {
            let scales = match a.scales {
                ScalesArg::Multi => ScaleMode::Multi,
                ScalesArg::Fine => ScaleMode::Fine,
                ScalesArg::Coarse => ScaleMode::Coarse,
            };
            DescriptorModel::new(ctx.config.model.clone().with_scales(scales), ctx.seed)?
        }
    };
    let training = ctx.config.training;
    if model.spec().patch != training.triplets.patch {
        return Err(CliError::Validation("model patch spec differs from training.triplets.patch".into()));
    }
    let (triplets, stage) = match a.stage {
        StageArg::Static => (static_training_set(&pairs, &training, ctx.seed)?, Stage::Static),
        StageArg::Dynamic => (dynamic_training_set(&pairs, &training, ctx.seed)?, Stage::Dynamic),
    };
    info!("{} triplets from {} training scenes", triplets.len(), pairs.len());
    let options = TrainOptions {
        epochs: a.epochs,
        freeze: if a.freeze_sse { Freeze::SseFrozen } else { Freeze::None },
        stage,
        seed: ctx.seed,
    };
    let report = train_model(&mut model, &triplets, &loss, &options)?;
    save_model(&a.out, &model)?;
    if let Some(p) = &a.loss_csv {
        report.write_csv(BufWriter::new(File::create(p).map_err(other(p))?))?;
    }
    println!("{} triplets, epoch mean losses {:?}", triplets.len(), report.epoch_means);
    sidecar(&a.out, "train", started)
}

pub fn relocalize(ctx: &Context, a: RelocalizeArgs) -> CliResult {
    let started = Instant::now();
    let bundle = load_bundle(&a.data.data)?;
    let descriptor: Box<dyn Descriptor> = match &a.model {
        Some(p) => Box::new(load_model(p)?),
        None => Box::new(RandomDescriptor { dim: ctx.config.model.feature_dim(), seed: ctx.seed }),
    };
    let mut cfg = ctx.config.relocalize;
    cfg.ransac.seed = ctx.seed;
    let mut outcomes = Vec::new();
    let split = Split::from(a.split);
    for scene in bundle.scenes_in(split) {
        let reference = bundle.reference_volume(scene)?;
        for rescan in &scene.rescans {
            let target = bundle.rescan_volume(scene, rescan)?;
            outcomes.extend(predict_scan_pair(
                descriptor.as_ref(),
                &reference,
                &target,
                &rescan.scan_pair_id,
                &rescan.queries,
                &cfg,
            )?);
        }
    }
    let predictions: Vec<_> = outcomes.iter().map(|o| o.prediction.clone()).collect();
    write_json(&a.out, &predictions)?;
    if let Some(p) = &a.diagnostics {
        write_json(p, &outcomes)?;
    }
    sidecar(&a.out, "relocalize", started)?;
    let failed = predictions.iter().filter(|p| p.status == PredictionStatus::Failed).count();
    println!("{} queries, {failed} alignment failures", predictions.len());
    if !predictions.is_empty() && failed == predictions.len() {
        return Err(CliError::AlignmentOnly(format!("all {failed} queries failed to align")));
    }
    Ok(())
}

#[derive(Serialize)]
struct MatchingSummary {
    triplets: usize,
    top1: Option<f64>,
    #[serde(flatten)]
    metrics: MatchingMetrics,
}

#[derive(Serialize)]
struct EvaluationOutput {
    benchmark: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    matching: Option<MatchingSummary>,
}

pub fn evaluate(ctx: &Context, a: EvaluateArgs) -> CliResult {
    let started = Instant::now();
    let predictions = read_predictions(&a.predictions)?;
    let split = Split::from(a.split);
    let bundle = if a.ground_truth.is_dir() { Some(load_bundle(&a.ground_truth)?) } else { None };
    let ground_truth = match &bundle {
        Some(b) => {
            let gt: Vec<_> = b.scenes_in(split).flat_map(|s| s.rescans.iter().map(|r| r.ground_truth())).collect();
            gt.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| {
                CliError::Validation(format!("{} is a hidden bundle without ground truth", a.ground_truth.display()))
            })?
        }
        None => read_ground_truth(&a.ground_truth)?,
    };
    let class_map = match &a.class_map {
        Some(p) => ClassMap::load(p)?,
        None => ClassMap::default(),
    };
    let report = benchmark(&predictions, &ground_truth, &class_map, &DEFAULT_THRESHOLDS)?;
    let table = report.to_table(&a.method);
    print!("{table}");
    if let Some(p) = &a.table {
        std::fs::write(p, &table).map_err(other(p))?;
    }
    let matching = match (&a.matching_model, &a.prc_csv) {
        (Some(model_path), Some(prc)) => {
            let b = bundle.as_ref().ok_or_else(|| {
                CliError::Validation("--matching-model needs --ground-truth to be a bundle directory".into())
            })?;
            let model = load_model(model_path)?;
            let mut training = ctx.config.training;
            training.triplets.augmentation = Augmentation::None;
            let triplets = dynamic_training_set(&b.scene_pairs(Some(split))?, &training, ctx.seed)?;
            let m = evaluate_matching(&model, &triplets)?;
            let mut metrics = keypoint_matching_metrics(&m.positive, &m.negative)?;
            write_prc_csv(BufWriter::new(File::create(prc).map_err(other(prc))?), &metrics.prc)?;
            metrics.prc.clear();
            println!(
                "matching: F1 {:.4}  precision {:.4}  FPR {:.4}  ER {:.4} at recall {:.4}",
                metrics.f1, metrics.precision, metrics.fpr, metrics.error_rate, metrics.recall
            );
            Some(MatchingSummary { triplets: triplets.len(), top1: m.top1, metrics })
        }
        _ => None,
    };
    write_json(&a.out, &EvaluationOutput { benchmark: report, matching })?;
    let _ = std::io::stdout().flush();
    sidecar(&a.out, "evaluate", started)
}
