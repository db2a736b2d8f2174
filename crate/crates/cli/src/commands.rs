use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use serde_json::{json, Value};
use spotmask_core::asm::{auto_spot_mask_detailed, AsmParams};
use spotmask_core::features::FeatureConfig;
use spotmask_core::gbdt::{read_model, write_model, CompiledModel, GbdtParams};
use spotmask_core::imagegrid::{read_image, read_mask, write_mask};
use spotmask_core::pipeline::{
    evaluate, evaluate_model, make_folds, polar_maps_for, train_model, Dataset, Entry,
    MetricsReport, TrainConfig,
};
use spotmask_core::synth::make_benchmark_suite_sized;

use crate::{AsmArgs, BenchArgs, EvalArgs, PredictArgs, SynthArgs, TrainArgs};

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Refuses to write over any of the command's inputs.
fn ensure_not_input(out: &Path, inputs: &[&Path]) -> anyhow::Result<()> {
    let Ok(out_abs) = out.canonicalize() else {
        return Ok(());
    };
    for input in inputs {
        if input.canonicalize().is_ok_and(|p| p == out_abs) {
            bail!("output {} would overwrite an input file", out.display());
        }
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> anyhow::Result<Value> {
    let start = Instant::now();
    let dataset = make_benchmark_suite_sized(&a.profile, a.seed, a.size)?;
    let generate = secs(start);
    let t = Instant::now();
    let manifest = dataset.save(&a.out, Some(&a.profile), Some(a.seed))?;
    let write = secs(t);
    let truth_pixels: usize = dataset.entries.iter().map(|e| e.truth.count_ones()).sum();
    Ok(json!({
        "profile": a.profile,
        "seed": a.seed,
        "size": a.size,
        "out": a.out,
        "frames": dataset.len(),
        "entries": manifest.entries.iter().map(|e| &e.name).collect::<Vec<_>>(),
        "truth_pixels": truth_pixels,
        "timings": { "generate": generate, "write": write, "total": secs(start) },
    }))
}

pub fn asm(a: &AsmArgs) -> anyhow::Result<Value> {
    ensure_not_input(&a.out, &[&a.input])?;
    let start = Instant::now();
    let img = read_image(&a.input)?;
    let geometry = *img
        .require_geometry()
        .with_context(|| format!("reading geometry for {}", a.input.display()))?;
    let mut params = AsmParams::new(a.eps, a.shell_width.unwrap_or(geometry.pixel_size))?;
    if let Some(t) = a.max_two_theta {
        params = params.with_max_two_theta(t)?;
    }
    let read = secs(start);
    let t = Instant::now();
    let polar = polar_maps_for(&img)?;
    let outcome = auto_spot_mask_detailed(&img, &polar, &params)?;
    let mask_time = secs(t);
    let t = Instant::now();
    write_mask(&a.out, &outcome.mask)?;
    let write = secs(t);
    Ok(json!({
        "input": a.input,
        "out": a.out,
        "epsilon": params.epsilon,
        "shell_width_mm": params.shell_width,
        "max_two_theta": params.max_two_theta,
        "shells": outcome.shells.len(),
        "masked_pixels": outcome.mask.count_ones(),
        "total_pixels": outcome.mask.len(),
        "timings": { "read": read, "mask": mask_time, "write": write, "total": secs(start) },
    }))
}

pub fn train(a: &TrainArgs) -> anyhow::Result<Value> {
    ensure_not_input(
        &a.model,
        &[&a.dataset.join(spotmask_core::pipeline::MANIFEST_FILE)],
    )?;
    let start = Instant::now();
    let dataset = Dataset::load(&a.dataset)?;
    let load = secs(start);
    let fold = make_folds(dataset.len(), 1, a.train_images, a.seed)?
        .pop()
        .expect("one fold requested");
    let config = TrainConfig {
        params: GbdtParams {
            n_estimators: a.rounds,
            max_depth: a.depth,
            max_bin: a.max_bin,
            learning_rate: a.learning_rate,
            ..GbdtParams::default()
        },
        features: FeatureConfig::default().with_pixel_location(a.pixel_loc),
    };
    let t = Instant::now();
    let (model, log) = train_model(&dataset, &fold.train, &config, a.seed)?;
    let train_time = secs(t);
    let t = Instant::now();
    write_model(&a.model, &model)?;
    let write = secs(t);
    let names = |idx: &[usize]| -> Vec<String> {
        idx.iter()
            .map(|&i| dataset.entries[i].name.clone())
            .collect()
    };
    Ok(json!({
        "dataset": dataset.name,
        "model": a.model,
        "seed": a.seed,
        "params": config.params,
        "features": model.feature_names,
        "train_images": names(&fold.train),
        "held_out_images": names(&fold.test),
        "rows": log.rows,
        "positives": log.positives,
        "trees": model.trees.len(),
        "base_loss": log.base_loss,
        "final_loss": log.final_loss,
        "timings": { "load": load, "train": train_time, "write": write, "total": secs(start) },
    }))
}

pub fn predict(a: &PredictArgs) -> anyhow::Result<Value> {
    ensure_not_input(&a.out, &[&a.input, &a.model])?;
    let start = Instant::now();
    let model = read_model(&a.model)?;
    let compiled = CompiledModel::new(&model)?;
    let img = read_image(&a.input)?;
    let polar = polar_maps_for(&img)?;
    let load = secs(start);
    let t = Instant::now();
    let mask = compiled.predict_mask(&model, &img, &polar, a.threshold)?;
    let predict_time = secs(t);
    let t = Instant::now();
    write_mask(&a.out, &mask)?;
    let write = secs(t);
    Ok(json!({
        "model": a.model,
        "input": a.input,
        "out": a.out,
        "threshold": a.threshold,
        "masked_pixels": mask.count_ones(),
        "total_pixels": mask.len(),
        "timings": { "load": load, "predict": predict_time, "write": write, "total": secs(start) },
    }))
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<Value> {
    let start = Instant::now();
    let pred = read_mask(&a.pred)?;
    let truth = read_mask(&a.truth)?;
    let ev = evaluate(&pred, &truth)?;
    Ok(json!({
        "pred": a.pred,
        "truth": a.truth,
        "counts": ev.counts,
        "recall": ev.recall,
        "specificity": ev.specificity,
        "timings": { "total": secs(start) },
    }))
}

pub fn bench(a: &BenchArgs) -> anyhow::Result<Value> {
    let start = Instant::now();
    let dataset = Dataset::load(&a.dataset)?;
    let model = read_model(&a.model)?;
    let load = secs(start);
    let entries: Vec<&Entry> = dataset.entries.iter().collect();
    let t = Instant::now();
    let images = evaluate_model(&model, &entries, a.threshold)?;
    let evaluate_time = secs(t);
    let report = MetricsReport::new(&dataset.name, images, None);
    let predict_total: f64 = report.images.iter().map(|r| r.predict_seconds).sum();
    Ok(json!({
        "dataset": dataset.name,
        "model": a.model,
        "threshold": a.threshold,
        "summary": report.summary,
        "images": report.images,
        "timings": {
            "load": load,
            "evaluate": evaluate_time,
            "predict_total": predict_total,
            "predict_mean": report.summary.predict_seconds_mean,
            "total": secs(start),
        },
    }))
}
