//! Masker quality and speed on full-size synthetic suites.

use std::time::Instant;

use spotmask_core::asm::{auto_spot_mask, AsmParams};
use spotmask_core::features::FeatureConfig;
use spotmask_core::gbdt::{fit_with_log, CompiledModel, GbdtModel, GbdtParams};
use spotmask_core::pipeline::{
    evaluate, make_folds, mean_std, polar_maps_for, train_model, training_matrix, Dataset, Entry,
    Evaluation, Fold, DEFAULT_THRESHOLD,
};
use spotmask_core::synth::{benchmark_specs, generate, SynthSpec, PROFILES};

use crate::Verdict;

/// Detector edge length of the 2880x2880 criteria.
const FULL: usize = 2880;
/// The depth sweep pools 15 training frames, which only fit in memory at this size.
const SWEEP: usize = 1024;
const SUITE_SEED: u64 = 1;
const FOLD_SEED: u64 = 7;
const TRAIN_FRAMES: usize = 3;
const EPSILON: f64 = 3.0;
const FIT_SEED: u64 = 0;

const NICKEL: &str = "nickel-like";
const BATTERY_1: &str = "battery-like-1";

/// Results reused by later criteria.
#[derive(Default)]
pub struct Shared {
    nickel_asm_fp: Option<f64>,
    nickel_model: Option<GbdtModel>,
}

fn specs(profile: &str, size: usize) -> Vec<SynthSpec> {
    benchmark_specs(profile, SUITE_SEED, size).expect("known profile")
}

fn frame(specs: &[SynthSpec], i: usize) -> Entry {
    let (image, truth) = generate(&specs[i]).expect("valid spec");
    Entry {
        name: format!("frame_{i:03}"),
        image,
        truth,
    }
}

fn fold(n: usize) -> Fold {
    make_folds(n, 1, TRAIN_FRAMES, FOLD_SEED)
        .expect("enough frames")
        .remove(0)
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

fn mean(values: &[f64]) -> f64 {
    mean_std(values).0
}

fn min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// ASM at ε = 3 with one-pixel shells; returns the evaluation and the
/// wall time from image to mask, polar maps included.
fn asm_frame(e: &Entry) -> (Evaluation, f64) {
    let t = Instant::now();
    let polar = polar_maps_for(&e.image).unwrap();
    let params = AsmParams::new(EPSILON, e.image.require_geometry().unwrap().pixel_size).unwrap();
    let mask = auto_spot_mask(&e.image, &polar, &params).unwrap();
    let secs = t.elapsed().as_secs_f64();
    (evaluate(&mask, &e.truth).unwrap(), secs)
}

fn train_entries(entries: Vec<Entry>, features: FeatureConfig, params: GbdtParams) -> GbdtModel {
    let n = entries.len();
    let dataset = Dataset {
        name: "training".into(),
        entries,
    };
    let config = spotmask_core::pipeline::TrainConfig { params, features };
    train_model(&dataset, &(0..n).collect::<Vec<_>>(), &config, FIT_SEED)
        .expect("training succeeds")
        .0
}

/// Per-image recall and specificity of `model` on the frames at `indices`,
/// generating one frame at a time.
fn score_frames(
    model: &GbdtModel,
    compiled: &CompiledModel,
    specs: &[SynthSpec],
    indices: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let (mut recall, mut specificity) = (Vec::new(), Vec::new());
    for &i in indices {
        let e = frame(specs, i);
        let polar = polar_maps_for(&e.image).unwrap();
        let mask = compiled
            .predict_mask(model, &e.image, &polar, DEFAULT_THRESHOLD)
            .unwrap();
        let ev = evaluate(&mask, &e.truth).unwrap();
        recall.push(ev.recall);
        specificity.push(ev.specificity);
    }
    (recall, specificity)
}

pub fn c1_asm_nickel(shared: &mut Shared) -> Verdict {
    let specs = specs(NICKEL, FULL);
    let (single, multi) = (pool(1), pool(8));
    let (mut recall, mut specificity, mut fp) = (Vec::new(), Vec::new(), Vec::new());
    let (mut t1, mut t8) = (Vec::new(), Vec::new());
    let mut identical = true;
    for i in 0..specs.len() {
        let e = frame(&specs, i);
        let (ev, secs1) = single.install(|| asm_frame(&e));
        let (ev8, secs8) = multi.install(|| asm_frame(&e));
        identical &= ev == ev8;
        recall.push(ev.recall);
        specificity.push(ev.specificity);
        fp.push(ev.counts.fp as f64);
        t1.push(secs1);
        t8.push(secs8);
    }
    shared.nickel_asm_fp = Some(mean(&fp));
    let passed = mean(&recall) >= 0.95
        && mean(&specificity) >= 0.99
        && max(&t1) <= 60.0
        && max(&t8) <= 10.0
        && identical;
    Verdict::new(
        passed,
        format!(
            "{} frames, recall {:.4} (min {:.4}) >= 0.95, specificity {:.5} (min {:.5}) >= 0.99, \
             max s/frame {:.2} (1 thread) <= 60, {:.2} (8 threads on {} cores) <= 10, \
             masks thread-independent {identical}",
            specs.len(),
            mean(&recall),
            min(&recall),
            mean(&specificity),
            min(&specificity),
            max(&t1),
            max(&t8),
            std::thread::available_parallelism().map_or(1, |n| n.get()),
        ),
    )
}

fn nickel_asm_fp(shared: &mut Shared) -> f64 {
    if let Some(fp) = shared.nickel_asm_fp {
        return fp;
    }
    let specs = specs(NICKEL, FULL);
    let fp: Vec<f64> = (0..specs.len())
        .map(|i| asm_frame(&frame(&specs, i)).0.counts.fp as f64)
        .collect();
    shared.nickel_asm_fp = Some(mean(&fp));
    mean(&fp)
}

pub fn c2_asm_texture(shared: &mut Shared) -> Verdict {
    let nickel = nickel_asm_fp(shared);
    let mut fp = Vec::new();
    let mut per_profile = Vec::new();
    for profile in PROFILES.iter().filter(|p| p.starts_with("battery")) {
        let specs = specs(profile, FULL);
        let mut profile_fp = Vec::new();
        let mut specificity = Vec::new();
        for i in 0..specs.len() {
            let (ev, _) = asm_frame(&frame(&specs, i));
            profile_fp.push(ev.counts.fp as f64);
            specificity.push(ev.specificity);
        }
        per_profile.push(format!(
            "{profile} {:.0} fp/frame (spec {:.5})",
            mean(&profile_fp),
            mean(&specificity)
        ));
        fp.extend(profile_fp);
    }
    let ratio = mean(&fp) / nickel;
    Verdict::new(
        ratio >= 5.0,
        format!(
            "textured {:.0} vs nickel-like {nickel:.0} fp/frame, ratio {ratio:.2} >= 5 [{}]",
            mean(&fp),
            per_profile.join(", ")
        ),
    )
}

fn nickel_model(shared: &mut Shared) -> &GbdtModel {
    if shared.nickel_model.is_none() {
        let specs = specs(NICKEL, FULL);
        let train = fold(specs.len()).train;
        let entries = train.iter().map(|&i| frame(&specs, i)).collect();
        shared.nickel_model = Some(train_entries(
            entries,
            FeatureConfig::default(),
            GbdtParams::default(),
        ));
    }
    shared.nickel_model.as_ref().unwrap()
}

pub fn c3_gbdt_nickel(shared: &mut Shared) -> Verdict {
    let t = Instant::now();
    let model = nickel_model(shared);
    let train_secs = t.elapsed().as_secs_f64();
    let p = model.params;
    let specs = specs(NICKEL, FULL);
    let f = fold(specs.len());
    let compiled = CompiledModel::new(model).unwrap();
    let (recall, specificity) = score_frames(model, &compiled, &specs, &f.test);
    let passed = mean(&recall) >= 0.95 && mean(&specificity) >= 0.995;
    Verdict::new(
        passed,
        format!(
            "{} trees, depth {}, max_bin {}, min_child_weight {}; train frames {:?} ({train_secs:.0}s); \
             {} held-out frames: recall {:.4} (min {:.4}) >= 0.95, specificity {:.6} >= 0.995",
            p.n_estimators,
            p.max_depth,
            p.max_bin,
            p.min_child_weight,
            f.train,
            f.test.len(),
            mean(&recall),
            min(&recall),
            mean(&specificity),
        ),
    )
}

pub fn c4_transfer(shared: &mut Shared) -> Verdict {
    let nickel_specs = specs(NICKEL, FULL);
    let battery_specs = specs(BATTERY_1, FULL);
    let nickel_fold = fold(nickel_specs.len());
    let battery_fold = fold(battery_specs.len());

    let model = nickel_model(shared);
    let compiled = CompiledModel::new(model).unwrap();
    let (alone, _) = score_frames(model, &compiled, &battery_specs, &battery_fold.test);
    drop(compiled);

    let entries = nickel_fold
        .train
        .iter()
        .map(|&i| frame(&nickel_specs, i))
        .chain(battery_fold.train.iter().map(|&i| frame(&battery_specs, i)))
        .collect();
    let joint = train_entries(
        entries,
        FeatureConfig::default().with_pixel_location(true),
        GbdtParams::default(),
    );
    let compiled = CompiledModel::new(&joint).unwrap();
    let (battery, _) = score_frames(&joint, &compiled, &battery_specs, &battery_fold.test);
    let (nickel, _) = score_frames(&joint, &compiled, &nickel_specs, &nickel_fold.test);

    let passed = mean(&alone) < 0.5 && mean(&battery) >= 0.90 && mean(&nickel) >= 0.93;
    Verdict::new(
        passed,
        format!(
            "nickel-only model on battery-like-1: recall {:.4} < 0.5; joint model with pixel \
             location: battery-like-1 recall {:.4} >= 0.90, nickel-like recall {:.4} >= 0.93",
            mean(&alone),
            mean(&battery),
            mean(&nickel)
        ),
    )
}

pub fn c5_depth_sweep(_: &mut Shared) -> Verdict {
    let depths = [5usize, 10, 15, 20, 25];
    let mut train = Vec::new();
    let mut tests = Vec::new();
    for profile in PROFILES {
        let specs = specs(profile, SWEEP);
        let f = fold(specs.len());
        train.extend(f.train.iter().map(|&i| frame(&specs, i)));
        tests.push((specs, f.test));
    }
    let cfg = FeatureConfig::default().with_pixel_location(true);
    let refs: Vec<&Entry> = train.iter().collect();
    let (features, labels) = training_matrix(&refs, &cfg).unwrap();
    drop(train);

    let mut recall_at = Vec::new();
    for &depth in &depths {
        let params = GbdtParams::default().with_depth(depth);
        let (model, _) = fit_with_log(&features, &labels, &params, FIT_SEED).unwrap();
        let compiled = CompiledModel::new(&model).unwrap();
        // mean over profiles of the per-image mean
        let per_profile: Vec<f64> = tests
            .iter()
            .map(|(specs, idx)| mean(&score_frames(&model, &compiled, specs, idx).0))
            .collect();
        recall_at.push(mean(&per_profile));
    }
    let gain_5_10 = recall_at[1] - recall_at[0];
    let gain_20_25 = recall_at[4] - recall_at[3];
    let curve: Vec<String> = depths
        .iter()
        .zip(&recall_at)
        .map(|(d, r)| format!("{d}:{r:.4}"))
        .collect();
    Verdict::new(
        gain_5_10 >= 0.05 && gain_20_25 <= 0.02,
        format!(
            "{SWEEP}x{SWEEP} frames, 5 profiles x {TRAIN_FRAMES} training frames, pixel location; \
             recall by depth [{}]; 5->10 gain {:.2} pts >= 5, 20->25 gain {:.2} pts <= 2",
            curve.join(" "),
            100.0 * gain_5_10,
            100.0 * gain_20_25
        ),
    )
}

pub fn c8_throughput(shared: &mut Shared) -> Verdict {
    let model = nickel_model(shared).clone();
    let specs = specs(NICKEL, FULL);
    let f = fold(specs.len());
    let e = frame(&specs, f.test[0]);
    let compiled = CompiledModel::new(&model).unwrap();
    let workers = pool(8);
    let mut times: Vec<f64> = (0..3)
        .map(|_| {
            workers.install(|| {
                let t = Instant::now();
                let polar = polar_maps_for(&e.image).unwrap();
                compiled
                    .predict_mask(&model, &e.image, &polar, DEFAULT_THRESHOLD)
                    .unwrap();
                t.elapsed().as_secs_f64()
            })
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let median = times[1];
    Verdict::new(
        median <= 5.0,
        format!(
            "{FULL}x{FULL} frame scored in {median:.2}s (median of 3, 8 threads on {} cores, \
             polar maps included) <= 5",
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
    )
}
