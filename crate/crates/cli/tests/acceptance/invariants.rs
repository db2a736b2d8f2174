//! Exact invariances, codec round-trips and command determinism.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spotmask_core::asm::{auto_spot_mask, AsmParams};
use spotmask_core::features::FeatureMatrix;
use spotmask_core::gbdt::{fit, load_model, predict_scores, save_model, GbdtParams};
use spotmask_core::geometry::{compute_polar_maps, geometry_from_sidecar, geometry_to_sidecar};
use spotmask_core::imagegrid::{decode_image, decode_mask, encode_image, encode_mask};
use spotmask_core::pipeline::Dataset;
use spotmask_core::synth::make_benchmark_suite_sized;
use spotmask_core::{DetectorGeometry, Image, MaskMap};

use crate::Verdict;

fn geometry(rng: &mut ChaCha8Rng, w: usize, h: usize) -> DetectorGeometry {
    DetectorGeometry {
        wavelength: rng.random_range(0.1..1.5),
        center_x: rng.random_range(0.3..0.7) * w as f64,
        center_y: rng.random_range(0.3..0.7) * h as f64,
        distance: rng.random_range(100.0..1000.0),
        pixel_size: rng.random_range(0.05..0.3),
    }
}

/// Masks equal for `img` and `a·img + c` on 20 images of integer counts,
/// with dyadic gains and integer offsets so the transformed pixels are exact.
fn asm_affine_failures() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    let mut failures = 0;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(40..160), rng.random_range(40..160));
        let g = geometry(&mut rng, w, h);
        let polar = compute_polar_maps(&g, w, h).unwrap();
        let level = f64::from(rng.random_range(5u16..500));
        let px: Vec<f32> = (0..w * h)
            .map(|_| {
                let mut v = (level * rng.random_range(0.5..1.5)).floor();
                if rng.random_bool(0.01) {
                    v += 20.0 * level;
                }
                v as f32
            })
            .collect();
        let img = Image::new(w, h, px).unwrap();
        let a = f32::from(rng.random_range(1u16..=256)) / 16.0;
        let c = f32::from(rng.random_range(0u16..=1000));
        let moved = img.map(|v| a * v + c).unwrap();
        let params = AsmParams::new(rng.random_range(1.0..=10.0), g.pixel_size).unwrap();
        let before = auto_spot_mask(&img, &polar, &params).unwrap();
        let after = auto_spot_mask(&moved, &polar, &params).unwrap();
        failures += usize::from(before != after || before.count_ones() == 0);
    }
    failures
}

/// Bit-identical predictions after a strictly increasing transform of every
/// feature, applied to training and query rows alike.
fn gbdt_monotone_failures() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(702);
    let transforms: [fn(f64) -> f64; 3] = [
        |v| (0.7 * v).exp() + 3.0 * v,
        |v| v * v * v + v,
        |v| 1e6 * v - 42.0,
    ];
    let mut failures = 0;
    for trial in 0..20 {
        let cols = rng.random_range(1..=4);
        let names: Vec<String> = ["intensity", "two_theta", "row", "col"][..cols]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let table = |rng: &mut ChaCha8Rng, rows: usize| -> Vec<f64> {
            (0..rows * cols)
                .map(|_| rng.random_range(-3.0..3.0))
                .collect()
        };
        let rows = rng.random_range(100..1500);
        let values = table(&mut rng, rows);
        let labels: Vec<u8> = values
            .chunks(cols)
            .map(|r| u8::from(r.iter().sum::<f64>() + rng.random_range(-1.0..1.0) > 0.0))
            .collect();
        let query = table(&mut rng, 500);
        let f = transforms[trial % transforms.len()];
        let m = |v: Vec<f64>| FeatureMatrix::new(v.len() / cols, names.clone(), v).unwrap();
        let p = GbdtParams {
            max_bin: rng.random_range(8..256),
            ..GbdtParams::default().with_rounds(6).with_depth(4)
        };
        let plain = fit(&m(values.clone()), &labels, &p, 3).unwrap();
        let moved = fit(&m(values.iter().map(|&v| f(v)).collect()), &labels, &p, 3).unwrap();
        let a = predict_scores(&plain, &m(query.clone())).unwrap();
        let b = predict_scores(&moved, &m(query.iter().map(|&v| f(v)).collect())).unwrap();
        let same = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
        failures += usize::from(!same);
    }
    failures
}

/// Image, mask, sidecar, model and dataset codecs each read back what they wrote.
fn codec_failures(dir: &Path) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(703);
    let mut failures = 0;
    for _ in 0..50 {
        let (w, h) = (rng.random_range(1..70), rng.random_range(1..70));
        let px: Vec<f32> = (0..w * h).map(|_| rng.random_range(0.0..1e7)).collect();
        let img = Image::new(w, h, px).unwrap();
        let back = decode_image(&encode_image(&img)).unwrap();
        failures += usize::from(back.dims() != img.dims() || back.pixels() != img.pixels());

        let bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.3)).collect();
        let mask = MaskMap::from_bools(w, h, &bits).unwrap();
        failures += usize::from(decode_mask(&encode_mask(&mask)).unwrap() != mask);

        let g = geometry(&mut rng, w, h);
        failures += usize::from(geometry_from_sidecar(&geometry_to_sidecar(&g)).unwrap() != g);
    }

    let rows = 400;
    let values: Vec<f64> = (0..rows * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels: Vec<u8> = values.chunks(2).map(|r| u8::from(r[0] > r[1])).collect();
    let names = vec!["intensity".to_string(), "two_theta".to_string()];
    let m = FeatureMatrix::new(rows, names, values).unwrap();
    let model = fit(
        &m,
        &labels,
        &GbdtParams::default().with_rounds(5).with_depth(3),
        0,
    )
    .unwrap();
    let reloaded = load_model(&save_model(&model)).unwrap();
    failures += usize::from(reloaded != model);
    failures +=
        usize::from(predict_scores(&model, &m).unwrap() != predict_scores(&reloaded, &m).unwrap());

    let suite = make_benchmark_suite_sized("battery-like-4", 9, 48).unwrap();
    let path = dir.join("codec-suite");
    suite.save(&path, Some("battery-like-4"), Some(9)).unwrap();
    let loaded = Dataset::load(&path).unwrap();
    let same = loaded.len() == suite.len()
        && loaded.entries.iter().zip(&suite.entries).all(|(a, b)| {
            a.name == b.name
                && a.truth == b.truth
                && a.image.pixels() == b.image.pixels()
                && a.image.geometry() == b.image.geometry()
        });
    failures += usize::from(!same);
    failures
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn spotmask(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_spotmask"))
        .args(args)
        .output()
        .is_ok_and(|o| o.status.success())
}

/// Runs every seeded command twice (the second time on a different thread
/// count) and compares the files written.
fn determinism_failures(dir: &Path) -> usize {
    let mut failures = 0;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    for profile in [
        "nickel-like",
        "battery-like-1",
        "battery-like-2",
        "battery-like-3",
        "battery-like-4",
    ] {
        let runs: Vec<_> = ["1", "3"]
            .iter()
            .map(|threads| {
                let data = dir.join(format!("{profile}-{threads}"));
                let model = dir.join(format!("{profile}-{threads}.json"));
                let ok = spotmask(&[
                    "synth",
                    "--profile",
                    profile,
                    "--seed",
                    "77",
                    "--size",
                    "96",
                    "--out",
                    &s(&data),
                    "--threads",
                    threads,
                ]) && spotmask(&[
                    "train",
                    "--dataset",
                    &s(&data),
                    "--train-images",
                    "3",
                    "--seed",
                    "5",
                    "--pixel-loc",
                    "--rounds",
                    "8",
                    "--depth",
                    "6",
                    "--model",
                    &s(&model),
                    "--threads",
                    threads,
                ]);
                (ok, snapshot(&data), fs::read(&model).unwrap_or_default())
            })
            .collect();
        let agree = runs.iter().all(|r| r.0) && runs[0].1 == runs[1].1 && runs[0].2 == runs[1].2;
        failures += usize::from(!agree);
    }
    failures
}

pub fn c7_invariants(_: &mut crate::suites::Shared) -> Verdict {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let asm = asm_affine_failures();
    let gbdt = gbdt_monotone_failures();
    let codec = codec_failures(tmp.path());
    let seeded = determinism_failures(tmp.path());
    Verdict::new(
        asm + gbdt + codec + seeded == 0,
        format!(
            "failures: ASM affine {asm}/20 images, GBDT monotone {gbdt}/20 models, codecs {codec} \
             (150 image/mask/sidecar + model + dataset), seeded synth+train {seeded}/5 profiles"
        ),
    )
}
