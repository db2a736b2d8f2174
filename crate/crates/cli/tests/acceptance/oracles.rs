//! Library results against independent brute-force references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spotmask_core::asm::{percentile_rank, shell_statistics};
use spotmask_core::features::{apply_scaler, fit_scaler, FeatureMatrix};
use spotmask_core::gbdt::{fit, GbdtParams, Node, MIN_SPLIT_GAIN};
use spotmask_core::pipeline::{knn_classify, knn_classify_indexed, KnnParams};

use crate::Verdict;

const NAMES: [&str; 4] = ["intensity", "two_theta", "row", "col"];

fn matrix(cols: usize, values: Vec<f64>) -> FeatureMatrix {
    let names = NAMES[..cols].iter().map(|s| s.to_string()).collect();
    FeatureMatrix::new(values.len() / cols, names, values).unwrap()
}

/// Random rows with a noisy linear label; half of the datasets use a coarse
/// value grid so that ties are common.
fn random_problem(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (FeatureMatrix, Vec<u8>) {
    let coarse = rng.random_bool(0.5);
    let values: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.random_range(-5.0..5.0);
            if coarse {
                (v * 2.0).round() / 2.0
            } else {
                v
            }
        })
        .collect();
    let weights: Vec<f64> = (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels = values
        .chunks(cols)
        .map(|r| {
            let s: f64 = r.iter().zip(&weights).map(|(v, w)| v * w).sum();
            u8::from(s + rng.random_range(-2.0..2.0) > 0.5)
        })
        .collect();
    (matrix(cols, values), labels)
}

/// Best first split by trying every distinct scaled value of every feature.
/// Returns `(feature, cut, gain)`; ties keep the first candidate found.
fn best_stump(m: &FeatureMatrix, labels: &[u8], p: &GbdtParams) -> Option<(usize, f64, f64)> {
    let scaled = apply_scaler(&fit_scaler(&[m]).unwrap(), m).unwrap();
    let weight = |y: u8| if y == 1 { p.scale_pos_weight } else { 1.0 };
    let pos: f64 = labels.iter().filter(|&&y| y == 1).map(|&y| weight(y)).sum();
    let neg = labels.iter().filter(|&&y| y == 0).count() as f64;
    let prior = (pos / neg).ln().clamp(-15.0, 15.0);
    let prob = 1.0 / (1.0 + (-prior).exp());
    let grad: Vec<(f64, f64)> = labels
        .iter()
        .map(|&y| {
            let w = weight(y);
            (w * (prob - f64::from(y)), w * prob * (1.0 - prob))
        })
        .collect();
    let score = |g: f64, h: f64| g * g / (h + p.l2_reg);
    let (g, h) = grad
        .iter()
        .fold((0.0, 0.0), |(a, b), &(gi, hi)| (a + gi, b + hi));
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..m.cols {
        let col: Vec<f64> = scaled.column(f).collect();
        let mut cuts = col.clone();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.pop();
        for cut in cuts {
            let (gl, hl) = col
                .iter()
                .zip(&grad)
                .filter(|(v, _)| **v <= cut)
                .fold((0.0, 0.0), |(a, b), (_, &(gi, hi))| (a + gi, b + hi));
            let (gr, hr) = (g - gl, h - hl);
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let gain = score(gl, hl) + score(gr, hr) - score(g, h);
            if gain > MIN_SPLIT_GAIN && best.is_none_or(|b| gain > b.2) {
                best = Some((f, cut, gain));
            }
        }
    }
    best
}

fn stump_mismatches() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let mut mismatches = 0;
    for _ in 0..50 {
        let rows = rng.random_range(20..=1000);
        let cols = rng.random_range(1..=3);
        let (m, labels) = random_problem(&mut rng, rows, cols);
        let p = GbdtParams {
            min_child_weight: rng.random_range(0.0..3.0),
            l2_reg: rng.random_range(0.0..2.0),
            scale_pos_weight: rng.random_range(0.5..3.0),
            ..GbdtParams::default().with_rounds(1).with_depth(1)
        };
        let model = fit(&m, &labels, &p, 0).unwrap();
        let agree = match (best_stump(&m, &labels, &p), &model.trees[0]) {
            (None, Node::Leaf { .. }) => true,
            (
                Some((f, cut, gain)),
                Node::Split {
                    feature,
                    cut: c,
                    gain: g,
                    ..
                },
            ) => *feature == f && *c == cut && (gain - g).abs() <= 1e-9 * gain.abs().max(1.0),
            _ => false,
        };
        mismatches += usize::from(!agree);
    }
    mismatches
}

/// Majority label among the `k` nearest rows by full sort; distance ties
/// resolve to the lower row index.
fn knn_scan(train: &FeatureMatrix, labels: &[u8], query: &[f64], k: usize) -> u8 {
    let mut d: Vec<(f64, usize)> = (0..train.rows)
        .map(|i| {
            let d2 = train
                .row(i)
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let positive = d[..k].iter().filter(|(_, i)| labels[*i] == 1).count();
    u8::from(2 * positive > k)
}

fn knn_mismatches() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(602);
    let mut mismatches = 0;
    for _ in 0..20 {
        let cols = rng.random_range(1..=4);
        let (train, labels) = random_problem(&mut rng, 500, cols);
        let (query, _) = random_problem(&mut rng, 200, cols);
        let params = KnnParams {
            n_neighbors: [1, 3, 5, 7][rng.random_range(0..4)],
        };
        let direct = knn_classify(&train, &labels, &query, &params).unwrap();
        let indexed = knn_classify_indexed(&train, &labels, &query, &params).unwrap();
        for q in 0..query.rows {
            let want = knn_scan(&train, &labels, query.row(q), params.n_neighbors);
            mismatches += usize::from(direct[q] != want) + usize::from(indexed[q] != want);
        }
    }
    mismatches
}

/// Percentile by linear interpolation between closest ranks.
fn percentile(sorted: &[f64], rank: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * rank / 100.0;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn shell_mismatches() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(603);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..3000);
        let level = rng.random_range(1.0..1e4);
        let values: Vec<f32> = (0..n)
            .map(|_| {
                let v = level * (1.0 + 0.1 * rng.random_range(-1.0..1.0));
                if rng.random_bool(0.01) {
                    (v * 50.0) as f32
                } else {
                    v as f32
                }
            })
            .collect();
        let eps = rng.random_range(1.0..=10.0);
        let stats = shell_statistics(&values, eps).unwrap();

        let mut sorted: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        sorted.sort_by(f64::total_cmp);
        let cut = percentile(&sorted, percentile_rank(eps));
        let median = percentile(&sorted, 50.0);
        let kept: Vec<f64> = sorted.iter().copied().filter(|&v| v <= cut).collect();
        let mu = kept.iter().sum::<f64>() / kept.len() as f64;
        let sigma =
            (kept.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / kept.len() as f64).sqrt();

        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        let agree = close(stats.cut_value, cut)
            && close(stats.median, median)
            && close(stats.sigma, sigma)
            && stats.pixel_count == n;
        mismatches += usize::from(!agree);
    }
    mismatches
}

pub fn c6_oracles(_: &mut crate::suites::Shared) -> Verdict {
    let stumps = stump_mismatches();
    let knn = knn_mismatches();
    let shells = shell_mismatches();
    Verdict::new(
        stumps + knn + shells == 0,
        format!(
            "mismatches: stump {stumps}/50 datasets, KNN {knn} over 20 datasets x 200 queries x \
             2 search paths, shell statistics {shells}/100 shells"
        ),
    )
}
