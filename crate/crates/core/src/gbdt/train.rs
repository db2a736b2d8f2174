//! Depth-first histogram tree growth on the logistic objective.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::binning::{assign_bins, quantile_cuts, QUANTILE_SAMPLE_CAP};
use super::model::{GbdtModel, Node, SCHEMA_VERSION};
use super::GbdtParams;
use crate::error::{Error, Result};
use crate::features::{fit_scaler, FeatureMatrix, Scaler};

/// Splits must improve the objective by more than this.
pub const MIN_SPLIT_GAIN: f64 = 1e-6;

/// Bound on |base_score| so single-class training stays finite.
pub const BASE_SCORE_CLAMP: f64 = 15.0;

/// Rows per partial histogram when a node is large enough to split the work.
const HIST_CHUNK: usize = 1 << 20;

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    n: u64,
}

/// Training summary.
#[derive(Debug, Clone, PartialEq)]
pub struct FitLog {
    /// Weighted mean logistic loss of the base score alone.
    pub base_loss: f64,
    /// Weighted mean logistic loss after the last round.
    pub final_loss: f64,
    pub rows: usize,
    pub positives: usize,
}

/// Weighted mean of `softplus(m) - y m` at margins `margin`.
pub fn logistic_loss(margin: &[f64], labels: &[u8], scale_pos_weight: f64) -> f64 {
    let (mut total, mut weight) = (0.0, 0.0);
    for (&m, &y) in margin.iter().zip(labels) {
        let (w, yf) = if y != 0 {
            (scale_pos_weight, 1.0)
        } else {
            (1.0, 0.0)
        };
        let softplus = m.max(0.0) + (-m.abs()).exp().ln_1p();
        total += w * (softplus - yf * m);
        weight += w;
    }
    total / weight
}

pub fn fit(
    features: &FeatureMatrix,
    labels: &[u8],
    params: &GbdtParams,
    seed: u64,
) -> Result<GbdtModel> {
    fit_with_log(features, labels, params, seed).map(|(m, _)| m)
}

pub fn fit_with_log(
    features: &FeatureMatrix,
    labels: &[u8],
    params: &GbdtParams,
    seed: u64,
) -> Result<(GbdtModel, FitLog)> {
    params.validate()?;
    if features.rows == 0 {
        return Err(Error::EmptyTraining);
    }
    if features.cols == 0 {
        return Err(Error::InvalidParams(
            "at least one feature column is required".into(),
        ));
    }
    if labels.len() != features.rows {
        return Err(Error::LabelDimensionMismatch {
            rows: features.rows,
            labels: labels.len(),
        });
    }
    let scaler = fit_scaler(&[features])?;
    let (bin_edges, bins) = bin_features(features, &scaler, params.max_bin, seed);

    let positives = labels.iter().filter(|&&y| y != 0).count();
    let w_pos = positives as f64 * params.scale_pos_weight;
    let w_neg = (labels.len() - positives) as f64;
    let base_score = (w_pos / w_neg)
        .ln()
        .clamp(-BASE_SCORE_CLAMP, BASE_SCORE_CLAMP);

    let n = features.rows;
    let mut margin = vec![base_score; n];
    let base_loss = logistic_loss(&margin, labels, params.scale_pos_weight);

    let mut grower = Grower {
        bins: &bins,
        edges: &bin_edges,
        n_bins: bin_edges.iter().map(|c| c.len() + 1).collect(),
        gh: vec![[0.0; 2]; n],
        rows: (0..n as u32).collect(),
        scratch: vec![0; n],
        params,
    };
    let mut trees = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        grower
            .gh
            .par_iter_mut()
            .zip(margin.par_iter())
            .zip(labels.par_iter())
            .for_each(|((gh, &m), &y)| {
                let p = 1.0 / (1.0 + (-m).exp());
                let (w, yf) = if y != 0 {
                    (params.scale_pos_weight, 1.0)
                } else {
                    (1.0, 0.0)
                };
                *gh = [w * (p - yf), w * p * (1.0 - p)];
            });
        grower
            .rows
            .iter_mut()
            .enumerate()
            .for_each(|(i, r)| *r = i as u32);
        let root_hist = grower.histogram(0..n);
        let tree = grower.grow(0..n, root_hist, 0, &mut margin);
        trees.push(tree);
    }
    let final_loss = logistic_loss(&margin, labels, params.scale_pos_weight);

    let model = GbdtModel {
        schema_version: SCHEMA_VERSION.to_string(),
        params: *params,
        base_score,
        feature_names: features.feature_names.clone(),
        scaler,
        bin_edges,
        trees,
    };
    let log = FitLog {
        base_loss,
        final_loss,
        rows: n,
        positives,
    };
    Ok((model, log))
}

#[inline]
pub(crate) fn scale_value(v: f64, mean: f64, std: f64) -> f64 {
    (v - mean) / std
}

/// Quantile cuts (scaled space) and per-row bins, one column at a time.
fn bin_features(
    m: &FeatureMatrix,
    scaler: &Scaler,
    max_bin: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<u16>>) {
    let sample: Option<Vec<usize>> = (m.rows > QUANTILE_SAMPLE_CAP).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, m.rows, QUANTILE_SAMPLE_CAP).into_vec();
        idx.sort_unstable();
        idx
    });
    (0..m.cols)
        .into_par_iter()
        .map(|j| {
            let (mean, std) = (scaler.means[j], scaler.stds[j]);
            let scaled = |i: usize| scale_value(m.values[i * m.cols + j], mean, std);
            let mut values: Vec<f64> = match &sample {
                Some(idx) => idx.iter().map(|&i| scaled(i)).collect(),
                None => (0..m.rows).map(scaled).collect(),
            };
            let cuts = quantile_cuts(&mut values, max_bin);
            let bins = assign_bins(&cuts, (0..m.rows).map(scaled));
            (cuts, bins)
        })
        .unzip()
}

struct Split {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct Grower<'a> {
    bins: &'a [Vec<u16>],
    edges: &'a [Vec<f64>],
    n_bins: Vec<usize>,
    gh: Vec<[f64; 2]>,
    rows: Vec<u32>,
    scratch: Vec<u32>,
    params: &'a GbdtParams,
}

type Hist = Vec<Vec<Bin>>;

impl Grower<'_> {
    fn histogram(&self, range: Range<usize>) -> Hist {
        let rows = &self.rows[range];
        let gh = &self.gh;
        (0..self.bins.len())
            .into_par_iter()
            .map(|f| {
                let col = &self.bins[f];
                let nb = self.n_bins[f];
                let fill = |rows: &[u32]| {
                    let mut hist = vec![Bin::default(); nb];
                    for &r in rows {
                        let b = &mut hist[col[r as usize] as usize];
                        let [g, h] = gh[r as usize];
                        b.g += g;
                        b.h += h;
                        b.n += 1;
                    }
                    hist
                };
                if rows.len() <= 2 * HIST_CHUNK {
                    return fill(rows);
                }
                // fixed chunk boundaries and in-order reduction keep the sums
                // independent of the thread count
                let parts: Vec<Vec<Bin>> = rows.par_chunks(HIST_CHUNK).map(fill).collect();
                let mut hist = vec![Bin::default(); nb];
                for part in parts {
                    for (a, b) in hist.iter_mut().zip(part) {
                        a.g += b.g;
                        a.h += b.h;
                        a.n += b.n;
                    }
                }
                hist
            })
            .collect()
    }

    fn best_split(&self, hist: &Hist, total: Bin) -> Option<Split> {
        let p = self.params;
        let lambda = p.l2_reg;
        let term = |g: f64, h: f64| {
            if h + lambda > 0.0 {
                g * g / (h + lambda)
            } else {
                0.0
            }
        };
        let parent = term(total.g, total.h);
        let mut best: Option<Split> = None;
        let mut best_gain = MIN_SPLIT_GAIN;
        for (f, fh) in hist.iter().enumerate() {
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u64);
            for (b, bin) in fh[..fh.len() - 1].iter().enumerate() {
                if bin.n == 0 {
                    continue;
                }
                gl += bin.g;
                hl += bin.h;
                nl += bin.n;
                if nl == total.n {
                    break;
                }
                let (gr, hr) = (total.g - gl, total.h - hl);
                if hl < p.min_child_weight || hr < p.min_child_weight {
                    continue;
                }
                if hl + lambda <= 0.0 || hr + lambda <= 0.0 {
                    continue;
                }
                let gain = term(gl, hl) + term(gr, hr) - parent;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(Split {
                        feature: f,
                        bin: b,
                        gain,
                    });
                }
            }
        }
        best
    }

    /// Stable in-place partition; returns the number of rows sent left.
    fn partition(&mut self, range: Range<usize>, split: &Split) -> usize {
        let col = &self.bins[split.feature];
        let rows = &mut self.rows[range.clone()];
        let scratch = &mut self.scratch[range];
        let (mut nl, mut nr) = (0, 0);
        for i in 0..rows.len() {
            let r = rows[i];
            if col[r as usize] as usize <= split.bin {
                rows[nl] = r;
                nl += 1;
            } else {
                scratch[nr] = r;
                nr += 1;
            }
        }
        rows[nl..].copy_from_slice(&scratch[..nr]);
        nl
    }

    fn grow(
        &mut self,
        range: Range<usize>,
        mut hist: Hist,
        depth: usize,
        margin: &mut [f64],
    ) -> Node {
        let total = hist[0].iter().fold(Bin::default(), |a, b| Bin {
            g: a.g + b.g,
            h: a.h + b.h,
            n: a.n + b.n,
        });
        if depth < self.params.max_depth {
            if let Some(split) = self.best_split(&hist, total) {
                let nl = self.partition(range.clone(), &split);
                let left = range.start..range.start + nl;
                let right = range.start + nl..range.end;
                let left_small = left.len() <= right.len();
                let small = self.histogram(if left_small {
                    left.clone()
                } else {
                    right.clone()
                });
                for (ph, sh) in hist.iter_mut().zip(&small) {
                    for (p, s) in ph.iter_mut().zip(sh) {
                        p.n -= s.n;
                        if p.n == 0 {
                            *p = Bin::default();
                        } else {
                            p.g -= s.g;
                            p.h -= s.h;
                        }
                    }
                }
                let (lh, rh) = if left_small {
                    (small, hist)
                } else {
                    (hist, small)
                };
                let l = self.grow(left, lh, depth + 1, margin);
                let r = self.grow(right, rh, depth + 1, margin);
                return Node::Split {
                    feature: split.feature,
                    cut: self.edges[split.feature][split.bin],
                    gain: split.gain,
                    cover: total.h,
                    left: Box::new(l),
                    right: Box::new(r),
                };
            }
        }
        let denom = total.h + self.params.l2_reg;
        let mut step = if denom > 0.0 { -total.g / denom } else { 0.0 };
        let bound = self.params.max_delta_step;
        if bound > 0.0 {
            step = step.clamp(-bound, bound);
        }
        let value = step * self.params.learning_rate;
        for &r in &self.rows[range] {
            margin[r as usize] += value;
        }
        Node::Leaf {
            value,
            cover: total.h,
        }
    }
}
