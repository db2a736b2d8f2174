//! Flattened trees compared on per-row cut ranks.

use rayon::prelude::*;

use super::model::{GbdtModel, Node};
use super::train::scale_value;
use crate::error::{Error, Result};
use crate::features::{fill_feature_rows, FeatureMatrix};
use crate::geometry::PolarMaps;
use crate::imagegrid::{Image, MaskMap};

/// Margins are clamped to this magnitude so scores stay strictly inside (0, 1).
pub const MARGIN_CLAMP: f64 = 30.0;

const MAX_FEATURES: usize = 8;

/// Largest rank grid tabulated in full.
const TABLE_LIMIT: usize = 1 << 22;

#[inline]
pub fn sigmoid(margin: f64) -> f64 {
    1.0 / (1.0 + (-margin.clamp(-MARGIN_CLAMP, MARGIN_CLAMP)).exp())
}

/// Node in breadth-first layout: children sit at `child` (left) and
/// `child + 1` (right). A leaf's `child` is its own index.
#[derive(Debug, Clone, Copy)]
struct Flat {
    feature: u32,
    threshold: u32,
    child: u32,
}

#[derive(Debug, Clone)]
struct FlatTree {
    nodes: Vec<Flat>,
    values: Vec<f64>,
}

impl FlatTree {
    #[inline]
    fn leaf(&self, ranks: &[u32]) -> f64 {
        let mut i = 0;
        loop {
            let n = self.nodes[i];
            if n.child as usize == i {
                return self.values[i];
            }
            i = n.child as usize + usize::from(ranks[n.feature as usize] > n.threshold);
        }
    }
}

/// Prediction-ready form of a [`GbdtModel`].
///
/// Each feature's distinct split cuts are collected and sorted once. A row's
/// value `v` is reduced to the count of cuts strictly below it, and
/// `v <= cut[i]` becomes the integer test `rank <= i`.
///
/// When the grid of rank combinations is small (the usual two-feature case)
/// the margin of every cell is tabulated up front, summed over trees in the
/// same order as a direct walk, so a row costs one lookup.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    base_score: f64,
    means: Vec<f64>,
    stds: Vec<f64>,
    cuts: Vec<Vec<f64>>,
    trees: Vec<FlatTree>,
    /// Row-major over features, feature 0 slowest.
    table: Option<Vec<f64>>,
}

impl CompiledModel {
    pub fn new(model: &GbdtModel) -> Result<Self> {
        model.validate()?;
        let cols = model.n_features();
        if cols > MAX_FEATURES {
            return Err(Error::MalformedModel(format!(
                "at most {MAX_FEATURES} features supported"
            )));
        }
        let mut cuts = vec![Vec::new(); cols];
        for tree in &model.trees {
            let mut stack = vec![tree];
            while let Some(n) = stack.pop() {
                if let Node::Split {
                    feature,
                    cut,
                    left,
                    right,
                    ..
                } = n
                {
                    cuts[*feature].push(*cut);
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        for c in &mut cuts {
            c.sort_unstable_by(f64::total_cmp);
            c.dedup();
        }
        let trees = model.trees.iter().map(|t| flatten(t, &cuts)).collect();
        let mut compiled = Self {
            base_score: model.base_score,
            means: model.scaler.means.clone(),
            stds: model.scaler.stds.clone(),
            cuts,
            trees,
            table: None,
        };
        compiled.table = compiled.tabulate();
        Ok(compiled)
    }

    fn tabulate(&self) -> Option<Vec<f64>> {
        let dims: Vec<usize> = self.cuts.iter().map(|c| c.len() + 1).collect();
        let cells = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= TABLE_LIMIT)?;
        let table = (0..cells)
            .into_par_iter()
            .map(|cell| {
                let mut ranks = [0u32; MAX_FEATURES];
                let mut rest = cell;
                for j in (0..dims.len()).rev() {
                    ranks[j] = (rest % dims[j]) as u32;
                    rest /= dims[j];
                }
                self.walk(&ranks)
            })
            .collect();
        Some(table)
    }

    #[inline]
    fn walk(&self, ranks: &[u32]) -> f64 {
        let mut margin = self.base_score;
        for tree in &self.trees {
            margin += tree.leaf(ranks);
        }
        margin
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    #[inline]
    fn ranks_into(&self, raw: &[f64], out: &mut [u32]) {
        for (j, &v) in raw.iter().enumerate() {
            let s = scale_value(v, self.means[j], self.stds[j]);
            out[j] = self.cuts[j].partition_point(|&c| c < s) as u32;
        }
    }

    /// Raw log-odds for one unscaled feature row.
    #[inline]
    pub fn margin(&self, raw: &[f64]) -> f64 {
        let mut ranks = [0u32; MAX_FEATURES];
        self.ranks_into(raw, &mut ranks);
        match &self.table {
            Some(table) => {
                let mut cell = 0;
                for (j, &r) in ranks[..raw.len()].iter().enumerate() {
                    cell = cell * (self.cuts[j].len() + 1) + r as usize;
                }
                table[cell]
            }
            None => self.walk(&ranks),
        }
    }

    #[inline]
    pub fn score(&self, raw: &[f64]) -> f64 {
        sigmoid(self.margin(raw))
    }

    /// Scores for consecutive raw rows (`raw.len() == out.len() * cols`).
    fn score_rows(&self, raw: &[f64], cols: usize, out: &mut [f64]) {
        for (row, o) in raw.chunks_exact(cols).zip(out.iter_mut()) {
            *o = self.score(row);
        }
    }

    pub fn scores(&self, features: &FeatureMatrix) -> Vec<f64> {
        let cols = features.cols;
        if cols == 0 {
            return vec![sigmoid(self.base_score); features.rows];
        }
        let mut out = vec![0.0; features.rows];
        const ROWS: usize = 4096;
        out.par_chunks_mut(ROWS)
            .zip(features.values.par_chunks(cols * ROWS))
            .for_each(|(o, raw)| self.score_rows(raw, cols, o));
        out
    }

    /// Pixel mask of scores above `threshold`, built image row by image row
    /// without materializing the full feature matrix.
    pub fn predict_mask(
        &self,
        model: &GbdtModel,
        img: &Image,
        polar: &PolarMaps,
        threshold: f64,
    ) -> Result<MaskMap> {
        polar.check_dims(img.dims())?;
        let cfg = model.feature_config()?;
        let (w, h) = img.dims();
        let cols = cfg.len();
        let mut flags = vec![false; w * h];
        flags.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
            let mut buf = vec![0.0; w * cols];
            let mut scores = vec![0.0; w];
            fill_feature_rows(img, polar, &cfg, y * w, (y + 1) * w, &mut buf);
            self.score_rows(&buf, cols, &mut scores);
            for (o, s) in out.iter_mut().zip(&scores) {
                *o = *s > threshold;
            }
        });
        MaskMap::from_bools(w, h, &flags)
    }
}

fn flatten(root: &Node, cuts: &[Vec<f64>]) -> FlatTree {
    let mut nodes = vec![Flat {
        feature: 0,
        threshold: 0,
        child: 0,
    }];
    let mut values = vec![0.0];
    let mut queue = std::collections::VecDeque::from([(root, 0usize)]);
    while let Some((n, at)) = queue.pop_front() {
        match n {
            Node::Leaf { value, .. } => {
                nodes[at] = Flat {
                    feature: 0,
                    threshold: 0,
                    child: at as u32,
                };
                values[at] = *value;
            }
            Node::Split {
                feature,
                cut,
                left,
                right,
                ..
            } => {
                let child = nodes.len();
                nodes[at] = Flat {
                    feature: *feature as u32,
                    threshold: cuts[*feature].partition_point(|&c| c < *cut) as u32,
                    child: child as u32,
                };
                nodes.extend([nodes[at]; 2]);
                values.extend([0.0; 2]);
                queue.push_back((left, child));
                queue.push_back((right, child + 1));
            }
        }
    }
    FlatTree { nodes, values }
}

pub fn predict_scores(model: &GbdtModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    features.check_columns(&model.feature_names)?;
    let compiled = CompiledModel::new(model)?;
    Ok(compiled.scores(features))
}

pub fn predict_mask(
    model: &GbdtModel,
    img: &Image,
    polar: &PolarMaps,
    threshold: f64,
) -> Result<MaskMap> {
    CompiledModel::new(model)?.predict_mask(model, img, polar, threshold)
}
