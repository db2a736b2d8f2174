//! Training and evaluation over dataset images, and hyperparameter grid search.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Entry};
use super::folds::Fold;
use super::metrics::{evaluate, mean_std, ConfusionCounts};
use crate::error::{Error, Result};
use crate::features::{fill_feature_rows, FeatureConfig, FeatureMatrix};
use crate::gbdt::{fit_with_log, CompiledModel, FitLog, GbdtModel, GbdtParams};
use crate::geometry::{compute_polar_maps, PolarMaps};
use crate::imagegrid::Image;

/// Probability above which a pixel is masked.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainConfig {
    pub params: GbdtParams,
    pub features: FeatureConfig,
}

pub fn polar_maps_for(img: &Image) -> Result<PolarMaps> {
    let (w, h) = img.dims();
    compute_polar_maps(img.require_geometry()?, w, h)
}

/// Feature rows and labels of all `entries`, stacked in entry order.
pub fn training_matrix(
    entries: &[&Entry],
    cfg: &FeatureConfig,
) -> Result<(FeatureMatrix, Vec<u8>)> {
    cfg.validate()?;
    let cols = cfg.len();
    let rows: usize = entries.iter().map(|e| e.image.pixels().len()).sum();
    let mut values = vec![0.0; rows * cols];
    let mut labels = Vec::with_capacity(rows);
    let mut offset = 0;
    for e in entries {
        let (w, h) = e.image.dims();
        e.truth.check_same_dims((w, h))?;
        let polar = polar_maps_for(&e.image)?;
        values[offset * cols..(offset + w * h) * cols]
            .par_chunks_mut(w * cols)
            .enumerate()
            .for_each(|(y, chunk)| {
                fill_feature_rows(&e.image, &polar, cfg, y * w, (y + 1) * w, chunk)
            });
        labels.extend(e.truth.to_labels());
        offset += w * h;
    }
    Ok((FeatureMatrix::new(rows, cfg.names(), values)?, labels))
}

/// Fits a model on the images at `indices`.
pub fn train_model(
    dataset: &Dataset,
    indices: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<(GbdtModel, FitLog)> {
    let entries: Vec<&Entry> = indices.iter().map(|&i| &dataset.entries[i]).collect();
    if entries.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let (features, labels) = training_matrix(&entries, &config.features)?;
    fit_with_log(&features, &labels, &config.params, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub name: String,
    pub counts: ConfusionCounts,
    pub recall: f64,
    pub specificity: f64,
    pub predict_seconds: f64,
}

/// Predicts and scores every entry in turn.
pub fn evaluate_model(
    model: &GbdtModel,
    entries: &[&Entry],
    threshold: f64,
) -> Result<Vec<ImageReport>> {
    let compiled = CompiledModel::new(model)?;
    entries
        .iter()
        .map(|e| {
            let polar = polar_maps_for(&e.image)?;
            let t = Instant::now();
            let mask = compiled.predict_mask(model, &e.image, &polar, threshold)?;
            let predict_seconds = t.elapsed().as_secs_f64();
            let ev = evaluate(&mask, &e.truth)?;
            Ok(ImageReport {
                name: e.name.clone(),
                counts: ev.counts,
                recall: ev.recall,
                specificity: ev.specificity,
                predict_seconds,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub config: TrainConfig,
    /// Per-fold mean of per-image recall.
    pub fold_recall: Vec<f64>,
    pub fold_specificity: Vec<f64>,
    pub mean_recall: f64,
    pub mean_specificity: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best: usize,
    pub cells: Vec<CellResult>,
}

impl GridSearch {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }
}

/// Trains and scores every grid cell on every fold. The best cell has the
/// highest mean recall, then the highest mean specificity, then the lowest
/// index.
pub fn grid_search(
    grid: &[TrainConfig],
    dataset: &Dataset,
    folds: &[Fold],
    seed: u64,
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty parameter grid".into()));
    }
    if folds.is_empty() {
        return Err(Error::InvalidParams("no folds".into()));
    }
    let cells = grid
        .iter()
        .enumerate()
        .map(|(index, config)| {
            run_cell(index, config, dataset, folds, seed).map_err(|e| Error::GridCell {
                cell: index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&cells);
    Ok(GridSearch { best, cells })
}

fn run_cell(
    index: usize,
    config: &TrainConfig,
    dataset: &Dataset,
    folds: &[Fold],
    seed: u64,
) -> Result<CellResult> {
    let mut fold_recall = Vec::with_capacity(folds.len());
    let mut fold_specificity = Vec::with_capacity(folds.len());
    let mut train_seconds = 0.0;
    for fold in folds {
        let t = Instant::now();
        let (model, _) = train_model(dataset, &fold.train, config, seed)?;
        train_seconds += t.elapsed().as_secs_f64();
        let test: Vec<&Entry> = fold.test.iter().map(|&i| &dataset.entries[i]).collect();
        let reports = evaluate_model(&model, &test, DEFAULT_THRESHOLD)?;
        let recalls: Vec<f64> = reports.iter().map(|r| r.recall).collect();
        let specs: Vec<f64> = reports.iter().map(|r| r.specificity).collect();
        fold_recall.push(mean_std(&recalls).0);
        fold_specificity.push(mean_std(&specs).0);
    }
    Ok(CellResult {
        index,
        config: *config,
        mean_recall: mean_std(&fold_recall).0,
        mean_specificity: mean_std(&fold_specificity).0,
        fold_recall,
        fold_specificity,
        train_seconds,
    })
}

pub(crate) fn select_best(cells: &[CellResult]) -> usize {
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        let b = &cells[best];
        let better = c.mean_recall > b.mean_recall
            || (c.mean_recall == b.mean_recall && c.mean_specificity > b.mean_specificity);
        if better {
            best = i;
        }
    }
    best
}
