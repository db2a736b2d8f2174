//! Evaluation protocol: datasets, metrics, folds, grid search, KNN reference.

mod dataset;
mod folds;
mod knn;
mod metrics;
mod protocol;
mod report;

pub use dataset::{Dataset, Entry, Manifest, ManifestEntry, MANIFEST_FILE};
pub use folds::{make_folds, Fold};
pub use knn::{
    knn_classify, knn_classify_exhaustive, knn_classify_indexed, KnnParams, INDEX_THRESHOLD,
};
pub use metrics::{evaluate, mean_std, ConfusionCounts, Evaluation};
pub use protocol::{
    evaluate_model, grid_search, polar_maps_for, train_model, training_matrix, CellResult,
    GridSearch, ImageReport, TrainConfig, DEFAULT_THRESHOLD,
};
pub use report::{summarize, DatasetSummary, MetricsReport};
