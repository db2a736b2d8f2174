//! JSON metrics report: per-image counts, per-dataset mean ± std, timings.

use serde::{Deserialize, Serialize};

use super::metrics::{mean_std, ConfusionCounts};
use super::protocol::ImageReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub images: usize,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub specificity_mean: f64,
    pub specificity_std: f64,
    /// Pixel counts summed over all images.
    pub counts: ConfusionCounts,
    pub predict_seconds_mean: f64,
}

pub fn summarize(dataset: &str, images: &[ImageReport]) -> DatasetSummary {
    let recalls: Vec<f64> = images.iter().map(|r| r.recall).collect();
    let specs: Vec<f64> = images.iter().map(|r| r.specificity).collect();
    let times: Vec<f64> = images.iter().map(|r| r.predict_seconds).collect();
    let (recall_mean, recall_std) = mean_std(&recalls);
    let (specificity_mean, specificity_std) = mean_std(&specs);
    let counts = images
        .iter()
        .fold(ConfusionCounts::default(), |acc, r| acc.merge(&r.counts));
    DatasetSummary {
        dataset: dataset.to_string(),
        images: images.len(),
        recall_mean,
        recall_std,
        specificity_mean,
        specificity_std,
        counts,
        predict_seconds_mean: mean_std(&times).0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub summary: DatasetSummary,
    pub images: Vec<ImageReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_seconds: Option<f64>,
}

impl MetricsReport {
    pub fn new(dataset: &str, images: Vec<ImageReport>, train_seconds: Option<f64>) -> Self {
        Self {
            summary: summarize(dataset, &images),
            images,
            train_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
