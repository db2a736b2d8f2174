//! Per-pixel feature rows and column-wise standard scaling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PolarMaps;
use crate::imagegrid::Image;

pub const INTENSITY: &str = "intensity";
pub const TWO_THETA: &str = "two_theta";
pub const ROW: &str = "row";
pub const COL: &str = "col";

/// Floor applied to fitted standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub use_intensity: bool,
    pub use_two_theta: bool,
    /// Adds the row and column indices as two extra features.
    pub use_pixel_location: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            use_intensity: true,
            use_two_theta: true,
            use_pixel_location: false,
        }
    }
}

impl FeatureConfig {
    pub fn with_pixel_location(mut self, on: bool) -> Self {
        self.use_pixel_location = on;
        self
    }

    /// Column labels in their fixed order: intensity, two_theta, row, col.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.use_intensity {
            names.push(INTENSITY.to_string());
        }
        if self.use_two_theta {
            names.push(TWO_THETA.to_string());
        }
        if self.use_pixel_location {
            names.push(ROW.to_string());
            names.push(COL.to_string());
        }
        names
    }

    /// Inverse of [`FeatureConfig::names`].
    pub fn from_names(names: &[String]) -> Result<Self> {
        let candidates = [
            Self {
                use_intensity: true,
                use_two_theta: false,
                use_pixel_location: false,
            },
            Self {
                use_intensity: true,
                use_two_theta: true,
                use_pixel_location: false,
            },
            Self {
                use_intensity: true,
                use_two_theta: false,
                use_pixel_location: true,
            },
            Self {
                use_intensity: true,
                use_two_theta: true,
                use_pixel_location: true,
            },
        ];
        candidates
            .into_iter()
            .find(|c| c.names() == names)
            .ok_or_else(|| Error::ColumnMismatch {
                expected: Self::default().names(),
                found: names.to_vec(),
            })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_intensity {
            return Err(Error::InvalidParams(
                "the intensity feature is required".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major feature grid, one row per pixel (`row = y * width + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, feature_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let cols = feature_names.len();
        if values.len() != rows * cols {
            return Err(Error::InvalidParams(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            values,
            feature_names,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.cols).copied()
    }

    pub fn check_columns(&self, names: &[String]) -> Result<()> {
        if self.feature_names != names {
            return Err(Error::ColumnMismatch {
                expected: names.to_vec(),
                found: self.feature_names.clone(),
            });
        }
        Ok(())
    }

    /// Stacks matrices with identical columns.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyTraining)?;
        let mut values = Vec::with_capacity(parts.iter().map(|p| p.values.len()).sum());
        for p in parts {
            p.check_columns(&first.feature_names)?;
            values.extend_from_slice(&p.values);
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        Self::new(rows, first.feature_names.clone(), values)
    }
}

/// Features for pixels `start..end` (row-major indices).
pub(crate) fn fill_feature_rows(
    img: &Image,
    polar: &PolarMaps,
    cfg: &FeatureConfig,
    start: usize,
    end: usize,
    out: &mut [f64],
) {
    let cols = cfg.len();
    let width = img.width();
    let pixels = img.pixels();
    for (k, i) in (start..end).enumerate() {
        let row = &mut out[k * cols..(k + 1) * cols];
        let mut c = 0;
        if cfg.use_intensity {
            row[c] = pixels[i] as f64;
            c += 1;
        }
        if cfg.use_two_theta {
            row[c] = polar.two_theta[i];
            c += 1;
        }
        if cfg.use_pixel_location {
            row[c] = (i / width) as f64;
            row[c + 1] = (i % width) as f64;
        }
    }
}

pub fn build_features(
    img: &Image,
    polar: &PolarMaps,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix> {
    cfg.validate()?;
    polar.check_dims(img.dims())?;
    let n = img.pixels().len();
    let cols = cfg.len();
    let width = img.width();
    let mut values = vec![0.0; n * cols];
    values
        .par_chunks_mut(width * cols)
        .enumerate()
        .for_each(|(y, chunk)| {
            let start = y * width;
            fill_feature_rows(img, polar, cfg, start, start + width, chunk);
        });
    FeatureMatrix::new(n, cfg.names(), values)
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn identity(cols: usize) -> Self {
        Self {
            means: vec![0.0; cols],
            stds: vec![1.0; cols],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    #[inline]
    pub fn scale_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - m) / s;
        }
    }
}

/// Fits over the concatenation of all training matrices.
pub fn fit_scaler(training: &[&FeatureMatrix]) -> Result<Scaler> {
    let first = training
        .iter()
        .find(|m| m.rows > 0)
        .ok_or(Error::EmptyTraining)?;
    let cols = first.cols;
    for m in training {
        m.check_columns(&first.feature_names)?;
    }
    let total: usize = training.iter().map(|m| m.rows).sum();
    let n = total as f64;

    let mut sums = vec![0.0; cols];
    for m in training {
        for row in m.values.chunks_exact(cols) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let mut sq = vec![0.0; cols];
    for m in training {
        for row in m.values.chunks_exact(cols) {
            for ((s, v), mu) in sq.iter_mut().zip(row).zip(&means) {
                let d = v - mu;
                *s += d * d;
            }
        }
    }
    let stds = sq.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    Ok(Scaler { means, stds })
}

pub fn apply_scaler(scaler: &Scaler, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if scaler.len() != m.cols {
        return Err(Error::ColumnMismatch {
            expected: vec![format!("{} columns", scaler.len())],
            found: m.feature_names.clone(),
        });
    }
    let mut out = m.clone();
    if m.cols > 0 {
        out.values.par_chunks_mut(m.cols * 4096).for_each(|chunk| {
            chunk
                .chunks_exact_mut(m.cols)
                .for_each(|r| scaler.scale_row(r))
        });
    }
    Ok(out)
}
