//! k-nearest-neighbour reference classifier.
//!
//! Neighbours are ranked by squared Euclidean distance, ties by lower
//! training-row index, and the label is the majority among the `k` nearest.
//! Large training sets use a uniform grid index that returns exactly the
//! neighbours an exhaustive scan would.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Training sets of at least this many rows are searched through a grid index.
pub const INDEX_THRESHOLD: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub n_neighbors: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { n_neighbors: 3 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors == 0 || self.n_neighbors.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "n_neighbors must be odd and positive, got {}",
                self.n_neighbors
            )));
        }
        Ok(())
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` best (distance², index) pairs seen so far, sorted ascending.
struct Nearest {
    k: usize,
    best: Vec<(f64, usize)>,
}

impl Nearest {
    fn new(k: usize) -> Self {
        Self {
            k,
            best: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, d: f64, i: usize) {
        if self.best.len() == self.k {
            let worst = self.best[self.k - 1];
            if (d, i) >= worst {
                return;
            }
        }
        let at = self.best.partition_point(|&e| e < (d, i));
        self.best.insert(at, (d, i));
        self.best.truncate(self.k);
    }

    fn kth(&self) -> Option<f64> {
        (self.best.len() == self.k).then(|| self.best[self.k - 1].0)
    }

    fn vote(&self, labels: &[u8]) -> u8 {
        let pos = self.best.iter().filter(|&&(_, i)| labels[i] != 0).count();
        u8::from(2 * pos > self.best.len())
    }
}

fn check_inputs(
    train: &FeatureMatrix,
    labels: &[u8],
    query: &FeatureMatrix,
    params: &KnnParams,
) -> Result<()> {
    params.validate()?;
    if train.rows == 0 {
        return Err(Error::EmptyTraining);
    }
    if labels.len() != train.rows {
        return Err(Error::LabelDimensionMismatch {
            rows: train.rows,
            labels: labels.len(),
        });
    }
    query.check_columns(&train.feature_names)?;
    if params.n_neighbors > train.rows {
        return Err(Error::InvalidParams(format!(
            "n_neighbors {} exceeds {} training rows",
            params.n_neighbors, train.rows
        )));
    }
    Ok(())
}

/// Labels for every query row. Features are expected to be scaled already.
pub fn knn_classify(
    train: &FeatureMatrix,
    labels: &[u8],
    query: &FeatureMatrix,
    params: &KnnParams,
) -> Result<Vec<u8>> {
    if train.rows >= INDEX_THRESHOLD {
        knn_classify_indexed(train, labels, query, params)
    } else {
        knn_classify_exhaustive(train, labels, query, params)
    }
}

pub fn knn_classify_exhaustive(
    train: &FeatureMatrix,
    labels: &[u8],
    query: &FeatureMatrix,
    params: &KnnParams,
) -> Result<Vec<u8>> {
    check_inputs(train, labels, query, params)?;
    let k = params.n_neighbors;
    Ok((0..query.rows)
        .into_par_iter()
        .map(|q| {
            let qr = query.row(q);
            let mut near = Nearest::new(k);
            for i in 0..train.rows {
                near.offer(dist2(qr, train.row(i)), i);
            }
            near.vote(labels)
        })
        .collect())
}

/// Same result as [`knn_classify_exhaustive`], searched through a grid index.
pub fn knn_classify_indexed(
    train: &FeatureMatrix,
    labels: &[u8],
    query: &FeatureMatrix,
    params: &KnnParams,
) -> Result<Vec<u8>> {
    check_inputs(train, labels, query, params)?;
    let grid = Grid::build(train);
    let k = params.n_neighbors;
    Ok((0..query.rows)
        .into_par_iter()
        .map(|q| {
            let mut near = Nearest::new(k);
            grid.search(train, query.row(q), &mut near);
            near.vote(labels)
        })
        .collect())
}

/// Uniform cubic cells over the bounding box of the training rows.
struct Grid {
    dims: usize,
    origin: Vec<f64>,
    side: f64,
    shape: Vec<usize>,
    /// Row indices grouped by cell, ascending within each cell.
    members: Vec<u32>,
    /// `members[starts[c]..starts[c + 1]]` lie in cell `c`.
    starts: Vec<usize>,
}

impl Grid {
    fn build(train: &FeatureMatrix) -> Self {
        let d = train.cols;
        let n = train.rows;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in 0..n {
            for (j, &v) in train.row(i).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let extents: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
        let target = (n as f64 / 2.0).max(1.0);
        let spread: Vec<f64> = extents.iter().copied().filter(|e| *e > 0.0).collect();
        let mut side = if spread.is_empty() {
            1.0
        } else {
            let log_vol: f64 = spread.iter().map(|e| e.ln()).sum();
            ((log_vol - target.ln()) / spread.len() as f64).exp()
        };
        let shape_for = |side: f64| -> Vec<usize> {
            extents
                .iter()
                .map(|e| (e / side).floor() as usize + 1)
                .collect()
        };
        let mut shape = shape_for(side);
        while shape
            .iter()
            .try_fold(1usize, |a, &s| a.checked_mul(s))
            .is_none_or(|c| c > 4 * n + 16)
        {
            side *= 1.5;
            shape = shape_for(side);
        }
        let cells: usize = shape.iter().product();

        let mut grid = Grid {
            dims: d,
            origin: lo,
            side,
            shape,
            members: Vec::new(),
            starts: Vec::new(),
        };
        let keys: Vec<usize> = (0..n).map(|i| grid.cell_of(train.row(i))).collect();
        let mut starts = vec![0usize; cells + 1];
        for &c in &keys {
            starts[c + 1] += 1;
        }
        for c in 0..cells {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut members = vec![0u32; n];
        for (i, &c) in keys.iter().enumerate() {
            members[fill[c]] = i as u32;
            fill[c] += 1;
        }
        grid.members = members;
        grid.starts = starts;
        grid
    }

    fn coord(&self, j: usize, v: f64) -> i64 {
        ((v - self.origin[j]) / self.side).floor() as i64
    }

    fn cell_of(&self, row: &[f64]) -> usize {
        let mut c = 0;
        for (j, &v) in row.iter().enumerate() {
            let x = self.coord(j, v).clamp(0, self.shape[j] as i64 - 1) as usize;
            c = c * self.shape[j] + x;
        }
        c
    }

    /// Visits cells in growing Chebyshev shells around the query's cell until
    /// no unvisited cell can hold a point closer than the current k-th best.
    fn search(&self, train: &FeatureMatrix, q: &[f64], near: &mut Nearest) {
        let d = self.dims;
        let reach = 1i64 << 40;
        let centre: Vec<i64> = (0..d)
            .map(|j| self.coord(j, q[j]).clamp(-reach, reach))
            .collect();
        // first shell that touches the grid
        let first_shell = (0..d)
            .map(|j| {
                (-centre[j])
                    .max(centre[j] - (self.shape[j] as i64 - 1))
                    .max(0)
            })
            .max()
            .unwrap_or(0);
        // shells needed before the whole box has been covered
        let max_shell = (0..d)
            .map(|j| {
                let s = self.shape[j] as i64;
                centre[j].abs().max((centre[j] - (s - 1)).abs())
            })
            .max()
            .unwrap_or(0);
        // absolute cell coordinates of the cell being visited
        let mut offset = vec![0i64; d];
        for r in first_shell..=max_shell {
            self.visit_shell(train, q, &centre, r, 0, false, &mut offset, near);
            // a point in a cell at shell r + 1 or beyond is at least r·side away
            // along some axis
            if let Some(kth) = near.kth() {
                let bound = r as f64 * self.side;
                if kth < bound * bound * (1.0 - 1e-9) {
                    return;
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_shell(
        &self,
        train: &FeatureMatrix,
        q: &[f64],
        centre: &[i64],
        r: i64,
        j: usize,
        on_surface: bool,
        offset: &mut [i64],
        near: &mut Nearest,
    ) {
        if j == self.dims {
            if !on_surface && r > 0 {
                return;
            }
            let mut c = 0usize;
            for (jj, &x) in offset.iter().enumerate() {
                c = c * self.shape[jj] + x as usize;
            }
            for &i in &self.members[self.starts[c]..self.starts[c + 1]] {
                let i = i as usize;
                near.offer(dist2(q, train.row(i)), i);
            }
            return;
        }
        // only cells inside the grid along this axis
        let lo = (centre[j] - r).max(0);
        let hi = (centre[j] + r).min(self.shape[j] as i64 - 1);
        for x in lo..=hi {
            offset[j] = x;
            self.visit_shell(
                train,
                q,
                centre,
                r,
                j + 1,
                on_surface || (x - centre[j]).abs() == r,
                offset,
                near,
            );
        }
    }
}
