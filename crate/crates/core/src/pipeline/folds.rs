//! Random train/test image splits.
//!
//! Each fold draws its training images uniformly without replacement,
//! independently of the other folds; the remaining images form its test set.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Ascending image indices.
    pub train: Vec<usize>,
    /// Ascending image indices, disjoint from `train`.
    pub test: Vec<usize>,
}

/// `k` folds over `n_images` images, each training on `train_size` of them.
pub fn make_folds(n_images: usize, k: usize, train_size: usize, seed: u64) -> Result<Vec<Fold>> {
    if k == 0 {
        return Err(Error::InvalidParams("need at least one fold".into()));
    }
    if train_size == 0 {
        return Err(Error::InvalidParams("train_size must be at least 1".into()));
    }
    if train_size >= n_images {
        return Err(Error::InsufficientImages {
            train_size,
            available: n_images,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = (0..k)
        .map(|_| {
            let mut train = sample(&mut rng, n_images, train_size).into_vec();
            train.sort_unstable();
            let test = (0..n_images)
                .filter(|i| train.binary_search(i).is_err())
                .collect();
            Fold { train, test }
        })
        .collect();
    Ok(folds)
}
