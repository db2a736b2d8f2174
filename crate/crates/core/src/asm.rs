//! Auto Spot Mask: thin-shell sigma clipping around the beam center.
//!
//! For every radial shell the intensities above the `F(ε) = 100·erf(ε/√2)`
//! percentile are dropped before estimating σ, the median is taken over the
//! whole shell, and a pixel is masked when `(x - median) / σ > ε`.
//! Pixels beyond the largest full circle that fits on the detector (or beyond
//! the optional 2θ cap) belong to no shell and are never masked.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PolarMaps;
use crate::imagegrid::{Image, MaskMap};

pub const EPSILON_RANGE: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsmParams {
    pub epsilon: f64,
    /// Radial shell thickness, mm.
    pub shell_width: f64,
    /// Optional 2θ cap in degrees.
    pub max_two_theta: Option<f64>,
}

impl AsmParams {
    pub fn new(epsilon: f64, shell_width: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            shell_width,
            max_two_theta: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_max_two_theta(mut self, max_two_theta: f64) -> Result<Self> {
        self.max_two_theta = Some(max_two_theta);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = EPSILON_RANGE;
        if !(lo..=hi).contains(&self.epsilon) {
            return Err(Error::InvalidParams(format!(
                "epsilon must lie in [{lo}, {hi}], got {}",
                self.epsilon
            )));
        }
        if !(self.shell_width.is_finite() && self.shell_width > 0.0) {
            return Err(Error::InvalidParams(format!(
                "shell width must be positive, got {}",
                self.shell_width
            )));
        }
        if let Some(t) = self.max_two_theta {
            if !(t > 0.0 && t < 90.0) {
                return Err(Error::InvalidParams(format!(
                    "max two-theta must lie in (0, 90), got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Percentile rank `100·erf(ε/√2)`: the normal mass within ±ε σ, in percent.
pub fn percentile_rank(epsilon: f64) -> f64 {
    100.0 * libm::erf(epsilon / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellStats {
    pub percentile_rank: f64,
    pub cut_value: f64,
    pub median: f64,
    pub sigma: f64,
    pub pixel_count: usize,
}

/// Pixel indices grouped by shell, CSR layout. Within a shell indices ascend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShellIndex {
    offsets: Vec<usize>,
    pixels: Vec<u32>,
    excluded: usize,
}

impl ShellIndex {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shell(&self, k: usize) -> &[u32] {
        &self.pixels[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.len()).map(|k| self.shell(k))
    }

    /// Number of pixels assigned to some shell.
    pub fn included(&self) -> usize {
        self.pixels.len()
    }

    /// Number of pixels outside every shell (detector corners, beyond the 2θ cap).
    pub fn excluded(&self) -> usize {
        self.excluded
    }
}

/// Largest radius (mm) covered by shells.
pub fn radius_limit(polar: &PolarMaps, params: &AsmParams) -> f64 {
    let mut limit = polar.max_usable_radius;
    if let Some(t) = params.max_two_theta {
        limit = limit.min(polar.distance * t.to_radians().tan());
    }
    limit
}

/// Assigns each pixel with `radius <= limit` to shell `floor(radius / width)`.
/// The outermost shell is closed at the limit, so a pixel lying exactly on it
/// joins the last shell rather than opening a new one.
pub fn partition_shells(polar: &PolarMaps, params: &AsmParams) -> ShellIndex {
    let limit = radius_limit(polar, params);
    let n_shells = ((limit / params.shell_width).ceil() as usize).max(1);
    let shell_of = |r: f64| -> Option<usize> {
        if r > limit {
            return None;
        }
        Some(((r / params.shell_width) as usize).min(n_shells - 1))
    };

    let mut counts = vec![0usize; n_shells + 1];
    for &r in &polar.radius {
        if let Some(k) = shell_of(r) {
            counts[k + 1] += 1;
        }
    }
    for k in 0..n_shells {
        counts[k + 1] += counts[k];
    }
    let offsets = counts;
    let mut fill = offsets.clone();
    let mut pixels = vec![0u32; offsets[n_shells]];
    let mut excluded = 0;
    for (i, &r) in polar.radius.iter().enumerate() {
        match shell_of(r) {
            Some(k) => {
                pixels[fill[k]] = i as u32;
                fill[k] += 1;
            }
            None => excluded += 1,
        }
    }
    ShellIndex {
        offsets,
        pixels,
        excluded,
    }
}

/// Linear interpolation between order statistics of an ascending slice.
pub fn percentile_sorted(sorted: &[f64], rank: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (rank / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        return sorted[lo.min(n - 1)];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Shell statistics: percentile cut, full-shell median, clipped population σ.
pub fn shell_statistics(intensities: &[f32], epsilon: f64) -> Result<ShellStats> {
    let mut sorted: Vec<f64> = intensities.iter().map(|&v| v as f64).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    stats_of_sorted(&sorted, epsilon)
}

fn stats_of_sorted(sorted: &[f64], epsilon: f64) -> Result<ShellStats> {
    if sorted.is_empty() {
        return Err(Error::EmptyShell);
    }
    let rank = percentile_rank(epsilon);
    let cut_value = percentile_sorted(sorted, rank);
    let median = percentile_sorted(sorted, 50.0);
    let kept = &sorted[..sorted.partition_point(|&v| v <= cut_value)];
    let m = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / m;
    let var = kept.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m;
    Ok(ShellStats {
        percentile_rank: rank,
        cut_value,
        median,
        sigma: var.sqrt(),
        pixel_count: sorted.len(),
    })
}

/// Masking rule for one pixel; on a zero-σ shell anything above the median is masked.
pub fn is_outlier(value: f64, stats: &ShellStats, epsilon: f64) -> bool {
    if stats.sigma > 0.0 {
        (value - stats.median) / stats.sigma > epsilon
    } else {
        value > stats.median
    }
}

/// Per-shell results of [`auto_spot_mask_detailed`].
#[derive(Debug, Clone)]
pub struct AsmOutcome {
    pub mask: MaskMap,
    /// `None` for shells without pixels.
    pub shells: Vec<Option<ShellStats>>,
}

pub fn auto_spot_mask(img: &Image, polar: &PolarMaps, params: &AsmParams) -> Result<MaskMap> {
    Ok(auto_spot_mask_detailed(img, polar, params)?.mask)
}

pub fn auto_spot_mask_detailed(
    img: &Image,
    polar: &PolarMaps,
    params: &AsmParams,
) -> Result<AsmOutcome> {
    params.validate()?;
    polar.check_dims(img.dims())?;
    let shells = partition_shells(polar, params);
    let pixels = img.pixels();
    let eps = params.epsilon;

    let per_shell: Vec<(Option<ShellStats>, Vec<u32>)> = (0..shells.len())
        .into_par_iter()
        .map(|k| {
            let idx = shells.shell(k);
            if idx.is_empty() {
                return (None, Vec::new());
            }
            let mut sorted: Vec<f64> = idx.iter().map(|&i| pixels[i as usize] as f64).collect();
            sorted.sort_unstable_by(f64::total_cmp);
            let stats = stats_of_sorted(&sorted, eps).expect("non-empty shell");
            let masked = idx
                .iter()
                .copied()
                .filter(|&i| is_outlier(pixels[i as usize] as f64, &stats, eps))
                .collect();
            (Some(stats), masked)
        })
        .collect();

    let (w, h) = img.dims();
    let mut mask = MaskMap::new(w, h)?;
    let mut stats = Vec::with_capacity(per_shell.len());
    for (s, masked) in per_shell {
        for i in masked {
            mask.set_index(i as usize, true);
        }
        stats.push(s);
    }
    Ok(AsmOutcome {
        mask,
        shells: stats,
    })
}
