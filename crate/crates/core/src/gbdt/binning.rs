//! Equal-frequency quantile bins.
//!
//! Cuts are actual training values: bin `b` holds the values `v` with
//! `cuts[b - 1] < v <= cuts[b]`. Because only ranks matter, any strictly
//! increasing transform of a column yields the same bin assignment.

/// Above this many rows the cuts are computed from a seeded row sample.
pub const QUANTILE_SAMPLE_CAP: usize = 1 << 20;

/// Sorted, strictly increasing cuts giving at most `max_bin` bins.
pub fn quantile_cuts(values: &mut [f64], max_bin: usize) -> Vec<f64> {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in values.iter() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= max_bin {
        return distinct[..distinct.len().saturating_sub(1)]
            .iter()
            .map(|d| d.0)
            .collect();
    }
    // close a bin once the cumulative count passes the next 1/max_bin quantile
    let mut cuts = Vec::with_capacity(max_bin - 1);
    let mut seen = 0usize;
    let mut closed = 0usize;
    for &(v, count) in &distinct[..distinct.len() - 1] {
        seen += count;
        let reached = seen * max_bin / n;
        if reached > closed {
            cuts.push(v);
            closed = reached;
            if cuts.len() == max_bin - 1 {
                break;
            }
        }
    }
    cuts
}

/// Number of cuts strictly below `v`.
#[inline]
pub fn bin_of(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c < v)
}

pub fn assign_bins(cuts: &[f64], values: impl Iterator<Item = f64>) -> Vec<u16> {
    values.map(|v| bin_of(cuts, v) as u16).collect()
}
