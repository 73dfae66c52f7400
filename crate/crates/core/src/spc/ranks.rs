//! Rank utilities shared by the charts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Midranks (1-based); tied values share the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            r[k] = avg;
        }
        i = j;
    }
    r
}

/// Signed ranks about the median on the rank scale: `rank - (n + 1) / 2`.
/// The sign is the side of the median and the magnitude orders distance from
/// it, so the result only depends on the ordering of `x`.
pub fn centered_ranks(x: &[f64]) -> Vec<f64> {
    let mid = (x.len() as f64 + 1.0) / 2.0;
    midranks(x).into_iter().map(|r| r - mid).collect()
}

/// `1 + #{r < x} + #{r == x} / 2` against an ascending reference.
pub fn pooled_rank(sorted_ref: &[f64], x: f64) -> f64 {
    let below = sorted_ref.partition_point(|&r| r < x);
    let upto = sorted_ref.partition_point(|&r| r <= x);
    1.0 + below as f64 + (upto - below) as f64 / 2.0
}

/// Independent generator for replicate `i` of a seeded computation.
pub fn substream(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}
