//! Retrospective (Phase I) changepoint test by permutation of time order.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::ranks::{centered_ranks, substream};
use super::{SpcError, SpectraSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedVariable {
    /// 1-based variable index.
    pub index: usize,
    pub score: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Result {
    pub p_value: f64,
    pub statistic: f64,
    /// First time index (1-based) of the shifted segment.
    pub changepoint: Option<usize>,
    pub flagged: Vec<FlaggedVariable>,
    /// `(tau, T(tau))` for `tau` in `2..=m`.
    pub statistic_trace: Vec<(usize, f64)>,
    pub alpha: f64,
    pub n_perm: usize,
}

/// Per-variable standardized rank-CUSUM `C_j(tau)` for `tau = 2..=m`, in
/// `[tau - 2][j]` layout, over the rows of `s` taken in `order`.
fn cusum(s: &[Vec<f64>], energy: &[f64], order: &[usize]) -> Vec<Vec<f64>> {
    let m = order.len();
    let p = s.len();
    let mut acc = vec![0.0; p];
    let mut out = Vec::with_capacity(m.saturating_sub(1));
    for tau in 2..=m {
        let t = order[tau - 2];
        let n1 = (tau - 1) as f64;
        let scale = n1 * (m as f64 - n1) / (m as f64 * (m as f64 - 1.0));
        let mut row = Vec::with_capacity(p);
        for j in 0..p {
            acc[j] += s[j][t];
            let var = scale * energy[j];
            row.push(if var > 0.0 { acc[j] / var.sqrt() } else { 0.0 });
        }
        out.push(row);
    }
    out
}

fn max_sum(c: &[Vec<f64>]) -> (usize, f64) {
    argmax(c.iter().map(|row| row.iter().map(|x| x * x).sum()))
}

fn max_single(c: &[Vec<f64>]) -> (usize, f64) {
    argmax(c.iter().map(|row| row.iter().fold(0.0f64, |m, x| m.max(x * x))))
}

fn argmax(it: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, t) in it.enumerate() {
        if t > best.1 {
            best = (i, t);
        }
    }
    best
}

/// Share of `all` at or above each entry (ties with a relative slack).
fn upper_tail(all: &[f64]) -> Vec<f64> {
    let mut sorted = all.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = all.len() as f64;
    all.iter()
        .map(|&x| {
            let tie = 1e-12 * x.abs().max(1.0);
            (sorted.len() - sorted.partition_point(|&y| y < x - tie)) as f64 / n
        })
        .collect()
}

/// Permutation test for a single step change anywhere in the series.
pub fn phase1_test(series: &SpectraSeries, n_perm: usize, alpha: f64, seed: u64) -> Result<Phase1Result, SpcError> {
    let (m, p) = (series.m(), series.p());
    if p + 1 >= m {
        return Err(SpcError::InsufficientObservations { m, p });
    }
    if n_perm < 200 {
        return Err(SpcError::InvalidParameter(format!("n_perm = {n_perm} < 200")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SpcError::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    let s: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let col = series.column(j);
            if col.iter().all(|&x| x == col[0]) {
                log::warn!("variable {} is constant; midranks make it inert", j + 1);
            }
            centered_ranks(&col)
        })
        .collect();
    let energy: Vec<f64> = s.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    let identity: Vec<usize> = (0..m).collect();
    let obs = cusum(&s, &energy, &identity);
    let (best_sum, t_obs) = max_sum(&obs);
    let (best_max, u_obs) = max_single(&obs);
    let statistic_trace: Vec<(usize, f64)> =
        obs.iter().enumerate().map(|(i, row)| (i + 2, row.iter().map(|x| x * x).sum())).collect();

    let perms: Vec<(f64, f64, Vec<Vec<f64>>)> = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let mut order = identity.clone();
            order.shuffle(&mut rng);
            let c = cusum(&s, &energy, &order);
            (max_sum(&c).1, max_single(&c).1, c)
        })
        .collect();
    // observed value first; each statistic's tail share is taken over the
    // observed and permuted values together, then the smaller is combined
    let sums: Vec<f64> = std::iter::once(t_obs).chain(perms.iter().map(|x| x.0)).collect();
    let maxes: Vec<f64> = std::iter::once(u_obs).chain(perms.iter().map(|x| x.1)).collect();
    let (ps, pm) = (upper_tail(&sums), upper_tail(&maxes));
    let minp: Vec<f64> = ps.iter().zip(&pm).map(|(a, b)| a.min(*b)).collect();
    let tie = 1e-12;
    let p_value = minp.iter().filter(|&&q| q <= minp[0] + tie).count() as f64 / minp.len() as f64;
    let best = if pm[0] <= ps[0] { best_max } else { best_sum };

    let (changepoint, flagged) = if p_value < alpha {
        let mut flagged = Vec::new();
        for j in 0..p {
            let mut null: Vec<f64> = perms.iter().map(|(_, _, c)| c[best][j] * c[best][j]).collect();
            null.sort_by(f64::total_cmp);
            let threshold = crate::mesh::percentile(&null, 95.0);
            let score = obs[best][j] * obs[best][j];
            if score > threshold {
                flagged.push(FlaggedVariable { index: j + 1, score, threshold });
            }
        }
        (Some(best + 2), flagged)
    } else {
        (None, Vec::new())
    };
    Ok(Phase1Result { p_value, statistic: t_obs.max(0.0), changepoint, flagged, statistic_trace, alpha, n_perm })
}
