//! Choosing how many eigenvalues to monitor: reconstruct the reference mesh
//! from its leading eigenvectors and find the elbow of the distance curve.

use std::io::{self, Write};

use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SelectError {
    #[error("scree curve needs at least 8 points, got {0}")]
    TooFewPoints(usize),
    #[error("scree curve increases at position {0}")]
    NotMonotone(usize),
    #[error("k_values and distances differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("requested k = {k} but only {available} eigenvectors are available")]
    NotEnoughVectors { k: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeCurve {
    pub k_values: Vec<usize>,
    pub distances: Vec<f64>,
    pub selected_k: usize,
}

/// Euclidean Gram-Schmidt (two passes) over the columns in order. A column
/// that is numerically dependent on its predecessors is dropped with a
/// warning.
pub fn orthonormal_basis<T: Real>(columns: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::with_capacity(columns.len());
    for (j, c) in columns.iter().enumerate() {
        let mut w = c.clone();
        let n0 = norm(&w);
        for _ in 0..2 {
            for u in &out {
                let d = dot(u, &w);
                w.iter_mut().zip(u).for_each(|(x, &y)| *x -= d * y);
            }
        }
        let n = norm(&w);
        if n0 == T::zero() || n <= T::of(1e-10) * n0 {
            log::warn!("dropping linearly dependent column {j}");
            continue;
        }
        w.iter_mut().for_each(|x| *x /= n);
        out.push(w);
    }
    out
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `U U^T P0`, the projection of each coordinate column onto `span(U)`. The
/// columns of `u` must be orthonormal.
pub fn reconstruct<T: Real>(p0: &[Vec3<T>], u: &[Vec<T>]) -> Vec<Vec3<T>> {
    let mut out = vec![Vec3::zero(); p0.len()];
    for col in u {
        let c = coefficients(p0, col);
        for (o, &x) in out.iter_mut().zip(col) {
            *o += c * x;
        }
    }
    out
}

fn coefficients<T: Real>(p0: &[Vec3<T>], col: &[T]) -> Vec3<T> {
    let mut c = Vec3::zero();
    for (p, &x) in p0.iter().zip(col) {
        c += *p * x;
    }
    c
}

/// `sqrt(sum_ij (a_ij - b_ij)^2)`.
pub fn frobenius_distance<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> T {
    assert_eq!(a.len(), b.len(), "shape mismatch");
    a.iter().zip(b).map(|(x, y)| (*x - *y).norm_squared()).sum::<T>().sqrt()
}

/// Smallest `k` whose forward drop over the next five curve points is below
/// 2% of the total drop `d_2 - d_min`, clamped to `[2, k_max]`. A curve with
/// no drop selects 2.
pub fn select_k(k_values: &[usize], distances: &[f64], k_max: usize) -> Result<usize, SelectError> {
    if k_values.len() != distances.len() {
        return Err(SelectError::Length(k_values.len(), distances.len()));
    }
    let n = distances.len();
    if n < 8 {
        return Err(SelectError::TooFewPoints(n));
    }
    let top = distances.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let slack = 1e-9 * top;
    if let Some(i) = (1..n).find(|&i| distances[i] > distances[i - 1] + slack) {
        return Err(SelectError::NotMonotone(i));
    }
    let k_max = k_max.max(2);
    let start = k_values.iter().position(|&k| k >= 2).unwrap_or(0);
    let d_min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let total = distances[start] - d_min;
    if !(total > 0.0) {
        return Ok(2);
    }
    for i in start..n {
        let k = k_values[i];
        if k > k_max {
            break;
        }
        let ahead = distances[(i + 5).min(n - 1)];
        if distances[i] - ahead < 0.02 * total {
            return Ok(k.max(2));
        }
    }
    Ok(k_max)
}

/// Distances `|P_k - P0|_F` for each `k` in `k_values` (ascending, 1-based
/// counts of leading eigenvectors) and the selected elbow.
pub fn scree_curve<T: Real>(
    p0: &[Vec3<T>],
    eigenvectors: &[Vec<T>],
    k_values: &[usize],
) -> Result<ScreeCurve, SelectError> {
    let k_top = k_values.iter().copied().max().unwrap_or(0);
    if k_top > eigenvectors.len() {
        return Err(SelectError::NotEnoughVectors { k: k_top, available: eigenvectors.len() });
    }
    // Gram-Schmidt is prefix-stable, so one pass serves every k
    let u = orthonormal_basis(&eigenvectors[..k_top]);
    let mut dist = Vec::with_capacity(k_values.len());
    let mut acc = vec![Vec3::zero(); p0.len()];
    let mut used = 0;
    for &k in k_values {
        let upto = k.min(u.len());
        while used < upto {
            let c = coefficients(p0, &u[used]);
            for (a, &x) in acc.iter_mut().zip(&u[used]) {
                *a += c * x;
            }
            used += 1;
        }
        dist.push(frobenius_distance(&acc, p0).f64());
    }
    let selected_k = select_k(k_values, &dist, k_top)?;
    Ok(ScreeCurve { k_values: k_values.to_vec(), distances: dist, selected_k })
}

/// Default evaluation points `2..=min(60, n)`.
pub fn default_k_values(n: usize) -> Vec<usize> {
    (2..=n.min(60)).collect()
}

/// CSV with header `k,frobenius_distance,selected`.
pub fn write_scree_csv<W: Write>(mut w: W, curve: &ScreeCurve) -> io::Result<()> {
    writeln!(w, "k,frobenius_distance,selected")?;
    for (&k, &d) in curve.k_values.iter().zip(&curve.distances) {
        writeln!(w, "{k},{d},{}", u8::from(k == curve.selected_k))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_distance() {
        let a = vec![Vec3::new(0.0f64, 0.0, 0.0); 4];
        let mut b = a.clone();
        b[2] = Vec3::new(0.0, 3.0, 0.0);
        assert_eq!(frobenius_distance(&a, &b), 3.0);
        assert_eq!(frobenius_distance(&a, &a), 0.0);
    }

    #[test]
    fn constant_vector_projects_to_mean() {
        let p: Vec<Vec3<f64>> = (0..5).map(|i| Vec3::new(i as f64, (i * i) as f64, 1.0)).collect();
        let u = orthonormal_basis(&[vec![0.3f64; 5]]);
        assert!((u[0][0] - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        let r = reconstruct(&p, &u);
        for q in &r {
            assert!((q.x() - 2.0).abs() < 1e-12 && (q.y() - 6.0).abs() < 1e-12 && (q.z() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_column_dropped() {
        let u = orthonormal_basis(&[vec![1.0f64, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]);
        assert_eq!(u.len(), 2);
    }

    #[test]
    fn flat_curve_selects_two() {
        let k: Vec<usize> = (2..20).collect();
        let d = vec![1.0; k.len()];
        assert_eq!(select_k(&k, &d, 19), Ok(2));
    }

    #[test]
    fn short_or_increasing_curves_rejected() {
        let k: Vec<usize> = (2..6).collect();
        assert_eq!(select_k(&k, &[4.0, 3.0, 2.0, 1.0], 5), Err(SelectError::TooFewPoints(4)));
        let k: Vec<usize> = (2..12).collect();
        let mut d: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        d[4] = 9.0;
        assert_eq!(select_k(&k, &d, 11), Err(SelectError::NotMonotone(4)));
    }
}
