//! Compressed sparse symmetric matrices.
//!
//! Both triangles are stored (CSR) so that a row is also the matching column;
//! the public triplet view exposes only `row <= col`.

use std::io::{self, Write};

use crate::linalg::DenseMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<T>,
}

impl<T: Real> SparseSymmetricMatrix<T> {
    /// Builds a matrix from full-storage triplets; repeated entries are summed
    /// in input order. The caller supplies both `(i, j)` and `(j, i)`.
    pub fn from_full_triplets(n: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            assert!(i < n && j < n, "triplet ({i}, {j}) out of range for dimension {n}");
            if last == Some((i, j)) {
                *val.last_mut().expect("entry") += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col, val }
    }

    /// Builds a matrix from upper-triangle triplets (`row <= col`).
    pub fn from_upper_triplets(n: usize, trip: &[(usize, usize, T)]) -> Self {
        let mut full = Vec::with_capacity(trip.len() * 2);
        for &(i, j, v) in trip {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_full_triplets(n, full)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries including both triangles.
    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// `(column, value)` pairs of row `i`, ascending by column.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(p) => self.val[r.start + p],
            Err(_) => T::zero(),
        }
    }

    /// Entries with `row <= col`, row-major.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz() / 2 + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j >= i {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// `y = M x`.
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = T::zero();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[p] * x[self.col[p]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Sum of every entry of the full matrix.
    pub fn sum_all(&self) -> T {
        self.val.iter().copied().sum()
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, other: &Self, alpha: T) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| (i, j, v)));
            trip.extend(other.row(i).map(|(j, v)| (i, j, alpha * v)));
        }
        Self::from_full_triplets(self.n, trip)
    }

    /// Principal submatrix on the (ascending) index list `keep`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_i, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    trip.push((new_i, map[j], v));
                }
            }
        }
        Self::from_full_triplets(keep.len(), trip)
    }

    /// `P M P^T` where new index `i` is old index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0usize; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut trip = Vec::with_capacity(self.nnz());
        for (new_i, &i) in perm.iter().enumerate() {
            for (j, v) in self.row(i) {
                trip.push((new_i, inv[j], v));
            }
        }
        Self::from_full_triplets(self.n, trip)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Coordinate text form, one `row col value` line per upper-triangle
    /// entry with 1-based indices.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "% symmetric {} {} {}", self.n, self.n, self.nnz().div_ceil(2))?;
        for (i, j, v) in self.upper_triplets() {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v.f64())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseSymmetricMatrix<f64> {
        SparseSymmetricMatrix::from_upper_triplets(3, &[(0, 0, 2.0), (0, 1, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 2, 2.0), (0, 1, -0.5)])
    }

    #[test]
    fn duplicates_summed_and_symmetric() {
        let m = sample();
        assert_eq!(m.get(0, 1), -1.5);
        assert_eq!(m.get(1, 0), -1.5);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![0.5, -0.5, 1.0]);
    }

    #[test]
    fn submatrix_and_permutation() {
        let m = sample();
        let s = m.principal_submatrix(&[1, 2]);
        assert_eq!(s.to_dense().as_slice(), &[2.0, -1.0, -1.0, 2.0]);
        let p = m.permuted(&[2, 0, 1]);
        assert_eq!(p.get(0, 2), m.get(2, 1));
        assert_eq!(p.get(1, 2), m.get(0, 1));
    }

    #[test]
    fn coordinate_export_is_one_based() {
        let mut buf = Vec::new();
        sample().write_coordinate(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "1 1 2e0");
        assert_eq!(lines[2], "1 2 -1.5e0");
        assert_eq!(lines.len(), 6);
    }
}
