use serde::{Deserialize, Serialize};

use super::eigen::{lowest_eigenpairs, EigenOptions};
use super::{assemble, FemError, SparseSymmetricMatrix};
use crate::linalg::generalized_symmetric_eigen;
use crate::mesh::{boundary_vertices, TriangleMesh};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    #[default]
    Neumann,
    Dirichlet,
}

/// Lowest eigenvalues (ascending) and optional eigenvectors of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct LbSpectrum<T> {
    pub eigenvalues: Vec<T>,
    /// One `B`-orthonormal vector of length `N` per eigenvalue.
    pub eigenvectors: Option<Vec<Vec<T>>>,
    pub boundary_condition: BoundaryCondition,
    pub mesh_fingerprint: String,
}

impl<T: Real> LbSpectrum<T> {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Threshold `factor * lambda*` where `lambda*` is the first eigenvalue
    /// above `factor * lambda_k` (the first nonzero one; `lambda_2` for a
    /// connected mesh).
    pub fn near_zero_threshold(&self, factor: f64) -> T {
        let f = T::of(factor);
        let top = self.eigenvalues.last().copied().unwrap_or(T::zero()).abs();
        let first_nonzero = self.eigenvalues.iter().copied().find(|&l| l > f * top).unwrap_or(top);
        f * first_nonzero
    }

    /// Number of eigenvalues below [`near_zero_threshold`](Self::near_zero_threshold).
    pub fn near_zero_count(&self, factor: f64) -> usize {
        let eps = self.near_zero_threshold(factor);
        self.eigenvalues.iter().filter(|&&l| l < eps).count()
    }

    pub fn without_vectors(mut self) -> Self {
        self.eigenvectors = None;
        self
    }
}

fn sign_normalize<T: Real>(v: &mut [T]) {
    let mut best = T::zero();
    let mut sign = T::one();
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if x < T::zero() { -T::one() } else { T::one() };
        }
    }
    if sign < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` smallest eigenpairs of `A phi = lambda B phi`. Under Dirichlet the
/// `boundary` rows and columns are eliminated and eigenvectors are zero there.
pub fn solve_lowest<T: Real>(
    a: &SparseSymmetricMatrix<T>,
    b: &SparseSymmetricMatrix<T>,
    k: usize,
    bc: BoundaryCondition,
    boundary: &[usize],
    opts: &EigenOptions,
) -> Result<LbSpectrum<T>, FemError> {
    let n = a.dim();
    let (values, mut vectors) = match bc {
        BoundaryCondition::Neumann => {
            let r = lowest_eigenpairs(a, b, k, opts)?;
            (r.values, r.vectors)
        }
        BoundaryCondition::Dirichlet => {
            if boundary.is_empty() {
                return Err(FemError::EmptyBoundary);
            }
            let mut on = vec![false; n];
            for &i in boundary {
                on[i] = true;
            }
            let keep: Vec<usize> = (0..n).filter(|&i| !on[i]).collect();
            let r = lowest_eigenpairs(&a.principal_submatrix(&keep), &b.principal_submatrix(&keep), k, opts)?;
            let padded = r
                .vectors
                .iter()
                .map(|x| {
                    let mut full = vec![T::zero(); n];
                    for (&i, &xi) in keep.iter().zip(x) {
                        full[i] = xi;
                    }
                    full
                })
                .collect();
            (r.values, padded)
        }
    };
    for v in &mut vectors {
        sign_normalize(v);
    }
    Ok(LbSpectrum { eigenvalues: values, eigenvectors: Some(vectors), boundary_condition: bc, mesh_fingerprint: String::new() })
}

/// Assembles and solves for the lowest `k` eigenpairs of a mesh.
pub fn compute_spectrum<T: Real>(
    mesh: &TriangleMesh<T>,
    k: usize,
    bc: BoundaryCondition,
    opts: &EigenOptions,
) -> Result<LbSpectrum<T>, FemError> {
    let (a, b) = assemble(mesh)?;
    let boundary = match bc {
        BoundaryCondition::Neumann => Vec::new(),
        BoundaryCondition::Dirichlet => boundary_vertices(mesh),
    };
    let mut s = solve_lowest(&a, &b, k, bc, &boundary, opts)?;
    s.mesh_fingerprint = mesh.fingerprint();
    Ok(s)
}

/// Every eigenpair of the (Neumann) pencil by a dense solve; for small meshes.
pub fn solve_all_dense<T: Real>(
    a: &SparseSymmetricMatrix<T>,
    b: &SparseSymmetricMatrix<T>,
) -> Result<LbSpectrum<T>, FemError> {
    let eig = generalized_symmetric_eigen(&a.to_dense(), &b.to_dense())?;
    let n = a.dim();
    let vectors = (0..n)
        .map(|j| {
            let mut v = eig.vectors.column(j);
            sign_normalize(&mut v);
            v
        })
        .collect();
    Ok(LbSpectrum {
        eigenvalues: eig.values,
        eigenvectors: Some(vectors),
        boundary_condition: BoundaryCondition::Neumann,
        mesh_fingerprint: String::new(),
    })
}

/// `lambda_i / mu` for `i` in `lo..=hi` (1-based), `mu` the geometric mean of
/// the same eigenvalues.
pub fn scaled_spectrum<T: Real>(spec: &LbSpectrum<T>, lo: usize, hi: usize) -> Result<Vec<T>, FemError> {
    let k = spec.k();
    if lo < 2 || hi < lo || hi > k {
        return Err(FemError::InvalidRange { lo, hi, k });
    }
    let window = &spec.eigenvalues[lo - 1..hi];
    for (off, &l) in window.iter().enumerate() {
        if !(l > T::zero()) {
            return Err(FemError::NonPositiveEigenvalue { index: lo + off, value: l.f64() });
        }
    }
    let mean_log: T = window.iter().map(|l| l.ln()).sum::<T>() / T::of_usize(window.len());
    let mu = mean_log.exp();
    Ok(window.iter().map(|&l| l / mu).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(values: Vec<f64>) -> LbSpectrum<f64> {
        LbSpectrum { eigenvalues: values, eigenvectors: None, boundary_condition: BoundaryCondition::Neumann, mesh_fingerprint: String::new() }
    }

    #[test]
    fn scaled_equal_values() {
        let s = scaled_spectrum(&spec(vec![0.0, 4.0, 4.0, 4.0]), 2, 4).unwrap();
        assert!(s.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn scaled_rejects_bad_input() {
        assert!(scaled_spectrum(&spec(vec![0.0, 4.0]), 1, 2).is_err());
        assert!(matches!(scaled_spectrum(&spec(vec![0.0, -1.0, 3.0]), 2, 3), Err(FemError::NonPositiveEigenvalue { index: 2, .. })));
    }

    #[test]
    fn near_zero_counts_components() {
        assert_eq!(spec(vec![1e-15, 2e-14, 0.5, 0.5, 1.2]).near_zero_count(1e-6), 2);
        assert_eq!(spec(vec![-1e-14, 2.0, 2.0, 6.0]).near_zero_count(1e-6), 1);
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.3];
        sign_normalize(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }
}
