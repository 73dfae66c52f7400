//! Linear finite element Laplace-Beltrami operator and its lowest spectrum.

mod assemble;
mod eigen;
mod export;
mod ldl;
mod sparse;
mod spectrum;

use thiserror::Error;

pub use assemble::assemble;
pub use eigen::{factor_shifted, lowest_eigenpairs, EigenOptions, EigenPairs};
pub use export::{read_spectra_csv, write_spectra_csv, SpectraTable};
pub use ldl::{nested_dissection, LdlFactor, PivotFailure};
pub use sparse::SparseSymmetricMatrix;
pub use spectrum::{
    compute_spectrum, scaled_spectrum, solve_all_dense, solve_lowest, BoundaryCondition, LbSpectrum,
};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("degenerate face {0}: zero area")]
    DegenerateFace(usize),
    #[error("factorization of the shifted matrix failed at row {row} (shift {sigma:e})")]
    Factorization { row: usize, sigma: f64 },
    #[error("eigensolver did not converge (basis size {basis}, relative residual {residual:e})")]
    NoConvergence { basis: usize, residual: f64 },
    #[error("requested {k} eigenpairs from a problem of dimension {n}")]
    InvalidK { k: usize, n: usize },
    #[error("Dirichlet condition requested but the boundary is empty")]
    EmptyBoundary,
    #[error("eigenvalue {index} is not positive ({value:e})")]
    NonPositiveEigenvalue { index: usize, value: f64 },
    #[error("index range [{lo}, {hi}] invalid for a spectrum of length {k}")]
    InvalidRange { lo: usize, hi: usize, k: usize },
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("spectra CSV: {0}")]
    Csv(String),
}
