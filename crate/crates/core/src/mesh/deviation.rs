use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{percentile, Bvh, TriangleMesh};
use crate::scalar::Real;

/// Per-vertex distance from one mesh to the surface of another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationMap<T> {
    pub values: Vec<T>,
}

impl<T: Real> DeviationMap<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn median(&self) -> T {
        percentile(&self.values, 50.0)
    }

    pub fn quantile(&self, q: f64) -> T {
        percentile(&self.values, 100.0 * q)
    }
}

/// Distance from each vertex of `x` to the nearest point on any triangle of `y`.
pub fn deviation_map<T: Real>(x: &TriangleMesh<T>, y: &TriangleMesh<T>) -> DeviationMap<T> {
    let bvh = Bvh::new(y);
    deviation_with_bvh(x, &bvh)
}

pub(crate) fn deviation_with_bvh<T: Real>(x: &TriangleMesh<T>, bvh: &Bvh<T>) -> DeviationMap<T> {
    let values = x
        .vertices()
        .par_iter()
        .map(|p| bvh.closest_point(p).map_or(T::infinity(), |h| h.dist_sq.sqrt()))
        .collect();
    DeviationMap { values }
}
