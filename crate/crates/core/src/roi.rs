//! Recursive region-of-interest search: both meshes are split along the nodal
//! line of their second Laplace-Beltrami eigenvector, the four halves are
//! compared by scaled spectra, and the search continues in the pair that is
//! the complement of the best-matching pair.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::fem::{compute_spectrum, scaled_spectrum, BoundaryCondition, EigenOptions, FemError, LbSpectrum};
use crate::mesh::{connected_components, TriangleMesh};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum RoiError {
    #[error("mesh has {0} vertices; at least 50 are needed")]
    TooSmall(usize),
    #[error("mesh has {0} connected components; a connected mesh is required")]
    Disconnected(usize),
    #[error("second eigenvector is numerically constant")]
    ConstantFiedler,
    #[error("nodal partition left the {0} side empty")]
    EmptySide(&'static str),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RoiOptions {
    /// First and last (1-based) eigenvalue index in the distance sums.
    pub index_lo: usize,
    pub index_hi: usize,
    pub max_iter: usize,
    /// Stop once the selected part submesh has fewer vertices than this.
    pub min_vertices: usize,
    /// Sides with fewer vertices end the search at the current level.
    pub min_side: usize,
    pub eigen: EigenOptions,
}

impl Default for RoiOptions {
    fn default() -> Self {
        Self { index_lo: 2, index_hi: 15, max_iter: 3, min_vertices: 2000, min_side: 50, eigen: EigenOptions::default() }
    }
}

impl RoiOptions {
    pub fn validate(&self) -> Result<(), RoiError> {
        if self.index_lo < 2 || self.index_hi <= self.index_lo {
            return Err(RoiError::InvalidOptions(format!("index range [{}, {}]", self.index_lo, self.index_hi)));
        }
        if self.max_iter == 0 {
            return Err(RoiError::InvalidOptions("max_iter must be positive".into()));
        }
        if self.min_side < 3 {
            return Err(RoiError::InvalidOptions("min_side must be at least 3".into()));
        }
        Ok(())
    }
}

/// One mesh split into the faces on the nonnegative and negative sides of a
/// vertex function; `*_parent` maps submesh vertices to the input mesh.
#[derive(Debug, Clone)]
pub struct NodalPartition<T> {
    pub positive: TriangleMesh<T>,
    pub positive_parent: Vec<usize>,
    pub negative: TriangleMesh<T>,
    pub negative_parent: Vec<usize>,
}

/// Assigns each face to the sign held by the majority of its vertices
/// (`phi >= 0` counts as positive).
pub fn partition_by_sign<T: Real>(mesh: &TriangleMesh<T>, phi: &[T]) -> Result<NodalPartition<T>, RoiError> {
    assert_eq!(phi.len(), mesh.num_vertices(), "one value per vertex");
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (i, f) in mesh.faces().iter().enumerate() {
        let plus = f.iter().filter(|&&v| phi[v] >= T::zero()).count();
        if plus >= 2 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    if pos.is_empty() {
        return Err(RoiError::EmptySide("positive"));
    }
    if neg.is_empty() {
        return Err(RoiError::EmptySide("negative"));
    }
    let (positive, positive_parent) = mesh.submesh(&pos);
    let (negative, negative_parent) = mesh.submesh(&neg);
    Ok(NodalPartition { positive, positive_parent, negative, negative_parent })
}

/// The second Neumann eigenvector, or an error if it carries no sign change.
pub fn fiedler_vector<T: Real>(spec: &LbSpectrum<T>) -> Result<Vec<T>, RoiError> {
    let phi = spec.eigenvectors.as_ref().and_then(|v| v.get(1)).ok_or(RoiError::ConstantFiedler)?.clone();
    let lo = phi.iter().copied().fold(T::infinity(), T::min);
    let hi = phi.iter().copied().fold(T::neg_infinity(), T::max);
    let scale = lo.abs().max(hi.abs());
    if !(hi - lo > T::of(1e-12) * scale) {
        return Err(RoiError::ConstantFiedler);
    }
    Ok(phi)
}

/// Splits a connected mesh along the nodal line of its second eigenvector.
pub fn nodal_partition<T: Real>(mesh: &TriangleMesh<T>, eigen: &EigenOptions) -> Result<NodalPartition<T>, RoiError> {
    check_input(mesh)?;
    let spec = compute_spectrum(mesh, 2, BoundaryCondition::Neumann, eigen)?;
    partition_by_sign(mesh, &fiedler_vector(&spec)?)
}

fn check_input<T: Real>(mesh: &TriangleMesh<T>) -> Result<(), RoiError> {
    if mesh.num_vertices() < 50 {
        return Err(RoiError::TooSmall(mesh.num_vertices()));
    }
    let c = connected_components(mesh).len();
    if c != 1 {
        return Err(RoiError::Disconnected(c));
    }
    Ok(())
}

/// `[d1, d2, d3, d4]` for the pairs `(A+,B+)`, `(A+,B-)`, `(A-,B+)`, `(A-,B-)`:
/// the L1 distance between scaled eigenvalues `lo..=hi`.
pub fn correspondence_distances<T: Real>(
    a_pos: &LbSpectrum<T>,
    a_neg: &LbSpectrum<T>,
    b_pos: &LbSpectrum<T>,
    b_neg: &LbSpectrum<T>,
    lo: usize,
    hi: usize,
) -> Result<[f64; 4], FemError> {
    let s = |x: &LbSpectrum<T>| scaled_spectrum(x, lo, hi);
    let (ap, an, bp, bn) = (s(a_pos)?, s(a_neg)?, s(b_pos)?, s(b_neg)?);
    let d = |x: &[T], y: &[T]| x.iter().zip(y).map(|(&u, &v)| (u - v).abs()).sum::<T>().f64();
    Ok([d(&ap, &bp), d(&ap, &bn), d(&an, &bp), d(&an, &bn)])
}

/// Index (0-based) of the smallest distance; values within 1e-12 of each
/// other count as equal and the lower index wins.
pub fn argmin_distance(d: &[f64; 4]) -> usize {
    let mut best = 0;
    for i in 1..4 {
        if d[i] < d[best] - 1e-12 {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    fn symbol(self) -> char {
        match self {
            Side::Positive => '+',
            Side::Negative => '-',
        }
    }
}

/// Pair kept after the distance with 0-based index `argmin` is smallest: the
/// complement of the matched pair, as `(part side, cad side)`.
pub fn complement_pair(argmin: usize) -> (Side, Side) {
    match argmin {
        0 => (Side::Negative, Side::Negative),
        1 => (Side::Negative, Side::Positive),
        2 => (Side::Positive, Side::Negative),
        3 => (Side::Positive, Side::Positive),
        _ => panic!("argmin out of range"),
    }
}

/// Which input a Fiedler vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Part,
    Cad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoiStep {
    /// Vertex counts of `A+`, `A-`, `B+`, `B-` (A the part, B the CAD model).
    pub part_pos: usize,
    pub part_neg: usize,
    pub cad_pos: usize,
    pub cad_neg: usize,
    pub distances: [f64; 4],
    /// 0-based index into `distances`.
    pub argmin: usize,
    pub selected: (Side, Side),
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum StopReason {
    MaxIterations,
    MinVertices,
    /// A side was smaller than `min_side` or had no usable spectrum.
    SideTooSmall,
}

#[derive(Debug, Clone)]
pub struct RoiTrace<T> {
    pub steps: Vec<RoiStep>,
    pub roi: TriangleMesh<T>,
    /// Index into the input part of each ROI vertex.
    pub roi_parent: Vec<usize>,
    pub cad_roi: TriangleMesh<T>,
    pub cad_parent: Vec<usize>,
    pub stop: StopReason,
    /// The best-matching pair is within 1e-6 at every level.
    pub no_asymmetry: bool,
}

struct Level<T> {
    mesh: TriangleMesh<T>,
    parent: Vec<usize>,
    spec: LbSpectrum<T>,
}

impl<T: Real> Level<T> {
    fn side(&self, part: &NodalPartition<T>, s: Side, spec: LbSpectrum<T>) -> Self {
        let (mesh, local) = match s {
            Side::Positive => (part.positive.clone(), &part.positive_parent),
            Side::Negative => (part.negative.clone(), &part.negative_parent),
        };
        Self { mesh, parent: local.iter().map(|&i| self.parent[i]).collect(), spec }
    }
}

/// Runs the search with the solver's own eigenvector signs.
pub fn find_roi<T: Real>(part: &TriangleMesh<T>, cad: &TriangleMesh<T>, opts: &RoiOptions) -> Result<RoiTrace<T>, RoiError> {
    find_roi_oriented(part, cad, opts, |_, _| false)
}

/// Runs the search; `negate(role, iteration)` (iteration 1-based) reverses
/// the sign of the corresponding Fiedler vector before partitioning.
pub fn find_roi_oriented<T: Real>(
    part: &TriangleMesh<T>,
    cad: &TriangleMesh<T>,
    opts: &RoiOptions,
    negate: impl Fn(Role, usize) -> bool,
) -> Result<RoiTrace<T>, RoiError> {
    opts.validate()?;
    check_input(part)?;
    check_input(cad)?;
    let k = opts.index_hi;
    let solve = |m: &TriangleMesh<T>| compute_spectrum(m, k, BoundaryCondition::Neumann, &opts.eigen);
    let (sa, sb) = rayon::join(|| solve(part), || solve(cad));
    let mut a = Level { mesh: part.clone(), parent: (0..part.num_vertices()).collect(), spec: sa? };
    let mut b = Level { mesh: cad.clone(), parent: (0..cad.num_vertices()).collect(), spec: sb? };
    let mut steps = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for iter in 1..=opts.max_iter {
        let oriented = |lv: &Level<T>, role| -> Result<Vec<T>, RoiError> {
            let mut phi = fiedler_vector(&lv.spec)?;
            if negate(role, iter) {
                phi.iter_mut().for_each(|x| *x = -*x);
            }
            Ok(phi)
        };
        let pa = partition_by_sign(&a.mesh, &oriented(&a, Role::Part)?)?;
        let pb = partition_by_sign(&b.mesh, &oriented(&b, Role::Cad)?)?;
        let sides = [&pa.positive, &pa.negative, &pb.positive, &pb.negative];
        if sides.iter().any(|m| m.num_vertices() < opts.min_side.max(k + 1)) {
            log::info!("iteration {iter}: a side has fewer than {} vertices; stopping", opts.min_side);
            stop = StopReason::SideTooSmall;
            break;
        }
        let specs: Vec<Result<LbSpectrum<T>, FemError>> = sides.par_iter().map(|m| solve(m)).collect();
        let mut specs = specs.into_iter().collect::<Result<Vec<_>, _>>()?;
        let distances = match correspondence_distances(&specs[0], &specs[1], &specs[2], &specs[3], opts.index_lo, opts.index_hi) {
            Ok(d) => d,
            Err(FemError::NonPositiveEigenvalue { index, value }) => {
                log::warn!("iteration {iter}: eigenvalue {index} of a side is {value:e}; stopping");
                stop = StopReason::SideTooSmall;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let argmin = argmin_distance(&distances);
        let selected = complement_pair(argmin);
        log::info!("iteration {iter}: d = {distances:?}, keeping part {} / cad {}", selected.0.symbol(), selected.1.symbol());
        steps.push(RoiStep {
            part_pos: pa.positive.num_vertices(),
            part_neg: pa.negative.num_vertices(),
            cad_pos: pb.positive.num_vertices(),
            cad_neg: pb.negative.num_vertices(),
            distances,
            argmin,
            selected,
        });
        let bn = specs.pop().unwrap();
        let bp = specs.pop().unwrap();
        let an = specs.pop().unwrap();
        let ap = specs.pop().unwrap();
        a = match selected.0 {
            Side::Positive => a.side(&pa, Side::Positive, ap),
            Side::Negative => a.side(&pa, Side::Negative, an),
        };
        b = match selected.1 {
            Side::Positive => b.side(&pb, Side::Positive, bp),
            Side::Negative => b.side(&pb, Side::Negative, bn),
        };
        if a.mesh.num_vertices() < opts.min_vertices {
            stop = StopReason::MinVertices;
            break;
        }
    }
    let no_asymmetry = !steps.is_empty() && steps.iter().all(|s| s.distances[s.argmin] < 1e-6);
    Ok(RoiTrace { steps, roi: a.mesh, roi_parent: a.parent, cad_roi: b.mesh, cad_parent: b.parent, stop, no_asymmetry })
}

/// Plain-text table of the search, one row per iteration.
pub fn roi_report<T: Real>(trace: &RoiTrace<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "iter  |A+|  |A-|  |B+|  |B-|  d1  d2  d3  d4  min  selected");
    for (i, st) in trace.steps.iter().enumerate() {
        let d = st.distances;
        let _ = writeln!(
            s,
            "{}  {}  {}  {}  {}  {:.6}  {:.6}  {:.6}  {:.6}  d{}  (A{}, B{})",
            i + 1,
            st.part_pos,
            st.part_neg,
            st.cad_pos,
            st.cad_neg,
            d[0],
            d[1],
            d[2],
            d[3],
            st.argmin + 1,
            st.selected.0.symbol(),
            st.selected.1.symbol()
        );
    }
    let _ = writeln!(s, "roi_vertices  {}", trace.roi.num_vertices());
    let _ = writeln!(s, "roi_faces  {}", trace.roi.num_faces());
    let _ = writeln!(s, "stop  {:?}", trace.stop);
    if trace.no_asymmetry {
        let _ = writeln!(s, "note  no significant asymmetry (minimum distance < 1e-6 at every level)");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_table() {
        assert_eq!(complement_pair(0), (Side::Negative, Side::Negative));
        assert_eq!(complement_pair(1), (Side::Negative, Side::Positive));
        assert_eq!(complement_pair(2), (Side::Positive, Side::Negative));
        assert_eq!(complement_pair(3), (Side::Positive, Side::Positive));
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(argmin_distance(&[0.5, 0.2, 0.2 + 1e-13, 0.2]), 1);
        assert_eq!(argmin_distance(&[0.3, 0.3, 0.3, 0.3]), 0);
        assert_eq!(argmin_distance(&[0.3, 0.3, 0.1, 0.3]), 2);
    }

    #[test]
    fn majority_assignment_with_ties_positive() {
        let v = (0..4).map(|i| crate::Vec3::new(i as f64, (i * i) as f64, 0.0)).collect();
        let m = TriangleMesh::from_parts_unchecked(v, vec![[0, 1, 2], [1, 3, 2]]);
        let p = partition_by_sign(&m, &[0.0, -1.0, 1.0, -2.0]).unwrap();
        assert_eq!(p.positive.num_faces(), 1);
        assert_eq!(p.positive_parent, vec![0, 1, 2]);
        assert_eq!(p.negative_parent, vec![1, 3, 2]);
        assert!(matches!(partition_by_sign(&m, &[1.0; 4]), Err(RoiError::EmptySide("negative"))));
    }
}
