//! Post-alarm localization: rigid registration of the CAD mesh onto the
//! suspect part and a per-vertex deviation map.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::geom::{Mat3, Vec3};
use crate::linalg::{symmetric_eigen, DenseMatrix, LinalgError};
use crate::mesh::{deviation_map, Bvh, DeviationMap, TriangleMesh};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFewPairs(usize),
    #[error("source points are collinear; rotation is underdetermined")]
    Collinear,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RigidTransform<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zero() }
    }

    pub fn apply(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    /// `self` after `first`.
    pub fn after(&self, first: &Self) -> Self {
        Self { rotation: self.rotation.mul_mat(&first.rotation), translation: self.apply(&first.translation) }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -rt.mul_vec(&self.translation) }
    }

    pub fn transform_mesh(&self, mesh: &TriangleMesh<T>) -> TriangleMesh<T> {
        mesh.map_vertices(|p| self.apply(p))
    }

    /// Row-major rotation followed by the translation.
    pub fn to_array(&self) -> [T; 12] {
        let r = &self.rotation.0;
        let t = &self.translation;
        [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2], t[0], t[1], t[2]]
    }

    pub fn from_array(a: [T; 12]) -> Self {
        Self {
            rotation: Mat3([[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]]),
            translation: Vec3::new(a[9], a[10], a[11]),
        }
    }
}

/// Matched point pairs `(source, target)` used to seed registration.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet<T> {
    pairs: Vec<(Vec3<T>, Vec3<T>)>,
}

impl<T: Real> CorrespondenceSet<T> {
    pub fn new(pairs: Vec<(Vec3<T>, Vec3<T>)>) -> Result<Self, DiagnosticsError> {
        if pairs.len() < 3 {
            return Err(DiagnosticsError::TooFewPairs(pairs.len()));
        }
        let src: Vec<Vec3<T>> = pairs.iter().map(|p| p.0).collect();
        if collinear(&src) {
            return Err(DiagnosticsError::Collinear);
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(Vec3<T>, Vec3<T>)] {
        &self.pairs
    }

    /// Six reals per line, source xyz then target xyz. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn read<R: BufRead>(r: R) -> Result<Self, DiagnosticsError> {
        let mut pairs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let v: Vec<f64> = s
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| DiagnosticsError::Parse { line: i + 1, msg: format!("{e}") })?;
            if v.len() != 6 {
                return Err(DiagnosticsError::Parse { line: i + 1, msg: format!("expected 6 numbers, found {}", v.len()) });
            }
            let p = |k: usize| Vec3::new(T::of(v[k]), T::of(v[k + 1]), T::of(v[k + 2]));
            pairs.push((p(0), p(3)));
        }
        Self::new(pairs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DiagnosticsError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn centroid<T: Real>(p: &[Vec3<T>]) -> Vec3<T> {
    let mut c = Vec3::zero();
    for q in p {
        c += *q;
    }
    c * (T::one() / T::of_usize(p.len()))
}

fn collinear<T: Real>(p: &[Vec3<T>]) -> bool {
    let c = centroid(p);
    let mut cov = DenseMatrix::zeros(3);
    for q in p {
        let d = *q - c;
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    match symmetric_eigen(&cov) {
        Ok(e) => !(e.values[1] > T::of(1e-12) * e.values[2]),
        Err(_) => true,
    }
}

/// Least-squares rigid transform taking `src[i]` to `dst[i]` (unit
/// quaternion method).
pub fn procrustes<T: Real>(src: &[Vec3<T>], dst: &[Vec3<T>]) -> Result<RigidTransform<T>, DiagnosticsError> {
    procrustes_state(src, dst).map(|x| from_state(&x))
}

/// Pose as a unit quaternion `(w, x, y, z)` followed by the translation.
type State<T> = [T; 7];

fn from_state<T: Real>(x: &State<T>) -> RigidTransform<T> {
    RigidTransform { rotation: quaternion_matrix(x[0], x[1], x[2], x[3]), translation: Vec3::new(x[4], x[5], x[6]) }
}

fn to_state<T: Real>(t: &RigidTransform<T>) -> State<T> {
    let m = &t.rotation.0;
    let half = T::of(0.5);
    let tr = m[0][0] + m[1][1] + m[2][2];
    // largest of the four squared components first, for stability
    let cand = [tr, m[0][0], m[1][1], m[2][2]];
    let big = (0..4).fold(0, |b, i| if cand[i] > cand[b] { i } else { b });
    let q = match big {
        0 => {
            let r = (T::one() + tr).sqrt();
            let f = half / r;
            [half * r, (m[2][1] - m[1][2]) * f, (m[0][2] - m[2][0]) * f, (m[1][0] - m[0][1]) * f]
        }
        1 => {
            let r = (T::one() + m[0][0] - m[1][1] - m[2][2]).sqrt();
            let f = half / r;
            [(m[2][1] - m[1][2]) * f, half * r, (m[0][1] + m[1][0]) * f, (m[0][2] + m[2][0]) * f]
        }
        2 => {
            let r = (T::one() - m[0][0] + m[1][1] - m[2][2]).sqrt();
            let f = half / r;
            [(m[0][2] - m[2][0]) * f, (m[0][1] + m[1][0]) * f, half * r, (m[1][2] + m[2][1]) * f]
        }
        _ => {
            let r = (T::one() - m[0][0] - m[1][1] + m[2][2]).sqrt();
            let f = half / r;
            [(m[1][0] - m[0][1]) * f, (m[0][2] + m[2][0]) * f, (m[1][2] + m[2][1]) * f, half * r]
        }
    };
    let tt = &t.translation;
    [q[0], q[1], q[2], q[3], tt[0], tt[1], tt[2]]
}

fn procrustes_state<T: Real>(src: &[Vec3<T>], dst: &[Vec3<T>]) -> Result<State<T>, DiagnosticsError> {
    assert_eq!(src.len(), dst.len(), "paired point lists");
    let (cs, cd) = (centroid(src), centroid(dst));
    let mut s = [[T::zero(); 3]; 3];
    for (p, q) in src.iter().zip(dst) {
        let (a, b) = (*p - cs, *q - cd);
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += a[i] * b[j];
            }
        }
    }
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = s;
    let n = [
        sxx + syy + szz,
        syz - szy,
        szx - sxz,
        sxy - syx,
        syz - szy,
        sxx - syy - szz,
        sxy + syx,
        szx + sxz,
        szx - sxz,
        sxy + syx,
        -sxx + syy - szz,
        syz + szy,
        sxy - syx,
        szx + sxz,
        syz + szy,
        -sxx - syy + szz,
    ];
    let e = symmetric_eigen(&DenseMatrix::from_row_major(4, n.to_vec())?)?;
    let q = e.vectors.column(3);
    let rotation = quaternion_matrix(q[0], q[1], q[2], q[3]);
    let t = cd - rotation.mul_vec(&cs);
    Ok([q[0], q[1], q[2], q[3], t[0], t[1], t[2]])
}

fn quaternion_matrix<T: Real>(w: T, x: T, y: T, z: T) -> Mat3<T> {
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    let two = T::of(2.0);
    let o = T::one();
    Mat3([
        [o - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), o - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), o - two * (x * x + y * y)],
    ])
}

/// Transform minimizing `sum |R s_i + t - t_i|^2` over the pairs.
pub fn initial_align<T: Real>(corr: &CorrespondenceSet<T>) -> Result<RigidTransform<T>, DiagnosticsError> {
    let (src, dst): (Vec<_>, Vec<_>) = corr.pairs.iter().copied().unzip();
    procrustes(&src, &dst)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IcpOptions {
    pub max_iter: usize,
    /// Stop when successive RMS values differ by less than this times the
    /// target bounding-box diagonal.
    pub tol_factor: f64,
    /// Final RMS above this times the diagonal is reported as a local minimum.
    pub local_minimum_factor: f64,
    /// Drop the worst 5% of matches from each update.
    pub trim: bool,
}

impl Default for IcpOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol_factor: 1e-8, local_minimum_factor: 0.01, trim: false }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult<T> {
    pub transform: RigidTransform<T>,
    /// RMS closest-point distance before each update; the last entry belongs
    /// to `transform`.
    pub rms_history: Vec<T>,
    pub iterations: usize,
    /// The tolerance was met before `max_iter`.
    pub converged: bool,
    /// Final RMS exceeds `local_minimum_factor * bbox_diag`.
    pub local_minimum: bool,
}

impl<T: Real> IcpResult<T> {
    pub fn final_rms(&self) -> T {
        *self.rms_history.last().unwrap()
    }
}

/// Point-to-surface ICP moving `source` onto `target`, starting from `init`.
pub fn icp_register<T: Real>(
    source: &TriangleMesh<T>,
    target: &TriangleMesh<T>,
    init: &RigidTransform<T>,
    opts: &IcpOptions,
) -> Result<IcpResult<T>, DiagnosticsError> {
    let bvh = Bvh::new(target);
    let diag = target.bbox_diag();
    let tol = T::of(opts.tol_factor) * diag;
    let src = source.vertices();
    let eval = |tr: &RigidTransform<T>| -> (Vec<(Vec3<T>, T)>, T) {
        let hits: Vec<(Vec3<T>, T)> = src
            .par_iter()
            .map(|p| {
                let h = bvh.closest_point(&tr.apply(p)).expect("target has faces");
                (h.point, h.dist_sq)
            })
            .collect();
        let rms = (hits.iter().map(|h| h.1).sum::<T>() / T::of_usize(hits.len())).sqrt();
        (hits, rms)
    };
    let mut tr = *init;
    let (mut hits, rms) = eval(&tr);
    let mut hist = vec![rms];
    let mut states = vec![to_state(&tr)];
    let mut converged = rms == T::zero();
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let keep: Vec<usize> = if opts.trim {
            let mut order: Vec<usize> = (0..hits.len()).collect();
            order.sort_by(|&a, &b| hits[a].1.partial_cmp(&hits[b].1).unwrap());
            order.truncate(hits.len() - hits.len() / 20);
            order
        } else {
            (0..hits.len()).collect()
        };
        let s: Vec<Vec3<T>> = keep.iter().map(|&i| src[i]).collect();
        let d: Vec<Vec3<T>> = keep.iter().map(|&i| hits[i].0).collect();
        let mut x = procrustes_state(&s, &d)?;
        let last = states.last().unwrap();
        if (0..4).map(|i| x[i] * last[i]).sum::<T>() < T::zero() {
            (0..4).for_each(|i| x[i] = -x[i]);
        }
        let mut next = from_state(&x);
        let (mut h, mut r) = eval(&next);
        states.push(x);
        if let Some(y) = extrapolate(&states, &hist, r) {
            let cand = from_state(&y);
            let (h2, r2) = eval(&cand);
            if r2 < r {
                next = cand;
                h = h2;
                r = r2;
                *states.last_mut().unwrap() = y;
            }
        }
        let prev = *hist.last().unwrap();
        tr = next;
        hits = h;
        hist.push(r);
        converged = r == T::zero() || (prev - r).abs() < tol;
    }
    let local_minimum = hist.last().is_some_and(|&r| r > T::of(opts.local_minimum_factor) * diag);
    if local_minimum {
        log::warn!("ICP ended at RMS {} (> {} x diagonal); probable local minimum", hist.last().unwrap(), opts.local_minimum_factor);
    }
    Ok(IcpResult { transform: tr, rms_history: hist, iterations: iterations.max(1), converged, local_minimum })
}

/// Extrapolated pose along the recent direction of motion when the last two
/// steps point the same way (within 10 degrees): the zero of the line or the
/// vertex of the parabola through the last three RMS values, capped at 25
/// step lengths.
fn extrapolate<T: Real>(states: &[State<T>], hist: &[T], rms: T) -> Option<State<T>> {
    let n = states.len();
    if n < 3 || hist.len() < 2 {
        return None;
    }
    let diff = |a: &State<T>, b: &State<T>| -> State<T> { std::array::from_fn(|i| a[i] - b[i]) };
    let norm = |v: &State<T>| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let (d1, d0) = (diff(&states[n - 1], &states[n - 2]), diff(&states[n - 2], &states[n - 3]));
    let (l1, l0) = (norm(&d1), norm(&d0));
    if l1 == T::zero() || l0 == T::zero() {
        return None;
    }
    let cos = d1.iter().zip(&d0).map(|(&a, &b)| a * b).sum::<T>() / (l1 * l0);
    if cos < T::of(10f64.to_radians().cos()) {
        return None;
    }
    // arc-length coordinates: v = 0 now, -l1 one step back, -l1 - l0 two back
    let (e0, e1, e2) = (rms, hist[hist.len() - 1], hist[hist.len() - 2]);
    let (v1, v2) = (-l1, -l1 - l0);
    let slope = (e0 - e1) / l1;
    if !(slope < T::zero()) {
        return None;
    }
    let v_lin = -e0 / slope;
    // parabola e = a v^2 + b v + e0 through the three points
    let a = ((e1 - e0) / v1 - (e2 - e0) / v2) / (v1 - v2);
    let b = (e1 - e0) / v1 - a * v1;
    let v_par = if a > T::zero() { -b / (T::of(2.0) * a) } else { T::zero() };
    let v = if v_par > T::zero() && v_par < v_lin { v_par } else { v_lin };
    let v = v.min(T::of(25.0) * l1);
    let mut y: State<T> = std::array::from_fn(|i| states[n - 1][i] + d1[i] * (v / l1));
    let qn = (0..4).map(|i| y[i] * y[i]).sum::<T>().sqrt();
    (0..4).for_each(|i| y[i] /= qn);
    Some(y)
}

/// Deviation of each vertex of the registered CAD mesh from the part surface,
/// with the registered CAD mesh.
pub fn localize<T: Real>(
    cad: &TriangleMesh<T>,
    part: &TriangleMesh<T>,
    transform: &RigidTransform<T>,
) -> (TriangleMesh<T>, DeviationMap<T>) {
    let moved = transform.transform_mesh(cad);
    let dev = deviation_map(&moved, part);
    (moved, dev)
}

pub fn write_transform<T: Real, W: Write>(mut w: W, t: &RigidTransform<T>) -> std::io::Result<()> {
    let a = t.to_array();
    let line: Vec<String> = a.iter().map(|x| format!("{:e}", x.f64())).collect();
    writeln!(w, "{}", line.join(" "))
}

pub fn read_transform<T: Real, R: BufRead>(r: R) -> Result<RigidTransform<T>, DiagnosticsError> {
    let mut vals = Vec::new();
    for (i, line) in r.lines().enumerate() {
        for tok in line?.split_whitespace() {
            let x: f64 = tok.parse().map_err(|e| DiagnosticsError::Parse { line: i + 1, msg: format!("{e}") })?;
            vals.push(T::of(x));
        }
    }
    let a: [T; 12] = vals
        .try_into()
        .map_err(|v: Vec<T>| DiagnosticsError::Parse { line: 1, msg: format!("expected 12 numbers, found {}", v.len()) })?;
    Ok(RigidTransform::from_array(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_of_identity() {
        let m: Mat3<f64> = quaternion_matrix(2.0, 0.0, 0.0, 0.0);
        assert_eq!(m, Mat3::identity());
    }

    #[test]
    fn collinear_sources_rejected() {
        let p = |x: f64| (Vec3::new(x, 2.0 * x, -x), Vec3::new(0.0, x, 0.0));
        assert!(matches!(CorrespondenceSet::new(vec![p(0.0), p(1.0), p(2.5)]), Err(DiagnosticsError::Collinear)));
        assert!(matches!(CorrespondenceSet::new(vec![p(0.0), p(1.0)]), Err(DiagnosticsError::TooFewPairs(2))));
    }

    #[test]
    fn transform_text_round_trip() {
        let t = RigidTransform { rotation: Mat3::rotation(Vec3::new(1.0, 2.0, 3.0), 0.4), translation: Vec3::new(0.1, -0.2, 3.0) };
        let mut buf = Vec::new();
        write_transform(&mut buf, &t).unwrap();
        let back: RigidTransform<f64> = read_transform(&buf[..]).unwrap();
        for (a, b) in t.to_array().iter().zip(back.to_array()) {
            assert!((a - b).abs() < 1e-14);
        }
        let inv = t.inverse().after(&t);
        let p = Vec3::new(0.3, 0.7, -1.1);
        assert!(inv.apply(&p).distance(&p) < 1e-14);
    }

    #[test]
    fn correspondence_file_parsing() {
        let text = "# src tgt\n0 0 0 1 1 1\n1 0 0 2 1 1\n\n0,1,0, 1,2,1\n";
        let c: CorrespondenceSet<f64> = CorrespondenceSet::read(text.as_bytes()).unwrap();
        assert_eq!(c.pairs().len(), 3);
        assert!(matches!(CorrespondenceSet::<f64>::read("1 2 3\n".as_bytes()), Err(DiagnosticsError::Parse { line: 1, .. })));
    }
}
