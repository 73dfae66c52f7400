//! Sparse `L D L^T` factorization (up-looking, elimination tree based) with a
//! nested-dissection fill-reducing ordering.

use super::sparse::SparseSymmetricMatrix;
use crate::scalar::Real;

/// Nonpositive or non-finite pivot, reported at the original row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PivotFailure {
    pub row: usize,
}

#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
}

const LEAF: usize = 48;

impl<T: Real> LdlFactor<T> {
    /// Factors a symmetric positive definite matrix.
    pub fn factor(m: &SparseSymmetricMatrix<T>) -> Result<Self, PivotFailure> {
        let n = m.dim();
        let adj: Vec<Vec<usize>> = (0..n).map(|i| m.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
        let perm = nested_dissection(&adj);
        let c = m.permuted(&perm);

        // symbolic: elimination tree and column counts
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (i0, _) in c.row(k) {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![T::zero(); total];
        let mut d = vec![T::zero(); n];

        // numeric
        let mut y = vec![T::zero(); n];
        let mut pattern = vec![0usize; n];
        for f in flag.iter_mut() {
            *f = usize::MAX;
        }
        for l in lnz.iter_mut() {
            *l = 0;
        }
        for k in 0..n {
            y[k] = T::zero();
            let mut top = n;
            flag[k] = k;
            for (i0, v) in c.row(k) {
                if i0 > k {
                    continue;
                }
                let mut i = i0;
                y[i] += v;
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = T::zero();
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = T::zero();
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if !(d[k] > T::zero()) || !d[k].is_finite() {
                return Err(PivotFailure { row: perm[k] });
            }
        }
        Ok(Self { perm, lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Nonzeros in the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.li.len()
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

struct Ordering<'a> {
    adj: &'a [Vec<usize>],
    stamp: Vec<u64>,
    seen: Vec<u64>,
    comp_mark: Vec<u64>,
    level: Vec<usize>,
    clock: u64,
    out: Vec<usize>,
}

/// Fill-reducing ordering by recursive BFS level-set separators. Returns
/// `perm` with new index `i` mapped to old index `perm[i]`.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut o = Ordering { adj, stamp: vec![0; n], seen: vec![0; n], comp_mark: vec![0; n], level: vec![0; n], clock: 0, out: Vec::with_capacity(n) };
    let all: Vec<usize> = (0..n).collect();
    o.dissect(all);
    o.out
}

impl Ordering<'_> {
    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    /// BFS inside the member set `member_id`; returns visit order and fills
    /// `level`.
    fn bfs(&mut self, root: usize, member_id: u64) -> Vec<usize> {
        let visit = self.tick();
        let mut order = vec![root];
        self.seen[root] = visit;
        self.level[root] = 0;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in &self.adj[v] {
                if self.stamp[w] == member_id && self.seen[w] != visit {
                    self.seen[w] = visit;
                    self.level[w] = self.level[v] + 1;
                    order.push(w);
                }
            }
        }
        order
    }

    fn dissect(&mut self, set: Vec<usize>) {
        if set.is_empty() {
            return;
        }
        let id = self.tick();
        for &v in &set {
            self.stamp[v] = id;
        }
        // split into connected pieces first
        let mut pieces: Vec<Vec<usize>> = Vec::new();
        let assigned = self.tick();
        for &v in &set {
            if self.comp_mark[v] == assigned {
                continue;
            }
            let comp = self.bfs(v, id);
            for &w in &comp {
                self.comp_mark[w] = assigned;
            }
            pieces.push(comp);
        }
        if pieces.len() > 1 {
            for p in pieces {
                self.dissect(p);
            }
            return;
        }
        let comp = pieces.pop().unwrap_or_default();
        if comp.len() <= LEAF {
            self.out.extend(comp);
            return;
        }
        // pseudo-peripheral root
        let mut root = comp[0];
        let mut order = self.bfs(root, id);
        let mut ecc = self.level[*order.last().unwrap_or(&root)];
        for _ in 0..4 {
            let far = order.iter().copied().filter(|&v| self.level[v] == ecc).min_by_key(|&v| (self.adj[v].len(), v));
            let Some(far) = far else { break };
            let cand = self.bfs(far, id);
            let e = self.level[*cand.last().unwrap_or(&far)];
            if e <= ecc {
                order = self.bfs(root, id);
                break;
            }
            root = far;
            ecc = e;
            order = cand;
        }
        let h = ecc + 1;
        if h < 3 {
            self.out.extend(order);
            return;
        }
        let mid = h / 2;
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut sep = Vec::new();
        for &v in &order {
            let lv = self.level[v];
            if lv < mid {
                lower.push(v);
            } else if lv > mid {
                upper.push(v);
            } else if self.adj[v].iter().any(|&w| self.stamp[w] == id && self.level[w] == mid + 1) {
                sep.push(v);
            } else {
                lower.push(v);
            }
        }
        self.dissect(lower);
        self.dissect(upper);
        self.out.extend(sep);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_laplacian(nx: usize, ny: usize, shift: f64) -> SparseSymmetricMatrix<f64> {
        let id = |i: usize, j: usize| i * ny + j;
        let mut t = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                t.push((id(i, j), id(i, j), 4.0 + shift));
                if i + 1 < nx {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                }
                if j + 1 < ny {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                }
            }
        }
        SparseSymmetricMatrix::from_upper_triplets(nx * ny, &t)
    }

    #[test]
    fn ordering_is_permutation() {
        let m = grid_laplacian(30, 17, 0.0);
        let adj: Vec<Vec<usize>> = (0..m.dim()).map(|i| m.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
        let mut p = nested_dissection(&adj);
        p.sort_unstable();
        assert_eq!(p, (0..m.dim()).collect::<Vec<_>>());
    }

    #[test]
    fn solves_grid_system() {
        let m = grid_laplacian(25, 21, 0.01);
        let f = LdlFactor::factor(&m).unwrap();
        let x_true: Vec<f64> = (0..m.dim()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let b = m.mul_vec(&x_true);
        let x = f.solve(&b);
        let err = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        // nested dissection keeps fill well below the dense triangle
        assert!(f.factor_nnz() < m.dim() * m.dim() / 10);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let m = SparseSymmetricMatrix::from_upper_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)]);
        assert!(LdlFactor::factor(&m).is_err());
    }
}
