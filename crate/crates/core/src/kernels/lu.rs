//! Sparse LU for nodal conductance matrices.
//!
//! The matrix is symmetrically permuted by a minimum-degree ordering and
//! factored row by row without further pivoting (`P A Pᵀ = L U`). Nodal
//! matrices of passive networks are symmetric and diagonally dominant, so
//! static pivots are stable and the fill pattern can be fixed once. A pivot
//! below `1e-12 · max|a_ij|` reports [`KernelError::SingularMatrix`].
//!
//! Numeric work is expressed over [`Slots`] with index maps, so the same
//! loop nest runs on owned buffers and on lane-strided arenas.

use std::collections::BTreeSet;

use super::sparse::SparseConductanceMatrix;
use super::{cells, KernelError, Slots};

pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Ordering and fill pattern of the combined `L\U` factor, in permuted
/// indices. Row `i` stores its strictly-lower columns, then the diagonal at
/// `diag[i]`, then the strictly-upper columns, all ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbolic {
    pub n: usize,
    /// `perm[i]` is the original index placed at pivot position `i`.
    pub perm: Vec<usize>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub diag: Vec<usize>,
    /// Factor position receiving each matrix entry (CSR order).
    pub a_map: Vec<usize>,
}

/// Numeric factors sharing a [`Symbolic`] structure.
#[derive(Debug, Clone, PartialEq)]
pub struct LUFactors {
    pub symbolic: Symbolic,
    pub values: Vec<f64>,
}

fn minimum_degree(n: usize, row_ptr: &[usize], col_idx: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for r in 0..n {
        for &c in &col_idx[row_ptr[r]..row_ptr[r + 1]] {
            if c != r {
                adj[r].insert(c);
                adj[c].insert(r);
            }
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut order = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &w in &nbrs {
            queue.remove(&(adj[w].len(), w));
            adj[w].remove(&v);
        }
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &w in &nbrs {
            queue.insert((adj[w].len(), w));
        }
        adj[v].clear();
        order.push(v);
        upper.push(nbrs);
    }
    (order, upper)
}

impl Symbolic {
    pub fn analyze(m: &SparseConductanceMatrix) -> Self {
        let n = m.dimension;
        let (perm, upper) = minimum_degree(n, &m.row_ptr, &m.col_idx);
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut lower: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut upper_perm: Vec<Vec<usize>> = Vec::with_capacity(n);
        for (i, nbrs) in upper.iter().enumerate() {
            let mut u: Vec<usize> = nbrs.iter().map(|&w| inv[w]).collect();
            u.sort_unstable();
            for &j in &u {
                lower[j].push(i);
            }
            upper_perm.push(u);
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            cols.extend_from_slice(&lower[i]);
            diag.push(cols.len());
            cols.push(i);
            cols.extend_from_slice(&upper_perm[i]);
            row_ptr.push(cols.len());
        }
        let mut a_map = Vec::with_capacity(m.nnz());
        for r in 0..n {
            let i = inv[r];
            let row = &cols[row_ptr[i]..row_ptr[i + 1]];
            for &c in &m.col_idx[m.row_ptr[r]..m.row_ptr[r + 1]] {
                let j = inv[c];
                let off = row.binary_search(&j).expect("entry inside fill pattern");
                a_map.push(row_ptr[i] + off);
            }
        }
        Symbolic { n, perm, row_ptr, cols, diag, a_map }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Numeric factorization. `a(e)` and `lu(p)` map matrix entry `e` and
    /// factor position `p` to slot indices; `pos` is scratch of length `n`.
    #[inline]
    pub fn factor_slots<S: Slots + ?Sized>(
        &self,
        s: &S,
        a: impl Fn(usize) -> usize,
        lu: impl Fn(usize) -> usize,
        pos: &mut [usize],
    ) -> Result<(), KernelError> {
        let mut max = 0.0f64;
        for e in 0..self.a_map.len() {
            max = max.max(s.get(a(e)).abs());
        }
        let tolerance = PIVOT_TOLERANCE * max;
        for p in 0..self.nnz() {
            s.set(lu(p), 0.0);
        }
        for (e, &p) in self.a_map.iter().enumerate() {
            s.set(lu(p), s.get(a(e)));
        }
        for i in 0..self.n {
            let (start, d, end) = (self.row_ptr[i], self.diag[i], self.row_ptr[i + 1]);
            for p in start..end {
                pos[self.cols[p]] = p;
            }
            for p in start..d {
                let k = self.cols[p];
                let l = s.get(lu(p)) / s.get(lu(self.diag[k]));
                s.set(lu(p), l);
                for q in self.diag[k] + 1..self.row_ptr[k + 1] {
                    let t = pos[self.cols[q]];
                    s.set(lu(t), s.get(lu(t)) - l * s.get(lu(q)));
                }
            }
            let pivot = s.get(lu(d));
            if !(pivot.abs() >= tolerance) || pivot == 0.0 {
                return Err(KernelError::SingularMatrix { row: self.perm[i], pivot, tolerance });
            }
        }
        Ok(())
    }

    /// Forward and backward substitution. `b(r)` and `x(r)` are indexed by
    /// original row; `y(i)` is scratch indexed by pivot position.
    #[inline]
    pub fn solve_slots<S: Slots + ?Sized>(
        &self,
        s: &S,
        lu: impl Fn(usize) -> usize,
        b: impl Fn(usize) -> f64,
        y: &mut [f64],
        mut x: impl FnMut(usize, f64),
    ) {
        for i in 0..self.n {
            let mut acc = b(self.perm[i]);
            for p in self.row_ptr[i]..self.diag[i] {
                acc -= s.get(lu(p)) * y[self.cols[p]];
            }
            y[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = y[i];
            for q in self.diag[i] + 1..self.row_ptr[i + 1] {
                acc -= s.get(lu(q)) * y[self.cols[q]];
            }
            y[i] = acc / s.get(lu(self.diag[i]));
        }
        for i in 0..self.n {
            x(self.perm[i], y[i]);
        }
    }
}

impl LUFactors {
    pub fn dimension(&self) -> usize {
        self.symbolic.n
    }

    /// Refactors in place with new values on the same pattern.
    pub fn refactor(&mut self, values: &[f64]) -> Result<(), KernelError> {
        let na = values.len();
        let mut buf = Vec::with_capacity(na + self.symbolic.nnz());
        buf.extend_from_slice(values);
        buf.resize(na + self.symbolic.nnz(), 0.0);
        let mut pos = vec![0; self.symbolic.n];
        let r = self.symbolic.factor_slots(cells(&mut buf), |e| e, |p| na + p, &mut pos);
        self.values = buf.split_off(na);
        r
    }

    /// Dense `L` and `U` in permuted indices, for inspection.
    pub fn dense_factors(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.symbolic.n;
        let mut l = vec![vec![0.0; n]; n];
        let mut u = vec![vec![0.0; n]; n];
        for i in 0..n {
            l[i][i] = 1.0;
            for p in self.symbolic.row_ptr[i]..self.symbolic.row_ptr[i + 1] {
                let j = self.symbolic.cols[p];
                if j < i {
                    l[i][j] = self.values[p];
                } else {
                    u[i][j] = self.values[p];
                }
            }
        }
        (l, u)
    }
}

pub fn factorize(matrix: &SparseConductanceMatrix) -> Result<LUFactors, KernelError> {
    let symbolic = Symbolic::analyze(matrix);
    let mut f = LUFactors { values: Vec::new(), symbolic };
    f.refactor(&matrix.values)?;
    Ok(f)
}

pub fn forward_backward_solve(f: &LUFactors, injections: &[f64]) -> Result<Vec<f64>, KernelError> {
    let n = f.symbolic.n;
    if injections.len() != n {
        return Err(KernelError::DimensionMismatch { expected: n, found: injections.len() });
    }
    let mut lu = f.values.clone();
    let mut y = vec![0.0; n];
    let mut v = vec![0.0; n];
    f.symbolic.solve_slots(cells(&mut lu), |p| p, |r| injections[r], &mut y, |r, val| v[r] = val);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr(dense: &[Vec<f64>]) -> SparseConductanceMatrix {
        let n = dense.len();
        let mut m = SparseConductanceMatrix {
            dimension: n,
            row_ptr: vec![0],
            col_idx: vec![],
            values: vec![],
        };
        for row in dense {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.col_idx.push(c);
                    m.values.push(v);
                }
            }
            m.row_ptr.push(m.col_idx.len());
        }
        m
    }

    #[test]
    fn scalar() {
        let f = factorize(&csr(&[vec![2.0]])).unwrap();
        assert_eq!(f.dense_factors(), (vec![vec![1.0]], vec![vec![2.0]]));
    }

    #[test]
    fn two_by_two_solve_and_reconstruct() {
        let a = vec![vec![0.5, -0.5], vec![-0.5, 1.5]];
        let f = factorize(&csr(&a)).unwrap();
        assert_eq!(forward_backward_solve(&f, &[1.0, 0.0]).unwrap(), vec![3.0, 1.0]);
        assert_eq!(forward_backward_solve(&f, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let (l, u) = f.dense_factors();
        let p = &f.symbolic.perm;
        for i in 0..2 {
            for j in 0..2 {
                let lu: f64 = (0..2).map(|k| l[i][k] * u[k][j]).sum();
                assert!((lu - a[p[i]][p[j]]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn disconnected_islands_are_singular() {
        // two ungrounded inductor pairs: rows sum to zero
        let g = 0.25;
        let a = vec![
            vec![g, -g, 0.0, 0.0],
            vec![-g, g, 0.0, 0.0],
            vec![0.0, 0.0, g, -g],
            vec![0.0, 0.0, -g, g],
        ];
        assert!(matches!(factorize(&csr(&a)), Err(KernelError::SingularMatrix { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let f = factorize(&csr(&[vec![2.0]])).unwrap();
        assert!(matches!(
            forward_backward_solve(&f, &[1.0, 2.0]),
            Err(KernelError::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn fill_in_on_a_cycle() {
        // ring of 4 nodes plus ground ties: elimination creates fill
        let mut a = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            let j = (i + 1) % 4;
            a[i][i] += 2.0;
            a[j][j] += 1.0;
            a[i][j] -= 1.0;
            a[j][i] -= 1.0;
        }
        let f = factorize(&csr(&a)).unwrap();
        assert!(f.symbolic.nnz() > 12);
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = forward_backward_solve(&f, &b).unwrap();
        for i in 0..4 {
            let r: f64 = (0..4).map(|j| a[i][j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
    }
}
