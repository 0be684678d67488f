//! Complex sparse matrices and a banded direct solver.
//!
//! FEM matrices on disk meshes have a narrow profile after reverse
//! Cuthill-McKee reordering, so a band LU with partial pivoting is the
//! factorization of record. One factorization serves every right-hand side
//! at a given wavenumber, and solves with the conjugate matrix reuse it.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::{BTreeMap, VecDeque};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Debug, Default)]
pub struct TripletBuilder {
    n: usize,
    rows: Vec<BTreeMap<usize, Complex64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, rows: vec![BTreeMap::new(); n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        *self.rows[i].entry(j).or_insert(ZERO) += v;
    }

    pub fn build(self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in self.rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n: self.n, row_ptr, cols, vals }
    }
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => ZERO,
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).norm())
            .fold(0.0, f64::max)
    }

    pub fn conj(&self) -> CsrMatrix {
        let mut m = self.clone();
        for v in m.vals.iter_mut() {
            *v = v.conj();
        }
        m
    }

    pub fn scaled_add(&self, alpha: Complex64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n != other.n || self.cols != other.cols || self.row_ptr != other.row_ptr {
            return Err(Error::Contract("sparsity patterns differ".into()));
        }
        let mut m = self.clone();
        for (a, b) in m.vals.iter_mut().zip(&other.vals) {
            *a += alpha * b;
        }
        Ok(m)
    }
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited vertex exists");
        let start = pseudo_peripheral(a, start, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(a: &CsrMatrix, start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(a, root);
        let depth = *levels.iter().filter(|&&l| l != usize::MAX).max().unwrap_or(&0);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        root = (0..a.dim())
            .filter(|&i| levels[i] == depth)
            .min_by_key(|&i| degree[i])
            .unwrap_or(root);
    }
    root
}

fn bfs_levels(a: &CsrMatrix, root: usize) -> Vec<usize> {
    let mut levels = vec![usize::MAX; a.dim()];
    levels[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for (j, _) in a.row(v) {
            if levels[j] == usize::MAX {
                levels[j] = levels[v] + 1;
                queue.push_back(j);
            }
        }
    }
    levels
}

/// Band LU factorization with partial pivoting of a permuted sparse matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// column-major band storage, `ld = 2 kl + ku + 1` entries per column
    ab: Vec<Complex64>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut bw = 0;
        for i in 0..n {
            for (j, _) in a.row(i) {
                bw = bw.max(inv[i].abs_diff(inv[j]));
            }
        }
        let (kl, ku) = (bw, bw);
        let ld = 2 * kl + ku + 1;
        let mut ab = vec![ZERO; ld * n];
        let diag = kl + ku;
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                ab[pj * ld + diag + pi - pj] += v;
            }
        }
        // entry (i, c) of the permuted matrix, valid for -(kl + ku) <= i - c <= kl
        let at = |i: usize, c: usize| c * ld + diag + i - c;
        let scale = ab.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut pivots = vec![0; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[at(j, j)].norm();
            for i in j + 1..=last {
                let v = ab[at(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[j] = p;
            if !(best > 1e-14 * scale) {
                return Err(Error::Solver(format!(
                    "matrix is numerically singular at pivot {j} of {n} (|pivot| = {best:e})"
                )));
            }
            let cmax = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    ab.swap(at(j, c), at(p, c));
                }
            }
            let pivot = ab[at(j, j)];
            for i in j + 1..=last {
                ab[at(i, j)] /= pivot;
            }
            for c in j + 1..=cmax {
                let ujc = ab[at(j, c)];
                if ujc == ZERO {
                    continue;
                }
                for i in j + 1..=last {
                    let lij = ab[at(i, j)];
                    ab[at(i, c)] -= lij * ujc;
                }
            }
        }
        Ok(Self { n, kl, ku, ab, pivots, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kl
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let ld = 2 * self.kl + self.ku + 1;
        let diag = self.kl + self.ku;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != ZERO {
                let last = (j + self.kl).min(n - 1);
                let col = &self.ab[j * ld + diag + 1..=j * ld + diag + last - j];
                for (xi, a) in x[j + 1..=last].iter_mut().zip(col) {
                    *xi -= a * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ld;
            x[j] /= self.ab[col + diag];
            let xj = x[j];
            if xj != ZERO {
                let first = j.saturating_sub(self.kl + self.ku);
                let above = &self.ab[col + diag - (j - first)..col + diag];
                for (xi, a) in x[first..j].iter_mut().zip(above) {
                    *xi -= a * xj;
                }
            }
        }
        let mut out = vec![ZERO; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Solves `conj(A) x = b` with the factorization of `A`.
    pub fn solve_conj(&self, b: &[Complex64]) -> Vec<Complex64> {
        let bc: Vec<Complex64> = b.iter().map(|v| v.conj()).collect();
        self.solve(&bc).into_iter().map(|v| v.conj()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_banded(n: usize, seed: u64) -> CsrMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            for j in i.saturating_sub(3)..(i + 4).min(n) {
                b.add(i, j, c(next(), next()));
            }
            // scrambled long-range coupling so RCM has work to do
            let k = (i * 7 + 3) % n;
            b.add(i, k, c(next(), 0.0));
            b.add(k, i, c(next(), 0.0));
        }
        b.build()
    }

    #[test]
    fn solves_random_systems() {
        for seed in 1..4 {
            let a = random_banded(60, seed);
            let lu = BandLu::factor(&a).unwrap();
            let x: Vec<Complex64> = (0..60).map(|i| c(i as f64 * 0.1, 1.0 - i as f64 * 0.03)).collect();
            let b = a.mul_vec(&x);
            let got = lu.solve(&b);
            let err: f64 = got.iter().zip(&x).map(|(g, w)| (g - w).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "err {err}");
            let bc = a.conj().mul_vec(&x);
            let got = lu.solve_conj(&bc);
            let err: f64 = got.iter().zip(&x).map(|(g, w)| (g - w).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "conj err {err}");
        }
    }

    #[test]
    fn needs_pivoting() {
        // zero leading diagonal entry
        let mut b = TripletBuilder::new(3);
        b.add(0, 1, c(1.0, 0.0));
        b.add(1, 0, c(1.0, 0.0));
        b.add(1, 1, c(2.0, 0.0));
        b.add(1, 2, c(1.0, 0.0));
        b.add(2, 1, c(1.0, 0.0));
        b.add(2, 2, c(0.0, 1.0));
        let a = b.build();
        let lu = BandLu::factor(&a).unwrap();
        let x = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.0, 3.0)];
        let got = lu.solve(&a.mul_vec(&x));
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, c(1.0, 0.0));
        b.add(0, 1, c(1.0, 0.0));
        b.add(1, 0, c(1.0, 0.0));
        b.add(1, 1, c(1.0, 0.0));
        assert!(matches!(BandLu::factor(&b.build()), Err(Error::Solver(_))));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = random_banded(40, 9);
        let mut p = rcm_ordering(&a);
        p.sort_unstable();
        assert_eq!(p, (0..40).collect::<Vec<_>>());
    }
}
