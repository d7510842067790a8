//! Symmetric sparse matrices stored as the lower triangle in CSR form.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    /// Row pointers into `cols`/`vals`, length `n + 1`.
    row_ptr: Vec<usize>,
    /// Column indices `j <= i`, ascending within a row.
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Accumulates `(i, j, v)` contributions; duplicates are summed on finalization.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        TripletBuilder { n, entries: Vec::with_capacity(cap) }
    }

    /// Adds `v` at `(i, j)`; the mirrored position is implied.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.entries.push((r, c, v));
    }

    pub fn build(mut self) -> SparseSymMatrix {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut k = 0;
        while k < self.entries.len() {
            let (r, c, mut v) = self.entries[k];
            k += 1;
            while k < self.entries.len() && self.entries[k].0 == r && self.entries[k].1 == c {
                v += self.entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymMatrix { n: self.n, row_ptr, cols, vals }
    }
}

impl SparseSymMatrix {
    pub fn zeros(n: usize) -> Self {
        SparseSymMatrix { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::new(d.len());
        for (i, &v) in d.iter().enumerate() {
            b.add(i, i, v);
        }
        b.build()
    }

    /// Takes the lower triangle of a dense matrix; errors if it is not symmetric.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return invalid("matrix must be square");
        }
        let n = m.nrows();
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..=i {
                if m[(i, j)] != m[(j, i)] {
                    return invalid(format!("matrix is not symmetric at ({i}, {j})"));
                }
                b.add(i, j, m[(i, j)]);
            }
        }
        Ok(b.build())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of the lower triangle.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of row `i` with column `<= i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// All stored `(i, j, v)` with `j <= i`.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (j, v) = (self.cols[k], self.vals[k]);
                acc += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
            y[i] += acc;
        }
    }

    /// `x^T M y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.matvec(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &SparseSymMatrix, beta: f64) -> Result<SparseSymMatrix> {
        if self.n != other.n {
            return invalid(format!("dimension mismatch: {} vs {}", self.n, other.n));
        }
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz() + other.nnz());
        for (i, j, v) in self.lower_entries() {
            b.add(i, j, alpha * v);
        }
        for (i, j, v) in other.lower_entries() {
            b.add(i, j, beta * v);
        }
        Ok(b.build())
    }

    pub fn scaled(&self, alpha: f64) -> SparseSymMatrix {
        if alpha == 0.0 {
            return SparseSymMatrix::zeros(self.n);
        }
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.lower_entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Symmetric adjacency lists of the off-diagonal pattern.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, j, _) in self.lower_entries() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Principal submatrix on `keep` (indices ascending), renumbered `0..keep.len()`.
    pub fn submatrix(&self, keep: &[usize]) -> SparseSymMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut b = TripletBuilder::new(keep.len());
        for (i, j, v) in self.lower_entries() {
            if map[i] != usize::MAX && map[j] != usize::MAX {
                b.add(map[i], map[j], v);
            }
        }
        b.build()
    }
}
