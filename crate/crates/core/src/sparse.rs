//! Compressed sparse row matrices and the sparse direct solver.
//!
//! The LU factorization is delegated to `faer`. The symbolic analysis is
//! cached and reused while the sparsity pattern stays the same, which is the
//! case across the Picard iterations on one mesh.

use std::panic::AssertUnwindSafe;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    /// Explicit zeros are kept so that the pattern does not depend on values.
    pub fn build(self) -> CsrMatrix {
        let mut indptr = vec![0usize; self.nrows + 1];
        for &r in &self.rows {
            indptr[r + 1] += 1;
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut next = indptr.clone();
        let mut entries = vec![(0usize, 0.0f64); self.rows.len()];
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut out_ptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(entries.len());
        let mut data = Vec::with_capacity(entries.len());
        out_ptr.push(0);
        for r in 0..self.nrows {
            let row = &mut entries[indptr[r]..indptr[r + 1]];
            // stable: duplicates are summed in insertion order
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(c, v) in row.iter() {
                if c == last {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = c;
                }
            }
            out_ptr.push(indices.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, indptr: out_ptr, indices, data }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Iterates `(col, value)` over row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.data[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        (0..self.nrows).map(|r| y[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                indices[next[c]] = r;
                data[next[c]] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, data }
    }

    /// `self + other` for matrices of equal shape.
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for m in [self, other] {
            for r in 0..m.nrows {
                for (c, v) in m.row(r) {
                    t.push(r, c, v);
                }
            }
        }
        t.build()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

const REFINE_BELOW: f64 = 1e-14;

/// Failure of the direct solve.
#[derive(Debug, Clone)]
pub struct SolveFailure(pub String);

/// Sparse LU solver with a cached symbolic factorization.
#[derive(Default)]
pub struct DirectSolver {
    cached: Option<CachedSymbolic>,
    numeric: NumericLu<usize, f64>,
    threads: usize,
}

struct CachedSymbolic {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl DirectSolver {
    /// Single-threaded solver.
    pub fn new() -> Self {
        Self::with_threads(1)
    }

    /// Allows the factorization to use up to `threads` workers.
    pub fn with_threads(threads: usize) -> Self {
        DirectSolver { cached: None, numeric: NumericLu::new(), threads: threads.max(1) }
    }

    /// Solves `A x = b` and returns `x` with the relative residual
    /// `‖A x − b‖ / ‖b‖` (absolute when `b = 0`).
    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, f64), SolveFailure> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(SolveFailure(format!("system is {}x{} with {} right-hand entries", n, a.ncols(), b.len())));
        }
        if n == 0 {
            return Ok((Vec::new(), 0.0));
        }
        let par = if self.threads > 1 { Par::rayon(self.threads) } else { Par::Seq };

        // CSR of Aᵀ is CSC of A.
        let csc = a.transpose();
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, csc.indptr(), None, csc.indices());
        let reuse = matches!(&self.cached, Some(c) if c.indptr == csc.indptr() && c.indices == csc.indices());
        if !reuse {
            let symbolic = factorize_symbolic_lu(pattern, LuSymbolicParams::default())
                .map_err(|e| SolveFailure(format!("symbolic factorization failed: {e:?}")))?;
            self.cached = Some(CachedSymbolic { indptr: csc.indptr().to_vec(), indices: csc.indices().to_vec(), symbolic });
        }
        let symbolic = &self.cached.as_ref().expect("symbolic factorization cached").symbolic;
        let mat = SparseColMatRef::new(pattern, csc.values());

        let mut scratch = MemBuffer::new(
            symbolic
                .factorize_numeric_lu_scratch::<f64>(par, Default::default())
                .or(symbolic.solve_in_place_scratch::<f64>(1, par)),
        );
        let numeric = &mut self.numeric;
        let stack = &mut scratch;
        // faer panics on an exactly zero pivot instead of returning an error
        let lu = std::panic::catch_unwind(AssertUnwindSafe(move || {
            let numeric = numeric;
            symbolic.factorize_numeric_lu(numeric, mat, par, MemStack::new(stack), Default::default())
        }))
        .map_err(|_| SolveFailure("zero pivot in numeric factorization".into()))?
        .map_err(|e| SolveFailure(format!("numeric factorization failed: {e:?}")))?;
        let mut apply = |v: &mut Vec<f64>| {
            lu.solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(v, n, 1), par, MemStack::new(&mut scratch));
        };

        let mut x = b.to_vec();
        apply(&mut x);
        let bn = norm2(b);
        let scale = if bn > 0.0 { bn } else { 1.0 };
        let mut residual = f64::INFINITY;
        // up to two steps of iterative refinement
        for step in 0..3 {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SolveFailure("factorization produced non-finite values".into()));
            }
            let mut r: Vec<f64> = b.iter().zip(a.matvec(&x)).map(|(bi, ax)| bi - ax).collect();
            residual = norm2(&r) / scale;
            if residual <= REFINE_BELOW || step == 2 {
                break;
            }
            apply(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        Ok((x, residual))
    }
}
