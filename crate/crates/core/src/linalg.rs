//! Compressed sparse row matrices, block assembly and direct solves.
//!
//! Factorizations are delegated to `faer`. A CSR matrix is handed to `faer`
//! as the CSC form of its transpose, so general systems are solved with the
//! transposed LU solve and symmetric systems are used as is.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{Error, Result};
use crate::math::{norm2, sqrt};

/// Row-compressed sparsity structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Pattern {
    /// Couples every row node of an element with every column node of the same element.
    pub fn from_elements(nrows: usize, ncols: usize, stride: usize, row_nodes: &[usize], col_nodes: &[usize]) -> Pattern {
        let n_el = row_nodes.len() / stride;
        let col_stride = col_nodes.len() / n_el.max(1);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for e in 0..n_el {
            let rn = &row_nodes[e * stride..(e + 1) * stride];
            let cn = &col_nodes[e * col_stride..(e + 1) * col_stride];
            for &r in rn {
                rows[r].extend_from_slice(cn);
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(&r);
            row_ptr.push(cols.len());
        }
        Pattern { nrows, ncols, row_ptr, cols }
    }

    /// Position of `(row, col)` in the value array.
    #[inline]
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[row], self.row_ptr[row + 1]);
        self.cols[a..b].binary_search(&col).ok().map(|k| a + k)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

/// CSR matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros_with_pattern(p: &Pattern) -> SparseMatrix {
        SparseMatrix {
            nrows: p.nrows,
            ncols: p.ncols,
            row_ptr: p.row_ptr.clone(),
            cols: p.cols.clone(),
            values: vec![0.0; p.nnz()],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros are kept so the pattern depends only on the triplet positions.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> SparseMatrix {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { nrows, ncols, row_ptr, cols, values }
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix { nrows: n, ncols: n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> Pattern {
        Pattern { nrows: self.nrows, ncols: self.ncols, row_ptr: self.row_ptr.clone(), cols: self.cols.clone() }
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols && self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.values[k])))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[a..b].binary_search(&c) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.values[k] * x[self.cols[k]]).sum())
            .collect()
    }

    /// `y = A^T x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[k]] += self.values[k] * x[r];
            }
        }
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::math::dot(x, &self.matvec(y))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            count[c + 1] += 1;
        }
        for i in 0..self.ncols {
            count[i + 1] += count[i];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut cols = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                cols[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        SparseMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, cols, values }
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Linear combination `sum_k a_k M_k` of equally sized matrices.
    pub fn lin_comb(terms: &[(f64, &SparseMatrix)]) -> SparseMatrix {
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        if terms.iter().all(|(_, m)| m.same_pattern(terms[0].1)) {
            let mut out = terms[0].1.scaled(terms[0].0);
            for (a, m) in &terms[1..] {
                for (o, v) in out.values.iter_mut().zip(&m.values) {
                    *o += a * v;
                }
            }
            return out;
        }
        let mut t = Vec::new();
        for (a, m) in terms {
            assert!(m.nrows == nrows && m.ncols == ncols, "lin_comb size mismatch");
            t.extend(m.triplets().map(|(r, c, v)| (r, c, a * v)));
        }
        SparseMatrix::from_triplets(nrows, ncols, t)
    }

    /// Removes rows and columns of constrained dofs and puts 1 on their diagonal.
    pub fn with_dirichlet(&self, fixed: &[bool]) -> SparseMatrix {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(fixed.len(), self.nrows);
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut cols = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for r in 0..self.nrows {
            if fixed[r] {
                cols.push(r);
                values.push(1.0);
            } else {
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    let c = self.cols[k];
                    if !fixed[c] {
                        cols.push(c);
                        values.push(self.values[k]);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, cols, values }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] += v;
        }
        d
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        norm2(&self.values)
    }
}

/// Places matrices in a block grid; `None` blocks are zero.
///
/// `border` appends one extra row and column: `(column, row)` vectors over the
/// assembled unknowns with a zero corner, used for scalar Lagrange multipliers.
pub fn assemble_block(
    blocks: &[Vec<Option<&SparseMatrix>>],
    row_sizes: &[usize],
    col_sizes: &[usize],
    border: Option<(&[f64], &[f64])>,
) -> SparseMatrix {
    let n_r: usize = row_sizes.iter().sum();
    let n_c: usize = col_sizes.iter().sum();
    let extra = usize::from(border.is_some());
    let (nrows, ncols) = (n_r + extra, n_c + extra);
    let col_off: Vec<usize> = col_sizes.iter().scan(0, |s, &n| {
        let o = *s;
        *s += n;
        Some(o)
    }).collect();
    let mut row_ptr = Vec::with_capacity(nrows + 1);
    let mut cols = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for (bi, &nr) in row_sizes.iter().enumerate() {
        for r in 0..nr {
            for (bj, blk) in blocks[bi].iter().enumerate() {
                if let Some(m) = blk {
                    debug_assert!(m.nrows == nr && m.ncols == col_sizes[bj]);
                    for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                        cols.push(col_off[bj] + m.cols[k]);
                        values.push(m.values[k]);
                    }
                }
            }
            if let Some((col, _)) = border {
                let gr = row_ptr.len() - 1;
                if col[gr] != 0.0 {
                    cols.push(n_c);
                    values.push(col[gr]);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    if let Some((_, row)) = border {
        for (c, &v) in row.iter().enumerate() {
            if v != 0.0 {
                cols.push(c);
                values.push(v);
            }
        }
        row_ptr.push(cols.len());
    }
    SparseMatrix { nrows, ncols, row_ptr, cols, values }
}

/// Structure known about a system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    General,
    /// Symmetric positive definite: solved by Cholesky.
    Spd,
}

/// Outcome of a checked solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    /// Iterative refinement sweeps after the first direct solve.
    pub refinements: usize,
    /// Final relative residual `||b - A x|| / ||b||`.
    pub residual: f64,
    pub wall_time: Duration,
}

/// Symbolic analysis reusable across matrices with the same pattern.
#[derive(Debug, Clone)]
pub enum Symbolic {
    Lu(SymbolicLu<usize>),
    Llt(SymbolicLlt<usize>),
}

enum Numeric {
    Lu(Lu<usize, f64>),
    Llt(Llt<usize, f64>),
}

/// Factorized matrix with residual-checked solves.
pub struct Factorization {
    matrix: SparseMatrix,
    kind: MatrixKind,
    symbolic: Symbolic,
    numeric: Numeric,
}

fn csc_view(a: &SparseMatrix) -> SparseColMatRef<'_, usize, f64> {
    // CSR(A) read as CSC is A^T
    let sym = SymbolicSparseColMatRef::new_checked(a.ncols, a.nrows, &a.row_ptr, None, &a.cols);
    SparseColMatRef::new(sym, &a.values)
}

impl Factorization {
    pub fn new(a: &SparseMatrix, kind: MatrixKind) -> Result<Factorization> {
        Self::build(a, kind, None)
    }

    /// Reuses `symbolic` when it was computed for a matrix with the same pattern.
    pub fn with_symbolic(a: &SparseMatrix, kind: MatrixKind, symbolic: &Symbolic) -> Result<Factorization> {
        Self::build(a, kind, Some(symbolic))
    }

    fn build(a: &SparseMatrix, kind: MatrixKind, symbolic: Option<&Symbolic>) -> Result<Factorization> {
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch { expected: a.nrows, found: a.ncols });
        }
        let view = csc_view(a);
        let fail = |e: &dyn core::fmt::Debug| Error::FactorizationFailed(format!("{e:?}"));
        let (symbolic, numeric) = match kind {
            MatrixKind::General => {
                let s = match symbolic {
                    Some(Symbolic::Lu(s)) => s.clone(),
                    _ => SymbolicLu::try_new(view.symbolic()).map_err(|e| fail(&e))?,
                };
                let n = Lu::try_new_with_symbolic(s.clone(), view).map_err(|e| fail(&e))?;
                (Symbolic::Lu(s), Numeric::Lu(n))
            }
            MatrixKind::Spd => {
                // the stored lower triangle of A^T is the upper triangle of A
                let s = match symbolic {
                    Some(Symbolic::Llt(s)) => s.clone(),
                    _ => SymbolicLlt::try_new(view.symbolic(), Side::Lower).map_err(|e| fail(&e))?,
                };
                let n = Llt::try_new_with_symbolic(s.clone(), view, Side::Lower).map_err(|e| fail(&e))?;
                (Symbolic::Llt(s), Numeric::Llt(n))
            }
        };
        Ok(Factorization { matrix: a.clone(), kind, symbolic, numeric })
    }

    pub fn symbolic(&self) -> &Symbolic {
        &self.symbolic
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// One application of the factors, no refinement.
    pub fn apply_inverse(&self, x: &mut [f64]) {
        self.raw_solve(x);
    }

    fn raw_solve(&self, x: &mut [f64]) {
        let n = x.len();
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        match &self.numeric {
            Numeric::Lu(lu) => lu.solve_transpose_in_place(rhs),
            Numeric::Llt(llt) => llt.solve_in_place(rhs),
        }
    }

    /// Solves `A x = b` and refines until `||b - A x|| <= tol ||b||`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
        if b.len() != self.matrix.nrows {
            return Err(Error::DimensionMismatch { expected: self.matrix.nrows, found: b.len() });
        }
        let clock = Clock::start();
        let bn = norm2(b);
        if bn == 0.0 {
            return Ok((vec![0.0; b.len()], SolveReport { refinements: 0, residual: 0.0, wall_time: clock.elapsed() }));
        }
        let mut x = b.to_vec();
        self.raw_solve(&mut x);
        let mut res = residual(&self.matrix, &x, b);
        let mut rel = norm2(&res) / bn;
        let mut refinements = 0;
        while !(rel <= tol) && refinements < 4 {
            if !rel.is_finite() {
                break;
            }
            self.raw_solve(&mut res);
            for (xi, d) in x.iter_mut().zip(&res) {
                *xi += d;
            }
            res = residual(&self.matrix, &x, b);
            rel = norm2(&res) / bn;
            refinements += 1;
        }
        if !(rel <= tol) {
            return Err(Error::SolveFailed { residual: rel, tol });
        }
        Ok((x, SolveReport { refinements, residual: rel, wall_time: clock.elapsed() }))
    }
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// Stops when the true relative residual is below `tol`; `refinements` in the report counts iterations.
pub fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    precond: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    if a.nrows != n {
        return Err(Error::DimensionMismatch { expected: a.nrows, found: n });
    }
    let clock = Clock::start();
    let bn = norm2(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, SolveReport { refinements: 0, residual: 0.0, wall_time: clock.elapsed() }));
    }
    let mut iters = 0;
    let mut r = b.to_vec();
    let mut rel = 1.0;
    while iters < max_iter {
        let beta = norm2(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut rot: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        for j in 0..restart {
            let z = precond(&basis[j]);
            let mut v = a.matvec(&z);
            zs.push(z);
            let mut h = vec![0.0; j + 2];
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = crate::math::dot(q, &v);
                    h[i] += c;
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
                }
            }
            h[j + 1] = norm2(&v);
            for (i, &(c, sn)) in rot.iter().enumerate() {
                let (a0, a1) = (h[i], h[i + 1]);
                h[i] = c * a0 + sn * a1;
                h[i + 1] = -sn * a0 + c * a1;
            }
            let den = sqrt(h[j] * h[j] + h[j + 1] * h[j + 1]);
            let (c, sn) = if den == 0.0 { (1.0, 0.0) } else { (h[j] / den, h[j + 1] / den) };
            h[j] = den;
            let hj1 = h[j + 1];
            h[j + 1] = 0.0;
            rot.push((c, sn));
            g.push(-sn * g[j]);
            g[j] *= c;
            hess.push(h);
            iters += 1;
            if hj1 == 0.0 || g[j + 1].abs() / bn <= tol * 0.5 || iters >= max_iter {
                break;
            }
            basis.push(v.iter().map(|vi| vi / hj1).collect());
        }
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for jj in i + 1..k {
                acc -= hess[jj][i] * y[jj];
            }
            y[i] = acc / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.iter_mut().zip(z).for_each(|(xv, zv)| *xv += yi * zv);
        }
        r = residual(a, &x, b);
        rel = norm2(&r) / bn;
        if rel <= tol || !rel.is_finite() {
            break;
        }
    }
    if !(rel <= tol) {
        return Err(Error::SolveFailed { residual: rel, tol });
    }
    Ok((x, SolveReport { refinements: iters, residual: rel, wall_time: clock.elapsed() }))
}

/// One-shot factor-and-solve.
pub fn solve(a: &SparseMatrix, b: &[f64], tol: f64, kind: MatrixKind) -> Result<(Vec<f64>, SolveReport)> {
    Factorization::new(a, kind)?.solve(b, tol)
}

/// Relative residual `||b - A x|| / max(||b||, tiny)`.
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = residual(a, x, b);
    norm2(&r) / norm2(b).max(f64::MIN_POSITIVE)
}

/// Wall clock that reads zero without `std`.
struct Clock {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Clock {
        Clock {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(feature = "std")]
        {
            self.start.elapsed()
        }
        #[cfg(not(feature = "std"))]
        {
            Duration::ZERO
        }
    }
}

/// Scale used for relative comparisons of a vector: its Euclidean norm, at least `floor`.
pub fn scale_of(v: &[f64], floor: f64) -> f64 {
    sqrt(crate::math::dot(v, v)).max(floor)
}
