//! Compressed-row sparse matrices and sparse direct solvers backed by `faer`.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::{LdltParams, LdltRegularization};
use faer::prelude::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side, Spec};

use crate::error::{Error, Result};

/// CSR matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Triplet accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Scatter a dense local block, row-major `rows.len() × cols.len()`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], block: &[f64]) {
        debug_assert_eq!(block.len(), rows.len() * cols.len());
        for (a, &r) in rows.iter().enumerate() {
            for (b, &c) in cols.iter().enumerate() {
                self.push(r, c, block[a * cols.len() + b]);
            }
        }
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl SparseMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    /// Position of `(r, c)` in the value array, if stored.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (cols, _) = self.row(r);
        cols.binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                y[r] * cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum::<f64>()
            })
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            count[c + 1] += 1;
        }
        for c in 0..self.ncols {
            count[c + 1] += count[c];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = next[c];
                col_idx[k] = r;
                values[k] = v;
                next[c] += 1;
            }
        }
        SparseMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.abs());
        out
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s · other` on the union pattern.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, s * v)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        self.add_scaled(-1.0, &self.transpose()).max_abs()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] += v;
        }
        d
    }

    /// Assemble `[[a, b], [c, d]]` from conforming blocks.
    pub fn block2x2(a: &SparseMatrix, b: &SparseMatrix, c: &SparseMatrix, d: &SparseMatrix) -> SparseMatrix {
        assert_eq!(a.nrows, b.nrows);
        assert_eq!(c.nrows, d.nrows);
        assert_eq!(a.ncols, c.ncols);
        assert_eq!(b.ncols, d.ncols);
        let (n0, m0) = (a.nrows, a.ncols);
        let mut t = a.triplets();
        t.extend(b.triplets().into_iter().map(|(r, col, v)| (r, col + m0, v)));
        t.extend(c.triplets().into_iter().map(|(r, col, v)| (r + n0, col, v)));
        t.extend(d.triplets().into_iter().map(|(r, col, v)| (r + n0, col + m0, v)));
        Self::from_triplets(n0 + c.nrows, m0 + b.ncols, t)
    }

    /// Lower `self` to CSC form: returns `(col_ptr, row_idx, values)`.
    /// Lower triangle in CSC form, which is the upper triangle of the rows.
    fn lower_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut ptr = Vec::with_capacity(self.nrows + 1);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] >= i {
                    idx.push(self.col_idx[k]);
                    val.push(self.values[k]);
                }
            }
            ptr.push(idx.len());
        }
        (ptr, idx, val)
    }

    fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let t = self.transpose();
        (t.row_ptr, t.col_idx, t.values)
    }
}

/// Sparse LU factorization with partial pivoting.
///
/// The symbolic analysis (column ordering and elimination structure) is cached
/// and reused while the sparsity pattern of the factored matrix is unchanged.
#[derive(Default)]
pub struct LuSolver {
    symbolic: Option<(SparseMatrixPattern, SymbolicLu<usize>)>,
    numeric: Option<Lu<usize, f64>>,
}

#[derive(Clone, PartialEq)]
struct SparseMatrixPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl LuSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, a: &SparseMatrix) -> Result<()> {
        if a.nrows() != a.ncols() {
            return Err(Error::LinearSolveFailed(format!(
                "matrix is not square ({} x {})",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let (col_ptr, row_idx, values) = a.to_csc();
        let reuse = matches!(&self.symbolic, Some((p, _)) if p.col_ptr == col_ptr && p.row_idx == row_idx);
        if !reuse {
            let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
            let symbolic = SymbolicLu::try_new(sym)
                .map_err(|e| Error::LinearSolveFailed(format!("symbolic LU: {e:?}")))?;
            self.symbolic = Some((SparseMatrixPattern { n, col_ptr, row_idx }, symbolic));
        }
        let (pattern, symbolic) = self.symbolic.as_ref().unwrap();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &pattern.col_ptr, None, &pattern.row_idx);
        let mat = SparseColMatRef::new(sym, &values);
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat)
            .map_err(|e| Error::LinearSolveFailed(format!("numeric LU: {e:?}")))?;
        self.numeric = Some(lu);
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self
            .numeric
            .as_ref()
            .ok_or_else(|| Error::LinearSolveFailed("solve called before factor".into()))?;
        let mut x = rhs.to_vec();
        let n = x.len();
        lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailed("non-finite solution (singular matrix?)".into()));
        }
        Ok(x)
    }
}

/// Unpivoted sparse `LDLᵀ` for symmetric quasi-definite matrices, i.e.
/// `[[H, B], [Bᵀ, -C]]` with `H` positive definite and `C` positive
/// semidefinite such that the whole matrix is nonsingular. Such matrices
/// admit the factorization for every symmetric ordering. Only the lower
/// triangle is read.
#[derive(Default)]
pub struct LdltSolver {
    symbolic: Option<(SparseMatrixPattern, SymbolicCholesky<usize>)>,
    values: Vec<f64>,
    factored: bool,
}

impl LdltSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, a: &SparseMatrix) -> Result<()> {
        if a.nrows() != a.ncols() {
            return Err(Error::LinearSolveFailed(format!(
                "matrix is not square ({} x {})",
                a.nrows(),
                a.ncols()
            )));
        }
        self.factored = false;
        let n = a.nrows();
        let (col_ptr, row_idx, values) = a.lower_csc();
        let reuse = matches!(&self.symbolic, Some((p, _)) if p.col_ptr == col_ptr && p.row_idx == row_idx);
        if !reuse {
            let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
            let symbolic = factorize_symbolic_cholesky(
                sym,
                Side::Lower,
                SymmetricOrdering::Amd,
                CholeskySymbolicParams::default(),
            )
            .map_err(|e| Error::LinearSolveFailed(format!("symbolic LDLT: {e:?}")))?;
            self.values = vec![0.0; symbolic.len_val()];
            self.symbolic = Some((SparseMatrixPattern { n, col_ptr, row_idx }, symbolic));
        }
        let (pattern, symbolic) = self.symbolic.as_ref().unwrap();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &pattern.col_ptr, None, &pattern.row_idx);
        let mat = SparseColMatRef::new(sym, &values);
        let params: Spec<LdltParams, f64> = Default::default();
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, params));
        symbolic
            .factorize_numeric_ldlt(
                &mut self.values,
                mat,
                Side::Lower,
                LdltRegularization::default(),
                Par::Seq,
                MemStack::new(&mut mem),
                params,
            )
            .map_err(|e| Error::LinearSolveFailed(format!("numeric LDLT: {e:?}")))?;
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let symbolic = match (&self.symbolic, self.factored) {
            (Some((_, s)), true) => s,
            _ => return Err(Error::LinearSolveFailed("solve called before factor".into())),
        };
        let mut x = rhs.to_vec();
        let n = x.len();
        let ldlt = LdltRef::new(symbolic, &self.values);
        let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        ldlt.solve_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(&mut x, n, 1),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailed("non-finite solution (zero pivot?)".into()));
        }
        Ok(x)
    }
}

/// Factor and solve in one call.
pub fn solve(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut lu = LuSolver::new();
    lu.factor(a)?;
    lu.solve(rhs)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 1, 1.0), (1, 2, 2.0), (0, 1, 3.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 2.0, 3.0]), vec![8.0, 5.0]);
        let t = a.transpose();
        assert_eq!(t.get(1, 0), 4.0);
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn lu_solves_indefinite_system() {
        // [[2, 1, 0], [1, 0, 1], [0, 1, -1]] is symmetric indefinite.
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, -1.0)],
        );
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let x = solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn lu_reuses_symbolic_for_same_pattern() {
        let mut lu = LuSolver::new();
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        lu.factor(&a).unwrap();
        let b = a.scaled(2.0);
        lu.factor(&b).unwrap();
        let x = lu.solve(&[2.0, 2.0]).unwrap();
        let r = b.mul_vec(&x);
        assert!((r[0] - 2.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(solve(&a, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn ldlt_solves_quasi_definite_system() {
        // [[4, 1, 1], [1, 3, 0], [1, 0, -2]]: SPD leading block, negative trailing block.
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, 4.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
                (2, 2, -2.0),
            ],
        );
        let x_true = [0.5, -1.0, 2.0];
        let b = a.mul_vec(&x_true);
        let mut ldlt = LdltSolver::new();
        assert!(ldlt.solve(&b).is_err());
        ldlt.factor(&a).unwrap();
        let x = ldlt.solve(&b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
        ldlt.factor(&a.scaled(-3.0)).unwrap();
        let y = ldlt.solve(&b).unwrap();
        for (u, v) in y.iter().zip(x_true) {
            assert!((u + v / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ldlt_matches_lu_on_random_quasi_definite() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let (n1, n2) = (30, 12);
        let n = n1 + n2;
        let mut t = Vec::new();
        for i in 0..n1 {
            t.push((i, i, 10.0));
        }
        for i in n1..n {
            t.push((i, i, -0.5));
        }
        for _ in 0..80 {
            let (i, j) = (rng.gen_range(0..n1), rng.gen_range(0..n));
            if i != j {
                let v: f64 = rng.gen_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut ldlt = LdltSolver::new();
        ldlt.factor(&a).unwrap();
        let x = ldlt.solve(&b).unwrap();
        let y = solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
