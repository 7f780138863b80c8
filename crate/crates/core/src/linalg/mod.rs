//! Sparse storage, direct solves and 1-norm condition estimation.
//!
//! Two factorizations are available: faer's sparse LU with partial pivoting
//! on a fill-reducing column ordering, and a symmetric LDL^T on a minimum
//! degree ordering whose pivots are regularized towards prescribed signs
//! (for saddle-point systems). Solutions are polished by iterative
//! refinement against the original matrix.

mod condest;
mod ordering;

pub use condest::{estimate_condition_1norm, ConditionReport};
pub use ordering::nested_dissection;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::SolveCore;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, LdltRef,
    SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::LuError;
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, MatMut, Par, Side};

use crate::{Error, Result};

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, v) in entries {
            if i >= nrows {
                return Err(Error::OutOfRange {
                    what: "matrix row",
                    index: i,
                    len: nrows,
                });
            }
            if j >= ncols {
                return Err(Error::OutOfRange {
                    what: "matrix column",
                    index: j,
                    len: ncols,
                });
            }
            if !v.is_finite() {
                return Err(Error::Solver(format!("non-finite entry at ({i}, {j})")));
            }
        }
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_unstable_by_key(|&k| (entries[k].1, entries[k].0));
        let mut col_ptr = vec![0; ncols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = entries[k];
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(i);
                values.push(v);
                col_ptr[j + 1] += 1;
                last = Some((i, j));
            }
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
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

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.column(j);
        rows.binary_search(&i).map_or(0.0, |k| vals[k])
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * x[j];
            }
        }
        y
    }

    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| {
                let (rows, vals) = self.column(j);
                rows.iter().zip(vals).map(|(&i, &v)| v * x[i]).sum()
            })
            .collect()
    }

    /// Exact 1-norm (largest absolute column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.ncols)
            .map(|j| self.column(j).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }
}

/// LU factors of a square sparse matrix together with the matrix itself.
pub struct Factorization {
    matrix: SparseMatrix,
    backend: Backend,
}

enum Backend {
    Lu(Lu<usize, f64>),
    Ldlt {
        symbolic: SymbolicCholesky<usize>,
        values: Vec<f64>,
        scale: Vec<f64>,
    },
    Lblt(Box<LbltFactors>),
}

struct LbltFactors {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    perm_fwd: Vec<usize>,
    perm_inv: Vec<usize>,
    scale: Vec<f64>,
}

const LU_REFINEMENT_STEPS: usize = 2;
const EQUILIBRATION_SWEEPS: usize = 10;
const LDLT_MAX_REFINEMENT_STEPS: usize = 30;

fn check_square(matrix: &SparseMatrix) -> Result<usize> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::SizeMismatch {
            what: "square matrix columns",
            expected: n,
            got: matrix.ncols(),
        });
    }
    Ok(n)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Factorization {
    /// Sparse LU with partial pivoting.
    pub fn new(matrix: &SparseMatrix) -> Result<Self> {
        let n = check_square(matrix)?;
        let entries: Vec<Triplet<usize, usize, f64>> = matrix
            .triplets()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Singular { pivot: index },
            other => Error::Solver(format!("{other:?}")),
        })?;
        Ok(Self {
            matrix: matrix.clone(),
            backend: Backend::Lu(lu),
        })
    }

    /// Symmetric LDL^T without pivoting. The matrix is first equilibrated
    /// symmetrically. Pivots that are too small, or of the wrong sign when
    /// expected `signs` (`+1` or `-1`) are given, are replaced by
    /// `±delta`; refinement against the exact matrix removes the perturbation.
    pub fn symmetric_indefinite(
        matrix: &SparseMatrix,
        signs: Option<&[i8]>,
        ordering: Option<&[usize]>,
    ) -> Result<Self> {
        let n = check_square(matrix)?;
        if let Some(signs) = signs {
            if signs.len() != n {
                return Err(Error::SizeMismatch {
                    what: "pivot signs",
                    expected: n,
                    got: signs.len(),
                });
            }
            if signs.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::Solver("pivot signs must be +1 or -1".into()));
            }
        }
        if matrix.max_asymmetry() > 1e-12 * matrix.max_abs() {
            return Err(Error::Solver("matrix is not symmetric".into()));
        }
        let scale_vec = symmetric_equilibration(matrix);
        let entries: Vec<Triplet<usize, usize, f64>> = matrix
            .triplets()
            .into_iter()
            .filter(|&(i, j, _)| i >= j)
            .map(|(i, j, v)| Triplet::new(i, j, scale_vec[i] * v * scale_vec[j]))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let inverse = ordering.map(inverse_permutation).transpose()?;
        let symbolic = factorize_symbolic_cholesky(
            a.symbolic(),
            Side::Lower,
            symmetric_ordering(ordering, inverse.as_deref()),
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut mem = MemBuffer::try_new(
            symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
        )
        .map_err(|_| Error::Solver("out of memory".into()))?;
        let regularization = LdltRegularization {
            dynamic_regularization_signs: signs,
            dynamic_regularization_delta: 1e-8,
            dynamic_regularization_epsilon: 1e-13,
        };
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                a.as_ref(),
                Side::Lower,
                regularization,
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(Self {
            matrix: matrix.clone(),
            backend: Backend::Ldlt {
                symbolic,
                values,
                scale: scale_vec,
            },
        })
    }

    /// Symmetric LBL^T with Bunch-Kaufman pivoting inside each supernode,
    /// for symmetric matrices of unknown inertia.
    pub fn symmetric_pivoted(matrix: &SparseMatrix, ordering: Option<&[usize]>) -> Result<Self> {
        let n = check_square(matrix)?;
        if matrix.max_asymmetry() > 1e-12 * matrix.max_abs() {
            return Err(Error::Solver("matrix is not symmetric".into()));
        }
        let scale = symmetric_equilibration(matrix);
        let entries: Vec<Triplet<usize, usize, f64>> = matrix
            .triplets()
            .into_iter()
            .filter(|&(i, j, _)| i >= j)
            .map(|(i, j, v)| Triplet::new(i, j, scale[i] * v * scale[j]))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let inverse = ordering.map(inverse_permutation).transpose()?;
        let symbolic = factorize_symbolic_cholesky(
            a.symbolic(),
            Side::Lower,
            symmetric_ordering(ordering, inverse.as_deref()),
            CholeskySymbolicParams {
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            },
        )
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n];
        let mut perm_fwd = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        let mut mem = MemBuffer::try_new(
            symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default()),
        )
        .map_err(|_| Error::Solver("out of memory".into()))?;
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut perm_fwd,
            &mut perm_inv,
            a.as_ref(),
            Side::Lower,
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        );
        if values.iter().chain(&subdiag).any(|v| !v.is_finite()) {
            return Err(Error::Singular { pivot: 0 });
        }
        let factors = LbltFactors {
            symbolic,
            values,
            subdiag,
            perm_fwd,
            perm_inv,
            scale,
        };
        Ok(Self {
            matrix: matrix.clone(),
            backend: Backend::Lblt(Box::new(factors)),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &mut [f64], transpose: bool) -> Result<()> {
        let n = b.len();
        if n == 0 {
            return Ok(());
        }
        let rhs = MatMut::from_column_major_slice_mut(b, n, 1);
        match &self.backend {
            Backend::Lu(lu) => {
                if transpose {
                    lu.solve_transpose_in_place_with_conj(Conj::No, rhs);
                } else {
                    lu.solve_in_place_with_conj(Conj::No, rhs);
                }
            }
            Backend::Ldlt {
                symbolic,
                values,
                scale,
            } => {
                // A^{-1} = S (S A S)^{-1} S
                let mut rhs = rhs;
                for (i, s) in scale.iter().enumerate() {
                    rhs[(i, 0)] *= s;
                }
                let mut mem =
                    MemBuffer::try_new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq))
                        .map_err(|_| Error::Solver("out of memory".into()))?;
                LdltRef::new(symbolic, values).solve_in_place_with_conj(
                    Conj::No,
                    rhs.as_mut(),
                    Par::Seq,
                    MemStack::new(&mut mem),
                );
                for (i, s) in scale.iter().enumerate() {
                    rhs[(i, 0)] *= s;
                }
            }
            Backend::Lblt(f) => {
                let mut rhs = rhs;
                for (i, s) in f.scale.iter().enumerate() {
                    rhs[(i, 0)] *= s;
                }
                let mut mem =
                    MemBuffer::try_new(f.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq))
                        .map_err(|_| Error::Solver("out of memory".into()))?;
                let n = f.perm_fwd.len();
                let perm = PermRef::new_checked(&f.perm_fwd, &f.perm_inv, n);
                IntranodeLbltRef::new(&f.symbolic, &f.values, &f.subdiag, perm)
                    .solve_in_place_with_conj(
                        Conj::No,
                        rhs.as_mut(),
                        Par::Seq,
                        MemStack::new(&mut mem),
                    );
                for (i, s) in f.scale.iter().enumerate() {
                    rhs[(i, 0)] *= s;
                }
            }
        }
        match b.iter().position(|v| !v.is_finite()) {
            Some(pivot) => Err(Error::Singular { pivot }),
            None => Ok(()),
        }
    }

    fn refined(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::SizeMismatch {
                what: "right-hand side",
                expected: self.dim(),
                got: b.len(),
            });
        }
        let apply = |x: &[f64]| {
            if transpose {
                self.matrix.mul_vec_transpose(x)
            } else {
                self.matrix.mul_vec(x)
            }
        };
        let residual =
            |x: &[f64]| -> Vec<f64> { b.iter().zip(apply(x)).map(|(bi, ai)| bi - ai).collect() };
        let mut x = b.to_vec();
        self.raw_solve(&mut x, transpose)?;
        match self.backend {
            Backend::Lu(_) => {
                for _ in 0..LU_REFINEMENT_STEPS {
                    let mut r = residual(&x);
                    self.raw_solve(&mut r, transpose)?;
                    x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
                }
            }
            Backend::Ldlt { .. } | Backend::Lblt(_) => {
                // iterate while the residual keeps shrinking
                let mut r = residual(&x);
                let mut rnorm = norm2(&r);
                for _ in 0..LDLT_MAX_REFINEMENT_STEPS {
                    if rnorm == 0.0 {
                        break;
                    }
                    self.raw_solve(&mut r, transpose)?;
                    let candidate: Vec<f64> = x.iter().zip(&r).map(|(xi, ri)| xi + ri).collect();
                    let r_new = residual(&candidate);
                    let n_new = norm2(&r_new);
                    if n_new >= rnorm {
                        break;
                    }
                    let stalled = n_new > 0.5 * rnorm;
                    x = candidate;
                    r = r_new;
                    rnorm = n_new;
                    if stalled {
                        break;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.refined(b, false)
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.refined(b, true)
    }
}

fn inverse_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    let n = perm.len();
    let mut inv = vec![usize::MAX; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n || inv[old] != usize::MAX {
            return Err(Error::Solver("ordering is not a permutation".into()));
        }
        inv[old] = new;
    }
    Ok(inv)
}

fn symmetric_ordering<'a>(
    fwd: Option<&'a [usize]>,
    inv: Option<&'a [usize]>,
) -> SymmetricOrdering<'a, usize> {
    match (fwd, inv) {
        (Some(f), Some(i)) => SymmetricOrdering::Custom(PermRef::new_checked(f, i, f.len())),
        _ => SymmetricOrdering::Amd,
    }
}

/// Ruiz scaling: `s` such that every row of `diag(s) A diag(s)` has
/// max-norm close to one.
fn symmetric_equilibration(matrix: &SparseMatrix) -> Vec<f64> {
    let n = matrix.nrows();
    let mut s = vec![1.0; n];
    for _ in 0..EQUILIBRATION_SWEEPS {
        let mut row_max = vec![0.0f64; n];
        for j in 0..n {
            let (rows, vals) = matrix.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                row_max[i] = row_max[i].max((s[i] * v * s[j]).abs());
            }
        }
        let mut converged = true;
        for (si, &m) in s.iter_mut().zip(&row_max) {
            if m > 0.0 {
                *si /= m.sqrt();
                converged &= (m - 1.0).abs() < 1e-2;
            }
        }
        if converged {
            break;
        }
    }
    s
}

/// `||A x - b||_2 / ||b||_2` (absolute residual when `b = 0`).
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

/// Factorizes and solves in one go.
pub fn factorize_and_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Factorization::new(a)?.solve(b)
}
