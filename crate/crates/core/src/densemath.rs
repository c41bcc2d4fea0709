//! Small dense complex matrices.
//!
//! Everything in this crate lives in dimension at most 9 (the Choi matrix of a
//! qutrit channel), so the matrix type is a plain row-major `Vec` with naive
//! kernels. Hermitian eigenvalues are delegated to `nalgebra`.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use thiserror::Error;

pub use num_complex::Complex64 as Complex;

/// Tolerance for structural checks (unitarity, sparsity, orthonormality).
pub const STRUCTURAL_TOL: f64 = 1e-10;

/// Entries below this modulus are treated as exact zeros when pruning.
pub const ZERO_TOL: f64 = 1e-12;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("entry count {got} does not match shape {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },
    #[error("row {index} is linearly dependent on the preceding rows")]
    LinearlyDependent { index: usize },
    #[error("{rows} rows cannot be completed inside dimension {dim}")]
    TooManyRows { rows: usize, dim: usize },
}

/// Row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self, MathError> {
        if data.len() != rows * cols {
            return Err(MathError::BadLength {
                rows,
                cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MathError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self, MathError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(MathError::DimensionMismatch {
                op: "from_rows",
                left: (rows.len(), cols),
                right: (1, bad.len()),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Real-valued convenience constructor, mostly for tests and fixtures.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, MathError> {
        Self::new(rows, cols, data.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    pub fn diag(entries: &[Complex]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, MathError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MathError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(Complex, Complex) -> Complex,
    ) -> Result<Self, MathError> {
        if self.shape() != other.shape() {
            return Err(MathError::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self, MathError> {
        mat_mul(self, other)
    }

    pub fn trace(&self) -> Complex {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = other.shape();
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        assert!(self.is_square(), "eigenvalues of a non-square matrix");
        let n = self.rows;
        let m = DMatrix::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Zeroes every entry whose modulus is below `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&z| if z.norm() < tol { ZERO } else { z })
                .collect(),
        }
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.norm() < tol)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Complex;

    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, " ")?;
            for z in self.row(i) {
                write!(f, " {:+.6}{:+.6}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix, MathError> {
    if a.cols != b.rows {
        return Err(MathError::DimensionMismatch {
            op: "mat_mul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik == ZERO {
                continue;
            }
            for j in 0..b.cols {
                out.data[i * b.cols + j] += aik * b[(k, j)];
            }
        }
    }
    Ok(out)
}

pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64, MathError> {
    Ok(a.sub(b)?.frobenius_norm())
}

/// `‖U†U − I‖_F`, or infinity for non-square input.
pub fn unitarity_defect(m: &Matrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let gram = mat_mul(&m.adjoint(), m).expect("square");
    gram.sub(&Matrix::identity(m.rows)).expect("same shape").frobenius_norm()
}

/// A square matrix whose unitarity was checked at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(Matrix);

impl UnitaryMatrix {
    pub fn new(m: Matrix) -> Result<Self, MathError> {
        Self::with_tolerance(m, STRUCTURAL_TOL)
    }

    pub fn with_tolerance(m: Matrix, tol: f64) -> Result<Self, MathError> {
        let defect = unitarity_defect(&m);
        if defect > tol {
            return Err(MathError::NotUnitary { defect });
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `self ⊕ I_extra`.
    pub fn direct_sum_identity(&self, extra: usize) -> Self {
        let n = self.dim();
        Self(Matrix::from_fn(n + extra, n + extra, |i, j| {
            if i < n && j < n {
                self.0[(i, j)]
            } else if i == j {
                ONE
            } else {
                ZERO
            }
        }))
    }

    /// Embeds `self` on the index set `slots` of a `total`-dimensional identity.
    pub fn embed(&self, slots: &[usize], total: usize) -> Self {
        assert_eq!(slots.len(), self.dim(), "slot count must match dimension");
        let mut m = Matrix::identity(total);
        for &s in slots {
            m[(s, s)] = ZERO;
        }
        for (a, &i) in slots.iter().enumerate() {
            for (b, &j) in slots.iter().enumerate() {
                m[(i, j)] = self.0[(a, b)];
            }
        }
        Self(m)
    }
}

/// Hermitian inner product `Σ conj(a_i) b_i`.
pub fn vdot(a: &[Complex], b: &[Complex]) -> Complex {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[Complex]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Removes from `v` its components along the orthonormal `basis` (two passes).
fn project_out(v: &mut [Complex], basis: &[Vec<Complex>]) {
    for _ in 0..2 {
        for q in basis {
            let c = vdot(q, v);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

/// Orthonormalises `vectors` in order, dropping those whose residual falls
/// below `rel_tol` times their original norm.
pub fn orthonormalize(vectors: &[Vec<Complex>], rel_tol: f64) -> Vec<Vec<Complex>> {
    let mut basis: Vec<Vec<Complex>> = Vec::new();
    for v in vectors {
        let n0 = vnorm(v);
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        project_out(&mut w, &basis);
        let n = vnorm(&w);
        if n > rel_tol * n0 {
            basis.push(w.iter().map(|z| z / n).collect());
        }
    }
    basis
}

/// Orthonormal basis of the complement of `span(vectors)` in `C^dim`, swept
/// from the canonical basis in index order.
pub fn orthogonal_complement(vectors: &[Vec<Complex>], dim: usize, rel_tol: f64) -> Vec<Vec<Complex>> {
    let mut basis = orthonormalize(vectors, rel_tol);
    let start = basis.len();
    for k in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut e = vec![ZERO; dim];
        e[k] = ONE;
        project_out(&mut e, &basis);
        let n = vnorm(&e);
        if n > 1e-8 {
            basis.push(e.iter().map(|z| z / n).collect());
        }
    }
    basis.split_off(start)
}

/// Rotates `v` so its first entry above `ZERO_TOL` is real and positive.
pub fn fix_phase(v: &mut [Complex]) {
    if let Some(z) = v.iter().find(|z| z.norm() > ZERO_TOL).copied() {
        let ph = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Completes orthonormal `rows` to a `dim`×`dim` unitary whose leading rows
/// are the (re-orthonormalised) inputs.
pub fn complete_to_unitary(rows: &[Vec<Complex>], dim: usize) -> Result<UnitaryMatrix, MathError> {
    if rows.len() > dim {
        return Err(MathError::TooManyRows {
            rows: rows.len(),
            dim,
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(MathError::DimensionMismatch {
            op: "complete_to_unitary",
            left: (rows.len(), dim),
            right: (1, bad.len()),
        });
    }
    let mut basis: Vec<Vec<Complex>> = Vec::with_capacity(dim);
    for (index, r) in rows.iter().enumerate() {
        let mut w = r.clone();
        project_out(&mut w, &basis);
        let n = vnorm(&w);
        if n < STRUCTURAL_TOL {
            return Err(MathError::LinearlyDependent { index });
        }
        basis.push(w.iter().map(|z| z / n).collect());
    }
    let rest = orthogonal_complement(&basis, dim, STRUCTURAL_TOL);
    basis.extend(rest);
    UnitaryMatrix::new(Matrix::from_rows(&basis)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, r: usize, k: usize) -> Matrix {
        Matrix::from_fn(r, k, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn naive_product(a: &Matrix, b: &Matrix) -> Vec<Vec<Complex>> {
        let mut out = vec![vec![ZERO; b.cols()]; a.rows()];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = ZERO;
                for k in 0..a.cols() {
                    acc += a[(i, k)] * b[(k, j)];
                }
                *cell = acc;
            }
        }
        out
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 2, 2);
        assert_eq!(mat_mul(&Matrix::identity(2), &x).unwrap(), x);
    }

    #[test]
    fn swap_squares_to_identity() {
        let x = Matrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(mat_mul(&x, &x).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 3);
            let b = random_matrix(&mut rng, 3, 3);
            let fast = mat_mul(&a, &b).unwrap();
            let slow = naive_product(&a, &b);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((fast[(i, j)] - slow[i][j]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn product_rejects_mismatch() {
        let err = mat_mul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, MathError::DimensionMismatch { .. }));
    }

    #[test]
    fn frobenius_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 3, 3);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        let d = frobenius_distance(&Matrix::identity(2), &Matrix::zeros(2, 2)).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        let b = random_matrix(&mut rng, 3, 3);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let z = a[(i, j)] - b[(i, j)];
                acc += z.re * z.re + z.im * z.im;
            }
        }
        assert!((frobenius_distance(&a, &b).unwrap() - acc.sqrt()).abs() < 1e-14);
        assert!(frobenius_distance(&a, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = Matrix::from_real(1, 2, &[1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, MathError::NonFinite { row: 0, col: 1 });
        assert!(Matrix::new(2, 2, vec![ZERO; 3]).is_err());
    }

    #[test]
    fn completion_keeps_leading_row() {
        let u = complete_to_unitary(&[vec![ONE, ZERO]], 2).unwrap();
        assert_eq!(u.matrix().row(0), &[ONE, ZERO]);
        assert!(unitarity_defect(u.matrix()) <= STRUCTURAL_TOL);
    }

    #[test]
    fn completion_of_nothing_is_identity() {
        let u = complete_to_unitary(&[], 3).unwrap();
        assert_eq!(u.matrix(), &Matrix::identity(3));
    }

    #[test]
    fn completion_of_random_row_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut row: Vec<Complex> = (0..4)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let n = vnorm(&row);
        row.iter_mut().for_each(|z| *z /= n);
        let u = complete_to_unitary(&[row.clone()], 4).unwrap();
        assert!(unitarity_defect(u.matrix()) <= 1e-10);
        for (a, b) in u.matrix().row(0).iter().zip(&row) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn completion_rejects_dependent_rows() {
        let r = vec![ONE, ZERO, ZERO];
        let err = complete_to_unitary(&[r.clone(), r], 3).unwrap_err();
        assert_eq!(err, MathError::LinearlyDependent { index: 1 });
        assert!(complete_to_unitary(&vec![vec![ONE, ZERO]; 3], 2).is_err());
    }

    #[test]
    fn complement_is_orthogonal() {
        let v = vec![vec![c(1.0, 1.0), c(0.5, 0.0), ZERO, c(0.0, -2.0)]];
        let comp = orthogonal_complement(&v, 4, 1e-10);
        assert_eq!(comp.len(), 3);
        for w in &comp {
            assert!(vdot(&v[0], w).norm() < 1e-14);
            assert!((vnorm(w) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn embed_places_block() {
        let swap = UnitaryMatrix::new(Matrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        let big = swap.embed(&[0, 2], 3);
        let expect = Matrix::from_real(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(big.matrix(), &expect);
    }

    #[test]
    fn eigenvalues_of_hermitian() {
        let m = Matrix::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let ev = m.hermitian_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
            .prop_map(move |v| Matrix::new(n, n, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn product_is_associative(a in arb_matrix(3), b in arb_matrix(3), m in arb_matrix(3)) {
            let left = mat_mul(&mat_mul(&a, &b).unwrap(), &m).unwrap();
            let right = mat_mul(&a, &mat_mul(&b, &m).unwrap()).unwrap();
            let scale = left.frobenius_norm().max(1.0);
            prop_assert!(frobenius_distance(&left, &right).unwrap() <= 1e-12 * scale);
        }

        #[test]
        fn distance_obeys_triangle_inequality(a in arb_matrix(3), b in arb_matrix(3), m in arb_matrix(3)) {
            let ab = frobenius_distance(&a, &b).unwrap();
            let bm = frobenius_distance(&b, &m).unwrap();
            let am = frobenius_distance(&a, &m).unwrap();
            prop_assert!(am <= ab + bm + 1e-12);
        }

        #[test]
        fn completion_always_unitary(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..5), extra in 0usize..3) {
            let dim = v.len() + extra;
            let mut row: Vec<Complex> = v.into_iter().map(|(a, b)| c(a, b)).collect();
            row.resize(dim, ZERO);
            let n = vnorm(&row);
            prop_assume!(n > 1e-3);
            row.iter_mut().for_each(|z| *z /= n);
            let u = complete_to_unitary(&[row], dim).unwrap();
            prop_assert!(UnitaryMatrix::new(u.into_matrix()).is_ok());
        }
    }
}
