//! Kraus sets, incoherence predicates and the Choi equality oracle.
//!
//! An operator is incoherent when every column carries at most one entry
//! above [`STRUCTURAL_TOL`]; the resulting per-column row map is its
//! [`Signature`]. Strict incoherence asks the same of the adjoint.
//!
//! Choi convention: `J = Σ_ij E_ij ⊗ Φ(E_ij)`, so with composite index
//! `i·d + k` we get `J[(i,k),(j,l)] = Σ_n K_n[k,i] · conj(K_n[l,j])`.

mod classes;
pub mod json;

use std::fmt;

use thiserror::Error;

use crate::densemath::{
    frobenius_distance, mat_mul, Complex, MathError, Matrix, STRUCTURAL_TOL, ZERO, ZERO_TOL,
};

pub use classes::{classify, enumerate_signatures, hand_table, CanonicalClass, ClassSlot, Regime};

/// Completeness defect accepted for a set to count as a channel.
pub const CPTP_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("operator {index} has shape {rows}x{cols}, expected {dim}x{dim}")]
    BadOperatorShape {
        index: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDim(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("operator {index} is not incoherent")]
    NotIncoherent { index: usize },
    #[error("set is not trace preserving (defect {defect:.3e})")]
    NotCptp { defect: f64 },
    #[error(transparent)]
    Math(#[from] MathError),
}

/// Per-column target rows (0-based); `None` marks a zero column.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(pub Vec<Option<usize>>);

impl Signature {
    /// Builds a signature from the 1-based notation used in class tables,
    /// where 0 marks a zero column.
    pub fn from_one_based(rows: &[u8]) -> Self {
        Self(
            rows.iter()
                .map(|&r| if r == 0 { None } else { Some(r as usize - 1) })
                .collect(),
        )
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![None; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    /// True when no two nonzero columns share a target row.
    pub fn is_row_injective(&self) -> bool {
        let rows: Vec<usize> = self.0.iter().flatten().copied().collect();
        let mut dedup = rows.clone();
        dedup.sort_unstable();
        dedup.dedup();
        dedup.len() == rows.len()
    }

    /// Matrix positions `(row, col)` the pattern allows, in column order.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(c, r)| r.map(|r| (r, c)))
            .collect()
    }

    pub fn allows(&self, row: usize, col: usize) -> bool {
        self.0.get(col).copied().flatten() == Some(row)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (c, r) in self.0.iter().enumerate() {
            if c > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", r.map_or(0, |r| r + 1))?;
        }
        write!(f, ")")
    }
}

fn column_signature(m: &Matrix, tol: f64) -> Option<Signature> {
    let mut sig = Vec::with_capacity(m.cols());
    for c in 0..m.cols() {
        let mut hit = None;
        for r in 0..m.rows() {
            if m[(r, c)].norm() > tol {
                if hit.is_some() {
                    return None;
                }
                hit = Some(r);
            }
        }
        sig.push(hit);
    }
    Some(Signature(sig))
}

/// A square Kraus operator with its cached signature.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausOperator {
    mat: Matrix,
    sig: Option<Signature>,
}

impl KrausOperator {
    pub fn new(mat: Matrix) -> Result<Self, ChannelError> {
        if !mat.is_square() {
            return Err(ChannelError::BadOperatorShape {
                index: 0,
                rows: mat.rows(),
                cols: mat.cols(),
                dim: mat.rows(),
            });
        }
        let sig = column_signature(&mat, STRUCTURAL_TOL);
        Ok(Self { mat, sig })
    }

    /// Operator with the given entries placed on an empty `dim`×`dim` matrix.
    pub fn from_entries(dim: usize, entries: &[((usize, usize), Complex)]) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for &((r, c), z) in entries {
            m[(r, c)] = z;
        }
        Self::new(m).expect("square by construction")
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn signature(&self) -> Option<&Signature> {
        self.sig.as_ref()
    }

    pub fn is_incoherent(&self) -> bool {
        self.sig.is_some()
    }

    pub fn is_zero(&self) -> bool {
        self.mat.is_zero(ZERO_TOL)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.mat.adjoint()).expect("square")
    }

    /// `vec(K)` in the Choi composite ordering `i·d + k` ↔ `K[k, i]`.
    pub fn choi_vec(&self) -> Vec<Complex> {
        let d = self.dim();
        (0..d * d).map(|x| self.mat[(x % d, x / d)]).collect()
    }
}

/// The per-column row map of `k`, or `None` when `k` is not incoherent.
pub fn signature_of(k: &KrausOperator) -> Option<Signature> {
    k.sig.clone()
}

/// Both `K` and `K†` have at most one nonzero per column.
pub fn is_strictly_incoherent(k: &KrausOperator) -> bool {
    k.is_incoherent() && column_signature(&k.mat.adjoint(), STRUCTURAL_TOL).is_some()
}

/// An ordered list of Kraus operators on a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    dim: usize,
    ops: Vec<KrausOperator>,
}

impl KrausSet {
    pub fn new(dim: usize, ops: Vec<KrausOperator>) -> Result<Self, ChannelError> {
        if !(2..=3).contains(&dim) {
            return Err(ChannelError::UnsupportedDim(dim));
        }
        for (index, k) in ops.iter().enumerate() {
            if k.dim() != dim {
                return Err(ChannelError::BadOperatorShape {
                    index,
                    rows: k.mat.rows(),
                    cols: k.mat.cols(),
                    dim,
                });
            }
        }
        Ok(Self { dim, ops })
    }

    pub fn from_matrices(dim: usize, mats: Vec<Matrix>) -> Result<Self, ChannelError> {
        let ops = mats
            .into_iter()
            .enumerate()
            .map(|(index, m)| {
                KrausOperator::new(m).map_err(|e| match e {
                    ChannelError::BadOperatorShape { rows, cols, .. } => {
                        ChannelError::BadOperatorShape { index, rows, cols, dim }
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, ops)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrices(dim, vec![Matrix::identity(dim)]).expect("valid")
    }

    /// Complete dephasing `{|k⟩⟨k|}`.
    pub fn dephasing(dim: usize) -> Self {
        let mats = (0..dim)
            .map(|k| Matrix::from_fn(dim, dim, |i, j| if i == k && j == k { crate::densemath::ONE } else { ZERO }))
            .collect();
        Self::from_matrices(dim, mats).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[KrausOperator] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn into_ops(self) -> Vec<KrausOperator> {
        self.ops
    }

    /// Drops operators whose entries are all below [`ZERO_TOL`].
    pub fn pruned(&self) -> Self {
        Self {
            dim: self.dim,
            ops: self.ops.iter().filter(|k| !k.is_zero()).cloned().collect(),
        }
    }

    pub fn all_incoherent(&self) -> bool {
        self.ops.iter().all(KrausOperator::is_incoherent)
    }

    pub fn all_strictly_incoherent(&self) -> bool {
        self.ops.iter().all(is_strictly_incoherent)
    }

    /// Concatenation of two operator lists.
    pub fn union(&self, other: &Self) -> Result<Self, ChannelError> {
        if self.dim != other.dim {
            return Err(ChannelError::DimMismatch(self.dim, other.dim));
        }
        let mut ops = self.ops.clone();
        ops.extend(other.ops.iter().cloned());
        Ok(Self { dim: self.dim, ops })
    }
}

/// `‖Σ K†K − I‖_F`.
pub fn completeness_defect(s: &KrausSet) -> f64 {
    let mut acc = Matrix::zeros(s.dim, s.dim);
    for k in &s.ops {
        let g = mat_mul(&k.mat.adjoint(), &k.mat).expect("square");
        acc = acc.add(&g).expect("same shape");
    }
    acc.sub(&Matrix::identity(s.dim)).expect("same shape").frobenius_norm()
}

/// Choi matrix of a channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    mat: Matrix,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat.hermitian_eigenvalues()
    }

    /// Checks Hermiticity, trace `d` and positivity.
    pub fn check_invariants(&self) -> Result<(), String> {
        let h = self.mat.hermiticity_defect();
        if h > 1e-10 {
            return Err(format!("not Hermitian (defect {h:.3e})"));
        }
        let tr = self.mat.trace();
        if (tr - Complex::new(self.dim as f64, 0.0)).norm() > 1e-8 {
            return Err(format!("trace {} differs from {}", tr.re, self.dim));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -1e-8 {
            return Err(format!("negative eigenvalue {min:.3e}"));
        }
        Ok(())
    }
}

pub fn choi(s: &KrausSet) -> ChoiMatrix {
    let n = s.dim * s.dim;
    let mut mat = Matrix::zeros(n, n);
    for k in &s.ops {
        let v = k.choi_vec();
        for a in 0..n {
            if v[a] == ZERO {
                continue;
            }
            for b in 0..n {
                mat[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    ChoiMatrix { dim: s.dim, mat }
}

/// Number of Choi eigenvalues above `tol` times the largest one.
pub fn choi_rank(s: &KrausSet, tol: f64) -> Result<usize, ChannelError> {
    let defect = completeness_defect(s);
    if defect > CPTP_TOL {
        return Err(ChannelError::NotCptp { defect });
    }
    let ev = choi(s).eigenvalues();
    let top = ev.last().copied().unwrap_or(0.0);
    Ok(ev.iter().filter(|&&x| x > tol * top).count())
}

/// Frobenius distance between the two Choi matrices and whether it is ≤ `tol`.
pub fn channels_equal(a: &KrausSet, b: &KrausSet, tol: f64) -> Result<(bool, f64), ChannelError> {
    if a.dim != b.dim {
        return Err(ChannelError::DimMismatch(a.dim, b.dim));
    }
    let d = frobenius_distance(&choi(a).mat, &choi(b).mat)?;
    Ok((d <= tol, d))
}

/// `Σ K ρ K†`.
pub fn apply(s: &KrausSet, rho: &Matrix) -> Result<Matrix, ChannelError> {
    if rho.shape() != (s.dim, s.dim) {
        return Err(ChannelError::DimMismatch(s.dim, rho.rows()));
    }
    let mut out = Matrix::zeros(s.dim, s.dim);
    for k in &s.ops {
        let term = mat_mul(&mat_mul(&k.mat, rho)?, &k.mat.adjoint())?;
        out = out.add(&term)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densemath::{UnitaryMatrix, ONE};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn op(d: usize, v: &[f64]) -> KrausOperator {
        KrausOperator::new(Matrix::from_real(d, d, v).unwrap()).unwrap()
    }

    /// Eq-4 style qubit set with real a and complex b.
    fn qubit4(a: [f64; 4], b: [Complex; 4]) -> KrausSet {
        let e = |r, cc, z| ((r, cc), z);
        let ops = vec![
            KrausOperator::from_entries(2, &[e(0, 0, c(a[0], 0.0)), e(0, 1, b[0])]),
            KrausOperator::from_entries(2, &[e(1, 0, c(a[1], 0.0)), e(1, 1, b[1])]),
            KrausOperator::from_entries(2, &[e(0, 0, c(a[2], 0.0)), e(1, 1, b[2])]),
            KrausOperator::from_entries(2, &[e(1, 0, c(a[3], 0.0)), e(0, 1, b[3])]),
        ];
        KrausSet::new(2, ops).unwrap()
    }

    fn random_unitary(rng: &mut impl Rng, n: usize) -> UnitaryMatrix {
        let vs: Vec<Vec<Complex>> = (0..n)
            .map(|_| (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        let basis = crate::densemath::orthonormalize(&vs, 1e-9);
        UnitaryMatrix::new(Matrix::from_rows(&basis).unwrap()).unwrap()
    }

    fn mix_ops(u: &UnitaryMatrix, s: &KrausSet) -> KrausSet {
        let n = s.len();
        let d = s.dim();
        let mats = (0..n)
            .map(|i| {
                let mut m = Matrix::zeros(d, d);
                for (j, k) in s.ops().iter().enumerate() {
                    m = m.add(&k.matrix().scale(u.matrix()[(i, j)])).unwrap();
                }
                m
            })
            .collect();
        KrausSet::from_matrices(d, mats).unwrap()
    }

    #[test]
    fn permutation_signature() {
        let s = signature_of(&op(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(s, Signature(vec![Some(1), Some(0)]));
    }

    #[test]
    fn row_vector_signature_matches_first_qubit_class() {
        let h = 1.0 / 2f64.sqrt();
        let s = signature_of(&op(2, &[h, h, 0.0, 0.0])).unwrap();
        assert_eq!(s, Signature::from_one_based(&[1, 1]));
    }

    #[test]
    fn hadamard_not_incoherent() {
        let h = 1.0 / 2f64.sqrt();
        assert!(signature_of(&op(2, &[h, h, h, -h])).is_none());
    }

    #[test]
    fn strict_incoherence_examples() {
        let diag = KrausOperator::new(Matrix::diag(&[c(0.3, 0.0), c(0.0, 0.5), c(-0.2, 0.1)])).unwrap();
        assert!(is_strictly_incoherent(&diag));
        let k4 = op(3, &[0.6, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(k4.is_incoherent());
        assert!(!is_strictly_incoherent(&k4));
        let zero = KrausOperator::new(Matrix::zeros(3, 3)).unwrap();
        assert!(is_strictly_incoherent(&zero));
        assert_eq!(signature_of(&zero), Some(Signature::zero(3)));
    }

    #[test]
    fn defect_of_identity_is_zero() {
        assert_eq!(completeness_defect(&KrausSet::identity(3)), 0.0);
    }

    #[test]
    fn defect_of_qubit_example() {
        let b = [c(0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)];
        let s = qubit4([0.5; 4], b);
        assert!(completeness_defect(&s) < 1e-15);

        // Oracle: with a4 = 0 the (1,1) entry of Σ K†K drops by a4² = 1/4,
        // nothing else changes.
        let s0 = qubit4([0.5, 0.5, 0.5, 0.0], b);
        let mut sum = [[ZERO; 2]; 2];
        for k in s0.ops() {
            for i in 0..2 {
                for j in 0..2 {
                    for r in 0..2 {
                        sum[i][j] += k.matrix()[(r, i)].conj() * k.matrix()[(r, j)];
                    }
                }
            }
        }
        let mut acc = 0.0;
        for (i, row) in sum.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                acc += (z - c(target, 0.0)).norm_sqr();
            }
        }
        let d = completeness_defect(&s0);
        assert!((d - acc.sqrt()).abs() < 1e-15);
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn choi_of_identity() {
        let j = choi(&KrausSet::identity(2));
        for a in 0..4 {
            for b in 0..4 {
                let expect = if [(0, 0), (0, 3), (3, 0), (3, 3)].contains(&(a, b)) { ONE } else { ZERO };
                assert_eq!(j.matrix()[(a, b)], expect);
            }
        }
    }

    #[test]
    fn choi_of_dephasing() {
        let j = choi(&KrausSet::dephasing(2));
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(j.matrix()[(a, b)], ZERO);
                }
            }
        }
        let ev = j.eigenvalues();
        assert!(ev[0].abs() < 1e-14 && ev[1].abs() < 1e-14);
        assert!((ev[2] - 1.0).abs() < 1e-14 && (ev[3] - 1.0).abs() < 1e-14);
        assert!(j.check_invariants().is_ok());
    }

    #[test]
    fn choi_unchanged_by_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = [c(0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)];
        let s = qubit4([0.5; 4], b);
        let u = random_unitary(&mut rng, 4);
        let (eq, d) = channels_equal(&s, &mix_ops(&u, &s), 1e-10).unwrap();
        assert!(eq, "distance {d}");
    }

    #[test]
    fn rank_examples() {
        assert_eq!(choi_rank(&KrausSet::identity(2), 1e-9).unwrap(), 1);
        assert_eq!(choi_rank(&KrausSet::dephasing(2), 1e-9).unwrap(), 2);
        let mut bad = KrausSet::identity(2).into_ops();
        bad.push(op(2, &[1.0, 0.0, 0.0, 0.0]));
        let err = choi_rank(&KrausSet::new(2, bad).unwrap(), 1e-9).unwrap_err();
        assert!(matches!(err, ChannelError::NotCptp { .. }));
    }

    #[test]
    fn rank_of_generic_four_operator_qubit() {
        // Valid parameters: a1 b1 + a2 b2 = 0 fixes b2; then normalise b.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let mut a: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.1..1.0));
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            a.iter_mut().for_each(|x| *x /= na);
            let b1 = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let b2 = -b1 * a[0] / a[1];
            let b3 = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let b4 = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let nb = (b1.norm_sqr() + b2.norm_sqr() + b3.norm_sqr() + b4.norm_sqr()).sqrt();
            let s = qubit4(a, [b1 / nb, b2 / nb, b3 / nb, b4 / nb]);
            assert!(completeness_defect(&s) < 1e-12);
            assert_eq!(choi_rank(&s, 1e-9).unwrap(), 4);
        }
    }

    #[test]
    fn equality_examples() {
        let s = KrausSet::dephasing(3);
        assert_eq!(channels_equal(&s, &s, 1e-9).unwrap(), (true, 0.0));
        // Hand oracle: the Choi matrices differ only at (0,3) and (3,0),
        // each by one, so the Frobenius distance is √2.
        let (eq, d) = channels_equal(&KrausSet::identity(2), &KrausSet::dephasing(2), 1e-9).unwrap();
        assert!(!eq);
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!(channels_equal(&KrausSet::identity(2), &KrausSet::identity(3), 1e-9).is_err());
    }

    #[test]
    fn apply_examples() {
        let rho = Matrix::new(2, 2, vec![c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]).unwrap();
        assert_eq!(apply(&KrausSet::identity(2), &rho).unwrap(), rho);
        let out = apply(&KrausSet::dephasing(2), &rho).unwrap();
        assert_eq!(out, Matrix::diag(&[c(0.7, 0.0), c(0.3, 0.0)]));
        assert!(apply(&KrausSet::identity(3), &rho).is_err());
    }

    #[test]
    fn choi_of_union_is_sum() {
        let a = KrausSet::identity(2);
        let b = KrausSet::dephasing(2);
        let sum = choi(&a).matrix().add(choi(&b).matrix()).unwrap();
        assert_eq!(choi(&a.union(&b).unwrap()).matrix(), &sum);
    }

    proptest! {
        #[test]
        fn choi_is_linear(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 18)) {
            let m1 = Matrix::new(3, 3, v[..9].iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let m2 = Matrix::new(3, 3, v[9..].iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let a = KrausSet::from_matrices(3, vec![m1]).unwrap();
            let b = KrausSet::from_matrices(3, vec![m2]).unwrap();
            let sum = choi(&a).matrix().add(choi(&b).matrix()).unwrap();
            let d = frobenius_distance(choi(&a.union(&b).unwrap()).matrix(), &sum).unwrap();
            prop_assert!(d < 1e-14);
        }

        #[test]
        fn equality_is_symmetric_and_transitive(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = KrausSet::dephasing(3);
            let s = KrausSet::new(3, [s.ops(), s.ops()].concat().iter().map(|k| {
                KrausOperator::new(k.matrix().scale(c(0.5f64.sqrt(), 0.0))).unwrap()
            }).collect()).unwrap();
            let t = mix_ops(&random_unitary(&mut rng, 6), &s);
            let w = mix_ops(&random_unitary(&mut rng, 6), &t);
            prop_assert!(channels_equal(&s, &s, 1e-9).unwrap().0);
            prop_assert_eq!(channels_equal(&s, &t, 1e-9).unwrap().0, channels_equal(&t, &s, 1e-9).unwrap().0);
            prop_assert!(channels_equal(&s, &t, 1e-9).unwrap().0);
            prop_assert!(channels_equal(&t, &w, 1e-9).unwrap().0);
            prop_assert!(channels_equal(&s, &w, 1e-9).unwrap().0);
        }
    }
}
