//! Unitary mixing of Kraus operators and the null-space cancellation engine.

use crate::channel::{ChannelError, KrausOperator, KrausSet};
use crate::densemath::{
    fix_phase, orthogonal_complement, vdot, Complex, Matrix, UnitaryMatrix, ZERO,
};

/// Relative tolerance below which a constraint row counts as dependent.
pub(crate) const DEPENDENCE_TOL: f64 = 1e-9;

/// Relative tolerance for treating two operators as proportional.
pub const PROPORTIONAL_TOL: f64 = 1e-9;

/// `L_i = Σ_j U_ij K_j`.
pub fn mix(u: &UnitaryMatrix, s: &KrausSet) -> Result<KrausSet, ChannelError> {
    if u.dim() != s.len() {
        return Err(ChannelError::DimMismatch(u.dim(), s.len()));
    }
    let ops = mix_operators(u.matrix(), s.ops());
    KrausSet::new(s.dim(), ops)
}

pub(crate) fn mix_operators(u: &Matrix, ops: &[KrausOperator]) -> Vec<KrausOperator> {
    let d = ops.first().map_or(0, KrausOperator::dim);
    (0..u.rows())
        .map(|i| {
            let mut m = Matrix::zeros(d, d);
            for (j, k) in ops.iter().enumerate() {
                let w = u[(i, j)];
                if w != ZERO {
                    m = m.add(&k.matrix().scale(w)).expect("same shape");
                }
            }
            KrausOperator::new(m).expect("square")
        })
        .collect()
}

/// Null-space solve behind [`cancellation_row`], with extra rows the result
/// must be orthogonal to.
pub(crate) fn cancellation_row_orthogonal(
    ops: &[KrausOperator],
    forbidden: &[(usize, usize)],
    orthogonal_to: &[Vec<Complex>],
) -> Option<Vec<Complex>> {
    let n = ops.len();
    // Σ_j u_j K_j[p] = 0  ⇔  ⟨conj(row_p), u⟩ = 0.
    let mut span: Vec<Vec<Complex>> = forbidden
        .iter()
        .map(|&(r, c)| ops.iter().map(|k| k.matrix()[(r, c)].conj()).collect())
        .collect();
    span.extend(orthogonal_to.iter().cloned());
    let mut u = orthogonal_complement(&span, n, DEPENDENCE_TOL).into_iter().next()?;
    fix_phase(&mut u);
    Some(u)
}

/// A unit coefficient vector `c` with `Σ c_n K_n` vanishing on `forbidden`,
/// or `None` when the constraints leave no nonzero `c`. The combination
/// itself may vanish (e.g. for proportional operators).
pub fn cancellation_row(ops: &[KrausOperator], forbidden: &[(usize, usize)]) -> Option<Vec<Complex>> {
    cancellation_row_orthogonal(ops, forbidden, &[])
}

/// `λ` with `b = λ a` within [`PROPORTIONAL_TOL`], if any.
pub(crate) fn proportionality(a: &KrausOperator, b: &KrausOperator) -> Option<Complex> {
    let (va, vb) = (a.matrix().entries(), b.matrix().entries());
    let na = vdot(va, va).re;
    if na == 0.0 {
        return None;
    }
    let lambda = vdot(va, vb) / na;
    let resid: f64 = va
        .iter()
        .zip(vb)
        .map(|(x, y)| (y - lambda * x).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (resid <= PROPORTIONAL_TOL * b.matrix().frobenius_norm()).then_some(lambda)
}

/// Combines `a` and `b = λ a` into `√(1+|λ|²)·a`; the orthogonal partner of
/// the 2×2 rotation is zero and dropped.
pub(crate) fn merge_pair(a: &KrausOperator, lambda: Complex) -> KrausOperator {
    let s = (1.0 + lambda.norm_sqr()).sqrt();
    KrausOperator::new(a.matrix().scale(Complex::new(s, 0.0))).expect("square")
}

/// Merges proportional operator pairs to a fixpoint and prunes zeros.
pub fn merge_proportional(s: &KrausSet) -> KrausSet {
    let mut ops: Vec<KrausOperator> = s.pruned().into_ops();
    'outer: loop {
        for a in 0..ops.len() {
            for b in a + 1..ops.len() {
                if let Some(lambda) = proportionality(&ops[a], &ops[b]) {
                    ops[a] = merge_pair(&ops[a], lambda);
                    ops.remove(b);
                    continue 'outer;
                }
            }
        }
        break;
    }
    KrausSet::new(s.dim(), ops).expect("dimension unchanged")
}
