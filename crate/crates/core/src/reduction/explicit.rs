//! Closed-form mixing matrices for the individual merges.
//!
//! The matrices keep their normalisation constants unchanged and are only
//! used after validation: the caller
//! falls back to the numerical engines when a matrix is not unitary or does
//! not produce the target sparsity patterns.

use thiserror::Error;

use crate::densemath::{unitarity_defect, Complex, Matrix, UnitaryMatrix};

/// Validation tolerance for a closed-form unitary.
pub const EXPLICIT_UNITARITY_TOL: f64 = 1e-9;

/// Denominators below this are treated as vanishing.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplicitError {
    #[error("degenerate parameters: {0} vanishes")]
    Degenerate(&'static str),
    #[error("closed form is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
}

fn c(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

fn inv_sqrt(den: f64, name: &'static str) -> Result<f64, ExplicitError> {
    if den.abs() < DEGENERACY_TOL {
        Err(ExplicitError::Degenerate(name))
    } else {
        Ok(1.0 / den.sqrt())
    }
}

fn validated(m: Matrix) -> Result<UnitaryMatrix, ExplicitError> {
    let defect = unitarity_defect(&m);
    UnitaryMatrix::with_tolerance(m, EXPLICIT_UNITARITY_TOL).map_err(|_| ExplicitError::NotUnitary(defect))
}

/// Entries of the five-operator qubit form: `a_n` sits in column 1 and `b_n`
/// in column 2 of operator `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitParams {
    pub a: [Complex; 5],
    pub b: [Complex; 4],
}

/// The 4×4 qubit matrix.
///
/// Its columns act on the operators with the single `(1,1)` entry in third
/// place, i.e. on classes `[1, 2, 5, 4]` of the five-operator form.
pub fn explicit_matrix_qubit(p: &QubitParams) -> Result<Matrix, ExplicitError> {
    // Relabel so the single is a3 and the off-diagonal pair is (a4, b4).
    let (a1, a2, a3, a4) = (p.a[0], p.a[1], p.a[4], p.a[3]);
    let (b1, b4) = (p.b[0], p.b[3]);
    let (s1, s2, s3, s4) = (a1.norm_sqr(), a2.norm_sqr(), a3.norm_sqr(), a4.norm_sqr());
    let (n1, n4) = (b1.norm(), b4.norm());
    let (q1, q4) = (n1 * n1, n4 * n4);

    let k = inv_sqrt(s1 + s3, "k")?;
    let sum = s1 * q4 + s3 * q1 + s3 * q4;
    let l = inv_sqrt(
        s3 * s3 * s4 * q1 * q1 * q4 * q4
            + s2 * q1 * q4 * sum * sum
            + s1 * s3 * s4 * q1 * q1 * q4 * q4
            + s3 * s3 * s4 * q1 * q1 * q1 * q4,
        "l",
    )?;
    let m = inv_sqrt(s2 * s3 * q1 * q4 + s3 * s3 * s4 * q1 * q1 + s1 * s2 * q1 * q4 + s2 * s3 * q1 * q1, "m")?;
    let n = inv_sqrt(s3 * s3 * q1 * q4 + s1 * s3 * q1 * q4 + (s1 + s3) * (s1 + s3) * q4 * q4, "n")?;
    let (k, l, m, n) = (c(k), c(l), c(m), c(n));

    let rows = vec![
        vec![k * a1, c(0.0), k * a3, c(0.0)],
        vec![
            -l * a3 * a3 * a4 * q1 * q4,
            l * a2 * b1 * b4.conj() * sum,
            l * a1 * a3 * a4 * q1 * q4,
            l * a3 * a3 * a4 * q1 * n1 * n4,
        ],
        vec![
            -m * a2 * a3 * b1.conj() * b4,
            -m * a3 * a4 * q1,
            m * a1 * a2 * b1.conj() * b4,
            m * a2 * a3 * q1,
        ],
        vec![
            n * a3 * a3 * b1.conj() * b4,
            c(0.0),
            -n * a1 * a3 * b1.conj() * b4,
            n * (s1 + s3) * q4,
        ],
    ];
    Ok(Matrix::from_rows(&rows).expect("finite"))
}

/// `V = U ⊕ I₁`, validated.
pub fn explicit_unitary_qubit(p: &QubitParams) -> Result<UnitaryMatrix, ExplicitError> {
    let u = validated(explicit_matrix_qubit(p)?)?;
    Ok(u.direct_sum_identity(1))
}

/// The three-operator matrix used for the single-entry merges of the IO list,
/// over columns `(K_x, K_y, K_z)` with `K_x = [a_x at col 1, b_x at col 2]`,
/// `K_y` contributing `b_y` and `K_z` the single `a_z`.
pub fn explicit_matrix_io_single(ax: Complex, bx: Complex, by: Complex, az: Complex) -> Result<Matrix, ExplicitError> {
    let (sx, sz) = (ax.norm_sqr(), az.norm_sqr());
    let big_n = sz * (bx.norm_sqr() + by.norm_sqr()) + (az * by).norm_sqr();
    let l = c(inv_sqrt(sx + sz, "l")?);
    let m = c(inv_sqrt((sx + sz) * big_n, "m")?);
    let n = c(inv_sqrt(big_n, "n")?);
    let rows = vec![
        vec![l * ax.conj(), c(0.0), l * az.conj()],
        vec![m * bx.conj() * sz, m * (sx + sz) * by.conj(), -m * az.conj() * bx.conj() * ax],
        vec![n * az * by, -n * az * bx, -n * ax * by],
    ];
    Ok(Matrix::from_rows(&rows).expect("finite"))
}

/// The four-operator matrix of the third IO merge, over `(K4, K8, K38, K16)`.
pub struct Io4Params {
    pub a4: Complex,
    pub b4: Complex,
    pub a8: Complex,
    pub a38: Complex,
    pub a16: Complex,
    pub b16: Complex,
}

pub fn explicit_matrix_io_cycle(p: &Io4Params) -> Result<Matrix, ExplicitError> {
    let (a4, a8, a38, a16) = (p.a4, p.a8, p.a38, p.a16);
    let (b4, b16) = (p.b4, p.b16);
    let (s4, s8, s38, s16) = (a4.norm_sqr(), a8.norm_sqr(), a38.norm_sqr(), a16.norm_sqr());
    let (n4, n16) = (b4.norm(), b16.norm());
    let (q4, q16) = (n4 * n4, n16 * n16);
    let sum = s4 * q16 + s38 * q4 + s38 * q16;

    let k = inv_sqrt(s4 + s38, "k3")?;
    let l = inv_sqrt(
        q4 * q16 * (s38 * s38 * s16 * q4 * q16 + s8 * sum * sum + s4 * s38 * s16 * q4 * q16 + s38 * s38 * s16 * q4 * q4),
        "l3",
    )?;
    let m = inv_sqrt(q4 * (s8 * s38 * q16 + s38 * s38 * s16 * q4 + s4 * s8 * q16 + s8 * s38 * q4), "m3")?;
    let n = inv_sqrt(q16 * (s38 * s38 * q4 + s4 * s38 * q4 + (s4 + s38) * (s4 + s38) * q16), "n3")?;
    let (k, l, m, n) = (c(k), c(l), c(m), c(n));

    let rows = vec![
        vec![k * a4, c(0.0), k * a38, c(0.0)],
        vec![
            -l * a38 * a38 * a16 * q4 * q16,
            l * a8 * b4 * b16.conj() * sum,
            l * a4 * a38 * a16 * q4 * q16,
            l * a38 * a38 * a16 * q4 * n4 * n16,
        ],
        vec![
            m * a8 * a38 * b4.conj() * b16,
            -m * a38 * a16 * q4,
            m * a4 * a8 * b16 * b4.conj(),
            m * a8 * a38 * q4,
        ],
        vec![
            n * a38 * a38 * b4.conj() * b16,
            c(0.0),
            -n * a4 * a38 * b4.conj() * b16,
            n * (s4 + s38) * q16,
        ],
    ];
    Ok(Matrix::from_rows(&rows).expect("finite"))
}

/// The SIO merge matrix over `(K_x, K_y, K_z)`: `K_x` has `b_x` in column 2,
/// `K_y` has `a_y` in column 1 and `b_y` in column 2, `K_z` is the single
/// `a_z`.
pub fn explicit_matrix_sio(bx: Complex, ay: Complex, by: Complex, az: Complex) -> Result<Matrix, ExplicitError> {
    let s = ay.norm_sqr() + az.norm_sqr();
    let t = ay.norm_sqr() * bx.norm_sqr() + az.norm_sqr() * bx.norm_sqr() + az.norm_sqr() * by.norm_sqr();
    let l = c(inv_sqrt(s * t, "l")?);
    let m = c(inv_sqrt(s, "m")?);
    let n = c(inv_sqrt(t, "n")?);
    let rows = vec![
        vec![-l * s * bx, -l * az.norm_sqr() * by.conj(), l * ay * az.conj() * by.conj()],
        vec![c(0.0), -m * ay.conj(), -m * az.conj()],
        vec![n * az * by, -n * az * bx.conj(), n * ay * bx.conj()],
    ];
    Ok(Matrix::from_rows(&rows).expect("finite"))
}

/// The SIO matrix assumes a real `b_x`. A complex `b_x` is handled by
/// rephasing `K_x`, which leaves the channel unchanged: the matrix is built
/// for `|b_x|` and the phase folded into its first column.
pub fn explicit_matrix_sio_rephased(bx: Complex, ay: Complex, by: Complex, az: Complex) -> Result<Matrix, ExplicitError> {
    let phase = if bx.norm() > 0.0 { bx.conj() / bx.norm() } else { c(1.0) };
    let m = explicit_matrix_sio(c(bx.norm()), ay, by, az)?;
    let rows: Vec<Vec<Complex>> = (0..3)
        .map(|r| {
            let mut row = m.row(r).to_vec();
            row[0] *= phase;
            row
        })
        .collect();
    Ok(Matrix::from_rows(&rows).expect("finite"))
}

pub(crate) fn validate(m: Result<Matrix, ExplicitError>) -> Result<UnitaryMatrix, ExplicitError> {
    validated(m?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> Complex {
        Complex::new(x, 0.0)
    }

    #[test]
    fn qubit_example_is_rejected() {
        // a = (1/2, 1/2, 1/2, 1/4, √3/4), b = (1/2, −1/2, 1/2, 1/2) satisfies
        // the completeness relations, but the m² normalisation does
        // not normalise row 3, so validation must reject the matrix.
        let a3 = 3f64.sqrt() / 4.0;
        let p = QubitParams {
            a: [r(0.5), r(0.5), r(0.5), r(0.25), r(a3)],
            b: [r(0.5), r(-0.5), r(0.5), r(0.5)],
        };
        let m = explicit_matrix_qubit(&p).unwrap();
        // Row-norm oracle for row 3: m²·(a2²a3²|b1|²|b4|² + a3²a4²|b1|⁴ + a1²a2²|b1|²|b4|² + a2²a3²|b1|⁴).
        let (a1, a2, a4, b1, b4) = (0.5f64, 0.5f64, 0.25f64, 0.5f64, 0.5f64);
        let true_norm = a2 * a2 * a3 * a3 * b1 * b1 * b4 * b4
            + a3 * a3 * a4 * a4 * b1.powi(4)
            + a1 * a1 * a2 * a2 * b1 * b1 * b4 * b4
            + a2 * a2 * a3 * a3 * b1.powi(4);
        let used = a2 * a2 * a3 * a3 * b1 * b1 * b4 * b4
            + a3.powi(4) * a4 * a4 * b1.powi(4)
            + a1 * a1 * a2 * a2 * b1 * b1 * b4 * b4
            + a2 * a2 * a3 * a3 * b1.powi(4);
        let row3: f64 = m.row(2).iter().map(|z| z.norm_sqr()).sum();
        assert!((row3 - true_norm / used).abs() < 1e-12);
        assert!(matches!(explicit_unitary_qubit(&p), Err(ExplicitError::NotUnitary(_))));
    }

    #[test]
    fn qubit_degenerate_when_first_and_single_vanish() {
        let p = QubitParams {
            a: [r(0.0), r(0.6), r(0.6), r(0.28f64.sqrt()), r(0.0)],
            b: [r(0.5), r(0.0), r(0.5), r(std::f64::consts::FRAC_1_SQRT_2)],
        };
        assert_eq!(explicit_matrix_qubit(&p).unwrap_err(), ExplicitError::Degenerate("k"));
    }

    #[test]
    fn sio_matrix_unitary_for_real_second_column() {
        let m = explicit_matrix_sio(r(0.4), r(0.3), Complex::new(0.2, -0.5), r(0.7)).unwrap();
        assert!(unitarity_defect(&m) < 1e-14);
    }

    #[test]
    fn io_single_matrix_defect_reported() {
        let m = explicit_matrix_io_single(r(0.5), Complex::new(0.3, 0.2), Complex::new(-0.1, 0.4), r(0.6)).unwrap();
        let v = validate(Ok(m));
        assert!(matches!(v, Err(ExplicitError::NotUnitary(d)) if d > 1e-3));
    }

    #[test]
    fn sio_rephased_residual_cancels_for_complex_b() {
        let (b9, a12, b12, a15) = (Complex::new(0.3, 0.4), Complex::new(0.2, -0.1), Complex::new(-0.5, 0.2), r(0.6));
        let m = explicit_matrix_sio_rephased(b9, a12, b12, a15).unwrap();
        assert!(unitarity_defect(&m) < 1e-14);
        let row = m.row(2);
        assert!((row[0] * b9 + row[1] * b12).norm() < 1e-15);
        assert!((row[1] * a12 + row[2] * a15).norm() < 1e-15);
        // Without the rephasing the matrix leaves the column-2 entry behind.
        let raw = explicit_matrix_sio(b9, a12, b12, a15).unwrap();
        assert!((raw.row(2)[0] * b9 + raw.row(2)[1] * b12).norm() > 1e-2);
    }
}
