//! Qutrit Bloch coordinates.
//!
//! `ρ = I/3 + ½ Σ t_i λ_i` with the Gell-Mann matrices ordered as: λ1..λ3 the
//! symmetric off-diagonal generators of the index pairs (1,2), (1,3), (2,3);
//! λ4..λ6 the antisymmetric ones of the same pairs; λ7 = diag(1,−1,0);
//! λ8 = diag(1,1,−2)/√3. With this ordering `ρ_12 = (t1 − i t4)/2`.

mod closed_form;
mod conditions;

use std::sync::OnceLock;

use thiserror::Error;

pub use closed_form::{sio_image_closed_form, ClosedFormReport, SioParams};
pub use conditions::{
    check_conditions, condition2_residual, section_of, ConditionRecord, ConditionReport, MARGIN_TOL, SECTION_TOL,
};

use crate::channel::{apply, ChannelError, KrausSet};
use crate::densemath::{mat_mul, Complex, Matrix, ONE, ZERO};

/// Longest Bloch vector of a pure qutrit state, `2/√3`.
pub fn max_length() -> f64 {
    2.0 / 3f64.sqrt()
}

/// Smallest eigenvalue accepted for a reconstructed density matrix.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlochError {
    #[error("Bloch vector length {0:.6} exceeds 2/√3")]
    TooLong(f64),
    #[error("reconstructed matrix is not positive (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("expected a 3x3 matrix, got {0}x{1}")]
    Shape(usize, usize),
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    Trace(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("channel must act on a qutrit")]
    NotQutrit,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub struct GellMannBasis {
    pub lambdas: [Matrix; 8],
}

impl GellMannBasis {
    fn build() -> Self {
        let i = Complex::new(0.0, 1.0);
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let sym = |(a, b): (usize, usize)| {
            Matrix::from_fn(3, 3, |r, c| if (r, c) == (a, b) || (r, c) == (b, a) { ONE } else { ZERO })
        };
        let asym = |(a, b): (usize, usize)| {
            Matrix::from_fn(3, 3, |r, c| {
                if (r, c) == (a, b) {
                    -i
                } else if (r, c) == (b, a) {
                    i
                } else {
                    ZERO
                }
            })
        };
        let s3 = 3f64.sqrt();
        let re = |x: f64| Complex::new(x, 0.0);
        Self {
            lambdas: [
                sym(pairs[0]),
                sym(pairs[1]),
                sym(pairs[2]),
                asym(pairs[0]),
                asym(pairs[1]),
                asym(pairs[2]),
                Matrix::diag(&[re(1.0), re(-1.0), ZERO]),
                Matrix::diag(&[re(1.0 / s3), re(1.0 / s3), re(-2.0 / s3)]),
            ],
        }
    }
}

/// The shared basis.
pub fn gell_mann() -> &'static GellMannBasis {
    static BASIS: OnceLock<GellMannBasis> = OnceLock::new();
    BASIS.get_or_init(GellMannBasis::build)
}

/// Coordinates `t1..t8`, stored 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BlochVector3 {
    pub t: [f64; 8],
}

impl BlochVector3 {
    pub fn new(t: [f64; 8]) -> Result<Self, BlochError> {
        if t.iter().any(|x| !x.is_finite()) {
            return Err(BlochError::NonFinite);
        }
        Ok(Self { t })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Vector with only coordinates `i` and `j` (1-based) set.
    pub fn section(i: usize, ti: f64, j: usize, tj: f64) -> Self {
        let mut t = [0.0; 8];
        t[i - 1] = ti;
        t[j - 1] = tj;
        Self { t }
    }

    /// Coordinate `t_i`, 1-based.
    pub fn get(&self, i: usize) -> f64 {
        self.t[i - 1]
    }

    pub fn norm(&self) -> f64 {
        self.t.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// All coherence coordinates `t1..t6` vanish.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.t[..6].iter().all(|x| x.abs() <= tol)
    }
}

/// `I/3 + ½ Σ t_i λ_i` without any physicality check.
pub fn bloch_to_density_linear(t: &BlochVector3) -> Matrix {
    let mut rho = Matrix::identity(3).scale(Complex::new(1.0 / 3.0, 0.0));
    for (l, &ti) in gell_mann().lambdas.iter().zip(&t.t) {
        if ti != 0.0 {
            rho = rho.add(&l.scale(Complex::new(ti / 2.0, 0.0))).expect("3x3");
        }
    }
    rho
}

/// Density matrix of a physical Bloch vector.
pub fn bloch_to_density(t: &BlochVector3) -> Result<Matrix, BlochError> {
    let n = t.norm();
    if n > max_length() + 1e-12 {
        return Err(BlochError::TooLong(n));
    }
    let rho = bloch_to_density_linear(t);
    let min = rho.hermitian_eigenvalues()[0];
    if min < -PSD_TOL {
        return Err(BlochError::NotPositive(min));
    }
    Ok(rho)
}

/// `t_i = Tr(ρ λ_i)` for any 3×3 matrix, no checks.
pub fn density_to_bloch_linear(rho: &Matrix) -> BlochVector3 {
    let mut t = [0.0; 8];
    for (ti, l) in t.iter_mut().zip(&gell_mann().lambdas) {
        *ti = mat_mul(rho, l).expect("3x3").trace().re;
    }
    BlochVector3 { t }
}

/// Bloch vector of a Hermitian, unit-trace 3×3 matrix.
pub fn density_to_bloch(rho: &Matrix) -> Result<BlochVector3, BlochError> {
    if rho.shape() != (3, 3) {
        return Err(BlochError::Shape(rho.rows(), rho.cols()));
    }
    let h = rho.hermiticity_defect();
    if h > 1e-10 {
        return Err(BlochError::NotHermitian(h));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > 1e-10 {
        return Err(BlochError::Trace(tr.re));
    }
    Ok(density_to_bloch_linear(rho))
}

fn check_qutrit(s: &KrausSet) -> Result<(), BlochError> {
    if s.dim() == 3 {
        Ok(())
    } else {
        Err(BlochError::NotQutrit)
    }
}

/// Image of a physical state: `density_to_bloch(apply(S, bloch_to_density(t)))`.
pub fn push_forward(s: &KrausSet, t: &BlochVector3) -> Result<BlochVector3, BlochError> {
    check_qutrit(s)?;
    let rho = bloch_to_density(t)?;
    let out = apply(s, &rho)?;
    let min = out.hermitian_eigenvalues()[0];
    if min < -PSD_TOL {
        return Err(BlochError::NotPositive(min));
    }
    density_to_bloch(&out)
}

/// The linear action on the unit-trace Hermitian operator of `t`, whether or
/// not it is positive.
pub fn push_forward_linear(s: &KrausSet, t: &BlochVector3) -> Result<BlochVector3, BlochError> {
    check_qutrit(s)?;
    Ok(density_to_bloch_linear(&apply(s, &bloch_to_density_linear(t))?))
}
