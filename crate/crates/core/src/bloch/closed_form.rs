//! Closed-form SIO images on the `(i, 7|8)` sections.
//!
//! The expressions are evaluated term by term and cross-checked against the
//! matrix path; disagreement is reported, not corrected.

use super::{push_forward_linear, BlochError, BlochVector3};
use crate::channel::{
    classify, completeness_defect, hand_table, ClassSlot, KrausOperator, KrausSet, Regime, Signature, CPTP_TOL,
};
use crate::densemath::{fix_phase, Complex, ZERO};

/// Entries of the fifteen SIO classes: `a[n-1]` in column 1, `b[n-1]` in
/// column 2 and `c[n-1]` in column 3 of class `n` (zero when the class has
/// no entry there).
#[derive(Clone, Debug, PartialEq)]
pub struct SioParams {
    pub a: [Complex; 15],
    pub b: [Complex; 15],
    pub c: [Complex; 15],
}

impl SioParams {
    pub fn identity() -> Self {
        let mut p = Self::zeros();
        p.a[0] = Complex::new(1.0, 0.0);
        p.b[0] = Complex::new(1.0, 0.0);
        p.c[0] = Complex::new(1.0, 0.0);
        p
    }

    fn zeros() -> Self {
        Self {
            a: [ZERO; 15],
            b: [ZERO; 15],
            c: [ZERO; 15],
        }
    }

    /// Reads an SIO set, rotating each operator so its first nonzero entry
    /// (column 1 first) is real and positive. Operators whose pattern is a
    /// strict sub-pattern of a class take the lowest compatible free class.
    pub fn from_kraus_set(s: &KrausSet) -> Result<Self, BlochError> {
        let defect = completeness_defect(s);
        if defect > CPTP_TOL {
            return Err(BlochError::InvalidParams(format!("completeness defect {defect:.3e}")));
        }
        let slots = classify(s, Regime::QutritSIO15)?;
        let table = hand_table(Regime::QutritSIO15);
        let mut owner: [Option<usize>; 15] = [None; 15];
        let mut partial = Vec::new();
        for (k, slot) in slots.iter().enumerate() {
            match slot {
                ClassSlot::Zero => {}
                ClassSlot::Class(c) => {
                    if owner[c.index - 1].replace(k).is_some() {
                        return Err(BlochError::InvalidParams(format!("class K{} appears twice", c.index)));
                    }
                }
                ClassSlot::Unclassified(sig) => partial.push((k, sig)),
            }
        }
        for (k, sig) in partial {
            let fits = |t: &Signature| sig.0.iter().zip(&t.0).all(|(r, tr)| r.is_none() || r == tr);
            let n = (0..15)
                .find(|&n| owner[n].is_none() && fits(&table[n]))
                .ok_or_else(|| BlochError::InvalidParams(format!("signature {sig} has no free SIO class")))?;
            owner[n] = Some(k);
        }
        let mut p = Self::zeros();
        for (n, k) in owner.iter().enumerate() {
            let Some(k) = *k else { continue };
            let m = s.ops()[k].matrix();
            let mut v: Vec<Complex> = (0..3).map(|col| table[n].0[col].map_or(ZERO, |r| m[(r, col)])).collect();
            fix_phase(&mut v);
            p.a[n] = v[0];
            p.b[n] = v[1];
            p.c[n] = v[2];
        }
        Ok(p)
    }

    pub fn to_kraus_set(&self) -> KrausSet {
        let ops = (1..=15)
            .filter_map(|n| {
                let sig = crate::channel::CanonicalClass::new(Regime::QutritSIO15, n)?.signature();
                let vals = [self.a[n - 1], self.b[n - 1], self.c[n - 1]];
                let entries: Vec<_> = (0..3)
                    .filter_map(|col| sig.0[col].map(|r| ((r, col), vals[col])))
                    .filter(|(_, z)| *z != ZERO)
                    .collect();
                (!entries.is_empty()).then(|| KrausOperator::from_entries(3, &entries))
            })
            .collect();
        KrausSet::new(3, ops).expect("qutrit")
    }
}

/// Closed-form image, the matrix-path image and their difference.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormReport {
    pub closed: BlochVector3,
    pub direct: BlochVector3,
    /// `closed − direct`, per coordinate.
    pub deviation: [f64; 8],
    pub max_deviation: f64,
    /// Imaginary part of the m6 expression, dropped from `closed`.
    pub m6_imaginary: f64,
    /// A second pair of m7/m8 expressions.
    pub alt_m7: f64,
    pub alt_m8: f64,
}

fn sq(z: Complex) -> f64 {
    z.norm_sqr()
}

fn sum_sq(v: &[Complex], idx: &[usize]) -> f64 {
    idx.iter().map(|&n| sq(v[n - 1])).sum()
}

pub fn sio_image_closed_form(p: &SioParams, t: &BlochVector3) -> Result<ClosedFormReport, BlochError> {
    if let Some(n) = p.a.iter().position(|z| z.im.abs() > 1e-10) {
        return Err(BlochError::InvalidParams(format!("a{} is not real", n + 1)));
    }
    let a = |n: usize| p.a[n - 1].re;
    let b = |n: usize| p.b[n - 1];
    let c = |n: usize| p.c[n - 1];
    let s3 = 3f64.sqrt();
    let tt = |i: usize| t.get(i);

    let m1 = tt(1) * (a(1) * b(1).re + a(3) * b(3).re + a(7) * b(7).re + a(9) * b(9).re);
    let m2 = tt(2) * (a(1) * c(1).re + a(5) * c(5).re);
    let m3 = tt(3) * (0.5 * (b(1) * c(1).conj() + b(1).conj() * c(1) + b(2) * c(2).conj() + b(2).conj() * c(2))).re;
    let m4 = tt(4) * (a(1) * b(1).re - a(3) * b(3).re + a(7) * b(7).re - a(9) * b(9).re);
    let m5 = tt(5) * (a(1) * c(1).re - a(5) * c(5).re);
    let m6c = 0.5 * (b(1) * c(1).conj() + b(1).conj() * c(1) - b(2) * c(2).conj() + b(2).conj() * c(2)) * tt(6);
    let (m6, m6_imaginary) = (m6c.re, m6c.im);

    let cc = sum_sq(&p.c, &[1, 3]);
    let aa = sum_sq(&p.a, &[5, 6, 11, 12]);
    let bb = sum_sq(&p.b, &[2, 4, 8, 10]);
    let m7 = (1.0 - cc) / 3.0 + (1.0 - aa) * (1.0 / 3.0 + tt(7) / 2.0) + (1.0 - bb) * (1.0 / 3.0 - tt(7) / 2.0);
    let m8 = 1.0 / s3 - s3 * (cc * (1.0 / 3.0 - tt(8) / s3) + (aa + bb) * (1.0 / 3.0 + tt(8) / (2.0 * s3)));

    let c_rest = sum_sq(&p.c, &[2, 4, 5, 6]);
    let b_rest = sum_sq(&p.b, &[1, 3, 5, 6, 7, 9, 11, 12]);
    let a_rest = sum_sq(&p.a, &[1, 2, 3, 4, 7, 8, 9, 10, 13]);
    let alt_m7 = c_rest * (1.0 / 3.0 - tt(8) / s3)
        + b_rest * (1.0 / 3.0 + 0.5 * (-tt(7) + tt(8) / s3))
        + a_rest * (1.0 / 3.0 + 0.5 * (tt(7) + tt(8) / s3));
    let alt_m8 = 1.0 / s3 - s3 * cc * (1.0 / 3.0 - tt(8) / s3)
        + bb * (1.0 / 3.0 + 0.5 * (-tt(7) + tt(8) / s3))
        + aa * (1.0 / 3.0 + 0.5 * (tt(7) + tt(8) / s3));

    let closed = BlochVector3::new([m1, m2, m3, m4, m5, m6, m7, m8])?;
    let direct = push_forward_linear(&p.to_kraus_set(), t)?;
    let deviation: [f64; 8] = std::array::from_fn(|i| closed.t[i] - direct.t[i]);
    let max_deviation = deviation.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(ClosedFormReport {
        closed,
        direct,
        deviation,
        max_deviation,
        m6_imaginary,
        alt_m7,
        alt_m8,
    })
}
