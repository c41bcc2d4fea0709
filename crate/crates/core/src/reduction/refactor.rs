//! Pattern-constrained factorisation of a partial Gram matrix.
//!
//! Given the Gram matrix `J` of a group of operators over the positions they
//! occupy, find operators `w_k` supported on prescribed patterns with
//! `Σ_k w_k w_k† = J`. Solved by Levenberg–Marquardt on the upper triangle of
//! the residual, warm-started from the caller's operators.

use nalgebra::{DMatrix, DVector};

use crate::densemath::{Complex, ZERO};

/// Result of a factorisation run.
#[derive(Clone, Debug)]
pub struct Factorization {
    /// One vector per pattern, over the full position list.
    pub vectors: Vec<Vec<Complex>>,
    /// Frobenius norm of `Σ w w† − J` over the upper triangle.
    pub residual: f64,
    pub iterations: usize,
}

/// `gram` is `P×P` row-major; `patterns[k]` lists indices into `0..P`;
/// `init[k]` holds the starting values at those indices.
pub fn factorize(gram: &[Vec<Complex>], patterns: &[Vec<usize>], init: &[Vec<Complex>], max_iter: usize) -> Factorization {
    let p = gram.len();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a..p).map(move |b| (a, b))).collect();
    let offsets: Vec<usize> = patterns
        .iter()
        .scan(0, |acc, pat| {
            let o = *acc;
            *acc += pat.len();
            Some(o)
        })
        .collect();
    let n_complex: usize = patterns.iter().map(Vec::len).sum();
    let n = 2 * n_complex;
    let m = 2 * pairs.len();

    let unpack = |x: &DVector<f64>| -> Vec<Vec<Complex>> {
        patterns
            .iter()
            .zip(&offsets)
            .map(|(pat, &o)| {
                let mut w = vec![ZERO; p];
                for (t, &pos) in pat.iter().enumerate() {
                    w[pos] = Complex::new(x[2 * (o + t)], x[2 * (o + t) + 1]);
                }
                w
            })
            .collect()
    };
    let residual = |ws: &[Vec<Complex>]| -> DVector<f64> {
        let mut r = DVector::zeros(m);
        for (e, &(a, b)) in pairs.iter().enumerate() {
            let mut z = -gram[a][b];
            for w in ws {
                z += w[a] * w[b].conj();
            }
            r[2 * e] = z.re;
            r[2 * e + 1] = z.im;
        }
        r
    };
    let jacobian = |ws: &[Vec<Complex>]| -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(m, n);
        for (e, &(a, b)) in pairs.iter().enumerate() {
            for (k, pat) in patterns.iter().enumerate() {
                let w = &ws[k];
                for (t, &cpos) in pat.iter().enumerate() {
                    // dM_ab = δ_ca·conj(w_b)·dw_c + δ_cb·w_a·conj(dw_c)
                    let mut d_re = ZERO;
                    let mut d_im = ZERO;
                    if cpos == a {
                        d_re += w[b].conj();
                        d_im += Complex::new(0.0, 1.0) * w[b].conj();
                    }
                    if cpos == b {
                        d_re += w[a];
                        d_im += Complex::new(0.0, -1.0) * w[a];
                    }
                    let col = 2 * (offsets[k] + t);
                    jac[(2 * e, col)] = d_re.re;
                    jac[(2 * e + 1, col)] = d_re.im;
                    jac[(2 * e, col + 1)] = d_im.re;
                    jac[(2 * e + 1, col + 1)] = d_im.im;
                }
            }
        }
        jac
    };

    let mut x = DVector::zeros(n);
    for ((pat, &o), w0) in patterns.iter().zip(&offsets).zip(init) {
        for (t, z) in w0.iter().enumerate().take(pat.len()) {
            x[2 * (o + t)] = z.re;
            x[2 * (o + t) + 1] = z.im;
        }
    }

    let mut ws = unpack(&x);
    let mut r = residual(&ws);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < max_iter && cost > 1e-30 {
        iterations += 1;
        let jac = jacobian(&ws);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            let scale = jtj.diagonal().max().max(1e-12);
            for i in 0..n {
                a[(i, i)] += lambda * scale;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let x_new = &x + &step;
            let ws_new = unpack(&x_new);
            let r_new = residual(&ws_new);
            let cost_new = r_new.norm_squared();
            if cost_new < cost {
                x = x_new;
                ws = ws_new;
                r = r_new;
                let small_step = step.norm() <= 1e-16 * (1.0 + x.norm());
                cost = cost_new;
                lambda = (lambda / 5.0).max(1e-15);
                improved = true;
                if small_step {
                    iterations = max_iter;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Factorization {
        vectors: ws,
        residual: cost.sqrt(),
        iterations,
    }
}
