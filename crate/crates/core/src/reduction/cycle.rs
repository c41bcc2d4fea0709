//! Exact redistribution on a 2×2 block of positions.
//!
//! The block has vertices `v0=(p,ca)`, `v1=(p,cb)`, `v2=(q,ca)`, `v3=(q,cb)`.
//! Four two-entry classes form the cycle `v0–v1–v2–v3–v0` and a single-entry
//! class sits on `v0`. Given the Gram matrix `G[u,v] = Σ_n K_n[u]·conj(K_n[v])`
//! of the five operators, the solver finds four edge operators alone with the
//! same Gram matrix, which removes the single.
//!
//! An edge operator through `(u, v)` with weight `α` at `u` is forced to
//! `(√α, conj(G[u,v])/√α)`. Walking the cycle from the weight `x` at `v0`
//! gives the vertex weights `w1 = B − p/x`, `w2 = C − r/w1`, `w3 = D − s/w2`
//! and the closing condition `h(x) = w3 − q/(A − x) = 0`, solved by bisection
//! on `[x0, A)` where `x0` is the current weight, at which `h ≥ 0`.

use crate::densemath::{Complex, ZERO};

/// Entries below this squared modulus count as absent edges.
const TINY: f64 = 1e-30;

fn rat(num: f64, den: f64) -> f64 {
    if num <= TINY {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Vertex weights of a solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleWeights {
    pub x: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub closing_residual: f64,
}

/// Solves the closing equation for the Gram matrix `g` (4×4, vertex order
/// `v0..v3`) starting from the current edge weight `x0` at `v0`.
pub fn solve_cycle(g: &[[Complex; 4]; 4], x0: f64) -> CycleWeights {
    let [a, b, cc, d] = [g[0][0].re, g[1][1].re, g[2][2].re, g[3][3].re];
    let p = g[0][1].norm_sqr();
    let r = g[1][2].norm_sqr();
    let s = g[2][3].norm_sqr();
    let q = g[3][0].norm_sqr();
    let chain = |x: f64| {
        let w1 = b - rat(p, x);
        let w2 = cc - rat(r, w1);
        let w3 = d - rat(s, w2);
        (w1, w2, w3)
    };
    let h = |x: f64| chain(x).2 - rat(q, a - x);

    let x = if q <= TINY {
        a
    } else {
        let (mut lo, mut hi) = (x0.clamp(0.0, a), a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let (w1, w2, w3) = chain(x);
    CycleWeights {
        x,
        w1,
        w2,
        w3,
        closing_residual: h(x),
    }
}

/// Edge operator entries `(at u, at v)`.
fn edge(alpha: f64, g_uv: Complex, fallback_v: f64) -> (Complex, Complex) {
    if alpha > TINY {
        let s = alpha.sqrt();
        (Complex::new(s, 0.0), g_uv.conj() / s)
    } else {
        (ZERO, Complex::new(fallback_v.max(0.0).sqrt(), 0.0))
    }
}

/// Entries of the four edge operators `[E_pp, E_qp, E_qq, E_pq]`, each as
/// values on its two vertices (`E_pp: v0,v1`, `E_qp: v1,v2`, `E_qq: v2,v3`,
/// `E_pq: v0,v3`).
pub fn cycle_operators(g: &[[Complex; 4]; 4], w: &CycleWeights) -> [(Complex, Complex); 4] {
    let a = g[0][0].re;
    [
        edge(w.x, g[0][1], 0.0),
        edge(w.w1, g[1][2], 0.0),
        edge(w.w2, g[2][3], 0.0),
        edge(a - w.x, g[0][3], w.w3),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(vecs: &[[Complex; 4]]) -> [[Complex; 4]; 4] {
        let mut g = [[ZERO; 4]; 4];
        for v in vecs {
            for i in 0..4 {
                for j in 0..4 {
                    g[i][j] += v[i] * v[j].conj();
                }
            }
        }
        g
    }

    fn cz(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn absorbs_single_on_first_vertex() {
        let ops = [
            [cz(0.4, 0.0), cz(0.1, 0.3), ZERO, ZERO],
            [ZERO, cz(0.2, -0.1), cz(0.5, 0.0), ZERO],
            [ZERO, ZERO, cz(0.3, 0.2), cz(0.25, 0.0)],
            [cz(0.35, 0.0), ZERO, ZERO, cz(-0.2, 0.15)],
            [cz(0.3, 0.0), ZERO, ZERO, ZERO],
        ];
        let g = gram(&ops);
        let w = solve_cycle(&g, ops[0][0].norm_sqr());
        let e = cycle_operators(&g, &w);
        let slots = [(0, 1), (1, 2), (2, 3), (0, 3)];
        let vecs: Vec<[Complex; 4]> = e
            .iter()
            .zip(slots)
            .map(|(&(x, y), (u, v))| {
                let mut z = [ZERO; 4];
                z[u] = x;
                z[v] = y;
                z
            })
            .collect();
        let g2 = gram(&vecs);
        for i in 0..4 {
            for j in 0..4 {
                assert!((g[i][j] - g2[i][j]).norm() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn missing_closing_edge_keeps_weight_on_last_vertex() {
        let ops = [
            [cz(0.4, 0.0), cz(0.1, 0.3), ZERO, ZERO],
            [ZERO, cz(0.2, -0.1), cz(0.5, 0.0), ZERO],
            [ZERO, ZERO, cz(0.3, 0.2), cz(0.25, 0.0)],
            [ZERO, ZERO, ZERO, cz(-0.2, 0.15)],
            [cz(0.3, 0.0), ZERO, ZERO, ZERO],
        ];
        let g = gram(&ops);
        let w = solve_cycle(&g, 0.16);
        assert_eq!(w.x, g[0][0].re);
        let e = cycle_operators(&g, &w);
        assert_eq!(e[3].0, ZERO);
        assert!((e[3].1.norm_sqr() - w.w3).abs() < 1e-15);
    }
}
