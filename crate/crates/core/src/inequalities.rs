//! Numerical certification of the embedding inequalities on a state.
//!
//! For u on (0, L) with zero boundary values, three bounds tie the norms
//! together:
//!
//!   ||u_x||_2^2 <= L^{1-2/p} ||u_x||_p^2          (Holder, p >= 2)
//!   ||u||_2^2   <= L^{3-2/p} ||u_x||_p^2          (Poincare via ||u_x||_p)
//!   ||u||_2^2   <= L^2 ||u_x||_2^2                (Poincare via ||u_x||_2)
//!
//! All norms are evaluated here with the quadrature the energy module uses
//! (node trapezoid plus half-node gradients), under which the discrete
//! analogues hold exactly in exact arithmetic: with h (N+1) = 1 the
//! discrete Holder chain goes through verbatim, and the node sum for
//! ||u||_2^2 carries the factor N h < 1. A margin below the rounding
//! tolerance therefore indicates a quadrature or solver bug, not a sharp
//! state.

use serde::Serialize;

use crate::solver::ReferenceState;

/// Relative rounding tolerance: a margin below -TOL_QUAD * max(rhs, 1)
/// marks the inequality violated.
pub const TOL_QUAD: f64 = 1e-8;

/// Norm values and margins for one checked state.
///
/// Pairs are (lhs, rhs) of the inequalities in the order listed above;
/// margins are rhs - lhs, so all three should be nonnegative.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbeddingReport {
    pub t: f64,
    pub l: f64,
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
    pub lhs3: f64,
    pub rhs3: f64,
    pub margins: [f64; 3],
}

impl EmbeddingReport {
    /// Per-inequality violation flags at the rounding tolerance.
    pub fn violated(&self) -> [bool; 3] {
        let rhs = [self.rhs1, self.rhs2, self.rhs3];
        let mut flags = [false; 3];
        for i in 0..3 {
            flags[i] = self.margins[i] < -TOL_QUAD * rhs[i].max(1.0);
        }
        flags
    }

    pub fn any_violation(&self) -> bool {
        self.violated().iter().any(|&v| v)
    }
}

/// Evaluates all three embedding inequalities on one state.
pub fn check_embeddings(state: &ReferenceState) -> EmbeddingReport {
    let n = state.interior_nodes();
    let h = state.h();
    let l = state.l;
    let p = state.p;

    let mut v_l2 = 0.0;
    for i in 1..=n {
        v_l2 += state.v[i] * state.v[i];
    }
    v_l2 *= h;

    let mut g_l2 = 0.0;
    let mut g_lp = 0.0;
    for k in 0..=n {
        let g = (state.v[k + 1] - state.v[k]) / h;
        g_l2 += g * g;
        g_lp += if p == 2.0 { g * g } else { g.abs().powf(p) };
    }
    g_l2 *= h;
    g_lp *= h;

    // ||u_x||_p^2 on the physical domain; for p = 2 reuse the exact same
    // expression as lhs1 so the degenerate margin is bitwise zero.
    let lhs1 = g_l2 / l;
    let grad_lp_sq =
        if p == 2.0 { lhs1 } else { (l.powf(1.0 - p) * g_lp).powf(2.0 / p) };

    let rhs1 = if p == 2.0 { grad_lp_sq } else { l.powf(1.0 - 2.0 / p) * grad_lp_sq };
    let lhs2 = l * v_l2;
    let rhs2 = if p == 2.0 { l * l * grad_lp_sq } else { l.powf(3.0 - 2.0 / p) * grad_lp_sq };
    let lhs3 = lhs2;
    let rhs3 = l * l * lhs1;

    EmbeddingReport {
        t: state.t,
        l,
        lhs1,
        rhs1,
        lhs2,
        rhs2,
        lhs3,
        rhs3,
        margins: [rhs1 - lhs1, rhs2 - lhs2, rhs3 - lhs3],
    }
}
