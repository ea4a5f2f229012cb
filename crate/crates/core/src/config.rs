//! Free constants of the theory, gathered in one record.
//!
//! None of these are pinned by the analysis itself; the defaults below are the
//! values the experiments and tests run with.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    /// Small-curvature threshold for `∫|K| dμ`; must stay below `4π/3`.
    pub eps0: f64,
    /// `min(eps0, eps2)`, the per-bubble mass quantum.
    pub eps0_prime: f64,
    /// Curvature-energy threshold on necks.
    pub eps2: f64,
    /// Mean-oscillation level of the John-Nirenberg radius.
    pub lambda: f64,
    /// Volume-ratio bound `μ(B_r)/πr² < Λ₁`.
    pub lambda1: f64,
    /// Total area bound `μ(D) < Λ₂`.
    pub lambda2: f64,
    /// Weak-`L^{2,∞}` gradient bound on annuli.
    pub lambda3: f64,
    /// Threshold `τ ≤ ε₀` on the curvature integral.
    pub tau: f64,
    /// Mass threshold used to locate bubbles. Half of it, `4π/5`, is the mass
    /// the unit Chen-Li bubble `-log(1+|x|²/4)` carries inside the unit disk.
    pub bubble_eps: f64,
    /// Ratio of the John-Nirenberg radius ladder.
    pub ladder_ratio: f64,
    /// Smallest ladder radius, in grid cells.
    pub ladder_min_cells: f64,
    /// Landmark count for diameter estimates.
    pub landmarks: usize,
    /// Largest spread of the last quartile of `c_k` that still counts as bounded.
    pub bounded_tail_spread: f64,
    /// Extracted bubbles are masked out to this multiple of their scale.
    pub bubble_mask_factor: f64,
    /// Blowup scales at or above this are reported as "converged".
    pub converged_scale: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            eps0: 1.0,
            eps0_prime: 1.0,
            eps2: 1.0,
            lambda: 0.3,
            lambda1: 10.0,
            lambda2: 10.0,
            lambda3: 10.0,
            tau: 1.0,
            bubble_eps: 8.0 * std::f64::consts::PI / 5.0,
            ladder_ratio: 1.05,
            ladder_min_cells: 4.0,
            landmarks: 32,
            bounded_tail_spread: 1.0,
            bubble_mask_factor: 8.0,
            converged_scale: 0.25,
        }
    }
}

impl Constants {
    /// Default atom threshold `ε₀'/2`.
    pub fn atom_threshold(&self) -> f64 {
        self.eps0_prime / 2.0
    }
}
