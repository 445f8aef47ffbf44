//! Per-collision quantities shared by the linear and nonlinear operators.

use super::kernel::{AngularNode, PairFrame};
use crate::equilibrium::norm_sq;
use crate::velocity::VelocityGrid;

/// `exp(|v|²/2 − 1)` at every node.
pub(crate) fn node_exponentials(grid: &VelocityGrid) -> Vec<f64> {
    grid.nodes().iter().map(|v| (0.5 * norm_sq(*v) - 1.0).exp()).collect()
}

/// Equilibrium data at the two post-collision velocities.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PostState {
    pub vp: [f64; 3],
    pub vsp: [f64; 3],
    pub mu_p: f64,
    pub mu_sp: f64,
    /// `√μ_q` at `v'` and `v*'`.
    pub m_p: f64,
    pub m_sp: f64,
}

/// `pair_exp` is `exp(|v|²/2 − 1)·exp(|v*|²/2 − 1)`; energy conservation gives the
/// exponential at `v*'` from the one at `v'`.
#[inline]
pub(crate) fn post_state(frame: &PairFrame, node: &AngularNode, pair_exp: f64) -> PostState {
    let (vp, vsp) = frame.post(node);
    let ep = (0.5 * norm_sq(vp) - 1.0).exp();
    let esp = pair_exp / ep;
    let ip = 1.0 / (1.0 + ep);
    let isp = 1.0 / (1.0 + esp);
    PostState {
        vp,
        vsp,
        mu_p: ip,
        mu_sp: isp,
        m_p: ep.sqrt() * ip,
        m_sp: esp.sqrt() * isp,
    }
}
