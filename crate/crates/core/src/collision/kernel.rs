//! Collision kernels `B = |v − v*|^γ b(cos θ)` and quadrature on the unit sphere.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

/// Kernel family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `γ = 1`, `b ≡ 1` on the whole sphere.
    HardSphere,
    /// Inverse-power family with `p ∈ (5/2, 3)`: `γ = 2p − 5`,
    /// `b = 1_{θ ≤ π/2} (sin^{p−3}(θ/2) − cos^{p−3}(θ/2))²`.
    HardPotential { p: f64 },
}

impl KernelKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelKind::HardSphere => Ok(()),
            KernelKind::HardPotential { p } if p > 2.5 && p < 3.0 => Ok(()),
            KernelKind::HardPotential { p } => Err(Error::invalid(format!(
                "hard-potential exponent p must lie in (5/2, 3), got {p}"
            ))),
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            KernelKind::HardSphere => 1.0,
            KernelKind::HardPotential { p } => 2.0 * p - 5.0,
        }
    }

    /// Angular factor as a function of the deflection angle `θ ∈ [0, π]`.
    pub fn b(&self, theta: f64) -> f64 {
        match *self {
            KernelKind::HardSphere => 1.0,
            KernelKind::HardPotential { p } => {
                if theta > FRAC_PI_2 || theta <= 0.0 {
                    return 0.0;
                }
                let (s, c) = (0.5 * theta).sin_cos();
                let d = s.powf(p - 3.0) - c.powf(p - 3.0);
                d * d
            }
        }
    }

    /// Closed-form upper bound `2^{4−p} π / (p − 2)` on `∫ b dσ` for the inverse-power family.
    pub fn angular_mass_bound(&self) -> Option<f64> {
        match *self {
            KernelKind::HardSphere => None,
            KernelKind::HardPotential { p } => Some(2f64.powf(4.0 - p) * PI / (p - 2.0)),
        }
    }
}

/// One node of a product rule on the sphere, in the `(θ, φ)` parametrization around the
/// relative-velocity axis. `weight` is the surface measure `sin θ dθ dφ`.
#[derive(Clone, Copy, Debug)]
pub struct AngularNode {
    pub theta: f64,
    pub cos_t: f64,
    pub sin_t: f64,
    pub cos_p: f64,
    pub sin_p: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct AngularRule {
    pub n_theta: usize,
    pub n_phi: usize,
    pub nodes: Vec<AngularNode>,
}

impl AngularRule {
    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// Points per graded panel for the inverse-power rule.
const PANEL_POINTS: usize = 4;
/// Width ratio between consecutive panels approaching `θ = 0`.
const PANEL_RATIO: f64 = 0.25;

/// Product rule: uniform in azimuth; Gauss–Legendre on `[0, π]` for hard spheres,
/// geometrically graded Gauss panels on `[0, π/2]` for the inverse-power family.
pub fn angular_rule(kind: KernelKind, n_theta: usize, n_phi: usize) -> Result<AngularRule> {
    if n_theta < 4 || n_phi < 4 {
        return Err(Error::invalid(format!(
            "angular rule needs n_theta, n_phi >= 4 (got {n_theta}, {n_phi})"
        )));
    }
    kind.validate()?;
    let (theta, wt) = match kind {
        KernelKind::HardSphere => gauss_legendre_on(0.0, PI, n_theta),
        KernelKind::HardPotential { .. } => graded_theta_rule(n_theta),
    };
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    for (t, w) in theta.iter().zip(&wt) {
        let (sin_t, cos_t) = t.sin_cos();
        for k in 0..n_phi {
            let phi = (k as f64 + 0.5) * dphi;
            let (sin_p, cos_p) = phi.sin_cos();
            nodes.push(AngularNode {
                theta: *t,
                cos_t,
                sin_t,
                cos_p,
                sin_p,
                weight: w * sin_t * dphi,
            });
        }
    }
    Ok(AngularRule {
        n_theta,
        n_phi,
        nodes,
    })
}

fn graded_theta_rule(n_theta: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (n_theta / PANEL_POINTS).max(1);
    let extra = n_theta - panels * PANEL_POINTS;
    let mut x = Vec::with_capacity(n_theta);
    let mut w = Vec::with_capacity(n_theta);
    let mut hi = FRAC_PI_2;
    for k in 0..panels {
        let lo = if k + 1 == panels { 0.0 } else { hi * PANEL_RATIO };
        let pts = if k == 0 { PANEL_POINTS + extra } else { PANEL_POINTS };
        let (px, pw) = gauss_legendre_on(lo, hi, pts);
        x.extend(px);
        w.extend(pw);
        hi = lo;
    }
    (x, w)
}

/// Kernel together with its angular rule and the per-node factor `b · weight`.
#[derive(Clone, Debug)]
pub struct CollisionKernel {
    kind: KernelKind,
    rule: AngularRule,
    bw: Vec<f64>,
}

impl CollisionKernel {
    pub fn new(kind: KernelKind, n_theta: usize, n_phi: usize) -> Result<CollisionKernel> {
        let rule = angular_rule(kind, n_theta, n_phi)?;
        let bw = rule.nodes.iter().map(|n| n.weight * kind.b(n.theta)).collect();
        Ok(CollisionKernel { kind, rule, bw })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }
    pub fn gamma(&self) -> f64 {
        self.kind.gamma()
    }
    pub fn rule(&self) -> &AngularRule {
        &self.rule
    }
    /// `b(θ_d) · weight_d` for every node of the rule.
    pub fn b_weights(&self) -> &[f64] {
        &self.bw
    }

    /// Quadrature estimate of `∫_{S²} b dσ`.
    pub fn angular_mass(&self) -> f64 {
        self.bw.iter().sum()
    }

    /// `B(v − v*, σ)`; zero when `v = v*`.
    pub fn kernel_eval(&self, v: [f64; 3], vs: [f64; 3], sigma: [f64; 3]) -> Result<f64> {
        check_unit(sigma)?;
        let d = sub(v, vs);
        let r = norm(d);
        if r == 0.0 {
            return Ok(0.0);
        }
        let c = (dot(d, sigma) / r).clamp(-1.0, 1.0);
        Ok(r.powf(self.gamma()) * self.kind.b(c.acos()))
    }
}

fn check_unit(sigma: [f64; 3]) -> Result<()> {
    let err = (norm(sigma) - 1.0).abs();
    if err > 1e-12 {
        return Err(Error::invalid(format!("sigma is not a unit vector (| |σ| - 1 | = {err:.3e})")));
    }
    Ok(())
}

/// Post-collision velocities `v' = (v+v*)/2 + |v−v*|σ/2`, `v*' = (v+v*)/2 − |v−v*|σ/2`.
pub fn post_collision(v: [f64; 3], vs: [f64; 3], sigma: [f64; 3]) -> Result<([f64; 3], [f64; 3])> {
    check_unit(sigma)?;
    let r = norm(sub(v, vs));
    let mut vp = [0.0; 3];
    let mut vsp = [0.0; 3];
    for a in 0..3 {
        let c = 0.5 * (v[a] + vs[a]);
        vp[a] = c + 0.5 * r * sigma[a];
        vsp[a] = c - 0.5 * r * sigma[a];
    }
    Ok((vp, vsp))
}

#[inline]
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
#[inline]
pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormal frame `(n̂, e₁, e₂)` around the relative velocity of a pair.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairFrame {
    pub center: [f64; 3],
    pub half_r: f64,
    pub r: f64,
    pub n: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

impl PairFrame {
    #[inline]
    pub fn new(v: [f64; 3], vs: [f64; 3]) -> Option<PairFrame> {
        let d = sub(v, vs);
        let r = norm(d);
        if r == 0.0 {
            return None;
        }
        let n = [d[0] / r, d[1] / r, d[2] / r];
        let a = (0..3)
            .min_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
            .unwrap_or(0);
        let mut e1 = [0.0; 3];
        e1[a] = 1.0;
        let p = n[a];
        for k in 0..3 {
            e1[k] -= p * n[k];
        }
        let l = norm(e1);
        for x in e1.iter_mut() {
            *x /= l;
        }
        let e2 = [
            n[1] * e1[2] - n[2] * e1[1],
            n[2] * e1[0] - n[0] * e1[2],
            n[0] * e1[1] - n[1] * e1[0],
        ];
        Some(PairFrame {
            center: [0.5 * (v[0] + vs[0]), 0.5 * (v[1] + vs[1]), 0.5 * (v[2] + vs[2])],
            half_r: 0.5 * r,
            r,
            n,
            e1,
            e2,
        })
    }

    #[inline]
    pub fn sigma(&self, node: &AngularNode) -> [f64; 3] {
        let mut s = [0.0; 3];
        for k in 0..3 {
            s[k] = node.cos_t * self.n[k]
                + node.sin_t * (node.cos_p * self.e1[k] + node.sin_p * self.e2[k]);
        }
        s
    }

    #[inline]
    pub fn post(&self, node: &AngularNode) -> ([f64; 3], [f64; 3]) {
        let s = self.sigma(node);
        let mut vp = [0.0; 3];
        let mut vsp = [0.0; 3];
        for k in 0..3 {
            vp[k] = self.center[k] + self.half_r * s[k];
            vsp[k] = self.center[k] - self.half_r * s[k];
        }
        (vp, vsp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conservation_of_momentum_and_energy() {
        let v = [0.3, -1.2, 2.0];
        let vs = [-0.7, 0.4, 1.1];
        let s = [0.48, 0.6, 0.64];
        let (a, b) = post_collision(v, vs, s).unwrap();
        for k in 0..3 {
            assert!((a[k] + b[k] - v[k] - vs[k]).abs() < 1e-12);
        }
        assert!((dot(a, a) + dot(b, b) - dot(v, v) - dot(vs, vs)).abs() < 1e-12);
    }

    #[test]
    fn identity_and_degenerate_collisions() {
        let v = [0.3, -1.2, 2.0];
        let vs = [-0.7, 0.4, 1.1];
        let d = sub(v, vs);
        let r = norm(d);
        let (a, b) = post_collision(v, vs, [d[0] / r, d[1] / r, d[2] / r]).unwrap();
        for k in 0..3 {
            assert!((a[k] - v[k]).abs() < 1e-14 && (b[k] - vs[k]).abs() < 1e-14);
        }
        let (a, b) = post_collision(v, v, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(a, v);
        assert_eq!(b, v);
        assert!(post_collision(v, vs, [1.0, 0.1, 0.0]).is_err());
    }

    #[test]
    fn kernel_values() {
        let hs = CollisionKernel::new(KernelKind::HardSphere, 16, 8).unwrap();
        let x = hs.kernel_eval([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((x - 2.0).abs() < 1e-15);
        assert_eq!(hs.kernel_eval([1.0; 3], [1.0; 3], [0.0, 0.0, 1.0]).unwrap(), 0.0);
        let hp = KernelKind::HardPotential { p: 2.75 };
        assert_eq!(hp.b(FRAC_PI_2), 0.0);
        assert_eq!(hp.b(2.0), 0.0);
        assert!(hp.b(0.3) > 0.0);
    }

    #[test]
    fn sphere_area_and_support() {
        let r = angular_rule(KernelKind::HardSphere, 16, 8).unwrap();
        assert!((r.total_weight() - 4.0 * PI).abs() < 1e-10);
        let r = angular_rule(KernelKind::HardPotential { p: 2.75 }, 16, 8).unwrap();
        assert!(r.nodes.iter().all(|n| n.theta <= FRAC_PI_2));
        // Four-point panels on a non-polynomial integrand: accurate to about 1e-8.
        assert!((r.total_weight() - 2.0 * PI).abs() < 1e-7);
        assert!(angular_rule(KernelKind::HardSphere, 3, 8).is_err());
        assert!(angular_rule(KernelKind::HardPotential { p: 3.2 }, 8, 8).is_err());
    }

    #[test]
    fn frame_is_orthonormal() {
        let f = PairFrame::new([0.3, -1.2, 2.0], [-0.7, 0.4, 1.1]).unwrap();
        for (a, b, e) in [(f.n, f.n, 1.0), (f.e1, f.e1, 1.0), (f.e2, f.e2, 1.0), (f.n, f.e1, 0.0), (f.n, f.e2, 0.0), (f.e1, f.e2, 0.0)] {
            assert!((dot(a, b) - e).abs() < 1e-14);
        }
    }
}
