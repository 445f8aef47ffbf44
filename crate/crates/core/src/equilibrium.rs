//! The Fermi–Dirac equilibrium, its linearization weight and moment constants.

use serde::Serialize;

use crate::quadrature::gauss_legendre_on;
use crate::velocity::VelocityGrid;

/// Tail mass of the weight outside the velocity box above which a warning is recorded.
pub const TAIL_MASS_WARNING: f64 = 1e-6;

#[inline]
pub fn norm_sq(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Equilibrium as a function of `|v|²`.
#[inline]
pub fn mu_of_sq(r2: f64) -> f64 {
    1.0 / (1.0 + (0.5 * r2 - 1.0).exp())
}

/// `μ(v) = 1 / (1 + exp(|v|²/2 − 1))`.
///
/// The squares are summed in increasing order, so the value is exactly invariant under
/// permutations and sign flips of the components.
#[inline]
pub fn fd_equilibrium(v: [f64; 3]) -> f64 {
    let mut s = v.map(|c| c * c);
    s.sort_by(f64::total_cmp);
    mu_of_sq(s[0] + s[1] + s[2])
}

/// `μ_q = μ(1 − μ)`.
#[inline]
pub fn fd_weight(v: [f64; 3]) -> f64 {
    let m = fd_equilibrium(v);
    m * (1.0 - m)
}

/// Equilibrium moment constants evaluated with the grid quadrature.
#[derive(Clone, Debug, Serialize)]
pub struct MomentTable {
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "E4")]
    pub e4: f64,
    #[serde(rename = "E22")]
    pub e22: f64,
    #[serde(rename = "K_A")]
    pub k_a: f64,
    #[serde(rename = "K_g")]
    pub k_g: f64,
    /// Heat capacity `∫(|v|²/2 − K_A)² μ_q`. Equal to the weighted form below in the
    /// continuum, and the value consistent with the discrete heat mode on any symmetric grid.
    #[serde(rename = "C_A")]
    pub c_a: f64,
    /// `∫(|v|²/2 − K_A)² v₁² (1 − 2μ) μ_q`, the defining integral before integration by parts.
    #[serde(rename = "C_A_weighted")]
    pub c_a_weighted: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "Kcap")]
    pub kcap: f64,
    /// `E2` recomputed with `v₂` and `v₃` in place of `v₁`.
    #[serde(rename = "E2_by_axis")]
    pub e2_by_axis: [f64; 3],
    pub tail_mass: f64,
    pub warnings: Vec<String>,
}

impl MomentTable {
    /// Normalization denominator of the density/temperature functionals.
    pub fn fluid_denominator(&self) -> f64 {
        self.k_a * self.e0 - 1.5 * self.e2
    }

    /// Sound speed `√(K·E2)` of the acoustic branches.
    pub fn sound_speed(&self) -> f64 {
        (self.kcap * self.e2).sqrt()
    }
}

/// Moment constants by grid quadrature, with a tail-mass check against the radial integral.
pub fn equilibrium_moments(grid: &VelocityGrid) -> MomentTable {
    let mut e0 = 0.0;
    let mut e2 = [0.0; 3];
    let mut e4 = 0.0;
    let mut e22 = 0.0;
    for (i, v) in grid.nodes().iter().enumerate() {
        let w = grid.weights()[i] * grid.mq()[i];
        e0 += w;
        for a in 0..3 {
            e2[a] += w * v[a] * v[a];
        }
        e4 += w * v[0].powi(4);
        e22 += w * v[0] * v[0] * v[1] * v[1];
    }
    let k_a = (e4 + 2.0 * e22) / (2.0 * e2[0]);
    let k_g = k_a - 1.0;
    let mut c_a = 0.0;
    let mut c_a_weighted = 0.0;
    for (i, v) in grid.nodes().iter().enumerate() {
        let w = grid.weights()[i] * grid.mq()[i];
        let s = 0.5 * norm_sq(*v) - k_a;
        c_a += w * s * s;
        c_a_weighted += w * s * s * v[0] * v[0] * (1.0 - 2.0 * grid.mu()[i]);
    }
    let e = 3.0 * e2[0];
    let kcap = (3.0 * e4 + 6.0 * e22) / (e * e);
    let tail_mass = radial_tail_mass(grid.extent());
    let mut warnings = Vec::new();
    if tail_mass > TAIL_MASS_WARNING {
        warnings.push(format!(
            "weight mass outside |v| <= {} is {tail_mass:.3e}; enlarge the velocity box",
            grid.extent()
        ));
    }
    MomentTable {
        e0,
        e2: e2[0],
        e4,
        e22,
        k_a,
        k_g,
        c_a,
        c_a_weighted,
        e,
        kcap,
        e2_by_axis: e2,
        tail_mass,
        warnings,
    }
}

/// `∫_{|v|>r0} μ_q dv` by a composite radial Gauss rule. It bounds the mass outside
/// the cube of half-width `r0`.
pub fn radial_tail_mass(r0: f64) -> f64 {
    let mut total = 0.0;
    let mut a = r0.max(0.0);
    while a < r0 + 40.0 {
        let (x, w) = gauss_legendre_on(a, a + 1.0, 20);
        for (r, w) in x.iter().zip(&w) {
            let m = mu_of_sq(r * r);
            total += w * 4.0 * std::f64::consts::PI * r * r * m * (1.0 - m);
        }
        a += 1.0;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_points() {
        let e = (-1.0f64).exp();
        assert!((fd_equilibrium([0.0; 3]) - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((fd_equilibrium([0.0; 3]) - 0.7310585786300049).abs() < 1e-12);
        let s = 2.0f64.sqrt();
        assert_eq!(fd_equilibrium([s, 0.0, 0.0]), 0.5);
        assert_eq!(fd_weight([0.0, s, 0.0]), 0.25);
        assert!((fd_weight([0.0; 3]) - e / (1.0 + e).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn axis_symmetry_is_exact() {
        let v = [0.3, -1.7, 2.2];
        let m = fd_equilibrium(v);
        for w in [[-0.3, -1.7, 2.2], [-1.7, 0.3, 2.2], [2.2, -1.7, -0.3], [0.3, 2.2, 1.7]] {
            assert_eq!(fd_equilibrium(w), m);
        }
    }

    #[test]
    fn weight_in_range() {
        for k in 0..200 {
            let r = 0.05 * k as f64;
            let q = fd_weight([r, 0.0, 0.0]);
            assert!(q > 0.0 && q <= 0.25);
        }
    }

    #[test]
    fn tail_mass_small_for_default_box() {
        assert!(radial_tail_mass(8.0) < 1e-10);
        assert!(radial_tail_mass(3.0) > TAIL_MASS_WARNING);
    }
}
