//! Inversion of `L` on the complement of its kernel, transport coefficients, and the
//! limiting fluid semigroup.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{zeroth_projectors, Branch};
use crate::collision::LinearizedOperator;
use crate::equilibrium::{norm_sq, MomentTable};
use crate::error::{check_len, Error, Result};
use crate::velocity::{Flavor, KernelProjector, VelocityGrid};

/// Largest relative kernel component accepted in a right-hand side.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;
/// Relative residual guaranteed by [`ComplementSolver::solve`].
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Cholesky factorization of `P₀ − L`, which is positive definite whenever `L` is
/// negative definite on the complement of its kernel.
pub struct ComplementSolver<'a> {
    op: &'a LinearizedOperator,
    llt: faer::linalg::solvers::Llt<f64>,
}

impl<'a> ComplementSolver<'a> {
    pub fn new(op: &'a LinearizedOperator) -> Result<ComplementSolver<'a>> {
        let m = op.len();
        let p = op.projector();
        let w = p.weight();
        let l = op.matrix();
        let a = Mat::from_fn(m, m, |i, j| {
            p.basis().iter().map(|e| e[i] * e[j]).sum::<f64>() * w - l[(i, j)]
        });
        let llt = a
            .llt(Side::Lower)
            .map_err(|e| Error::Numerical(format!("P0 - L is not positive definite: {e:?}")))?;
        Ok(ComplementSolver { op, llt })
    }

    /// `x ⊥ Ker L` with `L x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let grid = self.op.grid();
        check_len(grid.len(), rhs.len())?;
        let norm = grid.norm(rhs, Flavor::Plain)?;
        if norm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let p: &KernelProjector = self.op.projector();
        let defect = p.coefficients(rhs)?.iter().fold(0.0f64, |a, c| a.max(c.abs())) / norm;
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal { defect });
        }
        let mut x = Mat::from_fn(rhs.len(), 1, |i, _| -rhs[i]);
        self.llt.solve_in_place(&mut x);
        let x: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
        let x = p.complement(&x)?;
        let lx = self.op.apply(&x)?;
        let r: Vec<f64> = lx.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let res = grid.norm(&r, Flavor::Plain)? / norm;
        if res > RESIDUAL_TOL {
            return Err(Error::Numerical(format!("complement solve residual {res:.3e} exceeds {RESIDUAL_TOL:e}")));
        }
        Ok(x)
    }
}

/// One-shot form of [`ComplementSolver::solve`].
pub fn invert_on_complement(op: &LinearizedOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    ComplementSolver::new(op)?.solve(rhs)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportCoefficients {
    /// `∫β_L v₁²v₂² μ_q`.
    pub nu_star: f64,
    /// `∫α_L (|v|²/2 − K_A)² v₁² μ_q`.
    pub kappa_star: f64,
    /// Curvature of the shear branch, `ν_*/E₂`.
    pub nu_ns: f64,
    /// Curvature of the heat branch, `κ_*/C_A`.
    pub nu_heat: f64,
    /// Curvature of the acoustic branches for an isotropic operator,
    /// `(2/3)ν_NS + (K·E₀ − 1)ν_heat/2`.
    pub nu_wave: f64,
    /// Acoustic curvature along `wave_direction` from second-order perturbation theory,
    /// without the isotropy assumption.
    pub nu_wave_direct: f64,
    pub wave_direction: [f64; 3],
    /// `√(K·E₂)`.
    pub c_formula: f64,
    /// Sound speed from a dispersion fit, when one was supplied.
    pub c_fit: Option<f64>,
    /// `−(1/(8√(3E₂)))∫B′:B μ_q`.
    pub nu_ns_literal: f64,
    /// `−(1/(6E√(K(K−1))))∫A′·A μ_q`; undefined (NaN) when `K < 1`.
    pub nu_heat_literal: f64,
    /// `ν_NS/3 + E²(K−1)ν_heat/2`.
    pub nu_wave_literal: f64,
    /// Samples `(|v|, α_L(|v|))` and `(|v|, β_L(|v|))` from pointwise ratios.
    pub alpha_profile: Vec<[f64; 2]>,
    pub beta_profile: Vec<[f64; 2]>,
    /// Largest relative kernel component among the right-hand sides.
    pub orthogonality_defect: f64,
}

fn dot(grid: &VelocityGrid, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * grid.weights()[0]
}

fn profile(grid: &VelocityGrid, sol: &[f64], rhs: &[f64]) -> Vec<[f64; 2]> {
    let cut = 1e-6 * rhs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut out: Vec<[f64; 2]> = grid
        .nodes()
        .iter()
        .zip(sol.iter().zip(rhs))
        .filter(|(v, (_, r))| r.abs() > cut && v[0] > 0.0 && v[0] >= v[1] && v[1] >= v[2] && v[2] > 0.0)
        .map(|(v, (x, r))| [norm_sq(*v).sqrt(), -x / r])
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Transport coefficients from `L X = B√μ_q` and `L Y = A√μ_q`.
pub fn transport_coefficients(op: &LinearizedOperator, moments: &MomentTable, wave_direction: [f64; 3]) -> Result<TransportCoefficients> {
    let grid = op.grid();
    let solver = ComplementSolver::new(op)?;
    let w = super::unit(wave_direction)?;
    let k_a = moments.k_a;
    let a_of = |u: [f64; 3]| {
        grid.sample_weighted(move |v| (k_a - 0.5 * norm_sq(v)) * (v[0] * u[0] + v[1] * u[1] + v[2] * u[2]))
    };
    let b_of = |a: [f64; 3], b: [f64; 3]| {
        let ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        grid.sample_weighted(move |v| {
            norm_sq(v) / 3.0 * ab - (v[0] * a[0] + v[1] * a[1] + v[2] * a[2]) * (v[0] * b[0] + v[1] * b[1] + v[2] * b[2])
        })
    };
    let (e1, e2) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let rhs = [a_of(e1), b_of(e1, e2), b_of(e1, e1), a_of(w), b_of(w, w)];
    let mut orthogonality_defect = 0.0f64;
    for r in &rhs {
        let n = grid.norm(r, Flavor::Plain)?;
        let d = op.projector().coefficients(r)?.iter().fold(0.0f64, |a, c| a.max(c.abs())) / n;
        orthogonality_defect = orthogonality_defect.max(d);
    }
    let sols = rhs.iter().map(|r| solver.solve(r)).collect::<Result<Vec<_>>>()?;
    let kappa_star = -dot(grid, &sols[0], &rhs[0]);
    let nu_star = -dot(grid, &sols[1], &rhs[1]);
    let b11 = -dot(grid, &sols[2], &rhs[2]);
    let a_w = -dot(grid, &sols[3], &rhs[3]);
    let b_ww = -dot(grid, &sols[4], &rhs[4]);

    let (e, k, e0, e2c) = (moments.e, moments.kcap, moments.e0, moments.e2);
    let nu_ns = nu_star / e2c;
    let nu_heat = kappa_star / moments.c_a;
    let nu_wave = 2.0 / 3.0 * nu_ns + (k * e0 - 1.0) * nu_heat / 2.0;
    let nu_wave_direct = (4.0 / (e * e) * a_w + 3.0 * k / e * b_ww) / (2.0 * k);
    // Cubic symmetry: six off-diagonal and three diagonal components of B′:B.
    let b_contract = -(6.0 * nu_star + 3.0 * b11);
    let nu_ns_literal = -b_contract / (8.0 * (3.0 * e2c).sqrt());
    let a_contract = -3.0 * kappa_star;
    let nu_heat_literal = -a_contract / (6.0 * e * (k * (k - 1.0)).sqrt());
    let nu_wave_literal = nu_ns / 3.0 + e * e * (k - 1.0) * nu_heat / 2.0;
    Ok(TransportCoefficients {
        nu_star,
        kappa_star,
        nu_ns,
        nu_heat,
        nu_wave,
        nu_wave_direct,
        wave_direction: w,
        c_formula: moments.sound_speed(),
        c_fit: None,
        nu_ns_literal,
        nu_heat_literal,
        nu_wave_literal,
        alpha_profile: profile(grid, &sols[0], &rhs[0]),
        beta_profile: profile(grid, &sols[1], &rhs[1]),
        orthogonality_defect,
    })
}

/// `e^{−ν_NS|ξ|²t}𝒫_NS^(0) + e^{−ν_heat|ξ|²t}𝒫_heat^(0)` applied to one Fourier mode.
/// At `ξ = 0` the full kernel projector is used.
pub fn apply_u_nsf(
    grid: &VelocityGrid,
    moments: &MomentTable,
    coefficients: &TransportCoefficients,
    projector: &KernelProjector,
    xi: [f64; 3],
    f: &[C64],
    t: f64,
) -> Result<Vec<C64>> {
    check_len(grid.len(), f.len())?;
    let r2 = norm_sq(xi);
    if r2 == 0.0 {
        return projector.project_c(f);
    }
    let z = zeroth_projectors(grid, moments, xi)?;
    let a = (-coefficients.nu_ns * r2 * t).exp();
    let b = (-coefficients.nu_heat * r2 * t).exp();
    let ns = z.apply(Branch::Ns, f)?;
    let heat = z.apply(Branch::Heat, f)?;
    Ok(ns.iter().zip(&heat).map(|(x, y)| a * x + b * y).collect())
}
