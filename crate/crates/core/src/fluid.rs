//! Incompressible Navier–Stokes–Fourier solver in the well-prepared regime, and the maps
//! between fluid fields and kinetic fields.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{norm_sq, MomentTable};
use crate::error::{check_len, Error, Result};
use crate::spatial::SpatialGrid;
use crate::velocity::VelocityGrid;

/// Tolerance for the incompressibility and Boussinesq preconditions of [`build_g_in`].
pub const PREPARED_TOL: f64 = 1e-10;

/// Coefficients of the fluid system `E₂(∂ₜu + u·∇u) + ∇p = ν_*Δu`, `C_A(∂ₜθ + u·∇θ) = κ_*Δθ`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FluidCoefficients {
    pub nu_star: f64,
    pub kappa_star: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "C_A")]
    pub c_a: f64,
}

impl FluidCoefficients {
    pub fn viscosity(&self) -> f64 {
        self.nu_star / self.e2
    }
    pub fn diffusivity(&self) -> f64 {
        self.kappa_star / self.c_a
    }
}

/// Fourier coefficients of `(ρ, u, θ)` on every mode of a [`SpatialGrid`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FluidState {
    pub rho: Vec<C64>,
    pub u: Vec<[C64; 3]>,
    pub theta: Vec<C64>,
    pub time: f64,
    pub coefficients: FluidCoefficients,
    /// Set once the advective CFL number has exceeded 1.
    pub cfl_warning: Option<String>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `û ← (Id − ξ⊗ξ/|ξ|²) û` per mode; the zero mode is untouched.
pub fn leray_project(space: &SpatialGrid, u: &mut [[C64; 3]]) -> Result<()> {
    check_len(space.len(), u.len())?;
    for (i, ui) in u.iter_mut().enumerate() {
        let xi = space.xi(i);
        let r2 = norm_sq(xi);
        if r2 == 0.0 {
            continue;
        }
        let d = (ui[0] * xi[0] + ui[1] * xi[1] + ui[2] * xi[2]) / r2;
        for a in 0..3 {
            ui[a] -= d * xi[a];
        }
    }
    Ok(())
}

impl FluidState {
    /// Well-prepared state: `u` Leray-projected and `ρ = −θ` on nonzero modes; the zero
    /// mode of `ρ` is kept as given.
    pub fn new(space: &SpatialGrid, rho: Vec<C64>, u: Vec<[C64; 3]>, theta: Vec<C64>, coefficients: FluidCoefficients) -> Result<FluidState> {
        check_len(space.len(), rho.len())?;
        check_len(space.len(), theta.len())?;
        let mut s = FluidState {
            rho,
            u,
            theta,
            time: 0.0,
            coefficients,
            cfl_warning: None,
        };
        s.enforce_constraints(space)?;
        Ok(s)
    }

    fn enforce_constraints(&mut self, space: &SpatialGrid) -> Result<()> {
        leray_project(space, &mut self.u)?;
        for i in 0..space.len() {
            if !space.is_resolved(i) {
                self.u[i] = [zero(); 3];
                self.theta[i] = zero();
                self.rho[i] = zero();
            } else if i != 0 {
                self.rho[i] = -self.theta[i];
            }
        }
        Ok(())
    }

    /// Largest `|ξ·û(ξ)|/|ξ|` over nonzero modes, relative to the ℓ² norm of the whole field.
    pub fn divergence_defect(&self, space: &SpatialGrid) -> f64 {
        let total = self.u.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if total == 0.0 {
            return 0.0;
        }
        (0..space.len())
            .filter_map(|i| {
                let xi = space.xi(i);
                let r = norm_sq(xi).sqrt();
                (r > 0.0).then(|| (self.u[i][0] * xi[0] + self.u[i][1] * xi[1] + self.u[i][2] * xi[2]).norm() / r)
            })
            .fold(0.0, f64::max)
            / total
    }

    /// Largest `|ρ̂ + θ̂|` over nonzero modes.
    pub fn boussinesq_defect(&self) -> f64 {
        self.rho
            .iter()
            .zip(&self.theta)
            .skip(1)
            .map(|(r, t)| (r + t).norm())
            .fold(0.0, f64::max)
    }

    /// `½ Σ_ξ (E₂|û|² + C_A|θ̂|²)`.
    pub fn energy(&self) -> f64 {
        let c = self.coefficients;
        0.5 * self
            .u
            .iter()
            .zip(&self.theta)
            .map(|(u, t)| c.e2 * u.iter().map(|z| z.norm_sqr()).sum::<f64>() + c.c_a * t.norm_sqr())
            .sum::<f64>()
    }
}

/// Advection terms `(u·∇u, u·∇θ)` evaluated pseudo-spectrally and dealiased.
fn advection(space: &SpatialGrid, s: &FluidState) -> Result<(Vec<[C64; 3]>, Vec<C64>)> {
    let m = space.len();
    let i_xi = |i: usize, a: usize| C64::new(0.0, space.xi(i)[a]);
    let phys = |f: &dyn Fn(usize) -> C64| -> Result<Vec<f64>> { space.to_physical(&(0..m).map(f).collect::<Vec<_>>()) };
    let u: Vec<Vec<f64>> = (0..3).map(|a| phys(&|i| s.u[i][a])).collect::<Result<_>>()?;
    let dims = space.dimension();
    let mut adv_u = vec![[zero(); 3]; m];
    for a in 0..3 {
        let mut acc = vec![0.0; m];
        for b in 0..dims {
            let grad = phys(&|i| i_xi(i, b) * s.u[i][a])?;
            for p in 0..m {
                acc[p] += u[b][p] * grad[p];
            }
        }
        let hat = space.to_spectral(&acc)?;
        for i in 0..m {
            adv_u[i][a] = hat[i];
        }
    }
    let mut acc = vec![0.0; m];
    for b in 0..dims {
        let grad = phys(&|i| i_xi(i, b) * s.theta[i])?;
        for p in 0..m {
            acc[p] += u[b][p] * grad[p];
        }
    }
    let adv_t = space.to_spectral(&acc)?;
    Ok((adv_u, adv_t))
}

/// One step: exact diffusion per mode, explicit dealiased advection, then projection.
pub fn step_nsf(space: &SpatialGrid, state: &FluidState, dt: f64, advect: bool) -> Result<FluidState> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive (got {dt})")));
    }
    let mut next = state.clone();
    let (adv_u, adv_t) = if advect {
        advection(space, state)?
    } else {
        (vec![[zero(); 3]; space.len()], vec![zero(); space.len()])
    };
    if advect {
        let umax = (0..3)
            .map(|a| space.to_physical(&state.u.iter().map(|x| x[a]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .flat_map(|v| v.iter().map(|x| x.abs()))
            .fold(0.0, f64::max);
        let dx = space.spec().box_length / space.modes_per_axis() as f64;
        let cfl = umax * dt / dx;
        if cfl > 1.0 && next.cfl_warning.is_none() {
            next.cfl_warning = Some(format!("advective CFL number {cfl:.3} exceeds 1 at t = {}", state.time));
        }
    }
    let (nu, kappa) = (state.coefficients.viscosity(), state.coefficients.diffusivity());
    for i in 0..space.len() {
        let r2 = norm_sq(space.xi(i));
        let eu = (-nu * r2 * dt).exp();
        let et = (-kappa * r2 * dt).exp();
        for a in 0..3 {
            next.u[i][a] = eu * (state.u[i][a] - dt * adv_u[i][a]);
        }
        next.theta[i] = et * (state.theta[i] - dt * adv_t[i]);
    }
    next.enforce_constraints(space)?;
    next.time = state.time + dt;
    for (i, u) in next.u.iter().enumerate() {
        if !(u.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && next.theta[i].re.is_finite() && next.theta[i].im.is_finite()) {
            return Err(Error::NonFinite { mode: i, time: next.time });
        }
    }
    Ok(next)
}

/// `(ρ, u, θ)` of a kinetic field by the moment functionals that invert [`lift_maxwellian`].
pub fn fluid_moments(grid: &VelocityGrid, moments: &MomentTable, f: &[C64]) -> Result<(C64, [C64; 3], C64)> {
    check_len(grid.len(), f.len())?;
    let d = moments.fluid_denominator();
    let b = 2.0 * moments.e0 * moments.k_g / (3.0 * moments.e2) - 1.0;
    let c = moments.e0 / (3.0 * moments.e2);
    let (mut rho, mut u, mut theta) = (zero(), [zero(); 3], zero());
    for ((v, x), (sq, w)) in grid.nodes().iter().zip(f).zip(grid.sqrt_mq().iter().zip(grid.weights())) {
        let s = norm_sq(*v);
        let fx = x * (sq * w);
        rho += fx * (1.0 + b * 0.5 * s);
        theta += fx * (c * s - 1.0);
        for a in 0..3 {
            u[a] += fx * v[a];
        }
    }
    Ok((rho / d, u.map(|z| z / moments.e2), theta / d))
}

/// `{ρ + u·v + θ(|v|²/2 − K_g)}√μ_q`.
pub fn lift_maxwellian(grid: &VelocityGrid, moments: &MomentTable, rho: C64, u: [C64; 3], theta: C64) -> Vec<C64> {
    grid.nodes()
        .iter()
        .zip(grid.sqrt_mq())
        .map(|(v, sq)| (rho + u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + theta * (0.5 * norm_sq(*v) - moments.k_g)) * *sq)
        .collect()
}

/// Well-prepared kinetic data `{u·v + (K_g/(1+K_g)·θ − ρ/(1+K_g))(|v|²/2 − K_g − 1)}√μ_q`
/// for one mode with wave vector `xi`.
pub fn build_g_in(grid: &VelocityGrid, moments: &MomentTable, xi: [f64; 3], rho: C64, u: [C64; 3], theta: C64) -> Result<Vec<C64>> {
    let scale = 1.0f64.max(rho.norm() + theta.norm() + u.iter().map(|z| z.norm()).sum::<f64>());
    let r = norm_sq(xi).sqrt();
    if r > 0.0 {
        let div = (u[0] * xi[0] + u[1] * xi[1] + u[2] * xi[2]).norm() / r;
        if div > PREPARED_TOL * scale {
            return Err(Error::Precondition { what: "incompressibility".into(), defect: div });
        }
    }
    let bous = (rho + theta).norm();
    if bous > PREPARED_TOL * scale {
        return Err(Error::Precondition { what: "Boussinesq relation".into(), defect: bous });
    }
    let kg = moments.k_g;
    let c = (kg * theta - rho) / (1.0 + kg);
    Ok(grid
        .nodes()
        .iter()
        .zip(grid.sqrt_mq())
        .map(|(v, sq)| (u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + c * (0.5 * norm_sq(*v) - kg - 1.0)) * *sq)
        .collect())
}
