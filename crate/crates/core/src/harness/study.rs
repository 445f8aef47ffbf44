//! The ε-convergence study against the lifted fluid solution, and the remainder-decay study.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::io;
use super::norms::{mixed_norm, NormTrajectory, TimeFlavor};
use crate::collision::{spectral_gap, CollisionKernel, LinearizedOperator, NonlinearOperator};
use crate::equilibrium::{equilibrium_moments, MomentTable};
use crate::error::{Error, Result};
use crate::fluid::{build_g_in, lift_maxwellian, step_nsf, FluidCoefficients, FluidState};
use crate::kinetic::{init_state, matvec, split_fluid_remainder, KineticSolver, KineticState};
use crate::spatial::SpatialGrid;
use crate::spectral::{transport_coefficients, transverse_pair, TransportCoefficients};
use crate::velocity::{Flavor, VelocityGrid};

/// Everything derived from a configuration that the studies share.
pub struct Setup {
    pub config: RunConfig,
    pub op: LinearizedOperator,
    pub moments: MomentTable,
    pub space: SpatialGrid,
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Setup> {
        config.validate()?;
        let k = &config.kernel;
        let op = io::load_or_assemble(
            config.operator_cache.as_deref().map(std::path::Path::new),
            k.kernel_kind(),
            k.n_theta,
            k.n_phi,
            config.grid.n_per_axis,
            config.grid.extent,
        )?;
        let moments = equilibrium_moments(op.grid());
        let space = SpatialGrid::new(config.space.clone())?;
        Ok(Setup {
            config: config.clone(),
            op,
            moments,
            space,
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        self.op.grid()
    }

    /// Nonlinear evaluator on the (coarser) evolution angular rule.
    pub fn nonlinear_operator(&self) -> Result<NonlinearOperator> {
        let k = &self.config.kernel;
        let kernel = CollisionKernel::new(k.kernel_kind(), k.nonlinear_n_theta, k.nonlinear_n_phi)?;
        NonlinearOperator::new(self.grid(), &kernel)
    }

    pub fn transport(&self) -> Result<TransportCoefficients> {
        transport_coefficients(&self.op, &self.moments, [1.0, 0.0, 0.0])
    }

    pub fn fluid_coefficients(&self, t: &TransportCoefficients) -> FluidCoefficients {
        FluidCoefficients {
            nu_star: t.nu_star,
            kappa_star: t.kappa_star,
            e2: self.moments.e2,
            c_a: self.moments.c_a,
        }
    }

    fn mode_index(&self, k: [i64; 2]) -> Result<usize> {
        let sp = &self.space;
        let k = if sp.dimension() == 1 { [k[0], 0] } else { k };
        let i = sp.index_of(k);
        if sp.wavenumber(i) != k || !sp.is_resolved(i) {
            return Err(Error::invalid(format!("wave number {k:?} is not a resolved mode of the box")));
        }
        Ok(i)
    }
}

fn unit(x: [f64; 3]) -> [f64; 3] {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    x.map(|c| c / n)
}

type FluidFields = (Vec<C64>, Vec<[C64; 3]>, Vec<C64>);

/// Well-prepared fluid data `(ρ, u, θ)` with `ρ = −θ` and `ξ·u = 0` on the configured modes.
pub fn fluid_data(setup: &Setup) -> Result<FluidFields> {
    let sp = &setup.space;
    let n = sp.len();
    let zero = C64::new(0.0, 0.0);
    let (mut rho, mut u, mut theta) = (vec![zero; n], vec![[zero; 3]; n], vec![zero; n]);
    let mut rng = ChaCha8Rng::seed_from_u64(setup.config.seed);
    let a = setup.config.initial.fluid_amplitude;
    for k in &setup.config.initial.fluid_modes {
        let mut i = setup.mode_index(*k)?;
        if i == 0 {
            return Err(Error::invalid("fluid data needs nonzero wave numbers"));
        }
        if !sp.is_canonical(i) {
            i = sp.negate(i);
        }
        let mut draw = || C64::new(rng.random_range(-a..a), rng.random_range(-a..a));
        let (t1, t2) = transverse_pair(unit(sp.xi(i)));
        let (c1, c2, b) = (draw(), draw(), draw());
        let ui = [0, 1, 2].map(|d| c1 * t1[d] + c2 * t2[d]);
        let j = sp.negate(i);
        u[i] = ui;
        u[j] = ui.map(|z| z.conj());
        theta[i] = b;
        theta[j] = b.conj();
        rho[i] = -b;
        rho[j] = -b.conj();
    }
    Ok((rho, u, theta))
}

/// Random microscopic data, `P₀^⊥`-projected and scaled to `amplitude/⟨ξ⟩²` per mode.
pub fn micro_data(setup: &Setup, amplitude: f64) -> Result<Vec<Vec<C64>>> {
    let sp = &setup.space;
    let grid = setup.grid();
    let m = grid.len();
    let mut out = vec![vec![C64::new(0.0, 0.0); m]; sp.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(setup.config.seed.wrapping_add(0x9e37_79b9));
    for k in &setup.config.initial.micro_modes {
        let mut i = setup.mode_index(*k)?;
        if !sp.is_canonical(i) {
            i = sp.negate(i);
        }
        let real = sp.negate(i) == i;
        let raw: Vec<C64> = grid
            .sqrt_mq()
            .iter()
            .map(|s| {
                let re = rng.random_range(-1.0..1.0);
                let im = if real { 0.0 } else { rng.random_range(-1.0..1.0) };
                C64::new(re, im) * *s
            })
            .collect();
        let pc = setup.op.projector().complement_c(&raw)?;
        let n = grid.norm_c(&pc, Flavor::Plain)?;
        let x = sp.xi_norm(i);
        let scale = amplitude / (1.0 + x * x) / n;
        out[i] = pc.iter().map(|z| z * scale).collect();
        let j = sp.negate(i);
        out[j] = out[i].iter().map(|z| z.conj()).collect();
    }
    Ok(out)
}

/// One row of the error table.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorRow {
    pub epsilon: f64,
    /// `‖f − g^ε‖` in `L̃^∞_T H^{1/2}_x L²_v`.
    pub e_sup: f64,
    /// `‖P₀(f − g^ε)‖` in `L²_T Ḣ^{3/2}_x L²_v`.
    pub e_fluid: f64,
    /// `‖P₀^⊥(f − g^ε)‖` in `L²_T H^{3/2}_x L²_γ`.
    pub e_micro: f64,
    /// The full `X^ε` norm of the difference, including the `ε^β`-weighted `H^ℓ` block.
    pub x_norm: f64,
    pub steps: usize,
    pub dt: f64,
    /// Set when the kinetic run failed; the norms are then NaN.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    /// Least-squares slopes of `log E` against `log ε`.
    pub order_sup: Option<f64>,
    pub order_fluid: Option<f64>,
    pub order_micro: Option<f64>,
    /// `1/2 − 2α`.
    pub envelope: f64,
}

/// Saved state of one ε-row, sufficient to continue the run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RowCheckpoint {
    pub kinetic: KineticState,
    pub fluid: FluidState,
    pub total: NormTrajectory,
    pub fluid_part: NormTrajectory,
    pub micro_part: NormTrajectory,
    pub steps: usize,
    pub dt: f64,
}

impl RowCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
    pub fn from_json(s: &str) -> Result<RowCheckpoint> {
        Ok(serde_json::from_str(s)?)
    }
}

fn scale_mode<T: Copy>(v: &mut [T], i: usize, w: f64, f: impl Fn(T, f64) -> T) {
    v[i] = f(v[i], w);
}

/// Initial kinetic and fluid states of one row.
pub fn start_row(setup: &Setup, coefs: FluidCoefficients, epsilon: f64) -> Result<RowCheckpoint> {
    let sp = &setup.space;
    let grid = setup.grid();
    let cfg = &setup.config;
    let (rho, u, theta) = fluid_data(setup)?;
    let g_in: Vec<Vec<C64>> = (0..sp.len())
        .map(|i| build_g_in(grid, &setup.moments, sp.xi(i), rho[i], u[i], theta[i]))
        .collect::<Result<_>>()?;
    let micro = micro_data(setup, cfg.initial.micro_amplitude * epsilon.powf(cfg.initial.micro_exponent))?;
    let (kinetic, _) = init_state(sp, setup.op.projector(), &g_in, &micro, epsilon, cfg.alpha)?;
    let (mut rho_m, mut u_m, mut theta_m) = (rho, u, theta);
    let s = epsilon.powf(cfg.alpha);
    for i in 0..sp.len() {
        let w = crate::cutoff::plateau(s * sp.xi_norm(i));
        scale_mode(&mut rho_m, i, w, |z, w| z * w);
        scale_mode(&mut theta_m, i, w, |z, w| z * w);
        scale_mode(&mut u_m, i, w, |z, w| z.map(|c| c * w));
    }
    let fluid = FluidState::new(sp, rho_m, u_m, theta_m, coefs)?;
    let active = sp.active_modes();
    let xi: Vec<f64> = active.iter().map(|&i| sp.xi_norm(i)).collect();
    let mult: Vec<u32> = active.iter().map(|&i| if sp.negate(i) == i { 1 } else { 2 }).collect();
    let (steps, dt) = cfg.dt.uniform_steps(0.0, cfg.t_final, epsilon)?;
    let mut ck = RowCheckpoint {
        kinetic,
        fluid,
        total: NormTrajectory::new(&xi, &mult),
        fluid_part: NormTrajectory::new(&xi, &mult),
        micro_part: NormTrajectory::new(&xi, &mult),
        steps,
        dt,
    };
    record_difference(setup, &mut ck)?;
    Ok(ck)
}

/// Appends the norms of `f − g^ε` at the current time of the checkpoint.
fn record_difference(setup: &Setup, ck: &mut RowCheckpoint) -> Result<()> {
    let t = ck.kinetic.time;
    if ck.total.last_time().is_some_and(|l| l >= t) {
        return Ok(());
    }
    let sp = &setup.space;
    let grid = setup.grid();
    let p = setup.op.projector();
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for i in sp.active_modes() {
        let g = lift_maxwellian(grid, &setup.moments, ck.fluid.rho[i], ck.fluid.u[i], ck.fluid.theta[i]);
        let d: Vec<C64> = ck.kinetic.modes[i].iter().zip(&g).map(|(x, y)| x - y).collect();
        let p0 = p.project_c(&d)?;
        let pc: Vec<C64> = d.iter().zip(&p0).map(|(x, y)| x - y).collect();
        a.push((grid.norm_c(&d, Flavor::Plain)?, grid.norm_c(&d, Flavor::Gamma)?));
        b.push((grid.norm_c(&p0, Flavor::Plain)?, grid.norm_c(&p0, Flavor::Gamma)?));
        c.push((grid.norm_c(&pc, Flavor::Plain)?, grid.norm_c(&pc, Flavor::Gamma)?));
    }
    ck.total.push(t, &a)?;
    ck.fluid_part.push(t, &b)?;
    ck.micro_part.push(t, &c)?;
    Ok(())
}

/// Advances a row to `t_end` with the row's uniform step.
pub fn advance_row(setup: &Setup, solver: &mut KineticSolver, mut ck: RowCheckpoint, t_end: f64) -> Result<RowCheckpoint> {
    let n = ((t_end - ck.kinetic.time) / ck.dt).round();
    if !(n >= 1.0) || ((ck.kinetic.time + n * ck.dt) - t_end).abs() > 1e-9 * ck.dt.max(t_end) {
        return Err(Error::invalid(format!(
            "segment end {t_end} is not a whole number of steps of {} from {}",
            ck.dt, ck.kinetic.time
        )));
    }
    let t0 = ck.kinetic.time;
    let n0 = (t0 / ck.dt).round() as usize;
    for k in 1..=n as usize {
        let mut next = solver.step(&ck.kinetic, ck.dt)?;
        next.time = if n0 + k == ck.steps { setup.config.t_final } else { (n0 + k) as f64 * ck.dt };
        ck.kinetic = next;
        ck.fluid = step_nsf(&setup.space, &ck.fluid, ck.dt, true)?;
        ck.fluid.time = ck.kinetic.time;
        record_difference(setup, &mut ck)?;
    }
    Ok(ck)
}

/// Evaluates the norms of a finished row.
pub fn finish_row(setup: &Setup, ck: &RowCheckpoint) -> Result<ErrorRow> {
    let eps = ck.kinetic.epsilon;
    let cfg = &setup.config;
    let block = |s: f64| -> Result<[f64; 3]> {
        Ok([
            mixed_norm(&ck.total, s - 1.0, TimeFlavor::SupInTime, Flavor::Plain, false)?,
            mixed_norm(&ck.fluid_part, s, TimeFlavor::L2InTime, Flavor::Plain, true)?,
            mixed_norm(&ck.micro_part, s, TimeFlavor::L2InTime, Flavor::Gamma, false)?,
        ])
    };
    let [e_sup, e_fluid, e_micro] = block(1.5)?;
    let [h_sup, h_fluid, h_micro] = block(cfg.ell)?;
    let r = eps.sqrt();
    let x_norm = e_sup + e_fluid + e_micro / r + eps.powf(cfg.beta) * (h_sup + h_fluid + h_micro / r);
    Ok(ErrorRow {
        epsilon: eps,
        e_sup,
        e_fluid,
        e_micro,
        x_norm,
        steps: ck.steps,
        dt: ck.dt,
        failure: None,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_order(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs every ε-row on `[0, T]`; a failing row is recorded without aborting the others.
pub fn convergence_study(setup: &Setup) -> Result<ErrorTable> {
    let transport = setup.transport()?;
    let coefs = setup.fluid_coefficients(&transport);
    let nl = if setup.config.nonlinear {
        Some(setup.nonlinear_operator()?)
    } else {
        None
    };
    let nl = nl.as_ref();
    let run = |eps: f64| -> Result<ErrorRow> {
        let mut solver = KineticSolver::new(&setup.space, &setup.op, nl)?;
        let ck = start_row(setup, coefs, eps)?;
        let ck = advance_row(setup, &mut solver, ck, setup.config.t_final)?;
        finish_row(setup, &ck)
    };
    // Rows are independent; each runs on its own thread and the results are merged in ladder order.
    let results: Vec<Result<ErrorRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = setup.config.epsilons.iter().map(|&eps| s.spawn(move || run(eps))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("study row panicked".into()))))
            .collect()
    });
    let mut rows = Vec::new();
    for (&eps, r) in setup.config.epsilons.iter().zip(results) {
        rows.push(match r {
            Ok(r) => r,
            Err(e @ (Error::NonFinite { .. } | Error::Numerical(_))) => failed_row(setup, eps, &e),
            Err(e) => return Err(e),
        });
    }
    Ok(table(rows, setup.config.alpha))
}

fn failed_row(setup: &Setup, eps: f64, e: &Error) -> ErrorRow {
    ErrorRow {
        epsilon: eps,
        e_sup: f64::NAN,
        e_fluid: f64::NAN,
        e_micro: f64::NAN,
        x_norm: f64::NAN,
        steps: 0,
        dt: setup.config.dt.dt_max(eps),
        failure: Some(e.to_string()),
    }
}

/// Collects rows and fits the orders.
pub fn table(rows: Vec<ErrorRow>, alpha: f64) -> ErrorTable {
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let col = |f: fn(&ErrorRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    ErrorTable {
        order_sup: fitted_order(&eps, &col(|r| r.e_sup)),
        order_fluid: fitted_order(&eps, &col(|r| r.e_fluid)),
        order_micro: fitted_order(&eps, &col(|r| r.e_micro)),
        envelope: 0.5 - 2.0 * alpha,
        rows,
    }
}

/// Which part of the kinetic field initializes a decay run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayData {
    /// Random `P₀^⊥` data; the remainder is measured.
    Micro,
    /// A transverse-velocity fluid mode; the whole field is measured.
    Fluid,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayFit {
    pub epsilon: f64,
    pub data: DecayData,
    /// Fitted `−d log‖·‖/dt`.
    pub rate: f64,
    /// `rate · ε²`.
    pub rescaled_rate: f64,
    /// Smallest nonzero `|λ|` of `L`.
    pub gap: f64,
    /// `gap / ε²`.
    pub predicted_rate: f64,
    /// Largest relative deviation of the samples from the fitted exponential.
    pub residual: f64,
    /// Set when the residual exceeds 20%.
    pub non_exponential: bool,
    /// `(t, ‖·‖)` samples.
    pub series: Vec<(f64, f64)>,
}

/// Threshold on [`DecayFit::residual`] above which the decay is flagged.
pub const DECAY_RESIDUAL_FLAG: f64 = 0.2;

/// Linear evolution of a single mode; fit of the decay of the measured part.
///
/// Microscopic data are sampled on `t/ε² ∈ [0, window₁/λ_gap]` and fitted on
/// `[window₀, window₁]/λ_gap`; fluid data are sampled on `t ∈ [0, T]`.
pub fn decay_study(setup: &Setup, wavenumber: [i64; 2], epsilon: f64, data: DecayData) -> Result<DecayFit> {
    let sp = &setup.space;
    let grid = setup.grid();
    let i = setup.mode_index(wavenumber)?;
    let xi = sp.xi(i);
    let gap = spectral_gap(&setup.op, 1e-10)?.gap_plain;
    let cfg = &setup.config.decay;
    let field: Vec<C64> = match data {
        DecayData::Micro => {
            let mut sub = setup.config.clone();
            sub.initial.micro_modes = vec![wavenumber];
            let s = Setup {
                config: sub,
                op: setup.op.clone(),
                moments: setup.moments.clone(),
                space: setup.space.clone(),
            };
            micro_data(&s, s.config.initial.micro_amplitude)?.swap_remove(i)
        }
        DecayData::Fluid => {
            let (t1, _) = transverse_pair(unit(xi));
            grid.sample_weighted(|v| (v[0] * t1[0] + v[1] * t1[1] + v[2] * t1[2]) / setup.moments.e2.sqrt())
                .into_iter()
                .map(|x| C64::new(x, 0.0))
                .collect()
        }
    };
    if field.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::invalid("decay study needs nonzero initial data"));
    }
    let (t_end, t_fit) = match data {
        DecayData::Micro => {
            let s = epsilon * epsilon / gap;
            (cfg.window[1] * s, [cfg.window[0] * s, cfg.window[1] * s])
        }
        DecayData::Fluid => (setup.config.t_final, [0.0, setup.config.t_final]),
    };
    let dt = t_end / cfg.samples as f64;
    let mut cache = crate::kinetic::PropagatorCache::new();
    let prop = cache.get(&setup.op, xi, epsilon, dt)?;
    let measure = |f: &[C64]| -> Result<f64> {
        match data {
            DecayData::Micro => {
                let (_, rem) = split_fluid_remainder(grid, &setup.moments, setup.op.projector(), f, xi, epsilon, setup.config.kappa)?;
                grid.norm_c(&rem, Flavor::Plain)
            }
            DecayData::Fluid => grid.norm_c(f, Flavor::Plain),
        }
    };
    let mut f = field;
    let mut series = vec![(0.0, measure(&f)?)];
    let m = f.len();
    for k in 1..=cfg.samples {
        let mut next = vec![C64::new(0.0, 0.0); m];
        matvec(&prop.exp, &f, &mut next);
        f = next;
        series.push((k as f64 * dt, measure(&f)?));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, y)| *t >= t_fit[0] * (1.0 - 1e-12) && *t <= t_fit[1] * (1.0 + 1e-12) && *y > 0.0)
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Numerical("too few positive samples in the decay fit window".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let icpt = my - slope * mt;
    let residual = pts
        .iter()
        .map(|(t, ly)| ((ly - (icpt + slope * t)).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        epsilon,
        data,
        rate: -slope,
        rescaled_rate: -slope * epsilon * epsilon,
        gap,
        predicted_rate: gap / (epsilon * epsilon),
        residual,
        non_exponential: residual > DECAY_RESIDUAL_FLAG,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fit_recovers_power_laws() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powf(0.7)).collect();
        assert!((fitted_order(&x, &y).unwrap() - 0.7).abs() < 1e-12);
        assert!(fitted_order(&x[..1], &y[..1]).is_none());
        assert!(fitted_order(&x, &[f64::NAN, 1.0, 0.5]).is_some());
    }
}
