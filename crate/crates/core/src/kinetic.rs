//! Per-mode exponential integration of the scaled perturbed equation on a periodic box.

use std::collections::HashMap;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::collision::{LinearizedOperator, NonlinearOperator};
use crate::cutoff::{low_pass, plateau};
use crate::equilibrium::{norm_sq, MomentTable};
use crate::error::{check_len, Error, Result};
use crate::linalg::expm_phi1;
use crate::spatial::SpatialGrid;
use crate::spectral::{assemble_lambda, zeroth_projectors, Branch};
use crate::velocity::{Flavor, KernelProjector, VelocityGrid};

/// Reality-constraint tolerance checked on construction.
pub const REALITY_TOL: f64 = 1e-12;

/// Kinetic field per spatial Fourier mode.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KineticState {
    pub epsilon: f64,
    pub time: f64,
    /// `modes[i]` holds `f̂(ξ_i, ·)` over the velocity nodes.
    pub modes: Vec<Vec<C64>>,
}

fn zeros(m: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); m]
}

impl KineticState {
    pub fn zero(space: &SpatialGrid, velocity_len: usize, epsilon: f64) -> KineticState {
        KineticState {
            epsilon,
            time: 0.0,
            modes: vec![zeros(velocity_len); space.len()],
        }
    }

    /// Largest `|f̂(−ξ) − conj f̂(ξ)|` over modes and nodes.
    pub fn reality_defect(&self, space: &SpatialGrid) -> f64 {
        let mut worst = 0.0f64;
        for (i, f) in self.modes.iter().enumerate() {
            let g = &self.modes[space.negate(i)];
            for (a, b) in f.iter().zip(g) {
                worst = worst.max((b - a.conj()).norm());
            }
        }
        worst
    }

    /// Overwrites every non-canonical mode with the conjugate of its partner and zeroes
    /// the modes removed by dealiasing.
    pub fn symmetrize(&mut self, space: &SpatialGrid) {
        for i in 0..space.len() {
            if !space.is_resolved(i) {
                self.modes[i].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            } else if !space.is_canonical(i) {
                let j = space.negate(i);
                let conj: Vec<C64> = self.modes[j].iter().map(|z| z.conj()).collect();
                self.modes[i] = conj;
            }
        }
        // Self-conjugate modes (ξ = 0) carry real coefficients.
        for i in 0..space.len() {
            if space.negate(i) == i {
                self.modes[i].iter_mut().for_each(|z| z.im = 0.0);
            }
        }
    }

    /// `Σ_ξ ‖f̂(ξ)‖²` in the plain velocity norm.
    pub fn energy(&self, grid: &VelocityGrid) -> Result<f64> {
        self.modes.iter().map(|f| grid.norm_c(f, Flavor::Plain).map(|n| n * n)).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<KineticState> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Multiplies mode `ξ` by `ψ(ε^α|ξ|)`.
pub fn mollify(space: &SpatialGrid, modes: &mut [Vec<C64>], epsilon: f64, alpha: f64) -> Result<()> {
    check_len(space.len(), modes.len())?;
    if !(alpha > 0.0 && alpha < 0.25) {
        return Err(Error::invalid(format!("mollifier exponent must lie in (0, 1/4) (got {alpha})")));
    }
    let s = epsilon.powf(alpha);
    for (i, f) in modes.iter_mut().enumerate() {
        let w = plateau(s * space.xi_norm(i));
        if w != 1.0 {
            f.iter_mut().for_each(|z| *z *= w);
        }
    }
    Ok(())
}

/// Defects recorded while assembling initial data.
#[derive(Clone, Debug, Default, Serialize)]
pub struct InitReport {
    /// Largest `‖P₀^⊥ g_in(ξ)‖` relative to `‖g_in(ξ)‖`.
    pub fluid_defect: f64,
    /// Largest `‖P₀ m(ξ)‖` removed from the microscopic data.
    pub micro_defect: f64,
}

/// Tolerance on the kernel membership of the fluid data.
pub const KERNEL_TOL: f64 = 1e-10;

/// `f_in = ψ(ε^α|D|) g_in + micro`, with the microscopic part projected onto `range(P₀^⊥)`.
pub fn init_state(
    space: &SpatialGrid,
    projector: &KernelProjector,
    g_in: &[Vec<C64>],
    micro: &[Vec<C64>],
    epsilon: f64,
    alpha: f64,
) -> Result<(KineticState, InitReport)> {
    check_len(space.len(), g_in.len())?;
    check_len(space.len(), micro.len())?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive (got {epsilon})")));
    }
    let mut report = InitReport::default();
    let mut fluid = g_in.to_vec();
    for g in &fluid {
        let pc = projector.complement_c(g)?;
        let n: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let d: f64 = pc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            report.fluid_defect = report.fluid_defect.max(d / n);
        }
    }
    if report.fluid_defect > KERNEL_TOL {
        return Err(Error::Precondition {
            what: "fluid data must lie in the collision kernel".into(),
            defect: report.fluid_defect,
        });
    }
    mollify(space, &mut fluid, epsilon, alpha)?;
    let mut modes = Vec::with_capacity(space.len());
    for (g, m) in fluid.iter().zip(micro) {
        let mc = projector.complement_c(m)?;
        let removed: f64 = m.iter().zip(&mc).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        report.micro_defect = report.micro_defect.max(removed);
        modes.push(g.iter().zip(&mc).map(|(a, b)| a + b).collect());
    }
    let mut state = KineticState { epsilon, time: 0.0, modes };
    let defect = state.reality_defect(space);
    if defect > REALITY_TOL {
        return Err(Error::Precondition { what: "initial data must be real in space".into(), defect });
    }
    state.symmetrize(space);
    Ok((state, report))
}

/// `e^{ΔtΛ̂}` and `Δt·φ₁(ΔtΛ̂)` for one mode.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub exp: Mat<C64>,
    pub weight: Mat<C64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct PropagatorKey {
    xi: [u64; 3],
    epsilon: u64,
    dt: u64,
    hash: String,
}

/// Per-mode propagators keyed by `(ξ, ε, Δt, operator hash)`.
#[derive(Default)]
pub struct PropagatorCache {
    entries: HashMap<PropagatorKey, Arc<Propagator>>,
}

impl PropagatorCache {
    pub fn new() -> PropagatorCache {
        PropagatorCache::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&mut self, op: &LinearizedOperator, xi: [f64; 3], epsilon: f64, dt: f64) -> Result<Arc<Propagator>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive (got {dt})")));
        }
        let key = PropagatorKey {
            xi: xi.map(f64::to_bits),
            epsilon: epsilon.to_bits(),
            dt: dt.to_bits(),
            hash: op.grid_hash(),
        };
        if let Some(p) = self.entries.get(&key) {
            return Ok(p.clone());
        }
        let z = assemble_lambda(op, xi, epsilon)? * faer::Scale(C64::new(dt, 0.0));
        let (exp, phi) = expm_phi1(&z)?;
        let p = Arc::new(Propagator {
            exp,
            weight: phi * faer::Scale(C64::new(dt, 0.0)),
        });
        self.entries.insert(key, p.clone());
        Ok(p)
    }
}

pub(crate) fn matvec(a: &Mat<C64>, x: &[C64], out: &mut [C64]) {
    out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for (j, xj) in x.iter().enumerate() {
        if *xj == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, aij) in out.iter_mut().zip(a.col(j).iter()) {
            *o += aij * xj;
        }
    }
}

/// The kinetic time stepper: linear propagators plus the optional quadratic/cubic source.
pub struct KineticSolver<'a> {
    pub space: &'a SpatialGrid,
    pub op: &'a LinearizedOperator,
    /// `None` integrates the linear flow only.
    pub nonlinear: Option<&'a NonlinearOperator>,
    pub cache: PropagatorCache,
}

impl<'a> KineticSolver<'a> {
    pub fn new(space: &'a SpatialGrid, op: &'a LinearizedOperator, nonlinear: Option<&'a NonlinearOperator>) -> Result<KineticSolver<'a>> {
        if let Some(n) = nonlinear {
            check_len(op.len(), n.grid().len())?;
        }
        Ok(KineticSolver {
            space,
            op,
            nonlinear,
            cache: PropagatorCache::new(),
        })
    }

    /// `N̂ = ε⁻¹Q(f,f) + T(f,f,f)` by collocation, dealiased.
    pub fn source(&self, state: &KineticState) -> Result<Option<Vec<Vec<C64>>>> {
        let Some(nl) = self.nonlinear else {
            return Ok(None);
        };
        let m = self.op.len();
        let pts = self.space.len();
        let mut fields = vec![0.0; m * pts];
        let mut coeffs = zeros(pts);
        for k in 0..m {
            for (i, c) in coeffs.iter_mut().enumerate() {
                *c = state.modes[i][k];
            }
            let vals = self.space.to_physical(&coeffs)?;
            fields[k * pts..(k + 1) * pts].copy_from_slice(&vals);
        }
        let out = nl.kinetic_source(&fields, pts, 1.0 / state.epsilon)?;
        let mut hat = vec![zeros(m); pts];
        for k in 0..m {
            let spec = self.space.to_spectral(&out[k * pts..(k + 1) * pts])?;
            for (i, z) in spec.into_iter().enumerate() {
                hat[i][k] = if self.space.is_resolved(i) { z } else { C64::new(0.0, 0.0) };
            }
        }
        Ok(Some(hat))
    }

    /// One ETD1 step `f ← e^{ΔtΛ̂}f + Δtφ₁(ΔtΛ̂)N̂` on every resolved mode.
    pub fn step(&mut self, state: &KineticState, dt: f64) -> Result<KineticState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive (got {dt})")));
        }
        let source = self.source(state)?;
        let m = self.op.len();
        let mut next = KineticState {
            epsilon: state.epsilon,
            time: state.time + dt,
            modes: vec![zeros(m); self.space.len()],
        };
        let mut tmp = zeros(m);
        for i in self.space.active_modes() {
            let p = self.cache.get(self.op, self.space.xi(i), state.epsilon, dt)?;
            matvec(&p.exp, &state.modes[i], &mut next.modes[i]);
            if let Some(src) = &source {
                matvec(&p.weight, &src[i], &mut tmp);
                for (a, b) in next.modes[i].iter_mut().zip(&tmp) {
                    *a += b;
                }
            }
            if next.modes[i].iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite { mode: i, time: next.time });
            }
        }
        next.symmetrize(self.space);
        Ok(next)
    }

    /// Steps from `state.time` to `t_final` with a uniform step no larger than the policy's,
    /// calling `record` on the initial state and after every step.
    pub fn evolve(
        &mut self,
        state: &KineticState,
        t_final: f64,
        policy: &DtPolicy,
        mut record: impl FnMut(&KineticState) -> Result<()>,
    ) -> Result<KineticState> {
        if !(t_final > state.time) {
            return Err(Error::invalid(format!(
                "final time {t_final} must exceed the current time {}",
                state.time
            )));
        }
        let (steps, dt) = policy.uniform_steps(state.time, t_final, state.epsilon)?;
        let t0 = state.time;
        record(state)?;
        let mut cur = state.clone();
        for n in 1..=steps {
            cur = self.step(&cur, dt)?;
            cur.time = if n == steps { t_final } else { t0 + n as f64 * dt };
            record(&cur)?;
        }
        Ok(cur)
    }
}

/// Time-step selection `Δt = min(Δt_fluid, c_stab·ε²)` unless overridden.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DtPolicy {
    pub dt_fluid: f64,
    pub c_stab: f64,
    pub dt_override: Option<f64>,
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy {
            dt_fluid: 1e-3,
            c_stab: 0.5,
            dt_override: None,
        }
    }
}

impl DtPolicy {
    pub fn dt_max(&self, epsilon: f64) -> f64 {
        self.dt_override.unwrap_or_else(|| self.dt_fluid.min(self.c_stab * epsilon * epsilon))
    }

    /// Number of steps and the uniform step covering `[t0, t1]`.
    pub fn uniform_steps(&self, t0: f64, t1: f64, epsilon: f64) -> Result<(usize, f64)> {
        let dt = self.dt_max(epsilon);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive (got {dt})")));
        }
        let n = (((t1 - t0) / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok((n, (t1 - t0) / n as f64))
    }
}

/// Per-mode norms of one state: `(‖f̂‖, ‖P₀f̂‖, ‖P₀^⊥f̂‖_γ)`.
pub fn mode_norms(grid: &VelocityGrid, projector: &KernelProjector, f: &[C64]) -> Result<[f64; 3]> {
    let p0 = projector.project_c(f)?;
    let pc: Vec<C64> = f.iter().zip(&p0).map(|(a, b)| a - b).collect();
    Ok([
        grid.norm_c(f, Flavor::Plain)?,
        grid.norm_c(&p0, Flavor::Plain)?,
        grid.norm_c(&pc, Flavor::Gamma)?,
    ])
}

/// One trajectory row: `(t, mode, ‖f̂‖, ‖P₀f̂‖, ‖P₀^⊥f̂‖_γ)`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub mode: usize,
    pub norm: f64,
    pub fluid_norm: f64,
    pub micro_gamma_norm: f64,
}

/// Records [`TrajectoryRow`]s for the resolved canonical modes.
pub struct TrajectoryRecorder<'a> {
    pub grid: &'a VelocityGrid,
    pub projector: &'a KernelProjector,
    pub space: &'a SpatialGrid,
    pub rows: Vec<TrajectoryRow>,
}

impl<'a> TrajectoryRecorder<'a> {
    pub fn new(grid: &'a VelocityGrid, projector: &'a KernelProjector, space: &'a SpatialGrid) -> Self {
        TrajectoryRecorder {
            grid,
            projector,
            space,
            rows: Vec::new(),
        }
    }

    pub fn record(&mut self, state: &KineticState) -> Result<()> {
        for i in self.space.active_modes() {
            let [a, b, c] = mode_norms(self.grid, self.projector, &state.modes[i])?;
            self.rows.push(TrajectoryRow {
                t: state.time,
                mode: i,
                norm: a,
                fluid_norm: b,
                micro_gamma_norm: c,
            });
        }
        Ok(())
    }
}

/// `(χ(ε|ξ|/κ)·Σ_⋆𝒫_⋆^(0) f, remainder)` for one mode; `P₀ f` at `ξ = 0`.
///
/// The zeroth-order projectors stand in for the full spectral projector, so the split
/// carries an `O(|ξ|)` error.
pub fn split_fluid_remainder(
    grid: &VelocityGrid,
    moments: &MomentTable,
    projector: &KernelProjector,
    field: &[C64],
    xi: [f64; 3],
    epsilon: f64,
    kappa: f64,
) -> Result<(Vec<C64>, Vec<C64>)> {
    check_len(grid.len(), field.len())?;
    let r = norm_sq(xi).sqrt();
    let fluid = if r == 0.0 {
        projector.project_c(field)?
    } else {
        let w = low_pass(epsilon * r, kappa);
        if w == 0.0 {
            zeros(field.len())
        } else {
            let z = zeroth_projectors(grid, moments, xi)?;
            let mut acc = zeros(field.len());
            for b in [Branch::Ns, Branch::Heat, Branch::WavePlus, Branch::WaveMinus] {
                for (a, x) in acc.iter_mut().zip(z.apply(b, field)?) {
                    *a += x * w;
                }
            }
            acc
        }
    };
    let rem = field.iter().zip(&fluid).map(|(a, b)| a - b).collect();
    Ok((fluid, rem))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{assemble_linearized, CollisionKernel, KernelKind};
    use crate::equilibrium::equilibrium_moments;
    use crate::spatial::SpatialSpec;
    use crate::velocity::{build_velocity_grid, kernel_projector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    struct Fixture {
        op: LinearizedOperator,
        nl: NonlinearOperator,
        moments: MomentTable,
    }

    fn fixture() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let grid = build_velocity_grid(4, 6.0, 1.0).unwrap();
            let kernel = CollisionKernel::new(KernelKind::HardSphere, 4, 4).unwrap();
            Fixture {
                op: assemble_linearized(&grid, &kernel).unwrap(),
                nl: NonlinearOperator::new(&grid, &kernel).unwrap(),
                moments: equilibrium_moments(&grid),
            }
        })
    }

    fn space() -> SpatialGrid {
        SpatialGrid::new(SpatialSpec {
            dimension: 1,
            modes_per_axis: 8,
            box_length: 4.0 * std::f64::consts::PI,
        })
        .unwrap()
    }

    fn random_state(sp: &SpatialGrid, m: usize, eps: f64, amp: f64, seed: u64) -> KineticState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = KineticState::zero(sp, m, eps);
        for i in sp.active_modes() {
            let sq = fixture().op.grid().sqrt_mq();
            s.modes[i] = (0..m)
                .map(|k| C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp)) * sq[k])
                .collect();
        }
        s.symmetrize(sp);
        s
    }

    fn max_diff(a: &KineticState, b: &KineticState) -> f64 {
        a.modes
            .iter()
            .flatten()
            .zip(b.modes.iter().flatten())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn mollifier_plateau_and_support() {
        let sp = SpatialGrid::new(SpatialSpec {
            dimension: 1,
            modes_per_axis: 32,
            box_length: 2.0 * std::f64::consts::PI,
        })
        .unwrap();
        let mut modes = vec![vec![C64::new(1.0, 0.5); 3]; sp.len()];
        let eps: f64 = 1e-6;
        let alpha = 0.2;
        mollify(&sp, &mut modes, eps, alpha).unwrap();
        let s = eps.powf(alpha);
        for (i, f) in modes.iter().enumerate() {
            let r = s * sp.xi_norm(i);
            if r <= 1.0 {
                assert_eq!(f[0], C64::new(1.0, 0.5));
            }
            if r >= 2.0 {
                assert_eq!(f[0], C64::new(0.0, 0.0));
            }
            assert!(f[0].norm() <= C64::new(1.0, 0.5).norm());
        }
        assert!(mollify(&sp, &mut modes, eps, 0.3).is_err());
    }

    #[test]
    fn propagator_of_zero_matrix_is_identity_and_cached() {
        let op = &fixture().op;
        let mut cache = PropagatorCache::new();
        let p = cache.get(op, [0.5, 0.0, 0.0], 0.1, 1e-3).unwrap();
        let q = cache.get(op, [0.5, 0.0, 0.0], 0.1, 1e-3).unwrap();
        assert!(Arc::ptr_eq(&p, &q));
        assert_eq!(cache.len(), 1);
        let (e, _) = expm_phi1(&Mat::<C64>::zeros(4, 4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(e[(i, j)], C64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
            }
        }
    }

    #[test]
    fn zero_state_and_kernel_zero_mode_are_stationary() {
        let sp = space();
        let f = fixture();
        let m = f.op.len();
        let mut solver = KineticSolver::new(&sp, &f.op, Some(&f.nl)).unwrap();
        let z = KineticState::zero(&sp, m, 0.2);
        let z1 = solver.step(&z, 1e-3).unwrap();
        assert!(z1.modes.iter().flatten().all(|x| x.norm() == 0.0));

        let mut lin = KineticSolver::new(&sp, &f.op, None).unwrap();
        let mut s = KineticState::zero(&sp, m, 0.2);
        let g = f.op.grid().sample_weighted(|v| 0.3 + 0.2 * v[1] - 0.1 * norm_sq(v));
        s.modes[0] = g.iter().map(|x| C64::new(*x, 0.0)).collect();
        let s1 = lin.step(&s, 1e-2).unwrap();
        for (a, b) in s1.modes[0].iter().zip(&s.modes[0]) {
            assert!((a - b).norm() <= 1e-10 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn linear_flow_matches_dense_exponential_and_dissipates() {
        let sp = space();
        let f = fixture();
        let m = f.op.len();
        let eps = 0.3;
        let s0 = random_state(&sp, m, eps, 0.1, 7);
        let mut lin = KineticSolver::new(&sp, &f.op, None).unwrap();
        let mut s = s0.clone();
        let mut e = s.energy(f.op.grid()).unwrap();
        for _ in 0..10 {
            s = lin.step(&s, 2e-3).unwrap();
            let e1 = s.energy(f.op.grid()).unwrap();
            assert!(e1 <= e * (1.0 + 1e-12));
            e = e1;
            assert!(s.reality_defect(&sp) <= 1e-10);
        }
        // One exponential over the whole interval.
        let i = sp.index_of([1, 0]);
        let z = assemble_lambda(&f.op, sp.xi(i), eps).unwrap() * faer::Scale(C64::new(2e-2, 0.0));
        let (big, _) = expm_phi1(&z).unwrap();
        let mut want = zeros(m);
        matvec(&big, &s0.modes[i], &mut want);
        for (a, b) in s.modes[i].iter().zip(&want) {
            assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn nonlinear_step_has_first_order_local_error() {
        let sp = space();
        let f = fixture();
        let m = f.op.len();
        // Non-stiff regime, where the source varies smoothly over a step.
        let eps = 1.0;
        let s0 = random_state(&sp, m, eps, 0.5, 11);
        let mut solver = KineticSolver::new(&sp, &f.op, Some(&f.nl)).unwrap();
        let dt = 2e-4;
        // Reference: many small steps.
        let mut fine = s0.clone();
        for _ in 0..64 {
            fine = solver.step(&fine, dt / 64.0).unwrap();
        }
        let one = solver.step(&s0, dt).unwrap();
        let half = solver.step(&s0, dt / 2.0).unwrap();
        let mut fine_half = s0.clone();
        for _ in 0..32 {
            fine_half = solver.step(&fine_half, dt / 64.0).unwrap();
        }
        let r = max_diff(&one, &fine) / max_diff(&half, &fine_half);
        assert!((3.0..5.0).contains(&r), "local error ratio {r}");
        assert!(one.reality_defect(&sp) <= 1e-10);
    }

    #[test]
    fn conservation_drift_is_negligible() {
        let sp = space();
        let f = fixture();
        let m = f.op.len();
        let s0 = random_state(&sp, m, 1.0, 0.5, 3);
        let mut solver = KineticSolver::new(&sp, &f.op, Some(&f.nl)).unwrap();
        let p = f.op.projector();
        let c0 = p.coefficients_c(&s0.modes[0]).unwrap();
        let policy = DtPolicy {
            dt_override: Some(5e-3),
            ..DtPolicy::default()
        };
        let end = solver.evolve(&s0, 0.1, &policy, |_| Ok(())).unwrap();
        let c1 = p.coefficients_c(&end.modes[0]).unwrap();
        for (a, b) in c0.iter().zip(&c1) {
            assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn init_and_split() {
        let sp = space();
        let f = fixture();
        let grid = f.op.grid();
        let m = grid.len();
        let p = kernel_projector(grid).unwrap();
        let zero = vec![zeros(m); sp.len()];
        let (s, rep) = init_state(&sp, &p, &zero, &zero, 0.1, 0.05).unwrap();
        assert!(s.modes.iter().flatten().all(|z| z.norm() == 0.0));
        assert_eq!(rep.micro_defect, 0.0);

        let mut g = zero.clone();
        let i = sp.index_of([1, 0]);
        g[i] = grid.sample_weighted(|v| v[1]).into_iter().map(|x| C64::new(x, 0.3 * x)).collect();
        g[sp.negate(i)] = g[i].iter().map(|z| z.conj()).collect();
        let (s, _) = init_state(&sp, &p, &g, &zero, 0.1, 0.05).unwrap();
        for k in 0..sp.len() {
            let pc = p.complement_c(&s.modes[k]).unwrap();
            assert!(pc.iter().all(|z| z.norm() <= 1e-12));
        }
        let mut bad = zero.clone();
        bad[0] = grid.sample_weighted(|v| v[0] * v[1]).into_iter().map(|x| C64::new(x, 0.0)).collect();
        assert!(matches!(init_state(&sp, &p, &bad, &zero, 0.1, 0.05), Err(Error::Precondition { .. })));

        // Splitting.
        let field: Vec<C64> = grid.sample_weighted(|v| v[0] * v[1] + 0.2 * v[2]).into_iter().map(|x| C64::new(x, -x)).collect();
        let micro = p.complement_c(&field).unwrap();
        let xi = [0.05, 0.0, 0.0];
        let (fl, rem) = split_fluid_remainder(grid, &f.moments, &p, &field, xi, 1.0, 0.5).unwrap();
        for ((a, b), c) in fl.iter().zip(&rem).zip(&field) {
            assert!((a + b - c).norm() <= 4.0 * f64::EPSILON * c.norm());
        }
        let (fl, _) = split_fluid_remainder(grid, &f.moments, &p, &micro, xi, 1.0, 0.5).unwrap();
        assert!(fl.iter().all(|z| z.norm() <= 1e-10));
        let (fl, rem) = split_fluid_remainder(grid, &f.moments, &p, &field, [2.0, 0.0, 0.0], 1.0, 0.5).unwrap();
        assert!(fl.iter().all(|z| z.norm() == 0.0));
        assert_eq!(rem, field);
    }

    #[test]
    fn state_round_trips_through_json() {
        let sp = space();
        let s = random_state(&sp, fixture().op.len(), 0.1, 0.3, 5);
        let back = KineticState::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
