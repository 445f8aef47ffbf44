//! Matrix-free bilinear and trilinear collision operators.
//!
//! Fields are interpolated at post-collision velocities; the equilibrium factors
//! `√μ_q` and `μ` are evaluated analytically there, which keeps every weight bounded.

use super::geometry::{node_exponentials, post_state};
use super::kernel::{CollisionKernel, PairFrame};
use crate::error::{check_len, Result};
use crate::velocity::{kernel_projector, KernelProjector, Stencil, VelocityGrid};

/// Equilibrium data and quadrature weight of one collision `(v, v*, σ)`.
pub(crate) struct Triple {
    pub i: usize,
    pub j: usize,
    pub w: f64,
    /// `μ` at `v, v*, v', v*'`.
    pub mu: [f64; 4],
    /// `√μ_q` at `v, v*, v', v*'`.
    pub m: [f64; 4],
    pub st_p: Stencil,
    pub st_sp: Stencil,
}

impl Triple {
    /// Weights of `f*'g'`, `f*g`, `f*'g`, `f*g'`, `f*'g*`, `f'g`.
    #[inline]
    pub fn q_weights(&self) -> [f64; 6] {
        let [mu, mus, mup, musp] = self.mu;
        let [m, ms, mp, msp] = self.m;
        let w = self.w;
        let inv = w / m;
        [
            inv * mp * msp * (1.0 - mus - mu),
            -w * ms * (1.0 - musp - mup),
            w * msp * (mus - mup),
            -inv * ms * mp * (musp - mu),
            inv * msp * ms * (mu - mup),
            w * mp * (mus - musp),
        ]
    }

    /// Weights of `f* g h*'`, `f* g h'`, `f*' g' h*`, `f*' g' h`.
    #[inline]
    pub fn t_weights(&self) -> [f64; 4] {
        let [m, ms, mp, msp] = self.m;
        let w = self.w;
        [w * ms * msp, w * ms * mp, -w * msp * mp * ms / m, -w * msp * mp]
    }
}

/// Visits every quadrature triple, grouped by output node `i`.
pub(crate) fn for_each_triple(grid: &VelocityGrid, kernel: &CollisionKernel, mut visit: impl FnMut(&Triple)) {
    let nodes = grid.nodes();
    let h3 = grid.weights()[0];
    let gamma = kernel.gamma();
    let rule = &kernel.rule().nodes;
    let bw = kernel.b_weights();
    let ex = node_exponentials(grid);
    let mu = grid.mu();
    let sq = grid.sqrt_mq();
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            let Some(frame) = PairFrame::new(nodes[i], nodes[j]) else {
                continue;
            };
            let bmag = h3 * frame.r.powf(gamma);
            let pair_exp = ex[i] * ex[j];
            for (d, node) in rule.iter().enumerate() {
                let w = bmag * bw[d];
                if w == 0.0 {
                    continue;
                }
                let ps = post_state(&frame, node, pair_exp);
                visit(&Triple {
                    i,
                    j,
                    w,
                    mu: [mu[i], mu[j], ps.mu_p, ps.mu_sp],
                    m: [sq[i], sq[j], ps.m_p, ps.m_sp],
                    st_p: grid.stencil(ps.vp),
                    st_sp: grid.stencil(ps.vsp),
                });
            }
        }
    }
}

/// `Σ c·Q(a, b)` terms as `(c, a, b)` and `Σ c·T(a, b, c)` terms as `(c, a, b, c)`,
/// indices referring to a list of input fields.
type QTerm = (f64, usize, usize);
type TTerm = (f64, usize, usize, usize);

const Q_SYM: [QTerm; 2] = [(0.5, 0, 1), (0.5, 1, 0)];
const S6: f64 = 1.0 / 6.0;
const T_SYM: [TTerm; 6] = [
    (S6, 0, 1, 2),
    (S6, 0, 2, 1),
    (S6, 2, 0, 1),
    (S6, 2, 1, 0),
    (S6, 1, 2, 0),
    (S6, 1, 0, 2),
];

/// Evaluator for `Q`, `T` and their symmetrized forms on a fixed grid and kernel.
#[derive(Clone, Debug)]
pub struct NonlinearOperator {
    grid: VelocityGrid,
    kernel: CollisionKernel,
    projector: KernelProjector,
}

impl NonlinearOperator {
    pub fn new(grid: &VelocityGrid, kernel: &CollisionKernel) -> Result<NonlinearOperator> {
        if (grid.gamma() - kernel.gamma()).abs() > 1e-12 {
            return Err(crate::error::Error::invalid(format!(
                "grid gamma {} does not match kernel gamma {}",
                grid.gamma(),
                kernel.gamma()
            )));
        }
        Ok(NonlinearOperator {
            grid: grid.clone(),
            kernel: kernel.clone(),
            projector: kernel_projector(grid)?,
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }
    pub fn kernel(&self) -> &CollisionKernel {
        &self.kernel
    }
    pub fn projector(&self) -> &KernelProjector {
        &self.projector
    }

    fn combine(&self, fields: &[&[f64]], q_terms: &[QTerm], t_terms: &[TTerm]) -> Result<Vec<f64>> {
        let m = self.grid.len();
        for f in fields {
            check_len(m, f.len())?;
        }
        let mut out = vec![0.0; m];
        // Per field: values at v, v*, v', v*'.
        let mut vals = vec![[0.0f64; 4]; fields.len()];
        for_each_triple(&self.grid, &self.kernel, |t| {
            for (v, f) in vals.iter_mut().zip(fields) {
                *v = [f[t.i], f[t.j], t.st_p.eval(f), t.st_sp.eval(f)];
            }
            let mut acc = 0.0;
            if !q_terms.is_empty() {
                let w = t.q_weights();
                for &(c, a, b) in q_terms {
                    let [_, fs, fp, fsp] = vals[a];
                    let [g, gs, gp, _] = vals[b];
                    acc += c
                        * (w[0] * fsp * gp
                            + w[1] * fs * g
                            + w[2] * fsp * g
                            + w[3] * fs * gp
                            + w[4] * fsp * gs
                            + w[5] * fp * g);
                }
            }
            if !t_terms.is_empty() {
                let w = t.t_weights();
                for &(c, a, b, d) in t_terms {
                    let [_, fs, _, fsp] = vals[a];
                    let [g, _, gp, _] = vals[b];
                    let [h, hs, hp, hsp] = vals[d];
                    acc += c * (fs * g * (w[0] * hsp + w[1] * hp) + fsp * gp * (w[2] * hs + w[3] * h));
                }
            }
            out[t.i] += acc;
        });
        Ok(out)
    }

    /// `Q(f, g)` before the conservative projection.
    pub fn q_raw(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.combine(&[f, g], &[(1.0, 0, 1)], &[])
    }
    /// `P₀^⊥ Q(f, g)`.
    pub fn q(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.projector.complement(&self.q_raw(f, g)?)
    }
    pub fn q_sym_raw(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.combine(&[f, g], &Q_SYM, &[])
    }
    pub fn q_sym(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.projector.complement(&self.q_sym_raw(f, g)?)
    }

    /// `T(f, g, h)` before the conservative projection.
    pub fn t_raw(&self, f: &[f64], g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.combine(&[f, g, h], &[], &[(1.0, 0, 1, 2)])
    }
    pub fn t(&self, f: &[f64], g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.projector.complement(&self.t_raw(f, g, h)?)
    }
    pub fn t_sym_raw(&self, f: &[f64], g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.combine(&[f, g, h], &[], &T_SYM)
    }
    pub fn t_sym(&self, f: &[f64], g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.projector.complement(&self.t_sym_raw(f, g, h)?)
    }

    /// `Q_sym(f, f)` and `T_sym(f, f, f)` before projection, in one sweep.
    pub fn self_interaction_raw(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let q = self.combine(&[f], &[(1.0, 0, 0)], &[])?;
        let t = self.combine(&[f], &[], &[(1.0, 0, 0, 0)])?;
        Ok((q, t))
    }

    /// Largest `|⟨g, φ⟩|` over the five normalized collision invariants `φ`.
    pub fn invariant_residual(&self, g: &[f64]) -> Result<f64> {
        Ok(self.projector.coefficients(g)?.iter().fold(0.0, |a, c| a.max(c.abs())))
    }

    /// `ε⁻¹Q(f,f) + T(f,f,f)` projected, for many fields at once.
    ///
    /// `fields` is laid out node-major: `fields[node * points + p]`.
    pub fn kinetic_source(&self, fields: &[f64], points: usize, inv_eps: f64) -> Result<Vec<f64>> {
        let m = self.grid.len();
        check_len(m * points, fields.len())?;
        let mut out = vec![0.0; m * points];
        let mut fp = vec![0.0; points];
        let mut fsp = vec![0.0; points];
        for_each_triple(&self.grid, &self.kernel, |t| {
            interpolate_rows(&t.st_p, fields, points, &mut fp);
            interpolate_rows(&t.st_sp, fields, points, &mut fsp);
            let q = t.q_weights().map(|x| x * inv_eps);
            let w = t.t_weights();
            let a_row = &fields[t.i * points..(t.i + 1) * points];
            let b_row = &fields[t.j * points..(t.j + 1) * points];
            let o = &mut out[t.i * points..(t.i + 1) * points];
            for p in 0..points {
                let (a, b, c, d) = (a_row[p], b_row[p], fp[p], fsp[p]);
                let quad = q[0] * d * c
                    + q[1] * b * a
                    + q[2] * d * a
                    + q[3] * b * c
                    + q[4] * d * b
                    + q[5] * c * a;
                let cubic = b * a * (w[0] * d + w[1] * c) + d * c * (w[2] * b + w[3] * a);
                o[p] += quad + cubic;
            }
        });
        let mut col = vec![0.0; m];
        for p in 0..points {
            for (k, x) in col.iter_mut().enumerate() {
                *x = out[k * points + p];
            }
            let proj = self.projector.complement(&col)?;
            for (k, x) in proj.iter().enumerate() {
                out[k * points + p] = *x;
            }
        }
        Ok(out)
    }
}

fn interpolate_rows(st: &Stencil, fields: &[f64], points: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for c in 0..8 {
        let w = st.w[c];
        if w == 0.0 {
            continue;
        }
        let row = &fields[st.idx[c] as usize * points..(st.idx[c] as usize + 1) * points];
        for (o, r) in out.iter_mut().zip(row) {
            *o += w * r;
        }
    }
}

/// Dual norm of `L²_γ`: `(Σ g² ⟨v⟩^{−γ} w)^{1/2}`.
pub fn dual_gamma_norm(grid: &VelocityGrid, g: &[f64]) -> Result<f64> {
    check_len(grid.len(), g.len())?;
    let s: f64 = g
        .iter()
        .zip(grid.gamma_weights())
        .zip(grid.weights())
        .map(|((x, gw), w)| x * x / gw * w)
        .sum();
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::kernel::{post_collision, KernelKind};
    use crate::equilibrium::{fd_equilibrium, norm_sq};
    use crate::velocity::{build_velocity_grid, Flavor};

    fn setup() -> NonlinearOperator {
        let grid = build_velocity_grid(6, 4.0, 1.0).unwrap();
        let kernel = CollisionKernel::new(KernelKind::HardSphere, 4, 4).unwrap();
        NonlinearOperator::new(&grid, &kernel).unwrap()
    }

    fn smooth(grid: &VelocityGrid, shift: f64) -> Vec<f64> {
        grid.sample(|v| (-(norm_sq(v)) / 4.0).exp() * (1.0 + shift * v[0] + 0.3 * v[1] * v[2]))
    }

    #[test]
    fn weights_reproduce_literal_terms() {
        // Direct evaluation of the six gain/loss products with analytic fields.
        let f = |v: [f64; 3]| (1.0 + v[0]) * (-norm_sq(v) / 5.0).exp();
        let g = |v: [f64; 3]| (0.5 - v[2] * v[1]) * (-norm_sq(v) / 6.0).exp();
        let mq = |v: [f64; 3]| {
            let m = fd_equilibrium(v);
            (m * (1.0 - m)).sqrt()
        };
        let (v, vs) = ([0.3, -0.7, 1.1], [-1.2, 0.4, 0.2]);
        let sigma = {
            let s = [0.3f64, 0.5, -0.8];
            let n = norm_sq(s).sqrt();
            s.map(|x| x / n)
        };
        let (vp, vsp) = post_collision(v, vs, sigma).unwrap();
        let mu = |x| fd_equilibrium(x);
        let (sf, sg) = (|x| mq(x) * f(x), |x| mq(x) * g(x));
        let literal = (sf(vsp) * sg(vp) * (1.0 - mu(vs) - mu(v))
            - sf(vs) * sg(v) * (1.0 - mu(vsp) - mu(vp))
            + sf(vsp) * sg(v) * (mu(vs) - mu(vp))
            - sf(vs) * sg(vp) * (mu(vsp) - mu(v))
            + sf(vsp) * sg(vs) * (mu(v) - mu(vp))
            + sf(vp) * sg(v) * (mu(vs) - mu(vsp)))
            / mq(v);
        let grid = build_velocity_grid(4, 4.0, 1.0).unwrap();
        let t = Triple {
            i: 0,
            j: 0,
            w: 1.0,
            mu: [mu(v), mu(vs), mu(vp), mu(vsp)],
            m: [mq(v), mq(vs), mq(vp), mq(vsp)],
            st_p: grid.stencil(vp),
            st_sp: grid.stencil(vsp),
        };
        let w = t.q_weights();
        let ours = w[0] * f(vsp) * g(vp)
            + w[1] * f(vs) * g(v)
            + w[2] * f(vsp) * g(v)
            + w[3] * f(vs) * g(vp)
            + w[4] * f(vsp) * g(vs)
            + w[5] * f(vp) * g(v);
        assert!((ours - literal).abs() < 1e-14 * (1.0 + literal.abs()), "{ours} {literal}");

        let h = |x: [f64; 3]| (x[0] - 0.2) * (-norm_sq(x) / 7.0).exp();
        let sh = |x| mq(x) * h(x);
        let lit_t = (sf(vs) * sg(v) * sh(vsp) + sf(vs) * sg(v) * sh(vp)
            - sf(vsp) * sg(vp) * sh(vs)
            - sf(vsp) * sg(vp) * sh(v))
            / mq(v);
        let wt = t.t_weights();
        let ours_t = f(vs) * g(v) * (wt[0] * h(vsp) + wt[1] * h(vp)) + f(vsp) * g(vp) * (wt[2] * h(vs) + wt[3] * h(v));
        assert!((ours_t - lit_t).abs() < 1e-14 * (1.0 + lit_t.abs()));
    }

    #[test]
    fn zero_arguments_give_zero() {
        let op = setup();
        let f = smooth(op.grid(), 0.4);
        let z = vec![0.0; f.len()];
        assert!(op.q(&z, &f).unwrap().iter().all(|x| *x == 0.0));
        assert!(op.q(&f, &z).unwrap().iter().all(|x| *x == 0.0));
        assert!(op.t(&z, &f, &f).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn symmetrized_forms_agree_on_the_diagonal() {
        let op = setup();
        let f = smooth(op.grid(), 0.4);
        let q = op.q(&f, &f).unwrap();
        let qs = op.q_sym(&f, &f).unwrap();
        let scale = q.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (a, b) in q.iter().zip(&qs) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        let t = op.t(&f, &f, &f).unwrap();
        let ts = op.t_sym(&f, &f, &f).unwrap();
        let scale = t.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (a, b) in t.iter().zip(&ts) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        let (qr, tr) = op.self_interaction_raw(&f).unwrap();
        let qr2 = op.q_raw(&f, &f).unwrap();
        let tr2 = op.t_raw(&f, &f, &f).unwrap();
        assert!(qr.iter().zip(&qr2).all(|(a, b)| (a - b).abs() <= 1e-12 * scale.max(1.0)));
        assert!(tr.iter().zip(&tr2).all(|(a, b)| (a - b).abs() <= 1e-12 * scale.max(1.0)));
    }

    #[test]
    fn projected_outputs_are_conservative() {
        let op = setup();
        let f = smooth(op.grid(), 0.4);
        let g = smooth(op.grid(), -0.9);
        let h = smooth(op.grid(), 0.1);
        let q = op.q_sym(&f, &g).unwrap();
        let t = op.t_sym(&f, &g, &h).unwrap();
        let nq = op.grid().norm(&q, Flavor::Plain).unwrap();
        let nt = op.grid().norm(&t, Flavor::Plain).unwrap();
        assert!(op.invariant_residual(&q).unwrap() <= 1e-12 * nq.max(1.0));
        assert!(op.invariant_residual(&t).unwrap() <= 1e-12 * nt.max(1.0));
    }

    #[test]
    fn kinetic_source_matches_single_field_evaluation() {
        let op = setup();
        let m = op.grid().len();
        let f0 = smooth(op.grid(), 0.4);
        let f1 = smooth(op.grid(), -0.2);
        let mut batch = vec![0.0; 2 * m];
        for k in 0..m {
            batch[2 * k] = f0[k];
            batch[2 * k + 1] = f1[k];
        }
        let out = op.kinetic_source(&batch, 2, 5.0).unwrap();
        for (p, f) in [f0, f1].iter().enumerate() {
            let q = op.q(f, f).unwrap();
            let t = op.t(f, f, f).unwrap();
            for k in 0..m {
                let want = 5.0 * q[k] + t[k];
                assert!((out[2 * k + p] - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
    }
}
