//! Assembly of the linearized collision operator `L = −ν + K` as a dense matrix.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::geometry::{node_exponentials, post_state};
use super::kernel::{CollisionKernel, KernelKind, PairFrame};
use crate::error::{check_len, Error, Result};
use crate::symmetry::OrbitTable;
use crate::velocity::{kernel_projector, KernelProjector, VelocityGrid};

/// Fraction of off-lattice post-collision points above which assembly records a warning.
pub const OFFBOX_WARNING: f64 = 0.2;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AssemblyDiagnostics {
    /// Fraction of post-collision points whose interpolation stencil left the lattice.
    pub offbox_fraction: f64,
    /// `‖A − Aᵀ‖_F / ‖A‖_F` of the raw discretization `A = −ν + K`.
    pub pre_fix_asymmetry: f64,
    /// Largest `|⟨A φ, ψ⟩|` over pairs of normalized invariants before the fix.
    pub pre_fix_invariant_defect: f64,
    /// Extremes of `ν(v) / (1 + |v|)^γ` over the nodes.
    pub nu_ratio_min: f64,
    pub nu_ratio_max: f64,
    pub warnings: Vec<String>,
}

/// Linearized operator on a velocity grid.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    nu: Vec<f64>,
    kmat: Mat<f64>,
    matrix: Mat<f64>,
    fix_applied: bool,
    projector: KernelProjector,
    grid: VelocityGrid,
    kind: KernelKind,
    n_theta: usize,
    n_phi: usize,
    pub diagnostics: AssemblyDiagnostics,
}

impl LinearizedOperator {
    /// Collision frequency at the nodes.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
    /// Raw compact part `K` (before symmetrization and projection).
    pub fn kmat(&self) -> &Mat<f64> {
        &self.kmat
    }
    /// `L = P₀^⊥ sym(−ν + K) P₀^⊥`.
    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }
    pub fn fix_applied(&self) -> bool {
        self.fix_applied
    }
    pub fn projector(&self) -> &KernelProjector {
        &self.projector
    }
    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }
    pub fn kernel_kind(&self) -> KernelKind {
        self.kind
    }
    pub fn angular_resolution(&self) -> (usize, usize) {
        (self.n_theta, self.n_phi)
    }
    pub fn len(&self) -> usize {
        self.nu.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Matrix-vector product `L f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), f.len())?;
        let m = self.len();
        let mut out = vec![0.0; m];
        for (j, fj) in f.iter().enumerate() {
            if *fj == 0.0 {
                continue;
            }
            let col = self.matrix.col(j);
            for i in 0..m {
                out[i] += col[i] * fj;
            }
        }
        Ok(out)
    }

    /// Identifier of the discretization: lattice, kernel and angular rule.
    pub fn grid_hash(&self) -> String {
        discretization_hash(&self.grid, self.kind, self.n_theta, self.n_phi)
    }

    /// Rebuilds an operator from stored parts (used by the on-disk cache).
    pub(crate) fn from_parts(
        grid: VelocityGrid,
        kind: KernelKind,
        n_theta: usize,
        n_phi: usize,
        nu: Vec<f64>,
        kmat: Mat<f64>,
        matrix: Mat<f64>,
        diagnostics: AssemblyDiagnostics,
    ) -> Result<LinearizedOperator> {
        let projector = kernel_projector(&grid)?;
        Ok(LinearizedOperator {
            nu,
            kmat,
            matrix,
            fix_applied: true,
            projector,
            grid,
            kind,
            n_theta,
            n_phi,
            diagnostics,
        })
    }
}

/// Stable textual hash (FNV-1a) of the discretization parameters.
pub fn discretization_hash(grid: &VelocityGrid, kind: KernelKind, n_theta: usize, n_phi: usize) -> String {
    let desc = format!(
        "n={};extent={:e};gamma={:e};kind={:?};nt={};np={}",
        grid.n_per_axis(),
        grid.extent(),
        grid.gamma(),
        kind,
        n_theta,
        n_phi
    );
    let mut h: u64 = 0xcbf29ce484222325;
    for b in desc.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Assembles `ν`, `K` and the fixed operator. Rows are computed for one node per orbit of
/// the lattice symmetry group (averaged over its stabilizer) and mapped to the rest, so
/// the discrete operator commutes exactly with axis permutations and reflections.
pub fn assemble_linearized(grid: &VelocityGrid, kernel: &CollisionKernel) -> Result<LinearizedOperator> {
    if (grid.gamma() - kernel.gamma()).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "grid gamma {} does not match kernel gamma {}",
            grid.gamma(),
            kernel.gamma()
        )));
    }
    let m = grid.len();
    let n = grid.n_per_axis();
    let nodes = grid.nodes();
    let h3 = grid.weights()[0];
    let gamma = kernel.gamma();
    let rule = &kernel.rule().nodes;
    let bw = kernel.b_weights();
    let ex = node_exponentials(grid);
    let mu = grid.mu();
    let sq = grid.sqrt_mq();
    let orbits = OrbitTable::new(n);

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(orbits.reps.len());
    let mut nu_rep = Vec::with_capacity(orbits.reps.len());
    let mut offbox = 0usize;
    let mut points = 0usize;
    for (slot, &i) in orbits.reps.iter().enumerate() {
        let mut row = vec![0.0; m];
        let mut nu_i = 0.0;
        for j in 0..m {
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
                nu_i += w * mu[j] * (1.0 - ps.mu_p) * (1.0 - ps.mu_sp) / (1.0 - mu[i]);
                row[j] -= w * ps.m_p * ps.m_sp;
                let st = grid.stencil(ps.vp);
                let a = w * sq[j] * ps.m_sp;
                for c in 0..8 {
                    row[st.idx[c] as usize] += a * st.w[c];
                }
                let st2 = grid.stencil(ps.vsp);
                let b = w * sq[j] * ps.m_p;
                for c in 0..8 {
                    row[st2.idx[c] as usize] += b * st2.w[c];
                }
                points += 2;
                offbox += (!st.inside) as usize + (!st2.inside) as usize;
            }
        }
        let stab = &orbits.stabilizers[slot];
        if stab.len() > 1 {
            let mut avg = vec![0.0; m];
            for s in stab {
                for (x, a) in avg.iter_mut().enumerate() {
                    *a += row[orbits.map(s, x)];
                }
            }
            let inv = 1.0 / stab.len() as f64;
            for a in avg.iter_mut() {
                *a *= inv;
            }
            row = avg;
        }
        rows.push(row);
        nu_rep.push(nu_i);
    }

    let mut kmat = Mat::<f64>::zeros(m, m);
    let mut nu = vec![0.0; m];
    for i in 0..m {
        let slot = orbits.rep_slot[i];
        let g = orbits.to_node[i];
        nu[i] = nu_rep[slot];
        let row = &rows[slot];
        for (x, val) in row.iter().enumerate() {
            kmat[(i, orbits.map(&g, x))] = *val;
        }
    }
    drop(rows);

    let projector = kernel_projector(grid)?;
    let mut raw = kmat.clone();
    for i in 0..m {
        raw[(i, i)] -= nu[i];
    }
    let mut asym = 0.0;
    let mut total = 0.0;
    for j in 0..m {
        for i in 0..m {
            let a = raw[(i, j)];
            let d = a - raw[(j, i)];
            asym += d * d;
            total += a * a;
        }
    }
    let pre_fix_asymmetry = (asym / total).sqrt();
    let pre_fix_invariant_defect = invariant_defect(&raw, &projector);

    // Symmetric part, then P₀^⊥ S P₀^⊥ via rank-5 corrections.
    let mut s = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            s[(i, j)] = 0.5 * (raw[(i, j)] + raw[(j, i)]);
        }
    }
    drop(raw);
    let matrix = project_both_sides(&s, &projector);

    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    for (i, v) in nodes.iter().enumerate() {
        let r = nu[i] / (1.0 + crate::equilibrium::norm_sq(*v).sqrt()).powf(gamma);
        ratio_min = ratio_min.min(r);
        ratio_max = ratio_max.max(r);
    }
    if !(ratio_min > 0.0 && ratio_max.is_finite()) {
        return Err(Error::Numerical(format!(
            "collision frequency is not positive and finite (ratio range [{ratio_min:e}, {ratio_max:e}])"
        )));
    }
    let offbox_fraction = offbox as f64 / points.max(1) as f64;
    let mut warnings = Vec::new();
    if offbox_fraction > OFFBOX_WARNING {
        warnings.push(format!(
            "{:.1}% of post-collision points fall outside the lattice",
            100.0 * offbox_fraction
        ));
    }
    let (n_theta, n_phi) = (kernel.rule().n_theta, kernel.rule().n_phi);
    Ok(LinearizedOperator {
        nu,
        kmat,
        matrix,
        fix_applied: true,
        projector,
        grid: grid.clone(),
        kind: kernel.kind(),
        n_theta,
        n_phi,
        diagnostics: AssemblyDiagnostics {
            offbox_fraction,
            pre_fix_asymmetry,
            pre_fix_invariant_defect,
            nu_ratio_min: ratio_min,
            nu_ratio_max: ratio_max,
            warnings,
        },
    })
}

/// Orthonormal (Euclidean) columns spanning the collision invariants.
fn euclidean_basis(p: &KernelProjector, w: f64) -> Vec<Vec<f64>> {
    let s = w.sqrt();
    p.basis().iter().map(|e| e.iter().map(|x| x * s).collect()).collect()
}

fn project_both_sides(s: &Mat<f64>, p: &KernelProjector) -> Mat<f64> {
    let m = s.nrows();
    let u = euclidean_basis(p, p.weight());
    // su[k] = S u_k
    let su: Vec<Vec<f64>> = u
        .iter()
        .map(|uk| {
            let mut out = vec![0.0; m];
            for j in 0..m {
                let c = s.col(j);
                let x = uk[j];
                for i in 0..m {
                    out[i] += c[i] * x;
                }
            }
            out
        })
        .collect();
    let mut c = [[0.0; 5]; 5];
    for a in 0..5 {
        for b in 0..5 {
            c[a][b] = u[a].iter().zip(&su[b]).map(|(x, y)| x * y).sum();
        }
    }
    let mut l = s.clone();
    for j in 0..m {
        for i in 0..m {
            let mut corr = 0.0;
            for a in 0..5 {
                corr += u[a][i] * su[a][j] + su[a][i] * u[a][j];
                let mut t = 0.0;
                for b in 0..5 {
                    t += c[a][b] * u[b][j];
                }
                corr -= u[a][i] * t;
            }
            l[(i, j)] -= corr;
        }
    }
    for j in 0..m {
        for i in 0..j {
            let a = 0.5 * (l[(i, j)] + l[(j, i)]);
            l[(i, j)] = a;
            l[(j, i)] = a;
        }
    }
    l
}

fn invariant_defect(a: &Mat<f64>, p: &KernelProjector) -> f64 {
    let m = a.nrows();
    let u = euclidean_basis(p, p.weight());
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for uk in &u {
        let mut au = vec![0.0; m];
        for j in 0..m {
            let c = a.col(j);
            for i in 0..m {
                au[i] += c[i] * uk[j];
            }
        }
        for ul in &u {
            let d: f64 = ul.iter().zip(&au).map(|(x, y)| x * y).sum();
            worst = worst.max(d.abs());
        }
        scale = scale.max(au.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    worst / scale.max(f64::MIN_POSITIVE)
}

/// Eigenvalue summary of a fixed operator.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    /// Eigenvalues with `|λ| ≤ tol`.
    pub near_zero: Vec<f64>,
    pub tolerance: f64,
    /// `−λ` for the largest eigenvalue outside the kernel.
    pub gap_plain: f64,
    /// Largest `λ` with `⟨−L f, f⟩ ≥ λ ‖P₀^⊥ f‖²_γ`.
    pub gap_gamma: f64,
    pub most_negative: f64,
}

/// Dense symmetric eigen-analysis of `L` (plain and `⟨v⟩^γ`-weighted gaps).
pub fn spectral_gap(op: &LinearizedOperator, tol: f64) -> Result<GapReport> {
    let l = op.matrix();
    let m = l.nrows();
    let eig = l
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let near_zero: Vec<f64> = eig.iter().copied().filter(|x| x.abs() <= tol).collect();
    let gap_plain = -eig
        .iter()
        .copied()
        .filter(|x| x.abs() > tol)
        .fold(f64::NEG_INFINITY, f64::max);

    // Weighted gap: eigenvalues of D^{-1/2}(−L)D^{-1/2} on the complement of D^{-1/2}·Ker.
    let d: Vec<f64> = op.grid().gamma_weights().iter().map(|g| g.sqrt()).collect();
    let w = op.projector().weight();
    let mut q: Vec<Vec<f64>> = Vec::new();
    for e in euclidean_basis(op.projector(), w) {
        let mut x: Vec<f64> = e.iter().zip(&d).map(|(a, s)| a / s).collect();
        for _ in 0..2 {
            for y in &q {
                let c: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                for (a, b) in x.iter_mut().zip(y) {
                    *a -= c * b;
                }
            }
        }
        let nrm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        q.push(x.into_iter().map(|a| a / nrm).collect());
    }
    let mut a = Mat::<f64>::from_fn(m, m, |i, j| -l[(i, j)] / (d[i] * d[j]));
    // Deflate the constraint directions by shifting them far above the spectrum.
    let shift = 10.0 * eig.iter().fold(0.0f64, |s, x| s.max(x.abs())) + 1.0;
    for y in &q {
        let ay: Vec<f64> = (0..m).map(|i| (0..m).map(|j| a[(i, j)] * y[j]).sum()).collect();
        let yay: f64 = y.iter().zip(&ay).map(|(u, v)| u * v).sum();
        for j in 0..m {
            for i in 0..m {
                a[(i, j)] += -y[i] * ay[j] - ay[i] * y[j] + (yay + shift) * y[i] * y[j];
            }
        }
    }
    let eg = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let gap_gamma = eg[0];
    Ok(GapReport {
        near_zero,
        tolerance: tol,
        gap_plain,
        gap_gamma,
        most_negative: eig[0],
    })
}
