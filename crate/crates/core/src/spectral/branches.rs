//! Tracking and fitting of the four small-eigenvalue branches.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{assemble_lambda, unit, zeroth_projectors, Branch, ZerothProjectors};
use crate::collision::LinearizedOperator;
use crate::cutoff::DEFAULT_KAPPA;
use crate::equilibrium::{norm_sq, MomentTable};
use crate::error::{Error, Result};
use crate::linalg::{dense_eigenpairs, shift_invert_eigenpairs, ShiftInvert};

/// Largest operator size handled by the dense complex eigensolver.
pub const DENSE_LIMIT: usize = 1728;
/// Smallest eigenvector overlap accepted when tagging a branch.
pub const MIN_OVERLAP: f64 = 0.5;
/// Largest relative residual accepted by [`fit_dispersion`].
pub const MAX_FIT_RESIDUAL: f64 = 0.1;

/// Tagged small eigenvalues at one radius.
#[derive(Clone, Debug, Serialize)]
pub struct BranchPoint {
    pub radius: f64,
    pub ns: [C64; 2],
    pub heat: C64,
    pub wave_plus: C64,
    pub wave_minus: C64,
    /// Overlaps of the tagged eigenvectors: NS (two), heat, wave+, wave−.
    pub overlaps: [f64; 5],
    /// Largest real part among the untagged eigenvalues (dense solves only).
    pub next_real_part: Option<f64>,
    /// Unit eigenvectors in the order of `overlaps`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<C64>>,
}

impl BranchPoint {
    pub fn eigenvalue(&self, branch: Branch) -> C64 {
        match branch {
            Branch::Ns => 0.5 * (self.ns[0] + self.ns[1]),
            Branch::Heat => self.heat,
            Branch::WavePlus => self.wave_plus,
            Branch::WaveMinus => self.wave_minus,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralBranchTable {
    pub direction: [f64; 3],
    pub points: Vec<BranchPoint>,
    /// `"dense"` or `"shift-invert"`.
    pub solver: String,
}

fn start_block(z: &ZerothProjectors, op: &LinearizedOperator) -> Mat<C64> {
    let grid = op.grid();
    let w = z.direction;
    let extras = [
        grid.sample_weighted(|v| v[0] * v[1]),
        grid.sample_weighted(|v| v[0] * v[2]),
        grid.sample_weighted(|v| v[1] * v[2]),
        grid.sample_weighted(|v| v[0] * v[0] - v[1] * v[1]),
        grid.sample_weighted(|v| (norm_sq(v) - 3.0) * (v[0] * w[0] + v[1] * w[1] + v[2] * w[2])),
    ];
    let cols: Vec<&[f64]> = [&z.ns[0], &z.ns[1], &z.heat, &z.wave_plus, &z.wave_minus]
        .into_iter()
        .chain(extras.iter())
        .map(|e| e.as_slice())
        .collect();
    Mat::from_fn(op.len(), cols.len(), |i, j| C64::new(cols[j][i], 0.0))
}

/// The five eigenpairs of largest real part, plus the next real part when known.
fn small_eigenpairs(op: &LinearizedOperator, lambda: &Mat<C64>, z: &ZerothProjectors) -> Result<(Vec<C64>, Vec<Vec<C64>>, Option<f64>)> {
    let m = op.len();
    let (vals, vecs, next) = if m <= DENSE_LIMIT {
        let (vals, vecs) = dense_eigenpairs(lambda)?;
        let next = vals.get(5).map(|z| z.re);
        (vals[..5].to_vec(), vecs, next)
    } else {
        let (vals, vecs) = shift_invert_eigenpairs(
            lambda,
            start_block(z, op),
            ShiftInvert {
                shift: 0.05,
                wanted: 5,
                tol: 1e-13,
                max_iter: 300,
            },
        )?;
        (vals, vecs, None)
    };
    let vectors = (0..5)
        .map(|c| {
            let col: Vec<C64> = (0..m).map(|r| vecs[(r, c)]).collect();
            let n = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() * z_weight_sqrt(z);
            col.into_iter().map(|x| x / n).collect()
        })
        .collect();
    Ok((vals, vectors, next))
}

fn z_weight_sqrt(z: &ZerothProjectors) -> f64 {
    // Plain-product norm: Σ w |x|² with uniform weight.
    z.weight.sqrt()
}

/// Eigen-decomposition of `L − i r ω·v` at each radius with the five small eigenvalues
/// tagged by eigenvector overlap with the zeroth-order eigenfunctions.
pub fn trace_branches(op: &LinearizedOperator, moments: &MomentTable, direction: [f64; 3], radii: &[f64]) -> Result<SpectralBranchTable> {
    let w = unit(direction)?;
    if radii.is_empty() {
        return Err(Error::invalid("at least one radius is required"));
    }
    for pair in radii.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::invalid("radii must be strictly ascending"));
        }
    }
    if !(radii[0] >= 0.0) || radii[radii.len() - 1] > DEFAULT_KAPPA {
        return Err(Error::invalid(format!("radii must lie in [0, {DEFAULT_KAPPA}]")));
    }
    let z = zeroth_projectors(op.grid(), moments, w)?;
    let mut points = Vec::with_capacity(radii.len());
    for &r in radii {
        let lambda = assemble_lambda(op, w.map(|x| x * r), 1.0)?;
        let (vals, vecs, next) = small_eigenpairs(op, &lambda, &z)?;
        let point = if r == 0.0 {
            at_origin(op, &z, &vals, next)?
        } else {
            tag(&z, r, vals, vecs, next)?
        };
        points.push(point);
    }
    Ok(SpectralBranchTable {
        direction: w,
        points,
        solver: if op.len() <= DENSE_LIMIT { "dense" } else { "shift-invert" }.into(),
    })
}

/// At `ξ = 0` the kernel is degenerate; the zeroth-order eigenfunctions are used directly.
fn at_origin(op: &LinearizedOperator, z: &ZerothProjectors, vals: &[C64], next: Option<f64>) -> Result<BranchPoint> {
    if let Some(bad) = vals.iter().find(|v| v.norm() > 1e-10) {
        return Err(Error::BranchTracking {
            radius: 0.0,
            detail: format!("kernel eigenvalue {bad} exceeds 1e-10"),
        });
    }
    let rq = |f: &[f64]| -> Result<C64> {
        let lf = op.apply(f)?;
        Ok(C64::new(f.iter().zip(&lf).map(|(a, b)| a * b).sum::<f64>() * z.weight, 0.0))
    };
    let as_c = |f: &[f64]| f.iter().map(|x| C64::new(*x, 0.0)).collect::<Vec<_>>();
    Ok(BranchPoint {
        radius: 0.0,
        ns: [rq(&z.ns[0])?, rq(&z.ns[1])?],
        heat: rq(&z.heat)?,
        wave_plus: rq(&z.wave_plus)?,
        wave_minus: rq(&z.wave_minus)?,
        overlaps: [1.0; 5],
        next_real_part: next,
        eigenvectors: vec![as_c(&z.ns[0]), as_c(&z.ns[1]), as_c(&z.heat), as_c(&z.wave_plus), as_c(&z.wave_minus)],
    })
}

fn tag(z: &ZerothProjectors, r: f64, vals: Vec<C64>, vecs: Vec<Vec<C64>>, next: Option<f64>) -> Result<BranchPoint> {
    let ov: Vec<[f64; 4]> = vecs
        .iter()
        .map(|x| {
            [
                z.overlap(Branch::Ns, x),
                z.overlap(Branch::Heat, x),
                z.overlap(Branch::WavePlus, x),
                z.overlap(Branch::WaveMinus, x),
            ]
        })
        .collect();
    // Best assignment of the five vectors to (NS, NS, heat, wave+, wave−).
    let mut best: Option<([usize; 5], f64)> = None;
    for a in 0..5 {
        for b in a + 1..5 {
            let rest: Vec<usize> = (0..5).filter(|k| *k != a && *k != b).collect();
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let (h, p, m) = (rest[perm[0]], rest[perm[1]], rest[perm[2]]);
                let score = ov[a][0] + ov[b][0] + ov[h][1] + ov[p][2] + ov[m][3];
                if best.map_or(true, |(_, s)| score > s) {
                    best = Some(([a, b, h, p, m], score));
                }
            }
        }
    }
    let (idx, _) = best.expect("five candidates");
    let overlaps = [ov[idx[0]][0], ov[idx[1]][0], ov[idx[2]][1], ov[idx[3]][2], ov[idx[4]][3]];
    const NAMES: [&str; 5] = ["NS", "NS", "heat", "wave+", "wave-"];
    for (k, o) in overlaps.iter().enumerate() {
        if !(*o >= MIN_OVERLAP) {
            return Err(Error::BranchTracking {
                radius: r,
                detail: format!("{} eigenvector overlap {o:.3} below {MIN_OVERLAP}", NAMES[k]),
            });
        }
    }
    Ok(BranchPoint {
        radius: r,
        ns: [vals[idx[0]], vals[idx[1]]],
        heat: vals[idx[2]],
        wave_plus: vals[idx[3]],
        wave_minus: vals[idx[4]],
        overlaps,
        next_real_part: next,
        eigenvectors: idx.iter().map(|&k| vecs[k].clone()).collect(),
    })
}

/// Least-squares fit of the leading dispersion terms.
#[derive(Clone, Debug, Serialize)]
pub struct DispersionFit {
    pub nu_ns: f64,
    pub nu_heat: f64,
    pub nu_wave: f64,
    pub c_fit: f64,
    /// Relative residuals `‖data − model‖/‖data‖` of each fit.
    pub residual_ns: f64,
    pub residual_heat: f64,
    pub residual_wave_re: f64,
    pub residual_wave_im: f64,
    /// `max |λ_wave+ − conj(λ_wave−)|` over the fitted radii.
    pub conjugacy_defect: f64,
    /// `max |Im λ|` of the NS and heat branches.
    pub max_imag_ns_heat: f64,
    pub radii_used: usize,
    pub max_radius: f64,
}

/// `x ≈ −ν r^p`: least-squares `ν` and relative residual.
fn fit_power(r: &[f64], y: &[f64], p: i32, sign: f64) -> (f64, f64) {
    let num: f64 = r.iter().zip(y).map(|(r, y)| sign * y * r.powi(p)).sum();
    let den: f64 = r.iter().map(|r| r.powi(2 * p)).sum();
    let coef = num / den;
    let res: f64 = r.iter().zip(y).map(|(r, y)| (y - sign * coef * r.powi(p)).powi(2)).sum();
    let norm: f64 = y.iter().map(|y| y * y).sum();
    (coef, (res / norm).sqrt())
}

/// Fits `Re λ = −ν|ξ|²` for every branch and `Im λ_wave± = ±c|ξ|` over radii in `[0.01, 0.2]`.
pub fn fit_dispersion(table: &SpectralBranchTable) -> Result<DispersionFit> {
    let pts: Vec<&BranchPoint> = table
        .points
        .iter()
        .filter(|p| p.radius >= 0.01 - 1e-12 && p.radius <= 0.2 + 1e-12)
        .collect();
    if pts.len() < 4 {
        return Err(Error::invalid(format!(
            "dispersion fit needs at least 4 radii in [0.01, 0.2] (got {})",
            pts.len()
        )));
    }
    let r: Vec<f64> = pts.iter().map(|p| p.radius).collect();
    let col = |f: &dyn Fn(&BranchPoint) -> f64| pts.iter().map(|p| f(p)).collect::<Vec<f64>>();
    let (nu_ns, residual_ns) = fit_power(&r, &col(&|p| p.eigenvalue(Branch::Ns).re), 2, -1.0);
    let (nu_heat, residual_heat) = fit_power(&r, &col(&|p| p.heat.re), 2, -1.0);
    let (nu_wave, residual_wave_re) = fit_power(&r, &col(&|p| 0.5 * (p.wave_plus.re + p.wave_minus.re)), 2, -1.0);
    let (c_fit, residual_wave_im) = fit_power(&r, &col(&|p| 0.5 * (p.wave_plus.im - p.wave_minus.im)), 1, 1.0);
    let conjugacy_defect = pts
        .iter()
        .map(|p| (p.wave_plus - p.wave_minus.conj()).norm())
        .fold(0.0, f64::max);
    let max_imag_ns_heat = pts
        .iter()
        .map(|p| p.ns[0].im.abs().max(p.ns[1].im.abs()).max(p.heat.im.abs()))
        .fold(0.0, f64::max);
    let fit = DispersionFit {
        nu_ns,
        nu_heat,
        nu_wave,
        c_fit,
        residual_ns,
        residual_heat,
        residual_wave_re,
        residual_wave_im,
        conjugacy_defect,
        max_imag_ns_heat,
        radii_used: pts.len(),
        max_radius: r[r.len() - 1],
    };
    let worst = [residual_ns, residual_heat, residual_wave_re, residual_wave_im]
        .into_iter()
        .fold(0.0, f64::max);
    if worst > MAX_FIT_RESIDUAL {
        return Err(Error::Numerical(format!(
            "dispersion fit residual {worst:.3e} exceeds {MAX_FIT_RESIDUAL}: {fit:?}"
        )));
    }
    Ok(fit)
}

/// Largest real part over the full spectrum of `L − i v·ξ` (dense sizes only).
pub fn max_real_part(op: &LinearizedOperator, xi: [f64; 3]) -> Result<f64> {
    if op.len() > DENSE_LIMIT {
        return Err(Error::invalid(format!(
            "full spectrum requested for size {} above the dense limit {DENSE_LIMIT}",
            op.len()
        )));
    }
    let lambda = assemble_lambda(op, xi, 1.0)?;
    let vals = lambda
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("complex eigensolver failed: {e:?}")))?;
    Ok(vals.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{assemble_linearized, CollisionKernel, KernelKind};
    use crate::equilibrium::equilibrium_moments;
    use crate::velocity::build_velocity_grid;
    use std::sync::OnceLock;

    fn ops() -> &'static [(LinearizedOperator, MomentTable); 2] {
        static OPS: OnceLock<[(LinearizedOperator, MomentTable); 2]> = OnceLock::new();
        OPS.get_or_init(|| {
            [KernelKind::HardSphere, KernelKind::HardPotential { p: 2.75 }].map(|kind| {
                let grid = build_velocity_grid(8, 8.0, kind.gamma()).unwrap();
                let op = assemble_linearized(&grid, &CollisionKernel::new(kind, 16, 8).unwrap()).unwrap();
                let moments = equilibrium_moments(&grid);
                (op, moments)
            })
        })
    }

    fn ladder(step: f64) -> Vec<f64> {
        (0..=10).map(|k| step * k as f64).collect()
    }

    #[test]
    fn branch_invariants_for_both_kernels() {
        for (op, moments) in ops() {
            let table = trace_branches(op, moments, [1.0, 0.0, 0.0], &ladder(0.02)).unwrap();
            let origin = &table.points[0];
            for b in [Branch::Ns, Branch::Heat, Branch::WavePlus, Branch::WaveMinus] {
                assert!(origin.eigenvalue(b).norm() <= 1e-10, "{b:?} at 0: {}", origin.eigenvalue(b));
            }
            for p in &table.points {
                assert!((p.wave_plus - p.wave_minus.conj()).norm() <= 1e-10);
                assert!(p.ns[0].im.abs() <= 1e-10 && p.ns[1].im.abs() <= 1e-10 && p.heat.im.abs() <= 1e-10);
                for z in [p.ns[0], p.ns[1], p.heat, p.wave_plus, p.wave_minus] {
                    assert!(z.re <= 1e-10, "{z} at r = {}", p.radius);
                }
                // Two transverse eigenvectors share the shear eigenvalue.
                assert!((p.ns[0] - p.ns[1]).norm() <= 1e-8 * p.ns[0].norm() + 1e-11, "{} {} at {}", p.ns[0], p.ns[1], p.radius);
                assert!(p.overlaps.iter().all(|o| *o >= MIN_OVERLAP));
                if p.radius > 0.0 {
                    assert!(p.wave_plus.im > 0.0);
                }
            }
            let fit = fit_dispersion(&table).unwrap();
            assert!(fit.nu_ns > 0.0 && fit.nu_heat > 0.0 && fit.nu_wave > 0.0 && fit.c_fit > 0.0);
            assert!((fit.c_fit - moments.sound_speed()).abs() < 1e-3 * moments.sound_speed(), "{fit:?}");
        }
    }

    #[test]
    fn halving_the_radius_shrinks_the_residual_fourfold() {
        // Self-similar radii sets; the hard-sphere residuals already sit at the eigensolver floor.
        let (op, moments) = &ops()[1];
        let full = fit_dispersion(&trace_branches(op, moments, [1.0, 0.0, 0.0], &ladder(0.02)).unwrap()).unwrap();
        let half = fit_dispersion(&trace_branches(op, moments, [1.0, 0.0, 0.0], &ladder(0.01)).unwrap()).unwrap();
        for (a, b) in [
            (full.residual_ns, half.residual_ns),
            (full.residual_heat, half.residual_heat),
            (full.residual_wave_re, half.residual_wave_re),
            (full.residual_wave_im, half.residual_wave_im),
        ] {
            assert!(a / b >= 4.0, "ratio {} ({a:e} -> {b:e})", a / b);
        }
    }

    #[test]
    fn sound_speed_is_direction_invariant() {
        let (op, moments) = &ops()[0];
        let r = ladder(0.02);
        let c0 = fit_dispersion(&trace_branches(op, moments, [1.0, 0.0, 0.0], &r).unwrap()).unwrap().c_fit;
        for d in [[0.0, 0.0, 1.0], [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0], [0.6, 0.8, 0.0]] {
            let c = fit_dispersion(&trace_branches(op, moments, d, &r).unwrap()).unwrap().c_fit;
            assert!((c - c0).abs() <= 1e-6, "{d:?}: {c} vs {c0}");
        }
        // Grid axes are exact symmetries for any kernel.
        let (op, moments) = &ops()[1];
        let a = fit_dispersion(&trace_branches(op, moments, [1.0, 0.0, 0.0], &r).unwrap()).unwrap();
        let b = fit_dispersion(&trace_branches(op, moments, [0.0, 1.0, 0.0], &r).unwrap()).unwrap();
        assert!((a.c_fit - b.c_fit).abs() <= 1e-10 && (a.nu_ns - b.nu_ns).abs() <= 1e-10);
    }

    #[test]
    fn spectrum_is_uniformly_negative_beyond_small_frequencies() {
        for (op, _) in ops() {
            let lambda0 = -max_real_part(op, [2.0 * DEFAULT_KAPPA, 0.0, 0.0]).unwrap();
            assert!(lambda0 > 0.0);
            for xi in [[0.0, 1.5, 0.0], [1.2, 1.2, 0.0], [0.0, 0.0, 3.0]] {
                assert!(max_real_part(op, xi).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn too_few_radii_are_rejected() {
        let (op, moments) = &ops()[0];
        let t = trace_branches(op, moments, [1.0, 0.0, 0.0], &[0.0, 0.05, 0.1]).unwrap();
        assert!(matches!(fit_dispersion(&t), Err(Error::Invalid(_))));
    }
}
