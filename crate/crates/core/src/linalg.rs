//! Dense complex kernels: matrix exponential with `φ₁`, and shift-invert eigenpairs.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Degree of the Taylor polynomial for `φ₁` on the scaled matrix.
const TAYLOR_DEGREE: usize = 13;
/// Scaled one-norm bound for the Taylor base.
const TAYLOR_RADIUS: f64 = 0.25;

pub(crate) fn one_norm(a: &Mat<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.col(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn identity(m: usize) -> Mat<C64> {
    Mat::from_fn(m, m, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// `(e^Z, φ₁(Z))` with `φ₁(Z) = Σ Z^k/(k+1)!`, by scaling and squaring.
///
/// On the scaled matrix `Y = Z/2^s` a Taylor polynomial gives `φ₁(Y)` and `e^Y = I + Yφ₁(Y)`;
/// each doubling uses `e^{2Y} = (e^Y)²` and `φ₁(2Y) = ½φ₁(Y)(e^Y + I)`.
pub fn expm_phi1(z: &Mat<C64>) -> Result<(Mat<C64>, Mat<C64>)> {
    let m = z.nrows();
    if z.ncols() != m {
        return Err(Error::invalid("matrix exponential needs a square matrix"));
    }
    let norm = one_norm(z);
    if !norm.is_finite() {
        return Err(Error::Numerical("non-finite entries in exponential argument".into()));
    }
    let s = if norm > TAYLOR_RADIUS {
        (norm / TAYLOR_RADIUS).log2().ceil() as i32
    } else {
        0
    };
    let y = z * faer::Scale(C64::new(0.5f64.powi(s), 0.0));
    let id = identity(m);
    let mut fact = 1.0;
    for k in 1..=TAYLOR_DEGREE + 1 {
        fact *= k as f64;
    }
    // Horner: φ₁ = Σ_{k=0}^{q} Y^k/(k+1)!.
    let mut phi = &id * faer::Scale(C64::new(1.0 / fact, 0.0));
    for k in (0..TAYLOR_DEGREE).rev() {
        fact /= (k + 2) as f64;
        phi = &y * &phi;
        for d in 0..m {
            phi[(d, d)] += C64::new(1.0 / fact, 0.0);
        }
    }
    let mut e = &y * &phi;
    for d in 0..m {
        e[(d, d)] += C64::new(1.0, 0.0);
    }
    for _ in 0..s {
        let mut ep = e.clone();
        for d in 0..m {
            ep[(d, d)] += C64::new(1.0, 0.0);
        }
        phi = (&phi * &ep) * faer::Scale(C64::new(0.5, 0.0));
        e = &e * &e;
    }
    Ok((e, phi))
}

/// Eigenpairs of a dense complex matrix, sorted by decreasing real part.
pub fn dense_eigenpairs(a: &Mat<C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    let evd = a
        .eigen()
        .map_err(|e| Error::Numerical(format!("complex eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| s[j].re.total_cmp(&s[i].re));
    let vals = order.iter().map(|&i| s[i]).collect();
    let vecs = Mat::from_fn(a.nrows(), order.len(), |r, c| u[(r, order[c])]);
    Ok((vals, vecs))
}

fn orthonormalize(x: &mut Mat<C64>) -> Result<()> {
    let (m, k) = (x.nrows(), x.ncols());
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let mut c = C64::new(0.0, 0.0);
                for r in 0..m {
                    c += x[(r, i)].conj() * x[(r, j)];
                }
                for r in 0..m {
                    let v = x[(r, i)];
                    x[(r, j)] -= c * v;
                }
            }
        }
        let n = (0..m).map(|r| x[(r, j)].norm_sqr()).sum::<f64>().sqrt();
        if !(n > 1e-300) {
            return Err(Error::Numerical("subspace iteration lost rank".into()));
        }
        for r in 0..m {
            x[(r, j)] /= n;
        }
    }
    Ok(())
}

/// Settings for [`shift_invert_eigenpairs`].
#[derive(Clone, Copy, Debug)]
pub struct ShiftInvert {
    pub shift: f64,
    /// Wanted eigenpairs (closest to the shift).
    pub wanted: usize,
    /// Residual target `‖Ax − λx‖ ≤ tol·‖A‖₁`.
    pub tol: f64,
    pub max_iter: usize,
}

/// Eigenpairs of `a` closest to a real shift by block inverse iteration on `(a − σ)⁻¹`
/// with Rayleigh–Ritz extraction, started from the columns of `start`.
///
/// Returns eigenvalues sorted by decreasing real part with unit eigenvectors.
pub fn shift_invert_eigenpairs(a: &Mat<C64>, start: Mat<C64>, opts: ShiftInvert) -> Result<(Vec<C64>, Mat<C64>)> {
    let m = a.nrows();
    let k = start.ncols();
    if k < opts.wanted || start.nrows() != m {
        return Err(Error::invalid("start block must have at least `wanted` columns"));
    }
    let mut shifted = a.clone();
    for d in 0..m {
        shifted[(d, d)] -= C64::new(opts.shift, 0.0);
    }
    let lu = shifted.partial_piv_lu();
    drop(shifted);
    let anorm = one_norm(a);
    let mut x = start;
    orthonormalize(&mut x)?;
    let mut worst = f64::INFINITY;
    for _ in 0..opts.max_iter {
        lu.solve_in_place(&mut x);
        orthonormalize(&mut x)?;
        let ax = a * &x;
        let h = x.adjoint() * &ax;
        let (theta, w) = dense_eigenpairs(&h)?;
        // Rank Ritz values by distance to the shift.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| {
            (theta[i] - opts.shift)
                .norm()
                .total_cmp(&(theta[j] - opts.shift).norm())
        });
        let w = Mat::from_fn(k, k, |r, c| w[(r, order[c])]);
        let theta: Vec<C64> = order.iter().map(|&i| theta[i]).collect();
        let ritz = &x * &w;
        let aritz = &ax * &w;
        worst = 0.0;
        for c in 0..opts.wanted {
            let nv = (0..m).map(|r| ritz[(r, c)].norm_sqr()).sum::<f64>().sqrt();
            let res = (0..m)
                .map(|r| (aritz[(r, c)] - theta[c] * ritz[(r, c)]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(res / nv);
        }
        x = ritz;
        if worst <= opts.tol * anorm {
            let mut idx: Vec<usize> = (0..opts.wanted).collect();
            idx.sort_by(|&i, &j| theta[j].re.total_cmp(&theta[i].re));
            let vals = idx.iter().map(|&i| theta[i]).collect();
            let vecs = Mat::from_fn(m, opts.wanted, |r, c| {
                let col = idx[c];
                let nv = (0..m).map(|q| x[(q, col)].norm_sqr()).sum::<f64>().sqrt();
                x[(r, col)] / nv
            });
            return Ok((vals, vecs));
        }
    }
    Err(Error::Numerical(format!(
        "shift-invert iteration did not converge (relative residual {:.3e})",
        worst / anorm
    )))
}
