//! Picard iteration for `y = y₀ + L(y) + B(y, y) + Ψ(y, y, y)` on a ball where the map contracts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Operator norms, either supplied or estimated by sampling unit vectors.
#[derive(Clone, Debug, Default)]
pub enum NormPolicy {
    Supplied { linear: f64, bilinear: f64, trilinear: f64 },
    /// Maximum of `‖map(x…)‖` over `samples` random unit arguments.
    #[default]
    Sampled,
}

#[derive(Clone, Debug)]
pub struct ContractionOptions {
    pub norms: NormPolicy,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        ContractionOptions {
            norms: NormPolicy::Sampled,
            samples: 200,
            seed: 1,
            tol: 1e-12,
            max_iter: 500,
        }
    }
}

/// Converged fixed point and the diagnostics of the iteration.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPoint {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub linear_norm: f64,
    pub bilinear_norm: f64,
    pub trilinear_norm: f64,
    /// `(1/2 − ‖L‖)/(4‖B‖ + √(6‖Ψ‖))`.
    pub data_bound: f64,
    /// `(1 − 2‖L‖)/(4‖B‖ + √(6‖Ψ‖))`.
    pub ball_radius: f64,
    /// `‖y‖/‖y₀‖`, or 0 when `y₀ = 0`.
    pub growth: f64,
    /// Successive differences `‖y_{k+1} − y_k‖`.
    pub log: Vec<f64>,
}

/// The three maps of the fixed-point problem on `ℝ^d`.
pub struct FixedPointProblem<'a> {
    pub dim: usize,
    pub linear: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub bilinear: &'a dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    pub trilinear: &'a dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
    pub norm: &'a dyn Fn(&[f64]) -> f64,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize, norm: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&x);
        if n > 1e-3 {
            return x.into_iter().map(|v| v / n).collect();
        }
    }
}

fn estimate_norms(p: &FixedPointProblem, opts: &ContractionOptions) -> (f64, f64, f64) {
    match opts.norms {
        NormPolicy::Supplied { linear, bilinear, trilinear } => (linear, bilinear, trilinear),
        NormPolicy::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let (mut l, mut b, mut t) = (0.0f64, 0.0f64, 0.0f64);
            // Basis vectors first, so that scalar and diagonal problems are exact.
            let mut args: Vec<Vec<f64>> = (0..p.dim)
                .map(|k| {
                    let mut e = vec![0.0; p.dim];
                    e[k] = 1.0;
                    let n = (p.norm)(&e);
                    e.iter().map(|x| x / n).collect()
                })
                .collect();
            for _ in 0..opts.samples {
                args.push(random_unit(&mut rng, p.dim, p.norm));
            }
            for (k, x) in args.iter().enumerate() {
                let y = &args[(k * 7 + 3) % args.len()];
                let z = &args[(k * 13 + 5) % args.len()];
                l = l.max((p.norm)(&(p.linear)(x)));
                b = b.max((p.norm)(&(p.bilinear)(x, x))).max((p.norm)(&(p.bilinear)(x, y)));
                t = t.max((p.norm)(&(p.trilinear)(x, x, x))).max((p.norm)(&(p.trilinear)(x, y, z)));
            }
            (l, b, t)
        }
    }
}

/// Solves `y = y₀ + L(y) + B(y,y) + Ψ(y,y,y)` by Picard iteration from `y₀`.
pub fn contraction_solve(p: &FixedPointProblem, y0: &[f64], opts: &ContractionOptions) -> Result<FixedPoint> {
    crate::error::check_len(p.dim, y0.len())?;
    let (nl, nb, nt) = estimate_norms(p, opts);
    if !(nl < 0.5) {
        return Err(Error::Precondition {
            what: "linear part must have norm below 1/2".into(),
            defect: nl,
        });
    }
    let denom = 4.0 * nb + (6.0 * nt).sqrt();
    let data_bound = if denom > 0.0 { (0.5 - nl) / denom } else { f64::INFINITY };
    let ball_radius = 2.0 * data_bound;
    let n0 = (p.norm)(y0);
    if n0 > data_bound {
        return Err(Error::Precondition {
            what: format!("data norm must not exceed (1/2 − ‖L‖)/(4‖B‖ + √(6‖Ψ‖)) = {data_bound:.6e}"),
            defect: n0,
        });
    }
    let mut y = y0.to_vec();
    let mut log = Vec::new();
    for it in 1..=opts.max_iter {
        let l = (p.linear)(&y);
        let b = (p.bilinear)(&y, &y);
        let t = (p.trilinear)(&y, &y, &y);
        let next: Vec<f64> = (0..p.dim).map(|k| y0[k] + l[k] + b[k] + t[k]).collect();
        let diff: Vec<f64> = next.iter().zip(&y).map(|(a, b)| a - b).collect();
        let d = (p.norm)(&diff);
        log.push(d);
        let grew = log.len() >= 3 && log[log.len() - 1] > log[log.len() - 2] && log[log.len() - 2] > log[log.len() - 3];
        if !d.is_finite() || (p.norm)(&next) > ball_radius * (1.0 + 1e-12) || grew {
            return Err(Error::Numerical(format!(
                "iteration stopped contracting at step {it}; differences {log:?}"
            )));
        }
        y = next;
        if d <= opts.tol {
            return Ok(FixedPoint {
                growth: if n0 > 0.0 { (p.norm)(&y) / n0 } else { 0.0 },
                y,
                iterations: it,
                linear_norm: nl,
                bilinear_norm: nb,
                trilinear_norm: nt,
                data_bound,
                ball_radius,
                log,
            });
        }
    }
    Err(Error::Numerical(format!(
        "no convergence in {} iterations; differences {log:?}",
        opts.max_iter
    )))
}

/// Two built-in demonstrations: the scalar equation `y = 0.1 + 0.25y` and a coupled
/// ten-dimensional problem with quadratic and cubic terms.
pub fn demo_problems(seed: u64) -> Result<Vec<(String, FixedPoint)>> {
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lin = |x: &[f64]| vec![0.25 * x[0]];
    let zero2 = |_: &[f64], _: &[f64]| vec![0.0];
    let zero3 = |_: &[f64], _: &[f64], _: &[f64]| vec![0.0];
    let scalar = FixedPointProblem {
        dim: 1,
        linear: &lin,
        bilinear: &zero2,
        trilinear: &zero3,
        norm: &norm,
    };
    let opts = ContractionOptions {
        seed,
        ..ContractionOptions::default()
    };
    let a = contraction_solve(&scalar, &[0.1], &opts)?;
    let sys = SyntheticSystem::new(10, seed);
    let (l, b, t) = sys.maps();
    let problem = FixedPointProblem {
        dim: 10,
        linear: &l,
        bilinear: &b,
        trilinear: &t,
        norm: &norm,
    };
    let y0: Vec<f64> = (0..10).map(|k| 0.01 * ((k as f64) * 0.7).sin()).collect();
    let c = contraction_solve(&problem, &y0, &opts)?;
    Ok(vec![("scalar".into(), a), ("synthetic10".into(), c)])
}

/// Random small linear, quadratic and cubic maps on `ℝ^d`.
pub struct SyntheticSystem {
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl SyntheticSystem {
    pub fn new(dim: usize, seed: u64) -> SyntheticSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize, s: f64| (0..n).map(|_| s * rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        SyntheticSystem {
            dim,
            a: draw(dim * dim, 0.2 / dim as f64),
            b: draw(dim * dim, 0.3 / dim as f64),
            c: draw(dim, 0.2),
        }
    }

    /// `L y = A y`, `B(y, z)_i = (Σ_j b_ij y_j)(Σ_j b_ij z_j)`, `Ψ(y, z, w)_i = c_i y_i z_i w_i`.
    #[allow(clippy::type_complexity)]
    pub fn maps(
        &self,
    ) -> (
        impl Fn(&[f64]) -> Vec<f64> + '_,
        impl Fn(&[f64], &[f64]) -> Vec<f64> + '_,
        impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + '_,
    ) {
        let d = self.dim;
        let row = move |m: &[f64], i: usize, x: &[f64]| (0..d).map(|j| m[i * d + j] * x[j]).sum::<f64>();
        (
            move |y: &[f64]| (0..d).map(|i| row(&self.a, i, y)).collect(),
            move |y: &[f64], z: &[f64]| (0..d).map(|i| row(&self.b, i, y) * row(&self.b, i, z)).collect(),
            move |y: &[f64], z: &[f64], w: &[f64]| (0..d).map(|i| self.c[i] * y[i] * z[i] * w[i]).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::Solve;

    fn euclid(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn scalar_problem(a: f64, b: f64, c: f64, y0: f64) -> Result<FixedPoint> {
        let l = move |x: &[f64]| vec![a * x[0]];
        let q = move |x: &[f64], y: &[f64]| vec![b * x[0] * y[0]];
        let t = move |x: &[f64], y: &[f64], z: &[f64]| vec![c * x[0] * y[0] * z[0]];
        let p = FixedPointProblem {
            dim: 1,
            linear: &l,
            bilinear: &q,
            trilinear: &t,
            norm: &euclid,
        };
        contraction_solve(&p, &[y0], &ContractionOptions::default())
    }

    /// Root of `g(y) = y0 + (a−1)y + by² + cy³` in `[lo, hi]` by bisection.
    fn bisect(a: f64, b: f64, c: f64, y0: f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = |y: f64| y0 + (a - 1.0) * y + b * y * y + c * y * y * y;
        assert!(g(lo) * g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(lo) * g(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn geometric_series() {
        let r = scalar_problem(0.25, 0.0, 0.0, 0.1).unwrap();
        assert!((r.y[0] - 2.0 / 15.0).abs() < 1e-12);
        assert!(r.growth.is_finite() && r.growth > 0.0);
        let z = scalar_problem(0.25, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(z.y[0], 0.0);
        assert_eq!(z.growth, 0.0);
    }

    #[test]
    fn cubic_matches_bisection() {
        let (a, b, c, y0) = (0.1, 0.3, -0.2, 0.05);
        let r = scalar_problem(a, b, c, y0).unwrap();
        let want = bisect(a, b, c, y0, 0.0, 0.2);
        assert!((r.y[0] - want).abs() < 1e-12);
    }

    #[test]
    fn preconditions_rejected() {
        assert!(matches!(scalar_problem(0.6, 0.0, 0.0, 0.1), Err(Error::Precondition { .. })));
        assert!(matches!(scalar_problem(0.1, 1.0, 0.0, 0.2), Err(Error::Precondition { .. })));
    }

    #[test]
    fn ten_dimensional_system_matches_newton() {
        let sys = SyntheticSystem::new(10, 4);
        let (l, b, t) = sys.maps();
        let p = FixedPointProblem {
            dim: 10,
            linear: &l,
            bilinear: &b,
            trilinear: &t,
            norm: &euclid,
        };
        let y0: Vec<f64> = (0..10).map(|k| 0.02 * (k as f64 - 4.5) / 4.5).collect();
        let r = contraction_solve(&p, &y0, &ContractionOptions::default()).unwrap();
        // Independent oracle: Newton on F(y) = y − y0 − Ly − B(y,y) − Ψ(y,y,y) from zero.
        let d = 10;
        let mut y = vec![0.0; d];
        for _ in 0..50 {
            let f: Vec<f64> = {
                let (ly, by, ty) = (l(&y), b(&y, &y), t(&y, &y, &y));
                (0..d).map(|i| y[i] - y0[i] - ly[i] - by[i] - ty[i]).collect()
            };
            let mut jac = faer::Mat::<f64>::zeros(d, d);
            for j in 0..d {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                let (le, b1, b2) = (l(&e), b(&e, &y), b(&y, &e));
                for i in 0..d {
                    let cub = if i == j { 3.0 * sys.c[i] * y[i] * y[i] } else { 0.0 };
                    jac[(i, j)] = e[i] - le[i] - b1[i] - b2[i] - cub;
                }
            }
            let rhs = faer::Mat::from_fn(d, 1, |i, _| -f[i]);
            let step = jac.partial_piv_lu().solve(&rhs);
            for i in 0..d {
                y[i] += step[(i, 0)];
            }
        }
        for i in 0..d {
            assert!((r.y[i] - y[i]).abs() < 1e-12, "{} vs {}", r.y[i], y[i]);
        }
        assert!(r.growth.is_finite());
    }

    #[test]
    fn demos_run() {
        let d = demo_problems(1).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d[0].1.y[0] - 2.0 / 15.0).abs() < 1e-12);
    }
}
