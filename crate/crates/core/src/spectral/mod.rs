//! Spectral structure of `Λ̂(ξ) = ε⁻²L − ε⁻¹ i v·ξ` near `ξ = 0`.

pub mod branches;
pub mod transport;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::collision::LinearizedOperator;
use crate::equilibrium::{norm_sq, MomentTable};
use crate::error::{check_len, Error, Result};
use crate::velocity::VelocityGrid;

pub use branches::{fit_dispersion, max_real_part, trace_branches, BranchPoint, DispersionFit, SpectralBranchTable};
pub use transport::{apply_u_nsf, invert_on_complement, transport_coefficients, ComplementSolver, TransportCoefficients};

/// The four small-eigenvalue families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Ns,
    Heat,
    WavePlus,
    WaveMinus,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Ns => "NS",
            Branch::Heat => "heat",
            Branch::WavePlus => "wave+",
            Branch::WaveMinus => "wave-",
        }
    }
}

/// `ε⁻²L − ε⁻¹ i diag(v·ξ)`.
pub fn assemble_lambda(op: &LinearizedOperator, xi: [f64; 3], eps: f64) -> Result<Mat<C64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive (got {eps})")));
    }
    let l = op.matrix();
    let nodes = op.grid().nodes();
    let a = 1.0 / (eps * eps);
    let b = 1.0 / eps;
    Ok(Mat::from_fn(op.len(), op.len(), |i, j| {
        let mut z = C64::new(a * l[(i, j)], 0.0);
        if i == j {
            let v = nodes[i];
            z.im -= b * (v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2]);
        }
        z
    }))
}

pub(crate) fn unit(direction: [f64; 3]) -> Result<[f64; 3]> {
    let n = norm_sq(direction).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid("direction must be a nonzero finite vector"));
    }
    Ok(direction.map(|x| x / n))
}

/// Two unit vectors completing `ω` to an orthonormal frame.
pub fn transverse_pair(w: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let axis = (0..3).min_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap_or(0);
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let d = e[0] * w[0] + e[1] * w[1] + e[2] * w[2];
    let mut t1 = [e[0] - d * w[0], e[1] - d * w[1], e[2] - d * w[2]];
    let n = norm_sq(t1).sqrt();
    t1 = t1.map(|x| x / n);
    let t2 = [
        w[1] * t1[2] - w[2] * t1[1],
        w[2] * t1[0] - w[0] * t1[2],
        w[0] * t1[1] - w[1] * t1[0],
    ];
    (t1, t2)
}

/// Zeroth-order eigenfunctions for a direction `ω`, orthonormal in the plain product.
///
/// `wave_plus` is the limit eigenfunction of the branch with `Im λ = +c|ξ|`; under
/// `Λ̂ = L − i v·ξ` this carries the factor `1 − √(3K/E) ω·v`.
#[derive(Clone, Debug)]
pub struct ZerothProjectors {
    pub direction: [f64; 3],
    pub ns: [Vec<f64>; 2],
    pub heat: Vec<f64>,
    pub wave_plus: Vec<f64>,
    pub wave_minus: Vec<f64>,
    pub(crate) weight: f64,
}

pub fn zeroth_projectors(grid: &VelocityGrid, moments: &MomentTable, direction: [f64; 3]) -> Result<ZerothProjectors> {
    let w = unit(direction)?;
    let (t1, t2) = transverse_pair(w);
    let (e, k) = (moments.e, moments.kcap);
    let heat_norm = (k * (k * moments.e0 - 1.0)).sqrt();
    if !(heat_norm > 0.0) {
        return Err(Error::Numerical(format!(
            "heat mode normalization K(K·E0 − 1) is not positive ({})",
            k * (k * moments.e0 - 1.0)
        )));
    }
    let s2 = 1.0 / moments.e2.sqrt();
    let a = (3.0 * k / e).sqrt();
    let wk = 1.0 / (2.0 * k).sqrt();
    let dotw = |v: [f64; 3], u: [f64; 3]| v[0] * u[0] + v[1] * u[1] + v[2] * u[2];
    let wave = |sign: f64| {
        grid.sample_weighted(|v| wk * (1.0 + sign * a * dotw(v, w) + (norm_sq(v) - e) / e))
    };
    Ok(ZerothProjectors {
        direction: w,
        ns: [
            grid.sample_weighted(|v| s2 * dotw(v, t1)),
            grid.sample_weighted(|v| s2 * dotw(v, t2)),
        ],
        heat: grid.sample_weighted(|v| (k - norm_sq(v) / e) / heat_norm),
        wave_plus: wave(-1.0),
        wave_minus: wave(1.0),
        weight: grid.weights()[0],
    })
}

impl ZerothProjectors {
    /// The functions spanning the range of a branch projector.
    pub fn functions(&self, branch: Branch) -> Vec<&[f64]> {
        match branch {
            Branch::Ns => vec![&self.ns[0], &self.ns[1]],
            Branch::Heat => vec![&self.heat],
            Branch::WavePlus => vec![&self.wave_plus],
            Branch::WaveMinus => vec![&self.wave_minus],
        }
    }

    /// `𝒫_⋆^(0) f`.
    pub fn apply(&self, branch: Branch, f: &[C64]) -> Result<Vec<C64>> {
        check_len(self.heat.len(), f.len())?;
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        for psi in self.functions(branch) {
            let c: C64 = psi.iter().zip(f).map(|(p, x)| x * *p).sum::<C64>() * self.weight;
            for (o, p) in out.iter_mut().zip(psi) {
                *o += c * *p;
            }
        }
        Ok(out)
    }

    /// Dense matrix of `𝒫_⋆^(0)` acting on nodal values.
    pub fn matrix(&self, branch: Branch) -> Mat<f64> {
        let m = self.heat.len();
        let fs = self.functions(branch);
        Mat::from_fn(m, m, |i, j| fs.iter().map(|p| p[i] * p[j]).sum::<f64>() * self.weight)
    }

    /// Plain-product overlap `Σ_k |⟨φ_k, x⟩|²` of a unit vector with a branch range.
    pub fn overlap(&self, branch: Branch, x: &[C64]) -> f64 {
        self.functions(branch)
            .iter()
            .map(|p| (p.iter().zip(x).map(|(a, b)| b * *a).sum::<C64>() * self.weight).norm_sqr())
            .sum()
    }
}
