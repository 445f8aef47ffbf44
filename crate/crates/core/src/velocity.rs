//! Discrete velocity lattice, weighted inner products and the projector onto the
//! collision invariants.

use num_complex::Complex64;

use crate::equilibrium::{mu_of_sq, norm_sq};
use crate::error::{check_len, Error, Result};

/// Uniform midpoint tensor grid on `[-extent, extent]³`.
#[derive(Clone, Debug)]
pub struct VelocityGrid {
    n: usize,
    extent: f64,
    h: f64,
    gamma: f64,
    axis: Vec<f64>,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    gamma_weights: Vec<f64>,
    mu: Vec<f64>,
    mq: Vec<f64>,
    sqrt_mq: Vec<f64>,
}

/// Which weight enters an inner product: `plain` for `L²_v`, `gamma` for `L²_γ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Plain,
    Gamma,
}

/// Trilinear interpolation stencil. Corners outside the lattice carry zero weight.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub idx: [u32; 8],
    pub w: [f64; 8],
    pub inside: bool,
}

impl Stencil {
    #[inline]
    pub fn eval(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..8 {
            s += self.w[c] * f[self.idx[c] as usize];
        }
        s
    }
}

pub fn build_velocity_grid(n_per_axis: usize, extent: f64, gamma: f64) -> Result<VelocityGrid> {
    if n_per_axis < 4 || n_per_axis % 2 == 1 {
        return Err(Error::invalid(format!(
            "n_per_axis must be even and >= 4 (got {n_per_axis})"
        )));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::invalid(format!("extent must be positive (got {extent})")));
    }
    if !gamma.is_finite() {
        return Err(Error::invalid("gamma must be finite"));
    }
    let n = n_per_axis;
    let h = 2.0 * extent / n as f64;
    // Symmetric construction so that x_{n-1-k} = -x_k exactly.
    let axis: Vec<f64> = (0..n)
        .map(|k| {
            if k < n / 2 {
                -(extent - (k as f64 + 0.5) * h)
            } else {
                extent - ((n - 1 - k) as f64 + 0.5) * h
            }
        })
        .collect();
    let m = n * n * n;
    let mut nodes = Vec::with_capacity(m);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                nodes.push([axis[a], axis[b], axis[c]]);
            }
        }
    }
    let weights = vec![h * h * h; m];
    let gamma_weights = nodes
        .iter()
        .map(|v| (1.0 + norm_sq(*v)).powf(0.5 * gamma))
        .collect();
    let mu: Vec<f64> = nodes.iter().map(|v| mu_of_sq(norm_sq(*v))).collect();
    let mq: Vec<f64> = mu.iter().map(|m| m * (1.0 - m)).collect();
    let sqrt_mq = mq.iter().map(|q| q.sqrt()).collect();
    Ok(VelocityGrid {
        n,
        extent,
        h,
        gamma,
        axis,
        nodes,
        weights,
        gamma_weights,
        mu,
        mq,
        sqrt_mq,
    })
}

impl VelocityGrid {
    pub fn n_per_axis(&self) -> usize {
        self.n
    }
    pub fn extent(&self) -> f64 {
        self.extent
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn gamma_weights(&self) -> &[f64] {
        &self.gamma_weights
    }
    /// `μ` at the nodes.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    /// `μ_q` at the nodes.
    pub fn mq(&self) -> &[f64] {
        &self.mq
    }
    /// `√μ_q` at the nodes.
    pub fn sqrt_mq(&self) -> &[f64] {
        &self.sqrt_mq
    }

    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.n + b) * self.n + c
    }

    pub fn coords(&self, i: usize) -> [usize; 3] {
        let n = self.n;
        [i / (n * n), (i / n) % n, i % n]
    }

    /// Node `j` with `v_j = -v_i`.
    pub fn mirror(&self, i: usize) -> usize {
        let [a, b, c] = self.coords(i);
        let n = self.n;
        self.index(n - 1 - a, n - 1 - b, n - 1 - c)
    }

    /// Samples `φ(v)` at every node.
    pub fn sample(&self, phi: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|v| phi(*v)).collect()
    }

    /// Samples `φ(v)·√μ_q(v)` at every node.
    pub fn sample_weighted(&self, phi: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.sqrt_mq)
            .map(|(v, s)| phi(*v) * s)
            .collect()
    }

    /// Trilinear stencil at an arbitrary velocity (zero extension outside the lattice).
    #[inline]
    pub fn stencil(&self, x: [f64; 3]) -> Stencil {
        let n = self.n as i64;
        let mut lo = [0u32; 3];
        let mut hi = [0u32; 3];
        let mut wl = [0.0; 3];
        let mut wh = [0.0; 3];
        let mut inside = true;
        for a in 0..3 {
            let t = (x[a] + self.extent) / self.h - 0.5;
            let k0 = t.floor();
            let fr = t - k0;
            let k0 = k0 as i64;
            if k0 >= 0 && k0 < n {
                lo[a] = k0 as u32;
                wl[a] = 1.0 - fr;
            } else {
                inside = false;
            }
            if k0 + 1 >= 0 && k0 + 1 < n {
                hi[a] = (k0 + 1) as u32;
                wh[a] = fr;
            } else {
                inside = false;
            }
        }
        let nn = self.n as u32;
        let mut st = Stencil {
            idx: [0; 8],
            w: [0.0; 8],
            inside,
        };
        for c in 0..8 {
            let (ia, wa) = if c & 4 == 0 { (lo[0], wl[0]) } else { (hi[0], wh[0]) };
            let (ib, wb) = if c & 2 == 0 { (lo[1], wl[1]) } else { (hi[1], wh[1]) };
            let (ic, wc) = if c & 1 == 0 { (lo[2], wl[2]) } else { (hi[2], wh[2]) };
            st.idx[c] = (ia * nn + ib) * nn + ic;
            st.w[c] = wa * wb * wc;
        }
        st
    }

    fn flavor_weight(&self, i: usize, flavor: Flavor) -> f64 {
        match flavor {
            Flavor::Plain => self.weights[i],
            Flavor::Gamma => self.weights[i] * self.gamma_weights[i],
        }
    }

    /// `Σᵢ wᵢ fᵢ gᵢ` (times `⟨vᵢ⟩^γ` for the gamma flavor).
    pub fn inner_product(&self, f: &[f64], g: &[f64], flavor: Flavor) -> Result<f64> {
        check_len(self.len(), f.len())?;
        check_len(self.len(), g.len())?;
        Ok((0..self.len())
            .map(|i| self.flavor_weight(i, flavor) * f[i] * g[i])
            .sum())
    }

    /// Complex inner product, conjugate-linear in the first slot.
    pub fn inner_product_c(&self, f: &[Complex64], g: &[Complex64], flavor: Flavor) -> Result<Complex64> {
        check_len(self.len(), f.len())?;
        check_len(self.len(), g.len())?;
        Ok((0..self.len())
            .map(|i| f[i].conj() * g[i] * self.flavor_weight(i, flavor))
            .sum())
    }

    pub fn norm(&self, f: &[f64], flavor: Flavor) -> Result<f64> {
        Ok(self.inner_product(f, f, flavor)?.max(0.0).sqrt())
    }

    pub fn norm_c(&self, f: &[Complex64], flavor: Flavor) -> Result<f64> {
        check_len(self.len(), f.len())?;
        Ok((0..self.len())
            .map(|i| f[i].norm_sqr() * self.flavor_weight(i, flavor))
            .sum::<f64>()
            .sqrt())
    }
}

/// Orthogonal projector onto `span{1, v₁, v₂, v₃, |v|²}·√μ_q`.
#[derive(Clone, Debug)]
pub struct KernelProjector {
    basis: Vec<Vec<f64>>,
    weight: f64,
}

impl KernelProjector {
    /// The five orthonormal basis fields, in the order `1, v₁, v₂, v₃, |v|²`.
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Quadrature weight used for the orthonormalization.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Coefficients `⟨e_k, f⟩` for the five basis fields.
    pub fn coefficients(&self, f: &[f64]) -> Result<[f64; 5]> {
        check_len(self.basis[0].len(), f.len())?;
        let mut c = [0.0; 5];
        for (k, e) in self.basis.iter().enumerate() {
            c[k] = self.weight * e.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(c)
    }

    pub fn coefficients_c(&self, f: &[Complex64]) -> Result<[Complex64; 5]> {
        check_len(self.basis[0].len(), f.len())?;
        let mut c = [Complex64::new(0.0, 0.0); 5];
        for (k, e) in self.basis.iter().enumerate() {
            c[k] = e.iter().zip(f).map(|(a, b)| b * *a).sum::<Complex64>() * self.weight;
        }
        Ok(c)
    }

    /// `P₀ f`.
    pub fn project(&self, f: &[f64]) -> Result<Vec<f64>> {
        let c = self.coefficients(f)?;
        let mut out = vec![0.0; f.len()];
        for (k, e) in self.basis.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(e) {
                *o += c[k] * x;
            }
        }
        Ok(out)
    }

    /// `P₀^⊥ f = f − P₀ f`.
    pub fn complement(&self, f: &[f64]) -> Result<Vec<f64>> {
        let p = self.project(f)?;
        Ok(f.iter().zip(&p).map(|(a, b)| a - b).collect())
    }

    pub fn project_c(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let c = self.coefficients_c(f)?;
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        for (k, e) in self.basis.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(e) {
                *o += c[k] * *x;
            }
        }
        Ok(out)
    }

    pub fn complement_c(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let p = self.project_c(f)?;
        Ok(f.iter().zip(&p).map(|(a, b)| a - b).collect())
    }

}

/// Gram–Schmidt (twice, for stability) of `(1, v₁, v₂, v₃, |v|²)√μ_q` in the plain inner product.
pub fn kernel_projector(grid: &VelocityGrid) -> Result<KernelProjector> {
    let w = grid.weights()[0];
    let raw: Vec<Vec<f64>> = vec![
        grid.sample_weighted(|_| 1.0),
        grid.sample_weighted(|v| v[0]),
        grid.sample_weighted(|v| v[1]),
        grid.sample_weighted(|v| v[2]),
        grid.sample_weighted(norm_sq),
    ];
    let dot = |a: &[f64], b: &[f64]| w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(5);
    for r in raw {
        let n0 = dot(&r, &r).sqrt();
        let mut x = r;
        for _ in 0..2 {
            for e in &basis {
                let c = dot(e, &x);
                for (xi, ei) in x.iter_mut().zip(e) {
                    *xi -= c * ei;
                }
            }
        }
        let n1 = dot(&x, &x).sqrt();
        if !(n1 > 1e-8 * n0) {
            return Err(Error::Numerical(format!(
                "collision-invariant Gram matrix is singular on this grid (relative norm {:.3e})",
                n1 / n0
            )));
        }
        for xi in x.iter_mut() {
            *xi /= n1;
        }
        basis.push(x);
    }
    Ok(KernelProjector { basis, weight: w })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_and_symmetry() {
        let g = build_velocity_grid(8, 8.0, 1.0).unwrap();
        assert_eq!(g.len(), 512);
        assert!((g.weights().iter().sum::<f64>() - 4096.0).abs() < 1e-9);
        for i in 0..g.len() {
            let j = g.mirror(i);
            for a in 0..3 {
                assert_eq!(g.nodes()[j][a], -g.nodes()[i][a]);
            }
        }
        assert!(build_velocity_grid(7, 8.0, 1.0).is_err());
        assert!(build_velocity_grid(2, 8.0, 1.0).is_err());
        assert!(build_velocity_grid(8, 0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_weight_formula() {
        let g = build_velocity_grid(8, 8.0, 1.0).unwrap();
        let i = g.index(4, 4, 4);
        let v = g.nodes()[i];
        assert!((g.gamma_weights()[i] - (1.0 + norm_sq(v)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stencil_reproduces_nodes_and_linear_functions() {
        let g = build_velocity_grid(8, 4.0, 1.0).unwrap();
        let f = g.sample(|v| 1.0 + 2.0 * v[0] - v[1] + 0.5 * v[2]);
        let st = g.stencil(g.nodes()[77]);
        assert!((st.eval(&f) - f[77]).abs() < 1e-13);
        let x = [0.3, -1.1, 2.2];
        let st = g.stencil(x);
        assert!(st.inside);
        assert!((st.eval(&f) - (1.0 + 0.6 + 1.1 + 1.1)).abs() < 1e-13);
        let st = g.stencil([10.0, 0.0, 0.0]);
        assert!(!st.inside);
        assert_eq!(st.eval(&f), 0.0);
    }

    #[test]
    fn projector_properties() {
        let g = build_velocity_grid(8, 8.0, 1.0).unwrap();
        let p = kernel_projector(&g).unwrap();
        let v1 = g.sample_weighted(|v| v[0]);
        let pv = p.project(&v1).unwrap();
        let scale = v1.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in v1.iter().zip(&pv) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
        let cubic = g.sample_weighted(|v| v[0].powi(3));
        let c = p.coefficients(&cubic).unwrap();
        assert!(c[0].abs() < 1e-12 && c[4].abs() < 1e-12);
    }
}
