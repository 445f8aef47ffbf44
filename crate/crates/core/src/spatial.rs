//! Periodic spatial box: wave-vector bookkeeping and FFT transforms.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic box in one or two dimensions with `modes` Fourier modes per axis.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpatialSpec {
    pub dimension: usize,
    pub modes_per_axis: usize,
    pub box_length: f64,
}

impl SpatialSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dimension == 1 || self.dimension == 2) {
            return Err(Error::invalid(format!("spatial dimension must be 1 or 2 (got {})", self.dimension)));
        }
        if self.modes_per_axis < 4 || self.modes_per_axis % 2 != 0 {
            return Err(Error::invalid(format!(
                "modes per axis must be even and at least 4 (got {})",
                self.modes_per_axis
            )));
        }
        if !(self.box_length > 0.0 && self.box_length.is_finite()) {
            return Err(Error::invalid(format!("box length must be positive (got {})", self.box_length)));
        }
        Ok(())
    }
}

/// Modes are stored in FFT order along each axis (`0, 1, …, N/2−1, −N/2, …, −1`),
/// the first axis slowest.
#[derive(Clone)]
pub struct SpatialGrid {
    spec: SpatialSpec,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpatialGrid").field("spec", &self.spec).finish()
    }
}

impl SpatialGrid {
    pub fn new(spec: SpatialSpec) -> Result<SpatialGrid> {
        spec.validate()?;
        let mut planner = FftPlanner::new();
        let n = spec.modes_per_axis;
        Ok(SpatialGrid {
            fft_fwd: planner.plan_fft_forward(n),
            fft_inv: planner.plan_fft_inverse(n),
            spec,
        })
    }

    pub fn spec(&self) -> &SpatialSpec {
        &self.spec
    }
    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }
    pub fn modes_per_axis(&self) -> usize {
        self.spec.modes_per_axis
    }
    /// Number of modes, equal to the number of collocation points.
    pub fn len(&self) -> usize {
        self.spec.modes_per_axis.pow(self.spec.dimension as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    fn signed(&self, j: usize) -> i64 {
        let n = self.spec.modes_per_axis;
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    fn unsigned(&self, k: i64) -> usize {
        let n = self.spec.modes_per_axis as i64;
        k.rem_euclid(n) as usize
    }

    /// Integer wave vector of a mode (second entry 0 in one dimension).
    pub fn wavenumber(&self, idx: usize) -> [i64; 2] {
        let n = self.spec.modes_per_axis;
        if self.spec.dimension == 1 {
            [self.signed(idx), 0]
        } else {
            [self.signed(idx / n), self.signed(idx % n)]
        }
    }

    pub fn index_of(&self, k: [i64; 2]) -> usize {
        if self.spec.dimension == 1 {
            self.unsigned(k[0])
        } else {
            self.unsigned(k[0]) * self.spec.modes_per_axis + self.unsigned(k[1])
        }
    }

    /// Physical wave vector `ξ = 2πk/L`.
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let k = self.wavenumber(idx);
        let s = 2.0 * std::f64::consts::PI / self.spec.box_length;
        [s * k[0] as f64, s * k[1] as f64, 0.0]
    }

    pub fn xi_norm(&self, idx: usize) -> f64 {
        let x = self.xi(idx);
        (x[0] * x[0] + x[1] * x[1]).sqrt()
    }

    /// Index of `−k`.
    pub fn negate(&self, idx: usize) -> usize {
        let k = self.wavenumber(idx);
        self.index_of([-k[0], -k[1]])
    }

    fn is_nyquist(&self, idx: usize) -> bool {
        let h = (self.spec.modes_per_axis / 2) as i64;
        let k = self.wavenumber(idx);
        k[0] == -h || k[1] == -h
    }

    /// Modes retained by the 2/3 rule: `|k_a| ≤ N/3` on every axis.
    pub fn is_resolved(&self, idx: usize) -> bool {
        let lim = (self.spec.modes_per_axis / 3) as i64;
        let k = self.wavenumber(idx);
        !self.is_nyquist(idx) && k[0].abs() <= lim && k[1].abs() <= lim
    }

    /// One representative of each pair `{k, −k}`: the lexicographically non-negative one.
    pub fn is_canonical(&self, idx: usize) -> bool {
        let k = self.wavenumber(idx);
        k[0] > 0 || (k[0] == 0 && k[1] >= 0)
    }

    /// Resolved canonical modes, in storage order.
    pub fn active_modes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_resolved(i) && self.is_canonical(i)).collect()
    }

    /// Collocation point coordinates.
    pub fn point(&self, p: usize) -> [f64; 2] {
        let n = self.spec.modes_per_axis;
        let h = self.spec.box_length / n as f64;
        if self.spec.dimension == 1 {
            [p as f64 * h, 0.0]
        } else {
            [(p / n) as f64 * h, (p % n) as f64 * h]
        }
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.spec.modes_per_axis;
        if self.spec.dimension == 1 {
            plan.process(data);
        } else {
            for row in data.chunks_mut(n) {
                plan.process(row);
            }
            let mut col = vec![C64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                plan.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
    }

    /// `f(x_p) = Σ_k f̂_k e^{iξ_k·x_p}`; the imaginary part is discarded.
    pub fn to_physical(&self, coeffs: &[C64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.len(), coeffs.len())?;
        let mut buf = coeffs.to_vec();
        self.transform(&mut buf, &self.fft_inv);
        Ok(buf.into_iter().map(|z| z.re).collect())
    }

    /// `f̂_k = N^{−d} Σ_p f(x_p) e^{−iξ_k·x_p}`.
    pub fn to_spectral(&self, values: &[f64]) -> Result<Vec<C64>> {
        crate::error::check_len(self.len(), values.len())?;
        let mut buf: Vec<C64> = values.iter().map(|x| C64::new(*x, 0.0)).collect();
        self.transform(&mut buf, &self.fft_fwd);
        let s = 1.0 / self.len() as f64;
        Ok(buf.into_iter().map(|z| z * s).collect())
    }

    /// Largest `|f̂(−k) − conj f̂(k)|` over all modes.
    pub fn reality_defect(&self, coeffs: &[C64]) -> f64 {
        (0..self.len())
            .map(|i| (coeffs[self.negate(i)] - coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }
}
