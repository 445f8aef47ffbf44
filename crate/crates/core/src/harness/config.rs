//! Run configuration shared by every subcommand.

use serde::{Deserialize, Serialize};

use crate::collision::KernelKind;
use crate::error::{Error, Result};
use crate::kinetic::DtPolicy;
use crate::spatial::SpatialSpec;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    HardSphere,
    HardPotential,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelName,
    /// Inverse-power exponent, used by `hard_potential` only.
    pub p: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Angular rule used for the nonlinear terms during time evolution.
    pub nonlinear_n_theta: usize,
    pub nonlinear_n_phi: usize,
}

impl KernelConfig {
    pub fn kernel_kind(&self) -> KernelKind {
        match self.kind {
            KernelName::HardSphere => KernelKind::HardSphere,
            KernelName::HardPotential => KernelKind::HardPotential { p: self.p },
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kind: KernelName::HardSphere,
            p: 2.75,
            n_theta: 16,
            n_phi: 8,
            nonlinear_n_theta: 4,
            nonlinear_n_phi: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_per_axis: usize,
    pub extent: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_per_axis: 8, extent: 8.0 }
    }
}

/// Well-prepared fluid data and microscopic perturbation.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InitialDataConfig {
    /// Wave numbers (integer, first axis; both axes in 2D) carrying fluid data.
    pub fluid_modes: Vec<[i64; 2]>,
    pub fluid_amplitude: f64,
    pub micro_modes: Vec<[i64; 2]>,
    /// Microscopic amplitude is `micro_amplitude · ε^micro_exponent`.
    pub micro_amplitude: f64,
    pub micro_exponent: f64,
}

impl Default for InitialDataConfig {
    fn default() -> Self {
        InitialDataConfig {
            fluid_modes: vec![[1, 0], [2, 0]],
            fluid_amplitude: 0.1,
            micro_modes: vec![[0, 0], [1, 0], [2, 0]],
            micro_amplitude: 0.05,
            micro_exponent: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub direction: [f64; 3],
    pub radii: Vec<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            direction: [1.0, 0.0, 0.0],
            radii: (0..=10).map(|k| 0.02 * k as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub wavenumber: [i64; 2],
    pub epsilons: Vec<f64>,
    /// Fit window in units of `1/λ_gap` of the rescaled time `t/ε²`.
    pub window: [f64; 2],
    pub samples: usize,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            wavenumber: [1, 0],
            epsilons: vec![0.1, 0.05],
            window: [0.5, 4.0],
            samples: 40,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub space: SpatialSpec,
    pub epsilons: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub ell: f64,
    pub t_final: f64,
    pub dt: DtPolicy,
    pub seed: u64,
    /// Include `ε⁻¹Q + T` in kinetic evolutions.
    pub nonlinear: bool,
    /// Small-frequency radius of the fluid/remainder split.
    pub kappa: f64,
    pub initial: InitialDataConfig,
    pub spectrum: SpectrumConfig,
    pub decay: DecayConfig,
    /// Directory holding cached operator matrices.
    pub operator_cache: Option<String>,
    /// Default output directory when `--out` is not given.
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelConfig::default(),
            grid: GridConfig::default(),
            space: SpatialSpec {
                dimension: 1,
                modes_per_axis: 16,
                box_length: 4.0 * std::f64::consts::PI,
            },
            epsilons: vec![0.2, 0.1, 0.05],
            alpha: 0.05,
            beta: 0.25,
            ell: 2.0,
            t_final: 0.5,
            dt: DtPolicy::default(),
            seed: 1,
            nonlinear: true,
            kappa: crate::cutoff::DEFAULT_KAPPA,
            initial: InitialDataConfig::default(),
            spectrum: SpectrumConfig::default(),
            decay: DecayConfig::default(),
            operator_cache: None,
            output_dir: None,
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive (got {x})")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.25) {
            return Err(Error::invalid(format!(
                "alpha must satisfy 0 < alpha < 1/4 (got {})",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::invalid(format!("beta must satisfy 0 < beta < 1/2 (got {})", self.beta)));
        }
        if !(self.ell > 1.5 && self.ell <= 2.0) {
            return Err(Error::invalid(format!("ell must satisfy 3/2 < ell <= 2 (got {})", self.ell)));
        }
        if self.epsilons.is_empty() {
            return Err(Error::invalid("epsilon ladder is empty"));
        }
        for e in &self.epsilons {
            positive("epsilon", *e)?;
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid(format!(
                "epsilon ladder must be strictly decreasing (got {:?})",
                self.epsilons
            )));
        }
        self.kernel.kernel_kind().validate()?;
        for (name, n) in [
            ("n_theta", self.kernel.n_theta),
            ("n_phi", self.kernel.n_phi),
            ("nonlinear_n_theta", self.kernel.nonlinear_n_theta),
            ("nonlinear_n_phi", self.kernel.nonlinear_n_phi),
        ] {
            if n < 4 {
                return Err(Error::invalid(format!("{name} must be at least 4 (got {n})")));
            }
        }
        if self.grid.n_per_axis < 4 || self.grid.n_per_axis % 2 != 0 {
            return Err(Error::invalid(format!(
                "n_per_axis must be even and at least 4 (got {})",
                self.grid.n_per_axis
            )));
        }
        positive("extent", self.grid.extent)?;
        self.space.validate()?;
        positive("t_final", self.t_final)?;
        positive("dt_fluid", self.dt.dt_fluid)?;
        positive("c_stab", self.dt.c_stab)?;
        if let Some(dt) = self.dt.dt_override {
            positive("dt_override", dt)?;
        }
        positive("kappa", self.kappa)?;
        positive("fluid_amplitude", self.initial.fluid_amplitude)?;
        if !(self.initial.micro_amplitude >= 0.0) {
            return Err(Error::invalid("micro_amplitude must be non-negative"));
        }
        for e in &self.decay.epsilons {
            positive("decay epsilon", *e)?;
        }
        if !(self.decay.window[0] >= 0.0 && self.decay.window[1] > self.decay.window[0]) {
            return Err(Error::invalid(format!("decay window must be increasing (got {:?})", self.decay.window)));
        }
        if self.decay.samples < 4 {
            return Err(Error::invalid("decay study needs at least 4 samples"));
        }
        if self.spectrum.radii.windows(2).any(|w| w[1] <= w[0]) || self.spectrum.radii.iter().any(|r| *r < 0.0) {
            return Err(Error::invalid("spectrum radii must be non-negative and ascending"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial = RunConfig::from_json(r#"{"kernel": {"kind": "hard_potential"}, "epsilons": [0.1, 0.05]}"#).unwrap();
        assert_eq!(partial.kernel.kernel_kind(), KernelKind::HardPotential { p: 2.75 });
        assert_eq!(partial.kernel.n_theta, 16);
    }

    #[test]
    fn constraint_violations_are_named() {
        let e = RunConfig::from_json(r#"{"alpha": 0.3}"#).unwrap_err().to_string();
        assert!(e.contains("alpha") && e.contains("1/4"), "{e}");
        assert!(RunConfig::from_json(r#"{"beta": 0.5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"ell": 1.5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"epsilons": [0.1, 0.2]}"#).is_err());
        assert!(RunConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }
}
