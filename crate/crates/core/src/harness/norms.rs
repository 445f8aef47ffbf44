//! Discrete Chemin–Lerner and Bochner-type mixed norms over per-mode time series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::Flavor;

/// How a per-mode time series is collapsed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeFlavor {
    /// `sup_t` inside the frequency sum.
    SupInTime,
    /// `∫ dt` (trapezoidal) inside the frequency sum.
    L2InTime,
}

/// Velocity norms of one spatial mode over time.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ModeSeries {
    pub xi_norm: f64,
    /// Number of modes represented (2 for a `±ξ` pair).
    pub multiplicity: u32,
    pub plain: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Norm series of a whole trajectory, sampled at common times.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct NormTrajectory {
    pub times: Vec<f64>,
    pub modes: Vec<ModeSeries>,
}

impl NormTrajectory {
    pub fn new(xi_norms: &[f64], multiplicities: &[u32]) -> NormTrajectory {
        NormTrajectory {
            times: Vec::new(),
            modes: xi_norms
                .iter()
                .zip(multiplicities)
                .map(|(x, m)| ModeSeries {
                    xi_norm: *x,
                    multiplicity: *m,
                    ..ModeSeries::default()
                })
                .collect(),
        }
    }

    /// Appends one sample; `values[k] = (plain, gamma)` for mode `k`.
    pub fn push(&mut self, t: f64, values: &[(f64, f64)]) -> Result<()> {
        crate::error::check_len(self.modes.len(), values.len())?;
        self.times.push(t);
        for (m, (p, g)) in self.modes.iter_mut().zip(values) {
            m.plain.push(*p);
            m.gamma.push(*g);
        }
        Ok(())
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }
}

/// `(Σ_ξ w(ξ)^{2s} · T_t[‖·‖²])^{1/2}` with `w = ⟨ξ⟩` or `|ξ|` and `T_t` either `sup_t` or `∫dt`.
pub fn mixed_norm(traj: &NormTrajectory, s: f64, time: TimeFlavor, velocity: Flavor, homogeneous: bool) -> Result<f64> {
    if traj.times.is_empty() || traj.modes.is_empty() {
        return Err(Error::invalid("mixed norm of an empty trajectory"));
    }
    let mut total = 0.0;
    for m in &traj.modes {
        let series = match velocity {
            Flavor::Plain => &m.plain,
            Flavor::Gamma => &m.gamma,
        };
        crate::error::check_len(traj.times.len(), series.len())?;
        let w2 = if homogeneous {
            m.xi_norm * m.xi_norm
        } else {
            1.0 + m.xi_norm * m.xi_norm
        };
        let weight = if w2 == 0.0 { 0.0 } else { w2.powf(s) };
        if weight == 0.0 {
            continue;
        }
        let collapsed = match time {
            TimeFlavor::SupInTime => series.iter().map(|x| x * x).fold(0.0, f64::max),
            TimeFlavor::L2InTime => traj
                .times
                .windows(2)
                .zip(series.windows(2))
                .map(|(t, x)| 0.5 * (t[1] - t[0]) * (x[0] * x[0] + x[1] * x[1]))
                .sum(),
        };
        total += weight * m.multiplicity as f64 * collapsed;
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(xi: f64, values: &[f64], times: &[f64]) -> NormTrajectory {
        let mut t = NormTrajectory::new(&[xi], &[1]);
        for (ti, v) in times.iter().zip(values) {
            t.push(*ti, &[(*v, 2.0 * v)]).unwrap();
        }
        t
    }

    #[test]
    fn constant_single_mode() {
        let t = single(3.0, &[0.7; 5], &[0.0, 0.1, 0.2, 0.3, 0.4]);
        let w: f64 = 10.0f64.sqrt();
        let got = mixed_norm(&t, 0.5, TimeFlavor::SupInTime, Flavor::Plain, false).unwrap();
        assert!((got - w.powf(0.5) * 0.7).abs() < 1e-15);
        let got = mixed_norm(&t, 1.5, TimeFlavor::L2InTime, Flavor::Gamma, true).unwrap();
        assert!((got - 3.0f64.powf(1.5) * 1.4 * 0.4f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn two_modes_by_hand() {
        let mut t = NormTrajectory::new(&[0.0, 2.0], &[1, 2]);
        t.push(0.0, &[(1.0, 0.0), (0.5, 0.0)]).unwrap();
        t.push(0.5, &[(3.0, 0.0), (0.25, 0.0)]).unwrap();
        // sup: 1·9 + 2·5·0.25 = 11.5.
        let sup = mixed_norm(&t, 1.0, TimeFlavor::SupInTime, Flavor::Plain, false).unwrap();
        assert!((sup - 11.5f64.sqrt()).abs() < 1e-12);
        // L2, homogeneous: zero mode drops; 2·4·0.25·(0.25 + 0.0625) = 0.625.
        let l2 = mixed_norm(&t, 1.0, TimeFlavor::L2InTime, Flavor::Plain, true).unwrap();
        assert!((l2 - 0.625f64.sqrt()).abs() < 1e-12);
        assert!(mixed_norm(&NormTrajectory::default(), 1.0, TimeFlavor::SupInTime, Flavor::Plain, false).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_smoothness(xs in prop::collection::vec(0.0f64..5.0, 1..6), s in 0.0f64..2.0, ds in 0.0f64..1.0) {
            let mut t = NormTrajectory::new(&xs, &vec![2; xs.len()]);
            t.push(0.0, &xs.iter().map(|x| (x + 0.1, 0.0)).collect::<Vec<_>>()).unwrap();
            t.push(1.0, &xs.iter().map(|x| (0.5 * x, 0.0)).collect::<Vec<_>>()).unwrap();
            for flavor in [TimeFlavor::SupInTime, TimeFlavor::L2InTime] {
                let a = mixed_norm(&t, s, flavor, Flavor::Plain, false).unwrap();
                let b = mixed_norm(&t, s + ds, flavor, Flavor::Plain, false).unwrap();
                prop_assert!(b >= a * (1.0 - 1e-14));
            }
        }
    }
}
