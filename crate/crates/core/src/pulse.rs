// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Transform-limited and chirped Gaussian pulses.
//!
//! Units throughout: time in ps, energy in meV, angular frequency in rad/ps,
//! spectral chirp in ps². `tau0` is the intensity FWHM of the transform-limited
//! pulse, so the field (and Rabi frequency) envelope is
//! `exp(-2 ln2 t² / τ²)` where `τ` is the (possibly stretched) duration.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.6582119569;

/// `∫ exp(-2 ln2 t²/τ²) dt = τ · GAUSS_AREA_FACTOR`.
pub(crate) fn gauss_area_factor() -> f64 {
    (PI / (2.0 * LN_2)).sqrt()
}

/// Transform-limited Gaussian pulse plus a quadratic spectral phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Intensity FWHM of the transform-limited pulse (ps).
    pub tau0: f64,
    /// Transform-limited pulse area in units of π, for a dot at the mean dipole.
    pub area: f64,
    /// Laser centre photon energy ħω_l (meV).
    pub center_energy: f64,
    /// Spectral chirp φ″ (ps²).
    pub phi2: f64,
}

impl PulseSpec {
    pub fn new(tau0: f64, area: f64, center_energy: f64, phi2: f64) -> Result<Self> {
        let pulse = PulseSpec {
            tau0,
            area,
            center_energy,
            phi2,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0) || !self.tau0.is_finite() {
            return Err(Error::domain(format!("tau0 must be > 0, got {}", self.tau0)));
        }
        if !(self.area >= 0.0) || !self.area.is_finite() {
            return Err(Error::domain(format!("area must be >= 0, got {}", self.area)));
        }
        if !self.phi2.is_finite() || !self.center_energy.is_finite() {
            return Err(Error::domain("phi2 and center_energy must be finite"));
        }
        Ok(())
    }

    pub fn with_area(self, area: f64) -> Self {
        PulseSpec { area, ..self }
    }

    pub fn with_phi2(self, phi2: f64) -> Self {
        PulseSpec { phi2, ..self }
    }

    /// Temporal chirp rate α (rad/ps²).
    pub fn alpha(&self) -> f64 {
        chirp_rate_unchecked(self.phi2, self.tau0)
    }

    /// Stretched intensity FWHM (ps).
    pub fn tau_chirped(&self) -> f64 {
        stretched_duration_unchecked(self.phi2, self.tau0)
    }

    /// Peak Rabi frequency (rad/ps) seen by a dot with the given dipole scale.
    ///
    /// The unchirped peak is fixed by the area; chirping keeps `∫Ω² dt`
    /// constant, so the peak drops by `sqrt(τ0/τ)`.
    pub fn peak_rabi(&self, dipole_scale: f64) -> f64 {
        let tl_peak = self.area * PI * dipole_scale / (self.tau0 * gauss_area_factor());
        tl_peak * (self.tau0 / self.tau_chirped()).sqrt()
    }

    pub fn chirped_params(&self, dipole_scale: f64) -> ChirpedPulseParams {
        ChirpedPulseParams {
            alpha: self.alpha(),
            tau_chirped: self.tau_chirped(),
            peak_rabi: self.peak_rabi(dipole_scale),
        }
    }

    /// Static detuning Δ₀ = (E_QD − ħω_l)/ħ in rad/ps.
    pub fn static_detuning(&self, qd_energy: f64) -> f64 {
        (qd_energy - self.center_energy) / HBAR_MEV_PS
    }
}

/// Time-domain parameters derived from a [`PulseSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpedPulseParams {
    /// rad/ps²
    pub alpha: f64,
    /// ps
    pub tau_chirped: f64,
    /// rad/ps
    pub peak_rabi: f64,
}

fn check_tau0(tau0: f64) -> Result<()> {
    if tau0 > 0.0 && tau0.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("tau0 must be > 0, got {tau0}")))
    }
}

fn chirp_rate_unchecked(phi2: f64, tau0: f64) -> f64 {
    let tl = tau0.powi(4) / (2.0 * LN_2).powi(2);
    2.0 * phi2 / (tl + (2.0 * phi2).powi(2))
}

fn stretched_duration_unchecked(phi2: f64, tau0: f64) -> f64 {
    let x = 4.0 * LN_2 * phi2 / (tau0 * tau0);
    tau0 * (1.0 + x * x).sqrt()
}

/// Temporal chirp rate α = 2φ″ / [τ₀⁴/(2 ln2)² + (2φ″)²] in rad/ps².
pub fn chirp_rate(phi2: f64, tau0: f64) -> Result<f64> {
    check_tau0(tau0)?;
    Ok(chirp_rate_unchecked(phi2, tau0))
}

/// Chirp that maximises |α| at fixed `tau0`: φ″ = τ₀²/(4 ln2).
pub fn max_chirp_rate_phi2(tau0: f64) -> Result<f64> {
    check_tau0(tau0)?;
    Ok(tau0 * tau0 / (4.0 * LN_2))
}

/// Intensity FWHM after applying spectral chirp `phi2` to a transform-limited
/// pulse of FWHM `tau0`.
pub fn stretched_duration(phi2: f64, tau0: f64) -> Result<f64> {
    check_tau0(tau0)?;
    Ok(stretched_duration_unchecked(phi2, tau0))
}

/// Rabi frequency Ω(t) in rad/ps.
pub fn rabi_envelope(pulse: &PulseSpec, dipole_scale: f64, t: f64) -> f64 {
    let tau = pulse.tau_chirped();
    pulse.peak_rabi(dipole_scale) * unit_envelope(t, tau)
}

/// `exp(-2 ln2 t²/τ²)`.
#[inline]
pub(crate) fn unit_envelope(t: f64, tau: f64) -> f64 {
    (-2.0 * LN_2 * t * t / (tau * tau)).exp()
}

/// Δ(t) = Δ₀ − 2αt in rad/ps.
pub fn instantaneous_detuning(pulse: &PulseSpec, qd_energy: f64, t: f64) -> f64 {
    pulse.static_detuning(qd_energy) - 2.0 * pulse.alpha() * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pulse(area: f64, phi2: f64) -> PulseSpec {
        PulseSpec::new(0.12, area, 1063.0, phi2).unwrap()
    }

    /// Composite Simpson over [-lim, lim].
    fn simpson(f: impl Fn(f64) -> f64, lim: f64, n: usize) -> f64 {
        let h = 2.0 * lim / n as f64;
        let mut s = f(-lim) + f(lim);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(-lim + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn chirp_rate_examples() {
        assert_eq!(chirp_rate(0.0, 0.12).unwrap(), 0.0);
        assert_relative_eq!(chirp_rate(0.3, 0.12).unwrap(), 1.666, epsilon = 1e-3);
        assert!(chirp_rate(0.3, 0.0).is_err());
        assert!(chirp_rate(0.3, -1.0).is_err());
        assert_relative_eq!(max_chirp_rate_phi2(0.12).unwrap(), 0.005194, epsilon = 1e-6);
    }

    #[test]
    fn stretched_duration_examples() {
        assert_eq!(stretched_duration(0.0, 0.12).unwrap(), 0.12);
        assert_relative_eq!(stretched_duration(0.3, 0.12).unwrap(), 6.93, epsilon = 5e-3);
        assert_eq!(
            stretched_duration(-0.3, 0.12).unwrap(),
            stretched_duration(0.3, 0.12).unwrap()
        );
        assert!(stretched_duration(0.1, 0.0).is_err());
    }

    #[test]
    fn stretched_bandwidth_matches_sweep() {
        // A strongly chirped pulse sweeps its full bandwidth over its duration:
        // 2α·τ ≈ 4 ln2/τ₀ (intensity-FWHM bandwidth in rad/ps).
        let (alpha, tau) = (chirp_rate(0.3, 0.12).unwrap(), stretched_duration(0.3, 0.12).unwrap());
        assert_relative_eq!(2.0 * alpha * tau, 4.0 * LN_2 / 0.12, max_relative = 1e-3);
    }

    #[test]
    fn envelope_area_and_energy() {
        let p = pulse(1.0, 0.0);
        let area = simpson(|t| rabi_envelope(&p, 1.0, t), 1.2, 20000);
        assert!((area - PI).abs() < 1e-9, "{area}");

        let e0 = simpson(|t| rabi_envelope(&p, 1.0, t).powi(2), 1.2, 20000);
        let pc = pulse(1.0, 0.3);
        let lim = 10.0 * pc.tau_chirped();
        let e1 = simpson(|t| rabi_envelope(&pc, 1.0, t).powi(2), lim, 200000);
        assert!((e0 - e1).abs() < 1e-9, "{e0} vs {e1}");

        let p2 = pulse(2.0, 0.0);
        let area = simpson(|t| rabi_envelope(&p2, 1.25, t), 1.2, 20000);
        assert!((area - 2.5 * PI).abs() < 1e-9);
    }

    #[test]
    fn chirped_params_invariants() {
        let p = pulse(1.0, 0.0);
        let c = p.chirped_params(1.0);
        assert_eq!(c.alpha, 0.0);
        assert_eq!(c.tau_chirped, 0.12);
        for phi2 in [-0.2, -0.01, 0.004, 0.3] {
            let c2 = pulse(1.0, phi2).chirped_params(1.0);
            assert!(c2.alpha != 0.0);
            assert!(c2.tau_chirped > 0.12);
            assert_relative_eq!(
                c2.peak_rabi.powi(2) * c2.tau_chirped,
                c.peak_rabi.powi(2) * c.tau_chirped,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn detuning_examples() {
        let p = pulse(1.0, 0.0);
        assert_eq!(instantaneous_detuning(&p, 1063.0, 0.7), 0.0);
        let pc = pulse(1.0, 0.3);
        assert_relative_eq!(instantaneous_detuning(&pc, 1063.0, 1.0), -3.332, epsilon = 2e-3);
        assert_relative_eq!(instantaneous_detuning(&p, 1067.0, 0.0), 6.077, epsilon = 1e-3);
    }

    #[test]
    fn pulse_validation() {
        assert!(PulseSpec::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(PulseSpec::new(0.1, -1.0, 0.0, 0.0).is_err());
        assert!(PulseSpec::new(0.1, 1.0, 0.0, -0.5).is_ok());
    }
}
