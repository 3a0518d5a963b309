// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Rotating-frame two-level dynamics under a single chirped pulse.
//!
//! The Hamiltonian in the frame co-rotating with the instantaneous laser
//! phase is `H(t) = (ħ/2)·[[−Δ(t), Ω(t)], [Ω(t), Δ(t)]]` with real Ω.
//! Integration is done with classical fixed-step RK4 on the interaction
//! picture amplitudes `a0 = c0·e^{−iΦ/2}`, `a1 = c1·e^{iΦ/2}` where
//! `Φ(t)` is the detuning phase accumulated since the start of the window. The diagonal part of
//! H is then exact and only the coupling `(Ω/2)·e^{±iΦ}` is stepped, which is
//! what keeps the norm drift far below 1e-9 for strongly swept pulses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{unit_envelope, PulseSpec, HBAR_MEV_PS};

/// Steps per stretched FWHM in the automatic step rule.
const STEPS_PER_TAU: f64 = 2000.0;
/// Upper bound on `dt · max(|Δ|, Ω_pk)` in the automatic step rule (rad).
const MAX_PHASE_PER_STEP: f64 = 0.05;

/// Normalised amplitude pair in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelState {
    pub c0: Complex64,
    pub c1: Complex64,
}

impl TwoLevelState {
    pub fn ground() -> Self {
        TwoLevelState {
            c0: Complex64::new(1.0, 0.0),
            c1: Complex64::new(0.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    /// Excited-state occupation |c1|².
    pub fn occupation(&self) -> f64 {
        self.c1.norm_sqr()
    }
}

/// One emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumDot {
    /// meV
    pub transition_energy: f64,
    /// μ/μ̄
    pub dipole_scale: f64,
}

impl QuantumDot {
    pub fn new(transition_energy: f64, dipole_scale: f64) -> Result<Self> {
        let qd = QuantumDot {
            transition_energy,
            dipole_scale,
        };
        qd.validate()?;
        Ok(qd)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dipole_scale > 0.0) || !self.dipole_scale.is_finite() {
            return Err(Error::domain(format!(
                "dipole_scale must be > 0, got {}",
                self.dipole_scale
            )));
        }
        if !self.transition_energy.is_finite() {
            return Err(Error::domain("transition_energy must be finite"));
        }
        Ok(())
    }

    /// A dot detuned by `detuning_mev` from the laser centre of `pulse`.
    pub fn detuned_from(pulse: &PulseSpec, detuning_mev: f64, dipole_scale: f64) -> Result<Self> {
        QuantumDot::new(pulse.center_energy + detuning_mev, dipole_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorParams {
    /// Fixed step in ps; `None` selects the automatic rule
    /// (τ/2000, capped so that `dt·max(|Δ|, Ω_pk) ≤ 0.05`).
    pub dt: Option<f64>,
    /// Half-window as a multiple of the stretched duration.
    pub t_span_factor: f64,
    /// Allowed drift of |c0|² + |c1|² from 1.
    pub norm_tol: f64,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        IntegratorParams {
            dt: None,
            t_span_factor: 4.0,
            norm_tol: 1e-9,
        }
    }
}

impl IntegratorParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::domain(format!("dt must be > 0, got {dt}")));
            }
        }
        if !(self.t_span_factor >= 3.0) || !self.t_span_factor.is_finite() {
            return Err(Error::domain(format!(
                "t_span_factor must be >= 3, got {}",
                self.t_span_factor
            )));
        }
        if !(self.norm_tol > 0.0 && self.norm_tol <= 1e-6) {
            return Err(Error::domain(format!(
                "norm_tol must be in (0, 1e-6], got {}",
                self.norm_tol
            )));
        }
        Ok(())
    }

    /// Half-width of the integration window (ps).
    pub fn half_window(&self, pulse: &PulseSpec) -> f64 {
        self.t_span_factor * pulse.tau_chirped()
    }

    /// Step size requested for this pulse and dot, before rounding to an
    /// integer number of steps.
    pub fn requested_dt(&self, pulse: &PulseSpec, qd: &QuantumDot) -> f64 {
        if let Some(dt) = self.dt {
            return dt;
        }
        let tau = pulse.tau_chirped();
        let detuning =
            pulse.static_detuning(qd.transition_energy).abs() + 2.0 * pulse.alpha().abs() * self.half_window(pulse);
        let rate = detuning.max(pulse.peak_rabi(qd.dipole_scale));
        let dt = tau / STEPS_PER_TAU;
        if dt * rate > MAX_PHASE_PER_STEP {
            MAX_PHASE_PER_STEP / rate
        } else {
            dt
        }
    }

    /// Same parameters with a fixed step half as large as the one actually
    /// used for `(pulse, qd)`.
    pub fn halved_for(&self, pulse: &PulseSpec, qd: &QuantumDot) -> Self {
        let grid = TimeGrid::plan(pulse, qd, self);
        IntegratorParams {
            dt: Some(grid.h / 2.0),
            ..*self
        }
    }
}

/// Uniform time grid over `[t_start, t_start + steps·h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TimeGrid {
    pub t_start: f64,
    pub steps: usize,
    pub h: f64,
}

impl TimeGrid {
    pub fn plan(pulse: &PulseSpec, qd: &QuantumDot, params: &IntegratorParams) -> Self {
        let half = params.half_window(pulse);
        let span = 2.0 * half;
        let dt = params.requested_dt(pulse, qd);
        let steps = ((span / dt).ceil() as usize).max(1);
        TimeGrid {
            t_start: -half,
            steps,
            h: span / steps as f64,
        }
    }

    /// Time of half-step sample `k` (k = 0..=2·steps).
    #[inline]
    fn half_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * (0.5 * self.h)
    }

    pub fn t_end(&self) -> f64 {
        self.half_time(2 * self.steps)
    }
}

/// Unit coupling `exp(-2ln2 t²/τ²)·e^{iΦ(t)}` sampled at every half step,
/// stored pre-multiplied by `−i` for both off-diagonal elements.
pub(crate) struct Drive {
    grid: TimeGrid,
    detuning0: f64,
    alpha: f64,
    /// −i·conj(u), drives a0 from a1
    down: Vec<Complex64>,
    /// −i·u, drives a1 from a0
    up: Vec<Complex64>,
}

impl Drive {
    pub fn new(pulse: &PulseSpec, detuning0: f64, grid: TimeGrid) -> Self {
        let tau = pulse.tau_chirped();
        let alpha = pulse.alpha();
        let n = 2 * grid.steps + 1;
        let mut down = Vec::with_capacity(n);
        let mut up = Vec::with_capacity(n);
        let minus_i = Complex64::new(0.0, -1.0);
        for k in 0..n {
            let t = grid.half_time(k);
            let u = Complex64::from_polar(
                unit_envelope(t, tau),
                accumulated_phase(detuning0, alpha, grid.t_start, t),
            );
            down.push(minus_i * u.conj());
            up.push(minus_i * u);
        }
        Drive {
            grid,
            detuning0,
            alpha,
            down,
            up,
        }
    }

    fn to_rotating(&self, t: f64, a0: Complex64, a1: Complex64) -> TwoLevelState {
        let half_phase = 0.5 * accumulated_phase(self.detuning0, self.alpha, self.grid.t_start, t);
        TwoLevelState {
            c0: a0 * Complex64::from_polar(1.0, half_phase),
            c1: a1 * Complex64::from_polar(1.0, -half_phase),
        }
    }

    /// Converts final interaction-frame amplitudes to an [`Evolution`],
    /// failing if the norm drifted by more than `norm_tol`.
    pub fn finish(&self, a0: Complex64, a1: Complex64, norm_tol: f64) -> Result<Evolution> {
        let t_end = self.grid.t_end();
        let state = self.to_rotating(t_end, a0, a1);
        let norm_drift = check_norm(&state, norm_tol)?;
        Ok(Evolution {
            state,
            occupation: clamp_unit(state.occupation()),
            norm_drift,
            steps: self.grid.steps,
            t_end,
        })
    }

    /// Integrates a batch of dots that share this drive; `half_peaks[j]` is
    /// `Ω_pk/2` for dot `j`. Returns final interaction-frame amplitudes.
    pub fn integrate_batch(&self, half_peaks: &[f64]) -> Vec<(Complex64, Complex64)> {
        let mut state: Vec<(Complex64, Complex64)> =
            vec![(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)); half_peaks.len()];
        let h = self.grid.h;
        let scaled: Vec<f64> = half_peaks.iter().map(|c| c * h).collect();
        for k in 0..self.grid.steps {
            let i = 2 * k;
            let coeffs = StepCoeffs {
                down: [self.down[i], self.down[i + 1], self.down[i + 2]],
                up: [self.up[i], self.up[i + 1], self.up[i + 2]],
            };
            for (s, &ch) in state.iter_mut().zip(&scaled) {
                *s = rk4_step(*s, ch, &coeffs);
            }
        }
        state
    }

    /// Single-dot integration that reports the state after every
    /// `record_every` steps (and always at the first and last point).
    fn integrate_recorded(&self, half_peak: f64, record_every: usize) -> Vec<(f64, TwoLevelState)> {
        let record_every = record_every.max(1);
        let mut s = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let ch = half_peak * self.grid.h;
        let mut out = vec![(self.grid.t_start, self.to_rotating(self.grid.t_start, s.0, s.1))];
        for k in 0..self.grid.steps {
            let i = 2 * k;
            let coeffs = StepCoeffs {
                down: [self.down[i], self.down[i + 1], self.down[i + 2]],
                up: [self.up[i], self.up[i + 1], self.up[i + 2]],
            };
            s = rk4_step(s, ch, &coeffs);
            if (k + 1) % record_every == 0 || k + 1 == self.grid.steps {
                let t = self.grid.half_time(i + 2);
                out.push((t, self.to_rotating(t, s.0, s.1)));
            }
        }
        out
    }
}

/// `Φ(t) = ∫_{t0}^{t} Δ(t') dt'`, so the rotating and interaction frames
/// coincide at the start of the window.
#[inline]
fn accumulated_phase(detuning0: f64, alpha: f64, t0: f64, t: f64) -> f64 {
    (t - t0) * (detuning0 - alpha * (t + t0))
}

struct StepCoeffs {
    down: [Complex64; 3],
    up: [Complex64; 3],
}

/// One RK4 step of `a0' = c·(−i ū)·a1`, `a1' = c·(−i u)·a0`; `ch = c·h`.
#[inline(always)]
fn rk4_step((a0, a1): (Complex64, Complex64), ch: f64, k: &StepCoeffs) -> (Complex64, Complex64) {
    let k1_0 = k.down[0] * a1 * ch;
    let k1_1 = k.up[0] * a0 * ch;
    let k2_0 = k.down[1] * (a1 + k1_1 * 0.5) * ch;
    let k2_1 = k.up[1] * (a0 + k1_0 * 0.5) * ch;
    let k3_0 = k.down[1] * (a1 + k2_1 * 0.5) * ch;
    let k3_1 = k.up[1] * (a0 + k2_0 * 0.5) * ch;
    let k4_0 = k.down[2] * (a1 + k3_1) * ch;
    let k4_1 = k.up[2] * (a0 + k3_0) * ch;
    (
        a0 + (k1_0 + (k2_0 + k3_0) * 2.0 + k4_0) / 6.0,
        a1 + (k1_1 + (k2_1 + k3_1) * 2.0 + k4_1) / 6.0,
    )
}

fn check_norm(state: &TwoLevelState, tol: f64) -> Result<f64> {
    let drift = (state.norm_sqr() - 1.0).abs();
    if drift > tol {
        Err(Error::NormDrift { drift, tol })
    } else {
        Ok(drift)
    }
}

/// Result of a single [`evolve`] run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolution {
    pub state: TwoLevelState,
    pub occupation: f64,
    pub norm_drift: f64,
    pub steps: usize,
    pub t_end: f64,
}

fn validate_inputs(pulse: &PulseSpec, qd: &QuantumDot, params: &IntegratorParams) -> Result<()> {
    pulse.validate()?;
    qd.validate()?;
    params.validate()
}

/// Evolves |0⟩ from `−t_span_factor·τ` to `+t_span_factor·τ`.
pub fn evolve(pulse: &PulseSpec, qd: &QuantumDot, params: &IntegratorParams) -> Result<Evolution> {
    validate_inputs(pulse, qd, params)?;
    let grid = TimeGrid::plan(pulse, qd, params);
    let drive = Drive::new(pulse, pulse.static_detuning(qd.transition_energy), grid);
    let (a0, a1) = drive.integrate_batch(&[half_peak(pulse, qd)])[0];
    drive.finish(a0, a1, params.norm_tol)
}

/// `Ω_pk/2` for `qd` under `pulse`.
#[inline]
pub(crate) fn half_peak(pulse: &PulseSpec, qd: &QuantumDot) -> f64 {
    0.5 * pulse.peak_rabi(qd.dipole_scale)
}

/// Time series of the rotating-frame state, sampled roughly `n_records` times.
/// The final entry is bit-identical to [`evolve`]'s result.
pub fn evolve_trajectory(
    pulse: &PulseSpec,
    qd: &QuantumDot,
    params: &IntegratorParams,
    n_records: usize,
) -> Result<Vec<(f64, TwoLevelState)>> {
    validate_inputs(pulse, qd, params)?;
    if n_records < 2 {
        return Err(Error::domain("n_records must be >= 2"));
    }
    let grid = TimeGrid::plan(pulse, qd, params);
    let drive = Drive::new(pulse, pulse.static_detuning(qd.transition_energy), grid);
    let every = grid.steps.div_ceil(n_records - 1);
    let out = drive.integrate_recorded(half_peak(pulse, qd), every);
    for (_, s) in &out {
        check_norm(s, params.norm_tol)?;
    }
    Ok(out)
}

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Dressed-state energies `∓(ħ/2)·sqrt(Ω² + Δ²)` in meV, returned as
/// `(E_minus, E_plus)`.
pub fn dressed_energies(omega: f64, delta: f64) -> (f64, f64) {
    let e = 0.5 * HBAR_MEV_PS * omega.hypot(delta);
    (-e, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedPoint {
    pub t: f64,
    pub e_minus: f64,
    pub e_plus: f64,
}

impl DressedPoint {
    pub fn gap(&self) -> f64 {
        self.e_plus - self.e_minus
    }
}

fn window_samples(pulse: &PulseSpec, params: &IntegratorParams, n_samples: usize) -> Result<Vec<f64>> {
    if n_samples < 2 {
        return Err(Error::domain(format!("n_samples must be >= 2, got {n_samples}")));
    }
    let half = params.half_window(pulse);
    Ok(linspace(-half, half, n_samples))
}

/// Dressed-state energies over the integration window.
pub fn dressed_state_track(
    pulse: &PulseSpec,
    qd: &QuantumDot,
    params: &IntegratorParams,
    n_samples: usize,
) -> Result<Vec<DressedPoint>> {
    validate_inputs(pulse, qd, params)?;
    let ts = window_samples(pulse, params, n_samples)?;
    let peak = pulse.peak_rabi(qd.dipole_scale);
    let tau = pulse.tau_chirped();
    let delta0 = pulse.static_detuning(qd.transition_energy);
    let alpha = pulse.alpha();
    Ok(ts
        .into_iter()
        .map(|t| {
            let (e_minus, e_plus) = dressed_energies(peak * unit_envelope(t, tau), delta0 - 2.0 * alpha * t);
            DressedPoint { t, e_minus, e_plus }
        })
        .collect())
}

/// Maximum over the window of
/// `r(t) = |Δ·dΩ/dt − Ω·dΔ/dt| / (Ω² + Δ²)^{3/2}`.
///
/// Samples where both Ω and Δ vanish are skipped; if every sample is
/// degenerate the parameter is undefined.
pub fn adiabaticity_parameter(
    pulse: &PulseSpec,
    qd: &QuantumDot,
    params: &IntegratorParams,
    n_samples: usize,
) -> Result<f64> {
    validate_inputs(pulse, qd, params)?;
    let ts = window_samples(pulse, params, n_samples)?;
    let peak = pulse.peak_rabi(qd.dipole_scale);
    let tau = pulse.tau_chirped();
    let delta0 = pulse.static_detuning(qd.transition_energy);
    let alpha = pulse.alpha();
    let mut r_max: Option<f64> = None;
    for t in ts {
        let omega = peak * unit_envelope(t, tau);
        let d_omega = omega * (-4.0 * std::f64::consts::LN_2 * t / (tau * tau));
        let delta = delta0 - 2.0 * alpha * t;
        let d_delta = -2.0 * alpha;
        let denom = (omega * omega + delta * delta).powf(1.5);
        if denom == 0.0 {
            continue;
        }
        let r = (delta * d_omega - omega * d_delta).abs() / denom;
        r_max = Some(r_max.map_or(r, |m: f64| m.max(r)));
    }
    r_max.ok_or(Error::UndefinedAdiabaticity)
}

/// `n` evenly spaced points with exact endpoints.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => {
            let m = (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        end
                    } else {
                        (start * (m - i as f64) + end * i as f64) / m
                    }
                })
                .collect()
        }
    }
}
