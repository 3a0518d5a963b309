// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Coherent control of two-level quantum-dot excitons with chirped Gaussian
//! pulses: Rabi rotations, adiabatic rapid passage (ARP), and ensemble-mean
//! inversion maps over spectral chirp and pulse area.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod pulse;
pub mod scans;
pub mod sweep;

pub use dynamics::{
    adiabaticity_parameter, dressed_energies, dressed_state_track, evolve, evolve_trajectory, DressedPoint, Evolution,
    IntegratorParams, QuantumDot, TwoLevelState,
};
pub use ensemble::{dot_occupations, mean_occupation, sample_ensemble, Ensemble, EnsembleSpec, Sampling};
pub use error::{Error, Result};
pub use pulse::{
    chirp_rate, instantaneous_detuning, rabi_envelope, stretched_duration, ChirpedPulseParams, PulseSpec, HBAR_MEV_PS,
};
pub use scans::{rabi_detuning_scan, two_dot_comparison, ScanResult, TwoDotScenario};
pub use sweep::{level_set, occupation_map, threshold_finder, OccupationMap, SweepGrid, Threshold};
