// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Inhomogeneously broadened quantum-dot ensembles.
//!
//! Transition energies and dipole moments are drawn from independent
//! Gaussians whose widths are given as FWHM. The default deterministic mode
//! places dots at inverse-CDF quantile midpoints on an energy × dipole
//! product grid (36 × 13 = 468 dots for the default count).

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalSampler};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{Drive, Evolution, IntegratorParams, QuantumDot, TimeGrid};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;

/// FWHM = `FWHM_PER_SIGMA` · σ for a Gaussian.
pub fn fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    DeterministicQuantile,
    SeededRandom,
}

impl std::str::FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic-quantile" | "quantile" => Ok(Sampling::DeterministicQuantile),
            "seeded-random" | "random" => Ok(Sampling::SeededRandom),
            other => Err(Error::Config(format!("unknown sampling mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Sampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sampling::DeterministicQuantile => "deterministic-quantile",
            Sampling::SeededRandom => "seeded-random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_dots: usize,
    /// meV
    pub energy_mean: f64,
    /// meV
    pub energy_fwhm: f64,
    /// Debye
    pub dipole_mean: f64,
    /// Debye
    pub dipole_fwhm: f64,
    pub sampling: Sampling,
    /// Only used by [`Sampling::SeededRandom`].
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            n_dots: 468,
            energy_mean: 1063.0,
            energy_fwhm: 10.0,
            dipole_mean: 25.0,
            dipole_fwhm: 4.0,
            sampling: Sampling::DeterministicQuantile,
            seed: 0,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_dots == 0 {
            return Err(Error::domain("n_dots must be >= 1"));
        }
        if !(self.energy_fwhm >= 0.0) || !(self.dipole_fwhm >= 0.0) {
            return Err(Error::domain("FWHMs must be >= 0"));
        }
        if !(self.dipole_mean > 0.0) {
            return Err(Error::domain("dipole_mean must be > 0"));
        }
        if !self.energy_mean.is_finite() || !self.energy_fwhm.is_finite() || !self.dipole_fwhm.is_finite() {
            return Err(Error::domain("ensemble parameters must be finite"));
        }
        Ok(())
    }

    pub fn energy_sigma(&self) -> f64 {
        self.energy_fwhm / fwhm_per_sigma()
    }

    /// σ of `dipole_scale = μ/μ̄`.
    pub fn dipole_scale_sigma(&self) -> f64 {
        self.dipole_fwhm / fwhm_per_sigma() / self.dipole_mean
    }
}

/// Factorisation `n = energy_bins × dipole_bins` used by quantile sampling:
/// the divisor pair whose aspect ratio is closest to 36:13.
pub fn quantile_grid_shape(n: usize) -> (usize, usize) {
    let target = (36.0f64 / 13.0).ln();
    (1..=n)
        .filter(|d| n.is_multiple_of(*d))
        .map(|nd| (n / nd, nd))
        .filter(|(ne, nd)| ne >= nd)
        .min_by(|a, b| {
            let da = ((a.0 as f64 / a.1 as f64).ln() - target).abs();
            let db = ((b.0 as f64 / b.1 as f64).ln() - target).abs();
            da.total_cmp(&db)
        })
        .unwrap_or((n, 1))
}

/// Standard-normal quantiles at the midpoints of `n` equal-probability bins.
fn midpoint_quantiles(n: usize) -> Vec<f64> {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n)
        .map(|i| std_normal.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub dots: Vec<QuantumDot>,
    /// Spec the dots were generated from; `None` when loaded from CSV.
    pub provenance: Option<EnsembleSpec>,
}

impl Ensemble {
    pub fn from_dots(dots: Vec<QuantumDot>) -> Result<Self> {
        if dots.is_empty() {
            return Err(Error::domain("ensemble must contain at least one dot"));
        }
        for d in &dots {
            d.validate()?;
        }
        Ok(Ensemble { dots, provenance: None })
    }

    pub fn len(&self) -> usize {
        self.dots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dots.is_empty()
    }

    /// CSV with header `index,transition_energy_meV,dipole_scale`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["index", "transition_energy_meV", "dipole_scale"])?;
        for (i, d) in self.dots.iter().enumerate() {
            wtr.write_record([
                i.to_string(),
                d.transition_energy.to_string(),
                d.dipole_scale.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut dots = Vec::new();
        for (row, rec) in rdr.deserialize::<(usize, f64, f64)>().enumerate() {
            let (index, energy, scale) = rec?;
            if index != row {
                return Err(Error::Config(format!("ensemble CSV row {row} has index {index}")));
            }
            dots.push(QuantumDot::new(energy, scale)?);
        }
        Ensemble::from_dots(dots)
    }
}

pub fn sample_ensemble(spec: &EnsembleSpec) -> Result<Ensemble> {
    spec.validate()?;
    let e_sigma = spec.energy_sigma();
    let s_sigma = spec.dipole_scale_sigma();
    let dots = match spec.sampling {
        Sampling::DeterministicQuantile => {
            let (ne, nd) = quantile_grid_shape(spec.n_dots);
            let eq = midpoint_quantiles(ne);
            let dq = midpoint_quantiles(nd);
            let mut dots = Vec::with_capacity(spec.n_dots);
            for &ze in &eq {
                for &zd in &dq {
                    dots.push(QuantumDot::new(spec.energy_mean + ze * e_sigma, 1.0 + zd * s_sigma)?);
                }
            }
            dots
        }
        Sampling::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let energy = NormalSampler::new(spec.energy_mean, e_sigma).map_err(|e| Error::domain(e.to_string()))?;
            let scale = NormalSampler::new(1.0, s_sigma).map_err(|e| Error::domain(e.to_string()))?;
            let mut dots = Vec::with_capacity(spec.n_dots);
            while dots.len() < spec.n_dots {
                let e = energy.sample(&mut rng);
                let s = scale.sample(&mut rng);
                // dipole_scale must stay positive; redraw the rare negative tail
                if s > 0.0 {
                    dots.push(QuantumDot::new(e, s)?);
                }
            }
            dots
        }
    };
    Ok(Ensemble {
        dots,
        provenance: Some(*spec),
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct GroupKey {
    pulse_shape: [u64; 3],
    energy: u64,
    steps: usize,
}

/// A shared drive and the `(pulse, dot)` pairs it serves.
type Group = (GroupKey, TimeGrid, Vec<(usize, usize)>);

/// Final occupation of every dot under every pulse, as `out[pulse][dot]`.
///
/// Dots that share a pulse shape, static detuning and step count share one
/// sampled drive and are integrated together; each dot still follows exactly
/// the arithmetic of [`crate::evolve`], so results are bit-identical to
/// single-dot runs and independent of the thread pool. Errors carry the
/// dot index and the pulse index, first in (pulse, dot) order.
pub(crate) fn occupation_table(
    pulses: &[PulseSpec],
    dots: &[QuantumDot],
    params: &IntegratorParams,
) -> std::result::Result<Vec<Vec<f64>>, (usize, usize, Error)> {
    params.validate().map_err(|e| (0, 0, e))?;
    for (p, pulse) in pulses.iter().enumerate() {
        pulse.validate().map_err(|e| (p, 0, e))?;
    }
    for (d, qd) in dots.iter().enumerate() {
        qd.validate().map_err(|e| (0, d, e))?;
    }

    let mut index: HashMap<GroupKey, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for (p, pulse) in pulses.iter().enumerate() {
        for (d, qd) in dots.iter().enumerate() {
            let grid = TimeGrid::plan(pulse, qd, params);
            let key = GroupKey {
                pulse_shape: [
                    pulse.tau0.to_bits(),
                    pulse.phi2.to_bits(),
                    pulse.center_energy.to_bits(),
                ],
                energy: qd.transition_energy.to_bits(),
                steps: grid.steps,
            };
            let g = *index.entry(key).or_insert_with(|| {
                groups.push((key, grid, Vec::new()));
                groups.len() - 1
            });
            groups[g].2.push((p, d));
        }
    }

    let results: Vec<Vec<(usize, usize, Result<f64>)>> = groups
        .par_iter()
        .map(|(_, grid, members)| {
            let (p0, d0) = members[0];
            let head = &pulses[p0];
            let drive = Drive::new(head, head.static_detuning(dots[d0].transition_energy), *grid);
            let half_peaks: Vec<f64> = members
                .iter()
                .map(|&(p, d)| crate::dynamics::half_peak(&pulses[p], &dots[d]))
                .collect();
            let finals = drive.integrate_batch(&half_peaks);
            members
                .iter()
                .zip(finals)
                .map(|(&(p, d), (a0, a1))| {
                    let occ = drive.finish(a0, a1, params.norm_tol).map(|e: Evolution| e.occupation);
                    (p, d, occ)
                })
                .collect()
        })
        .collect();

    let mut table = vec![vec![f64::NAN; dots.len()]; pulses.len()];
    let mut first_err: Option<(usize, usize, Error)> = None;
    for (p, d, r) in results.into_iter().flatten() {
        match r {
            Ok(v) => table[p][d] = v,
            Err(e) => {
                if first_err.as_ref().is_none_or(|(fp, fd, _)| (p, d) < (*fp, *fd)) {
                    first_err = Some((p, d, e));
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(table),
    }
}

/// Arithmetic mean in index order, accumulated as deviations from the first
/// value (identical inputs give that value exactly).
pub(crate) fn ordered_mean(values: &[f64]) -> f64 {
    let first = values[0];
    let mut dev = 0.0;
    for v in &values[1..] {
        dev += v - first;
    }
    crate::dynamics::clamp_unit(first + dev / values.len() as f64)
}

/// Final occupation of each dot under `pulse`.
pub fn dot_occupations(ensemble: &Ensemble, pulse: &PulseSpec, params: &IntegratorParams) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(Error::domain("ensemble must contain at least one dot"));
    }
    occupation_table(std::slice::from_ref(pulse), &ensemble.dots, params)
        .map(|mut t| t.swap_remove(0))
        .map_err(|(_, d, e)| Error::Dot {
            index: d,
            source: Box::new(e),
        })
}

/// Unweighted mean of the per-dot final occupations.
pub fn mean_occupation(ensemble: &Ensemble, pulse: &PulseSpec, params: &IntegratorParams) -> Result<f64> {
    Ok(ordered_mean(&dot_occupations(ensemble, pulse, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(fwhm: f64) -> EnsembleSpec {
        EnsembleSpec {
            energy_fwhm: fwhm,
            ..Default::default()
        }
    }

    #[test]
    fn grid_shape() {
        assert_eq!(quantile_grid_shape(468), (36, 13));
        assert_eq!(quantile_grid_shape(1), (1, 1));
        assert_eq!(quantile_grid_shape(7), (7, 1));
        let (a, b) = quantile_grid_shape(100);
        assert_eq!(a * b, 100);
    }

    #[test]
    fn degenerate_distributions() {
        let ens = sample_ensemble(&EnsembleSpec {
            energy_fwhm: 0.0,
            dipole_fwhm: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(ens.len(), 468);
        assert!(ens
            .dots
            .iter()
            .all(|d| d.transition_energy == 1063.0 && d.dipole_scale == 1.0));
    }

    #[test]
    fn zero_dots_rejected() {
        assert!(sample_ensemble(&EnsembleSpec {
            n_dots: 0,
            ..Default::default()
        })
        .is_err());
        assert!(sample_ensemble(&EnsembleSpec {
            dipole_mean: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(sample_ensemble(&EnsembleSpec {
            energy_fwhm: -1.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn quantile_energy_fwhm_close_to_target() {
        let ens = sample_ensemble(&spec(10.0)).unwrap();
        // unique energies: first of every dipole block
        let energies: Vec<f64> = ens.dots.iter().step_by(13).map(|d| d.transition_energy).collect();
        assert_eq!(energies.len(), 36);
        let mean = energies.iter().sum::<f64>() / 36.0;
        let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 36.0;
        let fwhm = var.sqrt() * fwhm_per_sigma();
        assert!((mean - 1063.0).abs() < 1e-9);
        assert!((fwhm - 10.0).abs() < 0.5, "{fwhm}");
    }

    #[test]
    fn dipole_scale_sigma_from_fwhm() {
        assert_relative_eq!(EnsembleSpec::default().dipole_scale_sigma(), 0.0679, epsilon = 1e-4);
        let ens = sample_ensemble(&EnsembleSpec::default()).unwrap();
        let m = ens.dots.iter().map(|d| d.dipole_scale).sum::<f64>() / ens.len() as f64;
        assert!((0.99..=1.01).contains(&m));
    }

    #[test]
    fn seeded_random_reproducible() {
        let s = EnsembleSpec {
            sampling: Sampling::SeededRandom,
            seed: 42,
            ..Default::default()
        };
        let a = sample_ensemble(&s).unwrap();
        let b = sample_ensemble(&s).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&EnsembleSpec { seed: 43, ..s }).unwrap();
        assert_ne!(a, c);
        let m = a.dots.iter().map(|d| d.dipole_scale).sum::<f64>() / a.len() as f64;
        assert!((0.99..=1.01).contains(&m));
    }

    #[test]
    fn csv_round_trip() {
        let ens = sample_ensemble(&EnsembleSpec {
            n_dots: 20,
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,transition_energy_meV,dipole_scale\n"));
        let back = Ensemble::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.dots, ens.dots);
        assert!(Ensemble::read_csv("index,transition_energy_meV,dipole_scale\n".as_bytes()).is_err());
    }

    #[test]
    fn single_dot_resonant_pi() {
        let ens = Ensemble::from_dots(vec![QuantumDot::new(1063.0, 1.0).unwrap()]).unwrap();
        let p = PulseSpec::new(0.12, 1.0, 1063.0, 0.0).unwrap();
        let m = mean_occupation(&ens, &p, &IntegratorParams::default()).unwrap();
        assert!((m - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_ensemble_equals_single_dot() {
        let ens = sample_ensemble(&EnsembleSpec {
            n_dots: 12,
            energy_fwhm: 0.0,
            dipole_fwhm: 0.0,
            ..Default::default()
        })
        .unwrap();
        let p = PulseSpec::new(0.12, 1.7, 1061.5, 0.02).unwrap();
        let params = IntegratorParams::default();
        let single = crate::evolve(&p, &ens.dots[0], &params).unwrap().occupation;
        assert_eq!(mean_occupation(&ens, &p, &params).unwrap(), single);
    }

    #[test]
    fn batched_matches_single_evolve_bitwise() {
        let ens = sample_ensemble(&EnsembleSpec {
            n_dots: 12,
            energy_fwhm: 20.0,
            ..Default::default()
        })
        .unwrap();
        let p = PulseSpec::new(0.12, 2.2, 1063.0, 0.01).unwrap();
        let params = IntegratorParams::default();
        let occ = dot_occupations(&ens, &p, &params).unwrap();
        for (d, o) in ens.dots.iter().zip(&occ) {
            assert_eq!(crate::evolve(&p, d, &params).unwrap().occupation, *o);
        }
    }

    #[test]
    fn permutation_invariance() {
        let ens = sample_ensemble(&EnsembleSpec {
            n_dots: 24,
            energy_fwhm: 15.0,
            ..Default::default()
        })
        .unwrap();
        let mut rev = ens.dots.clone();
        rev.reverse();
        let rev = Ensemble::from_dots(rev).unwrap();
        let p = PulseSpec::new(0.12, 1.0, 1063.0, 0.0).unwrap();
        let params = IntegratorParams::default();
        let a = mean_occupation(&ens, &p, &params).unwrap();
        let b = mean_occupation(&rev, &p, &params).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn integrator_failure_names_dot() {
        let ens = Ensemble::from_dots(vec![
            QuantumDot::new(1063.0, 1.0).unwrap(),
            QuantumDot::new(1063.0, 1.0).unwrap(),
        ])
        .unwrap();
        let p = PulseSpec::new(0.12, 4.0, 1063.0, 0.0).unwrap();
        let params = IntegratorParams {
            dt: Some(0.05),
            ..Default::default()
        };
        let err = mean_occupation(&ens, &p, &params).unwrap_err();
        assert!(matches!(err, Error::Dot { index: 0, .. }), "{err}");
        assert!(err.is_integration_failure());
    }
}
