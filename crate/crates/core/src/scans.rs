// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Single-dot power scans: detuned Rabi rotations and the chirped versus
//! unchirped comparison of two inequivalent dots.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegratorParams, QuantumDot};
use crate::ensemble::occupation_table;
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;

/// Laser centre energy used when none is given (meV).
pub const DEFAULT_CENTER_MEV: f64 = 1063.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    /// Static detuning E_QD − ħω_l (meV).
    pub detuning_mev: f64,
    pub phi2: f64,
    pub dipole_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub meta: CurveMeta,
    pub values: Vec<f64>,
}

impl Curve {
    /// First local maximum along the axis, as `(index, value)`.
    pub fn first_maximum(&self) -> Option<(usize, f64)> {
        let v = &self.values;
        (1..v.len())
            .find(|&k| k + 1 == v.len() || v[k + 1] < v[k])
            .filter(|&k| v[k] > v[0])
            .map(|k| (k, v[k]))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Pulse areas (π units), proportional to the square root of the power.
    pub axis: Vec<f64>,
    pub curves: Vec<Curve>,
}

impl ScanResult {
    pub fn curve(&self, name: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.name == name)
    }

    /// Wide-form CSV: `area_pi,<curve 1>,<curve 2>,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["area_pi".to_string()];
        header.extend(self.curves.iter().map(|c| c.name.clone()));
        wtr.write_record(&header)?;
        for (k, a) in self.axis.iter().enumerate() {
            let mut row = vec![a.to_string()];
            row.extend(self.curves.iter().map(|c| c.values[k].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_area_axis(axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::domain("area axis must not be empty"));
    }
    if axis.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::domain("areas must be finite and >= 0"));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("area axis must be strictly increasing"));
    }
    Ok(())
}

/// Runs every `(pulse for area, dot)` pair and returns `[dot][area]`.
fn area_scan(
    base: &PulseSpec,
    area_axis: &[f64],
    dots: &[QuantumDot],
    params: &IntegratorParams,
) -> Result<Vec<Vec<f64>>> {
    let pulses: Vec<PulseSpec> = area_axis.iter().map(|&a| base.with_area(a)).collect();
    let table = occupation_table(&pulses, dots, params).map_err(|(p, d, e)| Error::Cell {
        phi2: base.phi2,
        area: area_axis[p],
        source: Box::new(Error::Dot {
            index: d,
            source: Box::new(e),
        }),
    })?;
    Ok((0..dots.len())
        .map(|d| table.iter().map(|row| row[d]).collect())
        .collect())
}

/// Unchirped area scans of a unit-dipole dot at each static detuning (meV).
pub fn rabi_detuning_scan(
    detunings: &[f64],
    area_axis: &[f64],
    tau0: f64,
    params: &IntegratorParams,
) -> Result<ScanResult> {
    check_area_axis(area_axis)?;
    let base = PulseSpec::new(tau0, 0.0, DEFAULT_CENTER_MEV, 0.0)?;
    let dots = detunings
        .iter()
        .map(|&d| QuantumDot::detuned_from(&base, d, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let rows = area_scan(&base, area_axis, &dots, params)?;
    let curves = detunings
        .iter()
        .zip(rows)
        .map(|(&d, values)| Curve {
            name: format!("detuning_{d}meV"),
            meta: CurveMeta {
                detuning_mev: d,
                phi2: 0.0,
                dipole_scale: 1.0,
            },
            values,
        })
        .collect();
    Ok(ScanResult {
        axis: area_axis.to_vec(),
        curves,
    })
}

/// Two dots straddling the laser: 8 meV apart with the laser at the
/// midpoint, and dot B's dipole 25% larger than dot A's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoDotScenario {
    pub qd_a: QuantumDot,
    pub qd_b: QuantumDot,
    pub laser: PulseSpec,
}

impl TwoDotScenario {
    pub fn standard(tau0: f64) -> Result<Self> {
        let laser = PulseSpec::new(tau0, 0.0, DEFAULT_CENTER_MEV, 0.0)?;
        Ok(TwoDotScenario {
            qd_a: QuantumDot::detuned_from(&laser, 4.0, 1.0)?,
            qd_b: QuantumDot::detuned_from(&laser, -4.0, 1.25)?,
            laser,
        })
    }
}

/// Area scans of two dots for each chirp in `phi2s`; curves are named
/// `A_phi2_<φ″>` and `B_phi2_<φ″>`, ordered chirp-major.
pub fn two_dot_comparison(
    qd_a: &QuantumDot,
    qd_b: &QuantumDot,
    laser: &PulseSpec,
    area_axis: &[f64],
    phi2s: &[f64],
    params: &IntegratorParams,
) -> Result<ScanResult> {
    check_area_axis(area_axis)?;
    laser.validate()?;
    let dots = [*qd_a, *qd_b];
    let mut curves = Vec::new();
    for &phi2 in phi2s {
        let base = laser.with_phi2(phi2);
        let rows = area_scan(&base, area_axis, &dots, params)?;
        for ((label, qd), values) in ["A", "B"].iter().zip(&dots).zip(rows) {
            curves.push(Curve {
                name: format!("{label}_phi2_{phi2}"),
                meta: CurveMeta {
                    detuning_mev: qd.transition_energy - laser.center_energy,
                    phi2,
                    dipole_scale: qd.dipole_scale,
                },
                values,
            });
        }
    }
    Ok(ScanResult {
        axis: area_axis.to_vec(),
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::linspace;

    #[test]
    fn first_maximum_detection() {
        let c = Curve {
            name: "x".into(),
            meta: CurveMeta {
                detuning_mev: 0.0,
                phi2: 0.0,
                dipole_scale: 1.0,
            },
            values: vec![0.0, 0.5, 0.9, 0.4, 0.95],
        };
        assert_eq!(c.first_maximum(), Some((2, 0.9)));
        assert_eq!(c.max(), 0.95);
        let flat = Curve {
            values: vec![0.0, 0.0],
            ..c.clone()
        };
        assert_eq!(flat.first_maximum(), None);
    }

    #[test]
    fn resonant_first_maximum_at_pi() {
        let axis = linspace(0.0, 3.0, 31);
        let r = rabi_detuning_scan(&[0.0, 4.0, -4.0], &axis, 0.12, &IntegratorParams::default()).unwrap();
        let (k, v) = r.curves[0].first_maximum().unwrap();
        assert_eq!(axis[k], 1.0);
        assert!((v - 1.0).abs() < 1e-6);
        let (_, v4) = r.curves[1].first_maximum().unwrap();
        assert!(v4 < v);
        // ±Δ₀ give identical curves at zero chirp
        for (a, b) in r.curves[1].values.iter().zip(&r.curves[2].values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn detuned_first_maximum_location() {
        // Frozen from an independent lab-frame RK4 run with bounded scalar
        // maximisation: 4 meV detuning, 120 fs, first maximum 0.808124 at
        // 0.98882π. The faster generalised Rabi frequency pulls the peak to
        // slightly smaller area.
        let axis = linspace(0.9, 1.1, 201);
        let r = rabi_detuning_scan(&[4.0], &axis, 0.12, &IntegratorParams::default()).unwrap();
        let (k, v) = r.curves[0].first_maximum().unwrap();
        assert!((axis[k] - 0.98882).abs() <= 1e-3, "{}", axis[k]);
        assert!((v - 0.808124).abs() < 1e-5, "{v}");
    }

    #[test]
    fn two_dot_curves() {
        let sc = TwoDotScenario::standard(0.12).unwrap();
        assert_eq!(sc.qd_a.transition_energy - sc.qd_b.transition_energy, 8.0);
        assert_eq!(sc.qd_b.dipole_scale / sc.qd_a.dipole_scale, 1.25);
        let axis = linspace(0.0, 4.0, 41);
        let r = two_dot_comparison(
            &sc.qd_a,
            &sc.qd_b,
            &sc.laser,
            &axis,
            &[0.0, 0.3],
            &IntegratorParams::default(),
        )
        .unwrap();
        assert_eq!(r.curves.len(), 4);
        let names: Vec<&str> = r.curves.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["A_phi2_0", "B_phi2_0", "A_phi2_0.3", "B_phi2_0.3"]);
        for c in &r.curves[2..] {
            for (a, v) in axis.iter().zip(&c.values) {
                if *a >= 2.5 {
                    assert!(*v > 0.95, "{} at {a}: {v}", c.name);
                }
            }
        }
        for c in &r.curves[..2] {
            assert!(c.max() < 0.999, "{}: {}", c.name, c.max());
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("area_pi,A_phi2_0,B_phi2_0,A_phi2_0.3,B_phi2_0.3\n"));
        assert_eq!(text.lines().count(), 42);
    }

    #[test]
    fn bad_axis_rejected() {
        let p = IntegratorParams::default();
        assert!(rabi_detuning_scan(&[0.0], &[1.0, 0.5], 0.12, &p).is_err());
        assert!(rabi_detuning_scan(&[0.0], &[], 0.12, &p).is_err());
        assert!(rabi_detuning_scan(&[0.0], &[1.0], 0.0, &p).is_err());
    }
}
