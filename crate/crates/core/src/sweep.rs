// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Chirp × pulse-area maps of ensemble-mean occupation, their level sets and
//! plateau thresholds.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{linspace, IntegratorParams};
use crate::ensemble::{occupation_table, ordered_mean, sample_ensemble, EnsembleSpec};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Spectral chirp values (ps²), strictly increasing.
    pub phi2_axis: Vec<f64>,
    /// Pulse areas (π units), strictly increasing.
    pub area_axis: Vec<f64>,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::domain(format!("{name} needs at least 2 points")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{name} must be finite")));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl SweepGrid {
    pub fn new(phi2_axis: Vec<f64>, area_axis: Vec<f64>) -> Result<Self> {
        let grid = SweepGrid { phi2_axis, area_axis };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("phi2 axis", &self.phi2_axis)?;
        check_axis("area axis", &self.area_axis)?;
        if self.area_axis[0] < 0.0 {
            return Err(Error::domain("areas must be >= 0"));
        }
        Ok(())
    }

    pub fn uniform(phi2: (f64, f64, usize), area: (f64, f64, usize)) -> Result<Self> {
        SweepGrid::new(linspace(phi2.0, phi2.1, phi2.2), linspace(area.0, area.1, area.2))
    }

    /// φ″ ∈ [0, 0.06] ps² × 61, area ∈ [0, 5]π × 51.
    pub fn fig4() -> Self {
        SweepGrid::uniform((0.0, 0.06, 61), (0.0, 5.0, 51)).expect("valid preset")
    }

    /// φ″ ∈ [−0.1, 0.1] ps² × 81, area ∈ [0, 5]π × 51.
    pub fn full_range() -> Self {
        SweepGrid::uniform((-0.1, 0.1, 81), (0.0, 5.0, 51)).expect("valid preset")
    }
}

/// Provenance stored alongside a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub ensemble: EnsembleSpec,
    /// Pulse whose `tau0` and `center_energy` were used for every cell.
    pub base_pulse: PulseSpec,
    pub integrator: IntegratorParams,
    pub version: String,
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMap {
    pub grid: SweepGrid,
    /// `values[i][j]` at `(phi2_axis[i], area_axis[j])`.
    pub values: Vec<Vec<f64>>,
    pub meta: Option<MapMeta>,
}

impl OccupationMap {
    pub fn new(grid: SweepGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.phi2_axis.len() || values.iter().any(|r| r.len() != grid.area_axis.len()) {
            return Err(Error::domain("map dimensions do not match axes"));
        }
        if values.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("map values must lie in [0, 1]"));
        }
        Ok(OccupationMap {
            grid,
            values,
            meta: None,
        })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Long-form CSV `phi2_ps2,area_pi,occupation`, φ″-major.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["phi2_ps2", "area_pi", "occupation"])?;
        for (i, phi2) in self.grid.phi2_axis.iter().enumerate() {
            for (j, area) in self.grid.area_axis.iter().enumerate() {
                wtr.write_record([phi2.to_string(), area.to_string(), self.values[i][j].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the long-form CSV written by [`OccupationMap::write_csv`]; rows
    /// may be in any order but must cover the full product grid.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut cells: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut phi2s = Vec::new();
        let mut areas = Vec::new();
        for rec in rdr.deserialize::<(f64, f64, f64)>() {
            let (phi2, area, occ) = rec?;
            phi2s.push(phi2);
            areas.push(area);
            if cells.insert((phi2.to_bits(), area.to_bits()), occ).is_some() {
                return Err(Error::Config(format!("duplicate map cell ({phi2}, {area})")));
            }
        }
        let dedup = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let grid = SweepGrid::new(dedup(phi2s), dedup(areas))?;
        let mut values = Vec::with_capacity(grid.phi2_axis.len());
        for phi2 in &grid.phi2_axis {
            let mut row = Vec::with_capacity(grid.area_axis.len());
            for area in &grid.area_axis {
                let v = cells
                    .get(&(phi2.to_bits(), area.to_bits()))
                    .ok_or_else(|| Error::Config(format!("map CSV missing cell ({phi2}, {area})")))?;
                row.push(*v);
            }
            values.push(row);
        }
        OccupationMap::new(grid, values)
    }
}

pub fn default_assumptions(base: &PulseSpec, spec: &EnsembleSpec) -> Vec<String> {
    vec![
        format!(
            "transform-limited pulse duration tau0 = {} ps (intensity FWHM)",
            base.tau0
        ),
        format!("laser centre energy = {} meV", base.center_energy),
        format!("ensemble sampling = {}", spec.sampling),
        "pulse area refers to the transform-limited pulse at the mean dipole; chirping conserves pulse energy".into(),
        "coherent two-level dynamics, no dephasing".into(),
        "energies and dipoles sampled independently".into(),
    ]
}

/// Ensemble-mean final occupation on every `(phi2, area)` cell.
///
/// Each cell equals [`crate::mean_occupation`] for the pulse
/// `base.with_phi2(phi2).with_area(area)` bit-for-bit.
pub fn occupation_map(
    grid: &SweepGrid,
    spec: &EnsembleSpec,
    base: &PulseSpec,
    params: &IntegratorParams,
) -> Result<OccupationMap> {
    grid.validate()?;
    base.validate()?;
    let ensemble = sample_ensemble(spec)?;
    let pulses: Vec<PulseSpec> = grid
        .phi2_axis
        .iter()
        .flat_map(|&phi2| {
            grid.area_axis
                .iter()
                .map(move |&area| base.with_phi2(phi2).with_area(area))
        })
        .collect();
    let n_area = grid.area_axis.len();
    let table = occupation_table(&pulses, &ensemble.dots, params).map_err(|(p, d, e)| Error::Cell {
        phi2: pulses[p].phi2,
        area: pulses[p].area,
        source: Box::new(Error::Dot {
            index: d,
            source: Box::new(e),
        }),
    })?;
    let values = table
        .chunks(n_area)
        .map(|row| row.iter().map(|dots| ordered_mean(dots)).collect())
        .collect();
    let mut map = OccupationMap::new(grid.clone(), values)?;
    map.meta = Some(MapMeta {
        ensemble: *spec,
        base_pulse: *base,
        integrator: *params,
        version: env!("CARGO_PKG_VERSION").to_string(),
        assumptions: default_assumptions(base, spec),
    });
    Ok(map)
}

/// A contour as `(phi2, area)` points.
pub type Polyline = Vec<(f64, f64)>;

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {level}")))
    }
}

/// Grid edge: `Phi2(i, j)` joins nodes (i, j)–(i+1, j), `Area(i, j)` joins
/// (i, j)–(i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    Phi2(usize, usize),
    Area(usize, usize),
}

/// Marching-squares contour of `map` at `level`, with linear interpolation
/// along cell edges. A node counts as inside when its value is `>= level`.
/// Saddle cells are disambiguated by the mean of their four corners.
pub fn level_set(map: &OccupationMap, level: f64) -> Result<Vec<Polyline>> {
    check_level(level)?;
    let (nx, ny) = (map.grid.phi2_axis.len(), map.grid.area_axis.len());
    let inside = |i: usize, j: usize| map.value(i, j) >= level;

    let mut links: BTreeMap<Edge, Vec<Edge>> = BTreeMap::new();
    let mut link = |a: Edge, b: Edge| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let c = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            // bottom, right, top, left
            let e = [
                Edge::Phi2(i, j),
                Edge::Area(i + 1, j),
                Edge::Phi2(i, j + 1),
                Edge::Area(i, j),
            ];
            let cut = [c[0] != c[1], c[1] != c[2], c[3] != c[2], c[0] != c[3]];
            let crossings: Vec<Edge> = (0..4).filter(|&k| cut[k]).map(|k| e[k]).collect();
            match crossings.len() {
                0 => {}
                2 => link(crossings[0], crossings[1]),
                4 => {
                    let centre =
                        (map.value(i, j) + map.value(i + 1, j) + map.value(i + 1, j + 1) + map.value(i, j + 1)) / 4.0
                            >= level;
                    // isolate corners 1 and 3, or corners 0 and 2
                    if centre == c[0] {
                        link(e[0], e[1]);
                        link(e[2], e[3]);
                    } else {
                        link(e[3], e[0]);
                        link(e[1], e[2]);
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }

    let point = |edge: Edge| -> (f64, f64) {
        let ((i0, j0), (i1, j1)) = match edge {
            Edge::Phi2(i, j) => ((i, j), (i + 1, j)),
            Edge::Area(i, j) => ((i, j), (i, j + 1)),
        };
        let (v0, v1) = (map.value(i0, j0), map.value(i1, j1));
        let t = (level - v0) / (v1 - v0);
        let lerp = |a: f64, b: f64| a + t * (b - a);
        (
            lerp(map.grid.phi2_axis[i0], map.grid.phi2_axis[i1]),
            lerp(map.grid.area_axis[j0], map.grid.area_axis[j1]),
        )
    };

    let mut visited: BTreeMap<Edge, bool> = links.keys().map(|&k| (k, false)).collect();
    let mut lines = Vec::new();
    // open chains start at edges with a single neighbour, then closed loops
    let starts: Vec<Edge> = links
        .iter()
        .filter(|(_, n)| n.len() == 1)
        .map(|(&k, _)| k)
        .chain(links.keys().copied())
        .collect();
    for start in starts {
        if visited[&start] {
            continue;
        }
        let mut line = vec![point(start)];
        visited.insert(start, true);
        let mut current = start;
        while let Some(&next) = links[&current].iter().find(|n| !visited[*n]) {
            visited.insert(next, true);
            line.push(point(next));
            current = next;
        }
        if links[&current].contains(&start) && line.len() > 2 {
            line.push(line[0]);
        }
        lines.push(line);
    }
    Ok(lines)
}

/// Corner of the plateau where the map stays at or above a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// π units
    pub area: f64,
    /// ps²
    pub phi2: f64,
}

/// Bilinear interpolant of a map, used to refine thresholds between grid
/// lines.
struct Interp<'a> {
    map: &'a OccupationMap,
}

impl Interp<'_> {
    /// Index `k` with `axis[k] <= x <= axis[k+1]`, plus the fraction.
    fn locate(axis: &[f64], x: f64) -> (usize, f64) {
        let k = axis.partition_point(|&v| v <= x).clamp(1, axis.len() - 1) - 1;
        let t = ((x - axis[k]) / (axis[k + 1] - axis[k])).clamp(0.0, 1.0);
        (k, t)
    }

    fn at(&self, phi2: f64, area: f64) -> f64 {
        let (i, u) = Self::locate(&self.map.grid.phi2_axis, phi2);
        let (j, v) = Self::locate(&self.map.grid.area_axis, area);
        let m = self.map;
        (1.0 - u) * ((1.0 - v) * m.value(i, j) + v * m.value(i, j + 1))
            + u * ((1.0 - v) * m.value(i + 1, j) + v * m.value(i + 1, j + 1))
    }

    /// Whether the interpolant is `>= level` on `[phi2, max] × [area, max]`.
    /// A piecewise-bilinear surface attains its minimum over an axis-aligned
    /// rectangle at grid nodes or where the rectangle edges cut grid lines.
    fn plateau(&self, phi2: f64, area: f64, level: f64) -> bool {
        let g = &self.map.grid;
        let ps: Vec<f64> = std::iter::once(phi2)
            .chain(g.phi2_axis.iter().copied().filter(|&p| p > phi2))
            .collect();
        let as_: Vec<f64> = std::iter::once(area)
            .chain(g.area_axis.iter().copied().filter(|&a| a > area))
            .collect();
        ps.iter().all(|&p| as_.iter().all(|&a| self.at(p, a) >= level))
    }
}

/// Smallest `x` in `[lo, hi]` with `ok(x)`, given `ok(hi)` and `ok` monotone.
fn bisect(mut lo: f64, mut hi: f64, ok: impl Fn(f64) -> bool) -> f64 {
    if ok(lo) {
        return lo;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Lower-left corner `(area*, phi2*)` of a plateau on which the map stays
/// at or above `level` all the way to the largest area and chirp.
///
/// Every grid node `(i, j)` whose upper-right quadrant is entirely
/// `>= level` is a candidate corner. Candidates trade chirp against area, so
/// the one spanning the largest rectangle (in axis-normalised units) is
/// chosen, ties going to the smaller chirp. The corner is then moved toward
/// the neighbouring grid lines by bisection on the bilinear interpolant,
/// chirp first, then area. Returns `None` if no candidate exists.
pub fn threshold_finder(map: &OccupationMap, level: f64) -> Result<Option<Threshold>> {
    check_level(level)?;
    let g = &map.grid;
    let (nx, ny) = (g.phi2_axis.len(), g.area_axis.len());

    // plateau[i][j]: every node with i' >= i, j' >= j is >= level
    let mut plateau = vec![vec![false; ny + 1]; nx + 1];
    for row in plateau.iter_mut() {
        row[ny] = true;
    }
    plateau[nx].fill(true);
    for i in (0..nx).rev() {
        for j in (0..ny).rev() {
            plateau[i][j] = map.value(i, j) >= level && plateau[i + 1][j] && plateau[i][j + 1];
        }
    }

    let span = |axis: &[f64], k: usize| (axis[axis.len() - 1] - axis[k]) / (axis[axis.len() - 1] - axis[0]);
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, col) in plateau.iter().take(nx).enumerate() {
        let Some(j) = (0..ny).find(|&j| col[j]) else {
            continue;
        };
        let score = span(&g.phi2_axis, i) * span(&g.area_axis, j);
        if best.is_none_or(|(s, _, _)| score > s) {
            best = Some((score, i, j));
        }
    }
    let Some((_, i, j)) = best else {
        return Ok(None);
    };

    let interp = Interp { map };
    let area_node = g.area_axis[j];
    let phi2 = if i == 0 {
        g.phi2_axis[0]
    } else {
        bisect(g.phi2_axis[i - 1], g.phi2_axis[i], |p| {
            interp.plateau(p, area_node, level)
        })
    };
    let area = if j == 0 {
        g.area_axis[0]
    } else {
        bisect(g.area_axis[j - 1], area_node, |a| interp.plateau(phi2, a, level))
    };
    Ok(Some(Threshold { area, phi2 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64, f64) -> f64, nx: usize, ny: usize) -> OccupationMap {
        synthetic_on((0.0, 0.06), (0.0, 5.0), f, nx, ny)
    }

    fn synthetic_on(
        phi2: (f64, f64),
        area: (f64, f64),
        f: impl Fn(f64, f64) -> f64,
        nx: usize,
        ny: usize,
    ) -> OccupationMap {
        let grid = SweepGrid::uniform((phi2.0, phi2.1, nx), (area.0, area.1, ny)).unwrap();
        let values = grid
            .phi2_axis
            .iter()
            .map(|&p| grid.area_axis.iter().map(|&a| f(p, a)).collect())
            .collect();
        OccupationMap::new(grid, values).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new(vec![0.0], vec![0.0, 1.0]).is_err());
        assert!(SweepGrid::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(SweepGrid::new(vec![0.1, 0.0], vec![0.0, 1.0]).is_err());
        assert!(SweepGrid::new(vec![0.0, 0.1], vec![-1.0, 1.0]).is_err());
        let g = SweepGrid::fig4();
        assert_eq!((g.phi2_axis.len(), g.area_axis.len()), (61, 51));
        assert_eq!(SweepGrid::full_range().phi2_axis[0], -0.1);
    }

    #[test]
    fn map_validation() {
        let grid = SweepGrid::uniform((0.0, 1.0, 2), (0.0, 1.0, 2)).unwrap();
        assert!(OccupationMap::new(grid.clone(), vec![vec![0.0, 0.0]]).is_err());
        assert!(OccupationMap::new(grid, vec![vec![0.0, 1.5], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn constant_map_has_no_contour() {
        let m = synthetic(|_, _| 0.5, 5, 5);
        assert!(level_set(&m, 0.95).unwrap().is_empty());
        assert!(level_set(&m, 1.0).is_err());
        assert!(level_set(&m, 0.0).is_err());
    }

    #[test]
    fn linear_map_contour_is_straight() {
        let m = synthetic_on((0.0, 0.06), (0.0, 4.0), |_, a| a / 4.0, 7, 9);
        let lines = level_set(&m, 0.5).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].len(), 7);
        for &(_, a) in &lines[0] {
            assert!((a - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_contour_around_peak() {
        let m = synthetic(
            |p, a| 0.9 * (-((p - 0.03) / 0.01).powi(2) - (a - 2.5).powi(2)).exp(),
            31,
            31,
        );
        let lines = level_set(&m, 0.5).unwrap();
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert_eq!(l.first(), l.last());
        assert!(l.len() > 8);
    }

    /// Smooth L-shaped plateau: occupation rises with both chirp and area.
    fn plateau_model(p: f64, a: f64) -> f64 {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        sig((p - 0.02) / 0.002) * sig((a - 2.5) / 0.15)
    }

    #[test]
    fn threshold_everywhere_above() {
        let m = synthetic(|_, _| 0.999, 4, 4);
        let t = threshold_finder(&m, 0.99).unwrap().unwrap();
        assert_eq!((t.area, t.phi2), (0.0, 0.0));
    }

    #[test]
    fn threshold_not_found() {
        let m = synthetic(|_, _| 0.5, 4, 4);
        assert_eq!(threshold_finder(&m, 0.99).unwrap(), None);
        assert!(threshold_finder(&m, 1.5).is_err());
    }

    #[test]
    fn threshold_of_step_edges() {
        // plateau only depends on area: chirp threshold is the axis minimum
        let m = synthetic_on((0.0, 0.06), (0.0, 4.0), |_, a| a / 4.0, 7, 9);
        let t = threshold_finder(&m, 0.5).unwrap().unwrap();
        assert_eq!(t.phi2, 0.0);
        assert!((t.area - 2.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_corner_is_on_plateau_and_stable() {
        let level = 0.9;
        let coarse = synthetic(plateau_model, 61, 51);
        let fine = synthetic(plateau_model, 121, 101);
        let tc = threshold_finder(&coarse, level).unwrap().unwrap();
        let tf = threshold_finder(&fine, level).unwrap().unwrap();
        assert!((tc.area - tf.area).abs() / tf.area < 0.02, "{tc:?} {tf:?}");
        assert!((tc.phi2 - tf.phi2).abs() / tf.phi2 < 0.02, "{tc:?} {tf:?}");
        // every node in the quadrant above the corner satisfies the level
        for (i, &p) in coarse.grid.phi2_axis.iter().enumerate() {
            for (j, &a) in coarse.grid.area_axis.iter().enumerate() {
                if p >= tc.phi2 && a >= tc.area {
                    assert!(coarse.value(i, j) >= level);
                }
            }
        }
        // the 0.8 contour never enters the 0.9 plateau
        for line in level_set(&coarse, 0.8).unwrap() {
            for (p, a) in line {
                assert!(!(p > tc.phi2 && a > tc.area));
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let m = synthetic(|p, a| (p * 10.0 + a / 10.0).min(1.0), 4, 3);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = OccupationMap::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid, m.grid);
        assert_eq!(back.values, m.values);
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(OccupationMap::read_csv(truncated.as_bytes()).is_err());
    }
}
