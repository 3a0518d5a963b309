// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: one flat namespace of keys shared by config files,
//! JSON meta sidecars and command-line flags.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::dynamics::{IntegratorParams, QuantumDot};
use crate::ensemble::{EnsembleSpec, Sampling};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;
use crate::sweep::SweepGrid;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ARPSIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Dressed,
    Scan,
    Ensemble,
    Sweep,
    Thresholds,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Evolve,
        Command::Dressed,
        Command::Scan,
        Command::Ensemble,
        Command::Sweep,
        Command::Thresholds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Dressed => "dressed",
            Command::Scan => "scan",
            Command::Ensemble => "ensemble",
            Command::Sweep => "sweep",
            Command::Thresholds => "thresholds",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Count(usize),
}

impl Workers {
    /// Thread count for the pool; 0 lets rayon decide.
    pub fn threads(self) -> usize {
        match self {
            Workers::Auto => 0,
            Workers::Count(n) => n,
        }
    }
}

impl FromStr for Workers {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Workers::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Workers::Count(n)),
            _ => Err(Error::Config(format!(
                "workers must be a positive count or `auto`, got `{s}`"
            ))),
        }
    }
}

impl Serialize for Workers {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Workers::Auto => s.serialize_str("auto"),
            Workers::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// φ″ ∈ [0, 0.06] ps² × 61, area ∈ [0, 5]π × 51.
    Fig4,
    /// φ″ ∈ [−0.1, 0.1] ps² × 81, area ∈ [0, 5]π × 51.
    Full,
}

impl Preset {
    fn axes(self) -> ((f64, f64, usize), (f64, f64, usize)) {
        match self {
            Preset::Fig4 => ((0.0, 0.06, 61), (0.0, 5.0, 51)),
            Preset::Full => ((-0.1, 0.1, 81), (0.0, 5.0, 51)),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig4" => Ok(Preset::Fig4),
            "full" => Ok(Preset::Full),
            other => Err(Error::Config(format!("unknown grid preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    /// Unchirped area scans at each entry of `detunings`.
    RabiDetuning,
    /// Dots A (+4 meV, dipole 1.0) and B (−4 meV, dipole 1.25) at each
    /// entry of `phi2_list`.
    TwoDot,
}

impl FromStr for ScanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rabi-detuning" => Ok(ScanKind::RabiDetuning),
            "two-dot" => Ok(ScanKind::TwoDot),
            other => Err(Error::Config(format!("unknown scan kind `{other}`"))),
        }
    }
}

/// Every accepted key with its flag help. Flags are the keys with `_`
/// replaced by `-`.
pub const KEYS: &[(&str, &str)] = &[
    ("command", "evolve | dressed | scan | ensemble | sweep | thresholds"),
    ("output", "data CSV path; the meta JSON goes next to it"),
    ("workers", "worker threads, a count or `auto`"),
    ("tau0", "transform-limited intensity FWHM (ps)"),
    ("area", "pulse area (π units)"),
    ("phi2", "spectral chirp (ps²)"),
    ("center_mev", "laser centre energy (meV)"),
    ("detuning_mev", "single dot: transition energy minus laser energy (meV)"),
    ("dipole_scale", "single dot: dipole relative to the ensemble mean"),
    ("n_dots", "ensemble size"),
    ("energy_mean_mev", "ensemble mean transition energy (meV)"),
    ("fwhm_mev", "ensemble transition-energy FWHM (meV)"),
    ("dipole_mean", "ensemble mean dipole (D)"),
    ("dipole_fwhm", "ensemble dipole FWHM (D)"),
    ("sampling", "deterministic-quantile | seeded-random"),
    ("seed", "RNG seed for seeded-random sampling"),
    ("preset", "sweep grid preset: fig4 | full"),
    ("phi2_min", "override the preset's first chirp (ps²)"),
    ("phi2_max", "override the preset's last chirp (ps²)"),
    ("phi2_points", "override the preset's chirp count"),
    ("area_min", "override the preset's first area (π)"),
    ("area_max", "override the preset's last area (π)"),
    ("area_points", "override the preset's area count"),
    ("dt", "fixed time step (ps) or `auto`"),
    ("t_span_factor", "half-window in units of the stretched duration"),
    ("norm_tol", "allowed norm drift"),
    ("samples", "time samples for evolve and dressed"),
    ("scan", "rabi-detuning | two-dot"),
    ("detunings", "comma-separated detunings for rabi-detuning scans (meV)"),
    ("phi2_list", "comma-separated chirps for two-dot scans (ps²)"),
    ("level", "contour and threshold level in (0, 1)"),
    ("input", "thresholds: read this map CSV instead of computing one"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub output: Option<PathBuf>,
    pub workers: Workers,
    pub tau0: f64,
    pub area: f64,
    pub phi2: f64,
    pub center_mev: f64,
    pub detuning_mev: f64,
    pub dipole_scale: f64,
    pub n_dots: usize,
    pub energy_mean_mev: f64,
    pub fwhm_mev: f64,
    pub dipole_mean: f64,
    pub dipole_fwhm: f64,
    pub sampling: Sampling,
    pub seed: u64,
    pub preset: Preset,
    pub phi2_min: Option<f64>,
    pub phi2_max: Option<f64>,
    pub phi2_points: Option<usize>,
    pub area_min: Option<f64>,
    pub area_max: Option<f64>,
    pub area_points: Option<usize>,
    pub dt: Option<f64>,
    pub t_span_factor: f64,
    pub norm_tol: f64,
    pub samples: usize,
    pub scan: ScanKind,
    pub detunings: Vec<f64>,
    pub phi2_list: Vec<f64>,
    pub level: f64,
    pub input: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ens = EnsembleSpec::default();
        let integ = IntegratorParams::default();
        RunConfig {
            command: Command::Evolve,
            output: None,
            workers: Workers::Auto,
            tau0: 0.12,
            area: 1.0,
            phi2: 0.0,
            center_mev: 1063.0,
            detuning_mev: 0.0,
            dipole_scale: 1.0,
            n_dots: ens.n_dots,
            energy_mean_mev: ens.energy_mean,
            fwhm_mev: ens.energy_fwhm,
            dipole_mean: ens.dipole_mean,
            dipole_fwhm: ens.dipole_fwhm,
            sampling: ens.sampling,
            seed: ens.seed,
            preset: Preset::Fig4,
            phi2_min: None,
            phi2_max: None,
            phi2_points: None,
            area_min: None,
            area_max: None,
            area_points: None,
            dt: integ.dt,
            t_span_factor: integ.t_span_factor,
            norm_tol: integ.norm_tol,
            samples: 401,
            scan: ScanKind::RabiDetuning,
            detunings: vec![0.0, 4.0],
            phi2_list: vec![0.0, 0.3],
            level: 0.99,
            input: None,
        }
    }
}

fn is_unset(v: &str) -> bool {
    matches!(v, "" | "auto" | "none")
}

fn parse<T>(key: &str, v: &str) -> Result<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{v}`: {e}")))
}

fn parse_opt<T>(key: &str, v: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    if is_unset(v) {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

/// Renders a JSON value in the flat text form accepted by [`RunConfig::set`].
fn json_scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::Null => Ok(String::new()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|x| match x {
                    Value::Array(_) | Value::Object(_) => {
                        Err(Error::Config(format!("{key}: nested values are not allowed")))
                    }
                    _ => json_scalar(key, x),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(parts.join(","))
        }
        Value::Object(_) => Err(Error::Config(format!("{key}: nested values are not allowed"))),
    }
}

impl RunConfig {
    /// Sets one key from its text form. Dashes in `key` are read as
    /// underscores; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        let v = value.trim();
        match k {
            "command" => self.command = parse(k, v)?,
            "output" => self.output = (!is_unset(v)).then(|| PathBuf::from(v)),
            "workers" => self.workers = parse(k, v)?,
            "tau0" => self.tau0 = parse(k, v)?,
            "area" => self.area = parse(k, v)?,
            "phi2" => self.phi2 = parse(k, v)?,
            "center_mev" => self.center_mev = parse(k, v)?,
            "detuning_mev" => self.detuning_mev = parse(k, v)?,
            "dipole_scale" => self.dipole_scale = parse(k, v)?,
            "n_dots" => self.n_dots = parse(k, v)?,
            "energy_mean_mev" => self.energy_mean_mev = parse(k, v)?,
            "fwhm_mev" => self.fwhm_mev = parse(k, v)?,
            "dipole_mean" => self.dipole_mean = parse(k, v)?,
            "dipole_fwhm" => self.dipole_fwhm = parse(k, v)?,
            "sampling" => self.sampling = parse(k, v)?,
            "seed" => self.seed = parse(k, v)?,
            "preset" => self.preset = parse(k, v)?,
            "phi2_min" => self.phi2_min = parse_opt(k, v)?,
            "phi2_max" => self.phi2_max = parse_opt(k, v)?,
            "phi2_points" => self.phi2_points = parse_opt(k, v)?,
            "area_min" => self.area_min = parse_opt(k, v)?,
            "area_max" => self.area_max = parse_opt(k, v)?,
            "area_points" => self.area_points = parse_opt(k, v)?,
            "dt" => self.dt = parse_opt(k, v)?,
            "t_span_factor" => self.t_span_factor = parse(k, v)?,
            "norm_tol" => self.norm_tol = parse(k, v)?,
            "samples" => self.samples = parse(k, v)?,
            "scan" => self.scan = parse(k, v)?,
            "detunings" => self.detunings = parse_list(k, v)?,
            "phi2_list" => self.phi2_list = parse_list(k, v)?,
            "level" => self.level = parse(k, v)?,
            "input" => self.input = (!is_unset(v)).then(|| PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file and returns the keys it set. Files starting
    /// with `{` are JSON: either a flat object or a meta sidecar whose
    /// `config` section is used. Anything else is `key = value` lines with
    /// `#` comments.
    pub fn apply_file(&mut self, path: &Path) -> Result<BTreeSet<String>> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            self.apply_json(&text)
        } else {
            self.apply_text(&text)
        }
    }

    pub fn apply_text(&mut self, text: &str) -> Result<BTreeSet<String>> {
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = k.trim().replace('-', "_");
            if !seen.insert(key.clone()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            self.set(&key, v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(seen)
    }

    pub fn apply_json(&mut self, text: &str) -> Result<BTreeSet<String>> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let obj = root
            .as_object()
            .ok_or_else(|| Error::Config("JSON config must be an object".into()))?;
        let section = match obj.get("config") {
            Some(cfg) => {
                if let Some(extra) = obj
                    .keys()
                    .find(|k| !matches!(k.as_str(), "config" | "provenance" | "results"))
                {
                    return Err(Error::Config(format!("unknown meta section `{extra}`")));
                }
                cfg.as_object()
                    .ok_or_else(|| Error::Config("`config` must be an object".into()))?
            }
            None => obj,
        };
        let mut seen = BTreeSet::new();
        for (k, v) in section {
            self.set(k, &json_scalar(k, v)?)?;
            seen.insert(k.replace('-', "_"));
        }
        Ok(seen)
    }

    pub fn output_path(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("arpsim-{}.csv", self.command)))
    }

    pub fn pulse(&self) -> Result<PulseSpec> {
        PulseSpec::new(self.tau0, self.area, self.center_mev, self.phi2)
    }

    pub fn dot(&self) -> Result<QuantumDot> {
        QuantumDot::detuned_from(&self.pulse()?, self.detuning_mev, self.dipole_scale)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let spec = EnsembleSpec {
            n_dots: self.n_dots,
            energy_mean: self.energy_mean_mev,
            energy_fwhm: self.fwhm_mev,
            dipole_mean: self.dipole_mean,
            dipole_fwhm: self.dipole_fwhm,
            sampling: self.sampling,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn grid(&self) -> Result<SweepGrid> {
        let (p, a) = self.preset.axes();
        SweepGrid::uniform(
            (
                self.phi2_min.unwrap_or(p.0),
                self.phi2_max.unwrap_or(p.1),
                self.phi2_points.unwrap_or(p.2),
            ),
            (
                self.area_min.unwrap_or(a.0),
                self.area_max.unwrap_or(a.1),
                self.area_points.unwrap_or(a.2),
            ),
        )
    }

    pub fn integrator(&self) -> Result<IntegratorParams> {
        let p = IntegratorParams {
            dt: self.dt,
            t_span_factor: self.t_span_factor,
            norm_tol: self.norm_tol,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks every physical invariant; failures are config errors.
    pub fn validate(&self) -> Result<()> {
        let check = || -> Result<()> {
            self.pulse()?;
            self.dot()?;
            self.ensemble_spec()?;
            self.grid()?;
            self.integrator()?;
            if self.samples < 2 {
                return Err(Error::domain("samples must be >= 2"));
            }
            if !(self.level > 0.0 && self.level < 1.0) {
                return Err(Error::domain(format!("level must lie in (0, 1), got {}", self.level)));
            }
            if self.detunings.iter().chain(&self.phi2_list).any(|x| !x.is_finite()) {
                return Err(Error::domain("detunings and phi2_list must be finite"));
            }
            Ok(())
        };
        check().map_err(|e| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        })
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
