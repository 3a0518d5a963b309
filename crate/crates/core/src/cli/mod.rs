// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Each run writes a data CSV and a JSON meta
//! sidecar (`<output stem>.meta.json`) with `config`, `provenance` and
//! `results` sections. The `config` section can be passed back through
//! `--config` to reproduce the data file.

mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction};
use serde_json::{json, Value};

pub use config::{Command, Preset, RunConfig, ScanKind, Workers, KEYS, WORKERS_ENV};

use crate::dynamics::{adiabaticity_parameter, dressed_state_track, evolve, evolve_trajectory};
use crate::ensemble::sample_ensemble;
use crate::error::{Error, Result};
use crate::scans::{rabi_detuning_scan, two_dot_comparison, ScanResult, TwoDotScenario};
use crate::sweep::{default_assumptions, level_set, occupation_map, threshold_finder, OccupationMap};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INTEGRATION: u8 = 3;
pub const EXIT_NOT_FOUND: u8 = 4;

/// Samples used for the adiabaticity parameter reported by `evolve` and
/// `dressed`.
const ADIABATICITY_SAMPLES: usize = 4001;

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub data: PathBuf,
    pub meta: PathBuf,
    pub summary: String,
}

/// `out.csv` → `out.meta.json`.
pub fn meta_path_for(data: &Path) -> PathBuf {
    data.with_extension("meta.json")
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ThresholdNotFound { .. } => EXIT_NOT_FOUND,
        e if e.is_integration_failure() => EXIT_INTEGRATION,
        Error::Config(_) | Error::Domain(_) => EXIT_CONFIG,
        _ => 1,
    }
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn clap_command() -> clap::Command {
    let names: Vec<&'static str> = Command::ALL.iter().map(|c| c.name()).collect();
    let mut cmd = clap::Command::new("arpsim")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Chirped-pulse control of quantum-dot excitons: single dots, ensembles and inversion maps")
        .after_help(format!(
            "Precedence: flags > --config file > ${WORKERS_ENV} (workers only) > defaults.\n\
             Exit codes: 0 ok, {EXIT_CONFIG} config error, {EXIT_INTEGRATION} integration failure, \
             {EXIT_NOT_FOUND} threshold not found, 1 other."
        ))
        .arg(
            Arg::new("command")
                .value_parser(names)
                .help("what to run; may instead come from the config file"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .help("key = value file, or the meta JSON of an earlier run"),
        );
    for (key, help) in KEYS.iter().filter(|(k, _)| *k != "command") {
        let mut arg = Arg::new(*key)
            .long(flag_name(key))
            .value_name("VALUE")
            .action(ArgAction::Set)
            .allow_hyphen_values(true)
            .help(*help);
        if *key == "output" {
            arg = arg.short('o');
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Builds a validated config from process-style arguments (including the
/// program name) and the worker default from the environment.
pub fn load_config<I, T>(args: I, env_workers: Option<String>) -> std::result::Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = clap_command().try_get_matches_from(args)?;
    let config_err = |e: Error| clap_command().error(clap::error::ErrorKind::InvalidValue, e.to_string());
    let mut cfg = RunConfig::default();
    if let Some(w) = env_workers.filter(|w| !w.trim().is_empty()) {
        cfg.set("workers", &w)
            .map_err(|e| config_err(Error::Config(format!("${WORKERS_ENV}: {e}"))))?;
    }
    let mut command_given = false;
    if let Some(path) = matches.get_one::<String>("config") {
        command_given = cfg.apply_file(Path::new(path)).map_err(config_err)?.contains("command");
    }
    for (key, _) in KEYS.iter().filter(|(k, _)| *k != "command") {
        if let Some(v) = matches.get_one::<String>(key) {
            cfg.set(key, v).map_err(config_err)?;
        }
    }
    match matches.get_one::<String>("command") {
        Some(c) => cfg.set("command", c).map_err(config_err)?,
        None if command_given => {}
        None => {
            return Err(clap_command().error(
                clap::error::ErrorKind::MissingRequiredArgument,
                "a command is required, either positionally or as `command` in the config file",
            ))
        }
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    let cfg = match load_config(std::env::args_os(), std::env::var(WORKERS_ENV).ok()) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(&cfg) {
        Ok(out) => {
            println!("{}", out.summary);
            println!("wrote {} and {}", out.data.display(), out.meta.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs one command inside a pool of `cfg.workers` threads.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.threads())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cfg))
}

struct Report {
    provenance: Value,
    results: Value,
    summary: String,
    /// Reported after the artifacts are written.
    deferred: Option<Error>,
}

fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    let data = cfg.output_path();
    if let Some(dir) = data.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(&data)?);
    let report = match cfg.command {
        Command::Evolve => run_evolve(cfg, &mut w)?,
        Command::Dressed => run_dressed(cfg, &mut w)?,
        Command::Scan => run_scan(cfg, &mut w)?,
        Command::Ensemble => run_ensemble(cfg, &mut w)?,
        Command::Sweep => run_sweep(cfg, &mut w)?,
        Command::Thresholds => run_thresholds(cfg, &mut w)?,
    };
    w.flush()?;
    let meta = meta_path_for(&data);
    let mut provenance = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.command,
        "data_file": data.file_name().map(|f| f.to_string_lossy().into_owned()),
        "pulse": cfg.pulse()?,
        "integrator": cfg.integrator()?,
    });
    if let (Value::Object(base), Value::Object(extra)) = (&mut provenance, report.provenance) {
        base.extend(extra);
    }
    let doc = json!({ "config": cfg, "provenance": provenance, "results": report.results });
    let mut mw = BufWriter::new(File::create(&meta)?);
    serde_json::to_writer_pretty(&mut mw, &doc)?;
    writeln!(mw)?;
    mw.flush()?;
    match report.deferred {
        Some(e) => Err(e),
        None => Ok(Outcome {
            data,
            meta,
            summary: report.summary,
        }),
    }
}

fn single_dot_assumptions(cfg: &RunConfig) -> Vec<String> {
    vec![
        format!(
            "transform-limited pulse duration tau0 = {} ps (intensity FWHM)",
            cfg.tau0
        ),
        "pulse area refers to the transform-limited pulse; chirping conserves pulse energy".into(),
        "coherent two-level dynamics, no dephasing".into(),
    ]
}

fn ensemble_assumptions(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut a = default_assumptions(&cfg.pulse()?, &cfg.ensemble_spec()?);
    let g = cfg.grid()?;
    let describe = |axis: &[f64]| format!("[{}, {}] x {}", axis[0], axis[axis.len() - 1], axis.len());
    a.push(format!(
        "grid preset {} with overrides: phi2 {} ps², area {} pi (axis ranges are assumptions)",
        serde_json::to_value(cfg.preset)?.as_str().unwrap_or_default(),
        describe(&g.phi2_axis),
        describe(&g.area_axis)
    ));
    Ok(a)
}

fn adiabaticity_or_null(cfg: &RunConfig) -> Result<Value> {
    match adiabaticity_parameter(&cfg.pulse()?, &cfg.dot()?, &cfg.integrator()?, ADIABATICITY_SAMPLES) {
        Ok(r) => Ok(json!(r)),
        Err(Error::UndefinedAdiabaticity) => Ok(Value::Null),
        Err(e) => Err(e),
    }
}

fn run_evolve(cfg: &RunConfig, w: &mut impl Write) -> Result<Report> {
    let (pulse, qd, params) = (cfg.pulse()?, cfg.dot()?, cfg.integrator()?);
    let traj = evolve_trajectory(&pulse, &qd, &params, cfg.samples)?;
    let evo = evolve(&pulse, &qd, &params)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t_ps", "re_c0", "im_c0", "re_c1", "im_c1", "occupation"])?;
    for (t, s) in &traj {
        wtr.write_record([
            t.to_string(),
            s.c0.re.to_string(),
            s.c0.im.to_string(),
            s.c1.re.to_string(),
            s.c1.im.to_string(),
            s.occupation().to_string(),
        ])?;
    }
    wtr.flush()?;
    let cp = pulse.chirped_params(qd.dipole_scale);
    Ok(Report {
        provenance: json!({ "dot": qd, "assumptions": single_dot_assumptions(cfg) }),
        results: json!({
            "final_occupation": evo.occupation,
            "norm_drift": evo.norm_drift,
            "steps": evo.steps,
            "t_end_ps": evo.t_end,
            "chirp_rate_per_ps2": cp.alpha,
            "tau_chirped_ps": cp.tau_chirped,
            "peak_rabi_per_ps": cp.peak_rabi,
            "adiabaticity_max": adiabaticity_or_null(cfg)?,
        }),
        summary: format!("final occupation = {}", evo.occupation),
        deferred: None,
    })
}

fn run_dressed(cfg: &RunConfig, w: &mut impl Write) -> Result<Report> {
    let (pulse, qd, params) = (cfg.pulse()?, cfg.dot()?, cfg.integrator()?);
    let track = dressed_state_track(&pulse, &qd, &params, cfg.samples)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t_ps", "E_minus_meV", "E_plus_meV"])?;
    for p in &track {
        wtr.write_record([p.t.to_string(), p.e_minus.to_string(), p.e_plus.to_string()])?;
    }
    wtr.flush()?;
    let min = track
        .iter()
        .min_by(|a, b| a.gap().total_cmp(&b.gap()))
        .expect("at least two samples");
    Ok(Report {
        provenance: json!({ "dot": qd, "assumptions": single_dot_assumptions(cfg) }),
        results: json!({
            "min_gap_meV": min.gap(),
            "t_min_gap_ps": min.t,
            "adiabaticity_max": adiabaticity_or_null(cfg)?,
        }),
        summary: format!("minimum dressed-state gap {} meV at t = {} ps", min.gap(), min.t),
        deferred: None,
    })
}

fn scan_results(scan: &ScanResult) -> Value {
    let curves: Vec<Value> = scan
        .curves
        .iter()
        .map(|c| {
            let first = c
                .first_maximum()
                .map(|(k, v)| json!({ "area_pi": scan.axis[k], "occupation": v }));
            json!({
                "name": c.name,
                "detuning_mev": c.meta.detuning_mev,
                "phi2": c.meta.phi2,
                "dipole_scale": c.meta.dipole_scale,
                "first_maximum": first,
                "max": c.max(),
            })
        })
        .collect();
    json!({ "curves": curves })
}

fn run_scan(cfg: &RunConfig, w: &mut impl Write) -> Result<Report> {
    let axis = cfg.grid()?.area_axis;
    let params = cfg.integrator()?;
    let mut assumptions = single_dot_assumptions(cfg);
    let (scan, extra) = match cfg.scan {
        ScanKind::RabiDetuning => (
            rabi_detuning_scan(&cfg.detunings, &axis, cfg.tau0, &params)?,
            json!({ "detunings_meV": cfg.detunings }),
        ),
        ScanKind::TwoDot => {
            let sc = TwoDotScenario::standard(cfg.tau0)?;
            assumptions.push("dots A/B: only the dipole ratio 1.25 is known; A = 1.0, B = 1.25".into());
            assumptions.push("dot A sits 4 meV above the laser, dot B 4 meV below".into());
            (
                two_dot_comparison(&sc.qd_a, &sc.qd_b, &sc.laser, &axis, &cfg.phi2_list, &params)?,
                json!({ "scenario": sc }),
            )
        }
    };
    scan.write_csv(w)?;
    let summary = scan
        .curves
        .iter()
        .map(|c| format!("{}: max {}", c.name, c.max()))
        .collect::<Vec<_>>()
        .join("\n");
    let mut provenance = json!({ "area_axis": axis, "assumptions": assumptions });
    if let (Value::Object(p), Value::Object(e)) = (&mut provenance, extra) {
        p.extend(e);
    }
    Ok(Report {
        provenance,
        results: scan_results(&scan),
        summary,
        deferred: None,
    })
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn run_ensemble(cfg: &RunConfig, w: &mut impl Write) -> Result<Report> {
    let spec = cfg.ensemble_spec()?;
    let ens = sample_ensemble(&spec)?;
    ens.write_csv(w)?;
    let (e_mean, e_std) = mean_std(ens.dots.iter().map(|d| d.transition_energy));
    let (s_mean, s_std) = mean_std(ens.dots.iter().map(|d| d.dipole_scale));
    Ok(Report {
        provenance: json!({ "ensemble": spec, "assumptions": default_assumptions(&cfg.pulse()?, &spec) }),
        results: json!({
            "n_dots": ens.len(),
            "energy_mean_meV": e_mean,
            "energy_std_meV": e_std,
            "dipole_scale_mean": s_mean,
            "dipole_scale_std": s_std,
        }),
        summary: format!("{} dots, energy mean {e_mean} meV, std {e_std} meV", ens.len()),
        deferred: None,
    })
}

fn compute_map(cfg: &RunConfig) -> Result<OccupationMap> {
    occupation_map(&cfg.grid()?, &cfg.ensemble_spec()?, &cfg.pulse()?, &cfg.integrator()?)
}

fn threshold_json(map: &OccupationMap, level: f64) -> Result<Value> {
    Ok(match threshold_finder(map, level)? {
        Some(t) => json!({ "area_pi": t.area, "phi2_ps2": t.phi2 }),
        None => Value::Null,
    })
}

/// Best occupation over area on the chirp row closest to zero.
fn unchirped_best(map: &OccupationMap) -> Value {
    let i = (0..map.grid.phi2_axis.len())
        .min_by(|&a, &b| map.grid.phi2_axis[a].abs().total_cmp(&map.grid.phi2_axis[b].abs()))
        .unwrap_or(0);
    let (j, v) =
        map.values[i].iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (j, v)| if v > best.1 { (j, v) } else { best },
        );
    json!({ "phi2_ps2": map.grid.phi2_axis[i], "area_pi": map.grid.area_axis[j], "occupation": v })
}

fn run_sweep(cfg: &RunConfig, w: &mut impl Write) -> Result<Report> {
    let map = compute_map(cfg)?;
    map.write_csv(w)?;
    Ok(Report {
        provenance: json!({
            "ensemble": cfg.ensemble_spec()?,
            "grid": map.grid,
            "assumptions": ensemble_assumptions(cfg)?,
        }),
        results: json!({
            "max_occupation": map.max_value(),
            "unchirped_best": unchirped_best(&map),
            "threshold": threshold_json(&map, cfg.level)?,
            "level": cfg.level,
        }),
        summary: format!(
            "map {}x{}, max occupation {}",
            map.grid.phi2_axis.len(),
            map.grid.area_axis.len(),
            map.max_value()
        ),
        deferred: None,
    })
}

fn run_thresholds(cfg: &RunConfig, w: &mut impl Write) -> Result<Report> {
    let (map, source) = match &cfg.input {
        Some(path) => {
            let f = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
            (OccupationMap::read_csv(f)?, json!({ "input": path }))
        }
        None => (
            compute_map(cfg)?,
            json!({ "ensemble": cfg.ensemble_spec()?, "assumptions": ensemble_assumptions(cfg)? }),
        ),
    };
    let contours = level_set(&map, cfg.level)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["contour", "phi2_ps2", "area_pi"])?;
    for (k, line) in contours.iter().enumerate() {
        for (phi2, area) in line {
            wtr.write_record([k.to_string(), phi2.to_string(), area.to_string()])?;
        }
    }
    wtr.flush()?;
    let found = threshold_finder(&map, cfg.level)?;
    let (summary, deferred) = match found {
        Some(t) => (
            format!(
                "threshold at level {}: area = {}π, chirp = {} ps²",
                cfg.level, t.area, t.phi2
            ),
            None,
        ),
        None => (
            String::new(),
            Some(Error::ThresholdNotFound {
                level: cfg.level,
                max: map.max_value(),
            }),
        ),
    };
    let mut provenance = json!({ "grid": map.grid });
    if let (Value::Object(p), Value::Object(s)) = (&mut provenance, source) {
        p.extend(s);
    }
    Ok(Report {
        provenance,
        results: json!({
            "level": cfg.level,
            "threshold": found.map(|t| json!({ "area_pi": t.area, "phi2_ps2": t.phi2 })),
            "max_occupation": map.max_value(),
            "contours": contours.len(),
        }),
        summary,
        deferred,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(args: &[&str]) -> std::result::Result<RunConfig, clap::Error> {
        load_config(std::iter::once("arpsim").chain(args.iter().copied()), None)
    }

    #[test]
    fn flags_parse() {
        let c = load(&["evolve", "--area", "2", "--phi2", "-0.3", "--detuning-mev", "-4"]).unwrap();
        assert_eq!(
            (c.command, c.area, c.phi2, c.detuning_mev),
            (Command::Evolve, 2.0, -0.3, -4.0)
        );
        assert!(load(&["evolve", "--area", "x"]).is_err());
        assert!(load(&["evolve", "--bogus", "1"]).is_err());
        assert!(load(&[]).is_err());
        assert!(load(&["evolve", "--tau0", "-1"]).is_err());
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "command = sweep\nfwhm_mev = 30\nworkers = 2\n").unwrap();
        let p = path.to_str().unwrap();
        let c = load_config(["arpsim", "--config", p], Some("5".into())).unwrap();
        assert_eq!(
            (c.command, c.fwhm_mev, c.workers),
            (Command::Sweep, 30.0, Workers::Count(2))
        );
        let c = load_config(["arpsim", "dressed", "--config", p, "--fwhm-mev", "5"], None).unwrap();
        assert_eq!((c.command, c.fwhm_mev), (Command::Dressed, 5.0));
        let c = load_config(["arpsim", "evolve"], Some("3".into())).unwrap();
        assert_eq!(c.workers, Workers::Count(3));
        assert!(load_config(["arpsim", "evolve"], Some("zero".into())).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(
            exit_code(&Error::ThresholdNotFound { level: 0.99, max: 0.8 }),
            EXIT_NOT_FOUND
        );
        let drift = Error::Cell {
            phi2: 0.0,
            area: 1.0,
            source: Box::new(Error::Dot {
                index: 3,
                source: Box::new(Error::NormDrift { drift: 1.0, tol: 1e-9 }),
            }),
        };
        assert_eq!(exit_code(&drift), EXIT_INTEGRATION);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 1);
    }

    #[test]
    fn meta_path() {
        assert_eq!(meta_path_for(Path::new("a/b.csv")), PathBuf::from("a/b.meta.json"));
        assert_eq!(meta_path_for(Path::new("b")), PathBuf::from("b.meta.json"));
    }
}
