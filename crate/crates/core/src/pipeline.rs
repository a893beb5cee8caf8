//! Run orchestration behind the command-line subcommands.
//!
//! A simulation directory looks like
//!
//! ```text
//! <out>/manifest.json
//! <out>/timeseries.csv
//! <out>/snapshots/snap_000000.vln
//! <out>/snapshots/snap_000010.vln
//! ...
//! ```
//!
//! `diagnose` reads the snapshots and adds `diagnostics.csv`, `identity.csv`,
//! `envelope.csv`, `critical.json`, `curve.csv`, `report.svg` and
//! `diagnose.manifest.json`. `appendix-check` writes `appendix_terms.csv`,
//! `appendix_family.csv`, `appendix_report.json` and
//! `appendix-check.manifest.json`.

use crate::clebsch::{appendix_check, AppendixReport};
use crate::config::{InitialCondition, RunConfig};
use crate::csvio::{self, flag, num, opt, Schema};
use crate::curve::DiagnosticSample;
use crate::error::{Error, Result};
use crate::euler::{EulerSolver, EulerState};
use crate::frame::{Frame, Model};
use crate::growth::{
    critical_case_monitor, growth_envelope, identity_series, BoundConstants, ConstantsSource, CriticalReport,
    GrowthEnvelope,
};
use crate::grid::Grid;
use crate::manifest::{FlagSummary, RunManifest, RunStatus, SnapshotEntry};
use crate::report::write_report;
use crate::snapshot::{list_snapshots, snapshot_name, Snapshot};
use crate::sqg::{SqgSolver, SqgState};
use crate::stepper::{StepChoice, TimeStepper};
use crate::tracking::{SegmentTracker, TrackedStep, TrackerConfig};
use crate::vec3::norm;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub const SNAPSHOT_DIR: &str = "snapshots";
pub const TIMESERIES: &str = "timeseries.csv";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const IDENTITY: &str = "identity.csv";
pub const ENVELOPE: &str = "envelope.csv";
pub const CRITICAL: &str = "critical.json";
pub const CURVE: &str = "curve.csv";
pub const REPORT: &str = "report.svg";
pub const APPENDIX_TERMS: &str = "appendix_terms.csv";
pub const APPENDIX_FAMILY: &str = "appendix_family.csv";
pub const APPENDIX_REPORT: &str = "appendix_report.json";

/// Message listing the snapshot layout `diagnose` expects.
pub fn expected_layout(dir: &Path) -> String {
    format!(
        "no snapshots found in {}; expected <dir>/{SNAPSHOT_DIR}/snap_NNNNNN.vln (or the snapshot files directly in \
         <dir>) as written by run-sqg or run-euler3d",
        dir.display()
    )
}

fn command_name(model: Model) -> &'static str {
    match model {
        Model::Sqg => "run-sqg",
        Model::Euler3d => "run-euler3d",
    }
}

fn at_step(e: Error, step: usize, time: f64) -> Error {
    match e {
        Error::NonFinite(what) => Error::Numerical {
            step,
            time,
            reason: format!("non-finite value in {what}"),
        },
        other => other,
    }
}

trait Simulation {
    fn schema(&self) -> &'static Schema;
    fn time(&self) -> f64;
    fn max_speed(&self) -> Result<f64>;
    fn advance(&mut self, dt: f64) -> Result<()>;
    /// Time-series row for the current state, reached with `choice`.
    fn row(&self, choice: Option<&StepChoice>) -> Result<Vec<String>>;
    fn snapshot(&self) -> Snapshot;
}

fn step_cells(choice: Option<&StepChoice>) -> [String; 3] {
    [
        opt(choice.map(|c| c.dt)),
        opt(choice.map(|c| c.courant)),
        flag(choice.is_some_and(|c| c.cfl_exceeded)),
    ]
}

struct SqgRun {
    solver: SqgSolver,
    state: SqgState,
}

impl Simulation for SqgRun {
    fn schema(&self) -> &'static Schema {
        &csvio::SQG_SERIES
    }

    fn time(&self) -> f64 {
        self.state.time
    }

    fn max_speed(&self) -> Result<f64> {
        self.solver.max_speed(&self.state.theta)
    }

    fn advance(&mut self, dt: f64) -> Result<()> {
        self.state = self.solver.step(&self.state, dt)?;
        Ok(())
    }

    fn row(&self, choice: Option<&StepChoice>) -> Result<Vec<String>> {
        let theta = &self.state.theta;
        let hat = self.solver.spectral().forward(theta.values());
        let [dt, courant, exceeded] = step_cells(choice);
        Ok(vec![
            num(self.state.time),
            num(self.solver.max_perp_gradient(theta)?),
            num(theta.integral_sq()),
            num(theta.integral()),
            dt,
            courant,
            exceeded,
            num(self.solver.spectral().top_octave_fraction(&[hat], 1)),
        ])
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot::from_scalar(&self.state.theta, self.state.time)
    }
}

struct EulerRun {
    solver: EulerSolver,
    state: EulerState,
}

impl Simulation for EulerRun {
    fn schema(&self) -> &'static Schema {
        &csvio::EULER_SERIES
    }

    fn time(&self) -> f64 {
        self.state.time
    }

    fn max_speed(&self) -> Result<f64> {
        self.solver.max_speed(&self.state.omega)
    }

    fn advance(&mut self, dt: f64) -> Result<()> {
        self.state = self.solver.step(&self.state, dt)?;
        Ok(())
    }

    fn row(&self, choice: Option<&StepChoice>) -> Result<Vec<String>> {
        let s = self.solver.summary(&self.state.omega)?;
        let [dt, courant, exceeded] = step_cells(choice);
        Ok(vec![
            num(self.state.time),
            num(s.max_vorticity),
            num(s.kinetic_energy),
            num(s.helicity),
            dt,
            courant,
            exceeded,
            num(s.tail_fraction),
        ])
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot::from_vector(&self.state.omega, self.state.time)
    }
}

fn build_simulation(cfg: &RunConfig, grid: &Grid) -> Result<Box<dyn Simulation>> {
    match &cfg.initial {
        InitialCondition::Sqg(ic) => {
            let solver = SqgSolver::new(grid)?.with_hyperdiffusion(cfg.nu_h, cfg.order);
            let theta = solver.prepare(&ic.sample(grid)?)?;
            Ok(Box::new(SqgRun {
                solver,
                state: SqgState { theta, time: 0.0 },
            }))
        }
        InitialCondition::Euler(ic) => {
            let solver = EulerSolver::new(grid)?.with_hyperdiffusion(cfg.nu_h, cfg.order);
            let omega = solver.prepare(&ic.sample(grid)?)?;
            Ok(Box::new(EulerRun {
                solver,
                state: EulerState { omega, time: 0.0 },
            }))
        }
    }
}

fn write_snapshot(sim: &dyn Simulation, out: &Path, step: usize, manifest: &mut RunManifest) -> Result<()> {
    let rel = format!("{SNAPSHOT_DIR}/{}", snapshot_name(step));
    let snap = sim.snapshot();
    snap.write(&out.join(&rel))?;
    manifest.snapshots.push(SnapshotEntry {
        file: rel,
        step,
        time: snap.time,
    });
    manifest.end_time = snap.time;
    Ok(())
}

fn integrate(
    cfg: &RunConfig,
    stepper: &TimeStepper,
    h: f64,
    sim: &mut dyn Simulation,
    out: &Path,
    manifest: &mut RunManifest,
    rows: &mut Vec<Vec<String>>,
) -> Result<()> {
    rows.push(sim.row(None)?);
    write_snapshot(sim, out, 0, manifest)?;
    let tolerance = 1e-12 * cfg.t_end.abs().max(1.0);
    let mut step = 0;
    while cfg.t_end - sim.time() > tolerance {
        let t = sim.time();
        let speed = sim.max_speed().map_err(|e| at_step(e, step, t))?;
        let choice = stepper.choose(speed, h, cfg.t_end - t);
        if !(choice.dt.is_finite() && choice.dt > 0.0) {
            return Err(Error::Numerical {
                step: step + 1,
                time: t,
                reason: format!("step size {} is not positive and finite", choice.dt),
            });
        }
        sim.advance(choice.dt).map_err(|e| at_step(e, step + 1, t))?;
        step += 1;
        rows.push(sim.row(Some(&choice)).map_err(|e| at_step(e, step, sim.time()))?);
        let last = cfg.t_end - sim.time() <= tolerance;
        let due = cfg.snapshot_interval > 0 && step % cfg.snapshot_interval == 0;
        if last || due {
            write_snapshot(sim, out, step, manifest)?;
        }
    }
    Ok(())
}

/// Integrates the configured model to `t_end`, writing snapshots, the time
/// series and a manifest into `out`.
///
/// On failure whatever was produced is kept and the manifest is marked
/// partial before the error is returned.
pub fn run_simulation(cfg: &RunConfig, config_text: &str, out: &Path) -> Result<RunManifest> {
    let grid = cfg.grid()?;
    let stepper = cfg.stepper()?;
    let mut sim = build_simulation(cfg, &grid)?;
    fs::create_dir_all(out.join(SNAPSHOT_DIR))?;
    let mut manifest = RunManifest::new(command_name(cfg.model), config_text);
    let mut rows = Vec::new();
    let outcome = integrate(cfg, &stepper, grid.min_spacing(), sim.as_mut(), out, &mut manifest, &mut rows);

    fs::write(out.join(TIMESERIES), csvio::render(sim.schema(), &rows)?)?;
    manifest.add_file(out, TIMESERIES)?;
    for s in manifest.snapshots.clone() {
        manifest.add_file(out, &s.file)?;
    }
    if let Err(e) = &outcome {
        manifest.status = RunStatus::Partial;
        manifest.error = Some(e.to_string());
    }
    manifest.write(out)?;
    outcome.map(|()| manifest)
}

fn frame_from_snapshot(snap: &Snapshot, cfg: &RunConfig, inviscid: bool) -> Result<Frame> {
    let model = snap.model()?;
    if model != cfg.model {
        return Err(Error::Precondition(format!(
            "snapshot holds a {} field but the configuration is for {}",
            model.as_str(),
            cfg.model.as_str()
        )));
    }
    match model {
        Model::Sqg => Frame::from_sqg(&snap.scalar()?, snap.time, cfg.interp, inviscid),
        Model::Euler3d => Frame::from_euler(&snap.vector()?, snap.time, cfg.interp, inviscid),
    }
}

fn tracker_config(cfg: &RunConfig) -> TrackerConfig {
    let mut t = TrackerConfig::new(cfg.segment.target_length);
    t.direction = cfg.segment.direction;
    t.reseed_interval = cfg.segment.reseed_interval;
    t
}

/// Snapshot files under `dir`, looking inside `dir/snapshots` first.
pub fn find_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let nested = dir.join(SNAPSHOT_DIR);
    let source = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let files = if source.is_dir() { list_snapshots(&source)? } else { Vec::new() };
    if files.is_empty() {
        return Err(Error::Precondition(expected_layout(dir)));
    }
    Ok(files)
}

fn step_from_name(path: &Path) -> usize {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("snap_"))
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

fn diagnostics_rows(steps: &[TrackedStep]) -> Vec<Vec<String>> {
    steps
        .iter()
        .map(|s| {
            let d = &s.diagnostics;
            vec![
                num(d.time),
                d.lineage.to_string(),
                flag(s.seeded.is_some()),
                num(d.length),
                num(d.q),
                num(d.omega),
                num(d.omega_l),
                num(d.omega_start),
                num(d.u_max),
                num(d.v_max),
                num(d.int_kappa),
                num(d.int_tau),
                num(d.c0),
                flag(d.endpoint_max),
                flag(d.resolved),
                flag(d.inviscid),
                d.normal_undefined.to_string(),
            ]
        })
        .collect()
}

fn envelope_rows(env: &GrowthEnvelope) -> Vec<Vec<String>> {
    env.points
        .iter()
        .map(|p| {
            vec![
                num(p.time),
                num(p.omega),
                num(p.single_exponential),
                opt(p.double_exponential),
                num(p.bkm_integral),
                flag(p.flags.all()),
                flag(p.window_clean),
                flag(p.single_dominates),
                p.double_dominates.map(flag).unwrap_or_default(),
                p.flags.failed().join(";"),
            ]
        })
        .collect()
}

fn curve_rows(dim: usize, samples: &[DiagnosticSample]) -> Vec<Vec<String>> {
    samples
        .iter()
        .map(|p| {
            let mut row = vec![num(p.s), num(p.beta)];
            row.extend(p.x[..dim].iter().map(|&c| num(c)));
            row.extend([
                num(p.omega_mag),
                num(p.kappa),
                num(p.tau),
                num(p.u_xi),
                num(p.u_xi_perp),
                num(p.alpha),
                flag(p.normal_undefined),
            ]);
            row
        })
        .collect()
}

fn curve_schema(dim: usize) -> &'static Schema {
    if dim == 2 {
        &csvio::CURVE_2D
    } else {
        &csvio::CURVE_3D
    }
}

fn flag_summary(env: &GrowthEnvelope) -> FlagSummary {
    let mut summary = FlagSummary {
        windows: env.points.len(),
        clean: env.clean_points(),
        violations: env.violations().len(),
        ..FlagSummary::default()
    };
    for p in &env.points {
        for name in p.flags.failed() {
            *summary.failed.entry(name.to_string()).or_default() += 1;
        }
    }
    summary
}

/// Contents of `critical.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalOutput {
    pub constants: Option<BoundConstants>,
    pub critical_weight: f64,
    pub report: Option<CriticalReport>,
    /// Why no report could be produced.
    pub unavailable: Option<String>,
}

fn critical_output(cfg: &RunConfig, steps: &[TrackedStep], env: &GrowthEnvelope) -> CriticalOutput {
    let constants = cfg.constants.fixed.or_else(|| env.points.last().map(|p| p.constants));
    let series: Vec<_> = steps.iter().map(|s| s.diagnostics.clone()).collect();
    let (report, unavailable) = match constants {
        None => (None, Some("no envelope points to take constants from".to_string())),
        Some(c) => match critical_case_monitor(&series, &c, cfg.constants.critical_weight, cfg.constants.singular_time) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    CriticalOutput {
        constants,
        critical_weight: cfg.constants.critical_weight,
        report,
        unavailable,
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// Traces and diagnoses the tracked segment through every snapshot under
/// `snapshots`, writing the diagnostic CSVs, the critical-rate summary, the
/// last traced curve, the report and a manifest into `out`.
pub fn diagnose(snapshots: &Path, cfg: &RunConfig, config_text: &str, out: &Path) -> Result<RunManifest> {
    let files = find_snapshots(snapshots)?;
    let inviscid = cfg.stepper()?.is_inviscid();
    let mut tracker = SegmentTracker::new(tracker_config(cfg))?;
    let mut manifest = RunManifest::new("diagnose", config_text);
    for (i, path) in files.iter().enumerate() {
        let snap = Snapshot::read(path)?;
        if i == 0 {
            manifest.start_time = snap.time;
        }
        manifest.end_time = snap.time;
        manifest.snapshots.push(SnapshotEntry {
            file: path.display().to_string(),
            step: step_from_name(path),
            time: snap.time,
        });
        let frame = frame_from_snapshot(&snap, cfg, inviscid)?;
        tracker.push(frame)?;
    }
    let steps = tracker.into_steps();
    let series: Vec<_> = steps.iter().map(|s| s.diagnostics.clone()).collect();
    let source = match cfg.constants.fixed {
        Some(c) => ConstantsSource::Fixed(c),
        None => ConstantsSource::Measured,
    };
    let env = growth_envelope(&series, source)?;
    let identity: Vec<Vec<String>> = identity_series(&series)
        .iter()
        .map(|r| {
            vec![
                num(r.time),
                r.lineage.to_string(),
                num(r.dq_dt),
                num(r.i1),
                num(r.i2),
                num(r.i3),
                num(r.i4),
                num(r.residual),
                num(r.relative_residual),
            ]
        })
        .collect();

    fs::create_dir_all(out)?;
    fs::write(out.join(DIAGNOSTICS), csvio::render(&csvio::DIAGNOSTICS, &diagnostics_rows(&steps))?)?;
    fs::write(out.join(IDENTITY), csvio::render(&csvio::IDENTITY, &identity)?)?;
    fs::write(out.join(ENVELOPE), csvio::render(&csvio::ENVELOPE, &envelope_rows(&env))?)?;
    fs::write(out.join(CRITICAL), to_json(&critical_output(cfg, &steps, &env)))?;
    let dim = cfg.model.dim();
    let last = steps.last().map(|s| s.samples.as_slice()).unwrap_or_default();
    fs::write(out.join(CURVE), csvio::render(curve_schema(dim), &curve_rows(dim, last))?)?;
    write_report(out)?;

    manifest.flags = Some(flag_summary(&env));
    for f in [DIAGNOSTICS, IDENTITY, ENVELOPE, CRITICAL, CURVE, REPORT] {
        manifest.add_file(out, f)?;
    }
    manifest.write(out)?;
    Ok(manifest)
}

/// Traces one segment from the global maximum of a single snapshot and
/// writes its samples to `out_csv`.
pub fn trace(snapshot: &Path, cfg: &RunConfig, out_csv: &Path) -> Result<TrackedStep> {
    let snap = Snapshot::read(snapshot)?;
    let inviscid = cfg.stepper()?.is_inviscid();
    let frame = frame_from_snapshot(&snap, cfg, inviscid)?;
    let mut tracker = SegmentTracker::new(tracker_config(cfg))?;
    let step = tracker.push(frame)?.clone();
    let dim = cfg.model.dim();
    if let Some(parent) = out_csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out_csv, csvio::render(curve_schema(dim), &curve_rows(dim, &step.samples))?)?;
    Ok(step)
}

/// Runs the velocity-split check on the configured family and writes the
/// per-probe terms, the per-member summary and the full report into `out`.
pub fn appendix(cfg: &RunConfig, config_text: &str, out: &Path) -> Result<AppendixReport> {
    if cfg.model != Model::Euler3d {
        return Err(Error::Precondition(
            "appendix-check needs model = euler3d, which supplies the 3D grid".into(),
        ));
    }
    let report = appendix_check(&cfg.grid()?, &cfg.appendix)?;
    let mut terms = Vec::new();
    let mut family = Vec::new();
    for (i, m) in report.members.iter().enumerate() {
        for (p, t) in m.terms.iter().enumerate() {
            terms.push(vec![
                num(m.sharpness),
                p.to_string(),
                num(t.point[0]),
                num(t.point[1]),
                num(t.point[2]),
                num(norm(t.near)),
                num(norm(t.intermediate)),
                num(norm(t.outer_cutoff)),
                num(norm(t.inner_cutoff)),
                num(norm(t.kernel)),
                num(norm(t.far)),
                num(norm(t.far_cutoff)),
                num(norm(t.far_kernel)),
                num(norm(t.total)),
                num(norm(t.direct)),
                num(t.relative_error),
            ]);
        }
        family.push(vec![
            num(m.sharpness),
            num(m.omega_max),
            num(m.speed_max),
            opt(report.log_velocity.ratios.get(i).copied()),
            num(m.delta),
            num(m.near_ratio),
            num(m.probe_near_ratio),
            num(m.kernel_ratio),
            num(m.kernel_ceiling),
            num(m.max_relative_error),
            num(m.representation_error),
        ]);
    }
    fs::create_dir_all(out)?;
    fs::write(out.join(APPENDIX_TERMS), csvio::render(&csvio::APPENDIX_TERMS, &terms)?)?;
    fs::write(out.join(APPENDIX_FAMILY), csvio::render(&csvio::APPENDIX_FAMILY, &family)?)?;
    fs::write(out.join(APPENDIX_REPORT), to_json(&report))?;
    let mut manifest = RunManifest::new("appendix-check", config_text);
    for f in [APPENDIX_TERMS, APPENDIX_FAMILY, APPENDIX_REPORT] {
        manifest.add_file(out, f)?;
    }
    manifest.write(out)?;
    Ok(report)
}

/// Renders `report.svg` in `dir` from the CSVs already there.
pub fn report(dir: &Path) -> Result<()> {
    write_report(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SMALL_SQG: &str = "model = sqg\ngrid.n = 64\ntime.t_end = 0.1\ntime.dt = 0.02\ntime.snapshot_interval = 1\n";

    #[test]
    fn run_then_diagnose() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(SMALL_SQG).unwrap();
        let m = run_simulation(&cfg, SMALL_SQG, dir.path()).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
        assert_eq!(m.snapshots.len(), 6);
        assert_eq!(m.end_time, 0.1);
        let series = fs::read_to_string(dir.path().join(TIMESERIES)).unwrap();
        assert_eq!(series.lines().count(), 7);
        assert!(m.verify(dir.path()).unwrap().is_empty());

        let d = diagnose(dir.path(), &cfg, SMALL_SQG, dir.path()).unwrap();
        assert_eq!(d.flags.as_ref().unwrap().windows, 6);
        for f in [DIAGNOSTICS, IDENTITY, ENVELOPE, CRITICAL, CURVE, REPORT] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        assert_eq!(RunManifest::read(dir.path(), "run-sqg").unwrap(), m);
        assert!(d.verify(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn empty_directory_lists_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(SMALL_SQG).unwrap();
        let e = diagnose(dir.path(), &cfg, SMALL_SQG, dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("snap_NNNNNN.vln"));
    }

    #[test]
    fn appendix_needs_3d_model() {
        let cfg = parse_config(SMALL_SQG).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(appendix(&cfg, SMALL_SQG, dir.path()), Err(Error::Precondition(_))));
    }
}
