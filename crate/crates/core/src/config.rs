//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment, sections are dotted key
//! prefixes. Every problem in a file (syntax, unknown key, bad value, missing
//! required key) is collected and reported together.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `model` | required | `sqg` or `euler3d` |
//! | `grid.n` | required | points per axis (power of two, >= 8) |
//! | `grid.nz` | `grid.n` | points along z (`euler3d` only) |
//! | `grid.length` | `2π` | periodic box length per axis |
//! | `time.t_end` | `1` | final time |
//! | `time.dt` | | fixed step; excludes `time.cfl` |
//! | `time.cfl` | `0.5` | adaptive CFL number |
//! | `time.snapshot_interval` | `10` | steps between snapshots; `0` keeps first and last only |
//! | `diffusion.nu_h` | `0` | hyperdiffusion coefficient |
//! | `diffusion.order` | `4` | hyperdiffusion order `p` in `(-Δ)^p` |
//! | `ic.name` | `two_gaussian` / `abc` | initial condition, see below |
//! | `ic.<param>` | per condition | initial-condition parameters |
//! | `interp` | `auto` | `auto`, `spectral` or `cubic` |
//! | `segment.target_length` | `1` | traced segment length |
//! | `segment.reseed_interval` | `0` | frames between re-seeds; `0` never re-seeds |
//! | `segment.direction` | `backward` | `forward`, `backward` or `both` |
//! | `constants.c0`, `.C0`, `.Cl`, `.Cu` | measured | fixed bound constants (all four or none) |
//! | `constants.Cw` | `0.5` | critical weight in `(0, 1)` |
//! | `constants.T` | fitted | singular time for the critical monitor |
//! | `appendix.sharpness` | `1,2,4,8,16` | family sharpness values |
//! | `appendix.rho` | `0.5` | outer cutoff radius |
//! | `appendix.rho_scan` | `0.5,1,2` | radii for the far-field scaling fit |
//! | `appendix.probes` | `20` | probe points per member |
//! | `appendix.counterexample` | `true` | also run the sharpened-`ψ` family |
//! | `appendix.amplitude`, `.bump_width`, `.sheet_wavenumber`, `.edge_wavenumber` | family defaults | profile parameters |
//! | `output.dir` | `out` | output directory |
//! | `seed` | `0` | RNG seed for random initial data |
//!
//! Initial conditions and their parameters:
//!
//! * `sqg`: `radial` (amplitude 1, sigma 0.3), `two_gaussian` (amplitude 1,
//!   sigma 0.5, offset 0.7), `random` (amplitude 1, kmax 4), `two_mode`
//!   (amplitude 1), `zero`
//! * `euler3d`: `abc` (a, b, c = 1.5), `taylor_green` (amplitude 1), `tubes`
//!   (circulation 2, core_radius 0.3, separation 1.2, perturbation 0.1,
//!   wavenumber 1), `uniform` (wx 0, wy 0, wz 1), `zero`

use crate::clebsch::{AppendixConfig, ClebschParams};
use crate::curve::Direction;
use crate::error::{ConfigIssue, Error, Result};
use crate::euler::{EulerInitial, TubeParams};
use crate::frame::Model;
use crate::growth::BoundConstants;
use crate::grid::Grid;
use crate::interp::InterpMethod;
use crate::sqg::SqgInitial;
use crate::stepper::{StepControl, TimeStepper, DEFAULT_CFL};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Sqg(SqgInitial),
    Euler(EulerInitial),
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Sqg(ic) => ic.name(),
            InitialCondition::Euler(ic) => ic.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    pub target_length: f64,
    pub reseed_interval: Option<usize>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsConfig {
    /// `None` uses running measured values.
    pub fixed: Option<BoundConstants>,
    pub critical_weight: f64,
    pub singular_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub n: usize,
    pub nz: usize,
    pub length: f64,
    pub t_end: f64,
    pub control: StepControl,
    pub snapshot_interval: usize,
    pub nu_h: f64,
    pub order: u32,
    pub initial: InitialCondition,
    pub interp: InterpMethod,
    pub segment: SegmentConfig,
    pub constants: ConstantsConfig,
    pub appendix: AppendixConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        match self.model {
            Model::Sqg => Grid::new(&[self.n, self.n], &[self.length; 2]),
            Model::Euler3d => Grid::new(&[self.n, self.n, self.nz], &[self.length; 3]),
        }
    }

    pub fn stepper(&self) -> Result<TimeStepper> {
        let base = match self.control {
            StepControl::Fixed { dt } => TimeStepper::fixed(dt)?,
            StepControl::Adaptive { cfl } => TimeStepper::adaptive(cfl)?,
        };
        base.with_hyperdiffusion(self.nu_h, self.order)
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        let mut kv = |k: &str, v: String| out.push(format!("{k} = {v}"));
        kv("model", self.model.as_str().into());
        kv("grid.n", self.n.to_string());
        if self.model == Model::Euler3d {
            kv("grid.nz", self.nz.to_string());
        }
        kv("grid.length", self.length.to_string());
        kv("time.t_end", self.t_end.to_string());
        match self.control {
            StepControl::Fixed { dt } => kv("time.dt", dt.to_string()),
            StepControl::Adaptive { cfl } => kv("time.cfl", cfl.to_string()),
        }
        kv("time.snapshot_interval", self.snapshot_interval.to_string());
        kv("diffusion.nu_h", self.nu_h.to_string());
        kv("diffusion.order", self.order.to_string());
        kv("ic.name", self.initial.name().into());
        for (k, v) in ic_params(&self.initial) {
            kv(&format!("ic.{k}"), v.to_string());
        }
        kv("interp", self.interp.as_str().into());
        kv("segment.target_length", self.segment.target_length.to_string());
        kv("segment.reseed_interval", self.segment.reseed_interval.unwrap_or(0).to_string());
        kv("segment.direction", self.segment.direction.as_str().into());
        if let Some(c) = &self.constants.fixed {
            kv("constants.c0", c.strength_fraction.to_string());
            kv("constants.C0", c.geometry.to_string());
            kv("constants.Cl", c.endpoint_speed.to_string());
            kv("constants.Cu", c.velocity_log.to_string());
        }
        kv("constants.Cw", self.constants.critical_weight.to_string());
        if let Some(t) = self.constants.singular_time {
            kv("constants.T", t.to_string());
        }
        let a = &self.appendix;
        kv("appendix.sharpness", join(&a.sharpness));
        kv("appendix.rho", a.rho.to_string());
        kv("appendix.rho_scan", join(&a.rho_scan));
        kv("appendix.probes", a.probes.to_string());
        kv("appendix.counterexample", a.counterexample.to_string());
        kv("appendix.amplitude", a.params.amplitude.to_string());
        kv("appendix.bump_width", a.params.bump_width.to_string());
        kv("appendix.sheet_wavenumber", a.params.sheet_wavenumber.to_string());
        kv("appendix.edge_wavenumber", a.params.edge_wavenumber.to_string());
        kv("output.dir", self.output_dir.display().to_string());
        kv("seed", self.seed.to_string());
        let mut text = out.join("\n");
        text.push('\n');
        text
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn ic_params(ic: &InitialCondition) -> Vec<(&'static str, f64)> {
    match ic {
        InitialCondition::Sqg(s) => match *s {
            SqgInitial::Radial { amplitude, sigma } => vec![("amplitude", amplitude), ("sigma", sigma)],
            SqgInitial::TwoGaussian {
                amplitude,
                sigma,
                offset,
            } => vec![("amplitude", amplitude), ("sigma", sigma), ("offset", offset)],
            SqgInitial::Random { kmax, amplitude, .. } => vec![("amplitude", amplitude), ("kmax", kmax)],
            SqgInitial::TwoMode { amplitude } => vec![("amplitude", amplitude)],
            SqgInitial::Zero => vec![],
        },
        InitialCondition::Euler(e) => match *e {
            EulerInitial::Abc { a, b, c } => vec![("a", a), ("b", b), ("c", c)],
            EulerInitial::TaylorGreen { amplitude } => vec![("amplitude", amplitude)],
            EulerInitial::Tubes(t) => vec![
                ("circulation", t.circulation),
                ("core_radius", t.core_radius),
                ("separation", t.separation),
                ("perturbation", t.perturbation),
                ("wavenumber", t.wavenumber as f64),
            ],
            EulerInitial::Uniform { omega } => vec![("wx", omega[0]), ("wy", omega[1]), ("wz", omega[2])],
            EulerInitial::Zero => vec![],
        },
    }
}

/// Parameter names and defaults per initial condition.
fn ic_defaults(model: Model, name: &str) -> Option<Vec<(&'static str, f64)>> {
    let ic = match (model, name) {
        (Model::Sqg, "radial") => InitialCondition::Sqg(SqgInitial::radial_default()),
        (Model::Sqg, "two_gaussian") => InitialCondition::Sqg(SqgInitial::two_gaussian_default()),
        (Model::Sqg, "random") => InitialCondition::Sqg(SqgInitial::Random {
            seed: 0,
            kmax: 4.0,
            amplitude: 1.0,
        }),
        (Model::Sqg, "two_mode") => InitialCondition::Sqg(SqgInitial::TwoMode { amplitude: 1.0 }),
        (Model::Sqg, "zero") => InitialCondition::Sqg(SqgInitial::Zero),
        (Model::Euler3d, "abc") => InitialCondition::Euler(EulerInitial::abc_default()),
        (Model::Euler3d, "taylor_green") => InitialCondition::Euler(EulerInitial::TaylorGreen { amplitude: 1.0 }),
        (Model::Euler3d, "tubes") => InitialCondition::Euler(EulerInitial::Tubes(TubeParams::default())),
        (Model::Euler3d, "uniform") => InitialCondition::Euler(EulerInitial::Uniform { omega: [0.0, 0.0, 1.0] }),
        (Model::Euler3d, "zero") => InitialCondition::Euler(EulerInitial::Zero),
        _ => return None,
    };
    Some(ic_params(&ic))
}

fn build_ic(model: Model, name: &str, p: &BTreeMap<&str, f64>, seed: u64) -> Result<InitialCondition> {
    let g = |k: &str| p[k];
    Ok(match (model, name) {
        (Model::Sqg, "radial") => InitialCondition::Sqg(SqgInitial::Radial {
            amplitude: g("amplitude"),
            sigma: g("sigma"),
        }),
        (Model::Sqg, "two_gaussian") => InitialCondition::Sqg(SqgInitial::TwoGaussian {
            amplitude: g("amplitude"),
            sigma: g("sigma"),
            offset: g("offset"),
        }),
        (Model::Sqg, "random") => InitialCondition::Sqg(SqgInitial::Random {
            seed,
            kmax: g("kmax"),
            amplitude: g("amplitude"),
        }),
        (Model::Sqg, "two_mode") => InitialCondition::Sqg(SqgInitial::TwoMode {
            amplitude: g("amplitude"),
        }),
        (Model::Sqg, "zero") => InitialCondition::Sqg(SqgInitial::Zero),
        (Model::Euler3d, "abc") => InitialCondition::Euler(EulerInitial::Abc {
            a: g("a"),
            b: g("b"),
            c: g("c"),
        }),
        (Model::Euler3d, "taylor_green") => InitialCondition::Euler(EulerInitial::TaylorGreen {
            amplitude: g("amplitude"),
        }),
        (Model::Euler3d, "tubes") => {
            let k = g("wavenumber");
            if !(k >= 0.0 && k.fract() == 0.0 && k <= u32::MAX as f64) {
                return Err(Error::Precondition(format!("tube wavenumber must be a non-negative integer, got {k}")));
            }
            InitialCondition::Euler(EulerInitial::Tubes(TubeParams {
                circulation: g("circulation"),
                core_radius: g("core_radius"),
                separation: g("separation"),
                perturbation: g("perturbation"),
                wavenumber: k as u32,
            }))
        }
        (Model::Euler3d, "uniform") => InitialCondition::Euler(EulerInitial::Uniform {
            omega: [g("wx"), g("wy"), g("wz")],
        }),
        _ => InitialCondition::Euler(EulerInitial::Zero),
    })
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn parsed<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let (line, v) = self.raw(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.issue(key, format!("line {line}: expected {what}, got `{v}`"));
                None
            }
        }
    }

    fn float(&mut self, key: &str, default: f64, check: fn(f64) -> bool, rule: &str) -> f64 {
        match self.parsed::<f64>(key, "a number") {
            Some(x) if x.is_finite() && check(x) => x,
            Some(x) => {
                self.issue(key, format!("value {x} must be finite and {rule}"));
                default
            }
            None => default,
        }
    }

    fn opt_float(&mut self, key: &str, check: fn(f64) -> bool, rule: &str) -> Option<f64> {
        let x = self.parsed::<f64>(key, "a number")?;
        if x.is_finite() && check(x) {
            Some(x)
        } else {
            self.issue(key, format!("value {x} must be finite and {rule}"));
            None
        }
    }

    fn uint(&mut self, key: &str, default: u64) -> u64 {
        self.parsed::<u64>(key, "a non-negative integer").unwrap_or(default)
    }

    fn list(&mut self, key: &str, default: &[f64], check: fn(f64) -> bool, rule: &str) -> Vec<f64> {
        let Some((line, v)) = self.raw(key) else {
            return default.to_vec();
        };
        let mut out = Vec::new();
        for item in v.split(',') {
            match item.trim().parse::<f64>() {
                Ok(x) if x.is_finite() && check(x) => out.push(x),
                _ => {
                    self.issue(key, format!("line {line}: `{}` is not {rule}", item.trim()));
                    return default.to_vec();
                }
            }
        }
        out
    }

    fn choice<T: FromStr<Err = String>>(&mut self, key: &str, default: T) -> T {
        let Some((line, v)) = self.raw(key) else {
            return default;
        };
        match v.parse::<T>() {
            Ok(x) => x,
            Err(e) => {
                self.issue(key, format!("line {line}: {e}"));
                default
            }
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn non_negative(x: f64) -> bool {
    x >= 0.0
}

fn any(_: f64) -> bool {
    true
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut r = Reader {
        entries: BTreeMap::new(),
        issues: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            r.issue(&format!("line {line}"), format!("expected `key = value`, got `{content}`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.chars().any(char::is_whitespace) {
            r.issue(&format!("line {line}"), format!("malformed key `{k}`"));
            continue;
        }
        if let Some(prev) = r.entries.get(k) {
            let first = prev.line;
            r.issue(k, format!("line {line}: duplicate key (first set on line {first})"));
            continue;
        }
        r.entries.insert(
            k.to_string(),
            Entry {
                line,
                value: v.to_string(),
                used: false,
            },
        );
    }

    let model = match r.raw("model") {
        None => {
            r.issue("model", "missing required key (sqg or euler3d)");
            None
        }
        Some((line, v)) => match v.parse::<Model>() {
            Ok(m) => Some(m),
            Err(e) => {
                r.issue("model", format!("line {line}: {e}"));
                None
            }
        },
    };
    let n = match r.parsed::<usize>("grid.n", "a positive integer") {
        Some(n) => n,
        None => {
            if !r.entries.contains_key("grid.n") {
                r.issue("grid.n", "missing required key");
            }
            0
        }
    };
    let nz = r.parsed::<usize>("grid.nz", "a positive integer").unwrap_or(n);
    if model == Some(Model::Sqg) && r.entries.contains_key("grid.nz") {
        r.issue("grid.nz", "only valid for model = euler3d");
    }
    let length = r.float("grid.length", 2.0 * PI, positive, "positive");
    let t_end = r.float("time.t_end", 1.0, non_negative, ">= 0");
    let dt = r.opt_float("time.dt", positive, "positive");
    let cfl = r.opt_float("time.cfl", positive, "positive");
    let control = match (dt, cfl) {
        (Some(_), Some(_)) => {
            r.issue("time.dt", "give either time.dt or time.cfl, not both");
            StepControl::Adaptive { cfl: DEFAULT_CFL }
        }
        (Some(dt), None) => StepControl::Fixed { dt },
        (None, Some(cfl)) => StepControl::Adaptive { cfl },
        (None, None) => StepControl::Adaptive { cfl: DEFAULT_CFL },
    };
    let snapshot_interval = r.uint("time.snapshot_interval", 10) as usize;
    let nu_h = r.float("diffusion.nu_h", 0.0, non_negative, ">= 0");
    let order = r.uint("diffusion.order", 4);
    if order == 0 || order > 16 {
        r.issue("diffusion.order", format!("order {order} must lie in 1..=16"));
    }
    let seed = r.uint("seed", 0);

    let initial = model.and_then(|m| {
        let default = if m == Model::Sqg { "two_gaussian" } else { "abc" };
        let name = r.raw("ic.name").map(|(_, v)| v).unwrap_or_else(|| default.to_string());
        let Some(defaults) = ic_defaults(m, &name) else {
            r.issue("ic.name", format!("unknown initial condition `{name}` for model {}", m.as_str()));
            return None;
        };
        let mut params = BTreeMap::new();
        for (k, d) in defaults {
            let v = r.float(&format!("ic.{k}"), d, any, "finite");
            params.insert(k, v);
        }
        match build_ic(m, &name, &params, seed) {
            Ok(ic) => Some(ic),
            Err(e) => {
                r.issue("ic", e.to_string());
                None
            }
        }
    });

    let interp = r.choice("interp", InterpMethod::Auto);
    let target_length = r.float("segment.target_length", 1.0, positive, "positive");
    let reseed = r.uint("segment.reseed_interval", 0) as usize;
    let direction = r.choice("segment.direction", Direction::Backward);

    let consts: Vec<Option<f64>> = ["constants.c0", "constants.C0", "constants.Cl", "constants.Cu"]
        .iter()
        .map(|k| r.opt_float(k, non_negative, ">= 0"))
        .collect();
    let given = ["constants.c0", "constants.C0", "constants.Cl", "constants.Cu"]
        .iter()
        .filter(|k| r.entries.contains_key(**k))
        .count();
    let fixed = if given == 0 {
        None
    } else if given < 4 {
        r.issue("constants", "set all of c0, C0, Cl, Cu or none of them");
        None
    } else if let [Some(a), Some(b), Some(c), Some(d)] = consts[..] {
        match BoundConstants::new(a, b, c, d) {
            Ok(k) => Some(k),
            Err(e) => {
                r.issue("constants", e.to_string());
                None
            }
        }
    } else {
        None
    };
    let critical_weight = r.float("constants.Cw", 0.5, |x| x > 0.0 && x < 1.0, "in (0, 1)");
    let singular_time = r.opt_float("constants.T", any, "finite");

    let base = AppendixConfig::default();
    let defaults = ClebschParams::default();
    let appendix = AppendixConfig {
        sharpness: r.list("appendix.sharpness", &base.sharpness, |x| x >= 1.0, "a number >= 1"),
        rho: r.float("appendix.rho", base.rho, positive, "positive"),
        rho_scan: r.list("appendix.rho_scan", &base.rho_scan, positive, "a positive number"),
        probes: r.uint("appendix.probes", base.probes as u64) as usize,
        counterexample: r
            .parsed::<bool>("appendix.counterexample", "true or false")
            .unwrap_or(base.counterexample),
        params: ClebschParams {
            amplitude: r.float("appendix.amplitude", defaults.amplitude, any, "finite"),
            bump_width: r.float("appendix.bump_width", defaults.bump_width, positive, "positive"),
            sheet_wavenumber: r.float("appendix.sheet_wavenumber", defaults.sheet_wavenumber, positive, "positive"),
            edge_wavenumber: r.float("appendix.edge_wavenumber", defaults.edge_wavenumber, positive, "positive"),
            sharpen_psi: false,
        },
    };
    let output_dir = PathBuf::from(r.raw("output.dir").map(|(_, v)| v).unwrap_or_else(|| "out".into()));

    let unknown: Vec<(String, usize)> = r
        .entries
        .iter()
        .filter(|(_, e)| !e.used)
        .map(|(k, e)| (k.clone(), e.line))
        .collect();
    for (k, line) in unknown {
        r.issue(&k, format!("line {line}: unknown key"));
    }

    if let Some(m) = model {
        if n > 0 {
            let shape: Vec<usize> = if m == Model::Sqg { vec![n, n] } else { vec![n, n, nz] };
            if let Err(e) = Grid::new(&shape, &vec![length; shape.len()]) {
                r.issue("grid.n", e.to_string());
            }
        }
    }

    match (model, initial) {
        (Some(model), Some(initial)) if r.issues.is_empty() => Ok(RunConfig {
            model,
            n,
            nz: if model == Model::Sqg { n } else { nz },
            length,
            t_end,
            control,
            snapshot_interval,
            nu_h,
            order: order as u32,
            initial,
            interp,
            segment: SegmentConfig {
                target_length,
                reseed_interval: (reseed > 0).then_some(reseed),
                direction,
            },
            constants: ConstantsConfig {
                fixed,
                critical_weight,
                singular_time,
            },
            appendix,
            output_dir,
            seed,
        }),
        _ => Err(Error::Config(r.issues)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_sqg_fills_defaults() {
        let c = parse_config("model = sqg\ngrid.n = 64\n").unwrap();
        assert_eq!(c.model, Model::Sqg);
        assert_eq!((c.n, c.nz), (64, 64));
        assert_eq!(c.length, 2.0 * PI);
        assert_eq!(c.t_end, 1.0);
        assert_eq!(c.control, StepControl::Adaptive { cfl: 0.5 });
        assert_eq!(c.snapshot_interval, 10);
        assert_eq!(c.initial, InitialCondition::Sqg(SqgInitial::two_gaussian_default()));
        assert_eq!(c.interp, InterpMethod::Auto);
        assert_eq!(c.segment.direction, Direction::Backward);
        assert_eq!(c.segment.reseed_interval, None);
        assert!(c.constants.fixed.is_none());
        assert_eq!(c.output_dir, PathBuf::from("out"));
        let echo = c.to_text();
        assert!(echo.starts_with("model = sqg\ngrid.n = 64\ngrid.length = 6.283185307179586\n"));
        assert!(echo.contains("ic.name = two_gaussian\nic.amplitude = 1\nic.sigma = 0.5\nic.offset = 0.7\n"));
    }

    #[test]
    fn misspelled_key_is_named() {
        let v = issues("model = sqg\ngrid.n = 64\ntime.tend = 2\n");
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "time.tend");
        assert!(v[0].message.contains("unknown key"));
    }

    #[test]
    fn all_problems_are_collected() {
        let v = issues("grid.n = 12\ntime.dt = -1\nbogus\nic.sigma = x\nic.sigma = 2\n");
        let keys: Vec<&str> = v.iter().map(|i| i.key.as_str()).collect();
        assert!(keys.contains(&"model"), "{keys:?}");
        assert!(keys.contains(&"time.dt"));
        assert!(keys.contains(&"line 3"));
        assert!(keys.contains(&"ic.sigma"));
    }

    #[test]
    fn bad_grid_and_partial_constants_rejected() {
        let v = issues("model = euler3d\ngrid.n = 12\nconstants.c0 = 0.5\n");
        let keys: Vec<&str> = v.iter().map(|i| i.key.as_str()).collect();
        assert!(keys.contains(&"grid.n"));
        assert!(keys.contains(&"constants"));
        let v = issues("model = sqg\ngrid.n = 16\ntime.dt = 0.1\ntime.cfl = 0.3\n");
        assert_eq!(v[0].key, "time.dt");
    }

    #[test]
    fn ic_params_depend_on_name() {
        let c = parse_config("model = euler3d\ngrid.n = 16\nic.name = tubes\nic.separation = 2\n").unwrap();
        match c.initial {
            InitialCondition::Euler(EulerInitial::Tubes(t)) => assert_eq!(t.separation, 2.0),
            other => panic!("{other:?}"),
        }
        let v = issues("model = euler3d\ngrid.n = 16\nic.name = abc\nic.sigma = 2\n");
        assert_eq!(v[0].key, "ic.sigma");
    }

    #[test]
    fn full_config_round_trips() {
        let text = "model = euler3d\ngrid.n = 32\ngrid.nz = 16\ntime.dt = 0.01\nconstants.c0 = 0.5\n\
                    constants.C0 = 1\nconstants.Cl = 2\nconstants.Cu = 3\nconstants.T = 4.5\nseed = 7\n\
                    segment.reseed_interval = 3\nappendix.sharpness = 1, 3\n# comment\n";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        assert_eq!(c.appendix.sharpness, vec![1.0, 3.0]);
    }
}
