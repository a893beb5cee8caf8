//! Acceptance criteria. Each test writes one PASS/FAIL line per check before
//! asserting, so a full run lists every outcome.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;
use vortiline::clebsch::{appendix_check, AppendixConfig};
use vortiline::curve::{diagnose_segment, tau_relation, trace_segment, Direction, TraceOptions};
use vortiline::euler::{EulerInitial, EulerSolver, EulerState};
use vortiline::frame::Frame;
use vortiline::growth::{
    bkm_integral, fit_singular_time, growth_envelope, identity_series, ConstantsSource, GrowthEnvelope,
};
use vortiline::interp::InterpMethod;
use vortiline::sqg::{SqgInitial, SqgSolver, SqgState};
use vortiline::stepper::TimeStepper;
use vortiline::tracking::{SegmentTracker, TrackedStep, TrackerConfig};
use vortiline::{Grid, ScalarField, VectorField};

const IDENTITY_MAX_RESIDUAL: f64 = 1e-2;
const IDENTITY_REFINEMENT_GAIN: f64 = 2.0;
const TAU_MAX_DEVIATION: f64 = 1e-2;
const TAU_COMPARABILITY_SLACK: f64 = 1e-6;
const EXPONENT_TOL: f64 = 0.02;
const BKM_RELATIVE_TOL: f64 = 1e-2;
const ABC_DRIFT: f64 = 1e-4;
const RADIAL_DRIFT: f64 = 1e-6;
const LOOP_CURVATURE_TOL: f64 = 1e-3;
const STRAIGHT_LINE_TOL: f64 = 1e-8;
const SPLIT_TOL: f64 = 1e-3;
const LOG_VELOCITY_SPREAD: f64 = 0.25;
const NEAR_FACTOR: f64 = 2.0;
const SQG_SQUARE_DRIFT: f64 = 1e-6;
const EULER_ENERGY_DRIFT: f64 = 1e-5;

const CFL: f64 = 0.5;
const SEGMENT_LENGTH: f64 = 1.0;

/// Writes straight to the stderr handle so the line survives test output capture.
fn verdict(criterion: u32, check: &str, ok: bool, detail: String) -> bool {
    let line = format!("{} criterion {criterion} {check}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}

fn tracker(direction: Direction) -> SegmentTracker {
    let mut c = TrackerConfig::new(SEGMENT_LENGTH);
    c.direction = direction;
    SegmentTracker::new(c).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct SqgRun {
    steps: Vec<TrackedStep>,
    initial: ScalarField,
    last: ScalarField,
    square_drift: f64,
}

/// Integrates SQG to `t_end` at fixed CFL, tracking a segment every `every` steps.
fn sqg_run(n: usize, ic: SqgInitial, t_end: f64, every: usize, method: InterpMethod, direction: Direction) -> SqgRun {
    let g = Grid::square(n).unwrap();
    let solver = SqgSolver::new(&g).unwrap();
    let theta = solver.prepare(&ic.sample(&g).unwrap()).unwrap();
    let q0 = theta.integral_sq();
    let stepper = TimeStepper::adaptive(CFL).unwrap();
    let mut s = SqgState { theta: theta.clone(), time: 0.0 };
    let mut tr = tracker(direction);
    let mut square_drift: f64 = 0.0;
    let mut k = 0;
    loop {
        let done = t_end - s.time <= 1e-12 * t_end.max(1.0);
        if k % every == 0 || done {
            tr.push(Frame::from_sqg(&s.theta, s.time, method, true).unwrap()).unwrap();
        }
        if done {
            break;
        }
        let c = stepper.choose(solver.max_speed(&s.theta).unwrap(), g.min_spacing(), t_end - s.time);
        s = solver.step(&s, c.dt).unwrap();
        square_drift = square_drift.max((s.theta.integral_sq() - q0).abs() / q0);
        k += 1;
    }
    SqgRun { steps: tr.into_steps(), initial: theta, last: s.theta, square_drift }
}

struct AbcRun {
    steps: Vec<TrackedStep>,
    initial: VectorField,
    last: VectorField,
    energy_drift: f64,
}

/// ABC flow at 64³ on t ∈ [0, 1], frames every 0.1.
fn abc_run() -> &'static AbcRun {
    static RUN: OnceLock<AbcRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let g = Grid::cube(64).unwrap();
        let solver = EulerSolver::new(&g).unwrap();
        let w0 = EulerInitial::abc_default().sample(&g).unwrap();
        let e0 = solver.summary(&w0).unwrap().kinetic_energy;
        let stepper = TimeStepper::adaptive(CFL).unwrap();
        let mut s = EulerState { omega: w0.clone(), time: 0.0 };
        let mut tr = tracker(Direction::Forward);
        let mut energy_drift: f64 = 0.0;
        let (t_end, cadence) = (1.0, 0.1);
        let mut next_frame = 0.0;
        loop {
            if s.time >= next_frame - 1e-12 {
                tr.push(Frame::from_euler(&s.omega, s.time, InterpMethod::Auto, true).unwrap()).unwrap();
                next_frame += cadence;
            }
            if t_end - s.time <= 1e-12 {
                break;
            }
            let remaining = (next_frame - s.time).min(t_end - s.time);
            let c = stepper.choose(solver.max_speed(&s.omega).unwrap(), g.min_spacing(), remaining);
            s = solver.step(&s, c.dt).unwrap();
            let e = solver.summary(&s.omega).unwrap().kinetic_energy;
            energy_drift = energy_drift.max((e - e0).abs() / e0);
        }
        AbcRun { steps: tr.into_steps(), initial: w0, last: s.omega, energy_drift }
    })
}

/// Two-Gaussian SQG at 256², t ∈ [0, 2], a frame every step.
fn growing_256() -> &'static SqgRun {
    static RUN: OnceLock<SqgRun> = OnceLock::new();
    RUN.get_or_init(|| sqg_run(256, SqgInitial::two_gaussian_default(), 2.0, 1, InterpMethod::Auto, Direction::Backward))
}

/// Steady radial SQG at 256², t ∈ [0, 1]. Spectral evaluation keeps the
/// ring of maximal |∇θ| flat to round-off, so the endpoint test is not
/// decided by interpolation noise.
fn radial_256() -> &'static SqgRun {
    static RUN: OnceLock<SqgRun> = OnceLock::new();
    RUN.get_or_init(|| sqg_run(256, SqgInitial::radial_default(), 1.0, 4, InterpMethod::Spectral, Direction::Backward))
}

fn identity_residuals(steps: &[TrackedStep]) -> Vec<f64> {
    let d: Vec<_> = steps.iter().map(|s| s.diagnostics.clone()).collect();
    identity_series(&d).iter().map(|r| r.relative_residual).collect()
}

#[test]
fn criterion_1_identity_residual_and_refinement() {
    let coarse = identity_residuals(&growing_256().steps);
    let fine_run = sqg_run(512, SqgInitial::two_gaussian_default(), 2.0, 1, InterpMethod::Auto, Direction::Backward);
    let fine = identity_residuals(&fine_run.steps);
    let worst = coarse.iter().copied().fold(0.0, f64::max);
    let (mc, mf) = (median(coarse.clone()), median(fine.clone()));
    let a = verdict(
        1,
        "max relative residual at 256²",
        !coarse.is_empty() && worst <= IDENTITY_MAX_RESIDUAL,
        format!("{worst:.3e} over {} records (limit {IDENTITY_MAX_RESIDUAL:e})", coarse.len()),
    );
    let b = verdict(
        1,
        "median residual gain under halved dt and h",
        !fine.is_empty() && mc >= IDENTITY_REFINEMENT_GAIN * mf,
        format!("{mc:.3e} / {mf:.3e} = {:.2} (need >= {IDENTITY_REFINEMENT_GAIN})", mc / mf),
    );
    assert!(a && b);
}

fn tau_check(steps: &[TrackedStep]) -> (f64, usize, usize) {
    let mut worst: f64 = 0.0;
    let (mut resolved, mut comparable) = (0, 0);
    for s in steps {
        let rel = tau_relation(&s.samples);
        worst = worst.max(rel.max_deviation);
        if s.diagnostics.resolved {
            resolved += 1;
            if rel.comparability_holds(TAU_COMPARABILITY_SLACK) {
                comparable += 1;
            }
        }
    }
    (worst, resolved, comparable)
}

#[test]
fn criterion_2_exponential_tau_relation() {
    let mut ok = true;
    for (label, steps) in [("SQG 256²", &growing_256().steps), ("ABC 64³", &abc_run().steps)] {
        let (worst, resolved, comparable) = tau_check(steps);
        ok &= verdict(
            2,
            &format!("{label} deviation"),
            worst <= TAU_MAX_DEVIATION,
            format!("max {worst:.3e} over {} segments (limit {TAU_MAX_DEVIATION:e})", steps.len()),
        );
        ok &= verdict(
            2,
            &format!("{label} comparability"),
            resolved > 0 && comparable == resolved,
            format!("{comparable}/{resolved} resolved segments"),
        );
    }
    assert!(ok);
}

fn envelope_of(steps: &[TrackedStep]) -> GrowthEnvelope {
    let d: Vec<_> = steps.iter().map(|s| s.diagnostics.clone()).collect();
    growth_envelope(&d, ConstantsSource::Measured).unwrap()
}

#[test]
fn criterion_3_envelope_dominates_on_clean_windows() {
    let mut ok = true;
    for (label, steps) in [
        ("ABC 64³", &abc_run().steps),
        ("radial SQG 256²", &radial_256().steps),
        ("growing SQG 256²", &growing_256().steps),
    ] {
        let env = envelope_of(steps);
        let violations = env.violations();
        ok &= verdict(
            3,
            label,
            env.clean_points() > 0 && violations.is_empty(),
            format!(
                "{} violations on {} clean of {} windows",
                violations.len(),
                env.clean_points(),
                env.points.len()
            ),
        );
    }
    assert!(ok);
}

#[test]
fn criterion_4_power_law_monitor() {
    let singular = 1.0;
    let times: Vec<f64> = (0..400).map(|i| 0.99 * i as f64 / 399.0).collect();
    let mut ok = true;
    for p in [0.3, 0.5, 0.9, 1.1] {
        let omega: Vec<f64> = times.iter().map(|t| (singular - t).powf(-p)).collect();
        let fit = fit_singular_time(&times, &omega).unwrap();
        let bkm = bkm_integral(&times, &omega, &fit);
        ok &= verdict(
            4,
            &format!("exponent p = {p}"),
            (fit.exponent - p).abs() <= EXPONENT_TOL,
            format!("fitted {:.4} with T = {:.4}", fit.exponent, fit.singular_time),
        );
        if p < 1.0 {
            let exact = singular.powf(1.0 - p) / (1.0 - p);
            let rel = (bkm.total() - exact).abs() / exact;
            ok &= verdict(
                4,
                &format!("finite BKM integral p = {p}"),
                !bkm.divergent && rel <= BKM_RELATIVE_TOL,
                format!("{:.5} vs closed form {exact:.5}", bkm.total()),
            );
        } else {
            ok &= verdict(4, &format!("divergent BKM integral p = {p}"), bkm.divergent, format!("{:?}", bkm.total()));
        }
    }
    assert!(ok);
}

#[test]
fn criterion_5_steady_solutions_stay_put() {
    let abc = abc_run();
    let scale = abc.initial.max_magnitude();
    let abc_drift = (0..3)
        .map(|c| max_abs_diff(&abc.last.components()[c], &abc.initial.components()[c]))
        .fold(0.0, f64::max)
        / scale;
    let radial = radial_256();
    let radial_drift = max_abs_diff(radial.last.values(), radial.initial.values());
    let a = verdict(5, "ABC 64³ vorticity drift", abc_drift <= ABC_DRIFT, format!("{abc_drift:.3e} (limit {ABC_DRIFT:e})"));
    let b = verdict(
        5,
        "radial SQG 256² θ drift",
        radial_drift <= RADIAL_DRIFT,
        format!("{radial_drift:.3e} (limit {RADIAL_DRIFT:e})"),
    );
    assert!(a && b);
}

#[test]
fn criterion_6_loop_and_line_geometry() {
    let g = Grid::square(256).unwrap();
    let theta = SqgInitial::radial_default().sample(&g).unwrap();
    let f = Frame::from_sqg(&theta, 0.0, InterpMethod::Cubic, true).unwrap();
    let c = g.center();
    let r = 0.25;
    let mut opts = TraceOptions::new(4.0 * PI * r, Direction::Forward);
    opts.close_loops = true;
    let seg = trace_segment(&f, [c[0] + r, c[1], 0.0], &opts).unwrap();
    let (d, _) = diagnose_segment(&seg, &f).unwrap();
    let a = verdict(
        6,
        "closed level-set loop",
        seg.loop_length.is_some() && (d.int_kappa - 2.0 * PI).abs() <= LOOP_CURVATURE_TOL,
        format!("∫κ ds = {:.6} (2π ± {LOOP_CURVATURE_TOL:e})", d.int_kappa),
    );

    let g = Grid::cube(16).unwrap();
    let w = EulerInitial::Uniform { omega: [0.0, 0.0, 1.0] }.sample(&g).unwrap();
    let f = Frame::from_euler(&w, 0.0, InterpMethod::Spectral, true).unwrap();
    let seg = trace_segment(&f, [1.0, 2.0, 0.5], &TraceOptions::new(1.0, Direction::Forward)).unwrap();
    let (d, _) = diagnose_segment(&seg, &f).unwrap();
    let b = verdict(
        6,
        "straight line",
        d.int_kappa <= STRAIGHT_LINE_TOL && d.int_tau <= STRAIGHT_LINE_TOL,
        format!("∫|κ| = {:.1e}, ∫|τ| = {:.1e}", d.int_kappa, d.int_tau),
    );
    assert!(a && b);
}

#[test]
fn criterion_7_velocity_split() {
    let g = Grid::new(&[256, 256, 32], &[2.0 * PI; 3]).unwrap();
    let r = appendix_check(&g, &AppendixConfig::default()).unwrap();
    let worst = r.members.iter().map(|m| m.max_relative_error).fold(0.0, f64::max);
    let probes: usize = r.members.iter().map(|m| m.terms.len()).sum();
    let a = verdict(7, "term sum vs Biot–Savart", worst <= SPLIT_TOL, format!("{worst:.3e} over {probes} probes"));
    let b = verdict(
        7,
        "max|u| / log Ω spread",
        r.log_velocity.spread < LOG_VELOCITY_SPREAD,
        format!("{:.3} (limit {LOG_VELOCITY_SPREAD})", r.log_velocity.spread),
    );
    let c = verdict(
        7,
        "near-field constant",
        r.near_spread < NEAR_FACTOR,
        format!("spread factor {:.3} (limit {NEAR_FACTOR})", r.near_spread),
    );
    assert!(a && b && c);
}

fn small_sqg_bits(threads: usize) -> Vec<u64> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let run = sqg_run(64, SqgInitial::two_gaussian_default(), 0.5, 2, InterpMethod::Auto, Direction::Backward);
        let mut bits: Vec<u64> = run.last.values().iter().map(|v| v.to_bits()).collect();
        for s in &run.steps {
            let d = &s.diagnostics;
            bits.extend([d.time, d.length, d.q, d.int_kappa, d.int_tau, d.omega_l].map(f64::to_bits));
        }
        bits
    })
}

/// Energy drift of an evolving Taylor–Green run at 32³ on t ∈ [0, 0.5].
fn taylor_green_energy_drift() -> f64 {
    let g = Grid::cube(32).unwrap();
    let solver = EulerSolver::new(&g).unwrap();
    let w = solver.prepare(&EulerInitial::TaylorGreen { amplitude: 1.0 }.sample(&g).unwrap()).unwrap();
    let e0 = solver.summary(&w).unwrap().kinetic_energy;
    let stepper = TimeStepper::adaptive(CFL).unwrap();
    let mut s = EulerState { omega: w, time: 0.0 };
    let mut drift: f64 = 0.0;
    while 0.5 - s.time > 1e-12 {
        let c = stepper.choose(solver.max_speed(&s.omega).unwrap(), g.min_spacing(), 0.5 - s.time);
        s = solver.step(&s, c.dt).unwrap();
        let e = solver.summary(&s.omega).unwrap().kinetic_energy;
        drift = drift.max((e - e0).abs() / e0);
    }
    drift
}

#[test]
fn criterion_8_determinism_and_conservation() {
    let one = small_sqg_bits(1);
    let four = small_sqg_bits(4);
    let again = small_sqg_bits(4);
    let a = verdict(8, "bit-identical reruns", one == four && four == again, format!("{} words compared", one.len()));
    let sqg = growing_256().square_drift;
    let b = verdict(8, "SQG ∫θ² drift", sqg <= SQG_SQUARE_DRIFT, format!("{sqg:.3e} (limit {SQG_SQUARE_DRIFT:e})"));
    let mut ok = a && b;
    for (label, drift) in [("ABC 64³", abc_run().energy_drift), ("Taylor–Green 32³", taylor_green_energy_drift())] {
        ok &= verdict(
            8,
            &format!("{label} energy drift"),
            drift <= EULER_ENERGY_DRIFT,
            format!("{drift:.3e} (limit {EULER_ENERGY_DRIFT:e})"),
        );
    }
    assert!(ok);
}
