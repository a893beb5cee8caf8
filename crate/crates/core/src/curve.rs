//! Vortex-line (3D) and level-set (2D) segments: tracing, material transport,
//! arclength resampling and per-sample geometry.
//!
//! Geometry is evaluated pointwise from the vorticity-like field `w` and its
//! gradient. With `ŵ = w/|w|` and orientation `σ = ±1` (so the tangent is
//! `ξ = σŵ`):
//!
//! * `τ = ∇·ξ = σ (∇·w - ŵ·∇|w|) / |w|`
//! * `ξ·∇ξ = (d - ŵ (ŵ·d)) / |w|` with `d = (ŵ·∇) w`
//! * `κ = |ξ·∇ξ|`, `ξ⊥ = ξ·∇ξ / κ`
//! * `α = ξ·(∇u) ξ`

use crate::error::{Error, Result};
use crate::frame::{Frame, PointData};
use crate::vec3::{self, V3};
use serde::Serialize;

/// Tracing stops once `|w|` drops below this fraction of its seed value.
pub const MIN_STRENGTH_RATIO: f64 = 0.1;
/// Default sample spacing as a fraction of the grid spacing.
pub const DEFAULT_SPACING_RATIO: f64 = 0.5;
/// Curvature radius (in grid spacings) below which a trace is truncated.
pub const MIN_CURVATURE_RADIUS: f64 = 2.0;
/// Below this `|ξ·∇ξ|` the principal normal is left undefined.
pub const NORMAL_EPS: f64 = 1e-12;
/// Seeds need `|w| > SEED_EPS · Ω`.
pub const SEED_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Along `+ŵ` from the seed.
    Forward,
    /// Along `-ŵ` from the seed.
    Backward,
    /// Half the target length each way.
    Both,
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "both" => Ok(Direction::Both),
            other => Err(format!("unknown direction `{other}` (forward, backward, both)")),
        }
    }
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    pub target_length: f64,
    pub direction: Direction,
    /// Sample spacing; `None` means `DEFAULT_SPACING_RATIO · h`.
    pub spacing: Option<f64>,
    /// Local error tolerance of the step-doubling integrator.
    pub tolerance: f64,
    /// Stop and record the loop length when the trace returns to its seed.
    pub close_loops: bool,
    /// Put the stronger endpoint at `s = L`.
    pub orient_to_max: bool,
}

impl TraceOptions {
    pub fn new(target_length: f64, direction: Direction) -> Self {
        Self {
            target_length,
            direction,
            spacing: None,
            tolerance: 1e-11,
            close_loops: false,
            orient_to_max: true,
        }
    }
}

/// An arclength-sampled curve with material labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSegment {
    /// Unwrapped physical positions.
    pub points: Vec<V3>,
    /// Arclength, starting at zero.
    pub s: Vec<f64>,
    /// Material label: arclength at the time the segment was seeded.
    pub beta: Vec<f64>,
    pub time: f64,
    /// `+1` if the tangent is `+ŵ`, `-1` if it is `-ŵ`.
    pub orientation: f64,
    /// Set for traced closed loops: total loop length.
    pub loop_length: Option<f64>,
    /// False if tracing hit an unresolved curvature radius.
    pub resolved: bool,
    /// Set when samples left the region where the direction field is defined.
    pub trust_violation: bool,
}

impl CurveSegment {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.loop_length.unwrap_or_else(|| *self.s.last().unwrap_or(&0.0))
    }

    pub fn start(&self) -> V3 {
        self.points[0]
    }

    pub fn end(&self) -> V3 {
        self.points[self.points.len() - 1]
    }

    /// Checks the sampling invariants against grid spacing `h`.
    pub fn check_spacing(&self, h: f64) -> Result<()> {
        for i in 1..self.len() {
            let ds = self.s[i] - self.s[i - 1];
            if !(ds > 0.0) {
                return Err(Error::Trace(format!("arclength not increasing at sample {i}")));
            }
            if ds < 0.25 * h * (1.0 - 1e-9) || ds > h * (1.0 + 1e-9) {
                return Err(Error::Trace(format!(
                    "spacing {ds:.3e} at sample {i} outside [0.25h, h] for h = {h:.3e}"
                )));
            }
            let chord = vec3::dist(self.points[i], self.points[i - 1]);
            if (chord - ds).abs() > 1e-3 * ds {
                return Err(Error::Trace(format!(
                    "chord {chord:.6e} differs from arclength step {ds:.6e} at sample {i}"
                )));
            }
        }
        Ok(())
    }

    /// Same curve traversed the other way.
    pub fn reversed(&self) -> CurveSegment {
        let l = *self.s.last().unwrap_or(&0.0);
        let bl = *self.beta.last().unwrap_or(&0.0);
        CurveSegment {
            points: self.points.iter().rev().copied().collect(),
            s: self.s.iter().rev().map(|v| l - v).collect(),
            beta: self.beta.iter().rev().map(|v| bl - v).collect(),
            orientation: -self.orientation,
            ..self.clone()
        }
    }
}

fn direction(frame: &Frame, x: V3, sigma: f64) -> Result<V3> {
    let w = frame.w(x);
    let m = vec3::norm(w);
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Trace(format!("direction field undefined at {x:?}")));
    }
    Ok(vec3::scale(w, sigma / m))
}

fn rk4(frame: &Frame, x: V3, h: f64, sigma: f64) -> Result<V3> {
    let k1 = direction(frame, x, sigma)?;
    let k2 = direction(frame, vec3::axpy(x, 0.5 * h, k1), sigma)?;
    let k3 = direction(frame, vec3::axpy(x, 0.5 * h, k2), sigma)?;
    let k4 = direction(frame, vec3::axpy(x, h, k3), sigma)?;
    let sum = vec3::add(vec3::add(k1, vec3::scale(k2, 2.0)), vec3::add(vec3::scale(k3, 2.0), k4));
    Ok(vec3::axpy(x, h / 6.0, sum))
}

/// Step-doubling RK4 over a fixed arclength increment.
fn advance(frame: &Frame, x: V3, ds: f64, sigma: f64, tol: f64, depth: u32) -> Result<V3> {
    let full = rk4(frame, x, ds, sigma)?;
    let mid = rk4(frame, x, 0.5 * ds, sigma)?;
    let half = rk4(frame, mid, 0.5 * ds, sigma)?;
    let err = vec3::dist(full, half);
    if err <= tol || depth >= 12 {
        // Richardson extrapolation of the two estimates.
        return Ok(vec3::axpy(half, 1.0 / 15.0, vec3::sub(half, full)));
    }
    let m = advance(frame, x, 0.5 * ds, sigma, tol, depth + 1)?;
    advance(frame, m, 0.5 * ds, sigma, tol, depth + 1)
}

struct OneWay {
    points: Vec<V3>,
    ds: f64,
    resolved: bool,
    loop_length: Option<f64>,
}

fn trace_one_way(
    frame: &Frame,
    seed: V3,
    sigma: f64,
    max_len: f64,
    spacing: f64,
    opts: &TraceOptions,
) -> Result<OneWay> {
    let mut out = OneWay {
        points: Vec::new(),
        ds: spacing,
        resolved: true,
        loop_length: None,
    };
    if max_len <= 0.0 {
        return Ok(out);
    }
    let steps = (max_len / spacing).ceil().max(1.0) as usize;
    let ds = max_len / steps as f64;
    out.ds = ds;
    let w_seed = frame.w_mag(seed);
    let xi_seed = direction(frame, seed, sigma)?;
    let h = frame.spacing();
    let mut x = seed;
    let mut g_prev = 0.0;
    for step in 1..=steps {
        let next = advance(frame, x, ds, sigma, opts.tolerance, 0)?;
        if frame.w_mag(next) < MIN_STRENGTH_RATIO * w_seed {
            break;
        }
        let geo = local_geometry(&frame.sample(next), sigma);
        if geo.kappa * MIN_CURVATURE_RADIUS * h > 1.0 {
            out.resolved = false;
            break;
        }
        if opts.close_loops {
            let d = frame.grid().periodic_delta(seed, next);
            let g = vec3::dot(xi_seed, d);
            if step > 10 && g_prev < 0.0 && g >= 0.0 && vec3::norm(d) < 4.0 * ds {
                let s_prev = (step - 1) as f64 * ds;
                out.loop_length = Some(s_prev + ds * (-g_prev) / (g - g_prev));
                break;
            }
            g_prev = g;
        }
        out.points.push(next);
        x = next;
    }
    Ok(out)
}

/// Traces a segment of the integral curve of `ŵ` through `seed`.
pub fn trace_segment(frame: &Frame, seed: V3, opts: &TraceOptions) -> Result<CurveSegment> {
    if !(opts.target_length.is_finite() && opts.target_length > 0.0) {
        return Err(Error::Precondition(format!(
            "target length must be positive, got {}",
            opts.target_length
        )));
    }
    let w_seed = frame.w_mag(seed);
    if !(w_seed > SEED_EPS * frame.omega_max) {
        return Err(Error::Trace(format!(
            "|w| = {w_seed:.3e} at the seed is below {SEED_EPS:e} of Ω = {:.3e}",
            frame.omega_max
        )));
    }
    let h = frame.spacing();
    let spacing = opts.spacing.unwrap_or(DEFAULT_SPACING_RATIO * h);
    let (back_len, fwd_len) = match opts.direction {
        Direction::Forward => (0.0, opts.target_length),
        Direction::Backward => (opts.target_length, 0.0),
        Direction::Both => (0.5 * opts.target_length, 0.5 * opts.target_length),
    };
    let back = trace_one_way(frame, seed, -1.0, back_len, spacing, opts)?;
    let back_done = back.points.len() as f64 * back.ds;
    let fwd_len = if opts.direction == Direction::Both {
        opts.target_length - back_done
    } else {
        fwd_len
    };
    let fwd = if opts.direction == Direction::Backward {
        None
    } else {
        Some(trace_one_way(frame, seed, 1.0, fwd_len, spacing, opts)?)
    };

    let mut points: Vec<V3> = back.points.iter().rev().copied().collect();
    let mut s: Vec<f64> = (0..back.points.len()).map(|i| i as f64 * back.ds).collect();
    points.push(seed);
    s.push(back_done);
    let mut resolved = back.resolved;
    let mut loop_length = None;
    if let Some(f) = &fwd {
        for (i, p) in f.points.iter().enumerate() {
            points.push(*p);
            s.push(back_done + (i + 1) as f64 * f.ds);
        }
        resolved &= f.resolved;
        loop_length = f.loop_length;
    }
    if points.len() < 3 {
        return Err(Error::Trace("traced segment has fewer than three samples".into()));
    }
    // The backward half was integrated along -ŵ; stored in reverse it runs along +ŵ.
    let orientation = 1.0;
    let mut seg = CurveSegment {
        beta: s.clone(),
        points,
        s,
        time: frame.time,
        orientation,
        loop_length,
        resolved,
        trust_violation: false,
    };
    if opts.orient_to_max && loop_length.is_none() && frame.w_mag(seg.start()) > frame.w_mag(seg.end()) {
        seg = seg.reversed();
    }
    Ok(seg)
}

/// Pointwise geometry for tangent `ξ = σ ŵ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGeometry {
    pub xi: V3,
    /// `ξ·∇ξ`.
    pub curvature_vector: V3,
    pub kappa: f64,
    pub tau: f64,
    pub alpha: f64,
    pub w_mag: f64,
}

pub fn local_geometry(p: &PointData, sigma: f64) -> LocalGeometry {
    let w_mag = vec3::norm(p.w);
    let what = vec3::scale(p.w, 1.0 / w_mag);
    // ∇|w|_j = Σ_i ŵ_i ∂_j w_i
    let grad_mag = vec3::mat_t_vec(&p.grad_w, what);
    let div_w = vec3::trace(&p.grad_w);
    let tau = sigma * (div_w - vec3::dot(what, grad_mag)) / w_mag;
    // d_i = Σ_j ŵ_j ∂_j w_i
    let d = vec3::mat_vec(&p.grad_w, what);
    let curvature_vector = vec3::scale(vec3::axpy(d, -vec3::dot(what, d), what), 1.0 / w_mag);
    let xi = vec3::scale(what, sigma);
    let alpha = vec3::dot(xi, vec3::mat_vec(&p.grad_u, xi));
    LocalGeometry {
        xi,
        curvature_vector,
        kappa: vec3::norm(curvature_vector),
        tau,
        alpha,
        w_mag,
    }
}

/// Per-sample diagnostic record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticSample {
    pub s: f64,
    pub beta: f64,
    pub x: V3,
    pub xi: V3,
    pub xi_perp: V3,
    pub kappa: f64,
    pub tau: f64,
    pub u: V3,
    pub u_xi: f64,
    pub u_xi_perp: f64,
    /// `κ u·ξ⊥`, well defined even where the normal is not.
    pub kappa_u_perp: f64,
    pub omega_mag: f64,
    /// `ξ·(∇u)ξ` from the velocity gradient.
    pub alpha: f64,
    /// `(u·ξ)_s - κ u·ξ⊥` from derivatives along the curve.
    pub alpha_curve: f64,
    pub normal_undefined: bool,
}

/// Segment-level summary at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentDiagnostics {
    pub time: f64,
    /// Segments sharing a lineage are material images of one another.
    pub lineage: u64,
    pub length: f64,
    /// Arclength mean of `|w|`.
    pub q: f64,
    pub int_kappa: f64,
    pub int_tau: f64,
    /// `max |u·ξ⊥|`.
    pub u_max: f64,
    /// `max |u·ξ|`.
    pub v_max: f64,
    /// `max |w|` over the samples.
    pub omega_l: f64,
    /// Global `max |w|`.
    pub omega: f64,
    pub c0: f64,
    /// `max |u|` over the samples.
    pub speed_max: f64,
    pub omega_start: f64,
    pub omega_end: f64,
    pub u_xi_start: f64,
    pub u_xi_end: f64,
    pub xi_start: V3,
    pub x_start: V3,
    pub x_end: V3,
    /// `∫ 2τ|w| u·ξ ds`.
    pub int_stretch: f64,
    /// `∫ κ|w| u·ξ⊥ ds`.
    pub int_bend: f64,
    /// `∫ κ u·ξ⊥ ds`.
    pub int_kappa_u_perp: f64,
    /// Strongest sample sits at `s = L`.
    pub endpoint_max: bool,
    pub resolved: bool,
    pub inviscid: bool,
    pub normal_undefined: usize,
    pub samples: usize,
}

/// Trapezoid weights on possibly nonuniform nodes, with an optional closing
/// interval of length `wrap` from the last node back to the first.
fn trapezoid_weights(s: &[f64], wrap: Option<f64>) -> Vec<f64> {
    let n = s.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = s[i] - s[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    if let Some(h) = wrap {
        w[n - 1] += 0.5 * h;
        w[0] += 0.5 * h;
    }
    w
}

/// Second-order derivative of `f` on nonuniform nodes `s`.
pub fn derivative_along(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let v = (f[1] - f[0]) / (s[1] - s[0]);
            d[0] = v;
            d[1] = v;
        }
        return d;
    }
    for i in 1..n - 1 {
        let h1 = s[i] - s[i - 1];
        let h2 = s[i + 1] - s[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] + h1 / (h2 * (h1 + h2)) * f[i + 1];
    }
    let (h1, h2) = (s[1] - s[0], s[2] - s[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2];
    let (h1, h2) = (s[n - 2] - s[n - 3], s[n - 1] - s[n - 2]);
    d[n - 1] = h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2] + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1];
    d
}

/// Evaluates geometry and velocity at every sample and the segment summary.
pub fn diagnose_segment(seg: &CurveSegment, frame: &Frame) -> Result<(SegmentDiagnostics, Vec<DiagnosticSample>)> {
    let n = seg.len();
    if n < 3 {
        return Err(Error::Precondition("segment needs at least three samples".into()));
    }
    let sigma = seg.orientation;
    let mut samples = Vec::with_capacity(n);
    let mut trust = !seg.trust_violation;
    for i in 0..n {
        let p = frame.sample(seg.points[i]);
        let geo = local_geometry(&p, sigma);
        if !(geo.w_mag > SEED_EPS * frame.omega_max) || !geo.tau.is_finite() {
            trust = false;
        }
        let undefined = !(geo.kappa >= NORMAL_EPS);
        let (kappa, xi_perp) = if undefined {
            (0.0, vec3::ZERO)
        } else {
            (geo.kappa, vec3::scale(geo.curvature_vector, 1.0 / geo.kappa))
        };
        let u_xi = vec3::dot(p.u, geo.xi);
        let kappa_u_perp = if undefined { 0.0 } else { vec3::dot(p.u, geo.curvature_vector) };
        let u_xi_perp = if undefined { 0.0 } else { vec3::dot(p.u, xi_perp) };
        samples.push(DiagnosticSample {
            s: seg.s[i],
            beta: seg.beta[i],
            x: seg.points[i],
            xi: geo.xi,
            xi_perp,
            kappa,
            tau: geo.tau,
            u: p.u,
            u_xi,
            u_xi_perp,
            kappa_u_perp,
            omega_mag: geo.w_mag,
            alpha: geo.alpha,
            alpha_curve: 0.0,
            normal_undefined: undefined,
        });
    }
    if !trust {
        return Err(Error::Trace(
            "segment left the region where the direction field is defined".into(),
        ));
    }
    let uxi: Vec<f64> = samples.iter().map(|d| d.u_xi).collect();
    let duxi = derivative_along(&seg.s, &uxi);
    for (d, dv) in samples.iter_mut().zip(&duxi) {
        d.alpha_curve = dv - d.kappa_u_perp;
    }

    let wrap = seg.loop_length.map(|l| l - seg.s[n - 1]);
    let wts = trapezoid_weights(&seg.s, wrap);
    let integrate = |f: &dyn Fn(&DiagnosticSample) -> f64| -> f64 {
        samples.iter().zip(&wts).map(|(d, w)| w * f(d)).sum()
    };
    let length = seg.length();
    let q = integrate(&|d| d.omega_mag) / length;
    let omega_l = samples.iter().map(|d| d.omega_mag).fold(0.0, f64::max);
    let omega = frame.omega_max.max(omega_l);
    let first = &samples[0];
    let last = &samples[n - 1];
    let diag = SegmentDiagnostics {
        time: frame.time,
        lineage: 0,
        length,
        q,
        int_kappa: integrate(&|d| d.kappa.abs()),
        int_tau: integrate(&|d| d.tau.abs()),
        u_max: samples.iter().map(|d| d.u_xi_perp.abs()).fold(0.0, f64::max),
        v_max: samples.iter().map(|d| d.u_xi.abs()).fold(0.0, f64::max),
        omega_l,
        omega,
        c0: omega_l / omega,
        speed_max: samples.iter().map(|d| vec3::norm(d.u)).fold(0.0, f64::max),
        omega_start: first.omega_mag,
        omega_end: last.omega_mag,
        u_xi_start: first.u_xi,
        u_xi_end: last.u_xi,
        xi_start: first.xi,
        x_start: first.x,
        x_end: last.x,
        int_stretch: integrate(&|d| 2.0 * d.tau * d.omega_mag * d.u_xi),
        int_bend: integrate(&|d| d.omega_mag * d.kappa_u_perp),
        int_kappa_u_perp: integrate(&|d| d.kappa_u_perp),
        endpoint_max: last.omega_mag >= omega_l * (1.0 - 1e-9),
        resolved: seg.resolved && frame.resolved,
        inviscid: frame.inviscid,
        normal_undefined: samples.iter().filter(|d| d.normal_undefined).count(),
        samples: n,
    };
    Ok((diag, samples))
}

/// Checks `|w(s)| = |w(0)| exp(-∫₀ˢ τ)` along a diagnosed curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauRelation {
    /// `max_i | |w_0| e^{-∫τ} - |w_i| | / |w_i|`.
    pub max_deviation: f64,
    /// `max |w| / min |w|` along the curve.
    pub ratio: f64,
    /// `exp(∫|τ| ds)`.
    pub bound: f64,
    /// Pointwise `|d|w|/ds + τ|w||`, relative to `max(|d|w|/ds|, |w|/L)`.
    pub pointwise_residual: f64,
}

impl TauRelation {
    /// `max|w| <= exp(∫|τ|) min|w|` within relative slack `tol`.
    pub fn comparability_holds(&self, tol: f64) -> bool {
        self.ratio <= self.bound * (1.0 + tol)
    }
}

pub fn tau_relation(samples: &[DiagnosticSample]) -> TauRelation {
    let n = samples.len();
    let s: Vec<f64> = samples.iter().map(|d| d.s).collect();
    let w: Vec<f64> = samples.iter().map(|d| d.omega_mag).collect();
    let tau: Vec<f64> = samples.iter().map(|d| d.tau).collect();
    let cum = Spline::new(&s, &tau).cumulative_integral();
    let mut max_dev = 0.0f64;
    let mut int_abs = 0.0;
    for i in 0..n {
        if i > 0 {
            int_abs += 0.5 * (s[i] - s[i - 1]) * (tau[i].abs() + tau[i - 1].abs());
        }
        let pred = w[0] * (-cum[i]).exp();
        max_dev = max_dev.max((pred - w[i]).abs() / w[i]);
    }
    let dw = derivative_along(&s, &w);
    let length = s[n - 1] - s[0];
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = dw.iter().fold(wmax / length.max(f64::MIN_POSITIVE), |m, v| m.max(v.abs()));
    let resid = (0..n)
        .map(|i| (dw[i] + samples[i].tau * w[i]).abs())
        .fold(0.0, f64::max);
    TauRelation {
        max_deviation: max_dev,
        ratio: wmax / wmin,
        bound: int_abs.exp(),
        pointwise_residual: resid / scale,
    }
}

/// Natural cubic spline through `(t_i, y_i)`.
#[derive(Debug, Clone)]
struct Spline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(t: &[f64], y: &[f64]) -> Self {
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal solve for interior second derivatives.
            let k = n - 2;
            let mut a = vec![0.0; k];
            let mut b = vec![0.0; k];
            let mut c = vec![0.0; k];
            let mut r = vec![0.0; k];
            for j in 0..k {
                let i = j + 1;
                let h0 = t[i] - t[i - 1];
                let h1 = t[i + 1] - t[i];
                a[j] = h0;
                b[j] = 2.0 * (h0 + h1);
                c[j] = h1;
                r[j] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for j in 1..k {
                let f = a[j] / b[j - 1];
                b[j] -= f * c[j - 1];
                r[j] -= f * r[j - 1];
            }
            let mut x = vec![0.0; k];
            x[k - 1] = r[k - 1] / b[k - 1];
            for j in (0..k - 1).rev() {
                x[j] = (r[j] - c[j] * x[j + 1]) / b[j];
            }
            m[1..n - 1].copy_from_slice(&x);
        }
        Self {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    /// Exact integral of the spline from the first knot to each knot.
    fn cumulative_integral(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.t.len()];
        for i in 1..self.t.len() {
            let h = self.t[i] - self.t[i - 1];
            out[i] = out[i - 1] + 0.5 * h * (self.y[i - 1] + self.y[i]) - h * h * h * (self.m[i - 1] + self.m[i]) / 24.0;
        }
        out
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.t.len();
        match self.t.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.interval(t);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - t) / h;
        let b = (t - self.t[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        (v, d)
    }
}

/// Spline representation of a space curve plus a scalar label.
#[derive(Debug, Clone)]
pub struct CurveSpline {
    param: Vec<f64>,
    coords: [Spline; 3],
    label: Spline,
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

impl CurveSpline {
    /// Parameterizes by `param` (strictly increasing).
    pub fn new(param: &[f64], points: &[V3], label: &[f64]) -> Self {
        let comp = |c: usize| Spline::new(param, &points.iter().map(|p| p[c]).collect::<Vec<_>>());
        Self {
            param: param.to_vec(),
            coords: [comp(0), comp(1), comp(2)],
            label: Spline::new(param, label),
        }
    }

    /// Parameterizes by cumulative chord length.
    pub fn by_chord(points: &[V3], label: &[f64]) -> Self {
        let mut c = vec![0.0; points.len()];
        for i in 1..points.len() {
            c[i] = c[i - 1] + vec3::dist(points[i], points[i - 1]);
        }
        Self::new(&c, points, label)
    }

    pub fn point(&self, t: f64) -> V3 {
        [self.coords[0].eval(t).0, self.coords[1].eval(t).0, self.coords[2].eval(t).0]
    }

    fn speed(&self, t: f64) -> f64 {
        vec3::norm([self.coords[0].eval(t).1, self.coords[1].eval(t).1, self.coords[2].eval(t).1])
    }

    pub fn label(&self, t: f64) -> f64 {
        self.label.eval(t).0
    }

    fn arc(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GAUSS5.iter().map(|(x, w)| w * self.speed(mid + half * x)).sum::<f64>() * half
    }

    /// Cumulative arclength at each knot.
    pub fn knot_arclength(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.param.len()];
        for i in 1..self.param.len() {
            s[i] = s[i - 1] + self.arc(self.param[i - 1], self.param[i]);
        }
        s
    }

    /// Parameter value at arclength `target` inside knot interval `i`.
    fn invert(&self, i: usize, s_knot: f64, target: f64) -> f64 {
        let (a, b) = (self.param[i], self.param[i + 1]);
        let seg = self.arc(a, b);
        let mut t = a + (b - a) * ((target - s_knot) / seg).clamp(0.0, 1.0);
        for _ in 0..8 {
            let f = s_knot + self.arc(a, t) - target;
            let d = self.speed(t);
            if d <= 0.0 {
                break;
            }
            let step = f / d;
            t = (t - step).clamp(a, b);
            if step.abs() < 1e-15 * (b - a).max(1.0) {
                break;
            }
        }
        t
    }

    /// Resamples at `count + 1` uniform arclength stations.
    pub fn resample(&self, count: usize) -> (Vec<V3>, Vec<f64>, Vec<f64>) {
        let knots = self.knot_arclength();
        let total = *knots.last().unwrap_or(&0.0);
        let nk = self.param.len();
        let mut pts = Vec::with_capacity(count + 1);
        let mut s = Vec::with_capacity(count + 1);
        let mut labels = Vec::with_capacity(count + 1);
        let mut i = 0;
        for j in 0..=count {
            let target = total * j as f64 / count as f64;
            let t = if j == 0 {
                self.param[0]
            } else if j == count {
                self.param[nk - 1]
            } else {
                while i + 2 < nk && knots[i + 1] < target {
                    i += 1;
                }
                self.invert(i, knots[i], target)
            };
            pts.push(self.point(t));
            labels.push(self.label(t));
            s.push(target);
        }
        (pts, s, labels)
    }
}

/// Moves every sample with the flow (Heun) and resamples to uniform arclength.
///
/// `u_now` is the velocity at the segment's time, `u_next` at `time + dt`.
pub fn advect_segment(
    seg: &CurveSegment,
    u_now: impl Fn(V3) -> V3,
    u_next: impl Fn(V3) -> V3,
    dt: f64,
    spacing: f64,
) -> Result<CurveSegment> {
    advect_segment_substeps(seg, u_now, u_next, dt, spacing, 1)
}

/// As [`advect_segment`], splitting `dt` into `substeps` Heun steps.
pub fn advect_segment_substeps(
    seg: &CurveSegment,
    u_now: impl Fn(V3) -> V3,
    u_next: impl Fn(V3) -> V3,
    dt: f64,
    spacing: f64,
    substeps: usize,
) -> Result<CurveSegment> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::Precondition(format!("advection step must be >= 0, got {dt}")));
    }
    if seg.len() < 3 {
        return Err(Error::Precondition("segment needs at least three samples".into()));
    }
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    // Velocity is linear in time between the two snapshots.
    let u_at = |x: V3, theta: f64| {
        if theta <= 0.0 {
            u_now(x)
        } else if theta >= 1.0 {
            u_next(x)
        } else {
            vec3::add(vec3::scale(u_now(x), 1.0 - theta), vec3::scale(u_next(x), theta))
        }
    };
    let moved: Vec<V3> = seg
        .points
        .iter()
        .map(|&x0| {
            let mut x = x0;
            for k in 0..substeps {
                let t0 = k as f64 / substeps as f64;
                let t1 = (k + 1) as f64 / substeps as f64;
                let k1 = u_at(x, t0);
                let k2 = u_at(vec3::axpy(x, h, k1), t1);
                x = vec3::axpy(x, 0.5 * h, vec3::add(k1, k2));
            }
            x
        })
        .collect();
    if moved.iter().any(|p| !vec3::is_finite(*p)) {
        return Err(Error::NonFinite("advected curve position".into()));
    }
    let spline = CurveSpline::by_chord(&moved, &seg.beta);
    let length = *spline.knot_arclength().last().unwrap_or(&0.0);
    // Keep the sample count while the spacing stays near the target so that
    // quadrature error varies smoothly along a lineage.
    let previous = seg.len() - 1;
    let ratio = length / previous as f64 / spacing;
    let count = if (0.7..=1.4).contains(&ratio) {
        previous
    } else {
        (length / spacing).ceil().max(2.0) as usize
    };
    let (points, s, beta) = spline.resample(count);
    Ok(CurveSegment {
        points,
        s,
        beta,
        time: seg.time + dt,
        orientation: seg.orientation,
        loop_length: None,
        resolved: seg.resolved,
        trust_violation: seg.trust_violation,
    })
}

/// Measured `ds/dβ` against `|w(x(β,t))| / |w(x(β,T₀))|` at interior samples.
///
/// `reference` is the segment at the labeling time, where `β = s`.
pub fn stretch_check(
    reference: &CurveSegment,
    current: &CurveSegment,
    w_ref: impl Fn(V3) -> f64,
    w_now: impl Fn(V3) -> f64,
) -> Vec<(f64, f64)> {
    let spline = CurveSpline::new(&reference.beta, &reference.points, &reference.s);
    let ds_dbeta = derivative_along(&current.beta, &current.s);
    (1..current.len() - 1)
        .map(|i| {
            let origin = spline.point(current.beta[i]);
            (ds_dbeta[i], w_now(current.points[i]) / w_ref(origin))
        })
        .collect()
}

/// Hausdorff distance between two sampled curves.
pub fn hausdorff(a: &[V3], b: &[V3]) -> f64 {
    let one = |p: &[V3], q: &[V3]| {
        p.iter()
            .map(|x| q.iter().map(|y| vec3::dist(*x, *y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Polyline distance from `p` to the closest point of `curve`.
pub fn distance_to_polyline(p: V3, curve: &[V3]) -> f64 {
    curve
        .windows(2)
        .map(|w| {
            let d = vec3::sub(w[1], w[0]);
            let len2 = vec3::dot(d, d);
            let t = if len2 > 0.0 {
                (vec3::dot(vec3::sub(p, w[0]), d) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            vec3::dist(p, vec3::axpy(w[0], t, d))
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::EulerInitial;
    use crate::grid::Grid;
    use crate::interp::InterpMethod;

    #[test]
    fn spline_reproduces_cubic_interior() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|v| v.sin()).collect();
        let s = Spline::new(&t, &y);
        let (v, d) = s.eval(0.95);
        assert!((v - 0.95f64.sin()).abs() < 1e-5);
        assert!((d - 0.95f64.cos()).abs() < 1e-3);
    }

    #[test]
    fn derivative_along_is_exact_for_quadratics() {
        let s = [0.0, 0.1, 0.25, 0.3, 0.5];
        let f: Vec<f64> = s.iter().map(|v| 3.0 * v * v - v + 1.0).collect();
        let d = derivative_along(&s, &f);
        for (x, dv) in s.iter().zip(d) {
            assert!((dv - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_line_in_uniform_field() {
        let g = Grid::cube(16).unwrap();
        let w = EulerInitial::Uniform { omega: [0.0, 0.0, 1.0] }.sample(&g).unwrap();
        let f = Frame::from_euler(&w, 0.0, InterpMethod::Spectral, true).unwrap();
        let seg = trace_segment(&f, [1.0, 2.0, 0.5], &TraceOptions::new(1.0, Direction::Forward)).unwrap();
        assert!((seg.length() - 1.0).abs() < 1e-12);
        seg.check_spacing(f.spacing()).unwrap();
        for p in &seg.points {
            assert!((p[0] - 1.0).abs() < 1e-14 && (p[1] - 2.0).abs() < 1e-14);
        }
        let (d, _) = diagnose_segment(&seg, &f).unwrap();
        assert!(d.int_kappa <= 1e-8 && d.int_tau <= 1e-8);
        assert!((d.q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rigid_translation_preserves_length() {
        let g = Grid::cube(16).unwrap();
        let w = EulerInitial::Abc { a: 1.0, b: 1.0, c: 1.0 }.sample(&g).unwrap();
        let f = Frame::from_euler(&w, 0.0, InterpMethod::Spectral, true).unwrap();
        let seg = trace_segment(&f, [1.0, 2.0, 0.5], &TraceOptions::new(1.0, Direction::Both)).unwrap();
        let shift = [0.3, -0.2, 0.1];
        let h = 0.5 * f.spacing();
        let moved = advect_segment(&seg, |_| shift, |_| shift, 1.0, h).unwrap();
        let still = advect_segment(&seg, |_| vec3::ZERO, |_| vec3::ZERO, 0.5, h).unwrap();
        assert!((moved.length() - still.length()).abs() < 1e-12);
        // Resampled spline length agrees with the traced arclength to interpolation error.
        assert!((still.length() - seg.length()).abs() < 1e-5);
        assert!(vec3::dist(moved.start(), vec3::add(seg.start(), shift)) < 1e-14);
        assert!(hausdorff(&still.points, &seg.points) < 1e-5);
    }

    #[test]
    fn reversed_is_involution() {
        let seg = CurveSegment {
            points: vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            s: vec![0.0, 1.0, 2.0],
            beta: vec![0.0, 1.0, 2.0],
            time: 0.0,
            orientation: 1.0,
            loop_length: None,
            resolved: true,
            trust_violation: false,
        };
        assert_eq!(seg.reversed().reversed(), seg);
        assert_eq!(seg.reversed().s, vec![0.0, 1.0, 2.0]);
    }
}
