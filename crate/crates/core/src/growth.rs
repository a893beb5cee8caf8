//! Growth estimates for the maximum of `|w|` driven by segment diagnostics:
//! the averaged-strength identity term by term, the single- and
//! double-exponential envelopes with measured constants, and the
//! critical-rate and BKM monitors.

use crate::curve::SegmentDiagnostics;
use crate::error::{Error, Result};
use crate::vec3;
use serde::Serialize;

/// Constants entering the growth envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Lower bound on `Ω_L / Ω`.
    pub strength_fraction: f64,
    /// Bound on both `∫|κ| ds` and `∫|τ| ds`.
    pub geometry: f64,
    /// Bound on `|ẋ₀·ξ₀| / V`.
    pub endpoint_speed: f64,
    /// Bound on `max|u| / log Ω` on the segment.
    pub velocity_log: f64,
}

impl BoundConstants {
    pub fn new(strength_fraction: f64, geometry: f64, endpoint_speed: f64, velocity_log: f64) -> Result<Self> {
        if !(strength_fraction > 0.0 && strength_fraction <= 1.0) {
            return Err(Error::Precondition(format!(
                "strength fraction must lie in (0, 1], got {strength_fraction}"
            )));
        }
        for (name, v) in [
            ("geometry", geometry),
            ("endpoint speed", endpoint_speed),
            ("velocity log", velocity_log),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Precondition(format!("{name} constant must be >= 0, got {v}")));
            }
        }
        Ok(Self {
            strength_fraction,
            geometry,
            endpoint_speed,
            velocity_log,
        })
    }

    /// `C₁ = exp(C₀)`.
    pub fn amplification(&self) -> f64 {
        self.geometry.exp()
    }

    /// Coefficient of `U`: `C₀(2C₁ - 1)`.
    pub fn normal_coefficient(&self) -> f64 {
        self.geometry * (2.0 * self.amplification() - 1.0)
    }

    /// Coefficient of `V`: `2C₀C₁ + (C₁ - 1)(C_l + 1) + 2C₁`.
    pub fn tangential_coefficient(&self) -> f64 {
        let c1 = self.amplification();
        2.0 * self.geometry * c1 + (c1 - 1.0) * (self.endpoint_speed + 1.0) + 2.0 * c1
    }

    /// `C = C_u max(C_U, C_V)` of the double-exponential envelope.
    pub fn double_exponential_rate(&self) -> f64 {
        self.velocity_log * self.normal_coefficient().max(self.tangential_coefficient())
    }
}

/// Second-order derivative at the middle of three nonuniform samples.
pub fn centered_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// The four source groups of the averaged-strength identity at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityRecord {
    pub time: f64,
    pub lineage: u64,
    pub dq_dt: f64,
    /// Stretching and bending integrals.
    pub i1: f64,
    /// Tangential-velocity jump across the segment.
    pub i2: f64,
    /// Endpoint motion.
    pub i3: f64,
    /// Length change.
    pub i4: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub length_rate: f64,
    /// `ẋ₀·ξ₀`.
    pub endpoint_tangential_speed: f64,
    /// `I₄ <= 0` whenever `L_t <= 0`.
    pub i4_sign_ok: bool,
    /// Each `|I_k|` within its bound from the measured constants.
    pub term_bounds_ok: bool,
}

impl IdentityRecord {
    pub fn sum(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4
    }
}

/// Evaluates the identity at `mid`, using `prev` and `next` for time derivatives.
pub fn lemma_terms(
    prev: &SegmentDiagnostics,
    mid: &SegmentDiagnostics,
    next: &SegmentDiagnostics,
) -> Result<IdentityRecord> {
    if prev.lineage != mid.lineage || next.lineage != mid.lineage {
        return Err(Error::NotLinked(format!(
            "lineages {}, {}, {} around t = {}",
            prev.lineage, mid.lineage, next.lineage, mid.time
        )));
    }
    if !(prev.time < mid.time && mid.time < next.time) {
        return Err(Error::Precondition(format!(
            "records must be strictly increasing in time: {}, {}, {}",
            prev.time, mid.time, next.time
        )));
    }
    let t = [prev.time, mid.time, next.time];
    let dq_dt = centered_derivative(t, [prev.q, mid.q, next.q]);
    let length_rate = centered_derivative(t, [prev.length, mid.length, next.length]);
    let mut x0_dot = [0.0; 3];
    for (c, v) in x0_dot.iter_mut().enumerate() {
        *v = centered_derivative(t, [prev.x_start[c], mid.x_start[c], next.x_start[c]]);
    }
    let endpoint_tangential_speed = vec3::dot(x0_dot, mid.xi_start);

    let l = mid.length;
    let w_end = mid.omega_end;
    let w_start = mid.omega_start;
    // ∫κ(|w| - |w_L|) u·ξ⊥ = ∫κ|w|u·ξ⊥ - |w_L| ∫κ u·ξ⊥
    let i1 = (mid.int_stretch - 2.0 * mid.int_bend + w_end * mid.int_kappa_u_perp) / l;
    let i2 = (mid.u_xi_end - mid.u_xi_start) * w_end / l;
    let i3 = (w_end - w_start) * (endpoint_tangential_speed + mid.u_xi_start) / l;
    let i4 = length_rate / l * (w_end - mid.q);
    let sum = i1 + i2 + i3 + i4;
    let residual = dq_dt - sum;
    let scale = dq_dt
        .abs()
        .max(mid.q / l * (mid.u_max + mid.v_max))
        .max(f64::MIN_POSITIVE);

    let slack = 1e-9 * mid.q / l * (mid.u_max + mid.v_max + 1.0);
    let i4_sign_ok = length_rate > 0.0 || i4 <= slack;
    let c0 = mid.int_kappa.max(mid.int_tau);
    let c1 = c0.exp();
    let cl = if mid.v_max > 0.0 {
        endpoint_tangential_speed.abs() / mid.v_max
    } else {
        0.0
    };
    let (u, v, q) = (mid.u_max, mid.v_max, mid.q);
    let tol = 1e-6 * q / l * (u + v) + slack;
    let term_bounds_ok = i1.abs() <= (2.0 * c0 * c1 * v + c0 * c1 * u + c0 * (c1 - 1.0) * u) * q / l + tol
        && i2.abs() <= 2.0 * c1 * v * q / l + tol
        && i3.abs() <= (c1 - 1.0) * (cl + 1.0) * v * q / l + tol;

    Ok(IdentityRecord {
        time: mid.time,
        lineage: mid.lineage,
        dq_dt,
        i1,
        i2,
        i3,
        i4,
        residual,
        relative_residual: residual.abs() / scale,
        length_rate,
        endpoint_tangential_speed,
        i4_sign_ok,
        term_bounds_ok,
    })
}

/// Identity records at every interior time whose neighbours share its lineage.
pub fn identity_series(series: &[SegmentDiagnostics]) -> Vec<IdentityRecord> {
    series
        .windows(3)
        .filter_map(|w| lemma_terms(&w[0], &w[1], &w[2]).ok())
        .collect()
}

/// Hypotheses checked at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AssumptionFlags {
    pub kappa: bool,
    pub tau: bool,
    pub endpoint_speed: bool,
    pub strength_fraction: bool,
    /// `|w|` at `s = L` is the segment maximum.
    pub endpoint_max: bool,
    pub resolved: bool,
    pub inviscid: bool,
    /// Same material lineage as the window start.
    pub linked: bool,
}

impl AssumptionFlags {
    pub fn all(&self) -> bool {
        self.kappa
            && self.tau
            && self.endpoint_speed
            && self.strength_fraction
            && self.endpoint_max
            && self.resolved
            && self.inviscid
            && self.linked
    }

    /// Names of the flags that did not hold.
    pub fn failed(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (ok, name) in [
            (self.kappa, "kappa"),
            (self.tau, "tau"),
            (self.endpoint_speed, "endpoint_speed"),
            (self.strength_fraction, "strength_fraction"),
            (self.endpoint_max, "endpoint_max"),
            (self.resolved, "resolved"),
            (self.inviscid, "inviscid"),
            (self.linked, "linked"),
        ] {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

/// Where constants come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstantsSource {
    /// Running extrema of the measured quantities over `[T₀, t]`.
    Measured,
    Fixed(BoundConstants),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub time: f64,
    pub omega: f64,
    pub single_exponential: f64,
    /// `None` when `Ω <= e` somewhere on `[T₀, t]`.
    pub double_exponential: Option<f64>,
    pub bkm_integral: f64,
    pub constants: BoundConstants,
    pub flags: AssumptionFlags,
    /// Flags held at every time on `[T₀, t]`.
    pub window_clean: bool,
    pub single_dominates: bool,
    pub double_dominates: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthEnvelope {
    pub points: Vec<EnvelopePoint>,
    pub hypotheses_violated: bool,
    pub note: Option<String>,
}

impl GrowthEnvelope {
    /// Output times on clean windows where an envelope falls below `Ω`.
    pub fn violations(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.window_clean && (!p.single_dominates || p.double_dominates == Some(false)))
            .map(|p| p.time)
            .collect()
    }

    pub fn clean_points(&self) -> usize {
        self.points.iter().filter(|p| p.window_clean).count()
    }
}

fn trapezoid_step(t0: f64, t1: f64, f0: f64, f1: f64) -> f64 {
    0.5 * (t1 - t0) * (f0 + f1)
}

/// Endpoint tangential speed `ẋ₀·ξ₀` at each record, by finite differences
/// within a lineage. One-sided at lineage boundaries.
pub fn endpoint_speeds(series: &[SegmentDiagnostics]) -> Vec<Option<f64>> {
    let n = series.len();
    (0..n)
        .map(|i| {
            let same = |j: usize| series[j].lineage == series[i].lineage;
            let (a, b, c) = if i > 0 && i + 1 < n && same(i - 1) && same(i + 1) {
                (i - 1, i, i + 1)
            } else if i + 2 < n && same(i + 1) && same(i + 2) {
                (i, i + 1, i + 2)
            } else if i >= 2 && same(i - 1) && same(i - 2) {
                (i - 2, i - 1, i)
            } else {
                return None;
            };
            let t = [series[a].time, series[b].time, series[c].time];
            let h1 = t[1] - t[0];
            let h2 = t[2] - t[1];
            // Derivative of the quadratic interpolant evaluated at t[i].
            let at = series[i].time;
            let mut v = [0.0; 3];
            for (k, vk) in v.iter_mut().enumerate() {
                let f = [series[a].x_start[k], series[b].x_start[k], series[c].x_start[k]];
                let d01 = (f[1] - f[0]) / h1;
                let d12 = (f[2] - f[1]) / h2;
                let curv = (d12 - d01) / (h1 + h2);
                *vk = d01 + curv * (2.0 * at - t[0] - t[1]);
            }
            Some(vec3::dot(v, series[i].xi_start))
        })
        .collect()
}

/// Single- and double-exponential envelopes over a diagnostics series.
///
/// Every record is one output time; `T₀` is the first record.
pub fn growth_envelope(series: &[SegmentDiagnostics], source: ConstantsSource) -> Result<GrowthEnvelope> {
    if series.is_empty() {
        return Err(Error::Precondition("empty diagnostics series".into()));
    }
    let speeds = endpoint_speeds(series);
    let q0 = series[0].q;
    let lineage0 = series[0].lineage;
    let e = std::f64::consts::E;

    let mut run_geom = 0.0f64;
    let mut run_frac = 1.0f64;
    let mut run_cl = 0.0f64;
    let mut run_cu = 0.0f64;
    let mut int_v = 0.0;
    let mut int_u = 0.0;
    let mut int_inv_l = 0.0;
    let mut bkm = 0.0;
    let mut log_ok = true;
    let mut clean = true;
    let mut violated = false;
    let mut points = Vec::with_capacity(series.len());

    for (i, d) in series.iter().enumerate() {
        if i > 0 {
            let p = &series[i - 1];
            int_v += trapezoid_step(p.time, d.time, p.v_max / p.length, d.v_max / d.length);
            int_u += trapezoid_step(p.time, d.time, p.u_max / p.length, d.u_max / d.length);
            int_inv_l += trapezoid_step(p.time, d.time, 1.0 / p.length, 1.0 / d.length);
            bkm += trapezoid_step(p.time, d.time, p.omega, d.omega);
        }
        let cl_here = match (speeds[i], d.v_max > 0.0) {
            (Some(s), true) => s.abs() / d.v_max,
            (Some(s), false) if s.abs() > 0.0 => f64::INFINITY,
            _ => 0.0,
        };
        run_geom = run_geom.max(d.int_kappa).max(d.int_tau);
        run_frac = run_frac.min(d.c0);
        run_cl = run_cl.max(cl_here);
        if d.omega > e {
            run_cu = run_cu.max(d.speed_max / d.omega.ln());
        } else {
            log_ok = false;
        }
        let constants = match source {
            ConstantsSource::Measured => BoundConstants {
                strength_fraction: run_frac,
                geometry: run_geom,
                endpoint_speed: run_cl,
                velocity_log: run_cu,
            },
            ConstantsSource::Fixed(c) => c,
        };
        let flags = AssumptionFlags {
            kappa: d.int_kappa <= constants.geometry,
            tau: d.int_tau <= constants.geometry,
            endpoint_speed: cl_here <= constants.endpoint_speed,
            strength_fraction: d.c0 >= constants.strength_fraction && constants.strength_fraction > 0.0,
            endpoint_max: d.endpoint_max,
            resolved: d.resolved,
            inviscid: d.inviscid,
            linked: d.lineage == lineage0,
        };
        clean &= flags.all();
        violated |= !flags.all();

        let c1 = constants.amplification();
        let single = q0 / constants.strength_fraction
            * (constants.geometry
                + constants.tangential_coefficient() * int_v
                + constants.normal_coefficient() * int_u)
                .exp();
        let double = if log_ok {
            let c = constants.double_exponential_rate();
            Some(((c1 * q0 / constants.strength_fraction).ln() * (c * int_inv_l).exp()).exp())
        } else {
            None
        };
        // Relative slack for round-off in the measured constants.
        let slack = 1.0 + 1e-9;
        points.push(EnvelopePoint {
            time: d.time,
            omega: d.omega,
            single_exponential: single,
            double_exponential: double,
            bkm_integral: bkm,
            constants,
            flags,
            window_clean: clean,
            single_dominates: d.omega <= single * slack,
            double_dominates: double.map(|b| d.omega <= b * slack),
        });
    }
    let note = (!log_ok).then(|| "double-exponential envelope skipped where Ω <= e".to_string());
    Ok(GrowthEnvelope {
        points,
        hypotheses_violated: violated,
        note,
    })
}

/// Integrates `dQ/dt = (C/L) Q (log Q + log(C₁/c₀))` with RK4.
pub fn integrate_log_growth(
    q0: f64,
    log_ratio: f64,
    rate: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    steps: usize,
) -> f64 {
    let h = (t1 - t0) / steps as f64;
    let f = |t: f64, q: f64| rate(t) * q * (q.ln() + log_ratio);
    let mut q = q0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, q);
        let k2 = f(t + 0.5 * h, q + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, q + 0.5 * h * k2);
        let k4 = f(t + h, q + h * k3);
        q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    q
}

/// Least-squares fit of `log Ω = a - p log(T - t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub singular_time: f64,
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual in `log Ω`.
    pub rms: f64,
}

pub fn fit_power_law(times: &[f64], omega: &[f64], singular_time: f64) -> Result<PowerLawFit> {
    if times.len() != omega.len() || times.len() < 3 {
        return Err(Error::Precondition("power-law fit needs at least three samples".into()));
    }
    let last = times[times.len() - 1];
    if singular_time <= last {
        return Err(Error::Precondition(format!(
            "candidate singular time {singular_time} must exceed the window end {last}"
        )));
    }
    let x: Vec<f64> = times.iter().map(|t| (singular_time - t).ln()).collect();
    let y: Vec<f64> = omega
        .iter()
        .map(|w| {
            if *w > 0.0 {
                Ok(w.ln())
            } else {
                Err(Error::Precondition("Ω must be positive for a power-law fit".into()))
            }
        })
        .collect::<Result<_>>()?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Precondition("degenerate time samples".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        singular_time,
        exponent: -slope,
        prefactor: intercept.exp(),
        rms,
    })
}

/// Fits both `T` and `p`, minimizing the log residual over `T` past the window.
pub fn fit_singular_time(times: &[f64], omega: &[f64]) -> Result<PowerLawFit> {
    if times.len() < 4 {
        return Err(Error::Precondition("fitting T needs at least four samples".into()));
    }
    let last = times[times.len() - 1];
    let span = (last - times[0]).max(f64::MIN_POSITIVE);
    let cost = |lt: f64| fit_power_law(times, omega, last + lt.exp()).map(|f| f.rms).unwrap_or(f64::INFINITY);
    // Scan log(T - t_end) on a coarse grid, then refine by golden section.
    let lo = (span * 1e-6).ln();
    let hi = (span * 1e3).ln();
    let n = 200;
    let mut best = lo;
    let mut best_cost = f64::INFINITY;
    for k in 0..=n {
        let v = lo + (hi - lo) * k as f64 / n as f64;
        let c = cost(v);
        if c < best_cost {
            best_cost = c;
            best = v;
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best - step, best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..100 {
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    fit_power_law(times, omega, last + (0.5 * (a + b)).exp())
}

/// `∫Ω dt` over the data plus the fitted tail to `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BkmEstimate {
    /// Trapezoid integral over the sampled window.
    pub sampled: f64,
    /// Tail `∫_{t_end}^{T} A (T - t)^{-p} dt`; infinite when `p >= 1`.
    pub tail: f64,
    pub divergent: bool,
}

impl BkmEstimate {
    pub fn total(&self) -> f64 {
        self.sampled + self.tail
    }
}

pub fn bkm_integral(times: &[f64], omega: &[f64], fit: &PowerLawFit) -> BkmEstimate {
    let sampled: f64 = (1..times.len())
        .map(|i| trapezoid_step(times[i - 1], times[i], omega[i - 1], omega[i]))
        .sum();
    let gap = fit.singular_time - times[times.len() - 1];
    let p = fit.exponent;
    let divergent = p >= 1.0;
    let tail = if divergent {
        f64::INFINITY
    } else {
        fit.prefactor * gap.powf(1.0 - p) / (1.0 - p)
    };
    BkmEstimate {
        sampled,
        tail,
        divergent,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalReport {
    pub fit: PowerLawFit,
    /// `(C_V V + C_U U)(T - t) / L` per record.
    pub ratio: Vec<f64>,
    pub sup_ratio: f64,
    /// `sup r < C_w`.
    pub below_critical: bool,
    pub bkm: BkmEstimate,
}

/// Critical-rate monitor. `singular_time = None` fits `T` from `Ω(t)`.
pub fn critical_case_monitor(
    series: &[SegmentDiagnostics],
    constants: &BoundConstants,
    critical_weight: f64,
    singular_time: Option<f64>,
) -> Result<CriticalReport> {
    if !(critical_weight > 0.0 && critical_weight < 1.0) {
        return Err(Error::Precondition(format!(
            "critical weight must lie in (0, 1), got {critical_weight}"
        )));
    }
    let times: Vec<f64> = series.iter().map(|d| d.time).collect();
    let omega: Vec<f64> = series.iter().map(|d| d.omega).collect();
    let fit = match singular_time {
        Some(t) => fit_power_law(&times, &omega, t)?,
        None => fit_singular_time(&times, &omega)?,
    };
    let cv = constants.tangential_coefficient();
    let cu = constants.normal_coefficient();
    let ratio: Vec<f64> = series
        .iter()
        .map(|d| (cv * d.v_max + cu * d.u_max) * (fit.singular_time - d.time) / d.length)
        .collect();
    let sup_ratio = ratio.iter().copied().fold(0.0, f64::max);
    Ok(CriticalReport {
        bkm: bkm_integral(&times, &omega, &fit),
        fit,
        ratio,
        sup_ratio,
        below_critical: sup_ratio < critical_weight,
    })
}
