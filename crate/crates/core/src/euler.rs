//! Incompressible 3D Euler in vorticity form.

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::spectral::{Spectral, Spectrum};
use crate::stepper::{rk4, State};
use crate::vec3::{self, V3};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Top-octave enstrophy fraction above which a field counts as under-resolved.
pub const RESOLUTION_TAIL_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EulerState {
    pub omega: VectorField,
    pub time: f64,
}

/// Scalar summaries reported per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerSummary {
    pub max_vorticity: f64,
    pub kinetic_energy: f64,
    pub helicity: f64,
    pub tail_fraction: f64,
}

/// Pseudo-spectral vorticity-form solver.
///
/// The tendency is evaluated as `∇×(u×ω)`, which for solenoidal, dealiased
/// fields equals `-u·∇ω + ω·∇u` to round-off while needing fewer transforms.
#[derive(Debug, Clone)]
pub struct EulerSolver {
    spectral: Spectral,
    hyperdiffusion: f64,
    order: u32,
}

impl EulerSolver {
    pub fn new(grid: &Grid) -> Result<Self> {
        if grid.dim() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                actual: grid.dim(),
            });
        }
        Ok(Self {
            spectral: Spectral::new(grid),
            hyperdiffusion: 0.0,
            order: 4,
        })
    }

    pub fn with_hyperdiffusion(mut self, coefficient: f64, order: u32) -> Self {
        self.hyperdiffusion = coefficient;
        self.order = order;
        self
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    fn hats(&self, comps: &[Vec<f64>]) -> Vec<Spectrum> {
        comps.iter().map(|c| self.spectral.forward(c)).collect()
    }

    /// Dealiases and projects ω onto solenoidal fields.
    pub fn prepare(&self, omega: &VectorField) -> Result<VectorField> {
        if omega.grid() != self.grid() {
            return Err(Error::Shape("ω grid differs from solver grid".into()));
        }
        if !omega.is_finite() {
            return Err(Error::NonFinite("initial vorticity".into()));
        }
        let mut hats = self.hats(omega.components());
        for h in hats.iter_mut() {
            self.spectral.dealias_in_place(h);
        }
        self.spectral.project_spec(&mut hats);
        VectorField::new(
            self.grid().clone(),
            hats.into_iter().map(|h| self.spectral.inverse(h)).collect(),
        )
    }

    pub fn velocity(&self, omega: &VectorField) -> Result<VectorField> {
        self.spectral.biot_savart_3d(omega)
    }

    fn velocity_unchecked(&self, hats: &[Spectrum]) -> State {
        self.spectral
            .biot_savart_spec(hats)
            .into_iter()
            .map(|s| self.spectral.inverse(s))
            .collect()
    }

    fn tendency(&self, omega: &State) -> Result<State> {
        let sp = &self.spectral;
        let hats = self.hats(omega);
        let u = self.velocity_unchecked(&hats);
        let n = self.grid().len();
        let mut cross = vec![vec![0.0; n]; 3];
        for i in 0..n {
            let uv = [u[0][i], u[1][i], u[2][i]];
            let wv = [omega[0][i], omega[1][i], omega[2][i]];
            let c = vec3::cross(uv, wv);
            if !vec3::is_finite(c) {
                return Err(Error::NonFinite("Euler velocity or vorticity".into()));
            }
            for (comp, v) in cross.iter_mut().zip(c) {
                comp[i] = v;
            }
        }
        let cross_hats = self.hats(&cross);
        let mut out: Vec<Spectrum> = sp.curl_spec(&cross_hats).into();
        let nu = self.hyperdiffusion;
        let p = self.order as i32;
        for (o, h) in out.iter_mut().zip(&hats) {
            o.par_iter_mut().enumerate().for_each(|(idx, c)| {
                let m = sp.mode(idx);
                if !m.retained {
                    *c = Complex64::new(0.0, 0.0);
                } else if nu > 0.0 {
                    *c -= nu * m.k_sq().powi(p) * h[idx];
                }
            });
        }
        sp.project_spec(&mut out);
        Ok(out.into_iter().map(|h| sp.inverse(h)).collect())
    }

    pub fn rhs(&self, omega: &VectorField) -> Result<VectorField> {
        if omega.grid() != self.grid() {
            return Err(Error::Shape("ω grid differs from solver grid".into()));
        }
        VectorField::new(self.grid().clone(), self.tendency(&omega.components().to_vec())?)
    }

    /// One RK4 step followed by re-projection.
    pub fn step(&self, state: &EulerState, dt: f64) -> Result<EulerState> {
        let y: State = state.omega.components().to_vec();
        let next = rk4(&y, dt, |s| self.tendency(s))?;
        let mut hats = self.hats(&next);
        self.spectral.project_spec(&mut hats);
        let comps = hats.into_iter().map(|h| self.spectral.inverse(h)).collect();
        Ok(EulerState {
            omega: VectorField::new(self.grid().clone(), comps)?,
            time: state.time + dt,
        })
    }

    pub fn summary(&self, omega: &VectorField) -> Result<EulerSummary> {
        let hats = self.hats(omega.components());
        let u = VectorField::new(self.grid().clone(), self.velocity_unchecked(&hats))?;
        Ok(EulerSummary {
            max_vorticity: omega.max_magnitude(),
            kinetic_energy: 0.5 * u.integral_dot(&u),
            helicity: u.integral_dot(omega),
            tail_fraction: self.spectral.top_octave_fraction(&hats, 0),
        })
    }

    pub fn max_speed(&self, omega: &VectorField) -> Result<f64> {
        let hats = self.hats(omega.components());
        let u = VectorField::new(self.grid().clone(), self.velocity_unchecked(&hats))?;
        Ok(u.max_magnitude())
    }

    /// `max|∇·ω| / max|ω|`.
    pub fn divergence_ratio(&self, omega: &VectorField) -> Result<f64> {
        let m = omega.max_magnitude();
        if m == 0.0 {
            return Ok(0.0);
        }
        Ok(self.spectral.max_divergence(omega)? / m)
    }
}

/// Parameters for two smoothed anti-parallel vortex tubes along z.
///
/// Tube centerlines sit at `x = π ∓ (d/2 + a cos(k z))`, `y = π`, with
/// Gaussian cores `Γ e^{-r²/r₀²} / (π r₀²)` in horizontal distance `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeParams {
    pub circulation: f64,
    pub core_radius: f64,
    pub separation: f64,
    pub perturbation: f64,
    /// Integer axial wavenumber of the perturbation.
    pub wavenumber: u32,
}

impl Default for TubeParams {
    fn default() -> Self {
        Self {
            circulation: 2.0,
            core_radius: 0.3,
            separation: 1.2,
            perturbation: 0.1,
            wavenumber: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EulerInitial {
    /// Arnold–Beltrami–Childress flow; `ω = u`, a steady solution.
    Abc { a: f64, b: f64, c: f64 },
    TaylorGreen { amplitude: f64 },
    Tubes(TubeParams),
    /// Spatially uniform ω (straight vortex lines).
    Uniform { omega: V3 },
    Zero,
}

impl EulerInitial {
    pub fn name(&self) -> &'static str {
        match self {
            EulerInitial::Abc { .. } => "abc",
            EulerInitial::TaylorGreen { .. } => "taylor_green",
            EulerInitial::Tubes(_) => "tubes",
            EulerInitial::Uniform { .. } => "uniform",
            EulerInitial::Zero => "zero",
        }
    }

    /// Equal coefficients of 1.5, which puts `max|ω|` above e.
    pub fn abc_default() -> Self {
        EulerInitial::Abc {
            a: 1.5,
            b: 1.5,
            c: 1.5,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<VectorField> {
        if grid.dim() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                actual: grid.dim(),
            });
        }
        let l = grid.lengths();
        let two_pi = 2.0 * PI;
        let f = match *self {
            EulerInitial::Abc { a, b, c } => {
                let (sx, sy, sz) = (two_pi / l[0], two_pi / l[1], two_pi / l[2]);
                if (sx - 1.0).abs() > 1e-12 || (sy - 1.0).abs() > 1e-12 || (sz - 1.0).abs() > 1e-12 {
                    return Err(Error::Precondition("ABC flow needs a 2π-periodic box".into()));
                }
                grid.sample_vector(|p| abc_velocity(a, b, c, p))
            }
            EulerInitial::TaylorGreen { amplitude } => grid.sample_vector(|p| {
                let (x, y, z) = (p[0] * two_pi / l[0], p[1] * two_pi / l[1], p[2] * two_pi / l[2]);
                [
                    -amplitude * x.cos() * y.sin() * z.sin(),
                    -amplitude * x.sin() * y.cos() * z.sin(),
                    2.0 * amplitude * x.sin() * y.sin() * z.cos(),
                ]
            }),
            EulerInitial::Tubes(t) => tubes(grid, &t)?,
            EulerInitial::Uniform { omega } => grid.sample_vector(|_| omega),
            EulerInitial::Zero => VectorField::zeros(grid),
        };
        if !f.is_finite() {
            return Err(Error::NonFinite("initial vorticity".into()));
        }
        Ok(f)
    }
}

/// ABC velocity (equal to its vorticity).
pub fn abc_velocity(a: f64, b: f64, c: f64, p: V3) -> V3 {
    [
        a * p[2].sin() + c * p[1].cos(),
        b * p[0].sin() + a * p[2].cos(),
        c * p[1].sin() + b * p[0].cos(),
    ]
}

fn tubes(grid: &Grid, t: &TubeParams) -> Result<VectorField> {
    let l = grid.lengths();
    let (lx, ly, lz) = (l[0], l[1], l[2]);
    let r0 = t.core_radius;
    let d = t.separation;
    let a = t.perturbation;
    if !(r0 > 0.0 && d > 0.0 && a >= 0.0 && t.circulation.is_finite()) {
        return Err(Error::Precondition(
            "tube core radius and separation must be positive, perturbation non-negative".into(),
        ));
    }
    if d - 2.0 * a <= 0.0 {
        return Err(Error::Precondition(format!(
            "tubes cross: separation {d} must exceed twice the perturbation {a}"
        )));
    }
    if lx - d - 2.0 * a < 6.0 * r0 || ly < 6.0 * r0 {
        return Err(Error::Precondition(format!(
            "tubes overlap their periodic images: need box gap >= 6 r0 = {}",
            6.0 * r0
        )));
    }
    let k = 2.0 * PI * t.wavenumber as f64 / lz;
    let cx = 0.5 * lx;
    let cy = 0.5 * ly;
    let norm = t.circulation / (PI * r0 * r0);
    let core = |dx: f64, dy: f64| norm * (-(dx * dx + dy * dy) / (r0 * r0)).exp();
    let wrap = |v: f64, period: f64| v - period * (v / period).round();
    Ok(grid.sample_vector(|p| {
        let offset = 0.5 * d + a * (k * p[2]).cos();
        let slope = -a * k * (k * p[2]).sin();
        let dy = wrap(p[1] - cy, ly);
        // Tube 1 at x = cx - offset carries +z vorticity, tube 2 is its mirror.
        let f1 = core(wrap(p[0] - (cx - offset), lx), dy);
        let f2 = core(wrap(p[0] - (cx + offset), lx), dy);
        // Centerline slopes: x1' = -slope, x2' = +slope.
        [-slope * f1 - slope * f2, 0.0, f1 - f2]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(n: usize) -> EulerSolver {
        EulerSolver::new(&Grid::cube(n).unwrap()).unwrap()
    }

    #[test]
    fn abc_is_steady() {
        let s = solver(64);
        let w = s.prepare(&EulerInitial::abc_default().sample(s.grid()).unwrap()).unwrap();
        let t = s.rhs(&w).unwrap();
        assert!(t.max_magnitude() <= 1e-8 * w.max_magnitude());
    }

    #[test]
    fn zero_stays_zero() {
        let s = solver(16);
        let st = EulerState {
            omega: VectorField::zeros(s.grid()),
            time: 0.0,
        };
        let next = s.step(&st, 0.1).unwrap();
        assert_eq!(next.omega.max_magnitude(), 0.0);
    }

    #[test]
    fn curl_form_matches_advection_stretching_form() {
        let s = solver(32);
        let sp = s.spectral();
        let w = s
            .prepare(&EulerInitial::TaylorGreen { amplitude: 1.0 }.sample(s.grid()).unwrap())
            .unwrap();
        let got = s.rhs(&w).unwrap();
        // -u·∇ω + ω·∇u built from spectral gradients, dealiased, projected.
        let u = s.velocity(&w).unwrap();
        let wh: Vec<_> = w.components().iter().map(|c| sp.forward(c)).collect();
        let uh: Vec<_> = u.components().iter().map(|c| sp.forward(c)).collect();
        let gw = sp.jacobian_of_spec(&wh);
        let gu = sp.jacobian_of_spec(&uh);
        let n = s.grid().len();
        let mut comps = vec![vec![0.0; n]; 3];
        for i in 0..n {
            for c in 0..3 {
                let mut v = 0.0;
                for j in 0..3 {
                    v += -u.components()[j][i] * gw[c][j][i] + w.components()[j][i] * gu[c][j][i];
                }
                comps[c][i] = v;
            }
        }
        let mut hats: Vec<_> = comps.iter().map(|c| sp.forward(c)).collect();
        for h in hats.iter_mut() {
            sp.dealias_in_place(h);
        }
        sp.project_spec(&mut hats);
        let want = VectorField::new(s.grid().clone(), hats.into_iter().map(|h| sp.inverse(h)).collect())
            .unwrap();
        assert!(got.max_abs_diff(&want) < 1e-12 * want.max_magnitude());
    }

    #[test]
    fn tubes_symmetry_and_divergence() {
        let g = Grid::cube(32).unwrap();
        let s = EulerSolver::new(&g).unwrap();
        let w = EulerInitial::Tubes(TubeParams::default()).sample(&g).unwrap();
        let n = 32;
        let mut asym = 0.0f64;
        for i in 0..g.len() {
            let [a, b, c] = g.unravel(i);
            let j = g.ravel([(n - a) % n, b, c]);
            let p = w.at(i);
            let q = w.at(j);
            asym = asym.max((p[0] - q[0]).abs()).max((p[2] + q[2]).abs()).max((p[1] + q[1]).abs());
        }
        assert!(asym < 1e-10, "{asym}");
        let pw = s.prepare(&w).unwrap();
        assert!(s.divergence_ratio(&pw).unwrap() <= 1e-10);
    }

    #[test]
    fn unperturbed_tubes_are_z_invariant() {
        let g = Grid::cube(16).unwrap();
        let t = TubeParams {
            perturbation: 0.0,
            ..TubeParams::default()
        };
        let w = EulerInitial::Tubes(t).sample(&g).unwrap();
        let mut err = 0.0f64;
        for i in 0..g.len() {
            let [a, b, _] = g.unravel(i);
            err = err.max(vec3::dist(w.at(i), w.at(g.ravel([a, b, 0]))));
        }
        assert!(err < 1e-10);
    }

    #[test]
    fn tube_circulation_matches() {
        let g = Grid::cube(64).unwrap();
        // Cores must clear the dividing plane for a half-plane integral to
        // isolate one tube.
        let t = TubeParams {
            separation: 2.0,
            ..TubeParams::default()
        };
        let w = EulerInitial::Tubes(t).sample(&g).unwrap();
        // Integrate ω_z over the half plane x < π at a fixed z.
        let h = g.spacing(0) * g.spacing(1);
        let z = 5;
        let mut circ = 0.0;
        for a in 0..32 {
            for b in 0..64 {
                circ += w.at(g.ravel([a, b, z]))[2] * h;
            }
        }
        assert!((circ - t.circulation).abs() < 1e-4 * t.circulation, "{circ}");
    }

    #[test]
    fn tubes_reject_overlap() {
        let g = Grid::cube(16).unwrap();
        let bad = TubeParams {
            separation: 0.1,
            perturbation: 0.1,
            ..TubeParams::default()
        };
        assert!(EulerInitial::Tubes(bad).sample(&g).is_err());
        let wide = TubeParams {
            core_radius: 1.0,
            ..TubeParams::default()
        };
        assert!(EulerInitial::Tubes(wide).sample(&g).is_err());
    }
}
