//! Point-evaluable view of one flow snapshot, as used by curve diagnostics.
//!
//! In 2D the vorticity-like field is `w = ∇⊥θ`; in 3D it is `ω`. Both are
//! divergence-free, which is all the geometry needs.

use crate::error::{Error, Result};
use crate::euler::RESOLUTION_TAIL_LIMIT;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::interp::{FieldSampler, InterpMethod};
use crate::spectral::{Spectral, Spectrum};
use crate::vec3::{self, M3, V3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Sqg,
    Euler3d,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Sqg => "sqg",
            Model::Euler3d => "euler3d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Sqg => 2,
            Model::Euler3d => 3,
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sqg" => Ok(Model::Sqg),
            "euler3d" => Ok(Model::Euler3d),
            other => Err(format!("unknown model `{other}` (expected sqg or euler3d)")),
        }
    }
}

/// Vorticity-like field, its gradient, velocity and velocity gradient at a point.
///
/// Gradients are stored as `g[i][j] = ∂_j f_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointData {
    pub w: V3,
    pub grad_w: M3,
    pub u: V3,
    pub grad_u: M3,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub model: Model,
    pub time: f64,
    grid: Grid,
    w: FieldSampler,
    detail: FieldSampler,
    /// Global `max|w|`, refined off-grid near the grid maximum.
    pub omega_max: f64,
    pub argmax: V3,
    /// Top-octave spectral fraction of `w`.
    pub tail_fraction: f64,
    pub resolved: bool,
    pub inviscid: bool,
}

impl Frame {
    /// Builds a frame from an SQG temperature field.
    pub fn from_sqg(theta: &ScalarField, time: f64, method: InterpMethod, inviscid: bool) -> Result<Self> {
        let grid = theta.grid().clone();
        if grid.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                actual: grid.dim(),
            });
        }
        let sp = Spectral::new(&grid);
        let hat = sp.forward_field(theta)?;
        let dx = sp.derivative_spec(&hat, 0);
        let dy = sp.derivative_spec(&hat, 1);
        let tail = sp.top_octave_fraction(std::slice::from_ref(&hat), 1);
        let txx = sp.inverse(sp.derivative_spec(&dx, 0));
        let txy = sp.inverse(sp.derivative_spec(&dx, 1));
        let tyy = sp.inverse(sp.derivative_spec(&dy, 1));
        let tx = sp.inverse(dx);
        let ty = sp.inverse(dy);
        let w0: Vec<f64> = ty.iter().map(|v| -v).collect();
        let w1 = tx;
        // w = (-θ_y, θ_x): ∂_j w_0 = -θ_yj, ∂_j w_1 = θ_xj.
        let gw00: Vec<f64> = txy.iter().map(|v| -v).collect();
        let gw01: Vec<f64> = tyy.iter().map(|v| -v).collect();
        let gw10 = txx;
        let gw11 = txy;
        let [uxh, uyh] = sp.sqg_velocity_spec(&hat);
        let gu = sp.jacobian_of_spec(&[uxh.clone(), uyh.clone()]);
        let ux = sp.inverse(uxh);
        let uy = sp.inverse(uyh);
        let w_comps = vec![w0, w1];
        let detail = vec![
            gw00,
            gw01,
            gw10,
            gw11,
            ux,
            uy,
            gu[0][0].clone(),
            gu[0][1].clone(),
            gu[1][0].clone(),
            gu[1][1].clone(),
        ];
        Self::assemble(Model::Sqg, time, &sp, w_comps, detail, method, tail, inviscid)
    }

    /// Builds a frame from a solenoidal 3D vorticity field.
    pub fn from_euler(omega: &VectorField, time: f64, method: InterpMethod, inviscid: bool) -> Result<Self> {
        let grid = omega.grid().clone();
        if grid.dim() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                actual: grid.dim(),
            });
        }
        let sp = Spectral::new(&grid);
        let u = sp.biot_savart_3d(omega)?;
        let wh: Vec<Spectrum> = omega.components().iter().map(|c| sp.forward(c)).collect();
        let uh: Vec<Spectrum> = u.components().iter().map(|c| sp.forward(c)).collect();
        let tail = sp.top_octave_fraction(&wh, 0);
        let gw = sp.jacobian_of_spec(&wh);
        let gu = sp.jacobian_of_spec(&uh);
        let mut detail = Vec::with_capacity(21);
        detail.extend(gw.into_iter().flatten());
        detail.extend(u.components().iter().cloned());
        detail.extend(gu.into_iter().flatten());
        Self::assemble(
            Model::Euler3d,
            time,
            &sp,
            omega.components().to_vec(),
            detail,
            method,
            tail,
            inviscid,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        model: Model,
        time: f64,
        sp: &Spectral,
        w_comps: Vec<Vec<f64>>,
        detail: Vec<Vec<f64>>,
        method: InterpMethod,
        tail_fraction: f64,
        inviscid: bool,
    ) -> Result<Self> {
        let grid = sp.grid().clone();
        let wf = VectorField::new(grid.clone(), w_comps)?;
        let mag = wf.magnitude();
        let imax = mag.argmax();
        let w = FieldSampler::with_spectral(sp, wf.components(), method);
        let detail = FieldSampler::with_spectral(sp, &detail, method);
        let mut frame = Self {
            model,
            time,
            grid: grid.clone(),
            w,
            detail,
            omega_max: mag.values()[imax],
            argmax: grid.point(imax),
            tail_fraction,
            resolved: tail_fraction <= RESOLUTION_TAIL_LIMIT,
            inviscid,
        };
        let (x, m) = frame.refine_max(frame.argmax);
        frame.argmax = x;
        frame.omega_max = frame.omega_max.max(m);
        Ok(frame)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Smallest grid spacing.
    pub fn spacing(&self) -> f64 {
        self.grid.min_spacing()
    }

    pub fn w(&self, x: V3) -> V3 {
        self.w.eval_v3(x)
    }

    pub fn w_mag(&self, x: V3) -> f64 {
        vec3::norm(self.w(x))
    }

    pub fn velocity(&self, x: V3) -> V3 {
        let d = self.dim();
        let v = self.detail.eval(x);
        let off = d * d;
        let mut u = [0.0; 3];
        u[..d].copy_from_slice(&v[off..off + d]);
        u
    }

    pub fn sample(&self, x: V3) -> PointData {
        let d = self.dim();
        let w = self.w(x);
        let v = self.detail.eval(x);
        let mut grad_w = [[0.0; 3]; 3];
        let mut grad_u = [[0.0; 3]; 3];
        let mut u = [0.0; 3];
        for i in 0..d {
            for j in 0..d {
                grad_w[i][j] = v[i * d + j];
                grad_u[i][j] = v[d * d + d + i * d + j];
            }
            u[i] = v[d * d + i];
        }
        PointData { w, grad_w, u, grad_u }
    }

    /// Local refinement of `max|w|` around `x0` on successively finer stencils.
    pub fn refine_max(&self, x0: V3) -> (V3, f64) {
        let d = self.dim();
        let mut best = x0;
        let mut best_val = self.w_mag(x0);
        let mut step = 0.5 * self.spacing();
        for _ in 0..6 {
            for _ in 0..64 {
                let center = best;
                let offsets: Vec<V3> = if d == 2 {
                    (-1..=1)
                        .flat_map(|a| (-1..=1).map(move |b| [a as f64, b as f64, 0.0]))
                        .collect()
                } else {
                    (-1..=1)
                        .flat_map(|a| {
                            (-1..=1).flat_map(move |b| (-1..=1).map(move |c| [a as f64, b as f64, c as f64]))
                        })
                        .collect()
                };
                let mut moved = false;
                for o in offsets {
                    let x = vec3::axpy(center, step, o);
                    let v = self.w_mag(x);
                    if v > best_val {
                        best_val = v;
                        best = x;
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
            step *= 0.25;
        }
        self.polish_max(best, best_val)
    }

    /// `∇(|w|²/2) = (∇w)ᵀ w`.
    fn strength_gradient(&self, x: V3) -> V3 {
        let p = self.sample(x);
        vec3::mat_t_vec(&p.grad_w, p.w)
    }

    /// Newton iterations on `|w|²/2` with a centered-difference Hessian,
    /// accepting only steps that increase `|w|`.
    fn polish_max(&self, x0: V3, v0: f64) -> (V3, f64) {
        let d = self.dim();
        let h = self.spacing();
        let fd = 1e-4 * h;
        let (mut best, mut best_val) = (x0, v0);
        for _ in 0..40 {
            let g = self.strength_gradient(best);
            let mut hess = [[0.0; 3]; 3];
            for j in 0..d {
                let mut e = [0.0; 3];
                e[j] = fd;
                let gp = self.strength_gradient(vec3::add(best, e));
                let gm = self.strength_gradient(vec3::sub(best, e));
                for i in 0..d {
                    hess[i][j] = (gp[i] - gm[i]) / (2.0 * fd);
                }
            }
            let Some(dx) = solve_symmetric(&hess, g, d) else {
                break;
            };
            if !vec3::is_finite(dx) {
                break;
            }
            let len = vec3::norm(dx);
            let mut dx = vec3::scale(dx, -(h / len).min(1.0));
            let mut accepted = None;
            for _ in 0..12 {
                let x = vec3::add(best, dx);
                let v = self.w_mag(x);
                if v > best_val {
                    accepted = Some((x, v));
                    break;
                }
                dx = vec3::scale(dx, 0.5);
            }
            let Some((x, v)) = accepted else {
                break;
            };
            best = x;
            best_val = v;
            if vec3::norm(dx) < 1e-12 * h {
                break;
            }
        }
        (best, best_val)
    }
}

/// Solves the leading `d × d` block of `m x = b` by pivoted elimination.
fn solve_symmetric(m: &M3, b: V3, d: usize) -> Option<V3> {
    let mut a = *m;
    let mut r = b;
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        r.swap(c, p);
        for i in c + 1..d {
            let f = a[i][c] / a[c][c];
            for j in c..d {
                a[i][j] -= f * a[c][j];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|j| a[i][j] * x[j]).sum();
        x[i] = (r[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::EulerInitial;
    use crate::sqg::SqgInitial;

    #[test]
    fn sqg_frame_matches_analytic_two_mode() {
        let g = Grid::square(32).unwrap();
        let theta = SqgInitial::TwoMode { amplitude: 1.0 }.sample(&g).unwrap();
        let f = Frame::from_sqg(&theta, 0.0, InterpMethod::Spectral, true).unwrap();
        let x = [0.3, 1.7, 0.0];
        let p = f.sample(x);
        // θ = sin x + cos y: w = (sin y, cos x), u = (sin y, cos x).
        let (sx, cx, sy, cy) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
        assert!(vec3::dist(p.w, [sy, cx, 0.0]) < 1e-13);
        assert!(vec3::dist(p.u, [sy, cx, 0.0]) < 1e-13);
        assert!((p.grad_w[0][1] - cy).abs() < 1e-13);
        assert!((p.grad_w[1][0] + sx).abs() < 1e-13);
        assert!((p.grad_u[1][0] + sx).abs() < 1e-13);
        assert!((f.omega_max - 2f64.sqrt()).abs() < 1e-8);
        assert!(f.resolved);
    }

    #[test]
    fn euler_frame_abc() {
        let g = Grid::cube(16).unwrap();
        let w = EulerInitial::Abc { a: 1.0, b: 1.0, c: 1.0 }.sample(&g).unwrap();
        let f = Frame::from_euler(&w, 0.5, InterpMethod::Spectral, true).unwrap();
        let x = [0.1, 2.2, 4.0];
        let p = f.sample(x);
        let want = crate::euler::abc_velocity(1.0, 1.0, 1.0, x);
        assert!(vec3::dist(p.u, want) < 1e-12);
        assert!(vec3::dist(p.w, want) < 1e-12);
        assert!((f.omega_max - 6f64.sqrt()).abs() < 1e-6, "{}", f.omega_max);
    }
}
