//! Fourier transforms and spectral operators on periodic grids.
//!
//! The forward transform is unnormalized; the inverse divides by the number of
//! grid nodes, so `inverse(forward(f)) == f` and Parseval reads
//! `Σ f² = Σ |f̂|² / N`.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Spectral coefficients in the same row-major layout as the grid.
pub type Spectrum = Vec<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative divergence tolerance accepted by [`Spectral::biot_savart_3d`].
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone)]
struct AxisPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Physical wavenumber per storage index.
    k: Vec<f64>,
    /// Signed integer mode per storage index.
    mode: Vec<i64>,
}

/// Cached FFT plans and wavenumber tables for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    strides: Vec<usize>,
    axes: Vec<AxisPlan>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

/// Per-mode data handed to the closures in [`Spectral::map_modes`].
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    /// Physical wavevector (zero z in 2D).
    pub k: [f64; 3],
    /// Signed integer mode numbers.
    pub m: [i64; 3],
    /// True if any axis sits on its Nyquist mode.
    pub nyquist: bool,
    /// True if the mode survives 2/3 truncation.
    pub retained: bool,
}

impl Mode {
    pub fn k_sq(&self) -> f64 {
        self.k[0] * self.k[0] + self.k[1] * self.k[1] + self.k[2] * self.k[2]
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let axes = (0..grid.dim())
            .map(|a| {
                let n = grid.shape()[a];
                let l = grid.lengths()[a];
                let mode: Vec<i64> = (0..n)
                    .map(|m| if m <= n / 2 { m as i64 } else { m as i64 - n as i64 })
                    .collect();
                let k = mode
                    .iter()
                    .map(|&m| 2.0 * std::f64::consts::PI * m as f64 / l)
                    .collect();
                AxisPlan {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                    k,
                    mode,
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            strides: grid.strides(),
            axes,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Mode metadata for a flat spectral index.
    pub fn mode(&self, idx: usize) -> Mode {
        let multi = self.grid.unravel(idx);
        let mut out = Mode {
            k: [0.0; 3],
            m: [0; 3],
            nyquist: false,
            retained: true,
        };
        for (a, ax) in self.axes.iter().enumerate() {
            let j = multi[a];
            out.k[a] = ax.k[j];
            out.m[a] = ax.mode[j];
            if ax.n % 2 == 0 && j == ax.n / 2 {
                out.nyquist = true;
            }
            if 3 * ax.mode[j].unsigned_abs() as usize > ax.n {
                out.retained = false;
            }
        }
        out
    }

    /// Applies `f(mode, coefficient)` to every coefficient in place.
    pub fn map_modes(&self, spec: &mut [Complex64], f: impl Fn(&Mode, Complex64) -> Complex64 + Sync) {
        spec.par_iter_mut().enumerate().for_each(|(idx, c)| {
            let m = self.mode(idx);
            *c = f(&m, *c);
        });
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let ax = &self.axes[axis];
        let n = ax.n;
        let plan = if inverse { &ax.inverse } else { &ax.forward };
        let stride = self.strides[axis];
        let scratch_len = plan.get_inplace_scratch_len();
        // Several lines per task keeps scheduling overhead small.
        let lines_per_task = (4096 / n).max(1);

        if stride == 1 {
            data.par_chunks_mut(n * lines_per_task).for_each_init(
                || vec![ZERO; scratch_len],
                |scratch, chunk| plan.process_with_scratch(chunk, scratch),
            );
            return;
        }

        let block = n * stride;
        let mut lines = vec![ZERO; data.len()];
        {
            let src: &[Complex64] = data;
            lines.par_chunks_mut(n).enumerate().for_each(|(l, line)| {
                let b = l / stride;
                let i = l % stride;
                let base = b * block + i;
                for (m, slot) in line.iter_mut().enumerate() {
                    *slot = src[base + m * stride];
                }
            });
        }
        lines.par_chunks_mut(n * lines_per_task).for_each_init(
            || vec![ZERO; scratch_len],
            |scratch, chunk| plan.process_with_scratch(chunk, scratch),
        );
        let lines = &lines;
        data.par_chunks_mut(stride).enumerate().for_each(|(c, row)| {
            let b = c / n;
            let m = c % n;
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = lines[(b * stride + i) * n + m];
            }
        });
    }

    /// Unnormalized forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Spectrum {
        assert_eq!(values.len(), self.grid.len(), "sample count does not match grid");
        let mut data: Spectrum = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for a in 0..self.axes.len() {
            self.transform_axis(&mut data, a, false);
        }
        data
    }

    /// Forward transform with input validation.
    pub fn forward_field(&self, f: &ScalarField) -> Result<Spectrum> {
        self.check_grid(f.grid())?;
        if !f.is_finite() {
            return Err(Error::NonFinite("scalar field passed to a spectral operator".into()));
        }
        Ok(self.forward(f.values()))
    }

    /// Normalized inverse transform, keeping the real part.
    pub fn inverse(&self, mut spec: Spectrum) -> Vec<f64> {
        assert_eq!(spec.len(), self.grid.len(), "coefficient count does not match grid");
        for a in 0..self.axes.len() {
            self.transform_axis(&mut spec, a, true);
        }
        let scale = 1.0 / self.grid.len() as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    fn check_grid(&self, g: &Grid) -> Result<()> {
        if g != &self.grid {
            return Err(Error::Shape("field grid differs from the transform grid".into()));
        }
        Ok(())
    }

    fn check_vector(&self, v: &VectorField) -> Result<()> {
        self.check_grid(v.grid())?;
        if !v.is_finite() {
            return Err(Error::NonFinite("vector field passed to a spectral operator".into()));
        }
        Ok(())
    }

    /// Zeroes every mode with `3|m_i| > n_i` on some axis.
    pub fn dealias_in_place(&self, spec: &mut [Complex64]) {
        self.map_modes(spec, |m, c| if m.retained { c } else { ZERO });
    }

    pub fn dealias(&self, f: &ScalarField) -> Result<ScalarField> {
        let mut s = self.forward_field(f)?;
        self.dealias_in_place(&mut s);
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.inverse(s),
        })
    }

    /// `∂/∂x_axis` in spectral space; the Nyquist mode is dropped.
    pub fn derivative_spec(&self, spec: &[Complex64], axis: usize) -> Spectrum {
        let mut out = spec.to_vec();
        self.map_modes(&mut out, |m, c| if m.nyquist { ZERO } else { I * m.k[axis] * c });
        out
    }

    /// Physical-space gradient components of a spectrum.
    pub fn gradient_of_spec(&self, spec: &[Complex64]) -> Vec<Vec<f64>> {
        (0..self.grid.dim())
            .map(|a| self.inverse(self.derivative_spec(spec, a)))
            .collect()
    }

    pub fn derivative(&self, f: &ScalarField, axis: usize) -> Result<ScalarField> {
        let s = self.forward_field(f)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.inverse(self.derivative_spec(&s, axis)),
        })
    }

    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField> {
        let s = self.forward_field(f)?;
        Ok(VectorField {
            grid: self.grid.clone(),
            components: self.gradient_of_spec(&s),
        })
    }

    /// `(-∂θ/∂y, ∂θ/∂x)`.
    pub fn perp_gradient(&self, theta: &ScalarField) -> Result<VectorField> {
        self.require_dim(2)?;
        let s = self.forward_field(theta)?;
        let dx = self.inverse(self.derivative_spec(&s, 0));
        let dy = self.inverse(self.derivative_spec(&s, 1));
        Ok(VectorField {
            grid: self.grid.clone(),
            components: vec![dy.into_iter().map(|v| -v).collect(), dx],
        })
    }

    fn require_dim(&self, d: usize) -> Result<()> {
        if self.grid.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: self.grid.dim(),
            });
        }
        Ok(())
    }

    /// SQG velocity `û = i k⊥ θ̂ / |k|` as two spectra.
    pub fn sqg_velocity_spec(&self, theta_hat: &[Complex64]) -> [Spectrum; 2] {
        let mut ux = theta_hat.to_vec();
        let mut uy = theta_hat.to_vec();
        self.map_modes(&mut ux, |m, c| {
            let kk = m.k_sq();
            if kk == 0.0 || m.nyquist {
                ZERO
            } else {
                I * (-m.k[1] / kk.sqrt()) * c
            }
        });
        self.map_modes(&mut uy, |m, c| {
            let kk = m.k_sq();
            if kk == 0.0 || m.nyquist {
                ZERO
            } else {
                I * (m.k[0] / kk.sqrt()) * c
            }
        });
        [ux, uy]
    }

    /// SQG velocity `∇⊥(-Δ)^{-1/2} θ`; the mean of θ plays no role.
    pub fn sqg_velocity(&self, theta: &ScalarField) -> Result<VectorField> {
        self.require_dim(2)?;
        let s = self.forward_field(theta)?;
        let [ux, uy] = self.sqg_velocity_spec(&s);
        Ok(VectorField {
            grid: self.grid.clone(),
            components: vec![self.inverse(ux), self.inverse(uy)],
        })
    }

    /// Biot–Savart inversion `û = i k × ω̂ / |k|²` without a solenoidality check.
    pub fn biot_savart_spec(&self, omega_hat: &[Spectrum]) -> [Spectrum; 3] {
        let n = self.grid.len();
        let mut out = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
        let [ox, oy, oz] = [&omega_hat[0], &omega_hat[1], &omega_hat[2]];
        let [ux, rest @ ..] = &mut out;
        let [uy, uz] = rest;
        ux.par_iter_mut()
            .zip(uy.par_iter_mut())
            .zip(uz.par_iter_mut())
            .enumerate()
            .for_each(|(idx, ((a, b), c))| {
                let m = self.mode(idx);
                let kk = m.k_sq();
                if kk == 0.0 || m.nyquist {
                    return;
                }
                let w = [ox[idx], oy[idx], oz[idx]];
                let k = m.k;
                *a = I * (k[1] * w[2] - k[2] * w[1]) / kk;
                *b = I * (k[2] * w[0] - k[0] * w[2]) / kk;
                *c = I * (k[0] * w[1] - k[1] * w[0]) / kk;
            });
        out
    }

    /// Velocity of a solenoidal 3D vorticity field.
    ///
    /// Rejects input whose spectral divergence exceeds
    /// [`SOLENOIDAL_TOLERANCE`] times `max|ω|`; use
    /// [`Spectral::project_solenoidal`] first in that case.
    pub fn biot_savart_3d(&self, omega: &VectorField) -> Result<VectorField> {
        self.require_dim(3)?;
        self.check_vector(omega)?;
        let hats: Vec<Spectrum> = omega.components().iter().map(|c| self.forward(c)).collect();
        let max_div = self.max_divergence_of_spec(&hats);
        let scale = omega.max_magnitude();
        let tolerance = SOLENOIDAL_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        if max_div > tolerance {
            return Err(Error::NotSolenoidal { max_div, tolerance });
        }
        let u = self.biot_savart_spec(&hats);
        Ok(VectorField {
            grid: self.grid.clone(),
            components: u.into_iter().map(|s| self.inverse(s)).collect(),
        })
    }

    fn divergence_spec(&self, hats: &[Spectrum]) -> Spectrum {
        let mut div = vec![ZERO; self.grid.len()];
        div.par_iter_mut().enumerate().for_each(|(idx, d)| {
            let m = self.mode(idx);
            if m.nyquist {
                return;
            }
            let mut acc = ZERO;
            for (a, h) in hats.iter().enumerate() {
                acc += I * m.k[a] * h[idx];
            }
            *d = acc;
        });
        div
    }

    fn max_divergence_of_spec(&self, hats: &[Spectrum]) -> f64 {
        let div = self.inverse(self.divergence_spec(hats));
        div.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        self.check_vector(v)?;
        let hats: Vec<Spectrum> = v.components().iter().map(|c| self.forward(c)).collect();
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.inverse(self.divergence_spec(&hats)),
        })
    }

    pub fn max_divergence(&self, v: &VectorField) -> Result<f64> {
        Ok(self.divergence(v)?.max_abs())
    }

    /// Curl of a 3D field, from spectra.
    pub fn curl_spec(&self, hats: &[Spectrum]) -> [Spectrum; 3] {
        let d = |c: usize, a: usize| self.derivative_spec(&hats[c], a);
        let sub = |x: Spectrum, y: Spectrum| -> Spectrum {
            x.into_iter().zip(y).map(|(p, q)| p - q).collect()
        };
        [sub(d(2, 1), d(1, 2)), sub(d(0, 2), d(2, 0)), sub(d(1, 0), d(0, 1))]
    }

    pub fn curl(&self, v: &VectorField) -> Result<VectorField> {
        self.require_dim(3)?;
        self.check_vector(v)?;
        let hats: Vec<Spectrum> = v.components().iter().map(|c| self.forward(c)).collect();
        Ok(VectorField {
            grid: self.grid.clone(),
            components: self.curl_spec(&hats).into_iter().map(|s| self.inverse(s)).collect(),
        })
    }

    /// Leray projection `v̂ - k (k·v̂)/|k|²` in place, on spectra.
    pub fn project_spec(&self, hats: &mut [Spectrum]) {
        let dim = self.grid.dim();
        let len = self.grid.len();
        for idx in 0..len {
            let m = self.mode(idx);
            let kk = m.k_sq();
            if m.nyquist {
                for h in hats.iter_mut() {
                    h[idx] = ZERO;
                }
                continue;
            }
            if kk == 0.0 {
                continue;
            }
            let mut kv = ZERO;
            for (a, h) in hats.iter().enumerate().take(dim) {
                kv += m.k[a] * h[idx];
            }
            for (a, h) in hats.iter_mut().enumerate().take(dim) {
                h[idx] -= m.k[a] * kv / kk;
            }
        }
    }

    pub fn project_solenoidal(&self, v: &VectorField) -> Result<VectorField> {
        self.check_vector(v)?;
        let mut hats: Vec<Spectrum> = v.components().iter().map(|c| self.forward(c)).collect();
        self.project_spec(&mut hats);
        Ok(VectorField {
            grid: self.grid.clone(),
            components: hats.into_iter().map(|s| self.inverse(s)).collect(),
        })
    }

    /// Mean-free scalar potential `f` with `∇f` the gradient part of `g`.
    ///
    /// `gradient(potential(∇f)) == ∇f` for band-limited `f` below Nyquist.
    pub fn potential(&self, g: &VectorField) -> Result<ScalarField> {
        self.check_vector(g)?;
        let hats: Vec<Spectrum> = g.components().iter().map(|c| self.forward(c)).collect();
        let mut div = self.divergence_spec(&hats);
        self.map_modes(&mut div, |m, c| {
            let kk = m.k_sq();
            if kk == 0.0 {
                ZERO
            } else {
                -c / kk
            }
        });
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.inverse(div),
        })
    }

    /// Full velocity-gradient tensor `out[i][j] = ∂_j v_i` from spectra.
    pub fn jacobian_of_spec(&self, hats: &[Spectrum]) -> Vec<Vec<Vec<f64>>> {
        hats.iter().map(|h| self.gradient_of_spec(h)).collect()
    }

    /// Fraction of `Σ |k|^(2p) |ĥ|²` carried by the top octave of the retained band.
    ///
    /// With vorticity spectra and `p = 0` this is the enstrophy fraction used
    /// as the under-resolution indicator.
    pub fn top_octave_fraction(&self, hats: &[Spectrum], p: i32) -> f64 {
        let kmax = self.max_retained_wavenumber();
        let mut total = 0.0;
        let mut top = 0.0;
        for idx in 0..self.grid.len() {
            let m = self.mode(idx);
            let kk = m.k_sq();
            let e: f64 = hats.iter().map(|h| h[idx].norm_sqr()).sum::<f64>() * kk.powi(p);
            total += e;
            if kk.sqrt() > 0.5 * kmax {
                top += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            top / total
        }
    }

    /// Smallest per-axis wavenumber that survives dealiasing at the band edge.
    pub fn max_retained_wavenumber(&self) -> f64 {
        self.axes
            .iter()
            .enumerate()
            .map(|(a, ax)| {
                (ax.n / 3) as f64 * 2.0 * std::f64::consts::PI / self.grid.lengths()[a]
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3;

    fn sq(n: usize) -> (Grid, Spectral) {
        let g = Grid::square(n).unwrap();
        let s = Spectral::new(&g);
        (g, s)
    }

    #[test]
    fn roundtrip_3d_anisotropic() {
        let g = Grid::new(&[16, 8, 32], &[1.0, 2.0, 3.0]).unwrap();
        let s = Spectral::new(&g);
        let f = g.sample(|p| (p[0] * 3.0).sin() + p[1] * p[2]);
        let back = s.inverse(s.forward(f.values()));
        let err = back.iter().zip(f.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn gradient_of_sine() {
        let (g, s) = sq(32);
        let grad = s.gradient(&g.sample(|p| p[0].sin())).unwrap();
        let want = g.sample_vector(|p| [p[0].cos(), 0.0, 0.0]);
        assert!(grad.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let (g, s) = sq(16);
        let grad = s.gradient(&ScalarField::constant(&g, 3.5)).unwrap();
        assert!(grad.max_magnitude() < 1e-13);
    }

    #[test]
    fn gradient_of_mixed_mode() {
        let (g, s) = sq(64);
        let grad = s.gradient(&g.sample(|p| (3.0 * p[0]).sin() * (2.0 * p[1]).cos())).unwrap();
        let want = g.sample_vector(|p| {
            [
                3.0 * (3.0 * p[0]).cos() * (2.0 * p[1]).cos(),
                -2.0 * (3.0 * p[0]).sin() * (2.0 * p[1]).sin(),
                0.0,
            ]
        });
        assert!(grad.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn gradient_rejects_nan() {
        let (g, s) = sq(8);
        let mut f = ScalarField::zeros(&g);
        f.values_mut()[3] = f64::NAN;
        assert!(matches!(s.gradient(&f), Err(Error::NonFinite(_))));
    }

    #[test]
    fn perp_gradient_of_sine() {
        let (g, s) = sq(16);
        let v = s.perp_gradient(&g.sample(|p| p[0].sin())).unwrap();
        let want = g.sample_vector(|p| [0.0, p[0].cos(), 0.0]);
        assert!(v.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn perp_gradient_of_radial_gaussian() {
        // e^{-r²} is not periodic on [0, 2π)²; a 4π box makes the wrap-around
        // mismatch negligible.
        let g = Grid::new(&[256, 256], &[4.0 * std::f64::consts::PI; 2]).unwrap();
        let s = Spectral::new(&g);
        let c = g.center();
        let v = s
            .perp_gradient(&g.sample(|p| {
                let r2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                (-r2).exp()
            }))
            .unwrap();
        let mut err = 0.0f64;
        for i in 0..g.len() {
            let p = g.point(i);
            let (x, y) = (p[0] - c[0], p[1] - c[1]);
            let r2 = x * x + y * y;
            // ∇θ = -2(x, y)e^{-r²}, so ∇⊥θ = 2(y, -x)e^{-r²}.
            let want = [2.0 * y * (-r2).exp(), -2.0 * x * (-r2).exp(), 0.0];
            err = err.max(vec3::dist(v.at(i), want));
        }
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn perp_gradient_requires_2d() {
        let g = Grid::cube(8).unwrap();
        let s = Spectral::new(&g);
        assert!(matches!(
            s.perp_gradient(&ScalarField::zeros(&g)),
            Err(Error::Dimension { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn sqg_velocity_unit_mode() {
        let (g, s) = sq(32);
        // θ = cos x: θ̂ at k=(±1,0), so u = ∇⊥(-Δ)^{-1/2}θ = (0, -sin x).
        let u = s.sqg_velocity(&g.sample(|p| p[0].cos())).unwrap();
        let want = g.sample_vector(|p| [0.0, -p[0].sin(), 0.0]);
        assert!(u.max_abs_diff(&want) < 1e-13);
        assert!(s.sqg_velocity(&ScalarField::zeros(&g)).unwrap().max_magnitude() == 0.0);
    }

    #[test]
    fn sqg_velocity_divergence_free() {
        let (g, s) = sq(64);
        let u = s
            .sqg_velocity(&g.sample(|p| (p[0] + 2.0 * p[1]).sin().exp() + (3.0 * p[1]).cos()))
            .unwrap();
        assert!(s.max_divergence(&u).unwrap() <= 1e-10 * u.max_magnitude());
    }

    fn abc(g: &Grid, a: f64, b: f64, c: f64) -> VectorField {
        g.sample_vector(|p| {
            [
                a * p[2].sin() + c * p[1].cos(),
                b * p[0].sin() + a * p[2].cos(),
                c * p[1].sin() + b * p[0].cos(),
            ]
        })
    }

    #[test]
    fn biot_savart_beltrami() {
        let g = Grid::cube(16).unwrap();
        let s = Spectral::new(&g);
        let u = abc(&g, 1.0, 0.8, 0.6);
        // curl u = u for this field, so the vorticity is u itself.
        let got = s.biot_savart_3d(&u).unwrap();
        assert!(got.max_abs_diff(&u) <= 1e-12 * u.max_magnitude());
        let zero = s.biot_savart_3d(&VectorField::zeros(&g)).unwrap();
        assert_eq!(zero.max_magnitude(), 0.0);
    }

    #[test]
    fn biot_savart_single_mode() {
        let g = Grid::cube(16).unwrap();
        let s = Spectral::new(&g);
        // ω = (0, 0, cos(2x)). Hand inversion: k = (±2,0,0), i k×ω̂/|k|² gives
        // u_y = -(i k_x / 4) ω̂_z, i.e. u = (0, sin(2x)/2, 0).
        let omega = g.sample_vector(|p| [0.0, 0.0, (2.0 * p[0]).cos()]);
        let u = s.biot_savart_3d(&omega).unwrap();
        let want = g.sample_vector(|p| [0.0, 0.5 * (2.0 * p[0]).sin(), 0.0]);
        assert!(u.max_abs_diff(&want) < 1e-14);
        let back = s.curl(&u).unwrap();
        assert!(back.max_abs_diff(&omega) < 1e-13);
    }

    #[test]
    fn biot_savart_rejects_divergent_input() {
        let g = Grid::cube(8).unwrap();
        let s = Spectral::new(&g);
        let omega = g.sample_vector(|p| [p[0].sin(), 0.0, 0.0]);
        assert!(matches!(s.biot_savart_3d(&omega), Err(Error::NotSolenoidal { .. })));
        let fixed = s.project_solenoidal(&omega).unwrap();
        assert!(s.biot_savart_3d(&fixed).is_ok());
    }

    #[test]
    fn dealias_examples() {
        let (g, s) = sq(32);
        let inside = g.sample(|p| (p[0] * 5.0).sin() * (p[1] * 10.0).cos());
        assert!(s.dealias(&inside).unwrap().max_abs_diff(&inside) < 1e-13);
        let above = g.sample(|p| (p[0] * 12.0).sin());
        assert!(s.dealias(&above).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn dealias_removes_aliased_product_mode() {
        let n = 32;
        let (g, s) = sq(n);
        let m = (n / 2 - 1) as f64;
        let prod = |p: crate::vec3::V3| p[0].sin() * (m * p[0]).sin();
        let coarse = s.dealias(&g.sample(prod)).unwrap();
        // Fine-grid oracle: the product is exactly representable on 2n points;
        // truncate it to the coarse retained band there and sample back.
        let gf = Grid::square(2 * n).unwrap();
        let sf = Spectral::new(&gf);
        let mut hat = sf.forward(gf.sample(prod).values());
        sf.map_modes(&mut hat, |md, c| {
            if 3 * md.m[0].unsigned_abs() as usize > n || 3 * md.m[1].unsigned_abs() as usize > n {
                ZERO
            } else {
                c
            }
        });
        let fine = sf.inverse(hat);
        let mut err = 0.0f64;
        for i in 0..g.len() {
            let [a, b, _] = g.unravel(i);
            let j = gf.ravel([2 * a, 2 * b, 0]);
            err = err.max((coarse.values()[i] - fine[j]).abs());
        }
        assert!(err < 1e-13, "{err}");
        // Without truncation the aliased mode would survive on the coarse grid.
        assert!(g.sample(prod).max_abs() > 0.5);
    }

    #[test]
    fn projection_leaves_solenoidal_fields() {
        let g = Grid::cube(16).unwrap();
        let s = Spectral::new(&g);
        let v = g.sample_vector(|p| [p[1].sin() + p[0].cos(), p[2].cos() * p[0].sin(), p[0].sin()]);
        let pv = s.project_solenoidal(&v).unwrap();
        assert!(s.max_divergence(&pv).unwrap() < 1e-12);
        let ppv = s.project_solenoidal(&pv).unwrap();
        assert!(ppv.max_abs_diff(&pv) < 1e-13);
    }

    #[test]
    fn potential_inverts_gradient() {
        let (g, s) = sq(32);
        let f = g.sample(|p| (2.0 * p[0] - p[1]).sin() + (p[1] * 3.0).cos() * p[0].sin());
        let grad = s.gradient(&f).unwrap();
        let back = s.gradient(&s.potential(&grad).unwrap()).unwrap();
        assert!(back.max_abs_diff(&grad) < 1e-12);
    }
}
