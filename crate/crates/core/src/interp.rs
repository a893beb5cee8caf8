//! Off-grid evaluation of gridded fields.

use crate::grid::Grid;
use crate::spectral::Spectral;
use crate::vec3::V3;
use rustfft::num_complex::Complex64;

/// Grids with at most this many points in total use exact spectral evaluation.
pub const SPECTRAL_EVAL_MAX_POINTS: usize = 128 * 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMethod {
    /// Trigonometric interpolant (exact for band-limited data).
    Spectral,
    /// Tensor-product 4-point Lagrange (tri-cubic in 3D).
    Cubic,
    /// Spectral when the grid has at most `SPECTRAL_EVAL_MAX_POINTS` points, cubic otherwise.
    Auto,
}

impl InterpMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            InterpMethod::Spectral => "spectral",
            InterpMethod::Cubic => "cubic",
            InterpMethod::Auto => "auto",
        }
    }

    fn resolve(self, grid: &Grid) -> InterpMethod {
        match self {
            InterpMethod::Auto => {
                if grid.len() <= SPECTRAL_EVAL_MAX_POINTS {
                    InterpMethod::Spectral
                } else {
                    InterpMethod::Cubic
                }
            }
            m => m,
        }
    }
}

impl std::str::FromStr for InterpMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spectral" => Ok(InterpMethod::Spectral),
            "cubic" => Ok(InterpMethod::Cubic),
            "auto" => Ok(InterpMethod::Auto),
            other => Err(format!("unknown interpolation `{other}` (expected auto, spectral or cubic)")),
        }
    }
}

#[derive(Debug, Clone)]
struct SpectralData {
    /// Per-axis physical wavenumbers by storage index.
    k: Vec<Vec<f64>>,
    /// Multi-index of each kept mode.
    modes: Vec<[usize; 3]>,
    /// Weighted coefficients, `modes.len() * ncomp`, mode-major.
    coef: Vec<Complex64>,
}

#[derive(Debug, Clone)]
enum Storage {
    Spectral(SpectralData),
    Cubic(Vec<Vec<f64>>),
}

/// Evaluates a fixed set of field components at arbitrary points.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    grid: Grid,
    ncomp: usize,
    storage: Storage,
}

impl FieldSampler {
    /// Builds a sampler over `components`, each laid out on `grid`.
    pub fn new(grid: &Grid, components: &[Vec<f64>], method: InterpMethod) -> Self {
        Self::build(grid, components, method, None)
    }

    /// Like [`FieldSampler::new`], reusing an existing transform.
    pub fn with_spectral(spectral: &Spectral, components: &[Vec<f64>], method: InterpMethod) -> Self {
        Self::build(spectral.grid(), components, method, Some(spectral))
    }

    fn build(
        grid: &Grid,
        components: &[Vec<f64>],
        method: InterpMethod,
        spectral: Option<&Spectral>,
    ) -> Self {
        let ncomp = components.len();
        let storage = match method.resolve(grid) {
            InterpMethod::Spectral => {
                let owned;
                let sp = match spectral {
                    Some(s) => s,
                    None => {
                        owned = Spectral::new(grid);
                        &owned
                    }
                };
                Storage::Spectral(spectral_data(sp, components))
            }
            _ => Storage::Cubic(components.to_vec()),
        };
        Self {
            grid: grid.clone(),
            ncomp,
            storage,
        }
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn method(&self) -> InterpMethod {
        match self.storage {
            Storage::Spectral(_) => InterpMethod::Spectral,
            Storage::Cubic(_) => InterpMethod::Cubic,
        }
    }

    /// Writes all components at `x` into `out` (length `ncomp`).
    pub fn eval_into(&self, x: V3, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.ncomp);
        match &self.storage {
            Storage::Spectral(d) => self.eval_spectral(d, x, out),
            Storage::Cubic(c) => self.eval_cubic(c, x, out),
        }
    }

    pub fn eval(&self, x: V3) -> Vec<f64> {
        let mut out = vec![0.0; self.ncomp];
        self.eval_into(x, &mut out);
        out
    }

    /// First up to three components as a vector.
    pub fn eval_v3(&self, x: V3) -> V3 {
        let v = self.eval(x);
        let mut out = [0.0; 3];
        for (o, c) in out.iter_mut().zip(&v) {
            *o = *c;
        }
        out
    }

    fn eval_spectral(&self, d: &SpectralData, x: V3, out: &mut [f64]) {
        let dim = self.grid.dim();
        let phases: Vec<Vec<Complex64>> = (0..dim)
            .map(|a| d.k[a].iter().map(|&k| Complex64::from_polar(1.0, k * x[a])).collect())
            .collect();
        let mut acc = vec![0.0; self.ncomp];
        for (mi, m) in d.modes.iter().enumerate() {
            let mut ph = phases[0][m[0]];
            for a in 1..dim {
                ph *= phases[a][m[a]];
            }
            let row = &d.coef[mi * self.ncomp..(mi + 1) * self.ncomp];
            for (slot, c) in acc.iter_mut().zip(row) {
                *slot += c.re * ph.re - c.im * ph.im;
            }
        }
        out.copy_from_slice(&acc);
    }

    fn eval_cubic(&self, comps: &[Vec<f64>], x: V3, out: &mut [f64]) {
        let dim = self.grid.dim();
        if x[..dim].iter().any(|v| !v.is_finite()) {
            out.iter_mut().for_each(|o| *o = f64::NAN);
            return;
        }
        let shape = self.grid.shape();
        let mut idx = [[0usize; 4]; 3];
        let mut w = [[0.0f64; 4]; 3];
        for a in 0..dim {
            let h = self.grid.spacing(a);
            let n = shape[a];
            let xi = (x[a] / h).rem_euclid(n as f64);
            let base = xi.floor();
            let t = xi - base;
            let b = base as i64;
            for (j, slot) in idx[a].iter_mut().enumerate() {
                *slot = (b - 1 + j as i64).rem_euclid(n as i64) as usize;
            }
            // Lagrange weights for nodes at -1, 0, 1, 2.
            w[a] = [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ];
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        if dim == 2 {
            for i in 0..4 {
                for j in 0..4 {
                    let wt = w[0][i] * w[1][j];
                    let flat = idx[0][i] * shape[1] + idx[1][j];
                    for (o, c) in out.iter_mut().zip(comps) {
                        *o += wt * c[flat];
                    }
                }
            }
        } else {
            for i in 0..4 {
                for j in 0..4 {
                    let wij = w[0][i] * w[1][j];
                    let row = (idx[0][i] * shape[1] + idx[1][j]) * shape[2];
                    for k in 0..4 {
                        let wt = wij * w[2][k];
                        let flat = row + idx[2][k];
                        for (o, c) in out.iter_mut().zip(comps) {
                            *o += wt * c[flat];
                        }
                    }
                }
            }
        }
    }
}

fn spectral_data(sp: &Spectral, components: &[Vec<f64>]) -> SpectralData {
    let grid = sp.grid();
    let dim = grid.dim();
    let n_total = grid.len() as f64;
    let hats: Vec<_> = components.iter().map(|c| sp.forward(c)).collect();
    let scale_ref = hats
        .iter()
        .flat_map(|h| h.iter().map(|c| c.norm()))
        .fold(0.0, f64::max);
    let cutoff = scale_ref * 1e-16;
    let last = dim - 1;
    let mut modes = Vec::new();
    let mut coef = Vec::new();
    for idx in 0..grid.len() {
        let m = sp.mode(idx);
        // Real fields: pair ±k along the last axis, drop Nyquist modes.
        if m.nyquist || m.m[last] < 0 {
            continue;
        }
        if hats.iter().all(|h| h[idx].norm() <= cutoff) {
            continue;
        }
        let weight = if m.m[last] > 0 { 2.0 } else { 1.0 } / n_total;
        let multi = grid.unravel(idx);
        modes.push(multi);
        for h in &hats {
            coef.push(h[idx] * weight);
        }
    }
    let k = (0..dim)
        .map(|a| {
            let n = grid.shape()[a];
            let l = grid.lengths()[a];
            (0..n)
                .map(|j| {
                    let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                    2.0 * std::f64::consts::PI * m / l
                })
                .collect()
        })
        .collect();
    SpectralData { k, modes, coef }
}
