//! Synthetic vorticity fields with a Clebsch representation `ω = ∇φ × ∇ψ`
//! and the cutoff decomposition of the Biot–Savart velocity behind the
//! logarithmic velocity bound.
//!
//! The velocity at `x` is split with a smooth cutoff `χ` at radii `δ` and `ρ`:
//!
//! * near: `∫ χ(|y|/δ) K(y) × ω(x+y) dy`
//! * intermediate: `∫ χ(|y|/ρ)(1 - χ(|y|/δ)) K(y) × ω(x+y) dy`, further split
//!   with `ω = ∇×(φ∇ψ)` into two cutoff-gradient terms and a kernel term
//! * far: `∫ (1 - χ(|y|/ρ)) K(y) × ω(x+y) dy`, split with `ω = ∇×u` into a
//!   cutoff-gradient term and a kernel term
//!
//! where `K(y) = y / (4π|y|³)`. Near and intermediate terms are computed by
//! radial Gauss–Legendre times spherical product quadrature of the analytic
//! fields; far terms are computed spectrally from closed-form transforms of
//! the truncated kernels.

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::spectral::{Spectral, Spectrum};
use crate::vec3::{self, V3};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Spectral coefficients of `φ` beyond the 2/3 band must stay below this
/// fraction of the largest coefficient.
pub const RESOLUTION_TAIL: f64 = 1e-8;

/// Smooth cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`, quintic (C²) in between.
pub fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Derivative of [`cutoff`].
pub fn cutoff_slope(r: f64) -> f64 {
    if r <= 1.0 || r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        -30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

fn sph_j0(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

fn sph_j1(x: f64) -> f64 {
    if x.abs() < 0.2 {
        let x2 = x * x;
        x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0 * (1.0 - x2 / 88.0))))
    } else {
        (x.sin() / x - x.cos()) / x
    }
}

fn sph_j2(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        x2 / 15.0
            * (1.0 - x2 / 14.0 * (1.0 - x2 / 36.0 * (1.0 - x2 / 66.0 * (1.0 - x2 / 104.0 * (1.0 - x2 / 150.0)))))
    } else {
        (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite 8-point Gauss–Legendre nodes over consecutive intervals `(a, b, max_panel)`.
fn radial_nodes(intervals: &[(f64, f64, f64)]) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(8);
    let mut out = Vec::new();
    for &(a, b, max_panel) in intervals {
        if b <= a {
            continue;
        }
        let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
            }
        }
    }
    out
}

/// Parameters of the synthetic family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClebschParams {
    /// Overall scale of `φ`.
    pub amplitude: f64,
    /// Width of the periodic bump factors.
    pub bump_width: f64,
    /// Wavenumber of the sharpening sheet in `φ`.
    pub sheet_wavenumber: f64,
    /// Wavenumber of the sharpening edge in `φ`.
    pub edge_wavenumber: f64,
    /// Sharpen `ψ` with the family too, breaking the bounded-gradient hypothesis.
    pub sharpen_psi: bool,
}

impl Default for ClebschParams {
    fn default() -> Self {
        Self {
            amplitude: 20.0,
            bump_width: 1.6,
            sheet_wavenumber: 0.7,
            edge_wavenumber: 0.35,
            sharpen_psi: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Profile {
    params: ClebschParams,
    sharpness: f64,
    edge_norm: f64,
}

/// Values of the level-set functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSets {
    pub phi: f64,
    pub grad_phi: V3,
    pub psi: f64,
    pub grad_psi: V3,
}

impl LevelSets {
    pub fn omega(&self) -> V3 {
        vec3::cross(self.grad_phi, self.grad_psi)
    }

    /// Vector potential `φ∇ψ`.
    pub fn potential(&self) -> V3 {
        vec3::scale(self.grad_psi, self.phi)
    }
}

fn gauss_bell(z: f64) -> f64 {
    2.0 / PI.sqrt() * (-z * z).exp()
}

impl Profile {
    fn new(params: ClebschParams, sharpness: f64) -> Self {
        let mut p = Self {
            params,
            sharpness,
            edge_norm: 1.0,
        };
        let samples = 200_000;
        let max = (0..=samples)
            .map(|i| p.edge(-PI + 2.0 * PI * i as f64 / samples as f64).0)
            .fold(0.0, f64::max);
        p.edge_norm = max;
        p
    }

    fn bump(&self, s: f64) -> (f64, f64) {
        let e2 = self.params.bump_width * self.params.bump_width;
        let b = ((s.cos() - 1.0) / e2).exp();
        (b, -s.sin() / e2 * b)
    }

    fn edge(&self, s: f64) -> (f64, f64) {
        let (b, db) = self.bump(s);
        let c = self.sharpness * self.params.edge_wavenumber;
        let z = c * s.sin();
        let step = 0.5 * (1.0 + libm::erf(z));
        let dstep = 0.5 * gauss_bell(z) * c * s.cos();
        ((b * step) / self.edge_norm, (db * step + b * dstep) / self.edge_norm)
    }

    /// Coordinates are shifted so the structure is centred in `[0, 2π)³`.
    fn eval(&self, x: V3) -> LevelSets {
        let (sx, sy, sz) = (x[0] - PI, x[1] - PI, x[2] - PI);
        let a = self.params.amplitude;
        let c0 = self.sharpness * self.params.sheet_wavenumber;
        let zy = c0 * sy.sin();
        let sheet = libm::erf(zy);
        let dsheet = gauss_bell(zy) * c0 * sy.cos();
        let (edge, dedge) = self.edge(sx);
        let (bz, dbz) = self.bump(sz);
        let phi = a * sheet * edge * bz;
        let grad_phi = [a * sheet * dedge * bz, a * dsheet * edge * bz, a * sheet * edge * dbz];
        let (psi, grad_psi) = if self.params.sharpen_psi {
            let k0 = self.params.sheet_wavenumber;
            let zx = c0 * sx.sin();
            let norm = 2.0 * k0 / PI.sqrt();
            (libm::erf(zx) / norm, [gauss_bell(zx) * c0 * sx.cos() / norm, 0.0, 0.0])
        } else {
            (sx.sin(), [sx.cos(), 0.0, 0.0])
        };
        LevelSets {
            phi,
            grad_phi,
            psi,
            grad_psi,
        }
    }

    /// Narrowest length scale of the analytic fields.
    fn feature(&self) -> f64 {
        let k = self.params.sheet_wavenumber.max(self.params.edge_wavenumber);
        (1.0 / (self.sharpness * k)).min(self.params.bump_width)
    }
}

/// A member of the synthetic family on a periodic grid.
#[derive(Debug, Clone)]
pub struct ClebschField {
    profile: Profile,
    spectral: Spectral,
    omega: VectorField,
    velocity: VectorField,
    velocity_hat: Vec<Spectrum>,
    omega_hat: Vec<Spectrum>,
    pub omega_max: f64,
    /// `max|∇×(φ∇ψ) - ∇φ×∇ψ| / Ω` over the grid.
    pub representation_error: f64,
    pub max_grad_phi: f64,
    pub max_grad_psi: f64,
    /// `max|φ∇ψ|`.
    pub max_potential: f64,
    pub velocity_l2: f64,
    /// `max|u|` where `|ω| >= REGION_FRACTION · Ω`.
    pub region_speed_max: f64,
    /// Largest `|φ̂|` outside the 2/3 band relative to the largest inside.
    pub spectral_tail: f64,
}

/// Grid points with `|ω|` at least this fraction of `Ω` stand in for the segment.
pub const REGION_FRACTION: f64 = 0.5;

/// Builds the family member with sharpness `λ >= 1`.
pub fn make_clebsch_family(grid: &Grid, params: ClebschParams, sharpness: f64) -> Result<ClebschField> {
    if !(sharpness.is_finite() && sharpness >= 1.0) {
        return Err(Error::Precondition(format!("sharpness must be finite and >= 1, got {sharpness}")));
    }
    if grid.dim() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            actual: grid.dim(),
        });
    }
    if grid.lengths().iter().any(|l| (l - 2.0 * PI).abs() > 1e-12) {
        return Err(Error::Precondition("the synthetic family needs a 2π-periodic box".into()));
    }
    if !(params.amplitude.is_finite()
        && params.bump_width > 0.0
        && params.sheet_wavenumber > 0.0
        && params.edge_wavenumber > 0.0)
    {
        return Err(Error::Precondition(format!("invalid family parameters {params:?}")));
    }
    let profile = Profile::new(params, sharpness);
    let sp = Spectral::new(grid);
    let n = grid.len();
    let sets: Vec<LevelSets> = (0..n).into_par_iter().map(|i| profile.eval(grid.point(i))).collect();

    let phi: Vec<f64> = sets.iter().map(|s| s.phi).collect();
    let phi_hat = sp.forward(&phi);
    let peak = phi_hat.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tail = phi_hat
        .par_iter()
        .enumerate()
        .filter(|(i, _)| !sp.mode(*i).retained)
        .map(|(_, c)| c.norm())
        .reduce(|| 0.0, f64::max)
        / peak.max(f64::MIN_POSITIVE);
    {
        if tail > RESOLUTION_TAIL {
            // Gaussian-like spectral decay of erf(c sin s) puts the band edge near 26c.
            let c = sharpness * params.sheet_wavenumber.max(params.edge_wavenumber);
            let advice = ((26.0 * c).max(2.0 * grid.shape()[0] as f64) as usize).next_power_of_two();
            return Err(Error::Precondition(format!(
                "sharpness {sharpness} under-resolves ∇φ (tail {tail:.1e}); use at least {advice} points per axis"
            )));
        }
    }

    let potential: Vec<Spectrum> = (0..3)
        .map(|c| sp.forward(&sets.iter().map(|s| s.potential()[c]).collect::<Vec<_>>()))
        .collect();
    let omega_hat: Vec<Spectrum> = sp.curl_spec(&potential).into_iter().collect();
    let omega_comps: Vec<Vec<f64>> = omega_hat.iter().map(|h| sp.inverse(h.clone())).collect();
    let omega = VectorField::new(grid.clone(), omega_comps)?;
    let velocity_hat: Vec<Spectrum> = sp.biot_savart_spec(&omega_hat).into_iter().collect();
    let velocity = VectorField::new(grid.clone(), velocity_hat.iter().map(|h| sp.inverse(h.clone())).collect())?;

    let mag = omega.magnitude();
    let omega_max = mag.max();
    let representation_error = (0..n)
        .into_par_iter()
        .map(|i| vec3::dist(omega.at(i), sets[i].omega()))
        .reduce(|| 0.0, f64::max)
        / omega_max.max(f64::MIN_POSITIVE);
    let max_of = |f: &(dyn Fn(&LevelSets) -> f64 + Sync)| sets.par_iter().map(f).reduce(|| 0.0, f64::max);
    let region_speed_max = (0..n)
        .into_par_iter()
        .filter(|&i| mag.values()[i] >= REGION_FRACTION * omega_max)
        .map(|i| vec3::norm(velocity.at(i)))
        .reduce(|| 0.0, f64::max);
    Ok(ClebschField {
        max_grad_phi: max_of(&|s| vec3::norm(s.grad_phi)),
        max_grad_psi: max_of(&|s| vec3::norm(s.grad_psi)),
        max_potential: max_of(&|s| vec3::norm(s.potential())),
        velocity_l2: velocity.integral_dot(&velocity).sqrt(),
        profile,
        spectral: sp,
        omega,
        velocity,
        velocity_hat,
        omega_hat,
        omega_max,
        representation_error,
        region_speed_max,
        spectral_tail: tail,
    })
}

/// Cutoff radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitConfig {
    pub rho: f64,
    /// `min(1/Ω, ρ/2)`.
    pub delta: f64,
}

impl SplitConfig {
    pub fn new(rho: f64, omega_max: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Precondition(format!("outer cutoff radius must be positive, got {rho}")));
        }
        let inv = if omega_max > 0.0 { 1.0 / omega_max } else { f64::INFINITY };
        Ok(Self {
            rho,
            delta: inv.min(0.5 * rho),
        })
    }
}

/// Axis-aligned region where the Clebsch representation is assumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub lo: V3,
    pub hi: V3,
}

impl Region {
    pub fn contains_ball(&self, x: V3, radius: f64) -> bool {
        (0..3).all(|c| x[c] - radius >= self.lo[c] && x[c] + radius <= self.hi[c])
    }
}

/// Spectrally computed far-field terms for one outer radius.
#[derive(Debug, Clone)]
pub struct FarFields {
    pub rho: f64,
    /// `∫ (1 - χ(|y|/ρ)) K × ω`.
    pub far: VectorField,
    /// Cutoff-gradient part of the far term.
    pub far_cutoff: VectorField,
    /// Kernel-gradient part of the far term.
    pub far_kernel: VectorField,
}

/// Velocity terms at one probe point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitTerms {
    pub point: V3,
    pub near: V3,
    pub intermediate: V3,
    /// Outer-cutoff gradient part of the intermediate term.
    pub outer_cutoff: V3,
    /// Inner-cutoff gradient part of the intermediate term.
    pub inner_cutoff: V3,
    /// Kernel-gradient part of the intermediate term.
    pub kernel: V3,
    pub far: V3,
    pub far_cutoff: V3,
    pub far_kernel: V3,
    /// `near + intermediate + far`.
    pub total: V3,
    /// Spectral Biot–Savart velocity at the point.
    pub direct: V3,
    pub relative_error: f64,
}

/// Transforms of the truncated kernels at wavenumber `k`.
struct KernelTransforms {
    /// Multiplier of `i k̂ × ω̂` for the far term.
    far: f64,
    /// Multiplier of `û` for the far cutoff-gradient term.
    far_cutoff: f64,
    /// Multiplier of `û` for the far kernel term.
    far_kernel: f64,
}

fn kernel_transforms(k: f64, rho: f64) -> KernelTransforms {
    if k == 0.0 {
        return KernelTransforms {
            far: 0.0,
            far_cutoff: 0.0,
            far_kernel: 0.0,
        };
    }
    let panels = ((k * rho / 2.0).ceil() as usize + 2) as f64;
    let nodes = radial_nodes(&[(rho, 2.0 * rho, rho / panels)]);
    let (mut i_j1, mut i_grad, mut i_j2) = (0.0, 0.0, 0.0);
    for (r, w) in nodes {
        let chi = cutoff(r / rho);
        let g = -cutoff_slope(r / rho) / rho;
        let x = k * r;
        i_j1 += w * chi * sph_j1(x);
        i_grad += w * g * (2.0 / 3.0 * sph_j0(x) - sph_j2(x) / 3.0);
        i_j2 += w * chi * sph_j2(x) / r;
    }
    let kr = k * rho;
    KernelTransforms {
        far: sph_j0(kr) / k - i_j1,
        far_cutoff: i_grad,
        far_kernel: sph_j1(kr) / kr - i_j2,
    }
}

/// Angular averages over the sphere of radius `r` about `x`.
struct ShellAverages {
    /// `⟨ŷ × ω⟩`.
    swirl: V3,
    /// `⟨(I - ŷŷ) φ∇ψ⟩`.
    tangential: V3,
    /// `⟨3ŷ(ŷ·φ∇ψ) - φ∇ψ⟩`.
    quadrupole: V3,
}

impl ClebschField {
    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn sharpness(&self) -> f64 {
        self.profile.sharpness
    }

    pub fn params(&self) -> ClebschParams {
        self.profile.params
    }

    pub fn omega(&self) -> &VectorField {
        &self.omega
    }

    pub fn velocity(&self) -> &VectorField {
        &self.velocity
    }

    /// Analytic level-set values at `x`.
    pub fn level_sets(&self, x: V3) -> LevelSets {
        self.profile.eval(x)
    }

    /// Up to `count` grid indices in the strong-vorticity region, strongest
    /// first, at least `separation` apart.
    pub fn probe_points(&self, count: usize, separation: f64) -> Vec<usize> {
        let mag = self.omega.magnitude();
        let grid = self.grid();
        let mut idx: Vec<usize> = (0..grid.len())
            .filter(|&i| mag.values()[i] >= REGION_FRACTION * self.omega_max)
            .collect();
        idx.sort_by(|a, b| mag.values()[*b].total_cmp(&mag.values()[*a]).then(a.cmp(b)));
        let mut chosen: Vec<usize> = Vec::with_capacity(count);
        for i in idx {
            if chosen.len() == count {
                break;
            }
            let p = grid.point(i);
            if chosen
                .iter()
                .all(|&j| vec3::norm(grid.periodic_delta(grid.point(j), p)) >= separation)
            {
                chosen.push(i);
            }
        }
        chosen
    }

    /// Far-field terms on the whole grid for outer radius `rho`.
    pub fn far_fields(&self, rho: f64) -> Result<FarFields> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Precondition(format!("outer cutoff radius must be positive, got {rho}")));
        }
        let sp = &self.spectral;
        let n = self.grid().len();
        let mut cache: HashMap<u64, (f64, f64, f64)> = HashMap::new();
        for idx in 0..n {
            let m = sp.mode(idx);
            let key = m.k_sq().to_bits();
            cache.entry(key).or_insert((0.0, 0.0, 0.0));
        }
        let keys: Vec<u64> = cache.keys().copied().collect();
        let values: Vec<(f64, f64, f64)> = keys
            .par_iter()
            .map(|&key| {
                let t = kernel_transforms(f64::from_bits(key).sqrt(), rho);
                (t.far, t.far_cutoff, t.far_kernel)
            })
            .collect();
        for (k, v) in keys.into_iter().zip(values) {
            cache.insert(k, v);
        }
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let build = |f: &(dyn Fn(usize, &crate::spectral::Mode, (f64, f64, f64)) -> [Complex64; 3] + Sync)| {
            let mut out = [vec![zero; n], vec![zero; n], vec![zero; n]];
            let [a, rest @ ..] = &mut out;
            let [b, c] = rest;
            a.par_iter_mut()
                .zip(b.par_iter_mut())
                .zip(c.par_iter_mut())
                .enumerate()
                .for_each(|(idx, ((x, y), z))| {
                    let m = sp.mode(idx);
                    if m.nyquist || m.k_sq() == 0.0 {
                        return;
                    }
                    let v = f(idx, &m, cache[&m.k_sq().to_bits()]);
                    *x = v[0];
                    *y = v[1];
                    *z = v[2];
                });
            out
        };
        let w = &self.omega_hat;
        let u = &self.velocity_hat;
        let far_hat = build(&|idx, m, (f, _, _)| {
            let kn = m.k_sq().sqrt();
            let kh = [m.k[0] / kn, m.k[1] / kn, m.k[2] / kn];
            let wv = [w[0][idx], w[1][idx], w[2][idx]];
            [
                i * f * (kh[1] * wv[2] - kh[2] * wv[1]),
                i * f * (kh[2] * wv[0] - kh[0] * wv[2]),
                i * f * (kh[0] * wv[1] - kh[1] * wv[0]),
            ]
        });
        let cut_hat = build(&|idx, _, (_, g, _)| [u[0][idx] * g, u[1][idx] * g, u[2][idx] * g]);
        let ker_hat = build(&|idx, _, (_, _, j)| [u[0][idx] * j, u[1][idx] * j, u[2][idx] * j]);
        let to_field = |h: [Spectrum; 3]| -> Result<VectorField> {
            VectorField::new(self.grid().clone(), h.into_iter().map(|c| sp.inverse(c)).collect())
        };
        Ok(FarFields {
            rho,
            far: to_field(far_hat)?,
            far_cutoff: to_field(cut_hat)?,
            far_kernel: to_field(ker_hat)?,
        })
    }

    /// Near term `∫ χ(|y|/δ) K × ω` on the whole grid, computed spectrally.
    pub fn near_field(&self, delta: f64) -> Result<VectorField> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Precondition(format!("inner cutoff radius must be positive, got {delta}")));
        }
        let sp = &self.spectral;
        let n = self.grid().len();
        let mut keys: Vec<u64> = (0..n).map(|i| sp.mode(i).k_sq().to_bits()).collect();
        keys.sort_unstable();
        keys.dedup();
        let values: Vec<f64> = keys
            .par_iter()
            .map(|&key| {
                let k = f64::from_bits(key).sqrt();
                if k == 0.0 {
                    return 0.0;
                }
                let panels = (k * delta / 2.0).ceil() + 2.0;
                let tail: f64 = radial_nodes(&[(delta, 2.0 * delta, delta / panels)])
                    .into_iter()
                    .map(|(r, w)| w * cutoff(r / delta) * sph_j1(k * r))
                    .sum();
                let kd = k * delta;
                // (1 - j0(kδ)) / k without cancellation for small kδ.
                let head = if kd < 1e-3 { kd * kd / 6.0 / k } else { (1.0 - sph_j0(kd)) / k };
                head + tail
            })
            .collect();
        let table: HashMap<u64, f64> = keys.into_iter().zip(values).collect();
        let w = &self.omega_hat;
        let i = Complex64::new(0.0, 1.0);
        let mut hats = vec![vec![Complex64::new(0.0, 0.0); n]; 3];
        for idx in 0..n {
            let m = sp.mode(idx);
            let k2 = m.k_sq();
            if m.nyquist || k2 == 0.0 {
                continue;
            }
            let kn = k2.sqrt();
            let f = table[&k2.to_bits()] / kn;
            let (k, wv) = (m.k, [w[0][idx], w[1][idx], w[2][idx]]);
            hats[0][idx] = i * f * (k[1] * wv[2] - k[2] * wv[1]);
            hats[1][idx] = i * f * (k[2] * wv[0] - k[0] * wv[2]);
            hats[2][idx] = i * f * (k[0] * wv[1] - k[1] * wv[0]);
        }
        VectorField::new(self.grid().clone(), hats.into_iter().map(|h| sp.inverse(h)).collect())
    }

    fn shell(&self, x: V3, r: f64) -> ShellAverages {
        let feature = self.profile.feature();
        let polar = ((4.0 * r / feature).ceil() as usize + 8).min(256);
        let (ct, wt) = gauss_legendre(polar);
        let azimuth = 2 * polar;
        let mut swirl = [0.0; 3];
        let mut tangential = [0.0; 3];
        let mut quadrupole = [0.0; 3];
        for (c, wc) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..azimuth {
                let ang = 2.0 * PI * (j as f64 + 0.5) / azimuth as f64;
                let yh = [s * ang.cos(), s * ang.sin(), *c];
                let w = 0.5 * wc / azimuth as f64;
                let ls = self.profile.eval(vec3::axpy(x, r, yh));
                let a = ls.potential();
                let ya = vec3::dot(yh, a);
                swirl = vec3::axpy(swirl, w, vec3::cross(yh, ls.omega()));
                tangential = vec3::axpy(tangential, w, vec3::axpy(a, -ya, yh));
                quadrupole = vec3::axpy(quadrupole, w, vec3::axpy(vec3::scale(a, -1.0), 3.0 * ya, yh));
            }
        }
        ShellAverages {
            swirl,
            tangential,
            quadrupole,
        }
    }

    /// Splits the velocity at grid node `probe`.
    pub fn split_velocity(
        &self,
        far: &FarFields,
        config: &SplitConfig,
        region: Option<&Region>,
        probe: usize,
    ) -> Result<SplitTerms> {
        if (config.rho - far.rho).abs() > 0.0 {
            return Err(Error::Precondition(format!(
                "far fields were built for ρ = {}, split asks for ρ = {}",
                far.rho, config.rho
            )));
        }
        if !(config.delta > 0.0 && config.delta <= 0.5 * config.rho) {
            return Err(Error::Precondition(format!(
                "inner radius {} must lie in (0, ρ/2]",
                config.delta
            )));
        }
        let x = self.grid().point(probe);
        if let Some(r) = region {
            if !r.contains_ball(x, config.rho) {
                return Err(Error::Precondition(format!(
                    "ball of radius {} about {x:?} leaves the Clebsch region",
                    config.rho
                )));
            }
        }
        let (rho, delta) = (config.rho, config.delta);
        let panel = 0.5 * self.profile.feature();
        let inner = panel.min(0.5 * delta);
        let nodes = radial_nodes(&[
            (0.0, delta, inner),
            (delta, 2.0 * delta, inner),
            (2.0 * delta, rho, panel),
            (rho, 2.0 * rho, panel),
        ]);
        let shells: Vec<(f64, f64, ShellAverages)> = nodes
            .par_iter()
            .map(|&(r, w)| (r, w, self.shell(x, r)))
            .collect();
        let mut near = [0.0; 3];
        let mut intermediate = [0.0; 3];
        let mut outer_cutoff = [0.0; 3];
        let mut inner_cutoff = [0.0; 3];
        let mut kernel = [0.0; 3];
        for (r, w, s) in &shells {
            let (r, w) = (*r, *w);
            let cd = cutoff(r / delta);
            let cr = cutoff(r / rho);
            near = vec3::axpy(near, w * cd, s.swirl);
            let h = cr * (1.0 - cd);
            intermediate = vec3::axpy(intermediate, w * h, s.swirl);
            outer_cutoff = vec3::axpy(outer_cutoff, w * (1.0 - cd) * cutoff_slope(r / rho) / rho, s.tangential);
            inner_cutoff = vec3::axpy(inner_cutoff, -w * cr * cutoff_slope(r / delta) / delta, s.tangential);
            if h > 0.0 {
                kernel = vec3::axpy(kernel, w * h / r, s.quadrupole);
            }
        }
        let far_v = far.far.at(probe);
        let total = vec3::add(vec3::add(near, intermediate), far_v);
        let direct = self.velocity.at(probe);
        let err = vec3::dist(total, direct);
        let scale = vec3::norm(direct);
        Ok(SplitTerms {
            point: x,
            near,
            intermediate,
            outer_cutoff,
            inner_cutoff,
            kernel,
            far: far_v,
            far_cutoff: far.far_cutoff.at(probe),
            far_kernel: far.far_kernel.at(probe),
            total,
            direct,
            relative_error: if scale > 0.0 { err / scale } else { err },
        })
    }
}

impl ClebschField {
    /// `max|v|` over grid points in the strong-vorticity region.
    pub fn region_max(&self, field: &VectorField) -> f64 {
        let mag = self.omega.magnitude();
        (0..self.grid().len())
            .into_par_iter()
            .filter(|&i| mag.values()[i] >= REGION_FRACTION * self.omega_max)
            .map(|i| vec3::norm(field.at(i)))
            .reduce(|| 0.0, f64::max)
    }
}

/// Summary of one family member for the log-velocity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyMember {
    pub sharpness: f64,
    pub omega_max: f64,
    pub speed_max: f64,
}

impl From<&ClebschField> for FamilyMember {
    fn from(f: &ClebschField) -> Self {
        Self {
            sharpness: f.sharpness(),
            omega_max: f.omega_max,
            speed_max: f.region_speed_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogVelocityReport {
    /// `max|u| / log Ω` per member.
    pub ratios: Vec<f64>,
    /// `max/min - 1` of the ratios.
    pub spread: f64,
    /// Least-squares `C_u` in `max|u| ≈ C_u log Ω`.
    pub velocity_log: f64,
    /// RMS of `max|u| - C_u log Ω`, relative to the mean speed.
    pub residual: f64,
    /// Every ratio is within `1.1 C_u`.
    pub bounded: bool,
    /// Last ratio over first ratio.
    pub growth: f64,
}

pub fn log_velocity_check(members: &[FamilyMember]) -> Result<LogVelocityReport> {
    if members.len() < 3 {
        return Err(Error::Precondition(format!(
            "log-velocity fit needs at least three family members, got {}",
            members.len()
        )));
    }
    let e = std::f64::consts::E;
    if let Some(m) = members.iter().find(|m| m.omega_max <= e) {
        return Err(Error::Precondition(format!(
            "Ω = {} <= e for sharpness {}; the bound needs Ω > e",
            m.omega_max, m.sharpness
        )));
    }
    let logs: Vec<f64> = members.iter().map(|m| m.omega_max.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / logs.len() as f64;
    if var <= 1e-24 * mean * mean {
        return Err(Error::Precondition(
            "zero variance in log Ω across the family; the fit is undetermined".into(),
        ));
    }
    let speeds: Vec<f64> = members.iter().map(|m| m.speed_max).collect();
    let ratios: Vec<f64> = speeds.iter().zip(&logs).map(|(s, l)| s / l).collect();
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    let cu = speeds.iter().zip(&logs).map(|(s, l)| s * l).sum::<f64>() / logs.iter().map(|l| l * l).sum::<f64>();
    let mean_speed = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let residual = (speeds
        .iter()
        .zip(&logs)
        .map(|(s, l)| (s - cu * l).powi(2))
        .sum::<f64>()
        / speeds.len() as f64)
        .sqrt()
        / mean_speed.max(f64::MIN_POSITIVE);
    Ok(LogVelocityReport {
        spread: max / min - 1.0,
        velocity_log: cu,
        residual,
        bounded: ratios.iter().all(|r| *r <= 1.1 * cu),
        growth: ratios[ratios.len() - 1] / ratios[0],
        ratios,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Precondition("log-log fit needs matching positive samples".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("log-log fit needs distinct abscissae".into()));
    }
    Ok(lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx)
}


/// Upper bound of `|near| / (δΩ)` from `|⟨ŷ×ω⟩| ≤ Ω` and `∫χ(r/δ)dr = 3δ/2`.
pub const NEAR_CEILING: f64 = 1.5;

/// Upper bound of `|kernel| / (log(ρ/δ) max|φ∇ψ|)` from `|3ŷ(ŷ·A) - A| ≤ 2|A|`.
pub fn kernel_ceiling(rho: f64, delta: f64) -> f64 {
    2.0 * (2.0 * rho / delta).ln() / (rho / delta).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixConfig {
    pub params: ClebschParams,
    pub sharpness: Vec<f64>,
    pub rho: f64,
    /// Outer radii for the far-field scaling fit, evaluated on the first member.
    pub rho_scan: Vec<f64>,
    pub probes: usize,
    /// Also run the family with `ψ` sharpened.
    pub counterexample: bool,
}

impl Default for AppendixConfig {
    fn default() -> Self {
        Self {
            params: ClebschParams::default(),
            sharpness: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            rho: 0.5,
            rho_scan: vec![0.5, 1.0, 2.0],
            probes: 20,
            counterexample: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberReport {
    pub sharpness: f64,
    pub omega_max: f64,
    pub speed_max: f64,
    pub max_grad_phi: f64,
    pub max_grad_psi: f64,
    pub max_potential: f64,
    pub representation_error: f64,
    pub delta: f64,
    pub terms: Vec<SplitTerms>,
    pub max_relative_error: f64,
    /// Largest `|near| / (δΩ)` over the strong-vorticity region, from the spectral route.
    pub near_ratio: f64,
    /// Largest `|near| / (δΩ)` over the probes, from quadrature.
    pub probe_near_ratio: f64,
    /// Largest relative gap between quadrature and spectral near terms at the probes.
    pub near_route_gap: f64,
    /// Largest `|kernel| / (log(ρ/δ) max|φ∇ψ|)` over the probes.
    pub kernel_ratio: f64,
    pub kernel_ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarScaling {
    pub rho: Vec<f64>,
    /// Region maxima of the far cutoff-gradient term.
    pub cutoff_max: Vec<f64>,
    /// Region maxima of the far kernel term.
    pub kernel_max: Vec<f64>,
    pub cutoff_exponent: f64,
    pub kernel_exponent: f64,
    pub velocity_l2: f64,
    /// Some annulus `[ρ, 2ρ]` reaches past half the box, so periodic images contribute.
    pub periodic_images: bool,
}

impl FarScaling {
    pub fn exponents_in(&self, lo: f64, hi: f64) -> bool {
        [self.cutoff_exponent, self.kernel_exponent]
            .iter()
            .all(|e| (lo..=hi).contains(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixReport {
    pub members: Vec<MemberReport>,
    pub log_velocity: LogVelocityReport,
    /// Single constant `c` with `|near| ≤ c δ Ω` across the family.
    pub near_constant: f64,
    /// Largest over smallest per-member `|near| / (δΩ)`.
    pub near_spread: f64,
    /// Single constant `c'` with `|kernel| ≤ c' log(ρ/δ) max|φ∇ψ|` across the family.
    pub kernel_constant: f64,
    /// Every member respects both analytic ceilings.
    pub ceilings_hold: bool,
    pub far_scaling: FarScaling,
    pub counterexample: Option<LogVelocityReport>,
}

fn member_report(field: &ClebschField, rho: f64, probes: usize) -> Result<MemberReport> {
    let far = field.far_fields(rho)?;
    let cfg = SplitConfig::new(rho, field.omega_max)?;
    let points = field.probe_points(probes, 2.0 * field.grid().min_spacing());
    let terms = points
        .iter()
        .map(|&p| field.split_velocity(&far, &cfg, None, p))
        .collect::<Result<Vec<_>>>()?;
    let near_scale = cfg.delta * field.omega_max;
    let near = field.near_field(cfg.delta)?;
    let near_route_gap = points
        .iter()
        .zip(&terms)
        .map(|(&p, t)| {
            let gap = vec3::dist(near.at(p), t.near);
            let scale = vec3::norm(t.near);
            if scale > 0.0 { gap / scale } else { gap }
        })
        .fold(0.0, f64::max);
    let kernel_scale = (rho / cfg.delta).ln() * field.max_potential;
    let ratio = |v: f64, scale: f64| if scale > 0.0 { v / scale } else { 0.0 };
    Ok(MemberReport {
        sharpness: field.sharpness(),
        omega_max: field.omega_max,
        speed_max: field.region_speed_max,
        max_grad_phi: field.max_grad_phi,
        max_grad_psi: field.max_grad_psi,
        max_potential: field.max_potential,
        representation_error: field.representation_error,
        delta: cfg.delta,
        max_relative_error: terms.iter().map(|t| t.relative_error).fold(0.0, f64::max),
        near_ratio: ratio(field.region_max(&near), near_scale),
        probe_near_ratio: terms.iter().map(|t| ratio(vec3::norm(t.near), near_scale)).fold(0.0, f64::max),
        near_route_gap,
        kernel_ratio: terms
            .iter()
            .map(|t| ratio(vec3::norm(t.kernel), kernel_scale))
            .fold(0.0, f64::max),
        kernel_ceiling: kernel_ceiling(rho, cfg.delta),
        terms,
    })
}

fn far_scaling(field: &ClebschField, rhos: &[f64]) -> Result<FarScaling> {
    let mut cutoff_max = Vec::with_capacity(rhos.len());
    let mut kernel_max = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let far = field.far_fields(rho)?;
        cutoff_max.push(field.region_max(&far.far_cutoff));
        kernel_max.push(field.region_max(&far.far_kernel));
    }
    Ok(FarScaling {
        cutoff_exponent: loglog_slope(rhos, &cutoff_max)?,
        kernel_exponent: loglog_slope(rhos, &kernel_max)?,
        rho: rhos.to_vec(),
        cutoff_max,
        kernel_max,
        velocity_l2: field.velocity_l2,
        periodic_images: rhos.iter().any(|r| 2.0 * r > PI),
    })
}

/// Builds the family on `grid`, splits the velocity at probe points of every
/// member, and fits the logarithmic velocity bound.
pub fn appendix_check(grid: &Grid, config: &AppendixConfig) -> Result<AppendixReport> {
    if config.sharpness.is_empty() {
        return Err(Error::Precondition("appendix check needs at least one sharpness".into()));
    }
    if config.probes == 0 {
        return Err(Error::Precondition("appendix check needs at least one probe point".into()));
    }
    let mut members = Vec::with_capacity(config.sharpness.len());
    let mut far = None;
    for &lam in &config.sharpness {
        let field = make_clebsch_family(grid, config.params, lam)?;
        members.push(member_report(&field, config.rho, config.probes)?);
        if far.is_none() {
            far = Some(far_scaling(&field, &config.rho_scan)?);
        }
    }
    let summary: Vec<FamilyMember> = members
        .iter()
        .map(|m| FamilyMember {
            sharpness: m.sharpness,
            omega_max: m.omega_max,
            speed_max: m.speed_max,
        })
        .collect();
    let log_velocity = log_velocity_check(&summary)?;
    let counterexample = if config.counterexample {
        let params = ClebschParams {
            sharpen_psi: true,
            ..config.params
        };
        let family = config
            .sharpness
            .iter()
            .map(|&lam| make_clebsch_family(grid, params, lam).map(|f| FamilyMember::from(&f)))
            .collect::<Result<Vec<_>>>()?;
        Some(log_velocity_check(&family)?)
    } else {
        None
    };
    Ok(AppendixReport {
        near_constant: members.iter().map(|m| m.near_ratio).fold(0.0, f64::max),
        near_spread: members.iter().map(|m| m.near_ratio).fold(0.0, f64::max)
            / members.iter().map(|m| m.near_ratio).fold(f64::INFINITY, f64::min),
        kernel_constant: members.iter().map(|m| m.kernel_ratio).fold(0.0, f64::max),
        ceilings_hold: members
            .iter()
            .all(|m| m.near_ratio <= NEAR_CEILING && m.kernel_ratio <= m.kernel_ceiling),
        members,
        log_velocity,
        far_scaling: far.expect("at least one member"),
        counterexample,
    })
}
