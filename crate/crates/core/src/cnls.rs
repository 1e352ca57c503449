//! The coupled system
//!
//! ```text
//! i u_t - Δu + (1/ε²)(|u|² + g|v|² - 1) u = 0
//! i v_t - Δv + (1/ε²)(|v|² + g|u|² - 1) v = 0
//! ```
//!
//! with homogeneous Neumann walls on a rectangle, advanced by Strang
//! splitting between an exact cosine-spectral kinetic flow and an exact
//! pointwise phase rotation.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustdct::{DctPlanner, TransformType2And3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, GridSpec};
use crate::harmonic_map::{phase_on_grid, Component, Vortex, VortexConfiguration};
use crate::profile_gamma::{background, RadialProfile};
use crate::vec2::Vec2;

/// Cell-centered complex samples, indexed `[j, i]` (row `j` along `y`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub domain: Domain,
    pub grid: GridSpec,
    pub data: Array2<Complex64>,
}

impl ComplexField {
    pub fn new(domain: Domain, grid: GridSpec, data: Array2<Complex64>) -> Result<Self> {
        if !matches!(domain, Domain::Rectangle { .. }) {
            return Err(Error::InvalidArgument(
                "complex fields live on rectangles".into(),
            ));
        }
        grid.validate()?;
        if data.dim() != (grid.ny, grid.nx) {
            return Err(Error::InvalidArgument(format!(
                "data shape {:?} does not match grid {}x{}",
                data.dim(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(Self { domain, grid, data })
    }

    pub fn from_fn(domain: Domain, grid: GridSpec, f: impl Fn(Vec2) -> Complex64) -> Result<Self> {
        let data = Array2::from_shape_fn((grid.ny, grid.nx), |(j, i)| {
            f(grid.cell_center(&domain, i, j))
        });
        Self::new(domain, grid, data)
    }

    pub fn constant(domain: Domain, grid: GridSpec, value: Complex64) -> Result<Self> {
        Self::new(domain, grid, Array2::from_elem((grid.ny, grid.nx), value))
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.grid.spacing(&self.domain)
    }

    pub fn cell_area(&self) -> f64 {
        let (hx, hy) = self.spacing();
        hx * hy
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        self.grid.cell_center(&self.domain, i, j)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `∫|u|²` by the midpoint rule.
    pub fn mass(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_area()
    }

    pub fn conj(&self) -> Self {
        Self {
            data: self.data.mapv(|z| z.conj()),
            ..self.clone()
        }
    }

    pub fn modulus(&self) -> Array2<f64> {
        self.data.mapv(|z| z.norm())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: ComplexField,
    pub v: ComplexField,
    pub epsilon: f64,
    pub g: f64,
}

impl SimState {
    pub fn new(u: ComplexField, v: ComplexField, epsilon: f64, g: f64) -> Result<Self> {
        let s = Self {
            t: 0.0,
            u,
            v,
            epsilon,
            g,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.grid != self.v.grid || self.u.domain != self.v.domain {
            return Err(Error::InvalidArgument("u and v must share a grid".into()));
        }
        if !(0.0..1.0).contains(&self.g) {
            return Err(Error::InvalidArgument(format!(
                "g = {} outside [0, 1)",
                self.g
            )));
        }
        let (hx, hy) = self.u.spacing();
        if !(self.epsilon > 0.0 && self.epsilon >= 2.0 * hx.max(hy) * (1.0 - 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {} must be at least twice the grid spacing {}",
                self.epsilon,
                hx.max(hy)
            )));
        }
        Ok(())
    }

    pub fn field(&self, c: Component) -> &ComplexField {
        match c {
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Options for [`build_initial_data`].
#[derive(Debug, Clone, Copy)]
pub struct InitialDataOptions {
    /// Minimum pairwise vortex distance in units of `ε`.
    pub min_distance: f64,
    /// Minimum wall distance in units of `ε`.
    pub min_wall_distance: f64,
    /// Point where the phase is pinned to zero.
    pub phase_reference: Option<Vec2>,
}

impl Default for InitialDataOptions {
    fn default() -> Self {
        Self {
            min_distance: 10.0,
            min_wall_distance: 5.0,
            phase_reference: None,
        }
    }
}

fn modulus_factor(
    profile: &RadialProfile,
    own: &[Vortex],
    other: &[Vortex],
    x: Vec2,
    eps: f64,
) -> f64 {
    let s = background(profile.g);
    let mut m = s;
    for a in own {
        m *= profile.eval(x.dist(a.position) / eps).0 / s;
    }
    for b in other {
        m *= profile.eval(x.dist(b.position) / eps).1 / s;
    }
    m
}

/// Well-prepared data: each component carries the core profile `f1` at its
/// own vortices, the companion bump `f2` at the other component's vortices,
/// and the canonical phase of its own family.
pub fn build_initial_data(
    domain: &Domain,
    grid: GridSpec,
    vortices: &VortexConfiguration,
    profile: &RadialProfile,
    epsilon: f64,
    opts: &InitialDataOptions,
) -> Result<SimState> {
    let Domain::Rectangle { lower_left, .. } = *domain else {
        return Err(Error::InvalidArgument("PDE runs need a rectangle".into()));
    };
    vortices.validate(domain)?;
    let g = profile.g;
    let all: Vec<&Vortex> = vortices.u.iter().chain(&vortices.v).collect();
    for (k, a) in all.iter().enumerate() {
        if domain.distance_to_boundary(a.position) < opts.min_wall_distance * epsilon {
            return Err(Error::Configuration(format!(
                "vortex at ({}, {}) is closer than {}ε to the wall",
                a.position.x, a.position.y, opts.min_wall_distance
            )));
        }
        for b in &all[k + 1..] {
            if a.position.dist(b.position) < opts.min_distance * epsilon {
                return Err(Error::Configuration(format!(
                    "vortices at ({}, {}) and ({}, {}) are closer than {}ε",
                    a.position.x, a.position.y, b.position.x, b.position.y, opts.min_distance
                )));
            }
        }
    }
    let green = domain.boundary_green(grid)?;
    let (hx, hy) = grid.spacing(domain);
    let reference = opts
        .phase_reference
        .unwrap_or(lower_left + Vec2::new(0.5 * hx, 0.5 * hy));
    let make = |own: &[Vortex], other: &[Vortex]| -> Result<ComplexField> {
        let phase = phase_on_grid(&green, own, grid, reference)?;
        let data = Array2::from_shape_fn((grid.ny, grid.nx), |(j, i)| {
            let x = grid.cell_center(domain, i, j);
            let m = modulus_factor(profile, own, other, x, epsilon);
            Complex64::from_polar(m, phase[j * grid.nx + i])
        });
        ComplexField::new(*domain, grid, data)
    };
    let u = make(&vortices.u, &vortices.v)?;
    let v = make(&vortices.v, &vortices.u)?;
    SimState::new(u, v, epsilon, g)
}

/// Settings for [`Propagator`].
#[derive(Debug, Clone, Copy)]
pub struct StepConfig {
    /// Apply the nonlinear substeps (disable to test the kinetic flow alone).
    pub nonlinear: bool,
    /// Largest allowed `dt / ε²`.
    pub max_dt_ratio: f64,
    /// Kinetic phase per step `θ = μ dt` is exact up to `exact_phase` and
    /// saturates smoothly below `phase_ceiling` beyond it. Exact splitting
    /// is unstable for modes with `θ` just below a multiple of `π` on a
    /// nonzero background; `None` keeps every mode exact.
    pub phase_limit: Option<(f64, f64)>,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            nonlinear: true,
            max_dt_ratio: 0.5,
            phase_limit: Some((1.0, 2.0)),
        }
    }
}

fn limited_phase(theta: f64, limit: Option<(f64, f64)>) -> f64 {
    match limit {
        Some((exact, ceiling)) if theta > exact => {
            let w = ceiling - exact;
            exact + w * ((theta - exact) / w).tanh()
        }
        _ => theta,
    }
}

/// Row-parallel 2-D cosine transforms on row-major `ny x nx` buffers.
struct Cosine2d {
    nx: usize,
    ny: usize,
    along_x: Arc<dyn TransformType2And3<f64>>,
    along_y: Arc<dyn TransformType2And3<f64>>,
}

impl Cosine2d {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            nx,
            ny,
            along_x: planner.plan_dct2(nx),
            along_y: planner.plan_dct2(ny),
        }
    }

    fn rows(plan: &Arc<dyn TransformType2And3<f64>>, buf: &mut [f64], n: usize, forward: bool) {
        buf.par_chunks_mut(n).for_each_init(
            || vec![0.0; plan.get_scratch_len()],
            |scratch, row| {
                if forward {
                    plan.process_dct2_with_scratch(row, scratch);
                } else {
                    plan.process_dct3_with_scratch(row, scratch);
                }
            },
        );
    }

    fn transpose(src: &[f64], dst: &mut [f64], rows: usize, cols: usize) {
        dst.par_chunks_mut(rows).enumerate().for_each(|(c, out)| {
            for (r, o) in out.iter_mut().enumerate() {
                *o = src[r * cols + c];
            }
        });
    }

    /// Forward transform; the result is laid out `[kx * ny + ky]`.
    fn forward(&self, buf: &mut [f64], tmp: &mut [f64]) {
        Self::rows(&self.along_x, buf, self.nx, true);
        Self::transpose(buf, tmp, self.ny, self.nx);
        Self::rows(&self.along_y, tmp, self.ny, true);
        buf.copy_from_slice(tmp);
    }

    /// Unnormalized inverse of [`Cosine2d::forward`] (scales by `nx ny / 4`).
    fn inverse(&self, buf: &mut [f64], tmp: &mut [f64]) {
        Self::rows(&self.along_y, buf, self.ny, false);
        Self::transpose(buf, tmp, self.nx, self.ny);
        Self::rows(&self.along_x, tmp, self.nx, false);
        buf.copy_from_slice(tmp);
    }
}

/// Continuum Neumann eigenvalues `(kπ/Lx)² + (lπ/Ly)²` in `[kx * ny + ky]` layout.
fn neumann_eigenvalues(domain: &Domain, grid: GridSpec) -> Vec<f64> {
    let (_, lx, ly) = domain.bounding_box();
    let mut mu = vec![0.0; grid.nx * grid.ny];
    for k in 0..grid.nx {
        let a = (k as f64 * std::f64::consts::PI / lx).powi(2);
        for l in 0..grid.ny {
            mu[k * grid.ny + l] = a + (l as f64 * std::f64::consts::PI / ly).powi(2);
        }
    }
    mu
}

/// Precomputed transforms and phase factors for a fixed grid and step.
pub struct Propagator {
    cosine: Cosine2d,
    kinetic: Vec<Complex64>,
    dt: f64,
    config: StepConfig,
    re: Vec<f64>,
    im: Vec<f64>,
    tmp: Vec<f64>,
}

impl Propagator {
    pub fn new(
        domain: &Domain,
        grid: GridSpec,
        epsilon: f64,
        dt: f64,
        config: StepConfig,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt = {dt} must be positive"
            )));
        }
        if let Some((exact, ceiling)) = config.phase_limit {
            if !(exact > 0.0 && ceiling > exact && ceiling < std::f64::consts::PI) {
                return Err(Error::InvalidArgument(format!(
                    "phase limit ({exact}, {ceiling}) must satisfy 0 < exact < ceiling < π"
                )));
            }
        }
        if dt > config.max_dt_ratio * epsilon * epsilon {
            return Err(Error::InvalidArgument(format!(
                "dt = {dt} exceeds {} ε² = {}",
                config.max_dt_ratio,
                config.max_dt_ratio * epsilon * epsilon
            )));
        }
        let scale = 4.0 / (grid.nx * grid.ny) as f64;
        let kinetic = neumann_eigenvalues(domain, grid)
            .into_iter()
            .map(|mu| Complex64::from_polar(scale, limited_phase(mu * dt, config.phase_limit)))
            .collect();
        let n = grid.nx * grid.ny;
        Ok(Self {
            cosine: Cosine2d::new(grid.nx, grid.ny),
            kinetic,
            dt,
            config,
            re: vec![0.0; n],
            im: vec![0.0; n],
            tmp: vec![0.0; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic_flow(&mut self, field: &mut Array2<Complex64>) {
        for (k, z) in field.iter().enumerate() {
            self.re[k] = z.re;
            self.im[k] = z.im;
        }
        self.cosine.forward(&mut self.re, &mut self.tmp);
        self.cosine.forward(&mut self.im, &mut self.tmp);
        self.re
            .par_iter_mut()
            .zip(self.im.par_iter_mut())
            .zip(self.kinetic.par_iter())
            .for_each(|((re, im), f)| {
                let z = Complex64::new(*re, *im) * f;
                *re = z.re;
                *im = z.im;
            });
        self.cosine.inverse(&mut self.re, &mut self.tmp);
        self.cosine.inverse(&mut self.im, &mut self.tmp);
        for (k, z) in field.iter_mut().enumerate() {
            *z = Complex64::new(self.re[k], self.im[k]);
        }
    }

    fn nonlinear_flow(
        u: &mut Array2<Complex64>,
        v: &mut Array2<Complex64>,
        tau: f64,
        eps: f64,
        g: f64,
    ) {
        let c = tau / (eps * eps);
        let us = u.as_slice_mut().expect("standard layout");
        let vs = v.as_slice_mut().expect("standard layout");
        us.par_iter_mut().zip(vs.par_iter_mut()).for_each(|(a, b)| {
            let (pa, pb) = (a.norm_sqr(), b.norm_sqr());
            *a *= Complex64::from_polar(1.0, c * (pa + g * pb - 1.0));
            *b *= Complex64::from_polar(1.0, c * (pb + g * pa - 1.0));
        });
    }

    /// One Strang step `N(dt/2) K(dt) N(dt/2)`. On non-finite output the
    /// state is left at its last finite value and a blowup error is returned.
    pub fn step(&mut self, state: &mut SimState) -> Result<()> {
        let mut u = state.u.data.clone();
        let mut v = state.v.data.clone();
        let half = 0.5 * self.dt;
        if self.config.nonlinear {
            Self::nonlinear_flow(&mut u, &mut v, half, state.epsilon, state.g);
        }
        self.kinetic_flow(&mut u);
        self.kinetic_flow(&mut v);
        if self.config.nonlinear {
            Self::nonlinear_flow(&mut u, &mut v, half, state.epsilon, state.g);
        }
        let finite = |a: &Array2<Complex64>| a.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !(finite(&u) && finite(&v)) {
            return Err(Error::Blowup {
                t: state.t + self.dt,
            });
        }
        state.u.data = u;
        state.v.data = v;
        state.t += self.dt;
        Ok(())
    }

    pub fn run(&mut self, state: &mut SimState, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }
}

/// `½|∇u|²` integrated exactly in the cosine basis of the kinetic flow.
fn kinetic_energy(field: &ComplexField) -> f64 {
    let grid = field.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let cosine = Cosine2d::new(nx, ny);
    let mu = neumann_eigenvalues(&field.domain, grid);
    let mut tmp = vec![0.0; nx * ny];
    let mut total = 0.0;
    for part in 0..2 {
        let mut buf: Vec<f64> = field
            .data
            .iter()
            .map(|z| if part == 0 { z.re } else { z.im })
            .collect();
        cosine.forward(&mut buf, &mut tmp);
        for k in 0..nx {
            let ck = if k == 0 { 1.0 } else { 2.0 };
            for l in 0..ny {
                let cl = if l == 0 { 1.0 } else { 2.0 };
                let x = buf[k * ny + l];
                total += mu[k * ny + l] * x * x * ck * cl;
            }
        }
    }
    let (_, lx, ly) = field.domain.bounding_box();
    0.5 * total * lx * ly / ((nx * ny) as f64).powi(2)
}

/// Energy density potential `(1/4ε²)[(|u|²-s²)² + (|v|²-s²)² + 2g(|u|²-s²)(|v|²-s²)]`.
fn potential_energy(state: &SimState) -> f64 {
    let s2 = 1.0 / (1.0 + state.g);
    let g = state.g;
    let c = 0.25 / (state.epsilon * state.epsilon);
    let sum: f64 = state
        .u
        .data
        .iter()
        .zip(state.v.data.iter())
        .map(|(a, b)| {
            let p = a.norm_sqr() - s2;
            let q = b.norm_sqr() - s2;
            p * p + q * q + 2.0 * g * p * q
        })
        .sum();
    c * sum * state.u.cell_area()
}

/// Total energy: spectral kinetic part (the quadratic form conserved by the
/// kinetic substep) plus midpoint-rule potential part.
pub fn energy(state: &SimState) -> f64 {
    kinetic_energy(&state.u) + kinetic_energy(&state.v) + potential_energy(state)
}

fn axis_diff(get: impl Fn(usize) -> Complex64, n: usize, k: usize, h: f64) -> Complex64 {
    if k == 0 {
        (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
    } else {
        (get(k + 1) - get(k - 1)) / (2.0 * h)
    }
}

fn real_diff(get: impl Fn(usize) -> f64, n: usize, k: usize, h: f64) -> f64 {
    if k == 0 {
        (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
    } else {
        (get(k + 1) - get(k - 1)) / (2.0 * h)
    }
}

/// `j(u) = Im(ū ∇u)` by centered differences (second-order one-sided at walls).
pub fn current(field: &ComplexField) -> (Array2<f64>, Array2<f64>) {
    let (hx, hy) = field.spacing();
    let (ny, nx) = field.data.dim();
    let d = &field.data;
    let jx = Array2::from_shape_fn((ny, nx), |(j, i)| {
        (d[[j, i]].conj() * axis_diff(|m| d[[j, m]], nx, i, hx)).im
    });
    let jy = Array2::from_shape_fn((ny, nx), |(j, i)| {
        (d[[j, i]].conj() * axis_diff(|m| d[[m, i]], ny, j, hy)).im
    });
    (jx, jy)
}

/// Signed vortex density `½ ∇·(J j(u)) = ½(∂x j_y - ∂y j_x)`.
pub fn jacobian(field: &ComplexField) -> Array2<f64> {
    let (hx, hy) = field.spacing();
    let (jx, jy) = current(field);
    let (ny, nx) = field.data.dim();
    Array2::from_shape_fn((ny, nx), |(j, i)| {
        0.5 * (real_diff(|m| jy[[j, m]], nx, i, hx) - real_diff(|m| jx[[m, i]], ny, j, hy))
    })
}

/// `∫_{B_r(c)} J(u)` over cells whose centers lie in the disk.
pub fn jacobian_mass(field: &ComplexField, center: Vec2, radius: f64) -> f64 {
    let jac = jacobian(field);
    let area = field.cell_area();
    let mut total = 0.0;
    for ((j, i), v) in jac.indexed_iter() {
        if field.center(i, j).dist(center) <= radius {
            total += v * area;
        }
    }
    total
}

/// `Q = ∫ (j(u) + j(v))`.
pub fn momentum(state: &SimState) -> Vec2 {
    let mut q = Vec2::ZERO;
    for f in [&state.u, &state.v] {
        let (jx, jy) = current(f);
        q += f.cell_area() * Vec2::new(jx.sum(), jy.sum());
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub energy: f64,
    pub momentum: Vec2,
}

pub fn diagnostics(state: &SimState) -> Diagnostics {
    Diagnostics {
        t: state.t,
        mass_u: state.u.mass(),
        mass_v: state.v.mass(),
        energy: energy(state),
        momentum: momentum(state),
    }
}

pub fn write_diagnostics_csv<W: std::io::Write>(
    rows: &[Diagnostics],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "t,mass_u,mass_v,energy,Qx,Qy")?;
    for d in rows {
        writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?}",
            d.t, d.mass_u, d.mass_v, d.energy, d.momentum.x, d.momentum.y
        )?;
    }
    Ok(())
}
