//! Domains, grids, and the harmonic boundary correction `F(x, y)`.
//!
//! `F(·, y)` is harmonic in the domain and equals `-log|x - y|` on the
//! boundary, so `log|x - y| + F(x, y)` is (2π times) the Dirichlet Green
//! function. Disks use the image-charge closed form; rectangles use a cached
//! five-point Dirichlet solve per quantized source location.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rustdct::{DctPlanner, Dst1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Disk { center: Vec2, radius: f64 },
    Rectangle { lower_left: Vec2, lx: f64, ly: f64 },
}

impl Domain {
    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Domain::Disk { center, radius })
    }

    pub fn unit_disk() -> Self {
        Domain::Disk {
            center: Vec2::ZERO,
            radius: 1.0,
        }
    }

    pub fn rectangle(lower_left: Vec2, lx: f64, ly: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) || !lower_left.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rectangle sides must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Domain::Rectangle { lower_left, lx, ly })
    }

    /// The square `[-half, half]^2`.
    pub fn centered_square(half: f64) -> Result<Self> {
        Self::rectangle(Vec2::new(-half, -half), 2.0 * half, 2.0 * half)
    }

    /// Euclidean distance to the boundary; negative outside.
    pub fn distance_to_boundary(&self, x: Vec2) -> f64 {
        match *self {
            Domain::Disk { center, radius } => radius - x.dist(center),
            Domain::Rectangle { lower_left, lx, ly } => {
                let dx0 = x.x - lower_left.x;
                let dx1 = lower_left.x + lx - x.x;
                let dy0 = x.y - lower_left.y;
                let dy1 = lower_left.y + ly - x.y;
                let inside = dx0.min(dx1).min(dy0).min(dy1);
                if inside >= 0.0 {
                    inside
                } else {
                    let ox = (-dx0).max(-dx1).max(0.0);
                    let oy = (-dy0).max(-dy1).max(0.0);
                    -ox.hypot(oy)
                }
            }
        }
    }

    pub fn contains_strictly(&self, x: Vec2) -> bool {
        x.is_finite() && self.distance_to_boundary(x) > 0.0
    }

    pub fn check_interior(&self, x: Vec2) -> Result<()> {
        if self.contains_strictly(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(x))
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Domain::Rectangle { lx, ly, .. } => lx * ly,
        }
    }

    /// Axis-aligned bounding box as (lower-left, width, height).
    pub fn bounding_box(&self) -> (Vec2, f64, f64) {
        match *self {
            Domain::Disk { center, radius } => (
                center - Vec2::new(radius, radius),
                2.0 * radius,
                2.0 * radius,
            ),
            Domain::Rectangle { lower_left, lx, ly } => (lower_left, lx, ly),
        }
    }

    /// Builds the boundary-correction evaluator. `grid` sets the resolution
    /// of the numerical solve and is ignored for disks.
    pub fn boundary_green(&self, grid: GridSpec) -> Result<BoundaryGreen> {
        match *self {
            Domain::Disk { center, radius } => Ok(BoundaryGreen::Disk { center, radius }),
            Domain::Rectangle { .. } => {
                grid.validate()?;
                Ok(BoundaryGreen::Rectangle(Arc::new(RectangleGreen::new(
                    *self, grid,
                ))))
            }
        }
    }
}

/// Cell counts of a uniform grid over a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        let g = Self { nx, ny };
        g.validate()?;
        Ok(g)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.ny < 8 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 8 cells per axis, got {} x {}",
                self.nx, self.ny
            )));
        }
        Ok(())
    }

    /// Cell sizes `(hx, hy)` over the domain's bounding box.
    pub fn spacing(&self, domain: &Domain) -> (f64, f64) {
        let (_, lx, ly) = domain.bounding_box();
        (lx / self.nx as f64, ly / self.ny as f64)
    }

    /// Center of cell `(i, j)`; cell-centered layout.
    pub fn cell_center(&self, domain: &Domain, i: usize, j: usize) -> Vec2 {
        let (ll, _, _) = domain.bounding_box();
        let (hx, hy) = self.spacing(domain);
        Vec2::new(ll.x + (i as f64 + 0.5) * hx, ll.y + (j as f64 + 0.5) * hy)
    }
}

/// Scalar values on the `(nx + 1) x (ny + 1)` vertex lattice of a rectangle,
/// stored row-major with `x` fastest.
#[derive(Debug, Clone)]
pub struct NodeField {
    pub lower_left: Vec2,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl NodeField {
    fn zeros(lower_left: Vec2, hx: f64, hy: f64, nx: usize, ny: usize) -> Self {
        Self {
            lower_left,
            hx,
            hy,
            nx,
            ny,
            values: vec![0.0; (nx + 1) * (ny + 1)],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.lower_left.x + i as f64 * self.hx,
            self.lower_left.y + j as f64 * self.hy,
        )
    }

    /// Bilinear interpolation; points outside are clamped to the lattice.
    pub fn interpolate(&self, x: Vec2) -> f64 {
        let fx = ((x.x - self.lower_left.x) / self.hx).clamp(0.0, self.nx as f64);
        let fy = ((x.y - self.lower_left.y) / self.hy).clamp(0.0, self.ny as f64);
        let i = (fx.floor() as usize).min(self.nx - 1);
        let j = (fy.floor() as usize).min(self.ny - 1);
        let s = fx - i as f64;
        let t = fy - j as f64;
        (1.0 - s) * (1.0 - t) * self.at(i, j)
            + s * (1.0 - t) * self.at(i + 1, j)
            + (1.0 - s) * t * self.at(i, j + 1)
            + s * t * self.at(i + 1, j + 1)
    }

    /// Nodal gradient: centered differences inside, second-order one-sided
    /// differences on the boundary rows and columns.
    pub fn gradient(&self) -> (NodeField, NodeField) {
        let mut gx = NodeField::zeros(self.lower_left, self.hx, self.hy, self.nx, self.ny);
        let mut gy = gx.clone();
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let k = self.idx(i, j);
                gx.values[k] = diff(self.nx, i, self.hx, |m| self.at(m, j));
                gy.values[k] = diff(self.ny, j, self.hy, |m| self.at(i, m));
            }
        }
        (gx, gy)
    }
}

fn diff(n: usize, i: usize, h: f64, f: impl Fn(usize) -> f64) -> f64 {
    if i == 0 {
        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
    } else if i == n {
        (3.0 * f(n) - 4.0 * f(n - 1) + f(n - 2)) / (2.0 * h)
    } else {
        (f(i + 1) - f(i - 1)) / (2.0 * h)
    }
}

/// Options for [`solve_laplace_dirichlet`].
#[derive(Debug, Clone, Copy)]
pub struct LaplaceOptions {
    /// Target relative residual `||b - A u|| / ||b||`.
    pub tolerance: f64,
    /// Iteration cap; `None` means `20 (nx + ny)`.
    pub max_iterations: Option<usize>,
    /// Precondition with the fast sine-transform inverse of the 5-point operator.
    pub fast_sine_preconditioner: bool,
}

impl Default for LaplaceOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: None,
            fast_sine_preconditioner: true,
        }
    }
}

/// Result of a Dirichlet solve.
#[derive(Debug, Clone)]
pub struct LaplaceSolution {
    pub field: NodeField,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves the five-point discrete Laplace equation on the vertex lattice of a
/// rectangle with Dirichlet data on the boundary nodes.
pub fn solve_laplace_dirichlet(
    domain: &Domain,
    grid: GridSpec,
    boundary_data: impl Fn(Vec2) -> f64,
    options: LaplaceOptions,
) -> Result<LaplaceSolution> {
    let Domain::Rectangle { lower_left, .. } = *domain else {
        return Err(Error::InvalidArgument(
            "numerical Dirichlet solve requires a rectangle".into(),
        ));
    };
    grid.validate()?;
    let (hx, hy) = grid.spacing(domain);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut field = NodeField::zeros(lower_left, hx, hy, nx, ny);
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 || j == 0 || i == nx || j == ny {
                let v = boundary_data(field.node(i, j));
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "boundary data not finite at node ({i}, {j})"
                    )));
                }
                let k = field.idx(i, j);
                field.values[k] = v;
            }
        }
    }

    let op = InteriorOperator::new(nx - 1, ny - 1, hx, hy);
    // b collects the boundary couplings of -Δ_h.
    let mut b = vec![0.0; op.len()];
    for j in 1..ny {
        for i in 1..nx {
            let mut acc = 0.0;
            if i == 1 {
                acc += field.at(0, j) / (hx * hx);
            }
            if i == nx - 1 {
                acc += field.at(nx, j) / (hx * hx);
            }
            if j == 1 {
                acc += field.at(i, 0) / (hy * hy);
            }
            if j == ny - 1 {
                acc += field.at(i, ny) / (hy * hy);
            }
            b[op.idx(i - 1, j - 1)] = acc;
        }
    }
    let cap = options.max_iterations.unwrap_or(20 * (nx + ny));
    let precond = options
        .fast_sine_preconditioner
        .then(|| SinePreconditioner::new(&op));
    let (u, iterations, residual) =
        conjugate_gradient(&op, &b, precond.as_ref(), options.tolerance, cap);
    if residual > options.tolerance {
        return Err(Error::Solver {
            iterations,
            residual,
        });
    }
    for j in 1..ny {
        for i in 1..nx {
            let k = field.idx(i, j);
            field.values[k] = u[op.idx(i - 1, j - 1)];
        }
    }
    Ok(LaplaceSolution {
        field,
        iterations,
        relative_residual: residual,
    })
}

/// `-Δ_h` on the interior nodes with homogeneous Dirichlet closure.
struct InteriorOperator {
    mx: usize,
    my: usize,
    cx: f64,
    cy: f64,
}

impl InteriorOperator {
    fn new(mx: usize, my: usize, hx: f64, hy: f64) -> Self {
        Self {
            mx,
            my,
            cx: 1.0 / (hx * hx),
            cy: 1.0 / (hy * hy),
        }
    }

    fn len(&self) -> usize {
        self.mx * self.my
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.mx + i
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let diag = 2.0 * (self.cx + self.cy);
        for j in 0..self.my {
            for i in 0..self.mx {
                let k = self.idx(i, j);
                let mut acc = diag * u[k];
                if i > 0 {
                    acc -= self.cx * u[k - 1];
                }
                if i + 1 < self.mx {
                    acc -= self.cx * u[k + 1];
                }
                if j > 0 {
                    acc -= self.cy * u[k - self.mx];
                }
                if j + 1 < self.my {
                    acc -= self.cy * u[k + self.mx];
                }
                out[k] = acc;
            }
        }
    }
}

/// Exact inverse of [`InteriorOperator`] through a 2-D type-I sine transform.
struct SinePreconditioner {
    mx: usize,
    my: usize,
    dst_x: Arc<dyn Dst1<f64>>,
    dst_y: Arc<dyn Dst1<f64>>,
    inv_eig: Vec<f64>,
}

impl SinePreconditioner {
    fn new(op: &InteriorOperator) -> Self {
        let mut planner = DctPlanner::new();
        let dst_x = planner.plan_dst1(op.mx);
        let dst_y = planner.plan_dst1(op.my);
        let nx = (op.mx + 1) as f64;
        let ny = (op.my + 1) as f64;
        let scale = (2.0 / nx) * (2.0 / ny);
        let mut inv_eig = vec![0.0; op.len()];
        for l in 0..op.my {
            let sy = (std::f64::consts::PI * (l + 1) as f64 / (2.0 * ny)).sin();
            for k in 0..op.mx {
                let sx = (std::f64::consts::PI * (k + 1) as f64 / (2.0 * nx)).sin();
                let eig = 4.0 * op.cx * sx * sx + 4.0 * op.cy * sy * sy;
                inv_eig[l * op.mx + k] = scale / eig;
            }
        }
        Self {
            mx: op.mx,
            my: op.my,
            dst_x,
            dst_y,
            inv_eig,
        }
    }

    fn transform(&self, data: &mut [f64]) {
        for row in data.chunks_exact_mut(self.mx) {
            self.dst_x.process_dst1(row);
        }
        let mut col = vec![0.0; self.my];
        for i in 0..self.mx {
            for j in 0..self.my {
                col[j] = data[j * self.mx + i];
            }
            self.dst_y.process_dst1(&mut col);
            for j in 0..self.my {
                data[j * self.mx + i] = col[j];
            }
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.transform(z);
        for (v, w) in z.iter_mut().zip(&self.inv_eig) {
            *v *= w;
        }
        self.transform(z);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns (solution, iterations, relative residual).
fn conjugate_gradient(
    op: &InteriorOperator,
    b: &[f64],
    precond: Option<&SinePreconditioner>,
    tol: f64,
    cap: usize,
) -> (Vec<f64>, usize, f64) {
    let n = op.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (x, 0, 0.0);
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let precondition = |r: &[f64], z: &mut [f64]| match precond {
        Some(p) => p.apply(r, z),
        None => z.copy_from_slice(r),
    };
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=cap {
        op.apply(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            // recompute the true residual to guard against drift in r
            op.apply(&x, &mut q);
            let true_rel = b
                .iter()
                .zip(&q)
                .map(|(bi, qi)| (bi - qi) * (bi - qi))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            if true_rel <= tol {
                return (x, it, true_rel);
            }
            for k in 0..n {
                r[k] = b[k] - q[k];
            }
            rel = true_rel;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    (x, cap, rel)
}

/// Cached samples of `F(·, y_q)` and its x-gradient for one source quantum.
#[derive(Debug)]
struct GreenSample {
    f: NodeField,
    gx: NodeField,
    gy: NodeField,
}

/// Numerical boundary correction on a rectangle.
///
/// Sources are snapped to a lattice of spacing `h / 4`; values at an
/// arbitrary source are bilinearly blended from the four surrounding source
/// quanta so that `F` stays continuous in `y`.
#[derive(Debug)]
pub struct RectangleGreen {
    domain: Domain,
    grid: GridSpec,
    quantum: (f64, f64),
    cache: RwLock<HashMap<(i64, i64), Arc<GreenSample>>>,
}

impl RectangleGreen {
    fn new(domain: Domain, grid: GridSpec) -> Self {
        let (hx, hy) = grid.spacing(&domain);
        Self {
            domain,
            grid,
            quantum: (hx / 4.0, hy / 4.0),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn cached_sources(&self) -> usize {
        self.cache.read().expect("green cache poisoned").len()
    }

    fn sample(&self, key: (i64, i64)) -> Result<Arc<GreenSample>> {
        if let Some(s) = self.cache.read().expect("green cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let source = self.source_of(key);
        let sol = solve_laplace_dirichlet(
            &self.domain,
            self.grid,
            |b| -(b - source).norm().ln(),
            LaplaceOptions::default(),
        )?;
        let (gx, gy) = sol.field.gradient();
        let sample = Arc::new(GreenSample {
            f: sol.field,
            gx,
            gy,
        });
        let mut cache = self.cache.write().expect("green cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(sample)))
    }

    fn source_of(&self, key: (i64, i64)) -> Vec2 {
        let (ll, _, _) = self.domain.bounding_box();
        Vec2::new(
            ll.x + key.0 as f64 * self.quantum.0,
            ll.y + key.1 as f64 * self.quantum.1,
        )
    }

    /// The four source quanta around `y` with their bilinear weights.
    fn stencil(&self, y: Vec2) -> [((i64, i64), f64); 4] {
        let (ll, lx, ly) = self.domain.bounding_box();
        let kx_max = (lx / self.quantum.0).round() as i64 - 1;
        let ky_max = (ly / self.quantum.1).round() as i64 - 1;
        let fx = (y.x - ll.x) / self.quantum.0;
        let fy = (y.y - ll.y) / self.quantum.1;
        // keep every source quantum strictly inside the rectangle
        let i0 = (fx.floor() as i64).clamp(1, kx_max - 1);
        let j0 = (fy.floor() as i64).clamp(1, ky_max - 1);
        let s = (fx - i0 as f64).clamp(0.0, 1.0);
        let t = (fy - j0 as f64).clamp(0.0, 1.0);
        [
            ((i0, j0), (1.0 - s) * (1.0 - t)),
            ((i0 + 1, j0), s * (1.0 - t)),
            ((i0, j0 + 1), (1.0 - s) * t),
            ((i0 + 1, j0 + 1), s * t),
        ]
    }

    fn blend(&self, y: Vec2, eval: impl Fn(&GreenSample) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (key, w) in self.stencil(y) {
            if w == 0.0 {
                continue;
            }
            acc += w * eval(self.sample(key)?.as_ref());
        }
        Ok(acc)
    }

    /// The sampled `F(·, y)` on the vertex lattice (blended over source quanta).
    pub fn field_for_source(&self, y: Vec2) -> Result<NodeField> {
        let mut out: Option<NodeField> = None;
        for (key, w) in self.stencil(y) {
            if w == 0.0 {
                continue;
            }
            let s = self.sample(key)?;
            match out.as_mut() {
                None => {
                    let mut f = s.f.clone();
                    f.values.iter_mut().for_each(|v| *v *= w);
                    out = Some(f);
                }
                Some(acc) => {
                    for (a, b) in acc.values.iter_mut().zip(&s.f.values) {
                        *a += w * b;
                    }
                }
            }
        }
        Ok(out.expect("stencil has positive total weight"))
    }
}

/// Evaluator for the boundary correction `F(x, y)` and `∇ₓF(x, y)`.
#[derive(Debug, Clone)]
pub enum BoundaryGreen {
    Disk { center: Vec2, radius: f64 },
    Rectangle(Arc<RectangleGreen>),
}

impl BoundaryGreen {
    pub fn domain(&self) -> Domain {
        match self {
            BoundaryGreen::Disk { center, radius } => Domain::Disk {
                center: *center,
                radius: *radius,
            },
            BoundaryGreen::Rectangle(r) => r.domain,
        }
    }

    /// `F(x, y)`; both points must lie strictly inside the domain.
    pub fn f(&self, x: Vec2, y: Vec2) -> Result<f64> {
        let domain = self.domain();
        domain.check_interior(x)?;
        domain.check_interior(y)?;
        match self {
            BoundaryGreen::Disk { center, radius } => Ok(disk_f(*center, *radius, x, y)),
            BoundaryGreen::Rectangle(r) => r.blend(y, |s| s.f.interpolate(x)),
        }
    }

    /// Gradient of `F` in its first argument.
    pub fn grad_x(&self, x: Vec2, y: Vec2) -> Result<Vec2> {
        let domain = self.domain();
        domain.check_interior(x)?;
        domain.check_interior(y)?;
        match self {
            BoundaryGreen::Disk { center, radius } => Ok(disk_grad_x(*center, *radius, x, y)),
            BoundaryGreen::Rectangle(r) => Ok(Vec2::new(
                r.blend(y, |s| s.gx.interpolate(x))?,
                r.blend(y, |s| s.gy.interpolate(x))?,
            )),
        }
    }
}

/// Image-charge vector `w` with `F(x, y) = -log|w|` on a disk.
#[inline]
fn disk_image(center: Vec2, radius: f64, x: Vec2, y: Vec2) -> (Vec2, f64) {
    let xr = x - center;
    let yr = y - center;
    let q = yr.norm();
    if q == 0.0 {
        return (Vec2::new(radius, 0.0), 0.0);
    }
    let w = (q / radius) * xr - (radius / q) * yr;
    (w, q / radius)
}

fn disk_f(center: Vec2, radius: f64, x: Vec2, y: Vec2) -> f64 {
    let (w, _) = disk_image(center, radius, x, y);
    -w.norm().ln()
}

fn disk_grad_x(center: Vec2, radius: f64, x: Vec2, y: Vec2) -> Vec2 {
    let (w, scale) = disk_image(center, radius, x, y);
    -(scale / w.norm_sq()) * w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoundaryGreen {
        Domain::unit_disk()
            .boundary_green(GridSpec::square(8).unwrap())
            .unwrap()
    }

    #[test]
    fn disk_center_source_is_zero() {
        let g = unit();
        for x in [Vec2::new(0.3, 0.1), Vec2::new(-0.9, 0.0), Vec2::ZERO] {
            assert_eq!(g.f(x, Vec2::ZERO).unwrap(), 0.0);
        }
    }

    #[test]
    fn disk_diagonal_value() {
        let g = unit();
        let p = Vec2::new(0.5, 0.0);
        assert!((g.f(p, p).unwrap() - (-(0.75f64).ln())).abs() < 1e-14);
    }

    #[test]
    fn disk_symmetry() {
        let g = unit();
        let a = Vec2::new(0.3, 0.1);
        let b = Vec2::new(-0.2, 0.4);
        assert!((g.f(a, b).unwrap() - g.f(b, a).unwrap()).abs() <= 1e-10);
        let g2 = Domain::disk(Vec2::new(1.0, -2.0), 2.5)
            .unwrap()
            .boundary_green(GridSpec::square(8).unwrap())
            .unwrap();
        let a = Vec2::new(1.3, -1.1);
        let b = Vec2::new(0.2, -3.4);
        assert!((g2.f(a, b).unwrap() - g2.f(b, a).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn disk_boundary_consistency() {
        let c = Vec2::new(0.4, -0.3);
        let r = 1.7;
        let y = Vec2::new(0.9, 0.2);
        for k in 0..64 {
            let th = k as f64 * 0.1;
            let x = c + (r - 1e-8) * Vec2::new(th.cos(), th.sin());
            let f = disk_f(c, r, x, y);
            assert!((f + x.dist(y).ln()).abs() <= 1e-6, "k={k}");
        }
    }

    #[test]
    fn disk_gradient_matches_differences() {
        let y = Vec2::new(-0.3, 0.45);
        let x = Vec2::new(0.2, 0.1);
        let h = 1e-6;
        let g = disk_grad_x(Vec2::ZERO, 1.0, x, y);
        let fx = (disk_f(Vec2::ZERO, 1.0, x + Vec2::new(h, 0.0), y)
            - disk_f(Vec2::ZERO, 1.0, x - Vec2::new(h, 0.0), y))
            / (2.0 * h);
        let fy = (disk_f(Vec2::ZERO, 1.0, x + Vec2::new(0.0, h), y)
            - disk_f(Vec2::ZERO, 1.0, x - Vec2::new(0.0, h), y))
            / (2.0 * h);
        assert!((g.x - fx).abs() < 1e-8 && (g.y - fy).abs() < 1e-8);
    }

    #[test]
    fn outside_points_rejected() {
        let g = unit();
        assert!(matches!(
            g.f(Vec2::new(1.0, 0.0), Vec2::ZERO),
            Err(Error::OutsideDomain(_))
        ));
        assert!(g.f(Vec2::ZERO, Vec2::new(0.0, 2.0)).is_err());
    }

    #[test]
    fn distances() {
        let d = Domain::unit_disk();
        assert_eq!(d.distance_to_boundary(Vec2::ZERO), 1.0);
        assert_eq!(d.distance_to_boundary(Vec2::new(0.5, 0.0)), 0.5);
        let r = Domain::rectangle(Vec2::ZERO, 2.0, 1.0).unwrap();
        assert!((r.distance_to_boundary(Vec2::new(0.3, 0.4)) - 0.3).abs() < 1e-15);
        assert!((r.distance_to_boundary(Vec2::new(-3.0, 5.0)) + 5.0).abs() < 1e-12);
        assert!(r.distance_to_boundary(Vec2::new(1.0, 1.5)) < 0.0);
    }

    #[test]
    fn laplace_constant_and_linear_data() {
        let d = Domain::rectangle(Vec2::new(-1.0, -0.5), 2.0, 1.5).unwrap();
        let grid = GridSpec::new(24, 18).unwrap();
        let sol = solve_laplace_dirichlet(&d, grid, |_| 3.25, LaplaceOptions::default()).unwrap();
        assert!(sol.field.values.iter().all(|v| (v - 3.25).abs() < 1e-9));
        for precond in [true, false] {
            let opts = LaplaceOptions {
                fast_sine_preconditioner: precond,
                ..Default::default()
            };
            let sol = solve_laplace_dirichlet(&d, grid, |p| p.x, opts).unwrap();
            for j in 0..=grid.ny {
                for i in 0..=grid.nx {
                    let x = sol.field.node(i, j).x;
                    assert!((sol.field.at(i, j) - x).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn laplace_reports_nonconvergence() {
        let d = Domain::centered_square(1.0).unwrap();
        let opts = LaplaceOptions {
            fast_sine_preconditioner: false,
            max_iterations: Some(3),
            ..Default::default()
        };
        let err = solve_laplace_dirichlet(
            &d,
            GridSpec::square(32).unwrap(),
            |p| p.x * p.y + p.x.exp(),
            opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Solver { iterations: 3, residual } if residual > 1e-10));
    }

    #[test]
    fn laplace_rejects_disk() {
        let err = solve_laplace_dirichlet(
            &Domain::unit_disk(),
            GridSpec::square(16).unwrap(),
            |_| 0.0,
            LaplaceOptions::default(),
        );
        assert!(err.is_err());
    }
}
