//! The canonical harmonic map of a vortex family, represented through its
//! stream function `Φ`, current `j = -J∇Φ`, and phase `θ` with `∇θ = j`.
//!
//! `Φ(x) = Σ_j d_j (log|x - a_j| + F(x, a_j))` is constant on the boundary,
//! which is equivalent to a vanishing normal current there.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryGreen, Domain, GridSpec, NodeField};
use crate::linalg::gauss_legendre;
use crate::renormalized_energy::min_separation;
use crate::vec2::Vec2;

/// Which field of the coupled system a vortex belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    U,
    V,
}

impl Component {
    pub fn label(self) -> &'static str {
        match self {
            Component::U => "u",
            Component::V => "v",
        }
    }
}

impl std::str::FromStr for Component {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "u" => Ok(Component::U),
            "v" => Ok(Component::V),
            other => Err(format!("unknown component `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub position: Vec2,
    pub degree: i32,
}

impl Vortex {
    pub fn new(position: Vec2, degree: i32) -> Result<Self> {
        if degree != 1 && degree != -1 {
            return Err(Error::Configuration(format!(
                "vortex degree must be +1 or -1, got {degree}"
            )));
        }
        Ok(Self { position, degree })
    }

    pub fn flipped(self) -> Self {
        Self {
            degree: -self.degree,
            ..self
        }
    }
}

/// Vortices of both components: the `u`-family `a` and the `v`-family `b`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VortexConfiguration {
    pub u: Vec<Vortex>,
    pub v: Vec<Vortex>,
}

impl VortexConfiguration {
    pub fn new(u: Vec<Vortex>, v: Vec<Vortex>) -> Self {
        Self { u, v }
    }

    pub fn family(&self, c: Component) -> &[Vortex] {
        match c {
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_separation(&self, domain: &Domain) -> f64 {
        min_separation(&self.u, &self.v, domain)
    }

    /// All vortices strictly inside, pairwise distinct, and degrees ±1.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        for v in self.u.iter().chain(&self.v) {
            Vortex::new(v.position, v.degree)?;
            if !domain.contains_strictly(v.position) {
                return Err(Error::Configuration(format!(
                    "vortex at ({}, {}) is not inside the domain",
                    v.position.x, v.position.y
                )));
            }
        }
        if !self.is_empty() && self.min_separation(domain) <= 0.0 {
            return Err(Error::Configuration(
                "min_separation is zero: vortices coincide".into(),
            ));
        }
        Ok(())
    }
}

fn check_not_vortex(family: &[Vortex], x: Vec2) -> Result<()> {
    if family.iter().any(|v| v.position == x) {
        return Err(Error::Singularity(x));
    }
    Ok(())
}

/// `Φ(x) = Σ_j d_j (log|x - a_j| + F(x, a_j))`.
pub fn stream_function(green: &BoundaryGreen, family: &[Vortex], x: Vec2) -> Result<f64> {
    check_not_vortex(family, x)?;
    family.iter().try_fold(0.0, |acc, v| {
        Ok(acc + v.degree as f64 * (x.dist(v.position).ln() + green.f(x, v.position)?))
    })
}

/// `∇Φ(x)`.
pub fn stream_gradient(green: &BoundaryGreen, family: &[Vortex], x: Vec2) -> Result<Vec2> {
    check_not_vortex(family, x)?;
    family.iter().try_fold(Vec2::ZERO, |acc, v| {
        let d = x - v.position;
        Ok(acc + v.degree as f64 * ((1.0 / d.norm_sq()) * d + green.grad_x(x, v.position)?))
    })
}

/// The canonical current `j(H) = -J∇Φ`.
pub fn canonical_current(green: &BoundaryGreen, family: &[Vortex], x: Vec2) -> Result<Vec2> {
    Ok(-stream_gradient(green, family, x)?.symplectic())
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Harmonic conjugate (up to a constant) of `F(·, a)`, i.e. a function with
/// gradient `-J∇ₓF(·, a)`. Closed form on the disk; on rectangles it is
/// integrated numerically along the straight segment from `reference`.
fn conjugate_of_f(green: &BoundaryGreen, a: Vec2, x: Vec2, reference: Vec2) -> Result<f64> {
    match green {
        BoundaryGreen::Disk { center, radius } => {
            let ar = a - *center;
            let q2 = ar.norm_sq();
            if q2 == 0.0 {
                return Ok(0.0);
            }
            let image = *center + (radius * radius / q2) * ar;
            let arg = |p: Vec2| {
                let d = p - image;
                d.y.atan2(d.x)
            };
            Ok(-(arg(x) - arg(reference)))
        }
        BoundaryGreen::Rectangle(_) => {
            let (nodes, weights) = gauss_legendre(24, 0.0, 1.0);
            let dl = x - reference;
            let mut acc = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let p = reference + *t * dl;
                let c = -green.grad_x(p, a)?.symplectic();
                acc += w * c.dot(dl);
            }
            Ok(acc)
        }
    }
}

/// Phase `θ(x)` with `∇θ = j(H)` and `θ(reference) = 0`, wrapped to `(-π, π]`.
pub fn phase(green: &BoundaryGreen, family: &[Vortex], x: Vec2, reference: Vec2) -> Result<f64> {
    check_not_vortex(family, x)?;
    check_not_vortex(family, reference)?;
    let domain = green.domain();
    domain.check_interior(x)?;
    domain.check_interior(reference)?;
    let mut theta = 0.0;
    for v in family {
        let d = v.degree as f64;
        let ax = x - v.position;
        let ar = reference - v.position;
        theta += d * (ax.y.atan2(ax.x) - ar.y.atan2(ar.x));
        theta += d * conjugate_of_f(green, v.position, x, reference)?;
    }
    Ok(wrap_angle(theta))
}

/// Integrates `j(H) · dl` along a polyline. Unlike [`phase`] the result is
/// not wrapped, so closed loops return `2π` times the enclosed degree.
pub fn phase_along_path(green: &BoundaryGreen, family: &[Vortex], path: &[Vec2]) -> Result<f64> {
    const CLEARANCE: f64 = 1e-9;
    let (nodes, weights) = gauss_legendre(16, 0.0, 1.0);
    let mut total = 0.0;
    for seg in path.windows(2) {
        let (p0, p1) = (seg[0], seg[1]);
        let dl = p1 - p0;
        let len = dl.norm();
        if len == 0.0 {
            continue;
        }
        // refine each segment relative to its closest approach to any vortex
        let mut clearance = f64::INFINITY;
        for v in family {
            let t = ((v.position - p0).dot(dl) / (len * len)).clamp(0.0, 1.0);
            clearance = clearance.min((p0 + t * dl).dist(v.position));
        }
        if clearance < CLEARANCE {
            return Err(Error::Path(format!(
                "segment from ({}, {}) to ({}, {}) passes through a vortex",
                p0.x, p0.y, p1.x, p1.y
            )));
        }
        let pieces = ((8.0 * len / clearance).ceil() as usize).clamp(1, 1 << 16);
        for k in 0..pieces {
            let t0 = k as f64 / pieces as f64;
            let t1 = (k + 1) as f64 / pieces as f64;
            for (s, w) in nodes.iter().zip(&weights) {
                let p = p0 + (t0 + s * (t1 - t0)) * dl;
                total += w * (t1 - t0) * canonical_current(green, family, p)?.dot(dl);
            }
        }
    }
    Ok(total)
}

/// Phase at every cell center of `grid`, with `θ(reference) = 0`.
///
/// Singular parts are evaluated analytically. On rectangles the conjugate of
/// each `F(·, a_j)` is accumulated on the cached vertex lattice by trapezoid
/// line integration (first along `x` on the bottom row, then along `y`).
pub fn phase_on_grid(
    green: &BoundaryGreen,
    family: &[Vortex],
    grid: GridSpec,
    reference: Vec2,
) -> Result<Vec<f64>> {
    let domain = green.domain();
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = vec![0.0; nx * ny];
    let centers: Vec<Vec2> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| grid.cell_center(&domain, i, j))
        .collect();
    for v in family {
        let d = v.degree as f64;
        let ar = reference - v.position;
        let arg_ref = ar.y.atan2(ar.x);
        let conj: Box<dyn Fn(usize, Vec2) -> Result<f64>> = match green {
            BoundaryGreen::Disk { .. } => {
                Box::new(move |_, p| conjugate_of_f(green, v.position, p, reference))
            }
            BoundaryGreen::Rectangle(rect) => {
                let f = rect.field_for_source(v.position)?;
                let psi = conjugate_lattice(&f);
                let psi_ref = psi.interpolate(reference);
                Box::new(move |_, p| Ok(psi.interpolate(p) - psi_ref))
            }
        };
        for (k, p) in centers.iter().enumerate() {
            let ap = *p - v.position;
            if ap.norm_sq() == 0.0 {
                continue;
            }
            out[k] += d * (ap.y.atan2(ap.x) - arg_ref + conj(k, *p)?);
        }
    }
    Ok(out)
}

/// Harmonic conjugate of a lattice function `F`: `∂xψ = -∂yF`, `∂yψ = ∂xF`.
fn conjugate_lattice(f: &NodeField) -> NodeField {
    let (gx, gy) = f.gradient();
    let mut psi = f.clone();
    psi.values.iter_mut().for_each(|v| *v = 0.0);
    for i in 1..=f.nx {
        let k = psi.idx(i, 0);
        let prev = psi.values[psi.idx(i - 1, 0)];
        psi.values[k] = prev - 0.5 * f.hx * (gy.at(i - 1, 0) + gy.at(i, 0));
    }
    for j in 1..=f.ny {
        for i in 0..=f.nx {
            let k = psi.idx(i, j);
            let prev = psi.values[psi.idx(i, j - 1)];
            psi.values[k] = prev + 0.5 * f.hy * (gx.at(i, j - 1) + gx.at(i, j));
        }
    }
    psi
}

/// Radius below which the balls `B_ρ(a_j)` are disjoint and inside the domain.
pub fn admissible_radius(domain: &Domain, family: &[Vortex]) -> f64 {
    let mut r = f64::INFINITY;
    for (j, a) in family.iter().enumerate() {
        r = r.min(domain.distance_to_boundary(a.position));
        for b in &family[j + 1..] {
            r = r.min(0.5 * a.position.dist(b.position));
        }
    }
    r
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth cutoff: 1 for `s <= inner`, 0 for `s >= outer`.
fn cutoff(s: f64, inner: f64, outer: f64) -> f64 {
    if s <= inner {
        return 1.0;
    }
    if s >= outer {
        return 0.0;
    }
    let t = (s - inner) / (outer - inner);
    let a = bump(1.0 - t);
    a / (a + bump(t))
}

/// Quadrature resolution for [`annulus_energy`].
#[derive(Debug, Clone, Copy)]
pub struct AnnulusQuadrature {
    pub patch_radial: usize,
    pub patch_angular: usize,
    pub bulk: usize,
}

impl Default for AnnulusQuadrature {
    fn default() -> Self {
        Self {
            patch_radial: 256,
            patch_angular: 256,
            bulk: 512,
        }
    }
}

/// `∫_{Ω_ρ(a)} |∇H|² dx = ∫_{Ω_ρ(a)} |j(H)|² dx`.
///
/// The integrand is split with smooth cutoffs centered on each vortex: the
/// near parts are integrated on log-polar patches and the remainder on a
/// Gauss grid over the whole domain.
pub fn annulus_energy(green: &BoundaryGreen, family: &[Vortex], rho: f64) -> Result<f64> {
    annulus_energy_with(green, family, rho, AnnulusQuadrature::default())
}

pub fn annulus_energy_with(
    green: &BoundaryGreen,
    family: &[Vortex],
    rho: f64,
    quad: AnnulusQuadrature,
) -> Result<f64> {
    let domain = green.domain();
    let outer = 0.98 * admissible_radius(&domain, family);
    if !(rho > 0.0 && rho < outer) {
        return Err(Error::InvalidArgument(format!(
            "rho = {rho} must lie in (0, {outer}) so the excised balls are disjoint and interior"
        )));
    }
    let inner = 0.5 * (rho + outer);
    let weight_far = |p: Vec2| {
        1.0 - family
            .iter()
            .map(|v| cutoff(p.dist(v.position), inner, outer))
            .sum::<f64>()
    };

    let mut total = 0.0;
    // near-field patches in log-polar coordinates s = e^σ
    let (sig, wsig) = gauss_legendre(quad.patch_radial, rho.ln(), outer.ln());
    let nth = quad.patch_angular;
    let dth = 2.0 * PI / nth as f64;
    for v in family {
        for (sg, ws) in sig.iter().zip(&wsig) {
            let s = sg.exp();
            let chi = cutoff(s, inner, outer);
            if chi == 0.0 {
                continue;
            }
            let mut ring = 0.0;
            for k in 0..nth {
                let th = k as f64 * dth;
                let p = v.position + s * Vec2::new(th.cos(), th.sin());
                ring += canonical_current(green, family, p)?.norm_sq();
            }
            total += ws * chi * s * s * ring * dth;
        }
    }

    // far field over the whole domain
    let n = quad.bulk;
    match domain {
        Domain::Disk { center, radius } => {
            let (rs, wr) = gauss_legendre(n, 0.0, radius);
            let dth = 2.0 * PI / n as f64;
            for (r, w) in rs.iter().zip(&wr) {
                let mut ring = 0.0;
                for k in 0..n {
                    let th = k as f64 * dth;
                    let p = center + *r * Vec2::new(th.cos(), th.sin());
                    let wf = weight_far(p);
                    if wf != 0.0 {
                        ring += wf * canonical_current(green, family, p)?.norm_sq();
                    }
                }
                total += w * r * ring * dth;
            }
        }
        Domain::Rectangle { lower_left, lx, ly } => {
            let (xs, wx) = gauss_legendre(n, lower_left.x, lower_left.x + lx);
            let (ys, wy) = gauss_legendre(n, lower_left.y, lower_left.y + ly);
            for (y, wyy) in ys.iter().zip(&wy) {
                for (x, wxx) in xs.iter().zip(&wx) {
                    let p = Vec2::new(*x, *y);
                    let wf = weight_far(p);
                    if wf != 0.0 {
                        total += wxx * wyy * wf * canonical_current(green, family, p)?.norm_sq();
                    }
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> BoundaryGreen {
        Domain::unit_disk()
            .boundary_green(GridSpec::square(8).unwrap())
            .unwrap()
    }

    fn v(x: f64, y: f64, d: i32) -> Vortex {
        Vortex::new(Vec2::new(x, y), d).unwrap()
    }

    #[test]
    fn degree_must_be_unit() {
        assert!(Vortex::new(Vec2::ZERO, 2).is_err());
        assert!(Vortex::new(Vec2::ZERO, 0).is_err());
    }

    #[test]
    fn stream_function_examples() {
        let g = disk();
        let phi = stream_function(&g, &[v(0.0, 0.0, 1)], Vec2::new(0.5, 0.0)).unwrap();
        assert!((phi - 0.5f64.ln()).abs() < 1e-15);
        let fam = [v(0.3, 0.0, 1), v(-0.3, 0.0, -1)];
        for t in [-0.9, -0.4, 0.1, 0.7] {
            assert!(stream_function(&g, &fam, Vec2::new(0.0, t)).unwrap().abs() < 1e-14);
        }
        let fam = [v(0.5, 0.0, 1)];
        let phi = stream_function(&g, &fam, Vec2::new(0.9, 0.0)).unwrap();
        let f = g.f(Vec2::new(0.9, 0.0), Vec2::new(0.5, 0.0)).unwrap();
        assert!((phi - (0.4f64.ln() + f)).abs() < 1e-15);
        // constant on the boundary
        let fam = [v(0.5, 0.0, 1), v(-0.1, 0.4, -1), v(0.0, -0.6, 1)];
        let b0 = stream_function(&g, &fam, Vec2::new(1.0 - 1e-9, 0.0)).unwrap();
        for k in 1..32 {
            let th = k as f64 * 2.0 * PI / 32.0;
            let p = (1.0 - 1e-9) * Vec2::new(th.cos(), th.sin());
            assert!((stream_function(&g, &fam, p).unwrap() - b0).abs() < 1e-6);
        }
        assert!(matches!(
            stream_function(&g, &fam, Vec2::new(0.5, 0.0)),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn current_at_center_vortex() {
        let g = disk();
        let j = canonical_current(&g, &[v(0.0, 0.0, 1)], Vec2::new(0.5, 0.0)).unwrap();
        assert!((j - Vec2::new(0.0, 2.0)).norm() < 1e-14);
        for k in 0..64 {
            let th = k as f64 * 2.0 * PI / 64.0;
            let n = Vec2::new(th.cos(), th.sin());
            let j = canonical_current(&g, &[v(0.0, 0.0, 1)], (1.0 - 1e-12) * n).unwrap();
            assert!(j.dot(n).abs() <= 1e-8);
        }
    }

    #[test]
    fn normal_current_vanishes_for_off_center_family() {
        let g = disk();
        let fam = [v(0.5, 0.1, 1), v(-0.3, -0.2, -1)];
        for k in 0..64 {
            let th = k as f64 * 2.0 * PI / 64.0;
            let n = Vec2::new(th.cos(), th.sin());
            let j = canonical_current(&g, &fam, (1.0 - 1e-10) * n).unwrap();
            assert!(j.dot(n).abs() < 1e-7, "k={k} {}", j.dot(n));
        }
    }

    fn circle(c: Vec2, r: f64, n: usize) -> Vec<Vec2> {
        (0..=n)
            .map(|k| {
                let th = k as f64 * 2.0 * PI / n as f64;
                c + r * Vec2::new(th.cos(), th.sin())
            })
            .collect()
    }

    #[test]
    fn circulation_is_quantized() {
        let g = disk();
        let fam = [v(0.4, 0.1, 1), v(-0.3, -0.2, -1)];
        for a in &fam {
            // 1024-point trapezoid of j·t on a radius-0.1 circle
            let n = 1024;
            let mut circ = 0.0;
            for k in 0..n {
                let th = k as f64 * 2.0 * PI / n as f64;
                let t = Vec2::new(-th.sin(), th.cos());
                let p = a.position + 0.1 * Vec2::new(th.cos(), th.sin());
                circ += canonical_current(&g, &fam, p).unwrap().dot(t) * 0.1 * 2.0 * PI / n as f64;
            }
            assert!((circ - 2.0 * PI * a.degree as f64).abs() < 1e-6, "{circ}");
        }
        let pair = [v(0.2, 0.0, 1), v(-0.2, 0.0, 1)];
        let loop_ = phase_along_path(&g, &pair, &circle(Vec2::ZERO, 0.5, 64)).unwrap();
        assert!((loop_ - 4.0 * PI).abs() < 1e-8, "{loop_}");
    }

    #[test]
    fn phase_of_center_vortex_is_polar_angle() {
        let g = disk();
        let reference = Vec2::new(1.0 - 1e-9, 0.0);
        for k in 0..8 {
            let th = -3.0 + k as f64 * 0.8;
            let p = 0.6 * Vec2::new(th.cos(), th.sin());
            let t = phase(&g, &[v(0.0, 0.0, 1)], p, reference).unwrap();
            assert!(wrap_angle(t - th).abs() < 1e-12);
            let t = phase(&g, &[v(0.0, 0.0, -1)], p, reference).unwrap();
            assert!(wrap_angle(t + th).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_gradient_is_current() {
        let g = disk();
        let fam = [v(0.4, 0.1, 1), v(-0.3, -0.2, -1), v(0.0, 0.5, 1)];
        let reference = Vec2::new(0.1, -0.7);
        let x = Vec2::new(-0.2, 0.3);
        let h = 1e-6;
        let dx = wrap_angle(
            phase(&g, &fam, x + Vec2::new(h, 0.0), reference).unwrap()
                - phase(&g, &fam, x - Vec2::new(h, 0.0), reference).unwrap(),
        ) / (2.0 * h);
        let dy = wrap_angle(
            phase(&g, &fam, x + Vec2::new(0.0, h), reference).unwrap()
                - phase(&g, &fam, x - Vec2::new(0.0, h), reference).unwrap(),
        ) / (2.0 * h);
        let j = canonical_current(&g, &fam, x).unwrap();
        assert!((j.x - dx).abs() < 1e-6 && (j.y - dy).abs() < 1e-6);
    }

    #[test]
    fn homotopic_paths_agree() {
        let g = disk();
        let fam = [v(0.3, 0.0, 1), v(-0.3, 0.1, -1)];
        let a = Vec2::new(0.0, -0.8);
        let b = Vec2::new(0.1, 0.8);
        // both paths pass between the two vortices
        let p1 = [a, Vec2::new(0.0, -0.3), Vec2::new(0.0, 0.5), b];
        let p2 = [a, Vec2::new(0.05, -0.2), Vec2::new(0.05, 0.4), b];
        let t1 = phase_along_path(&g, &fam, &p1).unwrap();
        let t2 = phase_along_path(&g, &fam, &p2).unwrap();
        assert!((t1 - t2).abs() < 1e-6);
        // going around the right encloses the +1 vortex (clockwise: -2π) and not the other
        let p3 = [a, Vec2::new(0.7, 0.0), b];
        let t3 = phase_along_path(&g, &fam, &p3).unwrap();
        let diff = t3 - t1;
        assert!((diff.abs() - 2.0 * PI).abs() < 1e-6, "{diff}");
        let direct = phase(&g, &fam, b, a).unwrap();
        assert!(wrap_angle(direct - t1).abs() < 1e-6);
        assert!(matches!(
            phase_along_path(&g, &fam, &[Vec2::new(0.0, 0.0), Vec2::new(0.6, 0.0)]),
            Err(Error::Path(_))
        ));
    }

    #[test]
    fn conjugation_flips_everything() {
        let g = disk();
        let fam = [v(0.4, 0.1, 1), v(-0.3, -0.2, -1)];
        let neg: Vec<Vortex> = fam.iter().map(|v| v.flipped()).collect();
        let x = Vec2::new(0.1, 0.6);
        let r = Vec2::new(-0.5, -0.5);
        assert_eq!(
            stream_function(&g, &fam, x).unwrap(),
            -stream_function(&g, &neg, x).unwrap()
        );
        assert_eq!(
            canonical_current(&g, &fam, x).unwrap(),
            -canonical_current(&g, &neg, x).unwrap()
        );
        let t = phase(&g, &fam, x, r).unwrap() + phase(&g, &neg, x, r).unwrap();
        assert!(wrap_angle(t).abs() < 1e-12);
    }

    #[test]
    fn divergence_free_current() {
        let g = disk();
        let fam = [v(0.4, 0.1, 1), v(-0.3, -0.2, -1)];
        let p = Vec2::new(0.0, 0.45);
        let div = |h: f64| {
            let jx = |q: Vec2| canonical_current(&g, &fam, q).unwrap().x;
            let jy = |q: Vec2| canonical_current(&g, &fam, q).unwrap().y;
            (jx(p + Vec2::new(h, 0.0)) - jx(p - Vec2::new(h, 0.0)) + jy(p + Vec2::new(0.0, h))
                - jy(p - Vec2::new(0.0, h)))
                / (2.0 * h)
        };
        assert!(div(1e-3).abs() < 1e-6);
    }

    #[test]
    fn annulus_energy_center_vortex() {
        let g = disk();
        let e = annulus_energy(&g, &[v(0.0, 0.0, 1)], 0.1).unwrap();
        assert!((e - 2.0 * PI * 10f64.ln()).abs() < 1e-8, "{e}");
        assert!((e - 14.467569).abs() < 1e-6);
        assert!(annulus_energy(&g, &[v(0.0, 0.0, 1)], 1.5).is_err());
    }

    #[test]
    fn phase_grid_matches_pointwise_on_disk() {
        let g = disk();
        let fam = [v(0.3, 0.1, 1), v(-0.2, -0.3, -1)];
        let grid = GridSpec::square(16).unwrap();
        let reference = Vec2::new(0.05, 0.6);
        let grid_phase = phase_on_grid(&g, &fam, grid, reference).unwrap();
        let domain = g.domain();
        for (j, i) in [(8, 8), (3, 12), (10, 4)] {
            let p = grid.cell_center(&domain, i, j);
            let direct = phase(&g, &fam, p, reference).unwrap();
            assert!(wrap_angle(grid_phase[j * 16 + i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_grid_on_rectangle_tracks_current() {
        let d = Domain::centered_square(1.0).unwrap();
        let grid = GridSpec::square(64).unwrap();
        let g = d.boundary_green(grid).unwrap();
        let fam = [v(0.3, 0.1, 1)];
        let reference = Vec2::new(-0.9, -0.9);
        let th = phase_on_grid(&g, &fam, grid, reference).unwrap();
        let (h, _) = grid.spacing(&d);
        // centered difference of the phase across cell centers
        let (i, j) = (20usize, 45usize);
        let p = grid.cell_center(&d, i, j);
        let dx = wrap_angle(th[j * 64 + i + 1] - th[j * 64 + i - 1]) / (2.0 * h);
        let dy = wrap_angle(th[(j + 1) * 64 + i] - th[(j - 1) * 64 + i]) / (2.0 * h);
        let cur = canonical_current(&g, &fam, p).unwrap();
        assert!(
            (cur.x - dx).abs() < 5e-3 && (cur.y - dy).abs() < 5e-3,
            "{cur:?} {dx} {dy}"
        );
    }
}
