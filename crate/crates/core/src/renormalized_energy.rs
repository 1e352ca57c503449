//! Renormalized energy of a vortex family, its gradient, and the admissible
//! separation radius of a two-family configuration.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryGreen, Domain};
use crate::harmonic_map::Vortex;
use crate::vec2::Vec2;

/// `W`, its per-vortex gradient, and the family's separation radius.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub w: f64,
    pub gradient: Vec<Vec2>,
    pub min_separation: f64,
}

fn family_radius(family: &[Vortex], domain: &Domain) -> f64 {
    let mut r = f64::INFINITY;
    for (j, a) in family.iter().enumerate() {
        r = r.min(domain.distance_to_boundary(a.position));
        for b in &family[j + 1..] {
            r = r.min(a.position.dist(b.position));
        }
    }
    r
}

/// A quarter of the smallest intra-family distance, boundary distance, or
/// cross-family distance. Positive iff the configuration is admissible;
/// `+inf` when both families are empty.
pub fn min_separation(a: &[Vortex], b: &[Vortex], domain: &Domain) -> f64 {
    let mut r = family_radius(a, domain).min(family_radius(b, domain));
    for p in a {
        for q in b {
            r = r.min(p.position.dist(q.position));
        }
    }
    0.25 * r
}

fn check_family(domain: &Domain, family: &[Vortex]) -> Result<()> {
    for (j, a) in family.iter().enumerate() {
        domain.check_interior(a.position)?;
        for b in &family[j + 1..] {
            if a.position == b.position {
                return Err(Error::Singularity(a.position));
            }
        }
    }
    Ok(())
}

/// `W_d(a) = -π (Σ_{j≠k} d_j d_k log|a_j - a_k| + Σ_{j,k} d_j d_k F(a_j, a_k))`,
/// diagonal `F(a_j, a_j)` self-terms included.
pub fn renormalized_w(green: &BoundaryGreen, family: &[Vortex]) -> Result<f64> {
    check_family(&green.domain(), family)?;
    let mut acc = 0.0;
    for (j, a) in family.iter().enumerate() {
        let dj = a.degree as f64;
        acc += dj * dj * green.f(a.position, a.position)?;
        for b in &family[j + 1..] {
            let dd = dj * b.degree as f64;
            acc +=
                2.0 * dd * (a.position.dist(b.position).ln() + green.f(a.position, b.position)?);
        }
    }
    Ok(-PI * acc)
}

/// Analytic gradient of [`renormalized_w`] with respect to vortex `j`.
pub fn grad_w(green: &BoundaryGreen, family: &[Vortex], j: usize) -> Result<Vec2> {
    let Some(target) = family.get(j) else {
        return Err(Error::InvalidArgument(format!(
            "vortex index {j} out of range for family of {}",
            family.len()
        )));
    };
    check_family(&green.domain(), family)?;
    let aj = target.position;
    let dj = target.degree as f64;
    // both slots of F(a_j, a_j) move: ∇[F(x, x)] = 2 ∇ₓF(x, y)|_{y = x}
    let mut acc = 2.0 * dj * dj * green.grad_x(aj, aj)?;
    for (k, b) in family.iter().enumerate() {
        if k == j {
            continue;
        }
        let dd = dj * b.degree as f64;
        let diff = aj - b.position;
        acc += (2.0 * dd / diff.norm_sq()) * diff;
        acc += 2.0 * dd * green.grad_x(aj, b.position)?;
    }
    Ok(-PI * acc)
}

/// Full energy report for one family.
pub fn energy_report(green: &BoundaryGreen, family: &[Vortex]) -> Result<EnergyReport> {
    let w = renormalized_w(green, family)?;
    let gradient = (0..family.len())
        .map(|j| grad_w(green, family, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyReport {
        w,
        gradient,
        min_separation: min_separation(family, &[], &green.domain()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    fn disk() -> BoundaryGreen {
        Domain::unit_disk()
            .boundary_green(GridSpec::square(8).unwrap())
            .unwrap()
    }

    fn v(x: f64, y: f64, d: i32) -> Vortex {
        Vortex::new(Vec2::new(x, y), d).unwrap()
    }

    #[test]
    fn separation_examples() {
        let d = Domain::unit_disk();
        assert_eq!(min_separation(&[v(0.0, 0.0, 1)], &[], &d), 0.25);
        let r = min_separation(&[v(0.3, 0.0, 1), v(-0.3, 0.0, 1)], &[], &d);
        assert!((r - 0.15).abs() < 1e-15);
        let r = min_separation(&[v(0.2, 0.0, 1)], &[v(0.2, 0.1, 1)], &d);
        assert!((r - 0.025).abs() < 1e-15);
        assert_eq!(min_separation(&[], &[], &d), f64::INFINITY);
    }

    #[test]
    fn single_vortex_values() {
        let g = disk();
        assert_eq!(renormalized_w(&g, &[v(0.0, 0.0, 1)]).unwrap(), 0.0);
        let w = renormalized_w(&g, &[v(0.5, 0.0, 1)]).unwrap();
        assert!((w - PI * 0.75f64.ln()).abs() < 1e-13);
        assert!((w + 0.903780).abs() < 1e-6);
        let grad = grad_w(&g, &[v(0.5, 0.0, 1)], 0).unwrap();
        assert!((grad.x + 2.0 * PI * 0.5 / 0.75).abs() < 1e-12);
        assert!(grad.y.abs() < 1e-14);
        assert_eq!(grad_w(&g, &[v(0.0, 0.0, 1)], 0).unwrap().norm(), 0.0);
    }

    #[test]
    fn rotation_invariance() {
        let g = disk();
        let fam = [v(0.3, 0.0, 1), v(-0.3, 0.0, -1)];
        let phi = 37f64.to_radians();
        let rot: Vec<Vortex> = fam
            .iter()
            .map(|a| Vortex::new(a.position.rotate(phi), a.degree).unwrap())
            .collect();
        let w0 = renormalized_w(&g, &fam).unwrap();
        let w1 = renormalized_w(&g, &rot).unwrap();
        assert!((w0 - w1).abs() < 1e-12);
        for j in 0..2 {
            let g0 = grad_w(&g, &fam, j).unwrap().rotate(phi);
            let g1 = grad_w(&g, &rot, j).unwrap();
            assert!((g0 - g1).norm() < 1e-10);
        }
    }

    #[test]
    fn degree_flip_symmetry() {
        let g = disk();
        let fam = [v(0.3, 0.1, 1), v(-0.2, 0.3, -1), v(0.1, -0.5, 1)];
        let flipped: Vec<Vortex> = fam
            .iter()
            .map(|a| Vortex::new(a.position, -a.degree).unwrap())
            .collect();
        let w0 = renormalized_w(&g, &fam).unwrap();
        assert!((w0 - renormalized_w(&g, &flipped).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn coincident_vortices_rejected() {
        let g = disk();
        let fam = [v(0.3, 0.1, 1), v(0.3, 0.1, -1)];
        assert!(matches!(
            renormalized_w(&g, &fam),
            Err(Error::Singularity(_))
        ));
        assert!(grad_w(&g, &fam, 0).is_err());
        assert!(grad_w(&g, &fam[..1], 3).is_err());
    }

    #[test]
    fn rectangle_matches_finite_differences() {
        let d = Domain::centered_square(1.0).unwrap();
        let g = d.boundary_green(GridSpec::square(64).unwrap()).unwrap();
        let fam = [v(0.31, -0.12, 1), v(-0.27, 0.22, 1)];
        let h = 1e-2;
        for j in 0..2 {
            let grad = grad_w(&g, &fam, j).unwrap();
            let mut fd = [0.0; 2];
            for (c, e) in [Vec2::new(h, 0.0), Vec2::new(0.0, h)]
                .into_iter()
                .enumerate()
            {
                let mut p = fam;
                p[j].position = fam[j].position + e;
                let wp = renormalized_w(&g, &p).unwrap();
                p[j].position = fam[j].position - e;
                let wm = renormalized_w(&g, &p).unwrap();
                fd[c] = (wp - wm) / (2.0 * h);
            }
            assert!(
                (grad.x - fd[0]).abs() < 2e-2 * (1.0 + grad.norm()),
                "{grad:?} {fd:?}"
            );
            assert!(
                (grad.y - fd[1]).abs() < 2e-2 * (1.0 + grad.norm()),
                "{grad:?} {fd:?}"
            );
        }
    }
}
