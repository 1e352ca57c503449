//! Vortex detection by plaquette winding and frame-to-frame association.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cnls::{ComplexField, SimState};
use crate::error::Result;
use crate::harmonic_map::Component;
use crate::profile_gamma::background;
use crate::reduced_dynamics::{Frame, TrackPoint, Trajectory};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectedVortex {
    pub position: Vec2,
    pub degree: i32,
    pub component: Component,
    /// Lower-left cell `(i, j)` of the plaquette.
    pub plaquette: (usize, usize),
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Zero of the bilinear interpolant on the unit square with corner values
/// `z00, z10, z11, z01`; falls back to the square's center.
fn bilinear_zero(z00: Complex64, z10: Complex64, z11: Complex64, z01: Complex64) -> (f64, f64) {
    let coeffs = |f: fn(Complex64) -> f64| {
        let (c00, c10, c11, c01) = (f(z00), f(z10), f(z11), f(z01));
        [c00, c10 - c00, c01 - c00, c11 - c10 - c01 + c00]
    };
    let a = coeffs(|z| z.re);
    let b = coeffs(|z| z.im);
    // (b0 + b2 t)(a1 + a3 t) - (b1 + b3 t)(a0 + a2 t) = 0
    let qa = b[2] * a[3] - b[3] * a[2];
    let qb = b[0] * a[3] + b[2] * a[1] - b[1] * a[2] - b[3] * a[0];
    let qc = b[0] * a[1] - b[1] * a[0];
    let mut roots = Vec::with_capacity(2);
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if qa.abs() <= 1e-12 * scale {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            roots.push(q / qa);
            if q != 0.0 {
                roots.push(qc / q);
            }
        }
    }
    let mut best: Option<((f64, f64), f64)> = None;
    for t in roots {
        let den = a[1] + a[3] * t;
        let s = if den.abs() > 1e-300 {
            -(a[0] + a[2] * t) / den
        } else {
            let den_b = b[1] + b[3] * t;
            if den_b.abs() > 1e-300 {
                -(b[0] + b[2] * t) / den_b
            } else {
                continue;
            }
        };
        if !(s.is_finite() && t.is_finite()) {
            continue;
        }
        // distance outside the unit square (0 when inside)
        let out = (-s).max(s - 1.0).max(0.0) + (-t).max(t - 1.0).max(0.0);
        if best.is_none_or(|(_, o)| out < o) {
            best = Some(((s, t), out));
        }
    }
    match best {
        Some(((s, t), out)) if out < 0.5 => (s.clamp(0.0, 1.0), t.clamp(0.0, 1.0)),
        _ => (0.5, 0.5),
    }
}

/// Plaquette winding detection. A plaquette is skipped when all four corner
/// moduli exceed `modulus_floor`.
pub fn detect(
    field: &ComplexField,
    component: Component,
    modulus_floor: f64,
) -> Vec<DetectedVortex> {
    let (ny, nx) = field.data.dim();
    let (hx, hy) = field.spacing();
    let d = &field.data;
    (0..ny - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..nx - 1).filter_map(move |i| {
                let z = [d[[j, i]], d[[j, i + 1]], d[[j + 1, i + 1]], d[[j + 1, i]]];
                if z.iter().all(|c| c.norm() > modulus_floor) {
                    return None;
                }
                let mut total = 0.0;
                for k in 0..4 {
                    total += wrap(z[(k + 1) % 4].arg() - z[k].arg());
                }
                let degree = (total / (2.0 * PI)).round() as i32;
                if degree == 0 {
                    return None;
                }
                let (s, t) = bilinear_zero(z[0], z[1], z[2], z[3]);
                let position = field.center(i, j) + Vec2::new(s * hx, t * hy);
                Some(DetectedVortex {
                    position,
                    degree,
                    component,
                    plaquette: (i, j),
                })
            })
        })
        .collect()
}

/// Default modulus floor: half the background modulus.
pub fn default_floor(g: f64) -> f64 {
    0.5 * background(g)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Matching {
    /// `(previous index, current index)` pairs.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_previous: Vec<usize>,
    pub unmatched_current: Vec<usize>,
    pub ambiguous: bool,
    pub events: Vec<String>,
}

/// Greedy nearest-neighbor matching restricted to equal degree and component
/// and to distances within `max_jump`. Candidates within 10% of each other
/// in distance are flagged as ambiguous; ties go to the smaller index.
pub fn associate(
    previous: &[DetectedVortex],
    current: &[DetectedVortex],
    max_jump: f64,
) -> Matching {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (p, a) in previous.iter().enumerate() {
        for (c, b) in current.iter().enumerate() {
            if a.degree != b.degree || a.component != b.component {
                continue;
            }
            let dist = a.position.dist(b.position);
            if dist <= max_jump {
                cands.push((dist, p, c));
            }
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut out = Matching::default();
    let mut used_p = vec![false; previous.len()];
    let mut used_c = vec![false; current.len()];
    for &(dist, p, c) in &cands {
        if used_p[p] || used_c[c] {
            continue;
        }
        let rival = cands.iter().any(|&(d2, p2, c2)| {
            (p2 == p && c2 != c && !used_c[c2] || c2 == c && p2 != p && !used_p[p2])
                && d2 <= 1.1 * dist.max(f64::MIN_POSITIVE)
        });
        if rival {
            out.ambiguous = true;
            out.events.push(format!(
                "ambiguous match for previous {p}: resolved to current {c} at distance {dist:.3e}"
            ));
        }
        used_p[p] = true;
        used_c[c] = true;
        out.pairs.push((p, c));
    }
    out.pairs.sort_unstable();
    out.unmatched_previous = (0..previous.len()).filter(|&p| !used_p[p]).collect();
    out.unmatched_current = (0..current.len()).filter(|&c| !used_c[c]).collect();
    for &p in &out.unmatched_previous {
        out.events.push(format!("track of previous {p} closed"));
    }
    for &c in &out.unmatched_current {
        out.events.push(format!("track opened for current {c}"));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    pub modulus_floor: Option<f64>,
    pub max_jump: f64,
}

/// Detections of both components of one state.
pub fn detect_state(state: &SimState, opts: &TrackOptions) -> Vec<DetectedVortex> {
    let floor = opts.modulus_floor.unwrap_or_else(|| default_floor(state.g));
    let mut d = detect(&state.u, Component::U, floor);
    d.extend(detect(&state.v, Component::V, floor));
    d
}

/// Incremental association; track ids are assigned per component in order
/// of first appearance.
#[derive(Debug, Clone)]
pub struct Tracker {
    opts: TrackOptions,
    prev: Vec<DetectedVortex>,
    prev_ids: Vec<usize>,
    next_id: [usize; 2],
    traj: Trajectory,
}

impl Tracker {
    pub fn new(opts: TrackOptions) -> Self {
        Self {
            opts,
            prev: Vec::new(),
            prev_ids: Vec::new(),
            next_id: [0; 2],
            traj: Trajectory::new(Vec::new()),
        }
    }

    pub fn push(&mut self, state: &SimState) {
        let found = detect_state(state, &self.opts);
        self.push_detections(state.t, found);
    }

    pub fn push_detections(&mut self, t: f64, cur: Vec<DetectedVortex>) {
        let first = self.traj.frames.is_empty();
        let m = associate(&self.prev, &cur, self.opts.max_jump);
        let mut ids = vec![usize::MAX; cur.len()];
        for &(p, c) in &m.pairs {
            ids[c] = self.prev_ids[p];
        }
        for &c in &m.unmatched_current {
            let k = match cur[c].component {
                Component::U => 0,
                Component::V => 1,
            };
            ids[c] = self.next_id[k];
            self.next_id[k] += 1;
        }
        if !first {
            for e in &m.events {
                self.traj.events.push(format!("t = {t}: {e}"));
            }
        }
        let mut points: Vec<TrackPoint> = cur
            .iter()
            .zip(&ids)
            .map(|(d, &index)| TrackPoint {
                component: d.component,
                index,
                degree: d.degree,
                position: d.position,
            })
            .collect();
        points.sort_by_key(|p| (p.component, p.index));
        self.traj.frames.push(Frame { t, points });
        self.prev = cur;
        self.prev_ids = ids;
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn finish(self) -> Trajectory {
        self.traj
    }
}

/// Detection over an ordered sequence of states in parallel, then
/// sequential association.
pub fn track_run(snapshots: &[SimState], opts: &TrackOptions) -> Result<Trajectory> {
    let detections: Vec<Vec<DetectedVortex>> = snapshots
        .par_iter()
        .map(|s| detect_state(s, opts))
        .collect();
    let mut tracker = Tracker::new(*opts);
    for (state, found) in snapshots.iter().zip(detections) {
        tracker.push_detections(state.t, found);
    }
    Ok(tracker.finish())
}

/// Total signed degree per component in one frame.
pub fn degree_sums(frame: &Frame) -> [i32; 2] {
    let mut s = [0; 2];
    for p in &frame.points {
        match p.component {
            Component::U => s[0] += p.degree,
            Component::V => s[1] += p.degree,
        }
    }
    s
}
