//! The reduced point-vortex law: each family moves by
//! `ȧ_j = -(d_j/π) J ∇_{a_j} W(a)`, independently of the other family.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundaryGreen;
use crate::harmonic_map::{Component, Vortex, VortexConfiguration};
use crate::renormalized_energy::{grad_w, renormalized_w};
use crate::vec2::Vec2;

const CSV_COLUMNS: [&str; 6] = ["t", "component", "index", "degree", "x", "y"];

#[derive(Debug, Clone, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub config: VortexConfiguration,
}

/// Why an integration or a tracked run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Completed,
    Collision,
    Boundary,
    Blowup,
}

/// One vortex at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub component: Component,
    /// Track id within its component.
    pub index: usize,
    pub degree: i32,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub points: Vec<TrackPoint>,
}

/// Time-stamped vortex positions from the reduced law or a tracked PDE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub termination: Termination,
    /// Max relative drift `|W(t) - W(0)| / (1 + |W(0)|)` for the u and v families.
    pub w_drift: [f64; 2],
    pub events: Vec<String>,
}

impl Trajectory {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self {
            frames,
            termination: Termination::Completed,
            w_drift: [0.0; 2],
            events: Vec::new(),
        }
    }

    /// `(t, position)` samples of one track.
    pub fn track(&self, component: Component, index: usize) -> Vec<(f64, Vec2)> {
        self.frames
            .iter()
            .filter_map(|f| {
                f.points
                    .iter()
                    .find(|p| p.component == component && p.index == index)
                    .map(|p| (f.t, p.position))
            })
            .collect()
    }

    pub fn row_count(&self) -> usize {
        self.frames.iter().map(|f| f.points.len()).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", CSV_COLUMNS.join(","))?;
        for f in &self.frames {
            for p in &f.points {
                writeln!(
                    out,
                    "{:?},{},{},{},{:?},{:?}",
                    f.t,
                    p.component.label(),
                    p.index,
                    p.degree,
                    p.position.x,
                    p.position.y
                )?;
            }
        }
        Ok(())
    }

    /// Parses the CSV written by [`Trajectory::write_csv`]. Rows sharing a
    /// time value form one frame; times must not decrease.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut frames: Vec<Frame> = Vec::new();
        let mut lines = input.lines().enumerate();
        let perr = |line: usize, message: String| Error::Parse {
            line: line + 1,
            message,
        };
        match lines.next() {
            Some((_, Ok(h))) if h.split(',').map(str::trim).eq(CSV_COLUMNS) => {}
            Some((n, Ok(h))) => return Err(perr(n, format!("unexpected header `{h}`"))),
            Some((n, Err(e))) => return Err(perr(n, e.to_string())),
            None => return Err(perr(0, "empty input".into())),
        }
        for (n, line) in lines {
            let line = line.map_err(|e| perr(n, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 6 {
                return Err(perr(n, format!("expected 6 columns, found {}", cols.len())));
            }
            let num = |k: usize, name: &str| -> Result<f64> {
                let v: f64 = cols[k]
                    .parse()
                    .map_err(|_| perr(n, format!("bad {name} `{}`", cols[k])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(perr(n, format!("non-finite {name}")))
                }
            };
            let t = num(0, "t")?;
            let component: Component = cols[1].parse().map_err(|e| perr(n, e))?;
            let index: usize = cols[2]
                .parse()
                .map_err(|_| perr(n, format!("bad index `{}`", cols[2])))?;
            let degree: i32 = cols[3]
                .parse()
                .map_err(|_| perr(n, format!("bad degree `{}`", cols[3])))?;
            if degree == 0 {
                return Err(perr(n, "degree must be nonzero".into()));
            }
            let position = Vec2::new(num(4, "x")?, num(5, "y")?);
            let point = TrackPoint {
                component,
                index,
                degree,
                position,
            };
            match frames.last_mut() {
                Some(f) if f.t == t => f.points.push(point),
                Some(f) if f.t > t => {
                    return Err(perr(n, format!("time {t} precedes previous frame {}", f.t)))
                }
                _ => frames.push(Frame {
                    t,
                    points: vec![point],
                }),
            }
        }
        Ok(Self::new(frames))
    }
}

fn family_velocities(green: &BoundaryGreen, family: &[Vortex]) -> Result<Vec<Vec2>> {
    (0..family.len())
        .map(|j| {
            let d = family[j].degree as f64;
            Ok((-d / PI) * grad_w(green, family, j)?.symplectic())
        })
        .collect()
}

/// Velocities of both families. Each family's velocities depend on that
/// family alone.
pub fn vortex_rhs(green: &BoundaryGreen, state: &OdeState) -> Result<(Vec<Vec2>, Vec<Vec2>)> {
    let domain = green.domain();
    for v in state.config.u.iter().chain(&state.config.v) {
        if !domain.contains_strictly(v.position) {
            return Err(Error::Configuration(format!(
                "vortex at ({}, {}) is outside the domain",
                v.position.x, v.position.y
            )));
        }
    }
    let u = family_velocities(green, &state.config.u)
        .map_err(|e| Error::Configuration(format!("u-family: {e}")))?;
    let v = family_velocities(green, &state.config.v)
        .map_err(|e| Error::Configuration(format!("v-family: {e}")))?;
    Ok((u, v))
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub horizon: f64,
    pub dt: f64,
    /// Record every `stride`-th step (the final state is always recorded).
    pub stride: usize,
    pub collision_distance: f64,
    pub boundary_distance: f64,
}

impl IntegrateOptions {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            stride: 1,
            collision_distance: 1e-3,
            boundary_distance: 1e-3,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

fn frame(t: f64, config: &VortexConfiguration) -> Frame {
    let points = [Component::U, Component::V]
        .into_iter()
        .flat_map(|c| {
            config
                .family(c)
                .iter()
                .enumerate()
                .map(move |(index, v)| TrackPoint {
                    component: c,
                    index,
                    degree: v.degree,
                    position: v.position,
                })
        })
        .collect();
    Frame { t, points }
}

fn shifted(family: &[Vortex], vel: &[Vec2], h: f64) -> Vec<Vortex> {
    family
        .iter()
        .zip(vel)
        .map(|(v, w)| Vortex {
            position: v.position + h * *w,
            degree: v.degree,
        })
        .collect()
}

/// One classical RK4 step for a single family; `None` if a stage leaves the
/// admissible set or produces non-finite velocities.
fn rk4_family(green: &BoundaryGreen, family: &[Vortex], dt: f64) -> Option<Vec<Vortex>> {
    let stage = |f: &[Vortex]| -> Option<Vec<Vec2>> {
        let v = family_velocities(green, f).ok()?;
        v.iter().all(|w| w.is_finite()).then_some(v)
    };
    let k1 = stage(family)?;
    let k2 = stage(&shifted(family, &k1, 0.5 * dt))?;
    let k3 = stage(&shifted(family, &k2, 0.5 * dt))?;
    let k4 = stage(&shifted(family, &k3, dt))?;
    Some(
        family
            .iter()
            .enumerate()
            .map(|(j, v)| Vortex {
                position: v.position + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]),
                degree: v.degree,
            })
            .collect(),
    )
}

fn pair_distance(family: &[Vortex]) -> f64 {
    let mut d = f64::INFINITY;
    for (j, a) in family.iter().enumerate() {
        for b in &family[j + 1..] {
            d = d.min(a.position.dist(b.position));
        }
    }
    d
}

fn max_speed(vel: &[Vec2]) -> f64 {
    vel.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Fixed-step RK4 of both families over `[t0, t0 + horizon]`.
///
/// Stops early (with a partial trajectory) when two vortices of one family
/// come closer than `max(collision_distance, 4·dt·speed)`, when a vortex
/// comes within `boundary_distance` of the wall, or on non-finite values.
pub fn integrate(
    green: &BoundaryGreen,
    initial: &OdeState,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt = {} must be positive",
            opts.dt
        )));
    }
    if !(opts.horizon >= 0.0 && opts.horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon = {} must be non-negative",
            opts.horizon
        )));
    }
    let domain = green.domain();
    initial.config.validate(&domain)?;
    vortex_rhs(green, initial)?;

    let w0 = [
        renormalized_w(green, &initial.config.u)?,
        renormalized_w(green, &initial.config.v)?,
    ];
    let steps = ((opts.horizon / opts.dt) - 1e-9).ceil().max(0.0) as usize;
    let mut config = initial.config.clone();
    let mut traj = Trajectory::new(vec![frame(initial.t, &config)]);
    let mut t = initial.t;

    for k in 0..steps {
        let (vu, vv) = match vortex_rhs(
            green,
            &OdeState {
                t,
                config: config.clone(),
            },
        ) {
            Ok(v) => v,
            Err(_) => {
                traj.termination = Termination::Blowup;
                break;
            }
        };
        let dt = (opts.horizon - k as f64 * opts.dt).min(opts.dt);
        let speed = max_speed(&vu).max(max_speed(&vv));
        if !speed.is_finite() {
            traj.termination = Termination::Blowup;
            break;
        }
        let near = opts.collision_distance.max(4.0 * dt * speed);
        if pair_distance(&config.u) < near || pair_distance(&config.v) < near {
            traj.termination = Termination::Collision;
            traj.events.push(format!("collision guard at t = {t}"));
            break;
        }
        if config
            .u
            .iter()
            .chain(&config.v)
            .any(|v| domain.distance_to_boundary(v.position) < opts.boundary_distance)
        {
            traj.termination = Termination::Boundary;
            traj.events.push(format!("boundary guard at t = {t}"));
            break;
        }
        let (Some(u), Some(v)) = (
            rk4_family(green, &config.u, dt),
            rk4_family(green, &config.v, dt),
        ) else {
            traj.termination = Termination::Blowup;
            traj.events
                .push(format!("non-finite or inadmissible stage at t = {t}"));
            break;
        };
        config = VortexConfiguration { u, v };
        t = initial.t
            + if k + 1 == steps {
                opts.horizon
            } else {
                (k + 1) as f64 * opts.dt
            };
        for (slot, fam) in [&config.u, &config.v].into_iter().enumerate() {
            match renormalized_w(green, fam) {
                Ok(w) => {
                    let drift = (w - w0[slot]).abs() / (1.0 + w0[slot].abs());
                    traj.w_drift[slot] = traj.w_drift[slot].max(drift);
                }
                Err(_) => traj.termination = Termination::Boundary,
            }
        }
        if traj.termination != Termination::Completed {
            traj.frames.push(frame(t, &config));
            break;
        }
        if (k + 1) % opts.stride == 0 || k + 1 == steps {
            traj.frames.push(frame(t, &config));
        }
    }
    Ok(traj)
}

/// Final configuration of a trajectory as an ODE state.
pub fn final_state(traj: &Trajectory) -> Option<OdeState> {
    let last = traj.frames.last()?;
    let mut config = VortexConfiguration::default();
    for p in &last.points {
        let v = Vortex {
            position: p.position,
            degree: p.degree,
        };
        match p.component {
            Component::U => config.u.push(v),
            Component::V => config.v.push(v),
        }
    }
    Some(OdeState { t: last.t, config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, GridSpec};

    fn disk() -> BoundaryGreen {
        Domain::unit_disk()
            .boundary_green(GridSpec::square(8).unwrap())
            .unwrap()
    }

    fn v(x: f64, y: f64, d: i32) -> Vortex {
        Vortex::new(Vec2::new(x, y), d).unwrap()
    }

    fn state(u: Vec<Vortex>, vv: Vec<Vortex>) -> OdeState {
        OdeState {
            t: 0.0,
            config: VortexConfiguration::new(u, vv),
        }
    }

    #[test]
    fn single_vortex_velocity() {
        let g = disk();
        let (u, _) = vortex_rhs(&g, &state(vec![v(0.0, 0.0, 1)], vec![])).unwrap();
        assert_eq!(u[0], Vec2::ZERO);
        let (u, _) = vortex_rhs(&g, &state(vec![v(0.5, 0.0, 1)], vec![])).unwrap();
        assert!((u[0] - Vec2::new(0.0, -4.0 / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn families_are_decoupled() {
        let g = disk();
        let a = vec![v(0.3, 0.1, 1), v(-0.2, -0.3, -1)];
        let (alone, _) = vortex_rhs(&g, &state(a.clone(), vec![])).unwrap();
        let (with, _) =
            vortex_rhs(&g, &state(a.clone(), vec![v(0.1, 0.5, 1), v(0.3, 0.1, -1)])).unwrap();
        assert_eq!(alone, with);
    }

    #[test]
    fn center_vortex_is_stationary() {
        let g = disk();
        let traj = integrate(
            &g,
            &state(vec![v(0.0, 0.0, 1)], vec![]),
            &IntegrateOptions::new(1.0, 1e-2),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Completed);
        assert!(traj
            .frames
            .iter()
            .all(|f| f.points[0].position == Vec2::ZERO));
        assert_eq!(traj.frames.len(), 101);
        assert!((traj.frames.last().unwrap().t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_guard_stops_run() {
        let g = disk();
        let mut opts = IntegrateOptions::new(1.0, 1e-3);
        opts.boundary_distance = 0.2;
        let traj = integrate(&g, &state(vec![v(0.85, 0.0, 1)], vec![]), &opts).unwrap();
        assert_eq!(traj.termination, Termination::Boundary);
    }

    #[test]
    fn collision_guard_stops_run() {
        let g = disk();
        let mut opts = IntegrateOptions::new(1.0, 1e-3);
        opts.collision_distance = 0.25;
        let traj = integrate(
            &g,
            &state(vec![v(0.1, 0.0, 1), v(-0.1, 0.0, 1)], vec![]),
            &opts,
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Collision);
        assert_eq!(traj.frames.len(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let g = disk();
        let traj = integrate(
            &g,
            &state(
                vec![v(0.5, 0.0, 1)],
                vec![v(-0.2, 0.3, -1), v(0.1, -0.4, 1)],
            ),
            &IntegrateOptions::new(0.1, 1e-2).with_stride(3),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.frames, traj.frames);
        let rows = String::from_utf8(buf).unwrap().lines().count() - 1;
        assert_eq!(rows, traj.frames.len() * 3);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "t,component,index,degree,x,y\n0,u,0,1,0.1,0.2\n0.1,w,0,1,0,0\n";
        match Trajectory::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(Trajectory::read_csv("x,y\n".as_bytes()).is_err());
        assert!(Trajectory::read_csv(
            "t,component,index,degree,x,y\n1,u,0,1,0,0\n0,u,0,1,0,0\n".as_bytes()
        )
        .is_err());
        let spaced = Trajectory::read_csv(
            "t, component, index, degree, x, y\n0, v, 2, -1, 0.5, 0\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(spaced.frames[0].points[0].index, 2);
    }
}
