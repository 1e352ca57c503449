//! Experiment orchestration behind the command-line subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::cnls::{
    build_initial_data, diagnostics, write_diagnostics_csv, Diagnostics, InitialDataOptions,
    Propagator, SimState, StepConfig,
};
use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::harmonic_map::{Component, VortexConfiguration};
use crate::io::{content_hash, read_snapshot, write_snapshot, write_trajectory, Report};
use crate::profile_gamma::{
    gamma_g, richardson, solve_profile, tail_fit, write_gamma_table, ProfileOptions, RadialProfile,
};
use crate::reduced_dynamics::{integrate, IntegrateOptions, OdeState, Trajectory};
use crate::vec2::Vec2;
use crate::vortex_tracking::{track_run, TrackOptions, Tracker};

/// Error tagged with the stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait Staged<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T> Staged<T> for Result<T> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Metrics and written files of a finished stage sequence.
#[derive(Debug, Default)]
struct Output {
    metrics: Value,
    artifacts: Vec<String>,
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    f(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

fn relative(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}

/// Runs one experiment into `out` and always returns a report.
pub fn run_experiment(kind: Experiment, cfg: &RunConfig, config_text: &[u8], out: &Path) -> Report {
    let echo = serde_json::to_value(cfg).unwrap_or(Value::Null);
    let mut report = Report::new(kind.name(), echo, content_hash(config_text));
    let result = (|| -> StageResult<Output> {
        let mut checked = cfg.clone();
        checked.experiment = Some(kind);
        checked.validate().stage("config")?;
        fs::create_dir_all(out)
            .map_err(|e| Error::io(out, e))
            .stage("output")?;
        match kind {
            Experiment::Profile => run_profile(&checked, out),
            Experiment::Gamma => run_gamma(&checked, out),
            Experiment::Reduced => run_reduced(&checked, out),
            Experiment::Simulate => run_simulate(&checked, out),
            Experiment::Compare => {
                let cmp = run_compare(&checked)?;
                let mut artifacts = Vec::new();
                for (name, traj) in [
                    ("trajectory_pde.csv", &cmp.pde),
                    ("trajectory_ode.csv", &cmp.ode),
                ] {
                    let p = out.join(name);
                    write_trajectory(&p, traj).stage("write")?;
                    artifacts.push(relative(out, &p));
                }
                let p = out.join("diagnostics.csv");
                write_with(&p, |w| write_diagnostics_csv(&cmp.diagnostics, w)).stage("write")?;
                artifacts.push(relative(out, &p));
                Ok(Output {
                    metrics: serde_json::to_value(&cmp.summary).unwrap_or(Value::Null),
                    artifacts,
                })
            }
            Experiment::Track => run_track(&checked, out),
        }
    })();
    match result {
        Ok(o) => {
            report.metrics = o.metrics;
            report.artifacts = o.artifacts;
        }
        Err(e) => report.fail(e.stage, &e.error),
    }
    report
}

fn profile_options(cfg: &RunConfig, radius: f64) -> ProfileOptions {
    ProfileOptions::new(cfg.g, radius, cfg.profile_intervals)
}

fn run_profile(cfg: &RunConfig, out: &Path) -> StageResult<Output> {
    let profile = solve_profile(&profile_options(cfg, cfg.profile_radius)).stage("profile")?;
    let fit = tail_fit(&profile).stage("tail_fit")?;
    let p = out.join("profile.csv");
    write_with(&p, |w| profile.write_csv(w)).stage("write")?;
    Ok(Output {
        metrics: json!({
            "g": cfg.g,
            "radius": profile.radius,
            "nodes": profile.len(),
            "iterations": profile.iterations,
            "residual": profile.residual,
            "bound_violations": profile.bound_violations().len(),
            "tail_fit": fit,
        }),
        artifacts: vec![relative(out, &p)],
    })
}

fn run_gamma(cfg: &RunConfig, out: &Path) -> StageResult<Output> {
    let mut rows = Vec::with_capacity(cfg.gamma_radii.len());
    for &r in &cfg.gamma_radii {
        let est = if cfg.profile_intervals == crate::profile_gamma::DEFAULT_INTERVALS {
            gamma_g(cfg.g, r)
        } else {
            solve_profile(&profile_options(cfg, r))
                .and_then(|p| crate::profile_gamma::gamma_from_profile(&p))
        };
        rows.push(est.stage("gamma")?);
    }
    let extrapolated: Vec<Value> = rows
        .windows(2)
        .filter(|w| w[1].radius > w[0].radius)
        .map(|w| json!({"radii": [w[0].radius, w[1].radius], "gamma": richardson(&w[0], &w[1])}))
        .collect();
    let p = out.join("gamma.csv");
    write_with(&p, |w| write_gamma_table(&rows, w)).stage("write")?;
    Ok(Output {
        metrics: json!({"g": cfg.g, "estimates": rows, "richardson": extrapolated}),
        artifacts: vec![relative(out, &p)],
    })
}

fn run_reduced(cfg: &RunConfig, out: &Path) -> StageResult<Output> {
    let green = cfg.domain.boundary_green(cfg.grid).stage("green")?;
    let initial = OdeState {
        t: 0.0,
        config: cfg.vortices.clone(),
    };
    let opts = IntegrateOptions::new(cfg.horizon, cfg.dt).with_stride(cfg.snapshot_stride);
    let traj = integrate(&green, &initial, &opts).stage("integrate")?;
    let p = out.join("trajectory.csv");
    write_trajectory(&p, &traj).stage("write")?;
    Ok(Output {
        metrics: json!({
            "frames": traj.frames.len(),
            "termination": traj.termination,
            "w_drift": traj.w_drift,
            "events": traj.events,
        }),
        artifacts: vec![relative(out, &p)],
    })
}

fn track_options(cfg: &RunConfig) -> TrackOptions {
    TrackOptions {
        modulus_floor: cfg.modulus_floor,
        max_jump: cfg.max_jump.unwrap_or(0.1),
    }
}

fn initial_state(
    cfg: &RunConfig,
    grid: GridSpec,
    vortices: &VortexConfiguration,
    profile: &RadialProfile,
) -> Result<SimState> {
    build_initial_data(
        &cfg.domain,
        grid,
        vortices,
        profile,
        cfg.epsilon,
        &InitialDataOptions::default(),
    )
}

fn relative_drift(rows: &[Diagnostics]) -> (f64, f64, f64) {
    let first = &rows[0];
    let rel = |a: f64, b: f64| {
        if b != 0.0 {
            (a - b).abs() / b.abs()
        } else {
            (a - b).abs()
        }
    };
    rows.iter().fold((0.0, 0.0, 0.0), |(mu, mv, e), r| {
        (
            mu.max(rel(r.mass_u, first.mass_u)),
            mv.max(rel(r.mass_v, first.mass_v)),
            e.max(rel(r.energy, first.energy)),
        )
    })
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> StageResult<Output> {
    let profile = solve_profile(&profile_options(cfg, cfg.profile_radius)).stage("profile")?;
    let mut state = initial_state(cfg, cfg.grid, &cfg.vortices, &profile).stage("initial_data")?;
    let mut prop = Propagator::new(
        &cfg.domain,
        cfg.grid,
        cfg.epsilon,
        cfg.dt,
        StepConfig::default(),
    )
    .stage("propagator")?;
    let dir = out.join("snapshots");
    fs::create_dir_all(&dir)
        .map_err(|e| Error::io(&dir, e))
        .stage("output")?;
    let mut tracker = Tracker::new(track_options(cfg));
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    let steps = cfg.steps();
    let mut frame = 0usize;
    let mut record = |state: &SimState,
                      artifacts: &mut Vec<String>,
                      rows: &mut Vec<Diagnostics>|
     -> Result<()> {
        let p = dir.join(format!("snap_{frame:06}.bin"));
        write_snapshot(&p, state)?;
        artifacts.push(relative(out, &p));
        rows.push(diagnostics(state));
        tracker.push(state);
        frame += 1;
        Ok(())
    };
    record(&state, &mut artifacts, &mut rows).stage("write")?;
    let mut failure = None;
    for k in 1..=steps {
        if let Err(e) = prop.step(&mut state) {
            failure = Some(e);
            break;
        }
        if k % cfg.snapshot_stride == 0 || k == steps {
            record(&state, &mut artifacts, &mut rows).stage("write")?;
        }
    }
    let traj = tracker.finish();
    let p = out.join("diagnostics.csv");
    write_with(&p, |w| write_diagnostics_csv(&rows, w)).stage("write")?;
    artifacts.push(relative(out, &p));
    let p = out.join("trajectory.csv");
    write_trajectory(&p, &traj).stage("write")?;
    artifacts.push(relative(out, &p));
    if let Some(e) = failure {
        return Err(StageError {
            stage: "step",
            error: e,
        });
    }
    let (mu, mv, e) = relative_drift(&rows);
    Ok(Output {
        metrics: json!({
            "steps": steps,
            "frames": rows.len(),
            "mass_drift": [mu, mv],
            "energy_drift": e,
            "final": rows.last(),
            "tracking_events": traj.events,
        }),
        artifacts,
    })
}

fn run_track(cfg: &RunConfig, out: &Path) -> StageResult<Output> {
    let dir = cfg
        .track_input
        .clone()
        .unwrap_or_else(|| out.join("snapshots"));
    let entries = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))
        .stage("input")?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(StageError {
            stage: "input",
            error: Error::InvalidArgument(format!("no .bin snapshots in {}", dir.display())),
        });
    }
    let states = paths
        .iter()
        .map(|p| read_snapshot(p, &cfg.domain))
        .collect::<Result<Vec<_>>>()
        .stage("input")?;
    let traj = track_run(&states, &track_options(cfg)).stage("track")?;
    let p = out.join("trajectory.csv");
    write_trajectory(&p, &traj).stage("write")?;
    Ok(Output {
        metrics: json!({
            "frames": traj.frames.len(),
            "rows": traj.row_count(),
            "events": traj.events,
        }),
        artifacts: vec![relative(out, &p)],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VortexDeviation {
    pub component: Component,
    pub index: usize,
    pub degree: i32,
    /// `sup_t |a_PDE(t) - a_ODE(t)|`; `None` when the track was lost.
    pub sup_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub epsilon: f64,
    pub grid: GridSpec,
    pub dt: f64,
    pub steps: usize,
    pub frames: usize,
    pub deviations: Vec<VortexDeviation>,
    pub max_deviation: Option<f64>,
    /// `sup_t` change of the tracked v-vortices when the u-family is removed.
    pub decoupling_delta: Option<f64>,
    pub mass_drift: [f64; 2],
    pub energy_drift: f64,
    pub ode_w_drift: [f64; 2],
    pub events: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub summary: ComparisonSummary,
    pub pde: Trajectory,
    pub ode: Trajectory,
    pub diagnostics: Vec<Diagnostics>,
}

/// Tracked PDE run; frames every `stride` steps plus the last one.
struct PdeRun {
    traj: Trajectory,
    rows: Vec<Diagnostics>,
    /// Track id per configured vortex of each component.
    ids: [Vec<Option<usize>>; 2],
}

fn pde_run(
    cfg: &RunConfig,
    grid: GridSpec,
    vortices: &VortexConfiguration,
    profile: &RadialProfile,
) -> StageResult<PdeRun> {
    let mut state = initial_state(cfg, grid, vortices, profile).stage("initial_data")?;
    let mut prop = Propagator::new(
        &cfg.domain,
        grid,
        cfg.epsilon,
        cfg.dt,
        StepConfig::default(),
    )
    .stage("propagator")?;
    let mut tracker = Tracker::new(track_options(cfg));
    let mut rows = vec![diagnostics(&state)];
    tracker.push(&state);
    let steps = cfg.steps();
    for k in 1..=steps {
        prop.step(&mut state).stage("pde")?;
        if k % cfg.snapshot_stride == 0 || k == steps {
            tracker.push(&state);
            rows.push(diagnostics(&state));
        }
    }
    let traj = tracker.finish();
    let first = &traj.frames[0];
    let ids = [Component::U, Component::V].map(|c| {
        vortices
            .family(c)
            .iter()
            .map(|v| {
                first
                    .points
                    .iter()
                    .filter(|p| p.component == c && p.degree == v.degree)
                    .min_by(|a, b| {
                        a.position
                            .dist(v.position)
                            .total_cmp(&b.position.dist(v.position))
                    })
                    .filter(|p| p.position.dist(v.position) <= track_options(cfg).max_jump)
                    .map(|p| p.index)
            })
            .collect()
    });
    Ok(PdeRun { traj, rows, ids })
}

fn position(traj: &Trajectory, frame: usize, c: Component, id: usize) -> Option<Vec2> {
    traj.frames[frame]
        .points
        .iter()
        .find(|p| p.component == c && p.index == id)
        .map(|p| p.position)
}

/// Sup over frames of the distance between a tracked vortex and a reference
/// path sampled on the same frame times.
fn sup_distance(
    run: &PdeRun,
    c: Component,
    k: usize,
    reference: impl Fn(usize) -> Option<Vec2>,
) -> Option<f64> {
    let id = run.ids[c as usize][k]?;
    let mut sup = 0.0f64;
    for f in 0..run.traj.frames.len() {
        let here = position(&run.traj, f, c, id)?;
        sup = sup.max(here.dist(reference(f)?));
    }
    Some(sup)
}

/// PDE with tracking against the reduced ODE from the same configuration,
/// plus the decoupling delta of the v-family.
pub fn run_compare(cfg: &RunConfig) -> StageResult<Comparison> {
    let grid = cfg.compare_grid().stage("config")?;
    let profile = solve_profile(&profile_options(cfg, cfg.profile_radius)).stage("profile")?;
    let full = pde_run(cfg, grid, &cfg.vortices, &profile)?;

    let green = cfg.domain.boundary_green(grid).stage("green")?;
    let steps = cfg.steps();
    let horizon = steps as f64 * cfg.dt;
    let ode = integrate(
        &green,
        &OdeState {
            t: 0.0,
            config: cfg.vortices.clone(),
        },
        &IntegrateOptions::new(horizon, cfg.dt).with_stride(cfg.snapshot_stride),
    )
    .stage("ode")?;

    let mut events = full.traj.events.clone();
    events.extend(ode.events.iter().cloned());
    let ode_frame = |f: usize| -> Option<usize> {
        let t = full.traj.frames[f].t;
        ode.frames
            .iter()
            .position(|o| (o.t - t).abs() <= 0.5 * cfg.dt)
    };
    let mut deviations = Vec::new();
    for c in [Component::U, Component::V] {
        for (k, v) in cfg.vortices.family(c).iter().enumerate() {
            let dev = sup_distance(&full, c, k, |f| {
                let o = ode_frame(f)?;
                ode.frames[o]
                    .points
                    .iter()
                    .find(|p| p.component == c && p.index == k)
                    .map(|p| p.position)
            });
            if dev.is_none() {
                events.push(format!(
                    "{} vortex {k}: track lost or ODE stopped early",
                    c.label()
                ));
            }
            deviations.push(VortexDeviation {
                component: c,
                index: k,
                degree: v.degree,
                sup_deviation: dev,
            });
        }
    }
    let max_deviation = deviations
        .iter()
        .map(|d| d.sup_deviation)
        .try_fold(0.0f64, |m, d| d.map(|d| m.max(d)));

    let decoupling_delta = if cfg.vortices.u.is_empty() || cfg.vortices.v.is_empty() {
        None
    } else {
        let solo_config = VortexConfiguration::new(Vec::new(), cfg.vortices.v.clone());
        let solo = pde_run(cfg, grid, &solo_config, &profile)?;
        (0..cfg.vortices.v.len())
            .map(|k| {
                let sid = solo.ids[1][k]?;
                sup_distance(&full, Component::V, k, |f| {
                    position(&solo.traj, f, Component::V, sid)
                })
            })
            .try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))
    };

    let (mu, mv, e) = relative_drift(&full.rows);
    Ok(Comparison {
        summary: ComparisonSummary {
            epsilon: cfg.epsilon,
            grid,
            dt: cfg.dt,
            steps,
            frames: full.traj.frames.len(),
            deviations,
            max_deviation,
            decoupling_delta,
            mass_drift: [mu, mv],
            energy_drift: e,
            ode_w_drift: ode.w_drift,
            events,
        },
        pde: full.traj,
        ode,
        diagnostics: full.rows,
    })
}
