use std::sync::OnceLock;

use cnls_vortex::cnls::{build_initial_data, InitialDataOptions, Propagator, SimState, StepConfig};
use cnls_vortex::geometry::{Domain, GridSpec};
use cnls_vortex::harmonic_map::{Component, Vortex, VortexConfiguration};
use cnls_vortex::profile_gamma::{solve_profile, ProfileOptions, RadialProfile};
use cnls_vortex::vortex_tracking::{
    default_floor, degree_sums, detect, detect_state, track_run, TrackOptions, Tracker,
};
use cnls_vortex::Vec2;
use proptest::prelude::*;

const G: f64 = 0.5;
const EPS: f64 = 1.0 / 16.0;
const N: usize = 64;

fn square() -> Domain {
    Domain::centered_square(1.0).unwrap()
}

fn profile() -> &'static RadialProfile {
    static P: OnceLock<RadialProfile> = OnceLock::new();
    P.get_or_init(|| solve_profile(&ProfileOptions::new(G, 200.0, 4096)).unwrap())
}

fn opts() -> TrackOptions {
    TrackOptions {
        modulus_floor: None,
        max_jump: 0.1,
    }
}

fn initial(u: &[(f64, f64, i32)], v: &[(f64, f64, i32)]) -> SimState {
    let fam = |s: &[(f64, f64, i32)]| {
        s.iter()
            .map(|&(x, y, d)| Vortex::new(Vec2::new(x, y), d).unwrap())
            .collect()
    };
    let cfg = VortexConfiguration::new(fam(u), fam(v));
    build_initial_data(
        &square(),
        GridSpec::square(N).unwrap(),
        &cfg,
        profile(),
        EPS,
        &InitialDataOptions::default(),
    )
    .unwrap()
}

fn conjugate(s: &SimState) -> SimState {
    let mut c = SimState::new(s.u.conj(), s.v.conj(), s.epsilon, s.g).unwrap();
    c.t = s.t;
    c
}

#[test]
fn conjugation_flips_degrees_and_keeps_positions() {
    let s = initial(&[(0.3, -0.2, 1), (-0.35, -0.2, -1)], &[(0.0, 0.5, 1)]);
    let a = detect_state(&s, &opts());
    let b = detect_state(&conjugate(&s), &opts());
    assert_eq!(a.len(), 3);
    assert_eq!(a.len(), b.len());
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.position, q.position);
        assert_eq!(p.component, q.component);
        assert_eq!(p.degree, -q.degree);
    }
}

#[test]
fn frozen_state_gives_constant_trajectory() {
    let s = initial(&[(0.3, 0.1, 1)], &[(-0.2, -0.3, -1)]);
    let frames: Vec<SimState> = (0..10)
        .map(|k| {
            let mut c = s.clone();
            c.t = k as f64 * 0.01;
            c
        })
        .collect();
    let traj = track_run(&frames, &opts()).unwrap();
    assert_eq!(traj.frames.len(), 10);
    assert!(traj.events.is_empty());
    for f in &traj.frames {
        assert_eq!(f.points, traj.frames[0].points);
    }
}

#[test]
fn short_run_keeps_degree_sums_and_small_jumps() {
    let mut s = initial(&[(0.35, -0.2, 1), (-0.35, -0.2, 1)], &[(0.0, 0.5, -1)]);
    let o = opts();
    let mut tracker = Tracker::new(o);
    tracker.push(&s);
    let mut prop = Propagator::new(
        &square(),
        s.u.grid,
        EPS,
        0.25 * EPS * EPS,
        StepConfig::default(),
    )
    .unwrap();
    for _ in 0..10 {
        prop.run(&mut s, 20).unwrap();
        tracker.push(&s);
    }
    let traj = tracker.finish();
    assert!(traj.events.is_empty(), "{:?}", traj.events);
    for f in &traj.frames {
        assert_eq!(degree_sums(f), [2, -1]);
    }
    for comp in [Component::U, Component::V] {
        let count = if comp == Component::U { 2 } else { 1 };
        for k in 0..count {
            let path = traj.track(comp, k);
            assert_eq!(path.len(), traj.frames.len());
            for w in path.windows(2) {
                assert!(w[1].1.dist(w[0].1) < o.max_jump);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn single_vortex_is_located_within_half_a_cell(x in -0.5..0.5f64, y in -0.5..0.5f64, positive in prop::bool::ANY) {
        let d = if positive { 1 } else { -1 };
        let s = initial(&[(x, y, d)], &[]);
        let found = detect(&s.u, Component::U, default_floor(G));
        prop_assert_eq!(found.len(), 1);
        prop_assert_eq!(found[0].degree, d);
        let h = 2.0 / N as f64;
        let err = found[0].position.dist(Vec2::new(x, y));
        prop_assert!(err <= 0.5 * h, "error {err} at ({x}, {y})");
    }
}
