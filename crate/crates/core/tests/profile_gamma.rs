use cnls_vortex::profile_gamma::{
    background, gamma_from_profile, gamma_g, profile_energy, shared_node_error, solve_profile,
    tail_coefficients, tail_fit, tail_fit_window, ProfileOptions, RadialProfile,
};

fn solve(g: f64, radius: f64, intervals: usize) -> RadialProfile {
    solve_profile(&ProfileOptions::new(g, radius, intervals)).unwrap()
}

#[test]
fn bounds_hold_across_couplings() {
    for g in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let p = solve(g, 200.0, 4096);
        assert!(p.residual <= 1e-9, "g = {g}: residual {}", p.residual);
        assert!(
            p.bound_violations().is_empty(),
            "g = {g}: {:?}",
            p.bound_violations()
        );
        assert!(p.f1[0].abs() < 1e-15);
        let s = background(g);
        assert!(
            (p.f1.last().unwrap() - s).abs() < 1e-15 && (p.f2.last().unwrap() - s).abs() < 1e-15
        );
        let (_, d2) = p.derivatives();
        assert!(d2[0].abs() <= 1e-6, "g = {g}: f2'(0) = {}", d2[0]);
    }
}

#[test]
fn decoupled_profile_has_flat_second_component() {
    let p = solve(0.0, 200.0, 4096);
    assert!(p.f2.iter().all(|f| (f - 1.0).abs() <= 1e-9));
    let fit = tail_fit(&p).unwrap();
    assert!((fit.alpha - 0.5).abs() <= 0.01, "{}", fit.alpha);
    assert!(fit.beta.abs() <= 1e-6, "{}", fit.beta);
}

#[test]
fn tail_coefficients_at_half_coupling() {
    let p = solve(0.5, 200.0, 4096);
    let (alpha, beta) = tail_coefficients(0.5);
    assert!((alpha - 0.816497).abs() < 1e-6 && (beta - 0.408248).abs() < 1e-6);
    let fit = tail_fit(&p).unwrap();
    assert!(((fit.alpha - alpha) / alpha).abs() <= 0.02, "{}", fit.alpha);
    assert!(((fit.beta - beta) / beta).abs() <= 0.02, "{}", fit.beta);
    assert!((fit.slope + 2.0).abs() <= 0.1, "{}", fit.slope);
    assert!(!fit.warning);
    let other = tail_fit_window(&p, 200.0 / 3.0, 400.0 / 3.0).unwrap();
    assert!(((other.alpha - fit.alpha) / fit.alpha).abs() <= 0.05);
    assert!(((other.beta - fit.beta) / fit.beta).abs() <= 0.05);
    assert!(fit.derivative_decay.is_finite() && fit.derivative_decay < 10.0);
}

#[test]
fn mesh_refinement_is_second_order() {
    let p1 = solve(0.5, 100.0, 512);
    let p2 = solve(0.5, 100.0, 1024);
    let p3 = solve(0.5, 100.0, 2048);
    let e1 = shared_node_error(&p1, &p2).unwrap();
    let e2 = shared_node_error(&p2, &p3).unwrap();
    let ratio = e1 / e2;
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio} ({e1}, {e2})");
}

#[test]
fn profile_energy_is_mesh_stable() {
    let a = profile_energy(&solve(0.5, 200.0, 16384), 0.0, 10.0).unwrap();
    let b = profile_energy(&solve(0.5, 200.0, 32768), 0.0, 10.0).unwrap();
    assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
}

#[test]
fn gamma_converges_in_outer_radius() {
    let g1 = gamma_g(0.5, 100.0).unwrap();
    let g2 = gamma_g(0.5, 200.0).unwrap();
    let g3 = gamma_g(0.5, 400.0).unwrap();
    let (d1, d2) = ((g1.gamma - g2.gamma).abs(), (g2.gamma - g3.gamma).abs());
    assert!(d2 < d1 && d2 <= 1e-3, "{d1} {d2}");
    assert!(g2.tail_correction.abs() < 1e-4);
}

#[test]
fn decoupled_gamma_matches_frozen_second_component() {
    let p = solve(0.0, 200.0, 4096);
    let frozen =
        RadialProfile::from_samples(0.0, p.r.clone(), p.f1.clone(), vec![1.0; p.len()]).unwrap();
    let a = gamma_from_profile(&p).unwrap().gamma;
    let b = gamma_from_profile(&frozen).unwrap().gamma;
    assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
}
