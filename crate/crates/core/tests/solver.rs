mod common;

use common::fd_oracle::FdOracle;
use common::{max_abs_diff, mode_perturbed, nusselt_window};
use rbc_control::diagnostics::nusselt;
use rbc_control::env::HeaterAction;
use rbc_control::sim::{
    divergence_linf, init_conduction, read_checkpoint, step, write_checkpoint, BottomProfile, SimConfig, Solver,
};
use rbc_control::RbcError;

#[test]
fn subcritical_flow_decays_like_the_oracle() {
    let config = SimConfig::new(1e3, 48, 32);
    let start = init_conduction(&config, 0.05, 7).unwrap();
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let mut solver = Solver::new(config, &start).unwrap();
    let mut energies = Vec::new();
    for _ in 0..200 {
        solver.step(&bottom, config.steps_for(1.0).unwrap()).unwrap();
        energies.push(solver.state().kinetic_energy());
    }
    let peak = energies.iter().copied().fold(0.0, f64::max);
    let state = solver.state();
    let max_u = state.u_x.iter().chain(&state.u_y).fold(0.0f64, |m, v| m.max(v.abs()));
    let ys = config.y_coords();
    let mut deviation = 0.0f64;
    for (j, &y) in ys.iter().enumerate() {
        for i in 0..config.nx {
            deviation = deviation.max((state.temp[j * config.nx + i] - config.conduction_temperature(y)).abs());
        }
    }
    assert!(max_u < 1e-4, "max |u| = {max_u}");
    assert!(deviation < 1e-3, "temperature deviation {deviation}");
    assert!(*energies.last().unwrap() < 1e-8 * peak);
    // monotone decay once the initial transient has passed
    let peak_at = energies.iter().position(|&e| e == peak).unwrap();
    assert!(energies[peak_at..].windows(2).all(|w| w[1] <= w[0]));

    let mut oracle = FdOracle::new(1e3, config.pr, 32, 24);
    oracle.perturb(0.05, |x, y| (x.cos() + (2.0 * x).sin()) * (std::f64::consts::FRAC_PI_2 * y).cos());
    let mut oracle_peak = 0.0f64;
    // explicit diffusion limits the oracle to dt of about 0.03 on this grid
    for _ in 0..10000 {
        oracle.step(0.02);
        oracle_peak = oracle_peak.max(oracle.kinetic_energy());
    }
    assert!(oracle.kinetic_energy() < 1e-8 * oracle_peak);
    assert!(oracle.conduction_deviation() < 1e-3);
}

#[test]
fn laminar_nusselt_is_stationary_and_matches_the_oracle() {
    let config = SimConfig::new(1e4, 48, 32);
    let start = mode_perturbed(&config, 2.0, 0.05);
    let (mean, min, max) = nusselt_window(&config, &start, 300.0, 100.0, 0.5);
    assert!((1.5..=4.0).contains(&mean), "Nu = {mean}");
    assert!(min > 0.9 * mean && max < 1.1 * mean, "Nu range [{min}, {max}] around {mean}");

    let mut oracle = FdOracle::new(1e4, config.pr, 64, 41);
    oracle.perturb(0.05, |x, y| (2.0 * x).cos() * (std::f64::consts::FRAC_PI_2 * y).cos());
    let dt = 0.02;
    for _ in 0..15000 {
        oracle.step(dt);
    }
    let mut acc = 0.0;
    for _ in 0..200 {
        for _ in 0..25 {
            oracle.step(dt);
        }
        acc += oracle.nusselt();
    }
    let oracle_nu = acc / 200.0;
    let rel = (oracle_nu - mean).abs() / mean;
    println!("spectral Nu {mean:.5}, finite-difference Nu {oracle_nu:.5}, relative gap {rel:.4}");
    assert!(rel < 0.05);
}

#[test]
fn doubling_resolution_changes_mean_nusselt_by_under_two_percent() {
    let coarse = SimConfig::new(1e4, 48, 32);
    let fine = SimConfig::new(1e4, 96, 64);
    let (nu_c, _, _) = nusselt_window(&coarse, &mode_perturbed(&coarse, 2.0, 0.05), 200.0, 100.0, 0.5);
    let (nu_f, _, _) = nusselt_window(&fine, &mode_perturbed(&fine, 2.0, 0.05), 200.0, 100.0, 0.5);
    assert!((nu_c - nu_f).abs() / nu_f < 0.02, "{nu_c} vs {nu_f}");
}

#[test]
fn velocity_stays_divergence_free_at_high_rayleigh() {
    let config = SimConfig::new(1e5, 48, 32);
    let start = init_conduction(&config, 0.01, 3).unwrap();
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let mut solver = Solver::new(config, &start).unwrap();
    solver.step(&bottom, config.steps_for(150.0).unwrap()).unwrap();
    assert!(solver.state().kinetic_energy() > 1.0, "flow should be convecting");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        solver.step(&bottom, 1).unwrap();
        worst = worst.max(divergence_linf(&config, solver.state()));
    }
    assert!(worst <= 1e-8, "divergence {worst}");
}

#[test]
fn wall_rows_hold_imposed_values_after_every_step() {
    let config = SimConfig::new(1e4, 48, 32);
    let start = init_conduction(&config, 0.05, 1).unwrap();
    let mut temps = [2.0 - 0.75 / 11.0; 12];
    temps[3] = 2.75;
    let action = HeaterAction { temps };
    let bottom = action.to_profile(config.nx);
    let mut solver = Solver::new(config, &start).unwrap();
    let nx = config.nx;
    let top = (config.ny - 1) * nx;
    for _ in 0..50 {
        solver.step(&bottom, 1).unwrap();
        let s = solver.state();
        assert!(max_abs_diff(&s.temp[..nx], &bottom.values) <= 1e-12);
        assert!(s.temp[top..].iter().all(|&t| (t - config.t_top).abs() <= 1e-12));
        for field in [&s.u_x, &s.u_y] {
            assert!(field[..nx].iter().chain(&field[top..]).all(|v| v.abs() <= 1e-12));
        }
    }
}

#[test]
fn identical_inputs_give_bitwise_identical_trajectories() {
    let config = SimConfig::new(1e5, 32, 24);
    let start = init_conduction(&config, 0.05, 11).unwrap();
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let a = step(&config, &start, &bottom, 400).unwrap();
    let b = step(&config, &start, &bottom, 400).unwrap();
    assert_eq!(a, b);
}

#[test]
fn conduction_state_is_a_fixed_point() {
    let config = SimConfig::new(1e4, 48, 32);
    let start = init_conduction(&config, 0.0, 0).unwrap();
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let one = step(&config, &start, &bottom, 1).unwrap();
    let many = step(&config, &start, &bottom, 100).unwrap();
    for s in [&one, &many] {
        assert!(max_abs_diff(&s.temp, &start.temp) <= 1e-10);
        assert!(s.kinetic_energy() <= 1e-20);
    }
    assert!(nusselt(&one, &config).unwrap().abs() < 1e-12);
}

#[test]
fn checkpoint_restart_continues_the_run() {
    let config = SimConfig::new(1e4, 48, 32);
    let start = mode_perturbed(&config, 2.0, 0.05);
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let mid = step(&config, &start, &bottom, 2000).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    write_checkpoint(&path, config.ra, config.pr, &mid).unwrap();
    let loaded = read_checkpoint(&path).unwrap();
    assert_eq!(loaded.state.temp, mid.temp);
    assert_eq!(loaded.state.u_x, mid.u_x);
    assert_eq!(loaded.state.time, mid.time);

    let straight = step(&config, &start, &bottom, 2400).unwrap();
    let resumed = step(&config, &loaded.state, &bottom, 400).unwrap();
    // the restart begins with a first-order step, so agreement is close
    // but not bitwise
    assert!(max_abs_diff(&straight.temp, &resumed.temp) < 1e-4);
    assert!((straight.time - resumed.time).abs() < 1e-9);
}

#[test]
fn unstable_time_step_reports_divergence() {
    let mut config = SimConfig::new(1e6, 32, 24);
    config.dt = 2.0;
    let start = init_conduction(&config, 0.3, 0).unwrap();
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    match step(&config, &start, &bottom, 2000) {
        Err(RbcError::Diverged { step, .. }) => assert!(step >= 1),
        other => panic!("expected divergence, got {:?}", other.map(|s| s.time)),
    }
}
