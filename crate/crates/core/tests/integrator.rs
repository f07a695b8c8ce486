use proptest::prelude::*;
use seir_control::integrator::{grid_from_times, integrate_backward, integrate_forward};
use seir_control::model::{InitialConditions, ModelParams, Population, SeirModel};
use seir_control::{Error, TimeGrid, Trajectory};

fn italy(h: f64, tf: f64) -> Trajectory<7> {
    let ic = InitialConditions::ITALY_2020;
    let model = SeirModel::new(
        ModelParams::ITALY_2020,
        Population::new(ic.population).unwrap(),
    )
    .unwrap();
    model
        .simulate(&ic.state().unwrap(), &TimeGrid::new(0.0, tf, h).unwrap())
        .unwrap()
}

fn max_diff(a: &[f64; 7], b: &[f64; 7]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn zero_field_gives_constant_trajectory() {
    let grid = TimeGrid::new(0.0, 3.0, 0.25).unwrap();
    let x0 = [1.5, -2.0, 7.25];
    let traj = integrate_forward(|_, _: &[f64; 3]| Ok([0.0; 3]), x0, &grid).unwrap();
    assert!(traj.values().iter().all(|v| *v == x0));
    let back = integrate_backward(|_, _: &[f64; 3]| Ok([0.0; 3]), [0.0; 3], &grid).unwrap();
    assert!(back.values().iter().all(|v| *v == [0.0; 3]));
}

#[test]
fn endpoint_nodes_are_exact() {
    let grid = TimeGrid::new(0.0, 2.0, 0.1).unwrap();
    let x0 = [0.1f64 + 0.2, 1.0 / 3.0];
    let f = |t: f64, x: &[f64; 2]| Ok([x[1] * t.cos(), -x[0]]);
    assert_eq!(*integrate_forward(f, x0, &grid).unwrap().first(), x0);
    assert_eq!(*integrate_backward(f, x0, &grid).unwrap().last(), x0);
}

#[test]
fn time_reversal_recovers_initial_point() {
    let grid = TimeGrid::new(0.0, 5.0, 0.05).unwrap();
    let f = |t: f64, x: &[f64; 2]| Ok([x[1], -x[0] - 0.1 * x[1] + (0.3 * t).sin()]);
    let fwd = integrate_forward(f, [1.0, 0.0], &grid).unwrap();
    let back = integrate_backward(f, *fwd.last(), &grid).unwrap();
    assert!(max_diff2(back.first(), &[1.0, 0.0]) < 1e-7);
    for i in 0..grid.len() {
        assert!(max_diff2(back.node(i), fwd.node(i)) < 1e-7);
    }
}

fn max_diff2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

#[test]
fn self_convergence_is_fourth_order() {
    let reference = *italy(0.0125, 90.0).last();
    let e1 = max_diff(italy(0.2, 90.0).last(), &reference);
    let e2 = max_diff(italy(0.1, 90.0).last(), &reference);
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    // Same study with the finer pair against h/16.
    let reference = *italy(0.1 / 16.0, 90.0).last();
    let e1 = max_diff(italy(0.1, 90.0).last(), &reference);
    let e2 = max_diff(italy(0.05, 90.0).last(), &reference);
    assert!((12.0..=20.0).contains(&(e1 / e2)), "ratio {}", e1 / e2);
}

#[test]
fn hermite_dense_output_on_sine() {
    let grid = TimeGrid::new(0.0, 10.0, 0.1).unwrap();
    let values: Vec<[f64; 1]> = grid.times().map(|t| [t.sin()]).collect();
    let derivs: Vec<[f64; 1]> = grid.times().map(|t| [t.cos()]).collect();
    let traj = Trajectory::with_derivatives(grid, values, derivs).unwrap();
    let mut worst = 0.0f64;
    for i in 0..grid.steps() {
        let t = grid.time(i) + 0.05;
        worst = worst.max((traj.interpolate(t).unwrap()[0] - t.sin()).abs());
    }
    assert!(worst <= 1e-6, "{worst}");
    for i in 0..grid.len() {
        assert_eq!(traj.interpolate(grid.time(i)).unwrap(), *traj.node(i));
    }
}

#[test]
fn hermite_reproduces_linear_functions() {
    let grid = TimeGrid::new(1.0, 3.0, 0.5).unwrap();
    let traj = integrate_forward(|_, _: &[f64; 1]| Ok([2.0]), [1.0], &grid).unwrap();
    for t in [1.25, 1.75, 2.6, 2.99] {
        assert!((traj.interpolate(t).unwrap()[0] - (1.0 + 2.0 * (t - 1.0))).abs() < 1e-14);
    }
}

#[test]
fn interpolation_outside_grid_is_an_error() {
    let traj = italy(0.1, 5.0);
    assert!(matches!(
        traj.interpolate(5.1),
        Err(Error::OutOfRange { .. })
    ));
    assert!(matches!(
        traj.interpolate(-0.01),
        Err(Error::OutOfRange { .. })
    ));
    assert!(traj.interpolate(5.0 + 1e-10).is_ok());
}

#[test]
fn grid_must_land_on_tf() {
    assert!(TimeGrid::new(0.0, 1.0, 0.3).is_err());
    assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
    assert!(TimeGrid::new(1.0, 0.0, 0.1).is_err());
    let g = TimeGrid::new(0.0, 90.0, 0.1).unwrap();
    assert_eq!(g.len(), 901);
    assert_eq!(g.time(900), 90.0);
}

#[test]
fn nonfinite_state_reports_time() {
    let grid = TimeGrid::new(0.0, 1.0, 0.1).unwrap();
    let err = integrate_forward(
        |t, x: &[f64; 1]| Ok([if t > 0.45 { f64::NAN } else { x[0] }]),
        [1.0],
        &grid,
    )
    .unwrap_err();
    match err {
        Error::NonFinite { t, .. } => assert!(t > 0.3 && t < 0.6, "{t}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn csv_round_trip() {
    let traj = italy(0.5, 4.0);
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, &["S", "E", "I", "Q", "R", "D", "P"])
        .unwrap();
    let back = Trajectory::<7>::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.grid().len(), traj.grid().len());
    for i in 0..traj.len() {
        for k in 0..7 {
            let (a, b) = (back.node(i)[k], traj.node(i)[k]);
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }
    assert!(grid_from_times(&[0.0, 0.5, 1.1]).is_err());
}

#[test]
fn deterministic_across_runs() {
    assert_eq!(italy(0.1, 30.0).values(), italy(0.1, 30.0).values());
}

proptest! {
    #[test]
    fn exponential_decay_error_matches_rk4_bound(rate in 0.1f64..2.0, n in 5usize..50) {
        let h = 1.0 / n as f64;
        let grid = TimeGrid::new(0.0, 1.0, h).unwrap();
        let traj = integrate_forward(|_, x: &[f64; 1]| Ok([-rate * x[0]]), [1.0], &grid).unwrap();
        let err = (traj.last()[0] - (-rate).exp()).abs();
        // Global error of RK4 on this problem is about (rate h)^4 / 120.
        prop_assert!(err <= (rate * h).powi(4) / 100.0 * rate);
    }
}
