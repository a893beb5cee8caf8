use vortiline::euler::{EulerInitial, EulerSolver, EulerState};
use vortiline::sqg::{SqgInitial, SqgSolver, SqgState};
use vortiline::stepper::TimeStepper;
use vortiline::{Grid, ScalarField, VectorField};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn run_euler(solver: &EulerSolver, omega: VectorField, t_end: f64, cfl: f64) -> Vec<EulerState> {
    let stepper = TimeStepper::adaptive(cfl).unwrap();
    let h = solver.grid().min_spacing();
    let mut states = vec![EulerState { omega, time: 0.0 }];
    loop {
        let s = states.last().unwrap();
        if t_end - s.time <= 1e-12 {
            break;
        }
        let c = stepper.choose(solver.max_speed(&s.omega).unwrap(), h, t_end - s.time);
        let next = solver.step(s, c.dt).unwrap();
        states.push(next);
    }
    states
}

#[test]
fn taylor_green_tendency_matches_closed_form() {
    let g = Grid::cube(16).unwrap();
    let solver = EulerSolver::new(&g).unwrap();
    let w = EulerInitial::TaylorGreen { amplitude: 1.0 }.sample(&g).unwrap();
    let expected_w = g.sample_vector(|[x, y, z]| {
        [
            -x.cos() * y.sin() * z.sin(),
            -x.sin() * y.cos() * z.sin(),
            2.0 * x.sin() * y.sin() * z.cos(),
        ]
    });
    for c in 0..3 {
        assert!(max_diff(&w.components()[c], &expected_w.components()[c]) < 1e-13);
    }
    let rhs = solver.rhs(&w).unwrap();
    let expected = g.sample_vector(|[x, y, z]| {
        [
            -0.5 * (2.0 * y).sin() * (2.0 * z).sin(),
            0.5 * (2.0 * x).sin() * (2.0 * z).sin(),
            0.0,
        ]
    });
    for c in 0..3 {
        let err = max_diff(&rhs.components()[c], &expected.components()[c]);
        assert!(err < 1e-12, "component {c}: {err:e}");
    }
}

#[test]
fn taylor_green_conserves_energy_and_helicity() {
    let g = Grid::cube(32).unwrap();
    let solver = EulerSolver::new(&g).unwrap();
    let w = solver.prepare(&EulerInitial::TaylorGreen { amplitude: 1.0 }.sample(&g).unwrap()).unwrap();
    let states = run_euler(&solver, w, 0.5, 0.5);
    let e0 = solver.summary(&states[0].omega).unwrap();
    for s in &states {
        let e = solver.summary(&s.omega).unwrap();
        let drift = (e.kinetic_energy - e0.kinetic_energy).abs() / e0.kinetic_energy;
        assert!(drift < 1e-5, "energy drift {drift:e} at t = {}", s.time);
        assert!(e.helicity.abs() < 1e-10);
        assert!(solver.divergence_ratio(&s.omega).unwrap() < 1e-12);
    }
    let enstrophy: Vec<f64> = states.iter().map(|s| s.omega.integral_dot(&s.omega)).collect();
    assert!(enstrophy.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn abc_flow_stays_put() {
    let g = Grid::cube(16).unwrap();
    let solver = EulerSolver::new(&g).unwrap();
    let w0 = EulerInitial::abc_default().sample(&g).unwrap();
    let states = run_euler(&solver, w0.clone(), 0.5, 0.5);
    let w1 = &states.last().unwrap().omega;
    let scale = w0.max_magnitude();
    for c in 0..3 {
        assert!(max_diff(&w1.components()[c], &w0.components()[c]) / scale < 1e-10);
    }
}

#[test]
fn hyperdiffusion_decays_single_sqg_mode_exactly() {
    let g = Grid::square(32).unwrap();
    let (nu, order, k) = (1e-3, 2u32, 2.0f64);
    let solver = SqgSolver::new(&g).unwrap().with_hyperdiffusion(nu, order);
    let theta0 = g.sample(|[x, _, _]| (k * x).sin());
    let dt = 0.01;
    let mut s = SqgState { theta: theta0.clone(), time: 0.0 };
    for _ in 0..100 {
        s = solver.step(&s, dt).unwrap();
    }
    let decay = (-nu * k.powi(2 * order as i32) * s.time).exp();
    let expected: Vec<f64> = theta0.values().iter().map(|v| v * decay).collect();
    assert!(max_diff(s.theta.values(), &expected) < 1e-12);
}

#[test]
fn sqg_conserves_mean_and_square_integral() {
    let g = Grid::square(64).unwrap();
    let solver = SqgSolver::new(&g).unwrap();
    let theta = solver.prepare(&SqgInitial::two_gaussian_default().sample(&g).unwrap()).unwrap();
    let stepper = TimeStepper::adaptive(0.5).unwrap();
    let h = g.min_spacing();
    let (m0, q0) = (theta.integral(), theta.integral_sq());
    let mut s = SqgState { theta, time: 0.0 };
    while 0.5 - s.time > 1e-12 {
        let c = stepper.choose(solver.max_speed(&s.theta).unwrap(), h, 0.5 - s.time);
        s = solver.step(&s, c.dt).unwrap();
        assert!((s.theta.integral() - m0).abs() < 1e-12 * q0.max(1.0));
        assert!((s.theta.integral_sq() - q0).abs() / q0 < 1e-6);
    }
}

#[test]
fn zero_field_is_a_fixed_point() {
    let g = Grid::square(16).unwrap();
    let solver = SqgSolver::new(&g).unwrap();
    let s = solver
        .step(&SqgState { theta: ScalarField::zeros(&g), time: 0.0 }, 0.1)
        .unwrap();
    assert!(s.theta.values().iter().all(|&v| v == 0.0));
}
