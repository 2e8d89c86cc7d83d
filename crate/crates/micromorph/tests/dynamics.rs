use micromorph::dynamics::{cfl_timestep, rhs, BoundaryData, Constraints, Leapfrog, SourceTerms};
use micromorph::energy::total_energy;
use micromorph::initial::{random_modes, RandomModes};
use micromorph::{CartesianGrid, MaterialParameters, NodalField, SimulationState, TensorField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PARAMS: MaterialParameters = MaterialParameters::new(1.0, 0.5, 0.3, 1.0, 0.2, 0.5);

fn potential(s: &SimulationState) -> f64 {
    total_energy(s, &PARAMS, None).unwrap().potential()
}

fn weighted_dot<F: NodalField>(w: &[f64], a: &F, b: &F) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| x.iter().zip(y).zip(w).map(|((p, q), wi)| p * q * wi).sum::<f64>())
        .sum()
}

/// The potential is quadratic, so a central difference of it along any direction is exact:
/// the accelerations must be the negative quadrature-weighted gradient of the potential.
fn check_rhs_is_energy_gradient(g: CartesianGrid) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rand_field = |n: usize| -> Vec<f64> { (0..n * g.len()).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let mut s = SimulationState::zeros(&g);
    s.u = VectorField::from_slice(&g, &rand_field(3));
    s.p = TensorField::from_slice(&g, &rand_field(9));
    let mut du = VectorField::from_slice(&g, &rand_field(3));
    let mut dp = TensorField::from_slice(&g, &rand_field(9));
    let (mut au, mut ap) = rhs(&s, &PARAMS, &SourceTerms::none(), 0.0).unwrap();
    if !g.is_periodic() {
        let c = Constraints::new(&g, [true; 6]);
        c.mask(&mut s.u, &mut s.p);
        c.mask(&mut du, &mut dp);
        let (a, b) = rhs(&s, &PARAMS, &SourceTerms::none(), 0.0).unwrap();
        au = a;
        ap = b;
        c.mask(&mut au, &mut ap);
    }
    let eps = 1e-3;
    let shifted = |sign: f64| {
        let mut t = s.clone();
        t.u.axpy(sign * eps, &du);
        t.p.axpy(sign * eps, &dp);
        potential(&t)
    };
    let directional = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
    let w = g.weights();
    let predicted = -(weighted_dot(&w, &au, &du) + weighted_dot(&w, &ap, &dp));
    assert!(
        (directional - predicted).abs() <= 1e-8 * directional.abs().max(1.0),
        "{directional} vs {predicted}"
    );
}

#[test]
fn accelerations_are_the_energy_gradient_periodic() {
    check_rhs_is_energy_gradient(CartesianGrid::periodic([1.0, 0.9, 1.1], [6, 5, 7]).unwrap());
}

#[test]
fn accelerations_are_the_energy_gradient_with_pinned_boundary() {
    check_rhs_is_energy_gradient(CartesianGrid::new([1.0, 0.9, 1.1], [6, 5, 7]).unwrap());
}

fn integrate(s0: &SimulationState, t_final: f64, steps: usize) -> SimulationState {
    let dt = t_final / steps as f64;
    let mut lf = Leapfrog::new(s0.grid(), PARAMS, SourceTerms::none(), BoundaryData::homogeneous(), dt).unwrap();
    let mut s = s0.clone();
    for _ in 0..steps {
        lf.step(&mut s).unwrap();
    }
    s
}

fn distance(a: &SimulationState, b: &SimulationState) -> f64 {
    let mut du = a.u.clone();
    du.axpy(-1.0, &b.u);
    let mut dp = a.p.clone();
    dp.axpy(-1.0, &b.p);
    du.max_abs().max(dp.max_abs())
}

#[test]
fn leapfrog_is_second_order_in_time() {
    let g = CartesianGrid::new([1.0; 3], [9, 9, 9]).unwrap();
    let s0 = random_modes(&g, &RandomModes { max_mode: 2, ..Default::default() });
    let t_final = 0.4;
    let base = (t_final / cfl_timestep(&PARAMS, &g, 0.8).unwrap()).ceil() as usize;
    let reference = integrate(&s0, t_final, 64 * base);
    let errs: Vec<f64> = [1, 2, 4].iter().map(|m| distance(&integrate(&s0, t_final, m * base), &reference)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.85..2.15).contains(&order), "errors {errs:?}");
    }
}

#[test]
fn discrete_energy_is_conserved_with_pinned_boundary() {
    let g = CartesianGrid::new([1.0, 1.2, 0.8], [8, 9, 7]).unwrap();
    let mut s = random_modes(&g, &RandomModes::default());
    let dt = cfl_timestep(&PARAMS, &g, 0.9).unwrap();
    let mut lf = Leapfrog::new(&g, PARAMS, SourceTerms::none(), BoundaryData::homogeneous(), dt).unwrap();
    let e0 = lf.discrete_energy(&s).unwrap();
    for _ in 0..300 {
        lf.step(&mut s).unwrap();
    }
    let e1 = lf.discrete_energy(&s).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-11, "{e0} -> {e1}");
}

#[test]
fn beyond_the_stability_limit_the_run_blows_up() {
    let g = CartesianGrid::cube(7).unwrap();
    let mut s = random_modes(&g, &RandomModes::default());
    let dt = 3.0 * cfl_timestep(&PARAMS, &g, 1.0).unwrap();
    let mut lf = Leapfrog::new(&g, PARAMS, SourceTerms::none(), BoundaryData::homogeneous(), dt).unwrap();
    let e0 = total_energy(&s, &PARAMS, None).unwrap().total;
    let mut outcome = Ok(());
    for _ in 0..2000 {
        outcome = lf.step(&mut s);
        if outcome.is_err() {
            break;
        }
    }
    match outcome {
        Err(e) => assert_eq!(e.kind(), "unstable"),
        Ok(()) => assert!(total_energy(&s, &PARAMS, None).unwrap().total > 1e6 * e0),
    }
}
