use cavity_feedback::evolve::*;
use cavity_feedback::generators::*;
use cavity_feedback::*;
use std::f64::consts::PI;

fn decay(s: &Space) -> Liouvillian {
    let mut b = Liouvillian::builder(s, "decay");
    b.dissipator(1.0, &annihilation(s).unwrap());
    b.build()
}

fn vx_vy(rho: &DensityMatrix) -> (f64, f64) {
    let (x, y) = quadratures(rho.space()).unwrap();
    (variance(&x, rho).unwrap(), variance(&y, rho).unwrap())
}

#[test]
fn zero_generator_is_static() {
    let s = make_space(5).unwrap();
    let rho0 = DensityMatrix::coherent(&s, C64::new(0.4, -0.3)).unwrap();
    let ev = propagate(&Liouvillian::zero(&s), &rho0, 1.0, 0.1).unwrap();
    assert_eq!(ev.times.len(), 11);
    assert!(ev.states.iter().all(|r| r.trace_distance(&rho0).unwrap() == 0.0));
}

#[test]
fn photon_decays_exponentially() {
    let s = make_space(4).unwrap();
    let n = number(&s).unwrap();
    let ev = propagate(&decay(&s), &DensityMatrix::fock(&s, 1).unwrap(), 2.0, 1e-3).unwrap();
    for (t, rho) in ev.times.iter().zip(&ev.states).step_by(100) {
        assert!((expect(&n, rho).unwrap().re - (-t).exp()).abs() < 1e-12);
    }
    assert!(ev.max_trace_drift < 1e-8);
}

#[test]
fn fourth_order_convergence() {
    let s = make_space(10).unwrap();
    let (x, _) = quadratures(&s).unwrap();
    let mut b = Liouvillian::builder(&s, "driven");
    b.extend(&decay(&s)).unwrap();
    b.hamiltonian(&(&(&x * 0.8) + &(&number(&s).unwrap() * 1.3)));
    let l = b.build();
    // full rank, so the step error cannot push an eigenvalue below zero
    let coh = DensityMatrix::coherent(&s, C64::new(0.5, 0.0)).unwrap();
    let mix = (coh.matrix() + CMatrix::identity(10, 10) * C64::new(0.1, 0.0)) / C64::new(2.0, 0.0);
    let rho0 = DensityMatrix::new(s.clone(), mix).unwrap();
    let h = 0.1;
    let reference = propagate(&l, &rho0, 1.0, h / 8.0).unwrap();
    let err = |dt: f64| {
        let ev = propagate(&l, &rho0, 1.0, dt).unwrap();
        (ev.final_state().matrix() - reference.final_state().matrix()).norm()
    };
    let order = (err(h) / err(h / 2.0)).log2();
    assert!((order - 4.0).abs() < 0.3, "observed order {order}");
}

#[test]
fn propagate_rejects_bad_step() {
    let s = make_space(3).unwrap();
    let rho0 = DensityMatrix::vacuum(&s);
    assert!(propagate(&decay(&s), &rho0, 1.0, 0.0).is_err());
    assert!(propagate(&decay(&s), &rho0, 1.0, -1e-3).is_err());
    let other = make_space(4).unwrap();
    assert!(propagate(&decay(&other), &rho0, 1.0, 1e-2).is_err());
}

#[test]
fn decay_relaxes_to_vacuum() {
    let s = make_space(6).unwrap();
    let ss = steady_state_with(&decay(&s), &NumericPolicy::DEFAULT).unwrap();
    assert!(ss.state.trace_distance(&DensityMatrix::vacuum(&s)).unwrap() < 1e-10);
    assert!(ss.residual < 1e-10);
}

#[test]
fn quadrature_steady_variances() {
    let s = make_space(20).unwrap();
    let (_, y) = quadratures(&s).unwrap();
    let a = annihilation(&s).unwrap();
    let l = quadrature_feedback_liouvillian(&a, &(&y * -0.5), &Operator::zeros(&s), &BathParams::vacuum()).unwrap();
    let ss = steady_state_with(&l, &NumericPolicy::DEFAULT).unwrap();
    assert!(ss.residual < 1e-10);
    let (vx, vy) = vx_vy(&ss.state);
    assert!((vx - 4.0 / 3.0).abs() < 1e-3, "V(x) = {vx}");
    assert!((vy - 1.0).abs() < 1e-3, "V(y) = {vy}");
}

#[test]
fn quadrature_steady_variance_against_formula() {
    let s = make_space(30).unwrap();
    let (_, y) = quadratures(&s).unwrap();
    let a = annihilation(&s).unwrap();
    for lambda in [0.5, 1.0, 2.0] {
        let l =
            quadrature_feedback_liouvillian(&a, &(&y * (-lambda / 2.0)), &Operator::zeros(&s), &BathParams::vacuum())
                .unwrap();
        let (vx, _) = vx_vy(&steady_state(&l).unwrap());
        // drift ½+λ, input gain 1+λ
        let expected = (1.0 + lambda) * (1.0 + lambda) / (1.0 + 2.0 * lambda);
        assert!((vx - expected).abs() < 1e-3, "lambda={lambda}: {vx} vs {expected}");
    }
}

#[test]
fn complex_steady_squeezing() {
    let s = make_space(25).unwrap();
    let a = annihilation(&s).unwrap();
    let (lambda, mu) = (2.0, 0.5);
    let amp = &(&a + &(&a.adjoint() * mu)) * (lambda / 2.0);
    let l = complex_feedback_liouvillian(&a, &amp, &Operator::zeros(&s), &BathParams::vacuum()).unwrap();
    let (vx, _) = vx_vy(&steady_state(&l).unwrap());
    assert!((vx - 9.0 / 11.0).abs() < 1e-3, "V(x) = {vx}");
}

#[test]
fn degenerate_generator_has_no_unique_state() {
    let s = make_space(5).unwrap();
    let l = mirror_loop_liouvillian(&s, 1.0, PI).unwrap();
    assert!(matches!(steady_state(&l), Err(Error::NoUniqueSteadyState { .. })));
}

#[test]
fn feedback_free_generators_relax_to_vacuum() {
    let s = make_space(8).unwrap();
    let a = annihilation(&s).unwrap();
    let z = Operator::zeros(&s);
    let vac = BathParams::vacuum();
    let gens = [
        single_cavity_liouvillian(&a, 1.0, &vac, &z).unwrap(),
        intensity_feedback_liouvillian(&a, &z, &z, IntensityForm::Lindblad).unwrap(),
        intensity_feedback_liouvillian(&a, &z, &z, IntensityForm::Expanded).unwrap(),
        quadrature_feedback_liouvillian(&a, &z, &z, &vac).unwrap(),
        complex_feedback_liouvillian(&a, &z, &z, &vac).unwrap(),
        heterodyne_feedback_liouvillian(&a, &z, &z, &z, &vac).unwrap(),
        mirror_loop_liouvillian(&s, 1.0, 0.0).unwrap(),
    ];
    for l in &gens {
        let ss = steady_state(l).unwrap();
        assert!(
            ss.trace_distance(&DensityMatrix::vacuum(&s)).unwrap() < 1e-10,
            "{}",
            l.label()
        );
    }
}

#[test]
fn variance_growth_examples() {
    let s = make_space(30).unwrap();
    let vac = DensityMatrix::vacuum(&s);
    let frozen = variance_growth_rate(&mirror_loop_liouvillian(&s, 1.0, PI).unwrap(), &vac, (0.0, 2.0), 1e-2).unwrap();
    assert!(frozen.x.slope.abs() < 1e-6 && frozen.y.slope.abs() < 1e-6);

    let gamma = 0.5;
    let analog = heterodyne_mirror_analog_liouvillian(&s, gamma, PI).unwrap();
    let g = variance_growth_rate(&analog, &vac, (0.0, 2.0), 1e-2).unwrap();
    for fit in [g.x, g.y] {
        assert!((fit.slope - 2.0 * gamma).abs() < 1e-4, "slope {}", fit.slope);
        assert!(fit.is_linear());
    }

    let hot = DensityMatrix::thermal(&s, 1.0).unwrap();
    let g = variance_growth_rate(&decay(&s), &hot, (0.0, 1.0), 1e-2).unwrap();
    assert!(g.x.slope < 0.0 && g.y.slope < 0.0);
}

#[test]
fn long_run_trace_drift_is_small() {
    let s = make_space(15).unwrap();
    let (_, y) = quadratures(&s).unwrap();
    let a = annihilation(&s).unwrap();
    let l = quadrature_feedback_liouvillian(&a, &(&y * -0.5), &Operator::zeros(&s), &BathParams::vacuum()).unwrap();
    let opts = PropagateOptions::new(5.0, 1e-3).stride(100).keep_states(false);
    let ev = propagate_with(&l, &DensityMatrix::coherent(&s, C64::new(1.0, 0.5)).unwrap(), &opts).unwrap();
    assert!(ev.max_trace_drift < 1e-8);
    assert!(ev.boundary_leakage < 1e-4 && !ev.leakage_flagged);
}
