use cavity_feedback::evolve::{propagate_with, PropagateOptions};
use cavity_feedback::generators::*;
use cavity_feedback::trajectories::*;
use cavity_feedback::*;

fn ket(dim: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[k] = C64::new(1.0, 0.0);
    v
}

/// Largest |ensemble − ME| / SE over the sampled times; samples with a
/// vanishing standard error must agree to 1e-9.
fn worst_z(series: &SeriesStats, reference: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for ((m, se), r) in series.mean.iter().zip(&series.std_error).zip(reference) {
        if *se <= 1e-9 * r.abs().max(1.0) {
            assert!((m - r).abs() < 1e-9, "{}: {m} vs {r} with zero spread", series.name);
        } else {
            worst = worst.max((m - r).abs() / se);
        }
    }
    worst
}

type Named = Vec<(String, Vec<f64>)>;

/// Master-equation means and variances on the trajectory sample grid.
fn reference(l: &Liouvillian, cfg: &TrajectoryConfig) -> (Named, Named) {
    let mut opts = PropagateOptions::new(cfg.t_final, cfg.dt)
        .stride(cfg.stride)
        .keep_states(false);
    for (name, op) in &cfg.observables {
        opts = opts.observe(name.clone(), op.clone());
    }
    for (name, op) in &cfg.variances {
        opts = opts.observe(format!("{name}^2"), op * op);
        opts = opts.observe(format!("{name}^1"), op.clone());
    }
    let ev = propagate_with(l, &cfg.rho0, &opts).unwrap();
    let re = |n: &str| ev.observable(n).unwrap().iter().map(|z| z.re).collect::<Vec<f64>>();
    let means = cfg.observables.iter().map(|(n, _)| (n.clone(), re(n))).collect();
    let vars = cfg
        .variances
        .iter()
        .map(|(n, _)| {
            let m1 = re(&format!("{n}^1"));
            let m2 = re(&format!("{n}^2"));
            (n.clone(), m1.iter().zip(&m2).map(|(a, b)| b - a * a).collect())
        })
        .collect();
    (means, vars)
}

fn assert_matches_master(l: &Liouvillian, cfg: &TrajectoryConfig, n_traj: usize, seed: u64) -> EnsembleStats {
    let stats = ensemble_average(cfg, n_traj, seed).unwrap();
    let (means, vars) = reference(l, cfg);
    for (name, r) in &means {
        let z = worst_z(stats.observable(name).unwrap(), r);
        assert!(z < 3.0, "<{name}> off by {z:.2} SE");
    }
    for (name, r) in &vars {
        let z = worst_z(stats.variance(name).unwrap(), r);
        assert!(z < 3.0, "V({name}) off by {z:.2} SE");
    }
    stats
}

#[test]
fn jump_from_single_photon_lands_in_kicked_vacuum() {
    let s = make_space(5).unwrap();
    let a = annihilation(&s).unwrap();
    let (_, y) = quadratures(&s).unwrap();
    let z = &y * 0.4;
    let zero = Operator::zeros(&s);
    let target = z.unitary_exp(1.0).matrix() * ket(5, 0);
    let target = &target * target.adjoint();
    let mut clicked = 0;
    for seed in 0..100 {
        let r = jump_trajectory(&a, &z, &zero, &ket(5, 1), 0.05, 0.05, seed).unwrap();
        if r.jump_times.is_empty() {
            continue;
        }
        clicked += 1;
        let out = r.states.last().unwrap();
        assert!((out.matrix() - &target).norm() < 1e-12);
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }
    assert!(clicked > 0);
}

#[test]
fn jump_without_feedback_decays_like_master_equation() {
    let s = make_space(3).unwrap();
    let a = annihilation(&s).unwrap();
    let zero = Operator::zeros(&s);
    let cfg = TrajectoryConfig::new(
        Unraveling::Jump {
            c1: a,
            z: zero.clone(),
            h0: zero,
        },
        DensityMatrix::fock(&s, 1).unwrap(),
        3.0,
        1e-3,
    )
    .stride(300)
    .observe("n", number(&s).unwrap());
    let stats = ensemble_average(&cfg, 1000, 11).unwrap();
    let n = stats.observable("n").unwrap();
    let exact: Vec<f64> = stats.times.iter().map(|t| (-t).exp()).collect();
    assert!(worst_z(n, &exact) < 3.0);
}

#[test]
fn jump_phase_kick_is_invisible() {
    let s = make_space(5).unwrap();
    let a = annihilation(&s).unwrap();
    let zero = Operator::zeros(&s);
    let rho0 = DensityMatrix::coherent(&s, C64::new(0.8, 0.0)).unwrap();
    let build = |z: Operator| {
        TrajectoryConfig::new(
            Unraveling::Jump {
                c1: a.clone(),
                z,
                h0: zero.clone(),
            },
            rho0.clone(),
            1.0,
            1e-3,
        )
        .stride(100)
        .observe("n", number(&s).unwrap())
    };
    let records0 = run_ensemble(&build(zero.clone()), 20, 5).unwrap();
    let records1 = run_ensemble(&build(&Operator::identity(&s) * 0.9), 20, 5).unwrap();
    for (r0, r1) in records0.iter().zip(&records1) {
        assert_eq!(r0.jump_times, r1.jump_times);
    }
}

#[test]
fn homodyne_without_feedback_matches_master_equation() {
    let s = make_space(6).unwrap();
    let a = annihilation(&s).unwrap();
    let (x, y) = quadratures(&s).unwrap();
    let zero = Operator::zeros(&s);
    let bath = BathParams::vacuum();
    assert_eq!(bath.l(), 1.0);
    let cfg = TrajectoryConfig::new(
        Unraveling::Homodyne {
            c1: a.clone(),
            y: zero.clone(),
            h0: zero.clone(),
            bath,
        },
        DensityMatrix::coherent(&s, C64::new(0.8, 0.4)).unwrap(),
        1.0,
        1e-3,
    )
    .stride(100)
    .observe("x", x.clone())
    .observe("y", y)
    .observe("n", number(&s).unwrap())
    .observe_variance("x", x);
    let l = single_cavity_liouvillian(&a, 1.0, &bath, &zero).unwrap();
    assert_matches_master(&l, &cfg, 500, 21);
}

#[test]
fn homodyne_feedback_squeezes_toward_four_thirds() {
    let s = make_space(6).unwrap();
    let a = annihilation(&s).unwrap();
    let (x, y) = quadratures(&s).unwrap();
    let cfg = TrajectoryConfig::new(
        Unraveling::Homodyne {
            c1: a,
            y: &y * -0.5,
            h0: Operator::zeros(&s),
            bath: BathParams::vacuum(),
        },
        DensityMatrix::vacuum(&s),
        4.0,
        1e-3,
    )
    .stride(1000)
    .observe_variance("x", x);
    let stats = ensemble_average(&cfg, 400, 33).unwrap();
    let v = stats.variance("x").unwrap();
    let (m, se) = (*v.mean.last().unwrap(), *v.std_error.last().unwrap());
    assert!((m - 4.0 / 3.0).abs() < 3.0 * se, "V(x) = {m} ± {se}");
}

#[test]
fn heterodyne_without_feedback_matches_thermal_master_equation() {
    let s = make_space(6).unwrap();
    let a = annihilation(&s).unwrap();
    let (x, y) = quadratures(&s).unwrap();
    let zero = Operator::zeros(&s);
    let bath = BathParams::thermal(0.1).unwrap();
    let cfg = TrajectoryConfig::new(
        Unraveling::Heterodyne {
            c1: a.clone(),
            x: zero.clone(),
            y: zero.clone(),
            h0: zero.clone(),
            bath,
        },
        DensityMatrix::coherent(&s, C64::new(0.5, -0.5)).unwrap(),
        1.0,
        1e-3,
    )
    .stride(100)
    .observe("x", x.clone())
    .observe("y", y.clone())
    .observe("n", number(&s).unwrap())
    .observe_variance("y", y);
    let l = single_cavity_liouvillian(&a, 1.0, &bath, &zero).unwrap();
    assert_matches_master(&l, &cfg, 300, 41);
}

#[test]
fn heterodyne_current_is_noisier_by_root_two() {
    let s = make_space(3).unwrap();
    let a = annihilation(&s).unwrap();
    let zero = Operator::zeros(&s);
    let vac = BathParams::vacuum();
    let rho0 = DensityMatrix::vacuum(&s);
    let dt = 1e-3;
    let std = |samples: Vec<f64>| {
        let n = samples.len() as f64;
        let m = samples.iter().sum::<f64>() / n;
        (samples.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let hom = homodyne_trajectory(&a, &zero, &zero, &vac, &rho0, 20.0, dt, 3).unwrap();
    let het = heterodyne_trajectory(&a, &zero, &zero, &zero, &vac, &rho0, 20.0, dt, 3).unwrap();
    let s_hom = std(hom.currents[1..].iter().map(|c| c[0]).collect());
    let s_x = std(het.currents[1..].iter().map(|c| c[0]).collect());
    let s_y = std(het.currents[1..].iter().map(|c| c[1]).collect());
    assert!((s_hom / dt.sqrt() - 1.0).abs() < 0.03);
    for r in [s_x / s_hom, s_y / s_hom] {
        assert!((r - 2f64.sqrt()).abs() < 0.05, "ratio {r}");
    }
}

#[test]
fn currents_follow_the_mean_field() {
    let s = make_space(6).unwrap();
    let a = annihilation(&s).unwrap();
    let (x, y) = quadratures(&s).unwrap();
    let zero = Operator::zeros(&s);
    let vac = BathParams::vacuum();
    let rho0 = DensityMatrix::coherent(&s, C64::new(1.0, 0.5)).unwrap();
    let (dt, stride) = (1e-3, 100);

    // window averages of the master-equation mean on the sample grid
    let window_means = |l: &Liouvillian, op: &Operator, n: usize| -> Vec<f64> {
        let opts = PropagateOptions::new(1.0, dt)
            .observe("q", op.clone())
            .keep_states(false);
        let ev = propagate_with(l, &rho0, &opts).unwrap();
        let q: Vec<f64> = ev.observable("q").unwrap().iter().map(|z| z.re).collect();
        (0..n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    q[(k - 1) * stride..k * stride].iter().sum::<f64>() / stride as f64
                }
            })
            .collect()
    };

    let fb = &y * -0.5;
    let cfg = TrajectoryConfig::new(
        Unraveling::Homodyne {
            c1: a.clone(),
            y: fb.clone(),
            h0: zero.clone(),
            bath: vac,
        },
        rho0.clone(),
        1.0,
        dt,
    )
    .stride(stride);
    let stats = ensemble_average(&cfg, 300, 51).unwrap();
    let l = quadrature_feedback_liouvillian(&a, &fb, &zero, &vac).unwrap();
    let ix = &stats.currents[0];
    assert!(worst_z(ix, &window_means(&l, &x, stats.times.len())) < 3.0);

    let (xf, yf) = (&x * -0.1, &y * 0.1);
    let cfg = TrajectoryConfig::new(
        Unraveling::Heterodyne {
            c1: a.clone(),
            x: xf.clone(),
            y: yf.clone(),
            h0: zero.clone(),
            bath: vac,
        },
        rho0.clone(),
        1.0,
        dt,
    )
    .stride(stride);
    let stats = ensemble_average(&cfg, 200, 52).unwrap();
    let l = heterodyne_feedback_liouvillian(&a, &xf, &yf, &zero, &vac).unwrap();
    assert!(worst_z(&stats.currents[0], &window_means(&l, &x, stats.times.len())) < 3.0);
    assert!(worst_z(&stats.currents[1], &window_means(&l, &y, stats.times.len())) < 3.0);
}

#[test]
fn conditioned_states_stay_normalized_in_squeezed_bath() {
    let s = make_space(6).unwrap();
    let a = annihilation(&s).unwrap();
    let (x, y) = quadratures(&s).unwrap();
    let bath = BathParams::squeezed(0.2, C64::new(0.0, 0.3)).unwrap();
    let rho0 = DensityMatrix::coherent(&s, C64::new(0.5, 0.0)).unwrap();
    let r = heterodyne_trajectory(
        &a,
        &(&x * 0.2),
        &(&y * -0.2),
        &Operator::zeros(&s),
        &bath,
        &rho0,
        0.5,
        1e-3,
        9,
    )
    .unwrap();
    for st in &r.states {
        assert!((st.trace().re - 1.0).abs() < 1e-9);
    }
    assert!(r.currents.iter().all(|c| c[0].is_finite() && c[1].is_finite()));
}

#[test]
fn standard_error_shrinks_with_ensemble_size() {
    let s = make_space(5).unwrap();
    let a = annihilation(&s).unwrap();
    let (x, _) = quadratures(&s).unwrap();
    let cfg = TrajectoryConfig::new(
        Unraveling::Jump {
            c1: a,
            z: &x * 0.5,
            h0: Operator::zeros(&s),
        },
        DensityMatrix::coherent(&s, C64::new(1.0, 0.0)).unwrap(),
        1.0,
        1e-3,
    )
    .stride(100)
    .observe("x", x);
    let small = ensemble_average(&cfg, 400, 61).unwrap();
    let large = ensemble_average(&cfg, 800, 61).unwrap();
    let se = |e: &EnsembleStats| e.observable("x").unwrap().std_error[1..].iter().sum::<f64>();
    let ratio = se(&large) / se(&small);
    assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn ensembles_are_reproducible_across_thread_counts() {
    let s = make_space(5).unwrap();
    let a = annihilation(&s).unwrap();
    let (x, y) = quadratures(&s).unwrap();
    let cfg = TrajectoryConfig::new(
        Unraveling::Homodyne {
            c1: a,
            y: &y * -0.5,
            h0: Operator::zeros(&s),
            bath: BathParams::vacuum(),
        },
        DensityMatrix::coherent(&s, C64::new(0.5, 0.0)).unwrap(),
        0.2,
        1e-3,
    )
    .stride(50)
    .observe("x", x.clone())
    .observe_variance("x", x);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| ensemble_average(&cfg, 24, 77).unwrap())
    };
    let one = run(1);
    let many = run(3);
    assert_eq!(one.observables[0].mean, many.observables[0].mean);
    assert_eq!(one.variances[0].std_error, many.variances[0].std_error);
    assert_eq!(one.currents[0].mean, many.currents[0].mean);
    let distinct: std::collections::HashSet<u64> = one.seeds.iter().copied().collect();
    assert_eq!(distinct.len(), 24);
}
