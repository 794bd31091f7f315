//! Direct detection with a unitary kick after each click, averaged over
//! trajectories and compared with the feedback master equation.

use cavity_feedback::evolve::{propagate_with, PropagateOptions};
use cavity_feedback::generators::{intensity_feedback_liouvillian, IntensityForm};
use cavity_feedback::trajectories::{ensemble_average, TrajectoryConfig, Unraveling};
use cavity_feedback::{annihilation, expect, make_space, number, quadratures, DensityMatrix, Operator, Result, C64};

fn main() -> Result<()> {
    let s = make_space(12)?;
    let a = annihilation(&s)?;
    let (x, _) = quadratures(&s)?;
    let n = number(&s)?;
    let z = &x * 0.5;
    let h0 = Operator::zeros(&s);
    let rho0 = DensityMatrix::coherent(&s, C64::new(1.0, 0.0))?;

    let cfg = TrajectoryConfig::new(
        Unraveling::Jump {
            c1: a.clone(),
            z: z.clone(),
            h0: h0.clone(),
        },
        rho0.clone(),
        2.0,
        1e-3,
    )
    .stride(250)
    .observe("x", x.clone())
    .observe("n", n.clone());
    let ens = ensemble_average(&cfg, 400, 7)?;

    let l = intensity_feedback_liouvillian(&a, &z, &h0, IntensityForm::Lindblad)?;
    let me = propagate_with(
        &l,
        &rho0,
        &PropagateOptions::new(2.0, 1e-3).stride(250).keep_states(true),
    )?;
    println!("mean clicks per trajectory: {:.3}", ens.mean_jumps);
    println!(
        "{:>5} {:>16} {:>8} {:>16} {:>8}",
        "t", "<x> traj", "ME", "<n> traj", "ME"
    );
    for (k, t) in ens.times.iter().enumerate() {
        let ox = ens.observable("x").unwrap();
        let on = ens.observable("n").unwrap();
        println!(
            "{t:>5.2} {:>8.4} ± {:<5.3} {:>8.4} {:>8.4} ± {:<5.3} {:>8.4}",
            ox.mean[k],
            ox.std_error[k],
            expect(&x, &me.states[k])?.re,
            on.mean[k],
            on.std_error[k],
            expect(&n, &me.states[k])?.re
        );
    }
    Ok(())
}
