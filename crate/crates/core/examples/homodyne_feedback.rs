//! Homodyne detection of x with the photocurrent fed back onto y. One
//! conditioned trajectory, then ensemble variances against the master
//! equation.

use cavity_feedback::evolve::{propagate_with, PropagateOptions};
use cavity_feedback::generators::quadrature_feedback_liouvillian;
use cavity_feedback::trajectories::{ensemble_average, homodyne_trajectory, TrajectoryConfig, Unraveling};
use cavity_feedback::{annihilation, make_space, quadratures, variance, BathParams, DensityMatrix, Operator, Result};

fn main() -> Result<()> {
    let s = make_space(12)?;
    let a = annihilation(&s)?;
    let (x, y) = quadratures(&s)?;
    let big_y = &y * -0.5;
    let h0 = Operator::zeros(&s);
    let bath = BathParams::vacuum();
    let rho0 = DensityMatrix::vacuum(&s);

    let one = homodyne_trajectory(&a, &big_y, &h0, &bath, &rho0, 1.0, 1e-3, 1)?;
    let st = one.states.last().unwrap();
    println!(
        "single trajectory at t=1: V(x) = {:.4}, min eigenvalue = {:.2e}",
        variance(&x, st)?,
        st.min_eigenvalue()
    );

    let cfg = TrajectoryConfig::new(
        Unraveling::Homodyne {
            c1: a.clone(),
            y: big_y.clone(),
            h0: h0.clone(),
            bath,
        },
        rho0.clone(),
        3.0,
        1e-3,
    )
    .stride(500)
    .observe_variance("x", x.clone());
    let ens = ensemble_average(&cfg, 200, 3)?;
    let l = quadrature_feedback_liouvillian(&a, &big_y, &h0, &bath)?;
    let me = propagate_with(
        &l,
        &rho0,
        &PropagateOptions::new(3.0, 1e-3).stride(500).keep_states(true),
    )?;
    let vx = ens.variance("x").unwrap();
    for (k, t) in ens.times.iter().enumerate() {
        println!(
            "t = {t:.1}: V(x) ensemble {:.4} ± {:.4}, master equation {:.4}",
            vx.mean[k],
            vx.std_error[k],
            variance(&x, &me.states[k])?
        );
    }
    println!("stationary value (1+λ)²/(1+2λ) at λ=1: {:.4}", 4.0 / 3.0);
    Ok(())
}
