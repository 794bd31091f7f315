//! A cavity whose output is sent back in by a mirror: phi = pi cancels the
//! damping, phi = 0 doubles it, phi = pi/2 turns it into a detuning.

use std::f64::consts::PI;

use cavity_feedback::evolve::{linear_fit, propagate_with, PropagateOptions};
use cavity_feedback::generators::mirror_loop_liouvillian;
use cavity_feedback::{make_space, number, quadratures, DensityMatrix, Result, C64};

fn main() -> Result<()> {
    let s = make_space(15)?;
    let (x, y) = quadratures(&s)?;
    let n = number(&s)?;
    let rho0 = DensityMatrix::coherent(&s, C64::new(1.5, 0.0))?;
    let gamma = 1.0;

    for (label, phi) in [("0", 0.0), ("pi/2", PI / 2.0), ("pi", PI)] {
        let l = mirror_loop_liouvillian(&s, gamma, phi)?;
        let opts = PropagateOptions::new(2.0, 1e-3)
            .stride(50)
            .observe("n", n.clone())
            .observe("x", x.clone())
            .observe("y", y.clone());
        let ev = propagate_with(&l, &rho0, &opts)?;
        let ln_n: Vec<f64> = ev.observable("n").unwrap().iter().map(|v| v.re.ln()).collect();
        let fit = linear_fit(&ev.times, &ln_n)?;
        let last = ev.times.len() - 1;
        println!(
            "phi = {label:<5} |L| = {:.2e}  d ln<n>/dt = {:+.4}  <x>(2) = {:+.4}  <y>(2) = {:+.4}",
            l.max_abs(),
            fit.slope,
            ev.observable("x").unwrap()[last].re,
            ev.observable("y").unwrap()[last].re,
        );
    }
    Ok(())
}
