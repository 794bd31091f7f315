//! Heterodyne feedback mimicking the phi = pi mirror: the mean field is
//! frozen but the measurement noise makes both variances grow at 2γ.

use std::f64::consts::PI;

use cavity_feedback::evolve::variance_growth_rate;
use cavity_feedback::generators::heterodyne_mirror_analog_liouvillian;
use cavity_feedback::{make_space, DensityMatrix, Result, C64};

fn main() -> Result<()> {
    let s = make_space(30)?;
    let rho0 = DensityMatrix::coherent(&s, C64::new(0.5, 0.0))?;
    for gamma in [0.5, 1.0] {
        let l = heterodyne_mirror_analog_liouvillian(&s, gamma, PI)?;
        let g = variance_growth_rate(&l, &rho0, (0.0, 2.0 / gamma), 1e-3)?;
        println!(
            "gamma = {gamma}: dV(x)/dt = {:.5} (R² {:.6}), dV(y)/dt = {:.5}, expected {}",
            g.x.slope,
            g.x.r_squared,
            g.y.slope,
            2.0 * gamma
        );
    }
    Ok(())
}
