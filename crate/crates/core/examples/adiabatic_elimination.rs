//! Full source + driven cavity against the reduced quadrature-feedback
//! master equation. The driven cavity follows the source more closely as
//! its decay rate grows.

use cavity_feedback::evolve::{propagate_with, PropagateOptions};
use cavity_feedback::generators::{quadrature_feedback_liouvillian, two_mode_feedback_liouvillian, Coupling};
use cavity_feedback::scenario::compare_report;
use cavity_feedback::{annihilation, make_space, quadratures, BathParams, DensityMatrix, Operator, Result, Space, C64};

fn main() -> Result<()> {
    let (d1, d2) = (15, 4);
    let s = make_space(d1)?;
    let a = annihilation(&s)?;
    let (_, y) = quadratures(&s)?;
    let big_y = &y * -0.5;
    let h0 = Operator::zeros(&s);
    let bath = BathParams::vacuum();
    let rho1 = DensityMatrix::coherent(&s, C64::new(1.0, 0.5))?;
    let reduced = quadrature_feedback_liouvillian(&a, &big_y, &h0, &bath)?;
    let opts = PropagateOptions::new(5.0, 1e-3).stride(100).keep_states(true);
    let red = propagate_with(&reduced, &rho1, &opts)?;

    let joint = Space::tensor(&[d1, d2])?;
    let rho0 = DensityMatrix::product(&[&rho1, &DensityMatrix::vacuum(&make_space(d2)?)], &joint)?;
    for gamma2 in [20.0, 50.0, 200.0] {
        // Y = -2J/√γ2
        let j = &big_y * (-0.5 * f64::sqrt(gamma2));
        let full = two_mode_feedback_liouvillian(&Coupling::Quadrature(j), gamma2, &h0, &bath, d2)?;
        let ev = propagate_with(&full, &rho0, &opts)?;
        let rep = compare_report(&ev, &red)?;
        println!(
            "gamma2 = {gamma2:>5}: max trace distance {:.4e}, mean {:.4e}",
            rep.max_distance, rep.mean_distance
        );
    }
    Ok(())
}
