//! Homodyne feedback onto the y quadrature squeezes nothing inside the
//! cavity: V(x) = (1+λ)²/(1+2λ) >= 1 while V(y) stays at the vacuum level.

use cavity_feedback::evolve::steady_state;
use cavity_feedback::generators::quadrature_feedback_liouvillian;
use cavity_feedback::langevin::steady_variance_analytic;
use cavity_feedback::{annihilation, make_space, quadratures, variance, BathParams, Operator, Result};

fn main() -> Result<()> {
    let s = make_space(30)?;
    let a = annihilation(&s)?;
    let (x, y) = quadratures(&s)?;
    let h0 = Operator::zeros(&s);
    println!("{:>6} {:>10} {:>10} {:>10}", "lambda", "V(x)", "formula", "V(y)");
    for lambda in [0.5, 1.0, 2.0, 4.0] {
        let l = quadrature_feedback_liouvillian(&a, &(&y * (-0.5 * lambda)), &h0, &BathParams::vacuum())?;
        let rho = steady_state(&l)?;
        let (vx, _) = steady_variance_analytic(lambda, -1.0)?;
        println!(
            "{lambda:>6} {:>10.6} {:>10.6} {:>10.6}",
            variance(&x, &rho)?,
            vx,
            variance(&y, &rho)?
        );
    }
    Ok(())
}
