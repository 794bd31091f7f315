//! All-optical feedback of A = (λ/2)(a + μ a†): intracavity squeezing for
//! 0 < μ < 1 and the matching sign change of the P-function diffusion.

use cavity_feedback::evolve::steady_state;
use cavity_feedback::generators::complex_feedback_liouvillian;
use cavity_feedback::langevin::{pfunction_diffusion_eigenvalues, steady_variance_analytic};
use cavity_feedback::{annihilation, make_space, quadratures, variance, BathParams, Operator, Result};

fn main() -> Result<()> {
    let s = make_space(25)?;
    let a = annihilation(&s)?;
    let (x, y) = quadratures(&s)?;
    let h0 = Operator::zeros(&s);
    let lambda = 2.0;
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>12}",
        "mu", "V(x)", "analytic", "V(y)", "P-diffusion"
    );
    for mu in [-0.5, 0.0, 0.25, 0.5, 0.9] {
        let amp = &(&a + &(&a.adjoint() * mu)) * (0.5 * lambda);
        let l = complex_feedback_liouvillian(&a, &amp, &h0, &BathParams::vacuum())?;
        let rho = steady_state(&l)?;
        let (vx, _) = steady_variance_analytic(lambda, mu)?;
        let p = pfunction_diffusion_eigenvalues(lambda, mu)?;
        println!(
            "{mu:>6} {:>9.5} {:>9.5} {:>9.5} {:>12}",
            variance(&x, &rho)?,
            vx,
            variance(&y, &rho)?,
            if p.nonclassical { "negative" } else { "positive" }
        );
    }
    Ok(())
}
