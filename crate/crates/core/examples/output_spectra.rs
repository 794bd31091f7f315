//! Output quadrature spectra of the linearized loop, with and without a
//! delay, and the in-loop commutator factor.

use cavity_feedback::langevin::{
    build_linear_model, inloop_commutator_factor, output_spectrum, transfer_function_spectrum,
};
use cavity_feedback::Result;

fn main() -> Result<()> {
    let omegas: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
    for (lambda, mu, tau) in [(1.0, -1.0, 0.0), (1.0, -1.0, 0.5), (2.0, 0.5, 0.0), (2.0, -0.5, 0.0)] {
        let m = build_linear_model(lambda, mu, tau)?;
        let s = output_spectrum(&m, &omegas)?;
        let t = transfer_function_spectrum(&m, &omegas)?;
        let dev = s.sx.iter().zip(&t.sx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("lambda={lambda} mu={mu} tau={tau}  (closed form vs transfer: {dev:.1e})");
        for (k, w) in omegas.iter().enumerate().step_by(2) {
            println!(
                "  w={w:<4} Sx={:.5} Sy={:.5} Sx*Sy={:.5}",
                s.sx[k],
                s.sy[k],
                s.sx[k] * s.sy[k]
            );
        }
    }
    for lambda in [1.0, 10.0, 1e6] {
        let f = inloop_commutator_factor(lambda, 0.0, 0.0)?;
        println!("in-loop commutator factor at w=0, lambda={lambda}: {:.3e}", f.re);
    }
    Ok(())
}
