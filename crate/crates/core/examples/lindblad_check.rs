//! The second order expansion of intensity feedback is not a valid
//! generator; the exact form is.

use cavity_feedback::generators::{intensity_feedback_liouvillian, lindblad_form_check, IntensityForm};
use cavity_feedback::{annihilation, make_space, quadratures, Operator, Result};

fn main() -> Result<()> {
    let s = make_space(10)?;
    let a = annihilation(&s)?;
    let (x, _) = quadratures(&s)?;
    let h0 = Operator::zeros(&s);
    for scale in [1.0, 0.1, 0.01] {
        let z = &x * scale;
        let expanded = intensity_feedback_liouvillian(&a, &z, &h0, IntensityForm::Expanded)?;
        let exact = intensity_feedback_liouvillian(&a, &z, &h0, IntensityForm::Lindblad)?;
        let c1 = lindblad_form_check(&expanded)?;
        let c2 = lindblad_form_check(&exact)?;
        println!(
            "Z = {scale}x: |L1 - L2| = {:.3e}  expanded valid={} (min {:.3e})  exact valid={} (min {:.3e})",
            expanded.max_abs_diff(&exact)?,
            c1.valid,
            c1.min_kossakowski_eigenvalue,
            c2.valid,
            c2.min_kossakowski_eigenvalue
        );
    }
    Ok(())
}
