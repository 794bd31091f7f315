//! Ladder operators, quadratures and a few standard states on a truncated
//! Fock space.

use cavity_feedback::{annihilation, expect, make_space, number, quadratures, variance, DensityMatrix, Result, C64};

fn main() -> Result<()> {
    let s = make_space(20)?;
    let a = annihilation(&s)?;
    let n = number(&s)?;
    let (x, y) = quadratures(&s)?;

    let states = [
        ("vacuum", DensityMatrix::vacuum(&s)),
        ("fock |3>", DensityMatrix::fock(&s, 3)?),
        ("coherent 1+0.5i", DensityMatrix::coherent(&s, C64::new(1.0, 0.5))?),
        ("thermal n=0.5", DensityMatrix::thermal(&s, 0.5)?),
    ];
    println!(
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>10}",
        "state", "<n>", "<x>", "V(x)", "V(y)", "top pop"
    );
    for (name, rho) in &states {
        println!(
            "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>10.2e}",
            name,
            expect(&n, rho)?.re,
            expect(&x, rho)?.re,
            variance(&x, rho)?,
            variance(&y, rho)?,
            rho.boundary_population()
        );
    }

    // [a, a†] = 1 except in the last level, where it is 1 - dim
    let comm = a.commutator(&a.adjoint());
    let diag = comm.matrix().diagonal();
    println!("[a, a†]: first {:.3}, last {:.3}", diag[0].re, diag[s.dim() - 1].re);
    Ok(())
}
