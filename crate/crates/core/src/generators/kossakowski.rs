//! Complete-positivity test for a generator via its Kossakowski matrix.

use crate::error::{Error, Result};
use crate::fock::{c, hermitize, CMatrix, C64};
use crate::policy::NumericPolicy;
use crate::superop::Liouvillian;

/// Result of [`lindblad_form_check`].
#[derive(Clone, Debug)]
pub struct LindbladCheck {
    pub valid: bool,
    pub min_kossakowski_eigenvalue: f64,
    /// Kossakowski eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
}

/// Generalized Gell-Mann basis, orthonormal under `Tr(A†B)`.
///
/// Order: `I/√d`, then symmetric `(E_jk + E_kj)/√2` for `j < k`
/// (lexicographic), antisymmetric `(−iE_jk + iE_kj)/√2` in the same order,
/// then diagonal `(Σ_{j<l} E_jj − l E_ll)/√(l(l+1))` for `l = 1..d`.
pub fn gell_mann_basis(d: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(d * d);
    basis.push(CMatrix::identity(d, d) * c(1.0 / (d as f64).sqrt()));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = c(r);
            m[(k, j)] = c(r);
            basis.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = C64::new(0.0, -r);
            m[(k, j)] = C64::new(0.0, r);
            basis.push(m);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c(norm);
        }
        m[(l, l)] = c(-(l as f64) * norm);
        basis.push(m);
    }
    basis
}

/// Decide whether `l` has Lindblad form.
///
/// Writing `𝓛ρ = Σ χ_kl F_k ρ F_l†` over the Gell-Mann basis, the generator
/// is completely positive iff the block of `χ` orthogonal to the identity is
/// positive semidefinite.
pub fn lindblad_form_check(l: &Liouvillian) -> Result<LindbladCheck> {
    let policy = NumericPolicy::DEFAULT;
    let scale = l.max_abs().max(1.0);
    let tp = l.trace_preservation_error();
    if tp > 1e-10 * scale {
        return Err(Error::MalformedGenerator(format!(
            "generator is not trace preserving (max |vec(I)† L| = {tp:e})"
        )));
    }
    let hp = l.hermiticity_preservation_error();
    if hp > 1e-10 * scale {
        return Err(Error::MalformedGenerator(format!(
            "generator does not preserve Hermiticity (deviation {hp:e})"
        )));
    }
    let d = l.space().dim();
    let n = d * d;
    // Λ[(m,r),(n,s)] = S[(m + d n), (r + d s)], flattened as m + d r
    let mut lambda = CMatrix::zeros(n, n);
    for (row, col, z) in l.csr().triplet_iter() {
        let (m, nn) = (row % d, row / d);
        let (r, s) = (col % d, col / d);
        lambda[(m + d * r, nn + d * s)] += *z;
    }
    let basis = gell_mann_basis(d);
    let mut v = CMatrix::zeros(n, n);
    for (k, f) in basis.iter().enumerate() {
        for col in 0..d {
            for row in 0..d {
                v[(row + d * col, k)] = f[(row, col)];
            }
        }
    }
    let chi = v.adjoint() * &lambda * &v;
    let kos = hermitize(&chi.view((1, 1), (n - 1, n - 1)).into_owned());
    let mut eigenvalues: Vec<f64> = kos.symmetric_eigenvalues().iter().cloned().collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    let min = eigenvalues.first().cloned().unwrap_or(0.0);
    Ok(LindbladCheck {
        valid: min >= -policy.kossakowski_psd,
        min_kossakowski_eigenvalue: min,
        eigenvalues,
    })
}
