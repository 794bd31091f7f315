//! Sparse superoperators acting on column-major vectorized density matrices.
//!
//! With `vec(ρ)[i + d j] = ρ[i, j]` the map `ρ ↦ AρB` is `Bᵀ ⊗ A`.

use std::ops::{Add, Sub};

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::fock::{c, CMatrix, CVector, DensityMatrix, Operator, Space, C64, I, ONE};

/// A generator `dρ/dt = 𝓛ρ` stored as a sparse `d² × d²` matrix.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    space: Space,
    matrix: CsrMatrix<C64>,
    label: String,
}

impl Liouvillian {
    pub fn builder(space: &Space, label: impl Into<String>) -> LiouvillianBuilder {
        LiouvillianBuilder {
            space: space.clone(),
            label: label.into(),
            coo: CooMatrix::new(space.dim() * space.dim(), space.dim() * space.dim()),
        }
    }

    pub fn zero(space: &Space) -> Liouvillian {
        Self::builder(space, "zero").build()
    }

    /// Wrap a dense superoperator; zero entries are dropped.
    pub fn from_dense(space: &Space, dense: &CMatrix, label: impl Into<String>) -> Result<Liouvillian> {
        let n = space.dim() * space.dim();
        if dense.nrows() != n || dense.ncols() != n {
            return Err(Error::MalformedGenerator(format!(
                "superoperator is {}x{}, expected {n}x{n} for {space}",
                dense.nrows(),
                dense.ncols()
            )));
        }
        let mut b = Self::builder(space, label);
        for j in 0..n {
            for i in 0..n {
                let z = dense[(i, j)];
                if z != C64::new(0.0, 0.0) {
                    b.coo.push(i, j, z);
                }
            }
        }
        Ok(b.build())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Liouvillian {
        self.label = label.into();
        self
    }

    /// Side length `d²` of the superoperator.
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn csr(&self) -> &CsrMatrix<C64> {
        &self.matrix
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.size(), self.size());
        for (i, j, z) in self.matrix.triplet_iter() {
            out[(i, j)] += *z;
        }
        out
    }

    /// `𝓛 vec(ρ)`.
    pub fn apply(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        self.apply_into(v, &mut out);
        out
    }

    /// `out = 𝓛 v` without allocating.
    pub fn apply_into(&self, v: &CVector, out: &mut CVector) {
        let offsets = self.matrix.row_offsets();
        let cols = self.matrix.col_indices();
        let vals = self.matrix.values();
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in offsets[r]..offsets[r + 1] {
                acc += vals[k] * v[cols[k]];
            }
            *o = acc;
        }
    }

    /// `𝓛ρ` as a matrix.
    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let d = self.space.dim();
        let v = CVector::from_column_slice(rho.as_slice());
        CMatrix::from_column_slice(d, d, self.apply(&v).as_slice())
    }

    pub fn apply_state(&self, rho: &DensityMatrix) -> Result<CMatrix> {
        if rho.space() != &self.space {
            return Err(Error::SpaceMismatch(format!(
                "generator on {} applied to state on {}",
                self.space,
                rho.space()
            )));
        }
        Ok(self.apply_matrix(rho.matrix()))
    }

    pub fn scale(&self, s: f64) -> Liouvillian {
        Liouvillian {
            space: self.space.clone(),
            matrix: &self.matrix * c(s),
            label: self.label.clone(),
        }
    }

    /// Largest `|Tr 𝓛(E_ij)|` over matrix units, i.e. the largest entry of
    /// `vec(I)† 𝓛`.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.space.dim();
        let mut col_sums = vec![C64::new(0.0, 0.0); self.size()];
        for (i, j, z) in self.matrix.triplet_iter() {
            if i % (d + 1) == 0 {
                col_sums[j] += *z;
            }
        }
        col_sums.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Largest entry of `|𝓛(ρ†) − 𝓛(ρ)†|` over matrix units; zero when the
    /// generator preserves Hermiticity.
    pub fn hermiticity_preservation_error(&self) -> f64 {
        // 𝓛(E_ij)† = 𝓛(E_ji) ⇔ S[(m + d n), (i + d j)]* = S[(n + d m), (j + d i)]
        let d = self.space.dim();
        let flip = |k: usize| (k / d) + d * (k % d);
        let mut coo = CooMatrix::new(self.size(), self.size());
        for (row, col, z) in self.matrix.triplet_iter() {
            coo.push(row, col, *z);
            coo.push(flip(row), flip(col), -z.conj());
        }
        CsrMatrix::from(&coo)
            .values()
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &Liouvillian) -> Result<f64> {
        let diff = self.checked_sub(other)?;
        Ok(diff.matrix.values().iter().fold(0.0, |acc, z| acc.max(z.norm())))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.matrix.values().iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn checked_add(&self, other: &Liouvillian) -> Result<Liouvillian> {
        self.same_space(other)?;
        Ok(Liouvillian {
            space: self.space.clone(),
            matrix: &self.matrix + &other.matrix,
            label: self.label.clone(),
        })
    }

    pub fn checked_sub(&self, other: &Liouvillian) -> Result<Liouvillian> {
        self.same_space(other)?;
        Ok(Liouvillian {
            space: self.space.clone(),
            matrix: &self.matrix - &other.matrix,
            label: self.label.clone(),
        })
    }

    fn same_space(&self, other: &Liouvillian) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!(
                "generators on {} and {}",
                self.space, other.space
            )));
        }
        Ok(())
    }
}

impl<'a> Add<&'a Liouvillian> for &'a Liouvillian {
    type Output = Liouvillian;
    fn add(self, rhs: &'a Liouvillian) -> Liouvillian {
        self.checked_add(rhs).expect("generator spaces differ")
    }
}

impl<'a> Sub<&'a Liouvillian> for &'a Liouvillian {
    type Output = Liouvillian;
    fn sub(self, rhs: &'a Liouvillian) -> Liouvillian {
        self.checked_sub(rhs).expect("generator spaces differ")
    }
}

/// Accumulates sandwich terms `coef · AρB` into a sparse generator.
pub struct LiouvillianBuilder {
    space: Space,
    label: String,
    coo: CooMatrix<C64>,
}

fn nonzeros(m: &CMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((i, j, z));
            }
        }
    }
    out
}

impl LiouvillianBuilder {
    pub fn space(&self) -> &Space {
        &self.space
    }

    /// `coef · A ρ B`.
    pub fn sandwich(&mut self, coef: C64, a: &CMatrix, b: &CMatrix) -> &mut Self {
        if coef == C64::new(0.0, 0.0) {
            return self;
        }
        let d = self.space.dim();
        let na = nonzeros(a);
        let nb = nonzeros(b);
        // (Bᵀ ⊗ A)[(i + d j), (k + d l)] = B[l, j] A[i, k]
        for &(l, j, bz) in &nb {
            let f = coef * bz;
            for &(i, k, az) in &na {
                self.coo.push(i + d * j, k + d * l, f * az);
            }
        }
        self
    }

    pub fn sandwich_ops(&mut self, coef: C64, a: &Operator, b: &Operator) -> &mut Self {
        self.sandwich(coef, a.matrix(), b.matrix())
    }

    /// `coef · Aρ`.
    pub fn left(&mut self, coef: C64, a: &CMatrix) -> &mut Self {
        let id = CMatrix::identity(self.space.dim(), self.space.dim());
        self.sandwich(coef, a, &id)
    }

    /// `coef · ρB`.
    pub fn right(&mut self, coef: C64, b: &CMatrix) -> &mut Self {
        let id = CMatrix::identity(self.space.dim(), self.space.dim());
        self.sandwich(coef, &id, b)
    }

    /// `−i[H, ρ]`.
    pub fn hamiltonian(&mut self, h: &Operator) -> &mut Self {
        self.left(-I, h.matrix());
        self.right(I, h.matrix())
    }

    /// `coef · [A, ρ]`.
    pub fn commutator(&mut self, coef: C64, a: &Operator) -> &mut Self {
        self.left(coef, a.matrix());
        self.right(-coef, a.matrix())
    }

    /// `rate · 𝒟[c]ρ`.
    pub fn dissipator(&mut self, rate: f64, op: &Operator) -> &mut Self {
        let cm = op.matrix();
        let cd = cm.adjoint();
        let cdc = &cd * cm;
        self.sandwich(c(rate), cm, &cd);
        self.left(c(-0.5 * rate), &cdc);
        self.right(c(-0.5 * rate), &cdc)
    }

    /// `coef · [A, [B, ρ]] = coef (ABρ − AρB − BρA + ρBA)`.
    pub fn double_commutator(&mut self, coef: C64, a: &Operator, b: &Operator) -> &mut Self {
        let (am, bm) = (a.matrix(), b.matrix());
        self.left(coef, &(am * bm));
        self.sandwich(-coef, am, bm);
        self.sandwich(-coef, bm, am);
        self.right(coef, &(bm * am))
    }

    /// `coef · [A, XρY]`.
    pub fn commutator_of_sandwich(&mut self, coef: C64, a: &Operator, x: &CMatrix, y: &CMatrix) -> &mut Self {
        let am = a.matrix();
        self.sandwich(coef, &(am * x), y);
        self.sandwich(-coef, x, &(y * am))
    }

    /// Add an already built generator on the same space.
    pub fn extend(&mut self, other: &Liouvillian) -> Result<&mut Self> {
        if other.space != self.space {
            return Err(Error::SpaceMismatch(format!(
                "cannot add a generator on {} to one on {}",
                other.space, self.space
            )));
        }
        for (i, j, z) in other.matrix.triplet_iter() {
            self.coo.push(i, j, *z);
        }
        Ok(self)
    }

    pub fn build(&self) -> Liouvillian {
        Liouvillian {
            space: self.space.clone(),
            matrix: CsrMatrix::from(&self.coo),
            label: self.label.clone(),
        }
    }
}

/// Dense `Bᵀ ⊗ A`; test helper and oracle for the sparse builder.
pub fn sandwich_dense(a: &CMatrix, b: &CMatrix) -> CMatrix {
    b.transpose().kronecker(a)
}

#[allow(dead_code)]
pub(crate) fn identity_superop(space: &Space) -> Liouvillian {
    let id = CMatrix::identity(space.dim(), space.dim());
    let mut b = Liouvillian::builder(space, "identity");
    b.sandwich(ONE, &id, &id);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, dissipator_apply, make_space, quadratures};

    fn sample_state(d: usize) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                m[(i, j)] = C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.07);
            }
        }
        m
    }

    #[test]
    fn sandwich_matches_kronecker_identity() {
        let s = make_space(4).unwrap();
        let a = annihilation(&s).unwrap();
        let (x, _) = quadratures(&s).unwrap();
        let mut b = Liouvillian::builder(&s, "t");
        b.sandwich_ops(C64::new(0.3, -1.1), &a, &x);
        let sparse = b.build().to_dense();
        let dense = sandwich_dense(a.matrix(), x.matrix()) * C64::new(0.3, -1.1);
        assert!((sparse - &dense).norm() < 1e-14);
        let rho = sample_state(4);
        let direct = a.matrix() * &rho * x.matrix() * C64::new(0.3, -1.1);
        assert!((b.build().apply_matrix(&rho) - direct).norm() < 1e-13);
    }

    #[test]
    fn dissipator_superop_matches_direct() {
        let s = make_space(5).unwrap();
        let a = annihilation(&s).unwrap();
        let rho = DensityMatrix::coherent(&s, C64::new(0.4, 0.2)).unwrap();
        let mut b = Liouvillian::builder(&s, "d");
        b.dissipator(1.0, &a);
        let l = b.build();
        let direct = dissipator_apply(&a, &rho).unwrap();
        assert!((l.apply_state(&rho).unwrap() - direct).norm() < 1e-14);
        assert!(l.trace_preservation_error() < 1e-14);
        assert!(l.hermiticity_preservation_error() < 1e-14);
    }

    #[test]
    fn double_commutator_matches_direct() {
        let s = make_space(4).unwrap();
        let a = annihilation(&s).unwrap();
        let (x, y) = quadratures(&s).unwrap();
        let mut b = Liouvillian::builder(&s, "dc");
        b.double_commutator(ONE, &x, &a);
        let rho = sample_state(4);
        let inner = a.matrix() * &rho - &rho * a.matrix();
        let direct = x.matrix() * &inner - &inner * x.matrix();
        assert!((b.build().apply_matrix(&rho) - direct).norm() < 1e-13);

        let mut b2 = Liouvillian::builder(&s, "cs");
        b2.commutator_of_sandwich(ONE, &y, a.matrix(), &a.matrix().adjoint());
        let inner = a.matrix() * &rho * a.matrix().adjoint();
        let direct = y.matrix() * &inner - &inner * y.matrix();
        assert!((b2.build().apply_matrix(&rho) - direct).norm() < 1e-13);
    }

    #[test]
    fn arithmetic_and_trace_error() {
        let s = make_space(3).unwrap();
        let a = annihilation(&s).unwrap();
        let mut b = Liouvillian::builder(&s, "x");
        b.left(ONE, a.matrix());
        let l = b.build();
        assert!(l.trace_preservation_error() > 0.5);
        let zero = &l - &l;
        assert_eq!(zero.max_abs(), 0.0);
        let twice = &l + &l;
        assert!((twice.to_dense() - l.scale(2.0).to_dense()).norm() < 1e-15);
        let other = Liouvillian::zero(&make_space(4).unwrap());
        assert!(matches!(l.checked_add(&other), Err(Error::SpaceMismatch(_))));
        assert!(matches!(
            Liouvillian::from_dense(&s, &CMatrix::zeros(3, 3), "bad"),
            Err(Error::MalformedGenerator(_))
        ));
    }
}
