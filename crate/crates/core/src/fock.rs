//! Truncated Fock spaces, ladder operators, density matrices and the two
//! elementary superoperators 𝒟 and ℋ.
//!
//! Tensor products order their factors slot 0 first: for factors `[d0, d1]`
//! the basis index of `|n0⟩⊗|n1⟩` is `n0 * d1 + n1`, i.e. the Kronecker
//! product `A ⊗ B` places `A` on slot 0.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::policy::NumericPolicy;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const I: C64 = C64::new(0.0, 1.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A truncated Fock space, possibly a tensor product of several modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Space {
    dim: usize,
    factors: Vec<usize>,
}

impl Space {
    /// Single mode holding levels `0..dim`.
    pub fn new(dim: usize) -> Result<Space> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "Fock truncation must be at least 2, got {dim}"
            )));
        }
        Ok(Space {
            dim,
            factors: Vec::new(),
        })
    }

    /// Tensor product of single modes, slot 0 first.
    pub fn tensor(factors: &[usize]) -> Result<Space> {
        if factors.len() < 2 {
            return Err(Error::InvalidArgument(
                "a tensor space needs at least two factors".into(),
            ));
        }
        if let Some(&d) = factors.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "every tensor factor needs dimension >= 2, got {d}"
            )));
        }
        Ok(Space {
            dim: factors.iter().product(),
            factors: factors.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn is_atomic(&self) -> bool {
        self.factors.is_empty()
    }

    /// The single-mode space sitting in `slot`.
    pub fn factor(&self, slot: usize) -> Result<Space> {
        match self.factors.get(slot) {
            Some(&d) => Space::new(d),
            None => Err(Error::InvalidArgument(format!(
                "slot {slot} out of range for a space with {} factors",
                self.factors.len()
            ))),
        }
    }

    /// Factor dimensions, treating an atomic space as a single factor.
    pub(crate) fn mode_dims(&self) -> Vec<usize> {
        if self.is_atomic() {
            vec![self.dim]
        } else {
            self.factors.clone()
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_atomic() {
            write!(f, "F({})", self.dim)
        } else {
            let parts: Vec<String> = self.factors.iter().map(|d| d.to_string()).collect();
            write!(f, "F({})", parts.join("⊗"))
        }
    }
}

/// Build an atomic Fock space of the given truncation.
pub fn make_space(dim: usize) -> Result<Space> {
    Space::new(dim)
}

fn check_same(a: &Space, b: &Space, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::SpaceMismatch(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Largest entry of `|M - M†|`.
pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// A dense operator on a truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: Space,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(space: Space, matrix: CMatrix) -> Result<Operator> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}x{} but {space} has dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        Ok(Operator { space, matrix })
    }

    pub fn identity(space: &Space) -> Operator {
        Operator {
            matrix: CMatrix::identity(space.dim(), space.dim()),
            space: space.clone(),
        }
    }

    pub fn zeros(space: &Space) -> Operator {
        Operator {
            matrix: CMatrix::zeros(space.dim(), space.dim()),
            space: space.clone(),
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Max entry of `|M - M†|`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    /// Hermiticity test scaled to the operator's magnitude.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol * max_abs(&self.matrix).max(1.0)
    }

    /// Fail with [`Error::NotHermitian`] unless Hermitian within `tol`.
    pub fn require_hermitian(&self, name: &str, tol: f64) -> Result<()> {
        if self.is_hermitian(tol) {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                name: name.to_string(),
                deviation: self.hermiticity_error(),
            })
        }
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * s,
        }
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        self * other - other * self
    }

    /// `exp(-i θ H)` for Hermitian `H`, by eigendecomposition.
    pub fn unitary_exp(&self, theta: f64) -> Operator {
        let eig = hermitize(&self.matrix).symmetric_eigen();
        let v = &eig.eigenvectors;
        let mut scaled = v.clone();
        for (j, &e) in eig.eigenvalues.iter().enumerate() {
            let p = (-I * theta * e).exp();
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= p);
        }
        Operator {
            space: self.space.clone(),
            matrix: scaled * v.adjoint(),
        }
    }

    /// General matrix exponential `exp(M)`.
    pub fn exp(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.clone().exp(),
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, s: C64) -> Operator {
        self.scale(s)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, s: f64) -> Operator {
        self.scale(c(s))
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(self, s: C64) -> Operator {
        self.scale(s)
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, s: f64) -> Operator {
        self.scale(c(s))
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(c(-1.0))
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(c(-1.0))
    }
}

fn require_atomic(space: &Space, what: &str) -> Result<()> {
    if !space.is_atomic() {
        return Err(Error::SpaceMismatch(format!(
            "{what} needs a single-mode space, got {space}; build it on the factor and use embed"
        )));
    }
    Ok(())
}

/// Ladder operator with `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(space: &Space) -> Result<Operator> {
    require_atomic(space, "annihilation")?;
    let d = space.dim();
    let mut m = CMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = c((n as f64).sqrt());
    }
    Operator::new(space.clone(), m)
}

pub fn creation(space: &Space) -> Result<Operator> {
    Ok(annihilation(space)?.adjoint())
}

/// `a†a`.
pub fn number(space: &Space) -> Result<Operator> {
    require_atomic(space, "number")?;
    let d = space.dim();
    let m = CMatrix::from_diagonal(&CVector::from_iterator(d, (0..d).map(|n| c(n as f64))));
    Operator::new(space.clone(), m)
}

/// `(x, y) = (a + a†, −ia + ia†)`; vacuum variance of each is 1.
pub fn quadratures(space: &Space) -> Result<(Operator, Operator)> {
    let a = annihilation(space)?;
    let ad = a.adjoint();
    let x = &a + &ad;
    let y = &(&a * (-I)) + &(&ad * I);
    Ok((x, y))
}

/// Place a single-mode operator into `slot` of a tensor space.
pub fn embed(op: &Operator, target: &Space, slot: usize) -> Result<Operator> {
    let factor = target.factor(slot)?;
    if op.space() != &factor {
        return Err(Error::InvalidArgument(format!(
            "operator lives on {} but slot {slot} of {target} is {factor}",
            op.space()
        )));
    }
    let mut m = CMatrix::identity(1, 1);
    for (k, &d) in target.factors().iter().enumerate() {
        let part = if k == slot {
            op.matrix().clone()
        } else {
            CMatrix::identity(d, d)
        };
        m = m.kronecker(&part);
    }
    Operator::new(target.clone(), m)
}

/// Kronecker product of single-mode operators, one per factor of `target`.
pub fn tensor_product(ops: &[&Operator], target: &Space) -> Result<Operator> {
    if ops.len() != target.factors().len() {
        return Err(Error::InvalidArgument(format!(
            "{} operators given for {target}",
            ops.len()
        )));
    }
    let mut m = CMatrix::identity(1, 1);
    for (k, op) in ops.iter().enumerate() {
        check_same(op.space(), &target.factor(k)?, "tensor_product factor")?;
        m = m.kronecker(op.matrix());
    }
    Operator::new(target.clone(), m)
}

/// A density matrix on a truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validated construction with the default tolerance.
    pub fn new(space: Space, matrix: CMatrix) -> Result<DensityMatrix> {
        Self::with_tolerance(space, matrix, NumericPolicy::DEFAULT.validation)
    }

    pub fn with_tolerance(space: Space, matrix: CMatrix, tol: f64) -> Result<DensityMatrix> {
        let rho = Self::from_matrix_unchecked(space, matrix)?;
        rho.validate(tol)?;
        Ok(rho)
    }

    /// Shape-checked only; used for intermediate states whose invariants are
    /// monitored separately.
    pub fn from_matrix_unchecked(space: Space, matrix: CMatrix) -> Result<DensityMatrix> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "density matrix is {}x{} but {space} has dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        Ok(DensityMatrix { space, matrix })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn from_pure(space: &Space, psi: &CVector) -> Result<DensityMatrix> {
        if psi.len() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "state vector has length {} but {space} has dimension {}",
                psi.len(),
                space.dim()
            )));
        }
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let psi = psi / c(norm);
        Ok(DensityMatrix {
            space: space.clone(),
            matrix: &psi * psi.adjoint(),
        })
    }

    /// Fock state `|n⟩⟨n|` of a single mode.
    pub fn fock(space: &Space, n: usize) -> Result<DensityMatrix> {
        require_atomic(space, "fock")?;
        if n >= space.dim() {
            return Err(Error::InvalidArgument(format!("level {n} outside {space}")));
        }
        let mut psi = CVector::zeros(space.dim());
        psi[n] = ONE;
        Self::from_pure(space, &psi)
    }

    /// All modes in vacuum.
    pub fn vacuum(space: &Space) -> DensityMatrix {
        let mut m = CMatrix::zeros(space.dim(), space.dim());
        m[(0, 0)] = ONE;
        DensityMatrix {
            space: space.clone(),
            matrix: m,
        }
    }

    /// Truncated and renormalized coherent state `|α⟩`.
    pub fn coherent(space: &Space, alpha: C64) -> Result<DensityMatrix> {
        Self::from_pure(space, &coherent_vector(space, alpha)?)
    }

    /// Truncated and renormalized thermal state of mean occupation `n_bar`.
    pub fn thermal(space: &Space, n_bar: f64) -> Result<DensityMatrix> {
        require_atomic(space, "thermal")?;
        if !(n_bar >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "thermal occupation must be >= 0, got {n_bar}"
            )));
        }
        let d = space.dim();
        let ratio = if n_bar == 0.0 { 0.0 } else { n_bar / (1.0 + n_bar) };
        let weights: Vec<f64> = (0..d).map(|n| ratio.powi(n as i32)).collect();
        let total: f64 = weights.iter().sum();
        let diag = CVector::from_iterator(d, weights.iter().map(|w| c(w / total)));
        Ok(DensityMatrix {
            space: space.clone(),
            matrix: CMatrix::from_diagonal(&diag),
        })
    }

    /// Product state over the factors of `target`.
    pub fn product(parts: &[&DensityMatrix], target: &Space) -> Result<DensityMatrix> {
        if parts.len() != target.factors().len() {
            return Err(Error::InvalidArgument(format!(
                "{} factor states given for {target}",
                parts.len()
            )));
        }
        let mut m = CMatrix::identity(1, 1);
        for (k, rho) in parts.iter().enumerate() {
            check_same(rho.space(), &target.factor(k)?, "product factor")?;
            m = m.kronecker(rho.matrix());
        }
        Ok(DensityMatrix {
            space: target.clone(),
            matrix: m,
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitize(&self.matrix)
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Check trace, Hermiticity and positivity within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::InvalidArgument(format!(
                "density matrix is not Hermitian (max |ρ - ρ†| = {herm:e})"
            )));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvalidArgument(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    /// Column-major vectorisation, `vec(ρ)[i + d j] = ρ[i, j]`.
    pub fn to_vec(&self) -> CVector {
        CVector::from_column_slice(self.matrix.as_slice())
    }

    /// Inverse of [`DensityMatrix::to_vec`]; no invariants are checked.
    pub fn from_vec(space: &Space, v: &CVector) -> Result<DensityMatrix> {
        let d = space.dim();
        if v.len() != d * d {
            return Err(Error::InvalidArgument(format!(
                "vector of length {} cannot be reshaped on {space}",
                v.len()
            )));
        }
        Ok(DensityMatrix {
            space: space.clone(),
            matrix: CMatrix::from_column_slice(d, d, v.as_slice()),
        })
    }

    /// `(ρ + ρ†)/2`.
    pub fn hermitized(&self) -> DensityMatrix {
        DensityMatrix {
            space: self.space.clone(),
            matrix: hermitize(&self.matrix),
        }
    }

    /// Rescale to unit trace.
    pub fn normalized(&self) -> DensityMatrix {
        let tr = self.trace();
        DensityMatrix {
            space: self.space.clone(),
            matrix: &self.matrix / tr,
        }
    }

    /// Reduced state of the mode in `keep`.
    pub fn partial_trace(&self, keep: usize) -> Result<DensityMatrix> {
        let target = self.space.factor(keep)?;
        let dims = self.space.factors().to_vec();
        let dk = dims[keep];
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let other = self.space.dim() / dk;
        // enumerate "environment" multi-indices as flat offsets with the kept digit zeroed
        let mut offsets = Vec::with_capacity(other);
        for flat in 0..self.space.dim() {
            if (flat / strides[keep]).is_multiple_of(dk) {
                offsets.push(flat);
            }
        }
        let mut out = CMatrix::zeros(dk, dk);
        for &o in &offsets {
            for a in 0..dk {
                for b in 0..dk {
                    out[(a, b)] += self.matrix[(o + a * strides[keep], o + b * strides[keep])];
                }
            }
        }
        Ok(DensityMatrix {
            space: target,
            matrix: out,
        })
    }

    /// Largest population held by the top two Fock levels of any mode.
    pub fn boundary_population(&self) -> f64 {
        let dims = self.space.mode_dims();
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let mut worst = 0.0f64;
        for (k, &dk) in dims.iter().enumerate() {
            let mut pop = 0.0;
            for flat in 0..self.space.dim() {
                let level = (flat / strides[k]) % dk;
                if level + 2 >= dk {
                    pop += self.matrix[(flat, flat)].re;
                }
            }
            worst = worst.max(pop);
        }
        worst
    }

    /// `½ Σ |eig(ρ − σ)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_same(&self.space, &other.space, "trace_distance")?;
        let diff = hermitize(&(&self.matrix - &other.matrix));
        Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
    }
}

/// Truncated, renormalized coherent-state amplitudes.
pub fn coherent_vector(space: &Space, alpha: C64) -> Result<CVector> {
    require_atomic(space, "coherent")?;
    let d = space.dim();
    let mut psi = CVector::zeros(d);
    let mut amp = ONE;
    for n in 0..d {
        if n > 0 {
            amp = amp * alpha / c((n as f64).sqrt());
        }
        psi[n] = amp;
    }
    let norm = psi.norm();
    Ok(psi / c(norm))
}

/// `𝒟[c]ρ = cρc† − ½c†cρ − ½ρc†c`.
pub fn dissipator_apply(op: &Operator, rho: &DensityMatrix) -> Result<CMatrix> {
    check_same(op.space(), rho.space(), "dissipator_apply")?;
    let c_m = op.matrix();
    let cd = c_m.adjoint();
    let cdc = &cd * c_m;
    let r = rho.matrix();
    Ok(c_m * r * &cd - (&cdc * r + r * &cdc) * c(0.5))
}

/// `ℋ[c]ρ = cρ + ρc† − Tr[cρ + ρc†] ρ`.
pub fn h_superop_apply(op: &Operator, rho: &DensityMatrix) -> Result<CMatrix> {
    check_same(op.space(), rho.space(), "h_superop_apply")?;
    Ok(h_superop_matrix(op.matrix(), rho.matrix()))
}

pub(crate) fn h_superop_matrix(c_m: &CMatrix, r: &CMatrix) -> CMatrix {
    let t = c_m * r + r * c_m.adjoint();
    let tr = t.trace();
    &t - r * tr
}

/// `Tr[op ρ]`.
pub fn expect(op: &Operator, rho: &DensityMatrix) -> Result<C64> {
    check_same(op.space(), rho.space(), "expect")?;
    Ok(trace_product(op.matrix(), rho.matrix()))
}

/// `Tr[A B]` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `⟨op²⟩ − ⟨op⟩²` for Hermitian `op`.
pub fn variance(op: &Operator, rho: &DensityMatrix) -> Result<f64> {
    op.require_hermitian("variance observable", NumericPolicy::DEFAULT.validation)?;
    let mean = expect(op, rho)?.re;
    let sq = expect(&(op * op), rho)?.re;
    Ok(sq - mean * mean)
}

/// White-noise bath with thermal occupation `n`, squeezing correlation `m`
/// and coherent amplitude `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathParams {
    n: f64,
    m: C64,
    beta: C64,
}

impl BathParams {
    pub fn new(n: f64, m: C64, beta: C64) -> Result<BathParams> {
        if !n.is_finite() || n < 0.0 {
            return Err(Error::Unphysical(format!(
                "thermal occupation N must be finite and >= 0, got {n}"
            )));
        }
        if !(m.re.is_finite() && m.im.is_finite() && beta.re.is_finite() && beta.im.is_finite()) {
            return Err(Error::Unphysical("bath parameters must be finite".into()));
        }
        let m_sq = m.norm_sqr();
        let bound = n * (n + 1.0);
        // squeezing at the bound is typically computed as sqrt(N(N+1))
        if m_sq > bound * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::UnphysicalBath { m_sq, bound });
        }
        Ok(BathParams { n, m, beta })
    }

    pub fn vacuum() -> BathParams {
        BathParams {
            n: 0.0,
            m: ZERO,
            beta: ZERO,
        }
    }

    pub fn thermal(n: f64) -> Result<BathParams> {
        Self::new(n, ZERO, ZERO)
    }

    pub fn squeezed(n: f64, m: C64) -> Result<BathParams> {
        Self::new(n, m, ZERO)
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn m(&self) -> C64 {
        self.m
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn is_vacuum(&self) -> bool {
        self.n == 0.0 && self.m == ZERO
    }

    /// Nonclassical only if `|M| > N`.
    pub fn is_classical(&self) -> bool {
        self.m.norm() <= self.n
    }

    /// Homodyne noise level `L = 2N + 1 + M + M*` of the x quadrature.
    pub fn l(&self) -> f64 {
        2.0 * self.n + 1.0 + 2.0 * self.m.re
    }

    pub fn l_x(&self) -> f64 {
        self.l()
    }

    /// `L_y = 2N + 1 − M − M*`.
    pub fn l_y(&self) -> f64 {
        2.0 * self.n + 1.0 - 2.0 * self.m.re
    }
}

impl Default for BathParams {
    fn default() -> Self {
        Self::vacuum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn space_construction() {
        assert_eq!(make_space(3).unwrap().dim(), 3);
        assert!(make_space(2).unwrap().is_atomic());
        assert!(matches!(make_space(1), Err(Error::InvalidArgument(_))));
        let t = Space::tensor(&[3, 2]).unwrap();
        assert_eq!(t.dim(), 6);
        assert_eq!(t.factor(1).unwrap(), Space::new(2).unwrap());
    }

    #[test]
    fn ladder_action() {
        let s = make_space(3).unwrap();
        let a = annihilation(&s).unwrap();
        let mut two = CVector::zeros(3);
        two[2] = ONE;
        let out = a.matrix() * &two;
        assert!(close(out[1], c(2f64.sqrt()), 1e-15));
        assert!(close(out[0], ZERO, 0.0) && close(out[2], ZERO, 0.0));
        let mut vac = CVector::zeros(3);
        vac[0] = ONE;
        assert_eq!((a.matrix() * &vac).norm(), 0.0);
        let n = &a.adjoint() * &a;
        assert!((&n - &number(&s).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn ladder_on_tensor_space_is_rejected() {
        let t = Space::tensor(&[3, 2]).unwrap();
        assert!(matches!(annihilation(&t), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn canonical_commutator_except_top_level() {
        let s = make_space(6).unwrap();
        let a = annihilation(&s).unwrap();
        let comm = a.commutator(&a.adjoint());
        for i in 0..5 {
            assert!(close(comm.matrix()[(i, i)], ONE, 1e-14));
        }
        assert!(close(comm.matrix()[(5, 5)], c(-5.0), 1e-14));
        let (x, y) = quadratures(&s).unwrap();
        let xy = x.commutator(&y);
        for i in 0..5 {
            assert!(close(xy.matrix()[(i, i)], c(0.0) + I * 2.0, 1e-14));
        }
        assert!(x.is_hermitian(1e-15) && y.is_hermitian(1e-15));
    }

    #[test]
    fn quadrature_moments() {
        let s = make_space(8).unwrap();
        let (x, y) = quadratures(&s).unwrap();
        let vac = DensityMatrix::vacuum(&s);
        assert!(expect(&x, &vac).unwrap().norm() < 1e-15);
        assert!((variance(&x, &vac).unwrap() - 1.0).abs() < 1e-14);
        assert!((variance(&y, &vac).unwrap() - 1.0).abs() < 1e-14);
        let one = DensityMatrix::fock(&s, 1).unwrap();
        assert!((variance(&x, &one).unwrap() - 3.0).abs() < 1e-14);
        let two = DensityMatrix::fock(&s, 2).unwrap();
        assert!((expect(&number(&s).unwrap(), &two).unwrap().re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_variance_is_two_n_plus_one() {
        let s = make_space(30).unwrap();
        let rho = DensityMatrix::thermal(&s, 1.0).unwrap();
        let (x, _) = quadratures(&s).unwrap();
        // oracle: direct sum over the truncated geometric distribution; the
        // top level only sees a†a in the truncated x², hence n instead of 2n+1
        let q = 0.5f64;
        let z: f64 = (0..30).map(|n| q.powi(n)).sum();
        let v: f64 = (0..30)
            .map(|n| if n == 29 { n as f64 } else { (2 * n + 1) as f64 } * q.powi(n) / z)
            .sum();
        assert!((variance(&x, &rho).unwrap() - v).abs() < 1e-12);
        assert!((v - 3.0).abs() < 1e-6);
    }

    #[test]
    fn variance_rejects_non_hermitian() {
        let s = make_space(4).unwrap();
        let a = annihilation(&s).unwrap();
        assert!(matches!(
            variance(&a, &DensityMatrix::vacuum(&s)),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn embed_shapes_and_commutation() {
        let t = Space::tensor(&[3, 2]).unwrap();
        let a = annihilation(&make_space(3).unwrap()).unwrap();
        let e = embed(&a, &t, 0).unwrap();
        assert_eq!(e.matrix().shape(), (6, 6));
        let id = Operator::identity(&make_space(2).unwrap());
        assert_eq!(embed(&id, &t, 1).unwrap(), Operator::identity(&t));
        let n0 = embed(&number(&make_space(3).unwrap()).unwrap(), &t, 0).unwrap();
        let n1 = embed(&number(&make_space(2).unwrap()).unwrap(), &t, 1).unwrap();
        assert_eq!(n0.commutator(&n1).norm(), 0.0);
        assert!(matches!(embed(&a, &t, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dissipator_examples() {
        let s = make_space(3).unwrap();
        let a = annihilation(&s).unwrap();
        let one = DensityMatrix::fock(&s, 1).unwrap();
        let d = dissipator_apply(&a, &one).unwrap();
        let mut expected = CMatrix::zeros(3, 3);
        expected[(0, 0)] = ONE;
        expected[(1, 1)] = -ONE;
        assert!((d - expected).norm() < 1e-15);
        let vac = DensityMatrix::vacuum(&s);
        assert_eq!(dissipator_apply(&a, &vac).unwrap().norm(), 0.0);
    }

    #[test]
    fn dissipator_on_superposition_matches_hand_arithmetic() {
        // ρ = ½(|0⟩+|1⟩)(⟨0|+⟨1|): aρa† = ½|0⟩⟨0|, a†a = |1⟩⟨1|
        // a†aρ = ½|1⟩(⟨0|+⟨1|), ρa†a = ½(|0⟩+|1⟩)⟨1|
        let s = make_space(3).unwrap();
        let mut psi = CVector::zeros(3);
        psi[0] = ONE;
        psi[1] = ONE;
        let rho = DensityMatrix::from_pure(&s, &psi).unwrap();
        let d = dissipator_apply(&annihilation(&s).unwrap(), &rho).unwrap();
        let mut expected = CMatrix::zeros(3, 3);
        expected[(0, 0)] = c(0.5);
        expected[(1, 0)] = c(-0.25);
        expected[(0, 1)] = c(-0.25);
        expected[(1, 1)] = c(-0.5);
        assert!((d - expected).norm() < 1e-15);
    }

    #[test]
    fn h_superop_examples() {
        let s = make_space(4).unwrap();
        let a = annihilation(&s).unwrap();
        let vac = DensityMatrix::vacuum(&s);
        assert_eq!(h_superop_apply(&a, &vac).unwrap().norm(), 0.0);
        // on |1⟩⟨1| the trace term vanishes (⟨x⟩ = 0): result is a ρ + ρ a† = |0⟩⟨1| + |1⟩⟨0|
        let one = DensityMatrix::fock(&s, 1).unwrap();
        let h = h_superop_apply(&a, &one).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 1)] = ONE;
        expected[(1, 0)] = ONE;
        assert!((h - expected).norm() < 1e-15);
    }

    #[test]
    fn coherent_and_partial_trace() {
        let s = make_space(20).unwrap();
        let alpha = C64::new(0.8, -0.3);
        let rho = DensityMatrix::coherent(&s, alpha).unwrap();
        let a = annihilation(&s).unwrap();
        assert!(close(expect(&a, &rho).unwrap(), alpha, 1e-10));
        let t = Space::tensor(&[20, 3]).unwrap();
        let drv = DensityMatrix::fock(&make_space(3).unwrap(), 1).unwrap();
        let w = DensityMatrix::product(&[&rho, &drv], &t).unwrap();
        assert!((w.partial_trace(0).unwrap().matrix() - rho.matrix()).norm() < 1e-14);
        assert!((w.partial_trace(1).unwrap().matrix() - drv.matrix()).norm() < 1e-14);
    }

    #[test]
    fn boundary_population_and_trace_distance() {
        let s = make_space(4).unwrap();
        let top = DensityMatrix::fock(&s, 3).unwrap();
        assert_eq!(top.boundary_population(), 1.0);
        assert_eq!(DensityMatrix::vacuum(&s).boundary_population(), 0.0);
        let d = top.trace_distance(&DensityMatrix::vacuum(&s)).unwrap();
        assert!((d - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unitary_exp_matches_series() {
        let s = make_space(5).unwrap();
        let (x, _) = quadratures(&s).unwrap();
        let u = x.unitary_exp(0.3);
        let series = (&x * C64::new(0.0, -0.3)).exp();
        assert!((u.matrix() - series.matrix()).norm() < 1e-12);
        let uu = &u * &u.adjoint();
        assert!((uu.matrix() - CMatrix::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn bath_constraints() {
        assert!(BathParams::new(1.0, c(2.0), ZERO).is_err());
        let bound = (0.5f64 * 1.5).sqrt();
        let b = BathParams::squeezed(0.5, c(-bound)).unwrap();
        assert!(!b.is_classical());
        assert!(b.l() < 1.0);
        assert_eq!(BathParams::vacuum().l(), 1.0);
        assert!(BathParams::thermal(2.0).unwrap().is_classical());
        assert!(BathParams::thermal(-1.0).is_err());
    }
}
