//! Master-equation generators for a cavity damped into a white-noise bath,
//! cascaded cavity pairs, and the all-optical / electro-optical feedback
//! schemes built on them.
//!
//! The source cavity's damping operator `c1` is passed explicitly and carries
//! its decay rate (`c1 = a` for unit rate, `√γ a` otherwise).

mod kossakowski;

pub use kossakowski::{gell_mann_basis, lindblad_form_check, LindbladCheck};

use crate::error::{Error, Result};
use crate::fock::{annihilation, c, embed, number, BathParams, CMatrix, Operator, Space, C64, I, ONE};
use crate::policy::NumericPolicy;
use crate::superop::{Liouvillian, LiouvillianBuilder};

const HERM_TOL: f64 = NumericPolicy::DEFAULT.validation;

fn require_same(op: &Operator, space: &Space, name: &str) -> Result<()> {
    if op.space() != space {
        return Err(Error::SpaceMismatch(format!(
            "{name} lives on {} but the generator acts on {space}",
            op.space()
        )));
    }
    Ok(())
}

fn require_no_drive(bath: &BathParams) -> Result<()> {
    if bath.beta() != C64::new(0.0, 0.0) {
        return Err(Error::Unsupported(
            "a coherent bath amplitude is not supported in feedback generators".into(),
        ));
    }
    Ok(())
}

fn id(space: &Space) -> CMatrix {
    CMatrix::identity(space.dim(), space.dim())
}

/// `rate[(N+1)𝒟[c] + N𝒟[c†] + M/2 [c†,[c†,ρ]] + M*/2 [c,[c,ρ]]]`.
fn bath_terms(b: &mut LiouvillianBuilder, c1: &Operator, rate: f64, bath: &BathParams) {
    let cd = c1.adjoint();
    b.dissipator(rate * (bath.n() + 1.0), c1);
    if bath.n() != 0.0 {
        b.dissipator(rate * bath.n(), &cd);
    }
    let m = bath.m();
    if m != C64::new(0.0, 0.0) {
        b.double_commutator(m * (0.5 * rate), &cd, &cd);
        b.double_commutator(m.conj() * (0.5 * rate), c1, c1);
    }
}

/// `√rate [β*c − βc†, ρ]`.
fn drive_terms(b: &mut LiouvillianBuilder, c1: &Operator, rate: f64, bath: &BathParams) {
    let beta = bath.beta();
    if beta == C64::new(0.0, 0.0) {
        return;
    }
    let g = &(c1 * beta.conj()) - &(&c1.adjoint() * beta);
    b.commutator(c(rate.sqrt()), &g);
}

/// Single cavity damped at rate `gamma1` into `bath`, plus `−i[H0, ρ]`.
pub fn single_cavity_liouvillian(c1: &Operator, gamma1: f64, bath: &BathParams, h0: &Operator) -> Result<Liouvillian> {
    if !(gamma1 >= 0.0) || !gamma1.is_finite() {
        return Err(Error::InvalidArgument(format!("decay rate must be >= 0, got {gamma1}")));
    }
    let space = c1.space().clone();
    require_same(h0, &space, "H0")?;
    h0.require_hermitian("H0", HERM_TOL)?;
    let mut b = Liouvillian::builder(&space, "single-cavity");
    bath_terms(&mut b, c1, gamma1, bath);
    drive_terms(&mut b, c1, gamma1, bath);
    b.hamiltonian(h0);
    Ok(b.build())
}

/// Ladder operators of the two modes of a two-factor tensor space.
pub fn mode_operators(space: &Space) -> Result<(Operator, Operator)> {
    if space.factors().len() != 2 {
        return Err(Error::SpaceMismatch(format!(
            "cascaded generators need a two-factor tensor space, got {space}"
        )));
    }
    let a1 = annihilation(&space.factor(0)?)?;
    let a2 = annihilation(&space.factor(1)?)?;
    Ok((embed(&a1, space, 0)?, embed(&a2, space, 1)?))
}

/// Source cavity (slot 0) driving a second cavity (slot 1) through a common
/// unidirectional bath; `h` acts on the joint space.
pub fn cascaded_liouvillian(gamma1: f64, gamma2: f64, bath: &BathParams, h: &Operator) -> Result<Liouvillian> {
    for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be > 0, got {g}")));
        }
    }
    let space = h.space().clone();
    let (c1, c2) = mode_operators(&space)?;
    h.require_hermitian("H", HERM_TOL)?;
    let mut b = Liouvillian::builder(&space, "cascaded");
    cascaded_terms(&mut b, &c1, &c2, gamma1, gamma2, bath);
    drive_terms(&mut b, &c1, gamma1, bath);
    drive_terms(&mut b, &c2, gamma2, bath);
    b.hamiltonian(h);
    Ok(b.build())
}

fn cascaded_terms(
    b: &mut LiouvillianBuilder,
    c1: &Operator,
    c2: &Operator,
    gamma1: f64,
    gamma2: f64,
    bath: &BathParams,
) {
    let space = c1.space().clone();
    let one = id(&space);
    let k = (gamma1 * gamma2).sqrt();
    let (n, m) = (bath.n(), bath.m());
    let (c1d, c2d) = (c1.adjoint(), c2.adjoint());

    // (N+1)[γ1𝒟[c1] + γ2𝒟[c2] + √γ1γ2([c1W, c2†] + [c2, Wc1†])]
    b.dissipator(gamma1 * (n + 1.0), c1);
    b.dissipator(gamma2 * (n + 1.0), c2);
    let s = c(k * (n + 1.0));
    b.commutator_of_sandwich(-s, &c2d, c1.matrix(), &one);
    b.commutator_of_sandwich(s, c2, &one, c1d.matrix());

    if n != 0.0 {
        b.dissipator(gamma1 * n, &c1d);
        b.dissipator(gamma2 * n, &c2d);
        let s = c(k * n);
        b.commutator_of_sandwich(-s, c2, c1d.matrix(), &one);
        b.commutator_of_sandwich(s, &c2d, &one, c1.matrix());
    }

    if m != C64::new(0.0, 0.0) {
        b.double_commutator(m * (0.5 * gamma1), &c1d, &c1d);
        b.double_commutator(m * (0.5 * gamma2), &c2d, &c2d);
        b.double_commutator(m * k, &c2d, &c1d);
        let mc = m.conj();
        b.double_commutator(mc * (0.5 * gamma1), c1, c1);
        b.double_commutator(mc * (0.5 * gamma2), c2, c2);
        b.double_commutator(mc * k, c2, c1);
    }
}

/// Interaction between the driven cavity and the source in a two-mode
/// all-optical loop.
#[derive(Clone, Debug)]
pub enum Coupling {
    /// `V = c2†c2 K`.
    Intensity(Operator),
    /// `V = (c2 + c2†) J`.
    Quadrature(Operator),
    /// `V = −ig[(c2†c1 − c2c1†) + μ(c2†c1† − c2c1)]`.
    ComplexAmplitude { g: f64, mu: f64 },
}

/// Full two-mode model of an all-optical loop: unit-rate source cascaded
/// into a driven cavity of rate `gamma2`, coupled back through `coupling`.
/// `h0` acts on the source mode alone.
pub fn two_mode_feedback_liouvillian(
    coupling: &Coupling,
    gamma2: f64,
    h0: &Operator,
    bath: &BathParams,
    driven_dim: usize,
) -> Result<Liouvillian> {
    require_no_drive(bath)?;
    let source = h0.space().clone();
    if !source.is_atomic() {
        return Err(Error::SpaceMismatch(format!(
            "H0 must act on a single mode, got {source}"
        )));
    }
    let space = Space::tensor(&[source.dim(), driven_dim])?;
    let (c1, c2) = mode_operators(&space)?;
    h0.require_hermitian("H0", HERM_TOL)?;
    let v = match coupling {
        Coupling::Intensity(k) => {
            if !bath.is_vacuum() {
                return Err(Error::Unsupported("intensity feedback requires a vacuum bath".into()));
            }
            require_same(k, &source, "K")?;
            k.require_hermitian("K", HERM_TOL)?;
            let n2 = embed(&number(&space.factor(1)?)?, &space, 1)?;
            &n2 * &embed(k, &space, 0)?
        }
        Coupling::Quadrature(j) => {
            require_same(j, &source, "J")?;
            j.require_hermitian("J", HERM_TOL)?;
            &(&c2 + &c2.adjoint()) * &embed(j, &space, 0)?
        }
        Coupling::ComplexAmplitude { g, mu } => {
            if !g.is_finite() || !mu.is_finite() {
                return Err(Error::InvalidArgument("g and mu must be finite".into()));
            }
            // V = c2 B† + c2† B with B = −ig(c1 + μc1†)
            let bop = &(&c1 + &(&c1.adjoint() * *mu)) * C64::new(0.0, -*g);
            &(&c2 * &bop.adjoint()) + &(&c2.adjoint() * &bop)
        }
    };
    let h = &embed(h0, &space, 0)? + &v;
    let mut b = Liouvillian::builder(&space, "two-mode-feedback");
    cascaded_terms(&mut b, &c1, &c2, 1.0, gamma2, bath);
    b.hamiltonian(&h);
    Ok(b.build())
}

/// Which of the two intensity-feedback generators to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntensityForm {
    /// Second order expansion in `Z`; not of Lindblad form.
    Expanded,
    /// `𝒟[e^{−iZ}c1]`.
    Lindblad,
}

/// Markovian feedback of the detected photocurrent of `c1` through `Z`.
pub fn intensity_feedback_liouvillian(
    c1: &Operator,
    z: &Operator,
    h0: &Operator,
    form: IntensityForm,
) -> Result<Liouvillian> {
    let space = c1.space().clone();
    require_same(z, &space, "Z")?;
    require_same(h0, &space, "H0")?;
    z.require_hermitian("Z", HERM_TOL)?;
    h0.require_hermitian("H0", HERM_TOL)?;
    let mut b = Liouvillian::builder(&space, format!("intensity-{form:?}").to_lowercase());
    match form {
        IntensityForm::Expanded => {
            let (cm, cd) = (c1.matrix(), c1.adjoint().matrix().clone());
            let zm = z.matrix();
            // −i[Z, cρc†]
            b.commutator_of_sandwich(-I, z, cm, &cd);
            // −½[Z,[Z,cρc†]] = −½(Z²cρc† − 2Zcρc†Z + cρc†Z²)
            let z2 = zm * zm;
            b.sandwich(c(-0.5), &(&z2 * cm), &cd);
            b.sandwich(ONE, &(zm * cm), &(&cd * zm));
            b.sandwich(c(-0.5), cm, &(&cd * &z2));
            b.dissipator(1.0, c1);
        }
        IntensityForm::Lindblad => {
            let jump = &z.unitary_exp(1.0) * c1;
            b.dissipator(1.0, &jump);
        }
    }
    b.hamiltonian(h0);
    Ok(b.build())
}

/// Homodyne-current feedback through `Y` with a general white-noise bath.
pub fn quadrature_feedback_liouvillian(
    c1: &Operator,
    y: &Operator,
    h0: &Operator,
    bath: &BathParams,
) -> Result<Liouvillian> {
    require_no_drive(bath)?;
    let space = c1.space().clone();
    require_same(y, &space, "Y")?;
    require_same(h0, &space, "H0")?;
    y.require_hermitian("Y", HERM_TOL)?;
    h0.require_hermitian("H0", HERM_TOL)?;
    let one = id(&space);
    let cd = c1.adjoint();
    let (n, m) = (bath.n(), bath.m());
    let mut b = Liouvillian::builder(&space, "quadrature-feedback");
    bath_terms(&mut b, c1, 1.0, bath);
    // (N+1)(−i[Y, cρ + ρc†])
    let s = I * (-(n + 1.0));
    b.commutator_of_sandwich(s, y, c1.matrix(), &one);
    b.commutator_of_sandwich(s, y, &one, cd.matrix());
    // N(i[Y, c†ρ + ρc])
    if n != 0.0 {
        let s = I * n;
        b.commutator_of_sandwich(s, y, cd.matrix(), &one);
        b.commutator_of_sandwich(s, y, &one, c1.matrix());
    }
    // M i[Y,[c†,ρ]] − M* i[Y,[c,ρ]]
    if m != C64::new(0.0, 0.0) {
        b.double_commutator(I * m, y, &cd);
        b.double_commutator(-I * m.conj(), y, c1);
    }
    b.dissipator(bath.l(), y);
    b.hamiltonian(h0);
    Ok(b.build())
}

/// Feedback of the complex amplitude of the source output through `A`.
pub fn complex_feedback_liouvillian(
    c1: &Operator,
    a: &Operator,
    h0: &Operator,
    bath: &BathParams,
) -> Result<Liouvillian> {
    require_no_drive(bath)?;
    let space = c1.space().clone();
    require_same(a, &space, "A")?;
    require_same(h0, &space, "H0")?;
    h0.require_hermitian("H0", HERM_TOL)?;
    let (n, m) = (bath.n(), bath.m());
    let (cd, ad) = (c1.adjoint(), a.adjoint());
    let ca = c1 + a;
    let cad = ca.adjoint();
    let half_i = C64::new(0.0, 0.5);
    let mut b = Liouvillian::builder(&space, "complex-feedback");

    // (N+1){𝒟[c+A] − i[(i/2)(c†A − A†c), ρ]}
    b.dissipator(n + 1.0, &ca);
    let h1 = &(&(&cd * a) - &(&ad * c1)) * half_i;
    b.commutator(-I * (n + 1.0), &h1);

    // N{𝒟[c†+A†] − i[(i/2)(cA† − Ac†), ρ]}
    if n != 0.0 {
        b.dissipator(n, &cad);
        let h2 = &(&(c1 * &ad) - &(a * &cd)) * half_i;
        b.commutator(-I * n, &h2);
    }

    if m != C64::new(0.0, 0.0) {
        // M{½[c†+A†,[c†+A†,ρ]] + i[(i/2)[c†,A†], ρ]}
        b.double_commutator(m * 0.5, &cad, &cad);
        b.commutator(I * m, &(&cd.commutator(&ad) * half_i));
        // M*{½[c+A,[c+A,ρ]] + i[(i/2)[c,A], ρ]}
        let mc = m.conj();
        b.double_commutator(mc * 0.5, &ca, &ca);
        b.commutator(I * mc, &(&c1.commutator(a) * half_i));
    }
    b.hamiltonian(h0);
    Ok(b.build())
}

/// All-optical loop closing a cavity's output back onto its other mirror:
/// `2γ(1 + cos φ)𝒟[a] − iγ sin φ [a†a, ρ]`.
pub fn mirror_loop_liouvillian(space: &Space, gamma: f64, phi: f64) -> Result<Liouvillian> {
    if !(gamma > 0.0) || !gamma.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mirror loop needs gamma > 0 and finite phi, got gamma={gamma}, phi={phi}"
        )));
    }
    let a = annihilation(space)?;
    let mut b = Liouvillian::builder(space, "mirror-loop");
    let rate = 2.0 * gamma * (1.0 + phi.cos());
    if rate != 0.0 {
        b.dissipator(rate, &a);
    }
    let det = gamma * phi.sin();
    if det != 0.0 {
        b.hamiltonian(&(&number(space)? * det));
    }
    Ok(b.build())
}

/// Heterodyne detection of `c1` with currents `I_x`, `I_y` fed back through
/// `Y` and `X` respectively.
pub fn heterodyne_feedback_liouvillian(
    c1: &Operator,
    x: &Operator,
    y: &Operator,
    h0: &Operator,
    bath: &BathParams,
) -> Result<Liouvillian> {
    require_no_drive(bath)?;
    let space = c1.space().clone();
    for (op, name) in [(x, "X"), (y, "Y"), (h0, "H0")] {
        require_same(op, &space, name)?;
        op.require_hermitian(name, HERM_TOL)?;
    }
    let one = id(&space);
    let mut b = Liouvillian::builder(&space, "heterodyne-feedback");
    bath_terms(&mut b, c1, 1.0, bath);
    let (cx, cy) = heterodyne_channels(c1, bath);
    for (fb, ch) in [(y, &cx), (x, &cy)] {
        b.commutator_of_sandwich(-I, fb, ch.matrix(), &one);
        b.commutator_of_sandwich(-I, fb, &one, ch.adjoint().matrix());
    }
    b.dissipator(2.0 * bath.l_x(), y);
    b.dissipator(2.0 * bath.l_y(), x);
    b.hamiltonian(h0);
    Ok(b.build())
}

/// Innovation operators `(C_x, C_y)` of the two heterodyne channels:
/// `C_x = (N+M*+1)c − (N+M)c†`, `C_y = (N−M*+1)(−ic) − (N−M)(ic†)`.
pub fn heterodyne_channels(c1: &Operator, bath: &BathParams) -> (Operator, Operator) {
    let (n, m) = (bath.n(), bath.m());
    let cd = c1.adjoint();
    let cx = &(c1 * (m.conj() + n + 1.0)) - &(&cd * (m + n));
    let cy = &(c1 * ((c(n + 1.0) - m.conj()) * -I)) - &(&cd * ((c(n) - m) * I));
    (cx, cy)
}

/// Homodyne innovation operator `(N+M*+1)c − (N+M)c†`.
pub fn homodyne_channel(c1: &Operator, bath: &BathParams) -> Operator {
    heterodyne_channels(c1, bath).0
}

/// Hermitian parts `(X, Y)` of `A = X − iY`.
pub fn split_amplitude(a: &Operator) -> (Operator, Operator) {
    let ad = a.adjoint();
    let x = &(a + &ad) * 0.5;
    let y = &(a - &ad) * C64::new(0.0, 0.5);
    (x, y)
}

/// Electro-optic counterpart of the mirror loop: heterodyne detection of a
/// cavity of rate `gamma`, both currents fed back so that the mean field
/// follows `A = √γ e^{−iφ} a`; the feedback cavity mirror keeps its own
/// damping `𝒟[A]`.
pub fn heterodyne_mirror_analog_liouvillian(space: &Space, gamma: f64, phi: f64) -> Result<Liouvillian> {
    if !(gamma > 0.0) || !gamma.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mirror analog needs gamma > 0 and finite phi, got gamma={gamma}, phi={phi}"
        )));
    }
    let a = annihilation(space)?;
    let c1 = &a * gamma.sqrt();
    let amp = &a * (C64::from_polar(gamma.sqrt(), -phi));
    let (x, y) = split_amplitude(&amp);
    let fb = heterodyne_feedback_liouvillian(&c1, &x, &y, &Operator::zeros(space), &BathParams::vacuum())?;
    let mut b = Liouvillian::builder(space, "heterodyne-mirror-analog");
    b.extend(&fb)?;
    b.dissipator(1.0, &amp);
    Ok(b.build())
}

/// Feedback loop selector.
#[derive(Clone, Debug)]
pub enum FeedbackScheme {
    MirrorLoop { phi: f64, gamma: f64 },
    Intensity { z: Operator },
    Quadrature { y: Operator },
    ComplexAmplitude { a: Operator },
    HeterodyneAnalog { x: Operator, y: Operator },
}

/// A feedback scheme together with the source Hamiltonian.
#[derive(Clone, Debug)]
pub struct FeedbackSpec {
    scheme: FeedbackScheme,
    h0: Operator,
}

impl FeedbackSpec {
    pub fn new(scheme: FeedbackScheme, h0: Operator) -> Result<FeedbackSpec> {
        let space = h0.space().clone();
        h0.require_hermitian("H0", HERM_TOL)?;
        match &scheme {
            FeedbackScheme::MirrorLoop { gamma, phi } => {
                if !(*gamma > 0.0) || !phi.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "mirror loop needs gamma > 0, got {gamma}"
                    )));
                }
            }
            FeedbackScheme::Intensity { z } => {
                require_same(z, &space, "Z")?;
                z.require_hermitian("Z", HERM_TOL)?;
            }
            FeedbackScheme::Quadrature { y } => {
                require_same(y, &space, "Y")?;
                y.require_hermitian("Y", HERM_TOL)?;
            }
            FeedbackScheme::ComplexAmplitude { a } => require_same(a, &space, "A")?,
            FeedbackScheme::HeterodyneAnalog { x, y } => {
                require_same(x, &space, "X")?;
                require_same(y, &space, "Y")?;
                x.require_hermitian("X", HERM_TOL)?;
                y.require_hermitian("Y", HERM_TOL)?;
            }
        }
        Ok(FeedbackSpec { scheme, h0 })
    }

    pub fn scheme(&self) -> &FeedbackScheme {
        &self.scheme
    }

    pub fn h0(&self) -> &Operator {
        &self.h0
    }

    pub fn space(&self) -> &Space {
        self.h0.space()
    }

    /// Generator of the scheme for a unit-rate source (`c1 = a`). The mirror
    /// loop ignores `bath`; intensity feedback requires a vacuum bath.
    pub fn liouvillian(&self, bath: &BathParams) -> Result<Liouvillian> {
        let space = self.space();
        let c1 = annihilation(space)?;
        match &self.scheme {
            FeedbackScheme::MirrorLoop { phi, gamma } => mirror_loop_liouvillian(space, *gamma, *phi),
            FeedbackScheme::Intensity { z } => {
                if !bath.is_vacuum() || bath.beta() != C64::new(0.0, 0.0) {
                    return Err(Error::Unsupported("intensity feedback requires a vacuum bath".into()));
                }
                intensity_feedback_liouvillian(&c1, z, &self.h0, IntensityForm::Lindblad)
            }
            FeedbackScheme::Quadrature { y } => quadrature_feedback_liouvillian(&c1, y, &self.h0, bath),
            FeedbackScheme::ComplexAmplitude { a } => complex_feedback_liouvillian(&c1, a, &self.h0, bath),
            FeedbackScheme::HeterodyneAnalog { x, y } => heterodyne_feedback_liouvillian(&c1, x, y, &self.h0, bath),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_space, quadratures, DensityMatrix};

    fn setup(d: usize) -> (Space, Operator, Operator, Operator) {
        let s = make_space(d).unwrap();
        let a = annihilation(&s).unwrap();
        let (x, y) = quadratures(&s).unwrap();
        (s, a, x, y)
    }

    #[test]
    fn vacuum_bath_is_plain_damping() {
        let (s, a, _, _) = setup(5);
        let l = single_cavity_liouvillian(&a, 0.7, &BathParams::vacuum(), &Operator::zeros(&s)).unwrap();
        let mut b = Liouvillian::builder(&s, "ref");
        b.dissipator(0.7, &a);
        assert!(l.max_abs_diff(&b.build()).unwrap() < 1e-15);
    }

    #[test]
    fn unphysical_bath_is_rejected_at_construction() {
        assert!(matches!(
            BathParams::squeezed(1.0, c(2.0)),
            Err(Error::UnphysicalBath { .. })
        ));
    }

    #[test]
    fn box3_regrouping_for_vacuum() {
        let (s, a, x, y) = setup(6);
        let yop = &(&y * 0.3) + &(&x * 0.1);
        let h0 = &x * 0.2;
        let l = quadrature_feedback_liouvillian(&a, &yop, &h0, &BathParams::vacuum()).unwrap();
        let jump = &a - &(&yop * I);
        let h = &h0 + &(&(&(&a.adjoint() * &yop) + &(&yop * &a)) * 0.5);
        let mut b = Liouvillian::builder(&s, "box3");
        b.dissipator(1.0, &jump);
        b.hamiltonian(&h);
        assert!(l.max_abs_diff(&b.build()).unwrap() < 1e-12);
    }

    #[test]
    fn complex_with_minus_i_y_equals_quadrature() {
        let (s, a, x, y) = setup(6);
        let yop = &(&y * 0.4) + &(&number(&s).unwrap() * 0.1);
        let bath = BathParams::squeezed(0.3, C64::new(0.2, -0.3)).unwrap();
        let q = quadrature_feedback_liouvillian(&a, &yop, &x, &bath).unwrap();
        let cf = complex_feedback_liouvillian(&a, &(&yop * -I), &x, &bath).unwrap();
        assert!(q.max_abs_diff(&cf).unwrap() < 1e-12);
    }

    #[test]
    fn complex_feedback_with_rotated_self_amplitude_is_mirror_loop() {
        let (s, a, _, _) = setup(6);
        let gamma: f64 = 0.8;
        for phi in [0.0, 0.4, std::f64::consts::FRAC_PI_2, 2.0, std::f64::consts::PI] {
            let c1 = &a * gamma.sqrt();
            let amp = &a * C64::from_polar(gamma.sqrt(), -phi);
            let cf = complex_feedback_liouvillian(&c1, &amp, &Operator::zeros(&s), &BathParams::vacuum()).unwrap();
            let ml = mirror_loop_liouvillian(&s, gamma, phi).unwrap();
            assert!(cf.max_abs_diff(&ml).unwrap() < 1e-12, "phi = {phi}");
        }
    }

    #[test]
    fn mirror_loop_cases() {
        let s = make_space(8).unwrap();
        let l = mirror_loop_liouvillian(&s, 1.0, std::f64::consts::PI).unwrap();
        assert!(l.max_abs() < 1e-12);
        let l0 = mirror_loop_liouvillian(&s, 1.0, 0.0).unwrap();
        let one = DensityMatrix::fock(&s, 1).unwrap();
        let dn = crate::fock::trace_product(number(&s).unwrap().matrix(), &l0.apply_state(&one).unwrap());
        assert!((dn.re + 4.0).abs() < 1e-12);
    }

    #[test]
    fn intensity_forms_agree_for_trivial_z() {
        let (s, a, x, _) = setup(5);
        let h0 = &x * 0.3;
        let zero = Operator::zeros(&s);
        let e = intensity_feedback_liouvillian(&a, &zero, &h0, IntensityForm::Expanded).unwrap();
        let l = intensity_feedback_liouvillian(&a, &zero, &h0, IntensityForm::Lindblad).unwrap();
        assert!(e.max_abs_diff(&l).unwrap() < 1e-14);
        let phase = &Operator::identity(&s) * 0.7;
        let lp = intensity_feedback_liouvillian(&a, &phase, &h0, IntensityForm::Lindblad).unwrap();
        assert!(lp.max_abs_diff(&l).unwrap() < 1e-12);
        let not_h = intensity_feedback_liouvillian(&a, &a, &h0, IntensityForm::Lindblad);
        assert!(matches!(not_h, Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn heterodyne_at_pi_is_symmetric_noise() {
        let s = make_space(7).unwrap();
        let gamma = 1.3;
        let l = heterodyne_mirror_analog_liouvillian(&s, gamma, std::f64::consts::PI).unwrap();
        let a = annihilation(&s).unwrap();
        let mut b = Liouvillian::builder(&s, "ref");
        b.dissipator(gamma, &a);
        b.dissipator(gamma, &a.adjoint());
        assert!(l.max_abs_diff(&b.build()).unwrap() < 1e-12);
    }

    #[test]
    fn feedback_generators_reject_drive() {
        let (s, a, _, y) = setup(4);
        let bath = BathParams::new(0.0, c(0.0), c(1.0)).unwrap();
        let r = quadrature_feedback_liouvillian(&a, &y, &Operator::zeros(&s), &bath);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn two_mode_with_zero_coupling_is_cascaded() {
        let s = make_space(4).unwrap();
        let zero = Operator::zeros(&s);
        let full =
            two_mode_feedback_liouvillian(&Coupling::Intensity(zero.clone()), 3.0, &zero, &BathParams::vacuum(), 3)
                .unwrap();
        let t = Space::tensor(&[4, 3]).unwrap();
        let casc = cascaded_liouvillian(1.0, 3.0, &BathParams::vacuum(), &Operator::zeros(&t)).unwrap();
        assert!(full.max_abs_diff(&casc).unwrap() < 1e-14);
        let therm = BathParams::thermal(0.1).unwrap();
        let r = two_mode_feedback_liouvillian(&Coupling::Intensity(zero.clone()), 3.0, &zero, &therm, 3);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn feedback_spec_checks_hermiticity() {
        let (s, a, _, _) = setup(4);
        let r = FeedbackSpec::new(FeedbackScheme::Quadrature { y: a.clone() }, Operator::zeros(&s));
        assert!(matches!(r, Err(Error::NotHermitian { .. })));
        let ok = FeedbackSpec::new(FeedbackScheme::ComplexAmplitude { a }, Operator::zeros(&s)).unwrap();
        assert!(ok.liouvillian(&BathParams::vacuum()).is_ok());
    }
}
