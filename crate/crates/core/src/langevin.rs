//! Linearized quadrature dynamics of a cavity under complex-amplitude
//! feedback `A = (λ/2)(c + μc†)`: steady variances, output spectra and the
//! in-loop commutator factor.
//!
//! Each quadrature `q` obeys `q̇ = −d q − g ν` with white vacuum noise `ν`,
//! and the reflected field is `q₃ = −[(1 + s) q + ν]`. The `x` row uses `μ`,
//! the `y` row uses `−μ`. `μ = −1` is homodyne quadrature feedback.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fock::C64;

/// Coefficients of one quadrature; the `feedback_*` parts are those carried
/// around the loop and pick up the delay phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureRow {
    /// Coefficient of `−q` in `q̇`.
    pub drift: f64,
    /// Coefficient of `−ν` in `q̇`.
    pub input_gain: f64,
    /// Coefficient of `q` in `q₃`.
    pub output_system: f64,
    /// Coefficient of `ν` in `q₃`.
    pub output_noise: f64,
    pub feedback_drift: f64,
    pub feedback_gain: f64,
    pub feedback_output: f64,
}

impl QuadratureRow {
    fn new(lambda: f64, mu: f64) -> QuadratureRow {
        let h = 0.5 * lambda;
        let feedback_drift = 0.5 * (lambda * (1.0 - mu) + h * h * (1.0 - mu * mu));
        let feedback_gain = h * (1.0 - mu);
        let feedback_output = h * (1.0 + mu);
        QuadratureRow {
            drift: 0.5 + feedback_drift,
            input_gain: 1.0 + feedback_gain,
            output_system: -(1.0 + feedback_output),
            output_noise: -1.0,
            feedback_drift,
            feedback_gain,
            feedback_output,
        }
    }

    /// Stationary variance `g² / 2d`.
    pub fn steady_variance(&self) -> f64 {
        self.input_gain * self.input_gain / (2.0 * self.drift)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearQuadratureModel {
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
    pub x: QuadratureRow,
    pub y: QuadratureRow,
}

impl LinearQuadratureModel {
    /// True for homodyne quadrature feedback (`μ = −1`).
    pub fn is_quadrature(&self) -> bool {
        self.mu == -1.0
    }

    fn check_delay(&self) -> Result<()> {
        if self.tau > 0.0 && !self.is_quadrature() {
            return Err(Error::Unsupported(format!(
                "loop delay is only modelled for quadrature feedback (mu = -1), got mu = {}",
                self.mu
            )));
        }
        Ok(())
    }
}

fn check_params(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    if !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be finite, got {mu}")));
    }
    Ok(())
}

pub fn build_linear_model(lambda: f64, mu: f64, tau: f64) -> Result<LinearQuadratureModel> {
    check_params(lambda, mu)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau}")));
    }
    Ok(LinearQuadratureModel {
        lambda,
        mu,
        tau,
        x: QuadratureRow::new(lambda, mu),
        y: QuadratureRow::new(lambda, -mu),
    })
}

/// Intracavity stationary variances `(V(x), V(y))`.
pub fn steady_variance_analytic(lambda: f64, mu: f64) -> Result<(f64, f64)> {
    let m = build_linear_model(lambda, mu, 0.0)?;
    Ok((m.x.steady_variance(), m.y.steady_variance()))
}

/// Output quadrature spectra on a frequency grid, vacuum level 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
}

fn check_grid(omegas: &[f64]) -> Result<()> {
    if let Some(w) = omegas.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite frequency {w}")));
    }
    Ok(())
}

/// Closed-form spectra.
pub fn output_spectrum(model: &LinearQuadratureModel, omegas: &[f64]) -> Result<Spectrum> {
    check_grid(omegas)?;
    model.check_delay()?;
    let (lambda, mu) = (model.lambda, model.mu);
    let (mut sx, mut sy) = (Vec::with_capacity(omegas.len()), Vec::with_capacity(omegas.len()));
    for &w in omegas {
        if model.is_quadrature() {
            let e = C64::from_polar(1.0, w * model.tau);
            let den = (C64::new(0.5, -w) + e * lambda).norm_sqr();
            let s = (0.25 + w * w) / den;
            sx.push(s);
            sy.push(1.0 / s);
        } else {
            let sigma = 1.0 + lambda + 0.25 * lambda * lambda * (1.0 - mu * mu);
            let f =
                |m: f64| (0.25 * (sigma + lambda * m).powi(2) + w * w) / (0.25 * (sigma - lambda * m).powi(2) + w * w);
            sx.push(f(mu));
            sy.push(f(-mu));
        }
    }
    Ok(Spectrum {
        omegas: omegas.to_vec(),
        sx,
        sy,
    })
}

fn row_transfer(row: &QuadratureRow, w: f64, e: C64) -> C64 {
    let d = e * row.feedback_drift + 0.5;
    let g = e * row.feedback_gain + 1.0;
    // q̃ = −g ν̃ / (d − iω);  q̃₃ = −(E + s) q̃ − E ν̃
    let q = -g / (d - C64::new(0.0, w));
    -(e + row.feedback_output) * q - e
}

/// Spectra from the scalar transfer function of each model row.
pub fn transfer_function_spectrum(model: &LinearQuadratureModel, omegas: &[f64]) -> Result<Spectrum> {
    check_grid(omegas)?;
    model.check_delay()?;
    let (mut sx, mut sy) = (Vec::with_capacity(omegas.len()), Vec::with_capacity(omegas.len()));
    for &w in omegas {
        let e = C64::from_polar(1.0, w * model.tau);
        sx.push(row_transfer(&model.x, w, e).norm_sqr());
        sy.push(row_transfer(&model.y, w, e).norm_sqr());
    }
    Ok(Spectrum {
        omegas: omegas.to_vec(),
        sx,
        sy,
    })
}

/// Factor multiplying the free-field commutator of the in-loop field:
/// `(¼ + ω²) / (¼ + ω² + λe^{iωτ}(½ + iω))`.
pub fn inloop_commutator_factor(lambda: f64, omega: f64, tau: f64) -> Result<C64> {
    check_params(lambda, 0.0)?;
    if !omega.is_finite() || !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite omega and tau >= 0, got omega={omega}, tau={tau}"
        )));
    }
    let num = 0.25 + omega * omega;
    let e = C64::from_polar(lambda, omega * tau);
    Ok(C64::new(num, 0.0) / (e * C64::new(0.5, omega) + num))
}

/// Eigenvalues of the P-function diffusion matrix generated by `𝒟[A]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PDiffusion {
    pub e_plus: f64,
    pub e_minus: f64,
    pub nonclassical: bool,
}

/// The Fokker–Planck diffusion of `𝒟[A]`, `A = u c + v c†` with `u = λ/2`,
/// `v = λμ/2`, has `D_αα = −u* v` and `D_αα* = |v|²`. In real coordinates
/// `(Re α, Im α)` this is the symmetric matrix
/// `[[D_αα* + Re D_αα, Im D_αα], [Im D_αα, D_αα* − Re D_αα]]`, with
/// eigenvalues `(λ²/4)(μ² ± |μ|)`.
pub fn pfunction_diffusion_eigenvalues(lambda: f64, mu: f64) -> Result<PDiffusion> {
    check_params(lambda, mu)?;
    let u = C64::new(0.5 * lambda, 0.0);
    let v = C64::new(0.5 * lambda * mu, 0.0);
    let a = -u.conj() * v;
    let b = v.norm_sqr();
    let m = Matrix2::new(b + a.re, a.im, a.im, b - a.re);
    let ev = m.symmetric_eigenvalues();
    let (e_plus, e_minus) = if ev[0] >= ev[1] { (ev[0], ev[1]) } else { (ev[1], ev[0]) };
    Ok(PDiffusion {
        e_plus,
        e_minus,
        nonclassical: e_minus < -1e-12,
    })
}
