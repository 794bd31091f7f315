//! Declarative scenarios: a TOML file describing one feedback loop, a bath,
//! a truncation, solver settings and what to compute.
//!
//! ```toml
//! [scheme]
//! kind = "quadrature"
//! lambda = 1.0
//!
//! [truncation]
//! dim = 30
//!
//! [mode]
//! kind = "steady"
//! ```
//!
//! Unknown keys are rejected. Complex numbers are `[re, im]` pairs and
//! operators are expressions over `a, adag, x, y, n, I` (see [`expr`]).
//! A two-mode loop is described by the reduced scheme it eliminates to:
//!
//! ```toml
//! [scheme]
//! kind = "two-mode"
//! gamma2 = 200.0
//! [scheme.reduced]
//! kind = "quadrature"
//! lambda = 1.0
//! ```

pub mod expr;
mod run;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::fock::{annihilation, embed, BathParams, CVector, DensityMatrix, Operator, Space, C64};
use crate::generators::{
    complex_feedback_liouvillian, heterodyne_feedback_liouvillian, heterodyne_mirror_analog_liouvillian,
    intensity_feedback_liouvillian, mirror_loop_liouvillian, quadrature_feedback_liouvillian,
    single_cavity_liouvillian, split_amplitude, two_mode_feedback_liouvillian, Coupling, IntensityForm,
};
use crate::superop::Liouvillian;
use crate::trajectories::Unraveling;

pub use run::{compare_report, run, CompareReport, RunOptions, RunSummary};

fn zero_expr() -> String {
    "0".into()
}

fn one() -> f64 {
    1.0
}

/// Top-level config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub bath: BathConfig,
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub mode: ModeConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchemeConfig {
    /// Damped cavity without feedback.
    None {
        #[serde(default = "zero_expr")]
        h0: String,
    },
    MirrorLoop {
        phi: f64,
        #[serde(default = "one")]
        gamma: f64,
    },
    Intensity {
        z: String,
        #[serde(default)]
        form: IntensityFormConfig,
        #[serde(default = "zero_expr")]
        h0: String,
    },
    /// Either `y` or `lambda` (meaning `Y = −(λ/2) y`).
    Quadrature {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default = "zero_expr")]
        h0: String,
    },
    /// Either `a` or `lambda` and `mu` (meaning `A = (λ/2)(a + μ adag)`).
    ComplexAmplitude {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default = "zero_expr")]
        h0: String,
    },
    Heterodyne {
        x: String,
        y: String,
        #[serde(default = "zero_expr")]
        h0: String,
    },
    HeterodyneMirrorAnalog {
        phi: f64,
        #[serde(default = "one")]
        gamma: f64,
    },
    TwoMode {
        gamma2: f64,
        reduced: Box<SchemeConfig>,
    },
}

impl SchemeConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            SchemeConfig::None { .. } => "none",
            SchemeConfig::MirrorLoop { .. } => "mirror-loop",
            SchemeConfig::Intensity { .. } => "intensity",
            SchemeConfig::Quadrature { .. } => "quadrature",
            SchemeConfig::ComplexAmplitude { .. } => "complex-amplitude",
            SchemeConfig::Heterodyne { .. } => "heterodyne",
            SchemeConfig::HeterodyneMirrorAnalog { .. } => "heterodyne-mirror-analog",
            SchemeConfig::TwoMode { .. } => "two-mode",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityFormConfig {
    Expanded,
    #[default]
    Lindblad,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    #[serde(default)]
    pub n: f64,
    #[serde(default)]
    pub m: [f64; 2],
    #[serde(default)]
    pub beta: [f64; 2],
}

impl Default for BathConfig {
    fn default() -> Self {
        BathConfig {
            n: 0.0,
            m: [0.0; 2],
            beta: [0.0; 2],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub dim: usize,
    /// Second-cavity dimension, two-mode schemes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driven_dim: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "SolverConfig::default_dt")]
    pub dt: f64,
    #[serde(default = "SolverConfig::default_t_final")]
    pub t_final: f64,
    #[serde(default = "SolverConfig::default_stride")]
    pub stride: usize,
}

impl SolverConfig {
    fn default_dt() -> f64 {
        1e-3
    }
    fn default_t_final() -> f64 {
        5.0
    }
    fn default_stride() -> usize {
        100
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: Self::default_dt(),
            t_final: Self::default_t_final(),
            stride: Self::default_stride(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    #[default]
    Vacuum,
    Fock {
        n: usize,
    },
    Coherent {
        alpha: [f64; 2],
    },
    Thermal {
        n_bar: f64,
    },
    /// Pure state with the given (unnormalized) Fock amplitudes.
    Superposition {
        amplitudes: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeConfig {
    Master,
    Steady,
    Trajectories {
        n: usize,
        #[serde(default)]
        seed: u64,
        /// Also integrate the master equation and report z-scores.
        #[serde(default = "yes")]
        check_master: bool,
    },
    Spectrum {
        #[serde(default)]
        omega_min: f64,
        #[serde(default = "ModeConfig::default_omega_max")]
        omega_max: f64,
        #[serde(default = "ModeConfig::default_points")]
        points: usize,
        #[serde(default)]
        tau: f64,
    },
    Compare {
        #[serde(default = "ModeConfig::default_threshold")]
        threshold: f64,
    },
    LindbladCheck,
}

fn yes() -> bool {
    true
}

impl ModeConfig {
    fn default_omega_max() -> f64 {
        10.0
    }
    fn default_points() -> usize {
        201
    }
    fn default_threshold() -> f64 {
        5e-2
    }

    pub fn default_spectrum() -> ModeConfig {
        ModeConfig::Spectrum {
            omega_min: 0.0,
            omega_max: Self::default_omega_max(),
            points: Self::default_points(),
            tau: 0.0,
        }
    }

    pub fn default_compare() -> ModeConfig {
        ModeConfig::Compare {
            threshold: Self::default_threshold(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModeConfig::Master => "master",
            ModeConfig::Steady => "steady",
            ModeConfig::Trajectories { .. } => "trajectories",
            ModeConfig::Spectrum { .. } => "spectrum",
            ModeConfig::Compare { .. } => "compare",
            ModeConfig::LindbladCheck => "lindblad-check",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "OutputsConfig::default_observables")]
    pub observables: Vec<String>,
    #[serde(default = "OutputsConfig::default_variances")]
    pub variances: Vec<String>,
}

impl OutputsConfig {
    fn default_observables() -> Vec<String> {
        vec!["x".into(), "y".into(), "n".into()]
    }
    fn default_variances() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            observables: Self::default_observables(),
            variances: Self::default_variances(),
        }
    }
}

impl ScenarioConfig {
    /// Override the trajectory seed and the compare threshold, where the
    /// mode has them.
    pub fn apply_overrides(&mut self, seed: Option<u64>, tolerance: Option<f64>) {
        match &mut self.mode {
            ModeConfig::Trajectories { seed: s, .. } => {
                if let Some(v) = seed {
                    *s = v;
                }
            }
            ModeConfig::Compare { threshold } => {
                if let Some(v) = tolerance {
                    *threshold = v;
                }
            }
            _ => {}
        }
    }

    /// Switch to `kind` unless the config already selects it, using that
    /// mode's defaults.
    pub fn force_mode(&mut self, kind: &str) {
        if self.mode.kind() == kind {
            return;
        }
        self.mode = match kind {
            "spectrum" => ModeConfig::default_spectrum(),
            "compare" => ModeConfig::default_compare(),
            "lindblad-check" => ModeConfig::LindbladCheck,
            "steady" => ModeConfig::Steady,
            _ => ModeConfig::Master,
        };
    }
}

/// Failure of a scenario, classified for the process exit code.
#[derive(Debug)]
pub enum ScenarioError {
    /// Unparseable text, unknown key, missing field or bad value.
    Config {
        field: String,
        message: String,
    },
    /// Parameters outside the physical domain.
    Unphysical {
        field: String,
        message: String,
    },
    /// Failure during the computation itself.
    Numerical(Error),
    /// Compare mode ran but exceeded its threshold.
    Threshold {
        max_distance: f64,
        threshold: f64,
    },
    Io(std::io::Error),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config { .. } => 2,
            ScenarioError::Unphysical { .. } => 3,
            ScenarioError::Numerical(_) => 4,
            ScenarioError::Threshold { .. } => 5,
            ScenarioError::Io(_) => 1,
        }
    }

    fn config(field: &str, message: impl Into<String>) -> Self {
        ScenarioError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Classify a core error raised while checking `field`.
    fn at(field: &str, e: Error) -> Self {
        if e.is_unphysical() {
            ScenarioError::Unphysical {
                field: field.into(),
                message: e.to_string(),
            }
        } else if e.is_numerical() {
            ScenarioError::Numerical(e)
        } else {
            ScenarioError::config(field, e.to_string())
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Config { field, message } if field.is_empty() => {
                write!(f, "config error: {message}")
            }
            ScenarioError::Config { field, message } => write!(f, "config error at `{field}`: {message}"),
            ScenarioError::Unphysical { field, message } => {
                write!(f, "unphysical parameters at `{field}`: {message}")
            }
            ScenarioError::Numerical(e) => write!(f, "numerical failure: {e}"),
            ScenarioError::Threshold {
                max_distance,
                threshold,
            } => write!(
                f,
                "compare threshold exceeded: max trace distance {max_distance:e} > {threshold:e}"
            ),
            ScenarioError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e)
    }
}

/// A validated scenario with every operator and generator built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Hex SHA-256 of the config text.
    pub config_sha256: String,
    pub bath: BathParams,
    /// Space of the source cavity.
    pub source: Space,
    /// Generator evolved in master / steady / compare modes (the full
    /// two-mode model for two-mode schemes).
    pub generator: Liouvillian,
    /// Single-mode generator that a two-mode scheme eliminates to.
    pub reduced: Option<Liouvillian>,
    pub initial: DensityMatrix,
    /// Initial source state, for the reduced model.
    pub initial_source: DensityMatrix,
    /// Observables on the generator's space.
    pub observables: Vec<(String, Operator)>,
    pub variances: Vec<(String, Operator)>,
    /// Source-space observables (reduced model and trajectories).
    pub source_observables: Vec<(String, Operator)>,
    pub source_variances: Vec<(String, Operator)>,
    pub unraveling: Option<(Unraveling, Vec<Operator>)>,
    /// `(λ, μ)` of the linearized model, when the scheme has one.
    pub linear: Option<(f64, f64)>,
    /// Generators examined by the Lindblad-form check.
    pub lindblad_targets: Vec<(String, Liouvillian)>,
}

/// Parse the config text without physical validation.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let location = e.span().map(|span| {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: ")
        });
        ScenarioError::config("", format!("{}{msg}", location.unwrap_or_default()))
    })
}

/// Parse and fully validate a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let config = parse_config(text)?;
    Scenario::from_config(config, &sha256_hex(text))
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn finite(field: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScenarioError::config(field, format!("must be finite, got {v}")))
    }
}

fn operator(field: &str, src: &str, space: &Space) -> Result<Operator, ScenarioError> {
    expr::parse_operator(src, space).map_err(|e| ScenarioError::config(field, format!("`{src}`: {e}")))
}

fn hermitian(field: &str, src: &str, space: &Space) -> Result<Operator, ScenarioError> {
    let op = operator(field, src, space)?;
    op.require_hermitian(field, 1e-9)
        .map_err(|e| ScenarioError::at(field, e))?;
    Ok(op)
}

/// Single-mode pieces of a scheme.
struct Built {
    generator: Liouvillian,
    unraveling: Option<(Unraveling, Vec<Operator>)>,
    linear: Option<(f64, f64)>,
    lindblad_targets: Vec<(String, Liouvillian)>,
    reduction: Option<Reduction>,
    h0: Operator,
}

/// Reduced scheme of an all-optical two-mode loop.
enum Reduction {
    /// `Z = 4K/γ2`.
    Intensity(Operator),
    /// `Y = −2J/√γ2`.
    Quadrature(Operator),
    /// `g = √γ2 λ/4`.
    Complex { lambda: f64, mu: f64 },
}

impl Reduction {
    fn coupling(&self, gamma2: f64) -> Coupling {
        match self {
            Reduction::Intensity(z) => Coupling::Intensity(z * (gamma2 / 4.0)),
            Reduction::Quadrature(y) => Coupling::Quadrature(y * (-0.5 * gamma2.sqrt())),
            Reduction::Complex { lambda, mu } => Coupling::ComplexAmplitude {
                g: gamma2.sqrt() * lambda / 4.0,
                mu: *mu,
            },
        }
    }
}

fn build_single(scheme: &SchemeConfig, field: &str, space: &Space, bath: &BathParams) -> Result<Built, ScenarioError> {
    let a = annihilation(space).map_err(|e| ScenarioError::at(field, e))?;
    let f = |name: &str| format!("{field}.{name}");
    let at = |name: &str| {
        let path = f(name);
        move |e: Error| ScenarioError::at(&path, e)
    };
    let plain = |built: Liouvillian, h0: Operator| Built {
        generator: built,
        unraveling: None,
        linear: None,
        lindblad_targets: Vec::new(),
        reduction: None,
        h0,
    };
    let zero = Operator::zeros(space);
    let out = match scheme {
        SchemeConfig::None { h0 } => {
            let h0 = hermitian(&f("h0"), h0, space)?;
            let l = single_cavity_liouvillian(&a, 1.0, bath, &h0).map_err(at("kind"))?;
            let mut b = plain(l.clone(), h0.clone());
            b.unraveling = Some((
                Unraveling::Homodyne {
                    c1: a.clone(),
                    y: zero.clone(),
                    h0,
                    bath: *bath,
                },
                Vec::new(),
            ));
            b.lindblad_targets = vec![("none".into(), l)];
            b
        }
        SchemeConfig::MirrorLoop { phi, gamma } => {
            let (phi, gamma) = (finite(&f("phi"), *phi)?, finite(&f("gamma"), *gamma)?);
            let l = mirror_loop_liouvillian(space, gamma, phi).map_err(at("gamma"))?;
            let mut b = plain(l.clone(), zero.clone());
            b.lindblad_targets = vec![("mirror-loop".into(), l)];
            b
        }
        SchemeConfig::Intensity { z, form, h0 } => {
            let zop = hermitian(&f("z"), z, space)?;
            let h0 = hermitian(&f("h0"), h0, space)?;
            if !bath.is_vacuum() || bath.beta() != C64::new(0.0, 0.0) {
                return Err(ScenarioError::config(
                    "bath",
                    "intensity feedback requires a vacuum bath",
                ));
            }
            let box1 = intensity_feedback_liouvillian(&a, &zop, &h0, IntensityForm::Expanded).map_err(at("z"))?;
            let box2 = intensity_feedback_liouvillian(&a, &zop, &h0, IntensityForm::Lindblad).map_err(at("z"))?;
            let generator = match form {
                IntensityFormConfig::Expanded => box1.clone(),
                IntensityFormConfig::Lindblad => box2.clone(),
            };
            let mut b = plain(generator, h0.clone());
            if *form == IntensityFormConfig::Lindblad {
                b.unraveling = Some((
                    Unraveling::Jump {
                        c1: a.clone(),
                        z: zop.clone(),
                        h0,
                    },
                    Vec::new(),
                ));
            }
            b.lindblad_targets = vec![("box1".into(), box1), ("box2".into(), box2)];
            if *form == IntensityFormConfig::Lindblad {
                b.reduction = Some(Reduction::Intensity(zop));
            }
            b
        }
        SchemeConfig::Quadrature { y, lambda, h0 } => {
            let yop = match (y, lambda) {
                (Some(y), None) => hermitian(&f("y"), y, space)?,
                (None, Some(l)) => {
                    let l = finite(&f("lambda"), *l)?;
                    let (_, yq) = crate::fock::quadratures(space).map_err(at("lambda"))?;
                    &yq * (-0.5 * l)
                }
                _ => return Err(ScenarioError::config(field, "give exactly one of `y` and `lambda`")),
            };
            let h0 = hermitian(&f("h0"), h0, space)?;
            let l = quadrature_feedback_liouvillian(&a, &yop, &h0, bath).map_err(at("kind"))?;
            let mut b = plain(l.clone(), h0.clone());
            b.unraveling = Some((
                Unraveling::Homodyne {
                    c1: a.clone(),
                    y: yop.clone(),
                    h0,
                    bath: *bath,
                },
                Vec::new(),
            ));
            b.linear = lambda.map(|l| (l, -1.0));
            b.lindblad_targets = vec![("quadrature".into(), l)];
            b.reduction = Some(Reduction::Quadrature(yop));
            b
        }
        SchemeConfig::ComplexAmplitude {
            a: aexpr,
            lambda,
            mu,
            h0,
        } => {
            let (aop, linear) = match (aexpr, lambda, mu) {
                (Some(e), None, None) => (operator(&f("a"), e, space)?, None),
                (None, Some(l), Some(m)) => {
                    let (l, m) = (finite(&f("lambda"), *l)?, finite(&f("mu"), *m)?);
                    let op = &(&a + &(&a.adjoint() * m)) * (0.5 * l);
                    (op, Some((l, m)))
                }
                _ => {
                    return Err(ScenarioError::config(
                        field,
                        "give either `a` or both `lambda` and `mu`",
                    ))
                }
            };
            let h0 = hermitian(&f("h0"), h0, space)?;
            let l = complex_feedback_liouvillian(&a, &aop, &h0, bath).map_err(at("kind"))?;
            let mut b = plain(l.clone(), h0);
            b.linear = linear;
            b.lindblad_targets = vec![("complex-amplitude".into(), l)];
            b.reduction = linear.map(|(lambda, mu)| Reduction::Complex { lambda, mu });
            b
        }
        SchemeConfig::Heterodyne { x, y, h0 } => {
            let xop = hermitian(&f("x"), x, space)?;
            let yop = hermitian(&f("y"), y, space)?;
            let h0 = hermitian(&f("h0"), h0, space)?;
            let l = heterodyne_feedback_liouvillian(&a, &xop, &yop, &h0, bath).map_err(at("kind"))?;
            let mut b = plain(l.clone(), h0.clone());
            b.unraveling = Some((
                Unraveling::Heterodyne {
                    c1: a.clone(),
                    x: xop,
                    y: yop,
                    h0,
                    bath: *bath,
                },
                Vec::new(),
            ));
            b.lindblad_targets = vec![("heterodyne".into(), l)];
            b
        }
        SchemeConfig::HeterodyneMirrorAnalog { phi, gamma } => {
            let (phi, gamma) = (finite(&f("phi"), *phi)?, finite(&f("gamma"), *gamma)?);
            let l = heterodyne_mirror_analog_liouvillian(space, gamma, phi).map_err(at("gamma"))?;
            let amp = &a * C64::from_polar(gamma.sqrt(), -phi);
            let (x, y) = split_amplitude(&amp);
            let mut b = plain(l.clone(), zero.clone());
            b.unraveling = Some((
                Unraveling::Heterodyne {
                    c1: &a * gamma.sqrt(),
                    x,
                    y,
                    h0: zero.clone(),
                    bath: *bath,
                },
                vec![amp],
            ));
            b.lindblad_targets = vec![("heterodyne-mirror-analog".into(), l)];
            b
        }
        SchemeConfig::TwoMode { .. } => return Err(ScenarioError::config(field, "two-mode schemes cannot be nested")),
    };
    Ok(out)
}

fn initial_state(cfg: &InitialConfig, space: &Space) -> Result<DensityMatrix, ScenarioError> {
    let at = |name: &str| {
        let path = format!("initial.{name}");
        move |e: Error| ScenarioError::at(&path, e)
    };
    match cfg {
        InitialConfig::Vacuum => Ok(DensityMatrix::vacuum(space)),
        InitialConfig::Fock { n } => DensityMatrix::fock(space, *n).map_err(at("n")),
        InitialConfig::Coherent { alpha } => {
            DensityMatrix::coherent(space, C64::new(alpha[0], alpha[1])).map_err(at("alpha"))
        }
        InitialConfig::Thermal { n_bar } => DensityMatrix::thermal(space, *n_bar).map_err(at("n_bar")),
        InitialConfig::Superposition { amplitudes } => {
            if amplitudes.len() > space.dim() {
                return Err(ScenarioError::config(
                    "initial.amplitudes",
                    format!("{} amplitudes exceed the dimension {}", amplitudes.len(), space.dim()),
                ));
            }
            let mut psi = CVector::zeros(space.dim());
            for (k, z) in amplitudes.iter().enumerate() {
                psi[k] = C64::new(z[0], z[1]);
            }
            let norm = psi.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(ScenarioError::config(
                    "initial.amplitudes",
                    "amplitudes must be finite and not all zero",
                ));
            }
            psi /= C64::new(norm, 0.0);
            DensityMatrix::from_pure(space, &psi).map_err(at("amplitudes"))
        }
    }
}

fn output_ops(
    names: &[String],
    field: &str,
    space: &Space,
    require_hermitian: bool,
) -> Result<Vec<(String, Operator)>, ScenarioError> {
    names
        .iter()
        .enumerate()
        .map(|(k, src)| {
            let path = format!("{field}[{k}]");
            let op = if require_hermitian {
                hermitian(&path, src, space)?
            } else {
                operator(&path, src, space)?
            };
            Ok((src.trim().to_string(), op))
        })
        .collect()
}

impl Scenario {
    /// Validate `config` and build everything the selected mode needs.
    pub fn from_config(config: ScenarioConfig, config_sha256: &str) -> Result<Scenario, ScenarioError> {
        let bc = &config.bath;
        let bath = BathParams::new(
            finite("bath.n", bc.n)?,
            C64::new(finite("bath.m", bc.m[0])?, finite("bath.m", bc.m[1])?),
            C64::new(finite("bath.beta", bc.beta[0])?, finite("bath.beta", bc.beta[1])?),
        )
        .map_err(|e| ScenarioError::at("bath", e))?;

        let t = &config.truncation;
        if t.dim < 2 {
            return Err(ScenarioError::config(
                "truncation.dim",
                format!("must be >= 2, got {}", t.dim),
            ));
        }
        let source = Space::new(t.dim).map_err(|e| ScenarioError::at("truncation.dim", e))?;

        let s = &config.solver;
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            return Err(ScenarioError::config("solver.dt", format!("must be > 0, got {}", s.dt)));
        }
        if !(s.t_final > 0.0) || !s.t_final.is_finite() {
            return Err(ScenarioError::config(
                "solver.t_final",
                format!("must be > 0, got {}", s.t_final),
            ));
        }
        crate::evolve::step_count(s.t_final, s.dt).map_err(|e| ScenarioError::at("solver.dt", e))?;
        if s.stride == 0 {
            return Err(ScenarioError::config("solver.stride", "must be >= 1"));
        }

        let initial_source = initial_state(&config.initial, &source)?;
        let source_observables = output_ops(&config.outputs.observables, "outputs.observables", &source, false)?;
        let source_variances = output_ops(&config.outputs.variances, "outputs.variances", &source, true)?;

        let (built, generator, reduced, initial, observables, variances) = match &config.scheme {
            SchemeConfig::TwoMode { gamma2, reduced } => {
                let gamma2 = finite("scheme.gamma2", *gamma2)?;
                if !(gamma2 > 0.0) {
                    return Err(ScenarioError::config(
                        "scheme.gamma2",
                        format!("must be > 0, got {gamma2}"),
                    ));
                }
                let driven_dim = t
                    .driven_dim
                    .ok_or_else(|| ScenarioError::config("truncation.driven_dim", "required for two-mode schemes"))?;
                if driven_dim < 2 {
                    return Err(ScenarioError::config("truncation.driven_dim", "must be >= 2"));
                }
                let built = build_single(reduced, "scheme.reduced", &source, &bath)?;
                let coupling = built.reduction.as_ref().map(|r| r.coupling(gamma2)).ok_or_else(|| {
                    ScenarioError::config(
                        "scheme.reduced.kind",
                        "two-mode loops exist for intensity (lindblad form), quadrature and \
                             complex-amplitude (lambda, mu) schemes",
                    )
                })?;
                let full = two_mode_feedback_liouvillian(&coupling, gamma2, &built.h0, &bath, driven_dim)
                    .map_err(|e| ScenarioError::at("scheme", e))?;
                let joint = full.space().clone();
                let driven = Space::new(driven_dim).map_err(|e| ScenarioError::at("truncation.driven_dim", e))?;
                let initial = DensityMatrix::product(&[&initial_source, &DensityMatrix::vacuum(&driven)], &joint)
                    .map_err(|e| ScenarioError::at("initial", e))?;
                let lift = |ops: &[(String, Operator)]| -> Result<Vec<(String, Operator)>, ScenarioError> {
                    ops.iter()
                        .map(|(n, o)| {
                            embed(o, &joint, 0)
                                .map(|e| (n.clone(), e))
                                .map_err(|e| ScenarioError::at("outputs", e))
                        })
                        .collect()
                };
                let observables = lift(&source_observables)?;
                let variances = lift(&source_variances)?;
                let reduced_l = built.generator.clone();
                (built, full, Some(reduced_l), initial, observables, variances)
            }
            scheme => {
                let built = build_single(scheme, "scheme", &source, &bath)?;
                let g = built.generator.clone();
                (
                    built,
                    g,
                    None,
                    initial_source.clone(),
                    source_observables.clone(),
                    source_variances.clone(),
                )
            }
        };

        let scenario = Scenario {
            bath,
            source,
            generator,
            reduced,
            initial,
            initial_source,
            observables,
            variances,
            source_observables,
            source_variances,
            unraveling: built.unraveling,
            linear: built.linear,
            lindblad_targets: built.lindblad_targets,
            config,
            config_sha256: config_sha256.to_string(),
        };
        scenario.check_mode()?;
        Ok(scenario)
    }

    fn check_mode(&self) -> Result<(), ScenarioError> {
        let two_mode = self.reduced.is_some();
        match self.config.mode {
            ModeConfig::Master | ModeConfig::Steady | ModeConfig::LindbladCheck => Ok(()),
            ModeConfig::Trajectories { n, .. } => {
                if n < 2 {
                    return Err(ScenarioError::config(
                        "mode.n",
                        format!("need at least 2 trajectories, got {n}"),
                    ));
                }
                if two_mode || self.unraveling.is_none() {
                    return Err(ScenarioError::config(
                        "mode.kind",
                        format!(
                            "scheme `{}` has no trajectory unraveling (use none, intensity, \
                             quadrature, heterodyne or heterodyne-mirror-analog)",
                            self.config.scheme.kind()
                        ),
                    ));
                }
                if let Some((Unraveling::Jump { .. }, _)) = &self.unraveling {
                    if matches!(self.config.initial, InitialConfig::Thermal { .. }) {
                        return Err(ScenarioError::config(
                            "initial.kind",
                            "jump trajectories need a pure initial state",
                        ));
                    }
                }
                Ok(())
            }
            ModeConfig::Spectrum {
                omega_min,
                omega_max,
                points,
                tau,
            } => {
                if self.linear.is_none() {
                    return Err(ScenarioError::config(
                        "mode.kind",
                        "spectra need a quadrature scheme with `lambda` or a complex-amplitude \
                         scheme with `lambda` and `mu`",
                    ));
                }
                finite("mode.omega_min", omega_min)?;
                finite("mode.omega_max", omega_max)?;
                if omega_max < omega_min {
                    return Err(ScenarioError::config("mode.omega_max", "must be >= omega_min"));
                }
                if points == 0 {
                    return Err(ScenarioError::config("mode.points", "must be >= 1"));
                }
                if !(tau >= 0.0) || !tau.is_finite() {
                    return Err(ScenarioError::config("mode.tau", format!("must be >= 0, got {tau}")));
                }
                if let Some((_, mu)) = self.linear {
                    if tau > 0.0 && mu != -1.0 {
                        return Err(ScenarioError::config(
                            "mode.tau",
                            "a loop delay is only supported for quadrature feedback (mu = -1)",
                        ));
                    }
                }
                Ok(())
            }
            ModeConfig::Compare { threshold } => {
                if !two_mode {
                    return Err(ScenarioError::config(
                        "mode.kind",
                        "compare mode needs a two-mode scheme",
                    ));
                }
                if !(threshold > 0.0) || !threshold.is_finite() {
                    return Err(ScenarioError::config(
                        "mode.threshold",
                        format!("must be > 0, got {threshold}"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// The same scenario with a different mode, revalidated.
    pub fn with_mode(mut self, mode: ModeConfig) -> Result<Scenario, ScenarioError> {
        self.config.mode = mode;
        self.check_mode()?;
        Ok(self)
    }

    pub fn mode(&self) -> ModeConfig {
        self.config.mode
    }
}
