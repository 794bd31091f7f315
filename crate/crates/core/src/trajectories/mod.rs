//! Stochastic unravelings of the feedback master equations: photodetection
//! jumps with an instantaneous unitary kick, and homodyne / heterodyne
//! diffusive trajectories whose currents drive a feedback Hamiltonian.
//!
//! Within a step the measurement innovation is applied first and the
//! feedback unitary, built from the current just sampled, second. Diffusive
//! steps use the Kraus form `ρ' ∝ MρM† + dt·𝓡ρ`, which keeps conditioned
//! states positive when the bath is the vacuum.
//!
//! Seeding: trajectory `i` of an ensemble with base seed `b` uses
//! [`trajectory_seed`]`(b, i)`; each noise channel `k` of that trajectory is
//! stream `k` of a ChaCha8 generator keyed by that seed. Results therefore do
//! not depend on thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::step_count;
use crate::fock::{c, hermitize, trace_product, BathParams, CMatrix, CVector, DensityMatrix, Operator, C64, I, ZERO};
use crate::generators::{heterodyne_channels, single_cavity_liouvillian};
use crate::policy::NumericPolicy;
use crate::superop::Liouvillian;

/// Which measurement and feedback loop to simulate.
#[derive(Clone, Debug)]
pub enum Unraveling {
    /// Direct detection of `c1`; each click applies `e^{−iZ}`.
    Jump { c1: Operator, z: Operator, h0: Operator },
    /// Homodyne detection of the x quadrature, current fed back through `Y`.
    Homodyne {
        c1: Operator,
        y: Operator,
        h0: Operator,
        bath: BathParams,
    },
    /// Heterodyne detection; `I_x` drives `Y` and `I_y` drives `X`.
    Heterodyne {
        c1: Operator,
        x: Operator,
        y: Operator,
        h0: Operator,
        bath: BathParams,
    },
}

impl Unraveling {
    pub fn name(&self) -> &'static str {
        match self {
            Unraveling::Jump { .. } => "jump",
            Unraveling::Homodyne { .. } => "homodyne",
            Unraveling::Heterodyne { .. } => "heterodyne",
        }
    }

    fn c1(&self) -> &Operator {
        match self {
            Unraveling::Jump { c1, .. } | Unraveling::Homodyne { c1, .. } | Unraveling::Heterodyne { c1, .. } => c1,
        }
    }
}

/// Everything needed to run one trajectory or an ensemble.
#[derive(Clone, Debug)]
pub struct TrajectoryConfig {
    pub unraveling: Unraveling,
    pub rho0: DensityMatrix,
    pub t_final: f64,
    pub dt: f64,
    /// Sample every `stride` steps.
    pub stride: usize,
    /// `⟨op⟩` recorded at every sample.
    pub observables: Vec<(String, Operator)>,
    /// Hermitian observables whose ensemble variance is reported.
    pub variances: Vec<(String, Operator)>,
    /// Extra unmonitored damping channels added to the drift (diffusive only).
    pub unmonitored: Vec<Operator>,
    pub keep_states: bool,
    /// Most negative eigenvalue tolerated in a sampled conditioned state;
    /// `None` uses `max(1e−6, 50·dt)`.
    pub positivity_tolerance: Option<f64>,
}

impl TrajectoryConfig {
    pub fn new(unraveling: Unraveling, rho0: DensityMatrix, t_final: f64, dt: f64) -> Self {
        TrajectoryConfig {
            unraveling,
            rho0,
            t_final,
            dt,
            stride: 1,
            observables: Vec::new(),
            variances: Vec::new(),
            unmonitored: Vec::new(),
            keep_states: false,
            positivity_tolerance: None,
        }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn observe(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.observables.push((name.into(), op));
        self
    }

    pub fn observe_variance(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.variances.push((name.into(), op));
        self
    }

    pub fn unmonitored(mut self, op: Operator) -> Self {
        self.unmonitored.push(op);
        self
    }

    pub fn keep_states(mut self, keep: bool) -> Self {
        self.keep_states = keep;
        self
    }

    fn positivity_tol(&self) -> f64 {
        self.positivity_tolerance.unwrap_or((50.0 * self.dt).max(1e-6))
    }
}

/// One conditioned evolution.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub times: Vec<f64>,
    /// `(name, ⟨op⟩_c(t))` at every sample.
    pub observables: Vec<(String, Vec<C64>)>,
    /// `(⟨op⟩_c, ⟨op²⟩_c)` per sample for each variance observable.
    pub variance_moments: Vec<(String, Vec<(f64, f64)>)>,
    /// Integrated current `∫I dt` over the window ending at each sample;
    /// entry 1 is the y channel (heterodyne only).
    pub currents: Vec<[f64; 2]>,
    /// Number of detections in the window ending at each sample.
    pub jump_counts: Vec<usize>,
    pub jump_times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

/// Counter-based seed of trajectory `index`: SplitMix64 applied to
/// `base + index · 0x9E3779B97F4A7C15`. Distinct indices give distinct seeds.
pub fn trajectory_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn channel_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_operators(cfg: &TrajectoryConfig) -> Result<()> {
    let space = cfg.rho0.space();
    let tol = NumericPolicy::DEFAULT.validation;
    let same = |op: &Operator, name: &str| -> Result<()> {
        if op.space() != space {
            return Err(Error::SpaceMismatch(format!(
                "{name} lives on {} but the state on {space}",
                op.space()
            )));
        }
        Ok(())
    };
    match &cfg.unraveling {
        Unraveling::Jump { c1, z, h0 } => {
            same(c1, "c1")?;
            same(z, "Z")?;
            same(h0, "H0")?;
            z.require_hermitian("Z", tol)?;
            h0.require_hermitian("H0", tol)?;
            if !cfg.unmonitored.is_empty() {
                return Err(Error::Unsupported(
                    "unmonitored channels are only supported for diffusive unravelings".into(),
                ));
            }
        }
        Unraveling::Homodyne { c1, y, h0, bath } => {
            same(c1, "c1")?;
            same(y, "Y")?;
            same(h0, "H0")?;
            y.require_hermitian("Y", tol)?;
            h0.require_hermitian("H0", tol)?;
            if !(bath.l() > 0.0) {
                return Err(Error::Unphysical(format!(
                    "homodyne noise level L = {} must be > 0",
                    bath.l()
                )));
            }
        }
        Unraveling::Heterodyne { c1, x, y, h0, bath } => {
            same(c1, "c1")?;
            same(x, "X")?;
            same(y, "Y")?;
            same(h0, "H0")?;
            x.require_hermitian("X", tol)?;
            y.require_hermitian("Y", tol)?;
            h0.require_hermitian("H0", tol)?;
            if !(bath.l_x() > 0.0) || !(bath.l_y() > 0.0) {
                return Err(Error::Unphysical(format!(
                    "heterodyne noise levels must be > 0, got L_x = {}, L_y = {}",
                    bath.l_x(),
                    bath.l_y()
                )));
            }
        }
    }
    if let Unraveling::Homodyne { bath, .. } | Unraveling::Heterodyne { bath, .. } = &cfg.unraveling {
        if bath.beta() != ZERO {
            return Err(Error::Unsupported(
                "a coherent bath amplitude is not supported with feedback".into(),
            ));
        }
    }
    for op in &cfg.unmonitored {
        same(op, "unmonitored channel")?;
    }
    for (name, op) in cfg.observables.iter().chain(&cfg.variances) {
        same(op, name)?;
    }
    for (name, op) in &cfg.variances {
        op.require_hermitian(name, tol)?;
    }
    Ok(())
}

struct Sampler<'a> {
    cfg: &'a TrajectoryConfig,
    rec: TrajectoryRecord,
    window_current: [f64; 2],
    window_jumps: usize,
    squares: Vec<CMatrix>,
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a TrajectoryConfig, seed: u64) -> Self {
        Sampler {
            cfg,
            rec: TrajectoryRecord {
                seed,
                times: Vec::new(),
                observables: cfg.observables.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
                variance_moments: cfg.variances.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
                currents: Vec::new(),
                jump_counts: Vec::new(),
                jump_times: Vec::new(),
                states: Vec::new(),
            },
            window_current: [0.0; 2],
            window_jumps: 0,
            squares: cfg.variances.iter().map(|(_, op)| op.matrix() * op.matrix()).collect(),
        }
    }

    fn sample(&mut self, t: f64, rho: &CMatrix) -> Result<()> {
        for ((_, op), (_, series)) in self.cfg.observables.iter().zip(self.rec.observables.iter_mut()) {
            series.push(trace_product(op.matrix(), rho));
        }
        for (((_, op), sq), (_, series)) in self
            .cfg
            .variances
            .iter()
            .zip(&self.squares)
            .zip(self.rec.variance_moments.iter_mut())
        {
            series.push((trace_product(op.matrix(), rho).re, trace_product(sq, rho).re));
        }
        self.rec.times.push(t);
        self.rec.currents.push(self.window_current);
        self.rec.jump_counts.push(self.window_jumps);
        self.window_current = [0.0; 2];
        self.window_jumps = 0;
        if self.cfg.keep_states {
            self.rec.states.push(DensityMatrix::from_matrix_unchecked(
                self.cfg.rho0.space().clone(),
                rho.clone(),
            )?);
        }
        Ok(())
    }
}

/// Run one trajectory with the given seed.
pub fn run_trajectory(cfg: &TrajectoryConfig, seed: u64) -> Result<TrajectoryRecord> {
    check_operators(cfg)?;
    let steps = step_count(cfg.t_final, cfg.dt)?;
    match &cfg.unraveling {
        Unraveling::Jump { c1, z, h0 } => run_jump(cfg, c1, z, h0, steps, seed),
        _ => run_diffusive(cfg, steps, seed),
    }
}

fn pure_state(rho: &DensityMatrix) -> Result<CVector> {
    let eig = hermitize(rho.matrix()).symmetric_eigen();
    let (k, top) =
        eig.eigenvalues.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc },
        );
    if (top - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "jump unraveling needs a pure initial state (largest eigenvalue {top})"
        )));
    }
    Ok(eig.eigenvectors.column(k).into_owned())
}

fn run_jump(
    cfg: &TrajectoryConfig,
    c1: &Operator,
    z: &Operator,
    h0: &Operator,
    steps: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let dt = cfg.dt;
    let cdc = &c1.adjoint() * c1;
    let generator = &(h0 * (-I)) - &(&cdc * 0.5);
    let no_jump = (&generator * dt).exp();
    let jump = &z.unitary_exp(1.0) * c1;
    let mut psi = pure_state(&cfg.rho0)?;
    let mut rng = channel_rng(seed, 0);
    let mut sampler = Sampler::new(cfg, seed);
    let stride = cfg.stride.max(1);
    for step in 0..=steps {
        if step % stride == 0 || step == steps {
            let rho = &psi * psi.adjoint();
            sampler.sample(step as f64 * dt, &rho)?;
        }
        if step == steps {
            break;
        }
        let p = (psi.adjoint() * cdc.matrix() * &psi)[0].re * dt;
        if p > 0.1 {
            return Err(Error::StepTooLarge(format!(
                "jump probability {p:.3} per step at t = {} exceeds 0.1; reduce dt",
                step as f64 * dt
            )));
        }
        let u: f64 = rng.random();
        psi = if u < p {
            sampler.window_jumps += 1;
            sampler.rec.jump_times.push((step + 1) as f64 * dt);
            jump.matrix() * &psi
        } else {
            no_jump.matrix() * &psi
        };
        let norm = psi.norm();
        psi /= c(norm);
    }
    Ok(sampler.rec)
}

/// One measured channel: scaled measurement operator `C̃ = C/σ`, current noise
/// level `σ` and the Hermitian operator its current drives.
struct Channel {
    scaled: CMatrix,
    /// `√L` (homodyne) or `√(2L)` (heterodyne).
    noise: f64,
    feedback: CMatrix,
    /// Operator whose mean is the current's signal.
    signal: CMatrix,
}

fn run_diffusive(cfg: &TrajectoryConfig, steps: usize, seed: u64) -> Result<TrajectoryRecord> {
    let space = cfg.rho0.space().clone();
    let d = space.dim();
    let dt = cfg.dt;
    let c1 = cfg.unraveling.c1();
    let channel = |op: &Operator, noise: f64, feedback: &Operator, signal: Operator| Channel {
        scaled: op.matrix() * c(1.0 / noise),
        noise,
        feedback: feedback.matrix().clone(),
        signal: signal.matrix().clone(),
    };
    let (h0, bath, channels) = match &cfg.unraveling {
        Unraveling::Homodyne { c1, y, h0, bath } => {
            let (cx, _) = heterodyne_channels(c1, bath);
            let ch = channel(&cx, bath.l().sqrt(), y, c1 + &c1.adjoint());
            (h0, bath, vec![ch])
        }
        Unraveling::Heterodyne { c1, x, y, h0, bath } => {
            let (cx, cy) = heterodyne_channels(c1, bath);
            let cd = c1.adjoint();
            let chx = channel(&cx, (2.0 * bath.l_x()).sqrt(), y, c1 + &cd);
            let chy = channel(&cy, (2.0 * bath.l_y()).sqrt(), x, &(c1 * (-I)) + &(&cd * I));
            (h0, bath, vec![chx, chy])
        }
        Unraveling::Jump { .. } => unreachable!("jump unraveling handled separately"),
    };

    // ρ' ∝ MρM† + dt·𝓡ρ with M = e^{K dt} + Σ C̃_k dY_k,
    // K = −iH0 − ½ Σ C̃†C̃ and 𝓡 the rest of the unconditioned generator
    let mut k_gen = h0.matrix() * (-I);
    for ch in &channels {
        k_gen -= ch.scaled.adjoint() * &ch.scaled * c(0.5);
    }
    let no_click = (k_gen * c(dt)).exp();
    let mut rb = Liouvillian::builder(&space, "remainder");
    rb.extend(&single_cavity_liouvillian(c1, 1.0, bath, h0)?)?;
    rb.hamiltonian(&(h0 * -1.0));
    for ch in &channels {
        rb.dissipator(-1.0, &Operator::new(space.clone(), ch.scaled.clone())?);
    }
    for op in &cfg.unmonitored {
        rb.dissipator(1.0, op);
    }
    let remainder = rb.build();
    let remainder = (remainder.max_abs() > 1e-13).then_some(remainder);

    // a homodyne loop has a single feedback operator: diagonalize it once
    let fixed_basis = if channels.len() == 1 {
        Some(hermitize(&channels[0].feedback).symmetric_eigen())
    } else {
        None
    };

    let tol = cfg.positivity_tol();
    let mut rngs: Vec<ChaCha8Rng> = (0..channels.len() as u64).map(|k| channel_rng(seed, k)).collect();
    let mut rho = cfg.rho0.matrix().clone();
    let mut v = CVector::zeros(d * d);
    let mut lv = CVector::zeros(d * d);
    let mut sampler = Sampler::new(cfg, seed);
    let stride = cfg.stride.max(1);
    let sqrt_dt = dt.sqrt();

    for step in 0..=steps {
        if step % stride == 0 || step == steps {
            let min = hermitize(&rho).symmetric_eigenvalues().min();
            if min < -tol {
                return Err(Error::PositivityFailure {
                    seed,
                    step,
                    min_eigenvalue: min,
                });
            }
            sampler.sample(step as f64 * dt, &rho)?;
        }
        if step == steps {
            break;
        }
        let mut m = no_click.clone();
        let mut kicks = [0.0f64; 2];
        for (k, ch) in channels.iter().enumerate() {
            let dw: f64 = rngs[k].sample::<f64, _>(StandardNormal) * sqrt_dt;
            let mean = trace_product(&ch.signal, &rho).re;
            let increment = mean * dt + ch.noise * dw;
            m += &ch.scaled * c(increment / ch.noise);
            kicks[k] = increment;
            sampler.window_current[k] += increment;
        }
        let mut next = &m * &rho * m.adjoint();
        if let Some(r) = &remainder {
            v.copy_from_slice(rho.as_slice());
            r.apply_into(&v, &mut lv);
            next += CMatrix::from_column_slice(d, d, lv.as_slice()) * c(dt);
        }
        let u = match &fixed_basis {
            Some(eig) => unitary_from_eigen(eig, kicks[0]),
            None => {
                let h = &channels[0].feedback * c(kicks[0]) + &channels[1].feedback * c(kicks[1]);
                unitary_from_eigen(&hermitize(&h).symmetric_eigen(), 1.0)
            }
        };
        next = &u * next * u.adjoint();
        let tr = next.trace();
        rho = hermitize(&(next / tr));
    }
    Ok(sampler.rec)
}

fn unitary_from_eigen(eig: &nalgebra::SymmetricEigen<C64, nalgebra::Dyn>, theta: f64) -> CMatrix {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &e) in eig.eigenvalues.iter().enumerate() {
        let p = (-I * (theta * e)).exp();
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= p);
    }
    scaled * v.adjoint()
}

pub fn jump_trajectory(
    c1: &Operator,
    z: &Operator,
    h0: &Operator,
    psi0: &CVector,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let rho0 = DensityMatrix::from_pure(c1.space(), psi0)?;
    let cfg = TrajectoryConfig::new(
        Unraveling::Jump {
            c1: c1.clone(),
            z: z.clone(),
            h0: h0.clone(),
        },
        rho0,
        t_final,
        dt,
    )
    .keep_states(true);
    run_trajectory(&cfg, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn homodyne_trajectory(
    c1: &Operator,
    y: &Operator,
    h0: &Operator,
    bath: &BathParams,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let cfg = TrajectoryConfig::new(
        Unraveling::Homodyne {
            c1: c1.clone(),
            y: y.clone(),
            h0: h0.clone(),
            bath: *bath,
        },
        rho0.clone(),
        t_final,
        dt,
    )
    .keep_states(true);
    run_trajectory(&cfg, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn heterodyne_trajectory(
    c1: &Operator,
    x: &Operator,
    y: &Operator,
    h0: &Operator,
    bath: &BathParams,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let cfg = TrajectoryConfig::new(
        Unraveling::Heterodyne {
            c1: c1.clone(),
            x: x.clone(),
            y: y.clone(),
            h0: h0.clone(),
            bath: *bath,
        },
        rho0.clone(),
        t_final,
        dt,
    )
    .keep_states(true);
    run_trajectory(&cfg, seed)
}

/// Ensemble mean and standard error of one quantity over sample times.
#[derive(Clone, Debug)]
pub struct SeriesStats {
    pub name: String,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Ensemble statistics over independent trajectories.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub count: usize,
    pub seeds: Vec<u64>,
    /// Real parts of the requested expectation values.
    pub observables: Vec<SeriesStats>,
    /// Imaginary parts, named like `observables`.
    pub observables_imag: Vec<SeriesStats>,
    /// `E⟨op²⟩ − (E⟨op⟩)²` with delta-method standard errors.
    pub variances: Vec<SeriesStats>,
    /// Window-averaged current `∫I dt / Δt` (x then y channel).
    pub currents: Vec<SeriesStats>,
    pub mean_jumps: f64,
}

impl EnsembleStats {
    pub fn observable(&self, name: &str) -> Option<&SeriesStats> {
        self.observables.iter().find(|s| s.name == name)
    }

    pub fn variance(&self, name: &str) -> Option<&SeriesStats> {
        self.variances.iter().find(|s| s.name == name)
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Run `n_traj` trajectories in parallel and reduce them in index order.
pub fn ensemble_average(cfg: &TrajectoryConfig, n_traj: usize, base_seed: u64) -> Result<EnsembleStats> {
    let records = run_ensemble(cfg, n_traj, base_seed)?;
    Ok(reduce(&records, cfg))
}

/// All trajectory records of an ensemble, in index order.
pub fn run_ensemble(cfg: &TrajectoryConfig, n_traj: usize, base_seed: u64) -> Result<Vec<TrajectoryRecord>> {
    if n_traj < 2 {
        return Err(Error::InvalidArgument(format!(
            "an ensemble needs at least 2 trajectories, got {n_traj}"
        )));
    }
    check_operators(cfg)?;
    let slim = TrajectoryConfig {
        keep_states: false,
        ..cfg.clone()
    };
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&slim, trajectory_seed(base_seed, i)))
        .collect()
}

fn reduce(records: &[TrajectoryRecord], cfg: &TrajectoryConfig) -> EnsembleStats {
    let first = &records[0];
    let times = first.times.clone();
    let ns = times.len();
    let column = |f: &dyn Fn(&TrajectoryRecord, usize) -> f64| -> (Vec<f64>, Vec<f64>) {
        let mut mean = Vec::with_capacity(ns);
        let mut se = Vec::with_capacity(ns);
        let mut buf = vec![0.0; records.len()];
        for k in 0..ns {
            for (b, r) in buf.iter_mut().zip(records) {
                *b = f(r, k);
            }
            let (m, s) = mean_and_se(&buf);
            mean.push(m);
            se.push(s);
        }
        (mean, se)
    };

    let mut observables = Vec::new();
    let mut observables_imag = Vec::new();
    for (j, (name, _)) in cfg.observables.iter().enumerate() {
        let (mean, std_error) = column(&|r, k| r.observables[j].1[k].re);
        observables.push(SeriesStats {
            name: name.clone(),
            mean,
            std_error,
        });
        let (mean, std_error) = column(&|r, k| r.observables[j].1[k].im);
        observables_imag.push(SeriesStats {
            name: name.clone(),
            mean,
            std_error,
        });
    }

    let mut variances = Vec::new();
    for (j, (name, _)) in cfg.variances.iter().enumerate() {
        let (m1, _) = column(&|r, k| r.variance_moments[j].1[k].0);
        let (m2, _) = column(&|r, k| r.variance_moments[j].1[k].1);
        let mean: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| b - a * a).collect();
        // delta method: V = m2 − m1², gradient (−2m1, 1)
        let (_, std_error) = column(&|r, k| {
            let (p, q) = r.variance_moments[j].1[k];
            q - 2.0 * m1[k] * p
        });
        variances.push(SeriesStats {
            name: name.clone(),
            mean,
            std_error,
        });
    }

    let mut currents = Vec::new();
    let n_channels = match cfg.unraveling {
        Unraveling::Jump { .. } => 0,
        Unraveling::Homodyne { .. } => 1,
        Unraveling::Heterodyne { .. } => 2,
    };
    for (ch, name) in ["I_x", "I_y"].iter().enumerate().take(n_channels) {
        let (mean, std_error) = column(&|r, k| {
            let window = if k == 0 { 0.0 } else { r.times[k] - r.times[k - 1] };
            if window > 0.0 {
                r.currents[k][ch] / window
            } else {
                0.0
            }
        });
        currents.push(SeriesStats {
            name: name.to_string(),
            mean,
            std_error,
        });
    }

    let total_jumps: usize = records.iter().map(|r| r.jump_times.len()).sum();
    EnsembleStats {
        times,
        count: records.len(),
        seeds: records.iter().map(|r| r.seed).collect(),
        observables,
        observables_imag,
        variances,
        currents,
        mean_jumps: total_jumps as f64 / records.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, make_space, number, quadratures, ONE};

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| trajectory_seed(7, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(trajectory_seed(7, 3), trajectory_seed(7, 3));
        assert_ne!(trajectory_seed(7, 0), trajectory_seed(8, 0));
    }

    #[test]
    fn post_jump_state_from_single_photon() {
        let s = make_space(4).unwrap();
        let a = annihilation(&s).unwrap();
        let (x, _) = quadratures(&s).unwrap();
        let z = &x * 0.7;
        let mut psi = CVector::zeros(4);
        psi[1] = ONE;
        // one step of 0.05 from |1⟩: click probability 0.05; run until the first click
        for seed in 0..200 {
            let r = jump_trajectory(&a, &z, &Operator::zeros(&s), &psi, 0.05, 0.05, seed).unwrap();
            if !r.jump_times.is_empty() {
                let mut vac = CVector::zeros(4);
                vac[0] = ONE;
                let expected = z.unitary_exp(1.0).matrix() * vac;
                let out = r.states.last().unwrap().matrix();
                let target = &expected * expected.adjoint();
                assert!((out - target).norm() < 1e-12);
                assert!((out.trace() - ONE).norm() < 1e-12);
                return;
            }
        }
        panic!("no click in 200 seeds");
    }

    #[test]
    fn jump_step_too_large() {
        let s = make_space(6).unwrap();
        let a = annihilation(&s).unwrap();
        let mut psi = CVector::zeros(6);
        psi[5] = ONE;
        let r = jump_trajectory(&a, &Operator::zeros(&s), &Operator::zeros(&s), &psi, 0.1, 0.05, 1);
        assert!(matches!(r, Err(Error::StepTooLarge(_))));
    }

    #[test]
    fn global_phase_kick_gives_identical_clicks() {
        let s = make_space(5).unwrap();
        let a = annihilation(&s).unwrap();
        let psi = crate::fock::coherent_vector(&s, C64::new(1.0, 0.3)).unwrap();
        let zero = Operator::zeros(&s);
        let phase = &Operator::identity(&s) * 1.3;
        for seed in 0..5 {
            let r0 = jump_trajectory(&a, &zero, &zero, &psi, 2.0, 0.01, seed).unwrap();
            let r1 = jump_trajectory(&a, &phase, &zero, &psi, 2.0, 0.01, seed).unwrap();
            assert_eq!(r0.jump_times, r1.jump_times);
        }
    }

    #[test]
    fn homodyne_conditioned_state_stays_normalized() {
        let s = make_space(8).unwrap();
        let a = annihilation(&s).unwrap();
        let (_, y) = quadratures(&s).unwrap();
        let rho0 = DensityMatrix::coherent(&s, C64::new(0.5, 0.0)).unwrap();
        let r = homodyne_trajectory(
            &a,
            &(&y * -0.5),
            &Operator::zeros(&s),
            &BathParams::vacuum(),
            &rho0,
            0.5,
            1e-3,
            4,
        )
        .unwrap();
        for st in &r.states {
            assert!((st.trace() - ONE).norm() < 1e-9);
        }
        assert!(r.currents.iter().all(|c| c[0].is_finite()));
    }

    #[test]
    fn squeezed_bath_runs_below_vacuum_noise() {
        let s = make_space(4).unwrap();
        let a = annihilation(&s).unwrap();
        let bound = (0.5f64 * 1.5).sqrt();
        let bath = BathParams::squeezed(0.5, c(-bound)).unwrap();
        assert!(bath.l() > 0.0 && bath.l() < 1.0);
        let zero = Operator::zeros(&s);
        let rho0 = DensityMatrix::vacuum(&s);
        assert!(homodyne_trajectory(&a, &zero, &zero, &bath, &rho0, 0.01, 1e-3, 0).is_ok());
    }

    #[test]
    fn ensemble_is_deterministic() {
        let s = make_space(6).unwrap();
        let a = annihilation(&s).unwrap();
        let (x, _) = quadratures(&s).unwrap();
        let cfg = TrajectoryConfig::new(
            Unraveling::Jump {
                c1: a.clone(),
                z: &x * 0.3,
                h0: Operator::zeros(&s),
            },
            DensityMatrix::coherent(&s, C64::new(1.0, 0.0)).unwrap(),
            0.5,
            0.01,
        )
        .stride(10)
        .observe("n", number(&s).unwrap())
        .observe_variance("x", x);
        let e1 = ensemble_average(&cfg, 16, 99).unwrap();
        let e2 = ensemble_average(&cfg, 16, 99).unwrap();
        assert_eq!(e1.observables[0].mean, e2.observables[0].mean);
        assert_eq!(e1.variances[0].mean, e2.variances[0].mean);
        assert_eq!(e1.times.len(), 6);
        assert!(ensemble_average(&cfg, 1, 0).is_err());
    }
}
