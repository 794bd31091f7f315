//! Deterministic integration of master equations, steady states and
//! variance growth fits.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::fock::{c, hermiticity_error, quadratures, trace_product, CMatrix, CVector, DensityMatrix, Operator, C64};
use crate::policy::NumericPolicy;
use crate::superop::Liouvillian;

/// Sampled solution of a master equation.
#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// `(name, ⟨op⟩(t))` for every requested observable.
    pub observables: Vec<(String, Vec<C64>)>,
    /// Largest top-two-level population seen at any sample.
    pub boundary_leakage: f64,
    /// Largest `|Tr ρ − 1|` seen at any sample.
    pub max_trace_drift: f64,
    /// True if `boundary_leakage` exceeded the policy threshold.
    pub leakage_flagged: bool,
}

impl EvolutionResult {
    pub fn observable(&self, name: &str) -> Option<&[C64]> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// `⟨op⟩` at every stored sample.
    pub fn expect(&self, op: &Operator) -> Result<Vec<C64>> {
        self.states.iter().map(|s| crate::fock::expect(op, s)).collect()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("an evolution stores at least the initial state")
    }
}

/// Integration settings for [`propagate_with`].
#[derive(Clone, Debug)]
pub struct PropagateOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Keep every `stride`-th step (the initial state is always kept).
    pub stride: usize,
    /// Observables evaluated at every kept sample.
    pub observables: Vec<(String, Operator)>,
    /// Store the sampled density matrices (observables are kept regardless).
    pub keep_states: bool,
    pub policy: NumericPolicy,
}

impl PropagateOptions {
    pub fn new(t_final: f64, dt: f64) -> PropagateOptions {
        PropagateOptions {
            t_final,
            dt,
            stride: 1,
            observables: Vec::new(),
            keep_states: true,
            policy: NumericPolicy::DEFAULT,
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

    pub fn keep_states(mut self, keep: bool) -> Self {
        self.keep_states = keep;
        self
    }
}

/// Number of fixed steps covering `[0, t_final]`.
pub(crate) fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("t_final must be >= 0, got {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "t_final = {t_final} is not a whole number of steps dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Classical RK4 with step `dt`, storing every step.
pub fn propagate(l: &Liouvillian, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<EvolutionResult> {
    propagate_with(l, rho0, &PropagateOptions::new(t_final, dt))
}

pub fn propagate_with(l: &Liouvillian, rho0: &DensityMatrix, opts: &PropagateOptions) -> Result<EvolutionResult> {
    if rho0.space() != l.space() {
        return Err(Error::SpaceMismatch(format!(
            "initial state on {} but generator on {}",
            rho0.space(),
            l.space()
        )));
    }
    for (name, op) in &opts.observables {
        if op.space() != l.space() {
            return Err(Error::SpaceMismatch(format!(
                "observable {name} lives on {}",
                op.space()
            )));
        }
    }
    rho0.validate(opts.policy.validation)?;
    let steps = step_count(opts.t_final, opts.dt)?;
    let stride = opts.stride.max(1);
    let space = l.space().clone();
    let d = space.dim();
    let dt = opts.dt;

    let mut out = EvolutionResult {
        times: Vec::new(),
        states: Vec::new(),
        observables: opts.observables.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
        boundary_leakage: 0.0,
        max_trace_drift: 0.0,
        leakage_flagged: false,
    };

    let mut v = rho0.to_vec();
    let n = v.len();
    let (mut k1, mut k2, mut k3, mut k4) = (
        CVector::zeros(n),
        CVector::zeros(n),
        CVector::zeros(n),
        CVector::zeros(n),
    );
    let mut tmp = CVector::zeros(n);
    let half = c(0.5 * dt);
    let full = c(dt);
    let sixth = c(dt / 6.0);

    for step in 0..=steps {
        if step % stride == 0 || step == steps {
            let t = step as f64 * dt;
            let rho =
                DensityMatrix::from_matrix_unchecked(space.clone(), CMatrix::from_column_slice(d, d, v.as_slice()))?;
            record(&mut out, rho, t, opts)?;
        }
        if step == steps {
            break;
        }
        l.apply_into(&v, &mut k1);
        tmp.copy_from(&v);
        tmp.axpy(half, &k1, ONE_C);
        l.apply_into(&tmp, &mut k2);
        tmp.copy_from(&v);
        tmp.axpy(half, &k2, ONE_C);
        l.apply_into(&tmp, &mut k3);
        tmp.copy_from(&v);
        tmp.axpy(full, &k3, ONE_C);
        l.apply_into(&tmp, &mut k4);
        k2 *= c(2.0);
        k3 *= c(2.0);
        k1 += &k2;
        k1 += &k3;
        k1 += &k4;
        v.axpy(sixth, &k1, ONE_C);
    }
    out.leakage_flagged = out.boundary_leakage > opts.policy.leakage_warn;
    Ok(out)
}

const ONE_C: C64 = C64::new(1.0, 0.0);

fn record(out: &mut EvolutionResult, rho: DensityMatrix, t: f64, opts: &PropagateOptions) -> Result<()> {
    let tol = opts.policy.invariant_abort;
    let drift = (rho.trace() - ONE_C).norm();
    out.max_trace_drift = out.max_trace_drift.max(drift);
    if drift > tol {
        return Err(Error::InvariantViolation {
            time: t,
            detail: format!("trace drifted by {drift:e}"),
        });
    }
    let herm = hermiticity_error(rho.matrix());
    if herm > tol {
        return Err(Error::InvariantViolation {
            time: t,
            detail: format!("Hermiticity lost (max |ρ − ρ†| = {herm:e})"),
        });
    }
    let min = rho.min_eigenvalue();
    if min < -tol {
        return Err(Error::InvariantViolation {
            time: t,
            detail: format!("negative eigenvalue {min:e}"),
        });
    }
    out.boundary_leakage = out.boundary_leakage.max(rho.boundary_population());
    for ((_, op), (_, series)) in opts.observables.iter().zip(out.observables.iter_mut()) {
        series.push(trace_product(op.matrix(), rho.matrix()));
    }
    out.times.push(t);
    if opts.keep_states {
        out.states.push(rho.hermitized());
    }
    Ok(())
}

/// Stationary state with solver diagnostics.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: DensityMatrix,
    /// Second-smallest singular value of the generator.
    pub singular_gap: f64,
    /// `‖𝓛 vec(ρ_ss)‖`.
    pub residual: f64,
    pub boundary_leakage: f64,
}

/// Unique stationary state of `l` from the null space of its SVD.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    Ok(steady_state_with(l, &NumericPolicy::DEFAULT)?.state)
}

pub fn steady_state_with(l: &Liouvillian, policy: &NumericPolicy) -> Result<SteadyState> {
    let space = l.space().clone();
    let d = space.dim();
    let svd = SVD::new(l.to_dense(), false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let gap = sv[order[1]];
    if gap <= policy.singular_gap {
        return Err(Error::NoUniqueSteadyState { second_smallest: gap });
    }
    let null = v_t.row(order[0]).adjoint();
    let m = CMatrix::from_column_slice(d, d, null.as_slice());
    let tr = m.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::NoUniqueSteadyState { second_smallest: gap });
    }
    let m = crate::fock::hermitize(&(m / tr));
    let state = DensityMatrix::from_matrix_unchecked(space, m)?;
    let residual = l.apply(&state.to_vec()).norm();
    let boundary_leakage = state.boundary_population();
    Ok(SteadyState {
        state,
        singular_gap: gap,
        residual,
        boundary_leakage,
    })
}

/// Least-squares straight line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LinearFit {
    /// Growth counts as linear when `R² ≥ 0.99`.
    pub fn is_linear(&self) -> bool {
        self.r_squared >= 0.99
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "a line fit needs at least two paired samples".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("line fit over a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot <= 1e-30 * n {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Line fits of `V(x)(t)` and `V(y)(t)`.
#[derive(Clone, Copy, Debug)]
pub struct VarianceGrowth {
    pub x: LinearFit,
    pub y: LinearFit,
}

/// Evolve from `rho0` and fit the quadrature variances over `window`.
pub fn variance_growth_rate(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    window: (f64, f64),
    dt: f64,
) -> Result<VarianceGrowth> {
    let (t0, t1) = window;
    if !(t0 >= 0.0 && t1 > t0) {
        return Err(Error::InvalidArgument(format!("bad window [{t0}, {t1}]")));
    }
    let (x, y) = quadratures(l.space())?;
    let opts = PropagateOptions::new(t1, dt)
        .stride(((t1 / dt) as usize / 200).max(1))
        .observe("x", x.clone())
        .observe("x2", &x * &x)
        .observe("y", y.clone())
        .observe("y2", &y * &y)
        .keep_states(false);
    let ev = propagate_with(l, rho0, &opts)?;
    let var = |m: &str, m2: &str| -> Vec<f64> {
        let a = ev.observable(m).unwrap();
        let b = ev.observable(m2).unwrap();
        a.iter().zip(b).map(|(p, q)| q.re - p.re * p.re).collect()
    };
    let (vx, vy) = (var("x", "x2"), var("y", "y2"));
    let mut ts = Vec::new();
    let (mut fx, mut fy) = (Vec::new(), Vec::new());
    for (i, &t) in ev.times.iter().enumerate() {
        if t >= t0 - 1e-12 && t <= t1 + 1e-12 {
            ts.push(t);
            fx.push(vx[i]);
            fy.push(vy[i]);
        }
    }
    Ok(VarianceGrowth {
        x: linear_fit(&ts, &fx)?,
        y: linear_fit(&ts, &fy)?,
    })
}
