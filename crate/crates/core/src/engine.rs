//! Steepest-entropy-ascent equation of motion.
//!
//! With `L = B̂ ln ρ` and the real scalar product `(F|G) = ½ tr ρ{F, G}`,
//! a state carries the moments `⟨e⟩ = tr ρH`, `⟨s⟩ = −tr ρL`,
//! `⟨es⟩ = −(L|H)`, `⟨e²⟩ = tr ρH²`, `⟨s²⟩ = tr ρL²` and the fluctuations
//! `A_ee`, `A_se`, `A_ss`. The isolated dissipator is
//!
//! ```text
//! D = (1/τ) (ρL − (β⟨e⟩ − ⟨s⟩) ρ + (β/2){H, ρ}),   β = A_se / A_ee,
//! ```
//!
//! and `dρ/dt = −(i/ħ)[H, ρ] − D`. Coupling to a reservoir replaces `β` by
//! the fixed `β_R`. The combination `β⟨f⟩ = β⟨e⟩ − ⟨s⟩` is used throughout
//! instead of `⟨f⟩ = ⟨e⟩ − ⟨s⟩/β` so that `β = 0` is regular.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hermitian::{eig_unchecked, DensityMatrix, Operator, Spectrum, C64};

/// Default relative threshold below which the energy variance is treated as zero.
pub const DEFAULT_DEGENERACY_EPSILON: f64 = 1e-12;
/// Integrator aborts when an eigenvalue falls below this after a step.
pub const HYGIENE_ABORT_EIGENVALUE: f64 = -1e-8;
/// Integrator aborts when the trace drifts further than this in one step.
pub const HYGIENE_ABORT_TRACE: f64 = 1e-8;

/// A Hamiltonian prepared for repeated use: `H²` is cached and `Hρ` is
/// evaluated through the nonzero pattern of `H` (toric Hamiltonians have at
/// most five nonzeros per row).
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    op: Operator,
    squared: Operator,
    rows: Vec<Vec<(usize, C64)>>,
}

impl Hamiltonian {
    pub fn new(op: Operator) -> Result<Self> {
        op.check_hermitian()?;
        let op = op.hermitize();
        let squared = op.matmul(&op);
        let dim = op.dim();
        let rows = (0..dim)
            .map(|i| {
                (0..dim)
                    .filter_map(|k| {
                        let h = op.get(i, k);
                        (h != C64::new(0.0, 0.0)).then_some((k, h))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { op, squared, rows })
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn squared(&self) -> &Operator {
        &self.squared
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `H · m`.
    pub fn apply_left(&self, m: &Operator) -> Operator {
        let rows = &self.rows;
        Operator::from_fn(m.dim(), |i, j| rows[i].iter().fold(C64::new(0.0, 0.0), |acc, &(k, h)| acc + h * m.get(k, j)))
    }

    fn check_dim(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), found: rho.dim() })
        }
    }
}

/// Expectation values and fluctuations of one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub e: f64,
    pub s: f64,
    pub es: f64,
    pub e2: f64,
    pub s2: f64,
    pub a_se: f64,
    pub a_ee: f64,
    pub a_ss: f64,
    /// Non-equilibrium `β = A_se / A_ee`; `None` when the energy variance is
    /// below the degeneracy threshold.
    pub beta: Option<f64>,
    /// `β` entering the dissipator: the state's own `β`, the reservoir's
    /// `β_R`, or 0 when the energy constraint is dropped.
    pub beta_eff: f64,
    /// `β_eff ⟨f⟩ = β_eff ⟨e⟩ − ⟨s⟩`.
    pub beta_f: f64,
    /// `⟨f⟩ = ⟨e⟩ − ⟨s⟩/β_eff`; `None` when `β_eff = 0`.
    pub f: Option<f64>,
    /// `A_fs = (⟨es⟩ − ⟨s²⟩/β_eff) − ⟨f⟩⟨s⟩`; `None` when `β_eff = 0`.
    pub a_fs: Option<f64>,
    /// `−β_eff A_fs = A_ss − β_eff A_se ≥ 0`; equals `τ d⟨s⟩/dt`.
    pub entropy_production: f64,
}

impl Moments {
    pub fn is_energy_degenerate(&self) -> bool {
        self.beta.is_none()
    }

    /// `⟨f⟩ = ⟨e⟩ − ⟨s⟩/β` at the state's own `β`.
    pub fn free_energy(&self) -> Option<f64> {
        self.beta.filter(|&b| b != 0.0).map(|b| self.e - self.s / b)
    }
}

/// Entropy spectrum sums: `(⟨s⟩, ⟨s²⟩)`.
fn entropy_sums(rho: &DensityMatrix) -> (f64, f64) {
    let log = rho.projected_log();
    if let Some(flat) = log.flat {
        let t = rho.trace();
        return (-flat * t, flat * flat * t);
    }
    let (mut s, mut s2) = (0.0, 0.0);
    for (&l, &g) in rho.eigenvalues().iter().zip(&log.values) {
        s -= l * g;
        s2 += l * g * g;
    }
    (s, s2)
}

fn assemble_moments(
    e: f64,
    e2: f64,
    s: f64,
    s2: f64,
    es: f64,
    beta_override: Option<f64>,
    degeneracy_epsilon: f64,
) -> Moments {
    let a_ee = e2 - e * e;
    let a_se = es - e * s;
    let a_ss = s2 - s * s;
    let degenerate = a_ee < degeneracy_epsilon * (1.0 + e * e);
    let beta = if degenerate { None } else { Some(a_se / a_ee) };
    let beta_eff = match beta_override {
        Some(b) => b,
        None => beta.unwrap_or(0.0),
    };
    let (f, a_fs) = if beta_eff != 0.0 {
        let f = e - s / beta_eff;
        (Some(f), Some((es - s2 / beta_eff) - f * s))
    } else {
        (None, None)
    };
    Moments {
        e,
        s,
        es,
        e2,
        s2,
        a_se,
        a_ee,
        a_ss,
        beta,
        beta_eff,
        beta_f: beta_eff * e - s,
        f,
        a_fs,
        entropy_production: a_ss - beta_eff * a_se,
    }
}

/// Moments of `rho` with respect to `h`; `beta_override` fixes `β_eff`
/// (reservoir coupling).
pub fn moments(rho: &DensityMatrix, h: &Hamiltonian, beta_override: Option<f64>) -> Result<Moments> {
    moments_with_epsilon(rho, h, beta_override, DEFAULT_DEGENERACY_EPSILON)
}

pub fn moments_with_epsilon(
    rho: &DensityMatrix,
    h: &Hamiltonian,
    beta_override: Option<f64>,
    degeneracy_epsilon: f64,
) -> Result<Moments> {
    h.check_dim(rho)?;
    Ok(Kernel::new(rho, h, beta_override, degeneracy_epsilon).moments)
}

/// Shared intermediate products of one evaluation.
struct Kernel {
    moments: Moments,
    /// `H ρ`
    h_rho: Operator,
    /// `ρ B̂ ln ρ`
    rho_log_rho: Operator,
}

impl Kernel {
    fn new(rho: &DensityMatrix, h: &Hamiltonian, beta_override: Option<f64>, degeneracy_epsilon: f64) -> Self {
        let h_rho = h.apply_left(rho.op());
        let rho_log_rho = rho.rho_log_rho();
        let e = h_rho.real_trace();
        let e2 = rho.op().trace_product(h.squared()).re;
        let es = -rho_log_rho.trace_product(h.op()).re;
        let (s, s2) = entropy_sums(rho);
        let moments = assemble_moments(e, e2, s, s2, es, beta_override, degeneracy_epsilon);
        Self { moments, h_rho, rho_log_rho }
    }

    /// `(1/τ)(ρL − β_eff⟨f⟩ ρ + (β_eff/2){H, ρ})`.
    fn dissipator(&self, rho: &DensityMatrix, tau: f64) -> Operator {
        let b = self.moments.beta_eff;
        let c = -self.moments.beta_f;
        let (rl, hr, r) = (&self.rho_log_rho, &self.h_rho, rho.op());
        let d = Operator::from_fn(r.dim(), |i, j| {
            let anti = hr.get(i, j) + hr.get(j, i).conj();
            (rl.get(i, j) + r.get(i, j) * c + anti * (0.5 * b)) / tau
        });
        d.hermitize()
    }

    /// `−(i/ħ)[H, ρ]`.
    fn symplectic(&self, hbar: f64) -> Operator {
        let hr = &self.h_rho;
        Operator::from_fn(hr.dim(), |i, j| {
            let comm = hr.get(i, j) - hr.get(j, i).conj();
            C64::new(comm.im, -comm.re) / hbar
        })
    }
}

/// Isolated-system dissipator. When `A_ee < ε(1 + ⟨e⟩²)` the energy
/// generator is dropped and `D = (1/τ)(ρL + ⟨s⟩ρ)`.
pub fn dissipator_isolated(
    rho: &DensityMatrix,
    h: &Hamiltonian,
    tau: f64,
    degeneracy_epsilon: f64,
) -> Result<Operator> {
    h.check_dim(rho)?;
    Ok(Kernel::new(rho, h, None, degeneracy_epsilon).dissipator(rho, tau))
}

/// Dissipator built literally from the Gram-determinant construction:
/// `E_D` is the component of `√ρ L` orthogonal to `span{√ρ, √ρ H}` (inner
/// product `Re tr F†G`), scaled by `1/2τ`, and `D = √ρ E_D + E_D† √ρ`.
///
/// Independent of [`dissipator_isolated`] except for the shared eigensolver;
/// used as an oracle.
pub fn dissipator_determinant_oracle(
    rho: &DensityMatrix,
    h: &Hamiltonian,
    tau: f64,
    degeneracy_epsilon: f64,
) -> Result<Operator> {
    h.check_dim(rho)?;
    let sqrt_rho = rho.sqrt();
    let x1 = sqrt_rho.matmul(&rho.log_projected());
    let x2 = sqrt_rho.clone();
    let x3 = sqrt_rho.matmul(h.op());
    let inner = |a: &Operator, b: &Operator| a.adjoint().trace_product(b).re;
    let (g21, g22, g23) = (inner(&x2, &x1), inner(&x2, &x2), inner(&x2, &x3));
    let (g31, g32, g33) = (inner(&x3, &x1), inner(&x3, &x2), inner(&x3, &x3));
    let gram = g22 * g33 - g23 * g32;
    if gram <= degeneracy_epsilon * (1.0 + g23 * g23) {
        return Err(Error::LinearlyDependent { gram });
    }
    let a = (g21 * g33 - g23 * g31) / gram;
    let b = (g22 * g31 - g32 * g21) / gram;
    let e_d = x1.add_scaled(-a, &x2).add_scaled(-b, &x3).scale(1.0 / (2.0 * tau));
    let d = &sqrt_rho.matmul(&e_d) + &e_d.adjoint().matmul(&sqrt_rho);
    Ok(d)
}

/// Reduced-state dissipator: the isolated form with local moments of
/// `rho_j` under the local Hamiltonian `h_j`.
pub fn local_dissipator(
    rho_j: &DensityMatrix,
    h_j: &Hamiltonian,
    tau_j: f64,
    degeneracy_epsilon: f64,
) -> Result<Operator> {
    dissipator_isolated(rho_j, h_j, tau_j, degeneracy_epsilon)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingMode {
    Isolated,
    Reservoir { beta_r: f64 },
}

impl CouplingMode {
    pub fn beta_override(&self) -> Option<f64> {
        match *self {
            CouplingMode::Isolated => None,
            CouplingMode::Reservoir { beta_r } => Some(beta_r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsParams {
    pub tau: f64,
    pub hbar: f64,
    pub mode: CouplingMode,
    pub dt: f64,
    pub t_end: f64,
    pub degeneracy_epsilon: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            hbar: 1.0,
            mode: CouplingMode::Isolated,
            dt: 1e-3,
            t_end: 20.0,
            degeneracy_epsilon: DEFAULT_DEGENERACY_EPSILON,
        }
    }
}

impl DynamicsParams {
    pub fn with_mode(self, mode: CouplingMode) -> Self {
        Self { mode, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(alloc::format!("tau = {} must be positive", self.tau));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad(alloc::format!("hbar = {} must be positive", self.hbar));
        }
        if self.dt.is_nan() || self.dt <= 0.0 || self.dt > self.tau / 10.0 {
            return bad(alloc::format!("dt = {} must lie in (0, tau/10]", self.dt));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad(alloc::format!("t_end = {} must be at least dt", self.t_end));
        }
        if self.degeneracy_epsilon.is_nan() || self.degeneracy_epsilon <= 0.0 {
            return bad(alloc::format!("degeneracy_epsilon = {} must be positive", self.degeneracy_epsilon));
        }
        if let CouplingMode::Reservoir { beta_r } = self.mode {
            if !beta_r.is_finite() {
                return bad(alloc::format!("beta_r = {beta_r} must be finite"));
            }
        }
        Ok(())
    }

    /// Number of RK4 steps covering `[0, t_end]`.
    pub fn n_steps(&self) -> usize {
        let n = libm::round(self.t_end / self.dt) as usize;
        n.max(1)
    }
}

/// One right-hand-side evaluation with its by-products.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub moments: Moments,
    pub dissipator: Operator,
    pub rhs: Operator,
}

pub fn evaluate(rho: &DensityMatrix, h: &Hamiltonian, params: &DynamicsParams) -> Result<Evaluation> {
    h.check_dim(rho)?;
    let kernel = Kernel::new(rho, h, params.mode.beta_override(), params.degeneracy_epsilon);
    let dissipator = kernel.dissipator(rho, params.tau);
    let rhs = &kernel.symplectic(params.hbar) - &dissipator;
    Ok(Evaluation { moments: kernel.moments, dissipator, rhs })
}

/// `dρ/dt = −(i/ħ)[H, ρ] − D`.
pub fn rhs(rho: &DensityMatrix, h: &Hamiltonian, params: &DynamicsParams) -> Result<Operator> {
    Ok(evaluate(rho, h, params)?.rhs)
}

/// Rate of `⟨A⟩` split into its Hamiltonian and dissipative parts:
/// `(Re tr(A · (−i/ħ)[H, ρ]), −tr(A D))`. The dissipative part equals
/// `−(1/τ)(β_eff A_eA − A_sA)`.
pub fn observable_rate(
    rho: &DensityMatrix,
    h: &Hamiltonian,
    params: &DynamicsParams,
    a: &Operator,
) -> Result<(f64, f64)> {
    h.check_dim(rho)?;
    let kernel = Kernel::new(rho, h, params.mode.beta_override(), params.degeneracy_epsilon);
    let symplectic = a.trace_product(&kernel.symplectic(params.hbar)).re;
    let m = &kernel.moments;
    let mean_a = rho.expectation(a);
    let e_a = kernel.h_rho.trace_product(a).re;
    let s_a = -kernel.rho_log_rho.trace_product(a).re;
    let a_ea = e_a - m.e * mean_a;
    let a_sa = s_a - m.s * mean_a;
    let dissipative = -(m.beta_eff * a_ea - a_sa) / params.tau;
    Ok((symplectic, dissipative))
}

/// What hygiene found (and repaired) after a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HygieneReport {
    /// Smallest eigenvalue before clipping.
    pub min_eigenvalue: f64,
    /// `|tr ρ − 1|` before renormalization.
    pub trace_error: f64,
    pub clipped: usize,
}

/// Re-Hermitize, clip small negative eigenvalues, renormalize.
fn hygiene(op: &Operator, step: usize) -> Result<(DensityMatrix, HygieneReport)> {
    if !op.is_finite() {
        return Err(Error::NonFinite { step });
    }
    let op = op.hermitize();
    let spectrum = eig_unchecked(&op)?;
    let min_eigenvalue = spectrum.min();
    if !min_eigenvalue.is_finite() {
        return Err(Error::NonFinite { step });
    }
    if min_eigenvalue < HYGIENE_ABORT_EIGENVALUE {
        return Err(Error::HygieneAbort {
            step,
            reason: alloc::format!("eigenvalue {min_eigenvalue:e} below {HYGIENE_ABORT_EIGENVALUE:e}"),
        });
    }
    let trace = op.real_trace();
    let trace_error = (trace - 1.0).abs();
    if trace_error > HYGIENE_ABORT_TRACE {
        return Err(Error::HygieneAbort { step, reason: alloc::format!("trace {trace} drifted from 1") });
    }
    let clipped = spectrum.values().iter().filter(|&&l| l < 0.0).count();
    let rho = if clipped == 0 {
        DensityMatrix::from_parts(op.scale(1.0 / trace), scale_spectrum(&spectrum, 1.0 / trace))
    } else {
        let values: Vec<f64> = spectrum.values().iter().map(|&l| l.max(0.0)).collect();
        let sum: f64 = values.iter().sum();
        let values: Vec<f64> = values.iter().map(|l| l / sum).collect();
        let spectrum = spectrum.with_values(values);
        DensityMatrix::from_parts(spectrum.reconstruct().hermitize(), spectrum)
    };
    Ok((rho, HygieneReport { min_eigenvalue, trace_error, clipped }))
}

fn scale_spectrum(spectrum: &Spectrum, factor: f64) -> Spectrum {
    let values = spectrum.values().iter().map(|l| l * factor).collect();
    spectrum.clone().with_values(values)
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    /// Observer and sampled-state cadence, in steps. The final step is
    /// always sampled.
    pub observer_stride: usize,
    /// Keep the sampled states in the returned trajectory.
    pub keep_states: bool,
    /// Operators whose expectation is recorded at every step.
    pub tracked: Vec<Operator>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { observer_stride: 100, keep_states: false, tracked: Vec::new() }
    }
}

/// Values recorded at every RK4 step (index = step).
#[derive(Clone, Debug, Default)]
pub struct FineSeries {
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub tracked: Vec<Vec<f64>>,
    pub min_eigenvalue: Vec<f64>,
    pub trace_error: Vec<f64>,
}

/// What the observer sees at a sampled step.
pub struct StepSample<'a> {
    pub step: usize,
    pub time: f64,
    pub state: &'a DensityMatrix,
    pub evaluation: &'a Evaluation,
    pub hygiene: HygieneReport,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub stride: usize,
    pub sample_steps: Vec<usize>,
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub moments: Vec<Moments>,
    pub fine: FineSeries,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.fine.energy.len() - 1
    }

    /// Finite-difference time derivative of a fine series at `step`.
    pub fn derivative(&self, series: &[f64], step: usize) -> f64 {
        finite_difference(series, self.dt, step)
    }

    pub fn final_moments(&self) -> &Moments {
        self.moments.last().expect("a trajectory has at least one sample")
    }
}

/// Fourth-order five-point derivative of uniformly spaced samples: central
/// in the interior, one-sided near the ends. Needs at least five samples.
pub fn finite_difference(series: &[f64], h: f64, i: usize) -> f64 {
    let n = series.len();
    assert!(n >= 5, "finite differences need at least five samples");
    let f = |k: usize| series[k];
    let d = if i >= 2 && i + 2 < n {
        f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)
    } else if i == 0 {
        -25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)
    } else if i == 1 {
        -3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)
    } else if i == n - 1 {
        25.0 * f(n - 1) - 48.0 * f(n - 2) + 36.0 * f(n - 3) - 16.0 * f(n - 4) + 3.0 * f(n - 5)
    } else {
        3.0 * f(n - 1) + 10.0 * f(n - 2) - 18.0 * f(n - 3) + 6.0 * f(n - 4) - f(n - 5)
    };
    d / (12.0 * h)
}

/// Fixed-step classical RK4 with post-step hygiene.
///
/// The observer is called at step 0, every `observer_stride` steps and at
/// the final step; returning an error stops the integration.
pub fn integrate(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    params: &DynamicsParams,
    options: &IntegrateOptions,
    mut observer: impl FnMut(&StepSample<'_>) -> Result<()>,
) -> Result<Trajectory> {
    params.validate()?;
    h.check_dim(rho0)?;
    if options.observer_stride == 0 {
        return Err(Error::InvalidParameter("observer_stride must be positive".to_string()));
    }
    let n_steps = params.n_steps();
    let dt = params.dt;
    let mut trajectory = Trajectory {
        dt,
        stride: options.observer_stride,
        sample_steps: Vec::new(),
        times: Vec::new(),
        states: Vec::new(),
        moments: Vec::new(),
        fine: FineSeries {
            tracked: vec![Vec::with_capacity(n_steps + 1); options.tracked.len()],
            ..Default::default()
        },
    };

    let mut rho = rho0.clone();
    let mut report =
        HygieneReport { min_eigenvalue: rho.min_eigenvalue(), trace_error: (rho.trace() - 1.0).abs(), clipped: 0 };
    for step in 0..=n_steps {
        let eval = evaluate(&rho, h, params)?;
        let time = step as f64 * dt;
        let fine = &mut trajectory.fine;
        fine.energy.push(eval.moments.e);
        fine.entropy.push(eval.moments.s);
        fine.min_eigenvalue.push(report.min_eigenvalue);
        fine.trace_error.push(report.trace_error);
        for (series, op) in fine.tracked.iter_mut().zip(&options.tracked) {
            series.push(rho.expectation(op));
        }
        if step % options.observer_stride == 0 || step == n_steps {
            observer(&StepSample { step, time, state: &rho, evaluation: &eval, hygiene: report })?;
            trajectory.sample_steps.push(step);
            trajectory.times.push(time);
            trajectory.moments.push(eval.moments);
            if options.keep_states {
                trajectory.states.push(rho.clone());
            }
        }
        if step == n_steps {
            break;
        }

        let k1 = eval.rhs;
        let stage = |k: &Operator, frac: f64| -> Result<Operator> {
            let trial = DensityMatrix::trial(rho.op().add_scaled(frac * dt, k).hermitize())?;
            rhs(&trial, h, params)
        };
        let k2 = stage(&k1, 0.5)?;
        let k3 = stage(&k2, 0.5)?;
        let k4 = stage(&k3, 1.0)?;
        let n = rho.dim();
        let w = dt / 6.0;
        let next = Operator::from_fn(n, |i, j| {
            rho.op().get(i, j) + (k1.get(i, j) + (k2.get(i, j) + k3.get(i, j)) * 2.0 + k4.get(i, j)) * w
        });
        let (clean, r) = hygiene(&next, step + 1)?;
        rho = clean;
        report = r;
    }
    Ok(trajectory)
}
