//! Scenario orchestration: one isolated and one reservoir trajectory per
//! perturbation strength, both launched from the same prepared state.

use std::time::Instant;

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use toric_seaqt_core::engine::{integrate, DynamicsParams, Hamiltonian, IntegrateOptions, Moments, Trajectory};
use toric_seaqt_core::hermitian::{DensityMatrix, Operator};
use toric_seaqt_core::lattice::{ground_state, hamiltonian, magnetization_operator, prepare_initial_state};
use toric_seaqt_core::measures::{
    coherent_sample, geometric_entropy, log_negativity, magnetization, region_hamiltonian, GeometricRegion,
    MeasureRecord, ReferenceState,
};

use crate::config::Resolved;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Isolated,
    Reservoir,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Isolated => "isolated",
            Mode::Reservoir => "reservoir",
        }
    }
}

/// Everything a trajectory needs that does not depend on the initial state.
pub struct Context {
    pub resolved: Resolved,
    pub hamiltonian: Hamiltonian,
    pub ground: DensityMatrix,
    pub magnetization_op: Operator,
    ground_reference: ReferenceState,
    mixed_reference: ReferenceState,
    region_a: GeometricRegion,
    h_a: Hamiltonian,
    region_b: GeometricRegion,
    h_b: Hamiltonian,
}

/// Index of the fine-series tracked operators.
pub const TRACK_MAGNETIZATION: usize = 0;
pub const TRACK_GROUND_LOG: usize = 1;

impl Context {
    pub fn new(resolved: Resolved) -> Result<Self> {
        let lattice = &resolved.lattice;
        let n = lattice.n_qubits();
        let hamiltonian = Hamiltonian::new(hamiltonian(lattice))?;
        let ground = ground_state(lattice);
        let tau = resolved.params.tau;
        let region_a = GeometricRegion::new(resolved.region_a.clone(), tau);
        let region_b = region_a.complement(n);
        let h_a = Hamiltonian::new(region_hamiltonian(lattice, &region_a.qubits)?)?;
        let h_b = Hamiltonian::new(region_hamiltonian(lattice, &region_b.qubits)?)?;
        Ok(Self {
            magnetization_op: magnetization_operator(n),
            ground_reference: ReferenceState::new(&ground),
            mixed_reference: ReferenceState::new(&DensityMatrix::maximally_mixed(lattice.dim())),
            hamiltonian,
            ground,
            resolved,
            region_a,
            h_a,
            region_b,
            h_b,
        })
    }

    pub fn params(&self, mode: Mode) -> DynamicsParams {
        match mode {
            Mode::Isolated => self.resolved.params,
            Mode::Reservoir => self.resolved.reservoir_params(),
        }
    }

    pub fn initial_state(&self, index: usize) -> Result<DensityMatrix> {
        Ok(prepare_initial_state(&self.resolved.lattice, &self.resolved.specs[index])?)
    }

    /// Measures of one state, without the coherent information (which needs
    /// the paired trajectory).
    pub fn record(
        &self,
        rho: &DensityMatrix,
        params: &DynamicsParams,
        moments: &Moments,
    ) -> toric_seaqt_core::Result<MeasureRecord> {
        let eps = params.degeneracy_epsilon;
        let rel = self.ground_reference.relative_entropy(rho)?;
        let mag = magnetization(rho, &self.hamiltonian, params, &self.magnetization_op)?;
        Ok(MeasureRecord {
            energy: moments.e,
            entropy: moments.s,
            beta: moments.beta,
            free_energy: moments.free_energy(),
            relative_entropy: rel.value,
            rel_entropy_term_rho: rel.term_rho,
            rel_entropy_term_rho0: rel.term_sigma,
            log_negativity: log_negativity(rho, &self.resolved.negativity_subsystem)?,
            magnetization: mag.m,
            magnetization_rate: mag.rate,
            coherent_information: None,
            geom_entropy_a: geometric_entropy(rho, &self.region_a, &self.h_a, eps)?.entropy,
            geom_entropy_b: geometric_entropy(rho, &self.region_b, &self.h_b, eps)?.entropy,
            purity: rho.purity(),
            min_eigenvalue: rho.min_eigenvalue(),
            trace_error: (rho.trace() - 1.0).abs(),
        })
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub time: f64,
    /// `d⟨s⟩/dt` from the moments (`−(β_eff/τ) A_fs`).
    pub entropy_rate: f64,
    pub record: MeasureRecord,
}

pub struct TrajectoryRun {
    pub mode: Mode,
    pub rows: Vec<Row>,
    pub trajectory: Trajectory,
    pub final_state: DensityMatrix,
    /// `D(ρ ‖ I/d)` at every sample.
    pub relative_entropy_to_mixed: Vec<f64>,
    pub seconds: f64,
}

pub struct PairRun {
    pub index: usize,
    pub p_x: f64,
    pub initial_state: DensityMatrix,
    pub initial_hash: String,
    pub isolated: TrajectoryRun,
    pub reservoir: TrajectoryRun,
}

impl PairRun {
    pub fn member(&self, mode: Mode) -> &TrajectoryRun {
        match mode {
            Mode::Isolated => &self.isolated,
            Mode::Reservoir => &self.reservoir,
        }
    }
}

/// SHA-256 over the matrix entries (column-major, real then imaginary part,
/// little-endian IEEE 754).
pub fn state_hash(rho: &DensityMatrix) -> String {
    let op = rho.op();
    let mut hasher = Sha256::new();
    hasher.update((op.dim() as u64).to_le_bytes());
    for j in 0..op.dim() {
        for i in 0..op.dim() {
            let z = op.get(i, j);
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

pub fn run_trajectory(ctx: &Context, rho0: &DensityMatrix, mode: Mode) -> Result<TrajectoryRun> {
    let start = Instant::now();
    let params = ctx.params(mode);
    let options = IntegrateOptions {
        observer_stride: ctx.resolved.observer_stride,
        keep_states: false,
        tracked: vec![ctx.magnetization_op.clone(), ctx.ground_reference.log().clone()],
    };
    let mut rows = Vec::new();
    let mut to_mixed = Vec::new();
    let mut final_state = None;
    let n_steps = params.n_steps();
    let trajectory = integrate(rho0, &ctx.hamiltonian, &params, &options, |sample| {
        let moments = &sample.evaluation.moments;
        let mut record = ctx.record(sample.state, &params, moments)?;
        record.min_eigenvalue = sample.hygiene.min_eigenvalue;
        record.trace_error = sample.hygiene.trace_error;
        rows.push(Row { time: sample.time, entropy_rate: moments.entropy_production / params.tau, record });
        to_mixed.push(ctx.mixed_reference.relative_entropy(sample.state)?.value);
        if sample.step == n_steps {
            final_state = Some(sample.state.clone());
        }
        Ok(())
    })
    .map_err(|e| anyhow::Error::new(e).context(format!("{} trajectory aborted", mode.name())))?;
    Ok(TrajectoryRun {
        mode,
        rows,
        trajectory,
        final_state: final_state.expect("the final step is always sampled"),
        relative_entropy_to_mixed: to_mixed,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fills the isolated member's coherent-information column.
fn pair_up(
    index: usize,
    p_x: f64,
    rho0: DensityMatrix,
    mut isolated: TrajectoryRun,
    reservoir: TrajectoryRun,
    tau: f64,
) -> PairRun {
    for ((row, mi), mr) in isolated.rows.iter_mut().zip(&isolated.trajectory.moments).zip(&reservoir.trajectory.moments)
    {
        row.record.coherent_information = Some(coherent_sample(row.time, mi, mr, tau).value);
    }
    PairRun { index, p_x, initial_hash: state_hash(&rho0), initial_state: rho0, isolated, reservoir }
}

pub fn run_pair(ctx: &Context, index: usize) -> Result<PairRun> {
    let rho0 = ctx.initial_state(index)?;
    let p_x = ctx.resolved.specs[index].p_x;
    let isolated = run_trajectory(ctx, &rho0, Mode::Isolated).with_context(|| format!("p_x = {p_x}"))?;
    let reservoir = run_trajectory(ctx, &rho0, Mode::Reservoir).with_context(|| format!("p_x = {p_x}"))?;
    Ok(pair_up(index, p_x, rho0, isolated, reservoir, ctx.resolved.params.tau))
}

/// Resolves the worker count: `--threads` if given, otherwise the machine's
/// parallelism; `TORIC_SEAQT_THREADS` caps either.
pub fn worker_count(requested: Option<usize>) -> usize {
    let cap = std::env::var("TORIC_SEAQT_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    let base = requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.map_or(base, |c| base.min(c)).max(1)
}

/// Runs every (p_x, mode) trajectory on a pool of `threads` workers.
/// Results come back in configuration order regardless of scheduling.
pub fn run_sweep(ctx: &Context, threads: usize) -> Result<Vec<PairRun>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let n = ctx.resolved.specs.len();
    pool.install(|| {
        let states: Vec<DensityMatrix> = (0..n).into_par_iter().map(|i| ctx.initial_state(i)).collect::<Result<_>>()?;
        let jobs: Vec<(usize, Mode)> = (0..n).flat_map(|i| [(i, Mode::Isolated), (i, Mode::Reservoir)]).collect();
        let mut runs: Vec<Option<TrajectoryRun>> = jobs
            .par_iter()
            .map(|&(i, mode)| {
                run_trajectory(ctx, &states[i], mode).with_context(|| format!("p_x = {}", ctx.resolved.specs[i].p_x))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(Some)
            .collect();
        Ok(states
            .into_iter()
            .enumerate()
            .map(|(i, rho0)| {
                let isolated = runs[2 * i].take().expect("each job ran once");
                let reservoir = runs[2 * i + 1].take().expect("each job ran once");
                pair_up(i, ctx.resolved.specs[i].p_x, rho0, isolated, reservoir, ctx.resolved.params.tau)
            })
            .collect())
    })
}
