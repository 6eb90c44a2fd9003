//! Information measures along trajectories and equilibrium thermodynamics.

use alloc::vec::Vec;

use crate::engine::{observable_rate, DynamicsParams, Hamiltonian, Moments, Trajectory};
use crate::error::{Error, Result};
use crate::hermitian::{
    eig_hermitian, partial_trace, partial_transpose, trace_norm, DensityMatrix, Operator, Spectrum, C64,
};
use crate::lattice::{StabilizerKind, ToricLattice};
use crate::math;

/// Log-negativities below this are reported as exactly zero.
pub const NEGATIVITY_FLOOR: f64 = 1e-12;

/// Von Neumann entropy over the support of `rho`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.entropy()
}

/// `D(ρ‖σ) = tr ρ B̂_ρ ln ρ − tr ρ B̂_σ ln σ` with both component terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeEntropy {
    pub value: f64,
    /// `tr ρ B̂_ρ ln ρ = −S(ρ)`.
    pub term_rho: f64,
    /// `tr ρ B̂_σ ln σ`.
    pub term_sigma: f64,
    /// `ρ` has weight outside the support of `σ` (the unprojected value
    /// would be infinite).
    pub support_mismatch: bool,
}

/// A reference state with its projected logarithm and kernel projector
/// precomputed, for repeated relative entropies against the same `σ`.
#[derive(Clone, Debug)]
pub struct ReferenceState {
    log: Operator,
    kernel: Operator,
    dim: usize,
}

impl ReferenceState {
    pub fn new(sigma: &DensityMatrix) -> Self {
        let support = &sigma.projected_log().support;
        let kernel = sigma
            .spectrum()
            .reconstruct_weighted(&support.iter().map(|&s| if s { 0.0 } else { 1.0 }).collect::<Vec<_>>());
        Self { log: sigma.log_projected(), kernel, dim: sigma.dim() }
    }

    /// `B̂_σ ln σ`.
    pub fn log(&self) -> &Operator {
        &self.log
    }

    pub fn relative_entropy(&self, rho: &DensityMatrix) -> Result<RelativeEntropy> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rho.dim() });
        }
        let term_rho = -rho.entropy();
        let term_sigma = rho.expectation(&self.log);
        let leak = rho.expectation(&self.kernel);
        Ok(RelativeEntropy { value: term_rho - term_sigma, term_rho, term_sigma, support_mismatch: leak > 1e-10 })
    }
}

pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<RelativeEntropy> {
    ReferenceState::new(sigma).relative_entropy(rho)
}

/// `ln ‖ρ^{T_S}‖₁`, clamped to exactly 0 below [`NEGATIVITY_FLOOR`].
pub fn log_negativity(rho: &DensityMatrix, subsystem: &[usize]) -> Result<f64> {
    let pt = partial_transpose(rho, subsystem)?;
    let value = math::ln(trace_norm(&pt.hermitize())?);
    Ok(if value < NEGATIVITY_FLOOR { 0.0 } else { value })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Magnetization {
    pub m: f64,
    pub rate: f64,
    pub symplectic_part: f64,
    pub dissipative_part: f64,
}

/// Mean `σ^z` magnetization and its rate under the dynamics in `params`.
///
/// `magnetization_op` is `(1/N) Σ σ^z_i` (see
/// [`crate::lattice::magnetization_operator`]); the dissipative part is
/// `−(1/τ)(β_eff A_em − A_sm)`.
pub fn magnetization(
    rho: &DensityMatrix,
    h: &Hamiltonian,
    params: &DynamicsParams,
    magnetization_op: &Operator,
) -> Result<Magnetization> {
    let m = rho.expectation(magnetization_op);
    let (symplectic_part, dissipative_part) = observable_rate(rho, h, params, magnetization_op)?;
    Ok(Magnetization { m, rate: symplectic_part + dissipative_part, symplectic_part, dissipative_part })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentSample {
    pub time: f64,
    /// `I_c = ⟨s⟩^I − ⟨s⟩^R`.
    pub value: f64,
    /// `−(1/τ)(β A_fs^I − β_R A_fs^R)`.
    pub rate: f64,
}

/// Coherent information of an isolated/reservoir pair launched from the same
/// state, at the shared sample times.
pub fn coherent_information(isolated: &Trajectory, reservoir: &Trajectory, tau: f64) -> Result<Vec<CoherentSample>> {
    if isolated.times != reservoir.times {
        return Err(Error::GridMismatch);
    }
    Ok(isolated
        .times
        .iter()
        .zip(isolated.moments.iter().zip(&reservoir.moments))
        .map(|(&time, (i, r))| coherent_sample(time, i, r, tau))
        .collect())
}

pub fn coherent_sample(time: f64, isolated: &Moments, reservoir: &Moments, tau: f64) -> CoherentSample {
    CoherentSample {
        time,
        value: isolated.s - reservoir.s,
        rate: (isolated.entropy_production - reservoir.entropy_production) / tau,
    }
}

/// A spatial region for geometric entropies.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricRegion {
    pub qubits: Vec<usize>,
    pub d_a: u64,
    pub f: u64,
    pub tau_j: f64,
}

impl GeometricRegion {
    /// A single spin: `d_A = 1`, `f = 2`.
    pub fn single_spin(qubit: usize, tau_j: f64) -> Self {
        Self { qubits: alloc::vec![qubit], d_a: 1, f: 2, tau_j }
    }

    pub fn new(qubits: Vec<usize>, tau_j: f64) -> Self {
        let (d_a, f) = if qubits.len() == 1 { (1, 2) } else { (1, 1) };
        Self { qubits, d_a, f, tau_j }
    }

    /// Complementary region (same `τ_J`).
    pub fn complement(&self, n_qubits: usize) -> Self {
        let rest = (0..n_qubits).filter(|q| !self.qubits.contains(q)).collect();
        Self::new(rest, self.tau_j)
    }

    /// Ground-state value `ln(f/d_A)`.
    pub fn ground_entropy(&self) -> f64 {
        math::ln(self.f as f64 / self.d_a as f64)
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(Error::EmptySubsystem);
        }
        if self.qubits.len() >= n_qubits {
            return Err(Error::FullSubsystem);
        }
        Ok(())
    }
}

/// `H_J`: the stabilizer terms of `lattice` whose support lies inside the
/// region, acting on the region's qubits (in region order).
pub fn region_hamiltonian(lattice: &ToricLattice, qubits: &[usize]) -> Result<Operator> {
    let n = lattice.n_qubits();
    let k = qubits.len();
    let dim = 1usize << k;
    let mut h = Operator::zeros(dim);
    for (kind, index) in lattice.stabilizers_within(qubits) {
        let full_mask = lattice.stabilizer_mask(kind, index)?;
        let local_mask = qubits
            .iter()
            .enumerate()
            .filter(|(_, &q)| full_mask & (1 << (n - 1 - q)) != 0)
            .fold(0usize, |m, (pos, _)| m | 1 << (k - 1 - pos));
        for col in 0..dim {
            match kind {
                StabilizerKind::Star => {
                    let row = col ^ local_mask;
                    h.set(row, col, h.get(row, col) - C64::new(1.0, 0.0));
                }
                StabilizerKind::Plaquette => {
                    let sign = if (col & local_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    h.set(col, col, h.get(col, col) - C64::new(sign, 0.0));
                }
            }
        }
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricEntropy {
    pub entropy: f64,
    /// Local steepest-entropy-ascent rate `−(β_J/τ_J) A_fs^J`.
    pub rate: f64,
}

/// Entropy of the reduced state on `region` and its local SEA rate under
/// `h_j` (see [`region_hamiltonian`]).
pub fn geometric_entropy(
    rho: &DensityMatrix,
    region: &GeometricRegion,
    h_j: &Hamiltonian,
    degeneracy_epsilon: f64,
) -> Result<GeometricEntropy> {
    region.validate(rho.n_qubits()?)?;
    let reduced = partial_trace(rho, &region.qubits)?;
    let local = crate::engine::moments_with_epsilon(&reduced, h_j, None, degeneracy_epsilon)?;
    Ok(GeometricEntropy { entropy: reduced.entropy(), rate: local.entropy_production / region.tau_j })
}

/// Boltzmann weights `e^{−β(λ − λ_ref)}` normalized, shifted so the largest
/// exponent is zero.
fn boltzmann(values: &[f64], beta: f64) -> Vec<f64> {
    let reference = if beta >= 0.0 { values[0] } else { values[values.len() - 1] };
    let w: Vec<f64> = values.iter().map(|&l| math::exp(-beta * (l - reference))).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `e^{−βH}/Z`; negative `β` allowed.
pub fn gibbs_state(h: &Operator, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("beta = {beta} must be finite")));
    }
    let spectrum = eig_hermitian(h)?;
    gibbs_from_spectrum(&spectrum, beta)
}

pub fn gibbs_from_spectrum(spectrum: &Spectrum, beta: f64) -> Result<DensityMatrix> {
    let p = boltzmann(spectrum.values(), beta);
    DensityMatrix::new(spectrum.reconstruct_weighted(&p).hermitize())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumPoint {
    pub beta: f64,
    pub energy: f64,
    pub entropy: f64,
}

/// Canonical energy and entropy at each `β` of the grid, from the exact
/// spectrum of `h`.
pub fn equilibrium_curve(h: &Operator, beta_grid: &[f64]) -> Result<Vec<EquilibriumPoint>> {
    if beta_grid.is_empty() {
        return Err(Error::InvalidParameter("beta grid is empty".into()));
    }
    let spectrum = eig_hermitian(h)?;
    Ok(beta_grid.iter().map(|&beta| equilibrium_point(spectrum.values(), beta)).collect())
}

pub fn equilibrium_point(values: &[f64], beta: f64) -> EquilibriumPoint {
    let p = boltzmann(values, beta);
    let energy = p.iter().zip(values).map(|(p, l)| p * l).sum();
    let entropy = -p.iter().filter(|&&x| x > 0.0).map(|&x| x * math::ln(x)).sum::<f64>();
    EquilibriumPoint { beta, energy, entropy }
}

/// `β*` with `⟨e⟩_Gibbs(β*) = energy`, by bisection on the exact spectrum.
pub fn beta_star(h: &Operator, energy: f64) -> Result<f64> {
    let spectrum = eig_hermitian(h)?;
    beta_star_from_values(spectrum.values(), energy)
}

pub fn beta_star_from_values(values: &[f64], energy: f64) -> Result<f64> {
    let (lo_e, hi_e) = (values[0], values[values.len() - 1]);
    if hi_e - lo_e <= 1e-12 * (1.0 + lo_e.abs()) {
        return Err(Error::InvalidParameter("Hamiltonian is a multiple of the identity; beta is undefined".into()));
    }
    if !(energy > lo_e && energy < hi_e) {
        return Err(Error::InvalidParameter(alloc::format!(
            "energy {energy} outside the open spectral range ({lo_e}, {hi_e})"
        )));
    }
    let e_of = |b: f64| equilibrium_point(values, b).energy;
    // Energy decreases in beta; bracket first.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while e_of(lo) < energy {
        lo *= 2.0;
    }
    while e_of(hi) > energy {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if e_of(mid) > energy {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// All measures of one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureRecord {
    pub energy: f64,
    pub entropy: f64,
    pub beta: Option<f64>,
    pub free_energy: Option<f64>,
    pub relative_entropy: f64,
    pub rel_entropy_term_rho: f64,
    pub rel_entropy_term_rho0: f64,
    pub log_negativity: f64,
    pub magnetization: f64,
    pub magnetization_rate: f64,
    pub coherent_information: Option<f64>,
    pub geom_entropy_a: f64,
    pub geom_entropy_b: f64,
    pub purity: f64,
    pub min_eigenvalue: f64,
    pub trace_error: f64,
}
