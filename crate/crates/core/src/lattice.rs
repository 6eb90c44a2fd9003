//! Toric-code lattices on an `rows × cols` torus.
//!
//! Spins live on edges. Vertex `(r, c)` owns the horizontal edge to its right,
//! `h(r, c) = 2(r·cols + c)`, and the vertical edge below it,
//! `v(r, c) = 2(r·cols + c) + 1`; all coordinates wrap around the torus.
//! A star collects the four edges meeting at a vertex and a plaquette the four
//! edges bounding the face to the lower right of a vertex. On narrow tori an
//! edge can appear twice in the same star or plaquette; such pairs contribute
//! `σ² = I`.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermitian::{eig_hermitian, DensityMatrix, Operator, PauliAxis, C64};
use crate::math;

/// Largest register handled by the dense kernels (dimension 2^8).
pub const MAX_QUBITS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilizerKind {
    Star,
    Plaquette,
}

impl StabilizerKind {
    fn name(self) -> &'static str {
        match self {
            StabilizerKind::Star => "star",
            StabilizerKind::Plaquette => "plaquette",
        }
    }
}

/// Incidence structure of the torus: which edges (qubits) each star and
/// plaquette touches, with multiplicity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToricLattice {
    rows: usize,
    cols: usize,
    stars: Vec<[usize; 4]>,
    plaquettes: Vec<[usize; 4]>,
}

impl ToricLattice {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.rows * self.cols
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn horizontal_edge(&self, r: isize, c: isize) -> usize {
        2 * self.vertex(r, c)
    }

    pub fn vertical_edge(&self, r: isize, c: isize) -> usize {
        2 * self.vertex(r, c) + 1
    }

    fn vertex(&self, r: isize, c: isize) -> usize {
        let r = r.rem_euclid(self.rows as isize) as usize;
        let c = c.rem_euclid(self.cols as isize) as usize;
        r * self.cols + c
    }

    /// Edge multisets of the stars, one per vertex in row-major order.
    pub fn stars(&self) -> &[[usize; 4]] {
        &self.stars
    }

    /// Edge multisets of the plaquettes, one per face in row-major order.
    pub fn plaquettes(&self) -> &[[usize; 4]] {
        &self.plaquettes
    }

    pub fn stabilizer_edges(&self, kind: StabilizerKind, index: usize) -> Result<&[usize; 4]> {
        let list = match kind {
            StabilizerKind::Star => &self.stars,
            StabilizerKind::Plaquette => &self.plaquettes,
        };
        list.get(index).ok_or(Error::StabilizerOutOfRange { kind: kind.name(), index, count: list.len() })
    }

    /// Basis-index bitmask of the edges that appear an odd number of times.
    pub fn stabilizer_mask(&self, kind: StabilizerKind, index: usize) -> Result<usize> {
        let n = self.n_qubits();
        Ok(self.stabilizer_edges(kind, index)?.iter().fold(0usize, |m, &q| m ^ (1 << (n - 1 - q))))
    }

    /// Stabilizers whose odd-multiplicity edges all lie inside `region`.
    pub fn stabilizers_within(&self, region: &[usize]) -> Vec<(StabilizerKind, usize)> {
        let n = self.n_qubits();
        let region_mask = region.iter().fold(0usize, |m, &q| m | (1 << (n - 1 - q)));
        let mut inside = Vec::new();
        for kind in [StabilizerKind::Star, StabilizerKind::Plaquette] {
            let count = match kind {
                StabilizerKind::Star => self.stars.len(),
                StabilizerKind::Plaquette => self.plaquettes.len(),
            };
            for index in 0..count {
                let mask = self.stabilizer_mask(kind, index).expect("index in range");
                if mask != 0 && mask & !region_mask == 0 {
                    inside.push((kind, index));
                }
            }
        }
        inside
    }
}

/// Builds the `m × n` torus. At most 8 qubits (`2mn ≤ 8`) are supported.
pub fn build_torus(m: usize, n: usize) -> Result<ToricLattice> {
    if m == 0 || n == 0 {
        return Err(Error::EmptyLattice);
    }
    let qubits = 2 * m * n;
    if qubits > MAX_QUBITS {
        return Err(Error::LatticeTooLarge { rows: m, cols: n, qubits });
    }
    let mut lattice = ToricLattice { rows: m, cols: n, stars: Vec::new(), plaquettes: Vec::new() };
    for r in 0..m as isize {
        for c in 0..n as isize {
            let star = [
                lattice.horizontal_edge(r, c),
                lattice.horizontal_edge(r, c - 1),
                lattice.vertical_edge(r, c),
                lattice.vertical_edge(r - 1, c),
            ];
            let plaquette = [
                lattice.horizontal_edge(r, c),
                lattice.horizontal_edge(r + 1, c),
                lattice.vertical_edge(r, c),
                lattice.vertical_edge(r, c + 1),
            ];
            lattice.stars.push(star);
            lattice.plaquettes.push(plaquette);
        }
    }
    Ok(lattice)
}

/// Product of `σ^x` (star) or `σ^z` (plaquette) over the stabilizer's edges.
pub fn stabilizer_operator(lattice: &ToricLattice, kind: StabilizerKind, index: usize) -> Result<Operator> {
    let mask = lattice.stabilizer_mask(kind, index)?;
    Ok(pauli_string(lattice.dim(), mask, kind))
}

fn pauli_string(dim: usize, mask: usize, kind: StabilizerKind) -> Operator {
    let mut op = Operator::zeros(dim);
    for k in 0..dim {
        match kind {
            StabilizerKind::Star => op.set(k ^ mask, k, C64::new(1.0, 0.0)),
            StabilizerKind::Plaquette => {
                let sign = if (k & mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                op.set(k, k, C64::new(sign, 0.0));
            }
        }
    }
    op
}

/// `Ĥ = −Σ_v Â_v − Σ_f B̂_f`.
pub fn hamiltonian(lattice: &ToricLattice) -> Operator {
    let dim = lattice.dim();
    let mut h = Operator::zeros(dim);
    for kind in [StabilizerKind::Star, StabilizerKind::Plaquette] {
        for index in 0..lattice.stars.len() {
            let mask = lattice.stabilizer_mask(kind, index).expect("index in range");
            for k in 0..dim {
                match kind {
                    StabilizerKind::Star => {
                        let row = k ^ mask;
                        h.set(row, k, h.get(row, k) - C64::new(1.0, 0.0));
                    }
                    StabilizerKind::Plaquette => {
                        let sign = if (k & mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                        h.set(k, k, h.get(k, k) - C64::new(sign, 0.0));
                    }
                }
            }
        }
    }
    h
}

/// Uniform mixture over the stabilizer code space.
///
/// Built as `Π_v (I + Â_v)/2 · Π_f (I + B̂_f)/2` and divided by its trace.
/// All entries are dyadic rationals, so the state is exact in floating point
/// and commutes exactly with [`hamiltonian`].
pub fn ground_state(lattice: &ToricLattice) -> DensityMatrix {
    let dim = lattice.dim();
    let identity = Operator::identity(dim);
    let mut projector = identity.clone();
    for kind in [StabilizerKind::Star, StabilizerKind::Plaquette] {
        for index in 0..lattice.stars.len() {
            let s = stabilizer_operator(lattice, kind, index).expect("index in range");
            let factor = (&identity + &s).scale(0.5);
            projector = projector.matmul(&factor);
        }
    }
    let trace = projector.real_trace();
    DensityMatrix::new(projector.scale(1.0 / trace)).expect("code-space projector is a valid state")
}

/// `P ρ P†` for a single-site Pauli, by index permutation (exact).
fn conjugate_by_pauli(op: &Operator, n_qubits: usize, site: usize, axis: PauliAxis) -> Operator {
    let bit = 1usize << (n_qubits - 1 - site);
    // P|k⟩ = phase(k)|k ⊕ flip⟩.
    let (flip, phase): (usize, fn(bool) -> C64) = match axis {
        PauliAxis::X => (bit, |_| C64::new(1.0, 0.0)),
        PauliAxis::Y => (bit, |up| if up { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) }),
        PauliAxis::Z => (0, |up| if up { C64::new(1.0, 0.0) } else { C64::new(-1.0, 0.0) }),
    };
    Operator::from_fn(op.dim(), |i, j| {
        let (si, sj) = (i ^ flip, j ^ flip);
        phase(si & bit == 0) * op.get(si, sj) * phase(sj & bit == 0).conj()
    })
}

/// `(1 − p) ρ + p σ^x_site ρ σ^x_site`.
pub fn spin_flip_channel(rho: &DensityMatrix, site: usize, p_x: f64) -> Result<DensityMatrix> {
    pauli_channel(rho, site, PauliAxis::X, p_x)
}

/// Single-site Pauli channel `(1 − p) ρ + p σ ρ σ` along any axis.
pub fn pauli_channel(rho: &DensityMatrix, site: usize, axis: PauliAxis, p: f64) -> Result<DensityMatrix> {
    DensityMatrix::new(pauli_channel_op(rho.op(), site, axis, p)?)
}

fn pauli_channel_op(op: &Operator, site: usize, axis: PauliAxis, p: f64) -> Result<Operator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let n = op.n_qubits()?;
    if site >= n {
        return Err(Error::QubitOutOfRange { index: site, n_qubits: n });
    }
    if p == 0.0 {
        return Ok(op.clone());
    }
    let flipped = conjugate_by_pauli(op, n, site, axis);
    Ok(op.scale(1.0 - p).add_scaled(p, &flipped))
}

/// Knobs of the initial-state recipe.
///
/// Stages, each skipped when its parameter is zero:
/// 1. `entangle_eta`: `ρ → (1 − η)ρ + η|g⟩⟨g|` with `|g⟩` the lowest
///    eigenvector of the seeded GUE draw (a generic entangled pure state);
/// 2. Pauli channel on `site` along `axis` with probability `p_x`;
/// 3. unitary kick `ρ → UρU†`, `U = exp(iεG)`, `G` the GUE draw scaled to
///    spectral radius one;
/// 4. full-rank floor `ρ → (1 − δ)ρ + δ I/d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub site: usize,
    pub axis: PauliAxis,
    pub p_x: f64,
    pub gue_epsilon: f64,
    pub mix_delta: f64,
    pub entangle_eta: f64,
    pub seed: u64,
}

pub const DEFAULT_GUE_EPSILON: f64 = 0.1;
pub const DEFAULT_MIX_DELTA: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 42;

impl PerturbationSpec {
    /// Defaults for a lattice: site 0 on the 1×1 torus, site 3 otherwise.
    pub fn for_lattice(lattice: &ToricLattice, p_x: f64) -> Self {
        Self {
            site: default_site(lattice),
            axis: PauliAxis::X,
            p_x,
            gue_epsilon: DEFAULT_GUE_EPSILON,
            mix_delta: DEFAULT_MIX_DELTA,
            entangle_eta: 0.0,
            seed: DEFAULT_SEED,
        }
    }

    /// Every stage disabled: the recipe returns the ground state.
    pub fn unperturbed(lattice: &ToricLattice) -> Self {
        Self { gue_epsilon: 0.0, mix_delta: 0.0, ..Self::for_lattice(lattice, 0.0) }
    }

    pub fn validate(&self, lattice: &ToricLattice) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_x) {
            return Err(Error::InvalidProbability(self.p_x));
        }
        if !(0.0..=1.0).contains(&self.entangle_eta) {
            return Err(Error::InvalidProbability(self.entangle_eta));
        }
        if !(0.0..1.0).contains(&self.mix_delta) {
            return Err(Error::InvalidParameter(alloc::format!("mix_delta = {} outside [0, 1)", self.mix_delta)));
        }
        if !(self.gue_epsilon >= 0.0 && self.gue_epsilon.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("gue_epsilon = {} must be >= 0", self.gue_epsilon)));
        }
        if self.site >= lattice.n_qubits() {
            return Err(Error::QubitOutOfRange { index: self.site, n_qubits: lattice.n_qubits() });
        }
        Ok(())
    }
}

pub fn default_site(lattice: &ToricLattice) -> usize {
    if lattice.n_qubits() > 3 {
        3
    } else {
        0
    }
}

/// Seeded GUE sample scaled to spectral radius one.
///
/// Diagonal entries are `N(0, 1)`, off-diagonal entries `(N(0,1) + iN(0,1))/√2`.
pub fn gue_sample(dim: usize, seed: u64) -> Operator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Operator::zeros(dim);
    let half = math::sqrt(0.5);
    for i in 0..dim {
        let d: f64 = StandardNormal.sample(&mut rng);
        g.set(i, i, C64::new(d, 0.0));
        for j in 0..i {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let z = C64::new(re * half, im * half);
            g.set(i, j, z);
            g.set(j, i, z.conj());
        }
    }
    let spectrum = eig_hermitian(&g).expect("GUE sample is Hermitian by construction");
    let radius = spectrum.min().abs().max(spectrum.max().abs());
    if radius > 0.0 {
        g.scale(1.0 / radius)
    } else {
        g
    }
}

/// Deterministic full-rank initial state; see [`PerturbationSpec`].
pub fn prepare_initial_state(lattice: &ToricLattice, spec: &PerturbationSpec) -> Result<DensityMatrix> {
    spec.validate(lattice)?;
    let dim = lattice.dim();
    let ground = ground_state(lattice);
    if spec.entangle_eta == 0.0 && spec.p_x == 0.0 && spec.gue_epsilon == 0.0 && spec.mix_delta == 0.0 {
        return Ok(ground);
    }
    let needs_gue = spec.entangle_eta > 0.0 || spec.gue_epsilon > 0.0;
    let gue = if needs_gue { Some(eig_hermitian(&gue_sample(dim, spec.seed))?) } else { None };
    let mut rho = ground.into_op();

    if spec.entangle_eta > 0.0 {
        let g = gue.as_ref().expect("drawn above").vector(0);
        rho = rho.scale(1.0 - spec.entangle_eta).add_scaled(spec.entangle_eta, &Operator::outer(&g));
    }
    rho = pauli_channel_op(&rho, spec.site, spec.axis, spec.p_x)?;
    if spec.gue_epsilon > 0.0 {
        let spectrum = gue.as_ref().expect("drawn above");
        let phases: Vec<C64> = spectrum
            .values()
            .iter()
            .map(|&l| {
                let theta = spec.gue_epsilon * l;
                C64::new(math::cos(theta), math::sin(theta))
            })
            .collect();
        let u = spectrum.reconstruct_complex(&phases);
        rho = rho.conjugate_by(&u);
    }
    if spec.mix_delta > 0.0 {
        let floor = Operator::identity(dim).scale(1.0 / dim as f64);
        rho = rho.scale(1.0 - spec.mix_delta).add_scaled(spec.mix_delta, &floor);
    }
    let rho = rho.hermitize();
    let trace = rho.real_trace();
    DensityMatrix::new(rho.scale(1.0 / trace))
}

/// Mean magnetization `(1/N) Σ_i σ^z_i` (diagonal).
pub fn magnetization_operator(n_qubits: usize) -> Operator {
    let dim = 1usize << n_qubits;
    let diag: Vec<f64> = (0..dim)
        .map(|k| {
            let down = k.count_ones() as f64;
            (n_qubits as f64 - 2.0 * down) / n_qubits as f64
        })
        .collect();
    Operator::from_real_diagonal(&diag)
}
