//! Dense complex Hermitian linear algebra.
//!
//! Everything spectral goes through one eigendecomposition ([`eig_hermitian`]);
//! matrix functions are applied to eigenvalues and reassembled, never through
//! series or Padé approximants. Dimensions are small (at most 2^8), so the
//! O(d^3) decomposition is both affordable and numerically controlled.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::math;

pub type C64 = num_complex::Complex<f64>;

/// Relative Hermiticity tolerance: `max|M - M†| <= HERMITIAN_TOL * (1 + max|M|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-12;
/// Eigenvalues below this are a positivity violation, not round-off.
pub const POSITIVITY_FLOOR: f64 = -1e-10;
/// Eigenvalues below `KERNEL_RELATIVE * λ_max` belong to the kernel.
pub const KERNEL_RELATIVE: f64 = 1e-12;

const MAX_QUBITS: usize = 8;

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
fn cabs(z: C64) -> f64 {
    math::hypot(z.re, z.im)
}

/// A dense `dim × dim` complex matrix, used for Hermitian operators.
///
/// Arithmetic does not enforce Hermiticity; constructors that need it
/// ([`DensityMatrix::new`], [`eig_hermitian`]) check it explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: Mat<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self { mat: Mat::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: Mat::from_fn(dim, dim, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }) }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self { mat: Mat::from_fn(dim, dim, f) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { c(diag[i], 0.0) } else { c(0.0, 0.0) })
    }

    /// Row-major entries; panics unless `rows` is square.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn from_mat(mat: Mat<C64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "matrix must be square");
        Self { mat }
    }

    /// Rank-one projector `|ψ⟩⟨ψ|` (not normalized).
    pub fn outer(psi: &[C64]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    /// Kronecker product `a ⊗ b`; `a` is the more significant factor.
    pub fn kron(a: &Operator, b: &Operator) -> Self {
        let (da, db) = (a.dim(), b.dim());
        Self::from_fn(da * db, |i, j| a.get(i / db, j / db) * b.get(i % db, j % db))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.mat[(i, j)] = value;
    }

    pub fn as_mat(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.get(j, i).conj())
    }

    /// `(M + M†) / 2`.
    pub fn hermitize(&self) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5)
    }

    /// `max |M - M†|` over all entries.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in j..n {
                worst = worst.max(cabs(self.get(i, j) - self.get(j, i).conj()));
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max(cabs(self.get(i, j)));
            }
        }
        worst
    }

    pub fn hermiticity_tolerance(&self) -> f64 {
        HERMITIAN_TOL * (1.0 + self.max_abs())
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= self.hermiticity_tolerance()
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let residual = self.hermiticity_residual();
        let tolerance = self.hermiticity_tolerance();
        if residual <= tolerance {
            Ok(())
        } else {
            Err(Error::NotHermitian { residual, tolerance })
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).fold(c(0.0, 0.0), |a, b| a + b)
    }

    pub fn real_trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    /// `tr(A B)` in O(d²).
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.dim();
        let mut acc = c(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.get(i, j) * other.get(j, i);
            }
        }
        acc
    }

    /// Entry-wise maximum of `|A - B|`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max(cabs(self.get(i, j) - other.get(i, j)));
            }
        }
        worst
    }

    pub fn scale(&self, s: f64) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.get(i, j) * s)
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.get(i, j) * s)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Operator) -> Self {
        let n = self.dim();
        Self::from_fn(n, |i, j| self.get(i, j) + other.get(i, j) * s)
    }

    pub fn matmul(&self, other: &Operator) -> Self {
        Self { mat: &self.mat * &other.mat }
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Operator) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `{A, B} = AB + BA`.
    pub fn anticommutator(&self, other: &Operator) -> Self {
        &self.matmul(other) + &other.matmul(self)
    }

    /// `U M U†`.
    pub fn conjugate_by(&self, unitary: &Operator) -> Self {
        unitary.matmul(self).matmul(&unitary.adjoint())
    }

    pub fn is_finite(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| {
            (0..n).all(|i| {
                let z = self.get(i, j);
                z.re.is_finite() && z.im.is_finite()
            })
        })
    }

    /// Number of qubits if the dimension is a power of two.
    pub fn n_qubits(&self) -> Result<usize> {
        qubits_for_dim(self.dim())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        let n = self.dim();
        Operator::from_fn(n, |i, j| self.get(i, j) + rhs.get(i, j))
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        let n = self.dim();
        Operator::from_fn(n, |i, j| self.get(i, j) - rhs.get(i, j))
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-1.0)
    }
}

pub(crate) fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Eigenvalues in ascending order together with the unitary whose columns are
/// the matching eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Mat<C64>,
}

impl Spectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvectors as columns.
    pub fn vectors(&self) -> &Mat<C64> {
        &self.vectors
    }

    pub fn basis(&self) -> Operator {
        Operator { mat: self.vectors.clone() }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Same eigenvectors with replaced eigenvalues (must stay ascending).
    pub(crate) fn with_values(self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { values, vectors: self.vectors }
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.dim()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V diag(w) V†` for arbitrary per-eigenvalue weights.
    pub fn reconstruct_weighted(&self, weights: &[f64]) -> Operator {
        let n = self.dim();
        let scaled = Mat::from_fn(n, n, |i, k| self.vectors[(i, k)] * weights[k]);
        Operator { mat: &scaled * self.vectors.adjoint() }
    }

    /// `V diag(w) V†` for complex weights.
    pub fn reconstruct_complex(&self, weights: &[C64]) -> Operator {
        let n = self.dim();
        let scaled = Mat::from_fn(n, n, |i, k| self.vectors[(i, k)] * weights[k]);
        Operator { mat: &scaled * self.vectors.adjoint() }
    }

    pub fn reconstruct(&self) -> Operator {
        self.reconstruct_weighted(&self.values)
    }

    /// Projector onto the eigenvectors whose eigenvalue satisfies `select`.
    pub fn projector(&self, mut select: impl FnMut(f64) -> bool) -> Operator {
        let w: Vec<f64> = self.values.iter().map(|&l| if select(l) { 1.0 } else { 0.0 }).collect();
        self.reconstruct_weighted(&w)
    }

    /// Largest |V†V - I| entry.
    pub fn unitarity_residual(&self) -> f64 {
        let gram = Operator { mat: self.vectors.adjoint() * &self.vectors };
        gram.max_abs_diff(&Operator::identity(self.dim()))
    }
}

/// Eigendecomposition of a Hermitian operator.
///
/// Rejects inputs whose anti-Hermitian part exceeds the relative tolerance,
/// reporting the measured asymmetry.
pub fn eig_hermitian(m: &Operator) -> Result<Spectrum> {
    m.check_hermitian()?;
    eig_unchecked(&m.hermitize())
}

/// Eigendecomposition without the Hermiticity check; only the lower triangle
/// of `m` is read.
pub(crate) fn eig_unchecked(m: &Operator) -> Result<Spectrum> {
    let evd = m.mat.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence)?;
    let values: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
    let vectors = evd.U().to_owned();
    Ok(Spectrum { values, vectors })
}

/// Real map applied to eigenvalues by [`hermitian_function`].
#[derive(Clone, Copy, Debug)]
pub enum ScalarMap {
    Log,
    Sqrt,
    Exp,
    /// `x ln x`, continuous at zero.
    XLogX,
    Custom(fn(f64) -> f64),
}

impl ScalarMap {
    fn apply(self, x: f64) -> f64 {
        match self {
            ScalarMap::Log => math::ln(x),
            ScalarMap::Sqrt => math::sqrt(x),
            ScalarMap::Exp => math::exp(x),
            ScalarMap::XLogX => {
                if x > 0.0 {
                    x * math::ln(x)
                } else {
                    0.0
                }
            }
            ScalarMap::Custom(f) => f(x),
        }
    }

    fn needs_nonnegative(self) -> bool {
        matches!(self, ScalarMap::Log | ScalarMap::Sqrt | ScalarMap::XLogX)
    }
}

/// What to do with eigenvalues in the kernel (`λ < KERNEL_RELATIVE * λ_max`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelPolicy {
    /// Kernel eigenvalues map to 0: realizes `B̂ f(ρ)` with `B̂` the range projector.
    ProjectToZero,
    ErrorOnKernel,
    PassThrough,
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralFunctionPolicy {
    pub scalar_map: ScalarMap,
    pub kernel_policy: KernelPolicy,
}

impl SpectralFunctionPolicy {
    pub fn new(scalar_map: ScalarMap, kernel_policy: KernelPolicy) -> Self {
        Self { scalar_map, kernel_policy }
    }

    /// `B̂ ln M`.
    pub fn projected_log() -> Self {
        Self::new(ScalarMap::Log, KernelPolicy::ProjectToZero)
    }
}

/// Kernel threshold for a spectrum: relative to the largest eigenvalue.
pub fn kernel_threshold(values: &[f64]) -> f64 {
    let top = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    KERNEL_RELATIVE * top
}

/// Applies `policy` to the eigenvalues of a Hermitian `m`.
pub fn hermitian_function(m: &Operator, policy: SpectralFunctionPolicy) -> Result<Operator> {
    let spectrum = eig_hermitian(m)?;
    spectral_map(&spectrum, policy)
}

pub(crate) fn spectral_map(spectrum: &Spectrum, policy: SpectralFunctionPolicy) -> Result<Operator> {
    let threshold = kernel_threshold(spectrum.values());
    let mut mapped = Vec::with_capacity(spectrum.dim());
    for &lambda in spectrum.values() {
        if policy.scalar_map.needs_nonnegative() && lambda < POSITIVITY_FLOOR {
            return Err(Error::NegativeEigenvalue { eigenvalue: lambda });
        }
        let in_kernel = lambda < threshold;
        let value = match (in_kernel, policy.kernel_policy) {
            (true, KernelPolicy::ProjectToZero) => 0.0,
            (true, KernelPolicy::ErrorOnKernel) => return Err(Error::KernelEigenvalue { eigenvalue: lambda }),
            (true, KernelPolicy::PassThrough) if policy.scalar_map.needs_nonnegative() => {
                policy.scalar_map.apply(lambda.max(0.0))
            }
            _ => policy.scalar_map.apply(lambda),
        };
        mapped.push(value);
    }
    Ok(spectrum.reconstruct_weighted(&mapped))
}

/// Kernel-projected logarithm of a positive semidefinite spectrum.
///
/// `values[k]` is `ln λ_k` on the support and 0 on the kernel. When every
/// support eigenvalue agrees with their mean to `KERNEL_RELATIVE`, the support
/// is treated as exactly flat and `flat` carries the common logarithm; then
/// `ρ B̂ ln ρ = flat · ρ` holds without reassembling eigenvectors.
#[derive(Clone, Debug)]
pub struct ProjectedLog {
    pub values: Vec<f64>,
    pub support: Vec<bool>,
    pub flat: Option<f64>,
}

impl ProjectedLog {
    pub fn new(eigenvalues: &[f64]) -> Self {
        let threshold = kernel_threshold(eigenvalues);
        let support: Vec<bool> = eigenvalues.iter().map(|&l| l >= threshold && l > 0.0).collect();
        let (count, sum) = eigenvalues
            .iter()
            .zip(&support)
            .filter(|(_, &s)| s)
            .fold((0usize, 0.0f64), |(n, s), (&l, _)| (n + 1, s + l));
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let flat = count > 0
            && eigenvalues
                .iter()
                .zip(&support)
                .filter(|(_, &s)| s)
                .all(|(&l, _)| (l - mean).abs() <= KERNEL_RELATIVE * mean);
        let flat_log = if flat { Some(math::ln(mean)) } else { None };
        let values = eigenvalues
            .iter()
            .zip(&support)
            .map(|(&l, &s)| match (s, flat_log) {
                (false, _) => 0.0,
                (true, Some(v)) => v,
                (true, None) => math::ln(l),
            })
            .collect();
        Self { values, support, flat: flat_log }
    }
}

/// A unit-trace, positive semidefinite Hermitian operator with its cached
/// spectral decomposition.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: Operator,
    spectrum: Spectrum,
    log: ProjectedLog,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace (±`TRACE_TOL`) and positivity
    /// (`λ_min >= POSITIVITY_FLOOR`).
    pub fn new(op: Operator) -> Result<Self> {
        op.check_hermitian()?;
        let trace = op.real_trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotUnit { trace });
        }
        let spectrum = eig_unchecked(&op)?;
        if spectrum.min() < POSITIVITY_FLOOR {
            return Err(Error::NotPositive { eigenvalue: spectrum.min() });
        }
        Ok(Self::from_parts(op, spectrum))
    }

    /// Trusts the caller: `spectrum` must decompose `op`.
    pub(crate) fn from_parts(op: Operator, spectrum: Spectrum) -> Self {
        let log = ProjectedLog::new(spectrum.values());
        Self { op, spectrum, log }
    }

    /// Decomposes a Hermitian trial operator without validating trace or
    /// positivity; used for intermediate integrator stages.
    pub(crate) fn trial(op: Operator) -> Result<Self> {
        let spectrum = eig_unchecked(&op)?;
        Ok(Self::from_parts(op, spectrum))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let op = Operator::identity(dim).scale(1.0 / dim as f64);
        let spectrum = Spectrum { values: vec![1.0 / dim as f64; dim], vectors: Mat::identity(dim, dim) };
        Self::from_parts(op, spectrum)
    }

    /// Pure state `|ψ⟩⟨ψ|` after normalizing `psi`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = math::sqrt(psi.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let unit: Vec<C64> = psi.iter().map(|z| *z / norm).collect();
        Self::new(Operator::outer(&unit))
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values()
    }

    pub fn basis(&self) -> Operator {
        self.spectrum.basis()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn n_qubits(&self) -> Result<usize> {
        self.op.n_qubits()
    }

    pub fn kernel_threshold(&self) -> f64 {
        kernel_threshold(self.spectrum.values())
    }

    pub fn projected_log(&self) -> &ProjectedLog {
        &self.log
    }

    /// Rank of the range projector `B̂`.
    pub fn rank(&self) -> usize {
        self.log.support.iter().filter(|&&s| s).count()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.dim()
    }

    /// `B̂ ln ρ`.
    pub fn log_projected(&self) -> Operator {
        self.spectrum.reconstruct_weighted(&self.log.values)
    }

    /// `ρ B̂ ln ρ`.
    pub fn rho_log_rho(&self) -> Operator {
        if let Some(flat) = self.log.flat {
            return self.op.scale(flat);
        }
        let w: Vec<f64> = self.spectrum.values().iter().zip(&self.log.values).map(|(&l, &g)| l * g).collect();
        self.spectrum.reconstruct_weighted(&w)
    }

    /// `√ρ` with kernel eigenvalues (and round-off negatives) mapped to zero.
    pub fn sqrt(&self) -> Operator {
        let w: Vec<f64> = self
            .spectrum
            .values()
            .iter()
            .zip(&self.log.support)
            .map(|(&l, &s)| if s { math::sqrt(l) } else { 0.0 })
            .collect();
        self.spectrum.reconstruct_weighted(&w)
    }

    /// Von Neumann entropy `-tr ρ B̂ ln ρ`.
    pub fn entropy(&self) -> f64 {
        if let Some(flat) = self.log.flat {
            // Consistent with `rho_log_rho`: `s ρ + ρ B̂ ln ρ` vanishes exactly.
            return -flat * self.trace();
        }
        -self.spectrum.values().iter().zip(&self.log.values).map(|(&l, &g)| l * g).sum::<f64>()
    }

    pub fn purity(&self) -> f64 {
        self.spectrum.values().iter().map(|l| l * l).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.min()
    }

    pub fn trace(&self) -> f64 {
        self.op.real_trace()
    }

    /// `Re tr(ρ A)`.
    pub fn expectation(&self, a: &Operator) -> f64 {
        self.op.trace_product(a).re
    }
}

/// `σ^axis` acting on one qubit of an `n_qubits` register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// Embeds a Pauli matrix on `site` with identities elsewhere.
pub fn pauli_on_site(n_qubits: usize, site: usize, axis: PauliAxis) -> Result<Operator> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::InvalidParameter(alloc::format!("n_qubits = {n_qubits} outside 1..=8")));
    }
    if site >= n_qubits {
        return Err(Error::QubitOutOfRange { index: site, n_qubits });
    }
    let dim = 1usize << n_qubits;
    let bit = 1usize << (n_qubits - 1 - site);
    let mut op = Operator::zeros(dim);
    for col in 0..dim {
        let up = col & bit == 0;
        match axis {
            PauliAxis::X => op.set(col ^ bit, col, c(1.0, 0.0)),
            PauliAxis::Y => op.set(col ^ bit, col, if up { c(0.0, 1.0) } else { c(0.0, -1.0) }),
            PauliAxis::Z => op.set(col, col, if up { c(1.0, 0.0) } else { c(-1.0, 0.0) }),
        }
    }
    Ok(op)
}

fn validate_subset(qubits: &[usize], n_qubits: usize) -> Result<usize> {
    if qubits.is_empty() {
        return Err(Error::EmptySubsystem);
    }
    let mut mask = 0usize;
    for &q in qubits {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        let bit = 1usize << (n_qubits - 1 - q);
        if mask & bit != 0 {
            return Err(Error::DuplicateQubit(q));
        }
        mask |= bit;
    }
    Ok(mask)
}

/// Reduced state on `keep` (in the given order), tracing out the rest.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let op = partial_trace_operator(rho.op(), keep)?;
    DensityMatrix::new(op.hermitize())
}

/// Partial trace of an arbitrary operator.
pub fn partial_trace_operator(m: &Operator, keep: &[usize]) -> Result<Operator> {
    let n = m.n_qubits()?;
    let keep_mask = validate_subset(keep, n)?;
    let traced: Vec<usize> = (0..n).filter(|q| keep_mask & (1 << (n - 1 - q)) == 0).collect();
    let kd = 1usize << keep.len();
    let td = 1usize << traced.len();
    // Full-register index for each (kept, traced) pair of sub-indices.
    let place = |sub: usize, qubits: &[usize]| -> usize {
        let k = qubits.len();
        qubits
            .iter()
            .enumerate()
            .filter(|(pos, _)| sub & (1 << (k - 1 - pos)) != 0)
            .fold(0usize, |acc, (_, &q)| acc | 1 << (n - 1 - q))
    };
    let kept_index: Vec<usize> = (0..kd).map(|a| place(a, keep)).collect();
    let traced_index: Vec<usize> = (0..td).map(|t| place(t, &traced)).collect();
    Ok(Operator::from_fn(kd, |a, b| {
        traced_index.iter().map(|&t| m.get(kept_index[a] | t, kept_index[b] | t)).fold(c(0.0, 0.0), |x, y| x + y)
    }))
}

/// Transposes the tensor factors listed in `subsystem`.
pub fn partial_transpose(rho: &DensityMatrix, subsystem: &[usize]) -> Result<Operator> {
    partial_transpose_operator(rho.op(), subsystem)
}

pub fn partial_transpose_operator(m: &Operator, subsystem: &[usize]) -> Result<Operator> {
    let n = m.n_qubits()?;
    let mask = validate_subset(subsystem, n)?;
    if subsystem.len() == n {
        return Err(Error::FullSubsystem);
    }
    Ok(Operator::from_fn(m.dim(), |i, j| {
        let i2 = (i & !mask) | (j & mask);
        let j2 = (j & !mask) | (i & mask);
        m.get(i2, j2)
    }))
}

/// Trace norm `Σ |λ_i|` of a Hermitian operator.
pub fn trace_norm(m: &Operator) -> Result<f64> {
    let spectrum = eig_hermitian(m)?;
    Ok(spectrum.values().iter().map(|l| l.abs()).sum())
}

/// Trace distance `½‖ρ - σ‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    Ok(0.5 * trace_norm(&(a.op() - b.op()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(dim: usize, seed: u64) -> Operator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Operator::zeros(dim);
        for i in 0..dim {
            m.set(i, i, c(rng.random_range(-1.0..1.0), 0.0));
            for j in 0..i {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        m
    }

    pub(crate) fn random_density(n_qubits: usize, seed: u64) -> DensityMatrix {
        let dim = 1 << n_qubits;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Operator::from_fn(dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let w = g.matmul(&g.adjoint());
        let t = w.real_trace();
        DensityMatrix::new(w.scale(1.0 / t).hermitize()).unwrap()
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / math::sqrt(2.0);
        DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap()
    }

    #[test]
    fn eig_of_diagonal_sorts_ascending() {
        let s = eig_hermitian(&Operator::from_real_diagonal(&[2.0, 1.0])).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
        assert!(s.reconstruct().max_abs_diff(&Operator::from_real_diagonal(&[2.0, 1.0])) < 1e-14);
    }

    #[test]
    fn eig_of_sigma_x() {
        let x = pauli_on_site(1, 0, PauliAxis::X).unwrap();
        let s = eig_hermitian(&x).unwrap();
        assert!((s.values()[0] + 1.0).abs() < 1e-14);
        assert!((s.values()[1] - 1.0).abs() < 1e-14);
        // Compare eigenprojectors, not phase-ambiguous vectors.
        let minus = s.projector(|l| l < 0.0);
        let expected = Operator::from_rows(&[&[c(0.5, 0.0), c(-0.5, 0.0)], &[c(-0.5, 0.0), c(0.5, 0.0)]]);
        assert!(minus.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let m = random_hermitian(16, 7);
        let s = eig_hermitian(&m).unwrap();
        assert!(s.reconstruct().max_abs_diff(&m) <= 1e-10);
        assert!(s.unitarity_residual() <= 1e-12);
        assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = Operator::from_rows(&[&[c(1.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)]]);
        match eig_hermitian(&m) {
            Err(Error::NotHermitian { residual, .. }) => assert!((residual - 1.0).abs() < 1e-15),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn sqrt_of_quarter_identity() {
        let m = Operator::identity(4).scale(0.25);
        let r =
            hermitian_function(&m, SpectralFunctionPolicy::new(ScalarMap::Sqrt, KernelPolicy::ErrorOnKernel)).unwrap();
        assert!(r.max_abs_diff(&Operator::identity(4).scale(0.5)) < 1e-14);
    }

    #[test]
    fn projected_log_zeroes_kernel() {
        let m = Operator::from_real_diagonal(&[0.5, 0.5, 0.0, 0.0]);
        let r = hermitian_function(&m, SpectralFunctionPolicy::projected_log()).unwrap();
        let l2 = math::ln(2.0);
        assert!(r.max_abs_diff(&Operator::from_real_diagonal(&[-l2, -l2, 0.0, 0.0])) < 1e-14);
    }

    #[test]
    fn error_on_kernel_reports_eigenvalue() {
        let m = Operator::from_real_diagonal(&[0.5, 0.5, 0.0, 0.0]);
        let policy = SpectralFunctionPolicy::new(ScalarMap::Log, KernelPolicy::ErrorOnKernel);
        assert!(
            matches!(hermitian_function(&m, policy), Err(Error::KernelEigenvalue { eigenvalue }) if eigenvalue == 0.0)
        );
        let neg = Operator::from_real_diagonal(&[1.0, -1e-6]);
        assert!(matches!(
            hermitian_function(&neg, SpectralFunctionPolicy::new(ScalarMap::Sqrt, KernelPolicy::PassThrough)),
            Err(Error::NegativeEigenvalue { .. })
        ));
    }

    /// 30-term Taylor series, used only as an oracle.
    fn exp_series(m: &Operator) -> Operator {
        let mut term = Operator::identity(m.dim());
        let mut sum = term.clone();
        for k in 1..30 {
            term = term.matmul(m).scale(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }

    #[test]
    fn exp_matches_taylor_oracle() {
        let m = random_hermitian(8, 11).scale(0.5);
        let viaeig =
            hermitian_function(&m, SpectralFunctionPolicy::new(ScalarMap::Exp, KernelPolicy::PassThrough)).unwrap();
        assert!(viaeig.max_abs_diff(&exp_series(&m)) <= 1e-10);
    }

    #[test]
    fn log_then_exp_restores_support() {
        let rho = DensityMatrix::new(Operator::from_real_diagonal(&[0.5, 0.3, 0.2, 0.0])).unwrap();
        let log = hermitian_function(rho.op(), SpectralFunctionPolicy::projected_log()).unwrap();
        let back =
            hermitian_function(&log, SpectralFunctionPolicy::new(ScalarMap::Exp, KernelPolicy::PassThrough)).unwrap();
        // exp(0) = 1 on the kernel; restrict to the support before comparing.
        let support = rho.spectrum().projector(|l| l > 1e-12);
        let restricted = support.matmul(&back).matmul(&support);
        assert!(restricted.max_abs_diff(rho.op()) <= 1e-10);
    }

    #[test]
    fn pauli_embeddings() {
        let z = pauli_on_site(1, 0, PauliAxis::Z).unwrap();
        assert_eq!(z, Operator::from_real_diagonal(&[1.0, -1.0]));

        let x1 = pauli_on_site(2, 1, PauliAxis::X).unwrap();
        let expected = Operator::kron(&Operator::identity(2), &pauli_on_site(1, 0, PauliAxis::X).unwrap());
        assert_eq!(x1, expected);

        let x0 = pauli_on_site(2, 0, PauliAxis::X).unwrap();
        let z0 = pauli_on_site(2, 0, PauliAxis::Z).unwrap();
        let z1 = pauli_on_site(2, 1, PauliAxis::Z).unwrap();
        assert!(x0.anticommutator(&z0).max_abs() < 1e-15);
        assert!(x0.commutator(&z1).max_abs() < 1e-15);
        for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
            let p = pauli_on_site(3, 2, axis).unwrap();
            assert!(p.matmul(&p).max_abs_diff(&Operator::identity(8)) < 1e-15);
            assert!(p.trace().l1_norm() < 1e-15);
        }
        assert!(matches!(pauli_on_site(2, 2, PauliAxis::X), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let a = DensityMatrix::new(Operator::from_rows(&[&[c(0.7, 0.0), c(0.1, 0.2)], &[c(0.1, -0.2), c(0.3, 0.0)]]))
            .unwrap();
        let b = DensityMatrix::new(Operator::from_real_diagonal(&[0.25, 0.75])).unwrap();
        let ab = DensityMatrix::new(Operator::kron(a.op(), b.op())).unwrap();
        assert!(partial_trace(&ab, &[0]).unwrap().op().max_abs_diff(a.op()) < 1e-15);
        assert!(partial_trace(&ab, &[1]).unwrap().op().max_abs_diff(b.op()) < 1e-15);

        let reduced = partial_trace(&bell(), &[0]).unwrap();
        assert!(reduced.op().max_abs_diff(&Operator::identity(2).scale(0.5)) < 1e-15);
    }

    /// Naive index-summation oracle for a single kept qubit.
    fn naive_single_qubit_trace(rho: &Operator, n: usize, q: usize) -> Operator {
        let mut out = Operator::zeros(2);
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = c(0.0, 0.0);
                for i in 0..rho.dim() {
                    for j in 0..rho.dim() {
                        let bi = (i >> (n - 1 - q)) & 1;
                        let bj = (j >> (n - 1 - q)) & 1;
                        let rest_i = i & !(1 << (n - 1 - q));
                        let rest_j = j & !(1 << (n - 1 - q));
                        if bi == a && bj == b && rest_i == rest_j {
                            acc += rho.get(i, j);
                        }
                    }
                }
                out.set(a, b, acc);
            }
        }
        out
    }

    #[test]
    fn partial_trace_matches_index_oracle() {
        let rho = random_density(8, 3);
        let reduced = partial_trace(&rho, &[3]).unwrap();
        assert!((reduced.trace() - 1.0).abs() < 1e-12);
        assert!(reduced.min_eigenvalue() >= -1e-12);
        assert!(reduced.op().max_abs_diff(&naive_single_qubit_trace(rho.op(), 8, 3)) <= 1e-12);
    }

    #[test]
    fn partial_trace_composes() {
        let rho = random_density(4, 5);
        // Trace out qubit 3, then (in the reduced register) qubit 0.
        let step = partial_trace(&rho, &[0, 1, 2]).unwrap();
        let twice = partial_trace(&step, &[1, 2]).unwrap();
        let once = partial_trace(&rho, &[1, 2]).unwrap();
        assert!(twice.op().max_abs_diff(once.op()) <= 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_sets() {
        let rho = random_density(2, 1);
        assert_eq!(partial_trace(&rho, &[]).unwrap_err(), Error::EmptySubsystem);
        assert_eq!(partial_trace(&rho, &[1, 1]).unwrap_err(), Error::DuplicateQubit(1));
    }

    #[test]
    fn partial_transpose_bell_and_product() {
        let pt = partial_transpose(&bell(), &[1]).unwrap();
        let s = eig_hermitian(&pt).unwrap();
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in s.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((trace_norm(&pt).unwrap() - 2.0).abs() < 1e-14);

        let a = DensityMatrix::new(Operator::from_rows(&[&[c(0.6, 0.0), c(0.1, 0.3)], &[c(0.1, -0.3), c(0.4, 0.0)]]))
            .unwrap();
        let prod = DensityMatrix::new(Operator::kron(a.op(), a.op())).unwrap();
        let spt = eig_hermitian(&partial_transpose(&prod, &[1]).unwrap()).unwrap();
        for (x, y) in spt.values().iter().zip(prod.eigenvalues()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(partial_transpose(&prod, &[0, 1]).unwrap_err(), Error::FullSubsystem);
        assert_eq!(partial_transpose(&prod, &[]).unwrap_err(), Error::EmptySubsystem);
    }

    #[test]
    fn partial_transpose_is_involution() {
        let rho = random_density(3, 9);
        let once = partial_transpose(&rho, &[0, 2]).unwrap();
        let twice = partial_transpose_operator(&once, &[0, 2]).unwrap();
        assert!(twice.max_abs_diff(rho.op()) <= 1e-14);
        assert!(once.is_hermitian());
        assert!((once.real_trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&Operator::from_real_diagonal(&[1.0, -2.0])).unwrap() - 3.0).abs() < 1e-15);
        assert!((trace_norm(random_density(3, 2).op()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        assert!(matches!(
            DensityMatrix::new(Operator::from_real_diagonal(&[0.5, 0.4])),
            Err(Error::TraceNotUnit { .. })
        ));
        assert!(matches!(
            DensityMatrix::new(Operator::from_real_diagonal(&[1.1, -0.1])),
            Err(Error::NotPositive { .. })
        ));
        let rho = random_density(2, 4);
        assert!(
            rho.basis()
                .matmul(&Operator::from_real_diagonal(rho.eigenvalues()))
                .matmul(&rho.basis().adjoint())
                .max_abs_diff(rho.op())
                <= 1e-10
        );
    }

    #[test]
    fn flat_support_log_is_exact() {
        let rho =
            DensityMatrix::new(Operator::from_real_diagonal(&[0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(rho.rank(), 4);
        let rlr = rho.rho_log_rho();
        let entropy = rho.entropy();
        assert_eq!(rlr.add_scaled(entropy, rho.op()).max_abs(), 0.0);
    }
}
