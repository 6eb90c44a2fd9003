use proptest::prelude::*;

use toric_seaqt_core::engine::{
    dissipator_determinant_oracle, dissipator_isolated, moments, observable_rate, rhs, CouplingMode, DynamicsParams,
    Hamiltonian, DEFAULT_DEGENERACY_EPSILON,
};
use toric_seaqt_core::hermitian::{
    eig_hermitian, hermitian_function, partial_trace, partial_transpose_operator, trace_distance, KernelPolicy,
    ScalarMap, SpectralFunctionPolicy,
};
use toric_seaqt_core::lattice::{build_torus, gue_sample, hamiltonian, magnetization_operator, pauli_channel};
use toric_seaqt_core::measures::{gibbs_state, log_negativity, relative_entropy, von_neumann_entropy};
use toric_seaqt_core::{DensityMatrix, Operator};

/// A seeded full-rank state `exp(κG)/tr` with `G` of unit spectral radius.
fn state(dim: usize, seed: u64, kappa: f64) -> DensityMatrix {
    let g = gue_sample(dim, seed).scale(kappa);
    let e = hermitian_function(&g, SpectralFunctionPolicy::new(ScalarMap::Exp, KernelPolicy::PassThrough)).unwrap();
    let t = e.real_trace();
    DensityMatrix::new(e.scale(1.0 / t).hermitize()).unwrap()
}

fn toric(rows: usize, cols: usize) -> Hamiltonian {
    Hamiltonian::new(hamiltonian(&build_torus(rows, cols).unwrap())).unwrap()
}

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(4usize), Just(8), Just(16)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_reconstructs(dim in dims(), seed in any::<u64>()) {
        let g = gue_sample(dim, seed);
        let spectrum = eig_hermitian(&g).unwrap();
        prop_assert!(spectrum.reconstruct().max_abs_diff(&g) <= 1e-10);
        prop_assert!(spectrum.unitarity_residual() <= 1e-10);
        prop_assert!(spectrum.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn partial_trace_is_a_unit_trace_state(seed in any::<u64>(), keep in proptest::sample::subsequence(vec![0usize, 1, 2, 3], 1..4)) {
        let rho = state(16, seed, 3.0);
        let reduced = partial_trace(&rho, &keep).unwrap();
        prop_assert_eq!(reduced.dim(), 1 << keep.len());
        prop_assert!((reduced.trace() - 1.0).abs() <= 1e-12);
        prop_assert!(reduced.min_eigenvalue() >= -1e-12);
        // Reduced states of full-rank states are full rank.
        prop_assert!(reduced.is_full_rank());
    }

    #[test]
    fn partial_transpose_preserves_trace_and_hermiticity(seed in any::<u64>(), sub in proptest::sample::subsequence(vec![0usize, 1, 2], 1..3)) {
        let rho = state(8, seed, 2.0);
        let pt = partial_transpose_operator(rho.op(), &sub).unwrap();
        prop_assert!((pt.trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(pt.hermiticity_residual() <= 1e-15);
        let back = partial_transpose_operator(&pt, &sub).unwrap();
        prop_assert_eq!(back.max_abs_diff(rho.op()), 0.0);
    }

    #[test]
    fn single_qubit_cut_negativity_is_bounded(seed in any::<u64>(), kappa in 0.5f64..12.0) {
        let rho = state(4, seed, kappa);
        let ln_n = log_negativity(&rho, &[1]).unwrap();
        prop_assert!(ln_n >= 0.0);
        prop_assert!(ln_n <= core::f64::consts::LN_2 + 1e-12);
        prop_assert_eq!(ln_n, log_negativity(&rho, &[0]).unwrap());
    }

    #[test]
    fn relative_entropy_to_the_mixed_state_complements_entropy(dim in dims(), seed in any::<u64>(), kappa in 0.1f64..8.0) {
        let rho = state(dim, seed, kappa);
        let d = relative_entropy(&rho, &DensityMatrix::maximally_mixed(dim)).unwrap();
        prop_assert!((d.value + von_neumann_entropy(&rho) - (dim as f64).ln()).abs() <= 1e-12);
        prop_assert!(d.value >= -1e-12);
    }

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), other in any::<u64>()) {
        let rho = state(8, seed, 2.0);
        let sigma = state(8, other, 2.0);
        prop_assert!(relative_entropy(&rho, &sigma).unwrap().value >= -1e-12);
        prop_assert!(relative_entropy(&rho, &rho).unwrap().value.abs() <= 1e-12);
    }

    #[test]
    fn isolated_dissipator_conserves_trace_and_energy(dim in prop_oneof![Just(4usize), Just(16)], seed in any::<u64>()) {
        let rho = state(dim, seed, 3.0);
        let h = Hamiltonian::new(gue_sample(dim, seed.wrapping_add(1))).unwrap();
        let d = dissipator_isolated(&rho, &h, 1.0, DEFAULT_DEGENERACY_EPSILON).unwrap();
        prop_assert!(d.trace().norm_sqr().sqrt() <= 1e-12);
        prop_assert!(h.op().trace_product(&d).re.abs() <= 1e-10);
        prop_assert!(d.hermiticity_residual() <= 1e-14);
        let m = moments(&rho, &h, None).unwrap();
        prop_assert!(m.entropy_production >= -1e-12);
        // ρ̇ = −D (plus a commutator that does not change s), so
        // ds/dt = tr(D ln ρ) for traceless D; with τ = 1 this is the production.
        let ds = rho.log_projected().trace_product(&d).re;
        prop_assert!((ds - m.entropy_production).abs() <= 1e-10 * (1.0 + m.entropy_production.abs()));
    }

    #[test]
    fn determinant_and_simplified_forms_agree(dim in prop_oneof![Just(4usize), Just(16)], seed in any::<u64>(), tau in 0.2f64..5.0) {
        let rho = state(dim, seed, 2.0);
        let h = Hamiltonian::new(gue_sample(dim, !seed)).unwrap();
        let a = dissipator_isolated(&rho, &h, tau, DEFAULT_DEGENERACY_EPSILON).unwrap();
        let b = dissipator_determinant_oracle(&rho, &h, tau, DEFAULT_DEGENERACY_EPSILON).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-10);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian_in_both_modes(seed in any::<u64>(), beta_r in -2.0f64..2.0) {
        let rho = state(16, seed, 3.0);
        let h = toric(1, 2);
        for mode in [CouplingMode::Isolated, CouplingMode::Reservoir { beta_r }] {
            let params = DynamicsParams::default().with_mode(mode);
            let r = rhs(&rho, &h, &params).unwrap();
            prop_assert!(r.trace().norm_sqr().sqrt() <= 1e-12);
            prop_assert!(r.hermiticity_residual() <= 1e-13);
        }
    }

    #[test]
    fn reservoir_energy_rate_has_the_sign_of_the_temperature_gap(seed in any::<u64>(), beta_r in -2.0f64..2.0) {
        let rho = state(16, seed, 3.0);
        let h = toric(1, 2);
        let m = moments(&rho, &h, None).unwrap();
        let beta = m.beta.unwrap();
        let params = DynamicsParams::default().with_mode(CouplingMode::Reservoir { beta_r });
        let (symplectic, dissipative) = observable_rate(&rho, &h, &params, h.op()).unwrap();
        prop_assert!(symplectic.abs() <= 1e-12);
        let expected = m.a_ee * (beta - beta_r) / params.tau;
        prop_assert!((dissipative - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
    }

    // Recovering β divides by the energy variance, so round-off grows like
    // ‖H‖²ε/A_ee; |β| ≤ 2 keeps the variance large enough for 1e-10.
    #[test]
    fn canonical_states_are_fixed_points_with_their_own_temperature(beta in -2.0f64..2.0, shape in prop_oneof![Just((1usize, 2usize)), Just((1, 3))]) {
        let h = toric(shape.0, shape.1);
        let g = gibbs_state(h.op(), beta).unwrap();
        prop_assert!(rhs(&g, &h, &DynamicsParams::default()).unwrap().max_abs() <= 1e-12);
        let recovered = moments(&g, &h, None).unwrap().beta.unwrap();
        prop_assert!((recovered - beta).abs() <= 1e-10);
    }

    #[test]
    fn pauli_channel_is_trace_preserving_and_contractive(seed in any::<u64>(), other in any::<u64>(), p in 0.0f64..=1.0, site in 0usize..4) {
        let rho = state(16, seed, 3.0);
        let sigma = state(16, other, 3.0);
        let before = trace_distance(&rho, &sigma).unwrap();
        let (a, b) = (
            pauli_channel(&rho, site, toric_seaqt_core::hermitian::PauliAxis::X, p).unwrap(),
            pauli_channel(&sigma, site, toric_seaqt_core::hermitian::PauliAxis::X, p).unwrap(),
        );
        prop_assert!((a.trace() - 1.0).abs() <= 1e-12);
        prop_assert!(trace_distance(&a, &b).unwrap() <= before + 1e-12);
    }

    #[test]
    fn magnetization_rate_is_the_trace_against_the_rhs(seed in any::<u64>()) {
        let rho = state(16, seed, 3.0);
        let h = toric(1, 2);
        let params = DynamicsParams::default().with_mode(CouplingMode::Reservoir { beta_r: 0.25 });
        let m_op = magnetization_operator(4);
        let (s, d) = observable_rate(&rho, &h, &params, &m_op).unwrap();
        let direct = m_op.trace_product(&rhs(&rho, &h, &params).unwrap()).re;
        prop_assert!((s + d - direct).abs() <= 1e-12);
    }
}

#[test]
fn kron_of_states_has_additive_entropy() {
    let a = state(4, 1, 2.0);
    let b = state(4, 2, 2.0);
    let ab = DensityMatrix::new(Operator::kron(a.op(), b.op())).unwrap();
    let sum = von_neumann_entropy(&a) + von_neumann_entropy(&b);
    assert!((von_neumann_entropy(&ab) - sum).abs() <= 1e-12);
    assert_eq!(log_negativity(&ab, &[0, 1]).unwrap(), 0.0);
}
