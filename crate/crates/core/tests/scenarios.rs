use toric_seaqt_core::engine::{
    integrate, moments, rhs, CouplingMode, DynamicsParams, Hamiltonian, IntegrateOptions, Trajectory,
};
use toric_seaqt_core::hermitian::{eig_hermitian, partial_trace};
use toric_seaqt_core::lattice::{
    build_torus, ground_state, hamiltonian, magnetization_operator, prepare_initial_state, PerturbationSpec,
    ToricLattice,
};
use toric_seaqt_core::measures::{
    coherent_information, equilibrium_curve, geometric_entropy, region_hamiltonian, GeometricRegion, ReferenceState,
};
use toric_seaqt_core::DensityMatrix;

const LN_2: f64 = core::f64::consts::LN_2;

fn setup(rows: usize, cols: usize) -> (ToricLattice, Hamiltonian) {
    let lattice = build_torus(rows, cols).unwrap();
    let h = Hamiltonian::new(hamiltonian(&lattice)).unwrap();
    (lattice, h)
}

fn run(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    params: &DynamicsParams,
    tracked: Vec<toric_seaqt_core::Operator>,
) -> Trajectory {
    let options = IntegrateOptions { observer_stride: 50, keep_states: true, tracked };
    integrate(rho0, h, params, &options, |_| Ok(())).unwrap()
}

#[test]
fn recipe_on_three_cell_ring_is_full_rank_with_stable_anchors() {
    let (lattice, h) = setup(1, 3);
    let rho = prepare_initial_state(&lattice, &PerturbationSpec::for_lattice(&lattice, 0.4)).unwrap();
    // The floor puts every kernel direction at exactly δ/d; the computed
    // eigenvalues carry the solver's backward error of a few ε·λ_max.
    let lambda_max = rho.eigenvalues().iter().copied().fold(0.0, f64::max);
    assert!(rho.min_eigenvalue() >= 1e-3 / 64.0 - 4.0 * f64::EPSILON * lambda_max);
    assert!((rho.trace() - 1.0).abs() <= 1e-12);
    let m = moments(&rho, &h, None).unwrap();
    // Energy sits just above the ground level −6 and below the spectrum's centre.
    assert!(m.e > -6.0 && m.e < 0.0, "e = {}", m.e);
    assert!(m.s > 0.0 && m.s < 64f64.ln());
    let again = prepare_initial_state(&lattice, &PerturbationSpec::for_lattice(&lattice, 0.4)).unwrap();
    assert_eq!(moments(&again, &h, None).unwrap().e, m.e);
    assert_eq!(moments(&again, &h, None).unwrap().s, m.s);
}

#[test]
fn ground_states_are_stationary_in_both_modes_of_isolation() {
    for (r, c) in [(1, 1), (1, 2), (1, 3), (2, 2)] {
        let (lattice, h) = setup(r, c);
        let rho0 = ground_state(&lattice);
        assert_eq!(rhs(&rho0, &h, &DynamicsParams::default()).unwrap().max_abs(), 0.0, "({r},{c})");
    }
}

#[test]
fn two_by_two_ground_state_spectrum_and_regions() {
    let (lattice, _) = setup(2, 2);
    let rho0 = ground_state(&lattice);
    let mut nonzero: Vec<f64> = rho0.eigenvalues().iter().copied().filter(|&x| x > 1e-12).collect();
    nonzero.sort_by(f64::total_cmp);
    assert_eq!(nonzero.len(), 4);
    for x in nonzero {
        assert!((x - 0.25).abs() <= 1e-14);
    }
    let region = GeometricRegion::single_spin(3, 1.0);
    let h_a = Hamiltonian::new(region_hamiltonian(&lattice, &region.qubits).unwrap()).unwrap();
    let s_a = geometric_entropy(&rho0, &region, &h_a, 1e-12).unwrap().entropy;
    assert!((s_a - LN_2).abs() <= 1e-12);

    // Complement of one spin: compare with an explicit partial trace.
    let rest = region.complement(8);
    let h_b = Hamiltonian::new(region_hamiltonian(&lattice, &rest.qubits).unwrap()).unwrap();
    let s_b = geometric_entropy(&rho0, &rest, &h_b, 1e-12).unwrap().entropy;
    let reduced = partial_trace(&rho0, &rest.qubits).unwrap();
    let oracle: f64 =
        eig_hermitian(reduced.op()).unwrap().values().iter().filter(|&&x| x > 1e-14).map(|&x| -x * x.ln()).sum();
    assert!((s_b - oracle).abs() <= 1e-12);
    // Araki–Lieb: |S_A − S_B| ≤ S(ρ0) = ln 4.
    assert!((s_b - s_a).abs() <= 4f64.ln() + 1e-12);
}

#[test]
fn single_cell_relative_entropy_rate_mirrors_the_entropy_rate() {
    let (lattice, h) = setup(1, 1);
    let spec = PerturbationSpec { entangle_eta: 0.6, ..PerturbationSpec::for_lattice(&lattice, 0.3) };
    let rho0 = prepare_initial_state(&lattice, &spec).unwrap();
    let params = DynamicsParams { t_end: 2.0, ..DynamicsParams::default() };
    let reference = ReferenceState::new(&ground_state(&lattice));
    // tr ρ B̂ ln ρ0 is linear in ρ, so D(ρ‖ρ0) = −s − ⟨B̂ ln ρ0⟩ has a fine series.
    let t = run(&rho0, &h, &params, vec![reference.log().clone()]);
    let d: Vec<f64> = t.fine.entropy.iter().zip(&t.fine.tracked[0]).map(|(s, l)| -s - l).collect();
    for &step in &t.sample_steps {
        let dd = t.derivative(&d, step);
        let ds = t.derivative(&t.fine.entropy, step);
        assert!((dd + ds).abs() <= 1e-8, "step {step}: {dd} vs {ds}");
    }
    for (state, &step) in t.states.iter().zip(&t.sample_steps) {
        let rel = reference.relative_entropy(state).unwrap();
        assert!((rel.value - d[step]).abs() <= 1e-12);
        assert!((rel.term_sigma + 4f64.ln()).abs() <= 1e-12);
    }
}

#[test]
fn single_cell_entropy_never_decreases_over_six_relaxation_times() {
    let (lattice, h) = setup(1, 1);
    for px in [0.1, 0.5, 0.9] {
        for eta in [0.0, 0.6] {
            let spec = PerturbationSpec { entangle_eta: eta, ..PerturbationSpec::for_lattice(&lattice, px) };
            let rho0 = prepare_initial_state(&lattice, &spec).unwrap();
            let params = DynamicsParams { t_end: 6.0, ..DynamicsParams::default() };
            let t = run(&rho0, &h, &params, Vec::new());
            assert!(t.fine.entropy.windows(2).all(|w| w[1] - w[0] >= -1e-10), "p_x {px}, η {eta}");
        }
    }
}

#[test]
fn magnetization_rate_matches_finite_differences() {
    let (lattice, h) = setup(1, 2);
    let rho0 = prepare_initial_state(&lattice, &PerturbationSpec::for_lattice(&lattice, 0.4)).unwrap();
    let m_op = magnetization_operator(4);
    for mode in [CouplingMode::Isolated, CouplingMode::Reservoir { beta_r: 0.25 }] {
        let params = DynamicsParams { t_end: 1.0, ..DynamicsParams::default() }.with_mode(mode);
        let t = run(&rho0, &h, &params, vec![m_op.clone()]);
        let rates: Vec<f64> = t
            .states
            .iter()
            .map(|s| {
                let (a, b) = toric_seaqt_core::engine::observable_rate(s, &h, &params, &m_op).unwrap();
                a + b
            })
            .collect();
        let scale = rates.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for (&step, &rate) in t.sample_steps.iter().zip(&rates) {
            let fd = t.derivative(&t.fine.tracked[0], step);
            assert!((fd - rate).abs() <= 1e-6 * scale, "{mode:?} step {step}: {fd} vs {rate}");
        }
    }
}

#[test]
fn reservoir_temperature_sets_the_sign_of_the_coherent_information_rate() {
    let (lattice, h) = setup(1, 2);
    let rho0 = prepare_initial_state(&lattice, &PerturbationSpec::for_lattice(&lattice, 0.4)).unwrap();
    let beta0 = moments(&rho0, &h, None).unwrap().beta.unwrap();
    assert!(beta0 > 0.05 && beta0 < 0.25, "initial β = {beta0}");
    let iso = DynamicsParams { t_end: 0.5, ..DynamicsParams::default() };
    let isolated = run(&rho0, &h, &iso, Vec::new());
    // A hotter reservoir (β_R < β(0)) gains entropy faster than isolation:
    // I_c starts at 0 and falls. A colder one makes it rise.
    for (beta_r, sign) in [(0.05, -1.0), (0.25, 1.0)] {
        let res = iso.with_mode(CouplingMode::Reservoir { beta_r });
        let ic = coherent_information(&isolated, &run(&rho0, &h, &res, Vec::new()), 1.0).unwrap();
        assert_eq!(ic[0].value, 0.0);
        assert!(sign * ic[0].rate > 0.0, "β_R = {beta_r}: rate {}", ic[0].rate);
        assert!(sign * ic[1].value > 0.0, "β_R = {beta_r}: I_c {}", ic[1].value);
    }
}

#[test]
fn equilibrium_curves_on_the_toric_lattices() {
    // A strongly cold canonical state spreads over the four-fold ground space.
    let (_, h) = setup(1, 2);
    let cold = equilibrium_curve(h.op(), &[50.0]).unwrap();
    assert!((cold[0].entropy - 4f64.ln()).abs() <= 1e-3);
    assert!((cold[0].energy + 4.0).abs() <= 1e-3);

    for (r, c) in [(1, 2), (1, 3)] {
        let (_, h) = setup(r, c);
        let grid: Vec<f64> = (-20..=20).map(|k| f64::from(k) * 0.25).collect();
        let curve = equilibrium_curve(h.op(), &grid).unwrap();
        let mid = curve.len() / 2;
        assert_eq!(curve[mid].beta, 0.0);
        assert!(curve[mid].energy.abs() <= 1e-12);
        assert!((curve[mid].entropy - (h.dim() as f64).ln()).abs() <= 1e-12);
        // ±β mirror in energy exactly when the spectrum is symmetric about
        // its midpoint: true on the 1×2 torus, false on the 1×3 ring.
        let values = eig_hermitian(h.op()).unwrap().values().to_vec();
        let n = values.len();
        let symmetric = (0..n).all(|k| (values[k] + values[n - 1 - k]).abs() <= 1e-12);
        assert_eq!(symmetric, (r, c) == (1, 2));
        for k in 0..mid {
            let (a, b) = (&curve[k], &curve[curve.len() - 1 - k]);
            if symmetric {
                assert!((a.energy + b.energy).abs() <= 1e-10);
                assert!((a.entropy - b.entropy).abs() <= 1e-10);
            }
            assert!(curve[mid].entropy >= a.entropy);
        }
    }

    // The single cell is degenerate: every β gives I/4 at e = −2.
    let (_, h) = setup(1, 1);
    for p in equilibrium_curve(h.op(), &[-5.0, 0.0, 5.0]).unwrap() {
        assert!((p.energy + 2.0).abs() <= 1e-12);
        assert!((p.entropy - 4f64.ln()).abs() <= 1e-12);
    }
}
