use pauliprop::oracle::{dense_heisenberg_coefficients, dense_trotter_trajectory};
use pauliprop::propagation::staggered_observable;
use pauliprop::verify::{max_abs_difference, random_hamiltonian, random_normalized_sum, rng};
use pauliprop::{
    backpropagate, build_xxz_chain, staggered_magnetization, Boundary, HeisenbergEvolution,
    MagnetizationMode, PauliSum, ProductState, RunConfig, TruncationPolicy,
};
use proptest::prelude::*;

#[test]
fn untruncated_chain_matches_dense_trajectory() {
    let h = build_xxz_chain(6, 1.0, 0.8, 0.5, Boundary::Periodic).unwrap();
    let state = ProductState::uniform(6, [0.6, 0.0, 0.8]).unwrap();
    let obs = staggered_observable(6).unwrap();
    let cfg = RunConfig {
        record_every: 3,
        ..RunConfig::new(1.5, 30, TruncationPolicy::unbounded())
    };
    let run = backpropagate(&obs, &h, &cfg, &state).unwrap();
    let dense = dense_trotter_trajectory(&h, &state, &obs, 1.5, 30, 3).unwrap();
    let dense: Vec<_> = dense.into_iter().filter(|r| r.0 > 0).collect();
    assert_eq!(run.trajectory.len(), dense.len());
    for (r, (step, time, value)) in run.trajectory.iter().zip(dense) {
        assert_eq!(r.step, step);
        assert!((r.time - time).abs() < 1e-15);
        assert!((r.value - value).abs() < 1e-12, "step {step}");
    }
    let coeffs = dense_heisenberg_coefficients(&h, &obs, 1.5, 30).unwrap();
    assert!(max_abs_difference(&run.operator, &coeffs) < 1e-12);
}

#[test]
fn modes_agree_without_truncation() {
    let h = build_xxz_chain(8, 1.0, 1.0, 0.5, Boundary::Open).unwrap();
    let cfg = RunConfig::new(1.0, 20, TruncationPolicy::unbounded());
    let neel = ProductState::neel(8);
    let a = staggered_magnetization(&h, &neel, &cfg, MagnetizationMode::PerSite).unwrap();
    let b = staggered_magnetization(&h, &neel, &cfg, MagnetizationMode::Joint).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.value - y.value).abs() < 1e-12);
    }
}

#[test]
fn truncated_norm_never_grows() {
    let h = build_xxz_chain(10, 1.0, 1.0, 0.5, Boundary::Open).unwrap();
    let obs = staggered_observable(10).unwrap();
    let mut evo = HeisenbergEvolution::new(obs, &h, 0.05, TruncationPolicy::top_k(200)).unwrap();
    let mut last = evo.norm_ratio();
    for _ in 0..40 {
        evo.step().unwrap();
        assert!(evo.norm_ratio() <= last + 1e-12);
        last = evo.norm_ratio();
    }
    assert!(last < 1.0);
    assert!((evo.rescaled_operator().pauli_norm2() - evo.initial_norm()).abs() < 1e-12);
}

#[test]
fn evolved_operator_dump_round_trips() {
    let h = build_xxz_chain(7, 1.0, 1.0, 0.3, Boundary::Open).unwrap();
    let obs = staggered_observable(7).unwrap();
    let mut evo = HeisenbergEvolution::new(obs, &h, 0.1, TruncationPolicy::top_k(300)).unwrap();
    for _ in 0..5 {
        evo.step().unwrap();
    }
    let text = evo.operator().to_dump(&["step = 5".to_string()]);
    assert_eq!(&PauliSum::parse_dump(&text).unwrap(), evo.operator());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // rotations preserve Σc², so whatever the policy drops is accounted for exactly
    #[test]
    fn discarded_mass_balances_the_norm(seed in any::<u64>(), k in 1usize..40, n in 2usize..6) {
        let mut r = rng(seed);
        let h = random_hamiltonian(&mut r, n);
        let obs = random_normalized_sum(&mut r, n, 3, false);
        let mut evo = HeisenbergEvolution::new(obs, &h, 0.07, TruncationPolicy::top_k(k)).unwrap();
        for _ in 0..6 {
            if evo.step().is_err() {
                break;
            }
        }
        let kept = evo.operator().norm_squared();
        prop_assert!((kept + evo.discarded_mass() - 1.0).abs() < 1e-10);
    }
}
