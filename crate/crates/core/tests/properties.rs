use nalgebra::DVector;
use proptest::prelude::*;

use qdchain::entangler::{
    entangler_chain, exchange_unitary, run_protocol_trajectory, spin_basis, ProtocolOptions, ProtocolSchedule,
    SpinAmplitudes,
};
use qdchain::hamiltonian::build;
use qdchain::hilbert::{index_2e, pair_2e, SectorBasis, SectorKind, Spin, SpinLabel, StateVector, C64};
use qdchain::model::{sample_disorder, ChainParams, DisorderSpec};
use qdchain::propagate::{Method, Propagator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain(max_n: usize) -> impl Strategy<Value = ChainParams> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(0.2..1.5f64, n - 1),
            0.0..3.0f64,
            0.0..1.0f64,
        )
            .prop_map(|(eps, t, v, gamma)| ChainParams::new(eps, t, v, None, gamma).unwrap())
    })
}

fn random_state(kind: SectorKind, n: usize, seed: u64) -> StateVector {
    use rand::Rng;
    let basis = match kind {
        SectorKind::OneElectron => SectorBasis::one_electron(n),
        SectorKind::TwoElectron => SectorBasis::two_electron(n),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = DVector::from_fn(basis.dim(), |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let spins = match kind {
        SectorKind::OneElectron => SpinLabel::One(Spin::Up),
        SectorKind::TwoElectron => SpinLabel::Pair(Spin::Up, Spin::Down),
    };
    StateVector::new(basis, spins, amps).unwrap().normalized()
}

fn sector() -> impl Strategy<Value = SectorKind> {
    prop_oneof![Just(SectorKind::OneElectron), Just(SectorKind::TwoElectron)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pair_index_is_a_bijection(n in 2usize..40) {
        let dim = SectorBasis::two_electron(n).dim();
        let mut seen = vec![false; dim];
        for i in 1..n {
            for j in i + 1..=n {
                let k = index_2e(i, j, n).unwrap();
                prop_assert!(!seen[k]);
                seen[k] = true;
                prop_assert_eq!(pair_2e(k, n).unwrap(), (i, j));
            }
        }
        prop_assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn closed_chain_conserves_norm_and_electron_number(p in chain(9), kind in sector(), seed in any::<u64>(), tau in 0.0..40.0f64) {
        let p = p.with_gamma(0.0).unwrap();
        let psi = random_state(kind, p.n, seed);
        let prop = Propagator::new(&build(&p, kind).unwrap(), Method::Spectral, 1e-10).unwrap();
        let out = psi.with_amps(prop.advance(&psi.amps, 0.0, tau).unwrap());
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
        let electrons: f64 = out.occupations().iter().sum();
        prop_assert!((electrons - kind.electrons() as f64).abs() < 1e-9);
    }

    #[test]
    fn detector_norm_never_grows(p in chain(8), kind in sector(), seed in any::<u64>()) {
        let psi = random_state(kind, p.n, seed);
        let prop = Propagator::new(&build(&p, kind).unwrap(), Method::Spectral, 1e-10).unwrap();
        let mut last = 1.0 + 1e-12;
        for k in 0..40 {
            let norm = prop.advance(&psi.amps, 0.0, 0.5 * k as f64).unwrap().norm_squared();
            prop_assert!(norm <= last + 1e-10);
            last = norm;
        }
    }

    #[test]
    fn evolution_is_linear(p in chain(7), kind in sector(), s1 in any::<u64>(), s2 in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let (x, y) = (random_state(kind, p.n, s1), random_state(kind, p.n, s2));
        let prop = Propagator::new(&build(&p, kind).unwrap(), Method::Spectral, 1e-10).unwrap();
        let (ca, cb) = (C64::new(a, 0.3), C64::new(0.0, b));
        let combined = prop.advance(&(&x.amps * ca + &y.amps * cb), 0.0, 3.7).unwrap();
        let separate = prop.advance(&x.amps, 0.0, 3.7).unwrap() * ca + prop.advance(&y.amps, 0.0, 3.7).unwrap() * cb;
        prop_assert!((combined - separate).norm() < 1e-9);
    }

    #[test]
    fn spectral_and_stepping_agree(p in chain(6), kind in sector(), seed in any::<u64>(), tau in 0.0..8.0f64) {
        let h = build(&p, kind).unwrap();
        let psi = random_state(kind, p.n, seed);
        let exact = Propagator::new(&h, Method::Spectral, 1e-12).unwrap().advance(&psi.amps, 0.0, tau).unwrap();
        let stepped = Propagator::new(&h, Method::Stepping, 1e-12).unwrap().advance(&psi.amps, 0.0, tau).unwrap();
        prop_assert!((exact - stepped).norm() < 1e-8);
    }

    #[test]
    fn mirror_symmetric_chain_mirrors_transport(n in 2usize..16, optimal in any::<bool>(), tau in 0.0..20.0f64) {
        let p = if optimal { ChainParams::optimal(n, 1.0) } else { ChainParams::uniform(n, 1.0) }.unwrap();
        let prop = Propagator::new(&build(&p, SectorKind::OneElectron).unwrap(), Method::Spectral, 1e-12).unwrap();
        let from_left = prop.advance(&StateVector::one_electron(n, 1, Spin::Up).unwrap().amps, 0.0, tau).unwrap();
        let from_right = prop.advance(&StateVector::one_electron(n, n, Spin::Up).unwrap().amps, 0.0, tau).unwrap();
        for j in 0..n {
            prop_assert!((from_left[j] - from_right[n - 1 - j]).norm() < 1e-10);
        }
    }

    #[test]
    fn exchange_is_a_one_parameter_unitary_group(t1 in -10.0..10.0f64, t2 in -10.0..10.0f64) {
        let u1 = exchange_unitary(t1);
        prop_assert!((u1.adjoint() * u1 - nalgebra::Matrix4::identity()).norm() < 1e-12);
        prop_assert!((u1 * exchange_unitary(t2) - exchange_unitary(t1 + t2)).norm() < 1e-12);
        let same = u1 * spin_basis(Spin::Down, Spin::Down);
        prop_assert!((same[3].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disorder_keeps_barriers_closed(seed in any::<u64>(), d_eps in 0.0..0.5f64, d_t in 0.0..0.5f64) {
        let p = entangler_chain(10, 5, 1.0).unwrap();
        let spec = DisorderSpec::new(d_eps, d_t, seed).unwrap();
        let draw = sample_disorder(&p, &spec, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(draw.bond(5), 0.0);
        prop_assert_eq!(draw.couplings.len(), 9);
    }

    #[test]
    fn protocol_is_linear_in_the_spin_input(re in prop::array::uniform4(-1.0..1.0f64), im in prop::array::uniform4(-1.0..1.0f64)) {
        let spins = SpinAmplitudes::from_fn(|k, _| C64::new(re[k], im[k]));
        prop_assume!(spins.norm() > 0.1);
        let spins = spins.normalize();
        let n = 6;
        let chain = entangler_chain(n, 3, 1.0).unwrap();
        let schedule = ProtocolSchedule::symmetric(n, 1.0, 6.0, 100.0, 1.1).unwrap();
        let run = |a: SpinAmplitudes| {
            let mut opts = ProtocolOptions::new(1);
            opts.sample_dt = 0.2;
            opts.initial_spins = a;
            run_protocol_trajectory(&chain, &DisorderSpec::none(0), &schedule, &opts, 0).unwrap().final_state.unwrap()
        };
        let whole = run(spins);
        let basis = [(Spin::Up, Spin::Up), (Spin::Up, Spin::Down), (Spin::Down, Spin::Up), (Spin::Down, Spin::Down)];
        let parts: Vec<_> = basis.iter().map(|&(l, r)| run(spin_basis(l, r))).collect();
        for s in 0..4 {
            let mut combined = DVector::zeros(whole.sectors[s].amps.len());
            for (k, part) in parts.iter().enumerate() {
                combined += &part.sectors[s].amps * spins[k];
            }
            prop_assert!((&whole.sectors[s].amps - combined).norm() < 1e-10);
        }
    }
}
