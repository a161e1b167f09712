use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use act_core::linalg::{herm_to_vec, inner_re, project_simplex, random_hermitian, vec_to_herm};
use act_core::measure::born_probabilities;
use act_core::schemes::{k0_lower_bound, reference_counts};
use act_core::state::{
    fidelity, pauli_product_basis, random_haar_basis, random_rank_r_state, random_unitary, von_neumann_entropy,
    PauliAxis, QubitFactorization,
};

fn axis(code: u8) -> PauliAxis {
    [PauliAxis::X, PauliAxis::Y, PauliAxis::Z][code as usize % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rank_r_states_are_valid_with_exact_rank(seed: u64, d in 2usize..9, r_frac in 0.0f64..1.0) {
        let r = 1 + ((d - 1) as f64 * r_frac).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_rank_r_state(d, r, &mut rng).unwrap();
        let m = rho.matrix();
        prop_assert!((m - m.adjoint()).camax() <= 1e-12);
        prop_assert!((m.trace().re - 1.0).abs() <= 1e-12);
        let values = rho.eigenvalues();
        prop_assert_eq!(values.iter().filter(|&&v| v > 1e-12).count(), r);
        prop_assert!(values.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn born_probabilities_form_a_distribution(seed: u64, d in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_rank_r_state(d, 1 + seed as usize % d, &mut rng).unwrap();
        let b = random_haar_basis(d, &mut rng).unwrap();
        let p = born_probabilities(&rho, &b).unwrap();
        prop_assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(p.values().iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        let u = b.kets();
        prop_assert!((u.adjoint() * u - nalgebra::DMatrix::identity(d, d)).camax() < 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed: u64, d in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_rank_r_state(d, 1 + seed as usize % d, &mut rng).unwrap();
        let b = random_rank_r_state(d, d, &mut rng).unwrap();
        let (ab, ba) = (fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
        prop_assert!((ab - ba).abs() < 1e-8);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&ab));
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn entropy_is_unitarily_invariant_and_bounded(seed: u64, d in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = 1 + seed as usize % d;
        let rho = random_rank_r_state(d, r, &mut rng).unwrap();
        let rotated = rho.rotated(&random_unitary(d, &mut rng)).unwrap();
        let s = von_neumann_entropy(&rho);
        prop_assert!((s - von_neumann_entropy(&rotated)).abs() < 1e-10);
        prop_assert!(s >= 0.0 && s <= (r as f64).ln() + 1e-12);
    }

    #[test]
    fn hermitian_coordinates_are_isometric(seed: u64, d in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_hermitian(d, &mut rng), random_hermitian(d, &mut rng));
        let (va, vb) = (herm_to_vec(&a), herm_to_vec(&b));
        prop_assert_eq!(va.len(), d * d);
        prop_assert!((va.dot(&vb) - inner_re(&a, &b)).abs() < 1e-10);
        prop_assert!((vec_to_herm(&va, d) - &a).camax() < 1e-12);
    }

    #[test]
    fn simplex_projection_lands_on_the_simplex(values in proptest::collection::vec(-3.0f64..3.0, 1..12), total in 0.1f64..2.0) {
        let p = project_simplex(&values, total);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - total).abs() < 1e-10);
        // Projection is idempotent.
        let again = project_simplex(&p, total);
        prop_assert!(p.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn pauli_products_are_orthonormal(codes in proptest::collection::vec(0u8..3, 1..5)) {
        let n = codes.len();
        let f = QubitFactorization::qubits(n).unwrap();
        let axes: Vec<_> = codes.iter().map(|&c| axis(c)).collect();
        let u = pauli_product_basis(&f, &axes).unwrap();
        let k = u.kets();
        prop_assert!((k.adjoint() * k - nalgebra::DMatrix::identity(1 << n, 1 << n)).camax() < 1e-12);
    }

    #[test]
    fn reference_counts_follow_their_formulas(d in 2usize..40, r_frac in 0.0f64..1.0) {
        let r = 1 + ((d - 1) as f64 * r_frac).round() as usize;
        let refs = reference_counts(d, r).unwrap();
        prop_assert_eq!(refs.bg, 4 * r + 1);
        let kech = (4.0 * r as f64 * (d - r) as f64 / (d - 1) as f64).ceil() as usize;
        prop_assert_eq!(refs.kech, kech);
        let k0 = k0_lower_bound(d, r).unwrap();
        prop_assert_eq!(k0, ((r * r - r) as f64 / (d - 1) as f64).ceil() as usize + 1);
        if r > 1 {
            prop_assert!(k0 >= k0_lower_bound(d, r - 1).unwrap());
        }
        prop_assert_eq!(k0_lower_bound(d, d).unwrap(), d + 1);
        prop_assert_eq!(k0_lower_bound(d, 1).unwrap(), 1);
    }
}
