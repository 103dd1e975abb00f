use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irspec::aggregators::{encode_g, make_constant, make_dictator, random_aggregator, Aggregator};
use irspec::fkn::kernel_distance;
use irspec::hyper::{
    apply_tt, exhaustive_moment, moments, moments_after_tt, norm4_exact, random_equal_margin,
    build_tables, BigQ, QMatrix,
};
use irspec::laplacian::{apply_ln, apply_ln_operator, apply_quadratic_form, derived_kappa, FormInput, FormVariant};
use irspec::metrics::{ir_exact, q_to_f64};
use irspec::perm::{FixingSubgroup, Permutation};
use irspec::repr::{perm_matrix, Basis};
use irspec::{Exec, Model};

fn perm(m: usize, idx: usize) -> Permutation {
    Permutation::from_lex_index(m, idx % irspec::perm::factorial(m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_laws(m in 2usize..=6, a in 0usize..720, b in 0usize..720, c in 0usize..720) {
        let (x, y, z) = (perm(m, a), perm(m, b), perm(m, c));
        let xy = x.compose(&y).unwrap();
        prop_assert_eq!(xy.compose(&z).unwrap(), x.compose(&y.compose(&z).unwrap()).unwrap());
        prop_assert_eq!(x.compose(&x.inverse()).unwrap(), Permutation::identity(m));
        prop_assert_eq!(xy.inverse(), y.inverse().compose(&x.inverse()).unwrap());
        for r in 1..=m {
            prop_assert_eq!(xy.at(r), x.at(y.at(r)));
            prop_assert_eq!(x.rank_of(x.at(r)), r);
        }
    }

    #[test]
    fn permutation_matrices_reverse_products(m in 2usize..=6, a in 0usize..720, b in 0usize..720) {
        let (x, y) = (perm(m, a), perm(m, b));
        let lhs = perm_matrix(&x.compose(&y).unwrap());
        let rhs = perm_matrix(&y) * perm_matrix(&x);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn measures_do_not_depend_on_basis(seed in any::<u64>(), n in 1usize..=2, winner in any::<bool>()) {
        let m = 3;
        let h = if winner { FixingSubgroup::winner(m) } else { FixingSubgroup::trivial(m) }.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let helmert = Model::with_basis(h.clone(), Basis::helmert(m).unwrap()).unwrap();
        let other = Model::with_basis(h, Basis::random(m, &mut rng).unwrap()).unwrap();
        let f = random_aggregator(&helmert, n, &mut rng).unwrap();
        let f2 = Aggregator::from_table(&other, n, f.table().to_vec()).unwrap();
        let a = apply_ln(&encode_g(&f, &helmert, Exec::Sequential), &helmert, Exec::Sequential).unwrap();
        let b = apply_ln(&encode_g(&f2, &other, Exec::Sequential), &other, Exec::Sequential).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        let (ka, _) = kernel_distance(&encode_g(&f, &helmert, Exec::Sequential), &helmert, Exec::Sequential).unwrap();
        let (kb, _) = kernel_distance(&encode_g(&f2, &other, Exec::Sequential), &other, Exec::Sequential).unwrap();
        prop_assert!((ka.mean_sq_norm() - kb.mean_sq_norm()).abs() < 1e-9);
    }

    #[test]
    fn quadratic_forms_match_exact_measure(seed in any::<u64>(), m in 3usize..=4, n in 1usize..=2, winner in any::<bool>()) {
        let model = if winner { Model::winner(m) } else { Model::trivial(m) }.unwrap();
        let kappa = derived_kappa(&model, FormVariant::Indicator).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_aggregator(&model, n, &mut rng).unwrap();
        let dist = q_to_f64(&ir_exact(&f, &model, Exec::Sequential).unwrap().0);
        let field = f.indicator(&model);
        for variant in [FormVariant::Indicator, FormVariant::Laplacian] {
            let v = apply_quadratic_form(FormInput::Indicator(&field), &model, variant, Exec::Sequential).unwrap();
            prop_assert!((kappa * v - dist).abs() < 1e-9);
        }
        let g = encode_g(&f, &model, Exec::Sequential);
        prop_assert!((apply_ln(&g, &model, Exec::Sequential).unwrap() - dist).abs() < 1e-9);
        prop_assert!(dist >= 0.0);
    }

    #[test]
    fn dictators_and_constants_lie_in_the_kernel(
        m in 3usize..=4, n in 1usize..=3, voter in 0usize..3, s in 0usize..24, winner in any::<bool>()
    ) {
        let n = if m == 4 { n.min(2) } else { n };
        let model = if winner { Model::winner(m) } else { Model::trivial(m) }.unwrap();
        let sigma = perm(m, s);
        for f in [
            make_dictator(&model, n, 1 + voter % n, &sigma, Exec::Sequential).unwrap(),
            make_constant(&model, n, &sigma, Exec::Sequential).unwrap(),
        ] {
            let g = encode_g(&f, &model, Exec::Sequential);
            let (d, i) = ir_exact(&f, &model, Exec::Sequential).unwrap();
            prop_assert!(q_to_f64(&d) == 0.0 && q_to_f64(&i) == 0.0);
            let (_, kd2) = kernel_distance(&g, &model, Exec::Sequential).unwrap();
            prop_assert!(kd2 < 1e-20);
            let image = apply_ln_operator(&g, &model, Exec::Sequential);
            prop_assert!(image.mean_sq_norm(Exec::Sequential) < 1e-20);
        }
    }

    #[test]
    fn four_cycle_moment_is_bounded(seed in any::<u64>(), m in 3usize..=9, alpha in -3i64..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = QMatrix::from_ints(m, &random_equal_margin(m, &mut rng, 4, alpha)).unwrap();
        let mv = moments(&a);
        prop_assert!(mv.mq <= &mv.m2 * &mv.m2);
        prop_assert!(mv.m2 >= BigQ::from_integer(0.into()));
        prop_assert_eq!(Some(BigQ::from_integer((alpha * m as i64).into())), a.common_margin());
    }

    #[test]
    fn transfer_formulas_commute_with_noise(seed in any::<u64>(), m in 3usize..=7, num in 0i64..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = QMatrix::from_ints(m, &random_equal_margin(m, &mut rng, 3, 1)).unwrap();
        let sigma = BigQ::new(num.into(), 8.into());
        let direct = moments(&apply_tt(&a, &sigma).unwrap());
        prop_assert_eq!(direct, moments_after_tt(&moments(&a), &sigma, m).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fourth_moment_matches_enumeration(seed in any::<u64>(), m in 4usize..=5, alpha in -2i64..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = QMatrix::from_ints(m, &random_equal_margin(m, &mut rng, 3, alpha)).unwrap();
        let tables = build_tables(m).unwrap();
        prop_assert_eq!(norm4_exact(&a, &tables).unwrap(), exhaustive_moment(&a, 4).unwrap());
    }
}
