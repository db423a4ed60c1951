//! Structural invariants over seeded random inputs.

use graphalg::bassserre::unitary_log;
use graphalg::fixtures;
use graphalg::fundamental::{self, Fundamental, ReducedWordSum};
use graphalg::graphcore::{cancel_backtracks, AlgebraGraph};
use graphalg::linalg::{self, CMat, CVec, C64};
use graphalg::matalg::{modular_data, MatrixStarAlgebra, StateFunctional};
use graphalg::pathmod::{scalar_inner_product, Functional, PathEngine};
use graphalg::sampling::WordSampler;
use proptest::prelude::*;

fn fixture(i: usize) -> AlgebraGraph {
    match i {
        0 => fixtures::z2_free_product(),
        1 => fixtures::integer_loop(),
        2 => fixtures::z4_amalgam(),
        3 => fixtures::z2_path3(),
        4 => fixtures::z4_hnn(),
        _ => fixtures::m2_segment(),
    }
}

fn complex_matrix(n: usize, entries: &[f64]) -> CMat {
    CMat::from_fn(n, n, |i, j| C64::new(entries[2 * (i * n + j)], entries[2 * (i * n + j) + 1]))
}

fn hermitian(n: usize, entries: &[f64]) -> CMat {
    let a = complex_matrix(n, entries);
    (&a + a.adjoint()).scale(0.5)
}

fn unitary(n: usize, entries: &[f64]) -> CMat {
    complex_matrix(n, entries).qr().q()
}

fn sample(f: &Fundamental, s: &mut WordSampler, max_len: usize) -> ReducedWordSum {
    let len = s.length(max_len);
    let w = s.reduced_loop(f.base(), len);
    let c = s.scalar();
    f.reduce(&w.scaled(c)).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn hermitian_eigen_reconstructs_even_with_repeated_eigenvalues(
        entries in prop::collection::vec(-1.0..1.0_f64, 72),
        levels in prop::collection::vec(-2i32..=2, 6),
    ) {
        let q = unitary(6, &entries);
        let d = CMat::from_diagonal(&CVec::from_iterator(6, levels.iter().map(|&l| linalg::c(l as f64))));
        let h = &q * d * q.adjoint();
        let (vals, vecs) = linalg::herm_eig(&h);
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let back = &vecs * CMat::from_diagonal(&CVec::from_iterator(6, vals.iter().map(|&l| linalg::c(l)))) * vecs.adjoint();
        prop_assert!(linalg::max_abs(&(back - &h)) < 1e-10);
        prop_assert!(linalg::max_abs(&(vecs.adjoint() * &vecs - CMat::identity(6, 6))) < 1e-10);
    }

    #[test]
    fn unitary_log_inverts_the_exponential(entries in prop::collection::vec(-1.0..1.0_f64, 32)) {
        let h = hermitian(4, &entries);
        let (vals, vecs) = linalg::herm_eig(&h);
        let phase = CMat::from_diagonal(&CVec::from_iterator(4, vals.iter().map(|&l| C64::from_polar(1.0, l))));
        let u = &vecs * phase * vecs.adjoint();
        let l = unitary_log(&u).unwrap();
        prop_assert!(linalg::max_abs(&(&l + l.adjoint())) < 1e-10);
        // l = iK with K Hermitian
        let k = l.map(|z| C64::new(z.im, -z.re));
        let (kv, kq) = linalg::herm_eig(&k);
        let back = &kq * CMat::from_diagonal(&CVec::from_iterator(4, kv.iter().map(|&x| C64::from_polar(1.0, x)))) * kq.adjoint();
        prop_assert!(linalg::max_abs(&(back - &u)) < 1e-9);
        prop_assert!(kv.iter().all(|&x| x > -std::f64::consts::PI - 1e-9 && x <= std::f64::consts::PI + 1e-9));
    }

    #[test]
    fn faithful_states_on_matrix_blocks_have_consistent_modular_data(entries in prop::collection::vec(-1.0..1.0_f64, 18)) {
        let alg = MatrixStarAlgebra::full("M3", 3);
        let a = complex_matrix(3, &entries);
        let rho = &a * a.adjoint() + CMat::identity(3, 3).scale(0.1);
        let tr = rho.trace();
        let state = StateFunctional::new(&alg, rho.map(|z| z / tr)).unwrap();
        let m = modular_data(&alg, &state).unwrap();
        prop_assert!(m.self_check() < 1e-8);
    }

    #[test]
    fn backtrack_cancellation_is_idempotent_and_keeps_endpoints(graph in 0usize..6, seed in any::<u64>(), len in 0usize..10) {
        let g = fixture(graph);
        let gr = &g.graph;
        let mut s = WordSampler::new(&g, seed);
        let path = s.walk(g.base(), len, false);
        let reduced = cancel_backtracks(gr, &path);
        prop_assert_eq!(cancel_backtracks(gr, &reduced), reduced.clone());
        prop_assert!(reduced.windows(2).all(|w| w[1] != gr.bar(w[0])));
        prop_assert_eq!(gr.walk(g.base(), &reduced).unwrap(), gr.walk(g.base(), &path).unwrap());
        prop_assert_eq!(reduced.len() % 2, path.len() % 2);
    }

    #[test]
    fn geodesics_run_inside_the_tree(graph in 0usize..6) {
        let g = fixture(graph);
        let gr = &g.graph;
        for p in 0..gr.vertex_count() {
            for q in 0..gr.vertex_count() {
                let geo = g.geodesic(p, q);
                prop_assert!(geo.iter().all(|&e| g.tree.contains(e)));
                prop_assert_eq!(gr.walk(p, &geo).unwrap(), q);
                let back: Vec<usize> = geo.iter().rev().map(|&e| gr.bar(e)).collect();
                prop_assert_eq!(g.geodesic(q, p), back);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn normal_form_arithmetic_is_a_star_algebra(graph in 0usize..6, seed in any::<u64>()) {
        let g = fixture(graph);
        let f = Fundamental::new(&g);
        let mut s = WordSampler::new(&g, seed);
        let (x, y, z) = (sample(&f, &mut s, 2), sample(&f, &mut s, 2), sample(&f, &mut s, 2));
        let left = f.multiply(&f.multiply(&x, &y).unwrap(), &z).unwrap();
        let right = f.multiply(&x, &f.multiply(&y, &z).unwrap()).unwrap();
        prop_assert!(f.distance(&left, &right).unwrap() < 1e-9);
        let xy = f.multiply(&x, &y).unwrap();
        let swapped = f.multiply(&f.adjoint(&y), &f.adjoint(&x)).unwrap();
        prop_assert!(f.distance(&f.adjoint(&xy), &swapped).unwrap() < 1e-9);
        prop_assert!(f.distance(&f.adjoint(&f.adjoint(&x)), &x).unwrap() < 1e-12);
        let sum = x.add(&y);
        let lhs = f.multiply(&sum, &z).unwrap();
        let rhs = f.multiply(&x, &z).unwrap().add(&f.multiply(&y, &z).unwrap());
        prop_assert!(f.distance(&lhs, &rhs).unwrap() < 1e-9);
    }

    #[test]
    fn fundamental_state_is_positive_and_hermitian(graph in 0usize..6, seed in any::<u64>()) {
        let g = fixture(graph);
        let f = Fundamental::new(&g);
        let mut s = WordSampler::new(&g, seed);
        let x = sample(&f, &mut s, 3);
        let v = f.fundamental_state(&f.multiply(&f.adjoint(&x), &x).unwrap());
        prop_assert!(v.re > -1e-10 && v.im.abs() < 1e-10);
        let a = f.fundamental_state(&x);
        let b = f.fundamental_state(&f.adjoint(&x));
        prop_assert!((a.conj() - b).norm() < 1e-10);
        prop_assert!((f.fundamental_state(&f.one()) - linalg::c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn reduction_is_stable_on_normal_forms(graph in 0usize..6, seed in any::<u64>()) {
        let g = fixture(graph);
        let f = Fundamental::new(&g);
        let mut s = WordSampler::new(&g, seed);
        let len = s.length(4);
        let w = s.raw_loop(g.base(), len);
        let x = f.reduce(&w).unwrap();
        let again = f.reduce_sum(&f.words(&x)).unwrap();
        prop_assert!(f.distance(&x, &again).unwrap() < 1e-10);
        prop_assert!(f.words(&x).iter().all(|w| w.is_reduced(&g, 1e-9)));
    }

    #[test]
    fn vacuum_expectation_matches_the_state(graph in 0usize..6, seed in any::<u64>()) {
        let g = fixture(graph);
        prop_assert!(fundamental::vacuum_coherence_residual(&g, seed, 4, 3).unwrap() < 1e-9);
    }

    #[test]
    fn closed_form_action_matches_composition(graph in 0usize..4, seed in any::<u64>()) {
        let g = fixture(graph);
        prop_assert!(fundamental::product_formula_residual(&g, seed, 4, 3, 4).unwrap() < 1e-9);
    }

    #[test]
    fn module_coordinates_are_isometric(graph in 0usize..6, seed in any::<u64>(), len in 1usize..4) {
        let g = fixture(graph);
        let gr = &g.graph;
        let engine = PathEngine::new(&g);
        let mut s = WordSampler::new(&g, seed);
        let path = s.walk(g.base(), len, false);
        let verts: Vec<usize> = std::iter::once(g.base()).chain(path.iter().map(|&e| gr.range(e))).collect();
        let legs = |s: &mut WordSampler| -> Vec<CVec> {
            verts
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let a = s.element(v);
                    if i >= 1 && i < path.len() && path[i] == gr.bar(path[i - 1]) { g.complement(path[i]) * a } else { a }
                })
                .collect()
        };
        let (a, b) = (legs(&mut s), legs(&mut s));
        let q = *verts.last().unwrap();
        let ca = engine.tensor_coords(g.base(), &path, Functional::State, &a);
        let cb = engine.tensor_coords(g.base(), &path, Functional::State, &b);
        let direct = scalar_inner_product(&g, &path, &a, &b, q, Functional::State).unwrap();
        prop_assert!((ca.dotc(&cb) - direct).norm() <= 1e-9 * direct.norm().max(1.0));
        let norm = scalar_inner_product(&g, &path, &a, &a, q, Functional::State).unwrap();
        prop_assert!(norm.re > -1e-10 && norm.im.abs() < 1e-10);
    }
}
