//! Library results against independent computations: group arithmetic, brute
//! enumeration and classical word counting.

use graphalg::bassserre::BassSerreTree;
use graphalg::cli::expr::evaluate;
use graphalg::fixtures;
use graphalg::fundamental::{base_change_check, Fundamental, Word};
use graphalg::graphcore::{enumerate_paths, AlgebraGraph};
use graphalg::linalg::{self, C64, ONE};
use graphalg::pathmod::{module_inner_product, PathEngine};
use graphalg::sampling::WordSampler;
use graphalg::unscrew::{conjugated_element, moment_residual, ClassicalOracle, Letter};

/// Number of vertices of the classical Bass-Serre tree within distance `depth`
/// of the base vertex, counted from subgroup indices.
fn tree_ball(g: &AlgebraGraph, depth: usize) -> usize {
    let gr = &g.graph;
    let index = |f: usize| g.vertex_dim(gr.source(f)) / g.edge_algebras[f].dim();
    let mut frontier: Vec<(usize, Option<usize>, usize)> = vec![(g.base(), None, 1)];
    let mut total = 1;
    for _ in 0..depth {
        let mut next = Vec::new();
        for &(v, came, weight) in &frontier {
            for f in gr.out_edges(v) {
                let back = usize::from(came.is_some_and(|c| gr.bar(c) == f));
                let branches = index(f) - back;
                if branches > 0 {
                    next.push((gr.range(f), Some(f), weight * branches));
                }
            }
        }
        total += next.iter().map(|(_, _, w)| w).sum::<usize>();
        frontier = next;
    }
    total
}

#[test]
fn vertex_windows_count_the_classical_tree() {
    let cases = [
        ("integer_loop", fixtures::integer_loop(), 3, 7),
        ("z2_free_product", fixtures::z2_free_product(), 2, 5),
        ("z4_amalgam", fixtures::z4_amalgam(), 4, 9),
        ("z2_path3", fixtures::z2_path3(), 3, 15),
        ("z4_hnn", fixtures::z4_hnn(), 3, 53),
    ];
    for (name, g, depth, expected) in cases {
        assert_eq!(tree_ball(&g, depth), expected, "{name}");
        let engine = PathEngine::new(&g);
        let tree = BassSerreTree::new(&engine, depth).unwrap();
        assert_eq!(tree.l_dim(g.base()), expected, "{name}");
    }
}

#[test]
fn path_enumeration_matches_brute_force() {
    for g in [fixtures::integer_loop(), fixtures::z2_free_product(), fixtures::z2_path3()] {
        let gr = &g.graph;
        for to in 0..gr.vertex_count() {
            let listed = enumerate_paths(gr, g.base(), Some(to), 3);
            // every edge sequence of length <= 3, kept when it composes
            let mut brute = 0;
            let n = gr.edge_count();
            for len in 0..=3u32 {
                for code in 0..n.pow(len) {
                    let seq: Vec<usize> = (0..len).map(|i| code / n.pow(i) % n).collect();
                    if gr.walk(g.base(), &seq).ok() == Some(to) {
                        brute += 1;
                    }
                }
            }
            assert_eq!(listed.len(), brute);
        }
    }
    let z = fixtures::integer_loop();
    assert_eq!(enumerate_paths(&z.graph, 0, Some(0), 2).len(), 7);
}

/// `⟨x₀⊗…⊗x_n, y₀⊗…⊗y_n⟩` for group elements along a path, by group arithmetic:
/// carry `g = x₀⁻¹y₀`, pass it through each edge group or die, then sandwich.
fn group_gram(g: &AlgebraGraph, path: &[usize], x: &[usize], y: &[usize]) -> Option<(usize, usize)> {
    let gr = &g.graph;
    let table = |v: usize| g.vertices[v].group_table.clone().unwrap();
    let inv = |t: &Vec<Vec<usize>>, a: usize| (0..t.len()).find(|&b| t[a][b] == 0).unwrap();
    let mut v = g.base();
    let t = table(v);
    let mut carried = t[inv(&t, x[0])][y[0]];
    for (k, &e) in path.iter().enumerate() {
        let src = g.group_hom(e).unwrap();
        let dst = g.group_hom(gr.bar(e)).unwrap();
        let b = src.iter().position(|&s| s == carried)?;
        v = gr.range(e);
        let t = table(v);
        carried = t[t[inv(&t, x[k + 1])][dst[b]]][y[k + 1]];
    }
    Some((v, carried))
}

#[test]
fn amalgam_module_gram_matches_group_arithmetic() {
    let g = fixtures::z4_amalgam();
    let gr = &g.graph;
    let e = gr.edge_id("e").unwrap();
    let basis = |v: usize, i: usize| g.vertex_algebra(v).basis_vector(i);
    for path in [vec![e], vec![e, gr.bar(e)]] {
        let verts: Vec<usize> = std::iter::once(g.base()).chain(path.iter().map(|&f| gr.range(f))).collect();
        let n = verts.len() as u32;
        for code in 0..4usize.pow(2 * n) {
            let digits: Vec<usize> = (0..2 * n).map(|i| code / 4usize.pow(i) % 4).collect();
            let (x, y) = digits.split_at(n as usize);
            let a: Vec<_> = verts.iter().zip(x).map(|(&v, &i)| basis(v, i)).collect();
            let b: Vec<_> = verts.iter().zip(y).map(|(&v, &i)| basis(v, i)).collect();
            let got = module_inner_product(&g, &path, &a, &b).unwrap();
            let expected = match group_gram(&g, &path, x, y) {
                Some((v, k)) => basis(v, k),
                None => basis(*verts.last().unwrap(), 0).scale(0.0),
            };
            assert!((got - expected).norm() < 1e-12, "path {path:?} x {x:?} y {y:?}");
        }
    }
    // the documented instance: ⟨λ_g ⊗ 1, λ_g³ ⊗ 1⟩ is the image of λ_g² at q
    let q = gr.range(e);
    let got = module_inner_product(&g, &[e], &[basis(0, 1), basis(q, 0)], &[basis(0, 3), basis(q, 0)]).unwrap();
    assert!((got - basis(q, 2)).norm() < 1e-12);
}

#[test]
fn amalgam_moments_match_classical_word_count() {
    let g = fixtures::z4_amalgam();
    let f = Fundamental::new(&g);
    let x = evaluate(&f, "g@p + g3@p + h@q + h3@q").unwrap();
    let normal = f.moments(&x, 6).unwrap();
    let oracle = ClassicalOracle::new(&g).unwrap();
    let (p, q) = (g.graph.vertex_id("p").unwrap(), g.graph.vertex_id("q").unwrap());
    let terms: Vec<_> = [(p, 1), (p, 3), (q, 1), (q, 3)].iter().map(|&(v, k)| (ONE, conjugated_element(&oracle, &g, v, k))).collect();
    let counted = oracle.moments(&terms, 6).unwrap();
    assert!(moment_residual(&normal, &counted) < 1e-10);
    assert!((normal[1].re - 4.0).abs() < 1e-10);
}

#[test]
fn hnn_moments_match_classical_word_count() {
    let g = fixtures::z4_hnn();
    let f = Fundamental::new(&g);
    let x = evaluate(&f, "u@e + u@e* + g@p").unwrap();
    let normal = f.moments(&x, 5).unwrap();
    let oracle = ClassicalOracle::new(&g).unwrap();
    let e = g.graph.edge_id("e").unwrap();
    let terms = [
        (ONE, oracle.word(0, &[Letter::Edge(e)]).unwrap()),
        (ONE, oracle.word(0, &[Letter::Edge(g.graph.bar(e))]).unwrap()),
        (ONE, oracle.word(0, &[Letter::Group { vertex: 0, element: 1 }]).unwrap()),
    ];
    let counted = oracle.moments(&terms, 5).unwrap();
    assert!(moment_residual(&normal, &counted) < 1e-10, "{normal:?} vs {counted:?}");
}

#[test]
fn loop_unitary_has_vanishing_moments() {
    let g = fixtures::integer_loop();
    let f = Fundamental::new(&g);
    let x = evaluate(&f, "u@e").unwrap();
    assert!(f.moments(&x, 8).unwrap().iter().all(|m| m.norm() < 1e-12));
    let y = evaluate(&f, "u@e + u@e*").unwrap();
    // closed walks on ℤ: φ(y^2k) = C(2k, k)
    let m = f.moments(&y, 6).unwrap();
    for (k, c) in [(1, 2.0), (2, 6.0), (3, 20.0)] {
        assert!((m[2 * k - 1].re - c).abs() < 1e-10);
    }
}

#[test]
fn vertex_expectation_is_a_bimodule_map() {
    for g in [fixtures::z4_amalgam(), fixtures::m2_segment(), fixtures::z4_hnn()] {
        let f = Fundamental::new(&g);
        let p0 = g.base();
        let alg = g.vertex_algebra(p0);
        let mut s = WordSampler::new(&g, 31);
        for _ in 0..10 {
            let len = s.length(3);
            let x = f.reduce(&s.raw_loop(p0, len)).unwrap();
            let (a, b) = (s.element(p0), s.element(p0));
            let axb = f.multiply(&f.multiply(&f.vertex(a.clone()), &x).unwrap(), &f.vertex(b.clone())).unwrap();
            let lhs = f.expectation_onto_vertex(&axb);
            let rhs = alg.mul(&alg.mul(&a, &f.expectation_onto_vertex(&x)), &b);
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}

#[test]
fn segment_vacuum_is_base_independent() {
    let g = fixtures::z2_free_product();
    let f = Fundamental::new(&g);
    let mut s = WordSampler::new(&g, 5);
    let samples: Vec<_> = (0..20)
        .map(|_| {
            let len = s.length(4);
            f.reduce(&s.reduced_loop(g.base(), len)).unwrap()
        })
        .collect();
    let q = g.graph.vertex_id("q").unwrap();
    assert!(base_change_check(&f, q, &samples).unwrap() < 1e-10);
}

#[test]
fn homotopy_speed_is_bounded_by_the_generator() {
    let g = fixtures::integer_loop();
    let engine = PathEngine::new(&g);
    let tree = BassSerreTree::new(&engine, 4).unwrap();
    let def = tree.deformation().unwrap();
    let e = g.graph.edge_id("e").unwrap();
    let d = def.edge(e);
    let bound = linalg::spectral_norm(&d.h).max(linalg::spectral_norm(&d.k));
    let (ratio, _) = tree.homotopy_continuity(&def, &Word::edge(&g, e), 21).unwrap();
    assert!(ratio > 0.0);
    assert!(ratio <= bound + 1e-9, "{ratio} > {bound}");
    let constant = Word::vertex(g.base(), g.vertex_algebra(g.base()).unit().clone());
    assert!(tree.homotopy_continuity(&def, &constant, 5).unwrap().0 < 1e-12);
}

#[test]
fn fourth_moment_of_the_free_product_counts_words() {
    // length-4 words over {g, h} in ℤ/2 * ℤ/2 that reduce to the identity
    let reduces = |w: &[u8]| {
        let mut stack: Vec<u8> = Vec::new();
        for &c in w {
            if stack.last() == Some(&c) {
                stack.pop();
            } else {
                stack.push(c);
            }
        }
        stack.is_empty()
    };
    let count = (0..16u8).filter(|code| reduces(&(0..4).map(|i| (code >> i) & 1).collect::<Vec<_>>())).count();
    let g = fixtures::z2_free_product();
    let f = Fundamental::new(&g);
    let x = evaluate(&f, "g@p + u@e·h@q·u@ē").unwrap();
    let m = f.moments(&x, 4).unwrap();
    assert_eq!(count, 6);
    assert!((m[3] - C64::new(count as f64, 0.0)).norm() < 1e-10);
}
