//! Path Hilbert modules: dimensions of truncated spaces, algebra-valued inner
//! products and the block modular operator on the non-tracial M₂ segment.

use graphalg::fixtures;
use graphalg::pathmod::{
    build_truncated_space, modular_block_residual, module_inner_product, scalar_inner_product, Functional, PathEngine,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = fixtures::z4_amalgam();
    let engine = PathEngine::new(&g);
    for depth in 0..=4 {
        let space = build_truncated_space(&engine, g.base(), g.base(), depth, Functional::State)?;
        println!("ℤ/4 *_ℤ/2 ℤ/4: depth {depth}, {} blocks, dim {}", space.blocks.len(), space.dim());
    }

    let e = g.graph.edge_id("e").unwrap();
    let (a, b) = (g.vertex_algebra(0), g.vertex_algebra(1));
    let x = vec![a.basis_vector(1), b.basis_vector(1)];
    let y = vec![a.basis_vector(3), b.unit().clone()];
    let inner = module_inner_product(&g, &[e], &x, &y)?;
    println!("⟨g ⊗ h, g³ ⊗ 1⟩ has coordinates {:?}", inner.iter().map(|z| z.re).collect::<Vec<_>>());
    let coords = |legs: &[_]| engine.tensor_coords(0, &[e], Functional::State, legs);
    let z = vec![a.basis_vector(1).scale(2.0) + a.unit(), b.basis_vector(1)];
    let model = coords(&x).dotc(&coords(&z));
    let direct = scalar_inner_product(&g, &[e], &x, &z, 1, Functional::State)?;
    println!("⟨g ⊗ h, (1 + 2g) ⊗ h⟩: orthonormal model {model:.6}, direct {direct:.6}");

    let m2 = fixtures::m2_segment();
    let engine = PathEngine::new(&m2);
    let e = m2.graph.edge_id("e").unwrap();
    for path in [vec![], vec![e, m2.graph.bar(e)]] {
        println!(
            "M₂ segment, path {:?}: block modular operator vs tensor of vertex operators {:.1e}",
            m2.graph.path_label(&path),
            modular_block_residual(&engine, &path)
        );
    }
    Ok(())
}
