//! Group algebra of ℤ/4 in its regular representation: GNS data, the
//! expectation onto the copy of ℤ/2, and the modular operator of a
//! non-tracial state on M₂.

use std::sync::Arc;

use graphalg::linalg::{CMat, C64};
use graphalg::matalg::{
    build_group_algebra, conditional_expectation, cyclic_table, gns, modular_data, Embedding, MatrixStarAlgebra, StateFunctional,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let z4 = build_group_algebra("ℤ/4", &cyclic_table(4))?;
    let z2 = build_group_algebra("ℤ/2", &cyclic_table(2))?;
    println!("dim C[ℤ/4] = {}, tracial: {}", z4.algebra.dim(), z4.state.is_tracial(&z4.algebra));

    let g = gns(&z4.algebra, &z4.state)?;
    let gen = z4.algebra.basis_vector(1);
    let u = g.pi(&gen);
    println!("π(g) is unitary up to {:.1e}", graphalg::linalg::max_abs(&(u.adjoint() * &u - CMat::identity(4, 4))));

    // ℤ/2 → ℤ/4 sends the generator to g²
    let mut image = CMat::zeros(4, 2);
    image[(0, 0)] = C64::new(1.0, 0.0);
    image[(2, 1)] = C64::new(1.0, 0.0);
    let embedding = Embedding::new(Arc::new(z2.algebra.clone()), Arc::new(z4.algebra.clone()), image)?;
    let ce = conditional_expectation(embedding, &z4.state, &z2.state)?;
    for (law, r) in ce.law_residuals(&z4.state, &z2.state) {
        println!("  {law:<22} {r:.1e}");
    }
    let re = |v: graphalg::linalg::CVec| v.iter().map(|z| z.re).collect::<Vec<_>>();
    println!("E(g) = {:?}, E(g²) = {:?}", re(ce.expect(&gen)), re(ce.expect(&z4.algebra.basis_vector(2))));

    let m2 = MatrixStarAlgebra::full("M₂", 2);
    let rho = CMat::from_diagonal(&graphalg::linalg::CVec::from_vec(vec![C64::new(0.75, 0.0), C64::new(0.25, 0.0)]));
    let phi = StateFunctional::new(&m2, rho)?;
    let md = modular_data(&m2, &phi)?;
    println!("M₂ modular data self-check {:.1e}", md.self_check());
    let spectrum = md.modular_on_coords().eigenvalues().map(|v| v.iter().map(|z| z.re).collect::<Vec<_>>());
    println!("Δ eigenvalues on coordinates: {spectrum:?}");
    Ok(())
}
