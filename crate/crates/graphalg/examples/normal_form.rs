//! Reduced-word normal forms in ℤ/4 *_ℤ/2 ℤ/4: reduction of a raw word,
//! products, adjoints and the fundamental state.

use graphalg::cli::expr::evaluate;
use graphalg::fixtures;
use graphalg::fundamental::{Fundamental, Word};
use graphalg::linalg::C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = fixtures::z4_amalgam();
    let f = Fundamental::new(&g);
    let e = g.graph.edge_id("e").unwrap();
    let eb = g.graph.bar(e);
    let (a, b) = (g.vertex_algebra(0), g.vertex_algebra(1));

    // g · u_e · h² · u_ē · g: the middle leg lies in the edge group and collapses
    let raw = Word::new(&g, 0, vec![e, eb], vec![a.basis_vector(1), b.basis_vector(2), a.basis_vector(1)])?;
    let x = f.reduce(&raw)?;
    println!("g·u_e·h²·u_ē·g reduces to {} term(s) of length ≤ {}", x.term_count(), x.max_len());
    println!("φ = {:.3}", f.fundamental_state(&x));

    // g · u_e · h · u_ē is reduced: its state vanishes and x*x = 1
    let y = evaluate(&f, "g@p · u@e · h@q · u@ē")?;
    println!("y = g·u_e·h·u_ē has {} term(s) and φ(y) = {:.3}", y.term_count(), f.fundamental_state(&y));
    let yy = f.multiply(&f.adjoint(&y), &y)?;
    println!("‖y*y − 1‖ = {:.1e}", f.distance(&yy, &f.one())?);

    // (y + y*)² has state 2, since only y·y* and y*·y survive
    let s = y.add(&f.adjoint(&y));
    let s2 = f.power(&s, 2)?;
    println!("φ((y + y*)²) = {:.3}", f.fundamental_state(&s2));
    println!("moments of y + y*: {:?}", f.moments(&s, 6)?.iter().map(|z: &C64| z.re.round()).collect::<Vec<_>>());
    Ok(())
}
