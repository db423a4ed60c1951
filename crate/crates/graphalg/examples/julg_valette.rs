//! The Julg-Valette operator on the truncated quantum Bass-Serre tree of the
//! loop over the trivial group (the tree of ℤ), and of ℤ/4 *_ℤ/2 ℤ/4.
//!
//! Prints window dimensions, the rank of F, the Fredholm identities on the
//! interior window and the rank of a commutator with an edge unitary.

use graphalg::bassserre::BassSerreTree;
use graphalg::fixtures;
use graphalg::fundamental::Word;
use graphalg::linalg;
use graphalg::pathmod::PathEngine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, g) in [("integer_loop", fixtures::integer_loop()), ("z4_amalgam", fixtures::z4_amalgam())] {
        let engine = PathEngine::new(&g);
        let depth = 5;
        let tree = BassSerreTree::new(&engine, depth)?;
        let p0 = g.base();
        let jv = tree.julg_valette()?;
        println!(
            "{name} at depth {depth}: dim L = {}, dim K̃ = {}, rank F = {}",
            tree.l_dim(p0),
            tree.k_dim(p0),
            linalg::numerical_rank(&jv.f, 1e-8)
        );
        println!("  ‖F ξ‖ = {:.1e}", (&jv.f * tree.xi_l(p0)).norm());
        for check in tree.fredholm_checks(&jv) {
            println!("  {}: {:.1e}", check.name, check.max_residual);
        }
        let e = g.graph.positive_edges()[0];
        let word = Word::edge(&g, e);
        if word.start == p0 && word.end(&g) == p0 {
            let rep = tree.commutator_report(&jv, &[word])?;
            println!("  [F, u_e]: rank {} (predicted {}), containment {:.1e}", rep.rank, rep.predicted, rep.containment);
        }
    }
    Ok(())
}
