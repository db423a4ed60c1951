//! The homotopy t ↦ (F̃, π_t, ρ̃_t) on the tree of ℤ: at t = 0 it is the
//! Julg-Valette module, at t = 1 it is degenerate on the interior window.

use graphalg::bassserre::BassSerreTree;
use graphalg::fixtures;
use graphalg::pathmod::PathEngine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = fixtures::integer_loop();
    let engine = PathEngine::new(&g);
    let tree = BassSerreTree::new(&engine, 5)?;
    let jv = tree.julg_valette()?;
    let def = tree.deformation()?;

    println!("  t    max generator residual ‖F̃π_t(x)F̃* − ρ̃_t(x)‖");
    for i in 0..=8 {
        let t = i as f64 / 8.0;
        println!("{t:5.3}  {:.3e}", tree.generator_departure(&jv, &def, t)?);
    }
    for (name, word) in tree.generators().iter().filter(|(_, w)| !w.path.is_empty()) {
        let (ratio, bound) = tree.homotopy_continuity(&def, word, 17)?;
        println!("{name}: Lipschitz ratio {ratio:.4} within the spectral bound {bound:.4}");
    }
    for check in tree.deformation_checks(&def)? {
        println!("{}: {:.1e}", check.name, check.max_residual);
    }
    Ok(())
}
