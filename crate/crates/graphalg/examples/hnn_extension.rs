//! A single loop read as an HNN extension with stable letter v = u_ē.
//!
//! On the loop over the trivial group, v generates ℤ and φ(vⁿ) = δ_{n,0}. On
//! HNN(ℤ/4, ℤ/2) the stable letter conjugates the edge image by θ.

use graphalg::fixtures;
use graphalg::fundamental::Fundamental;
use graphalg::unscrew::HnnView;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let z = fixtures::integer_loop();
    let view = HnnView::new(&z)?;
    let f = Fundamental::new(&z);
    let row: Vec<String> = (-6..=6)
        .map(|n| {
            let x = f.reduce(&view.stable_power(n))?;
            Ok(format!("{n}:{}", f.fundamental_state(&x).re))
        })
        .collect::<Result<_, graphalg::fundamental::FundamentalError>>()?;
    println!("φ(vⁿ) on the loop over the trivial group: {}", row.join(" "));
    let check = view.free_generator_check(6)?;
    println!("{}: {:.1e}", check.name, check.max_residual);

    let hnn = fixtures::z4_hnn();
    let view = HnnView::new(&hnn)?;
    for check in view.relation_check(3, 20)? {
        println!("HNN(ℤ/4, ℤ/2) {}: {:.1e}", check.name, check.max_residual);
    }
    Ok(())
}
