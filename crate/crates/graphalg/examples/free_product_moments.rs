//! Moments of g + u_e h u_ē in ℤ/2 *_ℂ ℤ/2, computed by normal-form arithmetic
//! and by counting classical words that reduce to the identity. The even
//! moments are the central binomial coefficients.

use graphalg::cli::expr::evaluate;
use graphalg::fixtures;
use graphalg::fundamental::Fundamental;
use graphalg::linalg::ONE;
use graphalg::unscrew::{conjugated_element, ClassicalOracle, FreeProductView};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = fixtures::z2_free_product();
    let f = Fundamental::new(&g);
    let x = evaluate(&f, "g@p + u@e·h@q·u@ē")?;
    let algebraic = f.moments(&x, 6)?;

    let oracle = ClassicalOracle::new(&g)?;
    let (p, q) = (g.graph.vertex_id("p").unwrap(), g.graph.vertex_id("q").unwrap());
    let terms = [(ONE, conjugated_element(&oracle, &g, p, 1)), (ONE, conjugated_element(&oracle, &g, q, 1))];
    let counted = oracle.moments(&terms, 6)?;

    println!("n  normal form  word count");
    for (n, (a, c)) in algebraic.iter().zip(&counted).enumerate() {
        println!("{:<2} {:>11.6} {:>11.6}", n + 1, a.re, c.re);
    }

    let view = FreeProductView::new(&g)?;
    for check in view.moments_check(7, 8, 6)? {
        println!("{}: {:.1e}", check.name, check.max_residual);
    }
    Ok(())
}
