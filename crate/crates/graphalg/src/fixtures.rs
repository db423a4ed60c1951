//! Shipped example graphs, loaded from the descriptors in `fixtures/`.

use crate::cli::descriptor::load;
use crate::graphcore::AlgebraGraph;

pub const Z2_FREE_PRODUCT: &str = include_str!("../fixtures/z2_free_product.json");
pub const INTEGER_LOOP: &str = include_str!("../fixtures/integer_loop.json");
pub const Z4_AMALGAM: &str = include_str!("../fixtures/z4_amalgam.json");
pub const M2_SEGMENT: &str = include_str!("../fixtures/m2_segment.json");
pub const Z2_PATH3: &str = include_str!("../fixtures/z2_path3.json");
pub const Z4_HNN: &str = include_str!("../fixtures/z4_hnn.json");

fn build(text: &str) -> AlgebraGraph {
    load(text).expect("shipped fixture certifies")
}

/// `ℤ/2 * ℤ/2`: a segment with `ℤ/2` at both ends and trivial edge algebra.
pub fn z2_free_product() -> AlgebraGraph {
    build(Z2_FREE_PRODUCT)
}

/// One vertex with the trivial group and a loop; the fundamental group is `ℤ`.
pub fn integer_loop() -> AlgebraGraph {
    build(INTEGER_LOOP)
}

/// `ℤ/4 *_{ℤ/2} ℤ/4`.
pub fn z4_amalgam() -> AlgebraGraph {
    build(Z4_AMALGAM)
}

/// A segment of two copies of `M₂` with non-tracial states over `ℂ`.
pub fn m2_segment() -> AlgebraGraph {
    build(M2_SEGMENT)
}

/// The path `a - b - c` with `ℤ/2` at every vertex over trivial edges.
pub fn z2_path3() -> AlgebraGraph {
    build(Z2_PATH3)
}

/// `HNN(ℤ/4, ℤ/2, id)`: one vertex with a loop whose edge group is `ℤ/2`.
pub fn z4_hnn() -> AlgebraGraph {
    build(Z4_HNN)
}

/// The three group fixtures used by the acceptance suite.
pub fn shipped() -> Vec<(&'static str, AlgebraGraph)> {
    vec![("z2_free_product", z2_free_product()), ("integer_loop", integer_loop()), ("z4_amalgam", z4_amalgam())]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_fixtures_certify() {
        for text in [super::Z2_FREE_PRODUCT, super::INTEGER_LOOP, super::Z4_AMALGAM, super::M2_SEGMENT, super::Z2_PATH3, super::Z4_HNN] {
            let g = super::load(text).unwrap();
            assert_eq!(g.base(), 0);
        }
        assert!(super::z4_amalgam().is_classical());
        assert!(!super::m2_segment().is_classical());
        assert!(super::integer_loop().check_counits().is_ok());
    }
}
