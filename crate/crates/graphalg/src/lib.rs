//! Graphs of finite-dimensional C*-algebras and their fundamental algebras.
//!
//! A graph carries a matrix *-algebra with a faithful state at every vertex and
//! edge, together with embeddings that admit state-preserving conditional
//! expectations. From that data the crate builds:
//!
//! - [`matalg`]: GNS spaces, conditional expectations, counits and modular data;
//! - [`graphcore`]: the oriented graph, its BFS maximal subtree and geodesics;
//! - [`pathmod`]: the path Hilbert modules `H_w` in orthonormal coordinates;
//! - [`fundamental`]: reduced-word normal forms, the fundamental state and the
//!   path-module representation;
//! - [`unscrew`]: classical normal-form oracles and the free-product / HNN views;
//! - [`bassserre`]: the truncated quantum Bass-Serre tree, the Julg-Valette
//!   operator and its homotopy to a degenerate triple;
//! - [`cli`]: the JSON descriptor format and the `graphalg` command line.
//!
//! # Examples
//!
//! Each capability has a runnable example:
//!
//! ```text
//! cargo run --example group_algebra         # GNS, expectations, modular data
//! cargo run --example spanning_tree         # maximal subtree, geodesics, loops
//! cargo run --example path_module           # block dimensions and inner products
//! cargo run --example normal_form           # reduction, products, moments
//! cargo run --example free_product_moments  # normal form vs classical word count
//! cargo run --example hnn_extension         # stable letter and HNN relation
//! cargo run --example julg_valette          # Fredholm identities and commutators
//! cargo run --example homotopy              # the deformation from t = 0 to t = 1
//! cargo run --example descriptor_verify     # JSON descriptor through the verifier
//! ```
//!
//! ```
//! use graphalg::cli::expr::evaluate;
//! use graphalg::fixtures;
//! use graphalg::fundamental::Fundamental;
//!
//! let g = fixtures::z2_free_product();
//! let f = Fundamental::new(&g);
//! let x = evaluate(&f, "g@p + u@e·h@q·u@ē").unwrap();
//! let m = f.moments(&x, 4).unwrap();
//! assert!((m[3].re - 6.0).abs() < 1e-10);
//! ```

pub mod bassserre;
pub mod cli;
pub mod fixtures;
pub mod fundamental;
pub mod graphcore;
pub mod linalg;
pub mod matalg;
pub mod pathmod;
pub mod report;
pub mod sampling;
pub mod unscrew;
