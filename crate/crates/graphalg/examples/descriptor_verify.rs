//! Loads a JSON graph descriptor, evaluates a word expression and runs the
//! verification suites, the same path the `graphalg` binary takes.
//!
//! `cargo run --example descriptor_verify -- path/to/descriptor.json`; without
//! an argument the bundled ℤ/4 *_ℤ/2 ℤ/4 descriptor is used. Setting
//! `GRAPHALG_THREADS` caps the worker pool as it does for the binary.

use graphalg::cli::{cmd_moments, cmd_verify, descriptor, Suite};

const DEFAULT: &str = include_str!("../fixtures/z4_amalgam.json");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT.to_string(),
    };
    let g = descriptor::load(&text)?;
    println!("{} vertices, {} edges, base {}", g.graph.vertex_count(), g.graph.edge_count(), g.graph.vertex_label(g.base()));
    if text == DEFAULT {
        // g + g* + h + h*: the two copies of ℤ/4 share g² = h²
        print!("{}", cmd_moments(&g, "g@p + g@p* + h@q + h@q*", 4)?);
    }
    let reports = cmd_verify(&g, Suite::All, 3, 0, None)?;
    for r in &reports {
        match &r.skipped {
            Some(reason) => println!("{}: skipped ({reason})", r.suite),
            None => println!("{}: {} ({} checks)", r.suite, if r.pass() { "pass" } else { "FAIL" }, r.checks.len()),
        }
    }
    println!("{}", serde_json::to_string(&reports[0])?);
    Ok(())
}
