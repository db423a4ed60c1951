//! Serre graphs, their breadth-first maximal subtree and geodesics.
//!
//! Builds a triangle with a loop, prints the tree edges, the geodesic between
//! two vertices and the number of reduced paths by length.

use graphalg::graphcore::{cancel_backtracks, enumerate_paths, geodesic, maximal_subtree, EdgeSpec, SerreGraph};

fn spec(label: &str, s: &str, t: &str, inv: &str) -> EdgeSpec {
    EdgeSpec { label: label.into(), source: s.into(), target: t.into(), inverse: inv.into() }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vertices = ["a", "b", "c"].map(String::from).to_vec();
    let edges = [
        spec("x", "a", "b", "x'"),
        spec("x'", "b", "a", "x"),
        spec("y", "b", "c", "y'"),
        spec("y'", "c", "b", "y"),
        spec("z", "a", "c", "z'"),
        spec("z'", "c", "a", "z"),
        spec("t", "c", "c", "t'"),
        spec("t'", "c", "c", "t"),
    ];
    let g = SerreGraph::new(vertices, &edges, None)?;
    let tree = maximal_subtree(&g, 0)?;
    let labels: Vec<&str> = tree.edges.iter().map(|&e| g.edge(e).label.as_str()).collect();
    println!("tree edges: {labels:?}");

    let (b, c) = (g.vertex_id("b").unwrap(), g.vertex_id("c").unwrap());
    println!("geodesic b → c: {}", g.path_label(&geodesic(&g, &tree, b, c)));

    let x = g.edge_id("x").unwrap();
    let t = g.edge_id("t").unwrap();
    let raw = [x, g.bar(x), g.edge_id("z").unwrap(), t, g.bar(t)];
    println!("{} reduces to {}", g.path_label(&raw), g.path_label(&cancel_backtracks(&g, &raw)));

    let a = g.vertex_id("a").unwrap();
    for len in 0..=4 {
        let loops = enumerate_paths(&g, a, Some(a), len).into_iter().filter(|p| p.len() == len);
        let reduced = loops.filter(|p| cancel_backtracks(&g, p).len() == p.len()).count();
        println!("reduced loops at a of length {len}: {reduced}");
    }
    Ok(())
}
