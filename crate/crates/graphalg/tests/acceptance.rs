//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the report is always printed.

use std::time::{Duration, Instant};

use graphalg::bassserre::BassSerreTree;
use graphalg::cli::expr::evaluate;
use graphalg::fixtures;
use graphalg::fundamental::{self, Fundamental, Word};
use graphalg::graphcore::{enumerate_paths, AlgebraGraph};
use graphalg::linalg::{self, CMat, ONE};
use graphalg::matalg::modular_data;
use graphalg::pathmod::{modular_block_residual, PathEngine};
use graphalg::sampling::WordSampler;
use graphalg::unscrew::{self, conjugated_element, ClassicalOracle, HnnView};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn free_product_moments() -> Outcome {
    let g = fixtures::z2_free_product();
    let f = Fundamental::new(&g);
    let x = evaluate(&f, "g@p + u@e·h@q·u@ē")?;
    let algebraic = f.moments(&x, 6)?;
    let oracle = ClassicalOracle::new(&g)?;
    let (p, q) = (g.graph.vertex_id("p").unwrap(), g.graph.vertex_id("q").unwrap());
    let terms = [(ONE, conjugated_element(&oracle, &g, p, 1)), (ONE, conjugated_element(&oracle, &g, q, 1))];
    let counted = oracle.moments(&terms, 6)?;
    let mut worst: f64 = 0.0;
    for (k, expected) in [(1, 2.0), (2, 6.0), (3, 20.0)] {
        let n = 2 * k - 1;
        worst = worst.max((algebraic[n].re - expected).abs() + algebraic[n].im.abs());
        worst = worst.max((counted[n].re - expected).abs() + counted[n].im.abs());
    }
    Ok((worst <= 1e-10, format!("max deviation from 2, 6, 20 is {worst:.1e}")))
}

fn hnn_integer() -> Outcome {
    let g = fixtures::integer_loop();
    let view = HnnView::new(&g)?;
    let f = Fundamental::new(&g);
    let mut worst: f64 = 0.0;
    for n in -6..=6_i64 {
        let v = f.fundamental_state(&f.reduce(&view.stable_power(n))?);
        let expected = if n == 0 { 1.0 } else { 0.0 };
        worst = worst.max((v - linalg::c(expected)).norm());
    }
    Ok((worst <= 1e-12, format!("max |φ(vⁿ) - δ| over |n| ≤ 6 is {worst:.1e}")))
}

fn product_formula() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, (samples, (_, g))) in [34, 33, 33].into_iter().zip(fixtures::shipped()).enumerate() {
        worst = worst.max(fundamental::product_formula_residual(&g, 100 + i as u64, samples, 4, 6)?);
    }
    Ok((worst <= 1e-9, format!("100 words at depth 6, max residual {worst:.1e}")))
}

fn master_coherence() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, (samples, (_, g))) in [67, 67, 66].into_iter().zip(fixtures::shipped()).enumerate() {
        worst = worst.max(fundamental::vacuum_coherence_residual(&g, 200 + i as u64, samples, 4)?);
    }
    Ok((worst <= 1e-9, format!("200 raw words, max residual {worst:.1e}")))
}

fn all_fixtures() -> Vec<(&'static str, AlgebraGraph)> {
    vec![
        ("z2_free_product", fixtures::z2_free_product()),
        ("integer_loop", fixtures::integer_loop()),
        ("z4_amalgam", fixtures::z4_amalgam()),
        ("m2_segment", fixtures::m2_segment()),
        ("z2_path3", fixtures::z2_path3()),
        ("z4_hnn", fixtures::z4_hnn()),
    ]
}

fn expectation_laws() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut laws = 0;
    for (_, g) in all_fixtures() {
        for e in 0..g.graph.edge_count() {
            let res = g.embeddings[e].law_residuals(&g.vertices[g.graph.source(e)].state, &g.edge_algebras[e].state);
            laws = laws.max(res.len());
            worst = res.iter().map(|(_, r)| *r).fold(worst, f64::max);
        }
    }
    Ok((worst <= 1e-9 && laws >= 3, format!("{laws} laws on 6 fixtures, max residual {worst:.1e}")))
}

fn fredholm() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ranks = Vec::new();
    for (name, g) in fixtures::shipped() {
        let engine = PathEngine::new(&g);
        let tree = BassSerreTree::new(&engine, 5)?;
        let jv = tree.julg_valette()?;
        for c in tree.fredholm_checks(&jv) {
            if c.name.starts_with("F F*") || c.name.starts_with("F* F") {
                worst = worst.max(c.max_residual);
            }
        }
        ranks.push(format!("{name} rank {}", linalg::numerical_rank(&jv.f, 1e-8)));
    }
    Ok((worst <= 1e-9, format!("max residual {worst:.1e} ({})", ranks.join(", "))))
}

fn commutator_rank() -> Outcome {
    let mut worst_containment: f64 = 0.0;
    let mut over = 0;
    let mut total = 0;
    for (i, (_, g)) in fixtures::shipped().into_iter().enumerate() {
        let engine = PathEngine::new(&g);
        let tree = BassSerreTree::new(&engine, 5)?;
        let jv = tree.julg_valette()?;
        let mut s = WordSampler::new(&g, 700 + i as u64);
        let mut words: Vec<Word> = Vec::new();
        while words.len() < 50 {
            let len = s.length(3);
            let w = s.reduced_loop(g.base(), len);
            if w.len() <= 3 {
                words.push(w);
            }
        }
        for w in &words {
            let rep = tree.commutator_report(&jv, std::slice::from_ref(w))?;
            worst_containment = worst_containment.max(rep.containment);
            if rep.rank > w.len() + 1 {
                over += 1;
            }
            total += 1;
        }
    }
    Ok((over == 0 && worst_containment <= 1e-8, format!("{total} words, {over} over the rank bound, containment {worst_containment:.1e}")))
}

fn degeneracy() -> Outcome {
    let mut at_one: f64 = 0.0;
    let mut at_zero = 0.0;
    for (name, g) in fixtures::shipped() {
        let engine = PathEngine::new(&g);
        let tree = BassSerreTree::new(&engine, 5)?;
        let jv = tree.julg_valette()?;
        let def = tree.deformation()?;
        at_one = at_one.max(tree.generator_departure(&jv, &def, 1.0)?);
        if name == "integer_loop" {
            at_zero = tree.generator_departure(&jv, &def, 0.0)?;
        }
    }
    Ok((at_one <= 1e-8 && at_zero > 0.5, format!("t=1 residual {at_one:.1e}, t=0 departure on the loop {at_zero:.3}")))
}

fn unscrewing() -> Outcome {
    let g = fixtures::z2_path3();
    let c = unscrew::unscrewing_coherence(&g, 9, 10, 6)?;
    Ok((c.max_residual <= 1e-9, format!("degrees 1..=6, max residual {:.1e}", c.max_residual)))
}

fn modular_formula() -> Outcome {
    let residual = |g: &AlgebraGraph| {
        let engine = PathEngine::new(g);
        enumerate_paths(&g.graph, g.base(), None, 2).iter().map(|w| modular_block_residual(&engine, w)).fold(0.0, f64::max)
    };
    let m2 = residual(&fixtures::m2_segment());
    let mut tracial: f64 = 0.0;
    for (_, g) in fixtures::shipped() {
        tracial = tracial.max(residual(&g));
        for v in &g.vertices {
            let nabla = modular_data(&v.algebra, &v.state)?.modular_on_coords();
            let n = nabla.nrows();
            tracial = tracial.max(linalg::max_abs(&(nabla - CMat::identity(n, n))));
        }
    }
    Ok((m2 <= 1e-8 && tracial <= 1e-8, format!("M₂ tensor residual {m2:.1e}, tracial identity residual {tracial:.1e}")))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "free-product moments", budget: secs(5), run: free_product_moments },
        Criterion { id: 2, name: "HNN over the trivial group", budget: secs(1), run: hnn_integer },
        Criterion { id: 3, name: "product formula vs per-edge oracle", budget: secs(60), run: product_formula },
        Criterion { id: 4, name: "master coherence", budget: secs(60), run: master_coherence },
        Criterion { id: 5, name: "conditional-expectation laws", budget: secs(5), run: expectation_laws },
        Criterion { id: 6, name: "Julg-Valette Fredholm identities", budget: secs(30), run: fredholm },
        Criterion { id: 7, name: "commutator finite rank", budget: secs(60), run: commutator_rank },
        Criterion { id: 8, name: "degeneracy at t=1", budget: secs(60), run: degeneracy },
        Criterion { id: 9, name: "unscrewing coherence", budget: secs(30), run: unscrewing },
        Criterion { id: 10, name: "modular formula", budget: secs(10), run: modular_formula },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && elapsed <= c.budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({detail}; {:.2}s of {}s)",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
