//! The verification suites behind `verify`.

use clap::ValueEnum;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::CliError;
use crate::bassserre;
use crate::fundamental::{self, Fundamental, ReducedWordSum};
use crate::graphcore::{enumerate_paths, AlgebraGraph};
use crate::matalg::modular_data;
use crate::pathmod::{build_truncated_space, modular_block_residual, scalar_inner_product, Functional, PathEngine};
use crate::report::{Check, SuiteReport};
use crate::sampling::WordSampler;
use crate::unscrew::{self, FreeProductView, HnnView, UnscrewError};

const TOL: f64 = 1e-9;
/// Largest truncated space the dense product-formula check is allowed to build.
const DENSE_BUDGET: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Module,
    Fundamental,
    Unscrew,
    Bassserre,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [Suite::Algebra, Suite::Module, Suite::Fundamental, Suite::Unscrew, Suite::Bassserre];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Module => "module",
            Suite::Fundamental => "fundamental",
            Suite::Unscrew => "unscrew",
            Suite::Bassserre => "bassserre",
            Suite::All => "all",
        }
    }

    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => Self::EACH.to_vec(),
            s => vec![s],
        }
    }
}

/// Runs the requested suites in parallel and returns them in fixed order.
pub fn run(g: &AlgebraGraph, suite: Suite, depth: usize, seed: u64) -> Result<Vec<SuiteReport>, CliError> {
    suite.expand().par_iter().map(|&s| run_one(g, s, depth, seed)).collect()
}

fn run_one(g: &AlgebraGraph, suite: Suite, depth: usize, seed: u64) -> Result<SuiteReport, CliError> {
    Ok(match suite {
        Suite::Algebra => algebra(g),
        Suite::Module => module(g, depth, seed)?,
        Suite::Fundamental => fundamental(g, depth, seed)?,
        Suite::Unscrew => unscrew_suite(g, seed)?,
        Suite::Bassserre if !g.has_counits() => SuiteReport::skipped("bassserre", "the descriptor carries no compatible counits"),
        Suite::Bassserre => bassserre::verify(g, depth, seed)?,
        Suite::All => unreachable!("expanded before dispatch"),
    })
}

/// Conditional-expectation laws, modular data and counits.
pub fn algebra(g: &AlgebraGraph) -> SuiteReport {
    let gr = &g.graph;
    let mut laws: Vec<(&'static str, f64)> = Vec::new();
    for e in 0..gr.edge_count() {
        let res = g.embeddings[e].law_residuals(&g.vertices[gr.source(e)].state, &g.edge_algebras[e].state);
        for (law, r) in res {
            match laws.iter_mut().find(|(l, _)| *l == law) {
                Some(slot) => slot.1 = slot.1.max(r),
                None => laws.push((law, r)),
            }
        }
    }
    let mut checks: Vec<Check> =
        laws.into_iter().map(|(law, r)| Check::at_most(format!("conditional expectation {law}"), r, TOL)).collect();
    let modular = g
        .vertices
        .iter()
        .chain(&g.edge_algebras)
        .map(|v| modular_data(&v.algebra, &v.state).map(|m| m.self_check()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("modular conjugation and polar decomposition", modular, TOL));
    if g.vertices.iter().all(|v| v.counit.is_some()) && g.edge_algebras.iter().all(|v| v.counit.is_some()) {
        let r = (0..gr.edge_count())
            .map(|e| {
                let ev = g.vertices[gr.source(e)].counit.as_ref().expect("present");
                let ee = g.edge_algebras[e].counit.as_ref().expect("present");
                (g.embed(e).transpose() * ev.values() - ee.values()).norm()
            })
            .fold(0.0, f64::max);
        checks.push(Check::at_most("counits agree along edges", r, TOL));
    }
    SuiteReport::new("algebra", checks)
}

/// Block modular operators and the orthonormal model of the path modules.
pub fn module(g: &AlgebraGraph, depth: usize, seed: u64) -> Result<SuiteReport, CliError> {
    let gr = &g.graph;
    let p0 = g.base();
    let engine = PathEngine::new(g);
    let modular = enumerate_paths(gr, p0, Some(p0), depth.min(2)).iter().map(|w| modular_block_residual(&engine, w)).fold(0.0, f64::max);
    let mut s = WordSampler::new(g, seed);
    let mut inner: f64 = 0.0;
    for _ in 0..30 {
        let len = s.rng().gen_range(1..=depth.max(1));
        let path = s.walk(p0, len, false);
        if path.is_empty() {
            continue;
        }
        let verts: Vec<usize> = std::iter::once(p0).chain(path.iter().map(|&e| gr.range(e))).collect();
        let legs = |s: &mut WordSampler| -> Vec<_> {
            (0..verts.len())
                .map(|i| {
                    let a = s.element(verts[i]);
                    if i >= 1 && i < path.len() && path[i] == gr.bar(path[i - 1]) {
                        g.complement(path[i]) * a
                    } else {
                        a
                    }
                })
                .collect()
        };
        let (a, b) = (legs(&mut s), legs(&mut s));
        let q = *verts.last().expect("nonempty");
        let ca = engine.tensor_coords(p0, &path, Functional::State, &a);
        let cb = engine.tensor_coords(p0, &path, Functional::State, &b);
        let direct = scalar_inner_product(g, &path, &a, &b, q, Functional::State).map_err(fundamental::FundamentalError::from)?;
        inner = inner.max((ca.dotc(&cb) - direct).norm() / direct.norm().max(1.0));
    }
    Ok(SuiteReport::new(
        "module",
        vec![
            Check::at_most("block modular operator is the tensor of vertex operators", modular, 1e-8),
            Check::at_most("orthonormal coordinates reproduce the module inner product", inner, TOL),
        ],
    ))
}

/// Normal forms against the path-module representation.
pub fn fundamental(g: &AlgebraGraph, depth: usize, seed: u64) -> Result<SuiteReport, CliError> {
    let f = Fundamental::new(g);
    let p0 = g.base();
    let dense = dense_depth(g, depth, DENSE_BUDGET);
    let product = fundamental::product_formula_residual(g, seed, 25, dense.min(4), dense)?;
    let coherence = fundamental::vacuum_coherence_residual(g, seed, 50, 3)?;
    let reach = (0..g.graph.vertex_count()).map(|p| g.geodesic(p0, p).len()).max().unwrap_or(0);
    // base change acts with x*x on vectors as deep as the tree reaches; large
    // algebras fall back to x itself
    let squared = dense_depth(g, 4 + reach, DENSE_BUDGET) >= 4 + reach;
    let mut s = WordSampler::new(g, seed ^ 0xf00d);
    let sample = |s: &mut WordSampler| -> Result<ReducedWordSum, CliError> {
        let len = s.length(2);
        let w = s.reduced_loop(p0, len);
        Ok(f.reduce(&w)?)
    };
    let mut assoc: f64 = 0.0;
    let mut anti: f64 = 0.0;
    let mut positive: f64 = 0.0;
    for _ in 0..10 {
        let (x, y, z) = (sample(&mut s)?, sample(&mut s)?, sample(&mut s)?);
        let left = f.multiply(&f.multiply(&x, &y)?, &z)?;
        let right = f.multiply(&x, &f.multiply(&y, &z)?)?;
        assoc = assoc.max(f.distance(&left, &right)?);
        let xy_star = f.adjoint(&f.multiply(&x, &y)?);
        anti = anti.max(f.distance(&xy_star, &f.multiply(&f.adjoint(&y), &f.adjoint(&x))?)?);
        let v = f.fundamental_state(&f.multiply(&f.adjoint(&x), &x)?);
        positive = positive.max((-v.re).max(0.0) + v.im.abs());
    }
    let mut samples: Vec<ReducedWordSum> = (0..4).map(|_| sample(&mut s)).collect::<Result<_, _>>()?;
    if squared {
        samples = samples.iter().map(|x| f.multiply(&f.adjoint(x), x)).collect::<Result<_, _>>()?;
    }
    let mut base_change: f64 = 0.0;
    for p in 0..g.graph.vertex_count() {
        if p != p0 {
            base_change = base_change.max(fundamental::base_change_check(&f, p, &samples)?);
        }
    }
    Ok(SuiteReport::new(
        "fundamental",
        vec![
            Check::at_most(format!("product formula matches per-edge composition (depth {dense})"), product, TOL),
            Check::at_most("state of the normal form is the vacuum expectation", coherence, TOL),
            Check::at_most("multiplication is associative", assoc, TOL),
            Check::at_most("adjoint reverses products", anti, TOL),
            Check::at_most("state is positive", positive, TOL),
            Check::at_most("vacuum expectation is independent of the base vertex", base_change, TOL),
        ],
    ))
}

/// Largest depth up to `depth` whose base-rooted truncated space stays within `budget`.
fn dense_depth(g: &AlgebraGraph, depth: usize, budget: usize) -> usize {
    let engine = PathEngine::new(g);
    let p0 = g.base();
    (1..=depth)
        .take_while(|&d| {
            (0..g.graph.vertex_count())
                .filter_map(|q| build_truncated_space(&engine, p0, q, d, Functional::State).ok())
                .map(|s| s.dim())
                .sum::<usize>()
                <= budget
        })
        .last()
        .unwrap_or(1)
}

fn applicable<T>(r: Result<T, UnscrewError>) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(UnscrewError::WrongShape { .. } | UnscrewError::NotClassical) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Classical oracle, free-product and HNN views, and iterated unscrewing.
pub fn unscrew_suite(g: &AlgebraGraph, seed: u64) -> Result<SuiteReport, CliError> {
    let mut checks = Vec::new();
    if g.is_classical() {
        if let Some(c) = applicable(unscrew::haar_state_check(g, seed, 30, 4))? {
            checks.push(c);
        }
    }
    if let Some(view) = applicable(FreeProductView::new(g))? {
        checks.extend(view.moments_check(seed, 8, 6)?);
    }
    if let Some(view) = applicable(HnnView::new(g))? {
        checks.extend(view.relation_check(seed, 10)?);
        checks.push(view.free_generator_check(6)?);
    }
    if let Some(c) = applicable(unscrew::unscrewing_coherence(g, seed, 6, 6))? {
        checks.push(c);
    }
    Ok(if checks.is_empty() {
        SuiteReport::skipped("unscrew", "no classical data, two-vertex, loop or three-vertex path shape")
    } else {
        SuiteReport::new("unscrew", checks)
    })
}
