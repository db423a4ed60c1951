//! Seeded random words for property checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fundamental::Word;
use crate::graphcore::AlgebraGraph;
use crate::linalg::{self, CVec, C64};

pub struct WordSampler<'g> {
    g: &'g AlgebraGraph,
    rng: ChaCha8Rng,
}

impl<'g> WordSampler<'g> {
    pub fn new(g: &'g AlgebraGraph, seed: u64) -> Self {
        WordSampler { g, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Entries with real and imaginary parts uniform in `[-1, 1]`.
    pub fn element(&mut self, v: usize) -> CVec {
        let d = self.g.vertex_dim(v);
        CVec::from_fn(d, |_, _| C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0)))
    }

    pub fn scalar(&mut self) -> C64 {
        C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))
    }

    /// Random walk of exactly `len` edges from `start`; backtracking steps are
    /// skipped when `reduced` is set and the edge complement vanishes.
    pub fn walk(&mut self, start: usize, len: usize, reduced: bool) -> Vec<usize> {
        let mut path: Vec<usize> = Vec::with_capacity(len);
        let mut v = start;
        for _ in 0..len {
            let options: Vec<usize> = self
                .g
                .graph
                .out_edges(v)
                .into_iter()
                .filter(|&f| {
                    !reduced || path.last().is_none_or(|&p| f != self.g.graph.bar(p)) || linalg::max_abs(self.g.complement(f)) > 1e-12
                })
                .collect();
            let Some(&f) = options.choose(&mut self.rng) else { break };
            path.push(f);
            v = self.g.graph.range(f);
        }
        path
    }

    fn legs_for(&mut self, start: usize, path: &[usize], reduced: bool) -> Vec<CVec> {
        let verts: Vec<usize> = std::iter::once(start).chain(path.iter().map(|&e| self.g.graph.range(e))).collect();
        (0..verts.len())
            .map(|i| {
                let a = self.element(verts[i]);
                match (reduced, i >= 1 && i < path.len() && path[i] == self.g.graph.bar(path[i - 1])) {
                    (true, true) => self.g.complement(path[i]) * a,
                    _ => a,
                }
            })
            .collect()
    }

    /// Reduced word with `len` edges starting at `start`, ending wherever the walk ends.
    pub fn reduced_word(&mut self, start: usize, len: usize) -> Word {
        let path = self.walk(start, len, true);
        let legs = self.legs_for(start, &path, true);
        Word { start, path, legs }
    }

    /// Word with arbitrary legs along a closed walk at `base`: a random walk of
    /// `len` edges followed by the tree geodesic home.
    pub fn raw_loop(&mut self, base: usize, len: usize) -> Word {
        let mut path = self.walk(base, len, false);
        let end = path.last().map_or(base, |&e| self.g.graph.range(e));
        path.extend(self.g.geodesic(end, base));
        let legs = self.legs_for(base, &path, false);
        Word { start: base, path, legs }
    }

    /// Reduced word along a closed walk at `base`.
    pub fn reduced_loop(&mut self, base: usize, len: usize) -> Word {
        for _ in 0..64 {
            let mut path = self.walk(base, len, true);
            let end = path.last().map_or(base, |&e| self.g.graph.range(e));
            path.extend(self.g.geodesic(end, base));
            let ok =
                (1..path.len()).all(|i| path[i] != self.g.graph.bar(path[i - 1]) || linalg::max_abs(self.g.complement(path[i])) > 1e-12);
            if ok {
                let legs = self.legs_for(base, &path, true);
                return Word { start: base, path, legs };
            }
        }
        Word::vertex(base, self.element(base))
    }

    /// Uniform length in `0..=max_len`.
    pub fn length(&mut self, max_len: usize) -> usize {
        self.rng.gen_range(0..=max_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn sampled_words_are_well_formed() {
        for (_, g) in fixtures::shipped() {
            let mut s = WordSampler::new(&g, 3);
            for len in 0..5 {
                let w = s.reduced_word(g.base(), len);
                assert!(Word::new(&g, w.start, w.path.clone(), w.legs.clone()).is_ok());
                assert!(w.is_reduced(&g, 1e-10));
                let r = s.raw_loop(g.base(), len);
                assert_eq!(r.end(&g), g.base());
            }
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let g = fixtures::z4_amalgam();
        let a = WordSampler::new(&g, 11).reduced_word(0, 3);
        let b = WordSampler::new(&g, 11).reduced_word(0, 3);
        assert_eq!(a, b);
    }
}
