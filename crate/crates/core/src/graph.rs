//! Finite `d`-regular graphs given by generator permutations, the induced
//! action of the group on vertices, and pull-back names.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::group::{Parity, TreeBall, Word};

/// A spin value, an index into the alphabet.
pub type Spin = u8;

const MATCHING_RESAMPLE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("expected {expected} generator permutations, got {got}")]
    GeneratorCount { expected: usize, got: usize },
    #[error("generator {gen} is not a bijection on 0..{n}")]
    NotABijection { gen: usize, n: usize },
    #[error("generator {gen} is not an involution at vertex {vertex}")]
    NotInvolution { gen: usize, vertex: usize },
    #[error("generator {gen} fixes vertex {vertex}")]
    FixedPoint { gen: usize, vertex: usize },
    #[error("generators {a} and {b} agree at vertex {vertex}")]
    CoincidentGenerators { a: usize, b: usize, vertex: usize },
    #[error("involutive graphs need an even vertex count, got {0}")]
    OddVertexCount(usize),
    #[error("graph needs at least one vertex")]
    Empty,
    #[error("no simple graph found after {0} resampling attempts")]
    ResampleBudget(usize),
    #[error("parity mismatch: graph is {graph}, word is {word}")]
    ParityMismatch { graph: Parity, word: Parity },
    #[error("configuration has length {got}, graph has {n} vertices")]
    ConfigLength { got: usize, n: usize },
    #[error("malformed graph file: {0}")]
    Parse(String),
}

/// A `d`-regular graph realized by `k` permutations (even degree, free group)
/// or `d` fixed-point-free involutions (any degree).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRegularGraph {
    parity: Parity,
    gens: Vec<Vec<usize>>,
    inv_gens: Vec<Vec<usize>>,
}

impl LabeledRegularGraph {
    pub fn from_permutations(
        parity: Parity,
        perms: Vec<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        let expected = parity.num_generators();
        if perms.len() != expected {
            return Err(GraphError::GeneratorCount {
                expected,
                got: perms.len(),
            });
        }
        let n = perms[0].len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut inv_gens = Vec::with_capacity(perms.len());
        for (gen, p) in perms.iter().enumerate() {
            if p.len() != n {
                return Err(GraphError::NotABijection { gen, n });
            }
            let mut inv = vec![usize::MAX; n];
            for (v, &w) in p.iter().enumerate() {
                if w >= n || inv[w] != usize::MAX {
                    return Err(GraphError::NotABijection { gen, n });
                }
                inv[w] = v;
            }
            inv_gens.push(inv);
        }
        if parity.is_involutive() {
            for (gen, p) in perms.iter().enumerate() {
                for v in 0..n {
                    if p[v] == v {
                        return Err(GraphError::FixedPoint { gen, vertex: v });
                    }
                    if p[p[v]] != v {
                        return Err(GraphError::NotInvolution { gen, vertex: v });
                    }
                }
            }
            for a in 0..perms.len() {
                for b in a + 1..perms.len() {
                    if let Some(v) = (0..n).find(|&v| perms[a][v] == perms[b][v]) {
                        return Err(GraphError::CoincidentGenerators { a, b, vertex: v });
                    }
                }
            }
        }
        Ok(LabeledRegularGraph {
            parity,
            gens: perms,
            inv_gens,
        })
    }

    /// Uniform random permutations (even degree) or uniform perfect matchings,
    /// each resampled until it is edge-disjoint from the previous ones.
    pub fn random<R: Rng + ?Sized>(
        parity: Parity,
        n: usize,
        rng: &mut R,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let gens = match parity {
            Parity::EvenFree { k } => (0..k)
                .map(|_| {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(rng);
                    p
                })
                .collect(),
            Parity::Involutive { d } => {
                if n % 2 == 1 {
                    return Err(GraphError::OddVertexCount(n));
                }
                let mut gens: Vec<Vec<usize>> = Vec::with_capacity(d);
                for _ in 0..d {
                    let mut attempts = 0;
                    loop {
                        if attempts == MATCHING_RESAMPLE_BUDGET {
                            return Err(GraphError::ResampleBudget(attempts));
                        }
                        attempts += 1;
                        let m = random_matching(n, rng);
                        if gens.iter().all(|g| (0..n).all(|v| g[v] != m[v])) {
                            gens.push(m);
                            break;
                        }
                    }
                }
                gens
            }
        };
        Self::from_permutations(parity, gens)
    }

    pub fn n(&self) -> usize {
        self.gens[0].len()
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn degree(&self) -> usize {
        self.parity.degree()
    }

    pub fn generators(&self) -> &[Vec<usize>] {
        &self.gens
    }

    /// Image of `v` under a single letter.
    #[inline]
    pub fn step(&self, letter: i32, v: usize) -> usize {
        if letter > 0 {
            self.gens[letter as usize - 1][v]
        } else {
            self.inv_gens[(-letter) as usize - 1][v]
        }
    }

    /// `γ(g)(v)`: the rightmost letter acts first.
    pub fn act(&self, g: &Word, v: usize) -> Result<usize, GraphError> {
        if g.parity() != self.parity {
            return Err(GraphError::ParityMismatch {
                graph: self.parity,
                word: g.parity(),
            });
        }
        Ok(self.act_letters(g.letters(), v))
    }

    /// Applies a raw (not necessarily reduced) letter sequence, rightmost first.
    pub fn act_letters(&self, letters: &[i32], v: usize) -> usize {
        letters.iter().rev().fold(v, |u, &l| self.step(l, u))
    }

    /// Graph vertex of every ball element under `g ↦ γ(g)(v)`.
    pub fn ball_images(&self, ball: &TreeBall, v: usize) -> Vec<usize> {
        debug_assert_eq!(ball.parity(), self.parity);
        let mut img = Vec::with_capacity(ball.len());
        img.push(v);
        for i in 1..ball.len() {
            img.push(self.step(ball.edge_letter(i), img[ball.parent(i)]));
        }
        img
    }

    /// The colour-respecting isomorphism `T_d(r) → B(v, r)` if the ball map is
    /// injective, `None` otherwise.
    pub fn ball_model_map(&self, ball: &TreeBall, v: usize) -> Option<Vec<usize>> {
        let img = self.ball_images(ball, v);
        let mut seen = vec![false; self.n()];
        for &u in &img {
            if std::mem::replace(&mut seen[u], true) {
                return None;
            }
        }
        Some(img)
    }

    /// Radius-`r` pull-back name of `config` at `v`, indexed like `ball`.
    pub fn pullback_name(
        &self,
        ball: &TreeBall,
        config: &[Spin],
        v: usize,
    ) -> Result<Vec<Spin>, GraphError> {
        self.check_config(config)?;
        Ok(self
            .ball_images(ball, v)
            .into_iter()
            .map(|u| config[u])
            .collect())
    }

    pub fn tree_like_vertices(&self, ball: &TreeBall) -> Vec<bool> {
        (0..self.n())
            .map(|v| self.ball_model_map(ball, v).is_some())
            .collect()
    }

    /// Fraction of vertices whose radius-`t` neighbourhood is a coloured copy of
    /// `T_d(t)`.
    pub fn tree_like_fraction(&self, t: usize) -> f64 {
        if self.parity.ball_size(t) > self.n() as u128 {
            return 0.0;
        }
        let ball = TreeBall::new(self.parity, t).expect("ball no larger than the graph");
        let good = self.tree_like_vertices(&ball).iter().filter(|&&b| b).count();
        good as f64 / self.n() as f64
    }

    /// Loops, repeated colours or two-cycles that make the free-group graph a
    /// multigraph.
    pub fn has_multi_edges(&self) -> bool {
        let n = self.n();
        let letters = self.parity.letters();
        (0..n).any(|v| {
            let mut nb: Vec<usize> = letters.iter().map(|&l| self.step(l, v)).collect();
            let before = nb.len();
            nb.sort_unstable();
            nb.dedup();
            nb.len() < before || nb.contains(&v)
        })
    }

    pub fn check_config(&self, config: &[Spin]) -> Result<(), GraphError> {
        if config.len() != self.n() {
            return Err(GraphError::ConfigLength {
                got: config.len(),
                n: self.n(),
            });
        }
        Ok(())
    }

    /// Undirected edges `(u, γ_i(u), i)`, each once.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (i, g) in self.gens.iter().enumerate() {
            for (u, &w) in g.iter().enumerate() {
                if !self.parity.is_involutive() || u < w {
                    out.push((u, w, i));
                }
            }
        }
        out
    }

    /// Relabels vertices by `perm` (vertex `v` becomes `perm[v]`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self, GraphError> {
        let n = self.n();
        let gens = self
            .gens
            .iter()
            .map(|g| {
                let mut h = vec![0; n];
                for v in 0..n {
                    h[perm[v]] = perm[g[v]];
                }
                h
            })
            .collect();
        Self::from_permutations(self.parity, gens)
    }

    /// Text form: `parity d n`, then one line of images per generator.
    pub fn to_text(&self) -> String {
        let tag = if self.parity.is_involutive() { "inv" } else { "even" };
        let mut s = format!("{} {} {}\n", tag, self.degree(), self.n());
        for g in &self.gens {
            let line: Vec<String> = g.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let bad = |m: &str| GraphError::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing header"))?
            .split_whitespace()
            .collect();
        if header.len() != 3 {
            return Err(bad("header must be `parity d n`"));
        }
        let d: usize = header[1].parse().map_err(|_| bad("degree is not an integer"))?;
        let n: usize = header[2]
            .parse()
            .map_err(|_| bad("vertex count is not an integer"))?;
        let parity = match header[0] {
            "even" => Parity::from_degree(true, d).ok_or_else(|| bad("even parity needs even d"))?,
            "inv" => Parity::from_degree(false, d).ok_or_else(|| bad("degree must be positive"))?,
            other => return Err(GraphError::Parse(format!("unknown parity `{other}`"))),
        };
        let mut perms = Vec::new();
        for line in lines {
            let p = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| bad("non-integer image")))
                .collect::<Result<Vec<_>, _>>()?;
            if p.len() != n {
                return Err(GraphError::Parse(format!(
                    "generator line has {} entries, expected {n}",
                    p.len()
                )));
            }
            perms.push(p);
        }
        Self::from_permutations(parity, perms)
    }
}

fn random_matching<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut m = vec![0; n];
    for pair in order.chunks_exact(2) {
        m[pair[0]] = pair[1];
        m[pair[1]] = pair[0];
    }
    m
}
