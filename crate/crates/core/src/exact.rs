//! Exact Gibbs measures on small graphs by enumeration of `A^V`.
//!
//! Configurations are coded in mixed radix with site 0 as the least
//! significant digit. Enumeration walks that order in fixed-size chunks, each
//! chunk updating the energy incrementally as the odometer ticks; chunk
//! results are merged in index order.

use rand::Rng;
use thiserror::Error;

use crate::dist::{entropy_of, Distribution, DistributionError};
use crate::graph::{LabeledRegularGraph, Spin};
use crate::group::TreeBall;
use crate::interaction::{CompiledHamiltonian, InteractionError, InteractionSpec};
use crate::parallel::map_indexed;

/// Default cap on the number of configurations enumerated.
pub const DEFAULT_BUDGET: u64 = 1 << 24;
/// Default cap on the vertex count for the all-subsets percolation identity.
pub const DEFAULT_IDENTITY_MAX_N: usize = 10;

const CHUNK: u64 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("enumeration needs {needed} states, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("no configuration has finite energy")]
    ZeroPartition,
    #[error("vertex {vertex} is not tree-like at radius {radius}")]
    NotTreeLike { vertex: usize, radius: usize },
    #[error("site {0} is out of range or repeated")]
    BadSite(usize),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

fn state_count(q: usize, n: usize, budget: u64) -> Result<u64, ExactError> {
    let needed = (q as u128).pow(n as u32);
    if needed > budget as u128 {
        return Err(ExactError::BudgetExceeded { needed, budget });
    }
    Ok(needed as u64)
}

/// Odometer over `A^V` tracking the energy as (finite sum, count of `-inf`
/// factors).
struct Walker<'a> {
    h: &'a CompiledHamiltonian,
    config: Vec<Spin>,
    sum: f64,
    inf: u32,
}

impl<'a> Walker<'a> {
    fn at(h: &'a CompiledHamiltonian, mut code: u64) -> Self {
        let q = h.alphabet() as u64;
        let config = (0..h.n())
            .map(|_| {
                let d = (code % q) as Spin;
                code /= q;
                d
            })
            .collect::<Vec<_>>();
        let (sum, inf) = h.split(&config);
        Walker {
            h,
            config,
            sum,
            inf,
        }
    }

    #[inline]
    fn energy(&self) -> f64 {
        if self.inf > 0 {
            f64::NEG_INFINITY
        } else {
            self.sum
        }
    }

    #[inline]
    fn set(&mut self, site: usize, value: Spin) {
        let (s0, i0) = self.h.local_split(site, &self.config);
        self.config[site] = value;
        let (s1, i1) = self.h.local_split(site, &self.config);
        self.sum += s1 - s0;
        self.inf = self.inf + i1 - i0;
    }

    fn advance(&mut self) {
        let q = self.h.alphabet() as Spin;
        for site in 0..self.config.len() {
            let next = self.config[site] + 1;
            if next < q {
                self.set(site, next);
                return;
            }
            self.set(site, 0);
        }
    }
}

/// Visits every configuration in chunked index order, handing `(code, energy)`
/// to a per-chunk fold; the per-chunk results come back in order.
fn enumerate_chunks<T, F>(h: &CompiledHamiltonian, total: u64, fold: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn Iterator<Item = (u64, f64)>) -> T + Sync + Send,
{
    let chunks = total.div_ceil(CHUNK) as usize;
    map_indexed(chunks, |c| {
        let start = c as u64 * CHUNK;
        let end = (start + CHUNK).min(total);
        let mut walker = Walker::at(h, start);
        let mut code = start;
        let mut iter = std::iter::from_fn(|| {
            if code >= end {
                return None;
            }
            let item = (code, walker.energy());
            code += 1;
            if code < end {
                walker.advance();
            }
            Some(item)
        });
        fold(&mut iter)
    })
}

/// Log-partition function and Shannon entropy, accumulated without storing
/// the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySummary {
    pub n: usize,
    pub log_z: f64,
    pub entropy: f64,
    pub support_size: u64,
}

impl EntropySummary {
    pub fn specific_entropy(&self) -> f64 {
        self.entropy / self.n as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Accumulator {
    max: f64,
    s0: f64,
    s1: f64,
    count: u64,
}

impl Accumulator {
    const EMPTY: Accumulator = Accumulator {
        max: f64::NEG_INFINITY,
        s0: 0.0,
        s1: 0.0,
        count: 0,
    };

    fn push(&mut self, u: f64) {
        if u == f64::NEG_INFINITY {
            return;
        }
        self.count += 1;
        if u > self.max {
            let scale = (self.max - u).exp();
            self.s0 *= scale;
            self.s1 *= scale;
            self.max = u;
        }
        let w = (u - self.max).exp();
        self.s0 += w;
        self.s1 += w * u;
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let m = self.max.max(other.max);
        let (a, b) = ((self.max - m).exp(), (other.max - m).exp());
        self.s0 = self.s0 * a + other.s0 * b;
        self.s1 = self.s1 * a + other.s1 * b;
        self.max = m;
        self.count += other.count;
        self
    }
}

/// `log Z` and `H(μ)` by streaming enumeration; `H = log Z - E[U]`.
pub fn entropy_summary(
    graph: &LabeledRegularGraph,
    spec: &InteractionSpec,
    budget: u64,
) -> Result<EntropySummary, ExactError> {
    let total = state_count(spec.alphabet(), graph.n(), budget)?;
    let h = CompiledHamiltonian::new(spec, graph)?;
    let acc = enumerate_chunks(&h, total, |it| {
        let mut acc = Accumulator::EMPTY;
        for (_, u) in it {
            acc.push(u);
        }
        acc
    })
    .into_iter()
    .fold(Accumulator::EMPTY, Accumulator::merge);
    if acc.count == 0 {
        return Err(ExactError::ZeroPartition);
    }
    let log_z = acc.max + acc.s0.ln();
    let entropy = (log_z - acc.s1 / acc.s0).max(0.0);
    Ok(EntropySummary {
        n: graph.n(),
        log_z,
        entropy,
        support_size: acc.count,
    })
}

/// The exact Gibbs measure: every finite-energy configuration with its
/// probability.
#[derive(Debug, Clone)]
pub struct ExactGibbs {
    graph: LabeledRegularGraph,
    q: usize,
    codes: Vec<u64>,
    probs: Vec<f64>,
    log_z: f64,
}

impl ExactGibbs {
    pub fn build(
        graph: &LabeledRegularGraph,
        spec: &InteractionSpec,
        budget: u64,
    ) -> Result<Self, ExactError> {
        let total = state_count(spec.alphabet(), graph.n(), budget)?;
        let h = CompiledHamiltonian::new(spec, graph)?;
        let parts = enumerate_chunks(&h, total, |it| {
            it.filter(|(_, u)| *u > f64::NEG_INFINITY)
                .collect::<Vec<_>>()
        });
        let support: Vec<(u64, f64)> = parts.into_iter().flatten().collect();
        if support.is_empty() {
            return Err(ExactError::ZeroPartition);
        }
        let max = support
            .iter()
            .map(|&(_, u)| u)
            .fold(f64::NEG_INFINITY, f64::max);
        let s0: f64 = support.iter().map(|&(_, u)| (u - max).exp()).sum();
        let log_z = max + s0.ln();
        let (codes, probs) = support
            .into_iter()
            .map(|(c, u)| (c, (u - log_z).exp()))
            .unzip();
        Ok(ExactGibbs {
            graph: graph.clone(),
            q: spec.alphabet(),
            codes,
            probs,
            log_z,
        })
    }

    pub fn graph(&self) -> &LabeledRegularGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn alphabet(&self) -> usize {
        self.q
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn support_size(&self) -> usize {
        self.codes.len()
    }

    /// Support as `(configuration, probability)` pairs.
    pub fn support(&self) -> impl Iterator<Item = (Vec<Spin>, f64)> + '_ {
        self.codes
            .iter()
            .zip(&self.probs)
            .map(|(&c, &p)| (self.decode(c), p))
    }

    pub fn decode(&self, mut code: u64) -> Vec<Spin> {
        let q = self.q as u64;
        (0..self.n())
            .map(|_| {
                let d = (code % q) as Spin;
                code /= q;
                d
            })
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }

    fn digit_pows(&self) -> Vec<u64> {
        let q = self.q as u64;
        (0..self.n()).map(|v| q.pow(v as u32)).collect()
    }

    fn check_sites(&self, sites: &[usize]) -> Result<(), ExactError> {
        let mut seen = vec![false; self.n()];
        for &s in sites {
            if s >= self.n() || std::mem::replace(&mut seen[s], true) {
                return Err(ExactError::BadSite(s));
            }
        }
        Ok(())
    }

    /// Joint law of `sites`, the first listed site most significant.
    pub fn marginal(&self, sites: &[usize]) -> Result<Distribution, ExactError> {
        self.check_sites(sites)?;
        let q = self.q as u64;
        let pows = self.digit_pows();
        let mut out = vec![0.0; self.q.pow(sites.len() as u32)];
        for (&code, &p) in self.codes.iter().zip(&self.probs) {
            let idx = sites
                .iter()
                .fold(0u64, |acc, &s| acc * q + (code / pows[s]) % q);
            out[idx as usize] += p;
        }
        Ok(Distribution::from_weights(self.q, sites.len(), out)?)
    }

    /// `H(σ_v | σ_S) = Σ_η μ(η) H(μ(σ_v = · | η))`; null conditioning events
    /// contribute nothing.
    pub fn conditional_entropy(&self, v: usize, given: &[usize]) -> Result<f64, ExactError> {
        if given.contains(&v) {
            return Err(ExactError::BadSite(v));
        }
        let mut sites = given.to_vec();
        sites.push(v);
        let joint = self.marginal(&sites)?;
        let q = self.q;
        let h = joint
            .probs()
            .chunks(q)
            .map(|block| {
                let mass: f64 = block.iter().sum();
                if mass > 0.0 {
                    block
                        .iter()
                        .filter(|&&p| p > 0.0)
                        .map(|&p| -p * (p / mass).ln())
                        .sum::<f64>()
                } else {
                    0.0
                }
            })
            .sum::<f64>();
        Ok(h.max(0.0))
    }

    /// Entropy of the marginal on every vertex subset, indexed by bitmask.
    pub fn subset_entropies(&self) -> Result<Vec<f64>, ExactError> {
        let n = self.n();
        if n > 24 {
            return Err(ExactError::BudgetExceeded {
                needed: 1u128 << n,
                budget: 1 << 24,
            });
        }
        let mut dense = vec![0.0; self.q.pow(n as u32)];
        for (&c, &p) in self.codes.iter().zip(&self.probs) {
            dense[c as usize] = p;
        }
        let mut out = vec![0.0; 1 << n];
        let full: Vec<usize> = (0..n).collect();
        self.subsets_dfs(&full, dense, 0, &mut out);
        Ok(out)
    }

    /// `sites` ascending; `table` uses the code layout restricted to `sites`.
    /// Removes only sites at positions `>= from`, so each subset is visited once.
    fn subsets_dfs(&self, sites: &[usize], table: Vec<f64>, from: usize, out: &mut [f64]) {
        let mask = sites.iter().fold(0usize, |m, &s| m | (1 << s));
        out[mask] = entropy_of(&table);
        let q = self.q;
        for j in from..sites.len() {
            let stride = q.pow(j as u32);
            let mut reduced = vec![0.0; table.len() / q];
            for (hi, chunk) in table.chunks(stride * q).enumerate() {
                for a in 0..q {
                    for lo in 0..stride {
                        reduced[hi * stride + lo] += chunk[a * stride + lo];
                    }
                }
            }
            let mut rest = sites.to_vec();
            rest.remove(j);
            self.subsets_dfs(&rest, reduced, j, out);
        }
    }

    /// `(1/n) Σ_v Σ_{S ⊆ V∖{v}} w(|S|) H(σ_v | σ_S)` with
    /// `w(m) = m! (n-1-m)! / n!`, the random-order average of the chain rule.
    pub fn percolation_identity_rhs(&self, max_n: usize) -> Result<f64, ExactError> {
        let n = self.n();
        if n > max_n {
            return Err(ExactError::BudgetExceeded {
                needed: 1u128 << n,
                budget: 1u64 << max_n,
            });
        }
        let h = self.subset_entropies()?;
        let weights: Vec<f64> = (0..n).map(|m| order_weight(n, m)).collect();
        let mut total = 0.0;
        for v in 0..n {
            let bit = 1usize << v;
            for s in 0..(1usize << n) {
                if s & bit != 0 {
                    continue;
                }
                let m = s.count_ones() as usize;
                total += weights[m] * (h[s | bit] - h[s]);
            }
        }
        Ok(total / n as f64)
    }

    /// Law of the radius-`r` pull-back name at `v`, indexed like `ball`.
    pub fn pushforward_marginal(
        &self,
        v: usize,
        ball: &TreeBall,
        budget: u64,
    ) -> Result<Distribution, ExactError> {
        let sites = self
            .graph
            .ball_model_map(ball, v)
            .ok_or(ExactError::NotTreeLike {
                vertex: v,
                radius: ball.radius(),
            })?;
        state_count(self.q, sites.len(), budget)?;
        self.marginal(&sites)
    }

    pub fn sampler(&self) -> ExactSampler<'_> {
        let mut acc = 0.0;
        let cdf = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        ExactSampler { gibbs: self, cdf }
    }
}

/// `m! (n-1-m)! / n!`: probability that a uniformly random ordering puts a
/// given vertex right after a given set of size `m` of the others.
pub fn order_weight(n: usize, m: usize) -> f64 {
    // 1 / (n · C(n-1, m))
    let mut binom = 1.0f64;
    for i in 0..m {
        binom = binom * (n - 1 - i) as f64 / (i + 1) as f64;
    }
    1.0 / (n as f64 * binom)
}

/// Exact i.i.d. sampling from a built table by inverse CDF.
pub struct ExactSampler<'a> {
    gibbs: &'a ExactGibbs,
    cdf: Vec<f64>,
}

impl ExactSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Spin> {
        let total = *self.cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.gibbs.decode(self.gibbs.codes[i])
    }
}
