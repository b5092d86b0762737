//! Monte Carlo and exact estimators: percolative entropy, strong spatial
//! mixing profiles, Dobrushin's coefficient, truncated specific entropy,
//! Glauber sampling and the local weak* diagnostic.
//!
//! Every estimator takes a master seed; sample `i` draws from
//! [`rng_stream`]`(seed, i)` and results are reduced in index order, so the
//! output does not depend on the number of worker threads.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::Distribution;
use crate::exact::{ExactError, ExactGibbs};
use crate::graph::{GraphError, LabeledRegularGraph, Spin};
use crate::group::{GroupError, TreeBall};
use crate::interaction::{CompiledHamiltonian, InteractionError, InteractionSpec, Pairwise, SelfField};
use crate::parallel::{map_indexed, pairwise_sum, rng_stream};
use crate::tree::{Boundary, TreeError, TreeModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("initial configuration has infinite energy")]
    InfeasibleInit,
    #[error("no vertex is tree-like at radius {0}")]
    NotTreeLike(usize),
    #[error("needs {needed} states, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("the estimator needs a vertex + edge interaction")]
    NotPairwise,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    pub method: String,
}

impl Estimate {
    /// Mean and standard error of i.i.d. sample values. A constant sample
    /// reports that constant with zero error.
    pub fn from_samples(values: &[f64], seed: u64, method: impl Into<String>) -> Self {
        let n = values.len();
        let method = method.into();
        if n == 0 {
            return Estimate { value: f64::NAN, stderr: f64::NAN, samples: 0, seed, method };
        }
        if values.iter().all(|&v| v == values[0]) {
            return Estimate { value: values[0], stderr: 0.0, samples: n as u64, seed, method };
        }
        let mean = pairwise_sum(values) / n as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Estimate {
            value: mean,
            stderr: (var / n as f64).sqrt(),
            samples: n as u64,
            seed,
            method,
        }
    }

    pub fn exact(value: f64, method: impl Into<String>) -> Self {
        Estimate { value, stderr: 0.0, samples: 0, seed: 0, method: method.into() }
    }

    /// Same estimate in other units (e.g. `1/ln 2` for bits).
    pub fn scaled(&self, factor: f64) -> Self {
        Estimate {
            value: self.value * factor,
            stderr: self.stderr * factor,
            ..self.clone()
        }
    }
}

fn pairwise_of(spec: &InteractionSpec) -> Result<Pairwise, EstimatorError> {
    spec.pairwise().ok_or(EstimatorError::NotPairwise)
}

// ---------------------------------------------------------------- percolative

/// How the Bernoulli parameter `p` is drawn per outer sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PSampling {
    Uniform,
    /// `p_i = (i + U) / n_outer`.
    Stratified,
    /// Fixed `p`; `Fixed(0.0)` gives the unconditioned root entropy.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercolativeOptions {
    pub p: PSampling,
    /// Conditioning draws per sampled set.
    pub n_inner: usize,
    /// Draw the conditioning values from a model of this (larger) radius with
    /// the same boundary instead of the evaluated model itself.
    pub generator_radius: Option<usize>,
    /// Restrict `S` to `T_d(window)` inside the radius-`r` model, so that a
    /// sweep over windows compares conditionings of one fixed measure.
    pub window: Option<usize>,
}

impl Default for PercolativeOptions {
    fn default() -> Self {
        PercolativeOptions { p: PSampling::Uniform, n_inner: 1, generator_radius: None, window: None }
    }
}

/// Percolative entropy of the radius-`r` tree model: the mean over
/// `p ~ U[0,1]`, Bernoulli(`p`) sets `S` of non-root sites and exact samples
/// `η` of `H(σ_root | σ_S = η_S)`.
pub fn percolative_entropy(
    spec: &InteractionSpec,
    r: usize,
    boundary: Boundary,
    n_outer: usize,
    seed: u64,
    opts: &PercolativeOptions,
) -> Result<Estimate, EstimatorError> {
    if opts.n_inner == 0 || n_outer == 0 {
        return Err(EstimatorError::InvalidArgument("sample counts must be positive".into()));
    }
    if let PSampling::Fixed(p) = opts.p {
        if !(0.0..=1.0).contains(&p) {
            return Err(EstimatorError::InvalidArgument(format!("p = {p} outside [0, 1]")));
        }
    }
    let model = TreeModel::new(spec, r, boundary.clone())?;
    let gen_radius = opts.generator_radius.unwrap_or(r);
    if gen_radius < r {
        return Err(EstimatorError::InvalidArgument("generator radius below model radius".into()));
    }
    let generator = if gen_radius == r { model.clone() } else { TreeModel::new(spec, gen_radius, boundary)? };
    let sampler = generator.sampler()?;
    model.root_marginal()?;
    let m = model.interior_len();
    let window = opts.window.unwrap_or(r);
    if window > r {
        return Err(EstimatorError::InvalidArgument("window larger than model radius".into()));
    }
    let reach = model.ball().prefix_len(window);
    let results: Vec<Result<f64, TreeError>> = map_indexed(n_outer, |i| {
        let mut rng = rng_stream(seed, i as u64);
        let p = match opts.p {
            PSampling::Uniform => rng.random::<f64>(),
            PSampling::Stratified => (i as f64 + rng.random::<f64>()) / n_outer as f64,
            PSampling::Fixed(p) => p,
        };
        // one draw per site whatever the window, so windows share random numbers
        let in_s: Vec<bool> = (0..m)
            .map(|u| {
                let hit = rng.random::<f64>() < p;
                hit && u > 0 && u < reach
            })
            .collect();
        let mut eta = vec![0; generator.interior_len()];
        let mut clamps = vec![None; m];
        let mut total = 0.0;
        for _ in 0..opts.n_inner {
            sampler.sample_into(&mut rng, &mut eta);
            for u in 0..m {
                clamps[u] = in_s[u].then_some(eta[u]);
            }
            total += model.root_marginal_with(&clamps)?.entropy();
        }
        Ok(total / opts.n_inner as f64)
    });
    let values = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let tag = match opts.p {
        PSampling::Uniform => "percolative/uniform-p",
        PSampling::Stratified => "percolative/stratified-p",
        PSampling::Fixed(_) => "percolative/fixed-p",
    };
    Ok(Estimate::from_samples(&values, seed, tag))
}

// ------------------------------------------------------------------------ SSM

/// Constant per-site fields `Ψ` over which suprema are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub fields: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl FieldGrid {
    pub fn zero(q: usize) -> Self {
        FieldGrid { fields: vec![vec![0.0; q]], labels: vec!["0".into()] }
    }

    /// Zero field plus `c` added to a single state, for `c` on `points` equally
    /// spaced values in `[-span, span]` and for each extra value.
    pub fn single_state(q: usize, span: f64, points: usize, extra: &[f64]) -> Self {
        let mut grid = FieldGrid::zero(q);
        let mut values: Vec<f64> = if points > 1 {
            (0..points).map(|i| -span + 2.0 * span * i as f64 / (points - 1) as f64).collect()
        } else {
            Vec::new()
        };
        values.extend_from_slice(extra);
        for a in 0..q {
            for &c in &values {
                if c == 0.0 {
                    continue;
                }
                let mut f = vec![0.0; q];
                f[a] = c;
                grid.fields.push(f);
                grid.labels.push(format!("{c:+}@{a}"));
            }
        }
        grid
    }

    /// 21 points on `[-3, 3]` per state plus the clamping values `±30`.
    pub fn standard(q: usize) -> Self {
        FieldGrid::single_state(q, 3.0, 21, &[-30.0, 30.0])
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SsmStrategy {
    /// All-`a` boundaries only.
    Extremal,
    /// Every annulus configuration; errors beyond `budget` configurations.
    Exhaustive { budget: u64 },
    /// Random starts improved by single-site flips; a lower bound.
    RandomSearch { starts: usize, passes: usize, seed: u64 },
}

impl SsmStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SsmStrategy::Extremal => "extremal",
            SsmStrategy::Exhaustive { .. } => "exhaustive",
            SsmStrategy::RandomSearch { .. } => "random-search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmPoint {
    pub r: usize,
    pub sup_difference: f64,
    pub strategy: String,
    /// Field at which the supremum was attained.
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmProfile {
    pub points: Vec<SsmPoint>,
}

impl SsmProfile {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.sup_difference).collect()
    }

    /// Per-step decay factor from a least-squares fit of `ln value` against
    /// `r`; `None` unless every value is positive and there are two points.
    pub fn fitted_rate(&self) -> Option<f64> {
        if self.points.len() < 2 || self.points.iter().any(|p| !(p.sup_difference > 0.0)) {
            return None;
        }
        let n = self.points.len() as f64;
        let xs: Vec<f64> = self.points.iter().map(|p| p.r as f64).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.sup_difference.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Some((sxy / sxx).exp())
    }
}

/// Tracks `max_η P^η(a)` and `min_η P^η(a)` for every state.
struct Spread {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl Spread {
    fn new(q: usize) -> Self {
        Spread { hi: vec![f64::NEG_INFINITY; q], lo: vec![f64::INFINITY; q] }
    }

    fn add(&mut self, d: &Distribution) {
        for (a, &p) in d.probs().iter().enumerate() {
            self.hi[a] = self.hi[a].max(p);
            self.lo[a] = self.lo[a].min(p);
        }
    }

    fn sup(&self) -> f64 {
        self.hi
            .iter()
            .zip(&self.lo)
            .map(|(h, l)| if h >= l { h - l } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

fn root_or_none(model: &TreeModel) -> Result<Option<Distribution>, TreeError> {
    match model.root_marginal() {
        Ok(d) => Ok(Some(d)),
        Err(TreeError::ZeroMass) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `sup_{a, η, τ} |P^η(σ_root = a) − P^τ(σ_root = a)|` at radius `r` for one field.
fn ssm_single(
    spec: &InteractionSpec,
    r: usize,
    strategy: &SsmStrategy,
    field: &[f64],
    task: u64,
) -> Result<f64, EstimatorError> {
    let q = spec.alphabet();
    let base = TreeModel::new(spec, r, Boundary::Free)?.with_field(SelfField::Uniform(field.to_vec()))?;
    let mut spread = Spread::new(q);
    match strategy {
        SsmStrategy::Extremal => {
            for a in 0..q {
                let m = base.clone().with_boundary(Boundary::AllState(a as Spin))?;
                if let Some(d) = root_or_none(&m)? {
                    spread.add(&d);
                }
            }
        }
        SsmStrategy::Exhaustive { budget } => {
            let k = base.annulus_len();
            let needed = (q as u128).pow(k as u32);
            if needed > *budget as u128 {
                return Err(EstimatorError::BudgetExceeded { needed, budget: *budget });
            }
            let mut eta = vec![0 as Spin; k];
            for code in 0..needed as u64 {
                let mut c = code;
                for j in (0..k).rev() {
                    eta[j] = (c % q as u64) as Spin;
                    c /= q as u64;
                }
                let m = base.clone().with_boundary(Boundary::Clamped(eta.clone()))?;
                if let Some(d) = root_or_none(&m)? {
                    spread.add(&d);
                }
            }
        }
        SsmStrategy::RandomSearch { starts, passes, seed } => {
            let k = base.annulus_len();
            let mut rng = rng_stream(*seed, task);
            let eval = |eta: &[Spin]| -> Result<Option<Distribution>, EstimatorError> {
                let m = base.clone().with_boundary(Boundary::Clamped(eta.to_vec()))?;
                Ok(root_or_none(&m)?)
            };
            for a in 0..q {
                for sign in [1.0, -1.0] {
                    for _ in 0..*starts {
                        // a feasible random start; give up after a few tries
                        let mut start = None;
                        for _ in 0..100 {
                            let eta: Vec<Spin> = (0..k).map(|_| rng.random_range(0..q) as Spin).collect();
                            if let Some(d) = eval(&eta)? {
                                start = Some((eta, d));
                                break;
                            }
                        }
                        let Some((mut eta, d)) = start else { continue };
                        spread.add(&d);
                        let mut best = sign * d.probs()[a];
                        for _ in 0..*passes {
                            let mut improved = false;
                            for j in 0..k {
                                let old = eta[j];
                                let mut keep = old;
                                for b in (0..q as Spin).filter(|&b| b != old) {
                                    eta[j] = b;
                                    if let Some(d) = eval(&eta)? {
                                        spread.add(&d);
                                        let v = sign * d.probs()[a];
                                        if v > best {
                                            best = v;
                                            keep = b;
                                            improved = true;
                                        }
                                    }
                                }
                                eta[j] = keep;
                            }
                            if !improved {
                                break;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(spread.sup())
}

/// SSM profile for `r = 0..=r_max`, maximized over `grid`.
pub fn ssm_profile(
    spec: &InteractionSpec,
    r_max: usize,
    strategy: &SsmStrategy,
    grid: &FieldGrid,
) -> Result<SsmProfile, EstimatorError> {
    pairwise_of(spec)?;
    let f = grid.len();
    let tasks: Vec<Result<f64, EstimatorError>> = map_indexed((r_max + 1) * f, |t| {
        ssm_single(spec, t / f, strategy, &grid.fields[t % f], t as u64)
    });
    let values = tasks.into_iter().collect::<Result<Vec<_>, _>>()?;
    let points = (0..=r_max)
        .map(|r| {
            let row = &values[r * f..(r + 1) * f];
            let (best, v) = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            SsmPoint {
                r,
                sup_difference: v.clamp(0.0, 1.0),
                strategy: strategy.name().into(),
                field: grid.labels[best].clone(),
            }
        })
        .collect();
    Ok(SsmProfile { points })
}

// ------------------------------------------------------------------ Dobrushin

/// Dobrushin's `α = Σ_neighbours ρ`, where `ρ` for a neighbour is the largest
/// total-variation change of the root conditional when only that neighbour's
/// spin changes, maximized over the other neighbours and over `grid`.
pub fn dobrushin_alpha(spec: &InteractionSpec, grid: &FieldGrid) -> Result<f64, EstimatorError> {
    let pw = pairwise_of(spec)?;
    let q = pw.q;
    let parity = spec.parity();
    let letters = parity.letters();
    let d = letters.len();
    // log-kernel of the root spin against the neighbour across each letter
    let kernel = |slot: usize, a: usize, b: usize| {
        let l = letters[slot];
        let t = &pw.edges[l.unsigned_abs() as usize - 1];
        if l > 0 { t[a * q + b] } else { t[b * q + a] }
    };
    let configs = (q as u128).pow(d as u32 - 1);
    if configs > 1 << 24 {
        return Err(EstimatorError::BudgetExceeded { needed: configs, budget: 1 << 24 });
    }
    let conditional = |field: &[f64], nb: &[usize], out: &mut [f64]| -> bool {
        for a in 0..q {
            out[a] = pw.vertex[a] + field[a] + (0..d).map(|s| kernel(s, a, nb[s])).sum::<f64>();
        }
        let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return false;
        }
        let z: f64 = out.iter().map(|x| (x - m).exp()).sum();
        out.iter_mut().for_each(|x| *x = (*x - m).exp() / z);
        true
    };
    let mut alpha = 0.0;
    for j in 0..d {
        let mut rho: f64 = 0.0;
        for field in &grid.fields {
            let mut nb = vec![0usize; d];
            let (mut p, mut p2) = (vec![0.0; q], vec![0.0; q]);
            for code in 0..configs as u64 {
                let mut c = code;
                for s in (0..d).filter(|&s| s != j) {
                    nb[s] = (c % q as u64) as usize;
                    c /= q as u64;
                }
                for b in 0..q {
                    nb[j] = b;
                    if !conditional(field, &nb, &mut p) {
                        continue;
                    }
                    for b2 in b + 1..q {
                        nb[j] = b2;
                        if conditional(field, &nb, &mut p2) {
                            let tv = 0.5 * p.iter().zip(&p2).map(|(x, y)| (x - y).abs()).sum::<f64>();
                            rho = rho.max(tv);
                        }
                    }
                    nb[j] = b;
                }
            }
        }
        alpha += rho;
    }
    Ok(alpha)
}

// -------------------------------------------------------------------- Glauber

/// A finite-energy starting configuration: all zeros if feasible, otherwise
/// greedy repair sweeps minimizing the number of violated hard constraints.
pub fn feasible_init(
    graph: &LabeledRegularGraph,
    spec: &InteractionSpec,
) -> Result<Vec<Spin>, EstimatorError> {
    let h = CompiledHamiltonian::new(spec, graph)?;
    let n = graph.n();
    let q = spec.alphabet();
    let mut config = vec![0 as Spin; n];
    for _ in 0..100 {
        if h.energy(&config).is_finite() {
            return Ok(config);
        }
        for v in 0..n {
            let mut best = (u32::MAX, 0);
            for a in 0..q {
                config[v] = a as Spin;
                let (_, inf) = h.local_split(v, &config);
                if inf < best.0 {
                    best = (inf, a);
                }
            }
            config[v] = best.1 as Spin;
        }
    }
    Err(EstimatorError::InfeasibleInit)
}

/// Random-scan heat-bath chain for the graph Gibbs measure.
pub struct Glauber {
    h: CompiledHamiltonian,
    config: Vec<Spin>,
    buf: Vec<f64>,
}

impl Glauber {
    pub fn new(
        graph: &LabeledRegularGraph,
        spec: &InteractionSpec,
        init: Vec<Spin>,
    ) -> Result<Self, EstimatorError> {
        graph.check_config(&init)?;
        let h = CompiledHamiltonian::new(spec, graph)?;
        if !h.energy(&init).is_finite() {
            return Err(EstimatorError::InfeasibleInit);
        }
        let q = h.alphabet();
        Ok(Glauber { h, config: init, buf: vec![0.0; q] })
    }

    pub fn config(&self) -> &[Spin] {
        &self.config
    }

    pub fn update<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) {
        self.h.site_conditional(site, &mut self.config, &mut self.buf);
        let m = self.buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in self.buf.iter_mut() {
            *x = (*x - m).exp();
            total += *x;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = self.buf.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (a, &w) in self.buf.iter().enumerate() {
            if u < w {
                pick = a;
                break;
            }
            u -= w;
        }
        self.config[site] = pick as Spin;
    }

    /// `n` uniformly chosen single-site updates.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.config.len();
        for _ in 0..n {
            let v = rng.random_range(0..n);
            self.update(v, rng);
        }
    }
}

/// Runs `sweeps` random-scan sweeps from `init` and returns the final state.
pub fn glauber_sample<R: Rng + ?Sized>(
    graph: &LabeledRegularGraph,
    spec: &InteractionSpec,
    sweeps: usize,
    rng: &mut R,
    init: Vec<Spin>,
) -> Result<Vec<Spin>, EstimatorError> {
    let mut chain = Glauber::new(graph, spec, init)?;
    for _ in 0..sweeps {
        chain.sweep(rng);
    }
    Ok(chain.config)
}

// -------------------------------------------------------- truncated entropy

/// Where the conditioning spins of the truncated estimator come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClampSource {
    /// An independent Glauber chain per ordering from a feasible start.
    Glauber { burn_in: usize },
    /// Exact samples; needs full enumeration.
    Exact { budget: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedEntropy {
    pub estimate: Estimate,
    /// Extremal SSM value at `r` over the standard field grid.
    pub ssm: f64,
    /// `ssm · ln|A|`.
    pub bias_bound: f64,
    pub tree_like_fraction: f64,
}

/// Specific entropy of the graph measure from random orderings: each vertex
/// contributes the root entropy of the radius-`r` tree model (free boundary)
/// clamped to the earlier vertices of its ball; vertices whose radius-`(r+1)`
/// ball is not a tree contribute `ln|A|`.
pub fn specific_entropy_truncated(
    graph: &LabeledRegularGraph,
    spec: &InteractionSpec,
    r: usize,
    n_orderings: usize,
    seed: u64,
    source: &ClampSource,
) -> Result<TruncatedEntropy, EstimatorError> {
    if n_orderings == 0 {
        return Err(EstimatorError::InvalidArgument("need at least one ordering".into()));
    }
    let parity = spec.parity();
    if graph.parity() != parity {
        return Err(EstimatorError::Graph(GraphError::ParityMismatch { graph: graph.parity(), word: parity }));
    }
    let n = graph.n();
    let q = spec.alphabet();
    let model = TreeModel::new(spec, r, Boundary::Free)?;
    let outer = TreeBall::new(parity, r + 1)?;
    let maps: Vec<Option<Vec<usize>>> = (0..n)
        .map(|v| graph.ball_model_map(&outer, v).map(|img| img[..model.interior_len()].to_vec()))
        .collect();
    let good = maps.iter().filter(|m| m.is_some()).count();
    if good == 0 {
        return Err(EstimatorError::NotTreeLike(r + 1));
    }
    let exact = match source {
        ClampSource::Exact { budget } => Some(ExactGibbs::build(graph, spec, *budget)?),
        ClampSource::Glauber { .. } => None,
    };
    let init = match source {
        ClampSource::Glauber { .. } => Some(feasible_init(graph, spec)?),
        ClampSource::Exact { .. } => None,
    };
    let sampler = exact.as_ref().map(|g| g.sampler());
    let log_q = (q as f64).ln();
    let results: Vec<Result<f64, EstimatorError>> = map_indexed(n_orderings, |i| {
        let mut rng = rng_stream(seed, i as u64);
        let marks: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let config = match (source, &sampler) {
            (ClampSource::Exact { .. }, Some(s)) => s.sample(&mut rng),
            (ClampSource::Glauber { burn_in }, _) => {
                glauber_sample(graph, spec, *burn_in, &mut rng, init.clone().unwrap_or_default())?
            }
            _ => unreachable!("sampler exists for exact source"),
        };
        let mut clamps = vec![None; model.interior_len()];
        let mut per_vertex = Vec::with_capacity(n);
        for v in 0..n {
            let Some(img) = &maps[v] else {
                per_vertex.push(log_q);
                continue;
            };
            for (u, &w) in img.iter().enumerate() {
                clamps[u] = (u > 0 && marks[w] < marks[v]).then_some(config[w]);
            }
            per_vertex.push(model.root_marginal_with(&clamps)?.entropy());
        }
        Ok(pairwise_sum(&per_vertex) / n as f64)
    });
    let values = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let tag = match source {
        ClampSource::Exact { .. } => "truncated/exact-clamps",
        ClampSource::Glauber { .. } => "truncated/glauber-clamps",
    };
    let ssm = ssm_profile_at(spec, r, &SsmStrategy::Extremal, &FieldGrid::standard(q))?;
    Ok(TruncatedEntropy {
        estimate: Estimate::from_samples(&values, seed, tag),
        ssm,
        bias_bound: ssm * log_q,
        tree_like_fraction: good as f64 / n as f64,
    })
}

/// Single SSM value at radius `r`.
pub fn ssm_profile_at(
    spec: &InteractionSpec,
    r: usize,
    strategy: &SsmStrategy,
    grid: &FieldGrid,
) -> Result<f64, EstimatorError> {
    pairwise_of(spec)?;
    let values: Vec<Result<f64, EstimatorError>> =
        map_indexed(grid.len(), |f| ssm_single(spec, r, strategy, &grid.fields[f], f as u64));
    Ok(values
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max)
        .min(1.0))
}

// --------------------------------------------------------------- local weak*

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LwMode {
    Exact { budget: u64 },
    /// Empirical pull-back names from one Glauber chain.
    MonteCarlo { samples: usize, burn_in: usize, thin: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwDiagnostic {
    /// Fraction of vertices farther than `epsilon` (or not tree-like).
    pub fraction: f64,
    pub max_tv: f64,
    pub mean_tv: f64,
    pub tree_like_fraction: f64,
}

/// Extra radius of the free-boundary reference model beyond the compared ball.
pub const LW_REFERENCE_EXTRA: usize = 4;

/// Compares each vertex's radius-`r` pull-back marginal with the tree
/// measure's ball marginal (free boundary at radius `r + LW_REFERENCE_EXTRA`).
pub fn lw_diagnostic(
    graph: &LabeledRegularGraph,
    spec: &InteractionSpec,
    r: usize,
    epsilon: f64,
    mode: &LwMode,
    seed: u64,
) -> Result<LwDiagnostic, EstimatorError> {
    let parity = spec.parity();
    if graph.parity() != parity {
        return Err(EstimatorError::Graph(GraphError::ParityMismatch { graph: graph.parity(), word: parity }));
    }
    let n = graph.n();
    let q = spec.alphabet();
    let ball = TreeBall::new(parity, r)?;
    let cells = (q as u128).pow(ball.len() as u32);
    let budget = match mode {
        LwMode::Exact { budget } => *budget,
        LwMode::MonteCarlo { .. } => 1 << 24,
    };
    if cells > budget as u128 {
        return Err(EstimatorError::BudgetExceeded { needed: cells, budget });
    }
    let maps: Vec<Option<Vec<usize>>> = (0..n).map(|v| graph.ball_model_map(&ball, v)).collect();
    let good = maps.iter().filter(|m| m.is_some()).count();
    let reference = TreeModel::new(spec, r + LW_REFERENCE_EXTRA, Boundary::Free)?.ball_marginal(r, budget)?;
    let marginals: Vec<Option<Distribution>> = match mode {
        LwMode::Exact { budget } => {
            let gibbs = ExactGibbs::build(graph, spec, *budget)?;
            maps.iter()
                .map(|m| m.as_ref().map(|sites| gibbs.marginal(sites)).transpose())
                .collect::<Result<_, _>>()?
        }
        LwMode::MonteCarlo { samples, burn_in, thin } => {
            if *samples == 0 {
                return Err(EstimatorError::InvalidArgument("need at least one sample".into()));
            }
            let mut rng = rng_stream(seed, 0);
            let mut chain = Glauber::new(graph, spec, feasible_init(graph, spec)?)?;
            for _ in 0..*burn_in {
                chain.sweep(&mut rng);
            }
            let mut counts = vec![vec![0u64; cells as usize]; n];
            for _ in 0..*samples {
                for _ in 0..(*thin).max(1) {
                    chain.sweep(&mut rng);
                }
                let config = chain.config();
                for (v, m) in maps.iter().enumerate() {
                    if let Some(sites) = m {
                        let idx = sites.iter().fold(0usize, |acc, &u| acc * q + config[u] as usize);
                        counts[v][idx] += 1;
                    }
                }
            }
            maps.iter()
                .zip(counts)
                .map(|(m, c)| {
                    m.as_ref()
                        .map(|_| {
                            let w = c.into_iter().map(|x| x as f64).collect();
                            Distribution::from_weights(q, ball.len(), w)
                        })
                        .transpose()
                })
                .collect::<Result<_, _>>()
                .map_err(ExactError::from)?
        }
    };
    let mut bad = n - good;
    let mut tvs = Vec::with_capacity(good);
    for d in marginals.iter().flatten() {
        let tv = d.tv_distance(&reference).map_err(ExactError::from)?;
        if tv > epsilon {
            bad += 1;
        }
        tvs.push(tv);
    }
    Ok(LwDiagnostic {
        fraction: bad as f64 / n as f64,
        max_tv: tvs.iter().cloned().fold(0.0, f64::max),
        mean_tv: if tvs.is_empty() { 0.0 } else { pairwise_sum(&tvs) / tvs.len() as f64 },
        tree_like_fraction: good as f64 / n as f64,
    })
}
