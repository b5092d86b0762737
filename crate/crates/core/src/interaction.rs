//! Translation-invariant finite-range interactions, the concrete models, and
//! the Hamiltonian they induce on permutation-labeled graphs.
//!
//! Log-weights are `f64` values in `[-inf, inf)`; `-inf` encodes a hard
//! constraint. Tables are row-major over the term's support, the first support
//! element being the most significant digit.

use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, LabeledRegularGraph, Spin};
use crate::group::{GroupError, Parity, TreeBall, Word};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InteractionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("log-weight tables may not contain +inf or NaN")]
    NonFiniteWeight,
    #[error("term support must contain the identity")]
    MissingIdentity,
    #[error("term table has {got} entries, expected {expected}")]
    TableSize { got: usize, expected: usize },
    #[error("term table is not invariant under the translations fixing its support")]
    NotTranslationInvariant,
    #[error("no configuration on the ball of radius {0} has finite energy")]
    Infeasible(usize),
    #[error("spec is {spec}, graph is {graph}")]
    ParityMismatch { spec: Parity, graph: Parity },
    #[error("configuration spin {spin} outside alphabet of size {alphabet}")]
    AlphabetMismatch { spin: Spin, alphabet: usize },
    #[error("threshold undefined for degree {0}")]
    Degree(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A log-weight in `[-inf, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogWeight(f64);

impl LogWeight {
    pub const NEG_INFINITY: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ZERO: LogWeight = LogWeight(0.0);

    pub fn new(v: f64) -> Option<LogWeight> {
        (v < f64::INFINITY).then_some(LogWeight(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// `exp` of the weight; exactly zero for `-inf`.
    pub fn weight(self) -> f64 {
        self.0.exp()
    }
}

impl Add for LogWeight {
    type Output = LogWeight;
    fn add(self, rhs: LogWeight) -> LogWeight {
        LogWeight(self.0 + rhs.0)
    }
}

/// Which named model a spec was built from, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelKind {
    Ising { beta: f64 },
    Potts { beta: f64, q: usize },
    Hardcore { lambda: f64 },
    Coloring { q: usize },
    Custom,
}

/// One orbit representative `F₀` and its log-weight table over `A^{F₀}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    support: Vec<Word>,
    table: Vec<f64>,
    /// Right translations `g` with `F₀·g = F₀`, as position permutations.
    stabilizer: Vec<Vec<usize>>,
}

impl Term {
    pub fn support(&self) -> &[Word] {
        &self.support
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn stabilizer_order(&self) -> usize {
        self.stabilizer.len()
    }
}

/// A single-site field: one value per spin, on every site or per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SelfField {
    Uniform(Vec<f64>),
    PerSite(Vec<Vec<f64>>),
}

impl SelfField {
    pub fn zero(q: usize) -> SelfField {
        SelfField::Uniform(vec![0.0; q])
    }

    pub fn at(&self, site: usize) -> &[f64] {
        match self {
            SelfField::Uniform(t) => t,
            SelfField::PerSite(ts) => &ts[site],
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            SelfField::Uniform(t) => t.iter().all(|x| x.is_finite()),
            SelfField::PerSite(ts) => ts.iter().flatten().all(|x| x.is_finite()),
        }
    }
}

/// Vertex table plus one edge table per generator colour, the shape every
/// named model has. `edges[i][a * q + b]` weighs `(σ_g, σ_{s_i g})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairwise {
    pub q: usize,
    pub vertex: Vec<f64>,
    pub edges: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    alphabet: usize,
    parity: Parity,
    terms: Vec<Term>,
    range: usize,
    kind: ModelKind,
    field: Vec<f64>,
}

impl InteractionSpec {
    /// Builds a spec from raw `(support, table)` pairs, validating every
    /// invariant including a finite-energy witness on `ball(L + 1)`.
    pub fn new(
        alphabet: usize,
        parity: Parity,
        raw_terms: Vec<(Vec<Word>, Vec<f64>)>,
    ) -> Result<Self, InteractionError> {
        if alphabet == 0 || alphabet > Spin::MAX as usize + 1 {
            return Err(InteractionError::InvalidParameter(format!(
                "alphabet size {alphabet}"
            )));
        }
        let mut terms = Vec::with_capacity(raw_terms.len());
        let mut range = 0;
        for (support, table) in raw_terms {
            if !support.iter().any(|w| w.is_identity()) {
                return Err(InteractionError::MissingIdentity);
            }
            if support.iter().any(|w| w.parity() != parity) {
                return Err(InteractionError::Group(GroupError::ParityMismatch(
                    parity,
                    support.iter().find(|w| w.parity() != parity).unwrap().parity(),
                )));
            }
            let expected = alphabet.pow(support.len() as u32);
            if table.len() != expected {
                return Err(InteractionError::TableSize {
                    got: table.len(),
                    expected,
                });
            }
            if table.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
                return Err(InteractionError::NonFiniteWeight);
            }
            range = range.max(support.iter().map(Word::len).max().unwrap_or(0));
            let stabilizer = stabilizer_permutations(&support)?;
            check_invariance(alphabet, &table, &stabilizer)?;
            terms.push(Term {
                support,
                table,
                stabilizer,
            });
        }
        let spec = InteractionSpec {
            alphabet,
            parity,
            terms,
            range,
            kind: ModelKind::Custom,
            field: vec![0.0; alphabet],
        };
        spec.check_feasible()?;
        Ok(spec)
    }

    fn from_pairwise(
        parity: Parity,
        q: usize,
        vertex: Option<Vec<f64>>,
        edge: Vec<f64>,
        kind: ModelKind,
    ) -> Result<Self, InteractionError> {
        let mut raw = Vec::new();
        if let Some(v) = vertex {
            raw.push((vec![parity.identity()], v));
        }
        for [e, s] in parity.canonical_edge_transversal() {
            raw.push((vec![e, s], edge.clone()));
        }
        let mut spec = Self::new(q, parity, raw)?;
        spec.kind = kind;
        Ok(spec)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Accumulated uniform field added through [`InteractionSpec::with_field`].
    pub fn field(&self) -> &[f64] {
        &self.field
    }

    /// Adds a finite uniform self-interaction to the vertex term.
    pub fn with_field(&self, psi: &[f64]) -> Result<Self, InteractionError> {
        if psi.len() != self.alphabet || psi.iter().any(|x| !x.is_finite()) {
            return Err(InteractionError::InvalidParameter(
                "field must be a finite table with one value per spin".into(),
            ));
        }
        let mut out = self.clone();
        match out
            .terms
            .iter_mut()
            .find(|t| t.support.len() == 1 && t.support[0].is_identity())
        {
            Some(t) => t.table.iter_mut().zip(psi).for_each(|(a, b)| *a += b),
            None => out.terms.insert(
                0,
                Term {
                    support: vec![self.parity.identity()],
                    table: psi.to_vec(),
                    stabilizer: vec![vec![0]],
                },
            ),
        }
        out.field.iter_mut().zip(psi).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    /// The vertex/edge view, if every term is `{e}` or `{e, s_i}`.
    pub fn pairwise(&self) -> Option<Pairwise> {
        let q = self.alphabet;
        let mut vertex = vec![0.0; q];
        let mut edges = vec![vec![0.0; q * q]; self.parity.num_generators()];
        for t in &self.terms {
            match t.support.as_slice() {
                [e] if e.is_identity() => {
                    vertex.iter_mut().zip(&t.table).for_each(|(a, b)| *a += b)
                }
                [a, b] => {
                    let (first, second) = (a.letters(), b.letters());
                    let (flip, letter) = match (first, second) {
                        ([], [l]) => (false, *l),
                        ([l], []) => (true, *l),
                        _ => return None,
                    };
                    if letter < 0 {
                        return None;
                    }
                    let tab = &mut edges[letter as usize - 1];
                    for x in 0..q {
                        for y in 0..q {
                            let v = if flip { t.table[y * q + x] } else { t.table[x * q + y] };
                            tab[x * q + y] += v;
                        }
                    }
                }
                _ => return None,
            }
        }
        Some(Pairwise { q, vertex, edges })
    }

    /// Derived Hamiltonian `Σ_v Σ_{F₀} Φ((Π_v σ)_{F₀})`, each distinct translate
    /// counted once.
    pub fn derived_hamiltonian(
        &self,
        graph: &LabeledRegularGraph,
        config: &[Spin],
    ) -> Result<LogWeight, InteractionError> {
        let h = CompiledHamiltonian::new(self, graph)?;
        graph.check_config(config)?;
        if let Some(&spin) = config.iter().find(|&&s| s as usize >= self.alphabet) {
            return Err(InteractionError::AlphabetMismatch {
                spin,
                alphabet: self.alphabet,
            });
        }
        Ok(LogWeight(h.energy(config)))
    }

    /// Backtracking search for a configuration on `ball(L + 1)` where every
    /// translate of every term lying inside the ball is finite.
    fn check_feasible(&self) -> Result<(), InteractionError> {
        let radius = self.range + 1;
        let ball = TreeBall::new(self.parity, radius)?;
        // constraints keyed by the largest site index they touch
        let mut by_last: Vec<Vec<(usize, Vec<usize>)>> = vec![Vec::new(); ball.len()];
        for (ti, t) in self.terms.iter().enumerate() {
            if t.table.iter().all(|x| x.is_finite()) {
                continue;
            }
            for g in ball.elements() {
                let sites: Option<Vec<usize>> = t
                    .support
                    .iter()
                    .map(|h| ball.index_of(&h.multiply(g).ok()?))
                    .collect();
                if let Some(sites) = sites {
                    let last = *sites.iter().max().unwrap();
                    by_last[last].push((ti, sites));
                }
            }
        }
        let q = self.alphabet;
        let mut assign = vec![0usize; ball.len()];
        let mut pos = 0usize;
        let mut next = vec![0usize; ball.len()];
        loop {
            if pos == ball.len() {
                return Ok(());
            }
            if next[pos] == q {
                next[pos] = 0;
                if pos == 0 {
                    return Err(InteractionError::Infeasible(radius));
                }
                pos -= 1;
                continue;
            }
            assign[pos] = next[pos];
            next[pos] += 1;
            let ok = by_last[pos].iter().all(|(ti, sites)| {
                let idx = sites.iter().fold(0, |acc, &s| acc * q + assign[s]);
                self.terms[*ti].table[idx].is_finite()
            });
            if ok {
                pos += 1;
            }
        }
    }
}

/// Position permutations induced by right translations `g` with `F₀·g = F₀`.
/// Since `e ∈ F₀`, any such `g` lies in `F₀`.
fn stabilizer_permutations(support: &[Word]) -> Result<Vec<Vec<usize>>, InteractionError> {
    let mut out = Vec::new();
    for g in support {
        let mut perm = Vec::with_capacity(support.len());
        for h in support {
            let hg = h.multiply(g)?;
            match support.iter().position(|w| *w == hg) {
                Some(p) => perm.push(p),
                None => break,
            }
        }
        if perm.len() == support.len() {
            out.push(perm);
        }
    }
    Ok(out)
}

fn check_invariance(
    q: usize,
    table: &[f64],
    stabilizer: &[Vec<usize>],
) -> Result<(), InteractionError> {
    let len = stabilizer.first().map_or(0, Vec::len);
    let mut digits = vec![0usize; len];
    for (idx, &value) in table.iter().enumerate() {
        let mut rest = idx;
        for d in digits.iter_mut().rev() {
            *d = rest % q;
            rest /= q;
        }
        for perm in stabilizer {
            // translated position `perm[j]` reads the spin at position `j`
            let mut moved = vec![0usize; len];
            for (j, &p) in perm.iter().enumerate() {
                moved[p] = digits[j];
            }
            let other = moved.iter().fold(0, |acc, &d| acc * q + d);
            let same = table[other] == value || (table[other] - value).abs() <= 1e-12;
            if !same {
                return Err(InteractionError::NotTranslationInvariant);
            }
        }
    }
    Ok(())
}

fn parameter(ok: bool, msg: impl Into<String>) -> Result<(), InteractionError> {
    if ok {
        Ok(())
    } else {
        Err(InteractionError::InvalidParameter(msg.into()))
    }
}

/// Ising model on spins `{+1, -1}` (spin index 0 is `+1`): edge weight `β σ_u σ_v`.
pub fn ising(parity: Parity, beta: f64) -> Result<InteractionSpec, InteractionError> {
    parameter(beta.is_finite(), "beta must be finite")?;
    InteractionSpec::from_pairwise(
        parity,
        2,
        None,
        vec![beta, -beta, -beta, beta],
        ModelKind::Ising { beta },
    )
}

/// Potts model: edge weight `β [σ_u = σ_v]`.
pub fn potts(parity: Parity, beta: f64, q: usize) -> Result<InteractionSpec, InteractionError> {
    parameter(q >= 2, "potts needs q >= 2")?;
    parameter(beta.is_finite(), "beta must be finite")?;
    let edge = (0..q * q)
        .map(|i| if i / q == i % q { beta } else { 0.0 })
        .collect();
    InteractionSpec::from_pairwise(parity, q, None, edge, ModelKind::Potts { beta, q })
}

/// Hard-core lattice gas (independent sets) with activity `λ`; spin 1 is occupied.
pub fn hardcore(parity: Parity, lambda: f64) -> Result<InteractionSpec, InteractionError> {
    parameter(lambda > 0.0 && lambda.is_finite(), "lambda must be positive")?;
    InteractionSpec::from_pairwise(
        parity,
        2,
        Some(vec![0.0, lambda.ln()]),
        vec![0.0, 0.0, 0.0, f64::NEG_INFINITY],
        ModelKind::Hardcore { lambda },
    )
}

/// Proper `q`-colourings.
pub fn coloring(parity: Parity, q: usize) -> Result<InteractionSpec, InteractionError> {
    parameter(q >= 2, "coloring needs q >= 2")?;
    let edge = (0..q * q)
        .map(|i| if i / q == i % q { f64::NEG_INFINITY } else { 0.0 })
        .collect();
    InteractionSpec::from_pairwise(parity, q, None, edge, ModelKind::Coloring { q })
}

/// Uniqueness threshold `(d-1)^{d-1} / (d-2)^d` of the hard-core model on `T_d`.
pub fn hardcore_threshold(d: usize) -> Result<f64, InteractionError> {
    if d < 3 {
        return Err(InteractionError::Degree(d));
    }
    let d = d as f64;
    Ok((d - 1.0).powf(d - 1.0) / (d - 2.0).powf(d))
}

/// Root of `c = exp(1/c)` by fixed-point iteration.
pub fn coloring_constant() -> f64 {
    let mut c = 1.75f64;
    for _ in 0..500 {
        let next = (1.0 / c).exp();
        if (next - c).abs() < 1e-16 {
            c = next;
            break;
        }
        c = next;
    }
    c
}

/// Smallest `q = 1 + ⌈c (d-1)⌉` with strong spatial mixing for colourings of `T_d`.
pub fn coloring_threshold(d: usize) -> Result<usize, InteractionError> {
    if d < 2 {
        return Err(InteractionError::Degree(d));
    }
    Ok(1 + (coloring_constant() * (d - 1) as f64).ceil() as usize)
}

#[derive(Debug, Clone, Copy)]
struct Factor {
    start: u32,
    len: u32,
    table: u32,
    weight: f64,
}

/// The derived Hamiltonian laid out as graph factors for fast repeated
/// evaluation and single-site updates.
#[derive(Debug, Clone)]
pub struct CompiledHamiltonian {
    q: usize,
    n: usize,
    sites: Vec<usize>,
    factors: Vec<Factor>,
    tables: Vec<Vec<f64>>,
    by_site: Vec<Vec<u32>>,
}

impl CompiledHamiltonian {
    pub fn new(
        spec: &InteractionSpec,
        graph: &LabeledRegularGraph,
    ) -> Result<Self, InteractionError> {
        if spec.parity != graph.parity() {
            return Err(InteractionError::ParityMismatch {
                spec: spec.parity,
                graph: graph.parity(),
            });
        }
        let n = graph.n();
        let mut out = CompiledHamiltonian {
            q: spec.alphabet,
            n,
            sites: Vec::new(),
            factors: Vec::new(),
            tables: spec.terms.iter().map(|t| t.table.clone()).collect(),
            by_site: vec![Vec::new(); n],
        };
        for (ti, term) in spec.terms.iter().enumerate() {
            let stab_words: Vec<&Word> = term
                .stabilizer
                .iter()
                .map(|perm| &term.support[perm[term.support.iter().position(Word::is_identity).unwrap()]])
                .collect();
            for v in 0..n {
                // translates F₀·g, g ∈ Stab, read the same graph sites; keep one
                // factor per class {γ(g)(v)} weighted by |class| / |Stab|.
                let class: Vec<usize> = stab_words
                    .iter()
                    .map(|g| graph.act_letters(g.letters(), v))
                    .collect();
                if class.iter().any(|&u| u < v) {
                    continue;
                }
                let mut distinct = class.clone();
                distinct.sort_unstable();
                distinct.dedup();
                let weight = distinct.len() as f64 / stab_words.len() as f64;
                let start = out.sites.len() as u32;
                for h in &term.support {
                    out.sites.push(graph.act_letters(h.letters(), v));
                }
                let fi = out.factors.len() as u32;
                out.factors.push(Factor {
                    start,
                    len: term.support.len() as u32,
                    table: ti as u32,
                    weight,
                });
                let mut touched: Vec<usize> = out.sites[start as usize..].to_vec();
                touched.sort_unstable();
                touched.dedup();
                for u in touched {
                    out.by_site[u].push(fi);
                }
            }
        }
        Ok(out)
    }

    pub fn alphabet(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn factor_value(&self, f: &Factor, config: &[Spin]) -> f64 {
        let s = &self.sites[f.start as usize..(f.start + f.len) as usize];
        let idx = s.iter().fold(0usize, |acc, &u| acc * self.q + config[u] as usize);
        let v = self.tables[f.table as usize][idx];
        if f.weight == 1.0 {
            v
        } else {
            f.weight * v
        }
    }

    /// Total energy; `-inf` if any factor is.
    pub fn energy(&self, config: &[Spin]) -> f64 {
        self.factors.iter().map(|f| self.factor_value(f, config)).sum()
    }

    /// Sum of the factors touching `site`.
    pub fn local_energy(&self, site: usize, config: &[Spin]) -> f64 {
        self.by_site[site]
            .iter()
            .map(|&fi| self.factor_value(&self.factors[fi as usize], config))
            .sum()
    }

    /// Unnormalized log-conditional of each spin at `site` given the rest.
    pub fn site_conditional(&self, site: usize, config: &mut [Spin], out: &mut [f64]) {
        let old = config[site];
        for (a, slot) in out.iter_mut().enumerate().take(self.q) {
            config[site] = a as Spin;
            *slot = self.local_energy(site, config);
        }
        config[site] = old;
    }

    /// Splits the local energy at `site` into (finite sum, count of `-inf` factors).
    pub(crate) fn local_split(&self, site: usize, config: &[Spin]) -> (f64, u32) {
        let mut sum = 0.0;
        let mut inf = 0;
        for &fi in &self.by_site[site] {
            let v = self.factor_value(&self.factors[fi as usize], config);
            if v == f64::NEG_INFINITY {
                inf += 1;
            } else {
                sum += v;
            }
        }
        (sum, inf)
    }

    /// Splits the total energy into (finite sum, count of `-inf` factors).
    pub(crate) fn split(&self, config: &[Spin]) -> (f64, u32) {
        let mut sum = 0.0;
        let mut inf = 0;
        for f in &self.factors {
            let v = self.factor_value(f, config);
            if v == f64::NEG_INFINITY {
                inf += 1;
            } else {
                sum += v;
            }
        }
        (sum, inf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const INV3: Parity = Parity::Involutive { d: 3 };
    const CYCLE: Parity = Parity::EvenFree { k: 1 };

    fn k4() -> LabeledRegularGraph {
        LabeledRegularGraph::from_permutations(
            INV3,
            vec![vec![1, 0, 3, 2], vec![2, 3, 0, 1], vec![3, 2, 1, 0]],
        )
        .unwrap()
    }

    fn five_cycle() -> LabeledRegularGraph {
        LabeledRegularGraph::from_permutations(CYCLE, vec![vec![1, 2, 3, 4, 0]]).unwrap()
    }

    /// Independent oracle: explicit edge list plus vertex terms.
    fn naive_energy(spec: &InteractionSpec, g: &LabeledRegularGraph, cfg: &[Spin]) -> f64 {
        let pw = spec.pairwise().unwrap();
        let q = pw.q;
        let mut e: f64 = cfg.iter().map(|&a| pw.vertex[a as usize]).sum();
        for (u, w, c) in g.edges() {
            e += pw.edges[c][cfg[u] as usize * q + cfg[w] as usize];
        }
        e
    }

    #[test]
    fn model_tables() {
        let s = ising(INV3, 0.7).unwrap();
        let pw = s.pairwise().unwrap();
        assert_eq!(pw.edges[0], vec![0.7, -0.7, -0.7, 0.7]);
        assert_eq!(pw.vertex, vec![0.0, 0.0]);
        assert!(ising(INV3, 0.0).unwrap().pairwise().unwrap().edges.iter().flatten().all(|&x| x == 0.0));

        let p = potts(INV3, 1.5, 3).unwrap().pairwise().unwrap();
        assert_eq!(p.edges[1][4], 1.5);
        assert_eq!(p.edges[1][1], 0.0);
        assert!(potts(INV3, 1.0, 1).is_err());

        let h = hardcore(INV3, 2.0).unwrap().pairwise().unwrap();
        assert_eq!(h.edges[0][3], f64::NEG_INFINITY);
        assert_eq!(h.vertex[1], 2.0f64.ln());
        assert!(hardcore(INV3, 0.0).is_err());

        let c = coloring(INV3, 3).unwrap().pairwise().unwrap();
        assert_eq!(c.edges[2][4], f64::NEG_INFINITY);
        assert_eq!(c.edges[2][1], 0.0);
        assert!(coloring(INV3, 1).is_err());
    }

    #[test]
    fn potts_two_states_is_rescaled_ising() {
        // β[σ=σ'] = (β/2)σσ' + β/2 on every edge, so the energies differ by a constant
        let g = LabeledRegularGraph::random(INV3, 8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let p = potts(INV3, 0.8, 2).unwrap();
        let i = ising(INV3, 0.4).unwrap();
        let shift = 0.4 * g.edges().len() as f64;
        for code in 0..256u32 {
            let cfg: Vec<Spin> = (0..8).map(|b| ((code >> b) & 1) as Spin).collect();
            let diff = p.derived_hamiltonian(&g, &cfg).unwrap().value()
                - i.derived_hamiltonian(&g, &cfg).unwrap().value();
            assert!((diff - shift).abs() < 1e-12);
        }
    }

    #[test]
    fn field_composition() {
        let h = hardcore(INV3, 2.0).unwrap();
        assert_eq!(h.with_field(&[0.0, 0.0]).unwrap().pairwise(), h.pairwise());
        let f = h.with_field(&[0.0, 0.5]).unwrap();
        assert!((f.pairwise().unwrap().vertex[1] - (2.0f64.ln() + 0.5)).abs() < 1e-15);
        let twice = h.with_field(&[0.1, 0.2]).unwrap().with_field(&[0.3, 0.4]).unwrap();
        let once = h.with_field(&[0.4, 0.6000000000000001]).unwrap();
        let (a, b) = (twice.pairwise().unwrap(), once.pairwise().unwrap());
        for (x, y) in a.vertex.iter().zip(&b.vertex) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(h.with_field(&[f64::INFINITY, 0.0]).is_err());
        // ising has no vertex term until a field is added
        let i = ising(INV3, 0.1).unwrap().with_field(&[0.3, -0.3]).unwrap();
        assert_eq!(i.pairwise().unwrap().vertex, vec![0.3, -0.3]);
    }

    #[test]
    fn hamiltonian_examples() {
        let c = five_cycle();
        assert_eq!(
            ising(CYCLE, 0.0).unwrap().derived_hamiltonian(&c, &[0, 1, 1, 0, 1]).unwrap(),
            LogWeight::ZERO
        );
        let e = ising(CYCLE, 0.3).unwrap().derived_hamiltonian(&c, &[0; 5]).unwrap();
        assert!((e.value() - 1.5).abs() < 1e-12);
        let k = k4();
        let hc = hardcore(INV3, 1.5).unwrap();
        assert!(!hc.derived_hamiltonian(&k, &[1, 1, 0, 0]).unwrap().is_finite());
        let single = hc.derived_hamiltonian(&k, &[0, 1, 0, 0]).unwrap();
        assert!((single.value() - 1.5f64.ln()).abs() < 1e-12);
        assert_eq!(hc.derived_hamiltonian(&k, &[0; 4]).unwrap().weight(), 1.0);
        // involutive edges counted once
        let e = ising(INV3, 1.0).unwrap().derived_hamiltonian(&k, &[0; 4]).unwrap();
        assert!((e.value() - 6.0).abs() < 1e-12);
        assert!(hc.derived_hamiltonian(&c, &[0; 5]).is_err());
        assert!(hc.derived_hamiltonian(&k, &[0, 2, 0, 0]).is_err());
    }

    #[test]
    fn coloring_two_on_odd_cycle_has_no_finite_configuration() {
        let spec = coloring(CYCLE, 2).unwrap();
        let c = five_cycle();
        for code in 0..32u32 {
            let cfg: Vec<Spin> = (0..5).map(|b| ((code >> b) & 1) as Spin).collect();
            assert!(!spec.derived_hamiltonian(&c, &cfg).unwrap().is_finite());
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(hardcore_threshold(3).unwrap(), 4.0);
        assert_eq!(hardcore_threshold(4).unwrap(), 27.0 / 16.0);
        assert!((hardcore_threshold(5).unwrap() - 256.0 / 243.0).abs() < 1e-15);
        assert!(hardcore_threshold(2).is_err());
        let c = coloring_constant();
        assert!((c - (1.0 / c).exp()).abs() <= 1e-12);
        assert!((c - 1.764).abs() < 5e-3);
        assert_eq!(coloring_threshold(3).unwrap(), 5);
        assert_eq!(coloring_threshold(2).unwrap(), 3);
    }

    #[test]
    fn custom_specs_are_validated() {
        let p = INV3;
        let e = p.identity();
        let s1 = p.generator(1).unwrap();
        // asymmetric table on an involutive edge is not translation invariant
        let bad = InteractionSpec::new(2, p, vec![(vec![e.clone(), s1.clone()], vec![0.0, 1.0, 0.0, 0.0])]);
        assert_eq!(bad.unwrap_err(), InteractionError::NotTranslationInvariant);
        let missing = InteractionSpec::new(2, p, vec![(vec![s1.clone()], vec![0.0, 0.0])]);
        assert_eq!(missing.unwrap_err(), InteractionError::MissingIdentity);
        let plus_inf = InteractionSpec::new(2, p, vec![(vec![e.clone()], vec![0.0, f64::INFINITY])]);
        assert_eq!(plus_inf.unwrap_err(), InteractionError::NonFiniteWeight);
        let all_forbidden = InteractionSpec::new(2, p, vec![(vec![e.clone()], vec![f64::NEG_INFINITY; 2])]);
        assert!(matches!(all_forbidden, Err(InteractionError::Infeasible(_))));
        // directed edges are fine in the free group
        let f = Parity::EvenFree { k: 1 };
        let ok = InteractionSpec::new(2, f, vec![(vec![f.identity(), f.generator(1).unwrap()], vec![0.0, 1.0, 0.0, 0.0])]);
        assert!(ok.is_ok());
        // a range-2 path term {e, s1, s2·s1} is accepted
        let s21 = p.reduce(&[2, 1]).unwrap();
        let path = InteractionSpec::new(2, p, vec![(vec![e, s1, s21], vec![0.1; 8])]).unwrap();
        assert_eq!(path.range(), 2);
        assert!(path.pairwise().is_none());
    }

    #[test]
    fn general_terms_match_explicit_sum() {
        // a three-site path term, summed over all v directly
        let p = INV3;
        let s1 = p.generator(1).unwrap();
        let s21 = p.reduce(&[2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let table: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = InteractionSpec::new(2, p, vec![(vec![p.identity(), s1.clone(), s21.clone()], table.clone())]).unwrap();
        let g = LabeledRegularGraph::random(p, 10, &mut rng).unwrap();
        let cfg: Vec<Spin> = (0..10).map(|_| rng.random_range(0..2)).collect();
        let mut expected = 0.0;
        for v in 0..10 {
            let a = cfg[v] as usize;
            let b = cfg[g.act(&s1, v).unwrap()] as usize;
            let c = cfg[g.act(&s21, v).unwrap()] as usize;
            expected += table[a * 4 + b * 2 + c];
        }
        let got = spec.derived_hamiltonian(&g, &cfg).unwrap().value();
        assert!((got - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn compiled_matches_naive_edge_sum(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for parity in [INV3, Parity::EvenFree { k: 2 }] {
                let kind = rng.random_range(0..4);
                let spec = match kind {
                    0 => ising(parity, rng.random_range(-1.0..1.0)).unwrap(),
                    1 => potts(parity, rng.random_range(-1.0..1.0), 3).unwrap(),
                    2 => hardcore(parity, rng.random_range(0.1..3.0)).unwrap(),
                    _ => coloring(parity, 4).unwrap(),
                };
                let spec = spec.with_field(&(0..spec.alphabet()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
                let g = LabeledRegularGraph::random(parity, 12, &mut rng).unwrap();
                let cfg: Vec<Spin> = (0..12).map(|_| rng.random_range(0..spec.alphabet() as Spin)).collect();
                let got = spec.derived_hamiltonian(&g, &cfg).unwrap().value();
                let want = naive_energy(&spec, &g, &cfg);
                prop_assert!(got == want || (got - want).abs() < 1e-9, "{got} vs {want}");
            }
        }

        #[test]
        fn hamiltonian_invariant_under_relabeling(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = LabeledRegularGraph::random(INV3, 10, &mut rng).unwrap();
            let spec = potts(INV3, rng.random_range(-1.0..1.0), 3).unwrap();
            let cfg: Vec<Spin> = (0..10).map(|_| rng.random_range(0..3)).collect();
            let mut perm: Vec<usize> = (0..10).collect();
            rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
            let h = g.relabel(&perm).unwrap();
            let mut moved = vec![0; 10];
            for v in 0..10 { moved[perm[v]] = cfg[v]; }
            let a = spec.derived_hamiltonian(&g, &cfg).unwrap().value();
            let b = spec.derived_hamiltonian(&h, &moved).unwrap().value();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn symmetry_of_ising_and_coloring(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = LabeledRegularGraph::random(INV3, 10, &mut rng).unwrap();
            let spec = ising(INV3, rng.random_range(-1.0..1.0)).unwrap();
            let cfg: Vec<Spin> = (0..10).map(|_| rng.random_range(0..2)).collect();
            let flipped: Vec<Spin> = cfg.iter().map(|&s| 1 - s).collect();
            prop_assert_eq!(spec.derived_hamiltonian(&g, &cfg).unwrap(), spec.derived_hamiltonian(&g, &flipped).unwrap());

            let col = coloring(INV3, 4).unwrap();
            let cfg: Vec<Spin> = (0..10).map(|_| rng.random_range(0..4)).collect();
            let mut colors: Vec<Spin> = (0..4).collect();
            rand::seq::SliceRandom::shuffle(&mut colors[..], &mut rng);
            let permuted: Vec<Spin> = cfg.iter().map(|&s| colors[s as usize]).collect();
            prop_assert_eq!(col.derived_hamiltonian(&g, &cfg).unwrap(), col.derived_hamiltonian(&g, &permuted).unwrap());
        }
    }
}
