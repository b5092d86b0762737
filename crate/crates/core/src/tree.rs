//! Exact conditional Gibbs measures on tree balls `T_d(r)` for pairwise
//! interactions: root marginals, sub-ball marginals and exact sampling under a
//! boundary condition on the annulus `T_d(r+1) ∖ T_d(r)`, interior clamps and
//! site fields.
//!
//! Messages are kept in the linear domain, each rescaled to unit maximum, so
//! that hard constraints stay exact zeros.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::dist::{Distribution, DistributionError};
use crate::graph::Spin;
use crate::group::{GroupError, Parity, TreeBall};
use crate::interaction::{InteractionSpec, Pairwise, SelfField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("the tree engine needs a vertex + edge interaction")]
    NotPairwise,
    #[error("boundary has {got} annulus spins, expected {expected}")]
    BoundaryLength { got: usize, expected: usize },
    #[error("spin {0} outside the alphabet")]
    BadSpin(Spin),
    #[error("field shape does not match the ball")]
    FieldShape,
    #[error("site {0} is not a non-root interior site")]
    InvalidSite(usize),
    #[error("site {site} already clamped to {existing}, cannot clamp to {requested}")]
    ConflictingClamp {
        site: usize,
        existing: Spin,
        requested: Spin,
    },
    #[error("boundary and clamps admit no finite-energy interior configuration")]
    ZeroMass,
    #[error("sub-ball radius {requested} exceeds model radius {radius}")]
    Radius { requested: usize, radius: usize },
    #[error("joint table needs {needed} entries, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Condition outside the interior ball.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// No terms beyond radius `r`.
    Free,
    /// Spins on the annulus, in the enumeration order of `T_d(r+1)`.
    Clamped(Vec<Spin>),
    /// Every annulus site in state `a`.
    AllState(Spin),
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    pw: Arc<Pairwise>,
    /// Edge weight matrices `exp(Φ)` per letter, oriented (parent, child).
    kernels: Arc<Vec<Vec<f64>>>,
    ball: Arc<TreeBall>,
    radius: usize,
    interior: usize,
    boundary: Boundary,
    clamps: Vec<Option<Spin>>,
    field: SelfField,
}

/// Per-site upward beliefs: `local · child messages · annulus factors`,
/// each row scaled to unit maximum.
#[derive(Debug, Clone)]
struct Upward {
    beliefs: Vec<f64>,
}

fn letter_slot(parity: Parity, letter: i32) -> usize {
    if letter > 0 {
        letter as usize - 1
    } else {
        parity.num_generators() + (-letter) as usize - 1
    }
}

impl TreeModel {
    pub fn new(
        spec: &InteractionSpec,
        radius: usize,
        boundary: Boundary,
    ) -> Result<Self, TreeError> {
        let pw = spec.pairwise().ok_or(TreeError::NotPairwise)?;
        let parity = spec.parity();
        let q = pw.q;
        let ball = TreeBall::new(parity, radius + 1)?;
        // kernels[slot][a_parent * q + a_child]; child = s·parent
        let mut kernels = vec![Vec::new(); 2 * parity.num_generators()];
        for letter in parity.letters() {
            let tab = &pw.edges[letter.unsigned_abs() as usize - 1];
            let mut k = vec![0.0; q * q];
            for a in 0..q {
                for b in 0..q {
                    // edge {p, s p} reads (σ_p, σ_{sp}); for s⁻¹ the child is first
                    let phi = if letter > 0 { tab[a * q + b] } else { tab[b * q + a] };
                    k[a * q + b] = phi.exp();
                }
            }
            kernels[letter_slot(parity, letter)] = k;
        }
        let interior = parity.ball_size(radius) as usize;
        let model = TreeModel {
            kernels: Arc::new(kernels),
            pw: Arc::new(pw),
            ball: Arc::new(ball),
            radius,
            interior,
            boundary: Boundary::Free,
            clamps: vec![None; interior],
            field: SelfField::zero(q),
        };
        model.with_boundary(boundary)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Result<Self, TreeError> {
        let q = self.pw.q;
        match &boundary {
            Boundary::Free => {}
            Boundary::AllState(a) => {
                if *a as usize >= q {
                    return Err(TreeError::BadSpin(*a));
                }
            }
            Boundary::Clamped(eta) => {
                let expected = self.annulus_len();
                if eta.len() != expected {
                    return Err(TreeError::BoundaryLength {
                        got: eta.len(),
                        expected,
                    });
                }
                if let Some(&a) = eta.iter().find(|&&a| a as usize >= q) {
                    return Err(TreeError::BadSpin(a));
                }
            }
        }
        self.boundary = boundary;
        Ok(self)
    }

    pub fn with_field(mut self, field: SelfField) -> Result<Self, TreeError> {
        let ok = field.is_finite()
            && match &field {
                SelfField::Uniform(t) => t.len() == self.pw.q,
                SelfField::PerSite(ts) => {
                    ts.len() == self.interior && ts.iter().all(|t| t.len() == self.pw.q)
                }
            };
        if !ok {
            return Err(TreeError::FieldShape);
        }
        self.field = field;
        Ok(self)
    }

    pub fn alphabet(&self) -> usize {
        self.pw.q
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn parity(&self) -> Parity {
        self.ball.parity()
    }

    /// `T_d(r+1)`; the interior is its first [`TreeModel::interior_len`] elements.
    pub fn ball(&self) -> &TreeBall {
        &self.ball
    }

    pub fn interior_len(&self) -> usize {
        self.interior
    }

    pub fn annulus_len(&self) -> usize {
        self.ball.len() - self.interior
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn clamps(&self) -> &[Option<Spin>] {
        &self.clamps
    }

    /// Merges clamps on non-root interior sites.
    pub fn clamp_sites(&self, sites: &[usize], values: &[Spin]) -> Result<Self, TreeError> {
        let mut out = self.clone();
        for (&s, &a) in sites.iter().zip(values) {
            if s == 0 || s >= self.interior {
                return Err(TreeError::InvalidSite(s));
            }
            if a as usize >= self.pw.q {
                return Err(TreeError::BadSpin(a));
            }
            match out.clamps[s] {
                Some(existing) if existing != a => {
                    return Err(TreeError::ConflictingClamp {
                        site: s,
                        existing,
                        requested: a,
                    })
                }
                _ => out.clamps[s] = Some(a),
            }
        }
        Ok(out)
    }

    fn kernel(&self, child: usize) -> &[f64] {
        let letter = self.ball.edge_letter(child);
        &self.kernels[letter_slot(self.parity(), letter)]
    }

    fn annulus_spin(&self, j: usize) -> Option<Spin> {
        match &self.boundary {
            Boundary::Free => None,
            Boundary::AllState(a) => Some(*a),
            Boundary::Clamped(eta) => Some(eta[j - self.interior]),
        }
    }

    fn local(&self, u: usize, clamps: &[Option<Spin>], out: &mut [f64]) {
        let q = self.pw.q;
        let field = self.field.at(u);
        for a in 0..q {
            out[a] = self.pw.vertex[a] + field[a];
        }
        let shift = out[..q].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for a in 0..q {
            out[a] = match clamps[u] {
                Some(c) if c as usize != a => 0.0,
                _ if shift == f64::NEG_INFINITY => 0.0,
                _ => (out[a] - shift).exp(),
            };
        }
    }

    fn upward(&self, clamps: &[Option<Spin>]) -> Upward {
        let q = self.pw.q;
        let m = self.interior;
        let mut beliefs = vec![0.0; m * q];
        let mut msg = vec![0.0; q];
        for u in (0..m).rev() {
            let (head, tail) = beliefs.split_at_mut(u * q + q);
            let b = &mut head[u * q..];
            self.local(u, clamps, b);
            for &c in self.ball.children(u) {
                if c < m {
                    let bc = &tail[(c - u - 1) * q..(c - u) * q];
                    let k = self.kernel(c);
                    for a in 0..q {
                        msg[a] = (0..q).map(|x| k[a * q + x] * bc[x]).sum();
                    }
                } else if let Some(eta) = self.annulus_spin(c) {
                    let k = self.kernel(c);
                    for a in 0..q {
                        msg[a] = k[a * q + eta as usize];
                    }
                } else {
                    continue;
                }
                for a in 0..q {
                    b[a] *= msg[a];
                }
            }
            let max = b.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                b.iter_mut().for_each(|x| *x /= max);
            }
        }
        Upward { beliefs }
    }

    fn root_from(&self, up: &Upward) -> Result<Distribution, TreeError> {
        let q = self.pw.q;
        let root = up.beliefs[..q].to_vec();
        if root.iter().all(|&x| x == 0.0) {
            return Err(TreeError::ZeroMass);
        }
        Ok(Distribution::from_weights(q, 1, root)?)
    }

    /// Exact law of the root spin.
    pub fn root_marginal(&self) -> Result<Distribution, TreeError> {
        self.root_from(&self.upward(&self.clamps))
    }

    /// Root law with an explicit clamp vector replacing the model's clamps.
    pub(crate) fn root_marginal_with(&self, clamps: &[Option<Spin>]) -> Result<Distribution, TreeError> {
        self.root_from(&self.upward(clamps))
    }

    /// Exact joint law on `T_d(r')`, indexed in ball order with the root most
    /// significant.
    pub fn ball_marginal(&self, sub_radius: usize, budget: u64) -> Result<Distribution, TreeError> {
        if sub_radius > self.radius {
            return Err(TreeError::Radius {
                requested: sub_radius,
                radius: self.radius,
            });
        }
        let q = self.pw.q;
        let m = self.ball.prefix_len(sub_radius);
        let needed = (q as u128).pow(m as u32);
        if needed > budget as u128 {
            return Err(TreeError::BudgetExceeded { needed, budget });
        }
        let up = self.upward(&self.clamps);
        self.root_from(&up)?;
        // inside the sub-ball only the outermost layer keeps its subtree belief
        let mut inner = vec![0.0; m * q];
        for u in 0..m {
            if self.ball.depth(u) == sub_radius {
                inner[u * q..u * q + q].copy_from_slice(&up.beliefs[u * q..u * q + q]);
            } else {
                self.local(u, &self.clamps, &mut inner[u * q..u * q + q]);
            }
        }
        // odometer with the last site fastest; partial[j] is the weight of sites 0..=j
        let total = needed as usize;
        let mut out = vec![0.0; total];
        let mut digits = vec![0usize; m];
        let mut partial = vec![0.0; m];
        let weight_at = |j: usize, digits: &[usize], partial: &[f64]| -> f64 {
            let a = digits[j];
            let w = inner[j * q + a];
            if j == 0 {
                w
            } else {
                let p = self.ball.parent(j);
                partial[j - 1] * w * self.kernel(j)[digits[p] * q + a]
            }
        };
        for j in 0..m {
            partial[j] = weight_at(j, &digits, &partial);
        }
        for slot in out.iter_mut() {
            *slot = partial[m - 1];
            // increment
            let mut j = m;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                digits[j] += 1;
                if digits[j] < q {
                    break;
                }
                digits[j] = 0;
            }
            for k in j..m {
                partial[k] = weight_at(k, &digits, &partial);
            }
        }
        Ok(Distribution::from_weights(q, m, out)?)
    }

    /// Exact sample of the interior configuration (indexed like the ball prefix).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Spin>, TreeError> {
        self.sampler()?.sample(rng)
    }

    /// Precomputes the upward pass for repeated exact sampling.
    pub fn sampler(&self) -> Result<TreeSampler<'_>, TreeError> {
        let up = self.upward(&self.clamps);
        self.root_from(&up)?;
        Ok(TreeSampler { model: self, up })
    }
}

pub struct TreeSampler<'a> {
    model: &'a TreeModel,
    up: Upward,
}

impl TreeSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Spin>, TreeError> {
        let mut out = vec![0; self.model.interior];
        self.sample_into(rng, &mut out);
        Ok(out)
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Spin]) {
        let model = self.model;
        let q = model.pw.q;
        let b = &self.up.beliefs;
        let mut w = vec![0.0; q];
        out[0] = draw(rng, &b[..q]);
        for c in 1..model.interior {
            let p = model.ball.parent(c);
            let k = model.kernel(c);
            let ap = out[p] as usize;
            for x in 0..q {
                w[x] = k[ap * q + x] * b[c * q + x];
            }
            out[c] = draw(rng, &w);
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Spin {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (a, &w) in weights.iter().enumerate() {
        if u < w {
            return a as Spin;
        }
        u -= w;
    }
    // rounding: last state with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) as Spin
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::interaction::{coloring, hardcore, ising, potts};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const INV3: Parity = Parity::Involutive { d: 3 };
    const BUDGET: u64 = 1 << 24;

    /// Independent oracle: enumerate `A^{T_d(r)}` with the explicit energy
    /// (interior edges, boundary edges, vertex terms, fields and clamps).
    pub(crate) fn brute_force(tm: &TreeModel) -> Option<Vec<f64>> {
        let pw = &tm.pw;
        let q = pw.q;
        let ball = tm.ball();
        let m = tm.interior_len();
        let mut weights = vec![0.0; q.pow(m as u32)];
        let edge = |child: usize, a_parent: usize, a_child: usize| {
            let l = ball.edge_letter(child);
            let t = &pw.edges[l.unsigned_abs() as usize - 1];
            if l > 0 { t[a_parent * q + a_child] } else { t[a_child * q + a_parent] }
        };
        let field = |u: usize, a: usize| match &tm.field {
            SelfField::Uniform(t) => t[a],
            SelfField::PerSite(ts) => ts[u][a],
        };
        for (idx, slot) in weights.iter_mut().enumerate() {
            let mut cfg = vec![0usize; m];
            let mut rest = idx;
            for j in (0..m).rev() {
                cfg[j] = rest % q;
                rest /= q;
            }
            if (0..m).any(|u| tm.clamps[u].is_some_and(|c| c as usize != cfg[u])) {
                continue;
            }
            let mut e = 0.0;
            for u in 0..m {
                e += pw.vertex[cfg[u]] + field(u, cfg[u]);
                if u > 0 {
                    e += edge(u, cfg[ball.parent(u)], cfg[u]);
                }
            }
            for j in m..ball.len() {
                let eta = match &tm.boundary {
                    Boundary::Free => continue,
                    Boundary::AllState(a) => *a as usize,
                    Boundary::Clamped(v) => v[j - m] as usize,
                };
                e += edge(j, cfg[ball.parent(j)], eta);
            }
            *slot = e.exp();
        }
        let z: f64 = weights.iter().sum();
        (z > 0.0).then(|| weights.iter().map(|w| w / z).collect())
    }

    fn root_from_joint(joint: &[f64], q: usize) -> Vec<f64> {
        let block = joint.len() / q;
        (0..q).map(|a| joint[a * block..(a + 1) * block].iter().sum()).collect()
    }

    #[test]
    fn free_ising_root_is_uniform() {
        for b in [Boundary::Free, Boundary::AllState(0), Boundary::Clamped(vec![1; 12])] {
            let tm = TreeModel::new(&ising(INV3, 0.0).unwrap(), 2, b).unwrap();
            let r = tm.root_marginal().unwrap();
            assert!((r.probs()[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn three_plus_neighbours() {
        // root alone, three + neighbours on the annulus
        let beta: f64 = 0.2;
        let tm = TreeModel::new(&ising(INV3, beta).unwrap(), 0, Boundary::AllState(0)).unwrap();
        let p = tm.root_marginal().unwrap().probs()[0];
        let want = (3.0 * beta).exp() / ((3.0 * beta).exp() + (-3.0 * beta).exp());
        assert!((p - want).abs() < 1e-15);
        assert!((p - 0.7685).abs() < 1e-4);
    }

    #[test]
    fn hardcore_occupied_boundary() {
        let spec = hardcore(INV3, 2.0).unwrap();
        let tm = TreeModel::new(&spec, 0, Boundary::AllState(1)).unwrap();
        assert_eq!(tm.root_marginal().unwrap().probs()[1], 0.0);
        // one layer further the neighbours are forced empty and the root is free
        let tm = TreeModel::new(&spec, 1, Boundary::AllState(1)).unwrap();
        assert!((tm.root_marginal().unwrap().probs()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_and_conflicts() {
        let spec = hardcore(INV3, 1.0).unwrap();
        let tm = TreeModel::new(&spec, 2, Boundary::Free).unwrap();
        // clamp 1 and its child occupied
        let child = tm.ball().children(1)[0];
        let bad = tm.clamp_sites(&[1, child], &[1, 1]).unwrap();
        assert_eq!(bad.root_marginal().unwrap_err(), TreeError::ZeroMass);
        assert!(matches!(tm.clamp_sites(&[1], &[0]).unwrap().clamp_sites(&[1], &[1]), Err(TreeError::ConflictingClamp { .. })));
        assert_eq!(tm.clamp_sites(&[1], &[0]).unwrap().clamp_sites(&[1], &[0]).unwrap().clamps(), tm.clamp_sites(&[1], &[0]).unwrap().clamps());
        assert_eq!(tm.clamp_sites(&[0], &[0]).unwrap_err(), TreeError::InvalidSite(0));
        assert_eq!(tm.clamp_sites(&[], &[]).unwrap().clamps(), tm.clamps());
        let col = coloring(INV3, 3).unwrap();
        let tm = TreeModel::new(&col, 0, Boundary::Clamped(vec![0, 1, 2])).unwrap();
        assert_eq!(tm.root_marginal().unwrap_err(), TreeError::ZeroMass);
        assert!(matches!(TreeModel::new(&col, 0, Boundary::Clamped(vec![0, 1])), Err(TreeError::BoundaryLength { .. })));
    }

    #[test]
    fn markov_blanket() {
        let spec = potts(INV3, 0.8, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = TreeModel::new(&spec, 2, Boundary::Free).unwrap();
        let clamped = base.clamp_sites(&[1, 2, 3], &[0, 2, 2]).unwrap();
        let want = clamped.root_marginal().unwrap();
        for _ in 0..5 {
            let eta: Vec<Spin> = (0..12).map(|_| rng.random_range(0..3)).collect();
            let other = clamped.clone().with_boundary(Boundary::Clamped(eta)).unwrap();
            assert!(other.root_marginal().unwrap().tv_distance(&want).unwrap() < 1e-14);
        }
    }

    #[test]
    fn oracle_equivalence_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = [
            ising(INV3, 0.3).unwrap(),
            potts(INV3, 0.4, 3).unwrap(),
            hardcore(INV3, 1.0).unwrap(),
            coloring(INV3, 5).unwrap(),
        ];
        for spec in &specs {
            let q = spec.alphabet();
            for _ in 0..3 {
                let eta: Vec<Spin> = (0..6).map(|_| rng.random_range(0..q as Spin)).collect();
                let fields: Vec<Vec<f64>> = (0..4).map(|_| (0..q).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                let tm = TreeModel::new(spec, 1, Boundary::Clamped(eta)).unwrap()
                    .with_field(SelfField::PerSite(fields)).unwrap();
                let Some(joint) = brute_force(&tm) else {
                    assert_eq!(tm.root_marginal().unwrap_err(), TreeError::ZeroMass);
                    continue;
                };
                let bm = tm.ball_marginal(1, BUDGET).unwrap();
                for (a, b) in bm.probs().iter().zip(&joint) {
                    assert!((a - b).abs() < 1e-12);
                }
                let root = tm.root_marginal().unwrap();
                for (a, b) in root.probs().iter().zip(root_from_joint(&joint, q)) {
                    assert!((a - b).abs() < 1e-12);
                }
                assert!(tm.ball_marginal(0, BUDGET).unwrap().tv_distance(&root).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn free_group_orientation_matches_oracle() {
        // asymmetric edge table in the free group exercises both orientations
        let p = Parity::EvenFree { k: 2 };
        let e = p.identity();
        let table = vec![0.3, -0.7, 1.1, 0.2];
        let spec = InteractionSpec::new(2, p, vec![
            (vec![e.clone(), p.generator(1).unwrap()], table.clone()),
            (vec![e, p.generator(2).unwrap()], vec![0.0, 0.5, -0.4, 0.1]),
        ]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let eta: Vec<Spin> = (0..12).map(|_| rng.random_range(0..2)).collect();
        let tm = TreeModel::new(&spec, 1, Boundary::Clamped(eta)).unwrap();
        let joint = brute_force(&tm).unwrap();
        let bm = tm.ball_marginal(1, BUDGET).unwrap();
        for (a, b) in bm.probs().iter().zip(&joint) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_marginal_consistency() {
        let tm = TreeModel::new(&ising(INV3, 0.0).unwrap(), 3, Boundary::Free).unwrap();
        let d = tm.ball_marginal(1, BUDGET).unwrap();
        assert!(d.tv_distance(&Distribution::uniform(2, 4)).unwrap() < 1e-15);
        let tm = TreeModel::new(&potts(INV3, 0.7, 3).unwrap(), 3, Boundary::AllState(1)).unwrap();
        let root = tm.root_marginal().unwrap();
        let d2 = tm.ball_marginal(2, BUDGET).unwrap();
        assert!(d2.site_marginal(0).tv_distance(&root).unwrap() < 1e-12);
        assert!(d2.prefix_marginal(4).tv_distance(&tm.ball_marginal(1, BUDGET).unwrap()).unwrap() < 1e-12);
        assert!(matches!(tm.ball_marginal(4, BUDGET), Err(TreeError::Radius { .. })));
        assert!(matches!(tm.ball_marginal(2, 100), Err(TreeError::BudgetExceeded { .. })));
    }

    #[test]
    fn field_shift_is_harmless() {
        let spec = potts(INV3, 0.5, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fields: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut shifted = fields.clone();
        shifted[4].iter_mut().for_each(|x| *x += 7.5);
        let a = TreeModel::new(&spec, 2, Boundary::AllState(0)).unwrap().with_field(SelfField::PerSite(fields)).unwrap();
        let b = TreeModel::new(&spec, 2, Boundary::AllState(0)).unwrap().with_field(SelfField::PerSite(shifted)).unwrap();
        assert!(a.ball_marginal(1, BUDGET).unwrap().tv_distance(&b.ball_marginal(1, BUDGET).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let free = TreeModel::new(&ising(INV3, 0.0).unwrap(), 2, Boundary::Free).unwrap();
        let s = free.sample(&mut rng).unwrap();
        assert_eq!(s.len(), 10);

        let tm = TreeModel::new(&ising(INV3, 0.4).unwrap(), 3, Boundary::AllState(0))
            .unwrap()
            .clamp_sites(&[5], &[1])
            .unwrap();
        let sampler = tm.sampler().unwrap();
        let p = tm.root_marginal().unwrap().probs()[0];
        let n = 100_000;
        let mut plus = 0;
        let mut site1 = 0;
        for _ in 0..n {
            let s = sampler.sample(&mut rng).unwrap();
            assert_eq!(s[5], 1);
            plus += (s[0] == 0) as usize;
            site1 += (s[1] == 0) as usize;
        }
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((plus as f64 / n as f64 - p).abs() < 4.0 * se);
        let p1 = tm.ball_marginal(1, BUDGET).unwrap().site_marginal(1).probs()[0];
        let se1 = (p1 * (1.0 - p1) / n as f64).sqrt();
        assert!((site1 as f64 / n as f64 - p1).abs() < 4.0 * se1);
    }

    #[test]
    fn sampling_respects_hard_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tm = TreeModel::new(&hardcore(INV3, 3.0).unwrap(), 3, Boundary::Free).unwrap();
        let sampler = tm.sampler().unwrap();
        for _ in 0..1000 {
            let s = sampler.sample(&mut rng).unwrap();
            for c in 1..s.len() {
                assert!(!(s[c] == 1 && s[tm.ball().parent(c)] == 1));
            }
        }
    }

    #[test]
    fn dlr_consistency() {
        // radius-(r+1) model; the annulus of T(r) drawn from it, conditioned
        // radius-r model averaged → radius-(r+1) root marginal
        let spec = potts(INV3, 0.9, 3).unwrap();
        let big = TreeModel::new(&spec, 3, Boundary::AllState(2)).unwrap();
        let small = TreeModel::new(&spec, 2, Boundary::Free).unwrap();
        let (m, annulus) = (small.interior_len(), small.annulus_len());
        let sampler = big.sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20_000;
        let mut acc = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let s = sampler.sample(&mut rng).unwrap();
            let eta = s[m..m + annulus].to_vec();
            let r = small.clone().with_boundary(Boundary::Clamped(eta)).unwrap().root_marginal().unwrap();
            for a in 0..3 {
                acc[a] += r.probs()[a];
                sq[a] += r.probs()[a] * r.probs()[a];
            }
        }
        let want = big.root_marginal().unwrap();
        for a in 0..3 {
            let mean = acc[a] / n as f64;
            let se = ((sq[a] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - want.probs()[a]).abs() < 4.0 * se + 1e-12, "state {a}");
        }
    }
}
