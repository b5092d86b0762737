//! Specific entropy of random graphs against the percolative entropy of the
//! tree, over a series of sizes.

use serde::{Deserialize, Serialize};
use tree_entropy::estimators::{
    lw_diagnostic, percolative_entropy, specific_entropy_truncated, ClampSource, Estimate, LwMode,
    PercolativeOptions,
};
use tree_entropy::exact::entropy_summary;
use tree_entropy::parallel::rng_stream;
use tree_entropy::tree::Boundary;
use tree_entropy::{InteractionSpec, LabeledRegularGraph};

use crate::error::CliError;

/// Largest table built exactly for the local weak* diagnostic.
pub const LW_EXACT_BUDGET: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSettings {
    pub sizes: Vec<usize>,
    /// Independent random graphs per size.
    pub graphs: usize,
    pub radius: usize,
    pub samples: usize,
    pub seed: u64,
    /// Largest `|A|^n` enumerated exactly; larger sizes use the truncated
    /// estimator.
    pub budget: u64,
    pub orderings: usize,
    pub burn_in: usize,
    pub lw_radius: usize,
    pub epsilon: f64,
    /// Glauber samples for the diagnostic when exact enumeration is too big.
    pub lw_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub n: usize,
    /// Mean of `H(μ_n)/n` over the graphs of this size.
    pub specific_entropy: Estimate,
    pub exact: bool,
    pub gap: f64,
    /// Standard error of the gap (both estimates combined).
    pub gap_stderr: f64,
    /// `H(μ_n)/n − Ĥ_perc`.
    pub excess: f64,
    /// Local weak* diagnostic on the first graph of this size.
    pub lw_fraction: f64,
    pub tree_like_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub hperc: Estimate,
    pub rows: Vec<SizeRow>,
}

impl ConvergeReport {
    /// Whether the gap never increases by more than `slack · stderr` from one
    /// size to the next.
    pub fn gap_nonincreasing(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let se = (w[0].gap_stderr.powi(2) + w[1].gap_stderr.powi(2)).sqrt();
            w[1].gap <= w[0].gap + slack * se
        })
    }
}

/// Graph `i` of size `n` draws from stream `(n << 32) | i` of the seed.
pub fn random_graph(
    spec: &InteractionSpec,
    n: usize,
    i: usize,
    seed: u64,
) -> Result<LabeledRegularGraph, CliError> {
    let mut rng = rng_stream(seed, ((n as u64) << 32) | i as u64);
    Ok(LabeledRegularGraph::random(spec.parity(), n, &mut rng)?)
}

pub fn run(spec: &InteractionSpec, s: &ConvergeSettings) -> Result<ConvergeReport, CliError> {
    if s.graphs == 0 || s.sizes.is_empty() {
        return Err(CliError::usage("need at least one size and one graph per size"));
    }
    let hperc = percolative_entropy(spec, s.radius, Boundary::Free, s.samples, s.seed, &PercolativeOptions::default())?;
    let q = spec.alphabet() as u128;
    let mut rows = Vec::with_capacity(s.sizes.len());
    for &n in &s.sizes {
        let exact = q.checked_pow(n as u32).is_some_and(|c| c <= s.budget as u128);
        let mut values = Vec::with_capacity(s.graphs);
        let mut first = None;
        for i in 0..s.graphs {
            let g = random_graph(spec, n, i, s.seed)?;
            let v = if exact {
                entropy_summary(&g, spec, s.budget)?.specific_entropy()
            } else {
                let source = ClampSource::Glauber { burn_in: s.burn_in };
                specific_entropy_truncated(&g, spec, s.radius, s.orderings, s.seed, &source)?.estimate.value
            };
            values.push(v);
            first.get_or_insert(g);
        }
        let g = first.expect("at least one graph");
        let mode = if q.checked_pow(n as u32).is_some_and(|c| c <= LW_EXACT_BUDGET as u128) {
            LwMode::Exact { budget: LW_EXACT_BUDGET }
        } else {
            LwMode::MonteCarlo { samples: s.lw_samples, burn_in: s.burn_in, thin: 10 }
        };
        let lw = lw_diagnostic(&g, spec, s.lw_radius, s.epsilon, &mode, s.seed)?;
        let method = if exact { "exact-mean" } else { "truncated-mean" };
        let est = Estimate::from_samples(&values, s.seed, method);
        let excess = est.value - hperc.value;
        rows.push(SizeRow {
            n,
            gap: excess.abs(),
            gap_stderr: (est.stderr.powi(2) + hperc.stderr.powi(2)).sqrt(),
            excess,
            specific_entropy: est,
            exact,
            lw_fraction: lw.fraction,
            tree_like_fraction: lw.tree_like_fraction,
        });
    }
    Ok(ConvergeReport { hperc, rows })
}
