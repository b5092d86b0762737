use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::record::Units;

#[derive(Debug, Parser)]
#[command(name = "tree-entropy", version, about = "Entropy of Gibbs measures on random regular graphs and regular trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master seed for graph generation and Monte Carlo streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Thread cap (0 uses every core); results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,
    /// Experiment file with [model], [graph] and [run] blocks.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (result record or graph); stdout if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write the flat series as CSV.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model file (`model = ...` lines, or an experiment file with [model]).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `inv` (d involutions) or `even` (d/2 permutations).
    #[arg(long)]
    pub parity: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntropyMode {
    /// Exact if the enumeration fits the budget, truncated otherwise.
    Auto,
    Exact,
    Truncated,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PMode {
    Uniform,
    Stratified,
    /// `p = 0`: unconditioned root entropy.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Extremal,
    Exhaustive,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    /// 21 points on [-3, 3] per state plus ±30.
    Standard,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LwModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a random labeled regular graph.
    GenGraph {
        #[arg(long)]
        parity: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Specific entropy of a graph measure.
    Entropy {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = EntropyMode::Auto)]
        mode: EntropyMode,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<usize>>,
        #[arg(long)]
        orderings: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Percolative entropy of the tree measure over a radius sweep.
    Hperc {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum, default_value_t = PMode::Uniform)]
        p: PMode,
        #[arg(long)]
        inner: Option<usize>,
        /// Evaluate every radius as a window inside one model of this radius.
        #[arg(long)]
        model_radius: Option<usize>,
    },
    /// Strong spatial mixing profile of the tree measure.
    Ssm {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        r_max: Option<usize>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long, value_enum, default_value_t = GridArg::Standard)]
        grid: GridArg,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        passes: Option<usize>,
    },
    /// Graph specific entropy against the tree's percolative entropy.
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Random graphs per size.
        #[arg(long)]
        graphs: Option<usize>,
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        orderings: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        lw_radius: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Fraction of vertices whose pull-back marginal is far from the tree's.
    LwDiag {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value_t = LwModeArg::Exact)]
        mode: LwModeArg,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Hard-core and colouring thresholds, and Dobrushin's α for a model.
    Thresholds {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        parity: Option<String>,
    },
}
