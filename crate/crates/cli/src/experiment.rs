//! Experiment files: a `[model]` block plus optional `[graph]` and `[run]`
//! blocks supplying defaults for command-line flags.

use std::path::{Path, PathBuf};

use tree_entropy::config::{parse_sections, ConfigError, ModelConfig, Section};
use tree_entropy::group::Parity;

use crate::error::CliError;

pub const GRAPH_KEYS: [&str; 6] = ["parity", "d", "sizes", "seed", "graphs", "file"];
pub const RUN_KEYS: [&str; 17] = [
    "radii", "samples", "orderings", "epsilon", "budget", "workers", "output", "csv", "strategy", "r_max",
    "burn_in", "thin", "lw_radius", "inner", "starts", "passes", "units",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphBlock {
    pub parity: Option<String>,
    pub d: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub graphs: Option<usize>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunBlock {
    pub radii: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub orderings: Option<usize>,
    pub epsilon: Option<f64>,
    pub budget: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub strategy: Option<String>,
    pub r_max: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub lw_radius: Option<usize>,
    pub inner: Option<usize>,
    pub starts: Option<usize>,
    pub passes: Option<usize>,
    pub units: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Option<ModelConfig>,
    pub graph: GraphBlock,
    pub run: RunBlock,
}

/// Resolves a path in a config file relative to the file's directory.
fn relative(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig { model: None, graph: GraphBlock::default(), run: RunBlock::default() };
        for sec in parse_sections(text)? {
            match sec.name.as_str() {
                "model" => cfg.model = Some(ModelConfig::from_section(&sec)?),
                "graph" => cfg.graph = graph_block(&sec, base)?,
                "run" => cfg.run = run_block(&sec, base)?,
                other => return Err(ConfigError::UnknownSection(other.into()).into()),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

fn graph_block(sec: &Section, base: &Path) -> Result<GraphBlock, CliError> {
    sec.check_keys(&GRAPH_KEYS)?;
    let b = GraphBlock {
        parity: sec.get("parity").map(str::to_string),
        d: sec.parse("d")?,
        sizes: sec.parse_list("sizes")?,
        seed: sec.parse("seed")?,
        graphs: sec.parse("graphs")?,
        file: sec.get("file").map(|p| relative(base, p)),
    };
    if let Some(sizes) = &b.sizes {
        if sizes.contains(&0) {
            return Err(CliError::usage("graph sizes must be positive"));
        }
        if b.parity.as_deref() == Some("inv") && sizes.iter().any(|n| n % 2 == 1) {
            return Err(CliError::usage("involutive graphs need even sizes"));
        }
    }
    if let Some(f) = &b.file {
        if !f.exists() {
            return Err(CliError::usage(format!("{}: no such file", f.display())));
        }
    }
    Ok(b)
}

fn run_block(sec: &Section, base: &Path) -> Result<RunBlock, CliError> {
    sec.check_keys(&RUN_KEYS)?;
    Ok(RunBlock {
        radii: sec.parse_list("radii")?,
        samples: sec.parse("samples")?,
        orderings: sec.parse("orderings")?,
        epsilon: sec.parse("epsilon")?,
        budget: sec.parse("budget")?,
        workers: sec.parse("workers")?,
        output: sec.get("output").map(|p| relative(base, p)),
        csv: sec.get("csv").map(|p| relative(base, p)),
        strategy: sec.get("strategy").map(str::to_string),
        r_max: sec.parse("r_max")?,
        burn_in: sec.parse("burn_in")?,
        thin: sec.parse("thin")?,
        lw_radius: sec.parse("lw_radius")?,
        inner: sec.parse("inner")?,
        starts: sec.parse("starts")?,
        passes: sec.parse("passes")?,
        units: sec.get("units").map(str::to_string),
    })
}

pub fn parse_parity(name: &str, d: usize) -> Result<Parity, CliError> {
    let even = match name {
        "inv" | "involutive" => false,
        "even" | "free" => true,
        other => return Err(CliError::usage(format!("unknown parity `{other}` (inv or even)"))),
    };
    Parity::from_degree(even, d)
        .ok_or_else(|| CliError::usage(format!("no {name} parity with degree {d}")))
}
