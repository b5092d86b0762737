use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use tree_entropy::config::ModelConfig;
use tree_entropy::estimators::{
    dobrushin_alpha, lw_diagnostic, percolative_entropy, specific_entropy_truncated, ssm_profile, ClampSource,
    Estimate, FieldGrid, LwMode, PSampling, PercolativeOptions, SsmStrategy,
};
use tree_entropy::exact::{entropy_summary, ExactGibbs, DEFAULT_BUDGET, DEFAULT_IDENTITY_MAX_N};
use tree_entropy::interaction::{coloring_constant, coloring_threshold, hardcore_threshold};
use tree_entropy::parallel::rng_stream;
use tree_entropy::tree::Boundary;
use tree_entropy::{InteractionSpec, LabeledRegularGraph, Parity};

use crate::args::{Cli, Command, EntropyMode, GridArg, LwModeArg, ModelArgs, PMode, StrategyArg};
use crate::converge::{self, ConvergeSettings};
use crate::error::CliError;
use crate::experiment::{parse_parity, ExperimentConfig};
use crate::record::{ResultRecord, Units};

pub const DEFAULT_ORDERINGS: usize = 20;
pub const DEFAULT_BURN_IN: usize = 100;
pub const DEFAULT_THIN: usize = 10;
pub const DEFAULT_EXHAUSTIVE_BUDGET: u64 = 1 << 20;

pub enum Output {
    Record(ResultRecord),
    /// Graph text and a tree-likeness report.
    Graph { text: String, report: String },
}

/// Settings shared by every command after merging flags over the config file.
pub struct Ctx {
    pub seed: u64,
    pub units: Units,
    pub cfg: ExperimentConfig,
}

impl Ctx {
    pub fn new(cli: &Cli) -> Result<Self, CliError> {
        let cfg = match &cli.common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig { model: None, graph: Default::default(), run: Default::default() },
        };
        let units = match (cli.common.units, cfg.run.units.as_deref()) {
            (Some(u), _) => u,
            (None, Some("bits")) => Units::Bits,
            (None, Some("nats")) | (None, None) => Units::Nats,
            (None, Some(other)) => return Err(CliError::usage(format!("unknown units `{other}`"))),
        };
        Ok(Ctx { seed: cli.common.seed.or(cfg.graph.seed).unwrap_or(0), units, cfg })
    }

    pub fn workers(&self, cli: &Cli) -> usize {
        cli.common.workers.or(self.cfg.run.workers).unwrap_or(0)
    }

    pub fn out_path(&self, cli: &Cli) -> Option<PathBuf> {
        cli.common.out.clone().or_else(|| self.cfg.run.output.clone())
    }

    pub fn csv_path(&self, cli: &Cli) -> Option<PathBuf> {
        cli.common.csv.clone().or_else(|| self.cfg.run.csv.clone())
    }

    fn parity(&self, parity: &Option<String>, d: Option<usize>) -> Result<Parity, CliError> {
        let name = parity.clone().or_else(|| self.cfg.graph.parity.clone()).unwrap_or_else(|| "inv".into());
        parse_parity(&name, d.or(self.cfg.graph.d).unwrap_or(3))
    }

    fn model_config(&self, path: &Option<PathBuf>) -> Result<ModelConfig, CliError> {
        match path {
            Some(p) => Ok(ModelConfig::parse(&read(p)?)?),
            None => self.cfg.model.clone().ok_or_else(|| CliError::usage("no model: pass --model or --config")),
        }
    }

    fn spec(&self, m: &ModelArgs, rec: &mut ResultRecord) -> Result<InteractionSpec, CliError> {
        let model = self.model_config(&m.model)?;
        let parity = self.parity(&m.parity, m.d)?;
        rec.echo("model", model.to_text().trim_end().replace('\n', "; "));
        rec.echo("parity", parity);
        Ok(model.build(parity)?)
    }

    /// Spec on a graph read from a file; the graph decides the parity.
    fn graph_and_spec(
        &self,
        graph: &Option<PathBuf>,
        m: &ModelArgs,
        rec: &mut ResultRecord,
    ) -> Result<(LabeledRegularGraph, InteractionSpec), CliError> {
        let path = graph
            .clone()
            .or_else(|| self.cfg.graph.file.clone())
            .ok_or_else(|| CliError::usage("no graph: pass --graph or set [graph] file"))?;
        let g = LabeledRegularGraph::from_text(&read(&path)?)?;
        if m.parity.is_some() || m.d.is_some() {
            let p = self.parity(&m.parity, m.d.or(Some(g.degree())))?;
            if p != g.parity() {
                return Err(CliError::usage(format!("graph is {}, flags say {p}", g.parity())));
            }
        }
        let model = self.model_config(&m.model)?;
        rec.echo("model", model.to_text().trim_end().replace('\n', "; "));
        rec.echo("graph", path.display());
        rec.echo("n", g.n());
        rec.echo("parity", g.parity());
        let spec = model.build(g.parity())?;
        Ok((g, spec))
    }
}

fn read(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
}

fn check_positive(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::usage(format!("--{name} must be positive")));
    }
    Ok(v)
}

pub fn execute(cli: &Cli, ctx: &Ctx) -> Result<Output, CliError> {
    let run = &ctx.cfg.run;
    let seed = ctx.seed;
    match &cli.command {
        Command::GenGraph { parity, d, n } => {
            let parity = ctx.parity(parity, *d)?;
            let n = n
                .or_else(|| ctx.cfg.graph.sizes.as_ref().and_then(|s| s.first().copied()))
                .ok_or_else(|| CliError::usage("--n is required"))?;
            let mut rng = rng_stream(seed, 0);
            let g = LabeledRegularGraph::random(parity, n, &mut rng)?;
            let mut report = String::new();
            for t in 1..=4 {
                writeln!(report, "t={t} tree_like_fraction={}", g.tree_like_fraction(t)).expect("string");
            }
            Ok(Output::Graph { text: g.to_text(), report })
        }

        Command::Entropy { graph, model, mode, radii, orderings, budget, burn_in } => {
            let mut rec = ResultRecord::new("entropy", seed, ctx.units);
            let (g, spec) = ctx.graph_and_spec(graph, model, &mut rec)?;
            let budget = budget.or(run.budget).unwrap_or(DEFAULT_BUDGET);
            let fits = (spec.alphabet() as u128).checked_pow(g.n() as u32).is_some_and(|c| c <= budget as u128);
            let (do_exact, do_trunc) = match mode {
                EntropyMode::Auto => (fits, !fits),
                EntropyMode::Exact => (true, false),
                EntropyMode::Truncated => (false, true),
                EntropyMode::Both => (true, true),
            };
            rec.echo("budget", budget);
            let mut details = serde_json::Map::new();
            if do_exact {
                let s = entropy_summary(&g, &spec, budget)?;
                rec.push_entropy("exact", Some(g.n()), None, &Estimate::exact(s.specific_entropy(), "exact"));
                details.insert("log_z".into(), json!(s.log_z));
                details.insert("support_size".into(), json!(s.support_size));
                if g.n() <= DEFAULT_IDENTITY_MAX_N {
                    let gibbs = ExactGibbs::build(&g, &spec, budget)?;
                    let rhs = gibbs.percolation_identity_rhs(DEFAULT_IDENTITY_MAX_N)?;
                    let f = ctx.units.factor();
                    details.insert("identity_rhs".into(), json!(rhs * f));
                    details.insert("identity_residual".into(), json!((rhs - s.specific_entropy()).abs() * f));
                }
            }
            if do_trunc {
                let radii = radii.clone().or_else(|| run.radii.clone()).unwrap_or_else(|| vec![2]);
                let orderings = check_positive("orderings", orderings.or(run.orderings).unwrap_or(DEFAULT_ORDERINGS))?;
                let burn_in = burn_in.or(run.burn_in).unwrap_or(DEFAULT_BURN_IN);
                rec.echo("orderings", orderings);
                rec.echo("burn_in", burn_in);
                rec.echo("radii", format!("{radii:?}"));
                let mut per_r = Vec::new();
                for &r in &radii {
                    let t = specific_entropy_truncated(&g, &spec, r, orderings, seed, &ClampSource::Glauber { burn_in })?;
                    rec.push_entropy("truncated", Some(g.n()), Some(r), &t.estimate);
                    per_r.push(json!({
                        "r": r,
                        "ssm": t.ssm,
                        "bias_bound": t.bias_bound * ctx.units.factor(),
                        "tree_like_fraction": t.tree_like_fraction,
                    }));
                }
                details.insert("truncated".into(), json!(per_r));
            }
            rec.details = serde_json::Value::Object(details);
            Ok(Output::Record(rec))
        }

        Command::Hperc { model, radii, samples, p, inner, model_radius } => {
            let mut rec = ResultRecord::new("hperc", seed, ctx.units);
            let spec = ctx.spec(model, &mut rec)?;
            let radii = radii.clone().or_else(|| run.radii.clone()).unwrap_or_else(|| vec![2, 4, 6]);
            let samples = check_positive("samples", samples.or(run.samples).unwrap_or(10_000))?;
            let opts = PercolativeOptions {
                p: match p {
                    PMode::Uniform => PSampling::Uniform,
                    PMode::Stratified => PSampling::Stratified,
                    PMode::Zero => PSampling::Fixed(0.0),
                },
                n_inner: check_positive("inner", inner.or(run.inner).unwrap_or(1))?,
                generator_radius: None,
                window: None,
            };
            rec.echo("radii", format!("{radii:?}"));
            rec.echo("samples", samples);
            rec.echo("p", format!("{p:?}").to_lowercase());
            rec.echo("inner", opts.n_inner);
            if let Some(big) = model_radius {
                if radii.iter().any(|r| r > big) {
                    return Err(CliError::usage("radii must not exceed --model-radius"));
                }
                rec.echo("model_radius", big);
            }
            let mut boundaries = vec![("free".to_string(), Boundary::Free)];
            for a in 0..spec.alphabet() {
                boundaries.push((format!("all-{a}"), Boundary::AllState(a as u8)));
            }
            for &r in &radii {
                for (name, b) in &boundaries {
                    let e = match model_radius {
                        Some(big) => {
                            let o = PercolativeOptions { window: Some(r), ..opts.clone() };
                            percolative_entropy(&spec, *big, b.clone(), samples, seed, &o)?
                        }
                        None => percolative_entropy(&spec, r, b.clone(), samples, seed, &opts)?,
                    };
                    rec.push_entropy(name, None, Some(r), &e);
                }
            }
            Ok(Output::Record(rec))
        }

        Command::Ssm { model, r_max, strategy, grid, budget, starts, passes } => {
            let mut rec = ResultRecord::new("ssm", seed, ctx.units);
            let spec = ctx.spec(model, &mut rec)?;
            let r_max = r_max.or(run.r_max).unwrap_or(6);
            let strategy = match strategy {
                Some(s) => *s,
                None => match run.strategy.as_deref() {
                    None | Some("extremal") => StrategyArg::Extremal,
                    Some("exhaustive") => StrategyArg::Exhaustive,
                    Some("random") | Some("random-search") => StrategyArg::Random,
                    Some(other) => return Err(CliError::usage(format!("unknown strategy `{other}`"))),
                },
            };
            let strategy = match strategy {
                StrategyArg::Extremal => SsmStrategy::Extremal,
                StrategyArg::Exhaustive => SsmStrategy::Exhaustive {
                    budget: budget.or(run.budget).unwrap_or(DEFAULT_EXHAUSTIVE_BUDGET),
                },
                StrategyArg::Random => SsmStrategy::RandomSearch {
                    starts: starts.or(run.starts).unwrap_or(4),
                    passes: passes.or(run.passes).unwrap_or(2),
                    seed,
                },
            };
            let q = spec.alphabet();
            let grid = match grid {
                GridArg::Standard => FieldGrid::standard(q),
                GridArg::Zero => FieldGrid::zero(q),
            };
            rec.echo("r_max", r_max);
            rec.echo("strategy", format!("{strategy:?}"));
            rec.echo("grid_size", grid.len());
            let profile = ssm_profile(&spec, r_max, &strategy, &grid)?;
            for p in &profile.points {
                let mut e = Estimate::exact(p.sup_difference, p.strategy.clone());
                if let SsmStrategy::RandomSearch { seed, .. } = strategy {
                    e.seed = seed;
                }
                rec.push_plain("ssm", None, Some(p.r), &e);
            }
            rec.details = json!({
                "profile": profile,
                "fitted_rate": profile.fitted_rate(),
                "lower_bound": !matches!(strategy, SsmStrategy::Exhaustive { .. }),
            });
            Ok(Output::Record(rec))
        }

        Command::Converge { model, sizes, graphs, radius, samples, budget, orderings, burn_in, lw_radius, epsilon } => {
            let mut rec = ResultRecord::new("converge", seed, ctx.units);
            let spec = ctx.spec(model, &mut rec)?;
            let sizes = sizes.clone().or_else(|| ctx.cfg.graph.sizes.clone()).unwrap_or_else(|| vec![8, 12, 16]);
            if sizes.contains(&0) {
                return Err(CliError::usage("sizes must be positive"));
            }
            let settings = ConvergeSettings {
                sizes,
                graphs: check_positive("graphs", graphs.or(ctx.cfg.graph.graphs).unwrap_or(4))?,
                radius: radius.or_else(|| run.radii.as_ref().and_then(|r| r.last().copied())).unwrap_or(6),
                samples: check_positive("samples", samples.or(run.samples).unwrap_or(100_000))?,
                seed,
                budget: budget.or(run.budget).unwrap_or(DEFAULT_BUDGET),
                orderings: check_positive("orderings", orderings.or(run.orderings).unwrap_or(DEFAULT_ORDERINGS))?,
                burn_in: burn_in.or(run.burn_in).unwrap_or(DEFAULT_BURN_IN),
                lw_radius: lw_radius.or(run.lw_radius).unwrap_or(1),
                epsilon: epsilon.or(run.epsilon).unwrap_or(0.05),
                lw_samples: 2000,
            };
            rec.echo("sizes", format!("{:?}", settings.sizes));
            rec.echo("graphs", settings.graphs);
            rec.echo("radius", settings.radius);
            rec.echo("samples", settings.samples);
            rec.echo("budget", settings.budget);
            rec.echo("lw_radius", settings.lw_radius);
            rec.echo("epsilon", settings.epsilon);
            let report = converge::run(&spec, &settings)?;
            let f = ctx.units.factor();
            rec.push_entropy("hperc", None, Some(settings.radius), &report.hperc);
            for row in &report.rows {
                rec.push_entropy("specific-entropy", Some(row.n), None, &row.specific_entropy);
                let mut gap = Estimate::exact(row.gap, "gap");
                gap.stderr = row.gap_stderr;
                gap.seed = seed;
                rec.push_entropy("gap", Some(row.n), Some(settings.radius), &gap);
                rec.push_plain("lw-fraction", Some(row.n), Some(settings.lw_radius), &Estimate::exact(row.lw_fraction, "lw"));
            }
            let rows: Vec<_> = report
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "n": r.n,
                        "exact": r.exact,
                        "excess": r.excess * f,
                        "limsup_margin": (r.excess - 3.0 * r.gap_stderr) * f,
                        "tree_like_fraction": r.tree_like_fraction,
                    })
                })
                .collect();
            rec.details = json!({
                "rows": rows,
                "gap_nonincreasing_3se": report.gap_nonincreasing(3.0),
            });
            Ok(Output::Record(rec))
        }

        Command::LwDiag { graph, model, radius, epsilon, mode, samples, burn_in, thin, budget } => {
            let mut rec = ResultRecord::new("lw-diag", seed, ctx.units);
            let (g, spec) = ctx.graph_and_spec(graph, model, &mut rec)?;
            let r = radius.or(run.lw_radius).unwrap_or(1);
            let eps = epsilon.or(run.epsilon).unwrap_or(0.05);
            let mode = match mode {
                LwModeArg::Exact => LwMode::Exact { budget: budget.or(run.budget).unwrap_or(DEFAULT_BUDGET) },
                LwModeArg::Mc => LwMode::MonteCarlo {
                    samples: check_positive("samples", samples.or(run.samples).unwrap_or(2000))?,
                    burn_in: burn_in.or(run.burn_in).unwrap_or(DEFAULT_BURN_IN),
                    thin: thin.or(run.thin).unwrap_or(DEFAULT_THIN),
                },
            };
            rec.echo("radius", r);
            rec.echo("epsilon", eps);
            rec.echo("mode", format!("{mode:?}"));
            let d = lw_diagnostic(&g, &spec, r, eps, &mode, seed)?;
            let mut e = Estimate::exact(d.fraction, "lw-fraction");
            e.seed = seed;
            rec.push_plain("lw-fraction", Some(g.n()), Some(r), &e);
            rec.details = json!(d);
            Ok(Output::Record(rec))
        }

        Command::Thresholds { d, model, parity } => {
            let mut rec = ResultRecord::new("thresholds", seed, ctx.units);
            let d = d.or(ctx.cfg.graph.d).ok_or_else(|| CliError::usage("--d is required"))?;
            rec.echo("d", d);
            let mut details = serde_json::Map::new();
            details.insert("hardcore_threshold".into(), json!(hardcore_threshold(d).ok()));
            details.insert("coloring_constant".into(), json!(coloring_constant()));
            details.insert("coloring_threshold".into(), json!(coloring_threshold(d).ok()));
            let model = match model {
                Some(p) => Some(ModelConfig::parse(&read(p)?)?),
                None => ctx.cfg.model.clone(),
            };
            if let Some(m) = model {
                let p = ctx.parity(parity, Some(d))?;
                let spec = m.build(p)?;
                rec.echo("model", m.to_text().trim_end().replace('\n', "; "));
                rec.echo("parity", p);
                let alpha = dobrushin_alpha(&spec, &FieldGrid::standard(spec.alphabet()))?;
                details.insert("dobrushin_alpha".into(), json!(alpha));
                rec.push_plain("dobrushin-alpha", None, None, &Estimate::exact(alpha, "grid-max"));
            }
            rec.details = serde_json::Value::Object(details);
            Ok(Output::Record(rec))
        }
    }
}

/// Runs a parsed command line, writes its outputs and returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn run_inner(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx::new(cli)?;
    let out = ctx.out_path(cli);
    let output = tree_entropy::parallel::with_workers(ctx.workers(cli), || execute(cli, &ctx))?;
    match output {
        Output::Graph { text, report } => match &out {
            Some(p) => {
                write_file(p, &text)?;
                print!("{report}");
            }
            None => {
                print!("{text}");
                eprint!("{report}");
            }
        },
        Output::Record(mut rec) => {
            rec.finish();
            if let Some(p) = ctx.csv_path(cli) {
                write_file(&p, &rec.to_csv()?)?;
            }
            match &out {
                Some(p) => write_file(p, &rec.to_json())?,
                None => print!("{}", rec.to_json()),
            }
        }
    }
    Ok(())
}
