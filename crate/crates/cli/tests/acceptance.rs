//! End-to-end acceptance checks. Prints one `[PASS]` or `[FAIL]` line per
//! criterion and exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use tree_entropy::estimators::{
    dobrushin_alpha, percolative_entropy, ssm_profile, FieldGrid, PercolativeOptions, SsmStrategy,
};
use tree_entropy::exact::{entropy_summary, ExactError, DEFAULT_BUDGET};
use tree_entropy::interaction::{
    coloring, coloring_constant, coloring_threshold, hardcore, hardcore_threshold, ising, potts,
};
use tree_entropy::parallel::rng_stream;
use tree_entropy::tree::TreeError;
use tree_entropy::{
    Boundary, ExactGibbs, InteractionSpec, LabeledRegularGraph, Parity, SelfField, Spin, TreeBall, TreeModel,
};
use tree_entropy_cli::converge::{self, ConvergeSettings};
use tree_entropy_cli::record::strip_timestamps;

const INV3: Parity = Parity::Involutive { d: 3 };
const MINUTE: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_minute(start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < MINUTE, || format!("took {t:.1?}"))
}

fn random_spec(kind: usize, parity: Parity, rng: &mut impl Rng) -> InteractionSpec {
    match kind {
        0 => ising(parity, rng.random_range(-1.0..1.0)).unwrap(),
        1 => potts(parity, rng.random_range(-1.0..1.0), rng.random_range(2..=3)).unwrap(),
        2 => hardcore(parity, rng.random_range(0.2..5.0)).unwrap(),
        // q ≥ d + 1 keeps every simple graph colourable
        _ => coloring(parity, rng.random_range(parity.degree() + 1..=5)).unwrap(),
    }
}

fn identity_check() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_stream(101, 0);
    let mut worst = 0.0f64;
    for m in 0..20 {
        let (parity, sizes): (Parity, &[usize]) =
            if m % 2 == 0 { (INV3, &[4, 6, 8]) } else { (Parity::EvenFree { k: 2 }, &[5, 6, 7, 8]) };
        let spec = random_spec(m % 4, parity, &mut rng);
        let n = sizes[rng.random_range(0..sizes.len())];
        let mut gibbs = None;
        for _ in 0..1000 {
            let g = LabeledRegularGraph::random(parity, n, &mut rng).map_err(|e| e.to_string())?;
            if g.has_multi_edges() {
                continue;
            }
            match ExactGibbs::build(&g, &spec, DEFAULT_BUDGET) {
                Ok(x) => {
                    gibbs = Some(x);
                    break;
                }
                Err(ExactError::ZeroPartition) => continue,
                Err(e) => return Err(e.to_string()),
            }
        }
        let gibbs = gibbs.ok_or_else(|| format!("model {m}: no usable graph with n={n}"))?;
        let rhs = gibbs.percolation_identity_rhs(n).map_err(|e| e.to_string())?;
        worst = worst.max((rhs - gibbs.entropy() / n as f64).abs());
    }
    ensure(worst <= 1e-9, || format!("max residual {worst:e}"))?;
    within_minute(start)?;
    Ok(format!("max residual {worst:.1e} over 20 models in {:.1?}", start.elapsed()))
}

/// Direct enumeration of the interior of `T_3(2)` with the annulus fixed,
/// built from the spec's terms and the ball's words.
fn enumerate_ball(spec: &InteractionSpec, eta: &[Spin], fields: &[Vec<f64>]) -> Option<Vec<f64>> {
    let q = spec.alphabet();
    let ball = TreeBall::new(INV3, 3).unwrap();
    let m = INV3.ball_size(2) as usize;
    let mut vertex = vec![0.0; q];
    let mut edge: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for t in spec.terms() {
        match t.support() {
            [_] => (0..q).for_each(|a| vertex[a] += t.table()[a]),
            [w0, w1] => {
                let (s, id_first) = if w0.is_identity() { (w1, true) } else { (w0, false) };
                let l = s.letters()[0] as usize;
                edge[l] = (0..q * q)
                    .map(|i| if id_first { t.table()[i] } else { t.table()[(i % q) * q + i / q] })
                    .collect();
            }
            _ => unreachable!(),
        }
    }
    let spin = |cfg: &[usize], j: usize| if j < m { cfg[j] } else { eta[j - m] as usize };
    let mut weights = vec![0.0; q.pow(m as u32)];
    let mut cfg = vec![0usize; m];
    for (idx, w) in weights.iter_mut().enumerate() {
        let mut rest = idx;
        for j in (0..m).rev() {
            cfg[j] = rest % q;
            rest /= q;
        }
        let mut e: f64 = (0..m).map(|u| vertex[cfg[u]] + fields[u][cfg[u]]).sum();
        for j in 1..ball.len() {
            let l = ball.element(j).letters()[0] as usize;
            e += edge[l][spin(&cfg, ball.parent(j)) * q + spin(&cfg, j)];
        }
        *w = e.exp();
    }
    let z: f64 = weights.iter().sum();
    (z > 0.0).then(|| weights.iter().map(|w| w / z).collect())
}

fn oracle_check() -> Outcome {
    let start = Instant::now();
    let specs = [ising(INV3, 0.3), potts(INV3, 0.4, 3), hardcore(INV3, 1.0), coloring(INV3, 5)];
    let mut rng = rng_stream(202, 0);
    let (mut worst, mut cases, mut empty) = (0.0f64, 0, 0);
    for spec in specs {
        let spec = spec.unwrap();
        let q = spec.alphabet();
        for _ in 0..10 {
            let eta: Vec<Spin> = (0..12).map(|_| rng.random_range(0..q as Spin)).collect();
            let fields: Vec<Vec<f64>> =
                (0..10).map(|_| (0..q).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
            let tm = TreeModel::new(&spec, 2, Boundary::Clamped(eta.clone()))
                .and_then(|t| t.with_field(SelfField::PerSite(fields.clone())))
                .map_err(|e| e.to_string())?;
            let Some(joint) = enumerate_ball(&spec, &eta, &fields) else {
                ensure(tm.root_marginal() == Err(TreeError::ZeroMass), || "mass mismatch".into())?;
                empty += 1;
                continue;
            };
            let bm = tm.ball_marginal(2, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
            for (a, b) in bm.probs().iter().zip(&joint) {
                worst = worst.max((a - b).abs());
            }
            let root = tm.root_marginal().map_err(|e| e.to_string())?;
            let block = joint.len() / q;
            for a in 0..q {
                let p: f64 = joint[a * block..(a + 1) * block].iter().sum();
                worst = worst.max((root.probs()[a] - p).abs());
            }
            cases += 1;
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    within_minute(start)?;
    Ok(format!("max deviation {worst:.1e} over {cases} cases ({empty} zero-mass agreed) in {:.1?}", start.elapsed()))
}

fn threshold_check() -> Outcome {
    let lc = hardcore_threshold(3).map_err(|e| e.to_string())?;
    let c = coloring_constant();
    let qc = coloring_threshold(3).map_err(|e| e.to_string())?;
    ensure(lc == 4.0, || format!("hardcore threshold {lc}"))?;
    ensure((c - (1.0 / c).exp()).abs() <= 1e-12, || format!("c = {c}"))?;
    ensure(qc == 5, || format!("colouring threshold {qc}"))?;
    Ok(format!("lambda_c(3) = {lc}, c = {c:.12}, q_c(3) = {qc}"))
}

/// Per-neighbour influence maximized by brute force over the other neighbours
/// and the grid, with `±1` spins.
fn ising_alpha_oracle(beta: f64, grid: &FieldGrid) -> f64 {
    let sign = |a: usize| if a == 0 { 1.0 } else { -1.0 };
    let mut rho = 0.0f64;
    for f in &grid.fields {
        for others in 0..4usize {
            let fixed: f64 = (0..2).map(|j| sign((others >> j) & 1)).sum();
            let cond = |b: usize| {
                let w: Vec<f64> =
                    (0..2).map(|a| (f[a] + beta * sign(a) * (fixed + sign(b))).exp()).collect();
                w[0] / (w[0] + w[1])
            };
            rho = rho.max((cond(0) - cond(1)).abs());
        }
    }
    3.0 * rho
}

fn dobrushin_check() -> Outcome {
    let mut parts = Vec::new();
    for beta in [0.05, 0.1, 0.2] {
        let spec = ising(INV3, beta).unwrap();
        let grid = FieldGrid::standard(2);
        let alpha = dobrushin_alpha(&spec, &grid).map_err(|e| e.to_string())?;
        let oracle = ising_alpha_oracle(beta, &grid);
        let target = 3.0 * beta.tanh();
        ensure((alpha - target).abs() <= 1e-6, || format!("beta {beta}: alpha {alpha} vs {target}"))?;
        ensure((alpha - oracle).abs() <= 1e-12, || format!("beta {beta}: alpha {alpha} vs oracle {oracle}"))?;
        ensure(alpha < 1.0, || format!("beta {beta}: alpha {alpha}"))?;
        parts.push(format!("{beta}: {alpha:.6}"));
    }
    Ok(format!("alpha {}", parts.join(", ")))
}

fn ssm_check() -> Outcome {
    let start = Instant::now();
    let spec = ising(INV3, 0.2).unwrap();
    let grid = FieldGrid::standard(2);
    let ext = ssm_profile(&spec, 8, &SsmStrategy::Extremal, &grid).map_err(|e| e.to_string())?.values();
    for r in 2..=8 {
        ensure(ext[r] < ext[r - 1], || format!("not decreasing at r={r}: {ext:?}"))?;
        if r >= 3 {
            ensure(ext[r] / ext[r - 1] <= 0.8, || format!("ratio {} at r={r}", ext[r] / ext[r - 1]))?;
        }
    }
    let exh = ssm_profile(&spec, 2, &SsmStrategy::Exhaustive { budget: 1 << 20 }, &grid)
        .map_err(|e| e.to_string())?
        .values();
    for r in 1..=2 {
        ensure((exh[r] - ext[r]).abs() <= 1e-10, || format!("r={r}: exhaustive {} vs extremal {}", exh[r], ext[r]))?;
    }
    within_minute(start)?;
    let ratio = ext[8] / ext[7];
    Ok(format!("profile r=1..8 from {:.4} to {:.2e}, last ratio {ratio:.3} in {:.1?}", ext[1], ext[8], start.elapsed()))
}

fn convergence_check(spec: &InteractionSpec) -> Outcome {
    let start = Instant::now();
    let settings = ConvergeSettings {
        sizes: vec![8, 12, 16, 20, 24],
        graphs: 16,
        radius: 6,
        samples: 100_000,
        seed: 2024,
        budget: 1 << 24,
        orderings: 20,
        burn_in: 100,
        lw_radius: 1,
        epsilon: 0.05,
        lw_samples: 2000,
    };
    let report = converge::run(spec, &settings).map_err(|e| e.to_string())?;
    let gaps: Vec<String> = report.rows.iter().map(|r| format!("{:.4}", r.gap)).collect();
    ensure(report.rows.iter().all(|r| r.exact), || "not every size was exact".into())?;
    ensure(report.gap_nonincreasing(3.0), || format!("gaps {gaps:?}"))?;
    let last = report.rows.last().unwrap();
    ensure(last.gap <= 0.05, || format!("final gap {}", last.gap))?;
    for r in &report.rows {
        let bound = report.hperc.value + 0.02 + 3.0 * r.gap_stderr;
        ensure(r.specific_entropy.value <= bound, || format!("n={}: {} > {bound}", r.n, r.specific_entropy.value))?;
    }
    Ok(format!(
        "hperc {:.5} ± {:.5}, gaps {} in {:.0?}",
        report.hperc.value,
        report.hperc.stderr,
        gaps.join(" "),
        start.elapsed()
    ))
}

fn degenerate_check() -> Outcome {
    let grid = FieldGrid::standard(2);
    let free_vertex = InteractionSpec::new(2, INV3, vec![(vec![INV3.identity()], vec![0.0, 0.0])])
        .map_err(|e| e.to_string())?;
    let mut g = LabeledRegularGraph::random(INV3, 12, &mut rng_stream(808, 0)).map_err(|e| e.to_string())?;
    while g.has_multi_edges() {
        g = LabeledRegularGraph::random(INV3, 12, &mut rng_stream(808, 1)).map_err(|e| e.to_string())?;
    }
    let ln2 = 2f64.ln();
    for (name, spec) in [("beta=0", ising(INV3, 0.0).unwrap()), ("no edges", free_vertex)] {
        let h = entropy_summary(&g, &spec, DEFAULT_BUDGET).map_err(|e| e.to_string())?.specific_entropy();
        let hp = percolative_entropy(&spec, 3, Boundary::Free, 200, 1, &PercolativeOptions::default())
            .map_err(|e| e.to_string())?;
        let ssm = ssm_profile(&spec, 4, &SsmStrategy::Extremal, &grid).map_err(|e| e.to_string())?.values();
        let alpha = dobrushin_alpha(&spec, &grid).map_err(|e| e.to_string())?;
        ensure(h == ln2, || format!("{name}: specific entropy {h:e} differs from ln 2 by {:e}", h - ln2))?;
        ensure(hp.value == ln2 && hp.stderr == 0.0, || format!("{name}: hperc {}", hp.value))?;
        ensure(ssm.iter().all(|&v| v == 0.0), || format!("{name}: ssm {ssm:?}"))?;
        ensure(alpha == 0.0, || format!("{name}: alpha {alpha}"))?;
    }
    Ok("ln 2, ln 2, 0, 0 for beta=0 and an edge-free spec".into())
}

fn monotonicity_check() -> Outcome {
    let mut rng = rng_stream(909, 0);
    let specs = [ising(INV3, 0.7).unwrap(), hardcore(INV3, 2.0).unwrap(), potts(INV3, -0.5, 3).unwrap()];
    let mut pairs = 0usize;
    for (i, spec) in specs.iter().enumerate() {
        let n = [4, 6, 6][i];
        let gibbs = loop {
            let g = LabeledRegularGraph::random(INV3, n, &mut rng).map_err(|e| e.to_string())?;
            if let Ok(x) = ExactGibbs::build(&g, spec, DEFAULT_BUDGET) {
                break x;
            }
        };
        let h = gibbs.subset_entropies().map_err(|e| e.to_string())?;
        for v in 0..n {
            let others = ((1usize << n) - 1) & !(1 << v);
            // every pair A ⊆ B of subsets of the other sites
            let mut b = others;
            loop {
                let hb = h[b | 1 << v] - h[b];
                let mut a = b;
                loop {
                    let ha = h[a | 1 << v] - h[a];
                    ensure(hb <= ha + 1e-12, || format!("H(v|B) {hb} > H(v|A) {ha}"))?;
                    pairs += 1;
                    if a == 0 {
                        break;
                    }
                    a = (a - 1) & b;
                }
                if b == 0 {
                    break;
                }
                b = (b - 1) & others;
            }
        }
    }

    let spec = hardcore(INV3, 1.0).unwrap();
    let mut sweep = Vec::new();
    for w in 1..=6 {
        let opts = PercolativeOptions { window: Some(w), ..Default::default() };
        sweep.push(percolative_entropy(&spec, 7, Boundary::Free, 20_000, 5, &opts).map_err(|e| e.to_string())?);
    }
    for s in sweep.windows(2) {
        let se = (s[0].stderr.powi(2) + s[1].stderr.powi(2)).sqrt();
        ensure(s[1].value <= s[0].value + 3.0 * se, || format!("window sweep {} then {}", s[0].value, s[1].value))?;
    }

    let g = LabeledRegularGraph::random(INV3, 2000, &mut rng).map_err(|e| e.to_string())?;
    let fractions: Vec<f64> = (1..=6).map(|t| g.tree_like_fraction(t)).collect();
    ensure(fractions.windows(2).all(|f| f[1] <= f[0]), || format!("tree-like fractions {fractions:?}"))?;
    Ok(format!(
        "{pairs} conditioning pairs, window sweep {:.4} to {:.4}, tree-like {:.3} to {:.3}",
        sweep[0].value,
        sweep[5].value,
        fractions[0],
        fractions[5]
    ))
}

fn cli(args: &[&str], workers: &str) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_tree-entropy"))
        .args(args)
        .args(["--workers", workers])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    match strip_timestamps(&text) {
        serde_json::Value::Null => Ok(text),
        v => Ok(v.to_string()),
    }
}

fn determinism_check() -> Outcome {
    let dir = std::env::temp_dir().join(format!("tree-entropy-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let write = |name: &str, text: &str| std::fs::write(Path::new(&p(name)), text).map_err(|e| e.to_string());
    write("is.conf", "model = ising\nbeta = 0.2\n")?;
    write("hc.conf", "model = hardcore\nlambda = 1\n")?;
    let (is, hc, g) = (p("is.conf"), p("hc.conf"), p("g.txt"));
    cli(&["gen-graph", "--n", "40", "--seed", "3", "--out", &g], "1")?;
    let runs: Vec<Vec<&str>> = vec![
        vec!["gen-graph", "--n", "60", "--seed", "3"],
        vec!["entropy", "--graph", &g, "--model", &is, "--radii", "1,2", "--orderings", "6", "--seed", "4"],
        vec!["hperc", "--model", &hc, "--radii", "1,3", "--samples", "3000", "--seed", "5"],
        vec!["hperc", "--model", &hc, "--radii", "2,4", "--model-radius", "5", "--samples", "2000", "--seed", "5"],
        vec!["ssm", "--model", &is, "--r-max", "3", "--strategy", "random", "--starts", "3", "--seed", "6"],
        vec!["converge", "--model", &is, "--sizes", "8,10", "--graphs", "3", "--samples", "2000", "--radius", "3", "--seed", "7"],
        vec!["lw-diag", "--graph", &g, "--model", &is, "--mode", "mc", "--samples", "200", "--seed", "8"],
        vec!["thresholds", "--d", "3", "--model", &is],
    ];
    for args in &runs {
        let base = cli(args, "1")?;
        for w in ["3", "0"] {
            ensure(cli(args, w)? == base, || format!("{} differs with --workers {w}", args[0]))?;
        }
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(format!("{} commands identical under --workers 1, 3, 0", runs.len()))
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("exact percolation identity", Box::new(identity_check)),
        ("tree engine against enumeration", Box::new(oracle_check)),
        ("thresholds", Box::new(threshold_check)),
        ("Dobrushin alpha for Ising", Box::new(dobrushin_check)),
        ("SSM decay for Ising", Box::new(ssm_check)),
        ("convergence, Ising beta=0.2", Box::new(|| convergence_check(&ising(INV3, 0.2).unwrap()))),
        ("convergence, hard-core lambda=1", Box::new(|| convergence_check(&hardcore(INV3, 1.0).unwrap()))),
        ("degenerate models", Box::new(degenerate_check)),
        ("monotonicity", Box::new(monotonicity_check)),
        ("determinism across workers", Box::new(determinism_check)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
