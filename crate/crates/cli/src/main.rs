//! `hwsim` command-line front end.
//!
//! Every subcommand reads its parameters from flags, optionally layered over
//! a JSON config file (`--config`), and writes JSON or CSV to stdout or `--out`.
//! Failures print a single `error: ...` line and exit with status 1.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hwsim::control::{
    dla_dimension_capped, generators_from_graph, orthogonal_algebra_dim, qfim, DEFAULT_DLA_DK_CAP, DEFAULT_DLA_TOL,
    DEFAULT_QFIM_TOL,
};
use hwsim::design::{
    design_composed, design_greedy, existence_precheck_capped, overparametrized_seed, prune_overparametrized,
    DesignConfig,
};
use hwsim::gradients::{train_loader, Optimizer, ThetaInit, TrainConfig};
use hwsim::variance::{run_sweep, sample_state, sweep_csv, SampleMode, SweepSpec};
use hwsim::{
    circuit_unitary_capped, compound_matrix, sim::max_abs_diff, BasisIndexer, Circuit, GateKind, Graph,
    SubspaceState, DEFAULT_DK_CAP, SCHEMA,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "hwsim", version, about = "Hamming-weight preserving circuit toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with default values for this command's flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Maximum worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// List the weight-k basis states with their indices
    Basis(BasisArgs),
    /// Run a circuit on a basis state and print the amplitudes
    Simulate(SimulateArgs),
    /// Orthogonality and compound-identity residuals of a circuit
    Check(CheckArgs),
    /// Dimension of the dynamical Lie algebra of a connectivity graph
    Dla(DlaArgs),
    /// Quantum Fisher information matrix rank of a circuit
    Qfim(QfimArgs),
    /// Design a data-loader circuit for a connectivity graph
    Design(DesignArgs),
    /// Train circuit angles to load a target state
    Train(TrainArgs),
    /// Monte-Carlo gradient statistics on the periodic ansatz
    Variance(VarianceArgs),
}

#[derive(Args, Serialize, Deserialize, Default)]
struct BasisArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Default)]
struct SimulateArgs {
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Initial basis state: an index, or a bitstring of length n
    #[arg(long)]
    initial: Option<String>,
    /// Comma-separated angles replacing those stored in the circuit
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
}

#[derive(Args, Serialize, Deserialize, Default)]
struct CheckArgs {
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Default)]
struct DlaArgs {
    /// Graph JSON file, or one of line, ring, full (with --n) or aspen5
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gate: Option<GateKind>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default)]
struct QfimArgs {
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    initial: Option<String>,
    /// Random angle draws; 0 evaluates at the circuit's own angles
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DesignMode {
    Greedy,
    Prune,
    Composed,
}

#[derive(Args, Serialize, Deserialize, Default)]
struct DesignArgs {
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gate: Option<GateKind>,
    #[arg(long, value_enum)]
    mode: Option<DesignMode>,
    /// Circuit to prune (prune mode); by default a random overparametrized seed
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    initial: Option<String>,
    /// Random angle draws per rank estimate
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Gd,
    Momentum,
    Adam,
}

#[derive(Args, Serialize, Deserialize, Default)]
struct TrainArgs {
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Target amplitudes: a JSON array, or a CSV whose last column holds them
    #[arg(long)]
    target: Option<PathBuf>,
    /// Without --target: train on this many random normalized targets
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Start from the circuit's stored angles instead of random ones
    #[arg(long)]
    from_circuit: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize, Deserialize, Default)]
struct VarianceArgs {
    /// Sweep specification JSON; flags below are ignored when given
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    gate: Option<Vec<GateKind>>,
    /// haar, cube, or a basis index
    #[arg(long)]
    input: Option<String>,
    /// haar, cube, or a basis index
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Overlay explicitly given flags on top of the config file values.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: &Map<String, Value>) -> Result<T> {
    let mut merged = config.clone();
    if let Value::Object(given) = serde_json::to_value(flags)? {
        for (key, v) in given {
            if !v.is_null() {
                merged.insert(key, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).context("config file")
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing required --{flag}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    Circuit::from_json(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_graph(spec: &str, n: Option<usize>) -> Result<Graph> {
    let sized = |f: fn(usize) -> Graph| -> Result<Graph> { Ok(f(need(n, "n")?)) };
    match spec {
        "line" => sized(Graph::line),
        "ring" => sized(Graph::ring),
        "full" => sized(Graph::full),
        "aspen5" => Ok(Graph::aspen5()),
        path => Graph::from_json(&read(Path::new(path))?).with_context(|| path.to_string()),
    }
}

fn parse_initial(s: Option<&str>, idx: &BasisIndexer) -> Result<usize> {
    let Some(s) = s else { return Ok(0) };
    if s.len() == idx.n() && s.chars().all(|c| c == '0' || c == '1') {
        return Ok(idx.rank(idx.parse(s)?)?);
    }
    let i: usize = s.parse().map_err(|_| anyhow!("--initial '{s}' is neither an index nor a {}-bit string", idx.n()))?;
    if i >= idx.dim() {
        bail!("--initial {i} out of range for d_k = {}", idx.dim());
    }
    Ok(i)
}

fn dk_cap(default: usize) -> Result<usize> {
    match std::env::var("HWSIM_DKCAP") {
        Ok(v) => v.trim().parse().map_err(|_| anyhow!("HWSIM_DKCAP must be a positive integer, got '{v}'")),
        Err(_) => Ok(default),
    }
}

fn parse_mode(s: Option<&str>) -> Result<SampleMode> {
    match s.unwrap_or("haar") {
        "haar" | "haar_sphere" => Ok(SampleMode::HaarSphere),
        "cube" | "cube_normalized" => Ok(SampleMode::CubeNormalized),
        other => other
            .parse()
            .map(SampleMode::BasisPoint)
            .map_err(|_| anyhow!("unknown sampling mode '{other}' (haar, cube or a basis index)")),
    }
}

fn json_out(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

fn with_schema(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.insert("schema".into(), Value::String(SCHEMA.into()));
    }
    v
}

fn json_only(format: Option<Format>, command: &str) -> Result<()> {
    if format == Some(Format::Csv) {
        bail!("{command} has no CSV output; use --format json");
    }
    Ok(())
}

fn cmd_basis(a: BasisArgs, format: Option<Format>) -> Result<String> {
    let idx = BasisIndexer::new(need(a.n, "n")?, need(a.k, "k")?)?;
    Ok(match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("index,bitstring\n");
            for (i, bits) in idx.states().enumerate() {
                s += &format!("{i},{}\n", idx.format(bits));
            }
            s
        }
        Format::Json => {
            let states: Vec<String> = idx.states().map(|b| idx.format(b)).collect();
            json_out(&with_schema(json!({ "n": idx.n(), "k": idx.k(), "dim": idx.dim(), "states": states })))
        }
    })
}

fn cmd_simulate(a: SimulateArgs, format: Option<Format>) -> Result<String> {
    let mut c = load_circuit(&need(a.circuit, "circuit")?)?;
    let k = need(a.k, "k")?;
    if let Some(t) = &a.theta {
        c.set_thetas(t)?;
    }
    let idx = BasisIndexer::new(c.n(), k)?;
    let initial = parse_initial(a.initial.as_deref(), &idx)?;
    let out = hwsim::apply_circuit(&c, &SubspaceState::basis(idx.clone(), initial)?, k)?;
    eprintln!("norm = {:.12}", out.norm());
    Ok(match format.unwrap_or(Format::Csv) {
        Format::Csv => out.to_csv(),
        Format::Json => {
            let amps: Vec<Value> = idx
                .states()
                .zip(out.amplitudes())
                .map(|(b, a)| json!({ "bitstring": idx.format(b), "amplitude": a }))
                .collect();
            json_out(&with_schema(json!({
                "n": c.n(), "k": k, "initial": initial, "norm": out.norm(), "amplitudes": amps
            })))
        }
    })
}

fn cmd_check(a: CheckArgs, format: Option<Format>) -> Result<String> {
    json_only(format, "check")?;
    let c = load_circuit(&need(a.circuit, "circuit")?)?;
    let k = need(a.k, "k")?;
    let cap = dk_cap(DEFAULT_DK_CAP)?;
    let w = circuit_unitary_capped(&c, k, cap)?;
    let w1 = circuit_unitary_capped(&c, 1.min(c.n()), cap)?;
    let compound = max_abs_diff(&w.matrix, &compound_matrix(&w1.matrix, k)?);
    let fbs_only = !c.is_empty() && c.gates().iter().all(|g| g.kind == GateKind::Fbs);
    Ok(json_out(&with_schema(json!({
        "n": c.n(),
        "k": k,
        "dim": w.indexer.dim(),
        "gates": c.len(),
        "orthogonality_residual": w.orthogonality_residual(),
        "fbs_only": fbs_only,
        "compound_residual": compound,
    }))))
}

fn cmd_dla(a: DlaArgs, format: Option<Format>) -> Result<String> {
    json_only(format, "dla")?;
    let graph = load_graph(&need(a.graph, "graph")?, a.n)?;
    let k = need(a.k, "k")?;
    let kind = a.gate.unwrap_or(GateKind::Rbs);
    let cap = dk_cap(DEFAULT_DLA_DK_CAP)?;
    let gens = generators_from_graph(graph.n, k, &graph.edges, kind)?;
    let dim = dla_dimension_capped(&gens, a.tol.unwrap_or(DEFAULT_DLA_TOL), cap)?;
    let pre = existence_precheck_capped(&graph, k, kind, cap)?;
    let d = gens.dim();
    let mut v = json!({
        "n": graph.n,
        "k": k,
        "gate": kind,
        "edges": graph.edges,
        "connected": graph.is_connected(),
        "dim_k": d,
        "dla_dim": dim,
        "orthogonal_bound": orthogonal_algebra_dim(d),
        "loader_verdict": pre.verdict,
    });
    if kind == GateKind::Fbs {
        v["fbs_bound"] = json!(graph.n * (graph.n - 1) / 2);
    }
    Ok(json_out(&with_schema(v)))
}

fn cmd_qfim(a: QfimArgs, format: Option<Format>) -> Result<String> {
    json_only(format, "qfim")?;
    let c = load_circuit(&need(a.circuit, "circuit")?)?;
    let k = need(a.k, "k")?;
    let idx = BasisIndexer::new(c.n(), k)?;
    let initial = parse_initial(a.initial.as_deref(), &idx)?;
    let tol = a.tol.unwrap_or(DEFAULT_QFIM_TOL);
    let seed = a.seed.unwrap_or(0);
    let samples = a.samples.unwrap_or(0);
    let draws: Vec<Vec<f64>> = if samples == 0 {
        vec![c.thetas()]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).map(|_| hwsim::ansatz::random_thetas(c.len(), &mut rng)).collect()
    };
    let mut ranks = Vec::with_capacity(draws.len());
    let mut best: Option<(usize, Vec<f64>)> = None;
    for theta in &draws {
        let q = qfim(&c, k, initial, theta)?;
        let r = q.rank(tol);
        ranks.push(r);
        if best.as_ref().is_none_or(|(b, _)| r > *b) {
            best = Some((r, q.eigenvalues()));
        }
    }
    let (max_rank, eigenvalues) = best.expect("at least one draw");
    Ok(json_out(&with_schema(json!({
        "n": c.n(),
        "k": k,
        "initial": initial,
        "seed": seed,
        "params": c.len(),
        "dim_k": idx.dim(),
        "max_rank": max_rank,
        "full_rank": idx.dim() - 1,
        "ranks": ranks,
        "eigenvalues": eigenvalues,
    }))))
}

fn cmd_design(a: DesignArgs, format: Option<Format>) -> Result<String> {
    json_only(format, "design")?;
    let graph = load_graph(&need(a.graph, "graph")?, a.n)?;
    let k = need(a.k, "k")?;
    let idx = BasisIndexer::new(graph.n, k)?;
    let mut cfg = DesignConfig {
        kind: a.gate.unwrap_or(GateKind::Rbs),
        initial_index: parse_initial(a.initial.as_deref(), &idx)?,
        seed: a.seed.unwrap_or(0),
        ..DesignConfig::default()
    };
    if let Some(s) = a.samples {
        cfg.rank_samples = s;
    }
    let mode = a.mode.unwrap_or(DesignMode::Greedy);
    let report = match mode {
        DesignMode::Greedy => design_greedy(&graph, k, &cfg)?,
        DesignMode::Composed => design_composed(&graph, k, &cfg)?,
        DesignMode::Prune => {
            let seed_circuit = match &a.circuit {
                Some(p) => load_circuit(p)?,
                None => overparametrized_seed(&graph, k, &cfg)?,
            };
            prune_overparametrized(&seed_circuit, k, &cfg)?
        }
    };
    // the circuit fields stay at top level so the file loads as a circuit
    let mut v = serde_json::to_value(&report.circuit)?;
    v["seed"] = json!(cfg.seed);
    v["design"] = json!({
        "mode": mode,
        "k": k,
        "initial": cfg.initial_index,
        "final_rank": report.final_rank,
        "target_rank": report.target_rank,
        "dla_dim": report.dla_dim,
        "verdict": report.verdict,
        "rank_history": report.rank_history,
        "depth": report.depth,
    });
    Ok(json_out(&v))
}

fn parse_target(text: &str) -> Result<Vec<f64>> {
    if let Ok(v) = serde_json::from_str::<Vec<f64>>(text) {
        return Ok(v);
    }
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if out.is_empty() => continue, // header
            Err(_) => bail!("target line {}: '{last}' is not a number", line_no + 1),
        }
    }
    if out.is_empty() {
        bail!("target file holds no amplitudes");
    }
    Ok(out)
}

fn cmd_train(a: TrainArgs, format: Option<Format>) -> Result<String> {
    json_only(format, "train")?;
    let c = load_circuit(&need(a.circuit, "circuit")?)?;
    let k = need(a.k, "k")?;
    let idx = BasisIndexer::new(c.n(), k)?;
    let seed = a.seed.unwrap_or(0);
    let lr = a.lr.unwrap_or(match a.method {
        Some(Method::Adam) => 0.05,
        _ => 0.1,
    });
    let optimizer = match a.method.unwrap_or(Method::Gd) {
        Method::Gd => Optimizer::Gd { lr },
        Method::Momentum => Optimizer::Momentum { lr, beta: 0.9 },
        Method::Adam => Optimizer::adam(lr),
    };
    let base = TrainConfig::default();
    let cfg = TrainConfig {
        optimizer,
        max_iters: a.max_iters.unwrap_or(base.max_iters),
        tol: a.tol.unwrap_or(base.tol),
        init: if a.from_circuit.unwrap_or(false) { ThetaInit::Circuit } else { ThetaInit::Random },
        seed,
        initial_index: parse_initial(a.initial.as_deref(), &idx)?,
        restarts: a.restarts.unwrap_or(0),
    };
    if let Some(path) = &a.target {
        let target = parse_target(&read(path)?).with_context(|| format!("{}", path.display()))?;
        let report = train_loader(&c, k, &target, &cfg)?;
        let trained = c.with_thetas(&report.thetas)?;
        let mut v = serde_json::to_value(&trained)?;
        v["seed"] = json!(seed);
        v["train"] = json!({
            "k": k,
            "initial": cfg.initial_index,
            "optimizer": cfg.optimizer,
            "final_cost": report.final_cost,
            "iterations": report.iterations,
        });
        return Ok(json_out(&v));
    }
    let samples = a.samples.ok_or_else(|| anyhow!("train needs --target or --samples"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut costs = Vec::with_capacity(samples);
    for t in 0..samples {
        let target = sample_state(&idx, SampleMode::HaarSphere, &mut rng)?;
        let run = TrainConfig { seed: seed.wrapping_add(t as u64), ..cfg.clone() };
        costs.push(train_loader(&c, k, target.amplitudes(), &run)?.final_cost);
    }
    let mean = if samples == 0 { 0.0 } else { costs.iter().sum::<f64>() / samples as f64 };
    Ok(json_out(&with_schema(json!({
        "n": c.n(),
        "k": k,
        "seed": seed,
        "optimizer": cfg.optimizer,
        "samples": samples,
        "mean_final_cost": mean,
        "final_costs": costs,
    }))))
}

fn cmd_variance(a: VarianceArgs, format: Option<Format>) -> Result<String> {
    let spec = match &a.sweep {
        Some(p) => serde_json::from_str::<SweepSpec>(&read(p)?).with_context(|| format!("{}", p.display()))?,
        None => SweepSpec {
            n: need(a.n, "n")?,
            k: need(a.k, "k")?,
            layers: a.layers.unwrap_or_else(|| vec![1]),
            gate: a.gate.unwrap_or_else(|| vec![GateKind::Rbs]),
            input_mode: parse_mode(a.input.as_deref())?,
            target_mode: parse_mode(a.target.as_deref())?,
            samples: a.samples.unwrap_or(1000),
            seed: a.seed.unwrap_or(0),
        },
    };
    let rows = run_sweep(&spec)?;
    Ok(match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            eprintln!("seed = {}", spec.seed);
            sweep_csv(&rows)
        }
        Format::Json => json_out(&with_schema(json!({ "seed": spec.seed, "sweep": spec, "rows": rows }))),
    })
}

fn run(cli: Cli) -> Result<()> {
    let config: Map<String, Value> = match &cli.config {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("{}", p.display()))?,
        None => Map::new(),
    };
    let global = |key: &str| config.get(key).cloned();
    let format: Option<Format> = match cli.format {
        Some(f) => Some(f),
        None => global("format").map(serde_json::from_value).transpose().context("config 'format'")?,
    };
    let out = cli.out.clone().or_else(|| global("out").and_then(|v| v.as_str().map(PathBuf::from)));
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => global("threads").and_then(|v| v.as_u64()).map(|t| t as usize),
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let mut config = config;
    for key in ["format", "out", "threads"] {
        config.remove(key);
    }
    let text = match cli.command {
        Command::Basis(a) => cmd_basis(merge(&a, &config)?, format)?,
        Command::Simulate(a) => cmd_simulate(merge(&a, &config)?, format)?,
        Command::Check(a) => cmd_check(merge(&a, &config)?, format)?,
        Command::Dla(a) => cmd_dla(merge(&a, &config)?, format)?,
        Command::Qfim(a) => cmd_qfim(merge(&a, &config)?, format)?,
        Command::Design(a) => cmd_design(merge(&a, &config)?, format)?,
        Command::Train(a) => cmd_train(merge(&a, &config)?, format)?,
        Command::Variance(a) => cmd_variance(merge(&a, &config)?, format)?,
    };
    match out {
        Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        let msg = format!("{e:#}").replace('\n', " ");
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}
