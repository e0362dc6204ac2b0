//! Data-loader design: a DLA-based existence check, greedy gate addition
//! until the QFIM rank reaches `d_k - 1`, and pruning of overparametrized
//! circuits down to a rank-preserving minimal gate list.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::random_thetas;
use crate::basis::BasisIndexer;
use crate::circuit::{Circuit, Gate, GateKind, Graph};
use crate::control::{
    dla_dimension_capped, generators_from_graph, max_qfim_rank, orthogonal_algebra_dim, DEFAULT_DLA_DK_CAP,
    DEFAULT_DLA_TOL, DEFAULT_QFIM_TOL,
};
use crate::error::{HwError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    LoaderExists,
    InsufficientControl,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Precheck {
    pub verdict: Verdict,
    /// `None` when the graph is disconnected or `d_k` is above the DLA cap.
    pub dla_dim: Option<usize>,
    pub target_rank: usize,
    pub full_dim: usize,
    pub reason: String,
}

/// Classify a graph by the dimension of its generators' Lie algebra in the
/// weight-k subspace: below `d_k - 1` no loader can exist, at `d_k(d_k-1)/2`
/// one always does, anything in between is undecided.
pub fn existence_precheck(graph: &Graph, k: usize, kind: GateKind) -> Result<Precheck> {
    existence_precheck_capped(graph, k, kind, DEFAULT_DLA_DK_CAP)
}

pub fn existence_precheck_capped(graph: &Graph, k: usize, kind: GateKind, cap: usize) -> Result<Precheck> {
    let d = BasisIndexer::new(graph.n, k)?.dim();
    let target_rank = d - 1;
    let full_dim = orthogonal_algebra_dim(d);
    if !graph.is_connected() {
        return Ok(Precheck {
            verdict: Verdict::InsufficientControl,
            dla_dim: None,
            target_rank,
            full_dim,
            reason: "connectivity graph is disconnected".into(),
        });
    }
    if graph.edges.is_empty() {
        // single qubit: nothing to control, and nothing needs controlling
        let verdict = if d == 1 { Verdict::LoaderExists } else { Verdict::InsufficientControl };
        return Ok(Precheck { verdict, dla_dim: Some(0), target_rank, full_dim, reason: "no edges".into() });
    }
    let gens = generators_from_graph(graph.n, k, &graph.edges, kind)?;
    let dla = match dla_dimension_capped(&gens, DEFAULT_DLA_TOL, cap) {
        Ok(v) => v,
        Err(HwError::Resource(msg)) => {
            return Ok(Precheck {
                verdict: Verdict::Indeterminate,
                dla_dim: None,
                target_rank,
                full_dim,
                reason: msg,
            })
        }
        Err(e) => return Err(e),
    };
    let (verdict, reason) = if dla < target_rank {
        (Verdict::InsufficientControl, format!("DLA dimension {dla} < d_k - 1 = {target_rank}"))
    } else if dla == full_dim {
        (Verdict::LoaderExists, format!("DLA dimension {dla} is maximal"))
    } else {
        (Verdict::Indeterminate, format!("d_k - 1 = {target_rank} <= DLA dimension {dla} < {full_dim}"))
    };
    Ok(Precheck { verdict, dla_dim: Some(dla), target_rank, full_dim, reason })
}

/// Order in which candidate edges are tried within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrder {
    /// Edges in `(i, j)` lexicographic order.
    Lexicographic,
    /// Edges whose qubits are idle in the circuit's last layer come first,
    /// then lexicographic.
    #[default]
    ParallelFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    pub kind: GateKind,
    pub initial_index: usize,
    pub order: CandidateOrder,
    /// Random angle points per rank estimate (the max is kept).
    pub rank_samples: usize,
    pub rank_tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Seed size of the overparametrized circuit as a multiple of the DLA dimension.
    pub overparam_factor: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            kind: GateKind::Rbs,
            initial_index: 0,
            order: CandidateOrder::default(),
            rank_samples: 3,
            rank_tol: DEFAULT_QFIM_TOL,
            max_sweeps: 64,
            seed: 0,
            overparam_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub circuit: Circuit,
    pub final_rank: usize,
    pub target_rank: usize,
    pub dla_dim: Option<usize>,
    pub verdict: Verdict,
    /// QFIM rank after each accepted addition (greedy) or each removal (pruning).
    pub rank_history: Vec<usize>,
    pub depth: usize,
}

fn estimate_rank<R: Rng>(c: &Circuit, k: usize, cfg: &DesignConfig, rng: &mut R) -> Result<usize> {
    if c.is_empty() {
        return Ok(0);
    }
    max_qfim_rank(c, k, cfg.initial_index, cfg.rank_samples, cfg.rank_tol, rng)
}

fn final_layer_qubits(c: &Circuit) -> Vec<bool> {
    let mut ready = vec![0usize; c.n()];
    for g in c.gates() {
        let t = ready[g.i].max(ready[g.j]) + 1;
        ready[g.i] = t;
        ready[g.j] = t;
    }
    let depth = ready.iter().copied().max().unwrap_or(0);
    ready.iter().map(|&t| depth > 0 && t == depth).collect()
}

fn next_candidate(remaining: &[(usize, usize)], c: &Circuit, order: CandidateOrder) -> usize {
    match order {
        CandidateOrder::Lexicographic => 0,
        CandidateOrder::ParallelFirst => {
            let busy = final_layer_qubits(c);
            remaining.iter().position(|&(i, j)| !busy[i] && !busy[j]).unwrap_or(0)
        }
    }
}

fn verdict_after(rank: usize, target: usize, pre: &Precheck) -> Verdict {
    if rank >= target {
        Verdict::LoaderExists
    } else if pre.verdict == Verdict::InsufficientControl {
        Verdict::InsufficientControl
    } else {
        Verdict::Indeterminate
    }
}

/// Greedy design: starting from the empty circuit, sweep over the graph's
/// edges and keep each added gate only if it strictly raises the QFIM rank;
/// stop once the rank is `d_k - 1` or a whole sweep adds nothing.
pub fn design_greedy(graph: &Graph, k: usize, cfg: &DesignConfig) -> Result<DesignReport> {
    let idx = BasisIndexer::new(graph.n, k)?;
    if cfg.initial_index >= idx.dim() {
        return Err(crate::error::domain!("initial index {} out of range for {idx}", cfg.initial_index));
    }
    let target = idx.dim() - 1;
    let pre = existence_precheck(graph, k, cfg.kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut circuit = Circuit::with_connectivity(graph.n, graph.edges.clone())?;
    let mut rank = 0;
    let mut history = Vec::new();
    let mut edges = graph.edges.clone();
    edges.sort_unstable();

    let mut sweeps = 0;
    while rank < target && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut remaining = edges.clone();
        let mut added = false;
        while !remaining.is_empty() && rank < target {
            let (i, j) = remaining.remove(next_candidate(&remaining, &circuit, cfg.order));
            let mut trial = circuit.clone();
            trial.push(Gate::new(cfg.kind, i, j, 0.0))?;
            let r = estimate_rank(&trial, k, cfg, &mut rng)?;
            if r > rank {
                circuit = trial;
                rank = r;
                history.push(r);
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    let verdict = verdict_after(rank, target, &pre);
    Ok(DesignReport {
        depth: circuit.depth(),
        circuit,
        final_rank: rank,
        target_rank: target,
        dla_dim: pre.dla_dim,
        verdict,
        rank_history: history,
    })
}

/// Remove gates one at a time, restarting from the front after every
/// successful removal, as long as the QFIM rank is unchanged.
pub fn prune_overparametrized(circuit: &Circuit, k: usize, cfg: &DesignConfig) -> Result<DesignReport> {
    let idx = BasisIndexer::new(circuit.n(), k)?;
    let target = idx.dim() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = circuit.clone();
    let base = estimate_rank(&current, k, cfg, &mut rng)?;
    let mut history = vec![base];
    'outer: loop {
        for pos in 0..current.len() {
            let mut trial = current.clone();
            trial.remove(pos);
            if estimate_rank(&trial, k, cfg, &mut rng)? == base {
                current = trial;
                history.push(base);
                continue 'outer;
            }
        }
        break;
    }
    let verdict = if base >= target { Verdict::LoaderExists } else { Verdict::Indeterminate };
    Ok(DesignReport {
        depth: current.depth(),
        circuit: current,
        final_rank: base,
        target_rank: target,
        dla_dim: None,
        verdict,
        rank_history: history,
    })
}

/// Random circuit on `graph` with `factor * dim(DLA)` gates, the starting
/// point for pruning.
pub fn overparametrized_seed(graph: &Graph, k: usize, cfg: &DesignConfig) -> Result<Circuit> {
    let pre = existence_precheck(graph, k, cfg.kind)?;
    let dla = pre
        .dla_dim
        .ok_or_else(|| HwError::Invalid(format!("cannot size the seed circuit: {}", pre.reason)))?;
    let count = ((dla as f64) * cfg.overparam_factor).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut c = Circuit::with_connectivity(graph.n, graph.edges.clone())?;
    let thetas = random_thetas(count, &mut rng);
    for t in thetas {
        let (i, j) = graph.edges[rng.random_range(0..graph.edges.len())];
        c.push(Gate::new(cfg.kind, i, j, t))?;
    }
    Ok(c)
}

/// Greedy design followed by pruning of the greedy result.
pub fn design_composed(graph: &Graph, k: usize, cfg: &DesignConfig) -> Result<DesignReport> {
    let greedy = design_greedy(graph, k, cfg)?;
    let mut pruned = prune_overparametrized(&greedy.circuit, k, cfg)?;
    pruned.dla_dim = greedy.dla_dim;
    pruned.verdict = greedy.verdict;
    Ok(pruned)
}
