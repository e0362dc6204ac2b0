//! Quadratic cost, analytic backpropagation and loader training.
//!
//! With inner layers `zeta^lambda` (the state before gate `lambda`) and inner
//! errors `delta^lambda = dC/dzeta^lambda`, the derivative for gate `lambda`
//! sums over its rotated pairs `(l, j)`:
//!
//! ```text
//! dC/dtheta = sum delta_l^{+} (-sin t zeta_l + s cos t zeta_j)
//!                + delta_j^{+} (-s cos t zeta_l - sin t zeta_j)
//! ```
//!
//! where `delta^{+}` is the error after the gate and `s` the FBS parity sign
//! (always 1 for RBS). Errors move backwards through transposed gate blocks.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisIndexer;
use crate::circuit::Circuit;
use crate::error::{dim_mismatch, HwError, Result};
use crate::sim::{BoundGate, CompiledCircuit};
use crate::state::SubspaceState;

/// States at every gate boundary: `layers[0]` is the input, `layers[D]` the output.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerTrace {
    pub layers: Vec<SubspaceState>,
}

impl InnerTrace {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientResult {
    pub grad: Vec<f64>,
    pub cost: f64,
}

fn check_state(cc: &CompiledCircuit, s: &SubspaceState, what: &str) -> Result<()> {
    if s.indexer() != cc.indexer() {
        return Err(dim_mismatch!("{what} lives in {} but the circuit acts on {}", s.indexer(), cc.indexer()));
    }
    Ok(())
}

pub fn forward_with_trace(
    circuit: &Circuit,
    k: usize,
    input: &SubspaceState,
) -> Result<(InnerTrace, SubspaceState)> {
    let cc = CompiledCircuit::new(circuit, k)?;
    check_state(&cc, input, "input")?;
    let mut layers = Vec::with_capacity(cc.len() + 1);
    layers.push(input.clone());
    let mut cur = input.clone();
    for g in cc.gates() {
        g.apply(cur.amplitudes_mut());
        layers.push(cur.clone());
    }
    Ok((InnerTrace { layers }, cur))
}

/// `||z - y||^2`.
pub fn quadratic_cost(output: &SubspaceState, target: &SubspaceState) -> Result<f64> {
    output.check_same(target)?;
    Ok(sq_dist(output.amplitudes(), target.amplitudes()))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gradient contribution of one gate from the layer before it and the error after it.
#[inline]
pub(crate) fn gate_gradient(g: &BoundGate, zeta: &[f64], delta_after: &[f64]) -> f64 {
    let (c, s) = (g.cos, g.sin);
    let mut acc = 0.0;
    for (p, &(l, j)) in g.table.pairs.iter().enumerate() {
        let sg = g.sign(p);
        let (l, j) = (l as usize, j as usize);
        let (zl, zj) = (zeta[l], zeta[j]);
        acc += delta_after[l] * (-s * zl + sg * c * zj) + delta_after[j] * (-sg * c * zl - s * zj);
    }
    acc
}

/// Backpropagation on raw slices. `input` and `target` must have length `d_k`.
///
/// The forward pass only keeps the output; the backward pass rebuilds each
/// inner layer by applying the transposed gate, so memory stays `O(d_k)`.
pub fn backprop_raw(cc: &CompiledCircuit, input: &[f64], target: &[f64]) -> GradientResult {
    let mut zeta = input.to_vec();
    cc.apply(&mut zeta);
    let cost = sq_dist(&zeta, target);
    let mut delta: Vec<f64> = zeta.iter().zip(target).map(|(z, y)| 2.0 * (z - y)).collect();
    let mut grad = vec![0.0; cc.len()];
    for (pos, g) in cc.gates().iter().enumerate().rev() {
        // zeta becomes the layer before gate `pos`; delta is still the error after it
        g.apply_transpose(&mut zeta);
        grad[pos] = gate_gradient(g, &zeta, &delta);
        g.apply_transpose(&mut delta);
    }
    GradientResult { grad, cost }
}

pub fn backprop_gradient(
    circuit: &Circuit,
    k: usize,
    input: &SubspaceState,
    target: &SubspaceState,
) -> Result<GradientResult> {
    let cc = CompiledCircuit::new(circuit, k)?;
    check_state(&cc, input, "input")?;
    check_state(&cc, target, "target")?;
    Ok(backprop_raw(&cc, input.amplitudes(), target.amplitudes()))
}

/// Central differences `(C(t+h) - C(t-h)) / 2h`, re-simulating the full circuit.
pub fn finite_difference_gradient(
    circuit: &Circuit,
    k: usize,
    input: &SubspaceState,
    target: &SubspaceState,
    step: f64,
) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 {
        return Err(HwError::Invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let mut cc = CompiledCircuit::new(circuit, k)?;
    check_state(&cc, input, "input")?;
    check_state(&cc, target, "target")?;
    let base = circuit.thetas();
    let cost_at = |cc: &mut CompiledCircuit, th: &[f64]| {
        cc.set_thetas(th).expect("angle count matches");
        let mut z = input.amplitudes().to_vec();
        cc.apply(&mut z);
        sq_dist(&z, target.amplitudes())
    };
    let mut out = Vec::with_capacity(base.len());
    let mut th = base.clone();
    for p in 0..base.len() {
        th[p] = base[p] + step;
        let up = cost_at(&mut cc, &th);
        th[p] = base[p] - step;
        let down = cost_at(&mut cc, &th);
        th[p] = base[p];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Optimizer {
    /// Fixed-step gradient descent.
    Gd { lr: f64 },
    Momentum { lr: f64, beta: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Gd { lr: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaInit {
    /// Uniform on `[0, 2pi)` from the config seed.
    Random,
    /// Start from the angles stored in the circuit.
    Circuit,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub max_iters: usize,
    /// Stop once the cost falls below this value.
    pub tol: f64,
    pub init: ThetaInit,
    pub seed: u64,
    /// Basis index of the initial state `e_s`.
    pub initial_index: usize,
    /// Extra random restarts tried while the cost stays above `tol`; the best run is kept.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::default(),
            max_iters: 10_000,
            tol: 1e-6,
            init: ThetaInit::Random,
            seed: 0,
            initial_index: 0,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_cost: f64,
    pub iterations: usize,
    pub thetas: Vec<f64>,
    /// Cost before each update; the last entry is the final cost.
    pub history: Vec<f64>,
}

/// Train `circuit` so that `W^k(theta) e_s` matches the normalized `target`.
pub fn train_loader(circuit: &Circuit, k: usize, target: &[f64], config: &TrainConfig) -> Result<TrainReport> {
    let indexer = BasisIndexer::new(circuit.n(), k)?;
    if target.len() != indexer.dim() {
        return Err(dim_mismatch!("target has {} entries, d_k = {}", target.len(), indexer.dim()));
    }
    let target = SubspaceState::normalized(indexer.clone(), target.to_vec())?;
    let input = SubspaceState::basis(indexer, config.initial_index)?;
    let mut cc = CompiledCircuit::new(circuit, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = circuit.len();

    let mut best: Option<TrainReport> = None;
    for attempt in 0..=config.restarts {
        let start = match (&config.init, attempt) {
            (ThetaInit::Circuit, 0) => circuit.thetas(),
            (ThetaInit::Given(t), 0) => {
                if t.len() != d {
                    return Err(dim_mismatch!("{} initial angles for {d} gates", t.len()));
                }
                t.clone()
            }
            _ => (0..d).map(|_| rng.random::<f64>() * TAU).collect(),
        };
        let report = descend(&mut cc, input.amplitudes(), target.amplitudes(), start, config);
        let done = report.final_cost < config.tol;
        if best.as_ref().is_none_or(|b| report.final_cost < b.final_cost) {
            best = Some(report);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one attempt"))
}

fn descend(cc: &mut CompiledCircuit, input: &[f64], target: &[f64], mut theta: Vec<f64>, cfg: &TrainConfig) -> TrainReport {
    let d = theta.len();
    let mut m = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        cc.set_thetas(&theta).expect("angle count matches");
        let g = backprop_raw(cc, input, target);
        history.push(g.cost);
        if g.cost < cfg.tol || iterations >= cfg.max_iters {
            return TrainReport { final_cost: g.cost, iterations, thetas: theta, history };
        }
        iterations += 1;
        match cfg.optimizer {
            Optimizer::Gd { lr } => {
                theta.iter_mut().zip(&g.grad).for_each(|(t, gr)| *t -= lr * gr);
            }
            Optimizer::Momentum { lr, beta } => {
                for p in 0..d {
                    m[p] = beta * m[p] + g.grad[p];
                    theta[p] -= lr * m[p];
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                let t = iterations as i32;
                for p in 0..d {
                    m[p] = beta1 * m[p] + (1.0 - beta1) * g.grad[p];
                    v[p] = beta2 * v[p] + (1.0 - beta2) * g.grad[p] * g.grad[p];
                    let mh = m[p] / (1.0 - beta1.powi(t));
                    let vh = v[p] / (1.0 - beta2.powi(t));
                    theta[p] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
}
