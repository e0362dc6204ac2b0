//! Circuit families used by the experiments: the periodic brick ansatz and
//! uniformly random circuits.

use std::f64::consts::TAU;

use rand::Rng;

use crate::circuit::{Circuit, Gate, GateKind, Graph};
use crate::error::{domain, Result};

/// One brick of the periodic ansatz on `n` qubits: nearest-neighbour gates on
/// the even pairs `(0,1), (2,3), ...`, then next-nearest gates `(q, q+2)` for
/// every `q`. The skip gates carry a state-dependent parity, which a pure
/// nearest-neighbour brick lacks (its Lie algebra never leaves so(n)).
pub fn periodic_block(n: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (0..n.saturating_sub(1)).step_by(2).map(|q| (q, q + 1)).collect();
    edges.extend((0..n.saturating_sub(2)).map(|q| (q, q + 2)));
    edges
}

/// `layers` repetitions of [`periodic_block`], all angles zero.
pub fn periodic_ansatz(n: usize, layers: usize, kind: GateKind) -> Result<Circuit> {
    if n < 2 {
        return Err(domain!("the periodic ansatz needs at least 2 qubits"));
    }
    let block = periodic_block(n);
    Circuit::from_gates(
        n,
        (0..layers).flat_map(|_| block.iter().map(move |&(i, j)| Gate::new(kind, i, j, 0.0))),
    )
}

/// Uniform angles in `[0, 2pi)`.
pub fn random_thetas<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| rng.random::<f64>() * TAU).collect()
}

/// `depth` gates on uniformly chosen edges of `graph`, with uniform angles.
/// `kind = None` picks RBS or FBS per gate with equal probability.
pub fn random_circuit<R: Rng + ?Sized>(
    graph: &Graph,
    depth: usize,
    kind: Option<GateKind>,
    rng: &mut R,
) -> Result<Circuit> {
    if graph.edges.is_empty() && depth > 0 {
        return Err(domain!("cannot place gates on a graph without edges"));
    }
    let mut c = Circuit::new(graph.n)?;
    for _ in 0..depth {
        let (i, j) = graph.edges[rng.random_range(0..graph.edges.len())];
        let kind = kind.unwrap_or(if rng.random::<bool>() { GateKind::Rbs } else { GateKind::Fbs });
        c.push(Gate::new(kind, i, j, rng.random::<f64>() * TAU))?;
    }
    Ok(c)
}
