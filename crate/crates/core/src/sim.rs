//! Exact RBS/FBS application inside the weight-k subspace.
//!
//! A gate on qubits `(i, j)` couples every basis state with bit `i` set and
//! bit `j` clear (the pair's first member, index `l`) to the state obtained by
//! swapping those two bits (second member, index `j`). There are exactly
//! `C(n-2, k-1)` such pairs and no index appears in two of them. On a pair the
//! gate acts as
//!
//! ```text
//! a_l <- cos(t) a_l + s sin(t) a_j
//! a_j <- -s sin(t) a_l + cos(t) a_j
//! ```
//!
//! with `s = 1` for RBS and `s = (-1)^f` for FBS, `f` being the number of
//! occupied qubits strictly between `i` and `j` (shared by both members).

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{binomial, BasisIndexer};
use crate::circuit::{check_edge, Circuit, Gate, GateKind};
use crate::error::{dim_mismatch, HwError, Result};
use crate::state::SubspaceState;

/// Default cap on `d_k` for materializing `d_k x d_k` matrices.
pub const DEFAULT_DK_CAP: usize = 4096;

/// Index pairs rotated by a gate on one edge, plus the FBS parity of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    pub i: usize,
    pub j: usize,
    pub pairs: Vec<(u32, u32)>,
    /// `true` where the in-between population `f` is odd.
    pub odd: Vec<bool>,
}

impl PairTable {
    pub fn new(indexer: &BasisIndexer, i: usize, j: usize) -> Result<Self> {
        let n = indexer.n();
        let k = indexer.k();
        check_edge(n, i, j)?;
        if indexer.dim() > u32::MAX as usize {
            return Err(HwError::Resource(format!("{indexer} is too large to index")));
        }
        if k == 0 || k == n {
            return Ok(Self { i, j, pairs: Vec::new(), odd: Vec::new() });
        }
        let others: Vec<usize> = (0..n).filter(|&q| q != i && q != j).collect();
        let between = (i + 1..j).fold(0u64, |acc, q| acc | indexer.qubit_bit(q));
        let bit_i = indexer.qubit_bit(i);
        let bit_j = indexer.qubit_bit(j);
        let count = binomial(n - 2, k - 1) as usize;
        let mut pairs = Vec::with_capacity(count);
        let mut odd = Vec::with_capacity(count);

        // Gosper's hack over (k-1)-subsets of the other n-2 qubits
        let m = n - 2;
        let mut sub: u64 = (1u64 << (k - 1)) - 1;
        let limit: u64 = 1u64 << m;
        loop {
            let rest = spread(sub, &others, indexer);
            let l = indexer.rank_unchecked(rest | bit_i) as u32;
            let r = indexer.rank_unchecked(rest | bit_j) as u32;
            pairs.push((l, r));
            odd.push((rest & between).count_ones() % 2 == 1);
            if sub == 0 {
                break;
            }
            let c = sub & sub.wrapping_neg();
            let rr = sub + c;
            sub = (((rr ^ sub) >> 2) / c) | rr;
            if sub >= limit {
                break;
            }
        }
        debug_assert_eq!(pairs.len(), count);

        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_unstable_by_key(|&p| pairs[p].0);
        let pairs = order.iter().map(|&p| pairs[p]).collect();
        let odd = order.iter().map(|&p| odd[p]).collect();
        Ok(Self { i, j, pairs, odd })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn spread(sub: u64, others: &[usize], indexer: &BasisIndexer) -> u64 {
    let mut out = 0u64;
    let mut rest = sub;
    while rest != 0 {
        let b = rest.trailing_zeros() as usize;
        out |= indexer.qubit_bit(others[b]);
        rest &= rest - 1;
    }
    out
}

/// A gate bound to its pair table with `cos`/`sin` precomputed.
#[derive(Debug, Clone)]
pub struct BoundGate {
    pub kind: GateKind,
    pub table: Arc<PairTable>,
    pub cos: f64,
    pub sin: f64,
}

impl BoundGate {
    pub fn new(kind: GateKind, table: Arc<PairTable>, theta: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Self { kind, table, cos, sin }
    }

    pub fn set_theta(&mut self, theta: f64) {
        let (s, c) = theta.sin_cos();
        self.sin = s;
        self.cos = c;
    }

    /// Rotate `amps` in place by this gate.
    #[inline]
    pub fn apply(&self, amps: &mut [f64]) {
        self.rotate(amps, self.cos, self.sin);
    }

    /// Apply the transposed (inverse) gate.
    #[inline]
    pub fn apply_transpose(&self, amps: &mut [f64]) {
        self.rotate(amps, self.cos, -self.sin);
    }

    /// Replace `amps` by the theta-derivative of the gate applied to it:
    /// the rotation shifted by a quarter turn on the pairs, zero elsewhere.
    pub fn apply_derivative(&self, amps: &mut [f64]) {
        let mut out = vec![0.0; amps.len()];
        let (c, s) = (-self.sin, self.cos);
        for (p, &(l, r)) in self.table.pairs.iter().enumerate() {
            let sg = self.sign(p);
            let (al, ar) = (amps[l as usize], amps[r as usize]);
            out[l as usize] = c * al + sg * s * ar;
            out[r as usize] = -sg * s * al + c * ar;
        }
        amps.copy_from_slice(&out);
    }

    #[inline]
    pub(crate) fn sign(&self, p: usize) -> f64 {
        match self.kind {
            GateKind::Fbs if self.table.odd[p] => -1.0,
            _ => 1.0,
        }
    }

    #[inline]
    fn rotate(&self, amps: &mut [f64], c: f64, s: f64) {
        match self.kind {
            GateKind::Rbs => {
                for &(l, r) in &self.table.pairs {
                    let (l, r) = (l as usize, r as usize);
                    let (al, ar) = (amps[l], amps[r]);
                    amps[l] = c * al + s * ar;
                    amps[r] = -s * al + c * ar;
                }
            }
            GateKind::Fbs => {
                for (&(l, r), &odd) in self.table.pairs.iter().zip(&self.table.odd) {
                    let (l, r) = (l as usize, r as usize);
                    let s = if odd { -s } else { s };
                    let (al, ar) = (amps[l], amps[r]);
                    amps[l] = c * al + s * ar;
                    amps[r] = -s * al + c * ar;
                }
            }
        }
    }
}

/// A circuit specialized to one weight-k subspace, pair tables cached per edge.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    indexer: BasisIndexer,
    gates: Vec<BoundGate>,
}

impl CompiledCircuit {
    pub fn new(circuit: &Circuit, k: usize) -> Result<Self> {
        let indexer = BasisIndexer::new(circuit.n(), k)?;
        let mut cache: HashMap<(usize, usize), Arc<PairTable>> = HashMap::new();
        let mut gates = Vec::with_capacity(circuit.len());
        for g in circuit.gates() {
            let table = match cache.get(&g.edge()) {
                Some(t) => Arc::clone(t),
                None => {
                    let t = Arc::new(PairTable::new(&indexer, g.i, g.j)?);
                    cache.insert(g.edge(), Arc::clone(&t));
                    t
                }
            };
            gates.push(BoundGate::new(g.kind, table, g.theta));
        }
        Ok(Self { indexer, gates })
    }

    pub fn indexer(&self) -> &BasisIndexer {
        &self.indexer
    }

    pub fn gates(&self) -> &[BoundGate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.indexer.dim()
    }

    pub fn set_thetas(&mut self, thetas: &[f64]) -> Result<()> {
        if thetas.len() != self.gates.len() {
            return Err(dim_mismatch!("{} angles for {} gates", thetas.len(), self.gates.len()));
        }
        for (g, &t) in self.gates.iter_mut().zip(thetas) {
            g.set_theta(t);
        }
        Ok(())
    }

    /// Apply every gate in order to a raw amplitude slice.
    pub fn apply(&self, amps: &mut [f64]) {
        debug_assert_eq!(amps.len(), self.dim());
        for g in &self.gates {
            g.apply(amps);
        }
    }

    /// Apply the inverse circuit (transposed gates, reverse order).
    pub fn apply_transpose(&self, amps: &mut [f64]) {
        for g in self.gates.iter().rev() {
            g.apply_transpose(amps);
        }
    }

    /// Apply gates `range` only.
    pub fn apply_range(&self, amps: &mut [f64], range: std::ops::Range<usize>) {
        for g in &self.gates[range] {
            g.apply(amps);
        }
    }

    pub fn run(&self, state: &SubspaceState) -> Result<SubspaceState> {
        if state.indexer() != &self.indexer {
            return Err(dim_mismatch!(
                "state in {} but circuit compiled for {}",
                state.indexer(),
                self.indexer
            ));
        }
        let mut out = state.clone();
        self.apply(out.amplitudes_mut());
        Ok(out)
    }

    pub fn unitary(&self, cap: usize) -> Result<SubspaceUnitary> {
        let d = self.dim();
        if d > cap {
            return Err(HwError::Resource(format!("d_k = {d} exceeds the unitary cap {cap}")));
        }
        let mut matrix = DMatrix::<f64>::identity(d, d);
        // column-major storage: each chunk is one column
        for col in matrix.as_mut_slice().chunks_mut(d) {
            self.apply(col);
        }
        Ok(SubspaceUnitary { indexer: self.indexer.clone(), matrix })
    }
}

fn single_gate(state: &mut SubspaceState, gate: Gate) -> Result<()> {
    let table = PairTable::new(state.indexer(), gate.i, gate.j)?;
    BoundGate::new(gate.kind, Arc::new(table), gate.theta).apply(state.amplitudes_mut());
    Ok(())
}

/// One RBS on qubits `(i, j)`.
pub fn apply_rbs(state: &mut SubspaceState, i: usize, j: usize, theta: f64) -> Result<()> {
    single_gate(state, Gate::rbs(i, j, theta))
}

/// One FBS on qubits `(i, j)`.
pub fn apply_fbs(state: &mut SubspaceState, i: usize, j: usize, theta: f64) -> Result<()> {
    single_gate(state, Gate::fbs(i, j, theta))
}

/// Run `circuit` on `state`, whose indexer must be `(circuit.n, k)`.
pub fn apply_circuit(circuit: &Circuit, state: &SubspaceState, k: usize) -> Result<SubspaceState> {
    if state.indexer().n() != circuit.n() || state.indexer().k() != k {
        return Err(dim_mismatch!(
            "state in {} but circuit has n={} and k={k} was requested",
            state.indexer(),
            circuit.n()
        ));
    }
    CompiledCircuit::new(circuit, k)?.run(state)
}

/// The `d_k x d_k` block `W^k` of `circuit`.
pub fn circuit_unitary(circuit: &Circuit, k: usize) -> Result<SubspaceUnitary> {
    circuit_unitary_capped(circuit, k, DEFAULT_DK_CAP)
}

pub fn circuit_unitary_capped(circuit: &Circuit, k: usize, cap: usize) -> Result<SubspaceUnitary> {
    let idx = BasisIndexer::new(circuit.n(), k)?;
    if idx.dim() > cap {
        return Err(HwError::Resource(format!("d_k = {} exceeds the unitary cap {cap}", idx.dim())));
    }
    CompiledCircuit::new(circuit, k)?.unitary(cap)
}

/// Orthogonal matrix realized by a circuit on one subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceUnitary {
    pub indexer: BasisIndexer,
    pub matrix: DMatrix<f64>,
}

impl SubspaceUnitary {
    /// `max |W W^T - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let d = self.matrix.nrows();
        let prod = &self.matrix * self.matrix.transpose();
        max_abs_diff(&prod, &DMatrix::identity(d, d))
    }
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn basis_state(n: usize, k: usize, s: &str) -> SubspaceState {
        let idx = BasisIndexer::new(n, k).unwrap();
        let b = idx.parse(s).unwrap();
        let r = idx.rank(b).unwrap();
        SubspaceState::basis(idx, r).unwrap()
    }

    #[test]
    fn n4_k2_pairs_on_first_two_qubits() {
        let idx = BasisIndexer::new(4, 2).unwrap();
        let t = PairTable::new(&idx, 0, 1).unwrap();
        let named: HashSet<(String, String)> = t
            .pairs
            .iter()
            .map(|&(l, r)| {
                (
                    idx.format(idx.unrank(l as usize).unwrap()),
                    idx.format(idx.unrank(r as usize).unwrap()),
                )
            })
            .collect();
        let expected: HashSet<(String, String)> = [("1010", "0110"), ("1001", "0101")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(named, expected);
    }

    #[test]
    fn pair_count_and_disjointness() {
        for n in 2..=9 {
            for k in 0..=n {
                let idx = BasisIndexer::new(n, k).unwrap();
                for i in 0..n {
                    for j in i + 1..n {
                        let t = PairTable::new(&idx, i, j).unwrap();
                        let expect = if k == 0 || k == n { 0 } else { binomial(n - 2, k - 1) };
                        assert_eq!(t.len() as u64, expect);
                        let mut seen = HashSet::new();
                        for &(l, r) in &t.pairs {
                            assert!(seen.insert(l) && seen.insert(r));
                            let (bl, br) = (idx.unrank_unchecked(l as usize), idx.unrank_unchecked(r as usize));
                            assert!(idx.occupied(bl, i) && !idx.occupied(bl, j));
                            assert_eq!(bl ^ br, idx.qubit_bit(i) | idx.qubit_bit(j));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_angle_is_identity() {
        let idx = BasisIndexer::new(5, 2).unwrap();
        let amps: Vec<f64> = (0..10).map(|x| x as f64 + 0.5).collect();
        let mut s = SubspaceState::normalized(idx, amps).unwrap();
        let before = s.clone();
        apply_rbs(&mut s, 1, 3, 0.0).unwrap();
        apply_fbs(&mut s, 0, 4, 0.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn quarter_turn_moves_100_to_minus_010() {
        let mut s = basis_state(3, 1, "100");
        apply_rbs(&mut s, 0, 1, FRAC_PI_2).unwrap();
        let target = basis_state(3, 1, "010");
        let idx = s.indexer().clone();
        let r = idx.rank(idx.parse("010").unwrap()).unwrap();
        assert!((s.amplitudes()[r] + 1.0).abs() < 1e-15);
        assert!((s.dot(&target).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fbs_sign_flip_with_odd_parity() {
        // |110>, gate (0,2): f = s_1 = 1, so FBS acts as RBS(-theta)
        let theta = 0.7;
        let mut rbs = basis_state(3, 2, "110");
        let mut fbs = rbs.clone();
        apply_rbs(&mut rbs, 0, 2, theta).unwrap();
        apply_fbs(&mut fbs, 0, 2, theta).unwrap();
        let idx = rbs.indexer().clone();
        let partner = idx.rank(idx.parse("011").unwrap()).unwrap();
        assert!((rbs.amplitudes()[partner] + theta.sin()).abs() < 1e-15);
        assert!((fbs.amplitudes()[partner] - theta.sin()).abs() < 1e-15);
        let mut back = basis_state(3, 2, "110");
        apply_rbs(&mut back, 0, 2, -theta).unwrap();
        assert_eq!(back, fbs);
    }

    #[test]
    fn fbs_equals_rbs_on_adjacent_qubits() {
        let idx = BasisIndexer::new(6, 3).unwrap();
        let amps: Vec<f64> = (0..20).map(|x| ((x * 7) % 11) as f64 - 5.0).collect();
        let s0 = SubspaceState::normalized(idx, amps).unwrap();
        for i in 0..5 {
            let (mut a, mut b) = (s0.clone(), s0.clone());
            apply_rbs(&mut a, i, i + 1, 1.1).unwrap();
            apply_fbs(&mut b, i, i + 1, 1.1).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn periodic_in_two_pi() {
        let idx = BasisIndexer::new(5, 2).unwrap();
        let s0 = SubspaceState::normalized(idx, (1..=10).map(f64::from).collect()).unwrap();
        let (mut a, mut b) = (s0.clone(), s0);
        apply_rbs(&mut a, 0, 3, 0.3).unwrap();
        apply_rbs(&mut b, 0, 3, 0.3 + 2.0 * PI).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_indices() {
        let mut s = basis_state(3, 1, "100");
        assert!(apply_rbs(&mut s, 1, 0, 0.1).is_err());
        assert!(apply_fbs(&mut s, 0, 3, 0.1).is_err());
        let c = Circuit::new(4).unwrap();
        assert!(apply_circuit(&c, &s, 1).is_err());
    }

    #[test]
    fn empty_circuit_and_identity_unitary() {
        let c = Circuit::new(4).unwrap();
        let s = basis_state(4, 2, "0110");
        assert_eq!(apply_circuit(&c, &s, 2).unwrap(), s);
        let w = circuit_unitary(&c, 2).unwrap();
        assert_eq!(w.matrix, DMatrix::identity(6, 6));
    }

    #[test]
    fn unitary_cap_is_enforced() {
        let c = Circuit::from_gates(12, [Gate::rbs(0, 1, 0.2)]).unwrap();
        assert!(matches!(circuit_unitary_capped(&c, 6, 100), Err(HwError::Resource(_))));
    }

    #[test]
    fn transpose_undoes_circuit() {
        let c = Circuit::from_gates(
            5,
            [Gate::rbs(0, 2, 0.4), Gate::fbs(1, 4, -2.0), Gate::rbs(3, 4, 1.3)],
        )
        .unwrap();
        let cc = CompiledCircuit::new(&c, 2).unwrap();
        let mut a: Vec<f64> = (0..10).map(|x| x as f64).collect();
        let orig = a.clone();
        cc.apply(&mut a);
        cc.apply_transpose(&mut a);
        for (x, y) in a.iter().zip(&orig) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
