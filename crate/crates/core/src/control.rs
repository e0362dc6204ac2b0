//! Controllability diagnostics: subspace generators per connectivity edge,
//! the dimension of their dynamical Lie algebra, and the quantum Fisher
//! information matrix of a circuit's output state.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisIndexer;
use crate::circuit::{check_edge, Circuit, GateKind};
use crate::error::{dim_mismatch, HwError, Result};
use crate::sim::{CompiledCircuit, PairTable};
use crate::state::dot;

/// Relative Gram-Schmidt threshold used by [`dla_dimension`].
pub const DEFAULT_DLA_TOL: f64 = 1e-10;
/// Relative eigenvalue cutoff for QFIM ranks.
pub const DEFAULT_QFIM_TOL: f64 = 1e-8;
/// Largest `d_k` for which the Lie closure is computed.
pub const DEFAULT_DLA_DK_CAP: usize = 256;

/// Antisymmetric generators, one per edge: the derivative at `theta = 0` of
/// the edge's gate block in the weight-k subspace.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    pub n: usize,
    pub k: usize,
    pub kind: GateKind,
    pub edges: Vec<(usize, usize)>,
    pub generators: Vec<DMatrix<f64>>,
}

impl GeneratorSet {
    pub fn dim(&self) -> usize {
        BasisIndexer::new(self.n, self.k).map(|i| i.dim()).unwrap_or(0)
    }
}

pub fn generators_from_graph(
    n: usize,
    k: usize,
    edges: &[(usize, usize)],
    kind: GateKind,
) -> Result<GeneratorSet> {
    if edges.is_empty() {
        return Err(HwError::Invalid("generator set needs at least one edge".into()));
    }
    let idx = BasisIndexer::new(n, k)?;
    let d = idx.dim();
    let mut generators = Vec::with_capacity(edges.len());
    for &(i, j) in edges {
        check_edge(n, i, j)?;
        let table = PairTable::new(&idx, i, j)?;
        let mut g = DMatrix::<f64>::zeros(d, d);
        for (p, &(l, r)) in table.pairs.iter().enumerate() {
            let s = if kind == GateKind::Fbs && table.odd[p] { -1.0 } else { 1.0 };
            g[(l as usize, r as usize)] = s;
            g[(r as usize, l as usize)] = -s;
        }
        generators.push(g);
    }
    Ok(GeneratorSet { n, k, kind, edges: edges.to_vec(), generators })
}

/// Orthonormal (Frobenius) basis of the Lie closure built so far.
#[derive(Debug, Clone, Default)]
pub struct LieBasis {
    pub elements: Vec<DMatrix<f64>>,
}

impl LieBasis {
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// Orthogonalize `h` against the basis and keep it if the residual is
    /// above `tol * max(1, |h|)`. Returns whether it was added.
    pub fn try_add(&mut self, mut h: DMatrix<f64>, tol: f64) -> bool {
        let scale = h.norm().max(1.0);
        self.project_out(&mut h);
        let norm = h.norm();
        if norm > tol * scale {
            h /= norm;
            self.elements.push(h);
            true
        } else {
            false
        }
    }

    /// Largest residual norm left after projecting `h` onto the span.
    pub fn residual(&self, h: &DMatrix<f64>) -> f64 {
        let mut h = h.clone();
        self.project_out(&mut h);
        h.norm()
    }

    // two passes of classical Gram-Schmidt
    fn project_out(&self, h: &mut DMatrix<f64>) {
        for _ in 0..2 {
            for e in &self.elements {
                let c = dot(h.as_slice(), e.as_slice());
                h.as_mut_slice().iter_mut().zip(e.as_slice()).for_each(|(x, y)| *x -= c * y);
            }
        }
    }
}

fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Lie closure of the generators under commutators.
///
/// Generators are inserted first; each sweep then commutes every element
/// added in the previous sweep with every earlier element, keeping the
/// candidates that enlarge the span. Stops when a sweep adds nothing or the
/// dimension reaches `d(d-1)/2`.
pub fn lie_closure(gens: &GeneratorSet, tol: f64) -> LieBasis {
    let d = gens.dim();
    let max_dim = d * d.saturating_sub(1) / 2;
    let mut basis = LieBasis::default();
    for g in &gens.generators {
        if basis.dim() < max_dim {
            basis.try_add(g.clone(), tol);
        }
    }
    let mut r0 = 0;
    let mut rn = basis.dim();
    while rn > r0 && basis.dim() < max_dim {
        'sweep: for l in r0..rn {
            let candidates: Vec<DMatrix<f64>> = {
                let el = &basis.elements;
                (0..l).into_par_iter().map(|j| commutator(&el[l], &el[j])).collect()
            };
            for h in candidates {
                basis.try_add(h, tol);
                if basis.dim() >= max_dim {
                    break 'sweep;
                }
            }
        }
        r0 = rn;
        rn = basis.dim();
    }
    basis
}

pub fn dla_dimension(gens: &GeneratorSet, tol: f64) -> Result<usize> {
    dla_dimension_capped(gens, tol, DEFAULT_DLA_DK_CAP)
}

pub fn dla_dimension_capped(gens: &GeneratorSet, tol: f64, cap: usize) -> Result<usize> {
    if gens.generators.is_empty() {
        return Err(HwError::Invalid("generator set is empty".into()));
    }
    let d = gens.dim();
    if d > cap {
        return Err(HwError::Resource(format!("d_k = {d} exceeds the DLA cap {cap}")));
    }
    Ok(lie_closure(gens, tol).dim())
}

/// `d (d - 1) / 2`, the dimension of so(d).
pub fn orthogonal_algebra_dim(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QfimMatrix {
    #[serde(serialize_with = "ser_matrix")]
    pub matrix: DMatrix<f64>,
    pub theta: Vec<f64>,
    pub initial_index: usize,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl QfimMatrix {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.matrix.nrows() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn rank(&self, tol: f64) -> usize {
        qfim_rank(self, tol)
    }
}

/// Derivatives `d psi / d theta_p` of `W(theta) e_s`, one column per gate.
pub fn state_jacobian(cc: &CompiledCircuit, initial_index: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = cc.dim();
    if initial_index >= d {
        return Err(dim_mismatch!("initial index {initial_index} out of range for d_k = {d}"));
    }
    let mut layers = Vec::with_capacity(cc.len() + 1);
    let mut cur = vec![0.0; d];
    cur[initial_index] = 1.0;
    layers.push(cur.clone());
    for g in cc.gates() {
        g.apply(&mut cur);
        layers.push(cur.clone());
    }
    let psi = cur;
    let cols: Vec<Vec<f64>> = (0..cc.len())
        .into_par_iter()
        .map(|p| {
            let mut v = layers[p].clone();
            cc.gates()[p].apply_derivative(&mut v);
            cc.apply_range(&mut v, p + 1..cc.len());
            v
        })
        .collect();
    let mut jac = DMatrix::<f64>::zeros(d, cc.len());
    for (p, col) in cols.iter().enumerate() {
        jac.column_mut(p).copy_from_slice(col);
    }
    Ok((psi, jac))
}

/// `4 (<d_i psi, d_j psi> - <d_i psi, psi><psi, d_j psi>)` from a state and its Jacobian.
pub fn qfim_from_jacobian(psi: &[f64], jac: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = jac.transpose() * jac;
    let overlap: Vec<f64> = jac.column_iter().map(|c| dot(c.as_slice(), psi)).collect();
    let dd = jac.ncols();
    DMatrix::from_fn(dd, dd, |a, b| 4.0 * (gram[(a, b)] - overlap[a] * overlap[b]))
}

pub fn qfim(circuit: &Circuit, k: usize, initial_index: usize, theta: &[f64]) -> Result<QfimMatrix> {
    let mut cc = CompiledCircuit::new(circuit, k)?;
    cc.set_thetas(theta)?;
    let (psi, jac) = state_jacobian(&cc, initial_index)?;
    Ok(QfimMatrix { matrix: qfim_from_jacobian(&psi, &jac), theta: theta.to_vec(), initial_index })
}

/// Number of eigenvalues above `tol` times the largest one.
pub fn qfim_rank(q: &QfimMatrix, tol: f64) -> usize {
    let ev = q.eigenvalues();
    let top = ev.iter().copied().fold(0.0, f64::max);
    if top <= f64::MIN_POSITIVE {
        return 0;
    }
    ev.iter().filter(|&&e| e > tol * top).count()
}

/// Max QFIM rank over `samples` uniform random angle vectors.
pub fn max_qfim_rank<R: Rng + ?Sized>(
    circuit: &Circuit,
    k: usize,
    initial_index: usize,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<usize> {
    let mut cc = CompiledCircuit::new(circuit, k)?;
    let mut best = 0;
    for _ in 0..samples.max(1) {
        let theta: Vec<f64> = (0..circuit.len()).map(|_| rng.random::<f64>() * TAU).collect();
        cc.set_thetas(&theta)?;
        let (psi, jac) = state_jacobian(&cc, initial_index)?;
        let q = QfimMatrix { matrix: qfim_from_jacobian(&psi, &jac), theta, initial_index };
        best = best.max(qfim_rank(&q, tol));
        if best + 1 >= cc.dim() {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Gate, Graph};

    #[test]
    fn two_qubit_generator() {
        let g = generators_from_graph(2, 1, &[(0, 1)], GateKind::Rbs).unwrap();
        assert_eq!(g.generators[0], DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert!(generators_from_graph(2, 1, &[], GateKind::Rbs).is_err());
    }

    #[test]
    fn generators_are_antisymmetric_with_sparse_support() {
        let gs = generators_from_graph(5, 2, &Graph::full(5).edges, GateKind::Fbs).unwrap();
        for g in &gs.generators {
            assert_eq!(g.transpose(), -g);
            assert_eq!(g.iter().filter(|x| **x != 0.0).count(), 2 * 3); // C(3,1) pairs
            assert!(g.iter().all(|x| [0.0, 1.0, -1.0].contains(x)));
        }
    }

    #[test]
    fn adjacent_fbs_generator_matches_rbs() {
        let edges = Graph::line(5).edges;
        let a = generators_from_graph(5, 2, &edges, GateKind::Rbs).unwrap();
        let b = generators_from_graph(5, 2, &edges, GateKind::Fbs).unwrap();
        assert_eq!(a.generators, b.generators);
    }

    #[test]
    fn single_generator_is_abelian() {
        let gs = generators_from_graph(4, 2, &[(1, 3)], GateKind::Rbs).unwrap();
        assert_eq!(dla_dimension(&gs, DEFAULT_DLA_TOL).unwrap(), 1);
    }

    #[test]
    fn line3_unary_is_so3() {
        let gs = generators_from_graph(3, 1, &[(0, 1), (1, 2)], GateKind::Rbs).unwrap();
        assert_eq!(dla_dimension(&gs, DEFAULT_DLA_TOL).unwrap(), 3);
    }

    #[test]
    fn dla_cap() {
        let gs = generators_from_graph(11, 5, &[(0, 1)], GateKind::Rbs).unwrap();
        assert!(matches!(dla_dimension(&gs, DEFAULT_DLA_TOL), Err(HwError::Resource(_))));
    }

    #[test]
    fn closure_is_closed() {
        let gs = generators_from_graph(4, 2, &Graph::line(4).edges, GateKind::Rbs).unwrap();
        let basis = lie_closure(&gs, DEFAULT_DLA_TOL);
        for a in &basis.elements {
            assert!((a.transpose() + a).norm() < 1e-12);
            for b in &basis.elements {
                assert!(basis.residual(&commutator(a, b)) < 1e-9);
            }
        }
    }

    #[test]
    fn single_gate_qfim_is_four() {
        let c = Circuit::from_gates(2, [Gate::rbs(0, 1, 0.37)]).unwrap();
        let q = qfim(&c, 1, 0, &[0.37]).unwrap();
        assert!((q.matrix[(0, 0)] - 4.0).abs() < 1e-14);
        assert_eq!(qfim_rank(&q, DEFAULT_QFIM_TOL), 1);
    }

    #[test]
    fn unpopulated_gate_gives_zero_row() {
        // e_s = |1100>; gate (2,3) has nothing to rotate at theta = 0 before it
        let c = Circuit::from_gates(4, [Gate::rbs(2, 3, 0.0), Gate::rbs(1, 2, 0.5)]).unwrap();
        let q = qfim(&c, 2, 0, &[0.0, 0.5]).unwrap();
        for p in 0..2 {
            assert_eq!(q.matrix[(0, p)], 0.0);
            assert_eq!(q.matrix[(p, 0)], 0.0);
        }
        assert!(q.matrix[(1, 1)] > 0.0);
    }

    #[test]
    fn zero_matrix_rank() {
        let q = QfimMatrix { matrix: DMatrix::zeros(3, 3), theta: vec![0.0; 3], initial_index: 0 };
        assert_eq!(qfim_rank(&q, DEFAULT_QFIM_TOL), 0);
    }

    #[test]
    fn bad_initial_index() {
        let c = Circuit::from_gates(3, [Gate::rbs(0, 1, 0.1)]).unwrap();
        assert!(qfim(&c, 1, 3, &[0.1]).is_err());
        assert!(qfim(&c, 1, 0, &[0.1, 0.2]).is_err());
    }
}
