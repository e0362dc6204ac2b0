//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use hwsim::{Circuit, GateKind};
use nalgebra::DMatrix;
use rand::Rng;

/// The 4x4 two-qubit block in local ordering `|s_j s_i>` = 00, 01, 10, 11.
/// The FBS block equals the RBS block with `sin` scaled by `(-1)^f`.
pub fn block(theta: f64, parity_sign: f64) -> [[f64; 4]; 4] {
    let (s, c) = theta.sin_cos();
    let s = s * parity_sign;
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, s, 0.0],
        [0.0, -s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn bit(x: usize, n: usize, q: usize) -> usize {
    (x >> (n - 1 - q)) & 1
}

/// Full `2^n x 2^n` matrix of one gate, built entry by entry.
pub fn dense_gate(n: usize, kind: GateKind, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mask = (1usize << (n - 1 - i)) | (1usize << (n - 1 - j));
    let (lo, hi) = (i.min(j), i.max(j));
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let f: usize = (lo + 1..hi).map(|q| bit(x, n, q)).sum();
        let sign = if kind == GateKind::Fbs && f % 2 == 1 { -1.0 } else { 1.0 };
        let b = block(theta, sign);
        let row_local = 2 * bit(x, n, j) + bit(x, n, i);
        for col_local in 0..4 {
            let y = (x & !mask) | ((col_local & 1) << (n - 1 - i)) | ((col_local >> 1) << (n - 1 - j));
            m[(x, y)] += b[row_local][col_local];
        }
    }
    m
}

pub fn dense_circuit(c: &Circuit) -> DMatrix<f64> {
    let dim = 1usize << c.n();
    let mut u = DMatrix::identity(dim, dim);
    for g in c.gates() {
        u = dense_gate(c.n(), g.kind, g.i, g.j, g.theta) * u;
    }
    u
}

/// Weight-k computational states as `2^n` indices, in descending numeric order.
pub fn weight_states(n: usize, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..1usize << n).filter(|x| x.count_ones() as usize == k).collect();
    v.reverse();
    v
}

/// The `d_k x d_k` block of a dense matrix on the weight-k states.
pub fn restrict(u: &DMatrix<f64>, n: usize, k: usize) -> DMatrix<f64> {
    let s = weight_states(n, k);
    DMatrix::from_fn(s.len(), s.len(), |a, b| u[(s[a], s[b])])
}

/// Largest entry of `u` coupling weight-k states to other weights.
pub fn leakage(u: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..u.nrows() {
        for b in 0..u.ncols() {
            if a.count_ones() != b.count_ones() {
                worst = worst.max(u[(a, b)].abs());
            }
        }
    }
    worst
}

pub fn random_circuit<R: Rng>(n: usize, gates: usize, kind: Option<GateKind>, rng: &mut R) -> Circuit {
    let mut c = Circuit::new(n).unwrap();
    for _ in 0..gates {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (i, j) = (i.min(j), i.max(j));
        let kind = kind.unwrap_or(if rng.random::<bool>() { GateKind::Rbs } else { GateKind::Fbs });
        c.push(hwsim::Gate::new(kind, i, j, rng.random_range(0.0..std::f64::consts::TAU))).unwrap();
    }
    c
}

pub fn random_unit<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
