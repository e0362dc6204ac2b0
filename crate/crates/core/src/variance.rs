//! Monte-Carlo gradient statistics for RBS/FBS circuits.
//!
//! Each sample draws angles uniformly on `[0, 2pi)^D`, an input state and a
//! target state, then records the backpropagated gradient. Sample `s` uses
//! its own ChaCha stream, so results depend only on the seed and the sample
//! count, not on how the work is split across threads.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::periodic_ansatz;
use crate::basis::{binomial, BasisIndexer};
use crate::circuit::{Circuit, GateKind};
use crate::error::{domain, HwError, Result};
use crate::gradients::backprop_raw;
use crate::sim::{CompiledCircuit, PairTable};
use crate::state::SubspaceState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Normalized standard Gaussian vector: uniform on the real unit sphere.
    HaarSphere,
    /// Coordinates uniform in `[-1, 1]`, then normalized (not uniform on the sphere).
    CubeNormalized,
    /// The fixed basis state with this index.
    BasisPoint(usize),
}

fn fill_state<R: Rng + ?Sized>(out: &mut [f64], mode: SampleMode, rng: &mut R) -> Result<()> {
    match mode {
        SampleMode::BasisPoint(i) => {
            if i >= out.len() {
                return Err(domain!("basis point {i} out of range for d_k = {}", out.len()));
            }
            out.fill(0.0);
            out[i] = 1.0;
            return Ok(());
        }
        SampleMode::HaarSphere => out.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
        SampleMode::CubeNormalized => out.iter_mut().for_each(|x| *x = rng.random_range(-1.0..=1.0)),
    }
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // measure-zero draw; fall back to the first basis vector
        out[0] = 1.0;
    } else {
        out.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(())
}

pub fn sample_state<R: Rng + ?Sized>(indexer: &BasisIndexer, mode: SampleMode, rng: &mut R) -> Result<SubspaceState> {
    let mut amps = vec![0.0; indexer.dim()];
    fill_state(&mut amps, mode, rng)?;
    SubspaceState::from_raw(indexer.clone(), amps)
}

/// `k(n-k) / (n(n-1)) * 8 / C(n,k)`.
pub fn theory_variance(n: usize, k: usize) -> Result<f64> {
    if n < 2 || k == 0 || k >= n {
        return Err(domain!("gradient variance needs 1 <= k <= n-1, got n={n}, k={k}"));
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(kf * (nf - kf) / (nf * (nf - 1.0)) * 8.0 / binomial(n, k) as f64)
}

/// 1-based index of the first gate after which every basis state is
/// reachable from `e_s`; `0` if the subspace is a single state and
/// `D + 1` if full support is never reached.
pub fn lambda0(circuit: &Circuit, k: usize, initial_index: usize) -> Result<usize> {
    let idx = BasisIndexer::new(circuit.n(), k)?;
    let d = idx.dim();
    if initial_index >= d {
        return Err(domain!("initial index {initial_index} out of range for d_k = {d}"));
    }
    if d == 1 {
        return Ok(0);
    }
    let mut support = vec![false; d];
    support[initial_index] = true;
    let mut count = 1;
    let mut cache = std::collections::HashMap::new();
    for (pos, g) in circuit.gates().iter().enumerate() {
        let table = match cache.get(&g.edge()) {
            Some(t) => t,
            None => cache.entry(g.edge()).or_insert(PairTable::new(&idx, g.i, g.j)?),
        };
        for &(l, r) in &table.pairs {
            let (l, r) = (l as usize, r as usize);
            if support[l] != support[r] {
                support[l] = true;
                support[r] = true;
                count += 1;
            }
        }
        if count == d {
            return Ok(pos + 1);
        }
    }
    Ok(circuit.len() + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradStats {
    pub per_param_mean: Vec<f64>,
    pub per_param_var: Vec<f64>,
    pub stderr_mean: Vec<f64>,
    /// Standard error of each variance estimate.
    pub stderr_var: Vec<f64>,
    /// Average over parameters of the per-parameter variance.
    pub pooled_var: f64,
    pub pooled_var_stderr: f64,
    pub samples: usize,
    pub theory_var: f64,
    pub lambda0: usize,
}

#[derive(Clone)]
struct Moments {
    count: usize,
    s1: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
    s4: Vec<f64>,
    // per-sample average of g^2 over parameters
    q1: f64,
    q2: f64,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self { count: 0, s1: vec![0.0; d], s2: vec![0.0; d], s3: vec![0.0; d], s4: vec![0.0; d], q1: 0.0, q2: 0.0 }
    }

    fn push(&mut self, g: &[f64]) {
        self.count += 1;
        let mut q = 0.0;
        for (p, &x) in g.iter().enumerate() {
            let x2 = x * x;
            self.s1[p] += x;
            self.s2[p] += x2;
            self.s3[p] += x2 * x;
            self.s4[p] += x2 * x2;
            q += x2;
        }
        if !g.is_empty() {
            q /= g.len() as f64;
        }
        self.q1 += q;
        self.q2 += q * q;
    }

    fn merge(mut self, o: &Moments) -> Self {
        self.count += o.count;
        for p in 0..self.s1.len() {
            self.s1[p] += o.s1[p];
            self.s2[p] += o.s2[p];
            self.s3[p] += o.s3[p];
            self.s4[p] += o.s4[p];
        }
        self.q1 += o.q1;
        self.q2 += o.q2;
        self
    }
}

const CHUNK: usize = 256;

/// Per-parameter gradient mean and variance over `num_samples` random draws.
pub fn gradient_statistics(
    circuit: &Circuit,
    k: usize,
    input_mode: SampleMode,
    target_mode: SampleMode,
    num_samples: usize,
    seed: u64,
) -> Result<GradStats> {
    if num_samples < 2 {
        return Err(HwError::Invalid("need at least 2 samples".into()));
    }
    let cc = CompiledCircuit::new(circuit, k)?;
    let d = cc.dim();
    for mode in [input_mode, target_mode] {
        if let SampleMode::BasisPoint(i) = mode {
            if i >= d {
                return Err(domain!("basis point {i} out of range for d_k = {d}"));
            }
        }
    }
    let theory_var = theory_variance(circuit.n(), k)?;
    let l0 = match input_mode {
        SampleMode::BasisPoint(i) => lambda0(circuit, k, i)?,
        // a full-support random input reaches every state before any gate
        _ => 0,
    };
    let dd = cc.len();
    let chunks: Vec<Moments> = (0..num_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut local = cc.clone();
            let mut m = Moments::new(dd);
            let mut input = vec![0.0; d];
            let mut target = vec![0.0; d];
            let mut theta = vec![0.0; dd];
            for s in c * CHUNK..((c + 1) * CHUNK).min(num_samples) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                theta.iter_mut().for_each(|t| *t = rng.random::<f64>() * TAU);
                fill_state(&mut input, input_mode, &mut rng).expect("validated mode");
                fill_state(&mut target, target_mode, &mut rng).expect("validated mode");
                local.set_thetas(&theta).expect("angle count matches");
                let g = backprop_raw(&local, &input, &target);
                m.push(&g.grad);
            }
            m
        })
        .collect();
    let total = chunks.iter().skip(1).fold(chunks[0].clone(), |acc, m| acc.merge(m));

    let nf = num_samples as f64;
    let mut mean = Vec::with_capacity(dd);
    let mut var = Vec::with_capacity(dd);
    let mut se_mean = Vec::with_capacity(dd);
    let mut se_var = Vec::with_capacity(dd);
    for p in 0..dd {
        let mu = total.s1[p] / nf;
        let (e2, e3, e4) = (total.s2[p] / nf, total.s3[p] / nf, total.s4[p] / nf);
        let v = ((total.s2[p] - nf * mu * mu) / (nf - 1.0)).max(0.0);
        let m4 = e4 - 4.0 * mu * e3 + 6.0 * mu * mu * e2 - 3.0 * mu.powi(4);
        let pop_var = (e2 - mu * mu).max(0.0);
        mean.push(mu);
        var.push(v);
        se_mean.push((v / nf).sqrt());
        se_var.push(((m4 - pop_var * pop_var).max(0.0) / nf).sqrt());
    }
    let (pooled_var, pooled_var_stderr) = if dd == 0 {
        (0.0, 0.0)
    } else {
        let q_mean = total.q1 / nf;
        let q_var = ((total.q2 - nf * q_mean * q_mean) / (nf - 1.0)).max(0.0);
        let mean_sq = mean.iter().map(|m| m * m).sum::<f64>() / dd as f64;
        (q_mean - mean_sq, (q_var / nf).sqrt())
    };
    Ok(GradStats {
        per_param_mean: mean,
        per_param_var: var,
        stderr_mean: se_mean,
        stderr_var: se_var,
        pooled_var,
        pooled_var_stderr,
        samples: num_samples,
        theory_var,
        lambda0: l0,
    })
}

/// Weighted least-squares slope of `y` against `x` with per-point standard
/// errors; returns `(slope, stderr_of_slope)`.
pub fn weighted_slope(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(HwError::Invalid("need at least two points for a slope".into()));
    }
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, se) in points {
        if se.is_nan() || se <= 0.0 {
            return Err(HwError::Invalid(format!("non-positive standard error {se}")));
        }
        let w = 1.0 / (se * se);
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    let det = sw * swxx - swx * swx;
    if det <= 0.0 {
        return Err(HwError::Invalid("x values are degenerate".into()));
    }
    Ok(((sw * swxy - swx * swy) / det, (sw / det).sqrt()))
}

/// Parameter grid for a batch of [`gradient_statistics`] runs on the
/// periodic ansatz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    #[serde(alias = "L")]
    pub layers: Vec<usize>,
    pub gate: Vec<GateKind>,
    #[serde(default = "haar")]
    pub input_mode: SampleMode,
    #[serde(default = "haar")]
    pub target_mode: SampleMode,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn haar() -> SampleMode {
    SampleMode::HaarSphere
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub gate: GateKind,
    pub param_index: usize,
    pub mean: f64,
    pub var: f64,
    pub stderr: f64,
    pub theory_var: f64,
    pub lambda0: usize,
    pub layers: usize,
}

/// Runs every `(n, k, layers, gate)` combination; `k` values outside
/// `1..n` are skipped. Each combination gets a seed derived from the base seed.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let mut combo = 0u64;
    for &n in &spec.n {
        for &k in &spec.k {
            if k == 0 || k >= n {
                continue;
            }
            for &layers in &spec.layers {
                for &gate in &spec.gate {
                    let c = periodic_ansatz(n, layers, gate)?;
                    let seed = spec.seed.wrapping_add(combo.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    combo += 1;
                    let st = gradient_statistics(&c, k, spec.input_mode, spec.target_mode, spec.samples, seed)?;
                    for p in 0..c.len() {
                        rows.push(SweepRow {
                            n,
                            k,
                            gate,
                            param_index: p,
                            mean: st.per_param_mean[p],
                            var: st.per_param_var[p],
                            stderr: st.stderr_mean[p],
                            theory_var: st.theory_var,
                            lambda0: st.lambda0,
                            layers,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "n,k,gate,param_index,mean,var,stderr,theory_var,lambda0,layers";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
            r.n, r.k, r.gate, r.param_index, r.mean, r.var, r.stderr, r.theory_var, r.lambda0, r.layers
        );
    }
    out
}
