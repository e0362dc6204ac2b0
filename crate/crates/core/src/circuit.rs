//! Gates, circuits, connectivity graphs and their JSON file formats.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, HwError, Result};

/// Version tag carried by every structured artifact this crate writes.
pub const SCHEMA: &str = "hwsim/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Rbs,
    Fbs,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::Rbs => "rbs",
            GateKind::Fbs => "fbs",
        })
    }
}

impl FromStr for GateKind {
    type Err = HwError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbs" => Ok(GateKind::Rbs),
            "fbs" => Ok(GateKind::Fbs),
            other => Err(HwError::Invalid(format!("unknown gate kind '{other}'"))),
        }
    }
}

/// One parameterized two-qubit gate on qubits `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub i: usize,
    pub j: usize,
    pub theta: f64,
}

impl Gate {
    pub fn new(kind: GateKind, i: usize, j: usize, theta: f64) -> Self {
        Self { kind, i, j, theta }
    }

    pub fn rbs(i: usize, j: usize, theta: f64) -> Self {
        Self::new(GateKind::Rbs, i, j, theta)
    }

    pub fn fbs(i: usize, j: usize, theta: f64) -> Self {
        Self::new(GateKind::Fbs, i, j, theta)
    }

    pub fn edge(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

pub(crate) fn check_edge(n: usize, i: usize, j: usize) -> Result<()> {
    if i >= j {
        return Err(domain!("gate qubits must satisfy i < j, got ({i}, {j})"));
    }
    if j >= n {
        return Err(domain!("gate qubit {j} out of range for {n} qubits"));
    }
    Ok(())
}

/// Ordered gate list on `n` qubits; one variational angle per gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitFile", into = "CircuitFile")]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
    connectivity: Option<Vec<(usize, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    n: usize,
    gates: Vec<Gate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    connectivity: Option<Vec<(usize, usize)>>,
}

impl TryFrom<CircuitFile> for Circuit {
    type Error = HwError;
    fn try_from(f: CircuitFile) -> Result<Self> {
        if let Some(s) = &f.schema {
            if s != SCHEMA {
                return Err(HwError::Invalid(format!("unsupported schema '{s}'")));
            }
        }
        let mut c = match f.connectivity {
            Some(edges) => Circuit::with_connectivity(f.n, edges)?,
            None => Circuit::new(f.n)?,
        };
        for (pos, g) in f.gates.into_iter().enumerate() {
            c.push(g)
                .map_err(|e| HwError::Invalid(format!("gates[{pos}]: {e}")))?;
        }
        Ok(c)
    }
}

impl From<Circuit> for CircuitFile {
    fn from(c: Circuit) -> Self {
        CircuitFile {
            schema: Some(SCHEMA.to_string()),
            n: c.n,
            gates: c.gates,
            connectivity: c.connectivity,
        }
    }
}

impl Circuit {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > crate::basis::MAX_QUBITS {
            return Err(domain!("unsupported qubit count {n}"));
        }
        Ok(Self { n, gates: Vec::new(), connectivity: None })
    }

    /// Empty circuit that only accepts gates on the listed edges.
    pub fn with_connectivity(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut c = Self::new(n)?;
        let mut edges: Vec<_> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        for &(i, j) in &edges {
            check_edge(n, i, j)?;
        }
        edges.sort_unstable();
        edges.dedup();
        c.connectivity = Some(edges);
        Ok(c)
    }

    pub fn from_gates(n: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Self::new(n)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of gates, which is also the number of parameters.
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn connectivity(&self) -> Option<&[(usize, usize)]> {
        self.connectivity.as_deref()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        check_edge(self.n, gate.i, gate.j)?;
        if let Some(edges) = &self.connectivity {
            if edges.binary_search(&(gate.i, gate.j)).is_err() {
                return Err(domain!(
                    "gate on ({}, {}) is not an edge of the connectivity graph",
                    gate.i,
                    gate.j
                ));
            }
        }
        if !gate.theta.is_finite() {
            return Err(HwError::Invalid(format!("non-finite angle {}", gate.theta)));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn remove(&mut self, pos: usize) -> Gate {
        self.gates.remove(pos)
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.gates.iter().map(|g| g.theta).collect()
    }

    pub fn set_thetas(&mut self, thetas: &[f64]) -> Result<()> {
        if thetas.len() != self.gates.len() {
            return Err(crate::error::dim_mismatch!(
                "{} angles for {} gates",
                thetas.len(),
                self.gates.len()
            ));
        }
        for (g, &t) in self.gates.iter_mut().zip(thetas) {
            g.theta = t;
        }
        Ok(())
    }

    pub fn with_thetas(&self, thetas: &[f64]) -> Result<Self> {
        let mut c = self.clone();
        c.set_thetas(thetas)?;
        Ok(c)
    }

    /// Same gates with every gate switched to `kind`.
    pub fn with_kind(&self, kind: GateKind) -> Self {
        let mut c = self.clone();
        c.gates.iter_mut().for_each(|g| g.kind = kind);
        c
    }

    pub fn kinds(&self) -> BTreeSet<GateKind> {
        self.gates.iter().map(|g| g.kind).collect()
    }

    /// Number of parallel layers under greedy as-soon-as-possible scheduling.
    pub fn depth(&self) -> usize {
        let mut ready = vec![0usize; self.n];
        for g in &self.gates {
            let t = ready[g.i].max(ready[g.j]) + 1;
            ready[g.i] = t;
            ready[g.j] = t;
        }
        ready.into_iter().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| HwError::Invalid(format!("circuit JSON: {e}")))
    }
}

/// Undirected qubit connectivity graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GraphFile {
    Object { n: Option<usize>, edges: Vec<(usize, usize)> },
    List(Vec<(usize, usize)>),
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out: Vec<_> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        for &(i, j) in &out {
            check_edge(n, i, j)?;
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self { n, edges: out })
    }

    /// Nearest-neighbour chain `0-1-...-(n-1)`.
    pub fn line(n: usize) -> Self {
        Self { n, edges: (1..n).map(|q| (q - 1, q)).collect() }
    }

    pub fn ring(n: usize) -> Self {
        let mut g = Self::line(n);
        if n > 2 {
            g.edges.push((0, n - 1));
            g.edges.sort_unstable();
        }
        g
    }

    pub fn full(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self { n, edges }
    }

    /// Five qubits cut from two neighbouring octagon rings of an Aspen-style
    /// lattice: the chain 0-1-2 on one ring, 3-4 on the other, and the two
    /// inter-ring couplers (1,4), (2,3). Qubits 1-2-3-4 form a square with 0 pendant.
    pub fn aspen5() -> Self {
        Self::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)]).expect("static graph")
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    /// Parse `{"n": 5, "edges": [[0,1], ...]}` or a bare `[[0,1], ...]` list.
    pub fn from_json(s: &str) -> Result<Self> {
        let parsed: GraphFile =
            serde_json::from_str(s).map_err(|e| HwError::Invalid(format!("graph JSON: {e}")))?;
        let (n, edges) = match parsed {
            GraphFile::Object { n, edges } => (n, edges),
            GraphFile::List(edges) => (None, edges),
        };
        let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        let n = n.unwrap_or(inferred);
        if n == 0 {
            return Err(HwError::Invalid("graph has no qubits".into()));
        }
        Graph::new(n, edges)
    }
}
