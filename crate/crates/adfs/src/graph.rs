//! Communication topologies, the augmented graph, and its spectral quantities.
//!
//! The optimization problem lives on a communication graph whose nodes hold
//! local finite sums. Each node is replaced by a star: the center keeps the
//! quadratic regularizer, and one leaf ("virtual node") is attached per local
//! sample. A graph with `n` nodes, `E` edges and `m` samples per node becomes
//! an augmented graph with `n(1+m)` nodes and `E + nm` edges.
//!
//! Every edge `(k, l)` of the augmented graph corresponds to one column
//! `mu_{kl} (e_k - e_l)` of an incidence-style matrix `A`. The solver only
//! ever touches two rows per step, so `A` is kept column-sparse; dense
//! matrices are assembled exclusively inside the spectral routines here.

use nalgebra::DMatrix;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Eigenvalues below `EIG_ZERO_REL * lambda_max` are treated as zero when
/// computing smallest positive eigenvalues and pseudo-inverses. Connected
/// graphs have a one-dimensional kernel, which this threshold separates
/// robustly at the matrix sizes we target (up to a few thousand).
pub const EIG_ZERO_REL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("need at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("grid2d needs a perfect square node count or explicit rows x cols, got {0}")]
    NotASquare(usize),
    #[error("grid dimensions {rows}x{cols} do not match node count {n}")]
    GridMismatch { rows: usize, cols: usize, n: usize },
    #[error("edge ({k}, {l}) out of range for {n} nodes")]
    EdgeOutOfRange { k: usize, l: usize, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("custom topology requires an edge list")]
    MissingEdges,
    #[error("edge weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("smoothness constants and regularization must be strictly positive")]
    NonPositiveCurvature,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An undirected communication edge with weight `mu^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub k: usize,
    pub l: usize,
    pub mu2: f64,
}

/// The communication graph: nodes are machines, edges carry weights `mu^2`.
///
/// Edges are stored canonically (`k < l`, lexicographically sorted, no
/// duplicates, no self-loops) and the graph is checked for connectivity at
/// construction. Immutable afterwards.
#[derive(Clone, Debug)]
pub struct CommGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl CommGraph {
    pub fn new(n: usize, raw_edges: Vec<(usize, usize, f64)>) -> Result<Self, GraphError> {
        if n < 1 {
            return Err(GraphError::TooFewNodes { min: 1, got: n });
        }
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (a, b, mu2) in raw_edges {
            if a >= n || b >= n {
                return Err(GraphError::EdgeOutOfRange { k: a, l: b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if mu2 <= 0.0 || !mu2.is_finite() {
                return Err(GraphError::NonPositiveWeight(mu2));
            }
            let (k, l) = if a < b { (a, b) } else { (b, a) };
            edges.push(Edge { k, l, mu2 });
        }
        edges.sort_by_key(|e| (e.k, e.l));
        for w in edges.windows(2) {
            if w[0].k == w[1].k && w[0].l == w[1].l {
                return Err(GraphError::DuplicateEdge(w[0].k, w[0].l));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.k].push(e.l);
            adjacency[e.l].push(e.k);
        }
        let graph = CommGraph { n, edges, adjacency };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    /// Degenerate single-machine graph (no communication edges).
    pub fn single_node() -> Self {
        CommGraph { n: 1, edges: Vec::new(), adjacency: vec![Vec::new()] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }

    /// Weighted graph Laplacian `L = A_comm A_comm^T` (size `n x n`).
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            lap[(e.k, e.k)] += e.mu2;
            lap[(e.l, e.l)] += e.mu2;
            lap[(e.k, e.l)] -= e.mu2;
            lap[(e.l, e.k)] -= e.mu2;
        }
        lap
    }
}

/// Topology families for [`build_topology`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    Complete,
    Ring,
    /// Square grid; node count must be a perfect square.
    Grid2d,
    /// Rectangular grid with explicit dimensions.
    Grid2dRect { rows: usize, cols: usize },
    /// Caller-supplied edge list.
    Custom,
}

/// Build one of the standard communication topologies with uniform edge
/// weight `mu2_default` (1/2 unless there is a reason to deviate).
pub fn build_topology(
    kind: Topology,
    n: usize,
    mu2_default: f64,
    custom_edges: Option<&[(usize, usize)]>,
) -> Result<CommGraph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes { min: 2, got: n });
    }
    let pairs: Vec<(usize, usize)> = match kind {
        Topology::Complete => {
            let mut p = Vec::with_capacity(n * (n - 1) / 2);
            for k in 0..n {
                for l in k + 1..n {
                    p.push((k, l));
                }
            }
            p
        }
        Topology::Ring => {
            if n == 2 {
                vec![(0, 1)]
            } else {
                let mut p: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
                p.push((0, n - 1));
                p
            }
        }
        Topology::Grid2d => {
            let r = (n as f64).sqrt().round() as usize;
            if r * r != n {
                return Err(GraphError::NotASquare(n));
            }
            grid_pairs(r, r)
        }
        Topology::Grid2dRect { rows, cols } => {
            if rows * cols != n {
                return Err(GraphError::GridMismatch { rows, cols, n });
            }
            grid_pairs(rows, cols)
        }
        Topology::Custom => custom_edges.ok_or(GraphError::MissingEdges)?.to_vec(),
    };
    CommGraph::new(n, pairs.into_iter().map(|(k, l)| (k, l, mu2_default)).collect())
}

fn grid_pairs(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut p = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                p.push((id, id + 1));
            }
            if r + 1 < rows {
                p.push((id, id + cols));
            }
        }
    }
    p
}

// ---------------------------------------------------------------------------
// Edge-list text format
// ---------------------------------------------------------------------------

/// Parse the edge-list text format: first line `n E`, then one `k l mu2`
/// line per edge, 0-indexed.
pub fn parse_edge_list(text: &str) -> Result<CommGraph, GraphError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (lno, header) = lines.next().ok_or(GraphError::Parse {
        line: 1,
        msg: "empty edge-list file".into(),
    })?;
    let mut it = header.split_whitespace();
    let n: usize = parse_field(it.next(), lno, "node count")?;
    let e: usize = parse_field(it.next(), lno, "edge count")?;
    let mut edges = Vec::with_capacity(e);
    for (lno, line) in lines {
        let mut it = line.split_whitespace();
        let k: usize = parse_field(it.next(), lno, "edge endpoint")?;
        let l: usize = parse_field(it.next(), lno, "edge endpoint")?;
        let mu2: f64 = parse_field(it.next(), lno, "edge weight")?;
        edges.push((k, l, mu2));
    }
    if edges.len() != e {
        return Err(GraphError::Parse {
            line: 1,
            msg: format!("header announces {e} edges but file has {}", edges.len()),
        });
    }
    CommGraph::new(n, edges)
}

fn parse_field<T: std::str::FromStr>(
    tok: Option<&str>,
    lno: usize,
    what: &str,
) -> Result<T, GraphError> {
    let tok = tok.ok_or_else(|| GraphError::Parse {
        line: lno + 1,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| GraphError::Parse {
        line: lno + 1,
        msg: format!("invalid {what}: {tok:?}"),
    })
}

pub fn format_edge_list(g: &CommGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", g.n(), g.num_edges());
    for e in g.edges() {
        let _ = writeln!(out, "{} {} {}", e.k, e.l, e.mu2);
    }
    out
}

pub fn read_edge_list(path: &Path) -> Result<CommGraph, GraphError> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

pub fn write_edge_list(path: &Path, g: &CommGraph) -> Result<(), GraphError> {
    Ok(std::fs::write(path, format_edge_list(g))?)
}

// ---------------------------------------------------------------------------
// Augmented graph
// ---------------------------------------------------------------------------

/// Rule for the virtual-edge weights `mu^2_{ij}`.
#[derive(Clone, Debug)]
pub enum VirtualWeights {
    /// `mu^2_{ij} = lambda_min^+(L) * L_{ij} / (sigma_bar * kappa_i)` with
    /// `sigma_bar = max_i sigma_i` and `kappa_i = 1 + sigma_i^{-1} sum_j L_{ij}`.
    /// This keeps the smallest positive eigenvalue of the augmented graph
    /// within a factor `2 sigma_bar kappa` of the base one.
    Standard,
    /// Caller-supplied weights, one per `(i, j)` in row-major order.
    Explicit(Vec<f64>),
}

/// The communication graph plus one star of `m` virtual nodes per machine.
///
/// Node indexing: centers `0..n`, then virtual node `(i, j)` at `n + i*m + j`.
/// Column indexing: communication edges first (in [`CommGraph::edges`] order),
/// then virtual edges in `(i, j)` row-major order.
#[derive(Clone, Debug)]
pub struct AugmentedGraph {
    pub base: CommGraph,
    pub m: usize,
    virtual_mu2: Vec<f64>,
    sigma_diag: Vec<f64>,
}

impl AugmentedGraph {
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn num_nodes(&self) -> usize {
        self.base.n() * (1 + self.m)
    }

    pub fn num_cols(&self) -> usize {
        self.base.num_edges() + self.base.n() * self.m
    }

    pub fn num_comm_cols(&self) -> usize {
        self.base.num_edges()
    }

    pub fn virtual_node(&self, i: usize, j: usize) -> usize {
        self.base.n() + i * self.m + j
    }

    /// Column of the virtual edge between center `i` and its `j`-th sample.
    pub fn virtual_col(&self, i: usize, j: usize) -> usize {
        self.base.num_edges() + i * self.m + j
    }

    /// Column of the communication edge `(k, l)`, if present.
    pub fn comm_col(&self, k: usize, l: usize) -> Option<usize> {
        let (k, l) = if k < l { (k, l) } else { (l, k) };
        self.base.edges().iter().position(|e| e.k == k && e.l == l)
    }

    pub fn is_virtual_col(&self, col: usize) -> bool {
        col >= self.base.num_edges()
    }

    /// `(i, j)` sample indices of a virtual column.
    pub fn virtual_col_sample(&self, col: usize) -> (usize, usize) {
        let v = col - self.base.num_edges();
        (v / self.m, v % self.m)
    }

    /// Endpoints of a column in augmented node ids, `(smaller, larger)`.
    pub fn col_endpoints(&self, col: usize) -> (usize, usize) {
        if col < self.base.num_edges() {
            let e = self.base.edges()[col];
            (e.k, e.l)
        } else {
            let (i, j) = self.virtual_col_sample(col);
            (i, self.virtual_node(i, j))
        }
    }

    pub fn col_mu2(&self, col: usize) -> f64 {
        if col < self.base.num_edges() {
            self.base.edges()[col].mu2
        } else {
            self.virtual_mu2[col - self.base.num_edges()]
        }
    }

    /// Diagonal of `Sigma`: `sigma_i` at centers, `L_{ij}` at virtual nodes.
    pub fn sigma_diag(&self) -> &[f64] {
        &self.sigma_diag
    }

    pub fn sigma(&self, node: usize) -> f64 {
        self.sigma_diag[node]
    }

    pub fn sigma_inv(&self, node: usize) -> f64 {
        1.0 / self.sigma_diag[node]
    }

    pub fn l_smooth(&self, i: usize, j: usize) -> f64 {
        self.sigma_diag[self.virtual_node(i, j)]
    }

    /// Dense incidence-style matrix `A` (column `mu_{kl} (e_k - e_l)`).
    /// Test and diagnostic use only; the solver never assembles it.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.num_nodes(), self.num_cols());
        for c in 0..self.num_cols() {
            let (k, l) = self.col_endpoints(c);
            let mu = self.col_mu2(c).sqrt();
            a[(k, c)] = mu;
            a[(l, c)] = -mu;
        }
        a
    }
}

/// Attach `m` virtual nodes per machine and assemble `Sigma`.
///
/// `l_smooth` is row-major `n x m` (sample smoothness constants), `sigma`
/// has one regularization constant per machine.
pub fn augment(
    base: &CommGraph,
    l_smooth: &[f64],
    sigma: &[f64],
    rule: VirtualWeights,
) -> Result<AugmentedGraph, GraphError> {
    let n = base.n();
    if sigma.len() != n {
        return Err(GraphError::LengthMismatch { expected: n, got: sigma.len() });
    }
    if !l_smooth.len().is_multiple_of(n) || l_smooth.is_empty() {
        return Err(GraphError::LengthMismatch { expected: n, got: l_smooth.len() });
    }
    let m = l_smooth.len() / n;
    if l_smooth.iter().any(|&l| l <= 0.0 || !l.is_finite())
        || sigma.iter().any(|&s| s <= 0.0 || !s.is_finite())
    {
        return Err(GraphError::NonPositiveCurvature);
    }
    let virtual_mu2 = match rule {
        VirtualWeights::Standard => {
            let sigma_bar = sigma.iter().cloned().fold(f64::MIN, f64::max);
            // For a single machine the base graph has no spectrum to preserve;
            // the weight degenerates to L_{ij} / kappa_i.
            let lambda_l = if base.num_edges() == 0 {
                sigma_bar
            } else {
                let eig = base.laplacian().symmetric_eigen();
                lambda_min_pos(eig.eigenvalues.as_slice())
            };
            let mut mu2 = Vec::with_capacity(n * m);
            for i in 0..n {
                let row = &l_smooth[i * m..(i + 1) * m];
                let kappa_i = 1.0 + row.iter().sum::<f64>() / sigma[i];
                for &l in row {
                    mu2.push(lambda_l * l / (sigma_bar * kappa_i));
                }
            }
            mu2
        }
        VirtualWeights::Explicit(mu2) => {
            if mu2.len() != n * m {
                return Err(GraphError::LengthMismatch { expected: n * m, got: mu2.len() });
            }
            if mu2.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
                return Err(GraphError::NonPositiveWeight(
                    mu2.iter().cloned().find(|&w| w <= 0.0 || !w.is_finite()).unwrap(),
                ));
            }
            mu2
        }
    };
    let mut sigma_diag = Vec::with_capacity(n * (1 + m));
    sigma_diag.extend_from_slice(sigma);
    sigma_diag.extend_from_slice(l_smooth);
    Ok(AugmentedGraph { base: base.clone(), m, virtual_mu2, sigma_diag })
}

// ---------------------------------------------------------------------------
// Spectral quantities
// ---------------------------------------------------------------------------

/// Everything the rate formula and the step sizes need to know about the
/// spectrum of the augmented graph.
#[derive(Clone, Debug)]
pub struct SpectralData {
    /// `lambda_min^+(A^T Sigma^{-1} A)`: strong convexity of the dual smooth
    /// part on the orthogonal of `Ker(A)`.
    pub sigma_a: f64,
    /// `lambda_max(A^T Sigma^{-2} A)`, the constant in the error envelope.
    pub lambda_max_a2: f64,
    /// Effective resistance `R_{kl} = e_{kl}^T A^+ A e_{kl}` per column.
    pub resistance: Vec<f64>,
    /// Eigengap `lambda_min^+(L) / lambda_max(L)` of the communication
    /// Laplacian (1 for a single machine).
    pub gamma: f64,
    /// Edge-normalized eigengap
    /// `min_{(k,l) comm} lambda_min^+(L) n^2 / (mu^2_{kl} R_{kl} E^2)`
    /// (infinite when there are no communication edges).
    pub gamma_tilde: f64,
    /// `lambda_min^+(L)` of the communication Laplacian (0 for one machine).
    pub lambda_min_l: f64,
    /// Set when `sigma_a` is numerically zero (below 1e-12 relative).
    pub degenerate: bool,
}

/// Scaled augmented Laplacian `diag(s) A A^T diag(s)` for a node scaling `s`.
fn scaled_laplacian(aug: &AugmentedGraph, scale: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let nn = aug.num_nodes();
    let mut lap = DMatrix::zeros(nn, nn);
    for c in 0..aug.num_cols() {
        let (k, l) = aug.col_endpoints(c);
        let mu2 = aug.col_mu2(c);
        let (sk, sl) = (scale(k), scale(l));
        lap[(k, k)] += mu2 * sk * sk;
        lap[(l, l)] += mu2 * sl * sl;
        lap[(k, l)] -= mu2 * sk * sl;
        lap[(l, k)] -= mu2 * sk * sl;
    }
    lap
}

pub(crate) fn lambda_min_pos(values: &[f64]) -> f64 {
    let lmax = values.iter().cloned().fold(f64::MIN, f64::max);
    let thresh = EIG_ZERO_REL * lmax.max(0.0);
    values
        .iter()
        .cloned()
        .filter(|&v| v > thresh)
        .fold(f64::INFINITY, f64::min)
}

/// Dense-eigendecomposition computation of all spectral quantities.
pub fn spectral_quantities(aug: &AugmentedGraph) -> SpectralData {
    // sigma_a from the node-side matrix Sigma^{-1/2} A A^T Sigma^{-1/2},
    // which shares its nonzero spectrum with A^T Sigma^{-1} A.
    let l_tilde = scaled_laplacian(aug, |node| aug.sigma_inv(node).sqrt());
    let eig = l_tilde.symmetric_eigen();
    let lmax_tilde = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let sigma_a = lambda_min_pos(eig.eigenvalues.as_slice());
    let degenerate = sigma_a < 1e-12 * lmax_tilde;

    let lambda_max_a2 = {
        let m2 = scaled_laplacian(aug, |node| aug.sigma_inv(node));
        let eig = m2.symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max)
    };

    // R through the pseudo-inverse of A A^T:
    // R_c = mu2_c * (e_k - e_l)^T (A A^T)^+ (e_k - e_l).
    let resistance: Vec<f64> = {
        let lap = scaled_laplacian(aug, |_| 1.0);
        let eig = lap.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let thresh = EIG_ZERO_REL * lmax;
        let vals = eig.eigenvalues;
        let vecs = eig.eigenvectors;
        (0..aug.num_cols())
            .map(|c| {
                let (k, l) = aug.col_endpoints(c);
                let mut r = 0.0;
                for idx in 0..vals.len() {
                    if vals[idx] > thresh {
                        let u = vecs[(k, idx)] - vecs[(l, idx)];
                        r += u * u / vals[idx];
                    }
                }
                aug.col_mu2(c) * r
            })
            .collect()
    };

    let e_comm = aug.num_comm_cols();
    let (lambda_min_l, gamma) = if e_comm == 0 {
        (0.0, 1.0)
    } else {
        let eig = aug.base.laplacian().symmetric_eigen();
        let lmin = lambda_min_pos(eig.eigenvalues.as_slice());
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        (lmin, lmin / lmax)
    };

    let n = aug.n() as f64;
    let gamma_tilde = if e_comm == 0 {
        f64::INFINITY
    } else {
        (0..e_comm)
            .map(|c| {
                lambda_min_l * n * n
                    / (aug.col_mu2(c) * resistance[c] * (e_comm * e_comm) as f64)
            })
            .fold(f64::INFINITY, f64::min)
    };

    SpectralData {
        sigma_a,
        lambda_max_a2,
        resistance,
        gamma,
        gamma_tilde,
        lambda_min_l,
        degenerate,
    }
}

/// `lambda_min^+(A^T Sigma^{-1} A)` computed on the edge side. Agrees with
/// [`SpectralData::sigma_a`] up to eigensolver tolerance; kept as an
/// independent cross-check of the node-side computation.
pub fn edge_side_sigma_a(aug: &AugmentedGraph) -> f64 {
    let a = aug.incidence_matrix();
    let mut scaled = a.clone();
    for (node, mut row) in scaled.row_iter_mut().enumerate() {
        row *= aug.sigma_inv(node);
    }
    let q = a.transpose() * scaled;
    let eig = q.symmetric_eigen();
    lambda_min_pos(eig.eigenvalues.as_slice())
}

/// Both sides of the eigenvalue lower bound that the standard virtual
/// weights guarantee: `lambda_min^+(L_tilde) >= lambda_min^+(L) / (2 sigma kappa)`
/// with `L_tilde = Sigma^{-1/2} A A^T Sigma^{-1/2}`, `sigma = max_i sigma_i`
/// and `kappa = max_i kappa_i`. Diagnostic only; the solver path never
/// consults the bound.
#[derive(Clone, Copy, Debug)]
pub struct GapBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn gap_preservation_report(aug: &AugmentedGraph) -> GapBoundReport {
    let l_tilde = scaled_laplacian(aug, |node| aug.sigma_inv(node).sqrt());
    let eig = l_tilde.symmetric_eigen();
    let lhs = lambda_min_pos(eig.eigenvalues.as_slice());

    let n = aug.n();
    let m = aug.m;
    let sigma_bar = (0..n).map(|i| aug.sigma(i)).fold(f64::MIN, f64::max);
    let kappa_max = (0..n)
        .map(|i| 1.0 + (0..m).map(|j| aug.l_smooth(i, j)).sum::<f64>() / aug.sigma(i))
        .fold(f64::MIN, f64::max);
    let lambda_l = if aug.num_comm_cols() == 0 {
        sigma_bar
    } else {
        let eig = aug.base.laplacian().symmetric_eigen();
        lambda_min_pos(eig.eigenvalues.as_slice())
    };
    let rhs = lambda_l / (2.0 * sigma_bar * kappa_max);
    GapBoundReport { lhs, rhs, holds: lhs >= rhs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3(mu2: f64) -> CommGraph {
        build_topology(Topology::Complete, 3, mu2, None).unwrap()
    }

    #[test]
    fn complete_three_nodes() {
        let g = k3(0.5);
        assert_eq!(g.num_edges(), 3);
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.k, e.l)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn grid_2x2_has_four_edges() {
        let g = build_topology(Topology::Grid2d, 4, 0.5, None).unwrap();
        assert_eq!(g.num_edges(), 4);
    }

    #[test]
    fn ring_five_all_degree_two() {
        let g = build_topology(Topology::Ring, 5, 0.5, None).unwrap();
        assert_eq!(g.num_edges(), 5);
        for node in 0..5 {
            assert_eq!(g.neighbors(node).len(), 2);
        }
    }

    #[test]
    fn rejects_small_and_disconnected() {
        assert!(build_topology(Topology::Complete, 1, 0.5, None).is_err());
        let disconnected = build_topology(Topology::Custom, 4, 0.5, Some(&[(0, 1), (2, 3)]));
        assert!(matches!(disconnected, Err(GraphError::Disconnected)));
    }

    #[test]
    fn augment_counts_and_column_index() {
        let g = k3(0.5);
        let aug = augment(&g, &[1.0; 6], &[1.0; 3], VirtualWeights::Standard).unwrap();
        assert_eq!(aug.num_nodes(), 9);
        assert_eq!(aug.num_cols(), 9);
        assert_eq!(aug.comm_col(2, 1), Some(2));
        assert_eq!(aug.comm_col(0, 0), None);
        assert_eq!(aug.virtual_col(1, 1), 3 + 3);
        assert_eq!(aug.col_endpoints(aug.virtual_col(1, 1)), (1, aug.virtual_node(1, 1)));
    }

    #[test]
    fn augment_single_machine_star() {
        let g = CommGraph::single_node();
        let aug = augment(&g, &[1.0; 4], &[1.0], VirtualWeights::Standard).unwrap();
        assert_eq!(aug.num_nodes(), 5);
        assert_eq!(aug.num_cols(), 4);
        assert_eq!(aug.num_comm_cols(), 0);
    }

    #[test]
    fn standard_rule_matches_hand_computation() {
        // K3 with mu2 = 1/2, unit L and sigma, m = 2:
        // lambda_min^+(L) = 1.5, kappa_i = 3, so mu2_ij = 1.5 / 3 = 0.5.
        let g = k3(0.5);
        let aug = augment(&g, &[1.0; 6], &[1.0; 3], VirtualWeights::Standard).unwrap();
        for c in aug.num_comm_cols()..aug.num_cols() {
            assert!((aug.col_mu2(c) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn augment_rejects_nonpositive() {
        let g = k3(0.5);
        assert!(augment(&g, &[1.0, -1.0, 1.0, 1.0, 1.0, 1.0], &[1.0; 3], VirtualWeights::Standard)
            .is_err());
        assert!(augment(&g, &[1.0; 6], &[0.0; 3], VirtualWeights::Standard).is_err());
    }

    #[test]
    fn incidence_columns_sum_to_zero() {
        let g = k3(0.5);
        let aug = augment(&g, &[2.0, 1.0, 0.5, 3.0, 1.5, 0.7], &[1.0, 2.0, 0.5],
            VirtualWeights::Standard).unwrap();
        let a = aug.incidence_matrix();
        for c in 0..aug.num_cols() {
            let col = a.column(c);
            let nonzero: Vec<f64> = col.iter().cloned().filter(|v| *v != 0.0).collect();
            assert_eq!(nonzero.len(), 2);
            assert!((nonzero[0] + nonzero[1]).abs() < 1e-15);
            assert!((col.sum()).abs() < 1e-15);
            let mu = aug.col_mu2(c).sqrt();
            assert!((nonzero[0].abs() - mu).abs() < 1e-12);
        }
    }

    #[test]
    fn k3_spectrum_and_resistance() {
        let g = k3(0.5);
        let aug = augment(&g, &[1.0; 6], &[1.0; 3], VirtualWeights::Standard).unwrap();
        let spec = spectral_quantities(&aug);
        assert!((spec.lambda_min_l - 1.5).abs() < 1e-10);
        for c in 0..aug.num_comm_cols() {
            assert!((spec.resistance[c] - 2.0 / 3.0).abs() < 1e-10);
        }
        // Virtual edges dangle from the cycle structure, so R = 1.
        for c in aug.num_comm_cols()..aug.num_cols() {
            assert!((spec.resistance[c] - 1.0).abs() < 1e-10);
        }
        // gamma of K3 is 1 (eigenvalues {0, 1.5, 1.5}); gamma_tilde for the
        // complete family is 2 gamma n^2 / (n-1)^2.
        assert!((spec.gamma - 1.0).abs() < 1e-10);
        assert!((spec.gamma_tilde - 4.5).abs() < 1e-9);
    }

    #[test]
    fn tree_edges_have_unit_resistance() {
        let g = build_topology(Topology::Custom, 4, 0.5, Some(&[(0, 1), (1, 2), (1, 3)])).unwrap();
        let aug = augment(&g, &[1.0; 8], &[1.0; 4], VirtualWeights::Standard).unwrap();
        let spec = spectral_quantities(&aug);
        for r in &spec.resistance {
            assert!((r - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_a_agrees_on_both_sides() {
        let g = k3(0.5);
        let aug = augment(&g, &[0.3, 1.0, 2.0, 0.7, 1.3, 0.9], &[1.0, 0.4, 2.5],
            VirtualWeights::Standard).unwrap();
        let spec = spectral_quantities(&aug);
        let edge_side = edge_side_sigma_a(&aug);
        assert!((spec.sigma_a - edge_side).abs() <= 1e-10 * spec.sigma_a.max(1.0));
    }

    #[test]
    fn gamma_tilde_dominates_gamma_for_complete_family() {
        for n in [3usize, 4, 6, 8] {
            let g = build_topology(Topology::Complete, n, 0.5, None).unwrap();
            let aug = augment(&g, &vec![1.0; n * 2], &vec![1.0; n], VirtualWeights::Standard)
                .unwrap();
            let spec = spectral_quantities(&aug);
            let nf = n as f64;
            let predicted = 2.0 * spec.gamma * nf * nf / ((nf - 1.0) * (nf - 1.0));
            assert!((spec.gamma_tilde - predicted).abs() < 1e-8 * predicted);
            assert!(spec.gamma_tilde >= spec.gamma);
        }
    }

    #[test]
    fn gamma_tilde_vs_gamma_for_grids() {
        for n in [4usize, 9, 16] {
            let g = build_topology(Topology::Grid2d, n, 0.5, None).unwrap();
            let aug = augment(&g, &vec![1.0; n * 2], &vec![1.0; n], VirtualWeights::Standard)
                .unwrap();
            let spec = spectral_quantities(&aug);
            // Grids are a regular family: same-order eigengaps.
            assert!(spec.gamma_tilde >= spec.gamma);
        }
    }

    #[test]
    fn gap_bound_on_k3_and_single_machine() {
        let g = k3(0.5);
        let aug = augment(&g, &[1.0; 6], &[1.0; 3], VirtualWeights::Standard).unwrap();
        let report = gap_preservation_report(&aug);
        assert!(report.holds, "lhs={} rhs={}", report.lhs, report.rhs);

        let star = augment(&CommGraph::single_node(), &[1.0, 1.0], &[1.0],
            VirtualWeights::Standard).unwrap();
        let report = gap_preservation_report(&star);
        // Hand check: L_tilde of the 3-node star with mu2 = 1/3 has spectrum
        // {0, 1/3, 1}; the bound is 1 / (2 * 3) = 1/6.
        assert!((report.lhs - 1.0 / 3.0).abs() < 1e-10);
        assert!((report.rhs - 1.0 / 6.0).abs() < 1e-12);
        assert!(report.holds);
    }

    #[test]
    fn explicit_standard_weights_give_identical_report() {
        let g = k3(0.5);
        let aug_std = augment(&g, &[1.0; 6], &[1.0; 3], VirtualWeights::Standard).unwrap();
        let weights: Vec<f64> = (aug_std.num_comm_cols()..aug_std.num_cols())
            .map(|c| aug_std.col_mu2(c))
            .collect();
        let aug_exp = augment(&g, &[1.0; 6], &[1.0; 3], VirtualWeights::Explicit(weights))
            .unwrap();
        let (a, b) = (gap_preservation_report(&aug_std), gap_preservation_report(&aug_exp));
        assert_eq!(a.lhs.to_bits(), b.lhs.to_bits());
        assert_eq!(a.rhs.to_bits(), b.rhs.to_bits());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = build_topology(Topology::Grid2d, 9, 0.5, None).unwrap();
        let text = format_edge_list(&g);
        assert!(text.starts_with("9 12\n"));
        let parsed = parse_edge_list(&text).unwrap();
        assert_eq!(parsed.n(), 9);
        assert_eq!(parsed.edges(), g.edges());
    }

    #[test]
    fn edge_list_parse_errors() {
        assert!(parse_edge_list("").is_err());
        assert!(matches!(
            parse_edge_list("2 1\n0 zzz 0.5"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(parse_edge_list("2 2\n0 1 0.5").is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random connected graph: a random spanning tree plus extras.
        fn arb_graph() -> impl Strategy<Value = CommGraph> {
            (2usize..7, proptest::collection::vec(0usize..100, 1..12), 0u64..1000).prop_map(
                |(n, extras, _salt)| {
                    let mut pairs: Vec<(usize, usize)> = (1..n).map(|v| (v / 2, v)).collect();
                    for e in extras {
                        let k = e % n;
                        let l = (e / n) % n;
                        if k != l && !pairs.contains(&(k.min(l), k.max(l))) {
                            pairs.push((k.min(l), k.max(l)));
                        }
                    }
                    build_topology(Topology::Custom, n, 0.5, Some(&pairs)).unwrap()
                },
            )
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn edge_list_round_trips(g in arb_graph()) {
                let parsed = parse_edge_list(&format_edge_list(&g)).unwrap();
                prop_assert_eq!(parsed.n(), g.n());
                prop_assert_eq!(parsed.edges(), g.edges());
            }

            #[test]
            fn incidence_columns_are_two_point_balanced(
                g in arb_graph(),
                m in 1usize..4,
                l_seed in 1u64..500,
            ) {
                let n = g.n();
                let l: Vec<f64> = (0..n * m)
                    .map(|i| 0.1 + ((l_seed.wrapping_mul(i as u64 + 1) % 97) as f64) / 10.0)
                    .collect();
                let aug = augment(&g, &l, &vec![1.0; n], VirtualWeights::Standard).unwrap();
                let a = aug.incidence_matrix();
                for c in 0..aug.num_cols() {
                    let col = a.column(c);
                    let mu = aug.col_mu2(c).sqrt();
                    let (k, lnode) = aug.col_endpoints(c);
                    for (node, &val) in col.iter().enumerate() {
                        if node == k {
                            prop_assert!((val - mu).abs() < 1e-12);
                        } else if node == lnode {
                            prop_assert!((val + mu).abs() < 1e-12);
                        } else {
                            prop_assert_eq!(val, 0.0);
                        }
                    }
                    prop_assert!(col.sum().abs() < 1e-12);
                }
                // virtual edges hang off the tree: unit resistance
                let spec = spectral_quantities(&aug);
                for c in aug.num_comm_cols()..aug.num_cols() {
                    prop_assert!((spec.resistance[c] - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}
