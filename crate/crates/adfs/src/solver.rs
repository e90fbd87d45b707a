//! The decentralized finite-sum solver on the augmented graph.
//!
//! Each iteration samples one edge of the augmented graph. A communication
//! edge makes its two centers exchange parameters and take a weighted
//! difference; a virtual edge runs a single-sample proximal update against
//! its center. All remaining nodes only take convex combinations of their
//! own `(x, v)` pair, which commute and can be applied lazily in closed form
//! right before a node is touched again.
//!
//! Two executions of the same schedule are provided: a dense one that
//! materializes every line of the update literally (the testing oracle, also
//! usable with nonlinear losses), and a sparse one that touches two nodes per
//! step and stores virtual nodes as two scalars along their feature
//! direction (the product path for linear models).

use crate::apcg::make_schedule_cvx;
use crate::graph::{lambda_min_pos, AugmentedGraph, CommGraph, SpectralData};
use crate::problem::{
    prox_conjugate_tilde_coeff, prox_conjugate_tilde_vec, prox_conjugate_vec, scalar_conjugate,
    ProblemSpec, ProxError,
};
use crate::schedule::sample_categorical_sequence;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("communication probability {0} outside (0, 1)")]
    PcommOutOfRange(f64),
    #[error("cannot override the communication probability of a single-machine graph")]
    OverrideWithoutCommEdges,
    #[error("spectrum is degenerate (sigma_a numerically zero)")]
    DegenerateSpectrum,
    #[error("plan and problem shapes disagree: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Prox(#[from] ProxError),
}

/// Edge sampling probabilities, the contraction factor `rho`, and the
/// per-edge step sizes `eta~_{kl} = rho mu^2_{kl} / (sigma_a p_{kl})`.
#[derive(Clone, Debug)]
pub struct SamplingPlan {
    /// Per-column probability (communication columns first).
    pub p: Vec<f64>,
    pub p_comm: f64,
    pub p_comp: f64,
    /// Contraction factor after the conjugate-prox validity clamp.
    pub rho: f64,
    /// Largest factor the per-edge rate minimum allows, before clamping.
    pub rho_unclamped: f64,
    /// Set when the validity clamp `rho <= (kappa_i / 2 kappa_s) p_ij` bound.
    pub rho_clamped: bool,
    /// Per-column step size.
    pub eta_t: Vec<f64>,
    /// Per-column projector diagonal, copied from the spectral data.
    pub r: Vec<f64>,
    pub sigma_a: f64,
    /// Uniformity of communication probabilities:
    /// `min_{kl} p_{kl} E / p_comm` (1 for the uniform choice).
    pub delta_p: f64,
    /// `p_comm_max / p_comm`.
    pub c_tau: f64,
    /// `n max_k sum_{l in N(k)} p_{kl} / 2`.
    pub p_comm_max: f64,
    /// Communication delay this plan is intended to run under.
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub p_comm: Option<f64>,
}

/// Probabilities and step sizes for a problem/graph pair:
/// `p_comm = min(1/2, (1 + S_comp sqrt(gamma~ / kappa_s))^{-1})`,
/// uniform `p_comm / E` on communication edges,
/// `p_comp (1 + L_ij / sigma_i)^{1/2} / (n S_comp)` on virtual edges.
/// `rho` is the root of the per-edge rate minimum, clamped to
/// `min_ij (kappa_i / 2 kappa_s) p_ij` so that every conjugate prox step
/// stays valid.
pub fn select_parameters(
    aug: &AugmentedGraph,
    spectra: &SpectralData,
    summary: &crate::problem::SmoothnessSummary,
    tau: f64,
    overrides: Overrides,
) -> Result<SamplingPlan, PlanError> {
    let n = aug.n();
    let m = aug.m;
    let e = aug.num_comm_cols();
    if summary.kappa.len() != n {
        return Err(PlanError::ShapeMismatch(format!(
            "summary has {} nodes, graph has {n}",
            summary.kappa.len()
        )));
    }
    if spectra.resistance.len() != aug.num_cols() {
        return Err(PlanError::ShapeMismatch("spectra/graph column counts differ".into()));
    }
    if spectra.degenerate {
        return Err(PlanError::DegenerateSpectrum);
    }

    let p_comm = if e == 0 {
        if overrides.p_comm.is_some() {
            return Err(PlanError::OverrideWithoutCommEdges);
        }
        0.0
    } else {
        let natural =
            0.5f64.min(1.0 / (1.0 + summary.s_comp * (spectra.gamma_tilde / summary.kappa_s).sqrt()));
        let chosen = overrides.p_comm.unwrap_or(natural);
        if !(chosen > 0.0 && chosen < 1.0) {
            return Err(PlanError::PcommOutOfRange(chosen));
        }
        chosen
    };
    let p_comp = 1.0 - p_comm;

    let mut p = vec![0.0; aug.num_cols()];
    for pc in p.iter_mut().take(e) {
        *pc = p_comm / e as f64;
    }
    let sigma = aug.sigma_diag();
    for i in 0..n {
        for j in 0..m {
            let l_ij = aug.l_smooth(i, j);
            p[e + i * m + j] =
                p_comp * (1.0 + l_ij / sigma[i]).sqrt() / (n as f64 * summary.s_comp);
        }
    }

    // Per-edge rate: sigma_a / (Sigma_kk^{-1} + Sigma_ll^{-1}) * p^2 / (mu^2 R).
    let mut rho_sq = f64::INFINITY;
    for (c, &p_c) in p.iter().enumerate() {
        let (k, l) = aug.col_endpoints(c);
        let curv = 1.0 / sigma[k] + 1.0 / sigma[l];
        let val = spectra.sigma_a / curv * p_c * p_c
            / (aug.col_mu2(c) * spectra.resistance[c]);
        rho_sq = rho_sq.min(val);
    }
    let rho_unclamped = rho_sq.sqrt();
    let mut rho_clamp = f64::INFINITY;
    for i in 0..n {
        for j in 0..m {
            rho_clamp = rho_clamp.min(summary.kappa[i] / (2.0 * summary.kappa_s) * p[e + i * m + j]);
        }
    }
    let rho = rho_unclamped.min(rho_clamp);
    let rho_clamped = rho_clamp < rho_unclamped;

    let eta_t: Vec<f64> =
        (0..aug.num_cols()).map(|c| rho * aug.col_mu2(c) / (spectra.sigma_a * p[c])).collect();

    let p_comm_max = if e == 0 {
        0.0
    } else {
        let mut per_node = vec![0.0; n];
        for (c, edge) in aug.base.edges().iter().enumerate() {
            per_node[edge.k] += p[c];
            per_node[edge.l] += p[c];
        }
        n as f64 * per_node.iter().cloned().fold(0.0, f64::max) / 2.0
    };
    let delta_p = if e == 0 {
        1.0
    } else {
        p.iter().take(e).cloned().fold(f64::INFINITY, f64::min) * e as f64 / p_comm
    };
    let c_tau = if p_comm > 0.0 { p_comm_max / p_comm } else { 1.0 };

    Ok(SamplingPlan {
        p,
        p_comm,
        p_comp,
        rho,
        rho_unclamped,
        rho_clamped,
        eta_t,
        r: spectra.resistance.clone(),
        sigma_a: spectra.sigma_a,
        delta_p,
        c_tau,
        p_comm_max,
        tau,
    })
}

// ---------------------------------------------------------------------------
// Dense execution (testing oracle)
// ---------------------------------------------------------------------------

/// Full `n(1+m) x d` state; every update line materialized literally.
#[derive(Clone, Debug)]
pub struct DenseState {
    pub x: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl DenseState {
    pub fn zeros(aug: &AugmentedGraph, d: usize) -> Self {
        let nn = aug.num_nodes();
        DenseState { x: DMatrix::zeros(nn, d), v: DMatrix::zeros(nn, d) }
    }
}

pub fn adfs_step_dense(
    state: &mut DenseState,
    warm: &mut [f64],
    col: usize,
    plan: &SamplingPlan,
    aug: &AugmentedGraph,
    problem: &ProblemSpec,
) -> Result<(), SolverError> {
    let rho = plan.rho;
    let d = state.x.ncols();
    let (k, l) = aug.col_endpoints(col);

    // y_t = (x_t + rho v_t) / (1 + rho)
    let mut y = state.x.clone();
    y.zip_apply(&state.v, |yi, vi| *yi += rho * vi);
    y /= 1.0 + rho;

    // w_t = (1 - rho) v_t + rho y_t
    let mut v_new = state.v.clone();
    v_new *= 1.0 - rho;
    v_new.zip_apply(&y, |vi, yi| *vi += rho * yi);

    let w_k: Vec<f64> = v_new.row(k).iter().cloned().collect();
    let w_l: Vec<f64> = v_new.row(l).iter().cloned().collect();

    let eta = plan.eta_t[col];
    let delta: Vec<f64> = (0..d)
        .map(|c| aug.sigma_inv(k) * y[(k, c)] - aug.sigma_inv(l) * y[(l, c)])
        .collect();
    let z_k: Vec<f64> = w_k.iter().zip(&delta).map(|(&w, &dl)| w - eta * dl).collect();
    let z_l: Vec<f64> = w_l.iter().zip(&delta).map(|(&w, &dl)| w + eta * dl).collect();

    let (v_k_new, v_l_new) = if aug.is_virtual_col(col) {
        let (i, j) = aug.virtual_col_sample(col);
        let sample = problem.sample(i, j);
        let (prox_row, consumed) =
            prox_conjugate_tilde_vec(&sample, eta, &z_l, &mut warm[i * problem.m + j])?;
        let v_k: Vec<f64> = z_k.iter().zip(&consumed).map(|(&z, &c)| z + c).collect();
        (v_k, prox_row)
    } else {
        (z_k, z_l)
    };

    for c in 0..d {
        v_new[(k, c)] = v_k_new[c];
        v_new[(l, c)] = v_l_new[c];
    }

    // x_{t+1} = y_t + (rho R / p) (v_{t+1} - w_t), supported on rows k and l.
    let gain = rho * plan.r[col] / plan.p[col];
    let mut x_new = y;
    for c in 0..d {
        x_new[(k, c)] += gain * (v_k_new[c] - w_k[c]);
        x_new[(l, c)] += gain * (v_l_new[c] - w_l[c]);
    }
    state.x = x_new;
    state.v = v_new;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sparse execution (product path, linear losses)
// ---------------------------------------------------------------------------

/// Lazy state: center nodes hold vectors, virtual nodes hold two scalar
/// coefficients along their feature direction, and every node carries the
/// index of the last step applied to it. Catch-up uses the closed form of
/// the repeated convex combination: `x + v` is invariant and `x - v`
/// contracts by `(1 - rho) / (1 + rho)` per skipped step.
#[derive(Clone, Debug)]
pub struct SparseState {
    pub t: usize,
    center_x: DMatrix<f64>,
    center_v: DMatrix<f64>,
    virt_x: Vec<f64>,
    virt_v: Vec<f64>,
    last_touch: Vec<usize>,
    warm: Vec<f64>,
}

impl SparseState {
    pub fn zeros(aug: &AugmentedGraph, d: usize) -> Self {
        let n = aug.n();
        let nm = n * aug.m;
        SparseState {
            t: 0,
            center_x: DMatrix::zeros(n, d),
            center_v: DMatrix::zeros(n, d),
            virt_x: vec![0.0; nm],
            virt_v: vec![0.0; nm],
            last_touch: vec![0; n + nm],
            warm: vec![0.0; nm],
        }
    }

    pub fn last_touch(&self, node: usize) -> usize {
        self.last_touch[node]
    }

    pub fn center_x_row(&self, i: usize) -> Vec<f64> {
        self.center_x.row(i).iter().cloned().collect()
    }

    /// Scalar coefficients stored for a virtual node (the entire state of
    /// that node in linear mode).
    pub fn virtual_coefficients(&self, aug: &AugmentedGraph, i: usize, j: usize) -> (f64, f64) {
        let idx = i * aug.m + j;
        (self.virt_x[idx], self.virt_v[idx])
    }

    fn catch_up_factor(rho: f64, gap: usize) -> f64 {
        ((1.0 - rho) / (1.0 + rho)).powi(gap as i32)
    }

    fn catch_up_center(&mut self, i: usize, rho: f64) {
        let gap = self.t - self.last_touch[i];
        if gap > 0 {
            let lam = Self::catch_up_factor(rho, gap);
            for c in 0..self.center_x.ncols() {
                let (x, v) = (self.center_x[(i, c)], self.center_v[(i, c)]);
                let sum = x + v;
                let diff = lam * (x - v);
                self.center_x[(i, c)] = 0.5 * (sum + diff);
                self.center_v[(i, c)] = 0.5 * (sum - diff);
            }
        }
        self.last_touch[i] = self.t;
    }

    fn catch_up_virtual(&mut self, aug: &AugmentedGraph, i: usize, j: usize, rho: f64) {
        let idx = i * aug.m + j;
        let node = aug.virtual_node(i, j);
        let gap = self.t - self.last_touch[node];
        if gap > 0 {
            let lam = Self::catch_up_factor(rho, gap);
            let (x, v) = (self.virt_x[idx], self.virt_v[idx]);
            let sum = x + v;
            let diff = lam * (x - v);
            self.virt_x[idx] = 0.5 * (sum + diff);
            self.virt_v[idx] = 0.5 * (sum - diff);
        }
        self.last_touch[node] = self.t;
    }

    /// Apply all pending convex combinations and emit the dense state.
    pub fn materialize(&self, aug: &AugmentedGraph, problem: &ProblemSpec, rho: f64) -> DenseState {
        let mut snap = self.clone();
        for i in 0..aug.n() {
            snap.catch_up_center(i, rho);
        }
        for i in 0..aug.n() {
            for j in 0..aug.m {
                snap.catch_up_virtual(aug, i, j, rho);
            }
        }
        let d = self.center_x.ncols();
        let mut dense = DenseState::zeros(aug, d);
        for i in 0..aug.n() {
            for c in 0..d {
                dense.x[(i, c)] = snap.center_x[(i, c)];
                dense.v[(i, c)] = snap.center_v[(i, c)];
            }
        }
        for i in 0..aug.n() {
            for j in 0..aug.m {
                let node = aug.virtual_node(i, j);
                let idx = i * aug.m + j;
                for (c, &fc) in problem.feature(i, j).iter().enumerate() {
                    dense.x[(node, c)] = snap.virt_x[idx] * fc;
                    dense.v[(node, c)] = snap.virt_v[idx] * fc;
                }
            }
        }
        dense
    }
}

pub fn adfs_step_sparse(
    state: &mut SparseState,
    col: usize,
    plan: &SamplingPlan,
    aug: &AugmentedGraph,
    problem: &ProblemSpec,
) -> Result<(), SolverError> {
    let rho = plan.rho;
    let d = state.center_x.ncols();
    let eta = plan.eta_t[col];
    let gain = rho * plan.r[col] / plan.p[col];

    if !aug.is_virtual_col(col) {
        let edge = aug.base.edges()[col];
        let (k, l) = (edge.k, edge.l);
        state.catch_up_center(k, rho);
        state.catch_up_center(l, rho);
        let (sk_inv, sl_inv) = (aug.sigma_inv(k), aug.sigma_inv(l));
        for c in 0..d {
            let y_k = (state.center_x[(k, c)] + rho * state.center_v[(k, c)]) / (1.0 + rho);
            let y_l = (state.center_x[(l, c)] + rho * state.center_v[(l, c)]) / (1.0 + rho);
            let delta = sk_inv * y_k - sl_inv * y_l;
            let w_k = (1.0 - rho) * state.center_v[(k, c)] + rho * y_k;
            let w_l = (1.0 - rho) * state.center_v[(l, c)] + rho * y_l;
            let v_k = w_k - eta * delta;
            let v_l = w_l + eta * delta;
            state.center_v[(k, c)] = v_k;
            state.center_v[(l, c)] = v_l;
            state.center_x[(k, c)] = y_k + gain * (v_k - w_k);
            state.center_x[(l, c)] = y_l + gain * (v_l - w_l);
        }
        state.last_touch[k] = state.t + 1;
        state.last_touch[l] = state.t + 1;
    } else {
        let (i, j) = aug.virtual_col_sample(col);
        let idx = i * aug.m + j;
        state.catch_up_center(i, rho);
        state.catch_up_virtual(aug, i, j, rho);
        let sample = problem.sample(i, j);
        let feat = sample.feature;
        let si_inv = aug.sigma_inv(i);
        let l_inv = 1.0 / sample.l_smooth;

        let y_c = (state.virt_x[idx] + rho * state.virt_v[idx]) / (1.0 + rho);
        let w_c = (1.0 - rho) * state.virt_v[idx] + rho * y_c;

        // Center rows, plus the pieces of z on the virtual node:
        // z_virtual = w_c X + eta (sigma_i^{-1} y_i - L^{-1} y_c X).
        let mut y_i = vec![0.0; d];
        let mut w_i = vec![0.0; d];
        let mut x_dot_y_i = 0.0;
        for c in 0..d {
            let y = (state.center_x[(i, c)] + rho * state.center_v[(i, c)]) / (1.0 + rho);
            y_i[c] = y;
            w_i[c] = (1.0 - rho) * state.center_v[(i, c)] + rho * y;
            x_dot_y_i += feat[c] * y;
        }
        let x_dot_z = (w_c - eta * l_inv * y_c) * sample.norm_sq + eta * si_inv * x_dot_y_i;
        let v_c = prox_conjugate_tilde_coeff(&sample, eta, x_dot_z, &mut state.warm[idx])?;

        // consumed = z_virtual - v_c X feeds the center: v_i = z_i + consumed.
        let coeff_in_span = w_c - eta * l_inv * y_c - v_c;
        for c in 0..d {
            let delta = si_inv * y_i[c] - l_inv * y_c * feat[c];
            let z_i = w_i[c] - eta * delta;
            let consumed = coeff_in_span * feat[c] + eta * si_inv * y_i[c];
            let v_i = z_i + consumed;
            state.center_v[(i, c)] = v_i;
            state.center_x[(i, c)] = y_i[c] + gain * (v_i - w_i[c]);
        }
        state.virt_v[idx] = v_c;
        state.virt_x[idx] = y_c + gain * (v_c - w_c);
        state.last_touch[i] = state.t + 1;
        state.last_touch[aug.virtual_node(i, j)] = state.t + 1;
    }
    state.t += 1;
    Ok(())
}

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, Debug)]
pub struct AdfsSample {
    pub t: usize,
    /// Mean over centers of `F(sigma_i^{-1} y^(i))`, minus `F(theta*)` when a
    /// reference minimizer is available.
    pub f_err_y: f64,
    pub f_err_v: f64,
    /// Mean over centers of the squared parameter error at `y` / `v`
    /// (`NaN` without a reference).
    pub param_err_y: f64,
    pub param_err_v: f64,
}

#[derive(Clone, Debug)]
pub struct AdfsOutput {
    /// `Sigma^{-1} v_K` over the whole augmented graph.
    pub theta: DMatrix<f64>,
    pub trajectory: Vec<AdfsSample>,
}

pub struct AdfsRunConfig<'a> {
    pub events: &'a [u32],
    pub record_every: usize,
    pub mode: ExecMode,
    /// Reference primal minimizer for error reporting.
    pub oracle: Option<&'a [f64]>,
}

pub fn run_adfs(
    problem: &ProblemSpec,
    aug: &AugmentedGraph,
    plan: &SamplingPlan,
    cfg: &AdfsRunConfig<'_>,
) -> Result<AdfsOutput, SolverError> {
    let d = problem.d;
    let f_star = cfg.oracle.map(|t| problem.primal_value(t));
    let mut trajectory = Vec::new();

    let record = |dense: &DenseState, t: usize, trajectory: &mut Vec<AdfsSample>| {
        let rho = plan.rho;
        let mut y = dense.x.clone();
        y.zip_apply(&dense.v, |yi, vi| *yi += rho * vi);
        y /= 1.0 + rho;
        let stats = |mat: &DMatrix<f64>| {
            let mut f_sum = 0.0;
            let mut p_sum = 0.0;
            let mut row = vec![0.0; d];
            for i in 0..aug.n() {
                let s_inv = aug.sigma_inv(i);
                for c in 0..d {
                    row[c] = s_inv * mat[(i, c)];
                }
                f_sum += problem.primal_value(&row);
                if let Some(oracle) = cfg.oracle {
                    p_sum += row
                        .iter()
                        .zip(oracle)
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
            }
            let nf = aug.n() as f64;
            let f_err = f_sum / nf - f_star.unwrap_or(0.0);
            let p_err = if cfg.oracle.is_some() { p_sum / nf } else { f64::NAN };
            (f_err, p_err)
        };
        let (f_err_y, param_err_y) = stats(&y);
        let (f_err_v, param_err_v) = stats(&dense.v);
        trajectory.push(AdfsSample { t, f_err_y, f_err_v, param_err_y, param_err_v });
    };

    let theta_from = |dense: &DenseState| {
        let mut theta = dense.v.clone();
        for node in 0..aug.num_nodes() {
            let s_inv = aug.sigma_inv(node);
            for c in 0..d {
                theta[(node, c)] *= s_inv;
            }
        }
        theta
    };

    match cfg.mode {
        ExecMode::Dense => {
            let mut state = DenseState::zeros(aug, d);
            let mut warm = vec![0.0; aug.n() * aug.m];
            record(&state, 0, &mut trajectory);
            for (t, &col) in cfg.events.iter().enumerate() {
                adfs_step_dense(&mut state, &mut warm, col as usize, plan, aug, problem)?;
                if (t + 1) % cfg.record_every == 0 {
                    record(&state, t + 1, &mut trajectory);
                }
            }
            Ok(AdfsOutput { theta: theta_from(&state), trajectory })
        }
        ExecMode::Sparse => {
            let mut state = SparseState::zeros(aug, d);
            record(&state.materialize(aug, problem, plan.rho), 0, &mut trajectory);
            for (t, &col) in cfg.events.iter().enumerate() {
                adfs_step_sparse(&mut state, col as usize, plan, aug, problem)?;
                if (t + 1) % cfg.record_every == 0 {
                    record(&state.materialize(aug, problem, plan.rho), t + 1, &mut trajectory);
                }
            }
            Ok(AdfsOutput { theta: theta_from(&state.materialize(aug, problem, plan.rho)), trajectory })
        }
    }
}

// ---------------------------------------------------------------------------
// The dual problem as a composite (edge variables)
// ---------------------------------------------------------------------------

/// The dual of the augmented-graph problem in edge variables, exposed through
/// the generic coordinate-solver interface. Node-variable runs are this
/// composite's trajectory multiplied by `A` on the left, which is what the
/// single-machine reduction test checks.
pub struct DualComposite<'a> {
    aug: &'a AugmentedGraph,
    problem: &'a ProblemSpec,
    q: DMatrix<f64>,
    sigma_a: f64,
    r: Vec<f64>,
    mu: Vec<f64>,
    projector: DMatrix<f64>,
    incidence: DMatrix<f64>,
}

impl<'a> DualComposite<'a> {
    pub fn new(aug: &'a AugmentedGraph, problem: &'a ProblemSpec, spectra: &SpectralData) -> Self {
        let a = aug.incidence_matrix();
        let mut scaled = a.clone();
        for (node, mut row) in scaled.row_iter_mut().enumerate() {
            row *= aug.sigma_inv(node);
        }
        let q = a.transpose() * &scaled;
        // A^+ A is the projector onto the orthogonal of Ker(A) = Ker(Q).
        let eig = q.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let thresh = crate::graph::EIG_ZERO_REL * lmax.max(0.0);
        let mut projector = DMatrix::zeros(q.nrows(), q.ncols());
        for idx in 0..q.nrows() {
            if eig.eigenvalues[idx] > thresh {
                let col = eig.eigenvectors.column(idx);
                projector += col * col.transpose();
            }
        }
        let mu: Vec<f64> = (0..aug.num_cols()).map(|c| aug.col_mu2(c).sqrt()).collect();
        DualComposite {
            aug,
            problem,
            q,
            sigma_a: spectra.sigma_a,
            r: spectra.resistance.clone(),
            mu,
            projector,
            incidence: a,
        }
    }

    /// Map an edge-variable state to node variables (`A x`).
    pub fn to_node_variables(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.incidence * x
    }
}

impl crate::apcg::CompositeProblem for DualComposite<'_> {
    fn num_coords(&self) -> usize {
        self.aug.num_cols()
    }

    fn dim(&self) -> usize {
        self.problem.d
    }

    fn sigma_a(&self) -> f64 {
        self.sigma_a
    }

    fn m_coord(&self, i: usize) -> f64 {
        let (k, l) = self.aug.col_endpoints(i);
        self.aug.col_mu2(i) * (self.aug.sigma_inv(k) + self.aug.sigma_inv(l))
    }

    fn r_coord(&self, i: usize) -> f64 {
        self.r[i]
    }

    fn grad_coord(&self, x: &DMatrix<f64>, i: usize) -> Vec<f64> {
        let gi = self.q.row(i) * x;
        gi.iter().cloned().collect()
    }

    fn has_psi(&self, i: usize) -> bool {
        self.aug.is_virtual_col(i)
    }

    fn prox_coord(
        &self,
        i: usize,
        eta: f64,
        z: &[f64],
        warm: &mut f64,
    ) -> Result<Vec<f64>, ProxError> {
        // Edge variable s relates to the node variable through w = -mu s; the
        // prox of the tilted conjugate then runs at step eta mu^2.
        let (vi, vj) = self.aug.virtual_col_sample(i);
        let sample = self.problem.sample(vi, vj);
        let mu = self.mu[i];
        let w: Vec<f64> = z.iter().map(|&s| -mu * s).collect();
        let (prox_w, _) =
            prox_conjugate_tilde_vec(&sample, eta * mu * mu, &w, warm)?;
        Ok(prox_w.iter().map(|&p| -p / mu).collect())
    }

    fn psi_value(&self, i: usize, row: &[f64]) -> f64 {
        if !self.aug.is_virtual_col(i) {
            return 0.0;
        }
        let (vi, vj) = self.aug.virtual_col_sample(i);
        let sample = self.problem.sample(vi, vj);
        let mu = self.mu[i];
        let x_dot: f64 = sample.feature.iter().zip(row).map(|(&f, &s)| f * -mu * s).sum();
        let norm_sq: f64 = row.iter().map(|&s| s * s).sum();
        sample.conjugate_value_along(x_dot / sample.norm_sq)
            - mu * mu / (2.0 * sample.l_smooth) * norm_sq
    }

    fn smooth_value(&self, x: &DMatrix<f64>) -> f64 {
        0.5 * (x.transpose() * &self.q * x).trace()
    }

    fn projector(&self) -> Option<&DMatrix<f64>> {
        Some(&self.projector)
    }
}

// ---------------------------------------------------------------------------
// Non-smooth variant
// ---------------------------------------------------------------------------

/// Sublinear solver for the regime where sample losses are treated as
/// non-smooth: the dual loses strong convexity (the virtual diagonal of
/// `Sigma^{-1}` vanishes), so steps follow the convex-mode coefficient
/// recursion and virtual updates apply the plain conjugate prox.
pub struct NsAdfs<'a> {
    problem: &'a ProblemSpec,
    graph: &'a CommGraph,
    sigma_inv: Vec<f64>,
    p: Vec<f64>,
    r: Vec<f64>,
    eta: Vec<f64>,
    pub s: f64,
    pub p_r: f64,
    pub p_comm: f64,
}

#[derive(Clone, Debug)]
pub struct NsAdfsOutput {
    pub x: DMatrix<f64>,
    /// `(t, dual objective at x_t)`.
    pub trajectory: Vec<(usize, f64)>,
}

impl<'a> NsAdfs<'a> {
    /// Virtual weights `mu^2_ij = lambda_min^+(L) / (1 + m)`; uniform virtual
    /// probabilities; `p_comm = (1 + sqrt(gamma~ m^2 / (2 (1 + m))))^{-1}`.
    pub fn new(graph: &'a CommGraph, problem: &'a ProblemSpec) -> Self {
        let n = graph.n();
        let m = problem.m;
        let e = graph.num_edges();
        let nn = n * (1 + m);

        let mut sigma_inv = vec![0.0; nn];
        for (i, s) in problem.sigma().iter().enumerate() {
            sigma_inv[i] = 1.0 / s;
        }

        let (lambda_l, r_comm, gamma_tilde) = if e == 0 {
            (1.0, Vec::new(), f64::INFINITY)
        } else {
            let eig = graph.laplacian().symmetric_eigen();
            let lambda_l = lambda_min_pos(eig.eigenvalues.as_slice());
            let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
            let thresh = crate::graph::EIG_ZERO_REL * lmax;
            let r_comm: Vec<f64> = graph
                .edges()
                .iter()
                .map(|edge| {
                    let mut r = 0.0;
                    for idx in 0..n {
                        if eig.eigenvalues[idx] > thresh {
                            let u = eig.eigenvectors[(edge.k, idx)]
                                - eig.eigenvectors[(edge.l, idx)];
                            r += u * u / eig.eigenvalues[idx];
                        }
                    }
                    edge.mu2 * r
                })
                .collect();
            let gt = graph
                .edges()
                .iter()
                .zip(&r_comm)
                .map(|(edge, &r)| {
                    lambda_l * (n * n) as f64 / (edge.mu2 * r * (e * e) as f64)
                })
                .fold(f64::INFINITY, f64::min);
            (lambda_l, r_comm, gt)
        };

        let mu2_virtual = lambda_l / (1.0 + m as f64);
        let mf = m as f64;
        let p_comm = if e == 0 {
            0.0
        } else {
            1.0 / (1.0 + (gamma_tilde * mf * mf / (2.0 * (1.0 + mf))).sqrt())
        };
        let p_comp = 1.0 - p_comm;

        let mut mu2 = Vec::with_capacity(e + n * m);
        let mut p = Vec::with_capacity(e + n * m);
        let mut r = Vec::with_capacity(e + n * m);
        for (c, edge) in graph.edges().iter().enumerate() {
            mu2.push(edge.mu2);
            p.push(p_comm / e as f64);
            r.push(r_comm[c]);
        }
        for _ in 0..n * m {
            mu2.push(mu2_virtual);
            p.push(p_comp / (n * m) as f64);
            r.push(1.0);
        }

        // Directional smoothness of the dual smooth part is
        // mu^2 (Sigma_k^{-1} + Sigma_l^{-1}); the virtual diagonal is zero.
        let mut s_sq = 0.0f64;
        for c in 0..mu2.len() {
            let (k, l) = if c < e {
                let edge = graph.edges()[c];
                (edge.k, edge.l)
            } else {
                let idx = c - e;
                (idx / m, n + idx)
            };
            let m_c = mu2[c] * (sigma_inv[k] + sigma_inv[l]);
            s_sq = s_sq.max(m_c * r[c] / (p[c] * p[c]));
        }
        let s = s_sq.sqrt();
        let p_r = p
            .iter()
            .zip(&r)
            .map(|(&pc, &rc)| pc / rc)
            .fold(f64::INFINITY, f64::min);
        let eta: Vec<f64> = mu2.iter().zip(&p).map(|(&m2, &pc)| m2 / pc).collect();

        NsAdfs { problem, graph, sigma_inv, p, r, eta, s, p_r, p_comm }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    fn col_endpoints(&self, col: usize) -> (usize, usize) {
        let e = self.graph.num_edges();
        if col < e {
            let edge = self.graph.edges()[col];
            (edge.k, edge.l)
        } else {
            let idx = col - e;
            let (i, j) = (idx / self.problem.m, idx % self.problem.m);
            (i, self.graph.n() + i * self.problem.m + j)
        }
    }

    /// Dual objective `sum_i [ sum_j f*_ij(x^(ij)) + |x^(i)|^2 / (2 sigma_i) ]`,
    /// with conjugates evaluated along the feature directions.
    pub fn dual_value(&self, x: &DMatrix<f64>) -> f64 {
        let n = self.graph.n();
        let m = self.problem.m;
        let d = self.problem.d;
        let mut total = 0.0;
        for i in 0..n {
            let mut sq = 0.0;
            for c in 0..d {
                sq += x[(i, c)] * x[(i, c)];
            }
            total += 0.5 * sq * self.sigma_inv[i];
            for j in 0..m {
                let sample = self.problem.sample(i, j);
                let node = n + i * m + j;
                let coeff = (0..d)
                    .map(|c| sample.feature[c] * x[(node, c)])
                    .sum::<f64>()
                    / sample.norm_sq;
                total += scalar_conjugate(sample.loss, sample.target, coeff);
            }
        }
        total
    }

    /// Run for `k` iterations with the schedule drawn from `seed`.
    pub fn run(
        &self,
        k: usize,
        seed: u64,
        record_every: usize,
    ) -> Result<NsAdfsOutput, SolverError> {
        let n = self.graph.n();
        let m = self.problem.m;
        let d = self.problem.d;
        let nn = n * (1 + m);
        let e = self.graph.num_edges();
        let mut x = DMatrix::<f64>::zeros(nn, d);
        let mut v = DMatrix::<f64>::zeros(nn, d);
        let mut warm = vec![0.0; n * m];
        let mut sched = make_schedule_cvx(self.s, self.p_r, 1.0);
        let events = sample_categorical_sequence(&self.p, k, seed);
        let mut trajectory = vec![(0usize, self.dual_value(&x))];
        for (t, &col) in events.iter().enumerate() {
            let col = col as usize;
            let coeffs = sched.advance();
            let (alpha, a_inc) = (coeffs.alpha, coeffs.eta_scale);
            let (knode, lnode) = self.col_endpoints(col);
            // y = (1 - alpha) x + alpha v
            let mut y = x.clone();
            y *= 1.0 - alpha;
            y.zip_apply(&v, |yi, vi| *yi += alpha * vi);
            let eta_step = a_inc * self.eta[col];
            let delta: Vec<f64> = (0..d)
                .map(|c| {
                    self.sigma_inv[knode] * y[(knode, c)] - self.sigma_inv[lnode] * y[(lnode, c)]
                })
                .collect();
            let v_k_old: Vec<f64> = v.row(knode).iter().cloned().collect();
            let v_l_old: Vec<f64> = v.row(lnode).iter().cloned().collect();
            let z_k: Vec<f64> =
                v_k_old.iter().zip(&delta).map(|(&vk, &dl)| vk - eta_step * dl).collect();
            let z_l: Vec<f64> =
                v_l_old.iter().zip(&delta).map(|(&vl, &dl)| vl + eta_step * dl).collect();
            let (v_k_new, v_l_new) = if col >= e {
                let idx = col - e;
                let (i, j) = (idx / m, idx % m);
                let sample = self.problem.sample(i, j);
                let (prox_row, consumed) =
                    prox_conjugate_vec(&sample, eta_step, &z_l, &mut warm[idx])?;
                let v_k: Vec<f64> =
                    z_k.iter().zip(&consumed).map(|(&z, &cns)| z + cns).collect();
                (v_k, prox_row)
            } else {
                (z_k, z_l)
            };
            let gain = alpha * self.r[col] / self.p[col];
            let mut x_new = y;
            for c in 0..d {
                x_new[(knode, c)] += gain * (v_k_new[c] - v_k_old[c]);
                x_new[(lnode, c)] += gain * (v_l_new[c] - v_l_old[c]);
                v[(knode, c)] = v_k_new[c];
                v[(lnode, c)] = v_l_new[c];
            }
            x = x_new;
            if (t + 1) % record_every == 0 {
                trajectory.push((t + 1, self.dual_value(&x)));
            }
        }
        Ok(NsAdfsOutput { x, trajectory })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{augment, build_topology, spectral_quantities, Topology, VirtualWeights};
    use crate::problem::{synth_classification, synth_regression, Loss};

    fn homogeneous_plan(n_kind: Topology, n: usize, m: usize) -> (AugmentedGraph, SamplingPlan) {
        let g = build_topology(n_kind, n, 0.5, None).unwrap();
        let l = vec![1.0; n * m];
        let sigma = vec![1.0; n];
        let aug = augment(&g, &l, &sigma, VirtualWeights::Standard).unwrap();
        let spectra = spectral_quantities(&aug);
        let summary = crate::problem::SmoothnessSummary::from_parts(n, m, &l, &sigma);
        let plan = select_parameters(&aug, &spectra, &summary, 5.0, Overrides::default()).unwrap();
        (aug, plan)
    }

    #[test]
    fn k3_plan_matches_formula() {
        // kappa_s = 2, S_comp = sqrt(2), gamma~ = 4.5:
        // p_comm = 1 / (1 + 1.5 sqrt(2)).
        let (_, plan) = homogeneous_plan(Topology::Complete, 3, 1);
        assert!((plan.p_comm - 0.320_377_2).abs() < 1e-6, "p_comm = {}", plan.p_comm);
        assert!((plan.p_comm + plan.p_comp - 1.0).abs() < 1e-12);
        assert!((plan.delta_p - 1.0).abs() < 1e-12);
        let total: f64 = plan.p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Homogeneous K3: all nodes share the same probability mass, so
        // p_comm_max = p_comm.
        assert!((plan.p_comm_max - plan.p_comm).abs() < 1e-12);
        assert!((plan.c_tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_machine_plan() {
        let g = CommGraph::single_node();
        let l = vec![1.0, 4.0, 9.0];
        let sigma = vec![1.0];
        let aug = augment(&g, &l, &sigma, VirtualWeights::Standard).unwrap();
        let spectra = spectral_quantities(&aug);
        let summary = crate::problem::SmoothnessSummary::from_parts(1, 3, &l, &sigma);
        let plan = select_parameters(&aug, &spectra, &summary, 1.0, Overrides::default()).unwrap();
        assert_eq!(plan.p_comm, 0.0);
        // p_ij proportional to sqrt(1 + L_ij / sigma)
        let w: Vec<f64> = l.iter().map(|&li| (1.0 + li).sqrt()).collect();
        let total: f64 = w.iter().sum();
        for (pc, wi) in plan.p.iter().zip(&w) {
            assert!((pc - wi / total).abs() < 1e-12);
        }
        assert!(
            select_parameters(&aug, &spectra, &summary, 1.0, Overrides { p_comm: Some(0.2) })
                .is_err()
        );
    }

    #[test]
    fn override_rejects_out_of_range() {
        let g = build_topology(Topology::Complete, 3, 0.5, None).unwrap();
        let l = vec![1.0; 3];
        let sigma = vec![1.0; 3];
        let aug = augment(&g, &l, &sigma, VirtualWeights::Standard).unwrap();
        let spectra = spectral_quantities(&aug);
        let summary = crate::problem::SmoothnessSummary::from_parts(3, 1, &l, &sigma);
        for bad in [0.0, 1.0, 1.5, -0.1] {
            assert!(select_parameters(
                &aug,
                &spectra,
                &summary,
                1.0,
                Overrides { p_comm: Some(bad) }
            )
            .is_err());
        }
    }

    #[test]
    fn zero_state_is_fixed_point_of_comm_edge() {
        let problem = synth_classification(3, 3, 2, 4, 1.0, 1.0);
        let (aug, plan) = plan_for(&problem);
        let mut state = DenseState::zeros(&aug, problem.d);
        let mut warm = vec![0.0; 6];
        adfs_step_dense(&mut state, &mut warm, 0, &plan, &aug, &problem).unwrap();
        assert_eq!(state.x, DMatrix::zeros(aug.num_nodes(), problem.d));
        assert_eq!(state.v, DMatrix::zeros(aug.num_nodes(), problem.d));
    }

    fn plan_for(problem: &ProblemSpec) -> (AugmentedGraph, SamplingPlan) {
        let g = if problem.n == 1 {
            CommGraph::single_node()
        } else {
            build_topology(Topology::Complete, problem.n, 0.5, None).unwrap()
        };
        let aug = augment(&g, problem.smoothness(), problem.sigma(), VirtualWeights::Standard)
            .unwrap();
        let spectra = spectral_quantities(&aug);
        let summary = problem.summary();
        let plan =
            select_parameters(&aug, &spectra, &summary, 5.0, Overrides::default()).unwrap();
        (aug, plan)
    }

    #[test]
    fn dense_step_touches_only_two_nodes() {
        let problem = synth_classification(7, 4, 2, 3, 1.0, 1.0);
        let (aug, plan) = plan_for(&problem);
        let mut state = DenseState::zeros(&aug, problem.d);
        let mut warm = vec![0.0; 8];
        // Burn in a few steps so the state is generic.
        for col in [0, 6, 9, 2, 7] {
            adfs_step_dense(&mut state, &mut warm, col, &plan, &aug, &problem).unwrap();
        }
        let before = state.clone();
        let col = 1; // communication edge
        let (k, l) = aug.col_endpoints(col);
        adfs_step_dense(&mut state, &mut warm, col, &plan, &aug, &problem).unwrap();
        let rho = plan.rho;
        for node in 0..aug.num_nodes() {
            if node == k || node == l {
                continue;
            }
            for c in 0..problem.d {
                let y = (before.x[(node, c)] + rho * before.v[(node, c)]) / (1.0 + rho);
                let w = (1.0 - rho) * before.v[(node, c)] + rho * y;
                assert_eq!(state.x[(node, c)], y, "untouched x must be the convex combination");
                assert_eq!(state.v[(node, c)], w);
            }
        }
    }

    #[test]
    fn dense_virtual_step_matches_symbolic_evaluation() {
        // Star with one sample, d = 1, quadratic loss: every quantity has a
        // closed form. f(theta) = (s theta - b)^2 / 2.
        let (s, b, sigma) = (2.0, 0.7, 1.5);
        let problem = ProblemSpec::new(
            1,
            1,
            1,
            Loss::Quadratic,
            vec![s],
            vec![b],
            vec![sigma],
        )
        .unwrap();
        let l_smooth = s * s;
        let g = CommGraph::single_node();
        let aug = augment(&g, &[l_smooth], &[sigma], VirtualWeights::Standard).unwrap();
        let mu2 = aug.col_mu2(0);
        let rho = 0.25;
        let eta = 0.2; // eta / L = 0.05 < 1
        let plan = SamplingPlan {
            p: vec![1.0],
            p_comm: 0.0,
            p_comp: 1.0,
            rho,
            rho_unclamped: rho,
            rho_clamped: false,
            eta_t: vec![eta],
            r: vec![1.0],
            sigma_a: mu2 * (1.0 / sigma + 1.0 / l_smooth),
            delta_p: 1.0,
            c_tau: 1.0,
            p_comm_max: 0.0,
            tau: 1.0,
        };
        let mut state = DenseState::zeros(&aug, 1);
        state.x[(0, 0)] = 1.0;
        state.v[(0, 0)] = -0.5;
        state.x[(1, 0)] = 0.3 * s;
        state.v[(1, 0)] = 0.1 * s;
        let mut warm = vec![0.0];
        adfs_step_dense(&mut state, &mut warm, 0, &plan, &aug, &problem).unwrap();

        // Symbolic evaluation of the same step.
        let y0 = (1.0 + rho * -0.5) / (1.0 + rho);
        let y1 = (0.3 * s + rho * 0.1 * s) / (1.0 + rho);
        let w0 = (1.0 - rho) * -0.5 + rho * y0;
        let w1 = (1.0 - rho) * 0.1 * s + rho * y1;
        let delta = y0 / sigma - y1 / l_smooth;
        let z0 = w0 - eta * delta;
        let z1 = w1 + eta * delta;
        // prox of the tilted conjugate via the closed linear form:
        // prox(z) = z - eta * b / s (see the problem module tests).
        let v1 = z1 - eta * b / s;
        let v0 = z0 + (z1 - v1);
        let x0 = y0 + rho * (v0 - w0);
        let x1 = y1 + rho * (v1 - w1);
        assert!((state.v[(0, 0)] - v0).abs() < 1e-12);
        assert!((state.v[(1, 0)] - v1).abs() < 1e-12);
        assert!((state.x[(0, 0)] - x0).abs() < 1e-12);
        assert!((state.x[(1, 0)] - x1).abs() < 1e-12);
    }

    #[test]
    fn v_columns_sum_to_zero_along_runs() {
        let problem = synth_regression(11, 4, 3, 3, 0.5, 1.0);
        let (aug, plan) = plan_for(&problem);
        let events = sample_categorical_sequence(&plan.p, 200, 5);
        let mut state = DenseState::zeros(&aug, problem.d);
        let mut warm = vec![0.0; 12];
        let mut scale = 1e-30f64;
        for &col in &events {
            adfs_step_dense(&mut state, &mut warm, col as usize, &plan, &aug, &problem).unwrap();
            for c in 0..problem.d {
                let mut sum = 0.0;
                for node in 0..aug.num_nodes() {
                    sum += state.v[(node, c)];
                    scale = scale.max(state.v[(node, c)].abs());
                }
                assert!(sum.abs() <= 1e-8 * scale.max(1e-12), "column {c} sums to {sum}");
            }
        }
        // x inherits the property.
        for c in 0..problem.d {
            let sum: f64 = (0..aug.num_nodes()).map(|node| state.x[(node, c)]).sum();
            assert!(sum.abs() <= 1e-8 * scale.max(1e-12));
        }
    }

    #[test]
    fn sparse_matches_dense() {
        for (seed, loss_quad) in [(1u64, false), (2, true), (3, false)] {
            let problem = if loss_quad {
                synth_regression(seed, 4, 5, 4, 0.5, 1.0)
            } else {
                synth_classification(seed, 4, 5, 4, 1.0, 1.0)
            };
            let (aug, plan) = plan_for(&problem);
            let events = sample_categorical_sequence(&plan.p, 500, seed ^ 0xabcd);
            let mut dense = DenseState::zeros(&aug, problem.d);
            let mut warm = vec![0.0; 20];
            let mut sparse = SparseState::zeros(&aug, problem.d);
            for &col in &events {
                adfs_step_dense(&mut dense, &mut warm, col as usize, &plan, &aug, &problem)
                    .unwrap();
                adfs_step_sparse(&mut sparse, col as usize, &plan, &aug, &problem).unwrap();
            }
            let snap = sparse.materialize(&aug, &problem, plan.rho);
            let scale = dense
                .v
                .iter()
                .chain(dense.x.iter())
                .cloned()
                .fold(0.0f64, |a, b| a.max(b.abs()))
                .max(1e-12);
            let dv = (&snap.v - &dense.v).abs().max();
            let dx = (&snap.x - &dense.x).abs().max();
            assert!(dv / scale < 1e-10, "seed {seed}: v diverged {dv}");
            assert!(dx / scale < 1e-10, "seed {seed}: x diverged {dx}");
        }
    }

    #[test]
    fn sparse_matches_dense_with_heterogeneous_regularization() {
        // Distinct sigma_i exercise the per-node curvature indexing on both
        // edge endpoints; m = 1 exercises the smallest stars.
        let (n, m, d) = (3, 1, 2);
        let features = vec![1.0, 0.5, -0.8, 1.2, 0.3, 2.0];
        let targets = vec![0.4, -1.0, 0.9];
        let sigma = vec![0.5, 2.0, 1.0];
        let problem =
            ProblemSpec::new(n, m, d, Loss::Quadratic, features, targets, sigma).unwrap();
        let g = build_topology(Topology::Ring, n, 0.5, None).unwrap();
        let aug = augment(&g, problem.smoothness(), problem.sigma(), VirtualWeights::Standard)
            .unwrap();
        let spectra = spectral_quantities(&aug);
        let plan =
            select_parameters(&aug, &spectra, &problem.summary(), 1.0, Overrides::default())
                .unwrap();
        let events = sample_categorical_sequence(&plan.p, 300, 17);
        let mut dense = DenseState::zeros(&aug, d);
        let mut warm = vec![0.0; n * m];
        let mut sparse = SparseState::zeros(&aug, d);
        for &col in &events {
            adfs_step_dense(&mut dense, &mut warm, col as usize, &plan, &aug, &problem).unwrap();
            adfs_step_sparse(&mut sparse, col as usize, &plan, &aug, &problem).unwrap();
        }
        let snap = sparse.materialize(&aug, &problem, plan.rho);
        let scale = dense.v.iter().cloned().fold(1e-12f64, |a, b| a.max(b.abs()));
        assert!((&snap.v - &dense.v).abs().max() / scale < 1e-10);
        assert!((&snap.x - &dense.x).abs().max() / scale < 1e-10);
        // column sums of v stay zero with uneven sigma as well
        for c in 0..d {
            let sum: f64 = (0..aug.num_nodes()).map(|node| dense.v[(node, c)]).sum();
            assert!(sum.abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn lazy_nodes_keep_raw_storage() {
        let problem = synth_classification(5, 3, 2, 3, 1.0, 1.0);
        let (aug, plan) = plan_for(&problem);
        let mut sparse = SparseState::zeros(&aug, problem.d);
        // Find a virtual column of node 2 and step it; node 0 stays lazy.
        let col = aug.num_comm_cols() + 2 * aug.m;
        adfs_step_sparse(&mut sparse, col, &plan, &aug, &problem).unwrap();
        adfs_step_sparse(&mut sparse, col, &plan, &aug, &problem).unwrap();
        assert_eq!(sparse.last_touch(0), 0, "untouched node counter must not advance storage");
        assert_eq!(sparse.center_x_row(0), vec![0.0; problem.d]);
        assert_eq!(sparse.t, 2);
        // Exactly two scalars represent each virtual node.
        let (cx, cv) = sparse.virtual_coefficients(&aug, 1, 0);
        assert_eq!((cx, cv), (0.0, 0.0));
    }

    #[test]
    fn run_returns_zero_at_k0() {
        let problem = synth_classification(2, 2, 2, 3, 1.0, 1.0);
        let (aug, plan) = plan_for(&problem);
        let cfg = AdfsRunConfig {
            events: &[],
            record_every: 1,
            mode: ExecMode::Sparse,
            oracle: None,
        };
        let out = run_adfs(&problem, &aug, &plan, &cfg).unwrap();
        assert_eq!(out.theta, DMatrix::zeros(aug.num_nodes(), problem.d));
        assert_eq!(out.trajectory.len(), 1);
        assert_eq!(out.trajectory[0].t, 0);
    }

    #[test]
    fn rho_never_increases_when_smoothness_grows() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_pcg::Pcg64::seed_from_u64(31);
        for case in 0..20 {
            let n = 2 + (case % 4);
            let m = 1 + (case % 3);
            let g = build_topology(Topology::Complete, n, 0.5, None).unwrap();
            let l: Vec<f64> = (0..n * m).map(|_| 0.1 + 5.0 * rng.random::<f64>()).collect();
            let sigma: Vec<f64> = (0..n).map(|_| 0.2 + 2.0 * rng.random::<f64>()).collect();
            let factor = 1.1 + 2.0 * rng.random::<f64>();
            let l_big: Vec<f64> = l.iter().map(|&x| x * factor).collect();

            let rho_of = |l: &[f64]| {
                let aug = augment(&g, l, &sigma, VirtualWeights::Standard).unwrap();
                let spectra = spectral_quantities(&aug);
                let summary = crate::problem::SmoothnessSummary::from_parts(n, m, l, &sigma);
                select_parameters(&aug, &spectra, &summary, 1.0, Overrides::default())
                    .unwrap()
                    .rho
            };
            let (r0, r1) = (rho_of(&l), rho_of(&l_big));
            assert!(r1 <= r0 + 1e-12, "case {case}: rho grew from {r0} to {r1}");
        }
    }

    #[test]
    fn ns_adfs_initial_state_and_smoke() {
        let problem = synth_regression(4, 2, 2, 2, 0.3, 1.0);
        let g = build_topology(Topology::Complete, 2, 0.5, None).unwrap();
        let ns = NsAdfs::new(&g, &problem);
        let out = ns.run(0, 1, 1).unwrap();
        assert_eq!(out.x, DMatrix::zeros(6, 2));
        assert_eq!(out.trajectory.len(), 1);

        let out = ns.run(2000, 1, 100).unwrap();
        let first = out.trajectory.first().unwrap().1;
        let last = out.trajectory.last().unwrap().1;
        assert!(last < first, "dual objective should decrease: {first} -> {last}");
    }

    #[test]
    fn homogeneous_grid_plan_is_consistent() {
        let (_aug, plan) = homogeneous_plan(Topology::Grid2d, 4, 2);
        assert!(plan.rho > 0.0 && plan.rho < 1.0);
        let sum: f64 = plan.p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // eta~ = rho mu^2 / (sigma_a p) columnwise
        for c in 0..plan.p.len() {
            assert!(plan.eta_t[c] > 0.0);
        }
    }
}
