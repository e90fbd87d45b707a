//! Finite-sum objectives, single-sample proximal operators, data ingestion,
//! and a high-precision reference solver.
//!
//! The objective is `F(theta) = sum_i [ sum_j f_ij(theta) + sigma_i/2 |theta|^2 ]`
//! with linear-model losses `f_ij(theta) = loss(X_ij^T theta)`. Everything the
//! solvers need from a sample reduces to one-dimensional problems along the
//! feature direction, which is what makes constant-time proximal steps (and
//! two-scalar virtual-node storage) possible.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;
use std::path::Path;
use thiserror::Error;

/// Absolute tolerance on the 1-D prox optimality gradient.
pub const PROX_GRAD_TOL: f64 = 1e-12;
/// Newton budget before the prox solve falls back to bisection. Warm starts
/// usually converge in about five iterations.
pub const PROX_NEWTON_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// `f(theta) = 1/2 (X^T theta - b)^2`, smoothness `|X|^2`.
    Quadratic,
    /// `f(theta) = log(1 + exp(-l X^T theta))`, `l` in {-1, +1}, smoothness `|X|^2 / 4`.
    Logistic,
}

#[derive(Debug, Error)]
pub enum ProxError {
    #[error("non-finite input to a proximal solve")]
    NonFinite,
    #[error("conjugate prox step too large: eta = {eta} exceeds smoothness {l_smooth}")]
    StepTooLarge { eta: f64, l_smooth: f64 },
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset is empty")]
    Empty,
    #[error("need {needed} samples, dataset has {have}")]
    NotEnoughSamples { needed: usize, have: usize },
    #[error("sample ({i}, {j}) has zero feature vector; smoothness would vanish")]
    ZeroFeature { i: usize, j: usize },
    #[error("sample ({i}, {j}) has logistic label {value}, expected -1 or +1")]
    BadLabel { i: usize, j: usize, value: f64 },
    #[error("regularization must be strictly positive")]
    NonPositiveSigma,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("reference solver exceeded {0} iterations")]
    IterationCap(usize),
}

// ---------------------------------------------------------------------------
// Scalar losses
// ---------------------------------------------------------------------------

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Scalar loss value `loss_c(u)`: quadratic target `c` or logistic label `c`.
pub fn scalar_loss(loss: Loss, c: f64, u: f64) -> f64 {
    match loss {
        Loss::Quadratic => 0.5 * (u - c) * (u - c),
        Loss::Logistic => ln1pexp(-c * u),
    }
}

pub fn scalar_loss_deriv(loss: Loss, c: f64, u: f64) -> f64 {
    match loss {
        Loss::Quadratic => u - c,
        Loss::Logistic => -c * sigmoid(-c * u),
    }
}

fn scalar_loss_second(loss: Loss, c: f64, u: f64) -> f64 {
    match loss {
        Loss::Quadratic => 1.0,
        Loss::Logistic => {
            let s = sigmoid(-c * u);
            s * (1.0 - s)
        }
    }
}

/// Fenchel conjugate `loss_c^*(s)` of the scalar loss; `+inf` outside the
/// domain (logistic requires `-c*s` in `[0, 1]`).
pub fn scalar_conjugate(loss: Loss, c: f64, s: f64) -> f64 {
    match loss {
        Loss::Quadratic => s * c + 0.5 * s * s,
        Loss::Logistic => {
            let y = -c * s;
            if !(-1e-12..=1.0 + 1e-12).contains(&y) {
                return f64::INFINITY;
            }
            let y = y.clamp(0.0, 1.0);
            let ent = |p: f64| if p <= 0.0 { 0.0 } else { p * p.ln() };
            ent(y) + ent(1.0 - y)
        }
    }
}

/// `prox_{eta * loss_c}(x) = argmin_v (v - x)^2 / (2 eta) + loss_c(v)`.
///
/// Quadratic losses use the closed form `(x + eta c) / (1 + eta)`; logistic
/// losses run safeguarded Newton from `warm` inside the bracket
/// `[x - eta, x + eta]`, with bisection as fallback, until the 1-D gradient
/// is below [`PROX_GRAD_TOL`].
pub fn prox_loss_1d(loss: Loss, c: f64, eta: f64, x: f64, warm: f64) -> Result<f64, ProxError> {
    if !eta.is_finite() || !x.is_finite() || !c.is_finite() || eta < 0.0 {
        return Err(ProxError::NonFinite);
    }
    if eta == 0.0 {
        return Ok(x);
    }
    match loss {
        Loss::Quadratic => Ok((x + eta * c) / (1.0 + eta)),
        Loss::Logistic => {
            let grad = |v: f64| (v - x) / eta + scalar_loss_deriv(loss, c, v);
            // |loss'| < 1, so the minimizer sits in [x - eta, x + eta].
            let mut lo = x - eta;
            let mut hi = x + eta;
            let mut v = if warm.is_finite() { warm.clamp(lo, hi) } else { x };
            let mut g = grad(v);
            let mut newton_left = PROX_NEWTON_CAP;
            loop {
                if g.abs() <= PROX_GRAD_TOL {
                    return Ok(v);
                }
                if g > 0.0 {
                    hi = v;
                } else {
                    lo = v;
                }
                if hi - lo <= f64::EPSILON * (1.0 + hi.abs().max(lo.abs())) {
                    return Ok(v);
                }
                let next = if newton_left > 0 {
                    newton_left -= 1;
                    let h = 1.0 / eta + scalar_loss_second(loss, c, v);
                    let step = v - g / h;
                    if step.is_finite() && step > lo && step < hi {
                        step
                    } else {
                        0.5 * (lo + hi)
                    }
                } else {
                    0.5 * (lo + hi)
                };
                v = next;
                g = grad(v);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Linear-model samples and their conjugate proximal operators
// ---------------------------------------------------------------------------

/// A borrowed view of one sample `f_ij(theta) = loss(X^T theta)`.
#[derive(Clone, Copy, Debug)]
pub struct SampleView<'a> {
    pub loss: Loss,
    pub target: f64,
    pub feature: &'a [f64],
    pub norm_sq: f64,
    pub l_smooth: f64,
}

impl SampleView<'_> {
    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        scalar_loss(self.loss, self.target, dot(self.feature, theta))
    }

    /// `f^*(w)` for `w = coeff * X` (the conjugate is `+inf` off the feature
    /// direction, so a single coefficient determines it).
    pub fn conjugate_value_along(&self, coeff: f64) -> f64 {
        // f(theta) = loss(X^T theta) gives f^*(c X) = loss^*(c).
        scalar_conjugate(self.loss, self.target, coeff)
    }

    /// `prox_{c f}(w)` for the full d-dimensional sample, reduced to one
    /// dimension along the feature. Returns the coefficient pair
    /// `(u_star, correction)` with `prox = w - correction * X`, where
    /// `u_star = X^T prox`.
    fn primal_prox_reduction(
        &self,
        c: f64,
        x_dot_w: f64,
        warm: &mut f64,
    ) -> Result<(f64, f64), ProxError> {
        let u = prox_loss_1d(self.loss, self.target, c * self.norm_sq, x_dot_w, *warm)?;
        *warm = u;
        Ok((u, (x_dot_w - u) / self.norm_sq))
    }
}

/// `prox_{eta_t * conj~}(z)` for the tilted conjugate
/// `conj~(w) = f^*(w) - |w|^2 / (2 L)`, evaluated through the primal prox:
///
/// `(1 - eta_t / L) * prox(z) = z - eta_t * prox_{(1/eta_t - 1/L) f}(z / eta_t)`.
///
/// Valid only while `eta_t / L < 1`; a larger step means the contraction
/// factor was chosen too aggressively and must be clamped by the caller.
/// Returns `(prox, consumed)` with `consumed = z - prox`, the mass handed
/// back to the center node.
pub fn prox_conjugate_tilde_vec(
    sample: &SampleView<'_>,
    eta_t: f64,
    z: &[f64],
    warm: &mut f64,
) -> Result<(Vec<f64>, Vec<f64>), ProxError> {
    if !eta_t.is_finite() || eta_t < 0.0 {
        return Err(ProxError::NonFinite);
    }
    if eta_t == 0.0 {
        return Ok((z.to_vec(), vec![0.0; z.len()]));
    }
    let ratio = eta_t / sample.l_smooth;
    if ratio >= 1.0 {
        return Err(ProxError::StepTooLarge { eta: eta_t, l_smooth: sample.l_smooth });
    }
    let coeff = prox_conjugate_tilde_coeff(sample, eta_t, dot(sample.feature, z), warm)?;
    // The output lives on the feature direction; the rest of z is consumed.
    let prox: Vec<f64> = sample.feature.iter().map(|&xi| coeff * xi).collect();
    let consumed: Vec<f64> = z.iter().zip(&prox).map(|(&zi, &pi)| zi - pi).collect();
    Ok((prox, consumed))
}

/// Scalar core of [`prox_conjugate_tilde_vec`]: takes `X^T z` and returns the
/// coefficient `c` with `prox = c * X`.
pub fn prox_conjugate_tilde_coeff(
    sample: &SampleView<'_>,
    eta_t: f64,
    x_dot_z: f64,
    warm: &mut f64,
) -> Result<f64, ProxError> {
    if !eta_t.is_finite() || !x_dot_z.is_finite() || eta_t < 0.0 {
        return Err(ProxError::NonFinite);
    }
    if eta_t == 0.0 {
        return Ok(x_dot_z / sample.norm_sq);
    }
    let ratio = eta_t / sample.l_smooth;
    if ratio >= 1.0 {
        return Err(ProxError::StepTooLarge { eta: eta_t, l_smooth: sample.l_smooth });
    }
    let c = 1.0 / eta_t - 1.0 / sample.l_smooth;
    let (_, correction) = sample.primal_prox_reduction(c, x_dot_z / eta_t, warm)?;
    // prox = (z - eta_t * p) / (1 - ratio) with p = z/eta_t - correction*X,
    // which collapses onto the feature direction:
    Ok(eta_t * correction / (1.0 - ratio))
}

/// `prox_{eta f^*}(z)` through the Moreau identity
/// `prox_{eta f^*}(z) = z - eta * prox_{f / eta}(z / eta)`.
/// Used by the non-smooth solver variant; no step-size restriction.
pub fn prox_conjugate_vec(
    sample: &SampleView<'_>,
    eta: f64,
    z: &[f64],
    warm: &mut f64,
) -> Result<(Vec<f64>, Vec<f64>), ProxError> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(ProxError::NonFinite);
    }
    if eta == 0.0 {
        return Ok((z.to_vec(), vec![0.0; z.len()]));
    }
    let x_dot_z = dot(sample.feature, z);
    let (u, _) = sample.primal_prox_reduction(1.0 / eta, x_dot_z / eta, warm)?;
    let coeff = (x_dot_z - eta * u) / sample.norm_sq;
    let prox: Vec<f64> = sample.feature.iter().map(|&xi| coeff * xi).collect();
    let consumed: Vec<f64> = z.iter().zip(&prox).map(|(&zi, &pi)| zi - pi).collect();
    Ok((prox, consumed))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Problem specification
// ---------------------------------------------------------------------------

/// The full finite-sum problem: `n` machines, `m` samples each, dimension `d`.
/// Immutable once built; smoothness constants are derived from the features
/// at construction.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub loss: Loss,
    features: Vec<f64>,
    targets: Vec<f64>,
    sigma: Vec<f64>,
    smoothness: Vec<f64>,
    norms_sq: Vec<f64>,
}

impl ProblemSpec {
    pub fn new(
        n: usize,
        m: usize,
        d: usize,
        loss: Loss,
        features: Vec<f64>,
        targets: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Self, DataError> {
        if features.len() != n * m * d {
            return Err(DataError::LengthMismatch { expected: n * m * d, got: features.len() });
        }
        if targets.len() != n * m {
            return Err(DataError::LengthMismatch { expected: n * m, got: targets.len() });
        }
        if sigma.len() != n {
            return Err(DataError::LengthMismatch { expected: n, got: sigma.len() });
        }
        if sigma.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(DataError::NonPositiveSigma);
        }
        let mut norms_sq = Vec::with_capacity(n * m);
        let mut smoothness = Vec::with_capacity(n * m);
        for s in 0..n * m {
            if loss == Loss::Logistic && targets[s].abs() != 1.0 {
                return Err(DataError::BadLabel { i: s / m, j: s % m, value: targets[s] });
            }
            let row = &features[s * d..(s + 1) * d];
            let nsq = dot(row, row);
            if nsq <= 0.0 {
                return Err(DataError::ZeroFeature { i: s / m, j: s % m });
            }
            norms_sq.push(nsq);
            smoothness.push(match loss {
                Loss::Quadratic => nsq,
                Loss::Logistic => nsq / 4.0,
            });
        }
        Ok(ProblemSpec { n, m, d, loss, features, targets, sigma, smoothness, norms_sq })
    }

    pub fn feature(&self, i: usize, j: usize) -> &[f64] {
        let s = i * self.m + j;
        &self.features[s * self.d..(s + 1) * self.d]
    }

    pub fn target(&self, i: usize, j: usize) -> f64 {
        self.targets[i * self.m + j]
    }

    pub fn smoothness(&self) -> &[f64] {
        &self.smoothness
    }

    pub fn l_smooth(&self, i: usize, j: usize) -> f64 {
        self.smoothness[i * self.m + j]
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sample(&self, i: usize, j: usize) -> SampleView<'_> {
        let s = i * self.m + j;
        SampleView {
            loss: self.loss,
            target: self.targets[s],
            feature: self.feature(i, j),
            norm_sq: self.norms_sq[s],
            l_smooth: self.smoothness[s],
        }
    }

    /// `F(theta)`: all sample losses plus the quadratic regularizers.
    /// Local sums are not normalized by `m`.
    pub fn primal_value(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for s in 0..self.n * self.m {
            let u = dot(&self.features[s * self.d..(s + 1) * self.d], theta);
            total += scalar_loss(self.loss, self.targets[s], u);
        }
        let sigma_total: f64 = self.sigma.iter().sum();
        total + 0.5 * sigma_total * dot(theta, theta)
    }

    pub fn primal_grad(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for s in 0..self.n * self.m {
            let row = &self.features[s * self.d..(s + 1) * self.d];
            let coeff = scalar_loss_deriv(self.loss, self.targets[s], dot(row, theta));
            for (gi, &xi) in g.iter_mut().zip(row) {
                *gi += coeff * xi;
            }
        }
        let sigma_total: f64 = self.sigma.iter().sum();
        for (gi, &ti) in g.iter_mut().zip(theta) {
            *gi += sigma_total * ti;
        }
        g
    }

    pub fn summary(&self) -> SmoothnessSummary {
        SmoothnessSummary::from_problem(self)
    }
}

/// Per-node condition numbers and the sampling-weighted smoothness sum that
/// the probability split is built from.
#[derive(Clone, Debug)]
pub struct SmoothnessSummary {
    pub kappa: Vec<f64>,
    pub kappa_s: f64,
    pub r_kappa: f64,
    /// `S_comp = n^{-1} sum_i sum_j (1 + L_ij / sigma_i)^{1/2}`.
    pub s_comp: f64,
}

impl SmoothnessSummary {
    pub fn from_parts(n: usize, m: usize, l_smooth: &[f64], sigma: &[f64]) -> Self {
        let mut kappa = Vec::with_capacity(n);
        let mut s_comp = 0.0;
        for i in 0..n {
            let row = &l_smooth[i * m..(i + 1) * m];
            kappa.push(1.0 + row.iter().sum::<f64>() / sigma[i]);
            s_comp += row.iter().map(|&l| (1.0 + l / sigma[i]).sqrt()).sum::<f64>();
        }
        s_comp /= n as f64;
        let kappa_s = kappa.iter().cloned().fold(f64::MIN, f64::max);
        let kappa_min = kappa.iter().cloned().fold(f64::MAX, f64::min);
        SmoothnessSummary { kappa, kappa_s, r_kappa: kappa_min / kappa_s, s_comp }
    }

    pub fn from_problem(p: &ProblemSpec) -> Self {
        Self::from_parts(p.n, p.m, &p.smoothness, &p.sigma)
    }
}

// ---------------------------------------------------------------------------
// Data ingestion
// ---------------------------------------------------------------------------

/// A raw labelled dataset (dense rows).
#[derive(Clone, Debug)]
pub struct Dataset {
    pub labels: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub d: usize,
}

/// Parse LibSVM sparse text: one `label idx:val ...` line per sample,
/// 1-based indices, indices beyond `d` rejected.
pub fn parse_libsvm(text: &str, d: usize) -> Result<Dataset, DataError> {
    let mut labels = Vec::new();
    let mut features = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let label_tok = it.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| DataError::Parse {
            line: lno + 1,
            msg: format!("invalid label {label_tok:?}"),
        })?;
        let mut row = vec![0.0; d];
        for tok in it {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: lno + 1,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| DataError::Parse {
                line: lno + 1,
                msg: format!("invalid feature index {idx_s:?}"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| DataError::Parse {
                line: lno + 1,
                msg: format!("invalid feature value {val_s:?}"),
            })?;
            if idx < 1 || idx > d {
                return Err(DataError::Parse {
                    line: lno + 1,
                    msg: format!("feature index {idx} out of range 1..={d}"),
                });
            }
            row[idx - 1] = val;
        }
        labels.push(label);
        features.push(row);
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(Dataset { labels, features, d })
}

pub fn load_libsvm(path: &Path, d: usize) -> Result<Dataset, DataError> {
    parse_libsvm(&std::fs::read_to_string(path)?, d)
}

/// How dataset samples are assigned to machines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    /// Shuffle once, hand out contiguous disjoint blocks of `m`.
    DisjointBlocks,
    /// Draw `n * m` samples uniformly with replacement (node datasets overlap).
    OverlappingDraws,
}

pub fn problem_from_dataset(
    ds: &Dataset,
    n: usize,
    m: usize,
    loss: Loss,
    sigma: f64,
    assignment: Assignment,
    seed: u64,
) -> Result<ProblemSpec, DataError> {
    let total = ds.labels.len();
    let mut rng = Pcg64::seed_from_u64(seed);
    let picks: Vec<usize> = match assignment {
        Assignment::DisjointBlocks => {
            if total < n * m {
                return Err(DataError::NotEnoughSamples { needed: n * m, have: total });
            }
            let mut idx: Vec<usize> = (0..total).collect();
            // Fisher-Yates
            for i in (1..total).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            idx.truncate(n * m);
            idx
        }
        Assignment::OverlappingDraws => {
            (0..n * m).map(|_| rng.random_range(0..total)).collect()
        }
    };
    let d = ds.d;
    let mut features = Vec::with_capacity(n * m * d);
    let mut targets = Vec::with_capacity(n * m);
    for &s in &picks {
        features.extend_from_slice(&ds.features[s]);
        targets.push(ds.labels[s]);
    }
    ProblemSpec::new(n, m, d, loss, features, targets, vec![sigma; n])
}

// ---------------------------------------------------------------------------
// Synthetic problems
// ---------------------------------------------------------------------------

fn gaussian_matrix(rng: &mut Pcg64, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Deterministic synthetic logistic problem: Gaussian features rescaled so
/// the median smoothness constant is 1, labels from a random hyperplane with
/// Gaussian margin noise. `separability = 0` makes labels independent of the
/// features.
pub fn synth_classification(
    seed: u64,
    n: usize,
    m: usize,
    d: usize,
    separability: f64,
    sigma: f64,
) -> ProblemSpec {
    synth_impl(seed, n, m, d, separability, sigma, Loss::Logistic)
}

/// Deterministic synthetic least-squares problem; `noise` scales the target
/// perturbation around the generating hyperplane.
pub fn synth_regression(
    seed: u64,
    n: usize,
    m: usize,
    d: usize,
    noise: f64,
    sigma: f64,
) -> ProblemSpec {
    synth_impl(seed, n, m, d, noise, sigma, Loss::Quadratic)
}

fn synth_impl(
    seed: u64,
    n: usize,
    m: usize,
    d: usize,
    shape: f64,
    sigma: f64,
    loss: Loss,
) -> ProblemSpec {
    assert!(n > 0 && m > 0 && d > 0, "counts must be positive");
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut features = gaussian_matrix(&mut rng, n * m, d);
    let mut raw_l: Vec<f64> = (0..n * m)
        .map(|s| {
            let nsq = dot(&features[s * d..(s + 1) * d], &features[s * d..(s + 1) * d]);
            match loss {
                Loss::Quadratic => nsq,
                Loss::Logistic => nsq / 4.0,
            }
        })
        .collect();
    let med = median(&mut raw_l).max(f64::MIN_POSITIVE);
    let scale = 1.0 / med.sqrt();
    for f in &mut features {
        *f *= scale;
    }
    let hyperplane: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let targets: Vec<f64> = (0..n * m)
        .map(|s| {
            let margin = dot(&features[s * d..(s + 1) * d], &hyperplane) / (d as f64).sqrt();
            let noise: f64 = rng.sample(StandardNormal);
            match loss {
                Loss::Logistic => {
                    if shape * margin + noise >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Loss::Quadratic => margin + shape * noise,
            }
        })
        .collect();
    ProblemSpec::new(n, m, d, loss, features, targets, vec![sigma; n])
        .expect("gaussian features are almost surely nonzero")
}

// ---------------------------------------------------------------------------
// Reference solver
// ---------------------------------------------------------------------------

const REFERENCE_ITER_CAP: usize = 1_000_000;

/// Deterministic accelerated full-gradient descent on `F`, run until
/// `|grad F| <= tol * min_i sigma_i`. Test oracle only; nothing in the
/// stochastic path depends on it.
pub fn solve_reference(p: &ProblemSpec, tol: f64) -> Result<Vec<f64>, SolveError> {
    assert!(tol > 0.0);
    let sigma_total: f64 = p.sigma().iter().sum();
    let sigma_min = p.sigma().iter().cloned().fold(f64::MAX, f64::min);
    let smooth_bound = sigma_total + p.smoothness().iter().sum::<f64>();
    let q = sigma_total / smooth_bound;
    let beta = (1.0 - q.sqrt()) / (1.0 + q.sqrt());
    let threshold = tol * sigma_min;

    let mut x = vec![0.0; p.d];
    let mut y = x.clone();
    for _ in 0..REFERENCE_ITER_CAP {
        let g = p.primal_grad(&y);
        let gnorm = dot(&g, &g).sqrt();
        let mut x_new = y.clone();
        for (xi, &gi) in x_new.iter_mut().zip(&g) {
            *xi -= gi / smooth_bound;
        }
        if gnorm <= 0.5 * threshold {
            let gx = p.primal_grad(&x_new);
            if dot(&gx, &gx).sqrt() <= threshold {
                return Ok(x_new);
            }
        }
        for i in 0..p.d {
            y[i] = x_new[i] + beta * (x_new[i] - x[i]);
        }
        x = x_new;
    }
    Err(SolveError::IterationCap(REFERENCE_ITER_CAP))
}

/// Exact minimizer of a quadratic problem through its normal equations.
/// Independent linear-algebra oracle for [`solve_reference`]; `None` for
/// non-quadratic losses.
pub fn solve_normal_equations(p: &ProblemSpec) -> Option<Vec<f64>> {
    if p.loss != Loss::Quadratic {
        return None;
    }
    let sigma_total: f64 = p.sigma().iter().sum();
    let mut gram = DMatrix::<f64>::from_diagonal_element(p.d, p.d, sigma_total);
    let mut rhs = DVector::<f64>::zeros(p.d);
    for i in 0..p.n {
        for j in 0..p.m {
            let row = p.feature(i, j);
            let b = p.target(i, j);
            for a in 0..p.d {
                rhs[a] += b * row[a];
                for c in 0..p.d {
                    gram[(a, c)] += row[a] * row[c];
                }
            }
        }
    }
    gram.cholesky().map(|ch| ch.solve(&rhs).iter().cloned().collect())
}
