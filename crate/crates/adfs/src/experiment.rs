//! Config-driven experiment runner: dataset/topology/solver selection, CSV
//! emission of error against idealized time, and a reproducibility manifest.
//!
//! ## Config format
//!
//! Flat `key = value` lines, `#` comments. Keys:
//!
//! ```text
//! topology      complete | ring | grid2d | grid2d:RxC | custom:<edge-list path>
//! n, m, d       counts (n = 1 needs no topology edges)
//! loss          logistic | quadratic
//! sigma         per-node regularization (uniform)
//! tau           communication delay for the idealized clock
//! p_comm        optional probability override
//! k_iters       schedule length per seed
//! seeds         comma-separated seed list
//! dataset       synthetic | libsvm
//! data_path     libsvm file (dataset = libsvm)
//! data_seed     generator seed (synthetic) or shuffle seed (libsvm)
//! separability  hyperplane sharpness (synthetic; 0 = random labels)
//! assign        disjoint | overlap (libsvm sample assignment)
//! record_every  trajectory sampling stride
//! output_dir    where CSVs and the manifest go
//! oracle        true | false (solve the reference problem for error columns)
//! mu2_comm      communication edge weight (default 0.5)
//! ```
//!
//! A config plus the code version determines every output byte: runs are
//! seeded end to end and floats are printed in shortest round-trip form.

use crate::graph::{
    augment, build_topology, read_edge_list, spectral_quantities, CommGraph, GraphError,
    SpectralData, Topology, VirtualWeights,
};
use crate::problem::{
    load_libsvm, problem_from_dataset, solve_reference, synth_classification, synth_regression,
    Assignment, DataError, Loss, ProblemSpec, SolveError,
};
use crate::schedule::{sample_schedule, simulate_time};
use crate::solver::{
    run_adfs, select_parameters, AdfsRunConfig, ExecMode, Overrides, PlanError, SamplingPlan,
    SolverError,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {got:?}")]
    BadLine { line: usize, got: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for {key}: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reference(#[from] SolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TopologySpec {
    Complete,
    Ring,
    Grid2d,
    Grid2dRect { rows: usize, cols: usize },
    Custom(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    Synthetic { seed: u64, separability: f64 },
    Libsvm { path: PathBuf, seed: u64, assign: Assignment },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub loss: Loss,
    pub sigma: f64,
    pub tau: f64,
    pub p_comm_override: Option<f64>,
    pub k_iters: usize,
    pub seeds: Vec<u64>,
    pub dataset: DatasetSpec,
    pub record_every: usize,
    pub output_dir: PathBuf,
    pub oracle: bool,
    pub mu2_comm: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (lno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::BadLine { line: lno + 1, got: raw.to_string() })?;
            kv.insert(key.trim().to_string(), (lno + 1, value.trim().to_string()));
        }
        const KNOWN: &[&str] = &[
            "topology", "n", "m", "d", "loss", "sigma", "tau", "p_comm", "k_iters", "seeds",
            "dataset", "data_path", "data_seed", "separability", "assign", "record_every",
            "output_dir", "oracle", "mu2_comm",
        ];
        for (key, (line, _)) in &kv {
            if !KNOWN.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line: *line, key: key.clone() });
            }
        }

        fn required<'a>(
            kv: &'a BTreeMap<String, (usize, String)>,
            key: &'static str,
        ) -> Result<(usize, &'a str), ConfigError> {
            kv.get(key)
                .map(|(l, v)| (*l, v.as_str()))
                .ok_or(ConfigError::MissingKey(key))
        }
        fn parse_num<T: std::str::FromStr>(
            line: usize,
            key: &str,
            value: &str,
        ) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: key.into(),
                msg: format!("{value:?}"),
            })
        }

        let n: usize = {
            let (l, v) = required(&kv, "n")?;
            parse_num(l, "n", v)?
        };
        let m: usize = {
            let (l, v) = required(&kv, "m")?;
            parse_num(l, "m", v)?
        };
        let d: usize = {
            let (l, v) = required(&kv, "d")?;
            parse_num(l, "d", v)?
        };
        let (tl, tv) = required(&kv, "topology")?;
        let topology = match tv {
            "complete" => TopologySpec::Complete,
            "ring" => TopologySpec::Ring,
            "grid2d" => TopologySpec::Grid2d,
            other => {
                if let Some(dims) = other.strip_prefix("grid2d:") {
                    let (r, c) = dims.split_once('x').ok_or_else(|| ConfigError::BadValue {
                        line: tl,
                        key: "topology".into(),
                        msg: format!("expected grid2d:RxC, got {other:?}"),
                    })?;
                    TopologySpec::Grid2dRect {
                        rows: parse_num(tl, "topology", r)?,
                        cols: parse_num(tl, "topology", c)?,
                    }
                } else if let Some(path) = other.strip_prefix("custom:") {
                    TopologySpec::Custom(PathBuf::from(path))
                } else {
                    return Err(ConfigError::BadValue {
                        line: tl,
                        key: "topology".into(),
                        msg: format!("{other:?}"),
                    });
                }
            }
        };
        let loss = {
            let (l, v) = required(&kv, "loss")?;
            match v {
                "logistic" => Loss::Logistic,
                "quadratic" => Loss::Quadratic,
                other => {
                    return Err(ConfigError::BadValue {
                        line: l,
                        key: "loss".into(),
                        msg: format!("{other:?}"),
                    })
                }
            }
        };
        let sigma: f64 = {
            let (l, v) = required(&kv, "sigma")?;
            parse_num(l, "sigma", v)?
        };
        let tau: f64 = {
            let (l, v) = required(&kv, "tau")?;
            parse_num(l, "tau", v)?
        };
        let p_comm_override = match kv.get("p_comm") {
            None => None,
            Some((l, v)) => Some(parse_num::<f64>(*l, "p_comm", v)?),
        };
        let k_iters: usize = {
            let (l, v) = required(&kv, "k_iters")?;
            parse_num(l, "k_iters", v)?
        };
        let seeds: Vec<u64> = {
            let (l, v) = required(&kv, "seeds")?;
            v.split(',')
                .map(|s| parse_num::<u64>(l, "seeds", s.trim()))
                .collect::<Result<_, _>>()?
        };
        let dataset = {
            let (l, v) = required(&kv, "dataset")?;
            let data_seed = match kv.get("data_seed") {
                None => 0,
                Some((dl, dv)) => parse_num::<u64>(*dl, "data_seed", dv)?,
            };
            match v {
                "synthetic" => {
                    let separability = match kv.get("separability") {
                        None => 1.0,
                        Some((sl, sv)) => parse_num::<f64>(*sl, "separability", sv)?,
                    };
                    DatasetSpec::Synthetic { seed: data_seed, separability }
                }
                "libsvm" => {
                    let (_, pv) = required(&kv, "data_path")?;
                    let assign = match kv.get("assign").map(|(l, v)| (*l, v.as_str())) {
                        None | Some((_, "disjoint")) => Assignment::DisjointBlocks,
                        Some((_, "overlap")) => Assignment::OverlappingDraws,
                        Some((al, other)) => {
                            return Err(ConfigError::BadValue {
                                line: al,
                                key: "assign".into(),
                                msg: format!("{other:?}"),
                            })
                        }
                    };
                    DatasetSpec::Libsvm { path: PathBuf::from(pv), seed: data_seed, assign }
                }
                other => {
                    return Err(ConfigError::BadValue {
                        line: l,
                        key: "dataset".into(),
                        msg: format!("{other:?}"),
                    })
                }
            }
        };
        let record_every: usize = match kv.get("record_every") {
            None => 1,
            Some((l, v)) => parse_num(*l, "record_every", v)?,
        };
        let output_dir = PathBuf::from(required(&kv, "output_dir")?.1);
        let oracle = match kv.get("oracle").map(|(l, v)| (*l, v.as_str())) {
            None | Some((_, "true")) => true,
            Some((_, "false")) => false,
            Some((l, other)) => {
                return Err(ConfigError::BadValue {
                    line: l,
                    key: "oracle".into(),
                    msg: format!("{other:?}"),
                })
            }
        };
        let mu2_comm: f64 = match kv.get("mu2_comm") {
            None => 0.5,
            Some((l, v)) => parse_num(*l, "mu2_comm", v)?,
        };

        let config = ExperimentConfig {
            topology,
            n,
            m,
            d,
            loss,
            sigma,
            tau,
            p_comm_override,
            k_iters,
            seeds,
            dataset,
            record_every,
            output_dir,
            oracle,
            mu2_comm,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let reject = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n == 0 || self.m == 0 || self.d == 0 {
            return reject(format!("counts must be positive (n={}, m={}, d={})", self.n, self.m, self.d));
        }
        if self.sigma <= 0.0 {
            return reject(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.tau < 0.0 {
            return reject(format!("tau must be nonnegative, got {}", self.tau));
        }
        if self.seeds.is_empty() {
            return reject("seeds must be a nonempty list".into());
        }
        if self.record_every == 0 {
            return reject("record_every must be at least 1".into());
        }
        if let Some(p) = self.p_comm_override {
            if !(p > 0.0 && p < 1.0) {
                return reject(format!("p_comm override {p} outside (0, 1)"));
            }
        }
        if let TopologySpec::Grid2dRect { rows, cols } = self.topology {
            if rows * cols != self.n {
                return reject(format!("grid {rows}x{cols} != n = {}", self.n));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }

    pub fn build_graph(&self) -> Result<CommGraph, ExperimentError> {
        if self.n == 1 {
            return Ok(CommGraph::single_node());
        }
        let g = match &self.topology {
            TopologySpec::Complete => build_topology(Topology::Complete, self.n, self.mu2_comm, None)?,
            TopologySpec::Ring => build_topology(Topology::Ring, self.n, self.mu2_comm, None)?,
            TopologySpec::Grid2d => build_topology(Topology::Grid2d, self.n, self.mu2_comm, None)?,
            TopologySpec::Grid2dRect { rows, cols } => build_topology(
                Topology::Grid2dRect { rows: *rows, cols: *cols },
                self.n,
                self.mu2_comm,
                None,
            )?,
            TopologySpec::Custom(path) => read_edge_list(path)?,
        };
        Ok(g)
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, ExperimentError> {
        match &self.dataset {
            DatasetSpec::Synthetic { seed, separability } => Ok(match self.loss {
                Loss::Logistic => {
                    synth_classification(*seed, self.n, self.m, self.d, *separability, self.sigma)
                }
                Loss::Quadratic => {
                    synth_regression(*seed, self.n, self.m, self.d, *separability, self.sigma)
                }
            }),
            DatasetSpec::Libsvm { path, seed, assign } => {
                let ds = load_libsvm(path, self.d)?;
                Ok(problem_from_dataset(
                    &ds, self.n, self.m, self.loss, self.sigma, *assign, *seed,
                )?)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub plan: SamplingPlan,
    pub spectra: SpectralData,
    pub s_comp: f64,
    pub kappa_s: f64,
    pub per_seed_files: Vec<PathBuf>,
    pub aggregate_file: PathBuf,
    pub manifest_file: PathBuf,
    pub warnings: Vec<String>,
}

type SeedRow = (usize, f64, f64, f64);

fn csv_row(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v}");
    }
    line.push('\n');
    line
}

/// Build everything from the config and run one solver pass per seed,
/// emitting per-seed CSVs (`iteration,idealized_time,primal_error_y,
/// primal_error_v`), an aggregate CSV (means and standard errors across
/// seeds), and the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    let graph = config.build_graph()?;
    if graph.n() != config.n {
        return Err(ConfigError::Invalid(format!(
            "topology has {} nodes but n = {}",
            graph.n(),
            config.n
        ))
        .into());
    }
    let problem = config.build_problem()?;
    let aug = augment(&graph, problem.smoothness(), problem.sigma(), VirtualWeights::Standard)?;
    let spectra = spectral_quantities(&aug);
    let summary = problem.summary();
    let plan = select_parameters(
        &aug,
        &spectra,
        &summary,
        config.tau,
        Overrides { p_comm: config.p_comm_override },
    )?;

    let mut warnings = Vec::new();
    if plan.rho_clamped {
        warnings.push(format!(
            "contraction factor clamped for prox validity: {} -> {}",
            plan.rho_unclamped, plan.rho
        ));
    }
    if !(plan.p_comp > plan.p_comm_max || config.tau > 1.0) {
        warnings.push(
            "throughput envelope hypothesis violated (p_comp <= p_comm_max and tau <= 1)".into(),
        );
    }

    let oracle_theta = if config.oracle { Some(solve_reference(&problem, 1e-9)?) } else { None };

    std::fs::create_dir_all(&config.output_dir)?;
    let mut per_seed_files = Vec::new();
    let mut per_seed_rows: Vec<Vec<SeedRow>> = Vec::new();
    for &seed in &config.seeds {
        let schedule = sample_schedule(&plan, config.k_iters, seed);
        let trace = simulate_time(&schedule.events, &aug, config.tau);
        let run_cfg = AdfsRunConfig {
            events: &schedule.events,
            record_every: config.record_every,
            mode: ExecMode::Sparse,
            oracle: oracle_theta.as_deref(),
        };
        let out = run_adfs(&problem, &aug, &plan, &run_cfg)?;
        let mut csv = String::from("iteration,idealized_time,primal_error_y,primal_error_v\n");
        let mut rows = Vec::new();
        for s in &out.trajectory {
            let time = if s.t == 0 { 0.0 } else { trace.t_max_prefix[s.t - 1] };
            csv.push_str(&csv_row(&[s.t as f64, time, s.f_err_y, s.f_err_v]));
            rows.push((s.t, time, s.f_err_y, s.f_err_v));
        }
        let path = config.output_dir.join(format!("seed_{seed}.csv"));
        std::fs::write(&path, csv)?;
        per_seed_files.push(path);
        per_seed_rows.push(rows);
    }

    // Aggregate across seeds (all runs share the recording grid).
    let aggregate_file = config.output_dir.join("aggregate.csv");
    {
        let mut csv = String::from(
            "iteration,idealized_time_mean,primal_error_y_mean,primal_error_y_stderr,\
             primal_error_v_mean,primal_error_v_stderr\n",
        );
        let rows = per_seed_rows[0].len();
        let s = config.seeds.len() as f64;
        for r in 0..rows {
            let t = per_seed_rows[0][r].0;
            let mean =
                |f: &dyn Fn(&SeedRow) -> f64| {
                    per_seed_rows.iter().map(|rows| f(&rows[r])).sum::<f64>() / s
                };
            let stderr = |f: &dyn Fn(&SeedRow) -> f64, mu: f64| {
                if config.seeds.len() < 2 {
                    0.0
                } else {
                    let var = per_seed_rows
                        .iter()
                        .map(|rows| {
                            let v = f(&rows[r]) - mu;
                            v * v
                        })
                        .sum::<f64>()
                        / (s - 1.0);
                    (var / s).sqrt()
                }
            };
            let time_mean = mean(&|row| row.1);
            let ey = mean(&|row| row.2);
            let ev = mean(&|row| row.3);
            let sy = stderr(&|row| row.2, ey);
            let sv = stderr(&|row| row.3, ev);
            csv.push_str(&csv_row(&[t as f64, time_mean, ey, sy, ev, sv]));
        }
        std::fs::write(&aggregate_file, csv)?;
    }

    let manifest_file = config.output_dir.join("manifest.txt");
    {
        let mut text = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(text, "{k} = {v}");
        };
        put("c_tau", format!("{}", plan.c_tau));
        put("delta_p", format!("{}", plan.delta_p));
        put("gamma", format!("{}", spectra.gamma));
        put("gamma_tilde", format!("{}", spectra.gamma_tilde));
        put("kappa_s", format!("{}", summary.kappa_s));
        put("p_comm", format!("{}", plan.p_comm));
        put("p_comm_max", format!("{}", plan.p_comm_max));
        put("p_comp", format!("{}", plan.p_comp));
        put("rho", format!("{}", plan.rho));
        put("rho_clamped", format!("{}", plan.rho_clamped));
        put("rho_unclamped", format!("{}", plan.rho_unclamped));
        put("s_comp", format!("{}", summary.s_comp));
        put("sigma_a", format!("{}", plan.sigma_a));
        put("tau", format!("{}", plan.tau));
        std::fs::write(&manifest_file, text)?;
    }

    Ok(RunSummary {
        plan,
        spectra,
        s_comp: summary.s_comp,
        kappa_s: summary.kappa_s,
        per_seed_files,
        aggregate_file,
        manifest_file,
        warnings,
    })
}
