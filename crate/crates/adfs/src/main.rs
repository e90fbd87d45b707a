//! Thin command-line front end: run experiments from a config file, run
//! verification suites, or print the spectral summary of a graph file.
//! Exit codes: 0 ok, 1 invalid input, 2 runtime failure (including failed
//! verification checks).

use adfs::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use adfs::graph::{read_edge_list, GraphError};
use adfs::verify::{run_suite, Suite};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "adfs", about = "Decentralized finite-sum optimization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config-driven experiment and write CSVs plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a verification suite: spectral, prox, apcg, adfs, timing, or all.
    Verify {
        #[arg(long)]
        suite: String,
    },
    /// Print spectral quantities of an edge-list graph file.
    Spectra {
        #[arg(long)]
        graph: PathBuf,
    },
}

fn main() -> ExitCode {
    // Usage problems are validation errors (exit 1); --help/--version exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Verify { suite } => cmd_verify(&suite),
        Command::Spectra { graph } => cmd_spectra(&graph),
    }
}

fn cmd_run(path: &Path) -> ExitCode {
    let config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_experiment(&config) {
        Ok(summary) => {
            println!("rho = {}", summary.plan.rho);
            println!("p_comm = {}", summary.plan.p_comm);
            println!("gamma_tilde = {}", summary.spectra.gamma_tilde);
            println!("sigma_a = {}", summary.plan.sigma_a);
            println!("s_comp = {}", summary.s_comp);
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.per_seed_files {
                println!("wrote {}", f.display());
            }
            println!("wrote {}", summary.aggregate_file.display());
            println!("wrote {}", summary.manifest_file.display());
            ExitCode::SUCCESS
        }
        Err(ExperimentError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_verify(name: &str) -> ExitCode {
    let Some(suite) = Suite::from_name(name) else {
        eprintln!("unknown suite {name:?}; expected spectral, prox, apcg, adfs, timing, or all");
        return ExitCode::from(1);
    };
    let checks = run_suite(suite);
    let mut all_ok = true;
    for check in &checks {
        println!("{}", check.line());
        all_ok &= check.passed;
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_spectra(path: &Path) -> ExitCode {
    let graph = match read_edge_list(path) {
        Ok(g) => g,
        Err(e @ GraphError::Io(_)) => {
            eprintln!("cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("invalid graph file: {e}");
            return ExitCode::from(1);
        }
    };
    println!("n = {}", graph.n());
    println!("edges = {}", graph.num_edges());
    if graph.num_edges() == 0 {
        println!("lambda_min_pos = 0");
        println!("lambda_max = 0");
        println!("gamma = 1");
        return ExitCode::SUCCESS;
    }
    let eig = graph.laplacian().symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lmax = *values.last().unwrap();
    let lmin_pos = values.iter().cloned().find(|&v| v > 1e-10 * lmax).unwrap_or(0.0);
    println!("lambda_min_pos = {lmin_pos}");
    println!("lambda_max = {lmax}");
    println!("gamma = {}", lmin_pos / lmax);
    // effective resistance per edge through the Laplacian pseudo-inverse
    let thresh = 1e-10 * lmax;
    for edge in graph.edges() {
        let mut r = 0.0;
        for idx in 0..graph.n() {
            if eig.eigenvalues[idx] > thresh {
                let u = eig.eigenvectors[(edge.k, idx)] - eig.eigenvectors[(edge.l, idx)];
                r += u * u / eig.eigenvalues[idx];
            }
        }
        println!("resistance {} {} = {}", edge.k, edge.l, edge.mu2 * r);
    }
    ExitCode::SUCCESS
}
