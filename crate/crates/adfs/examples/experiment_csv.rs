//! Config-driven experiment: parse a flat key-value config, run one solver
//! pass per seed, and emit per-seed CSVs, a seed-aggregated CSV, and a
//! manifest of the derived constants. Identical config, identical bytes.
//!
//! Run with: `cargo run --release --example experiment_csv`

use adfs::experiment::{run_experiment, ExperimentConfig};

fn main() {
    let dir = std::env::temp_dir().join("adfs_example_run");
    let _ = std::fs::remove_dir_all(&dir);
    let config_text = format!(
        "topology = grid2d\n\
         n = 4\n\
         m = 20\n\
         d = 5\n\
         loss = logistic\n\
         sigma = 1.0\n\
         tau = 5.0\n\
         k_iters = 4000\n\
         seeds = 1,2,3\n\
         dataset = synthetic\n\
         data_seed = 42\n\
         separability = 1.0\n\
         record_every = 500\n\
         output_dir = {}\n",
        dir.display()
    );
    let config = ExperimentConfig::parse(&config_text).unwrap();
    let summary = run_experiment(&config).unwrap();

    println!("manifest:");
    print!("{}", std::fs::read_to_string(&summary.manifest_file).unwrap());
    for w in &summary.warnings {
        println!("warning: {w}");
    }
    println!("\naggregate (first and last rows):");
    let agg = std::fs::read_to_string(&summary.aggregate_file).unwrap();
    let lines: Vec<&str> = agg.lines().collect();
    println!("{}", lines[0]);
    println!("{}", lines[1]);
    println!("{}", lines[lines.len() - 1]);
    println!("\nwrote {} per-seed files under {}", summary.per_seed_files.len(), dir.display());
}
