//! Locally-synchronous execution: each update blocks only its participants,
//! so a schedule's wall time is governed by the per-node availability
//! recursion, not by global rounds. Doubling the network size keeps cutting
//! the time per event.
//!
//! Run with: `cargo run --release --example local_synchrony`

use adfs::graph::{augment, build_topology, spectral_quantities, Topology, VirtualWeights};
use adfs::problem::SmoothnessSummary;
use adfs::schedule::{estimate_throughput, simulate_time};
use adfs::solver::{select_parameters, Overrides};

fn main() {
    // Hand trace on a 4-node toy graph, tau = 2: the middle communication
    // must wait for the local update to finish.
    let g = build_topology(Topology::Custom, 4, 0.5, Some(&[(0, 2), (1, 3), (0, 1), (2, 3)]))
        .unwrap();
    let aug = augment(&g, &[1.0; 4], &[1.0; 4], VirtualWeights::Standard).unwrap();
    let local_d = aug.virtual_col(3, 0) as u32;
    let events = vec![1, 2, 0, local_d, 3]; // (A,C), (B,D), (A,B), local D, (C,D)
    let trace = simulate_time(&events, &aug, 2.0);
    println!("toy schedule event windows:");
    for (i, &col) in events.iter().enumerate() {
        let (k, l) = aug.col_endpoints(col as usize);
        let kind = if aug.is_virtual_col(col as usize) { "local" } else { "comm " };
        println!(
            "  {kind} ({k},{l}): [{}, {}]",
            trace.start[i], trace.finish[i]
        );
    }
    println!("T_max = {}\n", trace.t_max());

    // Throughput scaling on grids: time per event drops as the grid grows.
    let m = 10;
    println!("{:>6} {:>10} {:>12} {:>8}", "n", "p_comm", "mean T(t)/t", "C");
    for &n in &[4usize, 16, 64] {
        let graph = build_topology(Topology::Grid2d, n, 0.5, None).unwrap();
        let l = vec![1.0; n * m];
        let sigma = vec![1.0; n];
        let aug = augment(&graph, &l, &sigma, VirtualWeights::Standard).unwrap();
        let spectra = spectral_quantities(&aug);
        let summary = SmoothnessSummary::from_parts(n, m, &l, &sigma);
        let plan =
            select_parameters(&aug, &spectra, &summary, 5.0, Overrides::default()).unwrap();
        let report = estimate_throughput(&plan, &aug, 5.0, 10_000, 10, 1);
        println!(
            "{n:>6} {:>10.4} {:>12.4} {:>8.2}",
            plan.p_comm, report.mean_time_per_event, report.c_empirical
        );
    }
}
