//! Build communication topologies, attach virtual sample nodes, and inspect
//! the spectral quantities that drive step sizes and the convergence rate.
//!
//! Run with: `cargo run --release --example topology_spectra`

use adfs::graph::{
    augment, build_topology, format_edge_list, gap_preservation_report, spectral_quantities,
    Topology, VirtualWeights,
};

fn main() {
    for (name, kind, n) in [
        ("complete K5", Topology::Complete, 5),
        ("ring C6", Topology::Ring, 6),
        ("grid 3x3", Topology::Grid2d, 9),
    ] {
        let graph = build_topology(kind, n, 0.5, None).unwrap();
        // two samples per node, unit smoothness and regularization
        let m = 2;
        let aug = augment(&graph, &vec![1.0; n * m], &vec![1.0; n], VirtualWeights::Standard)
            .unwrap();
        let spec = spectral_quantities(&aug);
        println!("{name}: {} nodes, {} edges in the base graph", graph.n(), graph.num_edges());
        println!("  augmented: {} nodes, {} edges", aug.num_nodes(), aug.num_cols());
        println!("  lambda_min_pos(L) = {:.4}", spec.lambda_min_l);
        println!("  gamma = {:.4}, gamma_tilde = {:.4}", spec.gamma, spec.gamma_tilde);
        println!("  sigma_a = {:.6}", spec.sigma_a);
        let r_comm = &spec.resistance[..aug.num_comm_cols()];
        println!(
            "  communication-edge resistance range: [{:.4}, {:.4}]",
            r_comm.iter().cloned().fold(f64::MAX, f64::min),
            r_comm.iter().cloned().fold(f64::MIN, f64::max),
        );
        let report = gap_preservation_report(&aug);
        println!(
            "  eigenvalue lower bound: {:.5} >= {:.5} (holds: {})",
            report.lhs, report.rhs, report.holds
        );
    }

    // The edge-list text format round-trips through a string or a file.
    let ring = build_topology(Topology::Ring, 4, 0.5, None).unwrap();
    println!("\nedge-list export of C4:\n{}", format_edge_list(&ring));
}
