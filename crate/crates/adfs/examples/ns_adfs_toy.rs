//! The nonsmooth solver variant on a 2-machine toy: without dual strong
//! convexity the coefficients follow the lazy convex-mode recursion and the
//! dual gap closes sublinearly (the guarantee is 1/t^2; these conjugate-
//! friendly quadratic test losses do better).
//!
//! Run with: `cargo run --release --example ns_adfs_toy`

use adfs::fit_slope;
use adfs::graph::{build_topology, Topology};
use adfs::problem::{solve_normal_equations, synth_regression};
use adfs::solver::NsAdfs;

fn main() {
    let problem = synth_regression(3, 2, 2, 2, 0.3, 1.0);
    let graph = build_topology(Topology::Complete, 2, 0.5, None).unwrap();
    let theta_star = solve_normal_equations(&problem).unwrap();
    let f_primal_star = problem.primal_value(&theta_star);

    let ns = NsAdfs::new(&graph, &problem);
    println!("p_comm = {:.4}, S = {:.4}, p_R = {:.4}", ns.p_comm, ns.s, ns.p_r);
    let out = ns.run(10_000, 7_700, 100).unwrap();
    // strong duality: the dual optimum over reachable states is -F(theta*)
    let mut pts = Vec::new();
    println!("{:>7} {:>14}", "t", "dual gap");
    for &(t, v) in &out.trajectory {
        let gap = v + f_primal_star;
        if t >= 100 {
            pts.push(((t as f64).ln(), gap.max(1e-300).ln()));
        }
        if t % 2000 == 0 && t > 0 {
            println!("{t:>7} {gap:>14.4e}");
        }
    }
    println!("log-log slope over t in [100, 10^4]: {:.2}", fit_slope(&pts));
}
