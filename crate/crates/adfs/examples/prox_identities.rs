//! Single-sample proximal operators: warm-started Newton on the 1-D
//! optimality condition, and the conjugate prox evaluated through the primal
//! prox only. The second one is what virtual-node updates run; its validity
//! requires the step to stay below the sample smoothness.
//!
//! Run with: `cargo run --release --example prox_identities`

use adfs::problem::{prox_conjugate_tilde_vec, prox_loss_1d, Loss, SampleView};

fn main() {
    // prox of eta * log(1 + exp(-v)) around x, solved to |grad| <= 1e-12.
    for (eta, x) in [(0.5, 0.0), (2.0, -1.0), (10.0, 3.0)] {
        let v = prox_loss_1d(Loss::Logistic, 1.0, eta, x, x).unwrap();
        let grad = (v - x) / eta - 1.0 / (1.0 + v.exp());
        println!("logistic prox(eta={eta}, x={x}) = {v:.12} (grad {grad:.2e})");
    }

    // Quadratic losses have the closed form (x + eta b) / (1 + eta).
    let v = prox_loss_1d(Loss::Quadratic, 2.0, 0.5, 1.0, 0.0).unwrap();
    println!("quadratic prox = {v} (closed form {})", (1.0 + 0.5 * 2.0) / 1.5);

    // The tilted-conjugate prox through the primal prox: for a scalar
    // quadratic sample the result is exactly z - eta * b / s.
    let feature = [2.0f64];
    let sample = SampleView {
        loss: Loss::Quadratic,
        target: 0.7,
        feature: &feature,
        norm_sq: 4.0,
        l_smooth: 4.0,
    };
    let mut warm = 0.0;
    for eta_t in [0.1, 1.0, 3.9] {
        let (prox, consumed) =
            prox_conjugate_tilde_vec(&sample, eta_t, &[1.5], &mut warm).unwrap();
        println!(
            "conjugate prox at eta~ = {eta_t}: {:.6} (expected {:.6}), consumed {:.6}",
            prox[0],
            1.5 - eta_t * 0.7 / 2.0,
            consumed[0]
        );
    }

    // Past the smoothness the identity breaks down and the call reports it:
    // the contraction factor must be clamped instead.
    let err = prox_conjugate_tilde_vec(&sample, 1.5 * sample.l_smooth, &[1.5], &mut warm);
    println!("step 1.5x too large: {:?}", err.err().unwrap().to_string());
}
