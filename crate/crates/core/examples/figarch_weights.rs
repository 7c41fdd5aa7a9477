//! Lag weights of the truncated FIGARCH(1, d, 1) expansion. Shows the slow
//! hyperbolic decay for several memory parameters and a parameter set
//! rejected because a weight turns negative.
//!
//! cargo run --release --example figarch_weights -- [truncation]

use garchnn::garch::figarch_weights;

fn main() {
    let t: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    println!("{:>4} {:>10} {:>10} {:>10}", "lag", "d=0.2", "d=0.45", "d=0.8");
    let sets: Vec<Vec<f64>> = [0.2, 0.45, 0.8]
        .iter()
        .map(|&d| figarch_weights(0.3, 0.1, d, t).unwrap())
        .collect();
    for j in [1, 2, 3, 5, 10, 20, 40, t - 1] {
        if j < t {
            println!("{j:>4} {:>10.6} {:>10.6} {:>10.6}", sets[0][j], sets[1][j], sets[2][j]);
        }
    }
    for (d, w) in [0.2, 0.45, 0.8].iter().zip(&sets) {
        println!("d={d}: sum of weights {:.4}", w.iter().sum::<f64>());
    }
    match figarch_weights(0.9, 0.0, 0.1, t) {
        Ok(_) => println!("beta=0.9, phi=0, d=0.1 accepted"),
        Err(e) => println!("beta=0.9, phi=0, d=0.1 rejected: {e}"),
    }
}
