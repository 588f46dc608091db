//! Accuracy of 200 random commands under increasing reply loss.
//!
//! ```text
//! cargo run --release --example accuracy_experiment
//! ```

use gsm_home::sim::experiment::Workload;

fn main() {
    println!("{:>9} {:>10} {:>8} {:>8}", "loss", "mean acc", "min", "max");
    for loss_rate in [0.0, 0.01, 0.02, 0.05, 0.1] {
        let w = Workload {
            loss_rate,
            ..Workload::default()
        };
        let runs: Vec<f64> = (0..30)
            .map(|seed| w.run(seed).unwrap().accuracy_pct)
            .collect();
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        let min = runs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = runs.iter().copied().fold(0.0, f64::max);
        println!("{loss_rate:>9.2} {mean:>9.2}% {min:>7.1}% {max:>7.1}%");
    }
}
