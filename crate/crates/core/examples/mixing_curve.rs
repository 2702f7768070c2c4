//! Exact total variation to uniform for riffle shuffles on small decks.
use invariant_shuffles::oracle::{mixing_curve, StepType};
use invariant_shuffles::rational::to_f64;
use invariant_shuffles::QuasiUniformMeasure;

fn main() {
    let n = 5;
    for name in ["gsr", "a-shuffle:3", "mixed", "identity"] {
        let mu = QuasiUniformMeasure::named(name).unwrap();
        let curve = mixing_curve(&mu, n, StepType::Two, 10).unwrap();
        let row: Vec<String> = curve.iter().map(|v| format!("{:.4}", to_f64(v))).collect();
        println!("{name:>12}: {}", row.join(" "));
    }
}
