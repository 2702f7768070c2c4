//! Two cards under the GSR measure: exact law versus the sampler.
use invariant_shuffles::oracle::exact_ordering_distribution;
use invariant_shuffles::{sample_ordering, LabelSet, QuasiUniformMeasure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let gsr = QuasiUniformMeasure::gsr();
    println!("measure: {gsr}");
    let law = exact_ordering_distribution(&gsr, 2).unwrap();
    println!("exact law:\n{law}");

    let labels = LabelSet::first(2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let reversed = (0..draws)
        .filter(|_| sample_ordering(&gsr, &labels, &mut rng).precedes(2, 1) == Some(true))
        .count();
    println!("sampled P(2 before 1) = {:.4}", reversed as f64 / draws as f64);
}
