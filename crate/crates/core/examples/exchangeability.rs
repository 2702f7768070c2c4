//! The law of the ranking does not depend on which labels are ranked.
use invariant_shuffles::ordering::exchangeability_test;
use invariant_shuffles::stats::ALPHA_SUITE;
use invariant_shuffles::{LabelSet, QuasiUniformMeasure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let gsr = QuasiUniformMeasure::gsr();
    let small = LabelSet::new(vec![1, 2, 3]).unwrap();
    let spread = LabelSet::new(vec![5, 40, 1000]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let report = exchangeability_test(&gsr, &small, &spread, 100_000, ALPHA_SUITE, &mut rng).unwrap();
    println!("two-sample chi-square: {:?}", report.test);
    for ((perm, a), (_, b)) in report.first.iter().zip(&report.second) {
        println!("{perm} {a:>6} {b:>6}");
    }
}
