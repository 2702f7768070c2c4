//! Random orderings of arbitrary integer labels, with a histogram of rankings.
use std::collections::BTreeMap;

use invariant_shuffles::{sample_ordering, LabelSet, QuasiUniformMeasure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let measure = std::env::args().nth(1).unwrap_or_else(|| "a-shuffle:3".into());
    let mu = QuasiUniformMeasure::named(&measure).expect("unknown measure");
    let labels = LabelSet::new(vec![-4, 0, 17, 1000]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut histogram = BTreeMap::new();
    for i in 0..20_000 {
        let ranking = sample_ordering(&mu, &labels, &mut rng).into_permutation();
        if i < 3 {
            // ranking[k] is the position of the k-th smallest label
            println!("ordering {i}: {}", ranking.one_line());
        }
        *histogram.entry(ranking).or_insert(0u32) += 1;
    }
    for (perm, count) in histogram {
        println!("{} {count}", perm.one_line());
    }
}
