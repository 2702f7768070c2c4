//! A few trajectories of the type-1 and type-2 walks on five cards.
use invariant_shuffles::kernels::{walk, CouplingSampler};
use invariant_shuffles::{Perm, QuasiUniformMeasure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let gsr = QuasiUniformMeasure::gsr();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (label, cs) in [("type one", CouplingSampler::NuMu(gsr.clone())), ("type two", CouplingSampler::NuMuStar(gsr))] {
        println!("{label}");
        for _ in 0..3 {
            let states: Vec<String> = walk(&cs, 6, &mut rng, Perm::identity(5)).iter().map(Perm::one_line).collect();
            println!("  {}", states.join(" -> "));
        }
    }
}
