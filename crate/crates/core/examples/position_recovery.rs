//! Reading a card's hidden position back off the ordering it induces.
use invariant_shuffles::ordering::empirical_positions;
use invariant_shuffles::QuasiUniformMeasure;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let gsr = QuasiUniformMeasure::gsr();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for window in [100, 1_000, 10_000, 100_000] {
        let (est, truth) = empirical_positions(&gsr, 0, window, &mut rng).unwrap();
        println!(
            "N = {window:>6}: x_hat {:.4} (X = {:.4}), y_hat {:.4} (Y = {:.4})",
            est.x_hat,
            truth.x().value(),
            est.y_hat,
            truth.y().value()
        );
    }
}
