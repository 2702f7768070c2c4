//! Purely atomic measures give deterministic maps; the map walk has the type-2 law.
use invariant_shuffles::kernels::{kernel_matrix, shuffle_map_from_measure, CouplingSampler, KernelMode};
use invariant_shuffles::oracle::{exact_step_distribution, StepType};
use invariant_shuffles::rational::{format_rational, rational};
use invariant_shuffles::QuasiUniformMeasure;

fn main() {
    for name in ["gsr", "a-shuffle:4", "gsr-conjugate", "reversal"] {
        let mu = QuasiUniformMeasure::named(name).unwrap();
        let map = shuffle_map_from_measure(&mu).unwrap();
        println!("{name}:\n{map}");
        let xs: Vec<String> = (0..8)
            .map(|k| format_rational(&map.eval(&rational(k, 8))))
            .collect();
        println!("  S(k/8) = {}", xs.join(" "));

        let by_map = kernel_matrix(3, &CouplingSampler::Deterministic(map), KernelMode::Exact).unwrap();
        let two = exact_step_distribution(&mu, 3, StepType::Two).unwrap();
        println!("  map law equals type-2 law on 3 cards: {}", by_map == two);
    }
    if let Err(e) = shuffle_map_from_measure(&QuasiUniformMeasure::lebesgue()) {
        println!("lebesgue: {e}");
    }
}
