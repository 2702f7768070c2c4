//! A measure, its conjugate, and the inverse-CDF relation between them.
use invariant_shuffles::rational::{format_rational, rational};
use invariant_shuffles::QuasiUniformMeasure;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mu = QuasiUniformMeasure::mixed_fixture();
    let conj = mu.conjugate();
    println!("mu  = {mu}\nmu' = {conj}");
    println!("diffuse mass {}", format_rational(&mu.diffuse_mass()));

    println!("{:>5} {:>8} {:>8} {:>20}", "y", "mu[0,y]", "mu'[0,y]", "inf{x: mu[0,x] > y}");
    for k in 0..=8 {
        let y = rational(k, 8);
        println!(
            "{:>5} {:>8} {:>8} {:>20}",
            format_rational(&y),
            format_rational(&mu.cdf(&y).unwrap()),
            format_rational(&conj.cdf(&y).unwrap()),
            format_rational(&mu.quantile(&y, true).unwrap()),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let s = mu.sample_conjugate_pair(&mut rng);
        println!("X = {:.4}, Y = {:.4}, gap {:?}", s.x().value(), s.y().value(), s.gap_index());
    }
}
