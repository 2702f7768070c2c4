//! Steps driven by a doubly stochastic grid copula instead of a measure.
use invariant_shuffles::kernels::{kernel_matrix, marginal_samples, CouplingSampler, GridCopula, KernelMode};
use invariant_shuffles::rational::{integer, rational};
use invariant_shuffles::stats::{ks_uniform, ALPHA_SINGLE};

fn main() {
    let third = rational(1, 3);
    let grid = GridCopula::exact(vec![
        vec![integer(0), third.clone(), integer(0)],
        vec![integer(0), integer(0), third.clone()],
        vec![third, integer(0), integer(0)],
    ])
    .unwrap();
    let cs = CouplingSampler::GridCopula(grid);
    println!("{}", cs.to_json());

    let law = kernel_matrix(3, &cs, KernelMode::Exact).unwrap();
    println!("step law on 3 cards:\n{law}");

    let (us, vs) = marginal_samples(&cs, 50_000, 1);
    println!("KS u: {:?}", ks_uniform(&us, ALPHA_SINGLE).unwrap());
    println!("KS v: {:?}", ks_uniform(&vs, ALPHA_SINGLE).unwrap());

    let skewed = GridCopula::float(vec![vec![0.5, 0.1], vec![0.5, 0.9]]);
    println!("unbalanced grid: {:?}", skewed.err());
}
