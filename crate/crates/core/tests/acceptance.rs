//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::Instant;

use invariant_shuffles::kernels::{
    self, shuffle_map_from_measure, CouplingMixture, CouplingSampler, GridCopula, KernelMode,
};
use invariant_shuffles::measure::{
    is_quasi_uniform, validate, AtomSide, CandidateMeasure, GapInterval, MeasureSpec, QuasiUniformMeasure,
};
use invariant_shuffles::oracle::{
    exact_ordering_distribution, exact_step_distribution, mixing_curve, StepType, TransitionMatrix,
};
use invariant_shuffles::ordering::{empirical_positions, exchangeability_test, sample_ordering, LabelSet};
use invariant_shuffles::rational::{format_rational, integer, rational, to_f64, Rational};
use invariant_shuffles::stats::{self, ALPHA_SINGLE, ALPHA_SUITE};
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const BUILT_INS: [&str; 6] = ["lebesgue", "gsr", "a-shuffle:3", "gap(0,1,left)", "gsr-conjugate", "mixed"];
const ATOMIC: [&str; 5] = ["gsr", "a-shuffle:3", "gap(0,1,left)", "gsr-conjugate", "identity"];

fn measure(name: &str) -> QuasiUniformMeasure {
    QuasiUniformMeasure::named(name).expect("built-in measure")
}

fn require(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

/// Two cards, GSR: each card independently takes the lower or upper atom;
/// label 2 ends below label 1 exactly when it takes the lower atom and label 1
/// the upper one.
fn gsr_two_card_law() -> Outcome {
    let mut reversed = Rational::from_integer(0.into());
    for bits in 0..4u8 {
        let (first_upper, second_upper) = (bits & 1 == 1, bits & 2 == 2);
        if first_upper && !second_upper {
            reversed += rational(1, 4);
        }
    }
    require(reversed == rational(1, 4), "binary enumeration did not give 1/4")?;
    let law = exact_ordering_distribution(&measure("gsr"), 2).map_err(|e| e.to_string())?;
    let oracle = law.prob(&"21".parse().unwrap());
    require(oracle == reversed, format!("oracle gives {}", format_rational(&oracle)))?;

    let m = measure("gsr");
    let labels = LabelSet::first(2);
    let draws = 100_000u64;
    let counts = stats::parallel_counts(101, draws, |rng| sample_ordering(&m, &labels, rng).precedes(2, 1) == Some(true));
    let freq = counts.get(&true).copied().unwrap_or(0) as f64 / draws as f64;
    require((freq - 0.25).abs() <= 0.0041, format!("sampler frequency {freq:.5} outside 1/4 ± 0.0041"))?;
    Ok(format!("P(2 before 1) = 1/4 exactly; sampler {freq:.5} over 10^5 draws"))
}

fn oracle_sampler_concordance() -> Outcome {
    let mut worst = (0.0f64, String::new());
    for (i, name) in BUILT_INS.iter().enumerate() {
        let m = measure(name);
        for n in 2..=5usize {
            let law = exact_ordering_distribution(&m, n).map_err(|e| e.to_string())?;
            let labels = LabelSet::first(n);
            let seed = 200 + 10 * i as u64 + n as u64;
            let counts = stats::parallel_counts(seed, 1_000_000, |rng| sample_ordering(&m, &labels, rng).into_permutation());
            let tv = stats::empirical_tv(&counts, &law).map_err(|e| e.to_string())?;
            if tv > worst.0 {
                worst = (tv, format!("{name}, n = {n}"));
            }
            require(tv < 0.01, format!("{name}, n = {n}: TV {tv:.4}"))?;
        }
    }
    Ok(format!("24 cases at 10^6 draws; largest TV {:.4} ({})", worst.0, worst.1))
}

fn route_equivalence() -> Outcome {
    let mixed = measure("mixed");
    let cs = CouplingSampler::NuMu(mixed.clone());
    let mut worst = 0.0f64;
    for n in 2..=5usize {
        let law = exact_ordering_distribution(&mixed, n).map_err(|e| e.to_string())?;
        let counts = stats::parallel_counts(300 + n as u64, 1_000_000, |rng| kernels::step_sigma(n, &cs, rng));
        let tv = stats::empirical_tv(&counts, &law).map_err(|e| e.to_string())?;
        worst = worst.max(tv);
        require(tv < 0.01, format!("mixed fixture, n = {n}: TV {tv:.4}"))?;
    }
    for name in ATOMIC {
        let m = measure(name);
        for n in 1..=5 {
            let kernel = kernels::kernel_matrix(n, &CouplingSampler::NuMu(m.clone()), KernelMode::Exact)
                .map_err(|e| e.to_string())?;
            let ordering = exact_ordering_distribution(&m, n).map_err(|e| e.to_string())?;
            require(kernel == ordering, format!("{name}, n = {n}: exact routes differ"))?;
        }
    }
    Ok(format!(
        "mixed fixture Monte Carlo TV <= {worst:.4} (n = 2..5); exact equality for {} atomic measures, n <= 5",
        ATOMIC.len()
    ))
}

fn deterministic_collapse() -> Outcome {
    for name in ["gsr", "a-shuffle:3"] {
        let m = measure(name);
        let cs = CouplingSampler::Deterministic(shuffle_map_from_measure(&m).map_err(|e| e.to_string())?);
        for n in 1..=5 {
            let map_law = kernels::kernel_matrix(n, &cs, KernelMode::Exact).map_err(|e| e.to_string())?;
            let two = exact_step_distribution(&m, n, StepType::Two).map_err(|e| e.to_string())?;
            require(map_law == two, format!("{name}, n = {n}: map law differs from type two"))?;
        }
    }
    let map = shuffle_map_from_measure(&measure("gsr")).map_err(|e| e.to_string())?;
    for k in 0..1000 {
        let x = rational(k, 1000);
        let doubled = &x * integer(2);
        let expected = &doubled - doubled.floor();
        require(map.eval(&x) == expected, format!("S({k}/1000) = {}", format_rational(&map.eval(&x))))?;
    }
    Ok("map laws equal type-2 laws for gsr and a-shuffle:3, n <= 5; S = 2x mod 1 at 1000 grid points".into())
}

fn marginals() -> Outcome {
    let grid = GridCopula::exact(vec![
        vec![rational(1, 6), rational(1, 6), integer(0)],
        vec![integer(0), rational(1, 6), rational(1, 6)],
        vec![rational(1, 6), integer(0), rational(1, 6)],
    ])
    .map_err(|e| e.to_string())?;
    let float_grid = GridCopula::float(vec![vec![0.1, 0.4], vec![0.4, 0.1]]).map_err(|e| e.to_string())?;
    let mixture = CouplingMixture::new(vec![
        (rational(1, 3), CouplingSampler::NuMu(measure("gsr"))),
        (rational(2, 3), CouplingSampler::GridCopula(grid.clone())),
    ])
    .map_err(|e| e.to_string())?;
    let samplers: Vec<(&str, CouplingSampler)> = vec![
        ("nu_mu(gsr)", CouplingSampler::NuMu(measure("gsr"))),
        ("nu_mu(mixed)", CouplingSampler::NuMu(measure("mixed"))),
        ("nu_mu_star(gsr)", CouplingSampler::NuMuStar(measure("gsr"))),
        ("nu_mu_star(mixed)", CouplingSampler::NuMuStar(measure("mixed"))),
        ("deterministic(gsr)", CouplingSampler::Deterministic(shuffle_map_from_measure(&measure("gsr")).unwrap())),
        (
            "deterministic(a-shuffle:3)",
            CouplingSampler::Deterministic(shuffle_map_from_measure(&measure("a-shuffle:3")).unwrap()),
        ),
        ("grid(exact)", CouplingSampler::GridCopula(grid)),
        ("grid(float)", CouplingSampler::GridCopula(float_grid)),
        ("mixture", CouplingSampler::Mixture(mixture)),
    ];
    let mut smallest = 1.0f64;
    for (i, (name, cs)) in samplers.iter().enumerate() {
        let (us, vs) = kernels::marginal_samples(cs, 100_000, 500 + i as u64);
        for (axis, xs) in [("u", &us), ("v", &vs)] {
            let r = stats::ks_uniform(xs, ALPHA_SINGLE).map_err(|e| e.to_string())?;
            smallest = smallest.min(r.p_value);
            require(r.passed, format!("{name}: {axis}-marginal KS p = {:.4}", r.p_value))?;
        }
    }
    // float grids: a row sum off by 2^-39 (about 1.8e-12) is rejected
    let off = 2f64.powi(-39);
    let bad = vec![vec![0.25 + off, 0.25], vec![0.25, 0.25 - off]];
    require(GridCopula::float(bad).is_err(), "float grid with a row sum off by 1.8e-12 accepted")?;
    let exact_bad = vec![vec![rational(1, 4) + rational(1, 1_000_000_000_000_000), rational(1, 4)], vec![rational(1, 4), rational(1, 4)]];
    require(GridCopula::exact(exact_bad).is_err(), "rational grid off by 1e-18 accepted")?;
    Ok(format!("{} samplers x 2 marginals pass KS at 0.01 (smallest p {smallest:.4}); off-by-1e-12 grids rejected", samplers.len()))
}

fn double_stochasticity() -> Outcome {
    let mut matrices = 0;
    for name in ATOMIC {
        let m = measure(name);
        for n in 1..=5 {
            for cs in [CouplingSampler::NuMu(m.clone()), CouplingSampler::NuMuStar(m.clone())] {
                let law = kernels::kernel_matrix(n, &cs, KernelMode::Exact).map_err(|e| e.to_string())?;
                let matrix = TransitionMatrix::from_step(&law);
                require(
                    matrix.row_sums().iter().all(One::is_one) && matrix.column_sums().iter().all(One::is_one),
                    format!("{name}, n = {n}: a row or column sum differs from 1"),
                )?;
                matrices += 1;
            }
        }
    }
    Ok(format!("{matrices} exact kernel matrices (both types, n <= 5) are doubly stochastic"))
}

fn restriction_consistency() -> Outcome {
    let mut pairs = 0;
    for name in ATOMIC {
        let m = measure(name);
        for n in 3..=5 {
            let big = exact_ordering_distribution(&m, n).map_err(|e| e.to_string())?;
            for k in 2..n {
                let small = exact_ordering_distribution(&m, k).map_err(|e| e.to_string())?;
                require(big.marginalize(k) == small, format!("{name}: {n} -> {k} marginal differs"))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} (measure, n, m) marginals equal the smaller-deck law exactly"))
}

fn type_two_duality() -> Outcome {
    for name in BUILT_INS {
        let m = measure(name);
        for n in 1..=5 {
            let one = exact_step_distribution(&m, n, StepType::One).map_err(|e| e.to_string())?;
            let two = exact_step_distribution(&m, n, StepType::Two).map_err(|e| e.to_string())?;
            let dual = one.inverse_pushforward();
            require(two == dual, format!("{name}, n = {n}: oracle type two is not the inverse law"))?;
            let swapped = kernels::kernel_matrix(n, &CouplingSampler::NuMuStar(m.clone()), KernelMode::Exact)
                .map_err(|e| e.to_string())?;
            require(swapped == dual, format!("{name}, n = {n}: swapped coupling law differs"))?;
        }
    }
    Ok("type-2 law is the inversion pushforward of type 1 (oracle and coupling routes), n <= 5".into())
}

fn position_recovery() -> Outcome {
    let gsr = measure("gsr");
    let trials = 200u64;
    let hits = stats::parallel_draws(900, trials, |rng| {
        let (pos, own) = empirical_positions(&gsr, 0, 10_000, rng).expect("window covers the target");
        (pos.x_hat - own.x().value()).abs() <= 0.05 && (pos.y_hat - own.y().value()).abs() <= 0.05
    })
    .into_iter()
    .filter(|&h| h)
    .count();
    let share = hits as f64 / trials as f64;
    require(share >= 0.99, format!("only {hits}/{trials} trials within 0.05"))?;
    Ok(format!("{hits}/{trials} trials recover (X, Y) within 0.05 at N = 10^4"))
}

fn mixing_sanity() -> Outcome {
    let curve = mixing_curve(&measure("gsr"), 4, StepType::Two, 20).map_err(|e| e.to_string())?;
    require(curve.windows(2).all(|w| w[1] <= w[0]), "GSR curve increases somewhere")?;
    let first_below = curve.iter().position(|v| *v < rational(1, 100));
    require(first_below.is_some(), "GSR curve stays above 0.01 through h = 20")?;
    let stuck = mixing_curve(&measure("identity"), 4, StepType::Two, 20).map_err(|e| e.to_string())?;
    require(stuck.iter().all(|v| *v == rational(23, 24)), "identity curve moves")?;
    let leb = mixing_curve(&QuasiUniformMeasure::lebesgue(), 4, StepType::One, 5).map_err(|e| e.to_string())?;
    require(leb[0] == rational(23, 24) && leb[1..].iter().all(|v| *v == integer(0)), "Lebesgue curve not 0 from h = 1")?;
    let h = first_below.unwrap_or(0);
    Ok(format!(
        "GSR type-2 n = 4 non-increasing, below 0.01 at h = {h} (TV {:.5}); identity fixed at 23/24; Lebesgue 0 from h = 1",
        to_f64(&curve[h])
    ))
}

fn random_valid_measure(rng: &mut ChaCha8Rng) -> QuasiUniformMeasure {
    let denom = rng.gen_range(1..=12i64);
    let mut points: Vec<i64> = (0..=denom).filter(|_| rng.gen_bool(0.6)).collect();
    points.dedup();
    let mut gaps = Vec::new();
    for pair in points.chunks(2) {
        if let [a, b] = pair {
            let side = if rng.gen_bool(0.5) { AtomSide::Left } else { AtomSide::Right };
            gaps.push(GapInterval::new(rational(*a, denom), rational(*b, denom), side));
        }
    }
    validate(MeasureSpec { gaps }).expect("disjoint gaps")
}

fn quasi_uniform_gatekeeping() -> Outcome {
    let mut accepted = 0;
    for name in BUILT_INS.iter().chain(["identity", "reversal", "a-shuffle:7"].iter()) {
        let m = measure(name);
        require(is_quasi_uniform(&CandidateMeasure::from_measure(&m)), format!("{name} rejected"))?;
        require(is_quasi_uniform(&CandidateMeasure::from_measure(&m.conjugate())), format!("conjugate of {name} rejected"))?;
        accepted += 2;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1100);
    for _ in 0..500 {
        let m = random_valid_measure(&mut rng);
        require(is_quasi_uniform(&CandidateMeasure::from_measure(&m)), format!("validator output {m} rejected"))?;
        accepted += 1;
    }
    require(!is_quasi_uniform(&CandidateMeasure::interior_atom()), "interior-atom counterexample accepted")?;
    Ok(format!("{accepted} validator outputs accepted; interior-atom counterexample rejected"))
}

fn exchangeability() -> Outcome {
    let gsr = measure("gsr");
    let first = LabelSet::new(vec![1, 2, 3]).unwrap();
    let second = LabelSet::new(vec![5, 40, 1000]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1200);
    let report = exchangeability_test(&gsr, &first, &second, 100_000, ALPHA_SUITE, &mut rng).map_err(|e| e.to_string())?;
    require(report.test.passed, format!("two-sample chi-square p = {:.2e}", report.test.p_value))?;
    // pathwise: the same randomness gives the same ranking on both label sets
    for seed in 0..1000 {
        let a = sample_ordering(&gsr, &first, &mut ChaCha8Rng::seed_from_u64(seed)).into_permutation();
        let b = sample_ordering(&gsr, &second, &mut ChaCha8Rng::seed_from_u64(seed)).into_permutation();
        require(a == b, format!("seed {seed}: rankings differ between label sets"))?;
    }
    // the exact law never sees labels, only the deck size
    let law = exact_ordering_distribution(&gsr, 3).map_err(|e| e.to_string())?;
    require(law.total().is_one() && law.n() == 3, "exact law malformed")?;
    Ok(format!(
        "two-sample chi-square p = {:.4} at 10^5 + 10^5 draws; rankings identical pathwise over 1000 seeds",
        report.test.p_value
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("gsr two-card law", gsr_two_card_law),
        ("oracle-sampler concordance", oracle_sampler_concordance),
        ("route equivalence", route_equivalence),
        ("deterministic collapse", deterministic_collapse),
        ("coupling marginals", marginals),
        ("double stochasticity", double_stochasticity),
        ("restriction consistency", restriction_consistency),
        ("type-2 duality", type_two_duality),
        ("position recovery", position_recovery),
        ("mixing curve sanity", mixing_sanity),
        ("quasi-uniform gatekeeping", quasi_uniform_gatekeeping),
        ("exchangeability", exchangeability),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
