//! Command-line front end. Every command validates its inputs, builds its
//! whole output in memory and only then writes it, so a failing command never
//! leaves a partial file behind.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::kernels::{self, CouplingSampler, KernelMode};
use crate::measure::{self, CandidateMeasure, QuasiUniformMeasure};
use crate::oracle::{self, PermutationDistribution, StepType, TransitionMatrix};
use crate::ordering::{sample_ordering, LabelSet};
use crate::perm::Perm;
use crate::rational::{self, format_rational, Rational};
use crate::stats;

/// Exit status for a run whose checks failed.
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
/// Exit status for bad flags, unreadable inputs, or invalid measures.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ishuffle", version, about = "Invariant random orderings and the shuffles they induce")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample random orderings of the labels 1..n.
    SampleOrder(SampleArgs),
    /// Sample single shuffle steps from the identity.
    Step(StepArgs),
    /// Sample random-walk trajectories on S_n.
    Walk(WalkArgs),
    /// Run the property suite for a measure; exit 1 if any check fails.
    Verify(VerifyArgs),
    /// Distance to uniform after h = 0..steps shuffles.
    Mixing(MixingArgs),
    /// Print the shuffle map of a purely atomic measure.
    ShuffleMap(MapArgs),
    /// Exact ordering or step law on S_n.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TypeArg {
    One,
    Two,
}

impl From<TypeArg> for StepType {
    fn from(t: TypeArg) -> Self {
        match t {
            TypeArg::One => StepType::One,
            TypeArg::Two => StepType::Two,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Built-in measure name or JSON file.
    #[arg(long)]
    pub measure: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

/// Either a coupling sampler or a measure read as a type-1/type-2 shuffle.
#[derive(Debug, Args)]
pub struct ShuffleSource {
    #[arg(long, conflicts_with = "sampler")]
    pub measure: Option<String>,
    /// Sampler JSON (inline or file), or `nu_mu:NAME`, `nu_mu_star:NAME`,
    /// `deterministic:NAME`, `identity`.
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long = "type", value_enum, default_value = "one")]
    pub step_type: TypeArg,
}

impl ShuffleSource {
    fn resolve(&self) -> Result<CouplingSampler> {
        match (&self.measure, &self.sampler) {
            (_, Some(s)) => Ok(kernels::resolve_sampler(s)?),
            (Some(m), None) => {
                let m = measure::resolve(m)?;
                Ok(match self.step_type {
                    TypeArg::One => CouplingSampler::NuMu(m),
                    TypeArg::Two => CouplingSampler::NuMuStar(m),
                })
            }
            (None, None) => bail!("one of --measure or --sampler is required"),
        }
    }
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[command(flatten)]
    pub source: ShuffleSource,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[command(flatten)]
    pub source: ShuffleSource,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub steps: usize,
    /// Number of independent trajectories.
    #[arg(long, default_value_t = 1)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    /// Starting state in one-line notation (identity by default).
    #[arg(long)]
    pub start: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Built-in name, `interior-atom`, or a JSON file (measure or candidate).
    #[arg(long)]
    pub measure: String,
    /// Deck size for the exact checks.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Draws for each Monte Carlo check.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MixingArgs {
    #[command(flatten)]
    pub source: ShuffleSource,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: Mode,
    /// Trajectories for the Monte Carlo column.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Required in Monte Carlo mode.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub measure: String,
    /// Also tabulate S at x = k/grid for k = 0..grid-1 (CSV output then
    /// holds the table instead of the pieces).
    #[arg(long)]
    pub grid: Option<u32>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: ShuffleSource,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub output: Output,
}

/// What a command produced.
#[derive(Debug)]
pub struct Report {
    pub body: String,
    /// Human-readable summary for standard error.
    pub summary: Option<String>,
    pub passed: bool,
}

impl Report {
    fn ok(body: String) -> Self {
        Report { body, summary: None, passed: true }
    }
}

/// Parses `args` (including the program name), runs the command, writes its
/// output, and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let out = output_of(&cli.command).out.clone();
    match execute(&cli.command).and_then(|r| emit(&r, out.as_ref()).map(|_| r)) {
        Ok(report) => {
            if let Some(s) = &report.summary {
                eprintln!("{s}");
            }
            if report.passed {
                0
            } else {
                EXIT_PROPERTY_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn output_of(cmd: &Command) -> &Output {
    match cmd {
        Command::SampleOrder(a) => &a.output,
        Command::Step(a) => &a.output,
        Command::Walk(a) => &a.output,
        Command::Verify(a) => &a.output,
        Command::Mixing(a) => &a.output,
        Command::ShuffleMap(a) => &a.output,
        Command::Oracle(a) => &a.output,
    }
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, &report.body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(report.body.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

/// Runs a command without touching the filesystem or standard streams.
pub fn execute(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::SampleOrder(a) => sample_order(a),
        Command::Step(a) => step(a),
        Command::Walk(a) => walk(a),
        Command::Verify(a) => verify(a),
        Command::Mixing(a) => mixing(a),
        Command::ShuffleMap(a) => shuffle_map(a),
        Command::Oracle(a) => oracle_cmd(a),
    }
}

fn positive(name: &str, value: u64) -> Result<()> {
    if value == 0 {
        bail!("--{name} must be at least 1");
    }
    Ok(())
}

fn json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn sorted_histogram(counts: &HashMap<Perm, u64>) -> BTreeMap<Perm, u64> {
    counts.iter().map(|(p, &c)| (p.clone(), c)).collect()
}

fn histogram_json(hist: &BTreeMap<Perm, u64>) -> Value {
    Value::Object(hist.iter().map(|(p, c)| (p.to_string(), json!(c))).collect())
}

fn histogram_summary(hist: &BTreeMap<Perm, u64>) -> String {
    let mut s = String::from("ranking,count");
    for (p, c) in hist {
        s.push_str(&format!("\n{p},{c}"));
    }
    s
}

fn sample_order(a: &SampleArgs) -> Result<Report> {
    positive("n", a.n as u64)?;
    positive("samples", a.samples)?;
    let measure = measure::resolve(&a.measure)?;
    let labels = LabelSet::first(a.n);
    let rankings = stats::parallel_draws(a.seed, a.samples, |rng| {
        sample_ordering(&measure, &labels, rng).into_permutation()
    });
    let mut counts = HashMap::new();
    for r in &rankings {
        *counts.entry(r.clone()).or_insert(0u64) += 1;
    }
    let hist = sorted_histogram(&counts);
    let body = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("index,ranking\n");
            for (i, r) in rankings.iter().enumerate() {
                s.push_str(&format!("{},{r}\n", i + 1));
            }
            s
        }
        Format::Json => json_text(&json!({
            "measure": measure.spec(),
            "n": a.n,
            "samples": a.samples,
            "seed": a.seed,
            "rankings": rankings.iter().map(Perm::to_string).collect::<Vec<_>>(),
            "histogram": histogram_json(&hist),
        })),
    };
    Ok(Report { body, summary: Some(histogram_summary(&hist)), passed: true })
}

fn step(a: &StepArgs) -> Result<Report> {
    positive("n", a.n as u64)?;
    positive("samples", a.samples)?;
    let cs = a.source.resolve()?;
    let outcomes = stats::parallel_draws(a.seed, a.samples, |rng| kernels::step_permutation(a.n, &cs, rng));
    let mut counts = HashMap::new();
    for o in &outcomes {
        *counts.entry(o.sigma.clone()).or_insert(0u64) += 1;
    }
    let hist = sorted_histogram(&counts);
    let body = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("index,sigma\n");
            for (i, o) in outcomes.iter().enumerate() {
                s.push_str(&format!("{},{}\n", i + 1, o.sigma));
            }
            s
        }
        Format::Json => {
            let steps: Vec<Value> = outcomes
                .iter()
                .map(|o| {
                    let cards: Vec<Value> = o
                        .cards
                        .iter()
                        .map(|c| json!({ "label": c.label, "u": c.u, "v": c.v, "gap": c.tiebreak.map(|t| t.0) }))
                        .collect();
                    json!({ "sigma": o.sigma.to_string(), "cards": cards })
                })
                .collect();
            json_text(&json!({
                "sampler": cs.to_json(),
                "n": a.n,
                "seed": a.seed,
                "steps": steps,
                "histogram": histogram_json(&hist),
            }))
        }
    };
    Ok(Report { body, summary: Some(histogram_summary(&hist)), passed: true })
}

fn walk(a: &WalkArgs) -> Result<Report> {
    positive("n", a.n as u64)?;
    positive("samples", a.samples)?;
    let cs = a.source.resolve()?;
    let start = match &a.start {
        Some(s) => s.parse::<Perm>()?,
        None => Perm::identity(a.n),
    };
    if start.len() != a.n {
        bail!("--start has {} entries but --n is {}", start.len(), a.n);
    }
    let paths = stats::parallel_draws(a.seed, a.samples, |rng| kernels::walk(&cs, a.steps, rng, start.clone()));
    let body = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("trajectory,h,state\n");
            for (t, path) in paths.iter().enumerate() {
                for (h, state) in path.iter().enumerate() {
                    s.push_str(&format!("{},{h},{state}\n", t + 1));
                }
            }
            s
        }
        Format::Json => json_text(&json!({
            "sampler": cs.to_json(),
            "n": a.n,
            "steps": a.steps,
            "seed": a.seed,
            "trajectories": paths
                .iter()
                .map(|p| p.iter().map(Perm::to_string).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })),
    };
    Ok(Report::ok(body))
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, result: Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check { name: name.into(), passed: true, detail },
        Err(detail) => Check { name: name.into(), passed: false, detail },
    }
}

fn ensure(cond: bool, ok: String, fail: String) -> Result<String, String> {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

/// A measure to verify: a validated one, or a candidate that failed to be one.
enum Subject {
    Measure(QuasiUniformMeasure),
    Candidate(String, CandidateMeasure),
}

fn verify_subject(name: &str) -> Result<Subject> {
    let key = name.trim().to_ascii_lowercase();
    if key == "interior-atom" || key == "atom-in-gap-interior" {
        return Ok(Subject::Candidate(key, CandidateMeasure::interior_atom()));
    }
    match measure::resolve(name) {
        Ok(m) => Ok(Subject::Measure(m)),
        Err(err) => {
            let text = std::fs::read_to_string(name).map_err(|_| anyhow!(err))?;
            let candidate: CandidateMeasure =
                serde_json::from_str(&text).with_context(|| format!("{name} is neither a measure nor a candidate"))?;
            Ok(Subject::Candidate(name.to_owned(), candidate))
        }
    }
}

/// Runs every property check on `measure`.
pub fn property_suite(measure: &QuasiUniformMeasure, n: usize, samples: u64, seed: u64) -> Vec<Check> {
    let alpha = stats::ALPHA_SUITE;
    let mut checks = Vec::new();
    let candidate = CandidateMeasure::from_measure(measure);
    checks.push(check(
        "quasi_uniform_sandwich",
        ensure(measure::is_quasi_uniform(&candidate), "every atom is sandwiched".into(), "sandwich violated".into()),
    ));

    checks.push(check("conjugation_involution", {
        let conj = measure.conjugate();
        let mut points: Vec<Rational> = (0..=12).map(|k| rational::rational(k, 12)).collect();
        points.extend(measure.gaps().iter().flat_map(|g| [g.lo.clone(), g.hi.clone()]));
        let quantiles_match = points.iter().all(|y| {
            conj.cdf_left(y).ok() == measure.quantile(y, false).ok()
                && conj.cdf(y).ok() == measure.quantile(y, true).ok()
        });
        ensure(
            conj.conjugate() == *measure && quantiles_match,
            "conjugate of conjugate is the measure; its distribution function inverts the original".into(),
            "conjugation is not an involution or does not invert the distribution function".into(),
        )
    }));

    checks.push(check("marginal_uniformity", {
        let mut worst = 1.0f64;
        let mut ok = true;
        for (i, cs) in [CouplingSampler::NuMu(measure.clone()), CouplingSampler::NuMuStar(measure.clone())]
            .iter()
            .enumerate()
        {
            let (us, vs) = kernels::marginal_samples(cs, samples, seed.wrapping_add(i as u64));
            for xs in [&us, &vs] {
                match stats::ks_uniform(xs, alpha) {
                    Ok(r) => {
                        worst = worst.min(r.p_value);
                        ok &= r.passed;
                    }
                    Err(_) => ok = false,
                }
            }
        }
        ensure(ok, format!("smallest KS p-value {worst:.4}"), format!("KS rejected uniformity (p = {worst:.2e})"))
    }));

    let exact = oracle::exact_ordering_distribution(measure, n);
    checks.push(check("oracle_vs_sampler", match &exact {
        Ok(law) => {
            let labels = LabelSet::first(n);
            let counts = stats::parallel_counts(seed.wrapping_add(10), samples, |rng| {
                sample_ordering(measure, &labels, rng).into_permutation()
            });
            let report = stats::chi_square_goodness(&counts, law.iter(), alpha);
            let tv = stats::empirical_tv(&counts, law).unwrap_or(1.0);
            match report {
                Ok(r) => ensure(
                    r.passed,
                    format!("chi-square p = {:.4}, empirical TV {tv:.4}", r.p_value),
                    format!("chi-square p = {:.2e}, empirical TV {tv:.4}", r.p_value),
                ),
                Err(e) => Err(e.to_string()),
            }
        }
        Err(e) => Err(format!("exact oracle unavailable: {e}")),
    }));

    checks.push(check("double_stochasticity", match &exact {
        Ok(law) => {
            let one = TransitionMatrix::from_step(law).is_doubly_stochastic();
            let two = TransitionMatrix::from_step(&law.inverse_pushforward()).is_doubly_stochastic();
            ensure(one && two, format!("{n}!-state matrices of both types are doubly stochastic"), "a row or column does not sum to 1".into())
        }
        Err(e) => Err(format!("exact oracle unavailable: {e}")),
    }));

    checks.push(check("restriction_consistency", match &exact {
        Ok(law) => {
            let ok = (1..n).all(|m| {
                oracle::exact_ordering_distribution(measure, m).map(|small| law.marginalize(m) == small).unwrap_or(false)
            });
            ensure(ok, format!("marginals of the {n}-card law match every smaller deck"), "a marginal differs".into())
        }
        Err(e) => Err(format!("exact oracle unavailable: {e}")),
    }));

    checks.push(check("route_equivalence", match &exact {
        Ok(law) => {
            let cs = CouplingSampler::NuMu(measure.clone());
            let exact_route = kernels::kernel_matrix(n, &cs, KernelMode::Exact);
            let counts = stats::parallel_counts(seed.wrapping_add(20), samples, |rng| kernels::step_sigma(n, &cs, rng));
            let mc = stats::chi_square_goodness(&counts, law.iter(), alpha);
            match (exact_route, mc) {
                (Ok(k), Ok(r)) => ensure(
                    k == *law && r.passed,
                    format!("exact step law equals the ordering law; chi-square p = {:.4}", r.p_value),
                    format!("exact routes equal: {}; chi-square p = {:.2e}", k == *law, r.p_value),
                ),
                (Err(e), _) => Err(e.to_string()),
                (_, Err(e)) => Err(e.to_string()),
            }
        }
        Err(e) => Err(format!("exact oracle unavailable: {e}")),
    }));

    checks.push(check("type_two_duality", match &exact {
        Ok(law) => {
            let star = kernels::kernel_matrix(n, &CouplingSampler::NuMuStar(measure.clone()), KernelMode::Exact);
            let dual = law.inverse_pushforward();
            let map_ok = if measure.is_purely_atomic() {
                kernels::shuffle_map_from_measure(measure)
                    .ok()
                    .and_then(|m| kernels::kernel_matrix(n, &CouplingSampler::Deterministic(m), KernelMode::Exact).ok())
                    .map(|d| d == dual)
                    .unwrap_or(false)
            } else {
                true
            };
            match star {
                Ok(s) => ensure(
                    s == dual && map_ok,
                    "type-2 step law is the inverse of the type-1 law".into(),
                    format!("type-2 law matches: {}; shuffle map matches: {map_ok}", s == dual),
                ),
                Err(e) => Err(e.to_string()),
            }
        }
        Err(e) => Err(format!("exact oracle unavailable: {e}")),
    }));
    checks
}

fn verify(a: &VerifyArgs) -> Result<Report> {
    positive("n", a.n as u64)?;
    positive("samples", a.samples)?;
    let (label, checks) = match verify_subject(&a.measure)? {
        Subject::Measure(m) => (m.to_string(), property_suite(&m, a.n, a.samples, a.seed)),
        Subject::Candidate(name, c) => {
            let ok = measure::is_quasi_uniform(&c);
            let detail = if ok {
                "candidate satisfies the sandwich but is not a finite-gap measure".to_owned()
            } else {
                let mut reasons = Vec::new();
                if c.total_mass() != Rational::from_integer(1.into()) {
                    reasons.push(format!("total mass {}", format_rational(&c.total_mass())));
                }
                if !c.atoms_sandwiched() {
                    reasons.push("an atom is not sandwiched".into());
                }
                if !c.atoms_at_hole_ends() {
                    reasons.push("an atom sits strictly inside a hole".into());
                }
                if !c.diffuse_identity() {
                    reasons.push("the distribution function is not the identity on the support".into());
                }
                reasons.join("; ")
            };
            (name, vec![Check { name: "quasi_uniform_sandwich".into(), passed: false, detail }])
        }
    };
    let passed = checks.iter().all(|c| c.passed);
    let failing: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let body = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&json!({ "measure": label, "checks": checks, "passed": passed })),
        Format::Csv => {
            let mut s = String::from("name,passed,detail\n");
            for c in &checks {
                s.push_str(&format!("{},{},\"{}\"\n", c.name, c.passed, c.detail.replace('"', "'")));
            }
            s
        }
    };
    let summary = if passed {
        format!("all {} checks passed", checks.len())
    } else {
        format!("failing checks: {}", failing.join(", "))
    };
    Ok(Report { body, summary: Some(summary), passed })
}

fn uniform_tv(counts: &HashMap<Perm, u64>, n: usize) -> f64 {
    stats::empirical_tv(counts, &PermutationDistribution::uniform(n)).unwrap_or(1.0)
}

fn mixing(a: &MixingArgs) -> Result<Report> {
    positive("n", a.n as u64)?;
    let cs = a.source.resolve()?;
    let exact_curve: Option<Vec<Rational>> = match a.mode {
        Mode::Exact => {
            let law = match (&a.source.measure, &a.source.sampler) {
                (Some(m), None) => oracle::exact_step_distribution(&measure::resolve(m)?, a.n, a.source.step_type.into())?,
                _ => kernels::kernel_matrix(a.n, &cs, KernelMode::Exact)?,
            };
            Some(oracle::mixing_curve_from_step(&law, a.steps))
        }
        Mode::Mc => {
            let law = match (&a.source.measure, &a.source.sampler) {
                (Some(m), None) => measure::resolve(m)
                    .ok()
                    .and_then(|m| oracle::exact_step_distribution(&m, a.n, a.source.step_type.into()).ok()),
                _ => kernels::kernel_matrix(a.n, &cs, KernelMode::Exact).ok(),
            };
            law.map(|l| oracle::mixing_curve_from_step(&l, a.steps))
        }
    };
    let empirical: Option<Vec<f64>> = match a.mode {
        Mode::Exact => None,
        Mode::Mc => {
            let seed = a.seed.ok_or_else(|| anyhow!("--seed is required in Monte Carlo mode"))?;
            positive("samples", a.samples)?;
            let paths = stats::parallel_draws(seed, a.samples, |rng| kernels::walk(&cs, a.steps, rng, Perm::identity(a.n)));
            Some(
                (0..=a.steps)
                    .map(|h| {
                        let mut counts = HashMap::new();
                        for p in &paths {
                            *counts.entry(p[h].clone()).or_insert(0u64) += 1;
                        }
                        uniform_tv(&counts, a.n)
                    })
                    .collect(),
            )
        }
    };
    let body = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("h,tv_exact,tv_empirical\n");
            for h in 0..=a.steps {
                let exact = exact_curve
                    .as_ref()
                    .map(|c| format!("{:.12}", c[h].to_f64().unwrap_or(f64::NAN)))
                    .unwrap_or_default();
                let emp = empirical.as_ref().map(|e| format!("{:.6}", e[h])).unwrap_or_default();
                s.push_str(&format!("{h},{exact},{emp}\n"));
            }
            s
        }
        Format::Json => json_text(&json!({
            "n": a.n,
            "steps": a.steps,
            "h": (0..=a.steps).collect::<Vec<_>>(),
            "tv_exact": exact_curve.as_ref().map(|c| c.iter().map(format_rational).collect::<Vec<_>>()),
            "tv_empirical": empirical,
        })),
    };
    Ok(Report::ok(body))
}

fn shuffle_map(a: &MapArgs) -> Result<Report> {
    let m = measure::resolve(&a.measure)?;
    let map = kernels::shuffle_map_from_measure(&m)?;
    if a.grid == Some(0) {
        bail!("--grid must be at least 1");
    }
    let table: Option<Vec<(Rational, Rational)>> = a.grid.map(|k| {
        (0..k)
            .map(|i| {
                let x = rational::rational(i64::from(i), i64::from(k));
                let s = map.eval(&x);
                (x, s)
            })
            .collect()
    });
    let body = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => match &table {
            Some(rows) => {
                let mut s = String::from("x,s_x\n");
                for (x, y) in rows {
                    s.push_str(&format!("{},{}\n", format_rational(x), format_rational(y)));
                }
                s
            }
            None => {
                let mut s = String::from("lo,hi,slope,intercept\n");
                for p in map.pieces() {
                    s.push_str(&format!(
                        "{},{},{},{}\n",
                        format_rational(&p.lo),
                        format_rational(&p.hi),
                        format_rational(&p.slope),
                        format_rational(&p.intercept)
                    ));
                }
                s
            }
        },
        Format::Json => {
            let mut v = serde_json::to_value(&map)?;
            if let Some(rows) = &table {
                v["grid"] = rows
                    .iter()
                    .map(|(x, y)| json!({ "x": format_rational(x), "s": format_rational(y) }))
                    .collect::<Vec<_>>()
                    .into();
            }
            json_text(&v)
        }
    };
    Ok(Report { body, summary: Some(map.to_string()), passed: true })
}

fn oracle_cmd(a: &OracleArgs) -> Result<Report> {
    let law = match (&a.source.measure, &a.source.sampler) {
        (Some(m), None) => oracle::exact_step_distribution(&measure::resolve(m)?, a.n, a.source.step_type.into())?,
        _ => kernels::kernel_matrix(a.n, &a.source.resolve()?, KernelMode::Exact)?,
    };
    let body = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&law.to_json()),
        Format::Csv => {
            let mut s = String::from("permutation,probability,decimal\n");
            for (p, q) in law.iter() {
                s.push_str(&format!("{p},{},{:.12}\n", format_rational(q), q.to_f64().unwrap_or(f64::NAN)));
            }
            s
        }
    };
    Ok(Report::ok(body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> Result<Report> {
        let cli = Cli::try_parse_from(std::iter::once("ishuffle").chain(args.iter().copied()))?;
        execute(&cli.command)
    }

    #[test]
    fn sample_order_shape() {
        let r = exec(&["sample-order", "--measure", "gsr", "--n", "2", "--samples", "8", "--seed", "1"]).unwrap();
        let lines: Vec<&str> = r.body.lines().collect();
        assert_eq!(lines[0], "index,ranking");
        assert_eq!(lines.len(), 9);
        assert!(lines[1..].iter().all(|l| l.ends_with(",12") || l.ends_with(",21")));
    }

    #[test]
    fn reversal_rows() {
        let r = exec(&["sample-order", "--measure", "gap(0,1,left)", "--n", "4", "--samples", "3", "--seed", "5"]).unwrap();
        assert_eq!(r.body, "index,ranking\n1,4321\n2,4321\n3,4321\n");
    }

    #[test]
    fn seed_is_required() {
        assert!(exec(&["sample-order", "--measure", "gsr", "--n", "2", "--samples", "8"]).is_err());
        assert!(exec(&["mixing", "--measure", "gsr", "--n", "3", "--steps", "2", "--mode", "mc"]).is_err());
    }

    #[test]
    fn mixing_lebesgue_exact() {
        let r = exec(&["mixing", "--measure", "lebesgue", "--n", "3", "--steps", "3"]).unwrap();
        let rows: Vec<&str> = r.body.lines().skip(1).collect();
        assert_eq!(rows, ["0,0.833333333333,", "1,0.000000000000,", "2,0.000000000000,", "3,0.000000000000,"]);
    }

    #[test]
    fn shuffle_map_needs_atoms() {
        let err = exec(&["shuffle-map", "--measure", "lebesgue"]).unwrap_err();
        assert!(err.to_string().contains("not purely atomic"));
        let r = exec(&["shuffle-map", "--measure", "a-shuffle:4"]).unwrap();
        assert_eq!(r.body.lines().count(), 5);
    }

    #[test]
    fn oracle_json() {
        let r = exec(&["oracle", "--measure", "gsr", "--n", "2"]).unwrap();
        let v: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v["probs"]["21"], "1/4");
    }
}
