//! Shuffle kernels on the pack, represented by couplings of `[0,1]` with
//! uniform marginals.
//!
//! One step of a shuffle draws an independent pair `(u, v)` per card. Cards
//! sit in `u` order before the step and in `v` order after it, so the step
//! permutation sends initial rank to final rank. Two couplings come from a
//! quasi-uniform measure: the type-1 coupling `(U, U·X + (1−U)·Y)` built from
//! a conjugate pair `(X, Y)` and an independent uniform `U`, and its
//! coordinate swap (type 2).
//!
//! Ties are resolved structurally rather than numerically. Two cards in the
//! same gap are compared by their `U` (reversed when the atom is on the
//! left); cards in different gaps follow gap position; a diffuse coordinate
//! is compared exactly against gap endpoints.

mod exact;
mod grid;
mod map;

use std::cmp::Ordering;
use std::ptr;

use num_traits::{One, Signed, ToPrimitive};
use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::measure::{self, ConjugateSample, Coord, MeasureError, MeasureSpec, QuasiUniformMeasure};
use crate::oracle::{OracleError, PermutationDistribution};
use crate::perm::Perm;
use crate::rational::{format_rational, parse_rational, Rational};
use crate::stats;

pub use exact::exact_step_law;
pub use grid::{GridCopula, FLOAT_TOLERANCE};
pub use map::{shuffle_map_from_measure, MapPiece, ShuffleMap};

/// Largest deck handled by exact enumeration unless a caller raises it.
pub const EXACT_MAX_N: usize = 6;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("measure is not purely atomic (diffuse mass {0})")]
    NotPurelyAtomic(String),
    #[error("exact step law unavailable: {0}")]
    ExactUnavailable(String),
    #[error("{what} = {value} exceeds the exact-enumeration cap {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("pieces do not partition [0,1]: {0}")]
    NotPartition(String),
    #[error("map does not preserve Lebesgue measure: {0}")]
    NotMeasurePreserving(String),
    #[error("invalid sampler description: {0}")]
    Spec(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A coupling of two uniform coordinates.
#[derive(Debug, Clone)]
pub enum CouplingSampler {
    /// Type 1: `(U, U·X + (1−U)·Y)`.
    NuMu(QuasiUniformMeasure),
    /// Type 2: the coordinate swap of `NuMu`.
    NuMuStar(QuasiUniformMeasure),
    /// `(U, S(U))` for a measure-preserving `S`.
    Deterministic(ShuffleMap),
    GridCopula(GridCopula),
    /// A component is chosen independently for every draw.
    Mixture(CouplingMixture),
}

#[derive(Debug, Clone)]
pub struct CouplingMixture {
    components: Vec<(Rational, CouplingSampler)>,
    cumulative: Vec<f64>,
}

impl CouplingMixture {
    pub fn new(components: Vec<(Rational, CouplingSampler)>) -> Result<Self, KernelError> {
        let total: Rational = components.iter().map(|(w, _)| w.clone()).sum();
        if components.is_empty() || components.iter().any(|(w, _)| !w.is_positive()) || !total.is_one() {
            return Err(MeasureError::BadWeights(format_rational(&total)).into());
        }
        let mut acc = Rational::from_integer(0.into());
        let cumulative = components
            .iter()
            .map(|(w, _)| {
                acc += w;
                acc.to_f64().unwrap_or(1.0)
            })
            .collect();
        Ok(CouplingMixture { components, cumulative })
    }

    pub fn components(&self) -> &[(Rational, CouplingSampler)] {
        &self.components
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, &CouplingSampler) {
        let t: f64 = rng.gen();
        let idx = self
            .cumulative
            .partition_point(|&c| c <= t)
            .min(self.components.len() - 1);
        (idx, &self.components[idx].1)
    }
}

/// What a draw looked like inside the sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum DrawMeta {
    None,
    /// The conjugate pair and the uniform weight behind a type-1/type-2 draw.
    Conjugate { sample: ConjugateSample, weight: f64 },
    Cell { row: usize, col: usize },
    Component { index: usize, inner: Box<DrawMeta> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDraw {
    pub u: f64,
    pub v: f64,
    pub meta: DrawMeta,
}

/// Sort key for one coordinate of a draw.
#[derive(Debug, Clone, Copy)]
enum Key<'a> {
    Real(f64),
    /// `t·X + (1−t)·Y` for a conjugate pair of `measure`.
    Mixed {
        measure: &'a QuasiUniformMeasure,
        sample: ConjugateSample,
        t: f64,
    },
}

/// How two keys compare when ties must be broken by a secondary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resolution {
    Strict(Ordering),
    /// Tied; keep the secondary order.
    Preserve,
    /// Tied inside a left-atom gap; reverse the secondary order.
    Reverse,
}

fn mixed_value(sample: &ConjugateSample, t: f64) -> f64 {
    match sample {
        ConjugateSample::Diffuse(w) => *w,
        _ => t * sample.x().value() + (1.0 - t) * sample.y().value(),
    }
}

impl Key<'_> {
    fn value(&self) -> f64 {
        match self {
            Key::Real(x) => *x,
            Key::Mixed { sample, t, .. } => mixed_value(sample, *t),
        }
    }
}

fn diffuse_vs_gap(measure: &QuasiUniformMeasure, w: f64, gap: usize) -> Ordering {
    // `w` lies in F, so it is at or below the gap's low end, or at or above
    // its high end
    let (lo, _) = measure.gap_endpoint(gap);
    if Coord::Real(w).cmp_exact(&Coord::Endpoint(lo)) == Ordering::Greater {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

fn compare_keys(a: &Key<'_>, b: &Key<'_>) -> Resolution {
    if let (
        Key::Mixed { measure: ma, sample: sa, t: ta },
        Key::Mixed { measure: mb, sample: sb, t: tb },
    ) = (a, b)
    {
        if ptr::eq(*ma, *mb) {
            return match (sa, sb) {
                (ConjugateSample::Diffuse(wa), ConjugateSample::Diffuse(wb)) => {
                    let ord = wa.total_cmp(wb);
                    debug_assert!(ord != Ordering::Equal, "diffuse coordinates coincide");
                    if ord == Ordering::Equal {
                        Resolution::Preserve
                    } else {
                        Resolution::Strict(ord)
                    }
                }
                (ConjugateSample::Diffuse(w), ConjugateSample::Gap { index, .. }) => {
                    Resolution::Strict(diffuse_vs_gap(ma, *w, *index))
                }
                (ConjugateSample::Gap { index, .. }, ConjugateSample::Diffuse(w)) => {
                    Resolution::Strict(diffuse_vs_gap(ma, *w, *index).reverse())
                }
                (ConjugateSample::Gap { index: ia, .. }, ConjugateSample::Gap { index: ib, .. }) => {
                    if ia != ib {
                        // gaps are sorted by position and never overlap
                        return Resolution::Strict(ia.cmp(ib));
                    }
                    let right = sa.is_right_atom();
                    match ta.total_cmp(tb) {
                        Ordering::Equal if right => Resolution::Preserve,
                        Ordering::Equal => Resolution::Reverse,
                        ord if right => Resolution::Strict(ord),
                        ord => Resolution::Strict(ord.reverse()),
                    }
                }
            };
        }
    }
    match a.value().total_cmp(&b.value()) {
        Ordering::Equal => Resolution::Preserve,
        ord => Resolution::Strict(ord),
    }
}

fn resolve(res: Resolution, first: usize, second: usize) -> Ordering {
    match res {
        Resolution::Strict(ord) => ord,
        Resolution::Preserve => first.cmp(&second),
        Resolution::Reverse => second.cmp(&first),
    }
}

struct Keyed<'a> {
    u: f64,
    v: f64,
    initial: Key<'a>,
    last: Key<'a>,
    tiebreak: Option<(usize, ConjugateSample)>,
}

impl CouplingSampler {
    /// The coupling `v = u`.
    pub fn identity() -> Self {
        CouplingSampler::Deterministic(ShuffleMap::identity())
    }

    /// Checks that the description has uniform marginals. Constructors
    /// already validate, so this re-checks nested parts only.
    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            CouplingSampler::NuMu(m) | CouplingSampler::NuMuStar(m) => {
                measure::validate(m.spec())?;
                Ok(())
            }
            CouplingSampler::Deterministic(map) => ShuffleMap::new(map.pieces().to_vec()).map(|_| ()),
            CouplingSampler::GridCopula(g) => match g.exact_entries() {
                Some(e) => GridCopula::exact(e.to_vec()).map(|_| ()),
                None => GridCopula::float(g.entries().to_vec()).map(|_| ()),
            },
            CouplingSampler::Mixture(mix) => {
                CouplingMixture::new(mix.components.clone())?;
                mix.components.iter().try_for_each(|(_, c)| c.validate())
            }
        }
    }

    fn draw_keyed<R: Rng + ?Sized>(&self, rng: &mut R) -> Keyed<'_> {
        match self {
            CouplingSampler::NuMu(m) | CouplingSampler::NuMuStar(m) => {
                let sample = m.sample_conjugate_pair(rng);
                let t: f64 = rng.gen();
                let mixed = Key::Mixed { measure: m, sample, t };
                let v = mixed_value(&sample, t);
                let tiebreak = sample.gap_index().map(|g| (g, sample));
                if matches!(self, CouplingSampler::NuMu(_)) {
                    Keyed { u: t, v, initial: Key::Real(t), last: mixed, tiebreak }
                } else {
                    Keyed { u: v, v: t, initial: mixed, last: Key::Real(t), tiebreak }
                }
            }
            CouplingSampler::Deterministic(map) => {
                let u: f64 = rng.gen();
                let v = map.eval_f64(u);
                Keyed { u, v, initial: Key::Real(u), last: Key::Real(v), tiebreak: None }
            }
            CouplingSampler::GridCopula(g) => {
                let (u, v, _, _) = g.draw(rng);
                Keyed { u, v, initial: Key::Real(u), last: Key::Real(v), tiebreak: None }
            }
            CouplingSampler::Mixture(mix) => mix.pick(rng).1.draw_keyed(rng),
        }
    }

    /// One pair `(u, v)` with its provenance.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CouplingDraw {
        match self {
            CouplingSampler::NuMu(m) | CouplingSampler::NuMuStar(m) => {
                let sample = m.sample_conjugate_pair(rng);
                let weight: f64 = rng.gen();
                let v = mixed_value(&sample, weight);
                let (u, v) = if matches!(self, CouplingSampler::NuMu(_)) { (weight, v) } else { (v, weight) };
                CouplingDraw { u, v, meta: DrawMeta::Conjugate { sample, weight } }
            }
            CouplingSampler::Deterministic(map) => {
                let u: f64 = rng.gen();
                CouplingDraw { u, v: map.eval_f64(u), meta: DrawMeta::None }
            }
            CouplingSampler::GridCopula(g) => {
                let (u, v, row, col) = g.draw(rng);
                CouplingDraw { u, v, meta: DrawMeta::Cell { row, col } }
            }
            CouplingSampler::Mixture(mix) => {
                let (index, inner) = mix.pick(rng);
                let d = inner.draw(rng);
                CouplingDraw { u: d.u, v: d.v, meta: DrawMeta::Component { index, inner: Box::new(d.meta) } }
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CouplingSampler::NuMu(m) => json!({ "type": "nu_mu", "measure": m.spec() }),
            CouplingSampler::NuMuStar(m) => json!({ "type": "nu_mu_star", "measure": m.spec() }),
            CouplingSampler::Deterministic(map) => json!({ "type": "deterministic", "map": map }),
            CouplingSampler::GridCopula(g) => {
                let grid: Value = match g.exact_entries() {
                    Some(e) => e
                        .iter()
                        .map(|row| row.iter().map(|v| Value::String(format_rational(v))).collect::<Vec<_>>())
                        .collect::<Vec<_>>()
                        .into(),
                    None => json!(g.entries()),
                };
                json!({ "type": "grid", "grid": grid })
            }
            CouplingSampler::Mixture(mix) => {
                let components: Vec<Value> = mix
                    .components
                    .iter()
                    .map(|(w, c)| json!({ "weight": format_rational(w), "sampler": c.to_json() }))
                    .collect();
                json!({ "type": "mixture", "components": components })
            }
        }
    }

    pub fn from_json(value: &Value) -> Result<Self, KernelError> {
        let spec_err = |msg: &str| KernelError::Spec(msg.to_owned());
        let kind = value
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| spec_err("missing string field `type`"))?;
        let measure = || -> Result<QuasiUniformMeasure, KernelError> {
            match value.get("measure") {
                Some(Value::String(name)) => Ok(measure::resolve(name)?),
                Some(obj @ Value::Object(_)) => {
                    let spec: MeasureSpec = serde_json::from_value(obj.clone()).map_err(MeasureError::from)?;
                    Ok(measure::validate(spec)?)
                }
                _ => Err(spec_err("missing field `measure`")),
            }
        };
        match kind {
            "nu_mu" => Ok(CouplingSampler::NuMu(measure()?)),
            "nu_mu_star" => Ok(CouplingSampler::NuMuStar(measure()?)),
            "deterministic" => match value.get("map") {
                Some(map) => {
                    let map: ShuffleMap =
                        serde_json::from_value(map.clone()).map_err(|e| KernelError::Spec(e.to_string()))?;
                    Ok(CouplingSampler::Deterministic(map))
                }
                None => Ok(CouplingSampler::Deterministic(shuffle_map_from_measure(&measure()?)?)),
            },
            "grid" => {
                let rows = value
                    .get("grid")
                    .and_then(Value::as_array)
                    .ok_or_else(|| spec_err("missing array field `grid`"))?;
                let cells: Vec<&Vec<Value>> = rows
                    .iter()
                    .map(|r| r.as_array().ok_or_else(|| spec_err("grid rows must be arrays")))
                    .collect::<Result<_, _>>()?;
                let all_exact = cells.iter().flat_map(|r| r.iter()).all(Value::is_string);
                if all_exact {
                    let exact = cells
                        .iter()
                        .map(|r| {
                            r.iter()
                                .map(|v| parse_rational(v.as_str().unwrap_or_default()).map_err(|e| KernelError::Spec(e.to_string())))
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(CouplingSampler::GridCopula(GridCopula::exact(exact)?))
                } else {
                    let floats = cells
                        .iter()
                        .map(|r| {
                            r.iter()
                                .map(|v| match v {
                                    Value::Number(x) => x.as_f64().ok_or_else(|| spec_err("bad number")),
                                    Value::String(s) => parse_rational(s)
                                        .map(|q| q.to_f64().unwrap_or(f64::NAN))
                                        .map_err(|e| KernelError::Spec(e.to_string())),
                                    _ => Err(spec_err("grid entries must be numbers or strings")),
                                })
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(CouplingSampler::GridCopula(GridCopula::float(floats)?))
                }
            }
            "mixture" => {
                let comps = value
                    .get("components")
                    .and_then(Value::as_array)
                    .ok_or_else(|| spec_err("missing array field `components`"))?;
                let parts = comps
                    .iter()
                    .map(|c| {
                        let weight = match c.get("weight") {
                            Some(Value::String(s)) => parse_rational(s).map_err(|e| KernelError::Spec(e.to_string()))?,
                            Some(Value::Number(x)) => crate::rational::from_f64(x.as_f64().unwrap_or(f64::NAN)),
                            _ => return Err(spec_err("component without `weight`")),
                        };
                        let inner = c.get("sampler").ok_or_else(|| spec_err("component without `sampler`"))?;
                        Ok((weight, CouplingSampler::from_json(inner)?))
                    })
                    .collect::<Result<Vec<_>, KernelError>>()?;
                Ok(CouplingSampler::Mixture(CouplingMixture::new(parts)?))
            }
            other => Err(KernelError::Spec(format!("unknown sampler type `{other}`"))),
        }
    }
}

/// Resolves `nu_mu:<measure>`, `nu_mu_star:<measure>`,
/// `deterministic:<measure>`, `identity`, inline JSON, or a JSON file path.
pub fn resolve_sampler(text: &str) -> Result<CouplingSampler, KernelError> {
    let t = text.trim();
    if t == "identity" {
        return Ok(CouplingSampler::identity());
    }
    if let Some((kind, rest)) = t.split_once(':') {
        let build = |f: fn(QuasiUniformMeasure) -> CouplingSampler| -> Result<CouplingSampler, KernelError> {
            Ok(f(measure::resolve(rest)?))
        };
        match kind {
            "nu_mu" | "type-one" => return build(CouplingSampler::NuMu),
            "nu_mu_star" | "type-two" => return build(CouplingSampler::NuMuStar),
            "deterministic" => {
                return Ok(CouplingSampler::Deterministic(shuffle_map_from_measure(&measure::resolve(rest)?)?))
            }
            _ => {}
        }
    }
    let json_text = if t.starts_with('{') {
        t.to_owned()
    } else {
        std::fs::read_to_string(t).map_err(|e| KernelError::Spec(format!("{t}: {e}")))?
    };
    let value: Value = serde_json::from_str(&json_text).map_err(|e| KernelError::Spec(e.to_string()))?;
    CouplingSampler::from_json(&value)
}

/// Free-function form of [`CouplingSampler::draw`].
pub fn draw_coupling<R: Rng + ?Sized>(cs: &CouplingSampler, rng: &mut R) -> CouplingDraw {
    cs.draw(rng)
}

/// One card in a step.
#[derive(Debug, Clone, PartialEq)]
pub struct CardRecord {
    /// Position before the step, counted from 1.
    pub label: usize,
    pub u: f64,
    pub v: f64,
    /// Gap index and conjugate pair for cards whose draw fell in a gap.
    pub tiebreak: Option<(usize, ConjugateSample)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Records in initial order.
    pub cards: Vec<CardRecord>,
    /// Initial rank to final rank.
    pub sigma: Perm,
}

fn step_core<'a, R: Rng + ?Sized>(n: usize, cs: &'a CouplingSampler, rng: &mut R) -> (Vec<Keyed<'a>>, Vec<usize>, Perm) {
    let draws: Vec<Keyed<'a>> = (0..n).map(|_| cs.draw_keyed(rng)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| resolve(compare_keys(&draws[a].initial, &draws[b].initial), a, b));
    let mut initial_rank = vec![0; n];
    for (r, &k) in order.iter().enumerate() {
        initial_rank[k] = r;
    }
    let mut last: Vec<usize> = (0..n).collect();
    last.sort_by(|&a, &b| {
        resolve(
            compare_keys(&draws[a].last, &draws[b].last),
            initial_rank[a],
            initial_rank[b],
        )
    });
    let mut sigma = vec![0; n];
    for (r, &k) in last.iter().enumerate() {
        sigma[initial_rank[k]] = r;
    }
    (draws, order, Perm::from_images_unchecked(sigma))
}

/// Draws one step on `n` cards.
pub fn step_permutation<R: Rng + ?Sized>(n: usize, cs: &CouplingSampler, rng: &mut R) -> StepOutcome {
    let (draws, order, sigma) = step_core(n, cs, rng);
    let cards = order
        .iter()
        .enumerate()
        .map(|(pos, &k)| CardRecord {
            label: pos + 1,
            u: draws[k].u,
            v: draws[k].v,
            tiebreak: draws[k].tiebreak,
        })
        .collect();
    StepOutcome { cards, sigma }
}

/// Only the step permutation, for bulk sampling.
pub fn step_sigma<R: Rng + ?Sized>(n: usize, cs: &CouplingSampler, rng: &mut R) -> Perm {
    step_core(n, cs, rng).2
}

/// `steps + 1` states starting from `start`, each obtained from the previous
/// one by composing a fresh step on the left.
pub fn walk<R: Rng + ?Sized>(cs: &CouplingSampler, steps: usize, rng: &mut R, start: Perm) -> Vec<Perm> {
    let n = start.len();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(start);
    for _ in 0..steps {
        let sigma = step_sigma(n, cs, rng);
        let next = sigma.compose(states.last().expect("nonempty"));
        states.push(next);
    }
    states
}

/// How to obtain a step law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// The law of one step from the identity, `κ_n(id, ·)`.
pub fn kernel_matrix(n: usize, cs: &CouplingSampler, mode: KernelMode) -> Result<PermutationDistribution, KernelError> {
    match mode {
        KernelMode::Exact => exact_step_law(n, cs, EXACT_MAX_N),
        KernelMode::MonteCarlo { samples, seed } => {
            let counts = stats::parallel_counts(seed, samples, |rng| step_sigma(n, cs, rng));
            Ok(PermutationDistribution::from_counts(n, &counts)?)
        }
    }
}

/// `samples` coupling pairs drawn in parallel, split into the two marginals.
pub fn marginal_samples(cs: &CouplingSampler, samples: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    stats::parallel_draws(seed, samples, |rng| {
        let d = cs.draw(rng);
        (d.u, d.v)
    })
    .into_iter()
    .unzip()
}
