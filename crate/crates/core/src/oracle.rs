//! Exact brute-force laws on small symmetric groups.
//!
//! The support of a finite-gap measure splits into cells: diffuse segments of
//! `F` and atoms. Cards fall into cells independently with probability equal
//! to the cell mass. Across cells the order follows cell position; inside an
//! atom cell it is natural (right atom) or reversed (left atom); inside a
//! diffuse cell every arrangement is equally likely. Enumerating all
//! assignments gives the exact ordering law with rational probabilities.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{AtomSide, QuasiUniformMeasure};
use crate::ordering::MeasureMixture;
use crate::perm::Perm;
use crate::rational::{self, format_rational, Rational};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{what} = {value} exceeds the exact-enumeration cap {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },
    #[error("distributions live on S_{0} and S_{1}")]
    DimensionMismatch(usize, usize),
    #[error("probabilities must be nonnegative and sum to 1 (sum {0})")]
    NotNormalized(String),
    #[error("invalid distribution: {0}")]
    Parse(String),
}

/// Enumeration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCaps {
    pub max_n: usize,
    pub max_cells: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps {
            max_n: 6,
            max_cells: 8,
        }
    }
}

/// An exact law on `S_n`. Only permutations with positive mass are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationDistribution {
    n: usize,
    probs: BTreeMap<Perm, Rational>,
}

impl PermutationDistribution {
    pub fn new(n: usize, probs: BTreeMap<Perm, Rational>) -> Result<Self, OracleError> {
        if let Some(p) = probs.keys().find(|p| p.len() != n) {
            return Err(OracleError::DimensionMismatch(n, p.len()));
        }
        let total: Rational = probs.values().sum();
        if probs.values().any(Signed::is_negative) || !total.is_one() {
            return Err(OracleError::NotNormalized(format_rational(&total)));
        }
        let probs = probs.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        Ok(PermutationDistribution { n, probs })
    }

    pub(crate) fn from_accumulated(n: usize, acc: HashMap<Perm, Rational>) -> Self {
        let probs: BTreeMap<Perm, Rational> = acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        debug_assert!(probs.values().sum::<Rational>().is_one());
        PermutationDistribution { n, probs }
    }

    pub fn uniform(n: usize) -> Self {
        let all = Perm::all(n);
        let p = Rational::new(1.into(), all.len().into());
        PermutationDistribution {
            n,
            probs: all.into_iter().map(|q| (q, p.clone())).collect(),
        }
    }

    pub fn delta(perm: Perm) -> Self {
        PermutationDistribution {
            n: perm.len(),
            probs: [(perm, Rational::one())].into_iter().collect(),
        }
    }

    /// Empirical frequencies as exact fractions `count / total`.
    pub fn from_counts(n: usize, counts: &HashMap<Perm, u64>) -> Result<Self, OracleError> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(OracleError::NotNormalized("0".into()));
        }
        let probs = counts
            .iter()
            .map(|(p, &c)| (p.clone(), Rational::new(c.into(), total.into())))
            .collect();
        PermutationDistribution::new(n, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, perm: &Perm) -> Rational {
        self.probs.get(perm).cloned().unwrap_or_else(Rational::zero)
    }

    /// Support in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&Perm, &Rational)> {
        self.probs.iter()
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> Rational {
        self.probs.values().sum()
    }

    /// Law of `sigma⁻¹` when `sigma` has this law.
    pub fn inverse_pushforward(&self) -> Self {
        PermutationDistribution {
            n: self.n,
            probs: self.probs.iter().map(|(p, v)| (p.inverse(), v.clone())).collect(),
        }
    }

    /// Law of the relative order of the first `m` entries.
    pub fn marginalize(&self, m: usize) -> Self {
        assert!(m <= self.n);
        let mut acc: BTreeMap<Perm, Rational> = BTreeMap::new();
        for (p, v) in &self.probs {
            *acc.entry(p.restrict(m)).or_insert_with(Rational::zero) += v;
        }
        PermutationDistribution { n: m, probs: acc }
    }

    /// Convex combination of laws on the same `S_n`.
    pub fn mixture(parts: &[(Rational, PermutationDistribution)]) -> Result<Self, OracleError> {
        let n = parts.first().map(|(_, d)| d.n).unwrap_or(0);
        let mut acc: BTreeMap<Perm, Rational> = BTreeMap::new();
        for (w, d) in parts {
            if d.n != n {
                return Err(OracleError::DimensionMismatch(n, d.n));
            }
            for (p, v) in &d.probs {
                *acc.entry(p.clone()).or_insert_with(Rational::zero) += w * v;
            }
        }
        PermutationDistribution::new(n, acc)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let probs: serde_json::Map<String, serde_json::Value> = self
            .probs
            .iter()
            .map(|(p, v)| (p.to_string(), serde_json::Value::String(format_rational(v))))
            .collect();
        serde_json::json!({ "n": self.n, "probs": probs })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, OracleError> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            probs: BTreeMap<String, String>,
        }
        let raw: Raw = serde_json::from_value(value.clone()).map_err(|e| OracleError::Parse(e.to_string()))?;
        let mut probs = BTreeMap::new();
        for (k, v) in raw.probs {
            let p: Perm = k.parse().map_err(|e: crate::perm::ParsePermError| OracleError::Parse(e.to_string()))?;
            let q = rational::parse_rational(&v).map_err(|e| OracleError::Parse(e.to_string()))?;
            probs.insert(p, q);
        }
        PermutationDistribution::new(raw.n, probs)
    }
}

impl fmt::Display for PermutationDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .probs
            .iter()
            .map(|(p, v)| format!("{p}: {}", format_rational(v)))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for PermutationDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// What a cell of the decomposition holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellKind {
    /// A stretch `[lo, hi]` of `F` with positive length.
    Diffuse { lo: Rational, hi: Rational },
    /// The atom of gap `gap`.
    Atom { gap: usize, side: AtomSide },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub kind: CellKind,
    pub mass: Rational,
}

/// The support of a measure cut into cells, listed in order of position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellDecomposition {
    cells: Vec<Cell>,
}

impl CellDecomposition {
    pub fn new(measure: &QuasiUniformMeasure) -> Self {
        let gaps = measure.gaps();
        // sort key: (position, 0 for atoms / 1 for a segment starting there, tiebreak)
        let mut keyed: Vec<((Rational, u8, Rational), Cell)> = Vec::new();
        for (i, g) in gaps.iter().enumerate() {
            keyed.push((
                (g.atom().clone(), 0, g.conjugate_point().clone()),
                Cell {
                    kind: CellKind::Atom { gap: i, side: g.atom_side },
                    mass: g.mass(),
                },
            ));
        }
        let mut cursor = Rational::zero();
        let push_segment = |lo: &Rational, hi: &Rational, keyed: &mut Vec<_>| {
            if lo < hi {
                keyed.push((
                    (lo.clone(), 1, Rational::zero()),
                    Cell {
                        kind: CellKind::Diffuse { lo: lo.clone(), hi: hi.clone() },
                        mass: hi - lo,
                    },
                ));
            }
        };
        for g in gaps {
            push_segment(&cursor, &g.lo, &mut keyed);
            if g.hi > cursor {
                cursor = g.hi.clone();
            }
        }
        push_segment(&cursor, &Rational::one(), &mut keyed);
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let cells = keyed.into_iter().map(|(_, c)| c).collect::<Vec<_>>();
        debug_assert!(cells.iter().map(|c| c.mass.clone()).sum::<Rational>().is_one());
        CellDecomposition { cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

fn permutations_of(items: &[usize]) -> Vec<Vec<usize>> {
    Perm::all(items.len())
        .into_iter()
        .map(|p| p.images().iter().map(|&i| items[i]).collect())
        .collect()
}

fn check_caps(n: usize, cells: usize, caps: OracleCaps) -> Result<(), OracleError> {
    if n > caps.max_n {
        return Err(OracleError::CapExceeded { what: "n", value: n, cap: caps.max_n });
    }
    if cells > caps.max_cells {
        return Err(OracleError::CapExceeded { what: "cells", value: cells, cap: caps.max_cells });
    }
    Ok(())
}

/// Exact law of the random order restricted to `n` labels, as the ranking
/// `rho` of the labels taken in natural order.
pub fn exact_ordering_distribution(
    measure: &QuasiUniformMeasure,
    n: usize,
) -> Result<PermutationDistribution, OracleError> {
    exact_ordering_distribution_with(measure, n, OracleCaps::default())
}

pub fn exact_ordering_distribution_with(
    measure: &QuasiUniformMeasure,
    n: usize,
    caps: OracleCaps,
) -> Result<PermutationDistribution, OracleError> {
    let decomposition = CellDecomposition::new(measure);
    let cells = decomposition.cells();
    check_caps(n, cells.len(), caps)?;
    let mut acc: HashMap<Perm, Rational> = HashMap::new();
    let mut assignment = vec![0usize; n];
    enumerate_assignments(cells, &mut assignment, 0, Rational::one(), &mut acc);
    Ok(PermutationDistribution::from_accumulated(n, acc))
}

fn enumerate_assignments(
    cells: &[Cell],
    assignment: &mut [usize],
    card: usize,
    weight: Rational,
    acc: &mut HashMap<Perm, Rational>,
) {
    if card == assignment.len() {
        accumulate_orders(cells, assignment, &weight, acc);
        return;
    }
    for (c, cell) in cells.iter().enumerate() {
        assignment[card] = c;
        enumerate_assignments(cells, assignment, card + 1, &weight * &cell.mass, acc);
    }
}

fn accumulate_orders(
    cells: &[Cell],
    assignment: &[usize],
    weight: &Rational,
    acc: &mut HashMap<Perm, Rational>,
) {
    let n = assignment.len();
    // for each occupied cell: the list of arrangements of its cards, bottom to top
    let mut blocks: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut arrangements = 1u64;
    for (c, cell) in cells.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&k| assignment[k] == c).collect();
        if members.is_empty() {
            continue;
        }
        match &cell.kind {
            CellKind::Atom { side: AtomSide::Right, .. } => blocks.push(vec![members]),
            CellKind::Atom { side: AtomSide::Left, .. } => {
                blocks.push(vec![members.into_iter().rev().collect()])
            }
            CellKind::Diffuse { .. } => {
                arrangements *= factorial(members.len());
                blocks.push(permutations_of(&members));
            }
        }
    }
    let share = weight / Rational::from_integer(arrangements.into());
    let mut choice = vec![0usize; blocks.len()];
    loop {
        let mut ranks = vec![0usize; n];
        let mut next = 0;
        for (b, &i) in blocks.iter().zip(&choice) {
            for &card in &b[i] {
                ranks[card] = next;
                next += 1;
            }
        }
        *acc.entry(Perm::from_images_unchecked(ranks)).or_insert_with(Rational::zero) += &share;
        // odometer over per-block arrangements
        let mut pos = 0;
        loop {
            if pos == blocks.len() {
                return;
            }
            choice[pos] += 1;
            if choice[pos] < blocks[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact ordering law of a mixture, component by component.
pub fn exact_mixture_distribution(
    mixture: &MeasureMixture,
    n: usize,
) -> Result<PermutationDistribution, OracleError> {
    let parts = mixture
        .components()
        .iter()
        .map(|(w, m)| Ok((w.clone(), exact_ordering_distribution(m, n)?)))
        .collect::<Result<Vec<_>, OracleError>>()?;
    PermutationDistribution::mixture(&parts)
}

/// Which way an ordering law is read as a one-step law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepType {
    /// The step `rho_{h+1} rho_h⁻¹` has the ordering law.
    One,
    /// The step `rho_h rho_{h+1}⁻¹` has the ordering law.
    Two,
}

impl std::str::FromStr for StepType {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "one" | "1" => Ok(StepType::One),
            "two" | "2" => Ok(StepType::Two),
            other => Err(OracleError::Parse(format!("step type `{other}`"))),
        }
    }
}

/// Exact law of one shuffle step of the given type.
pub fn exact_step_distribution(
    measure: &QuasiUniformMeasure,
    n: usize,
    step: StepType,
) -> Result<PermutationDistribution, OracleError> {
    let ordering = exact_ordering_distribution(measure, n)?;
    Ok(match step {
        StepType::One => ordering,
        StepType::Two => ordering.inverse_pushforward(),
    })
}

/// Half the L1 distance, exact.
pub fn tv_distance(
    p: &PermutationDistribution,
    q: &PermutationDistribution,
) -> Result<Rational, OracleError> {
    if p.n != q.n {
        return Err(OracleError::DimensionMismatch(p.n, q.n));
    }
    let mut sum = Rational::zero();
    for (perm, a) in &p.probs {
        sum += (a - q.prob(perm)).abs();
    }
    for (perm, b) in &q.probs {
        if !p.probs.contains_key(perm) {
            sum += b;
        }
    }
    Ok(sum / Rational::from_integer(2.into()))
}

/// The full `n! × n!` transition matrix of the random walk driven by a step
/// law: from state `rho` the walk moves to `sigma ∘ rho` with probability
/// `step(sigma)`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    states: Vec<Perm>,
    /// Sparse rows: `(column, probability)`.
    rows: Vec<Vec<(usize, Rational)>>,
}

impl TransitionMatrix {
    pub fn from_step(step: &PermutationDistribution) -> Self {
        let states = Perm::all(step.n);
        let index: HashMap<&Perm, usize> = states.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let rows = states
            .iter()
            .map(|rho| {
                step.iter()
                    .map(|(sigma, p)| (index[&sigma.compose(rho)], p.clone()))
                    .collect()
            })
            .collect();
        TransitionMatrix { states, rows }
    }

    pub fn states(&self) -> &[Perm] {
        &self.states
    }

    pub fn entry(&self, from: usize, to: usize) -> Rational {
        self.rows[from]
            .iter()
            .filter(|(c, _)| *c == to)
            .map(|(_, p)| p.clone())
            .sum()
    }

    pub fn row_sums(&self) -> Vec<Rational> {
        self.rows.iter().map(|r| r.iter().map(|(_, p)| p.clone()).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<Rational> {
        let mut sums = vec![Rational::zero(); self.states.len()];
        for row in &self.rows {
            for (c, p) in row {
                sums[*c] += p;
            }
        }
        sums
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        self.row_sums().iter().all(One::is_one) && self.column_sums().iter().all(One::is_one)
    }

    /// One step of the chain applied to a row vector.
    pub fn advance(&self, dist: &[Rational]) -> Vec<Rational> {
        let mut next = vec![Rational::zero(); dist.len()];
        for (from, mass) in dist.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (to, p) in &self.rows[from] {
                next[*to] += mass * p;
            }
        }
        next
    }
}

/// Exact total variation to uniform after `h = 0..=steps` steps from the
/// identity, for the walk driven by `step`.
pub fn mixing_curve_from_step(step: &PermutationDistribution, steps: usize) -> Vec<Rational> {
    let matrix = TransitionMatrix::from_step(step);
    let size = matrix.states.len();
    let uniform = Rational::new(1.into(), size.into());
    let mut dist = vec![Rational::zero(); size];
    dist[0] = Rational::one();
    let tv = |d: &[Rational]| d.iter().map(|p| (p - &uniform).abs()).sum::<Rational>() / Rational::from_integer(2.into());
    let mut curve = vec![tv(&dist)];
    for _ in 0..steps {
        dist = matrix.advance(&dist);
        curve.push(tv(&dist));
    }
    debug_assert!(curve.windows(2).all(|w| w[1] <= w[0]), "distance to uniform increased");
    curve
}

/// Exact mixing curve of the type-`step` shuffle built from `measure`.
pub fn mixing_curve(
    measure: &QuasiUniformMeasure,
    n: usize,
    step: StepType,
    steps: usize,
) -> Result<Vec<Rational>, OracleError> {
    let law = exact_step_distribution(measure, n, step)?;
    Ok(mixing_curve_from_step(&law, steps))
}
