//! Random orderings of integer labels built from i.i.d. conjugate pairs.
//!
//! For labels `m < n` with conjugate samples `(x_m, y_m)` and `(x_n, y_n)`,
//! `m ◁ n` holds iff `x_m < x_n`, or `y_m < y_n`, or the two pairs coincide
//! with `x > y` (both cards share a gap whose atom is on the right, which
//! keeps the natural order; a left atom reverses it). The law of the
//! resulting order is invariant under increasing relabellings.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_traits::{One, Signed, ToPrimitive};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::measure::{ConjugateSample, MeasureError, QuasiUniformMeasure};
use crate::perm::Perm;
use crate::rational::{format_rational, Rational};
use crate::stats::{self, StatsError, TestReport};

#[derive(Debug, Error)]
pub enum OrderingError {
    #[error("labels must be nonempty and strictly increasing")]
    BadLabels,
    #[error("a label is never compared with itself")]
    SameLabel,
    #[error("window {window} is too small for target label {target}")]
    WindowTooSmall { window: u64, target: i64 },
    #[error("label sets have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// A finite, strictly increasing set of integer labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSet(Vec<i64>);

impl LabelSet {
    pub fn new(labels: Vec<i64>) -> Result<Self, OrderingError> {
        if labels.is_empty() || labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OrderingError::BadLabels);
        }
        Ok(LabelSet(labels))
    }

    /// `{1, ..., n}`.
    pub fn first(n: usize) -> Self {
        assert!(n >= 1);
        LabelSet((1..=n as i64).collect())
    }

    /// `{lo, ..., hi}`.
    pub fn range(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi);
        LabelSet((lo..=hi).collect())
    }

    pub fn labels(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, label: i64) -> Option<usize> {
        self.0.binary_search(&label).ok()
    }
}

/// `m ◁ n` for `m` below `n` in the natural order.
#[inline]
pub fn precedes_natural(lower: &ConjugateSample, upper: &ConjugateSample) -> bool {
    let x = lower.x().cmp_exact(&upper.x());
    if x == Ordering::Less {
        return true;
    }
    let y = lower.y().cmp_exact(&upper.y());
    if y == Ordering::Less {
        return true;
    }
    x == Ordering::Equal && y == Ordering::Equal && lower.x().cmp_exact(&lower.y()) == Ordering::Greater
}

/// Whether `m ◁ n` given the conjugate samples attached to labels `m` and `n`.
pub fn compare(
    s_m: &ConjugateSample,
    s_n: &ConjugateSample,
    m: i64,
    n: i64,
) -> Result<bool, OrderingError> {
    match m.cmp(&n) {
        Ordering::Less => Ok(precedes_natural(s_m, s_n)),
        Ordering::Greater => Ok(!precedes_natural(s_n, s_m)),
        Ordering::Equal => Err(OrderingError::SameLabel),
    }
}

/// Strict total order on cards indexed in natural label order.
#[inline]
pub(crate) fn card_order(cards: &[ConjugateSample], i: usize, j: usize) -> Ordering {
    match i.cmp(&j) {
        Ordering::Equal => Ordering::Equal,
        Ordering::Less => {
            if precedes_natural(&cards[i], &cards[j]) {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
        Ordering::Greater => {
            if precedes_natural(&cards[j], &cards[i]) {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
    }
}

/// A strict total order on a finite label set, stored as ranks.
#[derive(Debug, Clone)]
pub struct OrderingSample {
    labels: LabelSet,
    rank: Perm,
    cards: Vec<ConjugateSample>,
}

impl OrderingSample {
    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    /// `rho`: the zero-based rank of the `i`-th smallest label.
    pub fn permutation(&self) -> &Perm {
        &self.rank
    }

    pub fn into_permutation(self) -> Perm {
        self.rank
    }

    /// 1-based position of `label` in the order, if present.
    pub fn position(&self, label: i64) -> Option<usize> {
        self.labels.index_of(label).map(|i| self.rank.apply(i) + 1)
    }

    /// `a ◁ b`, if both labels are present.
    pub fn precedes(&self, a: i64, b: i64) -> Option<bool> {
        Some(self.position(a)? < self.position(b)?)
    }

    /// Labels listed from the bottom of the order to the top.
    pub fn bottom_to_top(&self) -> Vec<i64> {
        let inv = self.rank.inverse();
        inv.images().iter().map(|&i| self.labels.0[i]).collect()
    }

    /// The conjugate sample attached to each label, in label order.
    pub fn cards(&self) -> &[ConjugateSample] {
        &self.cards
    }
}

/// A finite mixture of quasi-uniform measures with exact rational weights.
#[derive(Debug, Clone)]
pub struct MeasureMixture {
    components: Vec<(Rational, QuasiUniformMeasure)>,
    cumulative: Vec<f64>,
}

impl MeasureMixture {
    pub fn new(components: Vec<(Rational, QuasiUniformMeasure)>) -> Result<Self, OrderingError> {
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
        Ok(MeasureMixture {
            components,
            cumulative,
        })
    }

    pub fn components(&self) -> &[(Rational, QuasiUniformMeasure)] {
        &self.components
    }
}

/// A law over quasi-uniform measures from which one measure is drawn per
/// ordering.
pub trait OrderingLaw: Sync {
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &QuasiUniformMeasure;
    fn weighted(&self) -> Vec<(Rational, &QuasiUniformMeasure)>;
}

impl OrderingLaw for QuasiUniformMeasure {
    fn pick<R: Rng + ?Sized>(&self, _rng: &mut R) -> &QuasiUniformMeasure {
        self
    }

    fn weighted(&self) -> Vec<(Rational, &QuasiUniformMeasure)> {
        vec![(Rational::one(), self)]
    }
}

impl OrderingLaw for MeasureMixture {
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &QuasiUniformMeasure {
        let u: f64 = rng.gen();
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1);
        &self.components[idx].1
    }

    fn weighted(&self) -> Vec<(Rational, &QuasiUniformMeasure)> {
        self.components.iter().map(|(w, m)| (w.clone(), m)).collect()
    }
}

fn debug_check_order(sorted: &[usize], cards: &[ConjugateSample]) {
    for w in sorted.windows(2) {
        let (a, b) = (&cards[w[0]], &cards[w[1]]);
        assert!(a.x().cmp_exact(&b.x()) != Ordering::Greater, "x must be monotone along the order");
        assert!(a.y().cmp_exact(&b.y()) != Ordering::Greater, "y must be monotone along the order");
        if let (Some(ga), Some(gb)) = (a.gap_index(), b.gap_index()) {
            if ga == gb {
                let natural = w[0] < w[1];
                assert_eq!(natural, a.is_right_atom(), "atom order must follow the atom side");
            }
        }
    }
    if sorted.len() <= 32 {
        for (p, &i) in sorted.iter().enumerate() {
            for &j in &sorted[p + 1..] {
                assert_eq!(card_order(cards, i, j), Ordering::Less, "order is not transitive");
            }
        }
    }
}

/// Sorts cards (indexed in natural label order) into the random order and
/// returns their ranks.
pub(crate) fn rank_cards(cards: &[ConjugateSample]) -> Perm {
    let mut sorted: Vec<usize> = (0..cards.len()).collect();
    sorted.sort_unstable_by(|&i, &j| card_order(cards, i, j));
    if cfg!(debug_assertions) {
        debug_check_order(&sorted, cards);
    }
    let mut ranks = vec![0; cards.len()];
    for (rank, i) in sorted.into_iter().enumerate() {
        ranks[i] = rank;
    }
    Perm::from_images_unchecked(ranks)
}

/// Draws one ordering of `labels`: one measure from the source, then one
/// conjugate pair per label.
pub fn sample_ordering<S, R>(source: &S, labels: &LabelSet, rng: &mut R) -> OrderingSample
where
    S: OrderingLaw + ?Sized,
    R: Rng + ?Sized,
{
    let measure = source.pick(rng);
    let cards: Vec<ConjugateSample> = (0..labels.len())
        .map(|_| measure.sample_conjugate_pair(rng))
        .collect();
    let rank = rank_cards(&cards);
    OrderingSample {
        labels: labels.clone(),
        rank,
        cards,
    }
}

/// One-sided empirical positions of a card within a window of labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalPosition {
    pub x_hat: f64,
    pub y_hat: f64,
    pub window: u64,
}

/// Estimates the position pair of `target` from an ordering of
/// `{-N..N}`: `x_hat` counts labels below the target in both senses,
/// `y_hat` counts labels above it in the natural order but below it in the
/// random order, both divided by `N`. The target itself is excluded.
///
/// Returns the target's own conjugate sample alongside the estimate.
pub fn empirical_positions<S, R>(
    source: &S,
    target: i64,
    window: u64,
    rng: &mut R,
) -> Result<(EmpiricalPosition, ConjugateSample), OrderingError>
where
    S: OrderingLaw + ?Sized,
    R: Rng + ?Sized,
{
    if window == 0 || window < target.unsigned_abs() + 1 {
        return Err(OrderingError::WindowTooSmall { window, target });
    }
    let measure = source.pick(rng);
    let n = window as i64;
    let own = measure.sample_conjugate_pair(rng);
    let mut below = 0u64;
    let mut above = 0u64;
    for k in -n..=n {
        if k == target {
            continue;
        }
        let card = measure.sample_conjugate_pair(rng);
        if k < target {
            below += u64::from(precedes_natural(&card, &own));
        } else {
            above += u64::from(!precedes_natural(&own, &card));
        }
    }
    let position = EmpiricalPosition {
        x_hat: below as f64 / window as f64,
        y_hat: above as f64 / window as f64,
        window,
    };
    Ok((position, own))
}

/// Empirical positions of every label in `{-N..N}` from one shared ordering.
pub fn window_positions<S, R>(
    source: &S,
    window: u64,
    rng: &mut R,
) -> Vec<(i64, EmpiricalPosition, ConjugateSample)>
where
    S: OrderingLaw + ?Sized,
    R: Rng + ?Sized,
{
    let labels = LabelSet::range(-(window as i64), window as i64);
    let sample = sample_ordering(source, &labels, rng);
    let size = labels.len();
    // Fenwick tree over ranks: labels are inserted in natural order
    let mut tree = vec![0u64; size + 1];
    let mut out = Vec::with_capacity(size);
    for (i, &label) in labels.labels().iter().enumerate() {
        let rank = sample.rank.apply(i);
        let mut lower = 0u64;
        let mut idx = rank;
        while idx > 0 {
            lower += tree[idx];
            idx &= idx - 1;
        }
        // labels ranked below overall = rank; those with smaller label = lower
        let upper = rank as u64 - lower;
        let mut idx = rank + 1;
        while idx <= size {
            tree[idx] += 1;
            idx += idx & idx.wrapping_neg();
        }
        out.push((
            label,
            EmpiricalPosition {
                x_hat: lower as f64 / window as f64,
                y_hat: upper as f64 / window as f64,
                window,
            },
            sample.cards[i],
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchangeabilityReport {
    pub test: TestReport,
    pub first: Vec<(String, u64)>,
    pub second: Vec<(String, u64)>,
}

fn histogram<S, R>(source: &S, labels: &LabelSet, samples: u64, rng: &mut R) -> HashMap<Perm, u64>
where
    S: OrderingLaw + ?Sized,
    R: Rng + ?Sized,
{
    let mut counts = HashMap::new();
    for _ in 0..samples {
        *counts
            .entry(sample_ordering(source, labels, rng).into_permutation())
            .or_insert(0) += 1;
    }
    counts
}

fn sorted_counts(counts: &HashMap<Perm, u64>) -> Vec<(String, u64)> {
    let mut v: Vec<(Perm, u64)> = counts.iter().map(|(p, &c)| (p.clone(), c)).collect();
    v.sort();
    v.into_iter().map(|(p, c)| (p.to_string(), c)).collect()
}

/// Two-sample chi-square comparison of the ranking laws induced on two
/// increasing label sets of the same size.
pub fn exchangeability_test<S, R>(
    source: &S,
    first: &LabelSet,
    second: &LabelSet,
    samples: u64,
    alpha: f64,
    rng: &mut R,
) -> Result<ExchangeabilityReport, OrderingError>
where
    S: OrderingLaw + ?Sized,
    R: Rng + ?Sized,
{
    if first.len() != second.len() {
        return Err(OrderingError::SizeMismatch(first.len(), second.len()));
    }
    let a = histogram(source, first, samples, rng);
    let b = histogram(source, second, samples, rng);
    let test = stats::chi_square_two_sample(&a, &b, alpha)?;
    Ok(ExchangeabilityReport {
        test,
        first: sorted_counts(&a),
        second: sorted_counts(&b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::QuasiUniformMeasure;
    use crate::rational::rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gsr_cards() -> (ConjugateSample, ConjugateSample) {
        let gsr = QuasiUniformMeasure::gsr();
        (gsr.classify(0.25), gsr.classify(0.75))
    }

    #[test]
    fn single_right_atom_keeps_natural_order() {
        let id = QuasiUniformMeasure::named("identity").unwrap();
        let c = id.classify(0.3);
        let d = id.classify(0.9);
        assert!(compare(&c, &d, 1, 2).unwrap());
        assert!(!compare(&d, &c, 2, 1).unwrap());
    }

    #[test]
    fn single_left_atom_reverses() {
        let rev = QuasiUniformMeasure::named("reversal").unwrap();
        let c = rev.classify(0.3);
        let d = rev.classify(0.9);
        assert!(!compare(&c, &d, 1, 2).unwrap());
        assert!(compare(&d, &c, 2, 1).unwrap());
    }

    #[test]
    fn gsr_cross_gap_comparison() {
        let (low, high) = gsr_cards();
        assert!(compare(&low, &high, 1, 2).unwrap());
        // the binary example with (Z_1, Z_2) = (1, 0) reverses
        assert!(compare(&low, &high, 2, 1).unwrap());
        assert!(matches!(compare(&low, &low, 3, 3), Err(OrderingError::SameLabel)));
    }

    #[test]
    fn label_set_validation() {
        assert!(LabelSet::new(vec![]).is_err());
        assert!(LabelSet::new(vec![1, 1]).is_err());
        assert!(LabelSet::new(vec![3, 2]).is_err());
        assert_eq!(LabelSet::new(vec![-4, 0, 9]).unwrap().len(), 3);
    }

    #[test]
    fn identity_measure_gives_identity_ranking() {
        let id = QuasiUniformMeasure::named("identity").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels = LabelSet::new(vec![-3, 5, 8, 40]).unwrap();
        for _ in 0..100 {
            let s = sample_ordering(&id, &labels, &mut rng);
            assert!(s.permutation().is_identity());
            assert_eq!(s.bottom_to_top(), vec![-3, 5, 8, 40]);
            assert_eq!(s.precedes(5, 40), Some(true));
            assert_eq!(s.position(99), None);
        }
    }

    #[test]
    fn gsr_two_card_reversal_rate() {
        let gsr = QuasiUniformMeasure::gsr();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let labels = LabelSet::first(2);
        let draws = 100_000;
        let swaps = (0..draws)
            .filter(|_| !sample_ordering(&gsr, &labels, &mut rng).permutation().is_identity())
            .count();
        let p = swaps as f64 / draws as f64;
        assert!((p - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / draws as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn mixture_weights_validated() {
        let leb = QuasiUniformMeasure::lebesgue();
        assert!(MeasureMixture::new(vec![(rational(1, 2), leb.clone())]).is_err());
        assert!(MeasureMixture::new(vec![(rational(3, 2), leb.clone()), (rational(-1, 2), leb.clone())]).is_err());
        let ok = MeasureMixture::new(vec![(rational(1, 2), leb.clone()), (rational(1, 2), leb)]).unwrap();
        assert_eq!(ok.components().len(), 2);
    }

    #[test]
    fn positions_for_identity_measure() {
        let id = QuasiUniformMeasure::named("identity").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pos, _) = empirical_positions(&id, 0, 100, &mut rng).unwrap();
        assert_eq!(pos.x_hat, 1.0);
        assert_eq!(pos.y_hat, 0.0);
        assert!(matches!(
            empirical_positions(&id, 10, 10, &mut rng),
            Err(OrderingError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn window_positions_match_direct_counts() {
        let m = QuasiUniformMeasure::mixed_fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = 50;
        let all = window_positions(&m, w, &mut rng);
        let cards: Vec<ConjugateSample> = all.iter().map(|t| t.2).collect();
        for (i, (label, pos, _)) in all.iter().enumerate() {
            let below = (0..i).filter(|&j| card_order(&cards, j, i) == Ordering::Less).count();
            let above = (i + 1..cards.len())
                .filter(|&j| card_order(&cards, j, i) == Ordering::Less)
                .count();
            assert_eq!(pos.x_hat, below as f64 / w as f64, "label {label}");
            assert_eq!(pos.y_hat, above as f64 / w as f64, "label {label}");
        }
    }
}
