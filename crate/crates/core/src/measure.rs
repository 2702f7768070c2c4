//! Quasi-uniform measures on `[0,1]` and their conjugate pairs.
//!
//! A quasi-uniform measure is Lebesgue measure restricted to a closed set `F`
//! plus, for every open gap `(lo, hi)` of `F`, an atom of mass `hi - lo` placed
//! at one of the two ends of the gap. Only finitely many gaps are represented,
//! all with exact rational endpoints.
//!
//! The conjugate measure moves every atom to the opposite end of its gap. A
//! conjugate pair `(X, Y)` is sampled jointly from one uniform draw: inside a
//! gap `X` is the atom end and `Y` the other end, on `F` both equal the draw.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, format_rational, parse_rational, DoubleBracket, Rational};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("gap interiors intersect: ({0}) and ({1})")]
    OverlappingGaps(String, String),
    #[error("value {0} lies outside [0,1]")]
    OutOfRange(String),
    #[error("degenerate gap: lo = {lo} is not below hi = {hi}")]
    DegenerateGap { lo: String, hi: String },
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("invalid measure description: {0}")]
    Parse(String),
    #[error("mixture weights must be positive and sum to 1 (got sum {0})")]
    BadWeights(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomSide {
    Left,
    Right,
}

impl AtomSide {
    pub fn flipped(self) -> Self {
        match self {
            AtomSide::Left => AtomSide::Right,
            AtomSide::Right => AtomSide::Left,
        }
    }
}

impl std::str::FromStr for AtomSide {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(AtomSide::Left),
            "right" | "r" => Ok(AtomSide::Right),
            other => Err(MeasureError::Parse(format!("atom side `{other}`"))),
        }
    }
}

/// One open component of the complement of `F`, carrying an atom of its own
/// length at the `atom_side` end.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GapInterval {
    #[serde(with = "rational::serde_rational")]
    pub lo: Rational,
    #[serde(with = "rational::serde_rational")]
    pub hi: Rational,
    pub atom_side: AtomSide,
}

impl GapInterval {
    pub fn new(lo: Rational, hi: Rational, atom_side: AtomSide) -> Self {
        GapInterval { lo, hi, atom_side }
    }

    pub fn mass(&self) -> Rational {
        &self.hi - &self.lo
    }

    /// Where the atom sits.
    pub fn atom(&self) -> &Rational {
        match self.atom_side {
            AtomSide::Left => &self.lo,
            AtomSide::Right => &self.hi,
        }
    }

    /// The opposite end: the atom position of the conjugate measure.
    pub fn conjugate_point(&self) -> &Rational {
        match self.atom_side {
            AtomSide::Left => &self.hi,
            AtomSide::Right => &self.lo,
        }
    }

    fn interior_intersects(&self, other: &GapInterval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

impl fmt::Display for GapInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.atom_side {
            AtomSide::Left => "left",
            AtomSide::Right => "right",
        };
        write!(
            f,
            "{}, {}, {}",
            format_rational(&self.lo),
            format_rational(&self.hi),
            side
        )
    }
}

/// Raw gap list as read from JSON, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub gaps: Vec<GapInterval>,
}

impl MeasureSpec {
    pub fn from_json(text: &str) -> Result<Self, MeasureError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A gap endpoint prepared for exact comparisons: its rank among the distinct
/// endpoint values of one measure, and a double bracket for comparing against
/// diffuse sample coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    rank: u32,
    bracket: DoubleBracket,
}

impl Endpoint {
    /// Nearest double at or below the exact value.
    pub fn approx(&self) -> f64 {
        self.bracket.floor
    }
}

/// A coordinate of a conjugate sample: either a diffuse double or an exact
/// gap endpoint. Coordinates drawn from the same measure are totally ordered
/// and compared exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coord {
    Real(f64),
    Endpoint(Endpoint),
}

impl Coord {
    pub fn value(&self) -> f64 {
        match self {
            Coord::Real(u) => *u,
            Coord::Endpoint(e) => e.approx(),
        }
    }

    #[inline]
    pub fn cmp_exact(&self, other: &Coord) -> Ordering {
        match (self, other) {
            (Coord::Real(a), Coord::Real(b)) => a.total_cmp(b),
            (Coord::Endpoint(a), Coord::Endpoint(b)) => a.rank.cmp(&b.rank),
            (Coord::Real(a), Coord::Endpoint(b)) => b.bracket.cmp_double(*a),
            (Coord::Endpoint(a), Coord::Real(b)) => a.bracket.cmp_double(*b).reverse(),
        }
    }
}

/// One draw of a conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConjugateSample {
    /// The draw landed in `F`; `X = Y = u`.
    Diffuse(f64),
    /// The draw landed inside gap `index`; `x` is the atom end, `y` the other.
    Gap { index: usize, x: Endpoint, y: Endpoint },
}

impl ConjugateSample {
    pub fn x(&self) -> Coord {
        match self {
            ConjugateSample::Diffuse(u) => Coord::Real(*u),
            ConjugateSample::Gap { x, .. } => Coord::Endpoint(*x),
        }
    }

    pub fn y(&self) -> Coord {
        match self {
            ConjugateSample::Diffuse(u) => Coord::Real(*u),
            ConjugateSample::Gap { y, .. } => Coord::Endpoint(*y),
        }
    }

    pub fn gap_index(&self) -> Option<usize> {
        match self {
            ConjugateSample::Diffuse(_) => None,
            ConjugateSample::Gap { index, .. } => Some(*index),
        }
    }

    /// True when the atom sits at the right end of its gap (so `x > y`).
    pub fn is_right_atom(&self) -> bool {
        match self {
            ConjugateSample::Diffuse(_) => false,
            ConjugateSample::Gap { x, y, .. } => x.rank > y.rank,
        }
    }
}

#[derive(Debug, Clone)]
struct GapGeometry {
    lo: Endpoint,
    hi: Endpoint,
}

/// A validated quasi-uniform measure with finitely many gaps, sorted by `lo`.
#[derive(Debug, Clone)]
pub struct QuasiUniformMeasure {
    gaps: Vec<GapInterval>,
    geometry: Vec<GapGeometry>,
}

impl PartialEq for QuasiUniformMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.gaps == other.gaps
    }
}

impl Eq for QuasiUniformMeasure {}

fn check_unit(value: &Rational) -> Result<(), MeasureError> {
    if value.is_negative() || *value > Rational::one() {
        Err(MeasureError::OutOfRange(format_rational(value)))
    } else {
        Ok(())
    }
}

/// Sorts and checks a raw gap list.
pub fn validate(spec: MeasureSpec) -> Result<QuasiUniformMeasure, MeasureError> {
    let mut gaps = spec.gaps;
    for gap in &gaps {
        check_unit(&gap.lo)?;
        check_unit(&gap.hi)?;
        if gap.lo >= gap.hi {
            return Err(MeasureError::DegenerateGap {
                lo: format_rational(&gap.lo),
                hi: format_rational(&gap.hi),
            });
        }
    }
    gaps.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
    for pair in gaps.windows(2) {
        if pair[0].interior_intersects(&pair[1]) {
            return Err(MeasureError::OverlappingGaps(
                pair[0].to_string(),
                pair[1].to_string(),
            ));
        }
    }
    let measure = QuasiUniformMeasure::from_sorted(gaps);
    debug_assert!(measure.total_mass().is_one());
    Ok(measure)
}

impl QuasiUniformMeasure {
    fn from_sorted(gaps: Vec<GapInterval>) -> Self {
        let mut points: Vec<&Rational> = gaps.iter().flat_map(|g| [&g.lo, &g.hi]).collect();
        points.sort();
        points.dedup();
        let endpoint = |value: &Rational| Endpoint {
            rank: points.binary_search(&value).expect("endpoint present") as u32,
            bracket: DoubleBracket::new(value),
        };
        let geometry = gaps
            .iter()
            .map(|g| GapGeometry {
                lo: endpoint(&g.lo),
                hi: endpoint(&g.hi),
            })
            .collect();
        QuasiUniformMeasure { gaps, geometry }
    }

    pub fn lebesgue() -> Self {
        QuasiUniformMeasure::from_sorted(Vec::new())
    }

    /// Atoms of size 1/2 at 1/2 and 1: the Gilbert-Shannon-Reeds measure.
    pub fn gsr() -> Self {
        Self::a_shuffle(2)
    }

    /// `k` equal gaps `((i-1)/k, i/k)`, each with its atom on the right.
    pub fn a_shuffle(k: u32) -> Self {
        assert!(k >= 1, "a-shuffle needs at least one pile");
        let k = i64::from(k);
        let gaps = (1..=k)
            .map(|i| GapInterval::new(rational::rational(i - 1, k), rational::rational(i, k), AtomSide::Right))
            .collect();
        QuasiUniformMeasure::from_sorted(gaps)
    }

    /// A single gap `(lo, hi)` with its atom on `side`.
    pub fn single_gap(lo: Rational, hi: Rational, side: AtomSide) -> Result<Self, MeasureError> {
        validate(MeasureSpec {
            gaps: vec![GapInterval::new(lo, hi, side)],
        })
    }

    /// Mixed atomic and diffuse fixture: density 1 on `[0,1/4] ∪ [1/2,3/4]`,
    /// atom 1/4 at 1/2 (right end of `(1/4,1/2)`) and atom 1/4 at 3/4 (left
    /// end of `(3/4,1)`).
    pub fn mixed_fixture() -> Self {
        validate(MeasureSpec {
            gaps: vec![
                GapInterval::new(rational::rational(1, 4), rational::rational(1, 2), AtomSide::Right),
                GapInterval::new(rational::rational(3, 4), rational::integer(1), AtomSide::Left),
            ],
        })
        .expect("fixture is valid")
    }

    /// Resolves a built-in name: `lebesgue`, `gsr`, `gsr-conjugate`,
    /// `a-shuffle:K`, `mixed`, `identity`, `reversal`, or `gap(lo,hi,side)`.
    pub fn named(name: &str) -> Result<Self, MeasureError> {
        let key = name.trim().to_ascii_lowercase();
        match key.as_str() {
            "lebesgue" | "uniform" => return Ok(Self::lebesgue()),
            "gsr" => return Ok(Self::gsr()),
            "gsr-conjugate" | "gsr'" => return Ok(Self::gsr().conjugate()),
            "mixed" => return Ok(Self::mixed_fixture()),
            "identity" => {
                return Self::single_gap(rational::integer(0), rational::integer(1), AtomSide::Right)
            }
            "reversal" => {
                return Self::single_gap(rational::integer(0), rational::integer(1), AtomSide::Left)
            }
            _ => {}
        }
        if let Some(k) = key.strip_prefix("a-shuffle:") {
            let k: u32 = k
                .trim()
                .parse()
                .map_err(|_| MeasureError::UnknownMeasure(name.to_owned()))?;
            if k == 0 {
                return Err(MeasureError::UnknownMeasure(name.to_owned()));
            }
            return Ok(Self::a_shuffle(k));
        }
        if let Some(args) = key.strip_prefix("gap(").and_then(|s| s.strip_suffix(')')) {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 3 {
                return Err(MeasureError::Parse(format!("expected gap(lo,hi,side), got `{name}`")));
            }
            let parse = |s: &str| parse_rational(s).map_err(|e| MeasureError::Parse(e.to_string()));
            return Self::single_gap(parse(parts[0])?, parse(parts[1])?, parts[2].parse()?);
        }
        Err(MeasureError::UnknownMeasure(name.to_owned()))
    }

    pub fn gaps(&self) -> &[GapInterval] {
        &self.gaps
    }

    pub fn spec(&self) -> MeasureSpec {
        MeasureSpec {
            gaps: self.gaps.clone(),
        }
    }

    /// Lebesgue measure of `F`.
    pub fn diffuse_mass(&self) -> Rational {
        self.gaps
            .iter()
            .fold(Rational::one(), |acc, g| acc - g.mass())
    }

    pub fn total_mass(&self) -> Rational {
        self.diffuse_mass() + self.gaps.iter().map(GapInterval::mass).sum::<Rational>()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.diffuse_mass().is_zero()
    }

    fn diffuse_below(&self, x: &Rational) -> Rational {
        let removed: Rational = self
            .gaps
            .iter()
            .filter(|g| g.lo < *x)
            .map(|g| x.min(&g.hi) - &g.lo)
            .sum();
        x - removed
    }

    /// `μ[0,x]`.
    pub fn cdf(&self, x: &Rational) -> Result<Rational, MeasureError> {
        check_unit(x)?;
        let atoms: Rational = self
            .gaps
            .iter()
            .filter(|g| g.atom() <= x)
            .map(GapInterval::mass)
            .sum();
        Ok(self.diffuse_below(x) + atoms)
    }

    /// `μ[0,x)`.
    pub fn cdf_left(&self, x: &Rational) -> Result<Rational, MeasureError> {
        check_unit(x)?;
        let atoms: Rational = self
            .gaps
            .iter()
            .filter(|g| g.atom() < x)
            .map(GapInterval::mass)
            .sum();
        Ok(self.diffuse_below(x) + atoms)
    }

    /// Every atom moved to the opposite end of its gap.
    pub fn conjugate(&self) -> Self {
        let gaps = self
            .gaps
            .iter()
            .map(|g| GapInterval::new(g.lo.clone(), g.hi.clone(), g.atom_side.flipped()))
            .collect();
        QuasiUniformMeasure::from_sorted(gaps)
    }

    /// `inf{x : μ[0,x] ≥ y}` (or `> y` when `strict`), with `inf ∅ = 1`.
    pub fn quantile(&self, y: &Rational, strict: bool) -> Result<Rational, MeasureError> {
        check_unit(y)?;
        let reached = |value: &Rational| if strict { value > y } else { value >= y };
        let mut critical: Vec<Rational> = vec![Rational::zero(), Rational::one()];
        critical.extend(self.gaps.iter().flat_map(|g| [g.lo.clone(), g.hi.clone()]));
        critical.sort();
        critical.dedup();
        if reached(&self.cdf(&critical[0])?) {
            return Ok(critical[0].clone());
        }
        for pair in critical.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let in_gap = self.gaps.iter().any(|g| g.lo <= *a && *b <= g.hi);
            if !in_gap {
                let t = a + (y - self.cdf(a)?);
                if t < *b {
                    return Ok(t);
                }
            }
            if reached(&self.cdf(b)?) {
                return Ok(b.clone());
            }
        }
        Ok(Rational::one())
    }

    pub fn gap_endpoint(&self, index: usize) -> (Endpoint, Endpoint) {
        let geo = &self.geometry[index];
        (geo.lo, geo.hi)
    }

    fn gap_sample(&self, index: usize) -> ConjugateSample {
        let geo = &self.geometry[index];
        let (x, y) = match self.gaps[index].atom_side {
            AtomSide::Left => (geo.lo, geo.hi),
            AtomSide::Right => (geo.hi, geo.lo),
        };
        ConjugateSample::Gap { index, x, y }
    }

    /// Classifies a uniform draw: inside a gap interior gives that gap, on `F`
    /// gives a diffuse sample. Gap endpoints belong to `F`.
    pub fn classify(&self, u: f64) -> ConjugateSample {
        let after = self
            .geometry
            .partition_point(|g| g.lo.bracket.cmp_double(u) == Ordering::Greater);
        if after > 0 {
            let idx = after - 1;
            if self.geometry[idx].hi.bracket.cmp_double(u) == Ordering::Less {
                return self.gap_sample(idx);
            }
        }
        ConjugateSample::Diffuse(u)
    }

    /// Draws a conjugate pair: `x()` has law μ, `y()` has law μ′.
    pub fn sample_conjugate_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> ConjugateSample {
        let u: f64 = rng.gen();
        self.classify(u)
    }
}

impl fmt::Display for QuasiUniformMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.gaps.is_empty() {
            return f.write_str("lebesgue");
        }
        let parts: Vec<String> = self.gaps.iter().map(|g| format!("({g})")).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Loads a measure from a built-in name or a JSON file path.
pub fn resolve(name_or_path: &str) -> Result<QuasiUniformMeasure, MeasureError> {
    match QuasiUniformMeasure::named(name_or_path) {
        Err(MeasureError::UnknownMeasure(_)) if std::path::Path::new(name_or_path).is_file() => {
            let text = std::fs::read_to_string(name_or_path)
                .map_err(|e| MeasureError::Parse(format!("{name_or_path}: {e}")))?;
            validate(MeasureSpec::from_json(&text)?)
        }
        other => other,
    }
}

/// A candidate measure: density 1 off the declared holes, plus free atoms.
///
/// Unlike [`QuasiUniformMeasure`] nothing ties the atoms to the holes, so this
/// is the type to check with [`is_quasi_uniform`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateMeasure {
    #[serde(default)]
    pub holes: Vec<Hole>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    #[serde(with = "rational::serde_rational")]
    pub lo: Rational,
    #[serde(with = "rational::serde_rational")]
    pub hi: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(with = "rational::serde_rational")]
    pub pos: Rational,
    #[serde(with = "rational::serde_rational")]
    pub mass: Rational,
}

impl CandidateMeasure {
    pub fn from_measure(measure: &QuasiUniformMeasure) -> Self {
        CandidateMeasure {
            holes: measure
                .gaps()
                .iter()
                .map(|g| Hole {
                    lo: g.lo.clone(),
                    hi: g.hi.clone(),
                })
                .collect(),
            atoms: measure
                .gaps()
                .iter()
                .map(|g| Atom {
                    pos: g.atom().clone(),
                    mass: g.mass(),
                })
                .collect(),
        }
    }

    /// Density on `[0,1/2] ∪ [3/4,1]` with the missing quarter placed as an
    /// atom at 5/8, the midpoint of the hole.
    pub fn interior_atom() -> Self {
        CandidateMeasure {
            holes: vec![Hole {
                lo: rational::rational(1, 2),
                hi: rational::rational(3, 4),
            }],
            atoms: vec![Atom {
                pos: rational::rational(5, 8),
                mass: rational::rational(1, 4),
            }],
        }
    }

    fn in_hole(&self, a: &Rational, b: &Rational) -> bool {
        self.holes.iter().any(|h| h.lo <= *a && *b <= h.hi)
    }

    fn diffuse_below(&self, x: &Rational) -> Rational {
        let removed: Rational = self
            .holes
            .iter()
            .filter(|h| h.lo < *x)
            .map(|h| x.min(&h.hi) - &h.lo)
            .sum();
        x - removed
    }

    pub fn cdf(&self, x: &Rational) -> Rational {
        let atoms: Rational = self.atoms.iter().filter(|a| a.pos <= *x).map(|a| a.mass.clone()).sum();
        self.diffuse_below(x) + atoms
    }

    pub fn cdf_left(&self, x: &Rational) -> Rational {
        let atoms: Rational = self.atoms.iter().filter(|a| a.pos < *x).map(|a| a.mass.clone()).sum();
        self.diffuse_below(x) + atoms
    }

    pub fn total_mass(&self) -> Rational {
        self.cdf(&Rational::one())
    }

    /// The pointwise sandwich `μ[0,x) ≤ x ≤ μ[0,x]` at every atom.
    pub fn atoms_sandwiched(&self) -> bool {
        self.atoms
            .iter()
            .all(|a| self.cdf_left(&a.pos) <= a.pos && a.pos <= self.cdf(&a.pos))
    }

    /// `μ[0,x] = x` on every stretch of the diffuse support.
    pub fn diffuse_identity(&self) -> bool {
        let mut critical: Vec<Rational> = vec![Rational::zero(), Rational::one()];
        critical.extend(self.holes.iter().flat_map(|h| [h.lo.clone(), h.hi.clone()]));
        critical.extend(self.atoms.iter().map(|a| a.pos.clone()));
        critical.sort();
        critical.dedup();
        critical
            .windows(2)
            .filter(|w| !self.in_hole(&w[0], &w[1]))
            .all(|w| self.cdf(&w[0]) == w[0])
    }

    /// No atom sits strictly inside a declared hole.
    pub fn atoms_at_hole_ends(&self) -> bool {
        let strictly_inside = self
            .atoms
            .iter()
            .any(|a| self.holes.iter().any(|h| h.lo < a.pos && a.pos < h.hi));
        !strictly_inside
    }
}

/// Checks a candidate against the quasi-uniform description relative to its
/// declared diffuse support: a probability measure, density identity on `F`,
/// the sandwich at every atom, and no atom inside a hole.
pub fn is_quasi_uniform(candidate: &CandidateMeasure) -> bool {
    let in_range = candidate
        .holes
        .iter()
        .all(|h| !h.lo.is_negative() && h.lo < h.hi && h.hi <= Rational::one())
        && candidate
            .atoms
            .iter()
            .all(|a| !a.pos.is_negative() && a.pos <= Rational::one() && a.mass.is_positive());
    in_range
        && candidate.total_mass().is_one()
        && candidate.diffuse_identity()
        && candidate.atoms_sandwiched()
        && candidate.atoms_at_hole_ends()
}
