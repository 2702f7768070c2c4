//! Piecewise-affine measure-preserving maps of `[0,1]`.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::measure::{AtomSide, QuasiUniformMeasure};
use crate::rational::{self, format_rational, to_f64, Rational};

/// `x ↦ slope·x + intercept` on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapPiece {
    #[serde(with = "rational::serde_rational")]
    pub lo: Rational,
    #[serde(with = "rational::serde_rational")]
    pub hi: Rational,
    #[serde(with = "rational::serde_rational")]
    pub slope: Rational,
    #[serde(with = "rational::serde_rational")]
    pub intercept: Rational,
}

impl MapPiece {
    pub fn apply(&self, x: &Rational) -> Rational {
        &self.slope * x + &self.intercept
    }

    /// Image interval, ordered low to high.
    pub fn image(&self) -> (Rational, Rational) {
        let (a, b) = (self.apply(&self.lo), self.apply(&self.hi));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

impl fmt::Display for MapPiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slope = format_rational(&self.slope);
        let term = if self.slope.is_one() {
            "x".to_owned()
        } else if (-&self.slope).is_one() {
            "-x".to_owned()
        } else {
            format!("{slope}x")
        };
        let constant = if self.intercept.is_zero() {
            String::new()
        } else if self.intercept.is_negative() {
            format!(" - {}", format_rational(&-&self.intercept))
        } else {
            format!(" + {}", format_rational(&self.intercept))
        };
        write!(
            f,
            "({}, {}): x -> {term}{constant}",
            format_rational(&self.lo),
            format_rational(&self.hi)
        )
    }
}

/// A validated piecewise-affine map preserving Lebesgue measure. Values at
/// breakpoints come from the piece on the right; `S(1)` is the left limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShuffleMap {
    pieces: Vec<MapPiece>,
    #[serde(skip)]
    fast: Vec<(f64, f64, f64)>,
}

#[derive(Deserialize)]
struct RawMap {
    pieces: Vec<MapPiece>,
}

impl<'de> Deserialize<'de> for ShuffleMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawMap::deserialize(d)?;
        ShuffleMap::new(raw.pieces).map_err(serde::de::Error::custom)
    }
}

impl ShuffleMap {
    pub fn new(mut pieces: Vec<MapPiece>) -> Result<Self, KernelError> {
        pieces.sort_by(|a, b| a.lo.cmp(&b.lo));
        let mut cursor = Rational::zero();
        for p in &pieces {
            if p.lo != cursor || p.hi <= p.lo {
                return Err(KernelError::NotPartition(format!(
                    "piece ({}, {}) does not continue from {}",
                    format_rational(&p.lo),
                    format_rational(&p.hi),
                    format_rational(&cursor)
                )));
            }
            if p.slope.is_zero() {
                return Err(KernelError::NotMeasurePreserving("a piece is constant".into()));
            }
            let (a, b) = p.image();
            if a.is_negative() || b > Rational::one() {
                return Err(KernelError::NotMeasurePreserving(format!("piece {p} leaves [0,1]")));
            }
            cursor = p.hi.clone();
        }
        if !cursor.is_one() {
            return Err(KernelError::NotPartition("pieces do not reach 1".into()));
        }
        // on every cell of the induced image partition the preimage density
        // sum_{pieces covering y} 1/|slope| must equal 1
        let mut cuts: Vec<Rational> = vec![Rational::zero(), Rational::one()];
        for p in &pieces {
            let (a, b) = p.image();
            cuts.push(a);
            cuts.push(b);
        }
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            let density: Rational = pieces
                .iter()
                .filter(|p| {
                    let (a, b) = p.image();
                    a <= w[0] && w[1] <= b
                })
                .map(|p| p.slope.abs().recip())
                .sum();
            if !density.is_one() {
                return Err(KernelError::NotMeasurePreserving(format!(
                    "preimage density {} on ({}, {})",
                    format_rational(&density),
                    format_rational(&w[0]),
                    format_rational(&w[1])
                )));
            }
        }
        let fast = pieces
            .iter()
            .map(|p| (to_f64(&p.lo), to_f64(&p.slope), to_f64(&p.intercept)))
            .collect();
        Ok(ShuffleMap { pieces, fast })
    }

    pub fn pieces(&self) -> &[MapPiece] {
        &self.pieces
    }

    fn piece_index(&self, x: &Rational) -> usize {
        self.pieces.partition_point(|p| p.lo <= *x).saturating_sub(1)
    }

    /// Exact value at `x ∈ [0,1]`.
    pub fn eval(&self, x: &Rational) -> Rational {
        self.pieces[self.piece_index(x)].apply(x)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let idx = self.fast.partition_point(|&(lo, _, _)| lo <= x).saturating_sub(1);
        let (_, slope, intercept) = self.fast[idx];
        slope.mul_add(x, intercept).clamp(0.0, 1.0)
    }

    pub fn identity() -> Self {
        ShuffleMap::new(vec![MapPiece {
            lo: Rational::zero(),
            hi: Rational::one(),
            slope: Rational::one(),
            intercept: Rational::zero(),
        }])
        .expect("identity map")
    }
}

impl fmt::Display for ShuffleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// The map that stretches each gap of a purely atomic measure onto `[0,1]`:
/// increasing across a gap with its atom on the right, decreasing across one
/// with its atom on the left.
pub fn shuffle_map_from_measure(measure: &QuasiUniformMeasure) -> Result<ShuffleMap, KernelError> {
    if !measure.is_purely_atomic() {
        return Err(KernelError::NotPurelyAtomic(format_rational(&measure.diffuse_mass())));
    }
    let pieces = measure
        .gaps()
        .iter()
        .map(|g| {
            let width = g.mass();
            let (slope, intercept) = match g.atom_side {
                AtomSide::Right => (width.recip(), -&g.lo / &width),
                AtomSide::Left => (-width.recip(), &g.hi / &width),
            };
            MapPiece {
                lo: g.lo.clone(),
                hi: g.hi.clone(),
                slope,
                intercept,
            }
        })
        .collect();
    ShuffleMap::new(pieces)
}
