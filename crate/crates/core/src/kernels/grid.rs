//! Couplings given by an `m × m` doubly stochastic grid.

use num_traits::{Signed, ToPrimitive};
use rand::Rng;

use super::KernelError;
use crate::rational::{format_rational, Rational};

/// Row and column sums of a float grid may miss `1/m` by less than this.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

/// Cell `(i, j)` carries probability `entries[i][j]`; inside a cell the pair
/// is uniform. Rows index `u`, columns index `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCopula {
    m: usize,
    exact: Option<Vec<Vec<Rational>>>,
    entries: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
}

impl GridCopula {
    /// Exact rational grid: every row and column must sum to exactly `1/m`.
    pub fn exact(entries: Vec<Vec<Rational>>) -> Result<Self, KernelError> {
        let m = check_square(entries.len(), entries.iter().map(Vec::len))?;
        if entries.iter().flatten().any(Signed::is_negative) {
            return Err(KernelError::InvalidGrid("negative entry".into()));
        }
        let target = Rational::new(1.into(), m.into());
        for i in 0..m {
            let row: Rational = entries[i].iter().sum();
            let col: Rational = entries.iter().map(|r| r[i].clone()).sum();
            for (what, sum) in [("row", row), ("column", col)] {
                if sum != target {
                    return Err(KernelError::InvalidGrid(format!(
                        "{what} {i} sums to {} instead of {}",
                        format_rational(&sum),
                        format_rational(&target)
                    )));
                }
            }
        }
        let floats = entries
            .iter()
            .map(|r| r.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect())
            .collect();
        Ok(GridCopula::build(m, Some(entries), floats))
    }

    /// Float grid: sums may deviate from `1/m` by less than [`FLOAT_TOLERANCE`].
    pub fn float(entries: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        let m = check_square(entries.len(), entries.iter().map(Vec::len))?;
        if entries.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(KernelError::InvalidGrid("entries must be finite and nonnegative".into()));
        }
        let target = 1.0 / m as f64;
        for i in 0..m {
            let row: f64 = entries[i].iter().sum();
            let col: f64 = entries.iter().map(|r| r[i]).sum();
            for (what, sum) in [("row", row), ("column", col)] {
                if (sum - target).abs() >= FLOAT_TOLERANCE {
                    return Err(KernelError::InvalidGrid(format!(
                        "{what} {i} sums to {sum} instead of {target}"
                    )));
                }
            }
        }
        Ok(GridCopula::build(m, None, entries))
    }

    fn build(m: usize, exact: Option<Vec<Vec<Rational>>>, entries: Vec<Vec<f64>>) -> Self {
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .flatten()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        GridCopula {
            m,
            exact,
            entries,
            cumulative,
        }
    }

    /// The independent coupling split into `m × m` equal cells.
    pub fn independent(m: usize) -> Self {
        let p = Rational::new(1.into(), (m * m).into());
        GridCopula::exact(vec![vec![p; m]; m]).expect("uniform grid")
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn exact_entries(&self) -> Option<&[Vec<Rational>]> {
        self.exact.as_deref()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Picks a cell, then a uniform point inside it.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64, usize, usize) {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let t: f64 = rng.gen::<f64>() * total;
        let mut idx = self.cumulative.partition_point(|&c| c <= t).min(self.m * self.m - 1);
        // never land on an empty cell through rounding
        while self.entries[idx / self.m][idx % self.m] <= 0.0 && idx > 0 {
            idx -= 1;
        }
        let (i, j) = (idx / self.m, idx % self.m);
        let m = self.m as f64;
        let u = (i as f64 + rng.gen::<f64>()) / m;
        let v = (j as f64 + rng.gen::<f64>()) / m;
        (u.min(1.0), v.min(1.0), i, j)
    }
}

fn check_square(rows: usize, lens: impl Iterator<Item = usize>) -> Result<usize, KernelError> {
    if rows == 0 {
        return Err(KernelError::InvalidGrid("empty grid".into()));
    }
    for len in lens {
        if len != rows {
            return Err(KernelError::InvalidGrid(format!("row of length {len} in a {rows}-row grid")));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rational as r;
    use rand::SeedableRng;

    #[test]
    fn exact_validation() {
        let anti = vec![vec![r(0, 1), r(1, 2)], vec![r(1, 2), r(0, 1)]];
        assert!(GridCopula::exact(anti).is_ok());
        let lopsided = vec![vec![r(1, 2), r(1, 2)], vec![r(0, 1), r(0, 1)]];
        assert!(matches!(GridCopula::exact(lopsided), Err(KernelError::InvalidGrid(_))));
        let negative = vec![vec![r(3, 4), r(-1, 4)], vec![r(-1, 4), r(3, 4)]];
        assert!(GridCopula::exact(negative).is_err());
        assert!(GridCopula::exact(vec![vec![r(1, 1)], vec![]]).is_err());
    }

    #[test]
    fn float_tolerance() {
        let off = 1e-12;
        let grid = vec![vec![0.25 + off, 0.25 - off], vec![0.25 - off, 0.25 + off]];
        // the shifts cancel in every row and column
        assert!(GridCopula::float(grid).is_ok());
        let bad = vec![vec![0.25 + 2.0 * off, 0.25], vec![0.25, 0.25 - 2.0 * off]];
        assert!(GridCopula::float(bad).is_err());
        let slight = vec![vec![0.25 + 1e-14, 0.25], vec![0.25, 0.25 - 1e-14]];
        assert!(GridCopula::float(slight).is_ok());
    }

    #[test]
    fn draws_stay_in_their_cell() {
        let grid = GridCopula::exact(vec![vec![r(0, 1), r(1, 2)], vec![r(1, 2), r(0, 1)]]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (u, v, i, j) = grid.draw(&mut rng);
            assert_ne!(i, j);
            assert_eq!((u * 2.0) as usize, i);
            assert_eq!((v * 2.0) as usize, j);
        }
    }
}
