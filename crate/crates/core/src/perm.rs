//! Permutations of `{1..n}` in one-line notation.
//!
//! A permutation is stored zero-based. As a pack state `rho`, entry `k` is the
//! position of the card labelled `k`; as a shuffle `sigma`, entry `m` is where
//! the card in position `m` moves to. Shuffles compose on the left: the state
//! `rho` becomes `sigma ∘ rho`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid permutation `{0}`")]
pub struct ParsePermError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(Vec<usize>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n).collect())
    }

    /// The full reversal `k ↦ n - 1 - k`.
    pub fn reversal(n: usize) -> Self {
        Perm((0..n).rev().collect())
    }

    /// Builds from zero-based images; `None` unless a bijection of `0..n`.
    pub fn from_images(images: Vec<usize>) -> Option<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        Some(Perm(images))
    }

    pub(crate) fn from_images_unchecked(images: Vec<usize>) -> Self {
        debug_assert!(Perm::from_images(images.clone()).is_some());
        Perm(images)
    }

    /// The permutation sending item `i` to its rank under `key` order.
    pub fn ranking_by<F>(n: usize, mut cmp: F) -> Self
    where
        F: FnMut(usize, usize) -> std::cmp::Ordering,
    {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cmp(a, b));
        let mut ranks = vec![0; n];
        for (rank, item) in order.into_iter().enumerate() {
            ranks[item] = rank;
        }
        Perm(ranks)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Perm(inv)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Self {
        assert_eq!(self.len(), other.len(), "composing permutations of different sizes");
        Perm(other.0.iter().map(|&j| self.0[j]).collect())
    }

    /// Relative order of the first `m` entries, as a permutation of `0..m`.
    pub fn restrict(&self, m: usize) -> Self {
        assert!(m <= self.len());
        let head = &self.0[..m];
        Perm::ranking_by(m, |a, b| head[a].cmp(&head[b]))
    }

    /// Relative order of the entries at the given indices (in that order).
    pub fn restrict_to(&self, indices: &[usize]) -> Self {
        let vals: Vec<usize> = indices.iter().map(|&i| self.0[i]).collect();
        Perm::ranking_by(vals.len(), |a, b| vals[a].cmp(&vals[b]))
    }

    /// All permutations of `0..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..n).collect();
        loop {
            out.push(Perm(current.clone()));
            // next lexicographic permutation
            let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
                break;
            };
            let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
            current.swap(i - 1, j);
            current[i..].reverse();
        }
        out
    }

    /// One-line notation with 1-based images: digits for `n ≤ 9`,
    /// comma-separated beyond.
    pub fn one_line(&self) -> String {
        if self.len() <= 9 {
            self.0.iter().map(|&i| char::from(b'1' + i as u8)).collect()
        } else {
            self.0
                .iter()
                .map(|&i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.one_line())
    }
}

impl FromStr for Perm {
    type Err = ParsePermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParsePermError(s.to_owned());
        let s = s.trim();
        let images: Vec<usize> = if s.contains(',') {
            s.split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| err()))
                .collect::<Result<_, _>>()?
        } else {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(err))
                .collect::<Result<_, _>>()?
        };
        let zero_based = images
            .into_iter()
            .map(|i| i.checked_sub(1).ok_or_else(err))
            .collect::<Result<Vec<_>, _>>()?;
        Perm::from_images(zero_based).ok_or_else(err)
    }
}
