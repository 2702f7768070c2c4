//! Exact step laws by enumerating how cards fall into coupling blocks.
//!
//! Every supported coupling is a finite mixture of blocks: a source interval,
//! a target interval, and either an affine bijection between them (increasing
//! or decreasing) or the independent product. After refining all blocks to a
//! common pair of partitions, the `u` values of the cards sharing a source
//! cell are in uniformly random relative order, and the `v` values sharing a
//! target cell are uniformly interleaved subject to each coupled block keeping
//! its cards in `u` order (or reversed). That description is exact as long as
//! every coupled block is alone in its source cell or alone in its target
//! cell; otherwise relative order would depend on actual values and the
//! enumeration refuses.

use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};

use super::{CouplingSampler, KernelError};
use crate::oracle::{CellDecomposition, CellKind, PermutationDistribution};
use crate::measure::{AtomSide, QuasiUniformMeasure};
use crate::perm::Perm;
use crate::rational::Rational;

const MAX_POINTS: usize = 512;
const MAX_ASSIGNMENTS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Link {
    Increasing,
    Decreasing,
    Independent,
}

#[derive(Debug, Clone)]
struct Block {
    mass: Rational,
    src: (Rational, Rational),
    dst: (Rational, Rational),
    link: Link,
}

impl Block {
    fn forward(&self, p: &Rational) -> Rational {
        let t = (p - &self.src.0) / (&self.src.1 - &self.src.0);
        let span = &self.dst.1 - &self.dst.0;
        match self.link {
            Link::Increasing => &self.dst.0 + t * span,
            Link::Decreasing => &self.dst.1 - t * span,
            Link::Independent => unreachable!("independent blocks have no map"),
        }
    }

    fn backward(&self, q: &Rational) -> Rational {
        let t = (q - &self.dst.0) / (&self.dst.1 - &self.dst.0);
        let span = &self.src.1 - &self.src.0;
        match self.link {
            Link::Increasing => &self.src.0 + t * span,
            Link::Decreasing => &self.src.1 - t * span,
            Link::Independent => unreachable!("independent blocks have no map"),
        }
    }

    fn swapped(self) -> Block {
        Block {
            mass: self.mass,
            src: self.dst,
            dst: self.src,
            link: self.link,
        }
    }
}

fn unit() -> (Rational, Rational) {
    (Rational::zero(), Rational::one())
}

fn type_one_blocks(measure: &QuasiUniformMeasure) -> Vec<Block> {
    CellDecomposition::new(measure)
        .cells()
        .iter()
        .map(|cell| match &cell.kind {
            CellKind::Diffuse { lo, hi } => Block {
                mass: cell.mass.clone(),
                src: unit(),
                dst: (lo.clone(), hi.clone()),
                link: Link::Independent,
            },
            CellKind::Atom { gap, side } => {
                let g = &measure.gaps()[*gap];
                Block {
                    mass: cell.mass.clone(),
                    src: unit(),
                    dst: (g.lo.clone(), g.hi.clone()),
                    link: match side {
                        AtomSide::Right => Link::Increasing,
                        AtomSide::Left => Link::Decreasing,
                    },
                }
            }
        })
        .collect()
}

fn blocks_of(cs: &CouplingSampler) -> Result<Vec<Block>, KernelError> {
    Ok(match cs {
        CouplingSampler::NuMu(m) => type_one_blocks(m),
        CouplingSampler::NuMuStar(m) => type_one_blocks(m).into_iter().map(Block::swapped).collect(),
        CouplingSampler::Deterministic(map) => map
            .pieces()
            .iter()
            .map(|p| Block {
                mass: &p.hi - &p.lo,
                src: (p.lo.clone(), p.hi.clone()),
                dst: p.image(),
                link: if p.slope.is_positive() { Link::Increasing } else { Link::Decreasing },
            })
            .collect(),
        CouplingSampler::GridCopula(g) => {
            let entries = g
                .exact_entries()
                .ok_or_else(|| KernelError::ExactUnavailable("grid entries are floating point".into()))?;
            let m = g.size() as i64;
            let cell = |i: usize| {
                (
                    Rational::new((i as i64).into(), m.into()),
                    Rational::new((i as i64 + 1).into(), m.into()),
                )
            };
            let mut blocks = Vec::new();
            for (i, row) in entries.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    if p.is_positive() {
                        blocks.push(Block {
                            mass: p.clone(),
                            src: cell(i),
                            dst: cell(j),
                            link: Link::Independent,
                        });
                    }
                }
            }
            blocks
        }
        CouplingSampler::Mixture(mix) => {
            let mut blocks = Vec::new();
            for (w, c) in mix.components() {
                for b in blocks_of(c)? {
                    blocks.push(Block { mass: &b.mass * w, ..b });
                }
            }
            blocks
        }
    })
}

fn strictly_inside(p: &Rational, iv: &(Rational, Rational)) -> bool {
    iv.0 < *p && *p < iv.1
}

/// Refines blocks until each one spans a single source cell and a single
/// target cell. Returns the blocks as `(mass, source cell, target cell, link)`
/// together with the number of source and target cells.
fn refine(blocks: Vec<Block>) -> Result<(Vec<(Rational, usize, usize, Link)>, usize, usize), KernelError> {
    let mut src_pts: BTreeSet<Rational> = blocks.iter().flat_map(|b| [b.src.0.clone(), b.src.1.clone()]).collect();
    let mut dst_pts: BTreeSet<Rational> = blocks.iter().flat_map(|b| [b.dst.0.clone(), b.dst.1.clone()]).collect();
    loop {
        let mut added = false;
        for b in blocks.iter().filter(|b| b.link != Link::Independent) {
            let images: Vec<Rational> = src_pts.iter().filter(|p| strictly_inside(p, &b.src)).map(|p| b.forward(p)).collect();
            let preimages: Vec<Rational> = dst_pts.iter().filter(|q| strictly_inside(q, &b.dst)).map(|q| b.backward(q)).collect();
            for q in images {
                added |= dst_pts.insert(q);
            }
            for p in preimages {
                added |= src_pts.insert(p);
            }
        }
        if src_pts.len() + dst_pts.len() > MAX_POINTS {
            return Err(KernelError::ExactUnavailable("block refinement does not settle".into()));
        }
        if !added {
            break;
        }
    }
    let src: Vec<Rational> = src_pts.into_iter().collect();
    let dst: Vec<Rational> = dst_pts.into_iter().collect();
    let cells_in = |pts: &[Rational], iv: &(Rational, Rational)| -> Vec<usize> {
        (0..pts.len() - 1).filter(|&i| iv.0 <= pts[i] && pts[i + 1] <= iv.1).collect()
    };
    let cell_len = |pts: &[Rational], i: usize| &pts[i + 1] - &pts[i];
    let mut merged: HashMap<(usize, usize, Link), Rational> = HashMap::new();
    for b in &blocks {
        let src_len = &b.src.1 - &b.src.0;
        let dst_len = &b.dst.1 - &b.dst.0;
        match b.link {
            Link::Independent => {
                for s in cells_in(&src, &b.src) {
                    for d in cells_in(&dst, &b.dst) {
                        let share = &b.mass * cell_len(&src, s) / &src_len * cell_len(&dst, d) / &dst_len;
                        *merged.entry((s, d, Link::Independent)).or_insert_with(Rational::zero) += share;
                    }
                }
            }
            _ => {
                for s in cells_in(&src, &b.src) {
                    let (a, z) = (b.forward(&src[s]), b.forward(&src[s + 1]));
                    let lo = if a < z { a } else { z };
                    let d = dst.binary_search(&lo).expect("refined image starts on a cut");
                    let share = &b.mass * cell_len(&src, s) / &src_len;
                    *merged.entry((s, d, b.link)).or_insert_with(Rational::zero) += share;
                }
            }
        }
    }
    let mut out: Vec<(Rational, usize, usize, Link)> = merged
        .into_iter()
        .filter(|(_, m)| m.is_positive())
        .map(|((s, d, l), m)| (m, s, d, l))
        .collect();
    out.sort_by(|a, b| (a.1, a.2, a.3 as u8).cmp(&(b.1, b.2, b.3 as u8)));
    Ok((out, src.len() - 1, dst.len() - 1))
}

/// Exact law of one step on `n` cards, for couplings with rational
/// block structure.
pub fn exact_step_law(n: usize, cs: &CouplingSampler, max_n: usize) -> Result<PermutationDistribution, KernelError> {
    if n > max_n {
        return Err(KernelError::CapExceeded { what: "n", value: n, cap: max_n });
    }
    let (blocks, src_cells, dst_cells) = refine(blocks_of(cs)?)?;
    let mut src_users = vec![0usize; src_cells];
    let mut dst_users = vec![0usize; dst_cells];
    for (_, s, d, _) in &blocks {
        src_users[*s] += 1;
        dst_users[*d] += 1;
    }
    if blocks
        .iter()
        .any(|(_, s, d, l)| *l != Link::Independent && src_users[*s] > 1 && dst_users[*d] > 1)
    {
        return Err(KernelError::ExactUnavailable(
            "a coupled block shares both its source and its target cell".into(),
        ));
    }
    let assignments = (blocks.len() as f64).powi(n as i32);
    if assignments > MAX_ASSIGNMENTS as f64 {
        return Err(KernelError::CapExceeded {
            what: "block assignments",
            value: assignments.min(usize::MAX as f64) as usize,
            cap: MAX_ASSIGNMENTS,
        });
    }
    let tables: Vec<Vec<Perm>> = (0..=n).map(Perm::all).collect();
    let ctx = Context { blocks: &blocks, src_cells, dst_cells, tables: &tables };
    let mut acc: HashMap<Perm, Rational> = HashMap::new();
    let mut assignment = vec![0usize; n];
    ctx.assign(&mut assignment, 0, Rational::one(), &mut acc);
    Ok(PermutationDistribution::from_accumulated(n, acc))
}

struct Context<'a> {
    blocks: &'a [(Rational, usize, usize, Link)],
    src_cells: usize,
    dst_cells: usize,
    tables: &'a [Vec<Perm>],
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Odometer over a product of ranges; returns false after the last tuple.
fn advance(choice: &mut [usize], sizes: &[usize]) -> bool {
    for (c, &s) in choice.iter_mut().zip(sizes) {
        *c += 1;
        if *c < s {
            return true;
        }
        *c = 0;
    }
    false
}

impl Context<'_> {
    fn assign(&self, assignment: &mut [usize], card: usize, weight: Rational, acc: &mut HashMap<Perm, Rational>) {
        if card == assignment.len() {
            self.accumulate(assignment, &weight, acc);
            return;
        }
        for (b, block) in self.blocks.iter().enumerate() {
            assignment[card] = b;
            self.assign(assignment, card + 1, &weight * &block.0, acc);
        }
    }

    fn accumulate(&self, assignment: &[usize], weight: &Rational, acc: &mut HashMap<Perm, Rational>) {
        let n = assignment.len();
        let group = |cells: usize, pick: fn(&(Rational, usize, usize, Link)) -> usize| -> Vec<Vec<usize>> {
            let mut groups = vec![Vec::new(); cells];
            for (card, &b) in assignment.iter().enumerate() {
                groups[pick(&self.blocks[b])].push(card);
            }
            groups.into_iter().filter(|g| !g.is_empty()).collect()
        };
        let src_groups = group(self.src_cells, |b| b.1);
        let dst_groups = group(self.dst_cells, |b| b.2);
        let src_sizes: Vec<usize> = src_groups.iter().map(|g| self.tables[g.len()].len()).collect();
        let arrangements: u64 = src_groups.iter().map(|g| factorial(g.len())).product();
        let base = weight / Rational::from_integer(arrangements.into());

        let mut src_choice = vec![0usize; src_groups.len()];
        let mut u_rank = vec![0usize; n];
        loop {
            let mut next = 0;
            for (g, &c) in src_groups.iter().zip(&src_choice) {
                for &i in self.tables[g.len()][c].images() {
                    u_rank[g[i]] = next;
                    next += 1;
                }
            }
            // admissible target arrangements given the u order
            let options: Vec<Vec<Vec<usize>>> = dst_groups
                .iter()
                .map(|g| {
                    self.tables[g.len()]
                        .iter()
                        .map(|p| p.images().iter().map(|&i| g[i]).collect::<Vec<usize>>())
                        .filter(|arr| self.respects_links(arr, assignment, &u_rank))
                        .collect()
                })
                .collect();
            let count: u64 = options.iter().map(|o| o.len() as u64).product();
            let share = &base / Rational::from_integer(count.into());
            let sizes: Vec<usize> = options.iter().map(Vec::len).collect();
            let mut choice = vec![0usize; options.len()];
            loop {
                let mut sigma = vec![0usize; n];
                let mut next = 0;
                for (o, &c) in options.iter().zip(&choice) {
                    for &card in &o[c] {
                        sigma[u_rank[card]] = next;
                        next += 1;
                    }
                }
                *acc.entry(Perm::from_images_unchecked(sigma)).or_insert_with(Rational::zero) += &share;
                if !advance(&mut choice, &sizes) {
                    break;
                }
            }
            if !advance(&mut src_choice, &src_sizes) {
                break;
            }
        }
    }

    /// Cards of one coupled block keep (or reverse) their `u` order.
    fn respects_links(&self, arrangement: &[usize], assignment: &[usize], u_rank: &[usize]) -> bool {
        for (i, &a) in arrangement.iter().enumerate() {
            for &b in &arrangement[i + 1..] {
                if assignment[a] != assignment[b] {
                    continue;
                }
                let ok = match self.blocks[assignment[a]].3 {
                    Link::Increasing => u_rank[a] < u_rank[b],
                    Link::Decreasing => u_rank[a] > u_rank[b],
                    Link::Independent => true,
                };
                if !ok {
                    return false;
                }
            }
        }
        true
    }
}
