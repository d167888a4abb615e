//! Exact n-step distributions.
//!
//! Masses are numerators over the implicit denominator `Dⁿ`. All numerators
//! of one distribution share a limb width, so storage is a flat `Vec<u64>`:
//! a dense row-major grid over the support's bounding box when the support
//! fills more than 1/8 of it, otherwise a sorted point list.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Pow;
use rayon::prelude::*;

use super::EngineError;
use crate::lattice::{LatticePoint, RationalMoment, StepLaw};
use crate::limbs::{self, Accumulator};

/// Switch to a dense grid once more than `1 / DENSE_OCCUPANCY` of the
/// bounding box is occupied.
const DENSE_OCCUPANCY: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Storage {
    Dense {
        corner: LatticePoint,
        width: usize,
        height: usize,
        data: Vec<u64>,
    },
    /// Points sorted row-major, i.e. by `(y, x)`.
    Sparse {
        points: Vec<LatticePoint>,
        data: Vec<u64>,
    },
}

/// Exact law of `Sₙ` for a walk started at the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDist {
    n: u64,
    law_denominator: u64,
    limbs: usize,
    storage: Storage,
}

fn row_major(p: &LatticePoint) -> (i64, i64) {
    (p.y, p.x)
}

impl ExactDist {
    /// `S₀ = 0`: unit mass at the origin.
    pub fn origin(law_denominator: u64) -> Self {
        Self {
            n: 0,
            law_denominator,
            limbs: 1,
            storage: Storage::Sparse {
                points: vec![LatticePoint::ORIGIN],
                data: vec![1],
            },
        }
        .rebalanced()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn law_denominator(&self) -> u64 {
        self.law_denominator
    }

    /// `Dⁿ`.
    pub fn total_denominator(&self) -> BigUint {
        BigUint::from(self.law_denominator).pow(self.n)
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense { .. })
    }

    /// Nonzero cells in row-major order.
    pub fn cells(&self) -> Box<dyn Iterator<Item = (LatticePoint, &[u64])> + '_> {
        let l = self.limbs;
        match &self.storage {
            Storage::Dense {
                corner,
                width,
                data,
                ..
            } => {
                let (corner, width) = (*corner, *width);
                Box::new(
                    data.chunks_exact(l)
                        .enumerate()
                        .filter(|(_, c)| !limbs::is_zero(c))
                        .map(move |(i, c)| {
                            let p = LatticePoint::new(
                                corner.x + (i % width) as i64,
                                corner.y + (i / width) as i64,
                            );
                            (p, c)
                        }),
                )
            }
            Storage::Sparse { points, data } => Box::new(
                points
                    .iter()
                    .copied()
                    .zip(data.chunks_exact(l))
                    .filter(|(_, c)| !limbs::is_zero(c)),
            ),
        }
    }

    fn cell(&self, p: LatticePoint) -> Option<&[u64]> {
        let l = self.limbs;
        match &self.storage {
            Storage::Dense {
                corner,
                width,
                height,
                data,
            } => {
                let dx = p.x - corner.x;
                let dy = p.y - corner.y;
                if dx < 0 || dy < 0 || dx as usize >= *width || dy as usize >= *height {
                    return None;
                }
                let i = dy as usize * width + dx as usize;
                Some(&data[i * l..(i + 1) * l])
            }
            Storage::Sparse { points, data } => points
                .binary_search_by_key(&row_major(&p), row_major)
                .ok()
                .map(|i| &data[i * l..(i + 1) * l]),
        }
    }

    /// Numerator of `P[Sₙ = p]`.
    pub fn mass(&self, p: LatticePoint) -> BigUint {
        self.cell(p).map(limbs::to_biguint).unwrap_or_default()
    }

    /// `P[Sₙ = p]` in lowest terms.
    pub fn probability(&self, p: LatticePoint) -> BigRational {
        ratio(self.mass(p), self.total_denominator())
    }

    pub fn support_len(&self) -> usize {
        self.cells().count()
    }

    /// Bounding box of the support.
    pub fn bounding_box(&self) -> (LatticePoint, LatticePoint) {
        bbox(self.cells().map(|(p, _)| p)).expect("distributions are never empty")
    }

    /// Support with numerators, keyed by point.
    pub fn to_map(&self) -> BTreeMap<LatticePoint, BigUint> {
        self.cells().map(|(p, c)| (p, limbs::to_biguint(c))).collect()
    }

    /// Sum of all numerators; equals `Dⁿ` for every valid distribution.
    pub fn total_mass(&self) -> BigUint {
        let mut acc = Accumulator::new();
        for (_, c) in self.cells() {
            acc.add(c);
        }
        acc.finish()
    }

    /// Distribution of `Sₙ₊₁`.
    pub fn step(&self, law: &StepLaw) -> Result<ExactDist, EngineError> {
        if law.denominator() != self.law_denominator {
            return Err(EngineError::DenominatorMismatch {
                dist: self.law_denominator,
                law: law.denominator(),
            });
        }
        let n = self.n + 1;
        let out_limbs = limbs::limbs_for_power(self.law_denominator, n);
        let storage = match &self.storage {
            Storage::Dense {
                corner,
                width,
                height,
                data,
            } => dense_step(*corner, *width, *height, data, self.limbs, out_limbs, law),
            Storage::Sparse { points, data } => {
                sparse_step(points, data, self.limbs, out_limbs, law)
            }
        };
        Ok(ExactDist {
            n,
            law_denominator: self.law_denominator,
            limbs: out_limbs,
            storage,
        }
        .rebalanced())
    }

    /// Law of `Sₙ + S'ₘ` for an independent copy `S'` with `m = other.n()`.
    pub fn convolve(&self, other: &ExactDist) -> Result<ExactDist, EngineError> {
        if other.law_denominator != self.law_denominator {
            return Err(EngineError::DenominatorMismatch {
                dist: self.law_denominator,
                law: other.law_denominator,
            });
        }
        let n = self.n + other.n;
        let mut acc: BTreeMap<(i64, i64), Accumulator> = BTreeMap::new();
        for (p, a) in self.cells() {
            for (q, b) in other.cells() {
                acc.entry(row_major(&(p + q)))
                    .or_default()
                    .add_product(a, b);
            }
        }
        let out_limbs = limbs::limbs_for_power(self.law_denominator, n);
        let mut points = Vec::with_capacity(acc.len());
        let mut data = Vec::with_capacity(acc.len() * out_limbs);
        for ((y, x), a) in acc {
            points.push(LatticePoint::new(x, y));
            data.extend(limbs::from_biguint(&a.finish(), out_limbs));
        }
        Ok(ExactDist {
            n,
            law_denominator: self.law_denominator,
            limbs: out_limbs,
            storage: Storage::Sparse { points, data },
        }
        .rebalanced())
    }

    /// Law of `S₂ₙ`, as the sum of two independent n-step blocks.
    pub fn self_convolve(&self) -> ExactDist {
        self.convolve(self).expect("same denominator")
    }

    /// Numerator over `D²ⁿ` of `P[S₂ₙ = 0] = Σₓ P[Sₙ = x] P[Sₙ = −x]`,
    /// without building the full law of `S₂ₙ`.
    pub fn split_return_numerator(&self) -> BigUint {
        let mut acc = Accumulator::new();
        for (p, a) in self.cells() {
            if let Some(b) = self.cell(-p) {
                acc.add_product(a, b);
            }
        }
        acc.finish()
    }

    /// `Σₓ mass(x)²`, numerator over `D²ⁿ`.
    pub fn sum_of_squares_numerator(&self) -> BigUint {
        let mut acc = Accumulator::new();
        for (_, a) in self.cells() {
            acc.add_product(a, a);
        }
        acc.finish()
    }

    /// `Σₓ mass(x) · ‖x‖²`, numerator over `Dⁿ`.
    pub fn second_moment_numerator(&self) -> BigUint {
        let mut acc = Accumulator::new();
        for (p, a) in self.cells() {
            acc.add_scaled(a, p.norm2());
        }
        acc.finish()
    }

    /// Exact `E‖Sₙ‖²`.
    pub fn second_moment(&self) -> RationalMoment {
        RationalMoment::from(ratio(
            self.second_moment_numerator(),
            self.total_denominator(),
        ))
    }

    /// Numerator over `Dⁿ` of the mass carried by `points`. Duplicates count once.
    pub fn mass_in_numerator(&self, points: &[LatticePoint]) -> BigUint {
        let mut seen = points.to_vec();
        seen.sort_unstable();
        seen.dedup();
        let mut acc = Accumulator::new();
        for p in seen {
            if let Some(c) = self.cell(p) {
                acc.add(c);
            }
        }
        acc.finish()
    }

    /// Exact mass carried by `points`.
    pub fn mass_in(&self, points: &[LatticePoint]) -> BigRational {
        ratio(self.mass_in_numerator(points), self.total_denominator())
    }

    /// Picks dense or sparse storage for the current support.
    fn rebalanced(self) -> ExactDist {
        let l = self.limbs;
        let support = self.support_len();
        let (lo, hi) = self.bounding_box();
        let width = (hi.x - lo.x + 1) as usize;
        let height = (hi.y - lo.y + 1) as usize;
        let want_dense = support * DENSE_OCCUPANCY > width * height;
        let storage = match (&self.storage, want_dense) {
            (Storage::Dense { corner, width: w, height: h, .. }, true)
                if *corner == lo && *w == width && *h == height =>
            {
                return self;
            }
            (_, true) => {
                let mut data = vec![0u64; width * height * l];
                for (p, c) in self.cells() {
                    let i = (p.y - lo.y) as usize * width + (p.x - lo.x) as usize;
                    data[i * l..(i + 1) * l].copy_from_slice(c);
                }
                Storage::Dense {
                    corner: lo,
                    width,
                    height,
                    data,
                }
            }
            (Storage::Sparse { points, .. }, false) if points.len() == support => return self,
            (_, false) => {
                let mut points = Vec::with_capacity(support);
                let mut data = Vec::with_capacity(support * l);
                for (p, c) in self.cells() {
                    points.push(p);
                    data.extend_from_slice(c);
                }
                Storage::Sparse { points, data }
            }
        };
        ExactDist { storage, ..self }
    }
}

fn dense_step(
    corner: LatticePoint,
    width: usize,
    height: usize,
    data: &[u64],
    in_limbs: usize,
    out_limbs: usize,
    law: &StepLaw,
) -> Storage {
    let (lo, hi) = law.bounding_box();
    let out_width = width + (hi.x - lo.x) as usize;
    let out_height = height + (hi.y - lo.y) as usize;
    let atoms: Vec<(usize, usize, u64)> = law
        .atoms()
        .iter()
        .map(|(p, &w)| ((p.x - lo.x) as usize, (p.y - lo.y) as usize, w))
        .collect();
    let mut out = vec![0u64; out_width * out_height * out_limbs];
    out.par_chunks_mut(out_width * out_limbs)
        .enumerate()
        .for_each(|(row, out_row)| {
            for &(ox, oy, w) in &atoms {
                let Some(in_row) = row.checked_sub(oy).filter(|&r| r < height) else {
                    continue;
                };
                let src = &data[in_row * width * in_limbs..(in_row + 1) * width * in_limbs];
                for (i, cell) in src.chunks_exact(in_limbs).enumerate() {
                    if limbs::is_zero(cell) {
                        continue;
                    }
                    let j = (i + ox) * out_limbs;
                    limbs::mul_add(&mut out_row[j..j + out_limbs], cell, w);
                }
            }
        });
    Storage::Dense {
        corner: corner + lo,
        width: out_width,
        height: out_height,
        data: out,
    }
}

fn sparse_step(
    points: &[LatticePoint],
    data: &[u64],
    in_limbs: usize,
    out_limbs: usize,
    law: &StepLaw,
) -> Storage {
    let mut acc: BTreeMap<(i64, i64), Vec<u64>> = BTreeMap::new();
    for (&p, cell) in points.iter().zip(data.chunks_exact(in_limbs)) {
        if limbs::is_zero(cell) {
            continue;
        }
        for (&q, &w) in law.atoms() {
            let slot = acc
                .entry(row_major(&(p + q)))
                .or_insert_with(|| vec![0; out_limbs]);
            limbs::mul_add(slot, cell, w);
        }
    }
    let mut out_points = Vec::with_capacity(acc.len());
    let mut out = Vec::with_capacity(acc.len() * out_limbs);
    for ((y, x), cell) in acc {
        out_points.push(LatticePoint::new(x, y));
        out.extend(cell);
    }
    Storage::Sparse {
        points: out_points,
        data: out,
    }
}

pub(crate) fn bbox(
    points: impl IntoIterator<Item = LatticePoint>,
) -> Option<(LatticePoint, LatticePoint)> {
    let mut it = points.into_iter();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), p| {
        (
            LatticePoint::new(lo.x.min(p.x), lo.y.min(p.y)),
            LatticePoint::new(hi.x.max(p.x), hi.y.max(p.y)),
        )
    }))
}

pub(crate) fn ratio(numer: BigUint, denom: BigUint) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exact law of `Sₙ` by `n` successive convolutions with the step law.
pub fn exact_by_stepping(law: &StepLaw, n: u64) -> ExactDist {
    let mut dist = ExactDist::origin(law.denominator());
    for _ in 0..n {
        dist = dist.step(law).expect("denominator matches by construction");
    }
    dist
}

/// Exact law of `Sₙ` by binary doubling over the dyadic decomposition of `n`.
pub fn exact_by_doubling(law: &StepLaw, n: u64) -> ExactDist {
    let mut result = ExactDist::origin(law.denominator());
    let mut power = ExactDist::origin(law.denominator())
        .step(law)
        .expect("denominator matches by construction");
    let mut rest = n;
    while rest > 0 {
        if rest & 1 == 1 {
            result = result.convolve(&power).expect("same law");
        }
        rest >>= 1;
        if rest > 0 {
            power = power.self_convolve();
        }
    }
    result
}
