//! Double-precision n-step distributions for step counts beyond the exact cap.
//!
//! The grid is trimmed after every step: an edge row or column whose total
//! mass is below [`TRIM_THRESHOLD`] is dropped and its mass recorded in
//! [`FloatDist::dropped_mass`]. This keeps the grid at a few dozen standard
//! deviations instead of the full `n · radius` square.

use rayon::prelude::*;

use crate::lattice::{LatticePoint, StepLaw};

pub const TRIM_THRESHOLD: f64 = 1e-30;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Floating-point law of `Sₙ` on a dense row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatDist {
    n: u64,
    corner: LatticePoint,
    width: usize,
    height: usize,
    data: Vec<f64>,
    dropped: f64,
}

impl FloatDist {
    pub fn origin() -> Self {
        Self {
            n: 0,
            corner: LatticePoint::ORIGIN,
            width: 1,
            height: 1,
            data: vec![1.0],
            dropped: 0.0,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Total mass removed by trimming so far.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped
    }

    pub fn mass(&self, p: LatticePoint) -> f64 {
        let dx = p.x - self.corner.x;
        let dy = p.y - self.corner.y;
        if dx < 0 || dy < 0 || dx as usize >= self.width || dy as usize >= self.height {
            return 0.0;
        }
        self.data[dy as usize * self.width + dx as usize]
    }

    /// Nonzero cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (LatticePoint, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(|(i, &m)| {
                (
                    LatticePoint::new(
                        self.corner.x + (i % self.width) as i64,
                        self.corner.y + (i / self.width) as i64,
                    ),
                    m,
                )
            })
    }

    /// Compensated sum of all retained masses.
    pub fn total(&self) -> f64 {
        self.data.iter().copied().collect::<CompensatedSum>().value()
    }

    pub fn step(&self, law: &StepLaw) -> FloatDist {
        self.step_reusing(law, Vec::new())
    }

    /// Like [`FloatDist::step`], writing into `scratch`'s allocation.
    pub fn step_reusing(&self, law: &StepLaw, mut scratch: Vec<f64>) -> FloatDist {
        let (lo, hi) = law.bounding_box();
        let d = law.denominator() as f64;
        let out_width = self.width + (hi.x - lo.x) as usize;
        let out_height = self.height + (hi.y - lo.y) as usize;
        let atoms: Vec<(usize, usize, f64)> = law
            .atoms()
            .iter()
            .map(|(p, &w)| ((p.x - lo.x) as usize, (p.y - lo.y) as usize, w as f64 / d))
            .collect();
        let (width, height, data) = (self.width, self.height, &self.data);
        scratch.clear();
        scratch.resize(out_width * out_height, 0.0);
        scratch
            .par_chunks_mut(out_width)
            .enumerate()
            .for_each(|(row, out_row)| {
                for &(ox, oy, w) in &atoms {
                    let Some(in_row) = row.checked_sub(oy).filter(|&r| r < height) else {
                        continue;
                    };
                    let src = &data[in_row * width..(in_row + 1) * width];
                    for (o, &m) in out_row[ox..ox + width].iter_mut().zip(src) {
                        *o += w * m;
                    }
                }
            });
        let mut next = FloatDist {
            n: self.n + 1,
            corner: self.corner + lo,
            width: out_width,
            height: out_height,
            data: scratch,
            dropped: self.dropped,
        };
        next.trim();
        next
    }

    /// Gives up the grid allocation for reuse.
    pub fn into_buffer(self) -> Vec<f64> {
        self.data
    }

    fn row_sum(&self, r: usize) -> f64 {
        self.data[r * self.width..(r + 1) * self.width].iter().sum()
    }

    fn trim(&mut self) {
        let (mut top, mut bottom) = (0, self.height);
        let (mut left, mut right) = (0, self.width);
        let mut dropped = CompensatedSum::new();
        dropped.add(self.dropped);
        while bottom - top > 1 {
            let s = self.row_sum(top);
            if s >= TRIM_THRESHOLD {
                break;
            }
            dropped.add(s);
            top += 1;
        }
        while bottom - top > 1 {
            let s = self.row_sum(bottom - 1);
            if s >= TRIM_THRESHOLD {
                break;
            }
            dropped.add(s);
            bottom -= 1;
        }
        let col_in_rows = |c: usize| -> f64 {
            (top..bottom).map(|r| self.data[r * self.width + c]).sum()
        };
        while right - left > 1 {
            let s = col_in_rows(left);
            if s >= TRIM_THRESHOLD {
                break;
            }
            dropped.add(s);
            left += 1;
        }
        while right - left > 1 {
            let s = col_in_rows(right - 1);
            if s >= TRIM_THRESHOLD {
                break;
            }
            dropped.add(s);
            right -= 1;
        }
        if (top, bottom, left, right) == (0, self.height, 0, self.width) {
            return;
        }
        // Compact in place; each destination row starts at or before its source.
        let new_width = right - left;
        for (k, r) in (top..bottom).enumerate() {
            let src = r * self.width + left;
            self.data.copy_within(src..src + new_width, k * new_width);
        }
        self.data.truncate(new_width * (bottom - top));
        self.corner = self.corner + LatticePoint::new(left as i64, top as i64);
        self.width = new_width;
        self.height = bottom - top;
        self.dropped = dropped.value();
    }
}

/// Floating-point law of `Sₙ` by `n` successive convolutions.
pub fn float_by_stepping(law: &StepLaw, n: u64) -> FloatDist {
    let mut dist = FloatDist::origin();
    let mut spare = Vec::new();
    for _ in 0..n {
        let next = dist.step_reusing(law, spare);
        spare = std::mem::replace(&mut dist, next).into_buffer();
    }
    dist
}
