//! Sites of Z², finitely supported step laws, and exact moments.
//!
//! A [`StepLaw`] stores integer weights over a common denominator, so every
//! probability derived from it (convolutions, n-step distributions, moments)
//! stays an exact rational. Weights are never reduced; only moment outputs
//! are brought to lowest terms.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A site of the square lattice Z².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    /// Squared euclidean norm `x² + y²`.
    pub fn norm2(self) -> u64 {
        let x = self.x.unsigned_abs();
        let y = self.y.unsigned_abs();
        x * x + y * y
    }

    /// Chebyshev norm `max(|x|, |y|)`.
    pub fn sup_norm(self) -> u64 {
        self.x.unsigned_abs().max(self.y.unsigned_abs())
    }
}

impl Neg for LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint::new(-self.x, -self.y)
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LawError {
    #[error("step law has no atoms")]
    EmptySupport,
    #[error("weights sum to {sum}, expected denominator {denominator}")]
    WeightSumMismatch { sum: i128, denominator: i64 },
    #[error("atom {point} has non-positive weight {weight}")]
    NonPositiveWeight { point: LatticePoint, weight: i64 },
    #[error("denominator must be positive, got {0}")]
    NonPositiveDenominator(i64),
    #[error("atom {0} listed more than once")]
    DuplicateAtom(LatticePoint),
    #[error("product of denominators {0} x {1} does not fit in 64 bits")]
    DenominatorOverflow(u64, u64),
    #[error("malformed law file: {0}")]
    Malformed(String),
}

/// Exact rational moment, always held in lowest terms with a positive
/// denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalMoment(BigRational);

impl RationalMoment {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        Self(BigRational::new(numer.into(), denom.into()))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self.0).unwrap_or(f64::NAN)
    }
}

impl From<BigRational> for RationalMoment {
    fn from(r: BigRational) -> Self {
        Self(r)
    }
}

impl fmt::Display for RationalMoment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finitely supported law of one increment: atom `p` has probability
/// `weight(p) / denominator`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepLaw {
    denominator: u64,
    atoms: BTreeMap<LatticePoint, u64>,
}

impl StepLaw {
    /// Validates raw atoms and builds a law. Zero weights are rejected rather
    /// than dropped.
    pub fn new(
        atoms: impl IntoIterator<Item = (LatticePoint, i64)>,
        denominator: i64,
    ) -> Result<Self, LawError> {
        if denominator <= 0 {
            return Err(LawError::NonPositiveDenominator(denominator));
        }
        let mut map = BTreeMap::new();
        let mut sum: i128 = 0;
        for (point, weight) in atoms {
            if weight <= 0 {
                return Err(LawError::NonPositiveWeight { point, weight });
            }
            if map.insert(point, weight as u64).is_some() {
                return Err(LawError::DuplicateAtom(point));
            }
            sum += weight as i128;
        }
        if map.is_empty() {
            return Err(LawError::EmptySupport);
        }
        if sum != denominator as i128 {
            return Err(LawError::WeightSumMismatch { sum, denominator });
        }
        Ok(Self {
            denominator: denominator as u64,
            atoms: map,
        })
    }

    /// Point mass at `p`.
    pub fn dirac(p: LatticePoint) -> Self {
        Self {
            denominator: 1,
            atoms: BTreeMap::from([(p, 1)]),
        }
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn atoms(&self) -> &BTreeMap<LatticePoint, u64> {
        &self.atoms
    }

    /// Weight of `p`; zero off the support.
    pub fn weight(&self, p: LatticePoint) -> u64 {
        self.atoms.get(&p).copied().unwrap_or(0)
    }

    pub fn support_len(&self) -> usize {
        self.atoms.len()
    }

    /// Largest Chebyshev norm over the support.
    pub fn radius(&self) -> u64 {
        self.atoms.keys().map(|p| p.sup_norm()).max().unwrap_or(0)
    }

    /// Bounding box of the support as `(min, max)` corners.
    pub fn bounding_box(&self) -> (LatticePoint, LatticePoint) {
        let mut lo = LatticePoint::new(i64::MAX, i64::MAX);
        let mut hi = LatticePoint::new(i64::MIN, i64::MIN);
        for p in self.atoms.keys() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// `w(p) = w(-p)` for every atom.
    pub fn is_symmetric(&self) -> bool {
        self.atoms.iter().all(|(&p, &w)| self.weight(-p) == w)
    }

    /// Law of `-X`.
    pub fn reflect(&self) -> StepLaw {
        StepLaw {
            denominator: self.denominator,
            atoms: self.atoms.iter().map(|(&p, &w)| (-p, w)).collect(),
        }
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &StepLaw) -> Result<StepLaw, LawError> {
        let denominator = self
            .denominator
            .checked_mul(other.denominator)
            .ok_or(LawError::DenominatorOverflow(self.denominator, other.denominator))?;
        let mut atoms: BTreeMap<LatticePoint, u64> = BTreeMap::new();
        for (&p, &wp) in &self.atoms {
            for (&q, &wq) in &other.atoms {
                // Each product is bounded by the denominator product checked above.
                *atoms.entry(p + q).or_insert(0) += wp * wq;
            }
        }
        debug_assert_eq!(atoms.values().sum::<u64>(), denominator);
        Ok(StepLaw { denominator, atoms })
    }

    /// Increment law of `S⁽¹⁾ − S⁽²⁾` for two independent walks with this
    /// increment law. Always symmetric.
    pub fn difference(&self) -> Result<StepLaw, LawError> {
        self.convolve(&self.reflect())
    }

    /// Exact mean `(E X, E Y)`.
    pub fn mean(&self) -> (RationalMoment, RationalMoment) {
        let d = BigInt::from(self.denominator);
        let (mut sx, mut sy) = (BigInt::zero(), BigInt::zero());
        for (&p, &w) in &self.atoms {
            sx += BigInt::from(p.x) * w;
            sy += BigInt::from(p.y) * w;
        }
        (RationalMoment::new(sx, d.clone()), RationalMoment::new(sy, d))
    }

    /// Exact `E‖X‖²`.
    pub fn second_moment(&self) -> RationalMoment {
        let num: BigInt = self
            .atoms
            .iter()
            .map(|(&p, &w)| BigInt::from(p.norm2()) * w)
            .sum();
        RationalMoment::new(num, self.denominator)
    }
}

impl fmt::Display for StepLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (p, w)) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}: {w}")?;
        }
        write!(f, "}} / {}", self.denominator)
    }
}

/// Step-law file record: `{"dx": int, "dy": int, "weight": int}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct AtomRecord {
    pub dx: i64,
    pub dy: i64,
    pub weight: i64,
}

/// On-disk JSON form of a step law.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct LawFile {
    pub denominator: i64,
    pub atoms: Vec<AtomRecord>,
}

impl LawFile {
    pub fn into_law(self) -> Result<StepLaw, LawError> {
        StepLaw::new(
            self.atoms
                .into_iter()
                .map(|a| (LatticePoint::new(a.dx, a.dy), a.weight)),
            self.denominator,
        )
    }
}

impl From<&StepLaw> for LawFile {
    fn from(law: &StepLaw) -> Self {
        LawFile {
            denominator: law.denominator as i64,
            atoms: law
                .atoms
                .iter()
                .map(|(p, &w)| AtomRecord {
                    dx: p.x,
                    dy: p.y,
                    weight: w as i64,
                })
                .collect(),
        }
    }
}

/// Parses a law file. Serde errors carry the offending field and position.
pub fn parse_law_json(text: &str) -> Result<StepLaw, LawError> {
    let file: LawFile =
        serde_json::from_str(text).map_err(|e| LawError::Malformed(e.to_string()))?;
    file.into_law()
}

pub fn law_to_json(law: &StepLaw) -> String {
    let mut s = serde_json::to_string_pretty(&LawFile::from(law)).expect("law serializes");
    s.push('\n');
    s
}

/// Example laws shipped with the CLI.
pub mod bundled {
    use super::{LatticePoint, StepLaw};

    fn build(atoms: &[((i64, i64), i64)], denominator: i64) -> StepLaw {
        StepLaw::new(
            atoms.iter().map(|&((x, y), w)| (LatticePoint::new(x, y), w)),
            denominator,
        )
        .expect("bundled law is valid")
    }

    /// Uniform on the four nearest neighbours.
    pub fn simple() -> StepLaw {
        build(&[((1, 0), 1), ((-1, 0), 1), ((0, 1), 1), ((0, -1), 1)], 4)
    }

    /// Simple walk that stays put with probability 1/3.
    pub fn lazy() -> StepLaw {
        build(
            &[((0, 0), 2), ((1, 0), 1), ((-1, 0), 1), ((0, 1), 1), ((0, -1), 1)],
            6,
        )
    }

    /// Increment law of the difference of two independent simple walks.
    pub fn difference_of_simple() -> StepLaw {
        simple().difference().expect("small denominators")
    }

    /// Nearest-neighbour steps mixed with knight moves.
    pub fn long_step() -> StepLaw {
        build(
            &[
                ((1, 0), 2),
                ((-1, 0), 2),
                ((0, 1), 2),
                ((0, -1), 2),
                ((2, 1), 1),
                ((2, -1), 1),
                ((-2, 1), 1),
                ((-2, -1), 1),
                ((1, 2), 1),
                ((1, -2), 1),
                ((-1, 2), 1),
                ((-1, -2), 1),
            ],
            16,
        )
    }

    /// Simple walk with every step doubled in length.
    pub fn doubled_simple() -> StepLaw {
        build(&[((2, 0), 1), ((-2, 0), 1), ((0, 2), 1), ((0, -2), 1)], 4)
    }

    /// The four symmetric laws written by `law bundle`, with their file stems.
    pub fn all() -> Vec<(&'static str, StepLaw)> {
        vec![
            ("simple", simple()),
            ("lazy", lazy()),
            ("difference_simple", difference_of_simple()),
            ("long_step", long_step()),
        ]
    }
}
