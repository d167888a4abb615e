//! Fixed-width little-endian u64 limb arithmetic.
//!
//! Every numerator of an n-step distribution is bounded by `Dⁿ`, so a whole
//! grid can share one limb width and be updated in place without allocating.

use num_bigint::BigUint;

/// Limbs needed to hold any value `≤ dⁿ`.
pub(crate) fn limbs_for_power(d: u64, n: u64) -> usize {
    let bits = 64 - d.leading_zeros() as u64;
    // dⁿ < 2^(n·bits); an extra bit covers d = 2^k exactly reaching the bound.
    ((n * bits + 1).div_ceil(64)).max(1) as usize
}

#[inline]
pub(crate) fn is_zero(a: &[u64]) -> bool {
    a.iter().all(|&l| l == 0)
}

/// `out += a · k`, propagating the carry through all of `out`.
#[inline]
pub(crate) fn mul_add(out: &mut [u64], a: &[u64], k: u64) {
    let mut carry: u128 = 0;
    let k = k as u128;
    for (o, &l) in out.iter_mut().zip(a) {
        let t = *o as u128 + l as u128 * k + carry;
        *o = t as u64;
        carry = t >> 64;
    }
    if carry != 0 {
        for o in out[a.len()..].iter_mut() {
            let t = *o as u128 + carry;
            *o = t as u64;
            carry = t >> 64;
            if carry == 0 {
                break;
            }
        }
    }
    debug_assert_eq!(carry, 0, "limb overflow");
}

pub(crate) fn to_biguint(a: &[u64]) -> BigUint {
    let mut digits = Vec::with_capacity(a.len() * 2);
    for &l in a {
        digits.push(l as u32);
        digits.push((l >> 32) as u32);
    }
    BigUint::new(digits)
}

pub(crate) fn from_biguint(v: &BigUint, width: usize) -> Vec<u64> {
    let mut out = v.to_u64_digits();
    assert!(out.len() <= width, "value wider than {width} limbs");
    out.resize(width, 0);
    out
}

/// Column accumulator: sums many limb vectors and limb products with carries
/// deferred to [`Accumulator::finish`]. Each column is a u128, so up to 2⁶⁴
/// terms can be added before anything can overflow.
#[derive(Debug, Clone, Default)]
pub(crate) struct Accumulator {
    cols: Vec<u128>,
}

impl Accumulator {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    fn reserve(&mut self, len: usize) {
        if self.cols.len() < len {
            self.cols.resize(len, 0);
        }
    }

    pub(crate) fn add(&mut self, a: &[u64]) {
        self.reserve(a.len());
        for (c, &l) in self.cols.iter_mut().zip(a) {
            *c += l as u128;
        }
    }

    pub(crate) fn add_scaled(&mut self, a: &[u64], k: u64) {
        self.reserve(a.len() + 1);
        for (i, &l) in a.iter().enumerate() {
            let p = l as u128 * k as u128;
            self.cols[i] += p as u64 as u128;
            self.cols[i + 1] += p >> 64;
        }
    }

    /// Adds the full product `a · b`.
    pub(crate) fn add_product(&mut self, a: &[u64], b: &[u64]) {
        let a = trim(a);
        let b = trim(b);
        if a.is_empty() || b.is_empty() {
            return;
        }
        self.reserve(a.len() + b.len());
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            let row = &mut self.cols[i..];
            for (j, &y) in b.iter().enumerate() {
                let p = x as u128 * y as u128;
                row[j] += p as u64 as u128;
                row[j + 1] += p >> 64;
            }
        }
    }

    pub(crate) fn finish(&self) -> BigUint {
        let mut limbs = Vec::with_capacity(self.cols.len() + 2);
        let mut carry: u128 = 0;
        for &c in &self.cols {
            // c < 2^128 - 2^64 in practice; split to avoid overflow when adding the carry.
            let lo = (c as u64) as u128 + (carry as u64) as u128;
            let hi = (c >> 64) + (carry >> 64) + (lo >> 64);
            limbs.push(lo as u64);
            carry = hi;
        }
        while carry != 0 {
            limbs.push(carry as u64);
            carry >>= 64;
        }
        to_biguint(&limbs)
    }
}

fn trim(a: &[u64]) -> &[u64] {
    let len = a.iter().rposition(|&l| l != 0).map_or(0, |i| i + 1);
    &a[..len]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn limb_width() {
        assert_eq!(limbs_for_power(4, 0), 1);
        assert_eq!(limbs_for_power(4, 31), 2); // 4^31 = 2^62, 3 bits each -> 94 bits
        assert_eq!(limbs_for_power(2, 64), 3); // 2 bits per factor, so 129 bits are reserved
        assert_eq!(limbs_for_power(u64::MAX, 1), 2);
    }

    #[test]
    fn mul_add_carries_through_high_limbs() {
        let mut out = vec![u64::MAX, u64::MAX, 0];
        mul_add(&mut out, &[1], 1);
        assert_eq!(out, vec![0, 0, 1]);
    }

    proptest! {
        #[test]
        fn accumulator_matches_biguint(
            a in prop::collection::vec(any::<u64>(), 1..5),
            b in prop::collection::vec(any::<u64>(), 1..5),
            k in any::<u64>(),
        ) {
            let mut acc = Accumulator::new();
            acc.add(&a);
            acc.add_scaled(&b, k);
            acc.add_product(&a, &b);
            let (ba, bb) = (to_biguint(&a), to_biguint(&b));
            let expected = &ba + &bb * k + &ba * &bb;
            prop_assert_eq!(acc.finish(), expected);
        }

        #[test]
        fn mul_add_matches_biguint(
            out in prop::collection::vec(any::<u64>(), 1..4),
            a in prop::collection::vec(any::<u64>(), 1..4),
            k in any::<u64>(),
        ) {
            let width = out.len().max(a.len()) + 2;
            let mut wide = out.clone();
            wide.resize(width, 0);
            mul_add(&mut wide, &a, k);
            prop_assert_eq!(to_biguint(&wide), to_biguint(&out) + to_biguint(&a) * k);
            prop_assert_eq!(from_biguint(&to_biguint(&wide), width), wide);
        }
    }
}
