#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_rational::BigRational;
use z2walk::lattice::{law_to_json, LatticePoint, StepLaw};
use z2walk::sim::{stream_rng, uniform_below};
use z2walk::ExactDist;

/// Law of `Sₙ` by enumerating every increment sequence. Independent of the
/// engine: a depth-first walk over `atomsⁿ` paths, multiplying weights.
/// Numerators are over `Dⁿ` and must fit in a u128.
pub fn brute_force(law: &StepLaw, n: u32) -> BTreeMap<LatticePoint, u128> {
    let atoms: Vec<(LatticePoint, u128)> =
        law.atoms().iter().map(|(&p, &w)| (p, w as u128)).collect();
    let mut out = BTreeMap::new();
    fn dfs(
        atoms: &[(LatticePoint, u128)],
        depth: u32,
        pos: LatticePoint,
        weight: u128,
        out: &mut BTreeMap<LatticePoint, u128>,
    ) {
        if depth == 0 {
            *out.entry(pos).or_insert(0) += weight;
            return;
        }
        for &(p, w) in atoms {
            dfs(atoms, depth - 1, pos + p, weight * w, out);
        }
    }
    dfs(&atoms, n, LatticePoint::ORIGIN, 1, &mut out);
    out
}

pub fn dist_as_u128(dist: &ExactDist) -> BTreeMap<LatticePoint, u128> {
    dist.to_map()
        .into_iter()
        .map(|(p, m)| {
            let digits = m.to_u64_digits();
            let v = match digits.len() {
                0 => 0,
                1 => digits[0] as u128,
                2 => digits[0] as u128 | (digits[1] as u128) << 64,
                _ => panic!("numerator too wide"),
            };
            (p, v)
        })
        .collect()
}

/// Largest n with `atomsⁿ ≤ limit`.
pub fn max_enumerable_n(law: &StepLaw, limit: u64) -> u32 {
    let k = law.support_len() as u64;
    let mut n = 0;
    let mut count = 1u64;
    while count.saturating_mul(k) <= limit {
        count *= k;
        n += 1;
    }
    n
}

/// Random law with atoms in `[-r, r]²` and weights in `1..=max_w`.
pub fn random_law(seed: u64, index: u64, r: i64, max_atoms: u64, max_w: u64) -> StepLaw {
    let mut rng = stream_rng(seed, index);
    let count = 1 + uniform_below(&mut rng, max_atoms);
    let mut atoms = BTreeMap::new();
    for _ in 0..count {
        let x = uniform_below(&mut rng, (2 * r + 1) as u64) as i64 - r;
        let y = uniform_below(&mut rng, (2 * r + 1) as u64) as i64 - r;
        let w = 1 + uniform_below(&mut rng, max_w) as i64;
        atoms.insert(LatticePoint::new(x, y), w);
    }
    let d = atoms.values().sum();
    StepLaw::new(atoms, d).expect("random law is valid")
}

/// `law` averaged with its reflection: symmetric, same support up to sign.
pub fn symmetrized(law: &StepLaw) -> StepLaw {
    let mut atoms: BTreeMap<LatticePoint, i64> = BTreeMap::new();
    for (&p, &w) in law.atoms() {
        *atoms.entry(p).or_insert(0) += w as i64;
        *atoms.entry(-p).or_insert(0) += w as i64;
    }
    StepLaw::new(atoms, 2 * law.denominator() as i64).unwrap()
}

pub fn write_law(dir: &Path, name: &str, law: &StepLaw) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, law_to_json(law)).unwrap();
    path
}

pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn parse_rational(v: &serde_json::Value) -> BigRational {
    let num: BigUint = v["num"].as_str().unwrap().parse().unwrap();
    let den: BigUint = v["den"].as_str().unwrap().parse().unwrap();
    BigRational::new(num.into(), den.into())
}
