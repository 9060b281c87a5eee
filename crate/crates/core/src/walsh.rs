//! Generalized Rademacher and Walsh functions of order `a`.
//!
//! Values are kept as exponents of ω_a. The Rademacher function φ_n reads
//! the n-th base-a digit of x (digit 0 is the first after the point), and
//! ψ_n is the product of Rademacher powers given by the base-a digits of n.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cyclo::Cyc;
use crate::error::{Error, Result};
use crate::num::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Order(u32);

impl Order {
    pub fn new(a: u32) -> Result<Order> {
        if a < 2 {
            Err(Error::InvalidOrder(a))
        } else {
            Ok(Order(a))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for Order {
    type Error = Error;
    fn try_from(a: u32) -> Result<Order> {
        Order::new(a)
    }
}

impl From<Order> for u32 {
    fn from(o: Order) -> u32 {
        o.0
    }
}

/// ω_a^exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RootOfUnity {
    pub a: u32,
    pub exponent: u32,
}

impl RootOfUnity {
    pub fn new(a: u32, k: i64) -> RootOfUnity {
        RootOfUnity { a, exponent: k.rem_euclid(a as i64) as u32 }
    }

    pub fn one(a: u32) -> RootOfUnity {
        RootOfUnity { a, exponent: 0 }
    }

    pub fn mul(self, o: RootOfUnity) -> RootOfUnity {
        debug_assert_eq!(self.a, o.a);
        RootOfUnity::new(self.a, self.exponent as i64 + o.exponent as i64)
    }

    pub fn pow(self, k: i64) -> RootOfUnity {
        RootOfUnity::new(self.a, self.exponent as i64 * k.rem_euclid(self.a as i64))
    }

    pub fn conj(self) -> RootOfUnity {
        RootOfUnity::new(self.a, -(self.exponent as i64))
    }

    pub fn to_cyc(self) -> Cyc {
        Cyc::root(self.a, self.exponent as i64)
    }

    pub fn to_complex(self) -> num_complex::Complex64 {
        crate::cyclo::Ctx::get(self.a).omega(self.exponent as i64)
    }
}

/// ψ_n together with the base-a expansion n = Σ α_j a^{n_j}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WalshIndex {
    pub a: u32,
    pub n: BigUint,
    /// (position n_j, digit α_j) with strictly decreasing positions.
    pub digits: Vec<(u32, u32)>,
}

/// Little-endian base-a digits of n.
pub fn base_digits(a: u32, n: &BigUint) -> Vec<u32> {
    if n.is_zero() {
        return Vec::new();
    }
    n.to_radix_le(a).into_iter().map(u32::from).collect()
}

pub fn decompose_index(n: &BigUint, a: Order) -> WalshIndex {
    let mut digits: Vec<(u32, u32)> = base_digits(a.get(), n)
        .into_iter()
        .enumerate()
        .filter(|&(_, d)| d != 0)
        .map(|(p, d)| (p as u32, d))
        .collect();
    digits.reverse();
    WalshIndex { a: a.get(), n: n.clone(), digits }
}

impl WalshIndex {
    pub fn new(a: u32, n: u64) -> WalshIndex {
        decompose_index(&BigUint::from(n), Order(a.max(2)))
    }

    pub fn constancy_rank(&self) -> u32 {
        self.digits.first().map_or(0, |&(p, _)| p + 1)
    }

    /// Exponent of ψ_n at a point given by a digit accessor.
    pub fn exponent_with(&self, digit: impl Fn(u32) -> u32) -> u32 {
        let s: u64 = self.digits.iter().map(|&(p, al)| al as u64 * digit(p) as u64).sum();
        (s % self.a as u64) as u32
    }
}

pub fn constancy_rank(idx: &WalshIndex) -> u32 {
    idx.constancy_rank()
}

/// Digit `pos` of x mod 1: floor(a^{pos+1} x) mod a.
pub fn digit_of(a: u32, x: &Rational, pos: u32) -> u32 {
    let num = x.numer();
    let den = x.denom();
    let scaled = num * num_bigint::BigInt::from(a).pow(pos + 1);
    let q = scaled.div_floor(den);
    q.mod_floor(&num_bigint::BigInt::from(a)).to_u32().unwrap()
}

pub fn eval_rademacher(a: Order, n: u32, x: &Rational) -> RootOfUnity {
    RootOfUnity::new(a.get(), digit_of(a.get(), x, n) as i64)
}

pub fn eval_walsh(a: Order, idx: &WalshIndex, x: &Rational) -> RootOfUnity {
    let e = idx.exponent_with(|p| digit_of(a.get(), x, p));
    RootOfUnity::new(a.get(), e as i64)
}

/// Digit at position `pos` of the left endpoint of rank-m cell `i`.
#[inline]
pub fn cell_digit(a: u32, m: u32, i: u64, pos: u32) -> u32 {
    if pos >= m {
        return 0;
    }
    ((i / (a as u64).pow(m - 1 - pos)) % a as u64) as u32
}

/// Exponent of ψ_n on rank-m cell i; requires m ≥ constancy rank.
pub fn walsh_on_cell(idx: &WalshIndex, m: u32, i: u64) -> Result<u32> {
    if idx.constancy_rank() > m {
        return Err(Error::InvalidArgument(format!(
            "rank {m} too coarse for index {} of constancy rank {}",
            idx.n,
            idx.constancy_rank()
        )));
    }
    Ok(idx.exponent_with(|p| cell_digit(idx.a, m, i, p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn o(a: u32) -> Order {
        Order::new(a).unwrap()
    }

    #[test]
    fn decomposition_examples() {
        assert_eq!(WalshIndex::new(3, 5).digits, vec![(1, 1), (0, 2)]);
        assert!(WalshIndex::new(2, 0).digits.is_empty());
        assert_eq!(WalshIndex::new(2, 8).digits, vec![(3, 1)]);
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(eval_rademacher(o(2), 0, &rat(3, 4)).exponent, 1);
        assert_eq!(eval_rademacher(o(3), 0, &rat(1, 2)).exponent, 1);
        assert_eq!(eval_rademacher(o(2), 1, &rat(1, 5)).exponent, 0);
        // reduction mod 1
        assert_eq!(eval_rademacher(o(2), 0, &rat(7, 4)).exponent, 1);
        assert_eq!(eval_rademacher(o(2), 0, &rat(-1, 4)).exponent, 1);
    }

    #[test]
    fn walsh_examples() {
        let x = rat(2, 7);
        assert_eq!(eval_walsh(o(3), &WalshIndex::new(3, 0), &x).exponent, 0);
        let phi1 = eval_rademacher(o(3), 1, &x);
        let phi0 = eval_rademacher(o(3), 0, &x);
        assert_eq!(eval_walsh(o(3), &WalshIndex::new(3, 5), &x), phi1.mul(phi0.pow(2)));
        assert_eq!(eval_walsh(o(2), &WalshIndex::new(2, 2), &rat(3, 10)).exponent, 1);
    }

    #[test]
    fn constancy_ranks() {
        assert_eq!(WalshIndex::new(3, 0).constancy_rank(), 0);
        assert_eq!(WalshIndex::new(3, 5).constancy_rank(), 2);
        assert_eq!(WalshIndex::new(2, 8).constancy_rank(), 4);
    }

    #[test]
    fn invalid_order() {
        assert!(Order::new(1).is_err());
        assert!(serde_json::from_str::<Order>("0").is_err());
    }
}
