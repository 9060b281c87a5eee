//! Exact rationals, rational enclosures and the small amount of real
//! analysis (square roots, fractional powers) needed to compare moduli.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Bits of precision used when enclosing square roots.
pub const SQRT_BITS: u64 = 48;

/// Relative margin applied around libm results (ln, exp, cos).
const FLOAT_MARGIN: f64 = 1e-12;

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

pub fn pow_u(a: u32, k: u32) -> BigUint {
    BigUint::from(a).pow(k)
}

/// `a^{-k}` as a rational.
pub fn inv_pow(a: u32, k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::from(a).pow(k))
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(BigInt::from_str(s).map_err(|_| bad())?)),
    }
}

/// Exact conversion of a finite double.
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite float")
}

pub fn to_f64(r: &Rational) -> f64 {
    // Scale big operands down before dividing so tiny or huge values survive.
    let n = r.numer();
    let d = r.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    if nb < 1000 && db < 1000 {
        if let (Some(x), Some(y)) = (n.to_f64(), d.to_f64()) {
            if x.is_finite() && y.is_finite() && y != 0.0 {
                return x / y;
            }
        }
    }
    let shift_n = (nb - 60).max(0);
    let shift_d = (db - 60).max(0);
    let x = (n >> shift_n as usize).to_f64().unwrap_or(0.0);
    let y = (d >> shift_d as usize).to_f64().unwrap_or(1.0);
    x / y * 2f64.powi((shift_n - shift_d) as i32)
}

/// A closed interval `[lo, hi]` of rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub lo: Rational,
    pub hi: Rational,
}

impl Bounds {
    pub fn exact(x: Rational) -> Self {
        Bounds { lo: x.clone(), hi: x }
    }

    pub fn zero() -> Self {
        Bounds::exact(Rational::zero())
    }

    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        Bounds { lo, hi }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn add(&self, o: &Bounds) -> Bounds {
        Bounds { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    pub fn sub(&self, o: &Bounds) -> Bounds {
        Bounds { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo }
    }

    /// Multiply by a nonnegative rational.
    pub fn scale(&self, k: &Rational) -> Bounds {
        debug_assert!(!k.is_negative());
        Bounds { lo: &self.lo * k, hi: &self.hi * k }
    }

    /// Product of two intervals of nonnegative numbers.
    pub fn mul_nonneg(&self, o: &Bounds) -> Bounds {
        Bounds { lo: &self.lo * &o.lo, hi: &self.hi * &o.hi }
    }

    pub fn max(&self, o: &Bounds) -> Bounds {
        Bounds {
            lo: (&self.lo).max(&o.lo).clone(),
            hi: (&self.hi).max(&o.hi).clone(),
        }
    }

    /// `max(x, 0)` applied to every point of the interval.
    pub fn positive_part(&self) -> Bounds {
        let z = Rational::zero();
        Bounds {
            lo: if self.lo.is_negative() { z.clone() } else { self.lo.clone() },
            hi: if self.hi.is_negative() { z } else { self.hi.clone() },
        }
    }

    pub fn mid_f64(&self) -> f64 {
        (to_f64(&self.lo) + to_f64(&self.hi)) / 2.0
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "{}", format_rational(&self.lo))
        } else {
            write!(f, "[{}, {}]", format_rational(&self.lo), format_rational(&self.hi))
        }
    }
}

/// Enclosure of `sqrt(x)` for `x >= 0`; exact when `x` is a square.
pub fn sqrt_bounds(x: &Rational) -> Bounds {
    assert!(!x.is_negative(), "sqrt of negative rational");
    if x.is_zero() {
        return Bounds::zero();
    }
    let n = x.numer().magnitude();
    let d = x.denom().magnitude();
    let (rn, rd) = (n.sqrt(), d.sqrt());
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        return Bounds::exact(Rational::new(rn.into(), rd.into()));
    }
    // sqrt(n/d) = sqrt(n d) / d
    let scaled: BigUint = (n * d) << (2 * SQRT_BITS as usize);
    let s = scaled.sqrt();
    let den = BigInt::from(d.clone()) << SQRT_BITS as usize;
    let lo = Rational::new(BigInt::from(s.clone()), den.clone());
    let hi = Rational::new(BigInt::from(s + 1u32), den);
    Bounds::new(lo, hi)
}

/// Enclosure of `sqrt` over an interval of nonnegative rationals.
pub fn sqrt_interval(b: &Bounds) -> Bounds {
    let lo = sqrt_bounds(&b.lo).lo;
    let hi = sqrt_bounds(&b.hi).hi;
    Bounds::new(lo, hi)
}

/// Enclosure of `x^e` for `x >= 0` and rational exponent `e > 0`.
///
/// Integer exponents are exact; otherwise `e·ln x` is evaluated in double
/// precision and widened by a relative margin far above libm error.
pub fn pow_bounds(x: &Bounds, e: &Rational) -> Bounds {
    assert!(e.is_positive());
    if e.is_integer() {
        let k = e.to_integer().to_u32().expect("small integer exponent");
        return Bounds::new(pow_rat(&x.lo, k), pow_rat(&x.hi, k));
    }
    let lo = if x.lo.is_zero() { Rational::zero() } else { pow_float(&x.lo, e, false) };
    let hi = if x.hi.is_zero() { Rational::zero() } else { pow_float(&x.hi, e, true) };
    Bounds::new(lo, hi)
}

fn pow_rat(x: &Rational, k: u32) -> Rational {
    Rational::new(x.numer().pow(k), x.denom().pow(k))
}

fn ln_rational(x: &Rational) -> f64 {
    let ln_big = |v: &BigInt| {
        let bits = v.bits() as i64;
        let shift = (bits - 60).max(0);
        let m = (v.magnitude() >> shift as usize).to_f64().unwrap();
        m.ln() + shift as f64 * std::f64::consts::LN_2
    };
    ln_big(x.numer()) - ln_big(x.denom())
}

fn pow_float(x: &Rational, e: &Rational, upper: bool) -> Rational {
    let v = to_f64(e) * ln_rational(x);
    let widen = FLOAT_MARGIN * (1.0 + v.abs());
    let y = if upper { (v + widen).exp() } else { (v - widen).exp() };
    let y = if upper { y * (1.0 + FLOAT_MARGIN) } else { y * (1.0 - FLOAT_MARGIN) };
    from_f64(y)
}

/// Enclosure of `cos(2πk/a)`; exact whenever the value is rational.
pub fn cos_bounds(a: u32, k: i64) -> Bounds {
    let k = k.rem_euclid(a as i64) as u64;
    let a64 = a as u64;
    if (4 * k) % a64 == 0 {
        return Bounds::exact(match (4 * k / a64) % 4 {
            0 => int(1),
            1 | 3 => int(0),
            _ => int(-1),
        });
    }
    if (6 * k) % a64 == 0 {
        return Bounds::exact(match (6 * k / a64) % 6 {
            1 | 5 => rat(1, 2),
            _ => rat(-1, 2),
        });
    }
    let c = (2.0 * std::f64::consts::PI * k as f64 / a as f64).cos();
    let m = 4.0 * f64::EPSILON;
    Bounds::new(from_f64(c - m), from_f64(c + m))
}

pub fn ser_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

pub fn de_rational<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
    let s = String::deserialize(d)?;
    parse_rational(&s).map_err(serde::de::Error::custom)
}

/// Serde adapter for `Rational` as a `"p/q"` string.
pub mod rational_str {
    pub use super::de_rational as deserialize;
    pub use super::ser_rational as serialize;
}

/// Serde adapter for `Vec<Rational>`.
pub mod rational_vec {
    use super::*;
    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(format_rational).collect();
        strs.serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter().map(|s| parse_rational(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// Serde adapter for `BigUint` indices as decimal strings.
pub mod biguint_str {
    use super::*;
    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde helper for `Bounds` as `{lo, hi}` rational strings.
impl Serialize for Bounds {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Bounds", 2)?;
        st.serialize_field("lo", &format_rational(&self.lo))?;
        st.serialize_field("hi", &format_rational(&self.hi))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Bounds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lo: String,
            hi: String,
        }
        let r = Raw::deserialize(d)?;
        let lo = parse_rational(&r.lo).map_err(serde::de::Error::custom)?;
        let hi = parse_rational(&r.hi).map_err(serde::de::Error::custom)?;
        Ok(Bounds { lo, hi })
    }
}

/// Smallest `k >= 0` with `a^k >= n`.
pub fn ceil_log(a: u32, n: &BigUint) -> u32 {
    let mut k = 0;
    let mut p = BigUint::one();
    while &p < n {
        p *= a;
        k += 1;
    }
    k
}

pub fn sign_of(r: &Rational) -> Sign {
    r.numer().sign()
}

pub fn gcd_u32(x: u32, y: u32) -> u32 {
    x.gcd(&y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("-7").unwrap(), int(-7));
        assert_eq!(format_rational(&rat(-2, 4)), "-1/2");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn sqrt_enclosures() {
        assert!(sqrt_bounds(&rat(9, 4)).is_exact());
        assert_eq!(sqrt_bounds(&rat(9, 4)).lo, rat(3, 2));
        let b = sqrt_bounds(&int(2));
        assert!(&b.lo * &b.lo <= int(2) && &b.hi * &b.hi >= int(2));
        assert!(to_f64(&(&b.hi - &b.lo)) < 1e-12);
    }

    #[test]
    fn pow_enclosures() {
        let b = pow_bounds(&Bounds::exact(rat(1, 4)), &rat(5, 2));
        assert!(b.lo <= rat(1, 32) && b.hi >= rat(1, 32));
        let b = pow_bounds(&Bounds::exact(rat(1, 3)), &int(2));
        assert_eq!(b, Bounds::exact(rat(1, 9)));
    }

    #[test]
    fn cos_exact_cases() {
        assert_eq!(cos_bounds(3, 1), Bounds::exact(rat(-1, 2)));
        assert_eq!(cos_bounds(4, 1), Bounds::exact(int(0)));
        assert_eq!(cos_bounds(6, 1), Bounds::exact(rat(1, 2)));
        let c = cos_bounds(5, 1);
        assert!(!c.is_exact() && to_f64(&c.lo) < 0.30902 && to_f64(&c.hi) > 0.30901);
    }

    #[test]
    fn tiny_values_convert() {
        let r = inv_pow(2, 2000);
        assert_eq!(to_f64(&r), 0.0);
        assert!((to_f64(&inv_pow(2, 900)) - 2f64.powi(-900)).abs() < 1e-280);
    }
}
