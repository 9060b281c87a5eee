//! Arithmetic in the cyclotomic field Q(ω_a), ω_a = e^{2πi/a}.
//!
//! Elements are stored as coordinates in the power basis 1, ω, …, ω^{d-1}
//! with d = φ(a), reduced modulo the a-th cyclotomic polynomial. Two
//! representations are provided: [`Cyc`] with rational coordinates for
//! general exact work and [`Lat`] with small integer coordinates for hot
//! loops where a common denominator has been factored out.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Roots;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::num::{
    cos_bounds, format_rational, parse_rational, sqrt_interval, to_f64, Bounds, Rational,
};

/// Maximum φ(a) supported by the integer lattice type.
pub const LAT_DIM: usize = 6;

/// Precomputed tables for one order.
#[derive(Debug)]
pub struct Ctx {
    pub a: u32,
    pub deg: usize,
    /// Coefficients of Φ_a, constant term first.
    pub phi: Vec<i64>,
    /// `red[k]` = coordinates of ω^k for 0 ≤ k < a.
    pub red: Vec<Vec<i64>>,
    /// Whether |z|² has rational values on Z[ω].
    pub rational_norm: bool,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut rem = num.to_vec();
    let dl = den.len();
    let lead = *den.last().unwrap();
    let mut q = vec![0i64; rem.len() + 1 - dl];
    for i in (0..q.len()).rev() {
        let c = rem[i + dl - 1] / lead;
        q[i] = c;
        for (j, &d) in den.iter().enumerate() {
            rem[i + j] -= c * d;
        }
    }
    debug_assert!(rem.iter().all(|&r| r == 0));
    q
}

pub fn cyclotomic_poly(n: u32) -> Vec<i64> {
    let mut p = vec![0i64; n as usize + 1];
    p[0] = -1;
    p[n as usize] = 1;
    for d in 1..n {
        if n % d == 0 {
            p = poly_div_exact(&p, &cyclotomic_poly(d));
        }
    }
    p
}

impl Ctx {
    fn build(a: u32) -> Ctx {
        let phi = cyclotomic_poly(a);
        let deg = phi.len() - 1;
        let mut red = Vec::with_capacity(a as usize);
        // ω^k by repeated multiplication by x and reduction.
        let mut cur = vec![0i64; deg];
        cur[0] = 1;
        for _ in 0..a {
            red.push(cur.clone());
            let mut next = vec![0i64; deg + 1];
            next[1..=deg].copy_from_slice(&cur);
            let top = next[deg];
            for j in 0..deg {
                next[j] -= top * phi[j];
            }
            next.truncate(deg);
            cur = next;
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let cos = (0..a).map(|k| (two_pi * k as f64 / a as f64).cos()).collect();
        let sin = (0..a).map(|k| (two_pi * k as f64 / a as f64).sin()).collect();
        Ctx { a, deg, phi, red, rational_norm: matches!(a, 2 | 3 | 4 | 6), cos, sin }
    }

    pub fn get(a: u32) -> &'static Ctx {
        static CACHE: OnceLock<Mutex<HashMap<u32, &'static Ctx>>> = OnceLock::new();
        let m = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut g = m.lock().unwrap();
        g.entry(a).or_insert_with(|| Box::leak(Box::new(Ctx::build(a))))
    }

    pub fn omega(&self, k: i64) -> Complex64 {
        let k = k.rem_euclid(self.a as i64) as usize;
        Complex64::new(self.cos[k], self.sin[k])
    }
}

/// Exact element of Q(ω_a).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cyc {
    a: u32,
    c: Vec<Rational>,
}

impl Cyc {
    pub fn zero(a: u32) -> Cyc {
        Cyc { a, c: vec![Rational::zero(); Ctx::get(a).deg] }
    }

    pub fn one(a: u32) -> Cyc {
        Cyc::from_rational(a, Rational::one())
    }

    pub fn from_rational(a: u32, r: Rational) -> Cyc {
        let mut z = Cyc::zero(a);
        z.c[0] = r;
        z
    }

    /// ω_a^k.
    pub fn root(a: u32, k: i64) -> Cyc {
        let ctx = Ctx::get(a);
        let k = k.rem_euclid(a as i64) as usize;
        Cyc { a, c: ctx.red[k].iter().map(|&v| Rational::from_integer(v.into())).collect() }
    }

    pub fn from_coords(a: u32, c: Vec<Rational>) -> Cyc {
        assert_eq!(c.len(), Ctx::get(a).deg, "coordinate count");
        Cyc { a, c }
    }

    pub fn order(&self) -> u32 {
        self.a
    }

    pub fn coords(&self) -> &[Rational] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }

    /// The rational value when the element is rational.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.c[1..].iter().all(Zero::is_zero) {
            Some(self.c[0].clone())
        } else {
            None
        }
    }

    pub fn add(&self, o: &Cyc) -> Cyc {
        Cyc { a: self.a, c: self.c.iter().zip(&o.c).map(|(x, y)| x + y).collect() }
    }

    pub fn sub(&self, o: &Cyc) -> Cyc {
        Cyc { a: self.a, c: self.c.iter().zip(&o.c).map(|(x, y)| x - y).collect() }
    }

    pub fn neg(&self) -> Cyc {
        Cyc { a: self.a, c: self.c.iter().map(|x| -x).collect() }
    }

    pub fn scale(&self, k: &Rational) -> Cyc {
        Cyc { a: self.a, c: self.c.iter().map(|x| x * k).collect() }
    }

    pub fn add_assign(&mut self, o: &Cyc) {
        for (x, y) in self.c.iter_mut().zip(&o.c) {
            *x += y;
        }
    }

    pub fn mul(&self, o: &Cyc) -> Cyc {
        let ctx = Ctx::get(self.a);
        let d = ctx.deg;
        let mut out = vec![Rational::zero(); d];
        for (i, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in o.c.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let xy = x * y;
                for (t, &r) in ctx.red[(i + j) % self.a as usize].iter().enumerate() {
                    if r != 0 {
                        out[t] += &xy * BigInt::from(r);
                    }
                }
            }
        }
        Cyc { a: self.a, c: out }
    }

    /// Multiply by ω^k.
    pub fn mul_root(&self, k: i64) -> Cyc {
        self.mul(&Cyc::root(self.a, k))
    }

    pub fn conj(&self) -> Cyc {
        let ctx = Ctx::get(self.a);
        let a = self.a as usize;
        let mut out = vec![Rational::zero(); ctx.deg];
        for (j, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (t, &r) in ctx.red[(a - j) % a].iter().enumerate() {
                if r != 0 {
                    out[t] += x * BigInt::from(r);
                }
            }
        }
        Cyc { a: self.a, c: out }
    }

    /// Enclosure of |z|²; exact for a ∈ {2, 3, 4, 6}.
    pub fn norm_sq(&self) -> Bounds {
        let mut acc = Bounds::zero();
        for (j, x) in self.c.iter().enumerate() {
            for (k, y) in self.c.iter().enumerate() {
                let xy = x * y;
                if xy.is_zero() {
                    continue;
                }
                let cb = cos_bounds(self.a, j as i64 - k as i64);
                let term = if xy.is_negative() {
                    Bounds::new(&cb.hi * &xy, &cb.lo * &xy)
                } else {
                    Bounds::new(&cb.lo * &xy, &cb.hi * &xy)
                };
                acc = acc.add(&term);
            }
        }
        if acc.lo.is_negative() {
            acc.lo = Rational::zero();
        }
        acc
    }

    /// Enclosure of |z|; exact for real elements.
    pub fn abs(&self) -> Bounds {
        if let Some(r) = self.as_rational() {
            return Bounds::exact(r.abs());
        }
        sqrt_interval(&self.norm_sq())
    }

    pub fn to_complex(&self) -> Complex64 {
        let ctx = Ctx::get(self.a);
        self.c
            .iter()
            .enumerate()
            .map(|(j, x)| ctx.omega(j as i64) * to_f64(x))
            .sum()
    }
}

impl std::fmt::Display for Cyc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.as_rational() {
            Some(r) => write!(f, "{}", format_rational(&r)),
            None => {
                let parts: Vec<String> = self.c.iter().map(format_rational).collect();
                write!(f, "[{}]", parts.join(";"))
            }
        }
    }
}

/// Parse either `"p/q"` or `"[c0;c1;…]"` power-basis coordinates.
pub fn parse_cyc(a: u32, s: &str) -> crate::error::Result<Cyc> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
        let c = inner.split(';').map(parse_rational).collect::<crate::error::Result<Vec<_>>>()?;
        if c.len() != Ctx::get(a).deg {
            return Err(crate::error::Error::Parse(format!("expected {} coordinates", Ctx::get(a).deg)));
        }
        Ok(Cyc { a, c })
    } else {
        Ok(Cyc::from_rational(a, parse_rational(s)?))
    }
}

/// Serialized form of a `Cyc` without its order (the envelope carries it).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycStr(pub String);

impl Serialize for CycStr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for CycStr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(CycStr(String::deserialize(d)?))
    }
}

/// Element of Z[ω_a] with machine-integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Lat {
    pub c: [i128; LAT_DIM],
}

impl Lat {
    pub const ZERO: Lat = Lat { c: [0; LAT_DIM] };

    pub fn supported(a: u32) -> bool {
        Ctx::get(a).deg <= LAT_DIM
    }

    pub fn int(v: i128) -> Lat {
        let mut z = Lat::ZERO;
        z.c[0] = v;
        z
    }

    pub fn root(ctx: &Ctx, k: i64) -> Lat {
        let k = k.rem_euclid(ctx.a as i64) as usize;
        let mut z = Lat::ZERO;
        for (t, &r) in ctx.red[k].iter().enumerate() {
            z.c[t] = r as i128;
        }
        z
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }

    #[inline]
    pub fn add(&self, o: &Lat) -> Lat {
        let mut z = *self;
        for i in 0..LAT_DIM {
            z.c[i] += o.c[i];
        }
        z
    }

    #[inline]
    pub fn sub(&self, o: &Lat) -> Lat {
        let mut z = *self;
        for i in 0..LAT_DIM {
            z.c[i] -= o.c[i];
        }
        z
    }

    #[inline]
    pub fn scale(&self, k: i128) -> Lat {
        let mut z = *self;
        for x in z.c.iter_mut() {
            *x *= k;
        }
        z
    }

    pub fn mul(&self, ctx: &Ctx, o: &Lat) -> Lat {
        let d = ctx.deg;
        let mut out = Lat::ZERO;
        for i in 0..d {
            if self.c[i] == 0 {
                continue;
            }
            for j in 0..d {
                if o.c[j] == 0 {
                    continue;
                }
                let xy = self.c[i] * o.c[j];
                for (t, &r) in ctx.red[(i + j) % ctx.a as usize].iter().enumerate() {
                    out.c[t] += xy * r as i128;
                }
            }
        }
        out
    }

    /// Multiply by ω^k.
    pub fn mul_root(&self, ctx: &Ctx, k: i64) -> Lat {
        if ctx.a == 2 {
            return if k.rem_euclid(2) == 0 { *self } else { self.scale(-1) };
        }
        self.mul(ctx, &Lat::root(ctx, k))
    }

    pub fn conj(&self, ctx: &Ctx) -> Lat {
        let a = ctx.a as usize;
        let mut out = Lat::ZERO;
        for j in 0..ctx.deg {
            if self.c[j] == 0 {
                continue;
            }
            for (t, &r) in ctx.red[(a - j) % a].iter().enumerate() {
                out.c[t] += self.c[j] * r as i128;
            }
        }
        out
    }

    /// Exact |z|² when it is an integer.
    pub fn norm_sq_exact(&self, ctx: &Ctx) -> Option<i128> {
        let c = &self.c;
        match ctx.a {
            2 => c[0].checked_mul(c[0]),
            4 => Some(c[0].checked_mul(c[0])? + c[1].checked_mul(c[1])?),
            3 => Some(c[0] * c[0] - c[0] * c[1] + c[1] * c[1]),
            6 => Some(c[0] * c[0] + c[0] * c[1] + c[1] * c[1]),
            _ => None,
        }
    }

    pub fn to_complex(&self, ctx: &Ctx) -> Complex64 {
        (0..ctx.deg).map(|j| ctx.omega(j as i64) * self.c[j] as f64).sum()
    }

    /// Integer enclosure `[lo, hi]` of `|z|·2^shift`.
    pub fn abs_scaled(&self, ctx: &Ctx, shift: u32) -> (u128, u128) {
        if ctx.a == 2 {
            let v = self.c[0].unsigned_abs() << shift;
            return (v, v);
        }
        if let Some(n2) = self.norm_sq_exact(ctx) {
            let n2 = n2 as u128;
            if n2.leading_zeros() >= 2 * shift + 1 {
                let s = n2 << (2 * shift);
                let r = s.sqrt();
                return if r * r == s { (r, r) } else { (r, r + 1) };
            }
        }
        let mut v = 0.0f64;
        let mut mag = 0.0f64;
        for j in 0..ctx.deg {
            for k in 0..ctx.deg {
                let xy = self.c[j] as f64 * self.c[k] as f64;
                v += xy * ctx.omega(j as i64 - k as i64).re;
                mag += xy.abs();
            }
        }
        let m = 1e-12 * mag + 1e-300;
        let scale = (shift as f64).exp2();
        let lo = ((v - m).max(0.0).sqrt() * scale * (1.0 - 1e-14)).floor();
        let hi = ((v + m).max(0.0).sqrt() * scale * (1.0 + 1e-14)).ceil() + 1.0;
        (lo.max(0.0) as u128, hi as u128)
    }

    pub fn to_cyc(&self, ctx: &Ctx, denom: &Rational) -> Cyc {
        let c = (0..ctx.deg)
            .map(|j| Rational::from_integer(BigInt::from(self.c[j])) / denom)
            .collect();
        Cyc { a: ctx.a, c }
    }

    /// Convert a `Cyc` whose coordinates times `denom` are integers.
    pub fn from_cyc(z: &Cyc, denom: &BigInt) -> Option<Lat> {
        let mut out = Lat::ZERO;
        for (j, x) in z.c.iter().enumerate() {
            let v = x * Rational::from_integer(denom.clone());
            if !v.is_integer() {
                return None;
            }
            out.c[j] = v.to_integer().to_i128()?;
        }
        Some(out)
    }
}
