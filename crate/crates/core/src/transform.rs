//! Chrestenson transforms, coefficient blocks and partial sums.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cyclo::{parse_cyc, Cyc};
use crate::error::{Error, Result};
use crate::grid::{AdicCell, Dim, StepFunction};
use crate::num::{
    format_rational, int, inv_pow, pow_bounds, pow_u, Bounds, Rational,
};
use crate::walsh::{base_digits, cell_digit, decompose_index, Order, WalshIndex};

/// Scalars the transforms can run over.
pub trait Field: Clone {
    fn zero(a: u32) -> Self;
    fn add(&self, o: &Self) -> Self;
    /// self · ω_a^k
    fn mul_root(&self, a: u32, k: i64) -> Self;
    fn div_int(&self, n: u64) -> Self;
}

impl Field for Cyc {
    fn zero(a: u32) -> Self {
        Cyc::zero(a)
    }
    fn add(&self, o: &Self) -> Self {
        Cyc::add(self, o)
    }
    fn mul_root(&self, _a: u32, k: i64) -> Self {
        Cyc::mul_root(self, k)
    }
    fn div_int(&self, n: u64) -> Self {
        self.scale(&Rational::new(1.into(), n.into()))
    }
}

impl Field for Complex64 {
    fn zero(_a: u32) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul_root(&self, a: u32, k: i64) -> Self {
        self * crate::cyclo::Ctx::get(a).omega(k)
    }
    fn div_int(&self, n: u64) -> Self {
        self / n as f64
    }
}

fn rank_of_len(a: u32, len: usize) -> Result<u32> {
    let mut m = 0;
    let mut n = 1usize;
    while n < len {
        n *= a as usize;
        m += 1;
    }
    if n != len {
        return Err(Error::Shape(format!("length {len} is not a power of {a}")));
    }
    Ok(m)
}

/// Index of ψ_n in spectrum order for the slot j produced by digit-wise
/// butterflies: digit p of n sits at stride a^{m-1-p} of j.
fn digit_reverse(a: u32, m: u32, j: usize) -> usize {
    let mut n = 0usize;
    let mut j = j;
    for _ in 0..m {
        n = n * a as usize + j % a as usize;
        j /= a as usize;
    }
    n
}

fn butterflies<F: Field>(a: u32, m: u32, v: &mut [F], sign: i64) {
    let au = a as usize;
    let mut buf = vec![F::zero(a); au];
    for p in 0..m {
        let stride = au.pow(m - 1 - p);
        let block = stride * au;
        for base in (0..v.len()).step_by(block) {
            for off in 0..stride {
                for (k, slot) in buf.iter_mut().enumerate() {
                    let mut acc = F::zero(a);
                    for t in 0..au {
                        let x = &v[base + off + t * stride];
                        acc = acc.add(&x.mul_root(a, sign * (k * t) as i64));
                    }
                    *slot = acc;
                }
                for (k, x) in buf.iter().enumerate() {
                    v[base + off + k * stride] = x.clone();
                }
            }
        }
    }
}

/// c_n = a^{-m} Σ_i v_i conj ψ_n(cell i), via m radix-a stages.
pub fn fct_forward<F: Field>(a: u32, values: &[F]) -> Result<Vec<F>> {
    let m = rank_of_len(a, values.len())?;
    let mut v = values.to_vec();
    butterflies(a, m, &mut v, -1);
    let n = values.len() as u64;
    let mut out = vec![F::zero(a); v.len()];
    for (j, x) in v.into_iter().enumerate() {
        out[digit_reverse(a, m, j)] = x.div_int(n);
    }
    Ok(out)
}

/// v_i = Σ_n c_n ψ_n(cell i).
pub fn fct_inverse<F: Field>(a: u32, coeffs: &[F]) -> Result<Vec<F>> {
    let m = rank_of_len(a, coeffs.len())?;
    let mut v = vec![F::zero(a); coeffs.len()];
    for (j, slot) in v.iter_mut().enumerate() {
        *slot = coeffs[digit_reverse(a, m, j)].clone();
    }
    butterflies(a, m, &mut v, 1);
    Ok(v)
}

fn walsh_exp_small(a: u32, m: u32, n: usize, i: usize) -> i64 {
    let mut e = 0i64;
    let mut nn = n;
    let mut p = 0;
    while nn > 0 {
        e += (nn % a as usize) as i64 * cell_digit(a, m, i as u64, p) as i64;
        nn /= a as usize;
        p += 1;
    }
    e
}

/// Direct O(N²) evaluation of the forward transform.
pub fn fct_forward_naive<F: Field>(a: u32, values: &[F]) -> Result<Vec<F>> {
    let m = rank_of_len(a, values.len())?;
    let len = values.len();
    Ok((0..len)
        .map(|n| {
            let mut acc = F::zero(a);
            for (i, x) in values.iter().enumerate() {
                acc = acc.add(&x.mul_root(a, -walsh_exp_small(a, m, n, i)));
            }
            acc.div_int(len as u64)
        })
        .collect())
}

pub fn fct_inverse_naive<F: Field>(a: u32, coeffs: &[F]) -> Result<Vec<F>> {
    let m = rank_of_len(a, coeffs.len())?;
    let len = coeffs.len();
    Ok((0..len)
        .map(|i| {
            let mut acc = F::zero(a);
            for (n, c) in coeffs.iter().enumerate() {
                acc = acc.add(&c.mul_root(a, walsh_exp_small(a, m, n, i)));
            }
            acc
        })
        .collect())
}

/// One frequency band of the modulation scheme: the polynomial
/// −γ χ_Δ Σ_{T≠0} Π_i φ_{ν+i}^{t_i}, with Δ of rank `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandPiece {
    pub cell: AdicCell,
    #[serde(with = "crate::num::rational_str")]
    pub gamma: Rational,
    pub nu: u32,
    pub r: u32,
}

impl BandPiece {
    pub fn base(&self, a: u32) -> BigUint {
        pow_u(a, self.nu)
    }

    /// One past the largest index of the band.
    pub fn end(&self, a: u32) -> BigUint {
        pow_u(a, self.nu + self.r)
    }

    pub fn count(&self, a: u32) -> BigUint {
        (pow_u(a, self.r) - 1u32) * pow_u(a, self.cell.rank)
    }

    /// Exponent e with conj ψ_ℓ(Δ) = ω^{-e}.
    pub fn low_exponent(&self, a: u32, l: u64) -> i64 {
        let mut e = 0i64;
        let mut ll = l;
        let mut p = 0;
        while ll > 0 {
            e += (ll % a as u64) as i64 * self.cell.digit(a, p) as i64;
            ll /= a as u64;
            p += 1;
        }
        e
    }

    pub fn coeff(&self, a: u32, l: u64) -> Cyc {
        let mag = -(&self.gamma) * inv_pow(a, self.cell.rank);
        Cyc::root(a, -self.low_exponent(a, l)).scale(&mag)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coeffs1D {
    Explicit(BTreeMap<BigUint, Cyc>),
    /// Pieces sorted by band, bands disjoint.
    Bands(Vec<BandPiece>),
}

/// Sparse coefficients over the window [lo, hi].
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffBlock1D {
    pub a: u32,
    pub lo: BigUint,
    pub hi: BigUint,
    pub coeffs: Coeffs1D,
}

impl CoeffBlock1D {
    pub fn empty(a: u32, lo: BigUint, hi: BigUint) -> CoeffBlock1D {
        CoeffBlock1D { a, lo, hi, coeffs: Coeffs1D::Explicit(BTreeMap::new()) }
    }

    pub fn explicit(a: u32, lo: BigUint, hi: BigUint, map: BTreeMap<BigUint, Cyc>) -> Result<CoeffBlock1D> {
        let b = CoeffBlock1D { a, lo, hi, coeffs: Coeffs1D::Explicit(map) };
        b.validate()?;
        Ok(b)
    }

    pub fn bands(a: u32, lo: BigUint, hi: BigUint, pieces: Vec<BandPiece>) -> Result<CoeffBlock1D> {
        let b = CoeffBlock1D { a, lo, hi, coeffs: Coeffs1D::Bands(pieces) };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Shape(s));
        match &self.coeffs {
            Coeffs1D::Explicit(m) => {
                if let (Some((k0, _)), Some((k1, _))) = (m.first_key_value(), m.last_key_value()) {
                    if k0 < &self.lo || k1 > &self.hi {
                        return bad(format!("coefficient index outside window [{}, {}]", self.lo, self.hi));
                    }
                }
            }
            Coeffs1D::Bands(ps) => {
                let mut prev_end = BigUint::zero();
                for p in ps {
                    if p.r == 0 || p.nu < p.cell.rank || p.base(self.a) < prev_end {
                        return bad("bands overlap or collide with cell spectra".into());
                    }
                    prev_end = p.end(self.a);
                }
                if let (Some(f), Some(l)) = (ps.first(), ps.last()) {
                    if f.base(self.a) < self.lo || l.end(self.a) - 1u32 > self.hi {
                        return bad(format!("band outside window [{}, {}]", self.lo, self.hi));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        match &self.coeffs {
            Coeffs1D::Explicit(m) => m.values().all(Cyc::is_zero),
            Coeffs1D::Bands(ps) => ps.iter().all(|p| p.gamma.is_zero()),
        }
    }

    /// Number of stored coefficients.
    pub fn count(&self) -> BigUint {
        match &self.coeffs {
            Coeffs1D::Explicit(m) => BigUint::from(m.len()),
            Coeffs1D::Bands(ps) => ps.iter().map(|p| p.count(self.a)).sum(),
        }
    }

    /// Coefficients in increasing index order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (BigUint, Cyc)> + '_> {
        let a = self.a;
        match &self.coeffs {
            Coeffs1D::Explicit(m) => Box::new(m.iter().map(|(k, v)| (k.clone(), v.clone()))),
            Coeffs1D::Bands(ps) => Box::new(ps.iter().flat_map(move |p| {
                let low = (a as u64).pow(p.cell.rank);
                let tuples = (a as u64).pow(p.r);
                let base = p.base(a);
                (1..tuples).flat_map(move |t| {
                    let head = &base * t;
                    (0..low).map(move |l| (&head + l, p.coeff(a, l)))
                })
            })),
        }
    }

    pub fn get(&self, k: &BigUint) -> Cyc {
        match &self.coeffs {
            Coeffs1D::Explicit(m) => m.get(k).cloned().unwrap_or_else(|| Cyc::zero(self.a)),
            Coeffs1D::Bands(ps) => {
                for p in ps {
                    if k >= &p.base(self.a) && k < &p.end(self.a) {
                        let low = pow_u(self.a, p.cell.rank);
                        let l = (k % &p.base(self.a)).to_u64().unwrap();
                        let t = k / &p.base(self.a);
                        if BigUint::from(l) < low && !t.is_zero() {
                            return p.coeff(self.a, l);
                        }
                    }
                }
                Cyc::zero(self.a)
            }
        }
    }

    /// Largest stored index, if any.
    pub fn max_index(&self) -> Option<BigUint> {
        match &self.coeffs {
            Coeffs1D::Explicit(m) => m.keys().next_back().cloned(),
            Coeffs1D::Bands(ps) => ps.last().map(|p| p.end(self.a) - 1u32),
        }
    }

    pub fn min_index(&self) -> Option<BigUint> {
        match &self.coeffs {
            Coeffs1D::Explicit(m) => m.keys().next().cloned(),
            Coeffs1D::Bands(ps) => ps.first().map(|p| p.base(self.a)),
        }
    }

    /// Constancy rank of the rendered polynomial.
    pub fn rank(&self) -> u32 {
        self.max_index().map_or(0, |k| decompose_index(&k, Order::new(self.a).unwrap()).constancy_rank())
    }

    pub fn to_explicit(&self, limit: u64) -> Result<CoeffBlock1D> {
        if self.count() > BigUint::from(limit) {
            return Err(Error::Budget(format!("{} coefficients exceed the limit {limit}", self.count())));
        }
        let map = self.iter().filter(|(_, v)| !v.is_zero()).collect();
        Ok(CoeffBlock1D { a: self.a, lo: self.lo.clone(), hi: self.hi.clone(), coeffs: Coeffs1D::Explicit(map) })
    }

    /// Σ |c_k|^p; closed form for band storage.
    pub fn lp_norm(&self, p: &Rational) -> Bounds {
        match &self.coeffs {
            Coeffs1D::Explicit(m) => m
                .values()
                .filter(|v| !v.is_zero())
                .map(|v| pow_bounds(&v.abs(), p))
                .fold(Bounds::zero(), |acc, b| acc.add(&b)),
            Coeffs1D::Bands(ps) => ps
                .iter()
                .filter(|q| !q.gamma.is_zero())
                .map(|q| {
                    let mag = num_traits::Signed::abs(&q.gamma) * inv_pow(self.a, q.cell.rank);
                    let n = Rational::from_integer(q.count(self.a).into());
                    pow_bounds(&Bounds::exact(mag), p).scale(&n)
                })
                .fold(Bounds::zero(), |acc, b| acc.add(&b)),
        }
    }

    /// Dense rendering of the prefix sum through index `cutoff` at rank `m`.
    pub fn render(&self, cutoff: Option<&BigUint>, m: u32) -> Result<StepFunction> {
        if self.rank() > m && self.min_index().is_some_and(|k0| cutoff.is_none_or(|c| &k0 <= c)) {
            let need = match cutoff {
                Some(c) => self
                    .iter()
                    .take_while(|(k, _)| k <= c)
                    .map(|(k, _)| decompose_index(&k, Order::new(self.a).unwrap()).constancy_rank())
                    .max()
                    .unwrap_or(0),
                None => self.rank(),
            };
            if need > m {
                return Err(Error::InvalidArgument("rank too coarse".into()));
            }
        }
        let n = crate::grid::StepFunction::constant(self.a, Dim::One, m, Cyc::zero(self.a))?.values.len();
        let mut spec = vec![Cyc::zero(self.a); n];
        for (k, v) in self.iter() {
            if cutoff.is_some_and(|c| &k > c) {
                break;
            }
            spec[k.to_usize().unwrap()] = v;
        }
        StepFunction::from_values(self.a, Dim::One, m, fct_inverse(self.a, &spec)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,re,im,value\n");
        for (k, v) in self.iter() {
            let c = v.to_complex();
            writeln!(s, "{k},{:e},{:e},{v}", c.re, c.im).unwrap();
        }
        s
    }

    pub fn from_csv(a: u32, lo: BigUint, hi: BigUint, csv: &str) -> Result<CoeffBlock1D> {
        let mut map = BTreeMap::new();
        for line in csv.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("bad coefficient row {line:?}")));
            }
            let k = BigUint::from_str(cols[0]).map_err(|e| Error::Parse(e.to_string()))?;
            map.insert(k, parse_cyc(a, cols[3])?);
        }
        CoeffBlock1D::explicit(a, lo, hi, map)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CoeffsJson {
    Explicit { entries: Vec<(String, String)> },
    Bands { pieces: Vec<BandPiece> },
}

#[derive(Serialize, Deserialize)]
pub struct CoeffBlock1DJson {
    order: u32,
    lo: String,
    hi: String,
    #[serde(flatten)]
    coeffs: CoeffsJson,
}

impl Serialize for CoeffBlock1D {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = match &self.coeffs {
            Coeffs1D::Explicit(m) => {
                CoeffsJson::Explicit { entries: m.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
            }
            Coeffs1D::Bands(ps) => CoeffsJson::Bands { pieces: ps.clone() },
        };
        CoeffBlock1DJson { order: self.a, lo: self.lo.to_string(), hi: self.hi.to_string(), coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoeffBlock1D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = CoeffBlock1DJson::deserialize(d)?;
        Order::new(j.order).map_err(D::Error::custom)?;
        let big = |s: &str| BigUint::from_str(s).map_err(D::Error::custom);
        let (lo, hi) = (big(&j.lo)?, big(&j.hi)?);
        let b = match j.coeffs {
            CoeffsJson::Explicit { entries } => {
                let mut map = BTreeMap::new();
                for (k, v) in entries {
                    map.insert(big(&k)?, parse_cyc(j.order, &v).map_err(D::Error::custom)?);
                }
                CoeffBlock1D::explicit(j.order, lo, hi, map)
            }
            CoeffsJson::Bands { pieces } => CoeffBlock1D::bands(j.order, lo, hi, pieces),
        };
        b.map_err(D::Error::custom)
    }
}

/// γ · a_k · b_s over the row and column windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1Term {
    #[serde(with = "crate::num::rational_str")]
    pub gamma: Rational,
    pub rows: CoeffBlock1D,
    pub cols: CoeffBlock1D,
}

/// Sum of rank-1 terms plus optional explicit corrections.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffBlock2D {
    pub order: u32,
    pub lo: BigUint,
    pub hi: BigUint,
    pub terms: Vec<Rank1Term>,
    pub explicit: BTreeMap<(BigUint, BigUint), Cyc>,
}

#[derive(Serialize, Deserialize)]
struct CoeffBlock2DJson {
    order: u32,
    lo: String,
    hi: String,
    terms: Vec<Rank1Term>,
    #[serde(default)]
    explicit: Vec<(String, String, String)>,
}

impl Serialize for CoeffBlock2D {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CoeffBlock2DJson {
            order: self.order,
            lo: self.lo.to_string(),
            hi: self.hi.to_string(),
            terms: self.terms.clone(),
            explicit: self.explicit.iter().map(|((k, n), c)| (k.to_string(), n.to_string(), c.to_string())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoeffBlock2D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = CoeffBlock2DJson::deserialize(d)?;
        Order::new(j.order).map_err(D::Error::custom)?;
        let big = |s: &str| BigUint::from_str(s).map_err(D::Error::custom);
        let mut explicit = BTreeMap::new();
        for (k, n, c) in &j.explicit {
            explicit.insert((big(k)?, big(n)?), parse_cyc(j.order, c).map_err(D::Error::custom)?);
        }
        Ok(CoeffBlock2D { order: j.order, lo: big(&j.lo)?, hi: big(&j.hi)?, terms: j.terms, explicit })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartialSumSpec {
    Rectangular {
        #[serde(with = "crate::num::biguint_str")]
        n: BigUint,
        #[serde(with = "crate::num::biguint_str")]
        m: BigUint,
    },
    Spherical {
        #[serde(with = "crate::num::rational_str")]
        r2: Rational,
    },
    Prefix {
        #[serde(with = "crate::num::biguint_str")]
        m: BigUint,
    },
}

impl PartialSumSpec {
    pub fn selects(&self, k: &BigUint, nu: &BigUint) -> bool {
        match self {
            PartialSumSpec::Rectangular { n, m } => k <= n && nu <= m,
            PartialSumSpec::Spherical { r2 } => Rational::from_integer((k * k + nu * nu).into()) <= *r2,
            PartialSumSpec::Prefix { m } => k <= m,
        }
    }
}

/// Largest s with s² ≤ x for rational x ≥ 0.
pub fn isqrt_rational(x: &Rational) -> BigUint {
    if x <= &Rational::zero() {
        return BigUint::zero();
    }
    let fl = x.floor().to_integer();
    fl.to_biguint().unwrap().sqrt()
}

impl CoeffBlock2D {
    pub fn empty(order: u32, lo: BigUint, hi: BigUint) -> CoeffBlock2D {
        CoeffBlock2D { order, lo, hi, terms: Vec::new(), explicit: BTreeMap::new() }
    }

    pub fn coeff(&self, k: &BigUint, s: &BigUint) -> Cyc {
        let mut c = self.explicit.get(&(k.clone(), s.clone())).cloned().unwrap_or_else(|| Cyc::zero(self.order));
        for t in &self.terms {
            let x = t.rows.get(k);
            if x.is_zero() {
                continue;
            }
            c = c.add(&x.mul(&t.cols.get(s)).scale(&t.gamma));
        }
        c
    }

    /// All nonzero coefficients, summed over terms.
    pub fn materialize(&self, limit: u64) -> Result<BTreeMap<(BigUint, BigUint), Cyc>> {
        let mut out: BTreeMap<(BigUint, BigUint), Cyc> = BTreeMap::new();
        let mut n = 0u64;
        for t in &self.terms {
            let cols: Vec<(BigUint, Cyc)> = t.cols.iter().collect();
            for (k, x) in t.rows.iter() {
                let xg = x.scale(&t.gamma);
                for (s, y) in &cols {
                    n += 1;
                    if n > limit {
                        return Err(Error::Budget(format!("more than {limit} coefficients")));
                    }
                    let e = out.entry((k.clone(), s.clone())).or_insert_with(|| Cyc::zero(self.order));
                    *e = e.add(&xg.mul(y));
                }
            }
        }
        for (key, v) in &self.explicit {
            let e = out.entry(key.clone()).or_insert_with(|| Cyc::zero(self.order));
            *e = e.add(v);
        }
        out.retain(|_, v| !v.is_zero());
        Ok(out)
    }

    fn term_windows_disjoint(&self) -> bool {
        let span = |b: &CoeffBlock1D| b.min_index().zip(b.max_index());
        for (i, s) in self.terms.iter().enumerate() {
            for t in &self.terms[i + 1..] {
                let (Some(sr), Some(sc), Some(tr), Some(tc)) = (span(&s.rows), span(&s.cols), span(&t.rows), span(&t.cols))
                else {
                    continue;
                };
                let rows_meet = sr.0 <= tr.1 && tr.0 <= sr.1;
                let cols_meet = sc.0 <= tc.1 && tc.0 <= sc.1;
                if rows_meet && cols_meet {
                    return false;
                }
            }
        }
        true
    }

    /// Render the selected terms on a rank-m grid without forming the dense
    /// coefficient matrix.
    pub fn render_partial_sum(&self, spec: &PartialSumSpec, m: u32) -> Result<StepFunction> {
        let a = self.order;
        let mut acc = StepFunction::constant(a, Dim::Two, m, Cyc::zero(a))?;
        let side = (a as u64).pow(m) as usize;
        for t in &self.terms {
            match spec {
                PartialSumSpec::Rectangular { n, m: mm } => {
                    let x = t.rows.render(Some(n), m)?;
                    let y = t.cols.render(Some(mm), m)?;
                    add_outer(&mut acc, &x, &y, &t.gamma, side);
                }
                PartialSumSpec::Prefix { m: mm } => {
                    let x = t.rows.render(Some(mm), m)?;
                    let y = t.cols.render(None, m)?;
                    add_outer(&mut acc, &x, &y, &t.gamma, side);
                }
                PartialSumSpec::Spherical { r2 } => {
                    for (k, ak) in t.rows.iter() {
                        let k2 = Rational::from_integer((&k * &k).into());
                        if k2 > *r2 {
                            break;
                        }
                        let smax = isqrt_rational(&(r2 - k2));
                        let mut single = CoeffBlock1D::empty(a, k.clone(), k.clone());
                        if let Coeffs1D::Explicit(mp) = &mut single.coeffs {
                            mp.insert(k.clone(), ak);
                        }
                        let x = single.render(None, m)?;
                        let y = t.cols.render(Some(&smax), m)?;
                        add_outer(&mut acc, &x, &y, &t.gamma, side);
                    }
                }
            }
        }
        for ((k, s), v) in &self.explicit {
            let sel = match spec {
                PartialSumSpec::Prefix { m } => k <= m,
                other => other.selects(k, s),
            };
            if !sel {
                continue;
            }
            let one = |i: &BigUint, c: Cyc| -> Result<StepFunction> {
                let mut mp = BTreeMap::new();
                mp.insert(i.clone(), c);
                CoeffBlock1D::explicit(a, i.clone(), i.clone(), mp)?.render(None, m)
            };
            let x = one(k, v.clone())?;
            let y = one(s, Cyc::one(a))?;
            add_outer(&mut acc, &x, &y, &Rational::one(), side);
        }
        Ok(acc)
    }

    /// Σ |c_{k,s}|^p; product formula per term when windows are disjoint.
    pub fn lp_coefficient_norm(&self, p: &Rational, materialize_limit: Option<u64>) -> Result<Bounds> {
        if p < &int(1) {
            return Err(Error::InvalidArgument("exponent must be at least 1".into()));
        }
        if self.explicit.is_empty() && self.term_windows_disjoint() {
            let mut acc = Bounds::zero();
            for t in &self.terms {
                let g = pow_bounds(&Bounds::exact(num_traits::Signed::abs(&t.gamma)), p);
                acc = acc.add(&g.mul_nonneg(&t.rows.lp_norm(p)).mul_nonneg(&t.cols.lp_norm(p)));
            }
            return Ok(acc);
        }
        let Some(limit) = materialize_limit else {
            return Err(Error::InvalidArgument("overlapping term windows; materialization required".into()));
        };
        Ok(self
            .materialize(limit)?
            .values()
            .map(|v| pow_bounds(&v.abs(), p))
            .fold(Bounds::zero(), |acc, b| acc.add(&b)))
    }

    pub fn to_csv(&self, limit: u64) -> Result<String> {
        let mut s = String::from("k,nu,re,im,value\n");
        for ((k, n), v) in self.materialize(limit)? {
            let c = v.to_complex();
            writeln!(s, "{k},{n},{:e},{:e},{v}", c.re, c.im).unwrap();
        }
        Ok(s)
    }

    pub fn from_csv(order: u32, lo: BigUint, hi: BigUint, csv: &str) -> Result<CoeffBlock2D> {
        let mut explicit = BTreeMap::new();
        for line in csv.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Parse(format!("bad coefficient row {line:?}")));
            }
            let k = BigUint::from_str(cols[0]).map_err(|e| Error::Parse(e.to_string()))?;
            let n = BigUint::from_str(cols[1]).map_err(|e| Error::Parse(e.to_string()))?;
            explicit.insert((k, n), parse_cyc(order, cols[4])?);
        }
        Ok(CoeffBlock2D { order, lo, hi, terms: Vec::new(), explicit })
    }
}

fn add_outer(acc: &mut StepFunction, x: &StepFunction, y: &StepFunction, g: &Rational, side: usize) {
    for (i, xv) in x.values.iter().enumerate() {
        if xv.is_zero() {
            continue;
        }
        let xg = xv.scale(g);
        for (j, yv) in y.values.iter().enumerate() {
            if !yv.is_zero() {
                acc.values[i * side + j].add_assign(&xg.mul(yv));
            }
        }
    }
}

/// Standalone coefficient norm entry point.
pub fn lp_coefficient_norm(block: &CoeffBlock2D, p: &Rational) -> Result<Bounds> {
    block.lp_coefficient_norm(p, None)
}

/// Render ψ_n on a rank-m grid.
pub fn render_walsh(a: u32, n: u64, m: u32) -> Result<StepFunction> {
    let idx = WalshIndex::new(a, n);
    let vals = (0..(a as u64).pow(m))
        .map(|i| crate::walsh::walsh_on_cell(&idx, m, i).map(|e| Cyc::root(a, e as i64)))
        .collect::<Result<Vec<_>>>()?;
    StepFunction::from_values(a, Dim::One, m, vals)
}

/// Base-a digits of n, used to report index structure.
pub fn index_digits(a: u32, n: &BigUint) -> Vec<u32> {
    base_digits(a, n)
}

pub fn format_bounds_pair(b: &Bounds) -> (String, String) {
    (format_rational(&b.lo), format_rational(&b.hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn rv(a: u32, xs: &[i64]) -> Vec<Cyc> {
        xs.iter().map(|&x| Cyc::from_rational(a, int(x))).collect()
    }

    #[test]
    fn constant_vector_transforms_to_delta() {
        let c = fct_forward(3, &rv(3, &[1; 9])).unwrap();
        assert_eq!(c[0], Cyc::one(3));
        assert!(c[1..].iter().all(Cyc::is_zero));
    }

    #[test]
    fn walsh_rendering_is_a_unit_vector() {
        let v = render_walsh(2, 7, 3).unwrap().values;
        let c = fct_forward(2, &v).unwrap();
        for (n, x) in c.iter().enumerate() {
            assert_eq!(x.is_zero(), n != 7);
        }
        assert_eq!(c[7], Cyc::one(2));
    }

    #[test]
    fn inverse_examples() {
        let mut c = vec![Cyc::zero(3); 9];
        c[0] = Cyc::from_rational(3, rat(5, 2));
        assert!(fct_inverse(3, &c).unwrap().iter().all(|v| v == &c[0]));
        let mut c = vec![Cyc::zero(3); 9];
        c[5] = Cyc::one(3);
        assert_eq!(fct_inverse(3, &c).unwrap(), render_walsh(3, 5, 2).unwrap().values);
    }

    #[test]
    fn fast_matches_naive_exactly() {
        let v: Vec<Cyc> = (0..27).map(|i| Cyc::root(3, i).scale(&rat(i + 1, 7))).collect();
        assert_eq!(fct_forward(3, &v).unwrap(), fct_forward_naive(3, &v).unwrap());
        let c = fct_forward(3, &v).unwrap();
        assert_eq!(fct_inverse(3, &c).unwrap(), v);
        assert_eq!(fct_inverse_naive(3, &c).unwrap(), v);
    }

    #[test]
    fn bad_length_is_an_error() {
        assert!(fct_forward(2, &rv(2, &[1, 2, 3])).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let mut m = BTreeMap::new();
        m.insert(BigUint::from(3u32), Cyc::from_rational(2, rat(1, 2)));
        let b = CoeffBlock1D::explicit(2, 1u32.into(), 4u32.into(), m).unwrap();
        assert_eq!(b.lp_norm(&int(2)), Bounds::exact(rat(1, 4)));

        let ones = |lo: u32| {
            let mut m = BTreeMap::new();
            m.insert(BigUint::from(lo), Cyc::one(2));
            m.insert(BigUint::from(lo + 1), Cyc::one(2));
            CoeffBlock1D::explicit(2, lo.into(), (lo + 1).into(), m).unwrap()
        };
        let blk = CoeffBlock2D {
            order: 2,
            lo: 1u32.into(),
            hi: 8u32.into(),
            terms: vec![Rank1Term { gamma: int(1), rows: ones(1), cols: ones(5) }],
            explicit: BTreeMap::new(),
        };
        assert_eq!(lp_coefficient_norm(&blk, &int(2)).unwrap(), Bounds::exact(int(4)));
    }

    #[test]
    fn spherical_selection_at_two() {
        let spec = PartialSumSpec::Spherical { r2: int(2) };
        let one = BigUint::one();
        let two = BigUint::from(2u32);
        assert!(spec.selects(&one, &one));
        assert!(!spec.selects(&one, &two));
        assert!(!spec.selects(&two, &one));
    }

    #[test]
    fn band_iteration_matches_lookup() {
        let p = BandPiece { cell: AdicCell { rank: 1, index: 1 }, gamma: rat(1, 2), nu: 2, r: 1 };
        let b = CoeffBlock1D::bands(3, 3u32.into(), 26u32.into(), vec![p]).unwrap();
        let all: Vec<_> = b.iter().collect();
        assert_eq!(all.len(), 6);
        assert_eq!(BigUint::from(all.len()), b.count());
        for (k, v) in &all {
            assert_eq!(&b.get(k), v);
        }
        assert!(all.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
