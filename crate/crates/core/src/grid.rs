//! Dense step functions and cell masks on uniform a-adic grids.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cyclo::{parse_cyc, Cyc};
use crate::error::{Error, Result};
use crate::num::{format_rational, inv_pow, parse_rational, Bounds, Rational};

/// Guard against accidentally materializing huge grids.
pub const MAX_DENSE_CELLS: u64 = 1 << 24;

fn cells(a: u32, m: u32) -> Result<u64> {
    let n = (a as u64).checked_pow(m).filter(|&n| n <= MAX_DENSE_CELLS);
    n.ok_or_else(|| Error::InvalidArgument(format!("grid a={a} rank={m} too large to materialize")))
}

/// `[i/a^m, (i+1)/a^m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdicCell {
    pub rank: u32,
    pub index: u64,
}

impl AdicCell {
    pub fn new(a: u32, rank: u32, index: u64) -> Result<AdicCell> {
        let n = (a as u64).checked_pow(rank);
        if n.is_none_or(|n| index >= n) {
            return Err(Error::InvalidArgument(format!("cell index {index} out of range for rank {rank}")));
        }
        Ok(AdicCell { rank, index })
    }

    pub fn whole() -> AdicCell {
        AdicCell { rank: 0, index: 0 }
    }

    pub fn measure(&self, a: u32) -> Rational {
        inv_pow(a, self.rank)
    }

    /// Digit at `pos` fixed by the cell (positions below the rank).
    pub fn digit(&self, a: u32, pos: u32) -> u32 {
        crate::walsh::cell_digit(a, self.rank, self.index, pos)
    }

    pub fn contains(&self, a: u32, other: &AdicCell) -> bool {
        other.rank >= self.rank && other.index / (a as u64).pow(other.rank - self.rank) == self.index
    }

    pub fn disjoint(&self, a: u32, other: &AdicCell) -> bool {
        !self.contains(a, other) && !other.contains(a, self)
    }

    /// Sub-cells of the next rank.
    pub fn children(&self, a: u32) -> Vec<AdicCell> {
        (0..a as u64).map(|k| AdicCell { rank: self.rank + 1, index: self.index * a as u64 + k }).collect()
    }

    pub fn refine_to(&self, a: u32, m: u32) -> impl Iterator<Item = AdicCell> {
        let span = (a as u64).pow(m - self.rank);
        let base = self.index * span;
        (0..span).map(move |k| AdicCell { rank: m, index: base + k })
    }

    pub fn left(&self, a: u32) -> Rational {
        Rational::new(BigInt::from(self.index), BigInt::from(a).pow(self.rank))
    }
}

/// Product of two a-adic intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x: AdicCell,
    pub y: AdicCell,
}

impl Rect {
    pub fn measure(&self, a: u32) -> Rational {
        self.x.measure(a) * self.y.measure(a)
    }

    pub fn disjoint(&self, a: u32, o: &Rect) -> bool {
        self.x.disjoint(a, &o.x) || self.y.disjoint(a, &o.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Dim {
    fn exp(self) -> u32 {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

/// Function constant on every rank-m cell; 2D values are row-major with
/// the x cell as the row.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    pub a: u32,
    pub dim: Dim,
    pub rank: u32,
    pub values: Vec<Cyc>,
}

impl StepFunction {
    pub fn constant(a: u32, dim: Dim, rank: u32, v: Cyc) -> Result<StepFunction> {
        let n = cells(a, rank * dim.exp())?;
        Ok(StepFunction { a, dim, rank, values: vec![v; n as usize] })
    }

    pub fn zero(a: u32, dim: Dim) -> StepFunction {
        StepFunction { a, dim, rank: 0, values: vec![Cyc::zero(a)] }
    }

    pub fn from_values(a: u32, dim: Dim, rank: u32, values: Vec<Cyc>) -> Result<StepFunction> {
        let n = cells(a, rank * dim.exp())?;
        if values.len() as u64 != n {
            return Err(Error::Shape(format!("expected {n} values, got {}", values.len())));
        }
        Ok(StepFunction { a, dim, rank, values })
    }

    pub fn from_rationals(a: u32, dim: Dim, rank: u32, values: Vec<Rational>) -> Result<StepFunction> {
        Self::from_values(a, dim, rank, values.into_iter().map(|r| Cyc::from_rational(a, r)).collect())
    }

    pub fn side(&self) -> u64 {
        (self.a as u64).pow(self.rank)
    }

    pub fn cell_area(&self) -> Rational {
        inv_pow(self.a, self.rank * self.dim.exp())
    }

    pub fn at(&self, i: u64) -> &Cyc {
        &self.values[i as usize]
    }

    pub fn at2(&self, i: u64, j: u64) -> &Cyc {
        &self.values[(i * self.side() + j) as usize]
    }

    pub fn refine(&self, m: u32) -> Result<StepFunction> {
        if m < self.rank {
            return Err(Error::InvalidArgument("rank too coarse".into()));
        }
        if m == self.rank {
            return Ok(self.clone());
        }
        let span = (self.a as u64).pow(m - self.rank);
        let side = self.side();
        let new_side = side * span;
        let n = cells(self.a, m * self.dim.exp())?;
        let values = (0..n)
            .map(|k| match self.dim {
                Dim::One => self.values[(k / span) as usize].clone(),
                Dim::Two => {
                    let (i, j) = (k / new_side, k % new_side);
                    self.values[((i / span) * side + j / span) as usize].clone()
                }
            })
            .collect();
        Ok(StepFunction { a: self.a, dim: self.dim, rank: m, values })
    }

    fn zip_with(&self, o: &StepFunction, f: impl Fn(&Cyc, &Cyc) -> Cyc) -> Result<StepFunction> {
        if self.a != o.a || self.dim != o.dim {
            return Err(Error::Shape("operands differ in order or dimension".into()));
        }
        let m = self.rank.max(o.rank);
        let (x, y) = (self.refine(m)?, o.refine(m)?);
        let values = x.values.iter().zip(&y.values).map(|(p, q)| f(p, q)).collect();
        Ok(StepFunction { a: self.a, dim: self.dim, rank: m, values })
    }

    pub fn add(&self, o: &StepFunction) -> Result<StepFunction> {
        self.zip_with(o, Cyc::add)
    }

    pub fn sub(&self, o: &StepFunction) -> Result<StepFunction> {
        self.zip_with(o, Cyc::sub)
    }

    pub fn mul(&self, o: &StepFunction) -> Result<StepFunction> {
        self.zip_with(o, Cyc::mul)
    }

    pub fn scale(&self, k: &Rational) -> StepFunction {
        StepFunction { values: self.values.iter().map(|v| v.scale(k)).collect(), ..self.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Cyc::is_zero)
    }

    /// Real values, if every value is rational.
    pub fn real_values(&self) -> Option<Vec<Rational>> {
        self.values.iter().map(Cyc::as_rational).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StepFunctionJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<StepFunction> {
        serde_json::from_str::<StepFunctionJson>(s)?.try_into()
    }
}

/// Value 1 on the cell, 0 elsewhere, at rank `m`.
pub fn indicator(a: u32, cell: &AdicCell, m: u32) -> Result<StepFunction> {
    if m < cell.rank {
        return Err(Error::InvalidArgument("rank too coarse".into()));
    }
    let mut f = StepFunction::constant(a, Dim::One, m, Cyc::zero(a))?;
    for c in cell.refine_to(a, m) {
        f.values[c.index as usize] = Cyc::one(a);
    }
    Ok(f)
}

pub fn indicator_rect(a: u32, r: &Rect, m: u32) -> Result<StepFunction> {
    tensor(&indicator(a, &r.x, m)?, &indicator(a, &r.y, m)?)
}

/// (f ⊗ g)(x, y) = f(x) g(y).
pub fn tensor(f: &StepFunction, g: &StepFunction) -> Result<StepFunction> {
    if f.a != g.a || f.dim != Dim::One || g.dim != Dim::One {
        return Err(Error::Shape("tensor needs two 1D functions of one order".into()));
    }
    let m = f.rank.max(g.rank);
    let (f, g) = (f.refine(m)?, g.refine(m)?);
    cells(f.a, 2 * m)?;
    let mut values = Vec::with_capacity(f.values.len() * g.values.len());
    for p in &f.values {
        for q in &g.values {
            values.push(p.mul(q));
        }
    }
    Ok(StepFunction { a: f.a, dim: Dim::Two, rank: m, values })
}

/// max |f| over cells.
pub fn sup_norm_c(f: &StepFunction) -> Bounds {
    f.values.iter().map(Cyc::abs).fold(Bounds::zero(), |acc, b| acc.max(&b))
}

/// Membership bitset over rank-m cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMask {
    pub a: u32,
    pub dim: Dim,
    pub rank: u32,
    pub bits: Vec<bool>,
}

impl CellMask {
    pub fn full(a: u32, dim: Dim, rank: u32) -> Result<CellMask> {
        Ok(CellMask { a, dim, rank, bits: vec![true; cells(a, rank * dim.exp())? as usize] })
    }

    pub fn measure(&self) -> Rational {
        let n = self.bits.iter().filter(|&&b| b).count();
        Rational::from_integer(n.into()) * inv_pow(self.a, self.rank * self.dim.exp())
    }

    pub fn complement(&self) -> CellMask {
        CellMask { bits: self.bits.iter().map(|b| !b).collect(), ..self.clone() }
    }

    pub fn refine(&self, m: u32) -> Result<CellMask> {
        let f = StepFunction::from_rationals(
            self.a,
            self.dim,
            self.rank,
            self.bits.iter().map(|&b| if b { Rational::one() } else { Rational::zero() }).collect(),
        )?
        .refine(m)?;
        Ok(CellMask { a: self.a, dim: self.dim, rank: m, bits: f.values.iter().map(|v| !v.is_zero()).collect() })
    }

    pub fn intersect(&self, o: &CellMask) -> Result<CellMask> {
        if self.a != o.a || self.dim != o.dim {
            return Err(Error::Shape("masks differ in order or dimension".into()));
        }
        let m = self.rank.max(o.rank);
        let (x, y) = (self.refine(m)?, o.refine(m)?);
        Ok(CellMask { bits: x.bits.iter().zip(&y.bits).map(|(p, q)| *p && *q).collect(), ..x })
    }

    pub fn product(e1: &CellMask, e2: &CellMask) -> Result<CellMask> {
        let m = e1.rank.max(e2.rank);
        let (x, y) = (e1.refine(m)?, e2.refine(m)?);
        cells(e1.a, 2 * m)?;
        let bits = x.bits.iter().flat_map(|&p| y.bits.iter().map(move |&q| p && q)).collect();
        Ok(CellMask { a: e1.a, dim: Dim::Two, rank: m, bits })
    }

    /// Run-length encoding starting with a run of `false` cells.
    pub fn runs(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut cur = false;
        let mut len = 0u64;
        for &b in &self.bits {
            if b == cur {
                len += 1;
            } else {
                out.push(len);
                cur = b;
                len = 1;
            }
        }
        out.push(len);
        out
    }

    pub fn from_runs(a: u32, dim: Dim, rank: u32, runs: &[u64]) -> Result<CellMask> {
        let mut bits = Vec::new();
        for (k, &r) in runs.iter().enumerate() {
            bits.extend(std::iter::repeat_n(k % 2 == 1, r as usize));
        }
        if bits.len() as u64 != cells(a, rank * dim.exp())? {
            return Err(Error::Shape("run lengths do not cover the grid".into()));
        }
        Ok(CellMask { a, dim, rank, bits })
    }
}

/// Weight with values in (0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction(StepFunction);

impl WeightFunction {
    pub fn new(f: StepFunction) -> Result<WeightFunction> {
        for v in &f.values {
            match v.as_rational() {
                Some(r) if r.is_positive() && r <= Rational::one() => {}
                _ => return Err(Error::InvalidArgument(format!("weight value {v} outside (0,1]"))),
            }
        }
        Ok(WeightFunction(f))
    }

    pub fn one(a: u32, dim: Dim) -> WeightFunction {
        WeightFunction(StepFunction { a, dim, rank: 0, values: vec![Cyc::one(a)] })
    }

    pub fn function(&self) -> &StepFunction {
        &self.0
    }
}

/// ∫ |f| μ over the mask (or the whole domain).
pub fn integral_weighted_l1(f: &StepFunction, mu: &WeightFunction, mask: Option<&CellMask>) -> Result<Bounds> {
    let mu = &mu.0;
    if f.a != mu.a || f.dim != mu.dim {
        return Err(Error::Shape("function and weight differ in order or dimension".into()));
    }
    let m = f.rank.max(mu.rank).max(mask.map_or(0, |e| e.rank));
    let (f, mu) = (f.refine(m)?, mu.refine(m)?);
    let mask = mask.map(|e| e.refine(m)).transpose()?;
    let mut acc = Bounds::zero();
    for (k, (v, w)) in f.values.iter().zip(&mu.values).enumerate() {
        if mask.as_ref().is_some_and(|e| !e.bits[k]) || v.is_zero() {
            continue;
        }
        let w = w.as_rational().expect("real weight");
        acc = acc.add(&v.abs().scale(&w));
    }
    Ok(acc.scale(&f.cell_area()))
}

#[derive(Serialize, Deserialize)]
struct StepFunctionJson {
    order: u32,
    dimension: Dim,
    rank: u32,
    mode: String,
    values: Vec<String>,
}

impl From<&StepFunction> for StepFunctionJson {
    fn from(f: &StepFunction) -> Self {
        StepFunctionJson {
            order: f.a,
            dimension: f.dim,
            rank: f.rank,
            mode: "certificate".into(),
            values: f.values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

impl TryFrom<StepFunctionJson> for StepFunction {
    type Error = Error;
    fn try_from(j: StepFunctionJson) -> Result<StepFunction> {
        crate::walsh::Order::new(j.order)?;
        let values = j.values.iter().map(|s| parse_cyc(j.order, s)).collect::<Result<Vec<_>>>()?;
        StepFunction::from_values(j.order, j.dimension, j.rank, values)
    }
}

#[derive(Serialize, Deserialize)]
pub struct CellMaskJson {
    pub order: u32,
    pub dimension: Dim,
    pub rank: u32,
    pub measure: String,
    pub runs: Vec<u64>,
}

impl From<&CellMask> for CellMaskJson {
    fn from(m: &CellMask) -> Self {
        CellMaskJson {
            order: m.a,
            dimension: m.dim,
            rank: m.rank,
            measure: format_rational(&m.measure()),
            runs: m.runs(),
        }
    }
}

impl TryFrom<CellMaskJson> for CellMask {
    type Error = Error;
    fn try_from(j: CellMaskJson) -> Result<CellMask> {
        let m = CellMask::from_runs(j.order, j.dimension, j.rank, &j.runs)?;
        if parse_rational(&j.measure)? != m.measure() {
            return Err(Error::Parse("mask measure does not match its cells".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};
    use crate::walsh::{walsh_on_cell, WalshIndex};

    fn real(a: u32, rank: u32, v: &[i64]) -> StepFunction {
        StepFunction::from_rationals(a, Dim::One, rank, v.iter().map(|&x| int(x)).collect()).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let f = indicator(2, &AdicCell::new(2, 1, 0).unwrap(), 1).unwrap();
        assert_eq!(f.real_values().unwrap(), vec![int(1), int(0)]);
        let g = indicator(3, &AdicCell::new(3, 1, 1).unwrap(), 2).unwrap();
        let ones: Vec<usize> = (0..9).filter(|&k| !g.values[k].is_zero()).collect();
        assert_eq!(ones, vec![3, 4, 5]);
        let h = indicator(2, &AdicCell::whole(), 3).unwrap();
        assert!(h.values.iter().all(|v| v == &Cyc::one(2)));
        assert!(indicator(2, &AdicCell::new(2, 2, 0).unwrap(), 1).is_err());
    }

    #[test]
    fn integral_examples() {
        let one = WeightFunction::one(2, Dim::One);
        let f = real(2, 0, &[1]);
        assert_eq!(integral_weighted_l1(&f, &one, None).unwrap(), Bounds::exact(int(1)));
        let f = real(2, 2, &[1, 0, 0, 0]);
        let half = WeightFunction::new(StepFunction::from_rationals(2, Dim::One, 0, vec![rat(1, 2)]).unwrap()).unwrap();
        assert_eq!(integral_weighted_l1(&f, &half, None).unwrap(), Bounds::exact(rat(1, 8)));
        let f = real(3, 1, &[3, -3, 0]);
        let one3 = WeightFunction::one(3, Dim::One);
        assert_eq!(integral_weighted_l1(&f, &one3, None).unwrap(), Bounds::exact(int(2)));
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(sup_norm_c(&real(2, 1, &[0, 0])), Bounds::exact(int(0)));
        assert_eq!(sup_norm_c(&real(2, 2, &[2, 0, -1, 0])), Bounds::exact(int(2)));
        let idx = WalshIndex::new(3, 5);
        let vals = (0..9).map(|i| Cyc::root(3, walsh_on_cell(&idx, 2, i).unwrap() as i64)).collect();
        let psi = StepFunction::from_values(3, Dim::One, 2, vals).unwrap();
        assert_eq!(sup_norm_c(&psi), Bounds::exact(int(1)));
    }

    #[test]
    fn tensor_examples() {
        let f = indicator(2, &AdicCell::new(2, 1, 0).unwrap(), 1).unwrap();
        let g = indicator(2, &AdicCell::new(2, 1, 1).unwrap(), 1).unwrap();
        let t = tensor(&f, &g).unwrap();
        let nz: Vec<usize> = (0..4).filter(|&k| !t.values[k].is_zero()).collect();
        assert_eq!(nz, vec![1]);
    }

    #[test]
    fn mask_runs_round_trip() {
        let m = CellMask::from_runs(2, Dim::One, 3, &[2, 3, 1, 2]).unwrap();
        assert_eq!(m.measure(), rat(5, 8));
        let j = CellMaskJson::from(&m);
        assert_eq!(CellMask::try_from(j).unwrap(), m);
        let e = CellMask::product(&m, &m.complement()).unwrap();
        assert_eq!(e.measure(), rat(15, 64));
    }

    #[test]
    fn step_function_json_round_trip() {
        let v = vec![Cyc::root(3, 1), Cyc::from_rational(3, rat(-2, 3)), Cyc::zero(3)];
        let f = StepFunction::from_values(3, Dim::One, 1, v).unwrap();
        assert_eq!(StepFunction::from_json(&f.to_json().unwrap()).unwrap(), f);
    }
}
