//! Sets and functions described by finitely many base-a digits.
//!
//! A point x ∈ [0,1) is identified with its digit sequence x_0 x_1 …
//! (x_p = floor(a^{p+1} x) mod a). Under Lebesgue measure the digits are
//! independent and uniform, so a set fixed by k digits has measure a^{-k}
//! and any function of finitely many digits integrates as a plain average.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AdicCell, CellMask, Dim};
use crate::num::{inv_pow, Rational};
use crate::walsh::WalshIndex;

/// Largest digit space that dense engines will enumerate.
pub const MAX_SPACE: u64 = 1 << 22;

/// Points whose digits at the listed positions equal the listed values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern(pub Vec<(u32, u32)>);

impl Pattern {
    pub fn new(mut fixed: Vec<(u32, u32)>) -> Option<Pattern> {
        fixed.sort_unstable();
        fixed.dedup();
        if fixed.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(Pattern(fixed))
    }

    pub fn cell(a: u32, cell: &AdicCell) -> Pattern {
        Pattern((0..cell.rank).map(|p| (p, cell.digit(a, p))).collect())
    }

    /// The cell intersected with {digits nu..nu+r are all zero}.
    pub fn cell_with_zero_band(a: u32, cell: &AdicCell, nu: u32, r: u32) -> Pattern {
        let mut v = Pattern::cell(a, cell).0;
        v.extend((nu..nu + r).map(|p| (p, 0)));
        Pattern::new(v).expect("band above the cell rank")
    }

    pub fn measure(&self, a: u32) -> Rational {
        inv_pow(a, self.0.len() as u32)
    }

    pub fn matches(&self, digit: impl Fn(u32) -> u32) -> bool {
        self.0.iter().all(|&(p, d)| digit(p) == d)
    }

    pub fn positions(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().map(|&(p, _)| p)
    }

    pub fn get(&self, pos: u32) -> Option<u32> {
        self.0.binary_search_by_key(&pos, |&(p, _)| p).ok().map(|i| self.0[i].1)
    }

    pub fn intersect(&self, o: &Pattern) -> Option<Pattern> {
        let mut v = self.0.clone();
        v.extend_from_slice(&o.0);
        Pattern::new(v)
    }
}

/// Exact measure of a finite union of patterns (Shannon expansion on the
/// smallest constrained position).
pub fn union_measure(a: u32, pats: &[Pattern]) -> Rational {
    if pats.is_empty() {
        return Rational::zero();
    }
    if pats.iter().any(|p| p.0.is_empty()) {
        return Rational::one();
    }
    if pats.len() == 1 {
        return pats[0].measure(a);
    }
    let pos = pats.iter().map(|p| p.0[0].0).min().unwrap();
    let mut total = Rational::zero();
    for d in 0..a {
        let sub: Vec<Pattern> = pats
            .iter()
            .filter_map(|p| match p.get(pos) {
                Some(v) if v != d => None,
                Some(_) => Some(Pattern(p.0.iter().copied().filter(|&(q, _)| q != pos).collect())),
                None => Some(p.clone()),
            })
            .collect();
        total += union_measure(a, &sub);
    }
    total / Rational::from_integer(a.into())
}

/// E = [0,1) minus a finite union of patterns.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetMask {
    pub excluded: Vec<Pattern>,
}

impl SetMask {
    pub fn full() -> SetMask {
        SetMask::default()
    }

    pub fn measure(&self, a: u32) -> Rational {
        Rational::one() - union_measure(a, &self.excluded)
    }

    pub fn contains(&self, digit: impl Fn(u32) -> u32 + Copy) -> bool {
        !self.excluded.iter().any(|p| p.matches(digit))
    }

    pub fn intersect(&self, o: &SetMask) -> SetMask {
        let mut excluded = self.excluded.clone();
        excluded.extend(o.excluded.iter().cloned());
        SetMask { excluded }
    }

    pub fn positions(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.excluded.iter().flat_map(|p| p.positions().collect::<Vec<_>>()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Dense form; every excluded position must lie below `rank`.
    pub fn to_cell_mask(&self, a: u32, rank: u32) -> Result<CellMask> {
        if self.positions().last().is_some_and(|&p| p >= rank) {
            return Err(Error::InvalidArgument(format!("mask needs rank above {rank}")));
        }
        let mut m = CellMask::full(a, Dim::One, rank)?;
        for (i, b) in m.bits.iter_mut().enumerate() {
            *b = self.contains(|p| crate::walsh::cell_digit(a, rank, i as u64, p));
        }
        Ok(m)
    }

    pub fn from_cell_mask(m: &CellMask) -> Result<SetMask> {
        if m.dim != Dim::One {
            return Err(Error::Shape("expected a 1D mask".into()));
        }
        let excluded = m
            .bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| Pattern::cell(m.a, &AdicCell { rank: m.rank, index: i as u64 }))
            .collect();
        Ok(SetMask { excluded })
    }
}

/// E₁ × E₂.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductMask {
    pub x: SetMask,
    pub y: SetMask,
}

impl ProductMask {
    pub fn full() -> ProductMask {
        ProductMask::default()
    }

    pub fn measure(&self, a: u32) -> Rational {
        self.x.measure(a) * self.y.measure(a)
    }

    pub fn intersect(&self, o: &ProductMask) -> ProductMask {
        ProductMask { x: self.x.intersect(&o.x), y: self.y.intersect(&o.y) }
    }
}

/// Enumerable set of assignments to a sorted list of digit positions.
/// Assignment indices are mixed-radix with the first position most
/// significant, so positions 0..m give the usual rank-m cell index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitSpace {
    pub a: u32,
    pub positions: Vec<u32>,
}

impl DigitSpace {
    pub fn new(a: u32, mut positions: Vec<u32>) -> Result<DigitSpace> {
        positions.sort_unstable();
        positions.dedup();
        let ok = (a as u64).checked_pow(positions.len() as u32).is_some_and(|n| n <= MAX_SPACE);
        if !ok {
            return Err(Error::Budget(format!("digit space over {} positions too large", positions.len())));
        }
        Ok(DigitSpace { a, positions })
    }

    pub fn size(&self) -> usize {
        (self.a as usize).pow(self.positions.len() as u32)
    }

    pub fn slot(&self, pos: u32) -> Option<usize> {
        self.positions.binary_search(&pos).ok()
    }

    /// Digit values of assignment `idx`, in position order.
    pub fn digits(&self, idx: usize) -> Vec<u32> {
        let a = self.a as usize;
        let mut out = vec![0u32; self.positions.len()];
        let mut v = idx;
        for s in (0..out.len()).rev() {
            out[s] = (v % a) as u32;
            v /= a;
        }
        out
    }

    pub fn digit_fn<'s>(&'s self, ds: &'s [u32]) -> impl Fn(u32) -> u32 + Copy + 's {
        move |p| self.slot(p).map_or(0, |s| ds[s])
    }

    /// Exponent of ψ_k at every assignment.
    pub fn walsh_exponents(&self, k: &WalshIndex) -> Result<Vec<u32>> {
        let mut terms = Vec::with_capacity(k.digits.len());
        for &(p, al) in &k.digits {
            let s = self
                .slot(p)
                .ok_or_else(|| Error::InvalidArgument(format!("digit position {p} missing from space")))?;
            terms.push((s, al));
        }
        let a = self.a as usize;
        let len = self.positions.len();
        let mut out = vec![0u32; self.size()];
        let strides: Vec<usize> = (0..len).map(|s| a.pow((len - 1 - s) as u32)).collect();
        for (idx, e) in out.iter_mut().enumerate() {
            let mut acc = 0usize;
            for &(s, al) in &terms {
                acc += al as usize * ((idx / strides[s]) % a);
            }
            *e = (acc % a) as u32;
        }
        Ok(out)
    }

    pub fn membership(&self, mask: &SetMask) -> Vec<bool> {
        (0..self.size())
            .map(|i| {
                let ds = self.digits(i);
                mask.contains(self.digit_fn(&ds))
            })
            .collect()
    }

    pub fn pattern_hits(&self, p: &Pattern) -> Vec<bool> {
        (0..self.size())
            .map(|i| {
                let ds = self.digits(i);
                p.matches(self.digit_fn(&ds))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn union_measure_matches_dense_count() {
        let p1 = Pattern::new(vec![(0, 0), (3, 0)]).unwrap();
        let p2 = Pattern::new(vec![(0, 0), (1, 1)]).unwrap();
        let p3 = Pattern::new(vec![(2, 1)]).unwrap();
        let pats = vec![p1, p2, p3];
        let m = union_measure(2, &pats);
        let hits = (0..16u32).filter(|&i| pats.iter().any(|p| p.matches(|q| (i >> (3 - q)) & 1))).count();
        assert_eq!(m, rat(hits as i64, 16));
    }

    #[test]
    fn set_mask_dense_round_trip() {
        let cell = AdicCell { rank: 1, index: 1 };
        let e = SetMask { excluded: vec![Pattern::cell_with_zero_band(3, &cell, 2, 1)] };
        assert_eq!(e.measure(3), rat(8, 9));
        let dense = e.to_cell_mask(3, 3).unwrap();
        assert_eq!(dense.measure(), rat(8, 9));
        assert_eq!(SetMask::from_cell_mask(&dense).unwrap().measure(3), rat(8, 9));
    }

    #[test]
    fn walsh_exponents_agree_with_cells() {
        let sp = DigitSpace::new(3, vec![0, 1]).unwrap();
        let k = WalshIndex::new(3, 5);
        let e = sp.walsh_exponents(&k).unwrap();
        for i in 0..9 {
            assert_eq!(e[i], crate::walsh::walsh_on_cell(&k, 2, i as u64).unwrap());
        }
        assert!(DigitSpace::new(2, vec![0]).unwrap().walsh_exponents(&k).is_err());
    }
}
