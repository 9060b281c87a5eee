//! Universal double series: an enumeration of rational step functions,
//! block-by-block assembly, weight synthesis, greedy subseries selection
//! and partial-sum monitoring.
//!
//! Every object here (targets, blocks, exceptional sets, the weight) is a
//! finite combination of indicators of digit patterns, so all integrals
//! are exact sums over the atoms generated by those patterns.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::approx2d::{lemma35_construct, lemma35_verify, Lemma35Options, Lemma35Request, Lemma35Result, Piece2D, Schedule};
use crate::cert::{Certificate, Relation};
use crate::digits::{Pattern, ProductMask, SetMask};
use crate::error::{Error, Result};
use crate::grid::{AdicCell, Dim, Rect, StepFunction};
use crate::num::{int, inv_pow, pow_u, Bounds, Rational};
use crate::transform::{CoeffBlock1D, CoeffBlock2D, Coeffs1D};
use crate::walsh::Order;

/// Height of p/q in lowest terms: max(|p|, q).
pub fn height(v: &Rational) -> BigUint {
    let p = v.numer().magnitude().clone();
    let q = v.denom().magnitude().clone();
    p.max(q)
}

/// Nonzero rationals of height exactly `h` with denominator at most `d_max`,
/// ordered by denominator, then numerator, positive before negative.
pub fn values_of_height(h: u32, d_max: u32) -> Vec<Rational> {
    let mut out = Vec::new();
    for q in 1..=h.min(d_max) {
        let nums: Vec<u32> = if q < h { vec![h] } else { (1..=h).collect() };
        for p in nums {
            if p.gcd(&q) == 1 {
                let v = Rational::new(p.into(), q.into());
                out.push(v.clone());
                out.push(-v);
            }
        }
    }
    out
}

/// Nonzero cells of a 2D step function on the rank-`rank` grid. Cell `i`
/// is the rectangle with x-index i / a^rank and y-index i mod a^rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseStep {
    pub order: u32,
    pub rank: u32,
    pub cells: Vec<SparseCell>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseCell {
    pub index: u64,
    #[serde(with = "crate::num::rational_str")]
    pub value: Rational,
}

impl SparseStep {
    pub fn zero(order: u32, rank: u32) -> SparseStep {
        SparseStep { order, rank, cells: Vec::new() }
    }

    pub fn side(&self) -> u64 {
        (self.order as u64).pow(self.rank)
    }

    pub fn rect(&self, index: u64) -> Rect {
        let side = self.side();
        Rect { x: AdicCell { rank: self.rank, index: index / side }, y: AdicCell { rank: self.rank, index: index % side } }
    }

    pub fn pieces(&self) -> Vec<Piece2D> {
        self.cells.iter().map(|c| Piece2D { rect: self.rect(c.index), gamma: c.value.clone() }).collect()
    }

    pub fn sup_norm(&self) -> Rational {
        self.cells.iter().map(|c| c.value.abs()).max().unwrap_or_else(Rational::zero)
    }

    pub fn to_step_function(&self) -> Result<StepFunction> {
        let n = self.side() * self.side();
        let mut vals = vec![Rational::zero(); n as usize];
        for c in &self.cells {
            vals[c.index as usize] = c.value.clone();
        }
        StepFunction::from_rationals(self.order, Dim::Two, self.rank, vals)
    }

    pub fn from_step_function(f: &StepFunction) -> Result<SparseStep> {
        if f.dim != Dim::Two {
            return Err(Error::Shape("expected a 2D step function".into()));
        }
        let vals = f.real_values().ok_or_else(|| Error::InvalidArgument("values must be real rationals".into()))?;
        let cells = vals
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, value)| SparseCell { index: i as u64, value })
            .collect();
        Ok(SparseStep { order: f.a, rank: f.rank, cells })
    }

    pub fn terms(&self) -> Vec<Term> {
        self.cells
            .iter()
            .map(|c| {
                let r = self.rect(c.index);
                Term { c: c.value.clone(), x: Pattern::cell(self.order, &r.x), y: Pattern::cell(self.order, &r.y) }
            })
            .collect()
    }
}

fn binom(n: &BigUint, k: u32) -> BigUint {
    if BigUint::from(k) > *n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Colex unranking of a k-subset of 0..n.
fn unrank_comb(n: u64, k: u32, mut r: BigUint) -> Vec<u64> {
    let mut out = Vec::with_capacity(k as usize);
    let mut top = n;
    for i in (1..=k).rev() {
        // largest c < top with C(c, i) <= r
        let (mut lo, mut hi) = (i as u64 - 1, top - 1);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if binom(&mid.into(), i) <= r {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        r -= binom(&lo.into(), i);
        out.push(lo);
        top = lo;
    }
    out.reverse();
    out
}

fn rank_comb(cells: &[u64]) -> BigUint {
    cells.iter().enumerate().map(|(i, &c)| binom(&c.into(), i as u32 + 1)).sum()
}

/// Deterministic enumeration of the 2D step functions on the rank-`m_max`
/// grid whose values have denominators at most `d_max` and heights at most
/// `h_max`. Index 1 is the zero function; afterwards functions come in
/// blocks of increasing value height H, then increasing support size Z.
/// Inside a block the support varies fastest, so consecutive indices of the
/// first block are single cells of value 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFunctionEnumerator {
    pub order: u32,
    pub m_max: u32,
    pub d_max: u32,
    pub h_max: u32,
}

impl StepFunctionEnumerator {
    pub fn new(order: u32, m_max: u32, d_max: u32, h_max: u32) -> Result<StepFunctionEnumerator> {
        let a = Order::new(order)?.get();
        if d_max == 0 || h_max == 0 {
            return Err(Error::InvalidArgument("budgets must be positive".into()));
        }
        let ok = (a as u64).checked_pow(2 * m_max).is_some_and(|n| n < 1 << 62);
        if !ok {
            return Err(Error::InvalidArgument(format!("rank {m_max} too large")));
        }
        Ok(StepFunctionEnumerator { order: a, m_max, d_max, h_max })
    }

    /// Number of grid cells.
    pub fn cells(&self) -> u64 {
        (self.order as u64).pow(2 * self.m_max)
    }

    /// Values of height below `h`, then the values of height exactly `h`.
    fn value_sets(&self, h: u32) -> (Vec<Rational>, Vec<Rational>) {
        let lower: Vec<Rational> = (1..h).flat_map(|k| values_of_height(k, self.d_max)).collect();
        (lower, values_of_height(h, self.d_max))
    }

    /// Counts of value tuples of length z with at least one entry of height h,
    /// split by the position of the first such entry.
    fn tuple_counts(na: u64, nb: u64, z: u32) -> Vec<BigUint> {
        let nc = na + nb;
        (0..z).map(|j| BigUint::from(na).pow(j) * nb * BigUint::from(nc).pow(z - 1 - j)).collect()
    }

    /// The s-th function (s ≥ 1).
    pub fn get(&self, s: &BigUint) -> Result<SparseStep> {
        if s.is_zero() {
            return Err(Error::InvalidArgument("enumeration starts at 1".into()));
        }
        let mut idx = s - 1u32;
        if idx.is_zero() {
            return Ok(SparseStep::zero(self.order, self.m_max));
        }
        idx -= 1u32;
        let n = self.cells();
        for h in 1..=self.h_max {
            let (lower, exact) = self.value_sets(h);
            if exact.is_empty() {
                continue;
            }
            for z in 1..=n.min(u32::MAX as u64) as u32 {
                let counts = Self::tuple_counts(lower.len() as u64, exact.len() as u64, z);
                let tuples: BigUint = counts.iter().sum();
                let combs = binom(&n.into(), z);
                let block = &tuples * &combs;
                if idx >= block {
                    idx -= block;
                    continue;
                }
                let (mut t, r) = idx.div_rem(&combs);
                let support = unrank_comb(n, z, r);
                let mut j = 0;
                while t >= counts[j] {
                    t -= &counts[j];
                    j += 1;
                }
                let all: Vec<&Rational> = lower.iter().chain(exact.iter()).collect();
                let mut vals = vec![Rational::zero(); z as usize];
                for i in (0..z as usize).rev() {
                    let radix = if i < j {
                        lower.len()
                    } else if i == j {
                        exact.len()
                    } else {
                        all.len()
                    };
                    let (q, d) = t.div_rem(&BigUint::from(radix));
                    let d = d.to_usize().unwrap_or(0);
                    vals[i] = if i < j {
                        lower[d].clone()
                    } else if i == j {
                        exact[d].clone()
                    } else {
                        all[d].clone()
                    };
                    t = q;
                }
                let cells = support.into_iter().zip(vals).map(|(index, value)| SparseCell { index, value }).collect();
                return Ok(SparseStep { order: self.order, rank: self.m_max, cells });
            }
        }
        Err(Error::Budget(format!("end of enumeration before index {s}")))
    }

    /// Inverse of `get`.
    pub fn index_of(&self, f: &SparseStep) -> Result<BigUint> {
        if f.order != self.order || f.rank != self.m_max {
            return Err(Error::InvalidArgument("function is not on the enumeration grid".into()));
        }
        let mut cells = f.cells.clone();
        cells.retain(|c| !c.value.is_zero());
        cells.sort_by_key(|c| c.index);
        if cells.is_empty() {
            return Ok(BigUint::one());
        }
        let n = self.cells();
        let h = cells.iter().map(|c| height(&c.value)).max().unwrap();
        let h = h.to_u32().filter(|&h| h <= self.h_max).ok_or_else(|| Error::InvalidArgument("value height above budget".into()))?;
        if cells.iter().any(|c| c.index >= n || c.value.denom() > &self.d_max.into()) {
            return Err(Error::InvalidArgument("function outside the enumeration budget".into()));
        }
        let mut idx = BigUint::from(2u32);
        for hh in 1..h {
            if n > 64 {
                return Err(Error::Budget("index beyond computable range".into()));
            }
            let (lower, exact) = self.value_sets(hh);
            let c = (lower.len() + exact.len()) as u32;
            idx += BigUint::from(c + 1).pow(n as u32) - BigUint::from(lower.len() as u32 + 1).pow(n as u32);
        }
        let (lower, exact) = self.value_sets(h);
        let z = cells.len() as u32;
        for zz in 1..z {
            let t: BigUint = Self::tuple_counts(lower.len() as u64, exact.len() as u64, zz).iter().sum();
            idx += t * binom(&n.into(), zz);
        }
        let counts = Self::tuple_counts(lower.len() as u64, exact.len() as u64, z);
        let pos = |set: &[Rational], v: &Rational| set.iter().position(|w| w == v);
        let j = cells.iter().position(|c| height(&c.value) == h.into()).unwrap();
        let all: Vec<Rational> = lower.iter().chain(exact.iter()).cloned().collect();
        let mut t = BigUint::zero();
        for (i, c) in cells.iter().enumerate() {
            let (radix, d) = if i < j {
                (lower.len(), pos(&lower, &c.value))
            } else if i == j {
                (exact.len(), pos(&exact, &c.value))
            } else {
                (all.len(), pos(&all, &c.value))
            };
            let d = d.ok_or_else(|| Error::InvalidArgument("value outside the enumeration budget".into()))?;
            t = t * radix + d;
        }
        let t: BigUint = counts[..j].iter().sum::<BigUint>() + t;
        let support: Vec<u64> = cells.iter().map(|c| c.index).collect();
        idx += t * binom(&n.into(), z) + rank_comb(&support);
        Ok(idx)
    }
}

/// c·χ_X(x)·χ_Y(y). The empty pattern is the whole axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub c: Rational,
    pub x: Pattern,
    pub y: Pattern,
}

/// A band-stored block as a step function: each band piece contributes
/// γχ_Δ − γa^r χ_{Δ ∩ band digits all zero}.
pub fn band_terms(p: &CoeffBlock1D) -> Result<Vec<(Pattern, Rational)>> {
    match &p.coeffs {
        Coeffs1D::Explicit(m) if m.values().all(|v| v.is_zero()) => Ok(Vec::new()),
        Coeffs1D::Explicit(_) => Err(Error::Shape("explicit coefficients have no pattern form".into())),
        Coeffs1D::Bands(ps) => {
            let mut out = Vec::with_capacity(2 * ps.len());
            for q in ps.iter().filter(|q| !q.gamma.is_zero()) {
                out.push((Pattern::cell(p.a, &q.cell), q.gamma.clone()));
                let scale = Rational::from_integer(pow_u(p.a, q.r).into());
                out.push((Pattern::cell_with_zero_band(p.a, &q.cell, q.nu, q.r), -(&q.gamma * scale)));
            }
            Ok(out)
        }
    }
}

pub fn block_terms(b: &CoeffBlock2D) -> Result<Vec<Term>> {
    if !b.explicit.is_empty() {
        return Err(Error::Shape("explicit coefficients have no pattern form".into()));
    }
    let mut out = Vec::new();
    for t in &b.terms {
        let xs = band_terms(&t.rows)?;
        let ys = band_terms(&t.cols)?;
        for (px, cx) in &xs {
            for (py, cy) in &ys {
                out.push(Term { c: &t.gamma * cx * cy, x: px.clone(), y: py.clone() });
            }
        }
    }
    Ok(out)
}

fn negate(ts: &[Term]) -> Vec<Term> {
    ts.iter().map(|t| Term { c: -t.c.clone(), ..t.clone() }).collect()
}

/// Nonempty atoms of the partition generated by `pats`: each atom is the
/// set of points lying in exactly the listed patterns.
fn atoms(a: u32, pats: &[Pattern]) -> Vec<(Vec<bool>, Rational)> {
    struct Region {
        pat: Pattern,
        ex: Vec<Pattern>,
        memb: Vec<bool>,
        m: Rational,
    }
    let mut regions = vec![Region { pat: Pattern(Vec::new()), ex: Vec::new(), memb: Vec::new(), m: Rational::one() }];
    for q in pats {
        let mut next = Vec::with_capacity(regions.len() * 2);
        for r in regions {
            let (inside, m_in) = match r.pat.intersect(q) {
                Some(pq) => {
                    let ex: Vec<Pattern> = r.ex.iter().filter_map(|e| e.intersect(&pq)).collect();
                    let m_in = pq.measure(a) - crate::digits::union_measure(a, &ex);
                    (Some((pq, ex)), m_in)
                }
                None => (None, Rational::zero()),
            };
            let m_out = &r.m - &m_in;
            match inside {
                Some((pq, ex)) if m_in.is_positive() => {
                    let mut memb = r.memb.clone();
                    memb.push(true);
                    if m_out.is_positive() {
                        let mut ex_out = r.ex.clone();
                        ex_out.push(pq.clone());
                        let mut mo = r.memb;
                        mo.push(false);
                        next.push(Region { pat: r.pat, ex: ex_out, memb: mo, m: m_out });
                    }
                    next.push(Region { pat: pq, ex, memb, m: m_in });
                }
                _ => {
                    let mut memb = r.memb;
                    memb.push(false);
                    next.push(Region { pat: r.pat, ex: r.ex, memb, m: r.m });
                }
            }
        }
        regions = next;
    }
    regions.into_iter().map(|r| (r.memb, r.m)).collect()
}

/// Patterns of one axis, deduplicated.
#[derive(Default)]
struct Dict {
    pats: Vec<Pattern>,
    index: BTreeMap<Pattern, usize>,
}

impl Dict {
    fn id(&mut self, p: &Pattern) -> usize {
        if let Some(&i) = self.index.get(p) {
            return i;
        }
        self.pats.push(p.clone());
        self.index.insert(p.clone(), self.pats.len() - 1);
        self.pats.len() - 1
    }
}

/// ∫∫ |Σ terms| μ, exactly (μ ≡ 1 without a weight).
pub fn weighted_l1(a: u32, terms: &[Term], weight: Option<&WeightSynthesis>) -> Result<Rational> {
    let (mut dx, mut dy) = (Dict::default(), Dict::default());
    let ids: Vec<(usize, usize)> = terms.iter().filter(|t| !t.c.is_zero()).map(|t| (dx.id(&t.x), dy.id(&t.y))).collect();
    let coefs: Vec<&Rational> = terms.iter().filter(|t| !t.c.is_zero()).map(|t| &t.c).collect();
    if ids.is_empty() {
        return Ok(Rational::zero());
    }
    // Ω_n sets as excluded pattern ids per axis
    let mut levels = Vec::new();
    if let Some(w) = weight {
        for l in &w.omega {
            let xs: Vec<usize> = l.mask.x.excluded.iter().map(|p| dx.id(p)).collect();
            let ys: Vec<usize> = l.mask.y.excluded.iter().map(|p| dy.id(p)).collect();
            levels.push((l.n, xs, ys));
        }
    }
    let ax = atoms(a, &dx.pats);
    let ay = atoms(a, &dy.pats);
    let inside = |memb: &[bool], ex: &[usize]| ex.iter().all(|&i| !memb[i]);
    let lx: Vec<Vec<bool>> = ax.iter().map(|(m, _)| levels.iter().map(|(_, xs, _)| inside(m, xs)).collect()).collect();
    let ly: Vec<Vec<bool>> = ay.iter().map(|(m, _)| levels.iter().map(|(_, _, ys)| inside(m, ys)).collect()).collect();
    let mut total = Rational::zero();
    for (i, (mx, wx)) in ax.iter().enumerate() {
        let active: Vec<usize> = (0..ids.len()).filter(|&t| mx[ids[t].0]).collect();
        if active.is_empty() {
            continue;
        }
        for (j, (my, wy)) in ay.iter().enumerate() {
            let v: Rational = active.iter().filter(|&&t| my[ids[t].1]).map(|&t| coefs[t].clone()).sum();
            if v.is_zero() {
                continue;
            }
            let mut cell = v.abs() * wx * wy;
            if let Some(w) = weight {
                let level = (0..levels.len()).find(|&k| lx[i][k] && ly[j][k]);
                cell *= w.mu_at(level.map(|k| levels[k].0));
            }
            total += cell;
        }
    }
    Ok(total)
}

/// 2^{-k}.
fn dyadic(k: u32) -> Rational {
    inv_pow(2, k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalOptions {
    pub lemma35: Lemma35Options,
}

impl Default for UniversalOptions {
    fn default() -> Self {
        UniversalOptions { lemma35: Lemma35Options::default() }
    }
}

impl UniversalOptions {
    pub fn schedule(&self) -> Schedule {
        self.lemma35.lemma34.schedule
    }

    pub fn with_schedule(mut self, s: Schedule) -> Self {
        self.lemma35.lemma34.schedule = s;
        self
    }
}

/// One block P_s of the series with its window [N_{s−1}, N_s − 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub s: u32,
    #[serde(with = "crate::num::biguint_str")]
    pub n_lo: BigUint,
    #[serde(with = "crate::num::biguint_str")]
    pub n_hi: BigUint,
    #[serde(with = "crate::num::rational_str")]
    pub eps: Rational,
    pub f: SparseStep,
    pub result: Lemma35Result,
    pub certificate: Certificate,
}

impl BlockRecord {
    /// N_s.
    pub fn next_start(&self) -> BigUint {
        &self.n_hi + 1u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalSeries {
    pub order: u32,
    pub schedule: Schedule,
    pub enumerator: StepFunctionEnumerator,
    pub blocks: Vec<BlockRecord>,
    pub certificate: Certificate,
}

impl UniversalSeries {
    /// c_{k,ν}: the blocks occupy disjoint windows.
    pub fn coeff(&self, k: &BigUint, nu: &BigUint) -> crate::cyclo::Cyc {
        for b in &self.blocks {
            if k.max(nu) >= &b.n_lo && k.min(nu) <= &b.n_hi {
                let c = b.result.block.coeff(k, nu);
                if !c.is_zero() {
                    return c;
                }
            }
        }
        crate::cyclo::Cyc::zero(self.order)
    }

    pub fn block(&self, s: u32) -> Result<&BlockRecord> {
        self.blocks.get(s as usize - 1).ok_or_else(|| Error::InvalidArgument(format!("block {s} not built")))
    }
}

/// Accuracy handed to the block construction: 2^{-2(s+1)}.
pub fn block_eps(s: u32) -> Rational {
    dyadic(2 * (s + 1))
}

fn entry_lhs(c: &Certificate, prefix: &str) -> Option<Bounds> {
    c.entries.iter().find(|e| e.name.starts_with(prefix)).map(|e| e.lhs.clone())
}

fn block_certificate(a: u32, s: u32, n_lo: &BigUint, res: &Lemma35Result, lemma: Certificate) -> Certificate {
    let mut cert = Certificate::new(format!("block {s}"));
    let b = &res.block;
    let n_hi = &b.hi;
    let within = b.terms.iter().all(|t| {
        let lo_ok = [&t.rows, &t.cols].iter().all(|p| p.min_index().is_none_or(|k| &k >= n_lo));
        let hi_ok = [&t.rows, &t.cols].iter().all(|p| p.max_index().is_none_or(|k| &k <= n_hi));
        lo_ok && hi_ok
    });
    cert.invariant("spectrum within [N_(s-1), N_s - 1]", within && n_hi >= n_lo, format!("[{n_lo}, {n_hi}]"));
    let missing = || Bounds::exact(int(1));
    cert.check(
        "P_s = f_s on E_s",
        entry_lhs(&lemma, "(1)").unwrap_or_else(missing),
        Relation::Eq,
        Bounds::zero(),
        "measure of the mismatch set inside E_s",
    );
    cert.check(
        "|E_s| > 1 - 2^-2(s+1)",
        Bounds::exact(res.e.measure(a)),
        Relation::Gt,
        Bounds::exact(Rational::one() - block_eps(s)),
        "product of exact union measures",
    );
    let p = int(2) + dyadic(2 * s);
    match b.lp_coefficient_norm(&p, None) {
        Ok(v) => cert.check("sum |c^(s)|^(2+2^-2s) < 2^-2s", v, Relation::Lt, Bounds::exact(dyadic(2 * s)), "closed form over band pieces"),
        Err(e) => cert.invariant("sum |c^(s)|^(2+2^-2s) < 2^-2s", false, e.to_string()),
    };
    cert.check(
        "max_e [int_e |S| - 2 int_e |f_s|] <= 2^-2(s+1)",
        entry_lhs(&lemma, "(4)").unwrap_or_else(missing),
        Relation::Le,
        Bounds::exact(block_eps(s)),
        "dominated by the summed family excess over int_e |f_s| from the block construction",
    );
    cert.children.push(lemma);
    cert
}

fn series_certificate(series: &UniversalSeries) -> Certificate {
    let mut cert = Certificate::new("universal series");
    let mut chained = true;
    let mut prev = BigUint::one();
    for b in &series.blocks {
        chained &= b.n_lo == prev && b.n_hi >= b.n_lo;
        prev = b.next_start();
    }
    cert.invariant("windows 1 = N_0 < N_1 < ... chained and disjoint", chained, format!("{} blocks", series.blocks.len()));
    let mut tail = Bounds::zero();
    for b in &series.blocks {
        if let Ok(v) = b.result.block.lp_coefficient_norm(&(int(2) + dyadic(2 * b.s)), None) {
            tail = tail.add(&v);
        } else {
            tail = tail.add(&Bounds::exact(int(1)));
        }
    }
    cert.check(
        "sum over blocks of sum |c^(s)|^(2+2^-2s) < 1/3",
        tail,
        Relation::Lt,
        Bounds::exact(Rational::new(1.into(), 3.into())),
        "sum of per-block closed forms",
    );
    if series.schedule == Schedule::Compact {
        cert.note("compact schedule: spherical partial sums are not certified");
    }
    cert.children = series.blocks.iter().map(|b| b.certificate.clone()).collect();
    cert
}

/// Blocks 1..=S from the first S enumerated functions, windows chained
/// from N_0 = 1.
pub fn build_universal(en: &StepFunctionEnumerator, s_max: u32, opts: &UniversalOptions) -> Result<UniversalSeries> {
    if s_max == 0 {
        return Err(Error::InvalidArgument("block count must be positive".into()));
    }
    let a = en.order;
    let mut blocks = Vec::with_capacity(s_max as usize);
    let mut n_lo = BigUint::one();
    for s in 1..=s_max {
        let f = en.get(&s.into())?;
        let eps = block_eps(s);
        let req = Lemma35Request { order: a, pieces: f.pieces(), eps: eps.clone(), n: n_lo.clone().max(2u32.into()) };
        let res = lemma35_construct(&req, &opts.lemma35).map_err(|e| match e {
            Error::Budget(m) => Error::Budget(format!("block {s}: {m}")),
            other => Error::Certificate(format!("block {s}: {other}")),
        })?;
        let lemma = res.certificate.clone();
        let certificate = block_certificate(a, s, &n_lo, &res, lemma);
        if !certificate.passed() {
            return Err(Error::Certificate(format!("block {s}: {}", certificate.failures().join(", "))));
        }
        let n_hi = res.block.hi.clone();
        blocks.push(BlockRecord { s, n_lo: n_lo.clone(), n_hi: n_hi.clone(), eps, f, result: res, certificate });
        n_lo = n_hi + 1u32;
    }
    let mut series = UniversalSeries { order: a, schedule: opts.schedule(), enumerator: en.clone(), blocks, certificate: Certificate::default() };
    series.certificate = series_certificate(&series);
    Ok(series)
}

/// Re-check every block from the stored results.
pub fn verify_universal(series: &UniversalSeries, opts: &UniversalOptions) -> Certificate {
    let mut copy = series.clone();
    for b in copy.blocks.iter_mut() {
        let f_ok = series.enumerator.get(&b.s.into()).ok().as_ref() == Some(&b.f);
        let req = Lemma35Request {
            order: series.order,
            pieces: b.f.pieces(),
            eps: block_eps(b.s),
            n: b.n_lo.clone().max(2u32.into()),
        };
        let lemma = lemma35_verify(&req, &b.result, &opts.lemma35);
        b.certificate = block_certificate(series.order, b.s, &b.n_lo, &b.result, lemma);
        b.certificate.invariant("f_s is the s-th enumerated function", f_ok, "enumeration replay");
        b.certificate.invariant("block accuracy 2^-2(s+1)", b.eps == block_eps(b.s), "stored accuracy");
    }
    series_certificate(&copy)
}

/// n₀ = ⌊log_{1/2} ε⌋ + 1.
pub fn n0_for(eps: &Rational) -> Result<u32> {
    if !(eps.is_positive() && eps < &Rational::one()) {
        return Err(Error::InvalidArgument("ε must lie in (0,1)".into()));
    }
    let mut k = 0;
    while dyadic(k + 1) >= *eps {
        k += 1;
    }
    Ok(k + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaLevel {
    pub n: u32,
    pub mask: ProductMask,
    #[serde(with = "crate::num::rational_str")]
    pub measure: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HEntry {
    pub s: u32,
    #[serde(with = "crate::num::rational_str")]
    pub f_norm: Rational,
    #[serde(with = "crate::num::rational_str")]
    pub rect: Rational,
    #[serde(with = "crate::num::rational_str")]
    pub sph: Rational,
    #[serde(with = "crate::num::rational_str")]
    pub h: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuLevel {
    pub n: u32,
    #[serde(with = "crate::num::rational_str")]
    pub mu: Rational,
}

/// μ = 1 on Ω_{n₀} and off Ω_S, μ_n on Ω_n ∖ Ω_{n−1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSynthesis {
    pub order: u32,
    #[serde(with = "crate::num::rational_str")]
    pub eps: Rational,
    pub n0: u32,
    pub blocks: u32,
    /// Ω_n for n = n₀..=S, truncated at the built blocks.
    pub omega: Vec<OmegaLevel>,
    pub h: Vec<HEntry>,
    pub mu: Vec<MuLevel>,
    pub certificate: Certificate,
}

impl WeightSynthesis {
    /// Weight on points whose first Ω level is `level` (None: outside Ω_S).
    pub fn mu_at(&self, level: Option<u32>) -> Rational {
        match level {
            Some(n) if n > self.n0 => self.mu.iter().find(|m| m.n == n).map_or_else(Rational::one, |m| m.mu.clone()),
            _ => Rational::one(),
        }
    }

    /// Ω_{n₀}.
    pub fn e(&self) -> &ProductMask {
        &self.omega[0].mask
    }
}

fn dedup_mask(m: &SetMask) -> SetMask {
    let mut excluded = m.excluded.clone();
    excluded.sort();
    excluded.dedup();
    SetMask { excluded }
}

/// Upper bound for every rectangular and spherical partial sum of a block:
/// the l1 norm of its coefficients.
fn coefficient_l1(b: &CoeffBlock2D) -> Result<Rational> {
    Ok(b.lp_coefficient_norm(&int(1), None)?.hi)
}

pub fn build_weight(series: &UniversalSeries, eps: &Rational) -> Result<WeightSynthesis> {
    let a = series.order;
    let n0 = n0_for(eps)?;
    let s_max = series.blocks.len() as u32;
    if s_max < n0 + 1 {
        return Err(Error::InvalidArgument(format!("weight for ε = {eps} needs at least {} blocks, have {s_max}", n0 + 1)));
    }
    let mut omega = Vec::new();
    for n in n0..=s_max {
        let m = series.blocks[n as usize - 1..].iter().fold(ProductMask::full(), |acc, b| acc.intersect(&b.result.e));
        let mask = ProductMask { x: dedup_mask(&m.x), y: dedup_mask(&m.y) };
        let measure = mask.measure(a);
        omega.push(OmegaLevel { n, mask, measure });
    }
    let mut h = Vec::new();
    for b in &series.blocks {
        let f_norm = b.f.sup_norm();
        let l1 = coefficient_l1(&b.result.block)?;
        let hv = &f_norm + &l1 + &l1 + int(1);
        h.push(HEntry { s: b.s, f_norm, rect: l1.clone(), sph: l1, h: hv });
    }
    let mut mu = Vec::new();
    let mut prod = Rational::one();
    for n in 1..=s_max {
        prod *= &h[n as usize - 1].h;
        if n > n0 {
            mu.push(MuLevel { n, mu: (Rational::from_integer(pow_u(2, 2 * n).into()) * &prod).recip() });
        }
    }
    let mut w = WeightSynthesis { order: a, eps: eps.clone(), n0, blocks: s_max, omega, h, mu, certificate: Certificate::default() };
    w.certificate = weight_certificate(series, &w);
    Ok(w)
}

pub fn weight_certificate(series: &UniversalSeries, w: &WeightSynthesis) -> Certificate {
    let a = w.order;
    let mut cert = Certificate::new("weight");
    cert.invariant("n0 = floor(log_1/2 eps) + 1", n0_for(&w.eps).ok() == Some(w.n0), format!("n0 = {}", w.n0));
    let levels_ok = w.omega.iter().enumerate().all(|(i, l)| {
        let n = w.n0 + i as u32;
        let m = series.blocks.get(n as usize - 1..).unwrap_or(&[]).iter().fold(ProductMask::full(), |acc, b| acc.intersect(&b.result.e));
        l.n == n && dedup_mask(&m.x) == l.mask.x && dedup_mask(&m.y) == l.mask.y && l.measure == l.mask.measure(a)
    }) && w.omega.last().map(|l| l.n) == Some(w.blocks);
    cert.invariant("Omega_n = intersection of E_s for n <= s <= S", levels_ok, "truncated at the built blocks");
    let h_ok = w.h.iter().zip(&series.blocks).all(|(e, b)| {
        let Ok(l1) = coefficient_l1(&b.result.block) else { return false };
        e.s == b.s && e.f_norm == b.f.sup_norm() && e.rect >= l1 && e.sph >= l1 && e.h == &e.f_norm + &e.rect + &e.sph + int(1)
    });
    cert.invariant("h_s = |f_s|_C + rect C-norm + sph C-norm + 1", h_ok, "C-norms bounded by coefficient l1 norms");
    cert.invariant("h_s >= 1", w.h.iter().all(|e| e.h >= Rational::one()), "every block");
    let mut prod = Rational::one();
    let mut mu_ok = w.mu.len() as u32 == w.blocks - w.n0;
    for n in 1..=w.blocks {
        prod *= &w.h[n as usize - 1].h;
        if n > w.n0 {
            let want = (Rational::from_integer(pow_u(2, 2 * n).into()) * &prod).recip();
            mu_ok &= w.mu.iter().any(|m| m.n == n && m.mu == want);
        }
    }
    cert.invariant("mu_n = [2^2n prod h_s]^-1", mu_ok, "recomputed from the h table");
    let lo = w.mu.iter().map(|m| m.mu.clone()).min().unwrap_or_else(Rational::one);
    let hi = w.mu.iter().map(|m| m.mu.clone()).max().unwrap_or_else(Rational::one).max(Rational::one());
    cert.check_exact("0 < mu", lo, Relation::Gt, Rational::zero(), "smallest level value");
    cert.check_exact("mu <= 1", hi, Relation::Le, Rational::one(), "largest value, 1 on E and off B");
    let off = match (w.omega.first(), w.omega.last()) {
        (Some(f), Some(l)) => &l.measure - &f.measure,
        _ => Rational::one(),
    };
    cert.check_exact("|{mu != 1}| < eps", off, Relation::Lt, w.eps.clone(), "|Omega_S| - |Omega_n0|, exact");
    cert.note(format!("Omega_n intersections truncated at S = {} built blocks; B = Omega_S", w.blocks));
    cert
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub q: u32,
    pub n: u32,
    #[serde(with = "crate::num::rational_str")]
    pub tau: Rational,
    /// ∫∫|R_{q−1} − f_n| μ.
    #[serde(with = "crate::num::rational_str")]
    pub fit: Rational,
    /// ∫∫|f − Σ_{j≤q} P_{n_j}| μ.
    #[serde(with = "crate::num::rational_str")]
    pub residual: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedySelection {
    pub target: SparseStep,
    pub n0: u32,
    /// ∫∫|f| μ.
    #[serde(with = "crate::num::rational_str")]
    pub initial: Rational,
    pub steps: Vec<GreedyStep>,
    pub certificate: Certificate,
}

impl GreedySelection {
    pub fn indices(&self) -> Vec<u32> {
        self.steps.iter().map(|s| s.n).collect()
    }
}

fn residual_terms(series: &UniversalSeries, target: &SparseStep, chosen: &[u32]) -> Result<Vec<Term>> {
    let mut r = target.terms();
    for &n in chosen {
        r.extend(negate(&block_terms(&series.block(n)?.result.block)?));
    }
    Ok(r)
}

/// At step q take the first unused block n > n_{q−1} (n₁ > n₀ + 1) whose
/// function approximates the current residual within τ_q = 2^{-2q}.
pub fn greedy_select(series: &UniversalSeries, weight: &WeightSynthesis, target: &SparseStep, q_max: u32) -> Result<GreedySelection> {
    let a = series.order;
    if target.order != a {
        return Err(Error::InvalidArgument("target order differs from the series".into()));
    }
    let s_max = series.blocks.len() as u32;
    let mut chosen: Vec<u32> = Vec::new();
    let mut steps = Vec::new();
    let initial = weighted_l1(a, &target.terms(), Some(weight))?;
    let mut current = initial.clone();
    let mut prev = weight.n0 + 1;
    for q in 1..=q_max {
        if current.is_zero() {
            break;
        }
        let r = residual_terms(series, target, &chosen)?;
        let tau = dyadic(2 * q);
        let mut best: Option<Rational> = None;
        let mut pick = None;
        for n in prev + 1..=s_max {
            let mut t = r.clone();
            t.extend(negate(&series.block(n)?.f.terms()));
            let fit = weighted_l1(a, &t, Some(weight))?;
            if fit < tau {
                pick = Some((n, fit));
                break;
            }
            if best.as_ref().is_none_or(|b| &fit < b) {
                best = Some(fit);
            }
        }
        let Some((n, fit)) = pick else {
            let best = best.map_or("none".to_string(), |b| crate::num::format_rational(&b));
            return Err(Error::Budget(format!("step {q}: no admissible index in ({prev}, {s_max}]; best residual {best}")));
        };
        chosen.push(n);
        current = weighted_l1(a, &residual_terms(series, target, &chosen)?, Some(weight))?;
        steps.push(GreedyStep { q, n, tau, fit, residual: current.clone() });
        prev = n;
    }
    let mut sel = GreedySelection { target: target.clone(), n0: weight.n0, initial, steps, certificate: Certificate::default() };
    sel.certificate = selection_certificate(&sel);
    Ok(sel)
}

pub fn selection_certificate(sel: &GreedySelection) -> Certificate {
    let mut cert = Certificate::new("greedy selection");
    let idx = sel.indices();
    let increasing = idx.windows(2).all(|w| w[0] < w[1]) && idx.first().is_none_or(|&n| n > sel.n0 + 1);
    cert.invariant("n_1 > n0 + 1 and indices increasing", increasing, format!("{idx:?}"));
    for st in &sel.steps {
        let q = st.q;
        cert.check_exact(format!("step {q}: fit < tau_q = 2^-2q"), st.fit.clone(), Relation::Lt, st.tau.clone(), "exact weighted integral");
        cert.check_exact(
            format!("step {q}: int|f - sum P| mu < 2 * 2^-2q"),
            st.residual.clone(),
            Relation::Lt,
            dyadic(2 * q) * int(2),
            "exact weighted integral",
        );
        cert.check_exact(
            format!("step {q}: int|f - sum P| mu < 9 * 2^-2q"),
            st.residual.clone(),
            Relation::Lt,
            dyadic(2 * q) * int(9),
            "exact weighted integral",
        );
    }
    if sel.steps.is_empty() {
        cert.note("residual vanished before the first step");
    }
    cert
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub kind: String,
    pub cutoff: String,
    pub q: u32,
    #[serde(with = "crate::num::rational_str")]
    pub error: Rational,
    #[serde(with = "crate::num::rational_str")]
    pub bound: Rational,
    pub pass: bool,
}

/// Upper bound of ∫∫|partial sum of block n|μ over every cutoff inside the
/// block: ∫_E |f_n| plus the certified excess on E, plus the coefficient
/// l1 norm times |T ∖ E|.
fn within_block(b: &BlockRecord) -> Result<Rational> {
    let a = b.f.order;
    let f_l1 = weighted_l1(a, &b.f.terms(), None)?;
    let excess = entry_lhs(&b.result.certificate, "(4)").ok_or_else(|| Error::Certificate(format!("block {} lacks a partial-sum entry", b.s)))?.hi;
    let off = coefficient_l1(&b.result.block)? * (Rational::one() - b.result.e.measure(a));
    Ok(f_l1 + excess + off)
}

/// Errors of the selected subseries at block boundaries (exact) and over
/// every cutoff inside the selected blocks (certified upper bounds).
pub fn monitor_convergence(series: &UniversalSeries, sel: &GreedySelection) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    let mut row = |kind: &str, cutoff: String, q: u32, error: Rational| {
        let bound = dyadic(2 * q) * int(21);
        let pass = error < bound;
        rows.push(TraceRow { kind: kind.into(), cutoff, q, error, bound, pass });
    };
    let mut before = sel.initial.clone();
    for st in &sel.steps {
        let b = series.block(st.n)?;
        let (n, q) = (st.n, st.q);
        let (lo, hi) = (&b.n_lo, b.next_start());
        let inside = &before + within_block(b)?;
        row("rect", format!("N_{}={} <= min(n;m) < N_{}={}", n - 1, lo, n, hi), q, inside.clone());
        row("rect", format!("n = m = N_{} - 1", n), q, st.residual.clone());
        if series.schedule == Schedule::Strict {
            row("sph", format!("R^2 = 2 N_{}^2", n - 1), q, before.clone());
            row("sph", format!("2 N_{}^2 < R^2 < 2 N_{}^2", n - 1, n), q, inside);
            row("sph", format!("R^2 = 2 N_{}^2", n), q, st.residual.clone());
        }
        before = st.residual.clone();
    }
    Ok(rows)
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("kind,cutoff,q,error,bound,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.kind,
            r.cutoff,
            r.q,
            crate::num::format_rational(&r.error),
            crate::num::format_rational(&r.bound),
            r.pass
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx1d::render_block;
    use crate::num::rat;
    use std::collections::BTreeSet;

    #[test]
    fn enumeration_starts_with_zero_and_single_cells() {
        let en = StepFunctionEnumerator::new(2, 3, 2, 2).unwrap();
        assert!(en.get(&1u32.into()).unwrap().cells.is_empty());
        for s in 2..10u32 {
            let f = en.get(&s.into()).unwrap();
            assert_eq!(f.cells, vec![SparseCell { index: s as u64 - 2, value: int(1) }]);
            assert_eq!(f, en.get(&s.into()).unwrap());
        }
        let f = en.get(&66u32.into()).unwrap();
        assert_eq!(f.cells, vec![SparseCell { index: 0, value: int(-1) }]);
    }

    #[test]
    fn enumeration_audit_rank_one() {
        // rank 1, denominators up to 2, heights up to 2: values ±1, ±2, ±1/2
        let en = StepFunctionEnumerator::new(2, 1, 2, 2).unwrap();
        assert_eq!(values_of_height(2, 2), vec![int(2), int(-2), rat(1, 2), rat(-1, 2)]);
        let total = 7u32.pow(4);
        let mut seen = BTreeSet::new();
        for s in 1..=total {
            let f = en.get(&s.into()).unwrap();
            let dense: Vec<Rational> = f.to_step_function().unwrap().real_values().unwrap();
            assert!(dense.iter().all(|v| v.is_zero() || (height(v) <= 2u32.into() && v.denom() <= &2.into())));
            assert!(seen.insert(dense));
            assert_eq!(en.index_of(&f).unwrap(), BigUint::from(s));
        }
        assert_eq!(seen.len() as u32, total);
        assert!(matches!(en.get(&(total + 1).into()), Err(Error::Budget(_))));
    }

    #[test]
    fn band_terms_match_rendering() {
        use crate::transform::BandPiece;
        for (a, cell, nu, r) in [(2, AdicCell { rank: 2, index: 1 }, 3, 2), (3, AdicCell { rank: 1, index: 2 }, 2, 1)] {
            let piece = BandPiece { cell, gamma: rat(3, 2), nu, r };
            let (lo, hi) = (piece.base(a), piece.end(a) - 1u32);
            let block = CoeffBlock1D::bands(a, lo, hi, vec![piece]).unwrap();
            let dense = render_block(&block).unwrap();
            let terms = band_terms(&block).unwrap();
            for (i, v) in dense.values.iter().enumerate() {
                let want: Rational = terms
                    .iter()
                    .filter(|(p, _)| p.matches(|q| crate::walsh::cell_digit(a, dense.rank, i as u64, q)))
                    .map(|(_, c)| c.clone())
                    .sum();
                assert_eq!(v.as_rational().unwrap(), want, "a = {a}, cell {i}");
            }
        }
    }

    fn dense_level(w: &WeightSynthesis, digit: impl Fn(u32) -> u32 + Copy, dy: impl Fn(u32) -> u32 + Copy) -> Option<u32> {
        w.omega.iter().find(|l| l.mask.x.contains(digit) && l.mask.y.contains(dy)).map(|l| l.n)
    }

    #[test]
    fn weighted_integral_matches_dense_sum() {
        let a = 2;
        let m = 4;
        let p = |v: &[(u32, u32)]| Pattern::new(v.to_vec()).unwrap();
        let terms = vec![
            Term { c: rat(3, 2), x: p(&[(0, 0)]), y: p(&[(1, 1)]) },
            Term { c: rat(-2, 1), x: p(&[(0, 0), (2, 1)]), y: p(&[]) },
            Term { c: rat(1, 3), x: p(&[(3, 0)]), y: p(&[(0, 1), (3, 1)]) },
        ];
        let w = WeightSynthesis {
            order: a,
            eps: rat(3, 4),
            n0: 1,
            blocks: 3,
            omega: vec![
                OmegaLevel { n: 1, mask: ProductMask { x: SetMask { excluded: vec![p(&[(1, 0)])] }, y: SetMask { excluded: vec![p(&[(2, 0)])] } }, measure: rat(1, 4) },
                OmegaLevel { n: 2, mask: ProductMask { x: SetMask { excluded: vec![p(&[(1, 0), (2, 0)])] }, y: SetMask::full() }, measure: rat(3, 4) },
                OmegaLevel { n: 3, mask: ProductMask { x: SetMask { excluded: vec![p(&[(1, 0), (2, 0), (3, 0)])] }, y: SetMask::full() }, measure: rat(7, 8) },
            ],
            h: Vec::new(),
            mu: vec![MuLevel { n: 2, mu: rat(1, 7) }, MuLevel { n: 3, mu: rat(1, 11) }],
            certificate: Certificate::default(),
        };
        let side = 1u64 << m;
        let mut plain = Rational::zero();
        let mut weighted = Rational::zero();
        let area = inv_pow(a, 2 * m);
        for i in 0..side {
            for j in 0..side {
                let dx = |q| crate::walsh::cell_digit(a, m, i, q);
                let dy = |q| crate::walsh::cell_digit(a, m, j, q);
                let v: Rational = terms.iter().filter(|t| t.x.matches(dx) && t.y.matches(dy)).map(|t| t.c.clone()).sum();
                plain += v.abs() * &area;
                weighted += v.abs() * &area * w.mu_at(dense_level(&w, dx, dy));
            }
        }
        assert_eq!(weighted_l1(a, &terms, None).unwrap(), plain);
        assert_eq!(weighted_l1(a, &terms, Some(&w)).unwrap(), weighted);
    }

    #[test]
    fn n0_rounding() {
        assert_eq!(n0_for(&rat(1, 4)).unwrap(), 3);
        assert_eq!(n0_for(&rat(3, 4)).unwrap(), 1);
        assert_eq!(n0_for(&rat(1, 3)).unwrap(), 2);
        assert!(n0_for(&int(1)).is_err());
    }

    #[test]
    fn first_block_is_empty() {
        let en = StepFunctionEnumerator::new(2, 9, 1, 1).unwrap();
        let series = build_universal(&en, 1, &UniversalOptions::default()).unwrap();
        let b = &series.blocks[0];
        assert!(b.result.block.terms.is_empty());
        assert_eq!(b.result.e.measure(2), int(1));
        assert!(series.certificate.passed(), "{:?}", series.certificate.failures());
        assert!(build_weight(&series, &rat(1, 4)).is_err());
    }

    #[test]
    fn two_blocks_and_zero_target() {
        let en = StepFunctionEnumerator::new(2, 13, 1, 1).unwrap();
        let opts = UniversalOptions::default().with_schedule(Schedule::Compact);
        let series = build_universal(&en, 3, &opts).unwrap();
        assert!(series.certificate.passed(), "{:?}", series.certificate.failures());
        assert!(series.blocks.windows(2).all(|w| w[0].n_hi < w[1].n_lo));
        assert!(verify_universal(&series, &opts).passed());
        let w = build_weight(&series, &rat(3, 4)).unwrap();
        assert!(w.certificate.passed(), "{:?}", w.certificate.failures());
        let sel = greedy_select(&series, &w, &SparseStep::zero(2, 13), 2).unwrap();
        assert!(sel.steps.is_empty());
        assert_eq!(sel.initial, Rational::zero());
        let f = en.get(&3u32.into()).unwrap();
        let sel = greedy_select(&series, &w, &f, 1).unwrap();
        assert_eq!(sel.indices(), vec![3]);
        assert_eq!(sel.initial, weighted_l1(2, &f.terms(), Some(&w)).unwrap());
        let rows = monitor_convergence(&series, &sel).unwrap();
        assert!(rows.iter().all(|r| r.kind == "rect" && r.pass));
        assert!(trace_csv(&rows).starts_with("kind,cutoff,q,error,bound,pass\n"));
    }
}
