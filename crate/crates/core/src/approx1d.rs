//! Approximation of 1D step functions by Walsh polynomials with prescribed
//! low frequency cut, small ℓ^{2+ε} coefficient mass and exact agreement
//! outside a small exceptional set.
//!
//! Each nonzero cell Δ of the (refined) target gets its own band of r digit
//! positions ν..ν+r−1 and the polynomial −γ χ_Δ Σ_{T≠0} char_T, where
//! char_T = Π φ_{ν+i}^{t_i}. Since Σ_T char_T = a^r on {band digits all 0}
//! and 0 elsewhere, the piece equals γ on Δ except on a sub-cell of
//! relative measure a^{-r}, which the exceptional set removes.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cert::{Certificate, Relation};
use crate::cyclo::{Ctx, Lat};
use crate::digits::{DigitSpace, Pattern, SetMask};
use crate::error::{Error, Result};
use crate::grid::{AdicCell, Dim, StepFunction};
use crate::num::{ceil_log, int, inv_pow, pow_bounds, pow_u, Bounds, Rational};
use crate::transform::{BandPiece, CoeffBlock1D, Coeffs1D};
use crate::walsh::{decompose_index, Order};

/// Nonzero cells of a 1D step function as (cell, value).
pub type Pieces = Vec<(AdicCell, Rational)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma33Request {
    pub f: StepFunctionSpec,
    #[serde(with = "crate::num::rational_str")]
    pub eps: Rational,
    #[serde(with = "crate::num::biguint_str")]
    pub n0: BigUint,
}

/// Sparse 1D target: nonzero values on disjoint a-adic cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunctionSpec {
    pub order: u32,
    pub cells: Vec<CellValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellValue {
    pub cell: AdicCell,
    #[serde(with = "crate::num::rational_str")]
    pub value: Rational,
}

impl StepFunctionSpec {
    pub fn from_step_function(f: &StepFunction) -> Result<StepFunctionSpec> {
        if f.dim != Dim::One {
            return Err(Error::Shape("expected a 1D step function".into()));
        }
        let vals = f
            .real_values()
            .ok_or_else(|| Error::InvalidArgument("target values must be real rationals".into()))?;
        let cells = vals
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| CellValue { cell: AdicCell { rank: f.rank, index: i as u64 }, value: v })
            .collect();
        Ok(StepFunctionSpec { order: f.a, cells })
    }

    pub fn pieces(&self) -> Pieces {
        self.cells.iter().filter(|c| !c.value.is_zero()).map(|c| (c.cell, c.value.clone())).collect()
    }

    pub fn validate(&self) -> Result<()> {
        Order::new(self.order)?;
        for (i, c) in self.cells.iter().enumerate() {
            AdicCell::new(self.order, c.cell.rank, c.cell.index)?;
            if self.cells[i + 1..].iter().any(|d| !c.cell.disjoint(self.order, &d.cell)) {
                return Err(Error::InvalidArgument("target cells overlap".into()));
            }
        }
        Ok(())
    }

    pub fn to_step_function(&self) -> Result<StepFunction> {
        let rank = self.cells.iter().map(|c| c.cell.rank).max().unwrap_or(0);
        let mut vals = vec![Rational::zero(); (self.order as u64).checked_pow(rank).unwrap_or(u64::MAX).min(1 << 24) as usize];
        for c in &self.cells {
            for sub in c.cell.refine_to(self.order, rank) {
                vals[sub.index as usize] = c.value.clone();
            }
        }
        StepFunction::from_rationals(self.order, Dim::One, rank, vals)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma33Options {
    pub retry_budget: u32,
    /// Largest refinement rank the constructor may choose.
    pub max_rank: u32,
    /// Work limit (cells × cutoffs) for the dense verifier.
    pub dense_work: u64,
    /// Smallest refinement rank the constructor may choose.
    #[serde(default)]
    pub min_rank: u32,
    /// Largest number of refined cells (one band each).
    #[serde(default = "default_max_pieces")]
    pub max_pieces: u64,
}

fn default_max_pieces() -> u64 {
    1 << 20
}

impl Default for Lemma33Options {
    fn default() -> Self {
        Lemma33Options { retry_budget: 4, max_rank: 48, dense_work: 400_000_000, min_rank: 0, max_pieces: default_max_pieces() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma33Result {
    pub p: CoeffBlock1D,
    pub e: SetMask,
    #[serde(with = "crate::num::biguint_str")]
    pub n: BigUint,
    pub r: u32,
    pub m: u32,
    pub attempts: u32,
    pub certificate: Certificate,
}

fn validate_request(a: u32, eps: &Rational, n0: &BigUint) -> Result<()> {
    Order::new(a)?;
    if !(eps.is_positive() && eps < &Rational::one()) {
        return Err(Error::InvalidArgument("ε must lie in (0,1)".into()));
    }
    if n0 <= &BigUint::from(2u32) {
        return Err(Error::InvalidArgument("N₀ must exceed 2".into()));
    }
    Ok(())
}

/// Smallest r ≥ 1 with a^{-r}·|supp f| < ε.
pub fn band_width(a: u32, support: &Rational, eps: &Rational) -> u32 {
    let mut r = 1;
    while support * inv_pow(a, r) >= *eps {
        r += 1;
    }
    r
}

/// Σ_pieces (a^r−1) a^{m'} (|γ| a^{-m'})^{2+ε} for the target refined to
/// rank m'.
pub fn predicted_coefficient_mass(a: u32, pieces: &Pieces, eps: &Rational, r: u32, m: u32) -> Bounds {
    let p = int(2) + eps;
    let mut acc = Bounds::zero();
    for (c, g) in pieces {
        let sub = Rational::from_integer(BigInt::from(a).pow(m - c.rank));
        let count = Rational::from_integer(((pow_u(a, r) - 1u32) * pow_u(a, m)).into());
        let mag = g.abs() * inv_pow(a, m);
        acc = acc.add(&pow_bounds(&Bounds::exact(mag), &p).scale(&(count * sub)));
    }
    acc
}

fn support_measure(a: u32, pieces: &Pieces) -> Rational {
    pieces.iter().map(|(c, _)| c.measure(a)).sum()
}

/// Build the band polynomial and its exceptional set at refinement rank
/// `m` and band width `r`.
pub fn build_bands(a: u32, pieces: &Pieces, n0: &BigUint, r: u32, m: u32) -> (CoeffBlock1D, SetMask) {
    let mut refined: Vec<(AdicCell, Rational)> = Vec::new();
    for (c, g) in pieces {
        refined.extend(c.refine_to(a, m).map(|s| (s, g.clone())));
    }
    refined.sort_by_key(|(c, _)| c.index);
    let nu0 = ceil_log(a, n0).max(m);
    let mut bands = Vec::with_capacity(refined.len());
    let mut excluded = Vec::with_capacity(refined.len());
    for (j, (cell, g)) in refined.into_iter().enumerate() {
        let nu = nu0 + j as u32 * r;
        excluded.push(Pattern::cell_with_zero_band(a, &cell, nu, r));
        bands.push(BandPiece { cell, gamma: g, nu, r });
    }
    let hi = bands.last().map_or(n0.clone(), |b| b.end(a) - 1u32);
    let block = CoeffBlock1D { a, lo: n0.clone(), hi, coeffs: Coeffs1D::Bands(bands) };
    (block, SetMask { excluded })
}

pub fn lemma33_construct(req: &Lemma33Request, opts: &Lemma33Options) -> Result<Lemma33Result> {
    req.f.validate()?;
    construct_pieces(req.f.order, &req.f.pieces(), &req.eps, &req.n0, opts)
}

pub fn construct_pieces(a: u32, pieces: &Pieces, eps: &Rational, n0: &BigUint, opts: &Lemma33Options) -> Result<Lemma33Result> {
    validate_request(a, eps, n0)?;
    if pieces.is_empty() {
        let p = CoeffBlock1D::empty(a, n0.clone(), n0.clone());
        let e = SetMask::full();
        let certificate = verify_pieces(a, pieces, eps, n0, &p, &e, opts);
        return Ok(Lemma33Result { p, e, n: n0.clone(), r: 0, m: 0, attempts: 1, certificate });
    }
    let r = band_width(a, &support_measure(a, pieces), eps);
    let base_rank = pieces.iter().map(|(c, _)| c.rank).max().unwrap();
    let mut m = base_rank.max(opts.min_rank);
    while predicted_coefficient_mass(a, pieces, eps, r, m).hi >= *eps {
        m += 1;
        if m > opts.max_rank {
            return Err(Error::Budget(format!(
                "unconstructible with budget: condition (3) needs refinement beyond rank {}",
                opts.max_rank
            )));
        }
    }
    let mut last_fail = String::new();
    for attempt in 1..=opts.retry_budget.max(1) {
        let count = pieces.iter().try_fold(0u64, |n, (c, _)| (a as u64).checked_pow(m - c.rank).and_then(|k| n.checked_add(k)));
        if count.is_none_or(|n| n > opts.max_pieces) {
            return Err(Error::Budget(format!(
                "unconstructible with budget: refinement to rank {m} exceeds {} cells",
                opts.max_pieces
            )));
        }
        let (p, e) = build_bands(a, pieces, n0, r, m);
        let certificate = verify_pieces(a, pieces, eps, n0, &p, &e, opts);
        if certificate.passed() {
            let n = p.hi.clone();
            return Ok(Lemma33Result { p, e, n, r, m, attempts: attempt, certificate });
        }
        last_fail = certificate.failures().join(", ");
        // a wider band only adds coefficient mass; a finer refinement
        // shrinks the off-cell spread of the partial sums
        m += 1;
        if m > opts.max_rank {
            break;
        }
    }
    Err(Error::Budget(format!("unconstructible with budget: {last_fail}")))
}

/// Certificate for conditions (1)–(4) of the approximation lemma.
pub fn lemma33_verify(
    f: &StepFunctionSpec,
    eps: &Rational,
    n0: &BigUint,
    p: &CoeffBlock1D,
    e: &SetMask,
    opts: &Lemma33Options,
) -> Certificate {
    verify_pieces(f.order, &f.pieces(), eps, n0, p, e, opts)
}

pub fn verify_pieces(
    a: u32,
    pieces: &Pieces,
    eps: &Rational,
    n0: &BigUint,
    p: &CoeffBlock1D,
    e: &SetMask,
    opts: &Lemma33Options,
) -> Certificate {
    let mut cert = Certificate::new("lemma 3.3");
    let spectrum_ok = p.a == a && p.min_index().is_none_or(|k| &k >= n0) && p.max_index().is_none_or(|k| k <= p.hi);
    cert.invariant("spectrum within [N0, N]", spectrum_ok, format!("window [{}, {}]", p.lo, p.hi));

    let eps_b = Bounds::exact(eps.clone());
    let one_minus = Bounds::exact(Rational::one() - eps);
    let p_exp = int(2) + eps;
    let coeff_mass = p.lp_norm(&p_exp);

    let outcome = sweep_1d(a, pieces, p, e, opts);
    match outcome {
        Ok(sw) => {
            cert.check(
                "(1) P = f on E",
                Bounds::exact(sw.mismatch),
                Relation::Eq,
                Bounds::zero(),
                format!("measure of {{x in E: P(x) != f(x)}}; {}", sw.engine),
            );
            cert.check("(2) |E| > 1 - eps", Bounds::exact(e.measure(a)), Relation::Gt, one_minus, "exact pattern measure");
            cert.check("(3) sum |c_k|^(2+eps) < eps", coeff_mass, Relation::Lt, eps_b.clone(), "exact powers, enclosed when irrational");
            cert.check(
                "(4) max_m sup_e [int_e |S_m| - int_e |f|] < eps",
                sw.worst,
                Relation::Lt,
                eps_b,
                format!("positive-part reduction over all prefix cutoffs; {}", sw.engine),
            );
        }
        Err(err) => {
            cert.check("(2) |E| > 1 - eps", Bounds::exact(e.measure(a)), Relation::Gt, one_minus, "exact pattern measure");
            cert.check("(3) sum |c_k|^(2+eps) < eps", coeff_mass, Relation::Lt, eps_b, "exact powers");
            cert.invariant("(1),(4) decidable", false, err.to_string());
        }
    }
    cert
}

/// Mismatch measure of P = f on E and the largest positive-part excess
/// over all prefix cutoffs.
pub fn sweep_1d(a: u32, pieces: &Pieces, p: &CoeffBlock1D, e: &SetMask, opts: &Lemma33Options) -> Result<Sweep> {
    if p.is_empty() {
        return Ok(Sweep::trivial(a, pieces));
    }
    sweep_structured(a, pieces, p, e).unwrap_or_else(|| sweep_dense(a, pieces, p, e, opts))
}

/// Digit positions the coefficients of `p` depend on.
pub fn block_positions(p: &CoeffBlock1D) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    match &p.coeffs {
        Coeffs1D::Bands(bands) => {
            for b in bands {
                out.extend(0..b.cell.rank);
                out.extend(b.nu..b.nu + b.r);
            }
        }
        Coeffs1D::Explicit(map) => {
            let order = Order::new(p.a)?;
            for k in map.keys() {
                out.extend(decompose_index(k, order).digits.iter().map(|&(q, _)| q));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Upper bound for max_k |c_k|.
pub fn max_coeff_abs(p: &CoeffBlock1D) -> Rational {
    match &p.coeffs {
        Coeffs1D::Bands(bands) => bands.iter().map(|b| b.gamma.abs() * inv_pow(p.a, b.cell.rank)).max().unwrap_or_else(Rational::zero),
        Coeffs1D::Explicit(map) => map.values().map(|c| c.abs().hi).max().unwrap_or_else(Rational::zero),
    }
}

/// Outcome of a cutoff sweep.
pub struct Sweep {
    pub mismatch: Rational,
    pub worst: Bounds,
    pub engine: String,
}

impl Sweep {
    fn trivial(a: u32, pieces: &Pieces) -> Sweep {
        Sweep { mismatch: support_measure(a, pieces), worst: Bounds::zero(), engine: "empty polynomial".into() }
    }
}

/// Σ_{i∈E} max(s_i − f_i, 0)·w: the largest value of ∫_e |S| − ∫_e |f|
/// over subsets e of E made of whole cells.
pub fn positive_part_reduction(s_abs: &[Rational], f_abs: &[Rational], in_e: &[bool], w: &Rational) -> Rational {
    let mut acc = Rational::zero();
    for ((s, f), &inside) in s_abs.iter().zip(f_abs).zip(in_e) {
        if inside && s > f {
            acc += s - f;
        }
    }
    acc * w
}

fn lcm_denoms<'r>(it: impl Iterator<Item = &'r Rational>) -> BigInt {
    it.fold(BigInt::one(), |l, r| l.lcm(r.denom()))
}

/// Precision shift for modulus enclosures; zero when moduli are integers.
fn abs_shift(a: u32) -> u32 {
    if a == 2 {
        0
    } else {
        24
    }
}

fn overflow() -> Error {
    Error::Budget("integer range exceeded in verifier".into())
}

/// Dense verification over every digit the data depends on.
pub fn sweep_dense(a: u32, pieces: &Pieces, p: &CoeffBlock1D, e: &SetMask, opts: &Lemma33Options) -> Result<Sweep> {
    if !Lat::supported(a) {
        return Err(Error::Budget(format!("order {a} not supported by the dense verifier")));
    }
    let ctx = Ctx::get(a);
    let order = Order::new(a)?;
    let coeffs: Vec<(BigUint, crate::cyclo::Cyc)> = p.to_explicit(1 << 22)?.iter().collect();
    let mut positions: Vec<u32> = e.positions();
    let mf = pieces.iter().map(|(c, _)| c.rank).max().unwrap_or(0);
    positions.extend(0..mf);
    for (k, _) in &coeffs {
        positions.extend(decompose_index(k, order).digits.iter().map(|&(q, _)| q));
    }
    let space = DigitSpace::new(a, positions)?;
    let size = space.size();
    if (size as u64).saturating_mul(coeffs.len() as u64 + 1) > opts.dense_work {
        return Err(Error::Budget(format!("dense sweep of {size} cells x {} cutoffs over budget", coeffs.len())));
    }
    let q = lcm_denoms(coeffs.iter().flat_map(|(_, c)| c.coords().iter()).chain(pieces.iter().map(|(_, g)| g)));
    let lat_c: Vec<Lat> = coeffs.iter().map(|(_, c)| Lat::from_cyc(c, &q).ok_or_else(overflow)).collect::<Result<_>>()?;

    let in_e = space.membership(e);
    let mut f_lat = vec![Lat::ZERO; size];
    for (cell, g) in pieces {
        let gl = Lat::from_cyc(&crate::cyclo::Cyc::from_rational(a, g.clone()), &q).ok_or_else(overflow)?;
        let hits = space.pattern_hits(&Pattern::cell(a, cell));
        for (i, h) in hits.into_iter().enumerate() {
            if h {
                f_lat[i] = gl;
            }
        }
    }
    let sh = abs_shift(a);
    let f_abs: Vec<(u128, u128)> = f_lat.iter().map(|z| z.abs_scaled(ctx, sh)).collect();

    let mut s = vec![Lat::ZERO; size];
    let (mut best_lo, mut best_hi) = (0u128, 0u128);
    for ((k, _), c) in coeffs.iter().zip(&lat_c) {
        let exps = space.walsh_exponents(&decompose_index(k, order))?;
        let table: Vec<Lat> = (0..a as i64).map(|t| c.mul_root(ctx, t)).collect();
        for (v, &ex) in s.iter_mut().zip(&exps) {
            *v = v.add(&table[ex as usize]);
        }
        let (mut lo, mut hi) = (0u128, 0u128);
        for i in 0..size {
            if !in_e[i] {
                continue;
            }
            let (sl, su) = s[i].abs_scaled(ctx, sh);
            let (fl, fu) = f_abs[i];
            lo += sl.saturating_sub(fu);
            hi += su.saturating_sub(fl);
        }
        best_lo = best_lo.max(lo);
        best_hi = best_hi.max(hi);
    }
    let mut mismatch = 0u64;
    for i in 0..size {
        if in_e[i] && s[i] != f_lat[i] {
            mismatch += 1;
        }
    }
    let den = Rational::from_integer(q * BigInt::from(size) * (BigInt::one() << sh));
    let worst = Bounds::new(Rational::from_integer(best_lo.into()) / &den, Rational::from_integer(best_hi.into()) / &den);
    Ok(Sweep {
        mismatch: Rational::new(mismatch.into(), size.into()),
        worst,
        engine: format!("dense sweep over {} digit positions", space.positions.len()),
    })
}

/// Base-a digits of L, least significant first, padded to m.
fn digits_le(a: u32, mut l: u64, m: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(m as usize + 1);
    for _ in 0..m {
        out.push((l % a as u64) as u32);
        l /= a as u64;
    }
    out
}

/// Closed form of the Walsh–Dirichlet kernel D_L(t) = Σ_{ℓ<L} ψ_ℓ(t) for
/// L ≤ a^m, as a function of the first m digits of t.
pub struct Dirichlet<'c> {
    ctx: &'c Ctx,
    m: u32,
    l: u64,
    alpha: Vec<u32>,
    low: Vec<i128>,
}

impl<'c> Dirichlet<'c> {
    pub fn new(ctx: &'c Ctx, m: u32, l: u64) -> Dirichlet<'c> {
        let a = ctx.a as u64;
        let alpha = digits_le(ctx.a, l, m);
        let mut low = Vec::with_capacity(m as usize);
        let mut pw = 1u64;
        for _ in 0..m {
            low.push((l % pw) as i128);
            pw = pw.saturating_mul(a);
        }
        Dirichlet { ctx, m, l, alpha, low }
    }

    /// a^p Σ_{k<α_p} ω^{kd} + ω^{α_p d} L_p.
    fn core(&self, p: usize, d: u32) -> Lat {
        let a = self.ctx.a as i64;
        let al = self.alpha[p] as i64;
        let mut g = Lat::ZERO;
        for k in 0..al {
            g = g.add(&Lat::root(self.ctx, k * d as i64));
        }
        let ap = (self.ctx.a as i128).pow(p as u32);
        g.scale(ap).add(&Lat::root(self.ctx, al * d as i64 % a).scale(self.low[p]))
    }

    /// D_L(t) for t given by its first m digits.
    pub fn at(&self, t: &[u32]) -> Lat {
        let Some(p) = t.iter().position(|&d| d != 0) else {
            return Lat::int(self.l as i128);
        };
        let phase: i64 = (p + 1..self.m as usize).map(|q| self.alpha[q] as i64 * t[q] as i64).sum();
        self.core(p, t[p]).mul_root(self.ctx, phase)
    }

    /// Enclosure of Σ_{t≠0} |D_L(t)| · 2^sh over all a^m − 1 nonzero t.
    pub fn l1_scaled(&self, sh: u32) -> Option<(u128, u128)> {
        let a = self.ctx.a as u128;
        let (mut lo, mut hi) = (0u128, 0u128);
        for p in 0..self.m as usize {
            let count = a.checked_pow(self.m - 1 - p as u32)?;
            for d in 1..self.ctx.a {
                let (zl, zh) = self.core(p, d).abs_scaled(self.ctx, sh);
                lo = lo.checked_add(zl.checked_mul(count)?)?;
                hi = hi.checked_add(zh.checked_mul(count)?)?;
            }
        }
        Some((lo, hi))
    }

    /// Enclosure of max_{t≠0} |D_L(t)| · 2^sh.
    pub fn sup_scaled(&self, sh: u32) -> (u128, u128) {
        let mut best = (0u128, 0u128);
        for p in 0..self.m as usize {
            for d in 1..self.ctx.a {
                let (zl, zh) = self.core(p, d).abs_scaled(self.ctx, sh);
                best = (best.0.max(zl), best.1.max(zh));
            }
        }
        best
    }
}

/// Band character exponent Σ t_i y_i for tuples written little-endian.
pub fn char_exp(a: u32, t: u64, y: u64, r: u32) -> i64 {
    let (mut t, mut y) = (t, y);
    let mut e = 0i64;
    for _ in 0..r {
        e += ((t % a as u64) * (y % a as u64)) as i64;
        t /= a as u64;
        y /= a as u64;
    }
    e
}

/// Canonical exceptional set of a band block.
pub fn canonical_mask(a: u32, bands: &[BandPiece]) -> SetMask {
    SetMask { excluded: bands.iter().map(|b| Pattern::cell_with_zero_band(a, &b.cell, b.nu, b.r)).collect() }
}

fn same_patterns(x: &SetMask, y: &SetMask) -> bool {
    let mut p = x.excluded.clone();
    let mut q = y.excluded.clone();
    p.sort();
    q.sort();
    p == q
}

/// Mismatch measure of P = f on E for a band block with canonical mask.
fn band_mismatch(a: u32, pieces: &Pieces, bands: &[BandPiece]) -> Rational {
    let rank = bands.iter().map(|b| b.cell.rank).chain(pieces.iter().map(|(c, _)| c.rank)).max().unwrap_or(0);
    // rank-`rank` cells of either support: (f value, band value)
    let mut cells: BTreeMap<u64, (Rational, Option<(Rational, u32)>)> = BTreeMap::new();
    for (c, g) in pieces {
        for s in c.refine_to(a, rank) {
            cells.entry(s.index).or_insert((Rational::zero(), None)).0 = g.clone();
        }
    }
    for b in bands {
        for s in b.cell.refine_to(a, rank) {
            cells.entry(s.index).or_insert((Rational::zero(), None)).1 = Some((b.gamma.clone(), b.r));
        }
    }
    let cell_m = inv_pow(a, rank);
    let mut out = Rational::zero();
    for (fv, band) in cells.values() {
        match band {
            Some((g, r)) if g != fv => out += &cell_m * (Rational::one() - inv_pow(a, *r)),
            None if !fv.is_zero() => out += &cell_m,
            _ => {}
        }
    }
    out
}

/// Exact sweep for band blocks with the canonical exceptional set.
pub fn sweep_structured(a: u32, pieces: &Pieces, p: &CoeffBlock1D, e: &SetMask) -> Option<Result<Sweep>> {
    let Coeffs1D::Bands(bands) = &p.coeffs else {
        return None;
    };
    if bands.is_empty() || !Lat::supported(a) || !same_patterns(e, &canonical_mask(a, bands)) {
        return None;
    }
    let m = bands[0].cell.rank;
    let r = bands[0].r;
    if bands.iter().any(|b| b.cell.rank != m || b.r != r) || m > 40 || r > 8 {
        return None;
    }
    let am = (a as f64).powi(m as i32);
    let ar = (a as f64).powi(r as i32);
    let exact_cost = (bands.len() as f64).powi(2) * am * ar * ar;
    if bands.len() <= 16 && exact_cost <= 2e8 {
        Some(structured_inner(a, pieces, bands, m, r))
    } else {
        Some(uniform_inner(a, pieces, bands, m, r))
    }
}

/// Sound bound for many pieces. On Δ_i ∩ E with i < j the finished pieces
/// already equal f, so max(|f + p_j| − |f|, 0) ≤ |p_j| and the excess off
/// Δ_j is at most ∫|p_j|. Both terms scale with |γ_j|, so the maximum over
/// pieces is max|γ| times a maximum over (T*, L).
fn uniform_inner(a: u32, pieces: &Pieces, bands: &[BandPiece], m: u32, r: u32) -> Result<Sweep> {
    let ctx = Ctx::get(a);
    let sh = abs_shift(a);
    let am = (a as u128).checked_pow(m).ok_or_else(overflow)?;
    let ar = (a as u64).pow(r);
    let ar128 = ar as u128;
    if (am as f64) * ((ar * ar) as f64 + (m * a) as f64) > 3e8 {
        return Err(Error::Budget(format!("band sweep over {a}^{m} cutoffs per tuple over budget")));
    }
    let unit = 1u128 << sh;
    let cap = am.checked_mul(unit).ok_or_else(overflow)?;
    let mut prefix: Vec<Vec<Lat>> = Vec::with_capacity(ar as usize);
    let mut acc = vec![Lat::ZERO; ar as usize];
    for t in 0..ar {
        prefix.push(acc.clone());
        if t > 0 {
            for (y, v) in acc.iter_mut().enumerate() {
                *v = v.add(&Lat::root(ctx, char_exp(a, t, y as u64, r)));
            }
        }
    }
    let (mut best_lo, mut best_hi) = (0u128, 0u128);
    for l in 1..=am as u64 {
        let (tl, th) = Dirichlet::new(ctx, m, l).l1_scaled(sh).ok_or_else(overflow)?;
        let bulk = (tl.checked_mul(ar128 * ar128).ok_or_else(overflow)?, th.checked_mul(ar128 * ar128).ok_or_else(overflow)?);
        for tstar in 1..ar {
            let (mut lo, mut hi) = bulk;
            for y in 1..ar {
                let w = prefix[tstar as usize][y as usize]
                    .scale(am as i128)
                    .add(&Lat::root(ctx, char_exp(a, tstar, y, r)).scale(l as i128));
                let (wl, wh) = w.abs_scaled(ctx, sh);
                lo += wl.saturating_sub(cap) * ar128;
                hi += wh.saturating_sub(cap) * ar128;
            }
            best_lo = best_lo.max(lo);
            best_hi = best_hi.max(hi);
        }
    }
    let gmax = bands.iter().map(|b| b.gamma.abs()).max().unwrap_or_else(Rational::zero);
    let den = Rational::from_integer(BigInt::from(am) * BigInt::from(am) * BigInt::from(ar128 * ar128) * BigInt::from(unit));
    let _ = best_lo;
    let worst = Bounds::new(Rational::zero(), &gmax * Rational::from_integer(best_hi.into()) / &den);
    Ok(Sweep {
        mismatch: band_mismatch(a, pieces, bands),
        worst,
        engine: format!("dominated band bound over {} pieces (upper bound)", bands.len()),
    })
}

fn structured_inner(a: u32, pieces: &Pieces, bands: &[BandPiece], m: u32, r: u32) -> Result<Sweep> {
    let ctx = Ctx::get(a);
    let sh = abs_shift(a);
    let q = lcm_denoms(bands.iter().map(|b| &b.gamma));
    let g: Vec<i128> = bands
        .iter()
        .map(|b| (&b.gamma * Rational::from_integer(q.clone())).to_integer().to_i128().ok_or_else(overflow))
        .collect::<Result<_>>()?;
    let am = (a as u128).checked_pow(m).ok_or_else(overflow)?;
    let ar = (a as u64).pow(r);
    let am_i = am as i128;
    let unit = 1u128 << sh;
    let ar128 = ar as u128;
    // relative digits of every other piece
    let cell_digits: Vec<Vec<u32>> = bands.iter().map(|b| (0..m).map(|p| b.cell.digit(a, p)).collect()).collect();

    let (mut best_lo, mut best_hi) = (0u128, 0u128);
    for (j, bj) in bands.iter().enumerate() {
        let gj = g[j].unsigned_abs();
        let rel: Vec<Vec<u32>> = cell_digits
            .iter()
            .map(|cd| cd.iter().zip(&cell_digits[j]).map(|(x, y)| (x + a - y) % a).collect())
            .collect();
        // A_{T*}(y) for every tuple cut T* and band value y
        let mut prefix: Vec<Vec<Lat>> = Vec::with_capacity(ar as usize);
        let mut acc = vec![Lat::ZERO; ar as usize];
        for t in 0..ar {
            prefix.push(acc.clone());
            if t > 0 {
                for (y, v) in acc.iter_mut().enumerate() {
                    *v = v.add(&Lat::root(ctx, char_exp(a, t, y as u64, r)));
                }
            }
        }
        for l in 1..=am as u64 {
            let dk = Dirichlet::new(ctx, m, l);
            let (tot_lo, tot_hi) = dk.l1_scaled(sh).ok_or_else(overflow)?;
            // other pieces: exact joint values; remove them from the bulk
            let mut rest_lo = tot_lo;
            let mut rest_hi = tot_hi;
            let mut others_by_t: Vec<(usize, Lat)> = Vec::new();
            for (i, ri) in rel.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = dk.at(ri);
                let (dl, dh) = d.abs_scaled(ctx, sh);
                rest_lo = rest_lo.saturating_sub(dh);
                rest_hi = rest_hi.saturating_sub(dl);
                others_by_t.push((i, d));
            }
            let bulk_scale = gj.checked_mul(ar128 * ar128).ok_or_else(overflow)?;
            let bulk_lo = rest_lo.checked_mul(bulk_scale).ok_or_else(overflow)?;
            let bulk_hi = rest_hi.checked_mul(bulk_scale).ok_or_else(overflow)?;
            for tstar in 1..ar {
                let (mut lo, mut hi) = (bulk_lo, bulk_hi);
                let cap = am.checked_mul(unit).ok_or_else(overflow)?;
                for y in 1..ar {
                    let w = prefix[tstar as usize][y as usize]
                        .scale(am_i)
                        .add(&Lat::root(ctx, char_exp(a, tstar, y, r)).scale(l as i128));
                    let (wl, wh) = w.abs_scaled(ctx, sh);
                    lo = lo.checked_add(wl.saturating_sub(cap).checked_mul(gj * ar128).ok_or_else(overflow)?).ok_or_else(overflow)?;
                    hi = hi.checked_add(wh.saturating_sub(cap).checked_mul(gj * ar128).ok_or_else(overflow)?).ok_or_else(overflow)?;
                }
                for (i, d) in &others_by_t {
                    let before = if *i < j { g[*i] * am_i } else { 0 };
                    let fcap = (g[*i].unsigned_abs()).checked_mul(cap).ok_or_else(overflow)?;
                    for y in 0..ar {
                        let z = Lat::int(before).sub(&d.mul_root(ctx, char_exp(a, tstar, y, r)).scale(g[j]));
                        let (zl, zh) = z.abs_scaled(ctx, sh);
                        lo += zl.saturating_sub(fcap) * (ar128 - 1);
                        hi += zh.saturating_sub(fcap) * (ar128 - 1);
                    }
                }
                best_lo = best_lo.max(lo);
                best_hi = best_hi.max(hi);
            }
        }
        let _ = bj;
    }
    let den = Rational::from_integer(q * BigInt::from(am) * BigInt::from(am) * BigInt::from(ar128 * ar128) * BigInt::from(unit));
    let worst = Bounds::new(Rational::from_integer(best_lo.into()) / &den, Rational::from_integer(best_hi.into()) / &den);
    Ok(Sweep {
        mismatch: band_mismatch(a, pieces, bands),
        worst,
        engine: "closed-form band sweep (Dirichlet kernel classes)".into(),
    })
}

/// Render the exact polynomial of a band block on a dense grid (testing aid).
pub fn render_block(p: &CoeffBlock1D) -> Result<StepFunction> {
    p.render(None, p.rank())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn spec(a: u32, cells: &[(u32, u64, Rational)]) -> StepFunctionSpec {
        StepFunctionSpec {
            order: a,
            cells: cells.iter().map(|(r, i, v)| CellValue { cell: AdicCell { rank: *r, index: *i }, value: v.clone() }).collect(),
        }
    }

    #[test]
    fn dirichlet_closed_form_matches_direct_sum() {
        for a in [2u32, 3, 4] {
            let ctx = Ctx::get(a);
            let m = 3;
            let am = (a as u64).pow(m);
            for l in 0..=am {
                let dk = Dirichlet::new(ctx, m, l);
                for t in 0..am {
                    let td: Vec<u32> = (0..m).map(|p| crate::walsh::cell_digit(a, m, t, p)).collect();
                    let mut direct = Lat::ZERO;
                    for ell in 0..l {
                        let e: u64 = (0..m).map(|p| ((ell / (a as u64).pow(p)) % a as u64) * td[p as usize] as u64).sum();
                        direct = direct.add(&Lat::root(ctx, e as i64));
                    }
                    assert_eq!(dk.at(&td), direct, "a={a} L={l} t={t}");
                }
            }
        }
    }

    #[test]
    fn zero_target_is_trivial() {
        let res = lemma33_construct(
            &Lemma33Request { f: spec(2, &[]), eps: rat(1, 2), n0: 3u32.into() },
            &Lemma33Options::default(),
        )
        .unwrap();
        assert!(res.p.is_empty());
        assert_eq!(res.e.measure(2), int(1));
        assert!(res.certificate.passed());
    }

    #[test]
    fn half_interval_example() {
        let req = Lemma33Request { f: spec(2, &[(1, 0, int(1))]), eps: rat(1, 2), n0: 3u32.into() };
        let res = lemma33_construct(&req, &Lemma33Options::default()).unwrap();
        assert_eq!(res.r, 1);
        assert_eq!(res.e.measure(2), rat(3, 4));
        assert!(res.certificate.passed(), "{:?}", res.certificate);
        // the rendered polynomial is -χ_Δ φ_ν
        let f = render_block(&res.p).unwrap();
        let nu = match &res.p.coeffs {
            Coeffs1D::Bands(b) => b[0].nu,
            _ => unreachable!(),
        };
        for (i, v) in f.values.iter().enumerate() {
            let x_in = crate::walsh::cell_digit(2, f.rank, i as u64, 0) == 0;
            let band = crate::walsh::cell_digit(2, f.rank, i as u64, nu);
            let want = if !x_in { 0 } else if band == 0 { -1 } else { 1 };
            assert_eq!(v.as_rational().unwrap(), int(want));
        }
    }

    #[test]
    fn base_three_example() {
        let req = Lemma33Request { f: spec(3, &[(1, 0, int(3))]), eps: rat(1, 4), n0: 4u32.into() };
        let res = lemma33_construct(&req, &Lemma33Options::default()).unwrap();
        assert!(res.certificate.passed(), "{:?}", res.certificate.failures());
        assert!(res.e.measure(3) >= rat(3, 4));
    }

    #[test]
    fn structured_and_dense_agree() {
        for (a, cells, eps) in [
            (2u32, vec![(2u32, 1u64, rat(1, 2)), (2, 2, rat(-1, 4))], rat(1, 2)),
            (3, vec![(1, 2, rat(1, 3))], rat(1, 2)),
            (2, vec![(1, 1, rat(3, 4))], rat(1, 4)),
        ] {
            let pieces: Pieces = cells.iter().map(|(r, i, v)| (AdicCell { rank: *r, index: *i }, v.clone())).collect();
            for r in 1..=2 {
                let m = pieces[0].0.rank + 1;
                let (p, e) = build_bands(a, &pieces, &5u32.into(), r, m);
                let s = sweep_structured(a, &pieces, &p, &e).unwrap().unwrap();
                let d = sweep_dense(a, &pieces, &p, &e, &Lemma33Options::default()).unwrap();
                assert_eq!(s.mismatch, d.mismatch);
                assert!(s.worst.lo <= d.worst.hi && d.worst.lo <= s.worst.hi, "a={a} r={r}: {} vs {}", s.worst, d.worst);
                if a == 2 {
                    assert_eq!(s.worst, d.worst);
                }
                let _ = eps.clone();
            }
        }
    }

    #[test]
    fn positive_part_examples() {
        let s = vec![int(2), int(0), int(3)];
        let f = vec![int(1), int(1), int(1)];
        assert_eq!(positive_part_reduction(&s, &f, &[true, true, false], &rat(1, 3)), rat(1, 3));
    }
}
