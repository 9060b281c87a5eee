//! Double Walsh polynomials approximating step functions on rectangles.
//!
//! A single rectangle γ χ_{Δ₁×Δ₂} is handled as a product P₁(x)P₂(y) of
//! two 1D approximations whose spectra are separated by the squaring
//! schedule M₀ = 2(N₁²+1). With that gap every spherical partial sum is a
//! lexicographic prefix in (s, k): all rows below some s plus a prefix of
//! row s. Several rectangles are handled by stacking the windows of their
//! products one after another.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::approx1d::{block_positions, construct_pieces, max_coeff_abs, verify_pieces, Lemma33Options};
use crate::cert::{Certificate, Relation};
use crate::cyclo::{Ctx, Cyc, Lat};
use crate::digits::{DigitSpace, Pattern, ProductMask, SetMask};
use crate::error::{Error, Result};
use crate::grid::{AdicCell, Rect, StepFunction};
use crate::num::{int, Bounds, Rational};
use crate::transform::{CoeffBlock1D, CoeffBlock2D, Coeffs1D, Rank1Term};
use crate::walsh::{decompose_index, Order};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma34Request {
    pub order: u32,
    #[serde(with = "crate::num::rational_str")]
    pub gamma: Rational,
    pub rect: Rect,
    #[serde(with = "crate::num::rational_str")]
    pub delta: Rational,
    #[serde(with = "crate::num::biguint_str")]
    pub n: BigUint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma34Options {
    pub lemma33: Lemma33Options,
    /// Extra refinement levels the constructor may add to each factor.
    pub max_refine: u32,
    /// Work limit for exhaustive class-compressed sweeps.
    pub exact_work: u64,
    #[serde(default)]
    pub schedule: Schedule,
}

impl Default for Lemma34Options {
    fn default() -> Self {
        Lemma34Options { lemma33: Lemma33Options::default(), max_refine: 6, exact_work: 200_000_000, schedule: Schedule::Strict }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma34Result {
    pub block: CoeffBlock2D,
    pub e: ProductMask,
    #[serde(with = "crate::num::biguint_str")]
    pub n1: BigUint,
    #[serde(with = "crate::num::biguint_str")]
    pub m0: BigUint,
    #[serde(with = "crate::num::biguint_str")]
    pub m: BigUint,
    pub refine: u32,
    pub certificate: Certificate,
}

/// M₀ = 2(N₁² + 1).
pub fn schedule_m0(n1: &BigUint) -> BigUint {
    (n1 * n1 + 1u32) * 2u32
}

/// Column window start. `Compact` packs the windows tightly and gives up
/// the spherical guarantees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Strict,
    Compact,
}

impl Schedule {
    pub fn m0(self, n1: &BigUint) -> BigUint {
        match self {
            Schedule::Strict => schedule_m0(n1),
            Schedule::Compact => n1 + 1u32,
        }
    }

    fn rule(self) -> &'static str {
        match self {
            Schedule::Strict => "schedule M0 = 2(N1^2+1)",
            Schedule::Compact => "schedule M0 = N1+1",
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Schedule> {
        match s {
            "strict" => Ok(Schedule::Strict),
            "compact" => Ok(Schedule::Compact),
            _ => Err(Error::InvalidArgument(format!("unknown schedule {s}"))),
        }
    }
}

fn validate34(req: &Lemma34Request) -> Result<()> {
    let a = Order::new(req.order)?.get();
    if req.gamma.is_zero() {
        return Err(Error::InvalidArgument("γ must be nonzero".into()));
    }
    if !(req.delta.is_positive() && req.delta < Rational::one()) {
        return Err(Error::InvalidArgument("δ must lie in (0,1)".into()));
    }
    if req.n <= BigUint::one() {
        return Err(Error::InvalidArgument("N must exceed 1".into()));
    }
    AdicCell::new(a, req.rect.x.rank, req.rect.x.index)?;
    AdicCell::new(a, req.rect.y.rank, req.rect.y.index)?;
    Ok(())
}

/// Lower frequency handed to the 1D construction, which needs N₀ > 2.
pub fn row_floor(n: &BigUint) -> BigUint {
    n.max(&BigUint::from(3u32)).clone()
}

pub fn lemma34_construct(req: &Lemma34Request, opts: &Lemma34Options) -> Result<Lemma34Result> {
    validate34(req)?;
    let a = req.order;
    let eps1 = &req.delta / int(2);
    let n0 = row_floor(&req.n);
    let mut last = String::new();
    for extra in 0..=opts.max_refine {
        let mut o = opts.lemma33.clone();
        o.min_rank = req.rect.x.rank + extra;
        let x = construct_pieces(a, &vec![(req.rect.x, req.gamma.clone())], &eps1, &n0, &o)?;
        let n1 = x.p.hi.clone();
        let m0 = opts.schedule.m0(&n1);
        o.min_rank = req.rect.y.rank + extra;
        let y = construct_pieces(a, &vec![(req.rect.y, Rational::one())], &eps1, &m0, &o)?;
        let m = y.p.hi.clone();
        let mut rows = x.p;
        rows.lo = req.n.clone();
        let block = CoeffBlock2D {
            order: a,
            lo: req.n.clone(),
            hi: m.clone(),
            terms: vec![Rank1Term { gamma: Rational::one(), rows, cols: y.p }],
            explicit: Default::default(),
        };
        let mut res = Lemma34Result {
            block,
            e: ProductMask { x: x.e, y: y.e },
            n1,
            m0,
            m,
            refine: extra,
            certificate: Certificate::default(),
        };
        res.certificate = verify34(req, &res, opts, Some((x.certificate, y.certificate)));
        if res.certificate.passed() {
            return Ok(res);
        }
        last = res.certificate.failures().join(", ");
    }
    Err(Error::Budget(format!("unconstructible with budget: {last}")))
}

pub fn lemma34_verify(req: &Lemma34Request, res: &Lemma34Result, opts: &Lemma34Options) -> Certificate {
    verify34(req, res, opts, None)
}

/// Family maxima of ∫_E |S| and the mismatch measure of P = f on E.
#[derive(Clone, Debug)]
pub struct Families {
    pub rect: Bounds,
    pub sph: Bounds,
    pub mismatch: Bounds,
    pub exact: bool,
}

/// Multiply every coefficient of a 1D block by `g`.
pub fn scale_block(p: &CoeffBlock1D, g: &Rational) -> CoeffBlock1D {
    if g.is_one() {
        return p.clone();
    }
    let coeffs = match &p.coeffs {
        Coeffs1D::Bands(b) => Coeffs1D::Bands(
            b.iter()
                .map(|x| {
                    let mut y = x.clone();
                    y.gamma = &y.gamma * g;
                    y
                })
                .collect(),
        ),
        Coeffs1D::Explicit(m) => Coeffs1D::Explicit(m.iter().map(|(k, v)| (k.clone(), v.scale(g))).filter(|(_, v)| !v.is_zero()).collect()),
    };
    CoeffBlock1D { a: p.a, lo: p.lo.clone(), hi: p.hi.clone(), coeffs }
}

fn cond_entry<'c>(c: &'c Certificate, prefix: &str) -> Option<&'c crate::cert::Entry> {
    c.entries.iter().find(|e| e.name.starts_with(prefix))
}

fn verify34(
    req: &Lemma34Request,
    res: &Lemma34Result,
    opts: &Lemma34Options,
    factors: Option<(Certificate, Certificate)>,
) -> Certificate {
    let mut cert = Certificate::new("lemma 3.4");
    let a = req.order;
    let term = match (res.block.terms.as_slice(), res.block.explicit.is_empty()) {
        ([t], true) if res.block.order == a => t,
        _ => {
            cert.invariant("block is a single rank-1 term", false, "unexpected block shape");
            return cert;
        }
    };
    let p1 = scale_block(&term.rows, &term.gamma);
    let p2 = &term.cols;
    cert.invariant(
        opts.schedule.rule(),
        res.m0 == opts.schedule.m0(&res.n1),
        format!("N1 = {}, M0 = {}", res.n1, res.m0),
    );
    let within = |p: &CoeffBlock1D, lo: &BigUint, hi: &BigUint| {
        p.min_index().is_none_or(|k| &k >= lo) && p.max_index().is_none_or(|k| &k <= hi)
    };
    cert.invariant(
        "spectra within [N, N1] x [M0, M]",
        within(&p1, &req.n, &res.n1) && within(p2, &res.m0, &res.m) && res.n1 < res.m0,
        "row and column windows",
    );
    let gap = match (p1.min_index(), p1.max_index(), p2.min_index()) {
        (Some(k0), Some(k1), Some(s0)) => &k1 * &k1 - &k0 * &k0 < &s0 * 2u32 + 1u32,
        _ => true,
    };
    if opts.schedule == Schedule::Strict {
        cert.invariant("spherical cutoffs are lexicographic prefixes", gap, "N1^2 - N^2 < 2 M0 + 1");
    }

    let delta_b = Bounds::exact(req.delta.clone());
    cert.check(
        "(1) |E| > 1 - delta",
        Bounds::exact(res.e.measure(a)),
        Relation::Gt,
        Bounds::exact(Rational::one() - &req.delta),
        "product of exact pattern measures",
    );
    match res.block.lp_coefficient_norm(&(int(2) + &req.delta), None) {
        Ok(v) => cert.check("(2) sum |c_ks|^(2+delta) < delta", v, Relation::Lt, delta_b, "product formula over the rank-1 term"),
        Err(e) => cert.invariant("(2) sum |c_ks|^(2+delta) < delta", false, e.to_string()),
    };

    let eps1 = &req.delta / int(2);
    let (xc, yc) = factors.unwrap_or_else(|| {
        let x = verify_pieces(a, &vec![(req.rect.x, req.gamma.clone())], &eps1, &row_floor(&req.n), &p1, &res.e.x, &opts.lemma33);
        let y = verify_pieces(a, &vec![(req.rect.y, Rational::one())], &eps1, &res.m0, p2, &res.e.y, &opts.lemma33);
        (x, y)
    });
    let fam = families34(req, res, opts, &xc, &yc);
    let mode = if fam.exact { "exhaustive class-compressed sweep" } else { "dominated bound from the 1D factors (upper bound)" };
    cert.check("(3) P = gamma chi_Delta on E", fam.mismatch.clone(), Relation::Eq, Bounds::zero(), mode);
    let mass = req.gamma.abs() * req.rect.measure(a);
    let families: &[(&str, &Bounds, i64)] = match opts.schedule {
        Schedule::Strict => {
            cert.check(
                "(4) max rect int_E|S| + max sph int_E|S| <= 16 |gamma||Delta|",
                fam.rect.add(&fam.sph),
                Relation::Le,
                Bounds::exact(&mass * int(16)),
                format!("worst subset is E itself; {mode}"),
            );
            &[("rectangular", &fam.rect, 4), ("spherical", &fam.sph, 12)]
        }
        Schedule::Compact => {
            cert.check(
                "(4) max rect int_E|S| <= 16 |gamma||Delta|",
                fam.rect.clone(),
                Relation::Le,
                Bounds::exact(&mass * int(16)),
                format!("worst subset is E itself; {mode}; spherical family not certified (compact schedule)"),
            );
            &[("rectangular", &fam.rect, 4)]
        }
    };
    for &(label, v, k) in families {
        let rhs = Bounds::exact(&mass * int(k));
        let ok = Relation::Le.holds(v, &rhs);
        cert.note(format!(
            "per-family reading: {label} max {} <= {k}|gamma||Delta| = {}: {}",
            v.hi,
            rhs.hi,
            if ok { "pass" } else { "fail" }
        ));
    }
    cert.children.push(xc);
    cert.children.push(yc);
    cert
}

/// Exact families when the digit spaces are small, dominated otherwise.
pub fn families34(req: &Lemma34Request, res: &Lemma34Result, opts: &Lemma34Options, xc: &Certificate, yc: &Certificate) -> Families {
    let t = &res.block.terms[0];
    let p1 = scale_block(&t.rows, &t.gamma);
    exact_families34(req, &p1, &t.cols, &res.e, opts.exact_work).unwrap_or_else(|_| dominated_families34(req, &t.cols, xc, yc))
}

fn dominated_families34(req: &Lemma34Request, p2: &CoeffBlock1D, xc: &Certificate, yc: &Certificate) -> Families {
    let a = req.order;
    let hi_of = |c: &Certificate, pre: &str| cond_entry(c, pre).map(|e| e.lhs.clone());
    let big = Bounds::exact(Rational::from_integer(BigInt::one() << 64usize));
    let m1 = hi_of(xc, "(1)").unwrap_or_else(|| big.clone());
    let m2 = hi_of(yc, "(1)").unwrap_or_else(|| big.clone());
    let w1 = hi_of(xc, "(4)").unwrap_or_else(|| big.clone()).hi;
    let w2 = hi_of(yc, "(4)").unwrap_or_else(|| big.clone()).hi;
    let fx = req.gamma.abs() * req.rect.x.measure(a);
    let fy = req.rect.y.measure(a);
    let x_max = &fx + &w1;
    let y_max = &fy + &w2;
    let matched = m1.is_exact() && m1.hi.is_zero() && m2.is_exact() && m2.hi.is_zero();
    let x_full = if matched { fx } else { x_max.clone() };
    let b_max = max_coeff_abs(p2);
    let rect = &x_max * &y_max;
    let sph = &x_full * &y_max + &x_max * &b_max;
    let mismatch = if matched { Bounds::zero() } else { Bounds::new(Rational::zero(), &m1.hi + &m2.hi) };
    Families { rect: Bounds::new(Rational::zero(), rect), sph: Bounds::new(Rational::zero(), sph), mismatch, exact: false }
}

/// Points of one axis: which enumerated assignments lie in E, and in
/// which pieces' side cells.
pub(crate) struct Axis {
    pub space: DigitSpace,
    pub in_e: Vec<bool>,
    pub memb: Vec<u64>,
}

impl Axis {
    pub fn new(a: u32, blocks: &[&CoeffBlock1D], cells: &[AdicCell], mask: &SetMask) -> Result<Axis> {
        let mut pos = mask.positions();
        for b in blocks {
            pos.extend(block_positions(b)?);
        }
        for c in cells {
            pos.extend(0..c.rank);
        }
        let space = DigitSpace::new(a, pos)?;
        let in_e = space.membership(mask);
        let mut memb = vec![0u64; space.size()];
        for (i, c) in cells.iter().enumerate() {
            for (j, hit) in space.pattern_hits(&Pattern::cell(a, c)).into_iter().enumerate() {
                if hit {
                    memb[j] |= 1 << i;
                }
            }
        }
        Ok(Axis { space, in_e, memb })
    }
}

/// Coefficients of a block as lattice points scaled by a common
/// denominator, with their exponent tables on an axis.
pub(crate) struct Scan {
    pub q: BigInt,
    pub coeffs: Vec<(Lat, Vec<u32>)>,
}

impl Scan {
    pub fn new(axis: &Axis, p: &CoeffBlock1D, limit: u64) -> Result<Scan> {
        let order = Order::new(p.a)?;
        let list: Vec<(BigUint, Cyc)> = p.to_explicit(limit)?.iter().collect();
        let q = list.iter().flat_map(|(_, c)| c.coords().iter()).fold(BigInt::one(), |l, r| l.lcm(r.denom()));
        let mut coeffs = Vec::with_capacity(list.len());
        for (k, c) in &list {
            let lat = Lat::from_cyc(c, &q).ok_or_else(|| Error::Budget("coefficient outside integer range".into()))?;
            coeffs.push((lat, axis.space.walsh_exponents(&decompose_index(k, order))?));
        }
        Ok(Scan { q, coeffs })
    }

    pub fn qi(&self) -> Result<i128> {
        self.q.to_i128().ok_or_else(|| Error::Budget("denominator outside integer range".into()))
    }

    /// Values of every prefix sum, starting with the empty one.
    pub fn prefixes(&self, ctx: &Ctx, size: usize, mut visit: impl FnMut(usize, &[Lat], Option<(&Lat, &[u32])>)) {
        let mut cur = vec![Lat::ZERO; size];
        for (i, (c, ex)) in self.coeffs.iter().enumerate() {
            visit(i, &cur, Some((c, ex)));
            let table: Vec<Lat> = (0..ctx.a as i64).map(|t| c.mul_root(ctx, t)).collect();
            for (v, &e) in cur.iter_mut().zip(ex) {
                *v = v.add(&table[e as usize]);
            }
        }
        visit(self.coeffs.len(), &cur, None);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Class {
    pub u: [Lat; 2],
    pub memb: u64,
}

pub(crate) fn classes(axis: &Axis, val: impl Fn(usize) -> [Lat; 2], with_memb: bool) -> Vec<(Class, u64)> {
    let mut map: HashMap<Class, u64> = HashMap::new();
    for i in 0..axis.in_e.len() {
        if axis.in_e[i] {
            let key = Class { u: val(i), memb: if with_memb { axis.memb[i] } else { 0 } };
            *map.entry(key).or_insert(0) += 1;
        }
    }
    let mut v: Vec<(Class, u64)> = map.into_iter().collect();
    v.sort_by(|x, y| format!("{:?}", x.0).cmp(&format!("{:?}", y.0)));
    v
}

/// Evaluation of Σ_pairs w_x w_y φ(S) with S = [piece < done]·γ + u₀v₀ + u₁v₁.
pub(crate) struct PairEval<'c> {
    pub ctx: &'c Ctx,
    pub sh: u32,
    /// γ of each piece times `qf`.
    pub gam: Vec<i128>,
    pub qf: i128,
    pub qxy: i128,
    pub done: usize,
    /// Subtract |f| and keep the positive part, or take |S|.
    pub pos: bool,
}

impl PairEval<'_> {
    pub fn sum(&self, xs: &[(Class, u64)], ys: &[(Class, u64)]) -> Result<(u128, u128)> {
        let (mut lo, mut hi) = (0u128, 0u128);
        let unit = 1u128 << self.sh;
        for (x, wx) in xs {
            for (y, wy) in ys {
                let both = x.memb & y.memb;
                let piece = (both != 0).then(|| both.trailing_zeros() as usize);
                let mut s = x.u[0].mul(self.ctx, &y.u[0]).add(&x.u[1].mul(self.ctx, &y.u[1])).scale(self.qf);
                if let Some(i) = piece.filter(|&i| i < self.done) {
                    s = s.add(&Lat::int(self.gam[i] * self.qxy));
                }
                let (sl, su) = s.abs_scaled(self.ctx, self.sh);
                let (vl, vu) = match (self.pos, piece) {
                    (true, Some(i)) => {
                        let f = (self.gam[i].unsigned_abs() * self.qxy as u128).checked_mul(unit).ok_or_else(overflow)?;
                        (sl.saturating_sub(f), su.saturating_sub(f))
                    }
                    _ => (sl, su),
                };
                let w = (*wx as u128) * (*wy as u128);
                lo = lo.checked_add(vl.checked_mul(w).ok_or_else(overflow)?).ok_or_else(overflow)?;
                hi = hi.checked_add(vu.checked_mul(w).ok_or_else(overflow)?).ok_or_else(overflow)?;
            }
        }
        Ok((lo, hi))
    }
}

pub(crate) fn overflow() -> Error {
    Error::Budget("integer range exceeded in 2D verifier".into())
}

pub(crate) fn shift_for(a: u32) -> u32 {
    if a == 2 {
        0
    } else {
        20
    }
}

pub(crate) fn to_bounds(lo: u128, hi: u128, den: &BigInt) -> Bounds {
    let d = Rational::from_integer(den.clone());
    Bounds::new(Rational::from_integer(lo.into()) / &d, Rational::from_integer(hi.into()) / &d)
}

/// Lexicographic spherical states: x classes of (A_full, A_k) for every
/// row prefix k, y classes of (B_{<s}, b_s ψ_s) for every column s.
pub(crate) fn sph_tables(
    ctx: &Ctx,
    xa: &Axis,
    xs: &Scan,
    ya: &Axis,
    ys: &Scan,
    memb: bool,
) -> (Vec<Vec<(Class, u64)>>, Vec<Vec<(Class, u64)>>) {
    let mut full = Vec::new();
    xs.prefixes(ctx, xa.space.size(), |_, cur, next| {
        if next.is_none() {
            full = cur.to_vec();
        }
    });
    let mut xt = Vec::new();
    xs.prefixes(ctx, xa.space.size(), |_, cur, _| {
        xt.push(classes(xa, |i| [full[i], cur[i]], memb));
    });
    let mut yt = Vec::new();
    ys.prefixes(ctx, ya.space.size(), |_, cur, next| {
        if let Some((c, ex)) = next {
            yt.push(classes(ya, |i| [cur[i], c.mul_root(ctx, ex[i] as i64)], memb));
        }
    });
    (xt, yt)
}

/// Exhaustive evaluation of a single rank-1 term on dense digit spaces.
fn exact_families34(req: &Lemma34Request, p1: &CoeffBlock1D, p2: &CoeffBlock1D, e: &ProductMask, work: u64) -> Result<Families> {
    let a = req.order;
    if !Lat::supported(a) {
        return Err(Error::Budget("order not supported by the lattice engine".into()));
    }
    let ctx = Ctx::get(a);
    let sh = shift_for(a);
    let xa = Axis::new(a, &[p1], &[req.rect.x], &e.x)?;
    let ya = Axis::new(a, &[p2], &[req.rect.y], &e.y)?;
    let (nx, ny) = (xa.space.size(), ya.space.size());
    let est = |p: &CoeffBlock1D, n: usize| p.count().to_f64().unwrap_or(f64::INFINITY) * n as f64;
    if est(p1, nx) + est(p2, ny) > 4e7 {
        return Err(Error::Budget("dense factor scan over budget".into()));
    }
    let xs = Scan::new(&xa, p1, 1 << 20)?;
    let ys = Scan::new(&ya, p2, 1 << 20)?;
    let (qx, qy) = (xs.qi()?, ys.qi()?);

    // rectangular family: ∫_{E1×E2} |A_n B_m| = ∫_{E1}|A_n| · ∫_{E2}|B_m|
    let l1_max = |ax: &Axis, sc: &Scan| {
        let (mut blo, mut bhi) = (0u128, 0u128);
        let mut full = Vec::new();
        sc.prefixes(ctx, ax.space.size(), |_, cur, next| {
            let (mut lo, mut hi) = (0u128, 0u128);
            for (i, v) in cur.iter().enumerate() {
                if ax.in_e[i] {
                    let (l, h) = v.abs_scaled(ctx, sh);
                    lo += l;
                    hi += h;
                }
            }
            blo = blo.max(lo);
            bhi = bhi.max(hi);
            if next.is_none() {
                full = cur.to_vec();
            }
        });
        (blo, bhi, full)
    };
    let (xl, xh, afull) = l1_max(&xa, &xs);
    let (yl, yh, bfull) = l1_max(&ya, &ys);
    let xden = BigInt::from(qx) * BigInt::from(nx) << sh;
    let yden = BigInt::from(qy) * BigInt::from(ny) << sh;
    let rect = to_bounds(xl, xh, &xden).mul_nonneg(&to_bounds(yl, yh, &yden));

    // P = γ χ_Δ on E
    let qf = req.gamma.denom().to_i128().ok_or_else(overflow)?;
    let gf = req.gamma.numer().to_i128().ok_or_else(overflow)?;
    let xm = classes(&xa, |i| [afull[i], Lat::ZERO], true);
    let ym = classes(&ya, |i| [bfull[i], Lat::ZERO], true);
    let mut bad = 0u128;
    for (x, wx) in &xm {
        for (y, wy) in &ym {
            let want = if x.memb & y.memb != 0 { gf * qx * qy } else { 0 };
            if x.u[0].mul(ctx, &y.u[0]).scale(qf) != Lat::int(want) {
                bad += (*wx as u128) * (*wy as u128);
            }
        }
    }
    let mismatch = Bounds::exact(Rational::new(BigInt::from(bad), BigInt::from(nx) * BigInt::from(ny)));

    let (xt, yt) = sph_tables(ctx, &xa, &xs, &ya, &ys, false);
    let cost: f64 = xt.iter().map(|t| t.len() as f64).sum::<f64>() * yt.iter().map(|t| t.len() as f64).sum::<f64>();
    if cost > work as f64 {
        return Err(Error::Budget("spherical sweep over budget".into()));
    }
    let pe = PairEval { ctx, sh, gam: vec![], qf: 1, qxy: qx * qy, done: 0, pos: false };
    let (mut slo, mut shi) = (0u128, 0u128);
    for ycl in &yt {
        for xcl in &xt {
            let (lo, hi) = pe.sum(xcl, ycl)?;
            slo = slo.max(lo);
            shi = shi.max(hi);
        }
    }
    let sph = to_bounds(slo, shi, &(BigInt::from(qx * qy) * BigInt::from(nx) * BigInt::from(ny) << sh));
    Ok(Families { rect, sph, mismatch, exact: true })
}

/// Render P₁ ⊗ P₂ of a Lemma 3.4 block on a rank-m grid (testing aid).
pub fn render_product(res: &Lemma34Result, m: u32) -> Result<StepFunction> {
    let t = &res.block.terms[0];
    let x = scale_block(&t.rows, &t.gamma).render(None, m)?;
    let y = t.cols.render(None, m)?;
    crate::grid::tensor(&x, &y)
}

/// One constancy rectangle of a 2D step function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece2D {
    pub rect: Rect,
    #[serde(with = "crate::num::rational_str")]
    pub gamma: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma35Request {
    pub order: u32,
    pub pieces: Vec<Piece2D>,
    #[serde(with = "crate::num::rational_str")]
    pub eps: Rational,
    #[serde(with = "crate::num::biguint_str")]
    pub n: BigUint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma35Options {
    pub lemma34: Lemma34Options,
    /// Largest piece count allowed after splitting.
    pub max_pieces: usize,
}

impl Default for Lemma35Options {
    fn default() -> Self {
        Lemma35Options { lemma34: Lemma34Options::default(), max_pieces: 64 }
    }
}

/// Manifest entry of one stacked piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceWindow {
    pub nu: usize,
    pub piece: Piece2D,
    #[serde(with = "crate::num::rational_str")]
    pub delta: Rational,
    #[serde(with = "crate::num::biguint_str")]
    pub n_nu: BigUint,
    #[serde(with = "crate::num::biguint_str")]
    pub n1: BigUint,
    #[serde(with = "crate::num::biguint_str")]
    pub m0: BigUint,
    #[serde(with = "crate::num::biguint_str")]
    pub m_nu: BigUint,
    pub refine: u32,
    pub e: ProductMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma35Result {
    pub block: CoeffBlock2D,
    pub e: ProductMask,
    pub windows: Vec<PieceWindow>,
    pub certificate: Certificate,
}

impl Lemma35Request {
    pub fn validate(&self) -> Result<()> {
        let a = Order::new(self.order)?.get();
        if !(self.eps.is_positive() && self.eps < Rational::one()) {
            return Err(Error::InvalidArgument("ε must lie in (0,1)".into()));
        }
        if self.n <= BigUint::one() {
            return Err(Error::InvalidArgument("N must exceed 1".into()));
        }
        for (i, p) in self.pieces.iter().enumerate() {
            AdicCell::new(a, p.rect.x.rank, p.rect.x.index)?;
            AdicCell::new(a, p.rect.y.rank, p.rect.y.index)?;
            if self.pieces[i + 1..].iter().any(|q| !p.rect.disjoint(a, &q.rect)) {
                return Err(Error::InvalidArgument("pieces overlap".into()));
            }
        }
        Ok(())
    }

    /// Nonzero cells of a 2D step function as square pieces.
    pub fn from_step_function(f: &StepFunction, eps: Rational, n: BigUint) -> Result<Lemma35Request> {
        if f.dim != crate::grid::Dim::Two {
            return Err(Error::Shape("expected a 2D step function".into()));
        }
        let vals = f.real_values().ok_or_else(|| Error::InvalidArgument("values must be real rationals".into()))?;
        let side = f.side();
        let pieces = vals
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| Piece2D {
                rect: Rect {
                    x: AdicCell { rank: f.rank, index: i as u64 / side },
                    y: AdicCell { rank: f.rank, index: i as u64 % side },
                },
                gamma: v,
            })
            .collect();
        Ok(Lemma35Request { order: f.a, pieces, eps, n })
    }
}

/// Split pieces until every |γ||Δ| < ε/32: the longer side (the lower
/// rank, x on ties) is cut into its a children.
pub fn split_pieces(a: u32, pieces: &[Piece2D], eps: &Rational, max_pieces: usize) -> Result<Vec<Piece2D>> {
    let bound = eps / int(32);
    let mut out: Vec<Piece2D> = pieces.iter().filter(|p| !p.gamma.is_zero()).cloned().collect();
    loop {
        let Some(i) = out.iter().position(|p| p.gamma.abs() * p.rect.measure(a) >= bound) else {
            return Ok(out);
        };
        let p = out.remove(i);
        let kids: Vec<Piece2D> = if p.rect.x.rank <= p.rect.y.rank {
            p.rect.x.children(a).into_iter().map(|x| Piece2D { rect: Rect { x, y: p.rect.y }, gamma: p.gamma.clone() }).collect()
        } else {
            p.rect.y.children(a).into_iter().map(|y| Piece2D { rect: Rect { x: p.rect.x, y }, gamma: p.gamma.clone() }).collect()
        };
        for (j, k) in kids.into_iter().enumerate() {
            out.insert(i + j, k);
        }
        if out.len() > max_pieces {
            return Err(Error::Budget(format!("splitting needs more than {max_pieces} pieces")));
        }
    }
}

/// δ_ν = min(ε/(16ν₀), ε/2^ν).
pub fn piece_delta(eps: &Rational, nu: usize, nu0: usize) -> Rational {
    let a = eps / int(16 * nu0 as i64);
    let b = eps / Rational::from_integer(BigInt::one() << nu);
    a.min(b)
}

pub fn lemma35_construct(req: &Lemma35Request, opts: &Lemma35Options) -> Result<Lemma35Result> {
    req.validate()?;
    let a = req.order;
    let pieces = split_pieces(a, &req.pieces, &req.eps, opts.max_pieces)?;
    let nu0 = pieces.len();
    let mut windows = Vec::with_capacity(nu0);
    let mut terms = Vec::with_capacity(nu0);
    let mut children = Vec::with_capacity(nu0);
    let mut next = req.n.clone();
    for (i, p) in pieces.iter().enumerate() {
        let delta = piece_delta(&req.eps, i + 1, nu0);
        let r34 = Lemma34Request { order: a, gamma: p.gamma.clone(), rect: p.rect, delta: delta.clone(), n: next.clone() };
        let res = lemma34_construct(&r34, &opts.lemma34)?;
        windows.push(PieceWindow {
            nu: i + 1,
            piece: p.clone(),
            delta,
            n_nu: next.clone(),
            n1: res.n1.clone(),
            m0: res.m0.clone(),
            m_nu: res.m.clone(),
            refine: res.refine,
            e: res.e.clone(),
        });
        next = &res.m + 1u32;
        terms.extend(res.block.terms);
        children.push(res.certificate);
    }
    let e = windows.iter().fold(ProductMask::full(), |acc, w| acc.intersect(&w.e));
    let hi = windows.last().map_or(req.n.clone(), |w| w.m_nu.clone());
    let block = CoeffBlock2D { order: a, lo: req.n.clone(), hi, terms, explicit: Default::default() };
    let mut res = Lemma35Result { block, e, windows, certificate: Certificate::default() };
    res.certificate = verify35(req, &res, opts, Some(children));
    Ok(res)
}

pub fn lemma35_verify(req: &Lemma35Request, res: &Lemma35Result, opts: &Lemma35Options) -> Certificate {
    verify35(req, res, opts, None)
}

/// The manifest pieces describe the same function as the request.
fn pieces_represent(a: u32, req: &[Piece2D], split: &[Piece2D]) -> bool {
    let inside = |s: &Piece2D, p: &Piece2D| p.rect.x.contains(a, &s.rect.x) && p.rect.y.contains(a, &s.rect.y);
    let all_inside = split.iter().all(|s| req.iter().any(|p| inside(s, p) && p.gamma == s.gamma));
    let disjoint = split.iter().enumerate().all(|(i, s)| split[i + 1..].iter().all(|t| s.rect.disjoint(a, &t.rect)));
    let covered = req.iter().filter(|p| !p.gamma.is_zero()).all(|p| {
        let area: Rational = split.iter().filter(|s| inside(s, p)).map(|s| s.rect.measure(a)).sum();
        area == p.rect.measure(a)
    });
    all_inside && disjoint && covered
}

fn verify35(req: &Lemma35Request, res: &Lemma35Result, opts: &Lemma35Options, children: Option<Vec<Certificate>>) -> Certificate {
    let mut cert = Certificate::new("lemma 3.5");
    let a = req.order;
    let ws = &res.windows;
    let shape_ok = res.block.order == a && res.block.explicit.is_empty() && res.block.terms.len() == ws.len();
    cert.invariant("one rank-1 term per piece", shape_ok, format!("{} terms, {} pieces", res.block.terms.len(), ws.len()));
    if !shape_ok {
        return cert;
    }
    let split: Vec<Piece2D> = ws.iter().map(|w| w.piece.clone()).collect();
    cert.invariant("pieces represent f", pieces_represent(a, &req.pieces, &split), "containment, disjointness and coverage");
    let nu0 = ws.len();
    let mass_ok = split.iter().all(|p| p.gamma.abs() * p.rect.measure(a) < &req.eps / int(32));
    cert.invariant("max |gamma||Delta| < eps/32", mass_ok, "after splitting");
    let mut stacked = ws.first().is_none_or(|w| w.n_nu == req.n);
    for (i, (w, t)) in ws.iter().zip(&res.block.terms).enumerate() {
        let lo_ok = t.rows.min_index().is_none_or(|k| k >= w.n_nu) && t.cols.min_index().is_none_or(|k| k >= w.n_nu);
        let hi_ok = t.rows.max_index().is_none_or(|k| k <= w.m_nu) && t.cols.max_index().is_none_or(|k| k <= w.m_nu);
        let chain = i == 0 || w.n_nu == &ws[i - 1].m_nu + 1u32;
        let delta_ok = w.delta == piece_delta(&req.eps, i + 1, nu0);
        stacked &= lo_ok && hi_ok && chain && delta_ok && w.nu == i + 1;
    }
    cert.invariant("windows stacked with N_nu = M_(nu-1) + 1", stacked, "per-piece windows and deltas");
    let e_ok = res.e == ws.iter().fold(ProductMask::full(), |acc, w| acc.intersect(&w.e));
    cert.invariant("E is the intersection of the piece sets", e_ok, "product of intersections");

    let piece_certs: Vec<Certificate> = children.unwrap_or_else(|| {
        ws.iter()
            .zip(&res.block.terms)
            .map(|(w, t)| {
                let (r34, p34) = piece_parts(a, w, t);
                lemma34_verify(&r34, &p34, &opts.lemma34)
            })
            .collect()
    });

    cert.check(
        "(2) |E| > 1 - eps",
        Bounds::exact(res.e.measure(a)),
        Relation::Gt,
        Bounds::exact(Rational::one() - &req.eps),
        "product of exact union measures",
    );
    match res.block.lp_coefficient_norm(&(int(2) + &req.eps), None) {
        Ok(v) => cert.check("(3) sum |c_ks|^(2+eps) < eps", v, Relation::Lt, Bounds::exact(req.eps.clone()), "product formula, disjoint windows"),
        Err(e) => cert.invariant("(3) sum |c_ks|^(2+eps) < eps", false, e.to_string()),
    };

    let fam = exact_families35(a, res, &split, opts.lemma34.exact_work)
        .unwrap_or_else(|_| dominated_families35(a, res, &piece_certs, &opts.lemma34));
    let mode = if fam.exact { "exhaustive class-compressed sweep" } else { "per-piece dominated bound (upper bound)" };
    cert.check("(1) P = f on E", fam.mismatch.clone(), Relation::Eq, Bounds::zero(), mode);
    let per_cutoff = match opts.lemma34.schedule {
        Schedule::Strict => {
            cert.check(
                "(4) max rect + max sph excess over int_e|f| <= eps",
                fam.rect.add(&fam.sph),
                Relation::Le,
                Bounds::exact(req.eps.clone()),
                format!("sum of family positive parts against |f|; {mode}"),
            );
            fam.rect.max(&fam.sph)
        }
        Schedule::Compact => {
            cert.check(
                "(4) max rect excess over int_e|f| <= eps",
                fam.rect.clone(),
                Relation::Le,
                Bounds::exact(req.eps.clone()),
                format!("positive part against |f|; {mode}; spherical family not certified (compact schedule)"),
            );
            fam.rect.clone()
        }
    };
    cert.note(format!(
        "per-cutoff reading max_spec sum_E max(|S|-2|f|,0) <= {} <= eps: {}",
        per_cutoff.hi,
        if Relation::Le.holds(&per_cutoff, &Bounds::exact(req.eps.clone())) { "pass" } else { "fail" }
    ));
    cert.children = piece_certs;
    cert
}

/// Rebuild the Lemma 3.4 request and result of one stacked piece.
pub fn piece_parts(a: u32, w: &PieceWindow, t: &Rank1Term) -> (Lemma34Request, Lemma34Result) {
    let req = Lemma34Request { order: a, gamma: w.piece.gamma.clone(), rect: w.piece.rect, delta: w.delta.clone(), n: w.n_nu.clone() };
    let block = CoeffBlock2D {
        order: a,
        lo: w.n_nu.clone(),
        hi: w.m_nu.clone(),
        terms: vec![t.clone()],
        explicit: Default::default(),
    };
    let res = Lemma34Result {
        block,
        e: w.e.clone(),
        n1: w.n1.clone(),
        m0: w.m0.clone(),
        m: w.m_nu.clone(),
        refine: w.refine,
        certificate: Certificate::default(),
    };
    (req, res)
}

/// With earlier pieces complete, |f + S_ν| − |f| ≤ |S_ν| on E ⊆ E_ν, so
/// each family's excess is at most the piece's own family maximum.
fn dominated_families35(a: u32, res: &Lemma35Result, piece_certs: &[Certificate], opts: &Lemma34Options) -> Families {
    let mut rect = Rational::zero();
    let mut sph = Rational::zero();
    let mut matched = true;
    for ((w, t), c) in res.windows.iter().zip(&res.block.terms).zip(piece_certs) {
        let (r34, p34) = piece_parts(a, w, t);
        let fam = match c.children.as_slice() {
            [xc, yc, ..] => families34(&r34, &p34, opts, xc, yc),
            _ => {
                matched = false;
                continue;
            }
        };
        matched &= fam.mismatch.is_exact() && fam.mismatch.hi.is_zero();
        rect = rect.max(fam.rect.hi);
        sph = sph.max(fam.sph.hi);
    }
    let mismatch = if matched { Bounds::zero() } else { Bounds::new(Rational::zero(), Rational::one()) };
    Families { rect: Bounds::new(Rational::zero(), rect), sph: Bounds::new(Rational::zero(), sph), mismatch, exact: false }
}

/// Exhaustive (4⁰) and (1⁰) over dense digit spaces: for each piece ν and
/// each of its cutoffs, earlier pieces equal f on E and the sum is
/// f_{<ν} + (partial product of piece ν).
fn exact_families35(a: u32, res: &Lemma35Result, split: &[Piece2D], work: u64) -> Result<Families> {
    if !Lat::supported(a) || split.len() > 64 {
        return Err(Error::Budget("outside the lattice engine".into()));
    }
    let ctx = Ctx::get(a);
    let sh = shift_for(a);
    let rows: Vec<CoeffBlock1D> = res.block.terms.iter().map(|t| scale_block(&t.rows, &t.gamma)).collect();
    let cols: Vec<&CoeffBlock1D> = res.block.terms.iter().map(|t| &t.cols).collect();
    let xcells: Vec<AdicCell> = split.iter().map(|p| p.rect.x).collect();
    let ycells: Vec<AdicCell> = split.iter().map(|p| p.rect.y).collect();
    let xa = Axis::new(a, &rows.iter().collect::<Vec<_>>(), &xcells, &res.e.x)?;
    let ya = Axis::new(a, &cols, &ycells, &res.e.y)?;
    let (nx, ny) = (xa.space.size(), ya.space.size());
    let scan_cost: f64 = rows
        .iter()
        .zip(&cols)
        .map(|(r, c)| r.count().to_f64().unwrap_or(f64::INFINITY) * nx as f64 + c.count().to_f64().unwrap_or(f64::INFINITY) * ny as f64)
        .sum();
    if scan_cost > 4e7 {
        return Err(Error::Budget("dense factor scan over budget".into()));
    }
    let qf_big = split.iter().fold(BigInt::one(), |l, p| l.lcm(p.gamma.denom()));
    let qf = qf_big.to_i128().ok_or_else(overflow)?;
    let gam: Vec<i128> = split
        .iter()
        .map(|p| (&p.gamma * Rational::from_integer(qf_big.clone())).to_integer().to_i128().ok_or_else(overflow))
        .collect::<Result<_>>()?;

    let mut spent = 0f64;
    let mut rect = Bounds::zero();
    let mut sph = Bounds::zero();
    let mut bad = Rational::zero();
    for nu in 0..split.len() {
        let xs = Scan::new(&xa, &rows[nu], 1 << 20)?;
        let ys = Scan::new(&ya, cols[nu], 1 << 20)?;
        let qxy = xs.qi()?.checked_mul(ys.qi()?).ok_or_else(overflow)?;
        let den = BigInt::from(qf) * BigInt::from(qxy) * BigInt::from(nx) * BigInt::from(ny) << sh;
        let pe = PairEval { ctx, sh, gam: gam.clone(), qf, qxy, done: nu, pos: true };

        let mut xr = Vec::new();
        let mut xfull = Vec::new();
        xs.prefixes(ctx, nx, |i, cur, next| {
            if i > 0 {
                xr.push(classes(&xa, |j| [cur[j], Lat::ZERO], true));
            }
            if next.is_none() {
                xfull = cur.to_vec();
            }
        });
        let mut yr = Vec::new();
        let mut yfull = Vec::new();
        ys.prefixes(ctx, ny, |i, cur, next| {
            if i > 0 {
                yr.push(classes(&ya, |j| [cur[j], Lat::ZERO], true));
            }
            if next.is_none() {
                yfull = cur.to_vec();
            }
        });
        let (xt, yt) = sph_tables(ctx, &xa, &xs, &ya, &ys, true);
        let size = |t: &Vec<Vec<(Class, u64)>>| t.iter().map(|v| v.len() as f64).sum::<f64>();
        spent += size(&xr) * size(&yr) + size(&xt) * size(&yt);
        if spent > work as f64 {
            return Err(Error::Budget("class sweep over budget".into()));
        }
        let family_max = |xs_: &Vec<Vec<(Class, u64)>>, ys_: &Vec<Vec<(Class, u64)>>| -> Result<Bounds> {
            let (mut lo, mut hi) = (0u128, 0u128);
            for yc in ys_ {
                for xc in xs_ {
                    let (l, h) = pe.sum(xc, yc)?;
                    lo = lo.max(l);
                    hi = hi.max(h);
                }
            }
            Ok(to_bounds(lo, hi, &den))
        };
        rect = rect.max(&family_max(&xr, &yr)?);
        sph = sph.max(&family_max(&xt, &yt)?);

        // piece ν agrees with γ_ν χ_{Δ_ν} on E
        let xm = classes(&xa, |j| [xfull[j], Lat::ZERO], true);
        let ym = classes(&ya, |j| [yfull[j], Lat::ZERO], true);
        let mut wrong = 0u128;
        for (x, wx) in &xm {
            for (y, wy) in &ym {
                let inside = (x.memb & y.memb) >> nu & 1 == 1;
                let want = if inside { gam[nu] * qxy } else { 0 };
                if x.u[0].mul(ctx, &y.u[0]).scale(qf) != Lat::int(want) {
                    wrong += (*wx as u128) * (*wy as u128);
                }
            }
        }
        bad += Rational::new(BigInt::from(wrong), BigInt::from(nx) * BigInt::from(ny));
    }
    let mismatch = if bad.is_zero() { Bounds::zero() } else { Bounds::new(Rational::zero(), bad) };
    Ok(Families { rect, sph, mismatch, exact: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn cell(rank: u32, index: u64) -> AdicCell {
        AdicCell { rank, index }
    }

    fn small34() -> Lemma34Request {
        Lemma34Request {
            order: 2,
            gamma: rat(1, 2),
            rect: Rect { x: cell(3, 1), y: cell(3, 6) },
            delta: rat(1, 2),
            n: 3u32.into(),
        }
    }

    #[test]
    fn squaring_schedule() {
        assert_eq!(schedule_m0(&4u32.into()), BigUint::from(34u32));
    }

    #[test]
    fn small_rectangle_passes_exactly() {
        let req = small34();
        let res = lemma34_construct(&req, &Lemma34Options::default()).unwrap();
        assert!(res.certificate.passed(), "{:#?}", res.certificate);
        assert_eq!(res.m0, schedule_m0(&res.n1));
        let e4 = res.certificate.entries.iter().find(|e| e.name.starts_with("(4)")).unwrap();
        assert!(e4.reduction.contains("exhaustive"), "{}", e4.reduction);
        // exact and dominated agree in direction
        let t = &res.block.terms[0];
        let dom = dominated_families34(&req, &t.cols, &res.certificate.children[0], &res.certificate.children[1]);
        let ex = exact_families34(&req, &t.rows, &t.cols, &res.e, u64::MAX).unwrap();
        assert!(ex.rect.hi <= dom.rect.hi && ex.sph.hi <= dom.sph.hi);
    }

    #[test]
    fn tampered_schedule_and_mass_fail() {
        let req = small34();
        let res = lemma34_construct(&req, &Lemma34Options::default()).unwrap();
        let mut bad = res.clone();
        bad.m0 = &bad.n1 + 1u32;
        let c = lemma34_verify(&req, &bad, &Lemma34Options::default());
        assert!(!c.passed());
        assert!(!c.entry("schedule M0 = 2(N1^2+1)").unwrap().pass);

        let mut heavy = res.clone();
        heavy.block.terms[0].gamma = int(100);
        let c = lemma34_verify(&req, &heavy, &Lemma34Options::default());
        assert!(!c.entry("(2) sum |c_ks|^(2+delta) < delta").unwrap().pass);
    }

    #[test]
    fn splitting_rule() {
        let p = Piece2D { rect: Rect { x: cell(1, 0), y: cell(1, 0) }, gamma: rat(1, 8) };
        let out = split_pieces(2, &[p], &rat(1, 2), 64).unwrap();
        // 1/32 and then 1/64 are not below ε/32 = 1/64
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|q| q.gamma.clone() * q.rect.measure(2) < rat(1, 64)));
        assert_eq!(piece_delta(&rat(1, 2), 1, 2), rat(1, 64));
        assert_eq!(piece_delta(&rat(1, 2), 2, 2), rat(1, 64));
        assert_eq!(piece_delta(&rat(1, 2), 7, 2), rat(1, 256));
    }

    #[test]
    fn zero_function() {
        let req = Lemma35Request { order: 2, pieces: vec![], eps: rat(1, 2), n: 2u32.into() };
        let res = lemma35_construct(&req, &Lemma35Options::default()).unwrap();
        assert!(res.block.terms.is_empty());
        assert_eq!(res.e.measure(2), int(1));
        assert!(res.certificate.passed(), "{:#?}", res.certificate);
    }

    #[test]
    fn two_pieces_stack() {
        let req = Lemma35Request {
            order: 2,
            pieces: vec![
                Piece2D { rect: Rect { x: cell(7, 0), y: cell(7, 0) }, gamma: rat(1, 2) },
                Piece2D { rect: Rect { x: cell(7, 5), y: cell(7, 2) }, gamma: rat(-1, 2) },
            ],
            eps: rat(1, 2),
            n: 2u32.into(),
        };
        let res = lemma35_construct(&req, &Lemma35Options::default()).unwrap();
        assert!(res.certificate.passed(), "{:?}", res.certificate.failures());
        assert_eq!(res.windows[1].n_nu, &res.windows[0].m_nu + 1u32);
        let again = lemma35_verify(&req, &res, &Lemma35Options::default());
        assert_eq!(again.passed(), true);
    }
}
