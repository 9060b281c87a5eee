use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use chrestenson::approx1d::{
    band_width, lemma33_construct, positive_part_reduction, predicted_coefficient_mass, CellValue, Lemma33Options, Lemma33Request, StepFunctionSpec,
};
use chrestenson::approx2d::{
    lemma34_construct, lemma35_construct, schedule_m0, split_pieces, Lemma34Options, Lemma34Request, Lemma35Options,
    Lemma35Request, Piece2D, Schedule,
};
use chrestenson::cert::Certificate;
use chrestenson::cyclo::Cyc;
use chrestenson::grid::{AdicCell, Rect};
use chrestenson::num::{int, rat, Rational};
use chrestenson::transform::{fct_forward, fct_forward_naive, fct_inverse};
use chrestenson::universal::{
    build_universal, build_weight, greedy_select, monitor_convergence, trace_csv, SparseStep, StepFunctionEnumerator,
    UniversalOptions, UniversalSeries,
};
use chrestenson::walsh::{eval_walsh, walsh_on_cell, Order, WalshIndex};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cert_ok(c: &Certificate, what: &str) -> Result<(), String> {
    check(c.passed(), || format!("{what}: {:?}", c.failures()))
}

fn cell(rank: u32, index: u64) -> AdicCell {
    AdicCell { rank, index }
}

fn pow2(k: u32) -> Rational {
    Rational::new(1.into(), BigUint::from(2u32).pow(k).into())
}

/// ⟨ψ_n, conj ψ_m⟩ from point evaluation at cell midpoints.
fn criterion1() -> Outcome {
    let t = Instant::now();
    let mut pairs = 0;
    for a in [2u32, 3, 5] {
        let ord = Order::new(a).unwrap();
        let cells = (a as u64).pow(3);
        let mids: Vec<Rational> = (0..cells).map(|i| Rational::new((2 * i + 1).into(), (2 * cells).into())).collect();
        let exps: Vec<Vec<u32>> = (0..cells)
            .map(|n| {
                let k = WalshIndex::new(a, n);
                mids.iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let e = walsh_on_cell(&k, 3, i as u64).unwrap();
                        assert_eq!(eval_walsh(ord, &k, x).to_cyc(), Cyc::root(a, e as i64), "a={a} n={n} cell {i}");
                        e
                    })
                    .collect()
            })
            .collect();
        for n in 0..cells as usize {
            for m in 0..cells as usize {
                let mut acc = Cyc::zero(a);
                for i in 0..cells as usize {
                    acc.add_assign(&Cyc::root(a, exps[n][i] as i64 - exps[m][i] as i64));
                }
                let ip = acc.scale(&Rational::new(1.into(), (cells as i64).into()));
                let want = if n == m { Cyc::one(a) } else { Cyc::zero(a) };
                check(ip == want, || format!("a={a} <psi_{n}, psi_{m}> = {ip}"))?;
                pairs += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{pairs} pairs exact, {secs:.1} s"))
}

fn random_cyc(rng: &mut StdRng, a: u32) -> Cyc {
    Cyc::from_rational(a, Rational::new(rng.gen_range(-20..=20).into(), rng.gen_range(1..=12).into()))
}

/// Direct coefficient c_k = a^{-m} Σ v_i conj ψ_k(cell i).
fn direct_coeff(a: u32, m: u32, v: &[Complex64], k: u64) -> Complex64 {
    let idx = WalshIndex::new(a, k);
    let mut acc = Complex64::zero();
    for (i, x) in v.iter().enumerate() {
        let e = walsh_on_cell(&idx, m, i as u64).unwrap() as f64;
        acc += x * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * e / a as f64);
    }
    acc / v.len() as f64
}

fn criterion2() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut exact = 0;
    for a in [2u32, 3] {
        for m in 0..=4 {
            let n = (a as usize).pow(m);
            let v: Vec<Cyc> = (0..n).map(|_| random_cyc(&mut rng, a)).collect();
            let fast = fct_forward(a, &v).unwrap();
            check(fast == fct_forward_naive(a, &v).unwrap(), || format!("a={a} m={m}: fast != naive"))?;
            check(fct_inverse(a, &fast).unwrap() == v, || format!("a={a} m={m}: round trip"))?;
            exact += 1;
        }
    }
    let (mut worst, mut worst_rt) = (0f64, 0f64);
    for j in 0..50 {
        let a = [2u32, 3, 4, 5][j % 4];
        let m = 1 + (j / 4) as u32 % 7;
        let n = (a as usize).pow(m);
        let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let fast = fct_forward(a, &v).unwrap();
        if n <= 4096 {
            let naive = fct_forward_naive(a, &v).unwrap();
            worst = fast.iter().zip(&naive).map(|(x, y)| (x - y).norm()).fold(worst, f64::max);
        } else {
            for _ in 0..32 {
                let k = rng.gen_range(0..n as u64);
                worst = worst.max((fast[k as usize] - direct_coeff(a, m, &v, k)).norm());
            }
        }
        let back = fct_inverse(a, &fast).unwrap();
        worst_rt = back.iter().zip(&v).map(|(x, y)| (x - y).norm()).fold(worst_rt, f64::max);
    }
    check(worst <= 1e-9, || format!("fast vs naive {worst:e}"))?;
    check(worst_rt <= 1e-10, || format!("round trip {worst_rt:e}"))?;
    Ok(format!("{exact} exact cases; 50 float vectors, max diff {worst:.1e}, round trip {worst_rt:.1e}"))
}

/// Requests whose predicted refinement exceeds the cell budget are
/// rejected before construction and counted.
fn criterion3() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let epss = [rat(1, 2), rat(1, 4), rat(1, 10)];
    let opts = Lemma33Options::default();
    let (mut worst_attempts, mut count, mut rejected) = (0, 0, 0);
    let mut largest = Rational::zero();
    while count < 24 {
        let eps = epss[count % 3].clone();
        let n0: BigUint = if count / 3 % 2 == 0 { 3u32 } else { 17u32 }.into();
        let rank = rng.gen_range(1..=3u32);
        let mut cells = Vec::new();
        for i in 0..2u64.pow(rank) {
            if rng.gen_bool(0.5) {
                let v = Rational::new(rng.gen_range(-8..=8).into(), [1, 2, 4, 8, 16][rng.gen_range(0..5)].into());
                if !v.is_zero() && v.abs() <= int(4) {
                    cells.push(CellValue { cell: cell(rank, i), value: v });
                }
            }
        }
        if cells.is_empty() {
            continue;
        }
        let pieces: Vec<(AdicCell, Rational)> = cells.iter().map(|c| (c.cell, c.value.clone())).collect();
        let support = Rational::new(pieces.len().into(), 2u64.pow(rank).into());
        let r = band_width(2, &support, &eps);
        let feasible = (rank..=18).any(|m| {
            pieces.len() as u64 * 2u64.pow(m - rank) <= opts.max_pieces && predicted_coefficient_mass(2, &pieces, &eps, r, m).hi < eps
        });
        if !feasible {
            rejected += 1;
            continue;
        }
        let j = count;
        let req = Lemma33Request { f: StepFunctionSpec { order: 2, cells }, eps, n0 };
        let res = lemma33_construct(&req, &opts).map_err(|e| format!("request {j}: {e}"))?;
        cert_ok(&res.certificate, &format!("request {j}"))?;
        for name in ["(3) sum |c_k|^(2+eps) < eps", "(4) max_m sup_e [int_e |S_m| - int_e |f|] < eps"] {
            let e = res.certificate.entry(name).ok_or_else(|| format!("request {j}: no entry {name}"))?;
            check(e.pass, || format!("request {j}: {name}"))?;
        }
        check(res.certificate.entry("(4) max_m sup_e [int_e |S_m| - int_e |f|] < eps").unwrap().reduction.contains("positive-part"), || {
            format!("request {j}: (4) not via positive-part reduction")
        })?;
        largest = req.f.cells.iter().map(|c| c.value.abs()).fold(largest, |a, b| a.max(b));
        worst_attempts = worst_attempts.max(res.attempts);
        count += 1;
    }
    check(worst_attempts <= 2, || format!("a request needed {worst_attempts} attempts"))?;
    Ok(format!("{count} requests (largest |value| {largest}), at most {worst_attempts} attempts; {rejected} candidates beyond the refinement budget skipped"))
}

fn criterion4() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    for j in 0..120 {
        let n = rng.gen_range(1..=12);
        let r = |rng: &mut StdRng| Rational::new(rng.gen_range(0..=30).into(), rng.gen_range(1..=7).into());
        let s: Vec<Rational> = (0..n).map(|_| r(&mut rng)).collect();
        let f: Vec<Rational> = (0..n).map(|_| r(&mut rng)).collect();
        let in_e: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        let w = Rational::new(1.into(), rng.gen_range(1..=64).into());
        let mut best = Rational::zero();
        for mask in 0u32..1 << n {
            if (0..n).any(|i| mask >> i & 1 == 1 && !in_e[i]) {
                continue;
            }
            let v: Rational = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &s[i] - &f[i]).sum::<Rational>() * &w;
            if v > best {
                best = v;
            }
        }
        let got = positive_part_reduction(&s, &f, &in_e, &w);
        check(got == best, || format!("instance {j}: reduction {got} vs brute force {best}"))?;
    }
    Ok("120 instances equal brute force".into())
}

fn criterion5() -> Outcome {
    let gammas = [rat(1, 2), rat(-1, 2), rat(1, 4), int(1), rat(-3, 4)];
    let opts = Lemma34Options::default();
    let mut count = 0;
    for j in 0..10u64 {
        let req = Lemma34Request {
            order: 2,
            gamma: gammas[j as usize % 5].clone(),
            rect: Rect { x: cell(3, j % 8), y: cell(3, (3 * j + 1) % 8) },
            delta: rat(1, 2),
            n: (3 + j % 2).into(),
        };
        let res = lemma34_construct(&req, &opts).map_err(|e| format!("request {j}: {e}"))?;
        cert_ok(&res.certificate, &format!("request {j}"))?;
        check(res.m0 == (&res.n1 * &res.n1 + 1u32) * 2u32 && res.m0 == schedule_m0(&res.n1), || format!("request {j}: M0 {}", res.m0))?;
        let e4 = res.certificate.entries.iter().find(|e| e.name.starts_with("(4)")).unwrap();
        check(e4.pass && e4.name.contains("16 |gamma||Delta|"), || format!("request {j}: {}", e4.name))?;
        check(e4.reduction.contains("exhaustive"), || format!("request {j}: (4) via {}", e4.reduction))?;
        check(res.block.terms.len() == 1, || format!("request {j}: {} terms", res.block.terms.len()))?;
        let t = &res.block.terms[0];
        let all = res.block.materialize(1 << 22).map_err(|e| e.to_string())?;
        let rows: Vec<_> = t.rows.iter().collect();
        let cols: Vec<_> = t.cols.iter().collect();
        check(all.len() == rows.len() * cols.len(), || format!("request {j}: support {} != {}x{}", all.len(), rows.len(), cols.len()))?;
        for (k, x) in &rows {
            for (s, y) in &cols {
                let want = x.mul(y).scale(&t.gamma);
                check(all[&(k.clone(), s.clone())] == want && res.block.coeff(k, s) == want, || format!("request {j}: c_({k},{s})"))?;
            }
        }
        count += 1;
    }
    Ok(format!("{count} requests, exhaustive sweeps, M0 and product identity exact"))
}

fn criterion6() -> Outcome {
    let requests = [
        Lemma35Request {
            order: 2,
            pieces: vec![Piece2D { rect: Rect { x: cell(6, 0), y: cell(6, 1) }, gamma: rat(1, 2) }],
            eps: rat(1, 2),
            n: 2u32.into(),
        },
        Lemma35Request {
            order: 2,
            pieces: vec![
                Piece2D { rect: Rect { x: cell(7, 0), y: cell(7, 0) }, gamma: rat(1, 2) },
                Piece2D { rect: Rect { x: cell(7, 5), y: cell(7, 2) }, gamma: rat(-1, 2) },
            ],
            eps: rat(1, 2),
            n: 2u32.into(),
        },
    ];
    let opts = Lemma35Options::default();
    check(opts.lemma34.schedule == Schedule::Strict, || "default schedule is not strict".into())?;
    let mut times = Vec::new();
    for (j, req) in requests.iter().enumerate() {
        let nu0 = split_pieces(2, &req.pieces, &req.eps, 64).map_err(|e| e.to_string())?.len();
        check(nu0 <= 3, || format!("request {j}: {nu0} pieces"))?;
        let t = Instant::now();
        let res = lemma35_construct(req, &opts).map_err(|e| format!("request {j}: {e}"))?;
        let secs = t.elapsed().as_secs_f64();
        cert_ok(&res.certificate, &format!("request {j}"))?;
        let e4 = res.certificate.entries.iter().find(|e| e.name.starts_with("(4)")).unwrap();
        check(e4.reduction.contains("positive parts"), || format!("request {j}: (4) via {}", e4.reduction))?;
        let exhaustive = e4.reduction.contains("exhaustive");
        check(j > 0 || exhaustive, || format!("request {j}: (4) via {}", e4.reduction))?;
        check(secs < 600.0, || format!("request {j}: {secs:.0} s"))?;
        times.push(format!("{secs:.1} s {}", if exhaustive { "exhaustive" } else { "dominated" }));
    }
    Ok(format!("{} requests, strict schedule, times {}", requests.len(), times.join(", ")))
}

fn criterion7() -> Outcome {
    let en = StepFunctionEnumerator::new(2, 11, 1, 1).map_err(|e| e.to_string())?;
    for sched in [Schedule::Compact, Schedule::Strict] {
        let series = build_universal(&en, 2, &UniversalOptions::default().with_schedule(sched)).map_err(|e| format!("{sched:?}: {e}"))?;
        cert_ok(&series.certificate, &format!("{sched:?}"))?;
        for b in &series.blocks {
            for name in ["|E_s| > 1 - 2^-2(s+1)", "sum |c^(s)|^(2+2^-2s) < 2^-2s", "P_s = f_s on E_s"] {
                let e = b.certificate.entry(name).ok_or_else(|| format!("{sched:?} block {}: no entry {name}", b.s))?;
                check(e.pass, || format!("{sched:?} block {}: {name}", b.s))?;
            }
        }
    }
    Ok("S=2 compact and strict, all block certificates pass".into())
}

/// S = 6 strict build shared by the weight and greedy criteria.
fn strict_series() -> &'static UniversalSeries {
    static SERIES: OnceLock<UniversalSeries> = OnceLock::new();
    SERIES.get_or_init(|| {
        let en = StepFunctionEnumerator::new(2, 19, 1, 1).unwrap();
        build_universal(&en, 6, &UniversalOptions::default()).unwrap()
    })
}

fn criterion8() -> Outcome {
    let series = strict_series();
    cert_ok(&series.certificate, "series")?;
    let w = build_weight(series, &rat(1, 4)).map_err(|e| e.to_string())?;
    cert_ok(&w.certificate, "weight")?;
    check(w.n0 == 3, || format!("n0 = {}", w.n0))?;
    for m in &w.mu {
        check(m.mu > Rational::zero() && m.mu <= Rational::one(), || format!("mu_{} = {}", m.n, m.mu))?;
    }
    check(w.mu_at(None).is_one() && w.mu_at(Some(w.n0)).is_one(), || "mu != 1 outside the weighted levels".into())?;
    let off = &w.omega.last().unwrap().measure - &w.omega[0].measure;
    check(off < rat(1, 4), || format!("|mu != 1| = {off}"))?;
    Ok(format!("n0 = 3, {} weighted levels, |mu != 1| = {off}", w.mu.len()))
}

fn planted(en: &StepFunctionEnumerator, idx: &[u32]) -> SparseStep {
    let mut f = SparseStep::zero(en.order, en.m_max);
    for &s in idx {
        f.cells.extend(en.get(&s.into()).unwrap().cells);
    }
    f.cells.sort_by_key(|c| c.index);
    f
}

fn criterion9() -> Outcome {
    let series = strict_series();
    let w = build_weight(series, &rat(3, 4)).map_err(|e| e.to_string())?;
    let f = planted(&series.enumerator, &[3, 4, 5]);
    check(f.cells.len() == 3, || "planted cells overlap".into())?;
    let sel = greedy_select(series, &w, &f, 3).map_err(|e| e.to_string())?;
    cert_ok(&sel.certificate, "selection")?;
    check(sel.steps.len() == 3, || format!("{} steps", sel.steps.len()))?;
    for st in &sel.steps {
        check(st.tau == pow2(2 * st.q), || format!("tau_{} = {}", st.q, st.tau))?;
        check(st.residual < int(2) * pow2(2 * st.q), || format!("q={}: residual {}", st.q, st.residual))?;
    }
    let rows = monitor_convergence(series, &sel).map_err(|e| e.to_string())?;
    for r in &rows {
        check(r.bound == int(21) * pow2(2 * r.q), || format!("q={}: bound {}", r.q, r.bound))?;
        check(r.pass && r.error < r.bound, || format!("{} {} q={}: {} vs {}", r.kind, r.cutoff, r.q, r.error, r.bound))?;
    }
    for q in [1, 2] {
        for kind in ["rect", "sph"] {
            check(rows.iter().any(|r| r.q == q && r.kind == kind), || format!("no {kind} rows at q={q}"))?;
        }
    }
    let worst = sel.steps.iter().map(|s| chrestenson::num::to_f64(&s.residual)).fold(0.0, f64::max);
    Ok(format!("indices {:?}, max residual {worst:.2e}, {} trace rows pass", sel.indices(), rows.len()))
}

fn scenario() -> Vec<String> {
    let en = StepFunctionEnumerator::new(2, 13, 1, 1).unwrap();
    let series = build_universal(&en, 3, &UniversalOptions::default().with_schedule(Schedule::Compact)).unwrap();
    let w = build_weight(&series, &rat(3, 4)).unwrap();
    let sel = greedy_select(&series, &w, &planted(&en, &[3]), 1).unwrap();
    let rows = monitor_convergence(&series, &sel).unwrap();
    vec![
        serde_json::to_string_pretty(&series).unwrap(),
        serde_json::to_string_pretty(&w).unwrap(),
        serde_json::to_string_pretty(&sel).unwrap(),
        trace_csv(&rows),
    ]
}

fn criterion10() -> Outcome {
    let (x, y) = (scenario(), scenario());
    for (i, name) in ["series", "weight", "selection", "trace"].iter().enumerate() {
        check(x[i] == y[i], || format!("{name} differs between runs"))?;
    }
    let bytes: usize = x.iter().map(String::len).sum();
    Ok(format!("4 artifacts byte-identical ({bytes} bytes)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("orthonormality", criterion1),
        ("transform oracle equivalence", criterion2),
        ("1D approximation certificates", criterion3),
        ("worst-subset reduction oracle", criterion4),
        ("rectangle approximation certificates", criterion5),
        ("step function approximation certificates", criterion6),
        ("universal build S=2", criterion7),
        ("weight validity", criterion8),
        ("greedy end-to-end", criterion9),
        ("reproducibility", criterion10),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("criterion {:>2} PASS {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
