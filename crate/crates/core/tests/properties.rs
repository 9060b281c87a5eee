use chrestenson::approx1d::positive_part_reduction;
use chrestenson::cyclo::{parse_cyc, Cyc};
use chrestenson::grid::{AdicCell, Dim, StepFunction};
use chrestenson::num::{format_rational, parse_rational, Rational};
use chrestenson::transform::{fct_forward, fct_forward_naive, fct_inverse};
use chrestenson::universal::{n0_for, StepFunctionEnumerator};
use chrestenson::walsh::{eval_walsh, walsh_on_cell, Order, WalshIndex};
use num_bigint::BigUint;
use num_traits::Zero;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=16).prop_map(|(p, q)| Rational::new(p.into(), q.into()))
}

fn digit_sum(a: u32, mut n: u64, mut m: u64) -> u64 {
    let (mut out, mut place) = (0, 1);
    while n > 0 || m > 0 {
        out += (n % a as u64 + m % a as u64) % a as u64 * place;
        n /= a as u64;
        m /= a as u64;
        place *= a as u64;
    }
    out
}

proptest! {
    #[test]
    fn enumerator_is_a_bijection(s in 1u32..2401) {
        let en = StepFunctionEnumerator::new(2, 1, 2, 2).unwrap();
        let f = en.get(&s.into()).unwrap();
        prop_assert_eq!(en.index_of(&f).unwrap(), BigUint::from(s));
        prop_assert!(f.cells.windows(2).all(|w| w[0].index < w[1].index));
        prop_assert!(f.cells.iter().all(|c| !c.value.is_zero()));
    }

    #[test]
    fn walsh_product_is_digitwise_sum(a in 2u32..=5, n in 0u64..125, m in 0u64..125, i in 0u64..625) {
        let ord = Order::new(a).unwrap();
        let cells = (a as u64).pow(4);
        let x = Rational::new((2 * (i % cells) + 1).into(), (2 * cells).into());
        let (pn, pm) = (WalshIndex::new(a, n % cells), WalshIndex::new(a, m % cells));
        let sum = WalshIndex::new(a, digit_sum(a, n % cells, m % cells));
        prop_assert_eq!(eval_walsh(ord, &pn, &x).mul(eval_walsh(ord, &pm, &x)), eval_walsh(ord, &sum, &x));
        prop_assert_eq!(walsh_on_cell(&sum, 4, i % cells).unwrap(), eval_walsh(ord, &sum, &x).exponent);
    }

    #[test]
    fn exact_transform_matches_naive_and_inverts(a in 2u32..=3, m in 0u32..=3, seed in prop::collection::vec(rational(), 27)) {
        let n = (a as usize).pow(m);
        let v: Vec<Cyc> = seed.iter().take(n).map(|r| Cyc::from_rational(a, r.clone())).collect();
        let fast = fct_forward(a, &v).unwrap();
        prop_assert_eq!(&fast, &fct_forward_naive(a, &v).unwrap());
        prop_assert_eq!(fct_inverse(a, &fast).unwrap(), v);
    }

    #[test]
    fn reduction_is_the_best_subset(
        cells in prop::collection::vec((0i64..20, 0i64..20, any::<bool>()), 0..=10),
        w in 1i64..32,
    ) {
        let s: Vec<Rational> = cells.iter().map(|c| Rational::from_integer(c.0.into())).collect();
        let f: Vec<Rational> = cells.iter().map(|c| Rational::from_integer(c.1.into())).collect();
        let in_e: Vec<bool> = cells.iter().map(|c| c.2).collect();
        let w = Rational::new(1.into(), w.into());
        let n = cells.len();
        let best = (0u32..1 << n)
            .filter(|mask| (0..n).all(|i| mask >> i & 1 == 0 || in_e[i]))
            .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &s[i] - &f[i]).sum::<Rational>() * &w)
            .max()
            .unwrap();
        prop_assert_eq!(positive_part_reduction(&s, &f, &in_e, &w), best);
    }

    #[test]
    fn n0_brackets_eps(p in 1i64..1000, q in 1i64..1000) {
        prop_assume!(p < q);
        let eps = Rational::new(p.into(), q.into());
        let n0 = n0_for(&eps).unwrap();
        let half = |k: u32| Rational::new(1.into(), BigUint::from(2u32).pow(k).into());
        prop_assert!(half(n0) < eps && eps <= half(n0 - 1));
    }

    #[test]
    fn refinement_preserves_measure(a in 2u32..=5, rank in 0u32..3, extra in 0u32..3, index in 0u64..125) {
        let cell = AdicCell::new(a, rank, index % (a as u64).pow(rank)).unwrap();
        let kids: Vec<AdicCell> = cell.refine_to(a, rank + extra).collect();
        prop_assert_eq!(kids.len() as u64, (a as u64).pow(extra));
        prop_assert!(kids.iter().all(|k| cell.contains(a, k)));
        prop_assert_eq!(kids.iter().map(|k| k.measure(a)).sum::<Rational>(), cell.measure(a));
    }

    #[test]
    fn rational_text_round_trip(r in rational()) {
        prop_assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
    }

    #[test]
    fn step_function_json_round_trip(a in 2u32..=3, vals in prop::collection::vec(rational(), 9)) {
        let values: Vec<Cyc> = vals.iter().take(a as usize * a as usize).map(|r| Cyc::from_rational(a, r.clone())).collect();
        let f = StepFunction::from_values(a, Dim::One, 2, values).unwrap();
        let g = StepFunction::from_json(&f.to_json().unwrap()).unwrap();
        prop_assert_eq!(&f.values, &g.values);
        for v in &f.values {
            prop_assert_eq!(&parse_cyc(a, &v.to_string()).unwrap(), v);
        }
    }
}

#[test]
fn rademacher_is_a_root_of_unity() {
    for a in 2..=5 {
        let ord = Order::new(a).unwrap();
        for n in 0..(a as u64).pow(3) {
            let x = Rational::new(1.into(), 7.into());
            let e = eval_walsh(ord, &WalshIndex::new(a, n), &x);
            assert!(e.exponent < a);
            assert!(Cyc::root(a, e.exponent as i64).mul(&Cyc::root(a, -(e.exponent as i64))) == Cyc::one(a));
        }
    }
}
