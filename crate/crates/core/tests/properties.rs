use cutstack::deficiency::{Bernoulli, Compressor, Lz78, Lz78Parser, Measure};
use cutstack::gadget::interval::{normalize_union, pairwise_disjoint};
use cutstack::gadget::{cut_gadget, m_fold_independent, stack_gadgets, Column, Gadget, GadgetTree, Interval};
use cutstack::rational::{parse_rational, rat, to_fraction};
use cutstack::solovay::kraft::BuddyAllocator;
use cutstack::solovay::{is_prefix_free, kraft_sum};
use cutstack::Rational;
use num_traits::One;
use proptest::prelude::*;

fn bits(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, 0..max)
}

/// Columns over a partition of `[0,1)` into multiples of 1/24.
fn gadget() -> impl Strategy<Value = Gadget> {
    (prop::collection::btree_set(1i64..24, 0..4), prop::collection::vec(1u64..=4, 5)).prop_map(|(cuts, hs)| {
        let mut pts: Vec<i64> = vec![0];
        pts.extend(cuts);
        pts.push(24);
        let cols = pts
            .windows(2)
            .zip(hs)
            .map(|(w, h)| Column::from_split(&Interval::new(rat(w[0], 24), rat(w[1], 24)).unwrap(), h))
            .collect();
        Gadget::new(cols).unwrap()
    })
}

fn interval() -> impl Strategy<Value = Interval> {
    (0i64..32, 1i64..8).prop_map(|(a, w)| Interval::new(rat(a, 32), rat(a + w, 32)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn lz78_round_trips(x in bits(96)) {
        let code = Lz78.encode(&x);
        prop_assert_eq!(Lz78.decode(&code).unwrap(), x.clone());
        prop_assert_eq!(code.len() as u64, Lz78.codelength(&x));
    }
}

proptest! {
    #[test]
    fn lz78_parser_tracks_every_prefix(x in bits(200)) {
        let mut p = Lz78Parser::new();
        let whole = Lz78.prefix_codelengths(&x);
        for (t, &b) in x.iter().enumerate() {
            p.push(b);
            prop_assert_eq!(p.codelength(), whole[t]);
        }
    }

    #[test]
    fn union_normalization(ivs in prop::collection::vec(interval(), 1..8)) {
        let u = normalize_union(ivs.iter());
        prop_assert!(pairwise_disjoint(u.iter()));
        prop_assert!(u.windows(2).all(|p| p[0].right < p[1].left));
        let covered: Rational = u.iter().map(|iv| iv.width()).sum();
        let total: Rational = ivs.iter().map(|iv| iv.width()).sum();
        prop_assert!(covered <= total);
        prop_assert_eq!(covered == total, pairwise_disjoint(ivs.iter()));
    }

    #[test]
    fn cutting_and_stacking_keep_measure(g in gadget(), a in 1i64..12) {
        let parts = cut_gadget(&g, &[rat(a, 12), rat(12 - a, 12)]).unwrap();
        prop_assert_eq!(parts[0].support_measure(), g.support_measure() * rat(a, 12));
        let both: Rational = parts.iter().map(|p| p.support_measure()).sum();
        prop_assert_eq!(both, Rational::one());
        let halves = cut_gadget(&g, &[rat(1, 2), rat(1, 2)]).unwrap();
        let st = stack_gadgets(&halves[0], &halves[1]).unwrap();
        prop_assert!(st.validate().is_ok());
        prop_assert_eq!(st.support_measure(), Rational::one());
        prop_assert_eq!(st.num_columns(), g.num_columns().pow(2));
    }

    #[test]
    fn structural_power_matches_explicit(g in gadget(), m in 1usize..=3) {
        let explicit = m_fold_independent(&g, m).unwrap();
        prop_assert!(pairwise_disjoint(explicit.intervals()));
        let tree = GadgetTree::power(GadgetTree::leaf(g), m as u64).unwrap();
        prop_assert_eq!(tree.materialize(1 << 12).unwrap(), explicit);
    }

    #[test]
    fn fractions_round_trip(n in -10_000i64..10_000, d in 1i64..10_000) {
        let x = rat(n, d);
        prop_assert_eq!(parse_rational(&to_fraction(&x)).unwrap(), x);
    }

    #[test]
    fn buddy_codes_are_prefix_free(mut lens in prop::collection::vec(1u64..12, 1..40)) {
        lens.sort_unstable();
        let mut mass = Rational::from_integer(0.into());
        let mut alloc = BuddyAllocator::new();
        let mut words = Vec::new();
        for l in lens {
            let w = cutstack::rational::pow2(-(l as i64));
            if &mass + &w > Rational::one() {
                break;
            }
            mass += w;
            let c = alloc.allocate(l).unwrap();
            prop_assert_eq!(c.len() as u64, l);
            words.push(c);
        }
        prop_assert!(is_prefix_free(&words));
        prop_assert_eq!(kraft_sum(&words), mass);
    }

    #[test]
    fn bernoulli_is_consistent(x in bits(24), k in 1i64..16) {
        let p = Bernoulli::new(rat(k, 16)).unwrap();
        let mut x0 = x.clone();
        x0.push(0);
        let mut x1 = x.clone();
        x1.push(1);
        prop_assert_eq!(p.prob(&x0).unwrap() + p.prob(&x1).unwrap(), p.prob(&x).unwrap());
    }
}
