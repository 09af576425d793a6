//! Independent oracles and frozen reference values.

use cutstack::construction::{ConstructionConfig, ConstructionState, SigmaFunction};
use cutstack::experiments::criteria::{column_preserves_measure, two_column_gadget};
use cutstack::experiments::{build_adversary_to, compression_oscillation, ExperimentConfig, PhaseKind};
use cutstack::gadget::interval::pairwise_disjoint;
use cutstack::gadget::{
    m_fold_independent, power_defect, well_distribution_defect, ColumnAddr, GadgetTree, Interval, DEFAULT_BUDGET,
};
use cutstack::rational::{rat, to_decimal, to_fraction};
use cutstack::symbolic::binomial_prefix_sum;
use cutstack::Rational;
use num_bigint::BigUint;

fn levels(tree: &GadgetTree, addr: &ColumnAddr) -> Vec<Interval> {
    let mut out = Vec::new();
    tree.walk_levels(addr, &mut |iv| out.push(iv.clone()));
    out
}

/// Level-by-level check: equal widths up the column, and every level of
/// every column disjoint from every other.
fn levels_translate(tree: &GadgetTree, cols: &[ColumnAddr]) {
    let mut all = Vec::new();
    for a in cols {
        let ls = levels(tree, a);
        assert_eq!(ls.len() as u128, tree.height(a));
        let w = ls[0].width();
        assert!(ls.iter().all(|l| l.width() == w));
        assert_eq!(w, tree.column_width(a));
        assert!(column_preserves_measure(tree, a));
        for l in [0, ls.len() / 2, ls.len() - 1] {
            assert_eq!(tree.level_interval(a, l as u128), ls[l]);
        }
        all.extend(ls);
    }
    assert!(pairwise_disjoint(all.iter()));
    let total: Rational = all.iter().map(|l| l.width()).sum();
    assert_eq!(&total, tree.support_measure());
}

#[test]
fn early_stages_map_levels_onto_successors() {
    let mut st = ConstructionState::new(ConstructionConfig::new(rat(1, 8), SigmaFunction::Identity), 2).unwrap();
    st.run_to(2).unwrap();
    for s in 0..=1 {
        let phi = st.phi(s).unwrap();
        levels_translate(&phi, &phi.columns(64).unwrap());
    }
    let pi2 = st.pi().clone();
    let sample: Vec<ColumnAddr> = pi2.columns(1 << 16).unwrap().into_iter().step_by(311).collect();
    for a in &sample {
        let ls = levels(&pi2, a);
        assert!(ls.windows(2).all(|p| p[0].width() == p[1].width()));
        assert!(pairwise_disjoint(ls.iter()));
    }
}

#[test]
fn power_defect_matches_explicit_provenance() {
    let g = two_column_gadget();
    let marked = g.mark_provenance();
    let tree = GadgetTree::leaf(g.clone());
    for m in 1..=8 {
        let explicit = m_fold_independent(&marked, m).unwrap();
        let direct = well_distribution_defect(&g, &explicit).unwrap();
        let d = power_defect(&tree, m as u64, DEFAULT_BUDGET).unwrap();
        assert!(d.is_exact());
        assert_eq!(d.lo, direct, "m = {m}");
    }
}

#[test]
fn binomial_prefix_sums_by_pascal() {
    let n = 40u64;
    let mut row = vec![BigUint::from(1u32)];
    for _ in 0..n {
        let mut next = vec![BigUint::from(1u32); row.len() + 1];
        for i in 1..row.len() {
            next[i] = &row[i - 1] + &row[i];
        }
        row = next;
    }
    let mut acc = BigUint::from(0u32);
    for (k, c) in row.iter().enumerate() {
        acc += c;
        assert_eq!(binomial_prefix_sum(n, k as u64), acc);
    }
}

#[test]
fn frozen_construction_records() {
    let mut st = ConstructionState::new(ConstructionConfig::new(rat(1, 64), SigmaFunction::Identity), 4).unwrap();
    st.run_to(4).unwrap();
    let rs: Vec<u64> = st.records.iter().map(|r| r.r_s).collect();
    let hs: Vec<u128> = st.records.iter().map(|r| r.min_height).collect();
    let gammas: Vec<String> = st.records.iter().map(|r| to_fraction(&r.gamma)).collect();
    assert_eq!(rs, [0, 2, 2, 1, 7]);
    assert_eq!(hs[1..], [152, 304, 304, 2128]);
    assert_eq!(gammas[1..], ["1/62", "1/126", "1/254", "1/510"]);
    assert_eq!(st.records[4].num_columns, "10460353203");
    assert_eq!(to_decimal(&st.records[3].defect_hi, 6), "0.307899");
    assert!(st.records[3].width_pi > st.records[2].width_pi);

    let mut st = ConstructionState::new(ConstructionConfig::new(rat(1, 8), SigmaFunction::Identity), 3).unwrap();
    st.run_to(3).unwrap();
    let rs: Vec<u64> = st.records.iter().map(|r| r.r_s).collect();
    assert_eq!(rs, [0, 2, 6, 7875]);
    assert_eq!(st.records[2].num_columns, "15625");
    assert_eq!(st.records[3].min_height, 6_048_000);
}

#[test]
fn frozen_adversary_calibration() {
    let cfg = ExperimentConfig::default();
    let t = build_adversary_to(&cfg, 1 << 15).unwrap();
    assert_eq!(t.fold_counts, [0, 2, 2, 1, 7, 5518]);
    let bounds: Vec<(PhaseKind, u64, u64)> = t.phases.iter().map(|p| (p.kind, p.start, p.end)).collect();
    assert_eq!(
        bounds,
        [
            (PhaseKind::Init, 0, 76),
            (PhaseKind::Odd, 76, 152),
            (PhaseKind::Even, 152, 304),
            (PhaseKind::Odd, 304, 4256),
            (PhaseKind::Even, 4256, 6384),
            (PhaseKind::Odd, 6384, 32768),
        ]
    );
    let o = compression_oscillation(&t).unwrap();
    assert_eq!((o.max_even_n, to_fraction(&o.max_even_ratio)), (304, "175/304".to_string()));
    assert_eq!((o.min_odd_n, to_fraction(&o.min_odd_ratio)), (32768, "2859/32768".to_string()));
    assert_eq!(to_decimal(&o.gap, 6), "0.488408");
}
