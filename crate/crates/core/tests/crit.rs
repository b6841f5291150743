mod common;

use common::assert_close;
use mcar_core::crit::{
    binned_sizes, c_alpha, c_alpha_min, c_alpha_prime, c_alpha_star, critical_values, facet_catalog,
    facet_catalog_entries, ActiveCritical, FacetInfo, FacetSource,
};
use mcar_core::model::{DiscreteSpace, PatternCollection};
use proptest::prelude::*;
use serde_json::Value;

fn golden() -> Value {
    serde_json::from_str(include_str!("golden/critical.json")).unwrap()
}

fn g(section: &str, key: &str) -> f64 {
    golden()[section][key].as_f64().unwrap()
}

fn setting(sizes: &[usize], labels: &[&[usize]], n: &[u64]) -> (DiscreteSpace, PatternCollection) {
    (
        DiscreteSpace::new(sizes.to_vec()).unwrap(),
        PatternCollection::from_labels(labels)
            .unwrap()
            .with_sample_sizes(n.to_vec())
            .unwrap(),
    )
}

const TRIANGLE: [&[usize]; 3] = [&[1, 2], &[2, 3], &[1, 3]];

fn user(f: u64, d: f64) -> FacetInfo {
    FacetInfo::new(f, d, FacetSource::User).unwrap()
}

#[test]
fn universal_value_for_three_pairs() {
    let (space, c) = setting(&[2, 2, 2], &TRIANGLE, &[200; 3]);
    let v = c_alpha(&space, &c, 0.05).unwrap();
    assert_close(v, 0.33360, 1e-5, "C_0.05");
    assert_close(v, g("pairwise_binary_n200_alpha005", "c_alpha"), 1e-12, "golden");
}

#[test]
fn universal_limits() {
    let (space, c) = setting(&[2, 2, 2], &TRIANGLE, &[200; 3]);
    let first = 0.5 * 3.0 * (3.0f64 / 200.0).sqrt();
    let near_one = c_alpha(&space, &c, 1.0 - 1e-12).unwrap();
    assert_close(near_one, first, 1e-6, "alpha -> 1");
    // one pattern over a one-letter alphabet leaves only the concentration term
    let (space, c) = setting(&[1], &[&[1]], &[50]);
    let v = c_alpha(&space, &c, 0.1).unwrap();
    assert_close(v, ((1.0f64 / 0.1).ln() / 100.0).sqrt(), 1e-15, "single pattern");
}

#[test]
fn improved_value_for_three_pairs() {
    let (space, c) = setting(&[2, 2, 2], &TRIANGLE, &[200; 3]);
    let v = c_alpha_prime(&space, &c, 0.05, &user(4, 1.0)).unwrap();
    let direct = 3.0 * (8192.0 * (2.0 * 2f64.ln() + 240f64.ln()) / 200.0).sqrt();
    assert_close(v, direct, 1e-12, "displayed arithmetic");
    assert_close(v, 50.3133, 1e-4, "C'_0.05");
    assert_close(v, g("pairwise_binary_n200_alpha005", "c_alpha_prime_f4_d1"), 1e-12, "golden");
}

#[test]
fn improved_vanishes_without_facets_or_overlaps() {
    let (space, c) = setting(&[2, 3], &[&[1], &[2]], &[10, 20]);
    assert_eq!(c_alpha_prime(&space, &c, 0.05, &user(0, 1.0)).unwrap(), 0.0);
}

#[test]
fn improved_scales_with_sample_size() {
    let (space, c) = setting(&[2, 2, 2], &TRIANGLE, &[200; 3]);
    let (_, c2) = setting(&[2, 2, 2], &TRIANGLE, &[400; 3]);
    let a = c_alpha_prime(&space, &c, 0.05, &user(4, 1.0)).unwrap();
    let b = c_alpha_prime(&space, &c2, 0.05, &user(4, 1.0)).unwrap();
    assert_close(a / b, 2f64.sqrt(), 1e-12, "sqrt 2");
}

#[test]
fn minimum_picks_universal_at_moderate_n() {
    let (space, c) = setting(&[2, 2, 2], &TRIANGLE, &[200; 3]);
    let cv = critical_values(&space, &c, 0.05, &user(4, 1.0)).unwrap();
    assert_eq!(cv.active, ActiveCritical::Universal);
    assert_close(cv.min, 0.33360, 1e-5, "min");
}

#[test]
fn minimum_picks_improved_for_wide_alphabets() {
    // C_a grows with the alphabets while C'_a only sees the binary overlap
    let (space, c) = setting(&[1_000_000, 2, 1_000_000], &[&[1, 2], &[2, 3]], &[10_000; 2]);
    let cv = critical_values(&space, &c, 0.05, &user(0, 1.0)).unwrap();
    assert_eq!(cv.active, ActiveCritical::Improved);
    assert_close(cv.universal, g("pair_chain_wide_n1e4_alpha005", "c_alpha"), 1e-12, "C");
    assert_close(cv.improved, g("pair_chain_wide_n1e4_alpha005", "c_alpha_prime_f0"), 1e-12, "C'");
    assert_eq!(cv.min, cv.improved);
}

#[test]
fn star_delegates_to_binned_space() {
    let sizes = binned_sizes(&[Some(0.5), Some(0.5), None], &[0, 0, 2]).unwrap();
    assert_eq!(sizes, vec![2, 2, 2]);
    let (space, c) = setting(&sizes, &TRIANGLE, &[200; 3]);
    let facet = facet_catalog(&space, &c).unwrap();
    assert_eq!(
        c_alpha_star(&space, &c, 0.05, Some(&facet)).unwrap(),
        c_alpha_min(&space, &c, 0.05, &facet).unwrap()
    );
}

#[test]
fn star_for_quarter_bandwidths() {
    let sizes = binned_sizes(&[Some(0.25), Some(0.25), None], &[0, 0, 2]).unwrap();
    let (space, c) = setting(&sizes, &TRIANGLE, &[500; 3]);
    let facet = facet_catalog(&space, &c).unwrap();
    assert_eq!(facet.f_prime, 196);
    let star = c_alpha_star(&space, &c, 0.05, Some(&facet)).unwrap();
    assert_close(star, g("continuous_4x4x2_n500_alpha005", "c_alpha_star"), 1e-12, "C*");
    let prime = c_alpha_prime(&space, &c, 0.05, &facet).unwrap();
    assert_close(prime, g("continuous_4x4x2_n500_alpha005", "c_alpha_prime_f196_d1"), 1e-12, "C'");
    // finer bins give a larger value
    let finer = binned_sizes(&[Some(0.1), Some(0.1), None], &[0, 0, 2]).unwrap();
    let (fs, fc) = setting(&finer, &TRIANGLE, &[500; 3]);
    assert!(c_alpha_star(&fs, &fc, 0.05, None).unwrap() > star);
}

#[test]
fn catalog_entries() {
    let (space, c) = setting(&[2, 2, 2], &TRIANGLE, &[1; 3]);
    let f = facet_catalog(&space, &c).unwrap();
    assert_eq!((f.f_prime, f.d_r, f.source), (4, 1.0, FacetSource::Catalog));

    let (space, c) = setting(&[3, 4, 2], &TRIANGLE, &[1; 3]);
    assert_eq!(facet_catalog(&space, &c).unwrap().f_prime, 6 * 14);
    // relabeled: the binary variable first
    let (space, c) = setting(&[2, 3, 4], &TRIANGLE, &[1; 3]);
    assert_eq!(facet_catalog(&space, &c).unwrap().f_prime, 6 * 14);

    let all_pairs: [&[usize]; 6] = [&[1, 2], &[1, 3], &[1, 4], &[2, 3], &[2, 4], &[3, 4]];
    let (space, c) = setting(&[2; 4], &all_pairs, &[1; 6]);
    assert_eq!(facet_catalog(&space, &c).unwrap().f_prime, 56);

    let chain: [&[usize]; 4] = [&[1, 2], &[2, 3], &[3, 4], &[1, 4]];
    let (space, c) = setting(&[2; 4], &chain, &[1; 4]);
    assert_eq!(facet_catalog(&space, &c).unwrap().f_prime, 8);

    let single: [&[usize]; 4] = [&[1, 2, 3], &[1, 4], &[2, 4], &[3, 4]];
    let (space, c) = setting(&[2; 4], &single, &[1; 4]);
    assert_eq!(facet_catalog(&space, &c).unwrap().f_prime, 84);

    let triples: [&[usize]; 4] = [&[1, 2, 3], &[1, 2, 4], &[1, 3, 4], &[2, 3, 4]];
    let (space, c) = setting(&[2; 4], &triples, &[1; 4]);
    assert_eq!(facet_catalog(&space, &c).unwrap().f_prime, 128);

    let (space, c) = setting(&[3, 3, 3], &TRIANGLE, &[1; 3]);
    assert!(facet_catalog(&space, &c).is_none());
}

#[test]
fn pentagon_entries() {
    let pentagon: [&[usize]; 5] = [&[1, 2], &[2, 3], &[1, 3], &[3, 4], &[1, 4]];
    let (space, c) = setting(&[2; 4], &pentagon, &[1; 5]);
    let f = facet_catalog(&space, &c).unwrap();
    assert_eq!((f.f_prime, f.d_r), (8, 2.0));
    // the exact binary entry is also listed
    let entries = facet_catalog_entries(&space, &c);
    assert!(entries.iter().any(|e| e.f_prime == 16 && e.d_r == 1.0));

    let (space, c) = setting(&[2, 3, 4, 5], &pentagon, &[1; 5]);
    let f = facet_catalog(&space, &c).unwrap();
    assert_eq!((f.f_prime, f.d_r), (14 * (6 + 30), 2.0));
}

#[test]
fn facet_info_validates_d_r() {
    assert!(FacetInfo::new(3, 0.5, FacetSource::User).is_err());
    assert!(FacetInfo::new(3, f64::NAN, FacetSource::User).is_err());
}

proptest! {
    #[test]
    fn universal_is_monotone(n1 in 1u64..5000, n2 in 1u64..5000, bump in 1u64..100, a in 0.001f64..0.99) {
        let (space, c) = setting(&[2, 3, 2], &TRIANGLE, &[n1, n2, 100]);
        let (_, bigger) = setting(&[2, 3, 2], &TRIANGLE, &[n1 + bump, n2, 100]);
        let base = c_alpha(&space, &c, a).unwrap();
        prop_assert!(c_alpha(&space, &bigger, a).unwrap() < base);
        prop_assert!(c_alpha(&space, &c, (a + 0.005).min(0.999)).unwrap() < base);
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn minimum_is_below_both(n in 1u64..100_000, f in 0u64..1000, d in 1.0f64..4.0, a in 0.001f64..0.99) {
        let (space, c) = setting(&[2, 2, 3], &TRIANGLE, &[n, n + 7, n + 3]);
        let facet = user(f, d);
        let m = c_alpha_min(&space, &c, a, &facet).unwrap();
        prop_assert!(m <= c_alpha(&space, &c, a).unwrap());
        prop_assert!(m <= c_alpha_prime(&space, &c, a, &facet).unwrap());
    }
}
