use mcar_core::crit::{c_alpha, ActiveCritical, FacetInfo, FacetSource};
use mcar_core::infer::{
    bootstrap_test, continuous_test, improved_test, monte_carlo_decision, universal_test, BootstrapRule, Decision,
    Method, TestOptions, TestReport,
};
use mcar_core::ingest::{BinningSpec, Entry, IncompleteDataset, Schema};
use mcar_core::model::{DiscreteSpace, MarginalSequence, PatternCollection};
use mcar_core::sim::{build_sim_family_rs2, sample_empirical};
use mcar_core::McarError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sized(seq: MarginalSequence, n: u64) -> MarginalSequence {
    let sizes = vec![n; seq.len()];
    seq.with_collection(seq.collection().with_sample_sizes(sizes).unwrap()).unwrap()
}

fn triangle(p: f64, n: u64) -> MarginalSequence {
    sized(build_sim_family_rs2(2, p).unwrap(), n)
}

fn opts() -> TestOptions {
    TestOptions::default()
}

#[test]
fn index_above_critical_value_rejects() {
    // R = 2 (0.45 - 1/4) = 0.4 against C_0.05 = 0.33360
    let seq = triangle(0.45, 200);
    let report = universal_test(&seq, 0.05, &opts()).unwrap();
    assert!((report.statistic - 0.4).abs() < 1e-9);
    assert!((report.critical_value.unwrap() - 0.33360).abs() < 1e-4);
    assert_eq!(report.decision, Decision::Reject);
    assert_eq!(report.method, Method::Universal);
}

#[test]
fn index_below_critical_value_retains() {
    let report = universal_test(&triangle(0.4, 200), 0.05, &opts()).unwrap();
    assert!((report.statistic - 0.3).abs() < 1e-9);
    assert_eq!(report.decision, Decision::Retain);
}

#[test]
fn alpha_outside_unit_interval_is_rejected() {
    let seq = triangle(0.3, 200);
    for alpha in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(matches!(universal_test(&seq, alpha, &opts()), Err(McarError::Domain(_))));
    }
}

#[test]
fn large_alpha_shrinks_the_critical_value() {
    let seq = triangle(0.45, 20);
    let strict = universal_test(&seq, 0.01, &opts()).unwrap();
    let loose = universal_test(&seq, 0.999, &opts()).unwrap();
    assert!(loose.critical_value.unwrap() < strict.critical_value.unwrap());
}

#[test]
fn improved_defaults_to_universal_branch_at_moderate_n() {
    let seq = triangle(0.45, 200);
    let report = improved_test(&seq, 0.05, None, &opts()).unwrap();
    let cv = report.critical.clone().unwrap();
    assert_eq!(cv.active, ActiveCritical::Universal);
    assert_eq!(report.critical_value, Some(c_alpha(seq.space(), seq.collection(), 0.05).unwrap()));
    assert_eq!(report.facet.as_ref().unwrap().f_prime, 4);
    let plain = universal_test(&seq, 0.05, &opts()).unwrap();
    assert_eq!(report.decision, plain.decision);
}

#[test]
fn improved_uses_facet_bound_when_it_is_smaller() {
    // C_alpha grows with the alphabets while C' only sees the binary overlap
    let m = 1 << 20;
    let seq = sized(
        MarginalSequence::from_masses(
            DiscreteSpace::new(vec![m, 2, m]).unwrap(),
            PatternCollection::from_labels(&[&[1, 2], &[2, 3]]).unwrap(),
            vec![vec![0.5 / m as f64; 2 * m]; 2],
        )
        .unwrap(),
        10_000,
    );
    let facet = FacetInfo::new(0, 1.0, FacetSource::User).unwrap();
    let report = improved_test(&seq, 0.05, Some(&facet), &opts()).unwrap();
    let cv = report.critical.unwrap();
    assert_eq!(cv.active, ActiveCritical::Improved);
    assert!(cv.improved < cv.universal);
    assert_eq!(report.critical_value, Some(cv.improved));
    assert_eq!(report.statistic, 0.0);
    assert_eq!(report.decision, Decision::Retain);
}

#[test]
fn improved_without_catalog_entry_needs_facet_info() {
    let seq = triangle(0.3, 200);
    let four = sized(
        MarginalSequence::from_masses(
            DiscreteSpace::new(vec![2; 4]).unwrap(),
            PatternCollection::from_labels(&[&[1, 2, 3], &[2, 3, 4]]).unwrap(),
            vec![vec![0.125; 8], vec![0.125; 8]],
        )
        .unwrap(),
        100,
    );
    assert!(matches!(improved_test(&four, 0.05, None, &opts()), Err(McarError::MissingFacetInfo)));
    let given = FacetInfo::new(10, 1.0, FacetSource::User).unwrap();
    assert!(improved_test(&four, 0.05, Some(&given), &opts()).is_ok());
    assert!(improved_test(&seq, 0.05, Some(&given), &opts()).unwrap().facet.unwrap().f_prime == 10);
}

#[test]
fn monte_carlo_arithmetic() {
    let (p, d) = monte_carlo_decision(2, 99, 0.05);
    assert!((p - 0.03).abs() < 1e-15);
    assert_eq!(d, Decision::Reject);
    let (p, d) = monte_carlo_decision(5, 99, 0.05);
    assert!((p - 0.06).abs() < 1e-15);
    assert_eq!(d, Decision::Retain);
    let (p, d) = monte_carlo_decision(4, 99, 0.05);
    assert!((p - 0.05).abs() < 1e-15);
    assert_eq!(d, Decision::Reject);
}

#[test]
fn bootstrap_is_deterministic_across_thread_counts() {
    let truth = triangle(0.3, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = sample_empirical(&mut rng, &truth, &[100, 100, 100]).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_test(&data, 0.05, 59, 11, BootstrapRule::Standard, &opts()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
    let other = bootstrap_test(&data, 0.05, 59, 12, BootstrapRule::Standard, &opts()).unwrap();
    assert_eq!(other.statistic, one.statistic);
}

#[test]
fn compatible_data_is_never_rejected() {
    // uniform product tables are compatible, so R^ = 0 and every replicate ties
    for seed in 0..5 {
        let report = bootstrap_test(&triangle(0.25, 200), 0.05, 39, seed, BootstrapRule::Standard, &opts()).unwrap();
        assert_eq!(report.statistic, 0.0);
        assert_eq!(report.p_value, Some(1.0));
        assert_eq!(report.decision, Decision::Retain);
    }
}

#[test]
fn strongly_incompatible_data_has_no_null() {
    // X1 = X2, X2 = X3, X1 != X3: R = 1
    let eq = vec![0.5, 0.0, 0.0, 0.5];
    let ne = vec![0.0, 0.5, 0.5, 0.0];
    let seq = sized(
        MarginalSequence::from_masses(
            DiscreteSpace::new(vec![2; 3]).unwrap(),
            PatternCollection::from_labels(&[&[1, 2], &[2, 3], &[1, 3]]).unwrap(),
            vec![eq.clone(), eq, ne],
        )
        .unwrap(),
        200,
    );
    match bootstrap_test(&seq, 0.05, 19, 0, BootstrapRule::Standard, &opts()) {
        Err(McarError::DegenerateNull { index }) => assert!(index > 1.0 - 1e-9),
        other => panic!("expected a degenerate null, got {other:?}"),
    }
}

#[test]
fn too_few_replicates_warn() {
    let seq = triangle(0.45, 200);
    let report = bootstrap_test(&seq, 0.05, 10, 0, BootstrapRule::Standard, &opts()).unwrap();
    assert_eq!(report.decision, Decision::Retain);
    assert!(report.warnings.iter().any(|w| w.contains("cannot reject")));
    assert!(bootstrap_test(&seq, 0.05, 0, 0, BootstrapRule::Standard, &opts()).is_err());
}

#[test]
fn bootstrap_detects_a_clear_violation() {
    let seq = triangle(0.45, 200);
    let report = bootstrap_test(&seq, 0.05, 99, 1, BootstrapRule::Standard, &opts()).unwrap();
    assert_eq!(report.decision, Decision::Reject);
    let details = report.bootstrap.unwrap();
    assert!(details.null_index < 1e-7);
    assert_eq!(details.replicates, 99);
}

#[test]
fn report_round_trips_through_json() {
    let seq = triangle(0.45, 200);
    let opts = TestOptions {
        variables: Some(vec!["a".into(), "b".into(), "c".into()]),
        ..TestOptions::default()
    };
    for report in [
        universal_test(&seq, 0.05, &opts).unwrap(),
        improved_test(&seq, 0.05, None, &opts).unwrap(),
        bootstrap_test(&seq, 0.05, 19, 2, BootstrapRule::Literal, &opts).unwrap(),
    ] {
        let back = TestReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }
}

/// MCAR data on [0,1)^2 x {1,2}: a joint draw, then one coordinate hidden
/// according to a pattern chosen independently of the values.
fn mcar_rows(rng: &mut ChaCha8Rng, per_pattern: usize) -> IncompleteDataset {
    let schema = Schema::resolve(
        &["u".into(), "v".into(), "k".into()],
        &Schema::parse("cont,cont,cat:2").unwrap(),
    )
    .unwrap();
    let mut rows = Vec::with_capacity(3 * per_pattern);
    for missing in 0..3 {
        for _ in 0..per_pattern {
            let u: f64 = rng.random();
            let v: f64 = (u + 0.5 * rng.random::<f64>()) % 1.0;
            let k = usize::from(rng.random::<f64>() < v);
            let full = [Entry::Real(u), Entry::Real(v), Entry::Level(k)];
            rows.push(
                full.iter()
                    .enumerate()
                    .map(|(j, e)| (j != missing).then_some(*e))
                    .collect(),
            );
        }
    }
    IncompleteDataset {
        schema,
        rows,
        dropped_rows: 0,
    }
}

#[test]
fn continuous_test_reports_binning() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data = mcar_rows(&mut rng, 200);
    let spec = BinningSpec::new(vec![0.25, 0.25], vec![1.0, 1.0], 1.0).unwrap();
    let report = continuous_test(&data, &spec, 0.05, false, None, &opts()).unwrap();
    assert_eq!(report.method, Method::Continuous);
    let binning = report.binning.unwrap();
    assert_eq!(binning.bins, vec![4, 4]);
    assert!((binning.bias_term - 2.0 * 0.5).abs() < 1e-12);
    assert_eq!(report.variables, Some(vec!["u".into(), "v".into(), "k".into()]));
    assert_eq!(report.sample_sizes, vec![200, 200, 200]);
    assert_eq!(report.decision, Decision::Retain);

    let improved = continuous_test(&data, &spec, 0.05, true, None, &opts()).unwrap();
    assert_eq!(improved.method, Method::Continuous);
    assert_eq!(improved.statistic, report.statistic);
}

#[test]
fn universal_size_on_a_small_compatible_run() {
    let truth = triangle(0.25, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut rejections = 0;
    for _ in 0..200 {
        let data = sample_empirical(&mut rng, &truth, &[200, 200, 200]).unwrap();
        if universal_test(&data, 0.05, &opts()).unwrap().rejects() {
            rejections += 1;
        }
    }
    assert_eq!(rejections, 0);
}
