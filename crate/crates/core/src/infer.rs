//! The hypothesis tests of compatibility: universal, improved, binned
//! continuous, and the Monte Carlo bootstrap.
//!
//! Every test computes the statistic `R(P^_S)` through [`reduced_index`] and
//! returns a serializable [`TestReport`].

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crit::{bins_for_bandwidth, c_alpha, c_alpha_prime, critical_values, facet_catalog_entries, CriticalValues, FacetInfo};
use crate::error::{McarError, Result};
use crate::ingest::{bin_continuous, empirical_marginals, BinningSpec, IncompleteDataset};
use crate::lp::incompatibility_index;
use crate::model::MarginalSequence;
use crate::reduce::{reduced_index, ReduceOptions, ReductionStep};
use crate::sim::sample_empirical;

/// Bootstrap statistics within this distance of `R^` count as ties.
pub const TIE_TOL: f64 = 1e-10;

/// Largest `R^` for which the bootstrap null `Q^_S` is formed.
pub const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Universal,
    Improved,
    Continuous,
    Bootstrap,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Universal => "universal",
            Method::Improved => "improved",
            Method::Continuous => "continuous",
            Method::Bootstrap => "bootstrap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Retain,
}

/// How bootstrap replicates are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapRule {
    /// `p = (1 + #{b : R_b >= R^}) / (B + 1)`, reject iff `p <= alpha`.
    #[default]
    Standard,
    /// Reject iff `1 + #{b : R_b <= R(Q^_S)} <= alpha (B + 1)`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDetails {
    pub replicates: usize,
    pub seed: u64,
    pub rule: BootstrapRule,
    /// Replicates counted by the rule.
    pub count: usize,
    /// Index of the bootstrap null `Q^_S` (zero up to LP tolerance).
    pub null_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningDetails {
    pub bandwidths: Vec<f64>,
    pub bins: Vec<usize>,
    /// `L (|S| - 1) sum_j h_j^{r_j}`.
    pub bias_term: f64,
}

/// Outcome of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    pub statistic: f64,
    /// False when the statistic is only a lower bound.
    pub statistic_exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub alpha: f64,
    pub decision: Decision,
    /// 1-based patterns with their sample sizes.
    pub patterns: Vec<Vec<usize>>,
    pub sample_sizes: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<String>>,
    pub reductions: Vec<ReductionStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical: Option<CriticalValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facet: Option<FacetInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapDetails>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<BinningDetails>,
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn rejects(&self) -> bool {
        self.decision == Decision::Reject
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Options shared by the tests.
#[derive(Debug, Clone, Default)]
pub struct TestOptions {
    pub reduce: ReduceOptions,
    /// Column names for the report.
    pub variables: Option<Vec<String>>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(McarError::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

struct Statistic {
    value: f64,
    exact: bool,
    reductions: Vec<ReductionStep>,
    warnings: Vec<String>,
}

fn statistic(seq: &MarginalSequence, options: &TestOptions) -> Result<Statistic> {
    let r = reduced_index(seq, &options.reduce)?;
    let mut warnings = Vec::new();
    if !r.exact {
        warnings.push(format!(
            "statistic is the lower bound of the interval [{:.6}, {:.6}]",
            r.lower, r.upper
        ));
    }
    if options.reduce.force_condition {
        warnings.push("conditioning forced; the statistic may be approximate".into());
    }
    Ok(Statistic {
        value: r.index,
        exact: r.exact,
        reductions: r.applied,
        warnings,
    })
}

fn base_report(
    method: Method,
    seq: &MarginalSequence,
    alpha: f64,
    stat: Statistic,
    options: &TestOptions,
) -> TestReport {
    TestReport {
        method,
        statistic: stat.value,
        statistic_exact: stat.exact,
        critical_value: None,
        p_value: None,
        alpha,
        decision: Decision::Retain,
        patterns: seq.patterns().iter().map(|p| p.one_based()).collect(),
        sample_sizes: seq.collection().sample_sizes().to_vec(),
        variables: options.variables.clone(),
        reductions: stat.reductions,
        critical: None,
        facet: None,
        bootstrap: None,
        binning: None,
        warnings: stat.warnings,
    }
}

/// Rejects iff `R^ >= C_alpha`.
pub fn universal_test(seq: &MarginalSequence, alpha: f64, options: &TestOptions) -> Result<TestReport> {
    check_alpha(alpha)?;
    let critical = c_alpha(seq.space(), seq.collection(), alpha)?;
    let stat = statistic(seq, options)?;
    let mut report = base_report(Method::Universal, seq, alpha, stat, options);
    report.critical_value = Some(critical);
    if report.statistic >= critical {
        report.decision = Decision::Reject;
    }
    Ok(report)
}

/// Chooses facet information: the given one, else the catalog entry with
/// the smallest `C'_alpha`.
pub fn choose_facet(seq: &MarginalSequence, alpha: f64, facet: Option<&FacetInfo>) -> Result<FacetInfo> {
    if let Some(f) = facet {
        return Ok(f.clone());
    }
    let mut best: Option<(f64, FacetInfo)> = None;
    for entry in facet_catalog_entries(seq.space(), seq.collection()) {
        let v = c_alpha_prime(seq.space(), seq.collection(), alpha, &entry)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, entry));
        }
    }
    best.map(|(_, f)| f).ok_or(McarError::MissingFacetInfo)
}

/// Rejects iff `R^ >= min(C_alpha, C'_alpha)`.
pub fn improved_test(
    seq: &MarginalSequence,
    alpha: f64,
    facet: Option<&FacetInfo>,
    options: &TestOptions,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let facet = choose_facet(seq, alpha, facet)?;
    let cv = critical_values(seq.space(), seq.collection(), alpha, &facet)?;
    let stat = statistic(seq, options)?;
    let mut report = base_report(Method::Improved, seq, alpha, stat, options);
    report.critical_value = Some(cv.min);
    report.critical = Some(cv);
    report.facet = Some(facet);
    if report.statistic >= report.critical_value.unwrap_or(f64::INFINITY) {
        report.decision = Decision::Reject;
    }
    Ok(report)
}

/// Bins the continuous columns, then runs the universal test (or the
/// improved one when `improved` is set) on the binned tables.
pub fn continuous_test(
    data: &IncompleteDataset,
    spec: &BinningSpec,
    alpha: f64,
    improved: bool,
    facet: Option<&FacetInfo>,
    options: &TestOptions,
) -> Result<TestReport> {
    let binned = bin_continuous(data, spec)?;
    let seq = empirical_marginals(&binned)?;
    let mut options = options.clone();
    options.variables.get_or_insert_with(|| data.schema.names());
    let mut report = if improved {
        match improved_test(&seq, alpha, facet, &options) {
            Err(McarError::MissingFacetInfo) => {
                let mut r = universal_test(&seq, alpha, &options)?;
                r.warnings.push("no facet information for the binned space; used C_alpha".into());
                r
            }
            other => other?,
        }
    } else {
        universal_test(&seq, alpha, &options)?
    };
    report.method = Method::Continuous;
    let bins = spec.bandwidths.iter().map(|&h| bins_for_bandwidth(h)).collect::<Result<Vec<_>>>()?;
    report.binning = Some(BinningDetails {
        bandwidths: spec.bandwidths.clone(),
        bins,
        bias_term: spec.bias_term(seq.collection().len()),
    });
    if data.dropped_rows > 0 {
        report.warnings.push(format!("{} entirely missing rows were dropped", data.dropped_rows));
    }
    Ok(report)
}

/// Monte Carlo test: `B` parametric bootstrap samples from the closest
/// compatible sequence `Q^_S`, with the observed pattern sizes.
/// Replicate `b` draws from its own ChaCha stream `b` of `seed`, so results
/// do not depend on the number of threads.
pub fn bootstrap_test(
    seq: &MarginalSequence,
    alpha: f64,
    replicates: usize,
    seed: u64,
    rule: BootstrapRule,
    options: &TestOptions,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    if replicates == 0 {
        return Err(McarError::Domain("the bootstrap needs at least one replicate".into()));
    }
    seq.collection().ensure_positive_sizes()?;
    let decomposition = incompatibility_index(seq)?;
    if decomposition.index >= 1.0 - DEGENERATE_TOL {
        return Err(McarError::DegenerateNull {
            index: decomposition.index,
        });
    }
    let null = decomposition
        .closest_compatible
        .ok_or(McarError::DegenerateNull {
            index: decomposition.index,
        })?;
    let stat = statistic(seq, options)?;
    let observed = stat.value;
    let sizes = seq.collection().sample_sizes().to_vec();
    let inner = TestOptions {
        reduce: options.reduce,
        variables: None,
    };
    let replicate_stats: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let sample = sample_empirical(&mut rng, &null, &sizes)?;
            Ok(statistic(&sample, &inner)?.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let null_index = statistic(&null, &inner)?.value;
    let count = match rule {
        BootstrapRule::Standard => replicate_stats.iter().filter(|&&r| r >= observed - TIE_TOL).count(),
        BootstrapRule::Literal => replicate_stats.iter().filter(|&&r| r <= null_index).count(),
    };
    let (p, decision) = monte_carlo_decision(count, replicates, alpha);
    let mut report = base_report(Method::Bootstrap, seq, alpha, stat, options);
    if alpha * ((replicates + 1) as f64) < 1.0 {
        report
            .warnings
            .push(format!("alpha (B + 1) < 1 with B = {replicates}: the test cannot reject"));
    }
    report.p_value = Some(p);
    report.decision = decision;
    report.bootstrap = Some(BootstrapDetails {
        replicates,
        seed,
        rule,
        count,
        null_index,
    });
    Ok(report)
}

/// Monte Carlo p-value `(1 + count) / (B + 1)` and decision.
pub fn monte_carlo_decision(count: usize, replicates: usize, alpha: f64) -> (f64, Decision) {
    let p = (1 + count) as f64 / (replicates + 1) as f64;
    (p, if p <= alpha { Decision::Reject } else { Decision::Retain })
}
