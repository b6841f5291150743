//! Structural reductions of the index computation driven by the pattern
//! hypergraph.
//!
//! Three reductions are available. Variables seen in a single pattern can be
//! marginalized out without changing the index. Variables common to every
//! pattern can be conditioned on, giving a weighted sum of smaller indices
//! when all patterns agree on their marginal. A cut set splits the collection
//! into two halves whose indices bracket the full one.
//!
//! Variable indices in plans always refer to the input sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::index_rs2;
use crate::error::{McarError, Result};
use crate::lp::{index_value, MarginalOperator};
use crate::model::{decode_cell, MarginalSequence, Pattern, PatternCollection};

/// Largest discrepancy between shared marginals for conditioning to apply.
pub const SHARED_MARGINAL_TOL: f64 = 1e-9;

/// One reduction step. Variables are 0-based indices of the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReductionStep {
    /// Marginalize out `vars`, each seen in exactly one of `patterns`.
    DropSingleton { vars: Vec<usize>, patterns: Vec<Vec<usize>> },
    /// Condition on the variables common to every pattern.
    Condition { common: Vec<usize> },
    /// Bound the index by the two halves of a cut set.
    CutSplit { cut: Vec<usize>, first: Vec<Vec<usize>>, second: Vec<Vec<usize>> },
}

/// The structural plan for a pattern collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub steps: Vec<ReductionStep>,
    /// Patterns left after the singleton drops, in input labels.
    pub residual: Vec<Vec<usize>>,
    /// A single pattern remains, so the index is zero.
    pub trivial: bool,
}

impl ReductionPlan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One line per step with 1-based labels, for `--explain` output.
    pub fn describe(&self, names: Option<&[String]>) -> Vec<String> {
        let label = |v: &usize| match names {
            Some(n) if *v < n.len() => n[*v].clone(),
            _ => (v + 1).to_string(),
        };
        let set = |vs: &[usize]| format!("{{{}}}", vs.iter().map(label).collect::<Vec<_>>().join(","));
        let sets = |ps: &[Vec<usize>]| ps.iter().map(|p| set(p)).collect::<Vec<_>>().join(" ");
        let mut lines: Vec<String> = self
            .steps
            .iter()
            .map(|s| match s {
                ReductionStep::DropSingleton { vars, patterns } => {
                    format!("drop {} (seen only in {})", set(vars), sets(patterns))
                }
                ReductionStep::Condition { common } => format!("condition on {}", set(common)),
                ReductionStep::CutSplit { cut, first, second } => {
                    format!("cut at {}: [{}] | [{}]", set(cut), sets(first), sets(second))
                }
            })
            .collect();
        if self.trivial {
            lines.push("single pattern left: index 0".into());
        }
        lines
    }
}

/// Result of [`drop_single_pattern_vars`].
#[derive(Debug, Clone)]
pub struct Dropped {
    pub sequence: MarginalSequence,
    /// Removed variables, as indices of the input.
    pub dropped: Vec<usize>,
    /// For each variable of `sequence`, its index in the input.
    pub origin: Vec<usize>,
}

/// Sub-patterns after removing every variable seen in a single pattern.
///
/// A pattern whose reduction would coincide with another pattern keeps its
/// variables, since two tables on one pattern are not a marginal sequence.
/// Patterns made only of such variables disappear. Returns `None` when no
/// variable can be removed.
fn singleton_parts(patterns: &[Pattern], dim: usize) -> Option<Vec<(usize, Option<Pattern>)>> {
    let mut count = vec![0usize; dim];
    for p in patterns {
        for &v in p.members() {
            count[v] += 1;
        }
    }
    let lonely: Vec<usize> = (0..dim).filter(|&v| count[v] == 1).collect();
    if lonely.is_empty() {
        return None;
    }
    let mut reduced: Vec<Option<Pattern>> = patterns.iter().map(|p| p.without(&lonely)).collect();
    let mut touched: Vec<bool> = patterns.iter().map(|p| p.members().iter().any(|v| lonely.contains(v))).collect();
    loop {
        let mut revert = Vec::new();
        for i in 0..patterns.len() {
            let Some(ri) = &reduced[i] else { continue };
            let clash = (0..patterns.len()).any(|k| k != i && reduced[k].as_ref() == Some(ri));
            if clash && touched[i] {
                revert.push(i);
            }
        }
        if revert.is_empty() {
            break;
        }
        for i in revert {
            reduced[i] = Some(patterns[i].clone());
            touched[i] = false;
        }
    }
    if !touched.iter().any(|&t| t) {
        return None;
    }
    Some(reduced.into_iter().enumerate().collect())
}

/// Marginalizes out the variables that appear in exactly one pattern.
/// Returns `Ok(None)` when nothing can be removed.
pub fn drop_single_pattern_vars(seq: &MarginalSequence) -> Result<Option<Dropped>> {
    let Some(parts) = singleton_parts(seq.patterns(), seq.space().dim()) else {
        return Ok(None);
    };
    let kept: Vec<(usize, Pattern)> = parts.into_iter().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
    let before: Vec<usize> = used_vars(seq.patterns());
    if kept.is_empty() {
        return Err(McarError::Domain("every variable is seen in a single pattern".into()));
    }
    let (sequence, origin) = seq.reshape(&kept)?;
    let dropped = before.into_iter().filter(|v| !origin.contains(v)).collect();
    Ok(Some(Dropped {
        sequence,
        dropped,
        origin,
    }))
}

fn used_vars(patterns: &[Pattern]) -> Vec<usize> {
    let mut v: Vec<usize> = patterns.iter().flat_map(|p| p.members().to_vec()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Variables common to every pattern, if any.
pub fn common_vars(collection: &PatternCollection) -> Option<Pattern> {
    let mut it = collection.patterns().iter();
    let mut acc = it.next()?.clone();
    for p in it {
        acc = acc.intersection(p)?;
    }
    Some(acc)
}

/// One conditional sub-problem `x_J = values` with weight `p^J(x_J)`.
#[derive(Debug, Clone)]
pub struct ConditionalSlice {
    pub values: Vec<usize>,
    pub weight: f64,
    /// `None` when every pattern equals `J`; the slice index is then zero.
    pub sequence: Option<MarginalSequence>,
}

/// Largest absolute difference between the `J`-marginals of the patterns.
pub fn shared_marginal_discrepancy(seq: &MarginalSequence, j: &Pattern) -> Result<f64> {
    let margins = j_marginals(seq, j)?;
    let mut worst: f64 = 0.0;
    for m in &margins[1..] {
        for (a, b) in m.iter().zip(&margins[0]) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

fn j_marginals(seq: &MarginalSequence, j: &Pattern) -> Result<Vec<Vec<f64>>> {
    seq.tables().iter().map(|t| Ok(t.restrict(seq.space(), j)?.mass().to_vec())).collect()
}

/// Splits the sequence by the values of the variables common to every
/// pattern. Fails with a reduction-inapplicable error when the patterns
/// disagree on the common marginal beyond [`SHARED_MARGINAL_TOL`], unless
/// `force` is set, in which case slice weights average the patterns' marginals.
pub fn condition_common_vars(seq: &MarginalSequence, force: bool) -> Result<Vec<ConditionalSlice>> {
    let j = common_vars(seq.collection())
        .ok_or_else(|| McarError::Domain("no variable is common to every pattern".into()))?;
    let discrepancy = shared_marginal_discrepancy(seq, &j)?;
    if discrepancy > SHARED_MARGINAL_TOL && !force {
        return Err(McarError::ReductionInapplicable { discrepancy });
    }
    let margins = j_marginals(seq, &j)?;
    let k = margins.len() as f64;
    let cells = seq.space().cells(&j)?;
    let mut slices = Vec::new();
    for cell in 0..cells {
        let weight = margins.iter().map(|m| m[cell]).sum::<f64>() / k;
        if weight <= 0.0 {
            continue;
        }
        let values = decode_cell(seq.space(), &j, cell)?;
        let (_, sequence) = seq.condition_on(&j, &values)?;
        slices.push(ConditionalSlice {
            values,
            weight,
            sequence,
        });
    }
    Ok(slices)
}

/// Index bounds from a cut set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutBounds {
    pub lower: f64,
    pub upper: f64,
    pub first: f64,
    pub second: f64,
}

/// Checks that `cut` (a position) is a cut set for the two halves, given as
/// pattern positions.
pub fn is_cut_set(collection: &PatternCollection, cut: usize, first: &[usize], second: &[usize]) -> bool {
    let n = collection.len();
    let mut first_set: Vec<usize> = first.to_vec();
    let mut second_set: Vec<usize> = second.to_vec();
    first_set.sort_unstable();
    first_set.dedup();
    second_set.sort_unstable();
    second_set.dedup();
    if cut >= n || first_set.iter().chain(&second_set).any(|&i| i >= n) {
        return false;
    }
    let shared: Vec<usize> = first_set.iter().copied().filter(|i| second_set.contains(i)).collect();
    if shared != [cut] {
        return false;
    }
    let covered = (0..n).all(|i| first_set.contains(&i) || second_set.contains(&i));
    let vars = |set: &[usize]| used_vars(&set.iter().map(|&i| collection.patterns()[i].clone()).collect::<Vec<_>>());
    let (a, b) = (vars(&first_set), vars(&second_set));
    let meet: Vec<usize> = a.into_iter().filter(|v| b.contains(v)).collect();
    covered && meet == collection.patterns()[cut].members()
}

/// The first cut set found, scanning patterns in order: the halves are the
/// connected components of the other patterns (linked through variables
/// outside the cut), the first component against the rest.
pub fn find_cut(collection: &PatternCollection) -> Option<(usize, Vec<usize>, Vec<usize>)> {
    let patterns = collection.patterns();
    for (c, cut) in patterns.iter().enumerate() {
        let others: Vec<usize> = (0..patterns.len()).filter(|&i| i != c).collect();
        if others.len() < 2 {
            continue;
        }
        let outside = |i: usize| patterns[i].without(cut.members());
        let linked = |i: usize, k: usize| match (outside(i), outside(k)) {
            (Some(a), Some(b)) => a.intersection(&b).is_some(),
            _ => false,
        };
        let mut component = vec![others[0]];
        let mut frontier = vec![others[0]];
        while let Some(i) = frontier.pop() {
            for &k in &others {
                if !component.contains(&k) && linked(i, k) {
                    component.push(k);
                    frontier.push(k);
                }
            }
        }
        if component.len() == others.len() {
            continue;
        }
        let mut first: Vec<usize> = std::iter::once(c).chain(component.iter().copied()).collect();
        first.sort_unstable();
        let second: Vec<usize> = (0..patterns.len()).filter(|i| *i == c || !component.contains(i)).collect();
        return Some((c, first, second));
    }
    None
}

/// Sub-sequence on the given patterns, over the variables they use.
fn half(seq: &MarginalSequence, positions: &[usize]) -> Result<MarginalSequence> {
    let parts: Vec<(usize, Pattern)> = positions.iter().map(|&i| (i, seq.patterns()[i].clone())).collect();
    Ok(seq.reshape(&parts)?.0)
}

/// `[max(R1, R2), R1 + R2]` for the two halves of a cut set; the half
/// indices are computed with [`reduced_index`].
pub fn cut_set_bounds(seq: &MarginalSequence, cut: usize, first: &[usize], second: &[usize]) -> Result<CutBounds> {
    if !is_cut_set(seq.collection(), cut, first, second) {
        return Err(McarError::Domain(format!(
            "pattern {} is not a cut set for the given halves",
            seq.patterns().get(cut).map(|p| p.to_string()).unwrap_or_default()
        )));
    }
    let options = ReduceOptions::default();
    let r1 = reduced_index(&half(seq, first)?, &options)?.index;
    let r2 = reduced_index(&half(seq, second)?, &options)?.index;
    Ok(CutBounds {
        lower: r1.max(r2),
        upper: (r1 + r2).min(1.0),
        first: r1,
        second: r2,
    })
}

/// Whether the collection is the pentagon `{1,2},{2,3},{1,3},{3,4},{1,4}`.
pub fn is_pentagon(collection: &PatternCollection) -> bool {
    let labels: [&[usize]; 5] = [&[1, 2], &[2, 3], &[1, 3], &[3, 4], &[1, 4]];
    collection.len() == 5
        && labels
            .iter()
            .all(|l| Pattern::from_one_based(l).is_ok_and(|p| collection.position(&p).is_some()))
}

/// The pentagon surrogate on `[2] x [r] x [s] x [t]`: the larger of the two
/// triangle indices on `{1,2,3}` and `{1,3,4}`, each from the `rs2` closed
/// form with `X1` in the binary role. For consistent input it brackets the
/// index as `R~ <= R <= 2 R~`.
pub fn pentagon_surrogate(seq: &MarginalSequence) -> Result<f64> {
    if !is_pentagon(seq.collection()) || seq.space().dim() != 4 || seq.space().size(0) != 2 {
        return Err(McarError::Family("the pentagon surrogate needs the pentagon on [2] x [r] x [s] x [t]".into()));
    }
    // X2 -> position 0, X3 -> 1, X1 -> 2
    let left = seq.induced(&[0, 1, 2])?.permute_variables(&[2, 0, 1])?;
    // (X1, X3, X4): X4 -> 0, X3 -> 1, X1 -> 2
    let right = seq.induced(&[0, 2, 3])?.permute_variables(&[2, 1, 0])?;
    Ok(index_rs2(&left)?.index.max(index_rs2(&right)?.index))
}

/// Builds the structural plan: singleton drops to a fixpoint, then a
/// conditioning step if some variable is common to every pattern, else the
/// first cut set found.
pub fn plan_reductions(collection: &PatternCollection) -> ReductionPlan {
    let dim = used_vars(collection.patterns()).last().map_or(0, |v| v + 1);
    let mut patterns: Vec<Pattern> = collection.patterns().to_vec();
    let mut steps = Vec::new();
    while let Some(parts) = singleton_parts(&patterns, dim) {
        let before = used_vars(&patterns);
        let affected: Vec<Vec<usize>> = parts
            .iter()
            .filter(|(i, p)| p.as_ref() != Some(&patterns[*i]))
            .map(|(i, _)| patterns[*i].members().to_vec())
            .collect();
        patterns = parts.into_iter().filter_map(|(_, p)| p).collect();
        let after = used_vars(&patterns);
        let vars: Vec<usize> = before.into_iter().filter(|v| !after.contains(v)).collect();
        steps.push(ReductionStep::DropSingleton { vars, patterns: affected });
        if patterns.is_empty() {
            break;
        }
    }
    let residual: Vec<Vec<usize>> = patterns.iter().map(|p| p.members().to_vec()).collect();
    let trivial = patterns.len() <= 1;
    if !trivial {
        let residual_collection = PatternCollection::without_sizes(patterns.clone()).expect("distinct patterns");
        if let Some(common) = common_vars(&residual_collection) {
            steps.push(ReductionStep::Condition {
                common: common.members().to_vec(),
            });
        } else if let Some((cut, first, second)) = find_cut(&residual_collection) {
            let labels = |set: &[usize]| set.iter().map(|&i| patterns[i].members().to_vec()).collect();
            steps.push(ReductionStep::CutSplit {
                cut: patterns[cut].members().to_vec(),
                first: labels(&first),
                second: labels(&second),
            });
        }
    }
    ReductionPlan {
        steps,
        residual,
        trivial,
    }
}

/// Options for [`reduced_index`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ReduceOptions {
    /// Condition even when the shared marginals disagree; approximate.
    pub force_condition: bool,
    /// Skip all reductions and solve the LP directly.
    pub disable: bool,
}

/// The index computed through the plan.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedIndex {
    /// Exact value, or the lower bound when only a cut-set interval exists.
    pub index: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub plan: ReductionPlan,
    /// Steps actually applied, in input labels.
    pub applied: Vec<ReductionStep>,
    /// For each variable of the residual problem, its index in the input.
    pub origin: Vec<usize>,
    /// The residual problem after singleton drops.
    #[serde(skip)]
    pub residual: Option<MarginalSequence>,
}

/// Computes the index using the reductions where they apply and the LP on
/// what is left. Conditioning is applied only when the shared marginals agree
/// (or `force_condition` is set); a cut set is used only when the residual
/// LP exceeds the joint-size guard, giving an interval.
pub fn reduced_index(seq: &MarginalSequence, options: &ReduceOptions) -> Result<ReducedIndex> {
    let plan = plan_reductions(seq.collection());
    let exact = |index: f64, plan: ReductionPlan, applied, origin, residual| ReducedIndex {
        index,
        lower: index,
        upper: index,
        exact: true,
        plan,
        applied,
        origin,
        residual,
    };
    if options.disable {
        let origin = (0..seq.space().dim()).collect();
        return Ok(exact(index_value(seq)?, plan, Vec::new(), origin, Some(seq.clone())));
    }
    let mut applied = Vec::new();
    if plan.residual.is_empty() {
        // every pattern is made of its own variables: they are independent
        return Ok(exact(0.0, plan, applied, Vec::new(), None));
    }
    let (current, origin) = match drop_single_pattern_vars(seq) {
        Ok(Some(d)) => {
            applied.push(ReductionStep::DropSingleton {
                vars: d.dropped.clone(),
                patterns: plan
                    .steps
                    .iter()
                    .find_map(|s| match s {
                        ReductionStep::DropSingleton { patterns, .. } => Some(patterns.clone()),
                        _ => None,
                    })
                    .unwrap_or_default(),
            });
            (d.sequence, d.origin)
        }
        Ok(None) => (seq.clone(), (0..seq.space().dim()).collect()),
        Err(e) => return Err(e),
    };
    if current.collection().len() <= 1 {
        return Ok(exact(0.0, plan, applied, origin, Some(current)));
    }
    let to_input = |p: &Pattern| p.members().iter().map(|&v| origin[v]).collect::<Vec<_>>();
    if let Some(common) = common_vars(current.collection()) {
        match condition_common_vars(&current, options.force_condition) {
            Ok(slices) => {
                applied.push(ReductionStep::Condition {
                    common: to_input(&common),
                });
                let inner = ReduceOptions {
                    force_condition: options.force_condition,
                    disable: false,
                };
                let parts: Vec<(f64, f64, bool)> = slices
                    .par_iter()
                    .map(|s| match &s.sequence {
                        Some(sub) => {
                            let r = reduced_index(sub, &inner)?;
                            Ok((s.weight * r.lower, s.weight * r.upper, r.exact))
                        }
                        None => Ok((0.0, 0.0, true)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let lower: f64 = parts.iter().map(|p| p.0).sum();
                let upper: f64 = parts.iter().map(|p| p.1).sum();
                let all_exact = parts.iter().all(|p| p.2);
                return Ok(ReducedIndex {
                    index: lower.clamp(0.0, 1.0),
                    lower: lower.clamp(0.0, 1.0),
                    upper: upper.clamp(0.0, 1.0),
                    exact: all_exact,
                    plan,
                    applied,
                    origin,
                    residual: Some(current),
                });
            }
            Err(McarError::ReductionInapplicable { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    match MarginalOperator::new(current.space(), current.collection()) {
        Ok(op) => {
            let r = op.index(&current)?;
            Ok(exact(r, plan, applied, origin, Some(current)))
        }
        Err(McarError::Capacity { what, size, limit }) => {
            let Some((cut, first, second)) = find_cut(current.collection()) else {
                return Err(McarError::Capacity { what, size, limit });
            };
            let b = cut_set_bounds(&current, cut, &first, &second)?;
            let labels = |set: &[usize]| set.iter().map(|&i| to_input(&current.patterns()[i])).collect();
            applied.push(ReductionStep::CutSplit {
                cut: to_input(&current.patterns()[cut]),
                first: labels(&first),
                second: labels(&second),
            });
            Ok(ReducedIndex {
                index: b.lower,
                lower: b.lower,
                upper: b.upper,
                exact: false,
                plan,
                applied,
                origin,
                residual: Some(current),
            })
        }
        Err(e) => Err(e),
    }
}

/// Slice index helper used by tests and reports: `Σ w R(slice)` via the LP.
pub fn conditioned_index(seq: &MarginalSequence, force: bool) -> Result<f64> {
    let slices = condition_common_vars(seq, force)?;
    let mut total = 0.0;
    for s in slices {
        if let Some(sub) = &s.sequence {
            total += s.weight * index_value(sub)?;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}
