//! Analytic formulas for the index in small cataloged pattern families.
//!
//! The formulas are exact for consistent sequences. On inconsistent input
//! they still return the formula value, flagged as not exact, because overlap
//! marginals are then read from whichever pattern is consulted first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{McarError, Result};
use crate::lp::inconsistency;
use crate::model::{encode_cell, DiscreteSpace, MarginalSequence, Pattern, PatternCollection};

/// Inconsistency above which closed forms are reported as not exact.
pub const EXACT_TOL: f64 = 1e-9;

/// Largest `s` for which the subsets `B` of `[s]` are enumerated.
pub const MAX_SUBSET_BITS: usize = 20;

/// Cataloged pattern families with their shape requirements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FamilyTag {
    /// `{1,2},{2,3},{1,3}` on `[r] x [s] x [2]`.
    Rs2Triple,
    /// `{1,2},{2,3},{1,3}` on `[r] x [2] x [2]`.
    R22Triple,
    /// `{1,2},{2,3},{3,4},{1,4}` on `[r] x [2]^3`.
    Chain4,
    /// `{1,2},{2,3},{1,3},{3,4},{1,4}` on `[2]^4`.
    D4AllButOne,
    /// All six pairs on `[2]^4`.
    D4AllPairs,
    /// `{1,2,3},{1,4},{2,4},{3,4}` on `[2]^4`.
    D4SingleTriple,
    /// All four triples on `[2]^4`.
    D4AllTriples,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 7] = [
        FamilyTag::R22Triple,
        FamilyTag::Rs2Triple,
        FamilyTag::Chain4,
        FamilyTag::D4AllButOne,
        FamilyTag::D4AllPairs,
        FamilyTag::D4SingleTriple,
        FamilyTag::D4AllTriples,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::Rs2Triple => "rs2",
            FamilyTag::R22Triple => "r22",
            FamilyTag::Chain4 => "chain4",
            FamilyTag::D4AllButOne => "d4-all-but-one",
            FamilyTag::D4AllPairs => "d4-all-pairs",
            FamilyTag::D4SingleTriple => "d4-single-triple",
            FamilyTag::D4AllTriples => "d4-all-triples",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    /// The pattern set, as 1-based labels.
    pub fn labels(self) -> &'static [&'static [usize]] {
        match self {
            FamilyTag::Rs2Triple | FamilyTag::R22Triple => &[&[1, 2], &[2, 3], &[1, 3]],
            FamilyTag::Chain4 => &[&[1, 2], &[2, 3], &[3, 4], &[1, 4]],
            FamilyTag::D4AllButOne => &[&[1, 2], &[2, 3], &[1, 3], &[3, 4], &[1, 4]],
            FamilyTag::D4AllPairs => &[&[1, 2], &[1, 3], &[1, 4], &[2, 3], &[2, 4], &[3, 4]],
            FamilyTag::D4SingleTriple => &[&[1, 2, 3], &[1, 4], &[2, 4], &[3, 4]],
            FamilyTag::D4AllTriples => &[&[1, 2, 3], &[1, 2, 4], &[1, 3, 4], &[2, 3, 4]],
        }
    }

    /// Whether `space` and `collection` have exactly this family's shape.
    pub fn matches(self, space: &DiscreteSpace, collection: &PatternCollection) -> bool {
        let m = space.alphabet_sizes();
        let dim = self.labels().iter().flat_map(|l| l.iter()).max().copied().unwrap_or(0);
        if m.len() != dim || collection.len() != self.labels().len() {
            return false;
        }
        let same_set = self.labels().iter().all(|l| {
            Pattern::from_one_based(l)
                .map(|p| collection.position(&p).is_some())
                .unwrap_or(false)
        });
        if !same_set {
            return false;
        }
        match self {
            FamilyTag::Rs2Triple => m[2] == 2 && m[1] <= MAX_SUBSET_BITS,
            FamilyTag::R22Triple => m[1] == 2 && m[2] == 2,
            FamilyTag::Chain4 => m[1..].iter().all(|&v| v == 2),
            _ => m.iter().all(|&v| v == 2),
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A closed-form value with its exactness flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormValue {
    pub index: f64,
    pub family: FamilyTag,
    /// Total-variation inconsistency of the input.
    pub inconsistency: f64,
    /// False when the input is inconsistent beyond [`EXACT_TOL`].
    pub exact: bool,
}

/// Marginal probabilities of partial assignments, read from the first
/// pattern containing the assigned variables.
struct Probe<'a> {
    seq: &'a MarginalSequence,
}

impl<'a> Probe<'a> {
    fn new(seq: &'a MarginalSequence) -> Self {
        Self { seq }
    }

    /// `P(X_v = x for (v, x) in assignment)`, 0-based variables and values.
    fn p(&self, assignment: &[(usize, usize)]) -> f64 {
        let space = self.seq.space();
        let table = self
            .seq
            .tables()
            .iter()
            .find(|t| assignment.iter().all(|(v, _)| t.pattern().contains(*v)))
            .expect("family shape guarantees a covering pattern");
        let pattern = table.pattern();
        let radices: Vec<usize> = pattern.members().iter().map(|&j| space.size(j)).collect();
        let mut total = 0.0;
        let mut digits = vec![0usize; pattern.len()];
        for &mass in table.mass() {
            let hit = assignment.iter().all(|(v, x)| {
                let pos = pattern.members().iter().position(|m| m == v).expect("covered");
                digits[pos] == *x
            });
            if hit {
                total += mass;
            }
            for pos in (0..digits.len()).rev() {
                digits[pos] += 1;
                if digits[pos] < radices[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
        total
    }

    /// Table of pattern `labels` (1-based) as a mass vector.
    fn table(&self, labels: &[usize]) -> &[f64] {
        let p = Pattern::from_one_based(labels).expect("valid labels");
        self.seq.table(&p).expect("family shape guarantees the pattern").mass()
    }

    fn cell(&self, labels: &[usize], values: &[usize]) -> f64 {
        let p = Pattern::from_one_based(labels).expect("valid labels");
        let idx = encode_cell(self.seq.space(), &p, values).expect("in range");
        self.table(labels)[idx]
    }
}

fn require(seq: &MarginalSequence, tag: FamilyTag) -> Result<()> {
    if tag.matches(seq.space(), seq.collection()) {
        Ok(())
    } else {
        Err(McarError::Family(format!(
            "sequence with alphabets {:?} and patterns {} is not of shape {tag}",
            seq.space().alphabet_sizes(),
            seq.patterns().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
        )))
    }
}

fn wrap(seq: &MarginalSequence, family: FamilyTag, index: f64) -> ClosedFormValue {
    let inc = inconsistency(seq);
    ClosedFormValue {
        index: index.clamp(0.0, 1.0),
        family,
        inconsistency: inc,
        exact: inc <= EXACT_TOL,
    }
}

fn rs2_raw(seq: &MarginalSequence) -> f64 {
    let m = seq.space().alphabet_sizes();
    let (r, s) = (m[0], m[1]);
    let probe = Probe::new(seq);
    let p12 = probe.table(&[1, 2]);
    let p23 = probe.table(&[2, 3]);
    let p13 = probe.table(&[1, 3]);
    // p_{i.1}, and p_{..1} from the same table
    let pi1: Vec<f64> = (0..r).map(|i| p13[i * 2]).collect();
    let p_dot_dot_1: f64 = pi1.iter().sum();
    let mut best: f64 = 0.0;
    for mask in 0u32..(1u32 << s) {
        let in_b = |j: usize| mask & (1 << j) != 0;
        let p_b1: f64 = (0..s).filter(|&j| in_b(j)).map(|j| p23[j * 2]).sum();
        let mut gain = 0.0;
        for i in 0..r {
            let p_ib: f64 = (0..s).filter(|&j| in_b(j)).map(|j| p12[i * s + j]).sum();
            // greedy A: include i only on strict improvement
            if pi1[i] > p_ib {
                gain += pi1[i] - p_ib;
            }
        }
        best = best.max(gain + p_b1 - p_dot_dot_1);
    }
    2.0 * best
}

/// `{1,2},{2,3},{1,3}` on `[r] x [s] x [2]`: enumerate `B`, choose `A` greedily.
pub fn index_rs2(seq: &MarginalSequence) -> Result<ClosedFormValue> {
    require(seq, FamilyTag::Rs2Triple)?;
    Ok(wrap(seq, FamilyTag::Rs2Triple, rs2_raw(seq)))
}

/// The `rs2` objective for one `(A, B)` pair given as bitmasks; used to
/// validate the greedy choice of `A` against exhaustive search.
pub fn rs2_objective(seq: &MarginalSequence, a_mask: u64, b_mask: u64) -> Result<f64> {
    require(seq, FamilyTag::Rs2Triple)?;
    let m = seq.space().alphabet_sizes();
    let (r, s) = (m[0], m[1]);
    let probe = Probe::new(seq);
    let (p12, p23, p13) = (probe.table(&[1, 2]), probe.table(&[2, 3]), probe.table(&[1, 3]));
    let in_a = |i: usize| a_mask & (1 << i) != 0;
    let in_b = |j: usize| b_mask & (1 << j) != 0;
    let mut v = 0.0;
    for i in (0..r).filter(|&i| in_a(i)) {
        for j in (0..s).filter(|&j| in_b(j)) {
            v -= p12[i * s + j];
        }
        v += p13[i * 2];
    }
    for j in (0..s).filter(|&j| in_b(j)) {
        v += p23[j * 2];
    }
    v -= (0..r).map(|i| p13[i * 2]).sum::<f64>();
    Ok(2.0 * v)
}

fn r22_raw(seq: &MarginalSequence) -> f64 {
    let r = seq.space().size(0);
    let probe = Probe::new(seq);
    let mut best: f64 = 0.0;
    for j in 0..2 {
        let p_j1 = probe.cell(&[2, 3], &[j, 0]);
        let overlap: f64 = (0..r)
            .map(|i| probe.cell(&[1, 2], &[i, j]).min(probe.cell(&[1, 3], &[i, 0])))
            .sum();
        best = best.max(p_j1 - overlap);
    }
    2.0 * best
}

/// The `s = 2` case: `2 max_j { p_.j1 - sum_i min(p_ij., p_i.1) }_+`.
pub fn index_r22(seq: &MarginalSequence) -> Result<ClosedFormValue> {
    require(seq, FamilyTag::R22Triple)?;
    Ok(wrap(seq, FamilyTag::R22Triple, r22_raw(seq)))
}

fn chain4_raw(seq: &MarginalSequence) -> f64 {
    let r = seq.space().size(0);
    let probe = Probe::new(seq);
    let mut best: f64 = 0.0;
    for k in 0..2 {
        for l in 0..2 {
            let head = probe.cell(&[3, 4], &[k, l]) - probe.cell(&[2, 3], &[1, k]);
            let overlap: f64 = (0..r)
                .map(|i| probe.cell(&[1, 2], &[i, 0]).min(probe.cell(&[1, 4], &[i, l])))
                .sum();
            best = best.max(head - overlap);
        }
    }
    2.0 * best
}

/// Chain pairs on `[r] x [2]^3`:
/// `2 max_{k,l} { p_..kl - p_.2k. - sum_i min(p_i1.., p_i..l) }_+`.
pub fn index_chain4(seq: &MarginalSequence) -> Result<ClosedFormValue> {
    require(seq, FamilyTag::Chain4)?;
    Ok(wrap(seq, FamilyTag::Chain4, chain4_raw(seq)))
}

/// Binary chain, second form: `2 max_{i,j,k} (p_ij.. - p_.jk. - p_..k'1 - p_i..2)_+`
/// where `k'` is the other value of `k`.
pub fn index_chain4_binary_alt(seq: &MarginalSequence) -> Result<ClosedFormValue> {
    require(seq, FamilyTag::Chain4)?;
    if seq.space().size(0) != 2 {
        return Err(McarError::Family("the second chain form needs a binary X1".into()));
    }
    let probe = Probe::new(seq);
    let mut best: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let v = probe.cell(&[1, 2], &[i, j])
                    - probe.cell(&[2, 3], &[j, k])
                    - probe.cell(&[3, 4], &[1 - k, 0])
                    - probe.cell(&[1, 4], &[i, 1]);
                best = best.max(v);
            }
        }
    }
    Ok(wrap(seq, FamilyTag::Chain4, 2.0 * best))
}

/// Index of a three-variable binary sub-triangle given by 0-based variables.
fn triangle(seq: &MarginalSequence, vars: [usize; 3]) -> Result<f64> {
    let sub = seq.induced(&vars)?;
    if !FamilyTag::R22Triple.matches(sub.space(), sub.collection()) {
        return Err(McarError::Family(format!("variables {vars:?} do not induce a triangle")));
    }
    Ok(r22_raw(&sub))
}

/// Index of a four-cycle sub-collection, relabeled so the cycle reads
/// `1-2-3-4-1`. `order` lists the original variables along the cycle.
fn cycle(seq: &MarginalSequence, order: [usize; 4]) -> Result<f64> {
    let positions: Vec<usize> = (0..4)
        .map(|k| {
            let p = Pattern::new(vec![order[k], order[(k + 1) % 4]]).expect("distinct");
            seq.collection().position(&p).ok_or_else(|| {
                McarError::Family(format!("cycle edge {p} missing"))
            })
        })
        .collect::<Result<_>>()?;
    let sub = seq.select(&positions)?;
    let mut perm = vec![0; 4];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    let chain = sub.permute_variables(&perm)?;
    if !FamilyTag::Chain4.matches(chain.space(), chain.collection()) {
        return Err(McarError::Family("relabeled cycle is not a chain".into()));
    }
    Ok(chain4_raw(&chain))
}

fn d4_all_but_one(seq: &MarginalSequence) -> Result<f64> {
    let r123 = triangle(seq, [0, 1, 2])?;
    let r134 = triangle(seq, [0, 2, 3])?;
    let r_chain = cycle(seq, [0, 1, 2, 3])?;
    Ok(r123.max(r134).max(r_chain))
}

fn d4_all_pairs(seq: &MarginalSequence) -> Result<f64> {
    let mut best: f64 = 0.0;
    for vars in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
        best = best.max(triangle(seq, vars)?);
    }
    let probe = Probe::new(seq);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let v = -probe.p(&[(0, i), (1, j)]) - probe.p(&[(1, j), (2, k)])
                        - probe.p(&[(0, i), (2, k)])
                        + probe.p(&[(0, i), (3, l)])
                        + probe.p(&[(1, j), (3, l)])
                        + probe.p(&[(2, k), (3, l)])
                        - probe.p(&[(3, l)]);
                    best = best.max(v);
                }
            }
        }
    }
    // four-cycles left after removing two disjoint pairs
    for order in [[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3]] {
        best = best.max(cycle(seq, order)?);
    }
    Ok(best)
}

fn d4_single_triple(seq: &MarginalSequence) -> Result<f64> {
    let mut best: f64 = 0.0;
    for vars in [[0, 1, 3], [0, 2, 3], [1, 2, 3]] {
        best = best.max(triangle(seq, vars)?);
    }
    let probe = Probe::new(seq);
    let p = |a: &[(usize, usize)]| probe.p(a);
    let tilde = |i: usize, j: usize, k: usize, l: usize| {
        p(&[(0, i), (1, j), (2, k)]) + p(&[(0, 1 - i), (3, l)]) + p(&[(1, 1 - j), (3, l)])
            + p(&[(2, 1 - k), (3, l)])
            - p(&[(3, l)])
    };
    let mut min_tilde = f64::INFINITY;
    let mut min_pair = f64::INFINITY;
    let mut min_mixed = f64::INFINITY;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let t = tilde(i, j, k, l);
                    let t_bar = tilde(1 - i, 1 - j, 1 - k, 1 - l);
                    min_tilde = min_tilde.min(t);
                    min_pair = min_pair.min(t + t_bar);
                    let inner = (p(&[(0, i), (1, j)]) - p(&[(0, i), (3, l)]) + p(&[(1, 1 - j), (3, l)]))
                        .min(p(&[(1, j), (2, k)]) - p(&[(2, k), (3, l)]) + p(&[(1, 1 - j), (3, l)]))
                        .min(p(&[(0, i), (2, k)]) - p(&[(2, k), (3, l)]) + p(&[(0, 1 - i), (3, l)]));
                    min_mixed = min_mixed.min(t_bar + inner);
                }
            }
        }
    }
    Ok(best.max(-1.5 * min_tilde).max(-min_pair).max(-min_mixed))
}

fn d4_all_triples(seq: &MarginalSequence) -> Result<f64> {
    let mut best: f64 = 0.0;
    for j in 0..4 {
        // the three triples containing j
        let positions: Vec<usize> = seq
            .patterns()
            .iter()
            .enumerate()
            .filter(|(_, p)| p.contains(j))
            .map(|(k, _)| k)
            .collect();
        let sub = seq.select(&positions)?;
        let jp = Pattern::new(vec![j])?;
        let mut terms = [(0.0, 0.0); 2];
        for (x, term) in terms.iter_mut().enumerate() {
            let (w, slice) = sub.condition_on(&jp, &[x])?;
            let slice = slice.ok_or_else(|| McarError::Family("empty conditional slice".into()))?;
            let slice = slice.induced(&[0, 1, 2])?;
            let r = if w > 0.0 { r22_raw(&slice).clamp(0.0, 1.0) } else { 0.0 };
            *term = (w, r);
        }
        for x in 0..2 {
            let (w, r) = terms[x];
            let (w_bar, r_bar) = terms[1 - x];
            best = best.max(0.5 * (3.0 * w * r + w_bar * r_bar));
        }
    }
    Ok(best)
}

/// The binary `d = 4` catalog, items (i) to (v) selected by `tag`.
pub fn index_d4(seq: &MarginalSequence, tag: FamilyTag) -> Result<ClosedFormValue> {
    require(seq, tag)?;
    let value = match tag {
        FamilyTag::Chain4 => {
            if seq.space().size(0) != 2 {
                return Err(McarError::Family("the d = 4 catalog is all-binary".into()));
            }
            chain4_raw(seq)
        }
        FamilyTag::D4AllButOne => d4_all_but_one(seq)?,
        FamilyTag::D4AllPairs => d4_all_pairs(seq)?,
        FamilyTag::D4SingleTriple => d4_single_triple(seq)?,
        FamilyTag::D4AllTriples => d4_all_triples(seq)?,
        FamilyTag::Rs2Triple | FamilyTag::R22Triple => {
            return Err(McarError::Family(format!("{tag} is not a d = 4 family")))
        }
    };
    Ok(wrap(seq, tag, value))
}

/// Evaluates the closed form for `tag` on a sequence of exactly that shape.
pub fn evaluate(seq: &MarginalSequence, tag: FamilyTag) -> Result<ClosedFormValue> {
    match tag {
        FamilyTag::Rs2Triple => index_rs2(seq),
        FamilyTag::R22Triple => index_r22(seq),
        FamilyTag::Chain4 => index_chain4(seq),
        _ => index_d4(seq, tag),
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Relabeling `perm` (old variable `j` becomes `perm[j]`) applied to a
/// collection and its alphabet sizes.
pub fn permute_shape(
    space: &DiscreteSpace,
    collection: &PatternCollection,
    perm: &[usize],
) -> Result<(DiscreteSpace, PatternCollection)> {
    let d = space.dim();
    let mut sizes = vec![0; d];
    for j in 0..d {
        sizes[perm[j]] = space.size(j);
    }
    let patterns = collection
        .patterns()
        .iter()
        .map(|p| Pattern::new(p.members().iter().map(|&j| perm[j]).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        DiscreteSpace::new(sizes)?,
        PatternCollection::new(patterns, collection.sample_sizes().to_vec())?,
    ))
}

/// A detected family and the relabeling that brings the input into shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub tag: FamilyTag,
    pub permutation: Vec<usize>,
}

/// Finds the first cataloged family (in [`FamilyTag::ALL`] order) matching the
/// collection up to a relabeling of variables; `d <= 6`.
pub fn detect_family(space: &DiscreteSpace, collection: &PatternCollection) -> Option<Detection> {
    if space.dim() > 6 || !(3..=4).contains(&space.dim()) {
        return None;
    }
    let perms = permutations(space.dim());
    for tag in FamilyTag::ALL {
        for perm in &perms {
            if let Ok((s, c)) = permute_shape(space, collection, perm) {
                if tag.matches(&s, &c) {
                    return Some(Detection {
                        tag,
                        permutation: perm.clone(),
                    });
                }
            }
        }
    }
    None
}

/// Detects the family, relabels, and evaluates.
pub fn evaluate_detected(seq: &MarginalSequence) -> Result<Option<ClosedFormValue>> {
    let Some(det) = detect_family(seq.space(), seq.collection()) else {
        return Ok(None);
    };
    let relabeled = seq.permute_variables(&det.permutation)?;
    evaluate(&relabeled, det.tag).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::build_sim_family_rs2;

    #[test]
    fn sim_family_values() {
        let seq = build_sim_family_rs2(2, 0.4).unwrap();
        assert!((index_r22(&seq).unwrap().index - 0.3).abs() < 1e-12);
        let seq = build_sim_family_rs2(4, 0.35).unwrap();
        let v = index_rs2(&seq).unwrap();
        assert!((v.index - 0.2).abs() < 1e-12);
        assert!(v.exact);
    }

    #[test]
    fn shape_is_checked() {
        let seq = build_sim_family_rs2(4, 0.3).unwrap();
        assert!(index_r22(&seq).is_ok());
        assert!(matches!(index_chain4(&seq), Err(McarError::Family(_))));
        let space = DiscreteSpace::new(vec![4, 3, 2]).unwrap();
        let c = PatternCollection::from_labels(&[&[1, 2], &[2, 3], &[1, 3]]).unwrap();
        let seq = crate::sim::random_compatible(&space, &c, 1).unwrap();
        assert!(matches!(index_r22(&seq), Err(McarError::Family(_))));
        assert!(index_rs2(&seq).is_ok());
    }

    #[test]
    fn tag_names_round_trip() {
        for tag in FamilyTag::ALL {
            assert_eq!(FamilyTag::from_name(tag.name()), Some(tag));
        }
    }

    #[test]
    fn detection_finds_relabeled_chain() {
        let space = DiscreteSpace::new(vec![2, 2, 2, 3]).unwrap();
        // the chain 4-1-2-3-4 with the wide variable last
        let c = PatternCollection::from_labels(&[&[1, 4], &[1, 2], &[2, 3], &[3, 4]]).unwrap();
        let det = detect_family(&space, &c).unwrap();
        assert_eq!(det.tag, FamilyTag::Chain4);
        let (s, c2) = permute_shape(&space, &c, &det.permutation).unwrap();
        assert!(FamilyTag::Chain4.matches(&s, &c2));
    }
}
