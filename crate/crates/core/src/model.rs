//! Core domain types: variable spaces, observation patterns, marginal tables
//! and the stacked coordinate system over a pattern collection.
//!
//! Categories and variable indices are 0-based everywhere in this module.
//! Patterns print 1-based (`{1,3}`) to match how users name columns.

use std::fmt;

use crate::error::{McarError, Result};

/// Largest joint alphabet we are willing to enumerate cell by cell.
pub const MAX_JOINT_CELLS: usize = 1 << 22;

/// Tolerance for the sum-to-one check on probability tables.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Product of finite alphabets `[m_1] x ... x [m_d]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscreteSpace {
    alphabet_sizes: Vec<usize>,
}

impl DiscreteSpace {
    pub fn new(alphabet_sizes: Vec<usize>) -> Result<Self> {
        if alphabet_sizes.is_empty() {
            return Err(McarError::Domain("a space needs at least one variable".into()));
        }
        if let Some(j) = alphabet_sizes.iter().position(|&m| m == 0) {
            return Err(McarError::Domain(format!(
                "variable {} has an empty alphabet",
                j + 1
            )));
        }
        Ok(Self { alphabet_sizes })
    }

    pub fn dim(&self) -> usize {
        self.alphabet_sizes.len()
    }

    pub fn alphabet_sizes(&self) -> &[usize] {
        &self.alphabet_sizes
    }

    pub fn size(&self, variable: usize) -> usize {
        self.alphabet_sizes[variable]
    }

    /// `|X_S|`, or a capacity error if the product overflows.
    pub fn cells(&self, pattern: &Pattern) -> Result<usize> {
        self.check_pattern(pattern)?;
        let mut total: u128 = 1;
        for &j in pattern.members() {
            total *= self.alphabet_sizes[j] as u128;
            if total > u64::MAX as u128 {
                return Err(McarError::Capacity {
                    what: "pattern alphabet",
                    size: total,
                    limit: u64::MAX as u128,
                });
            }
        }
        usize::try_from(total).map_err(|_| McarError::Capacity {
            what: "pattern alphabet",
            size: total,
            limit: usize::MAX as u128,
        })
    }

    /// `|X|` for the whole space, guarded by [`MAX_JOINT_CELLS`].
    pub fn joint_cells(&self) -> Result<usize> {
        self.joint_cells_within(MAX_JOINT_CELLS)
    }

    pub fn joint_cells_within(&self, limit: usize) -> Result<usize> {
        let mut total: u128 = 1;
        for &m in &self.alphabet_sizes {
            total = total.saturating_mul(m as u128);
        }
        if total > limit as u128 {
            return Err(McarError::Capacity {
                what: "joint alphabet",
                size: total,
                limit: limit as u128,
            });
        }
        Ok(total as usize)
    }

    pub fn full_pattern(&self) -> Pattern {
        Pattern((0..self.dim()).collect())
    }

    pub fn check_pattern(&self, pattern: &Pattern) -> Result<()> {
        match pattern.members().last() {
            Some(&last) if last >= self.dim() => Err(McarError::Domain(format!(
                "pattern {pattern} refers to variable {} but the space has {} variables",
                last + 1,
                self.dim()
            ))),
            _ => Ok(()),
        }
    }
}

/// A nonempty, sorted set of variable indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern(Vec<usize>);

impl Pattern {
    /// Canonicalizes (sorts) the members; rejects empty or repeated indices.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(McarError::Domain("observation patterns must be nonempty".into()));
        }
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(McarError::Domain(format!(
                "pattern has repeated variables: {members:?}"
            )));
        }
        Ok(Self(members))
    }

    /// Builds a pattern from 1-based variable labels.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(McarError::Domain("variable labels are 1-based".into()));
        }
        Self::new(labels.iter().map(|&j| j - 1).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, variable: usize) -> bool {
        self.0.binary_search(&variable).is_ok()
    }

    pub fn is_subset_of(&self, other: &Pattern) -> bool {
        self.0.iter().all(|&j| other.contains(j))
    }

    /// Members shared with `other`, or `None` when the overlap is empty.
    pub fn intersection(&self, other: &Pattern) -> Option<Pattern> {
        let shared: Vec<usize> = self.0.iter().copied().filter(|&j| other.contains(j)).collect();
        (!shared.is_empty()).then_some(Pattern(shared))
    }

    /// Members not in `removed`, or `None` if nothing is left.
    pub fn without(&self, removed: &[usize]) -> Option<Pattern> {
        let kept: Vec<usize> = self.0.iter().copied().filter(|j| !removed.contains(j)).collect();
        (!kept.is_empty()).then_some(Pattern(kept))
    }

    /// 1-based labels, as printed.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&j| j + 1).collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        f.write_str("}")
    }
}

/// The observed patterns with their per-pattern sample sizes `n_S`.
///
/// Population-level sequences (simulation families, hand-built examples)
/// carry `n_S = 0`; the tests reject those before computing critical values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternCollection {
    patterns: Vec<Pattern>,
    sample_sizes: Vec<u64>,
}

impl PatternCollection {
    pub fn new(patterns: Vec<Pattern>, sample_sizes: Vec<u64>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(McarError::Domain("pattern collection is empty".into()));
        }
        if patterns.len() != sample_sizes.len() {
            return Err(McarError::Domain(format!(
                "{} patterns but {} sample sizes",
                patterns.len(),
                sample_sizes.len()
            )));
        }
        for (i, p) in patterns.iter().enumerate() {
            if patterns[..i].contains(p) {
                return Err(McarError::Domain(format!("pattern {p} listed twice")));
            }
        }
        Ok(Self {
            patterns,
            sample_sizes,
        })
    }

    /// A collection without sample sizes (all `n_S = 0`).
    pub fn without_sizes(patterns: Vec<Pattern>) -> Result<Self> {
        let n = patterns.len();
        Self::new(patterns, vec![0; n])
    }

    /// Shorthand for tests and examples: 1-based label lists.
    pub fn from_labels(labels: &[&[usize]]) -> Result<Self> {
        let patterns = labels
            .iter()
            .map(|l| Pattern::from_one_based(l))
            .collect::<Result<Vec<_>>>()?;
        Self::without_sizes(patterns)
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn sample_sizes(&self) -> &[u64] {
        &self.sample_sizes
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn position(&self, pattern: &Pattern) -> Option<usize> {
        self.patterns.iter().position(|p| p == pattern)
    }

    pub fn with_sample_sizes(&self, sample_sizes: Vec<u64>) -> Result<Self> {
        Self::new(self.patterns.clone(), sample_sizes)
    }

    /// Variables that appear in at least one pattern, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self.patterns.iter().flat_map(|p| p.members().to_vec()).collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Ordered pairs `(i, k)`, `i < k`, of patterns with a nonempty overlap.
    pub fn overlapping_pairs(&self) -> Vec<(usize, usize, Pattern)> {
        let mut out = Vec::new();
        for i in 0..self.patterns.len() {
            for k in i + 1..self.patterns.len() {
                if let Some(shared) = self.patterns[i].intersection(&self.patterns[k]) {
                    out.push((i, k, shared));
                }
            }
        }
        out
    }

    pub fn ensure_positive_sizes(&self) -> Result<()> {
        match self.sample_sizes.iter().position(|&n| n == 0) {
            Some(i) => Err(McarError::Domain(format!(
                "pattern {} has n_S = 0; drop it before testing",
                self.patterns[i]
            ))),
            None => Ok(()),
        }
    }
}

/// Mixed-radix index of a cell of `X_S`, first member most significant.
pub fn encode_cell(space: &DiscreteSpace, pattern: &Pattern, values: &[usize]) -> Result<usize> {
    space.check_pattern(pattern)?;
    if values.len() != pattern.len() {
        return Err(McarError::Range(format!(
            "pattern {pattern} needs {} values, got {}",
            pattern.len(),
            values.len()
        )));
    }
    let mut index = 0usize;
    for (&j, &v) in pattern.members().iter().zip(values) {
        let m = space.size(j);
        if v >= m {
            return Err(McarError::Range(format!(
                "category {} for variable {} exceeds alphabet size {m}",
                v + 1,
                j + 1
            )));
        }
        index = index * m + v;
    }
    Ok(index)
}

/// Inverse of [`encode_cell`].
pub fn decode_cell(space: &DiscreteSpace, pattern: &Pattern, mut index: usize) -> Result<Vec<usize>> {
    let cells = space.cells(pattern)?;
    if index >= cells {
        return Err(McarError::Range(format!(
            "cell index {index} outside [0, {cells}) for pattern {pattern}"
        )));
    }
    let mut values = vec![0; pattern.len()];
    for (slot, &j) in values.iter_mut().zip(pattern.members()).rev() {
        let m = space.size(j);
        *slot = index % m;
        index /= m;
    }
    Ok(values)
}

/// For every cell of `from`, the index of its projection in `to` (`to ⊆ from`).
pub fn cell_projection(space: &DiscreteSpace, from: &Pattern, to: &Pattern) -> Result<Vec<usize>> {
    if !to.is_subset_of(from) {
        return Err(McarError::Domain(format!("{to} is not a subset of {from}")));
    }
    let cells = space.cells(from)?;
    // stride of each `from` member inside the `to` encoding (0 when dropped)
    let mut strides = vec![0usize; from.len()];
    let mut stride = 1usize;
    for &j in to.members().iter().rev() {
        let pos = from.members().iter().position(|&x| x == j).expect("subset");
        strides[pos] = stride;
        stride *= space.size(j);
    }
    let radices: Vec<usize> = from.members().iter().map(|&j| space.size(j)).collect();
    let mut digits = vec![0usize; from.len()];
    let mut target = 0usize;
    let mut out = Vec::with_capacity(cells);
    for _ in 0..cells {
        out.push(target);
        // increment the mixed-radix counter, last digit fastest
        for pos in (0..digits.len()).rev() {
            digits[pos] += 1;
            target += strides[pos];
            if digits[pos] < radices[pos] {
                break;
            }
            target -= strides[pos] * digits[pos];
            digits[pos] = 0;
        }
    }
    Ok(out)
}

/// One pattern's mass function over `X_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pattern: Pattern,
    mass: Vec<f64>,
    probability: bool,
}

impl MarginalTable {
    /// A probability table: nonnegative entries summing to one within 1e-12.
    pub fn probability(space: &DiscreteSpace, pattern: Pattern, mass: Vec<f64>) -> Result<Self> {
        let table = Self::measure(space, pattern, mass)?;
        let total = table.total();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(McarError::Domain(format!(
                "table for {} sums to {total}, not 1",
                table.pattern
            )));
        }
        Ok(Self {
            probability: true,
            ..table
        })
    }

    /// A nonnegative measure table (cone elements); no normalization check.
    pub fn measure(space: &DiscreteSpace, pattern: Pattern, mass: Vec<f64>) -> Result<Self> {
        let cells = space.cells(&pattern)?;
        if mass.len() != cells {
            return Err(McarError::Domain(format!(
                "table for {pattern} has {} entries, expected {cells}",
                mass.len()
            )));
        }
        if let Some(i) = mass.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(McarError::Domain(format!(
                "table for {pattern} has invalid entry {} at cell {i}",
                mass[i]
            )));
        }
        Ok(Self {
            pattern,
            mass,
            probability: false,
        })
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Marginal on `sub ⊆ pattern`, summing over the dropped coordinates.
    pub fn restrict(&self, space: &DiscreteSpace, sub: &Pattern) -> Result<MarginalTable> {
        if !sub.is_subset_of(&self.pattern) {
            return Err(McarError::Domain(format!(
                "cannot restrict {} to {sub}: not a subset",
                self.pattern
            )));
        }
        if sub == &self.pattern {
            return Ok(self.clone());
        }
        let map = cell_projection(space, &self.pattern, sub)?;
        let mut mass = vec![0.0; space.cells(sub)?];
        for (&target, &v) in map.iter().zip(&self.mass) {
            mass[target] += v;
        }
        Ok(MarginalTable {
            pattern: sub.clone(),
            mass,
            probability: self.probability,
        })
    }
}

/// Free-function form of [`MarginalTable::restrict`].
pub fn restrict(space: &DiscreteSpace, table: &MarginalTable, sub: &Pattern) -> Result<MarginalTable> {
    table.restrict(space, sub)
}

/// A sequence `P_S = (P_S : S in S)`, one table per pattern, in collection order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSequence {
    space: DiscreteSpace,
    collection: PatternCollection,
    tables: Vec<MarginalTable>,
}

impl MarginalSequence {
    pub fn new(
        space: DiscreteSpace,
        collection: PatternCollection,
        tables: Vec<MarginalTable>,
    ) -> Result<Self> {
        if tables.len() != collection.len() {
            return Err(McarError::Domain(format!(
                "{} tables for {} patterns",
                tables.len(),
                collection.len()
            )));
        }
        for (p, t) in collection.patterns().iter().zip(&tables) {
            space.check_pattern(p)?;
            if t.pattern() != p {
                return Err(McarError::Domain(format!(
                    "table pattern {} does not match collection entry {p}",
                    t.pattern()
                )));
            }
            if t.len() != space.cells(p)? {
                return Err(McarError::Domain(format!("table for {p} has the wrong size")));
            }
        }
        Ok(Self {
            space,
            collection,
            tables,
        })
    }

    /// Probability tables from raw mass vectors.
    pub fn from_masses(
        space: DiscreteSpace,
        collection: PatternCollection,
        masses: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let tables = collection
            .patterns()
            .iter()
            .cloned()
            .zip(masses)
            .map(|(p, m)| MarginalTable::probability(&space, p, m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, collection, tables)
    }

    /// Like [`Self::from_masses`] but renormalizes each table first; used where
    /// floating accumulation may leave a sum a few ulps off one.
    pub fn from_masses_normalized(
        space: DiscreteSpace,
        collection: PatternCollection,
        masses: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let masses = masses
            .into_iter()
            .map(|mut m| {
                for v in m.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                let total: f64 = m.iter().sum();
                if total > 0.0 {
                    m.iter_mut().for_each(|v| *v /= total);
                }
                m
            })
            .collect();
        Self::from_masses(space, collection, masses)
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn collection(&self) -> &PatternCollection {
        &self.collection
    }

    pub fn patterns(&self) -> &[Pattern] {
        self.collection.patterns()
    }

    pub fn tables(&self) -> &[MarginalTable] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn table(&self, pattern: &Pattern) -> Option<&MarginalTable> {
        self.collection.position(pattern).map(|i| &self.tables[i])
    }

    pub fn is_probability(&self) -> bool {
        self.tables.iter().all(MarginalTable::is_probability)
    }

    /// Start of each pattern's block in the stacked coordinates.
    pub fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.tables.len());
        let mut at = 0;
        for t in &self.tables {
            offsets.push(at);
            at += t.len();
        }
        offsets
    }

    /// `|X_S| = sum_S |X_S|`.
    pub fn stacked_dim(&self) -> usize {
        self.tables.iter().map(MarginalTable::len).sum()
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.tables.iter().flat_map(|t| t.mass().iter().copied()).collect()
    }

    /// Rebuilds a sequence with the same patterns from stacked coordinates.
    pub fn with_stacked(&self, stacked: &[f64], probability: bool) -> Result<Self> {
        if stacked.len() != self.stacked_dim() {
            return Err(McarError::Domain("stacked vector has the wrong length".into()));
        }
        let mut tables = Vec::with_capacity(self.tables.len());
        let mut at = 0;
        for t in &self.tables {
            let mass = stacked[at..at + t.len()].to_vec();
            at += t.len();
            let table = if probability {
                MarginalTable::probability(&self.space, t.pattern().clone(), mass)?
            } else {
                MarginalTable::measure(&self.space, t.pattern().clone(), mass)?
            };
            tables.push(table);
        }
        Self::new(self.space.clone(), self.collection.clone(), tables)
    }

    pub fn with_collection(&self, collection: PatternCollection) -> Result<Self> {
        Self::new(self.space.clone(), collection, self.tables.clone())
    }

    /// The sub-sequence on the given patterns (by position), same space.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let patterns = positions.iter().map(|&i| self.patterns()[i].clone()).collect();
        let sizes = positions.iter().map(|&i| self.collection.sample_sizes()[i]).collect();
        let tables = positions.iter().map(|&i| self.tables[i].clone()).collect();
        Self::new(self.space.clone(), PatternCollection::new(patterns, sizes)?, tables)
    }

    /// The sequence induced on a variable subset, relabeled to `0..vars.len()`.
    ///
    /// Each pattern is intersected with `vars`; empty intersections are
    /// dropped, as are intersections contained in another kept one (those
    /// constraints are implied for consistent sequences).
    pub fn induced(&self, vars: &[usize]) -> Result<Self> {
        let mut vars = vars.to_vec();
        vars.sort_unstable();
        vars.dedup();
        let cut: Vec<(usize, Pattern)> = self
            .patterns()
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.intersection(&Pattern(vars.clone())).map(|q| (i, q)))
            .collect();
        let mut kept: Vec<(usize, Pattern)> = Vec::new();
        for (k, (i, q)) in cut.iter().enumerate() {
            let dominated = cut.iter().enumerate().any(|(l, (_, other))| {
                l != k && q.is_subset_of(other) && (q != other || l < k)
            });
            if !dominated {
                kept.push((*i, q.clone()));
            }
        }
        let relabel = |p: &Pattern| -> Pattern {
            Pattern(
                p.members()
                    .iter()
                    .map(|j| vars.iter().position(|v| v == j).expect("member of vars"))
                    .collect(),
            )
        };
        let space = DiscreteSpace::new(vars.iter().map(|&j| self.space.size(j)).collect())?;
        let mut patterns = Vec::new();
        let mut sizes = Vec::new();
        let mut tables = Vec::new();
        for (i, q) in kept {
            let restricted = self.tables[i].restrict(&self.space, &q)?;
            let p = relabel(&q);
            tables.push(MarginalTable {
                pattern: p.clone(),
                mass: restricted.mass,
                probability: restricted.probability,
            });
            patterns.push(p);
            sizes.push(self.collection.sample_sizes()[i]);
        }
        Self::new(space, PatternCollection::new(patterns, sizes)?, tables)
    }

    /// Builds a sequence from `(table position, sub-pattern)` pairs, restricting
    /// each table and relabeling to the variables still in use. Returns the
    /// new sequence and, for each new variable, its index in `self`.
    pub fn reshape(&self, parts: &[(usize, Pattern)]) -> Result<(Self, Vec<usize>)> {
        let mut used: Vec<usize> = parts.iter().flat_map(|(_, p)| p.members().to_vec()).collect();
        used.sort_unstable();
        used.dedup();
        if used.is_empty() {
            return Err(McarError::Domain("reshape needs at least one pattern".into()));
        }
        let space = DiscreteSpace::new(used.iter().map(|&j| self.space.size(j)).collect())?;
        let mut patterns = Vec::new();
        let mut sizes = Vec::new();
        let mut tables = Vec::new();
        for (i, sub) in parts {
            let restricted = self.tables[*i].restrict(&self.space, sub)?;
            let p = Pattern(
                sub.members()
                    .iter()
                    .map(|j| used.iter().position(|u| u == j).expect("used"))
                    .collect(),
            );
            tables.push(MarginalTable {
                pattern: p.clone(),
                mass: restricted.mass,
                probability: restricted.probability,
            });
            patterns.push(p);
            sizes.push(self.collection.sample_sizes()[*i]);
        }
        let seq = Self::new(space, PatternCollection::new(patterns, sizes)?, tables)?;
        Ok((seq, used))
    }

    /// Renames variables: old variable `j` becomes `perm[j]`.
    pub fn permute_variables(&self, perm: &[usize]) -> Result<Self> {
        let d = self.space.dim();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&t| t >= d || std::mem::replace(&mut seen[t], true)) {
            return Err(McarError::Domain(format!("{perm:?} is not a permutation of {d} variables")));
        }
        let mut sizes = vec![0; d];
        for j in 0..d {
            sizes[perm[j]] = self.space.size(j);
        }
        let space = DiscreteSpace::new(sizes)?;
        let mut patterns = Vec::new();
        let mut tables = Vec::new();
        for t in &self.tables {
            let new_pattern = Pattern::new(t.pattern().members().iter().map(|&j| perm[j]).collect())?;
            let mut mass = vec![0.0; t.len()];
            for (cell, &v) in t.mass().iter().enumerate() {
                let old = decode_cell(&self.space, t.pattern(), cell)?;
                // reorder the digits into the new sorted member order
                let mut pairs: Vec<(usize, usize)> =
                    t.pattern().members().iter().map(|&j| perm[j]).zip(old).collect();
                pairs.sort_unstable();
                let digits: Vec<usize> = pairs.into_iter().map(|(_, x)| x).collect();
                mass[encode_cell(&space, &new_pattern, &digits)?] = v;
            }
            patterns.push(new_pattern.clone());
            tables.push(MarginalTable {
                pattern: new_pattern,
                mass,
                probability: t.probability,
            });
        }
        let collection = PatternCollection::new(patterns, self.collection.sample_sizes().to_vec())?;
        Self::new(space, collection, tables)
    }

    /// The sequence conditional on `x_J = values`, for `J` inside every pattern.
    ///
    /// Returns the weight `p^J(x_J)` read from the first pattern and the
    /// conditional sequence over the variables outside `J` (relabeled in
    /// order); patterns equal to `J` drop out, and `None` means none remain.
    /// Each table is divided by its own `J`-marginal; a table whose own
    /// weight is zero becomes uniform, which never matters once multiplied
    /// by the weight.
    pub fn condition_on(&self, j: &Pattern, values: &[usize]) -> Result<(f64, Option<Self>)> {
        let space = &self.space;
        let encoded = encode_cell(space, j, values)?;
        let rest_vars: Vec<usize> = (0..space.dim()).filter(|v| !j.contains(*v)).collect();
        let relabel = |p: &Pattern| -> Pattern {
            Pattern(
                p.members()
                    .iter()
                    .map(|v| rest_vars.iter().position(|r| r == v).expect("outside J"))
                    .collect(),
            )
        };
        let mut weight = None;
        let mut patterns = Vec::new();
        let mut sizes = Vec::new();
        let mut masses = Vec::new();
        for (k, t) in self.tables.iter().enumerate() {
            let s = t.pattern();
            if !j.is_subset_of(s) {
                return Err(McarError::Domain(format!("{j} is not contained in pattern {s}")));
            }
            let to_j = cell_projection(space, s, j)?;
            let own: f64 = t.mass.iter().zip(&to_j).filter(|(_, &c)| c == encoded).map(|(m, _)| m).sum();
            weight.get_or_insert(own);
            let Some(rest) = s.without(j.members()) else { continue };
            let to_rest = cell_projection(space, s, &rest)?;
            let cells = space.cells(&rest)?;
            let mut mass = vec![0.0; cells];
            for ((&m, &cj), &cr) in t.mass.iter().zip(&to_j).zip(&to_rest) {
                if cj == encoded {
                    mass[cr] += m;
                }
            }
            if own > 0.0 {
                mass.iter_mut().for_each(|v| *v /= own);
            } else {
                mass.iter_mut().for_each(|v| *v = 1.0 / cells as f64);
            }
            patterns.push(relabel(&rest));
            sizes.push(self.collection.sample_sizes()[k]);
            masses.push(mass);
        }
        let weight = weight.unwrap_or(0.0);
        if patterns.is_empty() {
            return Ok((weight, None));
        }
        let sub_space = DiscreteSpace::new(rest_vars.iter().map(|&v| space.size(v)).collect())?;
        let collection = PatternCollection::new(patterns, sizes)?;
        let seq = Self::from_masses_normalized(sub_space, collection, masses)?;
        Ok((weight, Some(seq)))
    }

    /// Convex combination `(1 - t) self + t other` (same space and patterns).
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if self.patterns() != other.patterns() || self.space != other.space {
            return Err(McarError::Domain("cannot mix sequences over different patterns".into()));
        }
        let stacked: Vec<f64> = self
            .stacked()
            .iter()
            .zip(other.stacked())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        let mixed = self.with_stacked(&stacked, false)?;
        let masses = mixed.tables.into_iter().map(|t| t.mass).collect();
        Self::from_masses_normalized(self.space.clone(), self.collection.clone(), masses)
    }
}

/// A dual certificate `f_S`, one vector per pattern over `X_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWitness {
    pub values: Vec<Vec<f64>>,
}

impl DualWitness {
    /// `R(P_S, f_S) = -(1/|S|) sum_S <f_S, p_S>`.
    pub fn evaluate(&self, seq: &MarginalSequence) -> f64 {
        let s = seq.len() as f64;
        let inner: f64 = self
            .values
            .iter()
            .zip(seq.tables())
            .map(|(f, t)| f.iter().zip(t.mass()).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        -inner / s
    }

    /// Smallest and largest entries.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
