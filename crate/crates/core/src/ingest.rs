//! Reading incomplete tabular data: schema, CSV parsing, binning of
//! continuous coordinates, and empirical marginal tables per observation
//! pattern.
//!
//! Categorical levels are written `1..=m` in files and stored 0-based.
//! Missing entries are the empty field or the token `NA`.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::crit::bins_for_bandwidth;
use crate::error::{McarError, Result};
use crate::model::{encode_cell, DiscreteSpace, MarginalSequence, Pattern, PatternCollection};

/// Kind of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    /// Levels `1..=m`.
    Categorical(usize),
    /// Values in `[0, 1)`.
    Continuous,
}

impl ColumnKind {
    fn parse(token: &str) -> Result<Self> {
        let t = token.trim();
        if t == "cont" {
            return Ok(ColumnKind::Continuous);
        }
        if let Some(m) = t.strip_prefix("cat:") {
            let m: usize = m
                .trim()
                .parse()
                .map_err(|_| McarError::Dataset(format!("bad level count in schema entry `{t}`")))?;
            if m == 0 {
                return Err(McarError::Dataset(format!("schema entry `{t}` has no levels")));
            }
            return Ok(ColumnKind::Categorical(m));
        }
        Err(McarError::Dataset(format!("unknown schema entry `{t}` (expected cat:<m> or cont)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
}

impl Schema {
    /// Parses a schema descriptor: entries separated by newlines or commas,
    /// each `kind` or `name=kind` with kind `cat:<m>` or `cont`. Lines
    /// starting with `#` are comments. Unnamed entries are matched to the
    /// CSV header by position.
    pub fn parse(text: &str) -> Result<Vec<(Option<String>, ColumnKind)>> {
        let mut out = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for entry in line.split(',').map(str::trim).filter(|e| !e.is_empty()) {
                match entry.split_once('=') {
                    Some((name, kind)) => out.push((Some(name.trim().to_string()), ColumnKind::parse(kind)?)),
                    None => out.push((None, ColumnKind::parse(entry)?)),
                }
            }
        }
        if out.is_empty() {
            return Err(McarError::Dataset("schema is empty".into()));
        }
        Ok(out)
    }

    /// Resolves descriptor entries against the CSV header.
    pub fn resolve(header: &[String], entries: &[(Option<String>, ColumnKind)]) -> Result<Self> {
        if header.len() != entries.len() {
            return Err(McarError::Dataset(format!(
                "schema lists {} columns but the data has {}",
                entries.len(),
                header.len()
            )));
        }
        let named = entries.iter().any(|(n, _)| n.is_some());
        let columns = if named {
            header
                .iter()
                .map(|h| {
                    entries
                        .iter()
                        .find(|(n, _)| n.as_deref() == Some(h.as_str()))
                        .map(|(_, kind)| Column {
                            name: h.clone(),
                            kind: *kind,
                        })
                        .ok_or_else(|| McarError::Dataset(format!("column `{h}` is missing from the schema")))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            header
                .iter()
                .zip(entries)
                .map(|(h, (_, kind))| Column {
                    name: h.clone(),
                    kind: *kind,
                })
                .collect()
        };
        Ok(Self { columns })
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn is_categorical(&self) -> bool {
        self.columns.iter().all(|c| matches!(c.kind, ColumnKind::Categorical(_)))
    }
}

/// One observed entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Entry {
    /// 0-based level.
    Level(usize),
    Real(f64),
}

/// Rows of partially observed records; `None` marks a missing entry.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteDataset {
    pub schema: Schema,
    pub rows: Vec<Vec<Option<Entry>>>,
    /// Number of entirely missing rows removed while parsing.
    pub dropped_rows: usize,
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "NA"
}

/// Parses CSV text with a header row against a schema descriptor.
pub fn parse_dataset<R: Read>(input: R, schema: &str) -> Result<IncompleteDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let schema = Schema::resolve(&header, &Schema::parse(schema)?)?;
    let mut rows = Vec::new();
    let mut dropped_rows = 0;
    for (k, record) in reader.records().enumerate() {
        let row_no = k + 1;
        let record = record?;
        let mut row = Vec::with_capacity(schema.columns.len());
        for (field, col) in record.iter().zip(&schema.columns) {
            if is_missing(field) {
                row.push(None);
                continue;
            }
            let bad = |message: String| McarError::Ingest {
                row: row_no,
                column: col.name.clone(),
                message,
            };
            let entry = match col.kind {
                ColumnKind::Categorical(m) => {
                    let level: usize = field.parse().map_err(|_| bad(format!("`{field}` is not a level")))?;
                    if level == 0 || level > m {
                        return Err(bad(format!("level {level} outside 1..={m}")));
                    }
                    Entry::Level(level - 1)
                }
                ColumnKind::Continuous => {
                    let x: f64 = field.parse().map_err(|_| bad(format!("`{field}` is not a number")))?;
                    if !(0.0..1.0).contains(&x) {
                        return Err(bad(format!("{x} outside [0, 1)")));
                    }
                    Entry::Real(x)
                }
            };
            row.push(Some(entry));
        }
        if row.iter().all(Option::is_none) {
            dropped_rows += 1;
        } else {
            rows.push(row);
        }
    }
    Ok(IncompleteDataset {
        schema,
        rows,
        dropped_rows,
    })
}

/// Bandwidths and smoothness constants for the continuous coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    /// One `h_j` per continuous column, in column order.
    pub bandwidths: Vec<f64>,
    /// Hölder exponents `r_j`, one per continuous column.
    pub holder_exponents: Vec<f64>,
    /// Hölder constant `L`.
    pub holder_constant: f64,
}

impl BinningSpec {
    pub fn new(bandwidths: Vec<f64>, holder_exponents: Vec<f64>, holder_constant: f64) -> Result<Self> {
        if bandwidths.len() != holder_exponents.len() {
            return Err(McarError::Domain("one Hölder exponent per bandwidth is required".into()));
        }
        for &h in &bandwidths {
            bins_for_bandwidth(h)?;
        }
        if holder_exponents.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(McarError::Domain("Hölder exponents must lie in (0, 1]".into()));
        }
        if !(holder_constant > 0.0) {
            return Err(McarError::Domain("the Hölder constant must be positive".into()));
        }
        Ok(Self {
            bandwidths,
            holder_exponents,
            holder_constant,
        })
    }

    /// `h_j = n^(-1/(1 + 2 r_j))` for each continuous column, `L = 1`.
    pub fn default_for(n: u64, holder_exponents: Vec<f64>) -> Result<Self> {
        let n = n.max(1) as f64;
        let bandwidths = holder_exponents.iter().map(|&r| n.powf(-1.0 / (1.0 + 2.0 * r))).collect();
        Self::new(bandwidths, holder_exponents, 1.0)
    }

    /// The approximation term `L (|S| - 1) sum_j h_j^{r_j}`.
    pub fn bias_term(&self, patterns: usize) -> f64 {
        let sum: f64 = self
            .bandwidths
            .iter()
            .zip(&self.holder_exponents)
            .map(|(h, r)| h.powf(*r))
            .sum();
        self.holder_constant * patterns.saturating_sub(1) as f64 * sum
    }
}

/// 0-based bin of `x` in `[0, 1)` for bandwidth `h`: `floor(x / h)`, capped at
/// the last bin.
pub fn bin_index(x: f64, h: f64) -> Result<usize> {
    let bins = bins_for_bandwidth(h)?;
    Ok(((x / h).floor() as usize).min(bins - 1))
}

/// Replaces each continuous column by its bin index.
pub fn bin_continuous(data: &IncompleteDataset, spec: &BinningSpec) -> Result<IncompleteDataset> {
    let continuous: Vec<usize> = data
        .schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Continuous)
        .map(|(j, _)| j)
        .collect();
    if continuous.len() != spec.bandwidths.len() {
        return Err(McarError::Domain(format!(
            "{} continuous columns but {} bandwidths",
            continuous.len(),
            spec.bandwidths.len()
        )));
    }
    let mut schema = data.schema.clone();
    let mut h_of = vec![None; schema.columns.len()];
    for (&j, &h) in continuous.iter().zip(&spec.bandwidths) {
        schema.columns[j].kind = ColumnKind::Categorical(bins_for_bandwidth(h)?);
        h_of[j] = Some(h);
    }
    let rows = data
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(&h_of)
                .map(|(e, h)| match (e, h) {
                    (Some(Entry::Real(x)), Some(h)) => Ok(Some(Entry::Level(bin_index(*x, *h)?))),
                    (other, _) => Ok(*other),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IncompleteDataset {
        schema,
        rows,
        dropped_rows: data.dropped_rows,
    })
}

/// Per-pattern counts of an all-categorical dataset, patterns in
/// lexicographic order of their (0-based) members.
pub fn pattern_counts(data: &IncompleteDataset) -> Result<(DiscreteSpace, BTreeMap<Vec<usize>, Vec<u64>>)> {
    let sizes: Vec<usize> = data
        .schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Categorical(m) => Ok(m),
            ColumnKind::Continuous => Err(McarError::Dataset(format!(
                "column `{}` is continuous; bin it first",
                c.name
            ))),
        })
        .collect::<Result<_>>()?;
    let space = DiscreteSpace::new(sizes)?;
    let mut counts: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    for (k, row) in data.rows.iter().enumerate() {
        let mut members = Vec::new();
        let mut values = Vec::new();
        for (j, e) in row.iter().enumerate() {
            match e {
                Some(Entry::Level(x)) => {
                    members.push(j);
                    values.push(*x);
                }
                Some(Entry::Real(_)) => {
                    return Err(McarError::Ingest {
                        row: k + 1,
                        column: data.schema.columns[j].name.clone(),
                        message: "continuous value in a categorical table".into(),
                    })
                }
                None => {}
            }
        }
        if members.is_empty() {
            continue;
        }
        let pattern = Pattern::new(members.clone())?;
        let cell = encode_cell(&space, &pattern, &values)?;
        let table = match counts.get_mut(&members) {
            Some(t) => t,
            None => counts.entry(members).or_insert(vec![0; space.cells(&pattern)?]),
        };
        table[cell] += 1;
    }
    if counts.is_empty() {
        return Err(McarError::Dataset("the dataset has no observed rows".into()));
    }
    Ok((space, counts))
}

/// The empirical sequence `P^_S = counts / n_S` for every observed pattern,
/// with `n_S` recorded as sample sizes.
pub fn empirical_marginals(data: &IncompleteDataset) -> Result<MarginalSequence> {
    let (space, counts) = pattern_counts(data)?;
    sequence_from_counts(space, counts.into_iter().collect())
}

/// Empirical sequence from `(pattern members, cell counts)` pairs.
pub fn sequence_from_counts(space: DiscreteSpace, counts: Vec<(Vec<usize>, Vec<u64>)>) -> Result<MarginalSequence> {
    let mut patterns = Vec::new();
    let mut sizes = Vec::new();
    let mut masses = Vec::new();
    for (members, table) in counts {
        let n: u64 = table.iter().sum();
        if n == 0 {
            continue;
        }
        patterns.push(Pattern::new(members)?);
        sizes.push(n);
        masses.push(table.iter().map(|&c| c as f64 / n as f64).collect());
    }
    let collection = PatternCollection::new(patterns, sizes)?;
    MarginalSequence::from_masses_normalized(space, collection, masses)
}

/// JSON interchange form of a marginal sequence. Patterns are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDocument {
    pub alphabet_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub patterns: Vec<Vec<usize>>,
    #[serde(default)]
    pub sample_sizes: Vec<u64>,
    pub tables: Vec<Vec<f64>>,
}

impl SequenceDocument {
    pub fn from_sequence(seq: &MarginalSequence, names: Option<Vec<String>>) -> Self {
        Self {
            alphabet_sizes: seq.space().alphabet_sizes().to_vec(),
            names,
            patterns: seq.patterns().iter().map(|p| p.one_based()).collect(),
            sample_sizes: seq.collection().sample_sizes().to_vec(),
            tables: seq.tables().iter().map(|t| t.mass().to_vec()).collect(),
        }
    }

    /// Rebuilds the sequence; missing sample sizes default to zero, and
    /// tables must already sum to one.
    pub fn to_sequence(&self) -> Result<MarginalSequence> {
        let space = DiscreteSpace::new(self.alphabet_sizes.clone())?;
        let patterns = self
            .patterns
            .iter()
            .map(|p| Pattern::from_one_based(p))
            .collect::<Result<Vec<_>>>()?;
        let sizes = if self.sample_sizes.is_empty() {
            vec![0; patterns.len()]
        } else {
            self.sample_sizes.clone()
        };
        let collection = PatternCollection::new(patterns, sizes)?;
        MarginalSequence::from_masses(space, collection, self.tables.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_forms() {
        let plain = Schema::parse("cat:2\ncont, cat:3").unwrap();
        assert_eq!(plain.len(), 3);
        assert_eq!(plain[1].1, ColumnKind::Continuous);
        let named = Schema::parse("# comment\nb=cont\na=cat:2\n").unwrap();
        let s = Schema::resolve(&["a".into(), "b".into()], &named).unwrap();
        assert_eq!(s.columns[0].kind, ColumnKind::Categorical(2));
        assert!(Schema::parse("cat:0").is_err());
        assert!(Schema::parse("float").is_err());
    }

    #[test]
    fn bins() {
        assert_eq!(bin_index(0.65, 0.3).unwrap(), 2);
        assert_eq!(bin_index(0.95, 0.3).unwrap(), 3);
        assert_eq!(bin_index(0.0, 0.25).unwrap(), 0);
        assert_eq!(bin_index(0.999_999, 0.25).unwrap(), 3);
    }
}
