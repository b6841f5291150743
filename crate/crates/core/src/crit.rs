//! Finite-sample critical values and the facet-count catalog.
//!
//! All logarithms are natural.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::closedform::{detect_family, permute_shape, FamilyTag};
use crate::error::{McarError, Result};
use crate::model::{DiscreteSpace, PatternCollection};
use crate::reduce::is_pentagon;

/// Where a [`FacetInfo`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetSource {
    Catalog,
    User,
    Geometry,
}

impl fmt::Display for FacetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FacetSource::Catalog => "catalog",
            FacetSource::User => "user",
            FacetSource::Geometry => "geometry",
        })
    }
}

/// The constants `(F', D_R)` of the improved test: the index is within a
/// factor `D_R` of a maximum of `F'` linear functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetInfo {
    pub f_prime: u64,
    pub d_r: f64,
    pub source: FacetSource,
    /// Catalog entry name, when `source` is the catalog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

impl FacetInfo {
    pub fn new(f_prime: u64, d_r: f64, source: FacetSource) -> Result<Self> {
        if !(d_r >= 1.0 && d_r.is_finite()) {
            return Err(McarError::Domain(format!("D_R must be a finite number >= 1, got {d_r}")));
        }
        Ok(Self {
            f_prime,
            d_r,
            source,
            family: None,
        })
    }

    fn catalog(f_prime: u64, d_r: f64, family: &str) -> Self {
        Self {
            f_prime,
            d_r,
            source: FacetSource::Catalog,
            family: Some(family.to_string()),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(McarError::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn sizes(collection: &PatternCollection) -> Result<Vec<f64>> {
    collection.ensure_positive_sizes()?;
    Ok(collection.sample_sizes().iter().map(|&n| n as f64).collect())
}

/// The universal critical value
/// `C_a = 1/2 sum_S sqrt((|X_S| - 1) / n_S) + sqrt(1/2 log(1/a) sum_S 1/n_S)`.
pub fn c_alpha(space: &DiscreteSpace, collection: &PatternCollection, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = sizes(collection)?;
    let mut first = 0.0;
    let mut inv = 0.0;
    for (p, &ns) in collection.patterns().iter().zip(&n) {
        let cells = space.cells(p)? as f64;
        first += ((cells - 1.0) / ns).sqrt();
        inv += 1.0 / ns;
    }
    Ok(0.5 * first + (0.5 * (1.0 / alpha).ln() * inv).sqrt())
}

/// The facet-based critical value
/// `C'_a = |S| sqrt(max{ 2 D_R^2 log(2 F' |S| / a v 1) / min n_S,
///        2^(2|S|+7) max_{S1 != S2 overlapping} (|X_{S1 n S2}| log 2 + log(2|S|(|S|-1)/a)) / (n_S1 ^ n_S2) })`.
pub fn c_alpha_prime(
    space: &DiscreteSpace,
    collection: &PatternCollection,
    alpha: f64,
    facet: &FacetInfo,
) -> Result<f64> {
    check_alpha(alpha)?;
    let n = sizes(collection)?;
    let k = collection.len() as f64;
    let n_min = n.iter().copied().fold(f64::INFINITY, f64::min);
    let facet_term = if facet.f_prime == 0 {
        0.0
    } else {
        let arg = (2.0 * facet.f_prime as f64 * k / alpha).max(1.0);
        2.0 * facet.d_r * facet.d_r * arg.ln() / n_min
    };
    let mut overlap_term: f64 = 0.0;
    let pairs = collection.overlapping_pairs();
    if !pairs.is_empty() {
        let scale = 2f64.powi(2 * collection.len() as i32 + 7);
        let log_pairs = (2.0 * k * (k - 1.0) / alpha).ln();
        for (i, l, shared) in pairs {
            let cells = space.cells(&shared)? as f64;
            let v = (cells * 2f64.ln() + log_pairs) / n[i].min(n[l]);
            overlap_term = overlap_term.max(scale * v);
        }
    }
    Ok(k * facet_term.max(overlap_term).sqrt())
}

/// Which critical value is smaller in [`CriticalValues`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveCritical {
    Universal,
    Improved,
}

/// `C_a`, `C'_a` and their minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub universal: f64,
    pub improved: f64,
    pub min: f64,
    pub active: ActiveCritical,
}

/// `C_a^min = min(C_a, C'_a)` with the active branch.
pub fn critical_values(
    space: &DiscreteSpace,
    collection: &PatternCollection,
    alpha: f64,
    facet: &FacetInfo,
) -> Result<CriticalValues> {
    let universal = c_alpha(space, collection, alpha)?;
    let improved = c_alpha_prime(space, collection, alpha, facet)?;
    let (min, active) = if improved < universal {
        (improved, ActiveCritical::Improved)
    } else {
        (universal, ActiveCritical::Universal)
    };
    Ok(CriticalValues {
        universal,
        improved,
        min,
        active,
    })
}

pub fn c_alpha_min(
    space: &DiscreteSpace,
    collection: &PatternCollection,
    alpha: f64,
    facet: &FacetInfo,
) -> Result<f64> {
    Ok(critical_values(space, collection, alpha, facet)?.min)
}

/// Number of bins `ceil(1/h)` for bandwidth `h` in `(0, 1]`.
pub fn bins_for_bandwidth(h: f64) -> Result<usize> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(McarError::Domain(format!("bandwidth must lie in (0, 1], got {h}")));
    }
    // absorb rounding in 1/h so that h = 1/k gives exactly k bins
    Ok(((1.0 / h) - 1e-9).ceil().max(1.0) as usize)
}

/// Alphabet sizes after binning: `ceil(1/h_j)` for continuous coordinates
/// (`Some(h_j)`), the given size for discrete ones.
pub fn binned_sizes(bandwidths: &[Option<f64>], discrete_sizes: &[usize]) -> Result<Vec<usize>> {
    if bandwidths.len() != discrete_sizes.len() {
        return Err(McarError::Domain("bandwidths and sizes differ in length".into()));
    }
    bandwidths
        .iter()
        .zip(discrete_sizes)
        .map(|(h, &m)| match h {
            Some(h) => bins_for_bandwidth(*h),
            None => Ok(m),
        })
        .collect()
}

/// `C*_a`: the minimum critical value evaluated on the binned alphabets, or
/// `C_a` on them when no facet information is given.
pub fn c_alpha_star(
    binned: &DiscreteSpace,
    collection: &PatternCollection,
    alpha: f64,
    facet: Option<&FacetInfo>,
) -> Result<f64> {
    match facet {
        Some(f) => c_alpha_min(binned, collection, alpha, f),
        None => c_alpha(binned, collection, alpha),
    }
}

fn two_pow_minus_two(m: usize) -> Option<u64> {
    if m >= 64 {
        return None;
    }
    Some((1u64 << m) - 2)
}

/// Every catalog entry that applies to the shape, up to a relabeling of the
/// variables.
pub fn facet_catalog_entries(space: &DiscreteSpace, collection: &PatternCollection) -> Vec<FacetInfo> {
    let mut out = Vec::new();
    if let Some(entry) = pentagon_entry(space, collection) {
        out.push(entry);
    }
    if let Some(det) = detect_family(space, collection) {
        let (shape, _) = match permute_shape(space, collection, &det.permutation) {
            Ok(s) => s,
            Err(_) => return out,
        };
        let m = shape.alphabet_sizes();
        let entry = match det.tag {
            FamilyTag::Rs2Triple | FamilyTag::R22Triple => two_pow_minus_two(m[0])
                .zip(two_pow_minus_two(m[1]))
                .and_then(|(a, b)| a.checked_mul(b))
                .map(|f| FacetInfo::catalog(f, 1.0, "rs2_triple")),
            FamilyTag::Chain4 if m[0] == 2 => Some(FacetInfo::catalog(8, 1.0, "chain4")),
            FamilyTag::Chain4 => None,
            FamilyTag::D4AllButOne => Some(FacetInfo::catalog(16, 1.0, "d4_all_but_one")),
            FamilyTag::D4AllPairs => Some(FacetInfo::catalog(56, 1.0, "d4_all_pairs")),
            // 92 terms in the closed form, but p~_x + p~_x' with x' the
            // complement of x is listed twice; 84 distinct facets remain
            FamilyTag::D4SingleTriple => Some(FacetInfo::catalog(84, 1.0, "d4_single_triple")),
            FamilyTag::D4AllTriples => Some(FacetInfo::catalog(128, 1.0, "d4_all_triples")),
        };
        out.extend(entry);
    }
    out
}

/// The pentagon `{1,2},{2,3},{1,3},{3,4},{1,4}` on `[2] x [r] x [s] x [t]`
/// (any relabeling keeping that shape): `D_R = 2` and
/// `F' = (2^s - 2) {(2^r - 2) + (2^t - 2)}`.
fn pentagon_entry(space: &DiscreteSpace, collection: &PatternCollection) -> Option<FacetInfo> {
    if space.dim() != 4 || collection.len() != 5 {
        return None;
    }
    for perm in crate::closedform::permutations(4) {
        let Ok((shape, relabeled)) = permute_shape(space, collection, &perm) else { continue };
        let m = shape.alphabet_sizes();
        if !is_pentagon(&relabeled) || m[0] != 2 {
            continue;
        }
        let (r, s, t) = (two_pow_minus_two(m[1])?, two_pow_minus_two(m[2])?, two_pow_minus_two(m[3])?);
        let f = s.checked_mul(r.checked_add(t)?)?;
        return Some(FacetInfo::catalog(f, 2.0, "pentagon"));
    }
    None
}

/// The cataloged `(F', D_R)` for the shape, if any. The pentagon entry takes
/// precedence; [`facet_catalog_entries`] lists all applicable entries.
pub fn facet_catalog(space: &DiscreteSpace, collection: &PatternCollection) -> Option<FacetInfo> {
    facet_catalog_entries(space, collection).into_iter().next()
}
