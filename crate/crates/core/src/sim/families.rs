//! The two structured families used in the power experiments.

use crate::error::{McarError, Result};
use crate::model::{DiscreteSpace, MarginalSequence, PatternCollection};

/// Three pairwise patterns on `[r] x [2] x [2]` with prescribed margins;
/// its index is `2 (p_.21 - 1/4)_+` for `p_.21` in `[1/4, 1/2]`.
///
/// Tables are `P_12`, `P_23`, `P_13` in that order. Row `i` (1-based) has
/// `p_i1. = (1 + (-1)^i) / (2r)`, `p_i.1 = 1 / (2r)`, and the `(X_2, X_3)`
/// table is fixed by `p_.21` and the halves `p_.1. = p_..1 = 1/2`.
pub fn build_sim_family_rs2(r: usize, p_dot21: f64) -> Result<MarginalSequence> {
    if r == 0 || r % 2 != 0 {
        return Err(McarError::Domain(format!(
            "the rs2 family needs an even number of levels for X1, got {r}"
        )));
    }
    if !(0.0..=0.5).contains(&p_dot21) {
        return Err(McarError::Domain(format!("p_.21 = {p_dot21} must lie in [0, 1/2]")));
    }
    let space = DiscreteSpace::new(vec![r, 2, 2])?;
    let collection = PatternCollection::from_labels(&[&[1, 2], &[2, 3], &[1, 3]])?;
    let rf = r as f64;

    let mut p12 = Vec::with_capacity(2 * r);
    let mut p13 = Vec::with_capacity(2 * r);
    for i in 1..=r {
        let first = if i % 2 == 0 { 1.0 / rf } else { 0.0 };
        p12.extend([first, 1.0 / rf - first]);
        p13.extend([0.5 / rf, 0.5 / rf]);
    }
    let q = p_dot21;
    // cells (j, k): (1,1), (1,2), (2,1), (2,2)
    let p23 = vec![0.5 - q, q, q, 0.5 - q];
    MarginalSequence::from_masses(space, collection, vec![p12, p23, p13])
}

/// `R` of [`build_sim_family_rs2`].
pub fn sim_family_rs2_index(p_dot21: f64) -> f64 {
    2.0 * (p_dot21 - 0.25).max(0.0)
}

/// Five binary variables, all four-variable patterns, with parity-tilted
/// tables `(1 +- eps (-1)^{sum})/16`; the table omitting `X1` carries the
/// opposite sign. Its index is `(5 eps - 1)_+ / 4`.
pub fn build_sim_family_d5(eps: f64) -> Result<MarginalSequence> {
    if !(-1.0..=1.0).contains(&eps) {
        return Err(McarError::Domain(format!("eps = {eps} must lie in [-1, 1]")));
    }
    let space = DiscreteSpace::new(vec![2; 5])?;
    let collection = PatternCollection::from_labels(&[
        &[1, 2, 3, 4],
        &[1, 2, 3, 5],
        &[1, 2, 4, 5],
        &[1, 3, 4, 5],
        &[2, 3, 4, 5],
    ])?;
    let masses = (0..5)
        .map(|k| {
            let sign = if k == 4 { -1.0 } else { 1.0 };
            (0..16usize)
                .map(|cell| {
                    // the parity of 1-based digits equals that of 0-based ones
                    let parity = if cell.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    (1.0 + sign * eps * parity) / 16.0
                })
                .collect()
        })
        .collect();
    MarginalSequence::from_masses(space, collection, masses)
}

/// `R` of [`build_sim_family_d5`].
pub fn sim_family_d5_index(eps: f64) -> f64 {
    (5.0 * eps - 1.0).max(0.0) / 4.0
}
