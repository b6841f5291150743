//! Multinomial sampling of empirical marginal sequences.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{McarError, Result};
use crate::model::MarginalSequence;

/// Entries above this negative value are round-off and count as zero.
const NEGATIVE_TOL: f64 = -1e-12;

/// Counts of `n` draws from `probs`, by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Result<Vec<u64>> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < NEGATIVE_TOL) {
        return Err(McarError::Domain(format!("invalid cell probability {p}")));
    }
    let probs: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let mut counts = vec![0; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    if !(mass > 0.0) {
        return Err(McarError::Domain("cannot sample from a zero table".into()));
    }
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(left, q)
            .map_err(|e| McarError::Domain(format!("binomial({left}, {q}): {e}")))?
            .sample(rng);
        counts[k] = c;
        left -= c;
        mass -= p;
    }
    Ok(counts)
}

/// Empirical sequence from `n_S` draws of each table of `seq`; the sample
/// sizes are taken from `sizes` (one per pattern).
pub fn sample_empirical<R: Rng + ?Sized>(rng: &mut R, seq: &MarginalSequence, sizes: &[u64]) -> Result<MarginalSequence> {
    if sizes.len() != seq.collection().len() || sizes.contains(&0) {
        return Err(McarError::Domain("need a positive sample size for every pattern".into()));
    }
    let mut masses = Vec::with_capacity(sizes.len());
    for (t, &n) in seq.tables().iter().zip(sizes) {
        let counts = multinomial(rng, n, t.mass())?;
        masses.push(counts.iter().map(|&c| c as f64 / n as f64).collect());
    }
    let collection = seq.collection().with_sample_sizes(sizes.to_vec())?;
    MarginalSequence::from_masses_normalized(seq.space().clone(), collection, masses)
}
