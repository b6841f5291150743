//! The incompatibility index by linear programming.
//!
//! `R(P_S) = 1 - max { 1'p : p >= 0, A p <= p_S }`. The optimal `p*` gives the
//! closest compatible sequence, the slack gives the residual, and the LP duals
//! give a witness `f_S` attaining the supremum over admissible functions.

pub mod operator;
pub mod simplex;

pub use operator::{marginal_operator, MarginalOperator};

use crate::error::{McarError, Result};
use crate::model::{DualWitness, MarginalSequence};

/// Threshold below which `1 - R` (resp. `R`) is treated as zero when forming
/// the decomposition.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

/// `R(P_S)` with the closest compatible sequence, residual and dual witness.
#[derive(Debug, Clone)]
pub struct WitnessDecomposition {
    /// Clamped to `[0, 1]`.
    pub index: f64,
    /// `1 - 1'p*` before clamping.
    pub raw_index: f64,
    /// Optimal joint mass `p*` over `X`, with `1'p* = 1 - R`.
    pub joint_mass: Vec<f64>,
    /// `Q_S = A p* / (1 - R)`, absent when `R` is numerically one.
    pub closest_compatible: Option<MarginalSequence>,
    /// `T_S = (p_S - A p*) / R`, absent when `R` is numerically zero.
    pub residual: Option<MarginalSequence>,
    pub dual: DualWitness,
    pub iterations: usize,
}

impl MarginalOperator {
    fn check_sequence(&self, seq: &MarginalSequence) -> Result<()> {
        if seq.space() != self.space() || seq.patterns() != self.collection().patterns() {
            return Err(McarError::Domain(
                "sequence does not match the operator's space and patterns".into(),
            ));
        }
        if !seq.is_probability() {
            return Err(McarError::Domain(
                "the index is defined for probability tables".into(),
            ));
        }
        Ok(())
    }

    fn solve(&self, seq: &MarginalSequence) -> Result<simplex::LpSolution> {
        self.check_sequence(seq)?;
        let b = seq.stacked();
        let c = vec![1.0; self.cols()];
        simplex::solve_packing(self.columns(), &b, &c)
    }

    /// Just the index value; skips building the decomposition.
    pub fn index(&self, seq: &MarginalSequence) -> Result<f64> {
        let sol = self.solve(seq)?;
        Ok((1.0 - sol.objective).clamp(0.0, 1.0))
    }

    pub fn decompose(&self, seq: &MarginalSequence) -> Result<WitnessDecomposition> {
        let sol = self.solve(seq)?;
        let raw_index = 1.0 - sol.objective;
        let index = raw_index.clamp(0.0, 1.0);
        let b = seq.stacked();
        let fitted = self.apply(&sol.x)?;

        let closest_compatible = if 1.0 - index > DECOMPOSITION_TOL {
            let scale = 1.0 - index;
            let masses = split_blocks(seq, fitted.iter().map(|v| v / scale).collect());
            Some(MarginalSequence::from_masses_normalized(
                seq.space().clone(),
                seq.collection().clone(),
                masses,
            )?)
        } else {
            None
        };
        let residual = if index > DECOMPOSITION_TOL {
            let stacked = b
                .iter()
                .zip(&fitted)
                .map(|(p, q)| ((p - q) / index).max(0.0))
                .collect();
            Some(MarginalSequence::from_masses_normalized(
                seq.space().clone(),
                seq.collection().clone(),
                split_blocks(seq, stacked),
            )?)
        } else {
            None
        };

        let s = seq.len() as f64;
        let witness: Vec<f64> = sol.duals.iter().map(|&z| s * z.min(1.0) - 1.0).collect();
        let dual = DualWitness {
            values: split_blocks(seq, witness),
        };

        Ok(WitnessDecomposition {
            index,
            raw_index,
            joint_mass: sol.x,
            closest_compatible,
            residual,
            dual,
            iterations: sol.iterations,
        })
    }
}

fn split_blocks(seq: &MarginalSequence, stacked: Vec<f64>) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(seq.len());
    let mut at = 0;
    for t in seq.tables() {
        out.push(stacked[at..at + t.len()].to_vec());
        at += t.len();
    }
    out
}

/// Full LP decomposition, building the operator on the fly.
pub fn incompatibility_index(seq: &MarginalSequence) -> Result<WitnessDecomposition> {
    MarginalOperator::new(seq.space(), seq.collection())?.decompose(seq)
}

/// `R(P_S)` alone.
pub fn index_value(seq: &MarginalSequence) -> Result<f64> {
    MarginalOperator::new(seq.space(), seq.collection())?.index(seq)
}

/// Largest total-variation disagreement between overlapping marginals.
pub fn inconsistency(seq: &MarginalSequence) -> f64 {
    let space = seq.space();
    let mut worst: f64 = 0.0;
    for (i, k, shared) in seq.collection().overlapping_pairs() {
        let a = seq.tables()[i].restrict(space, &shared);
        let b = seq.tables()[k].restrict(space, &shared);
        if let (Ok(a), Ok(b)) = (a, b) {
            let l1: f64 = a.mass().iter().zip(b.mass()).map(|(x, y)| (x - y).abs()).sum();
            worst = worst.max(0.5 * l1);
        }
    }
    worst.min(1.0)
}

/// True iff no joint cell has positive mass under every pattern, which is
/// exactly the case `R = 1`.
pub fn strongly_contextual(seq: &MarginalSequence) -> Result<bool> {
    let op = MarginalOperator::new(seq.space(), seq.collection())?;
    let b = seq.stacked();
    Ok((0..op.cols()).all(|x| op.column(x).iter().any(|&r| b[r] <= 0.0)))
}
