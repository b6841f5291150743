//! The marginal operator `A`, sending a joint mass vector on `X` to the
//! stacked sequence of its pattern marginals.

use crate::error::{McarError, Result};
use crate::lp::simplex::BinaryColumns;
use crate::model::{cell_projection, DiscreteSpace, PatternCollection};

/// `A_{(S, y_S), x} = 1` iff `x_S = y_S`; one column per joint cell.
#[derive(Debug, Clone)]
pub struct MarginalOperator {
    space: DiscreteSpace,
    collection: PatternCollection,
    offsets: Vec<usize>,
    columns: BinaryColumns,
}

impl MarginalOperator {
    pub fn new(space: &DiscreteSpace, collection: &PatternCollection) -> Result<Self> {
        let joint = space.joint_cells()?;
        let full = space.full_pattern();
        let s = collection.len();
        let mut offsets = Vec::with_capacity(s);
        let mut projections = Vec::with_capacity(s);
        let mut rows = 0;
        for p in collection.patterns() {
            space.check_pattern(p)?;
            offsets.push(rows);
            rows += space.cells(p)?;
            projections.push(cell_projection(space, &full, p)?);
        }
        let mut row_idx = Vec::with_capacity(joint * s);
        let mut col_ptr = Vec::with_capacity(joint + 1);
        col_ptr.push(0);
        for x in 0..joint {
            for (k, proj) in projections.iter().enumerate() {
                row_idx.push(offsets[k] + proj[x]);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            space: space.clone(),
            collection: collection.clone(),
            offsets,
            columns: BinaryColumns {
                rows,
                col_ptr,
                row_idx,
            },
        })
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn collection(&self) -> &PatternCollection {
        &self.collection
    }

    /// `|X_S|`, the number of rows.
    pub fn rows(&self) -> usize {
        self.columns.rows
    }

    /// `|X|`, the number of columns.
    pub fn cols(&self) -> usize {
        self.columns.cols()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn columns(&self) -> &BinaryColumns {
        &self.columns
    }

    /// Row indices of the ones in column `x`, one per pattern.
    pub fn column(&self, x: usize) -> &[usize] {
        self.columns.column(x)
    }

    /// `A p`: the stacked marginals of a joint vector.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.cols() {
            return Err(McarError::Domain(format!(
                "joint vector has {} entries, expected {}",
                p.len(),
                self.cols()
            )));
        }
        let mut out = vec![0.0; self.rows()];
        for (x, &v) in p.iter().enumerate() {
            if v != 0.0 {
                for &r in self.column(x) {
                    out[r] += v;
                }
            }
        }
        Ok(out)
    }

    /// `A' z`: for each joint cell, the sum of `z` over its pattern cells.
    pub fn apply_transpose(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.rows() {
            return Err(McarError::Domain(format!(
                "stacked vector has {} entries, expected {}",
                z.len(),
                self.rows()
            )));
        }
        Ok((0..self.cols())
            .map(|x| self.column(x).iter().map(|&r| z[r]).sum())
            .collect())
    }

    /// Dense row-major copy, for tests and small displays.
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let mut dense = vec![vec![0u8; self.cols()]; self.rows()];
        for x in 0..self.cols() {
            for &r in self.column(x) {
                dense[r][x] = 1;
            }
        }
        dense
    }
}

/// Free-function constructor.
pub fn marginal_operator(space: &DiscreteSpace, collection: &PatternCollection) -> Result<MarginalOperator> {
    MarginalOperator::new(space, collection)
}
