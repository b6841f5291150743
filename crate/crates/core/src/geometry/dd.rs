//! Exact linear algebra over the rationals and the double description
//! method for the extreme rays of a pointed cone `{y : B y >= 0}`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{McarError, Result};

pub type Vector = Vec<BigRational>;

/// Fixed-width bitset over constraint (or generator) indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<u64>);

impl Bits {
    pub fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    pub fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    pub fn is_subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

pub fn to_rational(v: &[BigInt]) -> Vector {
    v.iter().map(|x| BigRational::from_integer(x.clone())).collect()
}

/// The primitive integer vector on the ray through `v` (zero stays zero).
pub fn primitive(v: &[BigRational]) -> Vec<BigInt> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    primitive_int(ints)
}

pub fn primitive_int(mut v: Vec<BigInt>) -> Vec<BigInt> {
    let g = v.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if !g.is_zero() && !g.is_one() {
        for x in &mut v {
            *x /= &g;
        }
    }
    v
}

pub fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).filter(|(x, y)| !x.is_zero() && !y.is_zero()).map(|(x, y)| x * y).sum()
}

pub fn dot_rational(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).filter(|(x, y)| !x.is_zero() && !y.is_zero()).map(|(x, y)| x * y).sum()
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(rows: &mut Vec<Vector>) -> Vec<usize> {
    let n = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for x in &mut rows[r] {
            *x *= &inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

/// Indices of a maximal independent subset of `rows`, greedily in order.
pub fn independent_rows(rows: &[Vector]) -> Vec<usize> {
    // echelon basis kept as (pivot column, normalized row)
    let mut basis: Vec<(usize, Vector)> = Vec::new();
    let mut kept = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut v = row.clone();
        for (c, b) in &basis {
            if !v[*c].is_zero() {
                let f = v[*c].clone();
                for (x, y) in v.iter_mut().zip(b) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        if let Some(c) = v.iter().position(|x| !x.is_zero()) {
            let inv = v[c].recip();
            for x in &mut v {
                *x *= &inv;
            }
            for (_, b) in basis.iter_mut() {
                if !b[c].is_zero() {
                    let f = b[c].clone();
                    for (x, y) in b.iter_mut().zip(&v) {
                        if !y.is_zero() {
                            *x -= &f * y;
                        }
                    }
                }
            }
            basis.push((c, v));
            kept.push(i);
        }
    }
    kept
}

/// A basis of `{x : rows x = 0}` in `n` unknowns.
pub fn null_space(rows: &[Vector], n: usize) -> Vec<Vector> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); n];
            v[f] = BigRational::one();
            for (row, &p) in m.iter().zip(&pivots) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect()
}

/// Inverse of a square nonsingular matrix.
fn inverse(a: &[Vector]) -> Vec<Vector> {
    let n = a.len();
    let mut aug: Vec<Vector> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    rref(&mut aug);
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// An extreme ray with the constraints it makes tight.
#[derive(Debug, Clone)]
pub struct Ray {
    pub vector: Vec<BigInt>,
    pub zeros: Bits,
}

/// Extreme rays of `{y : rows y >= 0}`, which must be pointed (rows of full
/// column rank). After an initial simplicial basis, constraints are inserted
/// greedily by fewest candidate pairs. A new ray is formed only from adjacent
/// pairs, decided by the combinatorial test on tight sets. Fails once more
/// than `limit` rays are alive.
pub fn extreme_rays(rows: &[Vec<BigInt>], limit: usize) -> Result<Vec<Ray>> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    if n == 0 {
        return Ok(Vec::new());
    }
    let rational_rows: Vec<Vector> = rows.iter().map(|r| to_rational(r)).collect();
    let basis = independent_rows(&rational_rows);
    if basis.len() < n {
        return Err(McarError::Domain(format!(
            "cone is not pointed: constraint rank {} < dimension {n}",
            basis.len()
        )));
    }
    let inv = inverse(&basis.iter().map(|&i| rational_rows[i].clone()).collect::<Vec<_>>());
    let mut rays: Vec<Ray> = (0..n)
        .map(|k| {
            let column: Vector = inv.iter().map(|row| row[k].clone()).collect();
            let mut zeros = Bits::new(m);
            for (j, &b) in basis.iter().enumerate() {
                if j != k {
                    zeros.set(b);
                }
            }
            Ray {
                vector: primitive(&column),
                zeros,
            }
        })
        .collect();
    let mut pending: Vec<usize> = (0..m).filter(|i| !basis.contains(i)).collect();
    let mut processed = basis.len();

    while !pending.is_empty() {
        // insert the constraint with the fewest candidate pairs next, lowest
        // index on ties
        let mut best: Option<(usize, usize, Vec<BigInt>)> = None;
        for (slot, &h) in pending.iter().enumerate() {
            let values: Vec<BigInt> = rays.iter().map(|r| dot(&rows[h], &r.vector)).collect();
            let pos = values.iter().filter(|v| v.is_positive()).count();
            let neg = values.iter().filter(|v| v.is_negative()).count();
            let pairs = pos * neg;
            if best.as_ref().is_none_or(|(b, _, _)| pairs < *b) {
                best = Some((pairs, slot, values));
            }
            if pairs == 0 {
                break;
            }
        }
        let (_, slot, values) = best.expect("pending is nonempty");
        let h = pending.remove(slot);
        processed += 1;
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| values[i].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| values[i].is_negative()).collect();
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len());
        for &p in &pos {
            for &q in &neg {
                let common = rays[p].zeros.and(&rays[q].zeros);
                if common.count() + 2 < n {
                    continue;
                }
                let adjacent = !rays
                    .iter()
                    .enumerate()
                    .any(|(w, r)| w != p && w != q && common.is_subset_of(&r.zeros));
                if !adjacent {
                    continue;
                }
                let a = &values[p];
                let b = -&values[q];
                let vector: Vec<BigInt> = rays[q]
                    .vector
                    .iter()
                    .zip(&rays[p].vector)
                    .map(|(x, y)| a * x + &b * y)
                    .collect();
                let mut zeros = common;
                zeros.set(h);
                next.push(Ray {
                    vector: primitive_int(vector),
                    zeros,
                });
            }
        }
        for (i, mut r) in rays.into_iter().enumerate() {
            if values[i].is_zero() {
                r.zeros.set(h);
                next.push(r);
            } else if values[i].is_positive() {
                next.push(r);
            }
        }
        if next.len() > limit {
            return Err(McarError::RayLimit {
                processed,
                total: m,
                rays: next.len(),
                limit,
            });
        }
        rays = next;
    }
    Ok(rays)
}
