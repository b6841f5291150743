//! Shared test oracles, built without any of the library's LP machinery.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use mcar_core::model::cell_projection;
use mcar_core::{MarginalSequence, Pattern};

/// Row index of joint cell `x` in pattern block `k`, by direct digit
/// arithmetic (first variable most significant).
fn pattern_cell(sizes: &[usize], pattern: &[usize], x: usize) -> usize {
    let d = sizes.len();
    let mut digits = vec![0; d];
    let mut rest = x;
    for j in (0..d).rev() {
        digits[j] = rest % sizes[j];
        rest /= sizes[j];
    }
    pattern.iter().fold(0, |acc, &j| acc * sizes[j] + digits[j])
}

/// Dense 0/1 marginal operator, rows stacked pattern by pattern.
pub fn brute_operator(sizes: &[usize], patterns: &[Vec<usize>]) -> Vec<Vec<u8>> {
    let joint: usize = sizes.iter().product();
    let mut blocks = Vec::new();
    for p in patterns {
        let cells: usize = p.iter().map(|&j| sizes[j]).product();
        let mut block = vec![vec![0u8; joint]; cells];
        for x in 0..joint {
            block[pattern_cell(sizes, p, x)][x] = 1;
        }
        blocks.extend(block);
    }
    blocks
}

fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// `max 1'p s.t. A p <= b, p >= 0` in exact rationals by a dense tableau
/// simplex with Bland's rule. Returns the optimum as a rational.
pub fn exact_packing_optimum(a: &[Vec<u8>], b: &[f64]) -> BigRational {
    let m = a.len();
    let n = a[0].len();
    let width = n + m + 1;
    // tableau rows: constraint rows then the objective row (reduced costs)
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut row = vec![BigRational::zero(); width];
        for j in 0..n {
            if a[i][j] == 1 {
                row[j] = BigRational::one();
            }
        }
        row[n + i] = BigRational::one();
        row[width - 1] = rat(b[i]);
        t.push(row);
    }
    let mut obj = vec![BigRational::zero(); width];
    for v in obj.iter_mut().take(n) {
        *v = BigRational::one();
    }
    t.push(obj);
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(enter) = (0..n + m).find(|&j| t[m][j].is_positive()) else {
            break;
        };
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if !t[i][enter].is_positive() {
                continue;
            }
            let ratio = &t[i][width - 1] / &t[i][enter];
            leave = match leave {
                None => Some(i),
                Some(l) => {
                    let best = &t[l][width - 1] / &t[l][enter];
                    if ratio < best || (ratio == best && basis[i] < basis[l]) {
                        Some(i)
                    } else {
                        Some(l)
                    }
                }
            };
        }
        let l = leave.expect("packing LPs are bounded");
        let piv = t[l][enter].clone();
        for v in t[l].iter_mut() {
            *v = &*v / &piv;
        }
        let pivot_row = t[l].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == l || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= &f * p;
            }
        }
        basis[l] = enter;
    }
    -t[m][width - 1].clone()
}

/// `R` by the exact oracle, for sequences small enough to enumerate.
pub fn exact_index(seq: &MarginalSequence) -> f64 {
    let sizes = seq.space().alphabet_sizes().to_vec();
    let patterns: Vec<Vec<usize>> = seq.patterns().iter().map(|p| p.members().to_vec()).collect();
    let a = brute_operator(&sizes, &patterns);
    let opt = exact_packing_optimum(&a, &seq.stacked());
    let value = BigRational::one() - opt;
    let (num, den) = (value.numer().clone(), value.denom().clone());
    ratio_to_f64(&num, &den)
}

fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    // scale to keep 60 significant bits before converting
    let scaled: BigInt = (num << 64usize) / den;
    let v: f64 = scaled.to_string().parse().expect("integer");
    v / 2f64.powi(64)
}

/// LP value by enumerating all bases would be too slow; this helper gives the
/// cheap brute-force check that `R = 1` iff no joint cell is supported.
pub fn no_joint_support(seq: &MarginalSequence) -> bool {
    let sizes = seq.space().alphabet_sizes().to_vec();
    let joint: usize = sizes.iter().product();
    (0..joint).all(|x| {
        seq.tables().iter().any(|t| {
            let cell = pattern_cell(&sizes, t.pattern().members(), x);
            t.mass()[cell] <= 0.0
        })
    })
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol:e}, diff {:e})", (a - b).abs());
}

/// Rescales each table so that its marginal on `j` equals `target`.
pub fn force_shared_marginal(seq: &MarginalSequence, j: &Pattern, target: &[f64]) -> MarginalSequence {
    let masses = seq
        .tables()
        .iter()
        .map(|t| {
            let map = cell_projection(seq.space(), t.pattern(), j).unwrap();
            let own = t.restrict(seq.space(), j).unwrap();
            let per_slice = (t.len() / target.len()) as f64;
            t.mass()
                .iter()
                .zip(&map)
                .map(|(&m, &c)| match own.mass()[c] {
                    w if w > 0.0 => m * target[c] / w,
                    _ => target[c] / per_slice,
                })
                .collect()
        })
        .collect();
    MarginalSequence::from_masses_normalized(seq.space().clone(), seq.collection().clone(), masses).unwrap()
}
