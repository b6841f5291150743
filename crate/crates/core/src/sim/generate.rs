//! Random instances for oracle suites: compatible sequences `A p`, arbitrary
//! probability sequences, and consistent sequences obtained by walking to
//! vertices of the consistent polytope.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::Result;
use crate::lp::MarginalOperator;
use crate::model::{cell_projection, DiscreteSpace, MarginalSequence, PatternCollection};

/// Normalized vector of `n` independent Exp(1) draws (flat Dirichlet).
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Like [`dirichlet`] but with a random subset of cells set to zero, which
/// pushes instances onto faces where degenerate LPs occur.
pub fn sparse_dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let keep: f64 = rng.random_range(0.3..1.0);
    let mut v: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < keep { Exp1.sample(rng) } else { 0.0 })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.random_range(0..n)] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// `A p` for a random joint `p`; compatible by construction.
pub fn random_compatible_with<R: Rng + ?Sized>(
    rng: &mut R,
    space: &DiscreteSpace,
    collection: &PatternCollection,
) -> Result<MarginalSequence> {
    let op = MarginalOperator::new(space, collection)?;
    let p = if rng.random::<bool>() {
        dirichlet(rng, op.cols())
    } else {
        sparse_dirichlet(rng, op.cols())
    };
    sequence_from_stacked(space, collection, &op.apply(&p)?)
}

pub fn random_compatible(
    space: &DiscreteSpace,
    collection: &PatternCollection,
    seed: u64,
) -> Result<MarginalSequence> {
    random_compatible_with(&mut ChaCha8Rng::seed_from_u64(seed), space, collection)
}

/// Independent random tables; generically inconsistent.
pub fn random_sequence_with<R: Rng + ?Sized>(
    rng: &mut R,
    space: &DiscreteSpace,
    collection: &PatternCollection,
) -> Result<MarginalSequence> {
    let masses = collection
        .patterns()
        .iter()
        .map(|p| {
            let n = space.cells(p)?;
            Ok(if rng.random::<bool>() {
                dirichlet(rng, n)
            } else {
                sparse_dirichlet(rng, n)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MarginalSequence::from_masses_normalized(space.clone(), collection.clone(), masses)
}

/// Linear equalities cutting out the affine hull of the consistent sequences:
/// per-pattern sums and overlap-marginal agreement, over stacked coordinates.
pub fn consistency_rows(space: &DiscreteSpace, collection: &PatternCollection) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut offsets = Vec::new();
    let mut at = 0;
    for p in collection.patterns() {
        offsets.push(at);
        at += space.cells(p)?;
    }
    let mut rows = Vec::new();
    for (k, p) in collection.patterns().iter().enumerate() {
        let n = space.cells(p)?;
        rows.push((0..n).map(|c| (offsets[k] + c, 1.0)).collect());
    }
    for (i, k, shared) in collection.overlapping_pairs() {
        let (pi, pk) = (&collection.patterns()[i], &collection.patterns()[k]);
        let map_i = cell_projection(space, pi, &shared)?;
        let map_k = cell_projection(space, pk, &shared)?;
        for cell in 0..space.cells(&shared)? {
            let mut row: Vec<(usize, f64)> = Vec::new();
            row.extend(map_i.iter().enumerate().filter(|(_, &t)| t == cell).map(|(c, _)| (offsets[i] + c, 1.0)));
            row.extend(map_k.iter().enumerate().filter(|(_, &t)| t == cell).map(|(c, _)| (offsets[k] + c, -1.0)));
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Orthonormal basis of the span of `rows` restricted to the free coordinates.
fn orthonormal_rows(rows: &[Vec<(usize, f64)>], dim: usize, free: &[bool]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut v = vec![0.0; dim];
        for &(c, a) in row {
            if free[c] {
                v[c] += a;
            }
        }
        for _ in 0..2 {
            for u in &basis {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-9 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Walks from `start` inside the consistent polytope, each step moving along a
/// random feasible direction until a coordinate reaches zero, and stops at a
/// vertex.
pub fn walk_to_vertex<R: Rng + ?Sized>(
    rng: &mut R,
    rows: &[Vec<(usize, f64)>],
    start: &[f64],
) -> Vec<f64> {
    let dim = start.len();
    let mut q = start.to_vec();
    let mut free: Vec<bool> = q.iter().map(|&v| v > 1e-13).collect();
    for (v, &f) in q.iter_mut().zip(&free) {
        if !f {
            *v = 0.0;
        }
    }
    for _ in 0..dim {
        let basis = orthonormal_rows(rows, dim, &free);
        let mut d: Vec<f64> = (0..dim)
            .map(|c| if free[c] { StandardNormal.sample(rng) } else { 0.0 })
            .collect();
        for _ in 0..2 {
            for u in &basis {
                let dot: f64 = d.iter().zip(u).map(|(a, b)| a * b).sum();
                d.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        for (x, &f) in d.iter_mut().zip(&free) {
            if !f {
                *x = 0.0;
            }
        }
        let norm = d.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-9 {
            break;
        }
        let mut step = f64::INFINITY;
        let mut hit = None;
        for c in 0..dim {
            if free[c] && d[c] < -1e-12 * norm {
                let t = q[c] / -d[c];
                if t < step {
                    step = t;
                    hit = Some(c);
                }
            }
        }
        let Some(hit) = hit else { break };
        for c in 0..dim {
            if free[c] {
                q[c] += step * d[c];
            }
        }
        q[hit] = 0.0;
        free[hit] = false;
        for c in 0..dim {
            if free[c] && q[c] <= 1e-13 {
                q[c] = 0.0;
                free[c] = false;
            }
        }
    }
    q
}

fn sequence_from_stacked(
    space: &DiscreteSpace,
    collection: &PatternCollection,
    stacked: &[f64],
) -> Result<MarginalSequence> {
    let mut masses = Vec::new();
    let mut at = 0;
    for p in collection.patterns() {
        let n = space.cells(p)?;
        masses.push(stacked[at..at + n].iter().map(|v| v.max(0.0)).collect());
        at += n;
    }
    MarginalSequence::from_masses_normalized(space.clone(), collection.clone(), masses)
}

/// A consistent, usually incompatible, sequence with uniform proper
/// sub-marginals: `p_S(x) = (1 + s_S prod_j g_j(x_j)) / |X_S|`, where each
/// `g_j` is a random zero-sum `{-1, 0, 1}` labeling of `[m_j]` and `s_S` a
/// random sign. Patterns contained in another pattern get `s_S = 0`.
pub fn parity_seed<R: Rng + ?Sized>(
    rng: &mut R,
    space: &DiscreteSpace,
    collection: &PatternCollection,
) -> Result<Vec<f64>> {
    let labels: Vec<Vec<f64>> = space
        .alphabet_sizes()
        .iter()
        .map(|&m| {
            let mut g = vec![0.0; m];
            let mut order: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            for pair in order.chunks_exact(2) {
                g[pair[0]] = 1.0;
                g[pair[1]] = -1.0;
            }
            g
        })
        .collect();
    let mut stacked = Vec::new();
    for p in collection.patterns() {
        let nested = collection.patterns().iter().any(|q| q != p && p.is_subset_of(q));
        let sign = if nested {
            0.0
        } else if rng.random::<bool>() {
            1.0
        } else {
            -1.0
        };
        let cells = space.cells(p)?;
        let radices: Vec<usize> = p.members().iter().map(|&j| space.size(j)).collect();
        let mut digits = vec![0usize; p.len()];
        for _ in 0..cells {
            let prod: f64 = p.members().iter().zip(&digits).map(|(&j, &x)| labels[j][x]).product();
            stacked.push((1.0 + sign * prod) / cells as f64);
            for pos in (0..digits.len()).rev() {
                digits[pos] += 1;
                if digits[pos] < radices[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
    Ok(stacked)
}

/// A random consistent sequence: `lambda * A p + (1 - lambda) * v`, where `v`
/// mixes one to three vertices of the consistent polytope reached by random
/// walks. Walks start either from the compatible point or from a
/// [`parity_seed`], whose faces hold many incompatible vertices. With
/// `lambda = 1` the result is compatible.
pub fn random_consistent_with<R: Rng + ?Sized>(
    rng: &mut R,
    space: &DiscreteSpace,
    collection: &PatternCollection,
    lambda: Option<f64>,
) -> Result<MarginalSequence> {
    let op = MarginalOperator::new(space, collection)?;
    let rows = consistency_rows(space, collection)?;
    let compatible = op.apply(&dirichlet(rng, op.cols()))?;
    let lambda = lambda.unwrap_or_else(|| {
        // favor the extremes, where the index is large or exactly zero
        match rng.random_range(0..4) {
            0 => 0.0,
            1 => rng.random_range(0.0..0.3),
            _ => rng.random::<f64>(),
        }
    });
    let k = rng.random_range(1..=3);
    let weights = dirichlet(rng, k);
    let mut mixed: Vec<f64> = compatible.iter().map(|v| lambda * v).collect();
    for w in weights {
        let start = if rng.random::<bool>() {
            compatible.clone()
        } else {
            parity_seed(rng, space, collection)?
        };
        let vertex = walk_to_vertex(rng, &rows, &start);
        for (m, v) in mixed.iter_mut().zip(&vertex) {
            *m += (1.0 - lambda) * w * v;
        }
    }
    sequence_from_stacked(space, collection, &mixed)
}

pub fn random_consistent(
    space: &DiscreteSpace,
    collection: &PatternCollection,
    seed: u64,
) -> Result<MarginalSequence> {
    random_consistent_with(&mut ChaCha8Rng::seed_from_u64(seed), space, collection, None)
}
