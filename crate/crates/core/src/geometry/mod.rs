//! Exact polyhedral computations for small instances: the marginal polytope
//! `P^0` (convex hull of the columns of `A`), the consistent polytope
//! `P^cons`, conversion between halfspace and vertex form, and the facets of
//! the Minkowski sum `P^{0,*} + P^{cons,**}` of the marginal cone and the
//! consistent ball.
//!
//! Everything is computed in arbitrary precision rationals by the double
//! description method in [`dd`]. Coordinates of a stacked sequence follow the
//! pattern order, each table in mixed-radix cell order.

pub mod dd;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{McarError, Result};
use crate::lp::MarginalOperator;
use crate::model::{cell_projection, DiscreteSpace, PatternCollection};
use dd::{dot_rational, extreme_rays, independent_rows, null_space, primitive, rref, to_rational, Bits, Vector};

/// Largest joint alphabet for which `P^0` is built.
pub const MAX_JOINT_CELLS: usize = 4096;

/// Largest number of live rays during a conversion.
pub const MAX_RAYS: usize = 100_000;

/// `a' x >= b` (inequality) or `a' x = b` (equality).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Halfspace {
    pub a: Vector,
    pub b: BigRational,
}

impl Halfspace {
    pub fn value(&self, x: &[BigRational]) -> BigRational {
        dot_rational(&self.a, x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Representation {
    H {
        inequalities: Vec<Halfspace>,
        equalities: Vec<Halfspace>,
    },
    V {
        vertices: Vec<Vector>,
        rays: Vec<Vector>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyhedron {
    pub dim: usize,
    pub repr: Representation,
}

impl Polyhedron {
    pub fn is_h(&self) -> bool {
        matches!(self.repr, Representation::H { .. })
    }

    pub fn inequalities(&self) -> &[Halfspace] {
        match &self.repr {
            Representation::H { inequalities, .. } => inequalities,
            Representation::V { .. } => &[],
        }
    }

    pub fn equalities(&self) -> &[Halfspace] {
        match &self.repr {
            Representation::H { equalities, .. } => equalities,
            Representation::V { .. } => &[],
        }
    }

    pub fn vertices(&self) -> &[Vector] {
        match &self.repr {
            Representation::V { vertices, .. } => vertices,
            Representation::H { .. } => &[],
        }
    }

    pub fn rays(&self) -> &[Vector] {
        match &self.repr {
            Representation::V { rays, .. } => rays,
            Representation::H { .. } => &[],
        }
    }

    /// Membership test for H-form.
    pub fn contains(&self, x: &[BigRational]) -> bool {
        self.inequalities().iter().all(|h| h.value(x) >= h.b) && self.equalities().iter().all(|h| h.value(x) == h.b)
    }
}

/// `P^0` in vertex form: the distinct columns of `A`.
pub fn marginal_polytope(space: &DiscreteSpace, collection: &PatternCollection) -> Result<Polyhedron> {
    space.joint_cells_within(MAX_JOINT_CELLS)?;
    let op = MarginalOperator::new(space, collection)?;
    let columns: BTreeSet<Vec<usize>> = (0..op.cols()).map(|x| op.column(x).to_vec()).collect();
    let vertices = columns
        .into_iter()
        .map(|ones| {
            let mut v = vec![BigRational::zero(); op.rows()];
            for r in ones {
                v[r] = BigRational::one();
            }
            v
        })
        .collect();
    Ok(Polyhedron {
        dim: op.rows(),
        repr: Representation::V {
            vertices,
            rays: Vec::new(),
        },
    })
}

fn stacked_layout(space: &DiscreteSpace, collection: &PatternCollection) -> Result<(Vec<usize>, usize)> {
    let mut offsets = Vec::with_capacity(collection.len());
    let mut dim = 0;
    for p in collection.patterns() {
        offsets.push(dim);
        dim += space.cells(p)?;
    }
    Ok((offsets, dim))
}

/// Consistency rows: one sum row per pattern,
/// then overlap marginal differences for every overlapping pair and cell.
fn consistency_rows(space: &DiscreteSpace, collection: &PatternCollection) -> Result<(Vec<Vector>, Vec<Vector>)> {
    let (offsets, dim) = stacked_layout(space, collection)?;
    let patterns = collection.patterns();
    let sums: Vec<Vector> = patterns
        .iter()
        .zip(&offsets)
        .map(|(p, &o)| {
            let mut row = vec![BigRational::zero(); dim];
            for c in 0..space.cells(p)? {
                row[o + c] = BigRational::one();
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut overlaps = Vec::new();
    for (i, k, shared) in collection.overlapping_pairs() {
        let pi = cell_projection(space, &patterns[i], &shared)?;
        let pk = cell_projection(space, &patterns[k], &shared)?;
        for cell in 0..space.cells(&shared)? {
            let mut row = vec![BigRational::zero(); dim];
            for (c, &t) in pi.iter().enumerate() {
                if t == cell {
                    row[offsets[i] + c] += BigRational::one();
                }
            }
            for (c, &t) in pk.iter().enumerate() {
                if t == cell {
                    row[offsets[k] + c] -= BigRational::one();
                }
            }
            overlaps.push(row);
        }
    }
    Ok((sums, overlaps))
}

/// `P^cons` in halfspace form: nonnegativity of every coordinate, each
/// table summing to one, and equal overlap marginals, with equalities that
/// are implied by earlier ones removed.
pub fn consistent_polytope(space: &DiscreteSpace, collection: &PatternCollection) -> Result<Polyhedron> {
    let (_, dim) = stacked_layout(space, collection)?;
    let (sums, overlaps) = consistency_rows(space, collection)?;
    let mut candidates: Vec<Halfspace> = sums
        .into_iter()
        .map(|a| Halfspace { a, b: BigRational::one() })
        .collect();
    candidates.extend(overlaps.into_iter().map(|a| Halfspace {
        a,
        b: BigRational::zero(),
    }));
    let augmented: Vec<Vector> = candidates
        .iter()
        .map(|h| {
            let mut r = h.a.clone();
            r.push(h.b.clone());
            r
        })
        .collect();
    let keep = independent_rows(&augmented);
    let equalities = keep.into_iter().map(|i| candidates[i].clone()).collect();
    let inequalities = (0..dim)
        .map(|j| {
            let mut a = vec![BigRational::zero(); dim];
            a[j] = BigRational::one();
            Halfspace {
                a,
                b: BigRational::zero(),
            }
        })
        .collect();
    Ok(Polyhedron {
        dim,
        repr: Representation::H {
            inequalities,
            equalities,
        },
    })
}

/// Facets of `cone(generators)` within the linear span of the generators.
struct ConeFacets {
    /// Facet normals as full-length vectors, supported on pivot coordinates.
    normals: Vec<Vec<BigInt>>,
    /// Generators lying on each facet.
    incidence: Vec<Bits>,
    /// Basis of the orthogonal complement of the span.
    complement: Vec<Vector>,
}

fn cone_facets(generators: &[Vec<BigInt>], dim: usize) -> Result<ConeFacets> {
    let rows: Vec<Vector> = generators.iter().map(|g| to_rational(g)).collect();
    let complement = null_space(&rows, dim);
    let mut echelon = rows.clone();
    let pivots = rref(&mut echelon);
    if pivots.is_empty() {
        return Ok(ConeFacets {
            normals: Vec::new(),
            incidence: Vec::new(),
            complement,
        });
    }
    // the span projects injectively onto the pivot coordinates
    let restricted: Vec<Vec<BigInt>> = generators
        .iter()
        .map(|g| pivots.iter().map(|&p| g[p].clone()).collect())
        .collect();
    let rays = if pivots.len() == 1 {
        vec![dd::Ray {
            vector: vec![BigInt::one()],
            zeros: {
                let mut z = Bits::new(generators.len());
                for (i, g) in restricted.iter().enumerate() {
                    if g[0].is_zero() {
                        z.set(i);
                    }
                }
                z
            },
        }]
    } else {
        extreme_rays(&restricted, MAX_RAYS)?
    };
    let normals = rays
        .iter()
        .map(|r| {
            let mut full = vec![BigInt::zero(); dim];
            for (&p, v) in pivots.iter().zip(&r.vector) {
                full[p] = v.clone();
            }
            full
        })
        .collect();
    Ok(ConeFacets {
        normals,
        incidence: rays.into_iter().map(|r| r.zeros).collect(),
        complement,
    })
}

fn integer_vector(v: &[BigRational]) -> Vec<BigInt> {
    primitive(v)
}

/// H-form to V-form or back, exactly.
///
/// H to V homogenizes `a'x >= b` to `a'x - b t >= 0, t >= 0`, solves the
/// equalities by a null space basis, and enumerates extreme rays; V to H
/// enumerates the facets of the homogenized cone of vertices `(v, 1)` and
/// rays `(r, 0)`, and reports the orthogonal complement of its span as
/// equalities. Polyhedra containing a line are not supported.
pub fn hv_convert(p: &Polyhedron) -> Result<Polyhedron> {
    match &p.repr {
        Representation::H {
            inequalities,
            equalities,
        } => h_to_v(p.dim, inequalities, equalities),
        Representation::V { vertices, rays } => v_to_h(p.dim, vertices, rays),
    }
}

fn homogenize(h: &Halfspace) -> Vector {
    let mut row = h.a.clone();
    row.push(-h.b.clone());
    row
}

fn h_to_v(dim: usize, inequalities: &[Halfspace], equalities: &[Halfspace]) -> Result<Polyhedron> {
    let n = dim + 1;
    let eq_rows: Vec<Vector> = equalities.iter().map(homogenize).collect();
    let basis = null_space(&eq_rows, n);
    let empty = Polyhedron {
        dim,
        repr: Representation::V {
            vertices: Vec::new(),
            rays: Vec::new(),
        },
    };
    if basis.is_empty() {
        return Ok(empty);
    }
    let mut ineq_rows: Vec<Vector> = inequalities.iter().map(homogenize).collect();
    let mut t_row = vec![BigRational::zero(); n];
    t_row[dim] = BigRational::one();
    ineq_rows.push(t_row);
    // y = N z with the basis vectors as the columns of N
    let reduced: Vec<Vec<BigInt>> = ineq_rows
        .iter()
        .map(|row| integer_vector(&basis.iter().map(|b| dot_rational(row, b)).collect::<Vector>()))
        .collect();
    let rays = if basis.len() == 1 {
        if reduced.iter().all(|r| !r[0].is_negative()) {
            vec![vec![BigInt::one()]]
        } else if reduced.iter().all(|r| !r[0].is_positive()) {
            vec![vec![-BigInt::one()]]
        } else {
            Vec::new()
        }
    } else {
        extreme_rays(&reduced, MAX_RAYS)
            .map_err(|e| match e {
                McarError::Domain(_) => McarError::Domain("polyhedron contains a line".into()),
                other => other,
            })?
            .into_iter()
            .map(|r| r.vector)
            .collect()
    };
    let mut vertices = Vec::new();
    let mut directions = Vec::new();
    for z in rays {
        let y: Vector = (0..n)
            .map(|i| {
                basis
                    .iter()
                    .zip(&z)
                    .map(|(b, zi)| &b[i] * BigRational::from_integer(zi.clone()))
                    .sum()
            })
            .collect();
        let t = y[dim].clone();
        if t.is_positive() {
            vertices.push(y[..dim].iter().map(|v| v / &t).collect());
        } else {
            directions.push(to_rational(&primitive(&y[..dim])));
        }
    }
    if vertices.is_empty() {
        return Ok(empty);
    }
    Ok(Polyhedron {
        dim,
        repr: Representation::V {
            vertices,
            rays: directions,
        },
    })
}

/// Generators `(t, x)` of the homogenized cone, `t` first.
fn lifted(vertices: &[Vector], rays: &[Vector]) -> Vec<Vec<BigInt>> {
    let mut out = Vec::with_capacity(vertices.len() + rays.len());
    for v in vertices {
        let mut g = vec![BigRational::one()];
        g.extend(v.iter().cloned());
        out.push(integer_vector(&g));
    }
    for r in rays {
        let mut g = vec![BigRational::zero()];
        g.extend(r.iter().cloned());
        out.push(integer_vector(&g));
    }
    out
}

/// Splits a lifted normal `(c_t, c_x)` into `c_x' x >= -c_t`.
fn unlift(normal: &[BigInt]) -> Halfspace {
    Halfspace {
        a: to_rational(&normal[1..]),
        b: -BigRational::from_integer(normal[0].clone()),
    }
}

fn v_to_h(dim: usize, vertices: &[Vector], rays: &[Vector]) -> Result<Polyhedron> {
    if vertices.is_empty() {
        // the empty set
        return Ok(Polyhedron {
            dim,
            repr: Representation::H {
                inequalities: vec![Halfspace {
                    a: vec![BigRational::zero(); dim],
                    b: BigRational::one(),
                }],
                equalities: Vec::new(),
            },
        });
    }
    let generators = lifted(vertices, rays);
    let cone = cone_facets(&generators, dim + 1)?;
    let inequalities = cone
        .normals
        .iter()
        .filter(|c| c[1..].iter().any(|v| !v.is_zero()))
        .map(|c| unlift(c))
        .collect();
    let equalities = cone
        .complement
        .iter()
        .map(|w| {
            let w = integer_vector(w);
            unlift(&w)
        })
        .collect();
    Ok(Polyhedron {
        dim,
        repr: Representation::H {
            inequalities,
            equalities,
        },
    })
}

/// Role of a row of a [`FacetSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Essential,
    Nonnegativity,
    Equality,
}

/// `a' p <= b` for inequalities, `a' p = b` for equalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetRow {
    pub a: Vector,
    pub b: BigRational,
    pub kind: RowKind,
}

impl FacetRow {
    pub fn value_f64(&self, p: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(p)
            .filter(|(a, _)| !a.is_zero())
            .map(|(a, &x)| a.to_f64().unwrap_or(f64::NAN) * x)
            .sum()
    }
}

/// Halfspace description of `P^{0,*} + P^{cons,**}` with classified rows.
///
/// Essential rows are scaled to `c' p <= 1`, so for a consistent sequence
/// `R(P) = max(0, max_l c_l' P)`. The matching dual functionals are
/// `f^(l) = -|S| c_l`. Each `c_l` is supported on a fixed set of pivot
/// coordinates and is meaningful on the span of the consistent cone only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetSystem {
    pub dim: usize,
    pub patterns: usize,
    pub rows: Vec<FacetRow>,
}

impl FacetSystem {
    pub fn count(&self, kind: RowKind) -> usize {
        self.rows.iter().filter(|r| r.kind == kind).count()
    }

    /// `F`, the number of essential facets.
    pub fn essential_count(&self) -> usize {
        self.count(RowKind::Essential)
    }

    pub fn essential(&self) -> impl Iterator<Item = &FacetRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Essential)
    }

    /// `max(0, max_l c_l' p)`; equals `R(P)` when `p` is consistent.
    pub fn facet_index(&self, p: &[f64]) -> f64 {
        self.essential().map(|r| r.value_f64(p)).fold(0.0, f64::max)
    }

    /// The dual functional `f^(l) = -|S| c_l` of the `l`-th essential row.
    pub fn functional(&self, l: usize) -> Option<Vec<f64>> {
        let s = self.patterns as f64;
        self.essential()
            .nth(l)
            .map(|r| r.a.iter().map(|a| -s * a.to_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let terms: Vec<serde_json::Value> = r
                    .a
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| !a.is_zero())
                    .map(|(j, a)| serde_json::json!([j, a.to_string()]))
                    .collect();
                serde_json::json!({ "kind": r.kind, "terms": terms, "rhs": r.b.to_string() })
            })
            .collect();
        serde_json::json!({
            "dim": self.dim,
            "essential": self.essential_count(),
            "nonnegativity": self.count(RowKind::Nonnegativity),
            "equality": self.count(RowKind::Equality),
            "normalization": "essential rows read c'p <= 1; functionals f = -|S| c",
            "rows": rows,
        })
    }
}

impl fmt::Display for FacetSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "F = {} essential, {} nonnegativity, {} equality rows (dimension {})",
            self.essential_count(),
            self.count(RowKind::Nonnegativity),
            self.count(RowKind::Equality),
            self.dim
        )?;
        for r in &self.rows {
            let terms: Vec<String> = r
                .a
                .iter()
                .enumerate()
                .filter(|(_, a)| !a.is_zero())
                .map(|(j, a)| format!("{a}*p{j}"))
                .collect();
            let op = if r.kind == RowKind::Equality { "=" } else { "<=" };
            let kind = match r.kind {
                RowKind::Essential => "essential",
                RowKind::Nonnegativity => "nonneg",
                RowKind::Equality => "equality",
            };
            writeln!(f, "{kind:<10} {} {op} {}", terms.join(" + "), r.b)?;
        }
        Ok(())
    }
}

/// Facets of `P^{0,*} + P^{cons,**}`: the cone over `A`'s columns plus the
/// consistent polytope scaled by `[0, 1]`. Its generators, lifted with a
/// leading coordinate `t`, are `(0, a_x)` for every column, `(1, v)` for the
/// vertices of `P^cons`, and `(1, 0)`. Facets whose tight generators are
/// exactly those with a zero coordinate `k` are the bounds `p_k >= 0`; the
/// face `t >= 0` is dropped; the rest are essential.
pub fn essential_facets_sum(space: &DiscreteSpace, collection: &PatternCollection) -> Result<FacetSystem> {
    let columns = marginal_polytope(space, collection)?;
    let dim = columns.dim;
    let cons = hv_convert(&consistent_polytope(space, collection)?)?;
    let zero = vec![BigRational::zero(); dim];
    let mut generators: Vec<Vec<BigInt>> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |g: Vec<BigInt>| {
        if seen.insert(g.clone()) {
            generators.push(g);
        }
    };
    for v in columns.vertices() {
        let mut g = vec![BigRational::zero()];
        g.extend(v.iter().cloned());
        push(integer_vector(&g));
    }
    for v in cons.vertices().iter().chain(std::iter::once(&zero)) {
        let mut g = vec![BigRational::one()];
        g.extend(v.iter().cloned());
        push(integer_vector(&g));
    }
    let cone = cone_facets(&generators, dim + 1)?;
    let (essential, mut bounds) = classify(&generators, &cone, dim);
    let mut rows = Vec::new();
    for normal in essential {
        // c_t + c_x' x >= 0 becomes (-c_x / c_t)' x <= 1
        let h = unlift(normal);
        let (a, b) = if h.b.is_negative() {
            let scale = -h.b.clone();
            (h.a.iter().map(|v| -v / &scale).collect(), BigRational::one())
        } else {
            (h.a.iter().map(|v| -v).collect(), BigRational::zero())
        };
        rows.push(FacetRow {
            a,
            b,
            kind: RowKind::Essential,
        });
    }
    bounds.sort_unstable();
    for k in bounds {
        let mut a = vec![BigRational::zero(); dim];
        a[k] = -BigRational::one();
        rows.push(FacetRow {
            a,
            b: BigRational::zero(),
            kind: RowKind::Nonnegativity,
        });
    }
    for w in &cone.complement {
        let h = unlift(&integer_vector(w));
        rows.push(FacetRow {
            a: h.a,
            b: h.b,
            kind: RowKind::Equality,
        });
    }
    Ok(FacetSystem {
        dim,
        patterns: collection.len(),
        rows,
    })
}

/// Splits the facets of a lifted cone into essential normals and the
/// coordinates `k` whose bound `x_k >= 0` is a facet. The face `t >= 0` is
/// neither.
fn classify<'a>(generators: &[Vec<BigInt>], cone: &'a ConeFacets, dim: usize) -> (Vec<&'a [BigInt]>, Vec<usize>) {
    let coordinate_faces: Vec<Bits> = (0..dim)
        .map(|k| {
            let mut b = Bits::new(generators.len());
            for (i, g) in generators.iter().enumerate() {
                if g[k + 1].is_zero() {
                    b.set(i);
                }
            }
            b
        })
        .collect();
    let mut essential = Vec::new();
    let mut bounds = Vec::new();
    for (normal, tight) in cone.normals.iter().zip(&cone.incidence) {
        if normal[1..].iter().all(|v| v.is_zero()) {
            continue;
        }
        match coordinate_faces.iter().position(|f| f == tight) {
            Some(k) => bounds.push(k),
            None => essential.push(normal.as_slice()),
        }
    }
    (essential, bounds)
}

/// Facet counts of `P^0` as (essential, nonnegativity).
pub fn marginal_polytope_facets(space: &DiscreteSpace, collection: &PatternCollection) -> Result<(usize, usize)> {
    let p = marginal_polytope(space, collection)?;
    let generators = lifted(p.vertices(), &[]);
    let cone = cone_facets(&generators, p.dim + 1)?;
    let (essential, bounds) = classify(&generators, &cone, p.dim);
    Ok((essential.len(), bounds.len()))
}
