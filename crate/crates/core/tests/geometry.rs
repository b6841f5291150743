use std::time::Instant;

use mcar_core::geometry::{
    consistent_polytope, essential_facets_sum, hv_convert, marginal_polytope, marginal_polytope_facets, Halfspace,
    Polyhedron, Representation, RowKind,
};
use mcar_core::model::{DiscreteSpace, PatternCollection};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcar_core::closedform::FamilyTag;
use mcar_core::geometry::FacetSystem;
use mcar_core::lp::index_value;
use mcar_core::sim::{random_compatible_with, random_consistent_with};

fn shape(sizes: &[usize], labels: &[&[usize]]) -> (DiscreteSpace, PatternCollection) {
    (
        DiscreteSpace::new(sizes.to_vec()).unwrap(),
        PatternCollection::from_labels(labels).unwrap(),
    )
}

fn q(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

const TRIANGLE: [&[usize]; 3] = [&[1, 2], &[2, 3], &[1, 3]];

#[test]
fn unit_square_has_four_vertices() {
    let ge = |a: Vec<i64>, b: i64| Halfspace {
        a: a.into_iter().map(q).collect(),
        b: q(b),
    };
    let square = Polyhedron {
        dim: 2,
        repr: Representation::H {
            inequalities: vec![ge(vec![1, 0], 0), ge(vec![0, 1], 0), ge(vec![-1, 0], -1), ge(vec![0, -1], -1)],
            equalities: vec![],
        },
    };
    let v = hv_convert(&square).unwrap();
    let mut vertices = v.vertices().to_vec();
    vertices.sort();
    assert_eq!(
        vertices,
        vec![vec![q(0), q(0)], vec![q(0), q(1)], vec![q(1), q(0)], vec![q(1), q(1)]]
    );
    assert!(v.rays().is_empty());
    // and back
    let h = hv_convert(&v).unwrap();
    assert_eq!(h.inequalities().len(), 4);
    assert!(h.equalities().is_empty());
    for x in &vertices {
        assert!(h.contains(x));
    }
    assert!(!h.contains(&[q(2), q(0)]));
}

#[test]
fn simplex_has_three_facets_and_one_equality() {
    let e = |i: usize| (0..3).map(|j| if i == j { q(1) } else { q(0) }).collect::<Vec<_>>();
    let simplex = Polyhedron {
        dim: 3,
        repr: Representation::V {
            vertices: vec![e(0), e(1), e(2)],
            rays: vec![],
        },
    };
    let h = hv_convert(&simplex).unwrap();
    assert_eq!(h.inequalities().len(), 3);
    assert_eq!(h.equalities().len(), 1);
    let centroid = vec![BigRational::new(BigInt::one(), BigInt::from(3)); 3];
    assert!(h.contains(&centroid));
    assert!(!h.contains(&[q(1), q(1), q(0)]));
    let back = hv_convert(&h).unwrap();
    let mut vs = back.vertices().to_vec();
    vs.sort();
    assert_eq!(vs, vec![e(2), e(1), e(0)]);
}

#[test]
fn unbounded_region_keeps_its_ray() {
    // x >= 0, y >= 0, x + y >= 1 in the plane has two vertices and two rays
    let ge = |a: Vec<i64>, b: i64| Halfspace {
        a: a.into_iter().map(q).collect(),
        b: q(b),
    };
    let p = Polyhedron {
        dim: 2,
        repr: Representation::H {
            inequalities: vec![ge(vec![1, 0], 0), ge(vec![0, 1], 0), ge(vec![1, 1], 1)],
            equalities: vec![],
        },
    };
    let v = hv_convert(&p).unwrap();
    assert_eq!(v.vertices().len(), 2);
    assert_eq!(v.rays().len(), 2);
    let h = hv_convert(&v).unwrap();
    assert_eq!(h.inequalities().len(), 3);
}

#[test]
fn marginal_polytope_of_the_triangle() {
    let (space, c) = shape(&[2, 2, 2], &TRIANGLE);
    let p = marginal_polytope(&space, &c).unwrap();
    assert_eq!(p.dim, 12);
    assert_eq!(p.vertices().len(), 8);
    let cons = consistent_polytope(&space, &c).unwrap();
    for v in p.vertices() {
        assert!(cons.contains(v));
    }
}

#[test]
fn marginal_polytope_of_one_pattern_is_a_simplex() {
    let (space, c) = shape(&[2, 3], &[&[1, 2]]);
    let p = marginal_polytope(&space, &c).unwrap();
    assert_eq!(p.vertices().len(), 6);
    assert_eq!(marginal_polytope_facets(&space, &c).unwrap(), (0, 6));
}

#[test]
fn marginal_polytope_guard() {
    let (space, c) = shape(&[2; 13], &[&[1, 2], &[2, 3]]);
    assert!(matches!(
        marginal_polytope(&space, &c),
        Err(mcar_core::McarError::Capacity { .. })
    ));
}

#[test]
fn consistent_polytope_row_reduction() {
    let (space, c) = shape(&[2, 2, 2], &[&[1, 2], &[2, 3]]);
    let p = consistent_polytope(&space, &c).unwrap();
    assert_eq!(p.inequalities().len(), 8);
    let eq = p.equalities();
    let sums = eq.iter().filter(|h| h.b == q(1)).count();
    let overlaps = eq.iter().filter(|h| h.b.is_zero()).count();
    assert_eq!((sums, overlaps), (2, 1));

    let (space, c) = shape(&[2, 2, 2, 2], &[&[1, 2], &[3, 4]]);
    let p = consistent_polytope(&space, &c).unwrap();
    assert!(p.equalities().iter().all(|h| h.b == q(1)));
}

#[test]
fn triangle_marginal_polytope_has_sixteen_facets() {
    let start = Instant::now();
    let (space, c) = shape(&[2, 2, 2], &TRIANGLE);
    let h = hv_convert(&marginal_polytope(&space, &c).unwrap()).unwrap();
    assert_eq!(h.inequalities().len(), 16);
    assert_eq!(marginal_polytope_facets(&space, &c).unwrap(), (4, 12));
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

/// Coordinates in the stacked layout `P_12, P_23, P_13`, 0-based levels.
fn p12(i: usize, j: usize) -> usize {
    2 * i + j
}
fn p23(j: usize, k: usize) -> usize {
    4 + 2 * j + k
}
fn p13(i: usize, k: usize) -> usize {
    8 + 2 * i + k
}

#[test]
fn triangle_essential_facets_of_the_marginal_polytope() {
    // p_{i, 1-j, .} + p_{., j, 2} + p_{1-i, ., 1} <= 1 for i, j in {1, 2}
    let (space, c) = shape(&[2, 2, 2], &TRIANGLE);
    let vertices = marginal_polytope(&space, &c).unwrap().vertices().to_vec();
    let h = hv_convert(&marginal_polytope(&space, &c).unwrap()).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let mut a = vec![q(0); 12];
            a[p12(i, 1 - j)] += q(1);
            a[p23(j, 1)] += q(1);
            a[p13(1 - i, 0)] += q(1);
            let tight: Vec<bool> = vertices.iter().map(|v| a.iter().zip(v).map(|(x, y)| x * y).sum::<BigRational>() == q(1)).collect();
            assert!(vertices.iter().all(|v| a.iter().zip(v).map(|(x, y)| x * y).sum::<BigRational>() <= q(1)));
            let found = h.inequalities().iter().any(|f| {
                vertices.iter().map(|v| f.value(v) == f.b).collect::<Vec<_>>() == tight
            });
            assert!(found, "facet for i={i} j={j} missing");
        }
    }
}

#[test]
fn triangle_sum_has_four_essential_facets() {
    let start = Instant::now();
    let (space, c) = shape(&[2, 2, 2], &TRIANGLE);
    let f = essential_facets_sum(&space, &c).unwrap();
    assert_eq!(f.essential_count(), 4);
    assert_eq!(f.count(RowKind::Nonnegativity), 12);
    assert!(f.essential().all(|r| r.b == q(1)));
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn single_pattern_has_no_essential_facets() {
    let (space, c) = shape(&[3, 2], &[&[1, 2]]);
    let f = essential_facets_sum(&space, &c).unwrap();
    assert_eq!(f.essential_count(), 0);
    assert_eq!(f.count(RowKind::Nonnegativity), 6);
}

#[test]
fn decomposable_chain_has_no_essential_facets() {
    let (space, c) = shape(&[2, 3, 2], &[&[1, 2], &[2, 3]]);
    assert_eq!(essential_facets_sum(&space, &c).unwrap().essential_count(), 0);
}

#[test]
fn rs2_counts_match_the_catalog() {
    for (r, s) in [(3, 2), (2, 3), (3, 3)] {
        let (space, c) = shape(&[r, s, 2], &TRIANGLE);
        let f = essential_facets_sum(&space, &c).unwrap();
        let expected = ((1 << r) - 2) * ((1 << s) - 2);
        assert_eq!(f.essential_count(), expected, "r={r} s={s}");
        let catalog = mcar_core::crit::facet_catalog(&space, &c).unwrap();
        assert_eq!(catalog.f_prime as usize, expected);
    }
}


/// Rank over the rationals by plain elimination.
fn rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..m.len() {
            if !m[i][c].is_zero() {
                let f = &m[i][c] / &m[r][c];
                let pivot = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
        r += 1;
    }
    r
}

/// Lifted generators `(t, x)` of the Minkowski sum, rebuilt from the public
/// constructors: columns of `A` as rays, consistent vertices and the origin
/// as points.
fn sum_generators(space: &DiscreteSpace, c: &PatternCollection) -> Vec<Vec<BigRational>> {
    let columns = marginal_polytope(space, c).unwrap();
    let cons = hv_convert(&consistent_polytope(space, c).unwrap()).unwrap();
    let mut out = Vec::new();
    for v in columns.vertices() {
        let mut g = vec![q(0)];
        g.extend(v.iter().cloned());
        out.push(g);
    }
    for v in cons.vertices() {
        let mut g = vec![q(1)];
        g.extend(v.iter().cloned());
        out.push(g);
    }
    let mut origin = vec![q(0); columns.dim + 1];
    origin[0] = q(1);
    out.push(origin);
    out
}

/// Every essential row is valid on the generators and tight on a set of
/// rank one less than the span: a genuine, irredundant facet.
fn assert_genuine_facets(space: &DiscreteSpace, c: &PatternCollection, f: &FacetSystem) {
    let gens = sum_generators(space, c);
    let full = rank(&gens);
    let mut tight_sets = Vec::new();
    for row in f.essential() {
        let mut tight = Vec::new();
        let mut pattern = Vec::new();
        for g in &gens {
            let lhs: BigRational = row.a.iter().zip(&g[1..]).map(|(a, x)| a * x).sum();
            let bound = &row.b * &g[0];
            assert!(lhs <= bound, "row violated by a generator");
            pattern.push(lhs == bound);
            if lhs == bound {
                tight.push(g.clone());
            }
        }
        assert_eq!(rank(&tight), full - 1);
        tight_sets.push(pattern);
    }
    let n = tight_sets.len();
    tight_sets.sort();
    tight_sets.dedup();
    assert_eq!(tight_sets.len(), n, "repeated facet");
}

fn d4(tag: FamilyTag) -> (DiscreteSpace, PatternCollection, FacetSystem) {
    let (space, c) = shape(&[2; 4], tag.labels());
    let f = essential_facets_sum(&space, &c).unwrap();
    (space, c, f)
}

#[test]
fn four_binary_variables_counts() {
    // the item with one triple is listed with 92 terms, of which 8 repeat
    for (tag, count, p0) in [
        (FamilyTag::Chain4, 8, 8),
        (FamilyTag::D4AllButOne, 16, 8),
        (FamilyTag::D4AllPairs, 56, 32),
        (FamilyTag::D4SingleTriple, 84, 28),
        (FamilyTag::D4AllTriples, 128, 32),
    ] {
        let (space, c, f) = d4(tag);
        assert_eq!(f.essential_count(), count, "{tag}");
        assert_eq!(marginal_polytope_facets(&space, &c).unwrap().0, p0, "{tag}");
        // exact entries carry D_R = 1; the pentagon bound (D_R = 2) may also list
        let exact: Vec<u64> = mcar_core::crit::facet_catalog_entries(&space, &c)
            .into_iter()
            .filter(|e| e.d_r == 1.0)
            .map(|e| e.f_prime)
            .collect();
        assert_eq!(exact, vec![count as u64], "{tag}");
        assert_genuine_facets(&space, &c, &f);
    }
}

#[test]
fn all_pairs_row_totals() {
    // 13 consistency equalities, 24 bounds, 56 essential: 93 rows
    let (_, _, f) = d4(FamilyTag::D4AllPairs);
    assert_eq!(f.count(RowKind::Equality), 13);
    assert_eq!(f.count(RowKind::Nonnegativity), 24);
    assert_eq!(f.rows.len(), 93);
}

#[test]
fn triangle_facets_are_genuine() {
    for sizes in [[2, 2, 2], [3, 2, 2], [3, 3, 2]] {
        let (space, c) = shape(&sizes, &TRIANGLE);
        assert_genuine_facets(&space, &c, &essential_facets_sum(&space, &c).unwrap());
    }
}

#[test]
fn triangle_facets_match_the_subset_form() {
    // -p_AB. + p_A.1 + p_.B1 - p_..1 <= 1/2 for proper nonempty A, B; two
    // functionals agree on the span iff they agree on every generator
    let (space, c) = shape(&[2, 2, 2], &TRIANGLE);
    let f = essential_facets_sum(&space, &c).unwrap();
    let gens = sum_generators(&space, &c);
    let on_gens = |a: &[BigRational], b: &BigRational| -> Vec<BigRational> {
        gens.iter()
            .map(|g| a.iter().zip(&g[1..]).map(|(x, y)| x * y).sum::<BigRational>() - b * &g[0])
            .collect()
    };
    let computed: Vec<Vec<BigRational>> = f.essential().map(|r| on_gens(&r.a, &r.b)).collect();
    for i in 0..2 {
        for j in 0..2 {
            let mut a = vec![q(0); 12];
            a[p12(i, j)] -= q(2);
            a[p13(i, 0)] += q(2);
            a[p23(j, 0)] += q(2);
            a[p13(0, 0)] -= q(2);
            a[p13(1, 0)] -= q(2);
            let expected = on_gens(&a, &q(1));
            assert!(computed.contains(&expected), "A={{{i}}} B={{{j}}}");
        }
    }
}

#[test]
fn facet_maximum_equals_the_index_on_consistent_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cases: Vec<(Vec<usize>, Vec<&[usize]>)> = vec![
        (vec![2, 2, 2], TRIANGLE.to_vec()),
        (vec![3, 3, 2], TRIANGLE.to_vec()),
        (vec![2; 4], FamilyTag::D4AllPairs.labels().to_vec()),
        (vec![2; 4], FamilyTag::D4SingleTriple.labels().to_vec()),
        (vec![2; 4], FamilyTag::D4AllTriples.labels().to_vec()),
    ];
    for (sizes, labels) in cases {
        let (space, c) = shape(&sizes, &labels);
        let f = essential_facets_sum(&space, &c).unwrap();
        for _ in 0..60 {
            let seq = random_consistent_with(&mut rng, &space, &c, None).unwrap();
            let lp = index_value(&seq).unwrap();
            let by_facets = f.facet_index(&seq.stacked());
            assert!((lp - by_facets).abs() <= 1e-8, "{sizes:?} {labels:?}: lp {lp} facets {by_facets}");
        }
    }
}

#[test]
fn compatible_sequences_satisfy_every_facet() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (sizes, labels) in [(vec![2, 2, 2], TRIANGLE.to_vec()), (vec![2; 4], FamilyTag::D4AllPairs.labels().to_vec())] {
        let (space, c) = shape(&sizes, &labels);
        let f = essential_facets_sum(&space, &c).unwrap();
        for _ in 0..1000 {
            let seq = random_compatible_with(&mut rng, &space, &c).unwrap();
            let p = seq.stacked();
            for row in f.essential() {
                assert!(row.value_f64(&p) <= 1e-12);
            }
        }
    }
}

#[test]
fn functionals_are_dual_feasible() {
    // sum over patterns of f_S(x_S) >= 0 at every joint cell
    let (space, c) = shape(&[2, 2, 2], &TRIANGLE);
    let f = essential_facets_sum(&space, &c).unwrap();
    let columns = marginal_polytope(&space, &c).unwrap();
    for l in 0..f.essential_count() {
        let func = f.functional(l).unwrap();
        for v in columns.vertices() {
            let total: f64 = func.iter().zip(v).map(|(a, x)| a * if x.is_positive() { 1.0 } else { 0.0 }).sum();
            assert!(total >= -1e-12);
        }
    }
}

#[test]
fn facet_system_renders() {
    let (space, c) = shape(&[2, 2, 2], &TRIANGLE);
    let f = essential_facets_sum(&space, &c).unwrap();
    let text = f.to_string();
    assert!(text.starts_with("F = 4 essential, 12 nonnegativity"));
    let json = f.to_json();
    assert_eq!(json["essential"], 4);
    assert_eq!(json["rows"].as_array().unwrap().len(), f.rows.len());
}
